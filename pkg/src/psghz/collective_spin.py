"""
Collective spin algebra on the fully symmetric (Dicke) subspace.

Basis convention: index ``k = 0..N`` is the Dicke state ``|N/2, M = N/2 - k>``,
so the stretched state (all spins up) is the first basis vector.

A small brute-force oracle working in the full ``2**N`` Hilbert space is
included for cross-checking the collective-operator route at N <= 4.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

MAX_PARTICLES = 200
NORM_TOL = 1e-10

Axis = Union[str, float]

_KINDS = frozenset({"hermitian", "unitary", "diagonal", "general"})


def _check_n(n: int) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise TypeError(f"particle number must be an integer, got {n!r}")
    n = int(n)
    if n < 1:
        raise ValueError(f"particle number must be >= 1, got {n}")
    if n > MAX_PARTICLES:
        raise ValueError(f"particle number {n} exceeds supported maximum {MAX_PARTICLES}")
    return n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DickeState:
    """Normalized pure state in the symmetric subspace of ``n_particles`` spins."""

    n_particles: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = _check_n(self.n_particles)
        amps = _frozen(np.asarray(self.amplitudes).ravel())
        if amps.shape != (n + 1,):
            raise ValueError(f"expected {n + 1} amplitudes for N={n}, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if not abs(norm - 1.0) <= NORM_TOL:
            raise ValueError(f"state is not normalized (norm = {norm!r})")
        object.__setattr__(self, "n_particles", n)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, n_particles: int, amplitudes) -> "DickeState":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if not norm > 0:
            raise ValueError("cannot normalize a zero vector")
        return cls(n_particles, amps / norm)

    @classmethod
    def basis(cls, n_particles: int, k: int) -> "DickeState":
        """The Dicke state ``|N/2, N/2 - k>``."""
        n = _check_n(n_particles)
        if not 0 <= k <= n:
            raise ValueError(f"basis index {k} out of range for N={n}")
        amps = np.zeros(n + 1, dtype=complex)
        amps[k] = 1.0
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    @property
    def m_values(self) -> np.ndarray:
        return m_values(self.n_particles)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    """Dense operator on the (N+1)-dimensional Dicke subspace.

    ``kind`` is a set of structural promises (``hermitian``, ``unitary``,
    ``diagonal``, ``general``); each one is verified at construction.
    """

    n_particles: int
    matrix: np.ndarray = field(repr=False)
    kind: frozenset = frozenset({"general"})

    def __post_init__(self):
        n = _check_n(self.n_particles)
        mat = _frozen(self.matrix)
        if mat.shape != (n + 1, n + 1):
            raise ValueError(f"expected a {(n + 1, n + 1)} matrix, got {mat.shape}")
        kind = frozenset([self.kind] if isinstance(self.kind, str) else self.kind)
        unknown = kind - _KINDS
        if unknown:
            raise ValueError(f"unknown operator kind(s): {sorted(unknown)}")
        if "hermitian" in kind and np.max(np.abs(mat - mat.conj().T)) > 1e-12:
            raise ValueError("matrix promised hermitian but is not")
        if "unitary" in kind:
            defect = np.max(np.abs(mat @ mat.conj().T - np.eye(n + 1)))
            if defect > 1e-10:
                raise ValueError(f"matrix promised unitary but U U^+ - I = {defect:.3g}")
        if "diagonal" in kind and np.any(mat[~np.eye(n + 1, dtype=bool)] != 0):
            raise ValueError("matrix promised diagonal but has off-diagonal entries")
        object.__setattr__(self, "n_particles", n)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "kind", kind)

    def __matmul__(self, other):
        if isinstance(other, CollectiveOperator):
            if other.n_particles != self.n_particles:
                raise ValueError("particle number mismatch")
            kind = {"unitary"} if {"unitary"} <= self.kind & other.kind else {"general"}
            return CollectiveOperator(self.n_particles, self.matrix @ other.matrix, kind)
        if isinstance(other, DickeState):
            return apply(self, other)
        return NotImplemented


# --- basis and generators -------------------------------------------------


def m_values(n: int) -> np.ndarray:
    """Projection quantum numbers ``M = N/2 - k`` in basis order."""
    n = _check_n(n)
    return n / 2 - np.arange(n + 1)


@functools.lru_cache(maxsize=None)
def _raising(n: int) -> np.ndarray:
    j = n / 2
    m = m_values(n)
    # J+ |J, M> = sqrt(J(J+1) - M(M+1)) |J, M+1>; M+1 sits one index lower
    jp = np.zeros((n + 1, n + 1))
    jp[np.arange(n), np.arange(1, n + 1)] = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp.setflags(write=False)
    return jp


def build_jz(n: int) -> CollectiveOperator:
    n = _check_n(n)
    return CollectiveOperator(n, np.diag(m_values(n)), {"diagonal", "hermitian"})


def build_jx(n: int) -> CollectiveOperator:
    n = _check_n(n)
    jp = _raising(n)
    return CollectiveOperator(n, (jp + jp.T) / 2, {"hermitian"})


def build_jy(n: int) -> CollectiveOperator:
    n = _check_n(n)
    jp = _raising(n)
    return CollectiveOperator(n, (jp - jp.T) / 2j, {"hermitian"})


@functools.lru_cache(maxsize=None)
def _eigh(axis: str, n: int):
    gen = {"x": build_jx, "y": build_jy}[axis](n).matrix
    w, v = np.linalg.eigh(gen)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def _rotation_matrix(axis: Axis, angle: float, n: int) -> np.ndarray:
    if not np.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle!r}")
    if isinstance(axis, str):
        axis = axis.lower()
        if axis == "z":
            return np.diag(np.exp(-1j * angle * m_values(n)))
        if axis not in ("x", "y"):
            raise ValueError(f"unknown rotation axis {axis!r}")
        w, v = _eigh(axis, n)
        return (v * np.exp(-1j * angle * w)) @ v.conj().T
    # equatorial axis at azimuth phi: exp(-i a (cos phi Jx + sin phi Jy))
    phi = float(axis)
    if not np.isfinite(phi):
        raise ValueError(f"rotation azimuth must be finite, got {axis!r}")
    rx = _rotation_matrix("x", angle, n)
    ph = np.exp(-1j * phi * m_values(n))
    return (ph[:, None] * rx) * ph.conj()[None, :]


@functools.lru_cache(maxsize=1024)
def rotation(axis: Axis, angle: float, n: int) -> CollectiveOperator:
    """``exp(-i angle J_axis)``.

    ``axis`` is ``"x"``, ``"y"``, ``"z"``, or a float azimuth selecting the
    equatorial axis ``cos(phi) x + sin(phi) y``.
    """
    n = _check_n(n)
    kind = {"unitary", "diagonal"} if axis == "z" else {"unitary"}
    return CollectiveOperator(n, _rotation_matrix(axis, float(angle), n), kind)


def equatorial_rotation(azimuth: float, angle: float, n: int) -> CollectiveOperator:
    return rotation(float(azimuth), angle, n)


# --- reference states -----------------------------------------------------


def stretched_state(n: int) -> DickeState:
    """``|N/2, N/2>``, all spins up."""
    return DickeState.basis(n, 0)


def coherent_spin_state(n: int) -> DickeState:
    """Real, non-negative binomial amplitudes ``2^(-N/2) C(N, N/2+M)^(1/2)``.

    Evaluated in log space so large N does not overflow.
    """
    n = _check_n(n)
    k = np.arange(n + 1)
    # C(N, N/2 + M) with N/2 + M = N - k equals C(N, k)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    amps = np.exp(0.5 * (log_binom - n * np.log(2.0)))
    return DickeState.from_unnormalized(n, amps)


def ghz_state(n: int, relative_phase: float = 0.0) -> DickeState:
    n = _check_n(n)
    amps = np.zeros(n + 1, dtype=complex)
    amps[0] = 1 / np.sqrt(2)
    amps[n] = np.exp(1j * relative_phase) / np.sqrt(2)
    return DickeState(n, amps)


# --- state operations -----------------------------------------------------


def squeeze(state: DickeState, chi_t: float) -> DickeState:
    """One-axis twisting ``exp(-i chi_t Jz^2)``; a pure phase per M."""
    m = state.m_values
    return DickeState(state.n_particles, state.amplitudes * np.exp(-1j * chi_t * m**2))


def apply(op: CollectiveOperator, state: DickeState) -> DickeState:
    """Matrix-vector product without renormalization.

    Raises if the particle numbers differ or the norm drifts by more than
    ``1e-10``, which means a non-unitary operator was passed.
    """
    if op.n_particles != state.n_particles:
        raise ValueError(
            f"dimension mismatch: operator N={op.n_particles}, state N={state.n_particles}"
        )
    out = op.matrix @ state.amplitudes
    drift = abs(np.linalg.norm(out) - 1.0)
    if drift > NORM_TOL:
        raise ValueError(f"operator changed the norm by {drift:.3g}; not unitary")
    return DickeState(state.n_particles, out)


def overlap(a: DickeState, b: DickeState) -> complex:
    if a.n_particles != b.n_particles:
        raise ValueError(f"dimension mismatch: N={a.n_particles} vs N={b.n_particles}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: DickeState, b: DickeState) -> float:
    """Overlap fidelity ``|<a|b>|^2``, clipped to [0, 1]."""
    return float(min(1.0, abs(overlap(a, b)) ** 2))


def ghz_fidelity_phase_opt(state: DickeState) -> tuple[float, float]:
    """Best GHZ fidelity over the relative phase, and the maximizing phase."""
    a0, an = state.amplitudes[0], state.amplitudes[-1]
    f = min(1.0, (abs(a0) + abs(an)) ** 2 / 2)
    # phase of a_N relative to a_0, matching the ghz_state convention
    return float(f), float(np.angle(an * np.conj(a0)))


def ghz_fidelity(state: DickeState, relative_phase: float | None = None) -> tuple[float, float]:
    """GHZ fidelity at a fixed relative phase, or phase-optimized when ``None``."""
    if relative_phase is None:
        return ghz_fidelity_phase_opt(state)
    return fidelity(state, ghz_state(state.n_particles, relative_phase)), float(relative_phase)


def global_phase_distance(a: DickeState | np.ndarray, b: DickeState | np.ndarray) -> float:
    """Max entrywise distance between ``a`` and ``b`` after removing one global phase."""
    va = getattr(a, "amplitudes", a)
    vb = getattr(b, "amplitudes", b)
    ov = np.vdot(va, vb)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.max(np.abs(va * phase - vb)))


# --- brute-force oracle ---------------------------------------------------

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
ORACLE_MAX_PARTICLES = 4


def _site_op(pauli: np.ndarray, site: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for i in range(n):
        out = np.kron(out, pauli if i == site else np.eye(2))
    return out


def _full_generators(n: int) -> dict[str, np.ndarray]:
    return {k: sum(_site_op(p, i, n) for i in range(n)) / 2 for k, p in _PAULI.items()}


def _dicke_projector(n: int) -> np.ndarray:
    """Rows are the symmetric Dicke states in the 2^n product basis, k spins down."""
    dim = 2**n
    downs = np.array([bin(b).count("1") for b in range(dim)])
    rows = np.zeros((n + 1, dim))
    for k in range(n + 1):
        mask = downs == k
        rows[k, mask] = 1 / np.sqrt(mask.sum())
    return rows


def symmetric_subspace_oracle(n: int, pipeline: Iterable[Sequence] = ()) -> DickeState:
    """Run a labeled pipeline in the full 2^N space and project onto Dicke states.

    Steps (applied to the all-up product state, in order):

    * ``("rotate", axis, angle)`` with axis ``x/y/z`` or a float azimuth;
    * ``("squeeze", chi_t)``;
    * ``("kraus", weights)`` with ``weights`` indexed by Dicke index k; the
      state is multiplied by ``sqrt(w_k)`` on every product state with k
      spins down and renormalized.

    Generators are built as sums of single-site Pauli matrices and
    exponentiated with ``scipy.linalg.expm``; only for tests.
    """
    n = int(n)
    if not 1 <= n <= ORACLE_MAX_PARTICLES:
        raise ValueError(f"oracle supports 1 <= N <= {ORACLE_MAX_PARTICLES}, got {n}")
    gens = _full_generators(n)
    downs = np.array([bin(b).count("1") for b in range(2**n)])
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for step in pipeline:
        label = step[0]
        if label == "rotate":
            axis, angle = step[1], float(step[2])
            if isinstance(axis, str):
                g = gens[axis]
            else:
                g = np.cos(axis) * gens["x"] + np.sin(axis) * gens["y"]
            psi = expm(-1j * angle * g) @ psi
        elif label == "squeeze":
            jz = gens["z"]
            psi = expm(-1j * float(step[1]) * (jz @ jz)) @ psi
        elif label == "kraus":
            w = np.asarray(step[1], dtype=float)
            psi = psi * np.sqrt(w[downs])
            psi = psi / np.linalg.norm(psi)
        else:
            raise ValueError(f"unknown pipeline step {label!r}")
    proj = _dicke_projector(n) @ psi
    leak = 1 - np.linalg.norm(proj) ** 2
    if leak > 1e-10:
        raise RuntimeError(f"state left the symmetric subspace (leakage {leak:.3g})")
    return DickeState(n, proj)
