"""
Derived quantities: Husimi sphere fields, fidelity against the measured
outcome, efficiency tables, and Dicke-basis populations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import measurement as meas
from .collective_spin import DickeState, _eigh, m_values, stretched_state
from .protocol import (
    ProtocolParams,
    condition_on_bin,
    pipeline_stages,
    pre_measurement_state,
    run_post_selected,
)

STAGES = ("cs", "squeezed", "rotated-back", "ps", "final")


@dataclass(frozen=True, eq=False)
class HusimiField:
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def direction(self, i: int, j: int) -> np.ndarray:
        return bloch_direction(self.theta[i], self.phi[j])


def bloch_direction(theta, phi) -> np.ndarray:
    """Unit vector probed at (theta, phi) when the reference is the pole.

    ``exp(-i phi Jz) exp(-i theta Jx)`` carries +z to
    ``(sin theta sin phi, -sin theta cos phi, cos theta)``.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    return np.stack(
        [np.sin(theta) * np.sin(phi), -np.sin(theta) * np.cos(phi), np.cos(theta)], axis=-1
    )


def husimi(
    state: DickeState,
    theta_steps: int = 121,
    phi_steps: int = 241,
    reference: DickeState | None = None,
) -> HusimiField:
    """``H(theta, phi) = |<psi| exp(-i phi Jz) exp(-i theta Jx) |ref>|^2``.

    theta spans [0, pi] inclusive, phi spans [0, 2 pi) exclusive. The default
    reference is the stretched state ``|N/2, N/2>``, which makes (theta, phi)
    the polar and azimuthal angles of the probe; see :func:`bloch_direction`.
    Pass ``reference=coherent state`` to probe with the step-1 state instead.
    One Jx eigendecomposition is shared by every theta.
    """
    if theta_steps < 2 or phi_steps < 2:
        raise ValueError("grid sizes must be >= 2")
    n = state.n_particles
    ref = stretched_state(n) if reference is None else reference
    if ref.n_particles != n:
        raise ValueError("reference and state have different particle numbers")
    theta = np.linspace(0.0, math.pi, theta_steps)
    phi = 2 * math.pi * np.arange(phi_steps) / phi_steps
    w, v = _eigh("x", n)
    coeff = v.conj().T @ ref.amplitudes
    # rows: exp(-i theta Jx)|ref> for each theta
    probes = (np.exp(-1j * np.outer(theta, w)) * coeff) @ v.T
    weighted = probes * state.amplitudes.conj()
    phases = np.exp(-1j * np.outer(m_values(n), phi))
    values = np.abs(weighted @ phases) ** 2
    return HusimiField(theta, phi, np.clip(values, 0.0, 1.0))


def local_maxima(field_: HusimiField, count: int = 2) -> list[tuple[float, int, int]]:
    """Largest local maxima ``(value, i, j)``; phi wraps around, theta does not."""
    h = field_.values
    nt, _ = h.shape
    padded = np.pad(h, ((1, 1), (0, 0)), constant_values=-np.inf)
    core = padded[1:-1]
    is_max = np.ones_like(h, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = np.roll(padded, dj, axis=1)[1 + di : nt + 1 + di]
            is_max &= core >= shifted
    peaks = sorted(((float(h[i, j]), i, j) for i, j in zip(*np.nonzero(is_max))), reverse=True)
    # the whole theta = 0 / pi row is one point on the sphere
    out, seen = [], []
    for val, i, j in peaks:
        d = field_.direction(i, j)
        if any(np.dot(d, s) > 1 - 1e-9 for s in seen):
            continue
        seen.append(d)
        out.append((val, i, j))
        if len(out) == count:
            break
    return out


def stage_state(params: ProtocolParams, stage: str) -> DickeState:
    """State at a named pipeline stage; ``ps`` and ``final`` use the C' bin."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    stages = pipeline_stages(params)
    if stage == "cs":
        return stages.cs
    if stage == "squeezed":
        return stages.squeezed
    if stage == "rotated-back":
        return stages.rotated_back
    res = run_post_selected(params)
    return res.ps_state if stage == "ps" else res.final_state


@dataclass(frozen=True)
class OutcomeRecord:
    center: float
    probability: float
    fidelity: float  # nan when the bin cannot occur


@dataclass(frozen=True)
class EfficiencyRow:
    c_lo: float
    c_hi: float
    f_min: float
    f_max: float
    probability: float


def outcome_table(params: ProtocolParams, window: tuple[float, float] | None = None):
    """(centers, probabilities) of the outcome distribution, optionally windowed."""
    grid = params.grid
    probs = meas.outcome_distribution(pre_measurement_state(params), grid)
    idx = np.arange(len(grid)) if window is None else grid.window(*window)
    return grid.centers[idx], probs[idx]


def fidelity_vs_outcome(params: ProtocolParams, window: tuple[float, float]) -> list[OutcomeRecord]:
    """Per-bin probability and GHZ fidelity after conditioning on that bin."""
    grid = params.grid
    records = []
    for index in grid.window(*window):
        try:
            res = condition_on_bin(params, int(index))
        except meas.ZeroProbabilityOutcome:
            c = float(grid.centers[index])
            p = float(meas.outcome_distribution(pre_measurement_state(params), grid)[index])
            records.append(OutcomeRecord(c, p, float("nan")))
            continue
        records.append(OutcomeRecord(res.outcome_center, res.outcome_probability, res.fidelity))
    return records


def efficiency_table(
    params: ProtocolParams, intervals: Sequence[tuple[float, float]]
) -> list[EfficiencyRow]:
    """Fidelity range and total probability of the bins centered in each interval."""
    rows = []
    for lo, hi in intervals:
        recs = fidelity_vs_outcome(params, (lo, hi))
        fs = [r.fidelity for r in recs if not math.isnan(r.fidelity)]
        if not fs:
            raise ValueError(f"no outcome in [{lo}, {hi}] has non-zero probability")
        prob = math.fsum(r.probability for r in recs)
        rows.append(EfficiencyRow(float(lo), float(hi), min(fs), max(fs), prob))
    return rows


def dicke_probabilities(state: DickeState) -> np.ndarray:
    """``|psi_M|^2`` in basis order (k = 0 is M = +N/2)."""
    return np.abs(state.amplitudes) ** 2
