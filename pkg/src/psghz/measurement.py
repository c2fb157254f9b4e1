"""
Gaussian collective measurement of the Jz projection, discretized by binning.

The continuous outcome C is read through bins of width ``bin_width``; the
Kraus weight of bin b on Dicke component M is the Gaussian mass

    w_M(b) = integral over b of exp(-(M - C)^2 / 2 var) / sqrt(2 pi var) dC

computed from CDF differences, so summing over bins is exact up to the
truncation of the C axis.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .collective_spin import DickeState, _check_n, m_values

DEFAULT_BIN_WIDTH = 0.25
TAIL_SIGMAS = 6.5
MIN_PROBABILITY = 1e-300
_CENTER_TOL = 1e-9


class ZeroProbabilityOutcome(ValueError):
    """The requested outcome cannot occur for this state."""


def gaussian_mass(lo, hi):
    """Standard-normal mass of ``[lo, hi]``, accurate in both tails."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = lo > 0
    # above the mean, difference survival functions instead of CDFs
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


@dataclass(frozen=True, eq=False)
class MeasurementGrid:
    """Uniform bins tiling ``[c_min, c_max]``, one of them centered on C = 0."""

    variance: float
    bin_width: float
    n_particles: int
    half_bins: int
    centers: np.ndarray = field(repr=False)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def c_max(self) -> float:
        return (self.half_bins + 0.5) * self.bin_width

    @property
    def c_min(self) -> float:
        return -self.c_max

    @property
    def lower(self) -> np.ndarray:
        return self.centers - self.bin_width / 2

    @property
    def upper(self) -> np.ndarray:
        return self.centers + self.bin_width / 2

    @property
    def bins(self) -> list[tuple[float, float, float]]:
        return [(c - self.bin_width / 2, c + self.bin_width / 2, c) for c in self.centers]

    def __len__(self) -> int:
        return self.centers.shape[0]

    def index_of(self, c: float) -> int:
        """Index of the bin containing outcome ``c``."""
        k = int(math.floor(c / self.bin_width + 0.5))
        if abs(k) > self.half_bins:
            raise ValueError(f"outcome {c} lies outside the grid [{self.c_min}, {self.c_max}]")
        return k + self.half_bins

    def window(self, c_lo: float, c_hi: float) -> np.ndarray:
        """Indices of bins whose centers lie in ``[c_lo, c_hi]``."""
        if not c_lo <= c_hi:
            raise ValueError(f"empty interval [{c_lo}, {c_hi}]")
        if c_lo < self.c_min - _CENTER_TOL or c_hi > self.c_max + _CENTER_TOL:
            raise ValueError(
                f"interval [{c_lo}, {c_hi}] is outside the grid [{self.c_min}, {self.c_max}]"
            )
        tol = _CENTER_TOL * max(1.0, self.bin_width)
        idx = np.flatnonzero((self.centers >= c_lo - tol) & (self.centers <= c_hi + tol))
        if idx.size == 0:
            raise ValueError(f"no bin center lies in [{c_lo}, {c_hi}]")
        return idx

    @functools.cached_property
    def weight_matrix(self) -> np.ndarray:
        """``W[b, k]`` = Kraus weight of bin b on Dicke index k (all bins)."""
        m = m_values(self.n_particles)
        s = self.sigma
        w = gaussian_mass((self.lower[:, None] - m) / s, (self.upper[:, None] - m) / s)
        w.setflags(write=False)
        return w


@functools.lru_cache(maxsize=256)
def build_grid(variance: float, bin_width: float, n_particles: int) -> MeasurementGrid:
    """Symmetric grid covering at least ``+-(N/2 + 6.5 sigma)``.

    6.5 sigma keeps the two-sided truncated mass below 1e-9 for every M.
    """
    if not variance > 0 or not math.isfinite(variance):
        raise ValueError(f"variance must be positive and finite, got {variance!r}")
    if not bin_width > 0 or not math.isfinite(bin_width):
        raise ValueError(f"bin width must be positive and finite, got {bin_width!r}")
    n = _check_n(n_particles)
    reach = n / 2 + TAIL_SIGMAS * math.sqrt(variance)
    half = int(math.ceil(reach / bin_width))
    centers = np.arange(-half, half + 1) * float(bin_width)
    centers.setflags(write=False)
    return MeasurementGrid(float(variance), float(bin_width), n, half, centers)


@dataclass(frozen=True, eq=False)
class KrausWeights:
    index: int
    center: float
    lower: float
    upper: float
    weights: np.ndarray = field(repr=False)

    @property
    def amplitudes(self) -> np.ndarray:
        """Diagonal of the Kraus operator, ``sqrt(w_M)``."""
        return np.sqrt(self.weights)


def kraus_weights(grid: MeasurementGrid, index: int) -> KrausWeights:
    if not 0 <= index < len(grid):
        raise IndexError(f"bin {index} is not in a grid of {len(grid)} bins")
    c = float(grid.centers[index])
    lo, hi = c - grid.bin_width / 2, c + grid.bin_width / 2
    m = m_values(grid.n_particles)
    w = gaussian_mass((lo - m) / grid.sigma, (hi - m) / grid.sigma)
    w.setflags(write=False)
    return KrausWeights(index, c, lo, hi, w)


def _check_grid(state: DickeState, grid: MeasurementGrid):
    if state.n_particles != grid.n_particles:
        raise ValueError(
            f"dimension mismatch: grid built for N={grid.n_particles}, state N={state.n_particles}"
        )


def outcome_distribution(state: DickeState, grid: MeasurementGrid) -> np.ndarray:
    """Per-bin outcome probabilities ``p_b = sum_M w_M(b) |psi_M|^2``."""
    _check_grid(state, grid)
    return grid.weight_matrix @ np.abs(state.amplitudes) ** 2


def outcome_probability(state: DickeState, weights: KrausWeights) -> float:
    return float(weights.weights @ np.abs(state.amplitudes) ** 2)


def apply_measurement(state: DickeState, weights: KrausWeights) -> DickeState:
    """Condition a pure state on one bin: ``psi_M -> psi_M sqrt(w_M)``, renormalized."""
    if weights.weights.shape != state.amplitudes.shape:
        raise ValueError("Kraus weights and state have different dimensions")
    p = outcome_probability(state, weights)
    if not p > MIN_PROBABILITY:
        raise ZeroProbabilityOutcome(f"outcome bin centered at {weights.center} has probability {p:.3g}")
    return DickeState(state.n_particles, state.amplitudes * np.sqrt(weights.weights) / math.sqrt(p))


def sample_bins(probs: np.ndarray, rng: np.random.Generator, size=None):
    """Draw bin indices from a per-bin distribution by inverse CDF."""
    cdf = np.cumsum(probs)
    u = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def sample_outcome(
    state: DickeState, grid: MeasurementGrid, rng: np.random.Generator
) -> tuple[int, DickeState]:
    """Sample one outcome bin and return it with the conditioned state.

    ``rng`` must be owned by the caller; the same seed gives the same sequence.
    """
    index = int(sample_bins(outcome_distribution(state, grid), rng))
    return index, apply_measurement(state, kraus_weights(grid, index))
