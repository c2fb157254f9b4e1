"""
The projected-squeezed (PS) state preparation pipeline.

Starting from ``|N/2, N/2>``:

1. rotate by pi/2 about x (coherent spin state),
2. one-axis twist by ``chi_t``,
3. rotate back about x,
4. measure Jz with a Gaussian kernel and keep the post-selected bin,
5. rotate by pi/2 about y and compare with the GHZ state.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import measurement as meas
from .collective_spin import (
    MAX_PARTICLES,
    Axis,
    DickeState,
    apply,
    ghz_fidelity,
    ghz_fidelity_phase_opt,
    rotation,
    squeeze,
    stretched_state,
)

PostSelect = Union[float, tuple[float, float]]


@dataclass(frozen=True)
class Rotation:
    """``exp(-i angle J_axis)``; ``axis`` is x/y/z or an equatorial azimuth."""

    axis: Axis
    angle: float

    def __post_init__(self):
        if isinstance(self.axis, str):
            if self.axis.lower() not in ("x", "y", "z"):
                raise ValueError(f"unknown rotation axis {self.axis!r}")
            object.__setattr__(self, "axis", self.axis.lower())
        elif not math.isfinite(float(self.axis)):
            raise ValueError(f"rotation azimuth must be finite, got {self.axis!r}")
        if not math.isfinite(self.angle):
            raise ValueError(f"rotation angle must be finite, got {self.angle!r}")

    def apply(self, state: DickeState) -> DickeState:
        if self.angle == 0:
            return state
        return apply(rotation(self.axis, self.angle, state.n_particles), state)


STEP1 = Rotation("x", math.pi / 2)
STEP3 = Rotation("x", -math.pi / 2)
STEP5 = Rotation("y", math.pi / 2)


@dataclass(frozen=True)
class ProtocolParams:
    """Configuration of one pipeline run.

    ``post_select`` is an outcome value (the bin containing it is kept) or a
    ``(c_lo, c_hi)`` acceptance window. ``ghz_phase=None`` compares against
    the GHZ state with the best relative phase; a float fixes the phase.
    """

    n_particles: int
    chi_t: float
    variance: float
    bin_width: float = meas.DEFAULT_BIN_WIDTH
    step1: Rotation = STEP1
    step3: Rotation = STEP3
    step5: Rotation = STEP5
    post_select: PostSelect = 0.0
    ghz_phase: float | None = None

    def __post_init__(self):
        n = self.n_particles
        if isinstance(n, bool) or int(n) != n or not 1 <= n <= MAX_PARTICLES:
            raise ValueError(f"n_particles must be an integer in [1, {MAX_PARTICLES}], got {n!r}")
        object.__setattr__(self, "n_particles", int(n))
        if not (0 <= self.chi_t <= math.pi / 2):
            raise ValueError(f"chi_t must lie in [0, pi/2], got {self.chi_t!r}")
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError(f"variance must be positive, got {self.variance!r}")
        if not (self.bin_width > 0 and math.isfinite(self.bin_width)):
            raise ValueError(f"bin_width must be positive, got {self.bin_width!r}")
        ps = self.post_select
        if isinstance(ps, (tuple, list)):
            lo, hi = (float(v) for v in ps)
            if not lo <= hi:
                raise ValueError(f"post-selection window [{lo}, {hi}] is empty")
            object.__setattr__(self, "post_select", (lo, hi))
        else:
            object.__setattr__(self, "post_select", float(ps))
        if self.ghz_phase is not None and not math.isfinite(self.ghz_phase):
            raise ValueError("ghz_phase must be finite or None")

    @property
    def grid(self) -> meas.MeasurementGrid:
        return meas.build_grid(self.variance, self.bin_width, self.n_particles)

    @property
    def window(self) -> tuple[float, float]:
        ps = self.post_select
        return ps if isinstance(ps, tuple) else (ps, ps)


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    ps_state: DickeState = field(repr=False)
    final_state: DickeState = field(repr=False)
    outcome_bin: int
    outcome_center: float
    outcome_probability: float
    fidelity: float
    fidelity_phase: float
    accepted: bool = True


@dataclass(frozen=True)
class _Stages:
    cs: DickeState
    squeezed: DickeState
    rotated_back: DickeState


@functools.lru_cache(maxsize=512)
def _pre_measurement(n: int, chi_t: float, step1: Rotation, step3: Rotation) -> _Stages:
    cs = step1.apply(stretched_state(n))
    sq = squeeze(cs, chi_t)
    return _Stages(cs, sq, step3.apply(sq))


def pipeline_stages(params: ProtocolParams) -> _Stages:
    """States after steps 1, 2 and 3 (no measurement yet)."""
    return _pre_measurement(params.n_particles, params.chi_t, params.step1, params.step3)


def pre_measurement_state(params: ProtocolParams) -> DickeState:
    return pipeline_stages(params).rotated_back


def condition_on_bin(params: ProtocolParams, index: int, accepted: bool = True) -> ProtocolResult:
    """Measure, keep bin ``index``, apply step 5 and score against GHZ."""
    pre = pre_measurement_state(params)
    weights = meas.kraus_weights(params.grid, index)
    p = meas.outcome_probability(pre, weights)
    ps = meas.apply_measurement(pre, weights)
    final = params.step5.apply(ps)
    f, phase = ghz_fidelity(final, params.ghz_phase)
    return ProtocolResult(ps, final, index, weights.center, p, f, phase, accepted)


def run_post_selected(params: ProtocolParams) -> ProtocolResult:
    """Deterministic run conditioned on the bin containing ``post_select``.

    Window post-selection leaves a mixture of bin-conditioned states, so it
    is only accepted by :func:`run_sampled` and the analysis tables.
    """
    if isinstance(params.post_select, tuple):
        raise ValueError("run_post_selected needs a single outcome; got a window")
    return condition_on_bin(params, params.grid.index_of(params.post_select))


@functools.lru_cache(maxsize=64)
def _sampling_tables(params: ProtocolParams):
    grid = params.grid
    probs = meas.outcome_distribution(pre_measurement_state(params), grid)
    lo, hi = params.window
    inside = np.zeros(len(grid), dtype=bool)
    inside[grid.window(lo, hi) if lo != hi else [grid.index_of(lo)]] = True
    return probs, inside


def run_sampled(params: ProtocolParams, rng: np.random.Generator) -> ProtocolResult:
    """Run with a sampled outcome; ``accepted`` records the post-selection test."""
    probs, inside = _sampling_tables(params)
    index = int(meas.sample_bins(probs, rng))
    return condition_on_bin(params, index, accepted=bool(inside[index]))


def acceptance_fraction(params: ProtocolParams, rng: np.random.Generator, n_runs: int) -> float:
    """Fraction of ``n_runs`` sampled trajectories accepted by the window."""
    probs, inside = _sampling_tables(params)
    return float(np.mean(inside[meas.sample_bins(probs, rng, n_runs)]))


def _unitary_only_final(n: int, azimuth: float) -> DickeState:
    state = squeeze(STEP1.apply(stretched_state(n)), math.pi / 2)
    return Rotation(float(azimuth), math.pi / 2).apply(state)


@functools.lru_cache(maxsize=None)
def unitary_only_axis(n: int) -> float:
    """Equatorial azimuth of the single pi/2 rotation that best maps the
    pi/2-twisted coherent state onto GHZ."""
    if n % 2:
        raise ValueError(f"unitary-only benchmark needs even N, got {n}")

    def loss(phi):
        return -ghz_fidelity_phase_opt(_unitary_only_final(n, phi))[0]

    grid = np.linspace(0.0, math.pi, 8 * n + 1)
    values = np.array([loss(p) for p in grid])
    i = int(np.argmin(values))
    step = grid[1] - grid[0]
    res = minimize_scalar(
        loss, bounds=(grid[i] - step, grid[i] + step), method="bounded", options={"xatol": 1e-12}
    )
    return float(res.x) if res.fun < values[i] else float(grid[i])


def unitary_only_ghz(n: int) -> tuple[DickeState, float]:
    """Coherent benchmark: twist by pi/2, then one pi/2 rotation."""
    final = _unitary_only_final(n, unitary_only_axis(n))
    return final, ghz_fidelity_phase_opt(final)[0]


def speedup_ratio(chi_t: float) -> float:
    """Squeezing-time ratio of the pi/2 coherent protocol to this one."""
    if not chi_t > 0:
        raise ValueError(f"chi_t must be positive, got {chi_t!r}")
    return (math.pi / 2) / chi_t
