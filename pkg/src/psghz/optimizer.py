"""
Greedy random-walk search over (variance, chi_t) and landscape cross-sections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .protocol import ProtocolParams, run_post_selected

CHI_T_MAX = math.pi / 2


@dataclass(frozen=True)
class OptimizerConfig:
    n_particles: int = 50
    initial: tuple[float, float] = (10.0, 0.3)
    s_var: float = 2.0
    s_chit: float = 0.05
    var_max: float = 100.0
    chi_t_max: float = CHI_T_MAX
    threshold: float = 0.97
    max_iterations: int = 5000
    seed: int = 0
    template: ProtocolParams | None = None
    keep_trace: bool = True

    def __post_init__(self):
        if not (self.s_var > 0 and self.s_chit > 0):
            raise ValueError("proposal deviations must be positive")
        if not (self.var_max > 0 and 0 < self.chi_t_max <= CHI_T_MAX):
            raise ValueError("bounds must satisfy var_max > 0 and 0 < chi_t_max <= pi/2")
        if not self.threshold <= 1:
            raise ValueError(f"threshold must be <= 1, got {self.threshold}")
        if isinstance(self.max_iterations, bool) or int(self.max_iterations) != self.max_iterations \
                or self.max_iterations < 0:
            raise ValueError(f"max_iterations must be a non-negative integer, got {self.max_iterations!r}")
        var0, chi0 = self.initial
        if not self.in_bounds(var0, chi0):
            raise ValueError(f"initial point {self.initial} is outside the bounds")

    def in_bounds(self, var: float, chi_t: float) -> bool:
        return 0 < var <= self.var_max and 0 < chi_t <= self.chi_t_max

    def params_at(self, var: float, chi_t: float) -> ProtocolParams:
        if self.template is None:
            return ProtocolParams(self.n_particles, chi_t, var)
        return replace(self.template, n_particles=self.n_particles, variance=var, chi_t=chi_t)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    sigma2: float
    chi_t: float
    fidelity: float
    accepted: bool


@dataclass(frozen=True)
class OptimizerResult:
    sigma2: float
    chi_t: float
    fidelity: float
    iterations: int
    accepted: int
    trace: tuple[TraceRow, ...] = field(default=(), repr=False)

    @property
    def best(self) -> tuple[float, float]:
        return self.sigma2, self.chi_t


def evaluate(config: OptimizerConfig, var: float, chi_t: float) -> float:
    return run_post_selected(config.params_at(var, chi_t)).fidelity


def optimize(config: OptimizerConfig) -> OptimizerResult:
    """Greedy walk: keep a Gaussian proposal only if it strictly improves F.

    Proposals outside the bounds are rejected without evaluation and do not
    appear in the trace. The walk stops once F reaches ``threshold`` or
    after ``max_iterations`` proposals.
    """
    rng = np.random.default_rng(config.seed)
    var, chi = (float(v) for v in config.initial)
    best = evaluate(config, var, chi)
    trace = [TraceRow(0, var, chi, best, True)] if config.keep_trace else []
    accepted = 0
    it = 0
    scales = np.array([config.s_var, config.s_chit])
    while it < config.max_iterations and best < config.threshold:
        it += 1
        dvar, dchi = rng.normal(0.0, scales)
        cand_var, cand_chi = var + dvar, chi + dchi
        if not config.in_bounds(cand_var, cand_chi):
            continue
        f = evaluate(config, cand_var, cand_chi)
        take = f > best
        if take:
            var, chi, best = cand_var, cand_chi, f
            accepted += 1
        if config.keep_trace:
            trace.append(TraceRow(it, cand_var, cand_chi, f, take))
    return OptimizerResult(var, chi, best, it, accepted, tuple(trace))


_AXES = {"variance": "variance", "chi_t": "chi_t", "n_particles": "n_particles"}


def landscape_slice(
    axis: str, fixed: ProtocolParams, values: Sequence[float]
) -> list[tuple[float, float]]:
    """Post-selected fidelity along one parameter, the others held at ``fixed``."""
    if axis not in _AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {sorted(_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("empty grid")
    rows = []
    for v in values:
        # ProtocolParams validates bounds, so out-of-range values raise here
        params = replace(fixed, **{_AXES[axis]: v})
        rows.append((v, run_post_selected(params).fidelity))
    return rows


def max_over_variance(fixed: ProtocolParams, variances: Iterable[float]) -> tuple[float, float]:
    """(best variance, best fidelity) over a variance grid."""
    rows = landscape_slice("variance", fixed, list(variances))
    return max(rows, key=lambda r: r[1])
