"""Projected-squeezed GHZ state preparation in the symmetric Dicke subspace."""

from .collective_spin import (
    CollectiveOperator,
    DickeState,
    apply,
    build_jx,
    build_jy,
    build_jz,
    coherent_spin_state,
    equatorial_rotation,
    fidelity,
    ghz_fidelity_phase_opt,
    ghz_state,
    rotation,
    squeeze,
    stretched_state,
    symmetric_subspace_oracle,
)
from .measurement import (
    KrausWeights,
    MeasurementGrid,
    ZeroProbabilityOutcome,
    apply_measurement,
    build_grid,
    kraus_weights,
    outcome_distribution,
    sample_outcome,
)
from .protocol import (
    ProtocolParams,
    ProtocolResult,
    Rotation,
    run_post_selected,
    run_sampled,
    speedup_ratio,
    unitary_only_ghz,
)
from .optimizer import OptimizerConfig, OptimizerResult, landscape_slice, optimize
from .analysis import (
    EfficiencyRow,
    HusimiField,
    dicke_probabilities,
    efficiency_table,
    fidelity_vs_outcome,
    husimi,
)

__version__ = "0.1.0"
