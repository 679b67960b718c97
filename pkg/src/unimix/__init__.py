"""Reconstruction of mixed-unitary quantum channels by projected gradient flow.

Given input/output state pairs (rho_j, sigma_j), the solver searches for
weights p on the probability simplex and unitaries U_k minimizing

    1/2 sum_j || sigma_j - sum_k p_k U_k rho_j U_k* ||_F^2

by integrating the projected negative-gradient flow on the product of
the unitary group and the simplex, removing components whose weight
reaches zero along the way.
"""

__version__ = "0.1.0"

from .channels import (
    Dataset,
    MixedUnitaryChannel,
    StatePair,
    apply,
    choi,
    depolarizing,
    fidelity,
    generate_dataset,
    load_channel,
    load_dataset,
    random_channel,
    save_channel,
    save_dataset,
)
from .linalg import (
    frobenius_norm,
    haar_random_unitary,
    hermitian_eig,
    random_density,
    re_unitarize,
    real_inner,
    skew_part,
    unvec,
    vec,
)
from .metrics import (
    RecoveryReport,
    audit_trajectory,
    batch_statistics,
    build_report,
    choi_distance,
)
from .objective import (
    FlowField,
    GradientBundle,
    ObjectiveInstance,
    flow_field,
    gradient,
    leave_one_out,
    value,
)
from .solver import (
    FlowConfig,
    RestartEvent,
    RunResult,
    SolverState,
    TrajectoryRecord,
    detect_zero_crossing,
    integrate_step,
    renormalize_state,
    run,
)

__all__ = [
    "Dataset",
    "FlowConfig",
    "FlowField",
    "GradientBundle",
    "MixedUnitaryChannel",
    "ObjectiveInstance",
    "RecoveryReport",
    "RestartEvent",
    "RunResult",
    "SolverState",
    "StatePair",
    "TrajectoryRecord",
    "apply",
    "audit_trajectory",
    "batch_statistics",
    "build_report",
    "choi",
    "choi_distance",
    "depolarizing",
    "detect_zero_crossing",
    "fidelity",
    "flow_field",
    "frobenius_norm",
    "generate_dataset",
    "gradient",
    "haar_random_unitary",
    "hermitian_eig",
    "integrate_step",
    "leave_one_out",
    "load_channel",
    "load_dataset",
    "random_channel",
    "random_density",
    "re_unitarize",
    "real_inner",
    "renormalize_state",
    "run",
    "save_channel",
    "save_dataset",
    "skew_part",
    "unvec",
    "value",
    "vec",
]
