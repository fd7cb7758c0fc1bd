"""Secure quantum network coding on the butterfly network.

Exact qudit-level simulation of a two-message crossing protocol over F_p,
plus numerical certification that a single-edge wiretapper learns nothing
when the sink-side outcome exchange is one-time-padded, and a reproduction
of the explicit attack that works when the pad is dropped.
"""

from .adversary import (
    AttackSpec,
    identity_forward,
    keep_and_send_phi0,
    measure_and_resend,
    random_isometry,
)
from .classical_code import (
    ATTACKABLE_EDGES,
    EDGES,
    CoefficientMatrix,
    FlowAssignment,
    attacked_coefficient_matrix,
    classical_secrecy_check,
    coefficient_matrix,
    evaluate_attacked_flow,
    evaluate_flow,
    key_coefficient,
    recovery_check,
)
from .engine import (
    DensityMatrix,
    MeasurementResult,
    RegisterLayout,
    SparseState,
    fourier_basis_state,
    pure_overlap_fidelity,
    trace_distance,
)
from .ffield import FieldElement, PrimeField, inverse_of_two, is_odd_prime
from .kernels import active_backend, available_backends, set_backend
from .protocol import (
    MEASURED_EDGES,
    VARIANT_FULL,
    VARIANT_WEAK,
    ProtocolConfig,
    RunResult,
    Transcript,
    branch_table,
    enumerate_branches,
    run,
)
from .security import (
    SecurityReport,
    analyze,
    attacked_fidelity,
    expected_environment_state,
    verify_independence,
)

__version__ = "0.1.0"

__all__ = [
    "ATTACKABLE_EDGES",
    "AttackSpec",
    "CoefficientMatrix",
    "DensityMatrix",
    "EDGES",
    "FieldElement",
    "FlowAssignment",
    "MEASURED_EDGES",
    "MeasurementResult",
    "PrimeField",
    "ProtocolConfig",
    "RegisterLayout",
    "RunResult",
    "SecurityReport",
    "SparseState",
    "Transcript",
    "VARIANT_FULL",
    "VARIANT_WEAK",
    "active_backend",
    "analyze",
    "attacked_coefficient_matrix",
    "attacked_fidelity",
    "available_backends",
    "branch_table",
    "classical_secrecy_check",
    "coefficient_matrix",
    "enumerate_branches",
    "evaluate_attacked_flow",
    "evaluate_flow",
    "expected_environment_state",
    "fourier_basis_state",
    "identity_forward",
    "inverse_of_two",
    "is_odd_prime",
    "keep_and_send_phi0",
    "key_coefficient",
    "measure_and_resend",
    "pure_overlap_fidelity",
    "random_isometry",
    "recovery_check",
    "run",
    "set_backend",
    "trace_distance",
    "verify_independence",
]
