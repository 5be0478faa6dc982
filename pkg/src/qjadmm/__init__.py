"""Quantized distributed proximal Jacobian ADMM over directed graphs.

A library and deterministic simulator for affine-coupled resource
allocation: per-node proximal subproblems, a finite-time quantized average
consensus protocol for the coupling residual, centrally coordinated
baselines, ground-truth oracles, and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .admm import (
    AdmmConfig,
    ConsensusStalledError,
    IterationTrace,
    NodeVariables,
    ParameterReport,
    ParameterValidationError,
    centralized_pj_admm_run,
    distributed_pj_admm_run,
    read_trace_csv,
    validate_parameters,
    write_trace_csv,
)
from .consensus import (
    ConsensusNodeState,
    ConsensusResult,
    PieceMessage,
    RoundCapExceededError,
    check_stop,
    consensus_round,
    init_consensus,
    run_consensus,
)
from .digraph import (
    Digraph,
    NeighborView,
    NotStronglyConnectedError,
    diameter,
    from_edge_list,
    is_strongly_connected,
    load_edge_list,
    random_strongly_connected,
    save_edge_list,
    to_edge_list,
)
from .experiment import (
    ExperimentConfig,
    GraphSpec,
    compare_traces,
    format_compare_table,
    run_experiment,
)
from .local_solver import (
    LocalProblem,
    QuadraticObjective,
    SingularSubproblemError,
    prox_step,
    spectral_norm,
)
from .metrics import (
    IndefiniteWeightError,
    SaddlePoint,
    SingularKktError,
    augmented_lagrangian,
    coupling_residual,
    ergodic_gap_constant,
    kkt_oracle,
    l1_error,
    lagrangian,
    merit_distance,
    weighted_successive_diff,
)
from .probgen import (
    InstanceSpec,
    desk_spec,
    full_scale_spec,
    generate,
    load_instance,
    save_instance,
)
from .quantize import (
    QuantizationLevel,
    QuantizedVector,
    dequantize,
    floor_to_lattice,
    quantize_floor,
)
