"""Outer-loop solvers for the affine-coupled resource allocation problem.

Two families share the per-node proximal step:

* ``distributed_pj_admm_run`` — every node refreshes its local estimate of
  the global coupling residual through the finite-time quantized average
  consensus protocol (or through exact averaging, the zero-quantization
  reference), then updates a local copy of the dual variable. No central
  coordinator.
* ``centralized_pj_admm_run`` — the classic parallel proximal Jacobian
  splitting with a central aggregator, either with exact exchange or with
  floor-quantized transmissions of the primal blocks (uplink) and the dual
  variable (downlink).

Both refuse to start unless every node's proximal weight clears the
stability threshold ``rho * (N / (2 - gamma) - 1) * ||A_i||^2``.
"""

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from . import metrics
from .consensus import RoundCapExceededError, run_consensus
from .digraph import NotStronglyConnectedError
from .local_solver import prox_step, spectral_norm
from .quantize import QuantizationLevel, floor_to_lattice

TRACE_COLUMNS = (
    "k",
    "residual_norm",
    "lagrangian_gap",
    "l1_error",
    "consensus_rounds",
    "merit",
)
WALLCLOCK_COLUMN = "wallclock_ms"

ALGORITHM_QDPJ = "qdpj"
ALGORITHM_CENTRALIZED_EXACT = "centralized_exact"
ALGORITHM_CENTRALIZED_QUANTIZED = "centralized_quantized"


class ParameterValidationError(ValueError):
    """Proximal weights below the stability threshold; carries the report."""

    def __init__(self, report):
        offenders = ", ".join(str(e.node) for e in report.failures)
        super().__init__(
            f"proximal weight below threshold at node(s) {offenders}; "
            "raise the weights or set override_parameter_check"
        )
        self.report = report


class ConsensusStalledError(RuntimeError):
    """The inner consensus hit its round cap during an outer iteration."""

    def __init__(self, outer_iteration, cause):
        super().__init__(
            f"consensus round cap exceeded at outer iteration {outer_iteration}"
        )
        self.outer_iteration = outer_iteration
        self.__cause__ = cause


@dataclass(frozen=True)
class AdmmConfig:
    """Parameters shared by all outer-loop variants.

    ``rho`` is the penalty, ``gamma`` in (0, 2) the dual relaxation,
    ``level`` the quantization lattice spacing. ``split_b_across_nodes``
    keeps the consensus inputs consistent with the global residual (each
    node folds in its 1/N share of the resource vector); turning it off
    reproduces the literal per-node reading in which every node subtracts
    the full resource vector, which only coincides when that vector is zero.
    """

    rho: float
    gamma: float
    level: QuantizationLevel
    max_outer_iterations: int
    consensus_round_cap: int = None
    master_seed: int = 0
    split_b_across_nodes: bool = True
    residual_init: str = "consensus"  # or "random"
    override_parameter_check: bool = False

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not 0 < self.gamma < 2:
            raise ValueError("gamma must lie in the open interval (0, 2)")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")
        if self.residual_init not in ("consensus", "random"):
            raise ValueError("residual_init must be 'consensus' or 'random'")
        if not isinstance(self.level, QuantizationLevel):
            object.__setattr__(self, "level", QuantizationLevel(self.level))


@dataclass
class NodeVariables:
    """One node's iterate: primal block, dual copy, residual estimate."""

    x: np.ndarray
    dual: np.ndarray
    residual_estimate: np.ndarray = None

    def copy(self):
        return NodeVariables(
            x=np.array(self.x, dtype=float),
            dual=np.array(self.dual, dtype=float),
            residual_estimate=None
            if self.residual_estimate is None
            else np.array(self.residual_estimate, dtype=float),
        )


@dataclass
class IterationTrace:
    """Per-outer-iteration metrics; oracle-based fields are None without one."""

    k: int
    residual_norm: float
    lagrangian_gap: float = None
    l1_error: float = None
    consensus_rounds: int = 0
    merit: float = None
    wallclock_ms: float = 0.0
    pieces_sent: int = 0


@dataclass(frozen=True)
class ParameterCheck:
    node: int
    theta: float
    margin: float

    @property
    def passed(self):
        return self.margin > 0


@dataclass(frozen=True)
class ParameterReport:
    entries: tuple

    @property
    def all_passed(self):
        return all(e.passed for e in self.entries)

    @property
    def failures(self):
        return [e for e in self.entries if not e.passed]

    def summary_lines(self):
        lines = []
        for e in self.entries:
            status = "ok" if e.passed else "FAIL"
            lines.append(
                f"node {e.node}: threshold {e.theta:.6e}, margin {e.margin:.6e} [{status}]"
            )
        return lines


def validate_parameters(config, problems, n_nodes=None):
    """Check every proximal weight against the stability threshold.

    For node ``i`` the threshold is
    ``theta_i = rho * (N / (2 - gamma) - 1) * ||A_i||^2`` and the margin is
    the smallest eigenvalue of ``P_i - theta_i I`` (``tau - theta_i`` for a
    scalar weight). A run refuses to start on any nonpositive margin unless
    the override flag is set.
    """
    n = len(problems) if n_nodes is None else int(n_nodes)
    factor = config.rho * (n / (2.0 - config.gamma) - 1.0)
    entries = []
    for idx, prob in enumerate(problems, start=1):
        theta = factor * spectral_norm(prob.coupling) ** 2
        if prob.prox_is_scalar:
            margin = float(prob.prox_weight) - theta
        else:
            margin = float(np.linalg.eigvalsh(prob.prox_matrix).min()) - theta
        entries.append(ParameterCheck(node=idx, theta=theta, margin=margin))
    return ParameterReport(entries=tuple(entries))


def _require_valid_parameters(config, problems):
    report = validate_parameters(config, problems)
    if not report.all_passed and not config.override_parameter_check:
        raise ParameterValidationError(report)
    return report


def _phi_inputs(problems, x_list, b, n, split_b):
    if split_b:
        # average of the phi vectors equals sum_i A_i x_i - b exactly
        return [n * (prob.coupling @ x) - b for prob, x in zip(problems, x_list)]
    return [n * (prob.coupling @ x - b) for prob, x in zip(problems, x_list)]


def _trace_metrics(k, x_list, dual, problems, b, saddle, config, rounds, pieces, started):
    residual = metrics.coupling_residual(x_list, problems, b)
    trace = IterationTrace(
        k=k,
        residual_norm=float(np.linalg.norm(residual)),
        consensus_rounds=rounds,
        pieces_sent=pieces,
    )
    if saddle is not None:
        gap = metrics.lagrangian(x_list, saddle.lambda_star, problems, b) - metrics.lagrangian(
            saddle.x_star, saddle.lambda_star, problems, b
        )
        trace.lagrangian_gap = float(gap)
        trace.l1_error = metrics.l1_error(x_list, saddle)
        trace.merit = metrics.merit_distance(x_list, dual, saddle, problems, config)
    trace.wallclock_ms = (time.perf_counter() - started) * 1e3
    return trace


def distributed_pj_admm_run(
    problems,
    graph,
    b,
    config,
    init,
    saddle=None,
    averaging="quantized",
    on_iteration=None,
):
    """Run the fully distributed quantized parallel proximal splitting.

    Each outer iteration: (1) all nodes solve their proximal subproblem in
    parallel from the previous iterate, the residual estimate, and the local
    dual copy; (2) the nodes average ``N * A_i x_i - b`` through the
    finite-time quantized consensus protocol, giving every node the same
    new residual estimate (accurate to within ``2 sqrt(m)`` lattice steps);
    (3) every node steps its dual copy by ``gamma * rho`` times the
    estimate.

    Parameters
    ----------
    problems : list of LocalProblem
    graph : Digraph
        Strongly connected communication topology.
    b : array_like
        Coupling resource vector.
    config : AdmmConfig
    init : list of NodeVariables
        Initial iterates. Missing residual estimates are initialized by one
        consensus round-trip on the initial iterate (default) or randomly,
        per ``config.residual_init``.
    saddle : SaddlePoint, optional
        Enables the oracle-based trace metrics.
    averaging : "quantized" or "exact"
        "exact" replaces the protocol by exact averaging — the
        zero-quantization reference, which reproduces the centralized
        iteration.
    on_iteration : callable, optional
        Called as ``on_iteration(k, variables, trace)`` after each iteration.

    Returns
    -------
    (variables, traces)
        Final per-node variables and the per-iteration trace list.
    """
    if averaging not in ("quantized", "exact"):
        raise ValueError("averaging must be 'quantized' or 'exact'")
    n = len(problems)
    b = np.asarray(b, dtype=float)
    _require_valid_parameters(config, problems)
    if averaging == "quantized" and not graph.strongly_connected:
        raise NotStronglyConnectedError("the consensus layer needs strong connectivity")

    variables = [v.copy() for v in init]
    if len(variables) != n:
        raise ValueError("init must provide one NodeVariables per problem")

    def average(inputs, outer_k):
        if averaging == "exact":
            mean = np.mean(inputs, axis=0)
            return [mean] * n, 0, 0
        try:
            result = run_consensus(
                inputs,
                graph,
                config.level,
                seed=(config.master_seed, outer_k),
                round_cap=config.consensus_round_cap,
            )
        except RoundCapExceededError as exc:
            raise ConsensusStalledError(outer_k, exc)
        return result.estimates, result.rounds_used, result.pieces_sent_total

    if any(v.residual_estimate is None for v in variables):
        if config.residual_init == "random":
            for idx, v in enumerate(variables, start=1):
                rng = np.random.default_rng(
                    np.random.SeedSequence([config.master_seed, 0, idx])
                )
                v.residual_estimate = rng.standard_normal(b.shape[0])
        else:
            phi0 = _phi_inputs(problems, [v.x for v in variables], b, n, config.split_b_across_nodes)
            estimates, _, _ = average(phi0, 0)
            for v, est in zip(variables, estimates):
                v.residual_estimate = np.array(est, dtype=float)

    traces = []
    for k in range(1, config.max_outer_iterations + 1):
        started = time.perf_counter()
        x_new = [
            prox_step(prob, v.x, v.residual_estimate, v.dual, config.rho)
            for prob, v in zip(problems, variables)
        ]
        phi = _phi_inputs(problems, x_new, b, n, config.split_b_across_nodes)
        estimates, rounds, pieces = average(phi, k)
        for v, x, est in zip(variables, x_new, estimates):
            v.x = x
            v.residual_estimate = np.array(est, dtype=float)
            v.dual = v.dual + config.gamma * config.rho * v.residual_estimate
        trace = _trace_metrics(
            k, x_new, variables[0].dual, problems, b, saddle, config, rounds, pieces, started
        )
        traces.append(trace)
        if on_iteration is not None:
            on_iteration(k, variables, trace)
    return variables, traces


def centralized_pj_admm_run(problems, b, config, init, comm_mode="exact", saddle=None):
    """Run the centrally coordinated parallel proximal splitting.

    In exact mode the aggregator forms the true coupling residual each
    iteration and updates one global dual variable (initialized from the
    first entry of ``init``). In quantized mode every transmitted quantity
    is floor-quantized before use: nodes upload quantized primal blocks
    (from which the aggregator builds the broadcast residual) and download
    a quantized dual variable; the aggregator's own dual state stays
    real-valued.
    """
    if comm_mode not in ("exact", "quantized"):
        raise ValueError("comm_mode must be 'exact' or 'quantized'")
    n = len(problems)
    b = np.asarray(b, dtype=float)
    _require_valid_parameters(config, problems)

    x_list = [np.array(v.x, dtype=float) for v in init]
    lam = np.array(init[0].dual, dtype=float)

    quantized = comm_mode == "quantized"
    if quantized:
        uplink = [floor_to_lattice(x, config.level) for x in x_list]
        lam_down = floor_to_lattice(lam, config.level)

    traces = []
    for k in range(1, config.max_outer_iterations + 1):
        started = time.perf_counter()
        if quantized:
            residual = metrics.coupling_residual(uplink, problems, b)
            lam_used = lam_down
        else:
            residual = metrics.coupling_residual(x_list, problems, b)
            lam_used = lam
        x_list = [
            prox_step(prob, x, residual, lam_used, config.rho)
            for prob, x in zip(problems, x_list)
        ]
        if quantized:
            uplink = [floor_to_lattice(x, config.level) for x in x_list]
            new_residual = metrics.coupling_residual(uplink, problems, b)
        else:
            new_residual = metrics.coupling_residual(x_list, problems, b)
        lam = lam + config.gamma * config.rho * new_residual
        if quantized:
            lam_down = floor_to_lattice(lam, config.level)
        traces.append(
            _trace_metrics(k, x_list, lam, problems, b, saddle, config, 0, 0, started)
        )
    variables = [
        NodeVariables(x=x, dual=np.array(lam), residual_estimate=np.array(new_residual))
        for x in x_list
    ]
    return variables, traces


def _format_float(value):
    if value is None:
        return "nan"
    return format(float(value), ".17e")


def write_trace_csv(traces, path_or_handle, include_wallclock=False):
    """Write a trace as CSV with full-precision scientific floats.

    The wallclock column is opt-in: it is the one nondeterministic quantity,
    and leaving it out keeps reruns of a seeded configuration byte-identical.
    """
    columns = TRACE_COLUMNS + ((WALLCLOCK_COLUMN,) if include_wallclock else ())
    own = None
    if hasattr(path_or_handle, "write"):
        handle = path_or_handle
    else:
        own = open(path_or_handle, "w", newline="", encoding="utf-8")
        handle = own
    try:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for t in traces:
            row = [
                t.k,
                _format_float(t.residual_norm),
                _format_float(t.lagrangian_gap),
                _format_float(t.l1_error),
                t.consensus_rounds,
                _format_float(t.merit),
            ]
            if include_wallclock:
                row.append(_format_float(t.wallclock_ms))
            writer.writerow(row)
    finally:
        if own is not None:
            own.close()


def trace_csv_text(traces, include_wallclock=False):
    buf = io.StringIO()
    write_trace_csv(traces, buf, include_wallclock=include_wallclock)
    return buf.getvalue()


def read_trace_csv(path):
    """Read a trace CSV back into a dict of column name -> numpy array."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"empty trace file: {path}")
        expected = list(TRACE_COLUMNS)
        if header != expected and header != expected + [WALLCLOCK_COLUMN]:
            raise ValueError(f"unrecognized trace schema in {path}: {header}")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"trace file has no data rows: {path}")
    data = {}
    for idx, name in enumerate(header):
        if name in ("k", "consensus_rounds"):
            data[name] = np.array([int(r[idx]) for r in rows])
        else:
            data[name] = np.array([float(r[idx]) for r in rows])
    return data
