"""Experiment driver: configure, run, sweep, and compare trace files.

A fully specified configuration (instance, graph, solver parameters, seeds)
produces byte-identical trace CSVs on every rerun. One CSV is written per
(algorithm, quantization level) pair, plus a metadata JSON echoing the
materialized configuration, the seeds, the oracle residual, and per-run
communication totals.
"""

import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .admm import (
    ALGORITHM_CENTRALIZED_EXACT,
    ALGORITHM_CENTRALIZED_QUANTIZED,
    ALGORITHM_QDPJ,
    AdmmConfig,
    NodeVariables,
    centralized_pj_admm_run,
    distributed_pj_admm_run,
    read_trace_csv,
    validate_parameters,
    write_trace_csv,
)
from .digraph import random_strongly_connected
from .metrics import kkt_oracle
from .probgen import ENTRY_DISTRIBUTION, InstanceSpec, generate
from .quantize import PAYLOAD_BITS_PER_ENTRY, PIECE_HEADER_BITS, QuantizationLevel

OUTPUT_DIR_ENV = "QJADMM_OUT"
METADATA_FILENAME = "metadata.json"

ALGORITHMS = (
    ALGORITHM_QDPJ,
    ALGORITHM_CENTRALIZED_EXACT,
    ALGORITHM_CENTRALIZED_QUANTIZED,
)


@dataclass(frozen=True)
class GraphSpec:
    n: int = None  # defaults to the instance's node count
    density: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run; all randomness is seeded."""

    instance: InstanceSpec
    graph: GraphSpec = field(default_factory=GraphSpec)
    admm: AdmmConfig = None
    algorithm: str = "all"  # qdpj | centralized_exact | centralized_quantized | all
    delta_sweep: tuple = ()
    output_dir: str = None

    def __post_init__(self):
        if self.admm is None:
            raise ValueError("an AdmmConfig is required")
        if self.algorithm not in ALGORITHMS + ("all",):
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of "
                f"{ALGORITHMS + ('all',)}"
            )
        object.__setattr__(
            self,
            "delta_sweep",
            tuple(QuantizationLevel(d) for d in self.delta_sweep),
        )

    # -- JSON round trip ----------------------------------------------------

    def to_dict(self):
        data = {
            "instance": asdict(self.instance),
            "graph": asdict(self.graph),
            "admm": asdict(self.admm),
            "algorithm": self.algorithm,
            "delta_sweep": [lvl.spec_string for lvl in self.delta_sweep],
            "output_dir": self.output_dir,
        }
        data["admm"]["level"] = self.admm.level.spec_string
        if self.instance.b is not None:
            data["instance"]["b"] = list(self.instance.b)
        return data

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        inst = data["instance"]
        if inst.get("b") is not None:
            inst = dict(inst, b=tuple(inst["b"]))
        return cls(
            instance=InstanceSpec(**inst),
            graph=GraphSpec(**data.get("graph", {})),
            admm=AdmmConfig(**data["admm"]),
            algorithm=data.get("algorithm", "all"),
            delta_sweep=tuple(data.get("delta_sweep", ())),
            output_dir=data.get("output_dir"),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _delta_tag(level):
    mantissa, exponent = format(level.as_float, ".0e").split("e")
    return f"{mantissa}e{int(exponent)}"


def resolve_output_dir(config):
    out = config.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "runs"
    return Path(out)


def default_init(problems, b):
    """Zero primal blocks and a common zero dual copy."""
    m = len(b)
    return [
        NodeVariables(x=np.zeros(p.dimension), dual=np.zeros(m)) for p in problems
    ]


def run_experiment(config, include_wallclock=False, echo=None):
    """Execute the configured runs and write one trace CSV per run.

    Returns a manifest dict with the written paths and per-run summaries.
    ``echo``, when given, receives progress strings (the CLI passes print).
    """
    say = echo if echo is not None else (lambda _msg: None)
    out_dir = resolve_output_dir(config)
    out_dir.mkdir(parents=True, exist_ok=True)

    problems, b = generate(config.instance, rho=config.admm.rho, gamma=config.admm.gamma)
    n = config.instance.n_nodes
    graph = random_strongly_connected(
        config.graph.n or n, config.graph.density, config.graph.seed
    )
    say(f"instance: {n} nodes, graph diameter {graph.diameter}")
    saddle = kkt_oracle(problems, b)
    say(f"oracle residual: {saddle.nu_residual:.3e}")

    algorithms = ALGORITHMS if config.algorithm == "all" else (config.algorithm,)
    deltas = config.delta_sweep or (config.admm.level,)

    trace_paths = []
    run_meta = {}
    used_names = set()
    for algorithm in algorithms:
        levels = (deltas[0],) if algorithm == ALGORITHM_CENTRALIZED_EXACT else deltas
        for level in levels:
            admm_cfg = replace(config.admm, level=level)
            init = default_init(problems, b)
            started = time.perf_counter()
            if algorithm == ALGORITHM_QDPJ:
                _, traces = distributed_pj_admm_run(
                    problems, graph, b, admm_cfg, init, saddle=saddle
                )
                name = f"qdpj_delta_{_delta_tag(level)}.csv"
            elif algorithm == ALGORITHM_CENTRALIZED_QUANTIZED:
                _, traces = centralized_pj_admm_run(
                    problems, b, admm_cfg, init, comm_mode="quantized", saddle=saddle
                )
                name = f"centralized_quantized_delta_{_delta_tag(level)}.csv"
            else:
                _, traces = centralized_pj_admm_run(
                    problems, b, admm_cfg, init, comm_mode="exact", saddle=saddle
                )
                name = "centralized_exact.csv"
            elapsed = time.perf_counter() - started
            if name in used_names:  # two sweep levels sharing one rounded tag
                stem, ext = name.rsplit(".", 1)
                name = f"{stem}_{len(used_names)}.{ext}"
            used_names.add(name)
            path = out_dir / name
            write_trace_csv(traces, path, include_wallclock=include_wallclock)
            trace_paths.append(path)
            pieces_total = int(sum(t.pieces_sent for t in traces))
            run_meta[name] = {
                "algorithm": algorithm,
                "delta": level.spec_string,
                "iterations": len(traces),
                "final_l1_error": traces[-1].l1_error,
                "consensus_rounds_total": int(sum(t.consensus_rounds for t in traces)),
                "pieces_sent_total": pieces_total,
                "bits_estimate_total": pieces_total
                * (len(b) * PAYLOAD_BITS_PER_ENTRY + PIECE_HEADER_BITS),
                "elapsed_seconds": elapsed,
            }
            say(f"wrote {path} ({len(traces)} iterations, {elapsed:.1f}s)")

    metadata = {
        "config": config.to_dict(),
        "version": __version__,
        "entry_distribution": ENTRY_DISTRIBUTION,
        "graph": {
            "node_count": graph.node_count,
            "diameter": graph.diameter,
            "non_self_edges": sum(len(graph.out_neighbors(i)) for i in graph.nodes),
            "density": config.graph.density,
            "seed": config.graph.seed,
        },
        "oracle_residual": saddle.nu_residual,
        "runs": run_meta,
    }
    metadata_path = out_dir / METADATA_FILENAME
    metadata_path.write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {"traces": trace_paths, "metadata": metadata_path}


def _floor_window(values, width=100):
    tail = values[-min(width, len(values)):]
    return float(np.mean(tail))


def compare_traces(trace_paths):
    """Summarize traces: final error, settling iteration, communication.

    Each row reports the final l1 error, the first iteration whose error
    falls within twice the final floor (the mean over the last 100
    iterations), the mean consensus rounds per iteration, and — when a
    sibling metadata file is found — the total pieces sent.
    """
    if not trace_paths:
        raise ValueError("no trace paths given")
    rows = []
    k_axis = None
    for path in trace_paths:
        path = Path(path)
        data = read_trace_csv(path)
        if k_axis is None:
            k_axis = data["k"]
        elif len(k_axis) != len(data["k"]) or not np.array_equal(k_axis, data["k"]):
            raise ValueError(f"trace {path} does not share the iteration axis")
        l1 = data["l1_error"]
        floor = _floor_window(l1)
        within = np.nonzero(l1 <= 2.0 * floor)[0]
        first_k = int(data["k"][within[0]]) if within.size else None
        pieces = None
        meta_path = path.parent / METADATA_FILENAME
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            entry = meta.get("runs", {}).get(path.name)
            if entry is not None:
                pieces = entry.get("pieces_sent_total")
        rows.append(
            {
                "trace": path.name,
                "final_l1_error": float(l1[-1]),
                "floor": floor,
                "first_within_2x_floor": first_k,
                "mean_consensus_rounds": float(np.mean(data["consensus_rounds"])),
                "pieces_sent_total": pieces,
            }
        )
    return rows


def format_compare_table(rows):
    headers = (
        "trace",
        "final_l1_error",
        "floor",
        "first_within_2x_floor",
        "mean_consensus_rounds",
        "pieces_sent_total",
    )
    table = [headers]
    for row in rows:
        table.append(
            tuple(
                "-" if row[h] is None else (f"{row[h]:.6e}" if isinstance(row[h], float) else str(row[h]))
                for h in headers
            )
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in table]
    return "\n".join(lines)


def check_params_report(config):
    """Materialize the instance and return the parameter gate report."""
    problems, _ = generate(config.instance, rho=config.admm.rho, gamma=config.admm.gamma)
    return validate_parameters(config.admm, problems, config.instance.n_nodes)
