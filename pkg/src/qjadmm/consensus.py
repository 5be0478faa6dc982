"""Finite-time quantized average consensus over a digraph.

Round-synchronous simulator of an integer mass-splitting gossip protocol.
Each node quantizes its input vector onto a common lattice, doubles it into
an integer mass held against a piece counter, and repeatedly splits off
floor-divided pieces that travel to random out-neighbors (or back to the
node itself). Max/min consensus over windows sized by the graph diameter
detects, in finite time, the moment every node's mass-to-count ratio lies
within one lattice step of every other's; all nodes then output the same
lattice point, which is within two lattice steps per coordinate of the true
average of the inputs.

Delivery is per-round: a piece sent in round ``t`` is folded into its
receiver at the end of round ``t``, so the summed mass and the summed piece
count are conserved exactly at every round boundary.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .digraph import NotStronglyConnectedError
from .quantize import (
    INT_LIMIT,
    PAYLOAD_BITS_PER_ENTRY,
    PIECE_HEADER_BITS,
    QuantizedVector,
    dequantize,
    quantize_floor,
)

# Generous default: the protocol terminates in finite time with probability
# one, so hitting the cap signals disconnectivity or a bug, not bad luck.
DEFAULT_ROUND_CAP_PER_DIAMETER = 10_000

TRANSCRIPT_COLUMNS = (
    "round",
    "node",
    "mass",
    "count",
    "window_max",
    "window_min",
    "pieces_sent",
)


class RoundCapExceededError(RuntimeError):
    """Round budget exhausted before the stopping rule fired.

    Carries the node states and round count for diagnosis.
    """

    def __init__(self, rounds, states):
        super().__init__(
            f"consensus did not stop within {rounds} rounds; the digraph may "
            "not be strongly connected, or the cap is too small"
        )
        self.rounds = rounds
        self.states = states


@dataclass
class ConsensusNodeState:
    """One node's protocol state between rounds.

    ``mass`` is the integer lattice vector the node currently holds and
    ``count`` the number of atomic pieces it represents; their ratio tracks
    the node's running average estimate. ``window_max``/``window_min`` hold
    the max/min-consensus extrema of the current diameter-sized window.
    """

    node: int
    mass: np.ndarray
    count: int
    window_max: np.ndarray
    window_min: np.ndarray
    targets: tuple
    out_probabilities: dict
    splits_remaining: int = 0

    def ratio_bounds(self):
        """Element-wise ceil and floor of mass/count."""
        return _ceil_div(self.mass, self.count), _floor_div(self.mass, self.count)


@dataclass(frozen=True)
class PieceMessage:
    """An atomic fragment of mass in flight: one count unit plus its vector."""

    payload_mass: np.ndarray
    sender: int
    receiver: int
    round_index: int
    payload_count: int = 1


@dataclass
class ConsensusResult:
    estimates: list = field(repr=False)
    rounds_used: int = 0
    pieces_sent_total: int = 0
    bits_estimate: int = 0

    @property
    def common_estimate(self):
        return self.estimates[0]


def _floor_div(a, b):
    return a // b


def _ceil_div(a, b):
    return -((-a) // b)


def init_consensus(inputs, graph, level):
    """Build per-node protocol states from real input vectors.

    Every node starts with two pieces whose combined mass is twice the
    floor-quantized input, and assigns probability ``1/(1 + out_degree)`` to
    each out-neighbor and to itself.

    Parameters
    ----------
    inputs : sequence of array_like
        One real vector per node, all the same length.
    graph : Digraph
    level : QuantizationLevel

    Returns
    -------
    list of ConsensusNodeState, ordered by node id.
    """
    n = graph.node_count
    if len(inputs) != n:
        raise ValueError(f"expected {n} input vectors, got {len(inputs)}")
    vectors = [np.atleast_1d(np.asarray(v, dtype=float)) for v in inputs]
    dim = vectors[0].shape[0]
    for v in vectors:
        if v.shape != (dim,):
            raise ValueError("all input vectors must share one dimension")

    masses = [2 * quantize_floor(v, level).values for v in vectors]
    # Mass magnitudes never exceed the initial per-coordinate L1 sum (splits
    # preserve sign and merges are bounded by it), so one exact check at
    # initialization rules out int64 wraparound for the whole run.
    totals = [sum(abs(int(mass[j])) for mass in masses) for j in range(dim)]
    if max(totals, default=0) >= INT_LIMIT:
        raise OverflowError(
            "summed quantized magnitudes exceed the integer headroom; "
            f"use a coarser level than {level}"
        )

    states = []
    for i in graph.nodes:
        targets = tuple(sorted(graph.out_neighbors(i) | {i}))
        prob = 1.0 / len(targets)
        states.append(
            ConsensusNodeState(
                node=i,
                mass=masses[i - 1],
                count=2,
                window_max=np.zeros(dim, dtype=np.int64),
                window_min=np.zeros(dim, dtype=np.int64),
                targets=targets,
                out_probabilities={t: prob for t in targets},
            )
        )
    return states


def _fusion_plan(graph):
    # Precomputed segments (self followed by in-neighbors, per node) so the
    # per-round max/min fusion is two reduceat calls on stacked arrays.
    plan = getattr(graph, "_consensus_fusion_plan", None)
    if plan is None:
        order = []
        offsets = []
        for i in graph.nodes:
            offsets.append(len(order))
            order.append(i - 1)
            order.extend(j - 1 for j in sorted(graph.in_neighbors(i)))
        plan = (np.asarray(order, dtype=np.intp), np.asarray(offsets, dtype=np.intp))
        graph._consensus_fusion_plan = plan
    return plan


def consensus_round(states, graph, node_rngs, t):
    """Advance the protocol by one synchronous round (t >= 1).

    Phases: refresh the max/min window at the first round of each
    diameter-sized window; fuse extrema with in-neighbors' broadcasts; split
    off ``count - 1`` pieces per node, routing each to a random target; fold
    all pieces sent this round into their receivers.

    Returns the updated states and the list of delivered pieces.
    """
    d = graph.diameter
    if (t - 1) % d == 0:
        for st in states:
            st.window_max, st.window_min = st.ratio_bounds()

    # Synchronous broadcast: everyone fuses against this round's snapshot.
    order, offsets = _fusion_plan(graph)
    fused_max = np.maximum.reduceat(
        np.stack([st.window_max for st in states])[order], offsets, axis=0
    )
    fused_min = np.minimum.reduceat(
        np.stack([st.window_min for st in states])[order], offsets, axis=0
    )
    for idx, st in enumerate(states):
        st.window_max = fused_max[idx]
        st.window_min = fused_min[idx]

    delivered = []
    for st in states:
        st.splits_remaining = st.count
        sends = st.count - 1
        if sends <= 0:
            continue
        draws = node_rngs[st.node - 1].draw_targets(len(st.targets), sends)
        mass = st.mass
        for j in range(sends):
            piece = mass // st.count
            mass = mass - piece
            st.count -= 1
            st.splits_remaining -= 1
            delivered.append(
                PieceMessage(
                    payload_mass=piece,
                    sender=st.node,
                    receiver=st.targets[draws[j]],
                    round_index=t,
                )
            )
        st.mass = mass

    by_node = {st.node: st for st in states}
    for msg in delivered:
        rcv = by_node[msg.receiver]
        rcv.mass += msg.payload_mass
        rcv.count += msg.payload_count
    return states, delivered


def check_stop(states, t, graph_diameter):
    """Stopping rule: window complete and all extrema within one step.

    Fires only at round indices divisible by the diameter, once every node's
    fused window max and min differ by at most 1 in every coordinate. The
    extrema have then propagated over a full diameter of fusion rounds, so
    they are global and all nodes decide together.
    """
    if t % graph_diameter != 0:
        return False
    for st in states:
        if int(np.max(np.abs(st.window_max - st.window_min))) > 1:
            return False
    return True


class _NodeStream:
    """Buffered target draws from one node's independent seeded stream."""

    __slots__ = ("rng", "_buffer", "_pos", "_bound")

    def __init__(self, rng):
        self.rng = rng
        self._buffer = None
        self._pos = 0
        self._bound = 0

    def draw_targets(self, n_targets, k):
        # the target count is fixed per node; block draws keep generator
        # call overhead off the per-piece path
        if (
            self._buffer is None
            or self._bound != n_targets
            or self._pos + k > self._buffer.shape[0]
        ):
            self._bound = n_targets
            self._buffer = self.rng.integers(0, n_targets, size=max(512, k))
            self._pos = 0
        out = self._buffer[self._pos : self._pos + k]
        self._pos += k
        return out


def _node_rngs(graph, seed):
    # One independent stream per node, derived from (seed..., node id), so a
    # node's draws do not depend on scheduling order.
    entropy = [seed] if isinstance(seed, int) else list(seed)
    return [
        _NodeStream(np.random.default_rng(np.random.SeedSequence(entropy + [node])))
        for node in graph.nodes
    ]


def run_consensus(
    inputs,
    graph,
    level,
    seed=0,
    round_cap=None,
    on_round=None,
    transcript=None,
):
    """Run the protocol to termination and return the common estimate.

    Parameters
    ----------
    inputs : sequence of array_like
        One real vector per node.
    graph : Digraph
        Must be strongly connected.
    level : QuantizationLevel
    seed : int or sequence of int
        Master seed; per-node streams are derived from it.
    round_cap : int, optional
        Abort threshold; defaults to 10_000 times the graph diameter.
    on_round : callable, optional
        Called as ``on_round(t, states, delivered)`` after each round's
        delivery, before the stop check.
    transcript : path or file-like, optional
        When given, a per-round CSV of every node's state is written
        (columns: round, node, mass, count, window_max, window_min,
        pieces_sent; vectors are ';'-joined integers).

    Returns
    -------
    ConsensusResult
        Per-node estimates (all identical), rounds used, pieces sent, and a
        transmitted-bits estimate.

    Raises
    ------
    NotStronglyConnectedError
        The protocol requires strong connectivity.
    RoundCapExceededError
        The cap was reached; carries the states for diagnosis.
    """
    if not graph.strongly_connected:
        raise NotStronglyConnectedError("consensus requires a strongly connected digraph")
    d = graph.diameter
    cap = DEFAULT_ROUND_CAP_PER_DIAMETER * d if round_cap is None else int(round_cap)
    if cap < 1:
        raise ValueError("round_cap must be positive")

    states = init_consensus(inputs, graph, level)
    rngs = _node_rngs(graph, seed)
    dim = states[0].mass.shape[0]

    own_handle = None
    writer = None
    if transcript is not None:
        if hasattr(transcript, "write"):
            handle = transcript
        else:
            own_handle = open(transcript, "w", newline="", encoding="utf-8")
            handle = own_handle
        writer = csv.writer(handle)
        writer.writerow(TRANSCRIPT_COLUMNS)

    pieces_total = 0
    try:
        for t in range(1, cap + 1):
            states, delivered = consensus_round(states, graph, rngs, t)
            pieces_total += len(delivered)
            if writer is not None:
                sent_by = {st.node: 0 for st in states}
                for msg in delivered:
                    sent_by[msg.sender] += 1
                for st in states:
                    writer.writerow(
                        [
                            t,
                            st.node,
                            ";".join(str(int(v)) for v in st.mass),
                            st.count,
                            ";".join(str(int(v)) for v in st.window_max),
                            ";".join(str(int(v)) for v in st.window_min),
                            sent_by[st.node],
                        ]
                    )
            if on_round is not None:
                on_round(t, states, delivered)
            if check_stop(states, t, d):
                estimates = [
                    dequantize(QuantizedVector(st.window_min, level)) for st in states
                ]
                first = estimates[0]
                for est in estimates[1:]:
                    if not np.array_equal(est, first):
                        raise RuntimeError(
                            "stopping rule fired without global agreement; "
                            "this indicates a protocol bug"
                        )
                bits = pieces_total * (dim * PAYLOAD_BITS_PER_ENTRY + PIECE_HEADER_BITS)
                return ConsensusResult(
                    estimates=estimates,
                    rounds_used=t,
                    pieces_sent_total=pieces_total,
                    bits_estimate=bits,
                )
    finally:
        if own_handle is not None:
            own_handle.close()
    raise RoundCapExceededError(cap, states)
