"""Directed communication graphs with implicit self-loops.

Nodes are labeled 1..N. An edge is stored as an ordered ``(receiver, sender)``
pair: ``(j, i)`` means node ``i`` can transmit to node ``j``. Every node
always carries the self-pair ``(i, i)``; neighbor views exclude it, and the
consensus layer accounts for it through the ``1/(1 + out_degree)``
transmission probabilities.
"""

import math
from dataclasses import dataclass

import numpy as np


class NotStronglyConnectedError(ValueError):
    """Raised when an operation requires a strongly connected digraph."""


@dataclass(frozen=True)
class NeighborView:
    """Per-node neighbor sets, excluding the node itself."""

    in_neighbors: frozenset
    out_neighbors: frozenset

    @property
    def in_degree(self):
        return len(self.in_neighbors)

    @property
    def out_degree(self):
        return len(self.out_neighbors)


class Digraph:
    """Immutable directed topology; safe to share across workers.

    Parameters
    ----------
    node_count : int
        Number of nodes, labeled 1..node_count.
    edges : iterable of (receiver, sender)
        Directed communication links. Self-pairs may be included or omitted;
        they are always present in the final edge set.
    """

    def __init__(self, node_count, edges=()):
        if node_count < 1:
            raise ValueError("node_count must be >= 1")
        self._n = int(node_count)
        self._out = {i: set() for i in self.nodes}  # sender -> receivers
        self._in = {i: set() for i in self.nodes}  # receiver -> senders
        for receiver, sender in edges:
            if not (1 <= receiver <= self._n and 1 <= sender <= self._n):
                raise ValueError(f"edge ({receiver}, {sender}) outside 1..{self._n}")
            if receiver == sender:
                continue  # self-loops are implicit on every node
            self._out[sender].add(receiver)
            self._in[receiver].add(sender)
        self._diameter = None
        self._strongly_connected = None

    @property
    def node_count(self):
        return self._n

    @property
    def nodes(self):
        return range(1, self._n + 1)

    @property
    def edges(self):
        """All (receiver, sender) pairs, self-pairs included."""
        pairs = {(i, i) for i in self.nodes}
        for sender, receivers in self._out.items():
            pairs.update((r, sender) for r in receivers)
        return frozenset(pairs)

    def out_neighbors(self, node):
        return self._out[node]

    def in_neighbors(self, node):
        return self._in[node]

    def neighbor_view(self, node):
        return NeighborView(frozenset(self._in[node]), frozenset(self._out[node]))

    def _reach_count(self, adjacency, start):
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adjacency[u]:
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            frontier = nxt
        return len(seen)

    @property
    def strongly_connected(self):
        if self._strongly_connected is None:
            forward = self._reach_count(self._out, 1) == self._n
            backward = self._reach_count(self._in, 1) == self._n
            self._strongly_connected = forward and backward
        return self._strongly_connected

    @property
    def diameter(self):
        """Longest shortest directed path length; cached after first use.

        Self-loops do not count toward path length. A single-node graph has
        no ordered pair of distinct nodes; its diameter is defined as 1 so
        that diameter-sized protocol windows stay well formed.
        """
        if self._diameter is None:
            if not self.strongly_connected:
                raise NotStronglyConnectedError(
                    "diameter is undefined: digraph is not strongly connected"
                )
            if self._n == 1:
                self._diameter = 1
            else:
                worst = 0
                for source in self.nodes:
                    depth = {source: 0}
                    frontier = [source]
                    d = 0
                    while frontier:
                        d += 1
                        nxt = []
                        for u in frontier:
                            for v in self._out[u]:
                                if v not in depth:
                                    depth[v] = d
                                    nxt.append(v)
                        frontier = nxt
                    worst = max(worst, max(depth.values()))
                self._diameter = worst
        return self._diameter

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return self._n == other._n and self._out == other._out

    def __hash__(self):
        return hash((self._n, frozenset((s, frozenset(r)) for s, r in self._out.items())))

    def __repr__(self):
        n_edges = sum(len(r) for r in self._out.values())
        return f"Digraph(node_count={self._n}, non_self_edges={n_edges})"


def is_strongly_connected(graph):
    """True iff a directed path exists between every ordered node pair."""
    return graph.strongly_connected


def diameter(graph):
    """Longest shortest directed path length over all ordered node pairs."""
    return graph.diameter


def random_strongly_connected(n, edge_density, seed):
    """Generate a random strongly connected digraph, deterministically.

    A random directed Hamiltonian cycle guarantees strong connectivity, then
    extra edges are added until roughly ``edge_density`` of the ``n*(n-1)``
    possible non-self ordered pairs are present. Identical arguments always
    produce identical edge sets.

    Parameters
    ----------
    n : int
        Node count (>= 1).
    edge_density : float
        Target fraction of possible directed edges, in (0, 1].
    seed : int
        Seed for the construction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < edge_density <= 1:
        raise ValueError("edge_density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    if n == 1:
        return Digraph(1)
    order = [int(v) + 1 for v in rng.permutation(n)]
    edges = {(order[(idx + 1) % n], order[idx]) for idx in range(n)}
    target = min(n * (n - 1), max(n, math.ceil(edge_density * n * (n - 1))))
    missing = target - len(edges)
    if missing > 0:
        pool = sorted(
            (r, s)
            for r in range(1, n + 1)
            for s in range(1, n + 1)
            if r != s and (r, s) not in edges
        )
        picks = rng.choice(len(pool), size=missing, replace=False)
        edges.update(pool[int(p)] for p in picks)
    return Digraph(n, edges)


def to_edge_list(graph):
    """Serialize to the edge-list text format.

    First line is the node count; each following line is one
    ``receiver sender`` pair. Self-loops are omitted from the text and
    implied on load. Lines are sorted so equal graphs serialize identically.
    """
    lines = [str(graph.node_count)]
    pairs = sorted(p for p in graph.edges if p[0] != p[1])
    lines.extend(f"{r} {s}" for r, s in pairs)
    return "\n".join(lines) + "\n"


def from_edge_list(text):
    """Parse the edge-list text format produced by :func:`to_edge_list`."""
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty edge-list text")
    n = int(rows[0])
    edges = []
    for row in rows[1:]:
        parts = row.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line: {row!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Digraph(n, edges)


def save_edge_list(graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_edge_list(graph))


def load_edge_list(path):
    with open(path, "r", encoding="utf-8") as fh:
        return from_edge_list(fh.read())
