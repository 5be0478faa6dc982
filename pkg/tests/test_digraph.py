"""Tests for the directed-graph model and generator."""

import numpy as np
import pytest

from qjadmm import (
    Digraph,
    NotStronglyConnectedError,
    diameter,
    from_edge_list,
    is_strongly_connected,
    random_strongly_connected,
    to_edge_list,
)


def cycle(n):
    # edge (receiver, sender): i sends to i+1
    return Digraph(n, [((i % n) + 1, i) for i in range(1, n + 1)])


def complete(n):
    return Digraph(n, [(r, s) for r in range(1, n + 1) for s in range(1, n + 1) if r != s])


def test_three_cycle_strongly_connected():
    assert is_strongly_connected(cycle(3))


def test_path_not_strongly_connected():
    g = Digraph(3, [(2, 1), (3, 2)])
    assert not is_strongly_connected(g)


def test_single_node_strongly_connected():
    assert is_strongly_connected(Digraph(1))


def test_self_pairs_always_present():
    g = Digraph(3, [(2, 1), (3, 2), (1, 3)])
    for i in (1, 2, 3):
        assert (i, i) in g.edges


def test_neighbor_view_excludes_self():
    g = complete(4)
    view = g.neighbor_view(2)
    assert 2 not in view.in_neighbors
    assert 2 not in view.out_neighbors
    assert view.in_degree == view.out_degree == 3


def test_diameter_complete_graph():
    assert diameter(complete(4)) == 1


def test_diameter_directed_cycle():
    assert diameter(cycle(4)) == 3


@pytest.mark.parametrize("n", [3, 5, 8, 12])
def test_diameter_cycle_is_n_minus_one(n):
    assert diameter(cycle(n)) == n - 1


def test_diameter_single_node_convention():
    assert diameter(Digraph(1)) == 1


def test_diameter_requires_strong_connectivity():
    g = Digraph(3, [(2, 1), (3, 2)])
    with pytest.raises(NotStronglyConnectedError):
        diameter(g)


def _floyd_warshall_diameter(g):
    n = g.node_count
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for receiver, sender in g.edges:
        if receiver != sender:
            dist[sender - 1, receiver - 1] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    off_diag = dist[~np.eye(n, dtype=bool)]
    assert np.all(np.isfinite(off_diag))
    return int(off_diag.max())


@pytest.mark.parametrize("seed", range(20))
def test_diameter_matches_floyd_warshall_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    g = random_strongly_connected(n, float(rng.uniform(0.1, 0.9)), seed)
    assert diameter(g) == _floyd_warshall_diameter(g)


@pytest.mark.parametrize("seed", range(10))
def test_generator_postconditions(seed):
    rng = np.random.default_rng(seed + 100)
    n = int(rng.integers(1, 25))
    g = random_strongly_connected(n, 0.3, seed)
    assert is_strongly_connected(g)
    if n > 1:
        assert 1 <= diameter(g) <= n - 1
    for i in g.nodes:
        assert (i, i) in g.edges


def test_generator_single_node():
    g = random_strongly_connected(1, 0.5, 0)
    assert g.node_count == 1
    assert g.edges == frozenset({(1, 1)})


def test_generator_deterministic():
    a = random_strongly_connected(10, 0.3, 7)
    b = random_strongly_connected(10, 0.3, 7)
    assert a.edges == b.edges
    assert a == b


def test_generator_density_changes_edge_count():
    sparse = random_strongly_connected(20, 0.1, 1)
    dense = random_strongly_connected(20, 0.8, 1)
    assert len(dense.edges) > len(sparse.edges)


def test_generator_full_density_is_complete():
    g = random_strongly_connected(5, 1.0, 0)
    assert len(g.edges) == 5 * 4 + 5  # all ordered pairs plus self-pairs


def test_generator_rejects_bad_arguments():
    with pytest.raises(ValueError):
        random_strongly_connected(0, 0.5, 0)
    with pytest.raises(ValueError):
        random_strongly_connected(5, 0.0, 0)
    with pytest.raises(ValueError):
        random_strongly_connected(5, 1.5, 0)


def test_edge_list_round_trip():
    g = random_strongly_connected(8, 0.4, 3)
    text = to_edge_list(g)
    again = from_edge_list(text)
    assert again == g
    assert to_edge_list(again) == text


def test_edge_list_omits_self_loops():
    text = to_edge_list(cycle(3))
    lines = text.strip().splitlines()
    assert lines[0] == "3"
    for line in lines[1:]:
        r, s = line.split()
        assert r != s


def test_edge_list_file_helpers(tmp_path):
    from qjadmm import load_edge_list, save_edge_list

    g = random_strongly_connected(6, 0.3, 5)
    path = tmp_path / "graph.txt"
    save_edge_list(g, path)
    assert load_edge_list(path) == g


def test_edge_list_rejects_garbage():
    with pytest.raises(ValueError):
        from_edge_list("")
    with pytest.raises(ValueError):
        from_edge_list("3\n1 2 3\n")


def test_edges_validated():
    with pytest.raises(ValueError):
        Digraph(3, [(4, 1)])
