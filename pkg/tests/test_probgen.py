"""Tests for instance generation and serialization."""

import numpy as np
import pytest

from qjadmm import (
    InstanceSpec,
    desk_spec,
    generate,
    load_instance,
    full_scale_spec,
    save_instance,
    validate_parameters,
)
from qjadmm.admm import AdmmConfig


def test_full_scale_shapes():
    problems, b = generate(full_scale_spec(seed=0), rho=0.01, gamma=1.0)
    assert len(problems) == 100
    assert problems[0].objective.design.shape == (120, 100)
    assert problems[0].objective.target.shape == (120,)
    assert np.array_equal(problems[0].coupling, np.eye(100))
    assert b.shape == (100,)
    assert np.all(b == 0.0)


def test_full_scale_prox_weight_value():
    problems, _ = generate(full_scale_spec(seed=0), rho=0.01, gamma=1.0)
    assert problems[0].prox_weight == pytest.approx(0.01 * (100 - 1 + 1e-3), rel=1e-12)


def test_generation_is_deterministic():
    a, b_a = generate(desk_spec(seed=5), rho=0.1, gamma=1.0)
    b, b_b = generate(desk_spec(seed=5), rho=0.1, gamma=1.0)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.objective.design, pb.objective.design)
        assert np.array_equal(pa.objective.target, pb.objective.target)
        assert pa.prox_weight == pb.prox_weight
    assert np.array_equal(b_a, b_b)


def test_different_seeds_differ():
    a, _ = generate(desk_spec(seed=1), rho=0.1, gamma=1.0)
    b, _ = generate(desk_spec(seed=2), rho=0.1, gamma=1.0)
    assert not np.array_equal(a[0].objective.design, b[0].objective.design)


def test_desk_instance_passes_parameter_gate():
    spec = desk_spec()
    rho, gamma = 0.1, 1.0
    problems, _ = generate(spec, rho=rho, gamma=gamma)
    cfg = AdmmConfig(rho=rho, gamma=gamma, level="1e-3", max_outer_iterations=1)
    report = validate_parameters(cfg, problems, spec.n_nodes)
    assert report.all_passed
    # threshold arithmetic, recomputed directly
    theta = rho * (spec.n_nodes / (2 - gamma) - 1)
    for entry, prob in zip(report.entries, problems):
        assert entry.theta == pytest.approx(theta, rel=1e-10)
        assert entry.margin == pytest.approx(prob.prox_weight - theta, rel=1e-8)


def test_generated_quadratics_strongly_convex():
    problems, _ = generate(desk_spec(seed=3), rho=0.1, gamma=1.0)
    for prob in problems:
        assert np.linalg.eigvalsh(prob.objective.hessian()).min() > 1e-12


def test_random_coupling_scales_prox_weight():
    spec = InstanceSpec(
        n_nodes=4, local_dim=3, data_rows=5, coupling="random", constraint_dim=2, seed=7
    )
    problems, b = generate(spec, rho=0.5, gamma=1.0)
    assert b.shape == (2,)
    for prob in problems:
        norm_sq = np.linalg.eigvalsh(prob.coupling @ prob.coupling.T).max()
        expected = 0.5 * (4 - 1 + 1e-3) * norm_sq
        assert prob.prox_weight == pytest.approx(expected, rel=1e-8)


def test_nonzero_b_supported():
    spec = InstanceSpec(n_nodes=3, local_dim=2, data_rows=4, b=(1.0, -2.0), seed=0)
    _, b = generate(spec)
    assert b.tolist() == [1.0, -2.0]


def test_spec_validation():
    with pytest.raises(ValueError):
        InstanceSpec(n_nodes=0, local_dim=2, data_rows=3)
    with pytest.raises(ValueError):
        InstanceSpec(n_nodes=2, local_dim=2, data_rows=3, coupling="sparse")
    with pytest.raises(ValueError):
        InstanceSpec(n_nodes=2, local_dim=2, data_rows=3, b=(1.0,))
    with pytest.raises(ValueError):
        InstanceSpec(n_nodes=2, local_dim=2, data_rows=3, coupling="identity", constraint_dim=5)


def test_instance_round_trip_identity_coupling(tmp_path):
    problems, b = generate(desk_spec(n_nodes=4, seed=9), rho=0.1, gamma=1.0)
    path = tmp_path / "instance.txt"
    save_instance(problems, b, path)
    loaded, b2 = load_instance(path)
    assert len(loaded) == len(problems)
    assert np.array_equal(b, b2)
    for orig, back in zip(problems, loaded):
        assert np.array_equal(orig.objective.design, back.objective.design)
        assert np.array_equal(orig.objective.target, back.objective.target)
        assert np.array_equal(orig.coupling, back.coupling)
        assert orig.prox_weight == back.prox_weight


def test_instance_round_trip_random_coupling_and_matrix_prox(tmp_path):
    spec = InstanceSpec(
        n_nodes=3, local_dim=3, data_rows=5, coupling="random", constraint_dim=2,
        b=(0.5, 1.5), seed=4,
    )
    problems, b = generate(spec, rho=0.2, gamma=1.0)
    problems[1].prox_weight = np.diag([4.0, 5.0, 6.0])  # exercise the matrix branch
    path = tmp_path / "instance.txt"
    save_instance(problems, b, path)
    loaded, b2 = load_instance(path)
    assert np.array_equal(b, b2)
    assert np.array_equal(loaded[1].prox_matrix, np.diag([4.0, 5.0, 6.0]))
    for orig, back in zip(problems, loaded):
        assert np.array_equal(orig.coupling, back.coupling)


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "bogus.txt"
    path.write_text("not an instance\n")
    with pytest.raises(ValueError):
        load_instance(path)
