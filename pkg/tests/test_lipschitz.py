"""Norms, constraint projections (vs an independent oracle), and audits."""

import numpy as np
import pytest

from otmap import nn
from otmap.lipschitz import (
    ConstraintSpec,
    audit_lipschitz,
    constraint_violation,
    norm_2_inf,
    norm_inf,
    project_params,
    project_rows_l1,
    project_vector_l1,
)


def test_norm_2_inf_examples():
    assert norm_2_inf(np.array([[3.0, 4.0], [0.0, 1.0]])) == 5.0
    assert norm_2_inf(np.eye(3)) == 1.0
    assert norm_2_inf(np.zeros((2, 2))) == 0.0


def test_norm_inf_examples():
    assert norm_inf(np.array([[3.0, 4.0], [0.0, 1.0]])) == 7.0
    assert norm_inf(np.array([[-1.0, 1.0], [0.5, 0.5]])) == 2.0
    assert norm_inf(np.eye(4)) == 1.0


def bisection_l1_projection(v, radius=1.0, iters=200):
    """Independent oracle: solve sum(max(|v_i| - tau, 0)) = radius by bisection."""
    a = np.abs(v)
    if a.sum() <= radius:
        return np.asarray(v, dtype=float).copy()
    lo, hi = 0.0, a.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(a - mid, 0.0).sum() > radius:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    return np.sign(v) * np.maximum(a - tau, 0.0)


def test_l1_projection_example():
    # l1 norm 1.4: KKT threshold 0.2 comes off each positive coordinate
    out = project_vector_l1(np.array([0.8, 0.6]))
    assert np.allclose(out, [0.6, 0.4], atol=1e-15)


def test_l1_projection_matches_bisection_oracle():
    rng = np.random.default_rng(7)
    for _ in range(300):
        v = rng.normal(size=rng.integers(1, 40)) * rng.choice([0.3, 1.0, 5.0])
        assert np.abs(project_vector_l1(v) - bisection_l1_projection(v)).max() < 1e-10


def test_l1_projection_is_closest_feasible_point():
    rng = np.random.default_rng(8)
    for _ in range(50):
        v = rng.normal(size=6) * 2.0
        proj = project_vector_l1(v)
        d_proj = np.linalg.norm(v - proj)
        for _ in range(50):
            z = rng.normal(size=6)
            z = z / max(1.0, np.abs(z).sum())  # feasible point
            assert d_proj <= np.linalg.norm(v - z) + 1e-12


def test_project_params_first_layer_and_bias_examples():
    p = nn.NetworkParams(
        [np.array([[3.0, 4.0], [0.1, 0.1]])],
        [np.array([3.7, -5.0])],
        bias_bound=2.0,
    )
    project_params(p)
    assert np.allclose(p.weights[0][0], [0.6, 0.8], atol=1e-15)
    assert np.allclose(p.weights[0][1], [0.1, 0.1], atol=0)  # feasible row untouched
    assert p.biases[0].tolist() == [2.0, -2.0]


def test_project_params_idempotent_and_feasible():
    rng = np.random.default_rng(9)
    for trial in range(50):
        dims = [int(rng.integers(1, 5)), 8, 6, int(rng.integers(1, 4))]
        ws = [rng.normal(size=(fo, fi)) * 3 for fi, fo in zip(dims[:-1], dims[1:])]
        bs = [rng.normal(size=fo) * 3 for fo in dims[1:]]
        p = nn.NetworkParams(ws, bs, bias_bound=1.2)
        project_params(p)
        snapshot = [w.copy() for w in p.weights] + [b.copy() for b in p.biases]
        project_params(p)
        for a, b in zip(snapshot, p.weights + p.biases):
            assert np.array_equal(a, b)
        assert norm_2_inf(p.weights[0]) <= 1 + 1e-12
        for w in p.weights[1:]:
            assert norm_inf(w) <= 1 + 1e-12
        for b in p.biases:
            assert np.abs(b).max() <= 1.2


def test_project_rows_l1_rescale_mode():
    w = np.array([[0.8, 0.6], [0.1, 0.1]])
    project_rows_l1(w, mode="rescale")
    assert np.allclose(w[0], [0.8 / 1.4, 0.6 / 1.4])
    assert np.allclose(w[1], [0.1, 0.1])
    with pytest.raises(ValueError):
        project_rows_l1(w, mode="bogus")


def test_constraint_violation_reports_excess():
    p = nn.NetworkParams([2.0 * np.eye(2)], [np.zeros(2)], 1.0)
    assert abs(constraint_violation(p) - 1.0) < 1e-12
    project_params(p)
    assert constraint_violation(p) == 0.0


def test_audit_constrained_net_within_one():
    p = nn.init_network(2, 2, (8, 8), 1.0, seed=11)
    report = audit_lipschitz(p, n_pairs=20_000, seed=1)
    assert report.max_ratio <= 1 + 1e-6
    assert report.feasible


def test_audit_equality_case_single_row():
    # one unit-norm row aligned with x - y gives ratio exactly 1
    p = nn.NetworkParams([np.array([[1.0, 0.0]])], [np.zeros(1)], 1.0)
    x = np.array([0.5, 0.0])
    y = np.array([-0.5, 0.0])
    fx = nn.forward(p, x, raw=True)
    fy = nn.forward(p, y, raw=True)
    ratio = np.abs(fx - fy).max() / np.linalg.norm(x - y)
    assert ratio == 1.0


def test_audit_flags_violating_net():
    p = nn.NetworkParams([2.0 * np.eye(2)], [np.zeros(2)], 1.0)
    report = audit_lipschitz(p, n_pairs=5_000, seed=2)
    assert report.max_ratio > 1.0
    assert not report.feasible


def test_audit_uses_raw_network():
    # L-scaled output would break the ratio bound; the audit must bypass it
    p = nn.init_network(2, 2, (8,), 1.0, output_scale=2.0, project_output=True, seed=3)
    report = audit_lipschitz(p, n_pairs=10_000, seed=4)
    assert report.max_ratio <= 1 + 1e-6


def test_constraint_spec_validation():
    with pytest.raises(ValueError):
        ConstraintSpec(bias_bound=0.0)
