import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbss.optimize import (NelderMeadConfig, OverConstrained, SphereDomain, angles_to_unit,
                           minimize_field, optimize_on_sphere, regular_simplex, unit_to_angles)
from pbss.signal_model import InvalidParameter

BOX = np.array([[0.0, 5.0], [0.0, 5.0]])


class Counter:
    def __init__(self, f):
        self.f, self.calls, self.points = f, 0, []

    def __call__(self, x):
        self.calls += 1
        self.points.append(np.array(x, copy=True))
        return self.f(x)


def test_quadratic_converges():
    c = np.array([1.3, 3.7])
    x, fx, trace = minimize_field(lambda v: float(np.sum((v - c) ** 2)), [2.5, 2.5], BOX)
    assert np.linalg.norm(x - c) < 1e-3
    assert np.all(np.diff(trace.best) <= 0)


def test_constant_objective_returns_start():
    x, _, _ = minimize_field(lambda v: 1.0, [2.5, 2.5], BOX)
    np.testing.assert_array_equal(x, [2.5, 2.5])


def test_out_of_bounds_never_evaluated():
    f = Counter(lambda v: float(np.sum(v)))  # pulls toward the lower corner
    minimize_field(f, [0.2, 0.2], BOX)
    pts = np.array(f.points)
    assert np.all(pts >= 0) and np.all(pts <= 5)


def test_invalid_start_rejected():
    with pytest.raises(InvalidParameter):
        minimize_field(lambda v: 0.0, [6.0, 1.0], BOX)


def test_config_validation():
    for bad in (dict(expansion=0.9), dict(contraction=1.5), dict(reflection=0.0), dict(shrink=1.0)):
        with pytest.raises(InvalidParameter):
            NelderMeadConfig(**bad)


def test_regular_simplex_edges():
    s = regular_simplex(np.zeros(3), 0.7)
    d = [np.linalg.norm(s[i] - s[j]) for i in range(4) for j in range(i + 1, 4)]
    np.testing.assert_allclose(d, 0.7, rtol=1e-12)


def test_circle_linear_objective():
    u, val, _ = optimize_on_sphere(lambda v: v[0], SphereDomain(np.zeros(2), 1.0), maximize=True)
    assert np.linalg.norm(u - [1, 0]) < 1e-3
    assert val == pytest.approx(1.0, abs=1e-6)


def test_forced_direction_sign():
    dom = SphereDomain(np.zeros(2), 1.0, (np.array([1.0, 0.0]),))
    u, _, trace = optimize_on_sphere(lambda v: v[1], dom)
    np.testing.assert_allclose(u, [0, -1], atol=1e-15)
    assert trace.n_evals == 2
    u, _, _ = optimize_on_sphere(lambda v: v[1] ** 2, dom)
    assert abs(abs(u[1]) - 1) < 1e-15


def test_over_constrained():
    dom = SphereDomain(np.zeros(2), 1.0, (np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    with pytest.raises(OverConstrained):
        optimize_on_sphere(lambda v: 0.0, dom)


def test_non_orthonormal_constraints_rejected():
    with pytest.raises(InvalidParameter):
        SphereDomain(np.zeros(2), 1.0, (np.array([1.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31))
def test_angles_roundtrip(n, seed):
    u = np.random.default_rng(seed).normal(size=n)
    u /= np.linalg.norm(u)
    np.testing.assert_allclose(angles_to_unit(unit_to_angles(u)), u, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.data())
def test_sphere_feasibility_and_budget(d, data):
    k = data.draw(st.integers(0, d - 1))
    seed = data.draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    cons = tuple(q[:, j] for j in range(k))
    A = rng.normal(size=(d, d))
    f = Counter(lambda u: float(u @ A @ u + u[0]))
    cfg = NelderMeadConfig()
    u, _, trace = optimize_on_sphere(f, SphereDomain(rng.normal(size=d), 0.6, cons), cfg)
    for p in f.points + [u]:
        assert abs(np.linalg.norm(p) - 1) < 1e-12
        for c in cons:
            assert abs(p @ c) < 1e-9
    assert f.calls == trace.n_evals <= cfg.eval_budget(d - k)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31), st.integers(1, 60))
def test_field_budget_and_determinism(d, seed, iters):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 5, size=d)
    w = rng.uniform(0.1, 3, size=d)
    cfg = NelderMeadConfig(iterations=iters)
    box = np.tile([0.0, 5.0], (d, 1))
    f = Counter(lambda v: float(np.sum(w * np.abs(v - c) ** 1.5)))
    x1, f1, tr = minimize_field(f, np.full(d, 2.5), box, cfg)
    assert f.calls <= cfg.eval_budget(d)
    assert np.all(np.diff(tr.best) <= 0)
    x2, f2, _ = minimize_field(f, np.full(d, 2.5), box, cfg)
    np.testing.assert_array_equal(x1, x2)
    assert f1 == f2
