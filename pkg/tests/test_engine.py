import math

import numpy as np
import pytest

from pbss.engine import (DegenerateVariance, Overheads, PbssConfig, PbssError, Session,
                         build_whitening, latency_model, nominal_cycle_count, run_pbss,
                         step1_find_zero, step2_pca, variance_gradient_oracle,
                         variance_hessian_oracle, whitened_to_current, with_plan)
from pbss.optimize import NelderMeadConfig
from pbss.signal_model import M1, M2, InvalidParameter, MixingScenario, default_scenario
from pbss.stats import SamplingPlan, acquire, estimate
from pbss.weightbank import MixedSignalProbe, default_bank

FAST = PbssConfig(plan=SamplingPlan(122.88e6, 2**12))


def angle_deg(u, v):
    c = abs(np.dot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, c)))


def analytic_kurtosis(M, w):
    c = np.asarray(M).T @ w
    return -1.5 * np.sum(c**4) / np.sum(c**2) ** 2


def scan_minima(M, n=3600):
    """Local minima of the analytic mixture kurtosis over current-offset directions (half circle)."""
    th = np.arange(n) * math.pi / n
    k = np.array([analytic_kurtosis(M, [math.cos(t), math.sin(t)]) for t in th])
    idx = [i for i in range(n) if k[i] < k[i - 1] and k[i] <= k[(i + 1) % n]]
    return [np.array([math.cos(th[i]), math.sin(th[i])]) for i in idx]


@pytest.fixture(scope="module")
def ideal_m1_result(ideal_quiet):
    return run_pbss(default_scenario(M1), ideal_quiet)


@pytest.fixture(scope="module")
def noisy_m1_result():
    return run_pbss(default_scenario(M1), default_bank(noise_seed=5))


def test_step1_ideal_finds_i0(ideal_quiet, scenario_m1):
    s = Session(scenario_m1, ideal_quiet, FAST.plan)
    x, floor, _ = step1_find_zero(s, FAST)
    assert np.all(np.abs(x - ideal_quiet.i0) < 0.05)
    for k in range(2):
        assert floor <= s.variance(x + 0.6 * np.eye(2)[k])


def test_step1_lorentzian(noisy_m1_result):
    assert np.all(np.abs(noisy_m1_result.i0_hat - 2.0) < 0.1)


def test_pca_m1(ideal_m1_result):
    (u1, v1), (u2, v2) = ideal_m1_result.pcs
    assert angle_deg(u1, [1, 1]) < 2.0
    # eigenvalues of M1 M1^T are 1.0 and 0.04
    assert v1 / v2 == pytest.approx(25.0, rel=0.1)


def test_pca_identity_isotropic(ideal_quiet, scenario_m1):
    sc = MixingScenario(scenario_m1.sources, np.eye(2))
    res = run_pbss(sc, ideal_quiet, FAST)
    (u1, v1), (u2, v2) = res.pcs
    assert v1 == pytest.approx(v2, rel=0.1)
    assert abs(u1 @ u2) < 1e-9
    for u in res.ics_current:
        assert min(angle_deg(u, [1, 0]), angle_deg(u, [0, 1])) < 3.0


def test_orthonormality(noisy_m1_result):
    U = np.column_stack([u for u, _ in noisy_m1_result.pcs])
    np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-9)
    V = np.column_stack(noisy_m1_result.ics_whitened)
    np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-9)


def test_whitening_isotropy(ideal_m1_result, ideal_quiet, scenario_m1):
    res = ideal_m1_result
    W = res.whitening
    np.testing.assert_allclose(np.linalg.inv(W) @ W, np.eye(2), atol=1e-9)
    s = Session(scenario_m1, ideal_quiet, SamplingPlan(122.88e6, 2**14))
    alpha = 0.1  # keeps every probe inside the current box; variance scales as alpha^2
    vals = [s.variance(res.i0_hat + alpha * W @ [math.cos(t), math.sin(t)])
            for t in np.arange(8) * math.pi / 8]
    assert np.all(np.abs(np.array(vals) / np.mean(vals) - 1) < 0.1)
    assert np.mean(vals) == pytest.approx(alpha**2, rel=0.1)


def test_whitening_rejects_nonpositive():
    with pytest.raises(DegenerateVariance):
        build_whitening([(np.array([1.0, 0]), 0.3), (np.array([0, 1.0]), 0.0)], 0.6)


def test_ics_and_refinement(ideal_m1_result, ideal_quiet, scenario_m1):
    res = ideal_m1_result
    rows = np.linalg.inv(np.asarray(M1))
    finals = [x - ideal_quiet.i0 for x in res.ics_final]
    for row in rows:
        assert min(angle_deg(row, f) for f in finals) < 5.0
    # demixed output leaks < 2% of the other source
    for f in finals:
        c = np.abs(np.asarray(M1).T @ f)
        assert c.min() / c.max() < 0.02
    plan = SamplingPlan(122.88e6, 2**14)

    def kurt(x):
        return estimate(acquire(MixedSignalProbe(scenario_m1, ideal_quiet, x), plan)).k

    p0 = whitened_to_current(res.whitening, res.ics_whitened[0], res.i0_hat, 0.6)
    p1 = whitened_to_current(res.whitening, res.ics_whitened[1], res.i0_hat, 0.6)
    mid = whitened_to_current(res.whitening, res.ics_whitened[0] + res.ics_whitened[1], res.i0_hat, 0.6)
    assert kurt(p0) <= kurt(mid) and kurt(p1) <= kurt(mid)
    for p, x in zip((p0, p1), res.ics_final):
        assert kurt(x) <= kurt(p) + 1e-4  # single-window estimator resolution
    for tr in res.traces["step4"]:
        assert np.all(np.diff(tr) <= 0)


def test_final_points_leave_linear_region(noisy_m1_result):
    for x in noisy_m1_result.ics_final:
        assert np.linalg.norm(x - noisy_m1_result.i0_hat) >= 0.6 - 0.05


def test_cycle_accounting(noisy_m1_result, scenario_m1, monkeypatch):
    res = noisy_m1_result
    assert res.cycle_count <= 5 * (2 * 40 + 4)
    assert [len(res.traces[k]) for k in ("step1", "step2", "step3", "step4")] == [1, 2, 2, 2]
    calls = []
    orig = Session.measure
    monkeypatch.setattr(Session, "measure", lambda self, c: calls.append(1) or orig(self, c))
    r = run_pbss(scenario_m1, default_bank(), FAST)
    assert r.cycle_count == len(calls)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_separation_random_mixing(seed, ideal_quiet, scenario_m1):
    rng = np.random.default_rng(100 + seed)
    while True:
        M = rng.uniform(-1, 1, size=(2, 2))
        if np.linalg.cond(M) < 10:
            break
    truth = scan_minima(M)
    rows = np.linalg.inv(M)
    assert len(truth) == 2
    for row in rows:
        assert min(angle_deg(row, t) for t in truth) < 0.1
    res = run_pbss(MixingScenario(scenario_m1.sources, M), ideal_quiet)
    finals = [x - ideal_quiet.i0 for x in res.ics_final]
    for t in truth:
        assert min(angle_deg(t, f) for f in finals) < 5.0


def test_origin_unique_minimum(ideal_quiet, scenario_m1, rng):
    s = Session(scenario_m1, ideal_quiet, SamplingPlan(122.88e6, 2**10))
    base = s.variance(ideal_quiet.i0)
    assert base == 0.0
    for _ in range(100):
        d = rng.normal(size=2)
        assert s.variance(ideal_quiet.i0 + 0.3 * d / np.linalg.norm(d)) > base


def test_error_carries_partial(scenario_m1, monkeypatch):
    monkeypatch.setattr(Session, "variance", lambda self, c: 1.0)
    with pytest.raises(PbssError) as exc:
        run_pbss(scenario_m1, default_bank(), FAST)
    assert exc.value.partial.i0_hat is not None
    assert exc.value.partial.pcs == []


def test_config_validation():
    with pytest.raises(InvalidParameter):
        PbssConfig(n_sources=1)
    with pytest.raises(InvalidParameter):
        PbssConfig(linear_radius=2.5).check_bank(default_bank())
    with pytest.raises(InvalidParameter):
        PbssConfig().check_bank(default_bank(n_rings=3))


def test_gradient_and_hessian_oracles(rng):
    np.testing.assert_array_equal(variance_gradient_oracle(M1, [0, 0]), [0, 0])
    np.testing.assert_array_equal(variance_gradient_oracle(np.eye(2), [1, 2]), [2, 4])
    for _ in range(50):
        M = rng.normal(size=(2, 2))
        assert np.linalg.det(variance_hessian_oracle(M)) > 0
    with pytest.raises(InvalidParameter):
        variance_gradient_oracle([[1, 2], [2, 4]], [1, 1])


def test_latency_examples():
    cfg = PbssConfig(plan=SamplingPlan(122.88e6, 2**14))
    assert nominal_cycle_count(cfg) == 200
    assert latency_model(cfg) == pytest.approx(26.67e-3, rel=1e-3)
    assert latency_model(cfg, Overheads(t_c=6e-3)) >= 1.2
    zero = PbssConfig(nm=NelderMeadConfig(iterations=0))
    assert latency_model(zero) == 0.0
    assert latency_model(cfg, cycles=410) == pytest.approx(410 * 2**14 / 122.88e6)


def test_with_plan():
    cfg = with_plan(PbssConfig(), f_s=7.68e6, t_start=1e-3)
    assert cfg.plan.f_s == 7.68e6 and cfg.plan.n_s == 2**14 and cfg.plan.t_start == 1e-3


def test_result_json(noisy_m1_result):
    import json
    doc = json.loads(json.dumps(noisy_m1_result.to_json()))
    assert {"i0_hat", "pcs", "whitening", "ics_final", "cycle_count", "step_traces"} <= set(doc)
