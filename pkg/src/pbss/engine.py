"""Four-step zero-calibration blind source separation over ring currents.

1. minimize variance over the current box to find the zero-weight point;
2. maximize variance on the linear-region sphere (principal components);
3. minimize kurtosis on the sphere in the whitened basis (independent components);
4. minimize kurtosis over the whole current box from each IC estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .optimize import NelderMeadConfig, SphereDomain, minimize_field, optimize_on_sphere
from .signal_model import InvalidParameter, MixingScenario
from .stats import (DegenerateSignal, SamplingPlan, StatEstimate, acquire, acquisition_latency,
                    estimate)
from .weightbank import MixedSignalProbe, WeightBank


class PbssError(RuntimeError):
    """A step failed; ``partial`` holds whatever the run produced before it."""

    def __init__(self, message: str, partial: "PbssResult"):
        super().__init__(message)
        self.partial = partial


class DegenerateVariance(ValueError):
    pass


@dataclass(frozen=True)
class PbssConfig:
    n_sources: int = 2
    linear_radius: float = 0.6
    plan: SamplingPlan = SamplingPlan(122.88e6, 2**14)
    nm: NelderMeadConfig = NelderMeadConfig()
    refine_edge_fraction: float = 0.1  # step-4 simplex edge, as a fraction of linear_radius
    repeats_success: int = 32
    subtract_noise_floor: bool = False

    def __post_init__(self):
        if self.n_sources < 2:
            raise InvalidParameter("need at least two sources")
        if not self.linear_radius > 0:
            raise InvalidParameter("linear_radius must be positive")
        if not self.refine_edge_fraction > 0:
            raise InvalidParameter("refine_edge_fraction must be positive")

    def check_bank(self, bank: WeightBank) -> None:
        if len(bank.rings) != self.n_sources:
            raise InvalidParameter(
                f"engine expects one ring per source ({self.n_sources}), bank has {len(bank.rings)}")
        i0 = bank.i0
        margin = np.minimum(bank.upper - i0, i0 - bank.lower)
        if np.any(self.linear_radius >= margin):
            raise InvalidParameter(
                f"linear_radius {self.linear_radius} mA does not fit inside the current range")


@dataclass
class PbssResult:
    i0_hat: np.ndarray | None = None
    noise_floor: float | None = None
    pcs: list = field(default_factory=list)
    whitening: np.ndarray | None = None
    ics_whitened: list = field(default_factory=list)
    ics_current: list = field(default_factory=list)
    ics_final: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)
    cycle_count: int = 0

    def to_json(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "i0_hat": arr(self.i0_hat),
            "noise_floor": self.noise_floor,
            "pcs": [{"direction": arr(d), "variance": v} for d, v in self.pcs],
            "whitening": arr(self.whitening),
            "ics_whitened": [arr(u) for u in self.ics_whitened],
            "ics_current": [arr(u) for u in self.ics_current],
            "ics_final": [arr(x) for x in self.ics_final],
            "cycle_count": self.cycle_count,
            "step_traces": {k: [[float(v) for v in t] for t in ts] for k, ts in self.traces.items()},
        }


class Session:
    """Measurement clock for one run: every call acquires the next back-to-back block.

    This is the 'probe factory' the steps share; ``cycles`` counts statistic
    acquisitions, the quantity that multiplies cycle latency.
    """

    def __init__(self, scenario: MixingScenario, bank: WeightBank, plan: SamplingPlan):
        self.scenario = scenario
        self.bank = bank
        self.plan = plan
        self.cycles = 0

    def measure(self, currents) -> StatEstimate:
        probe = MixedSignalProbe(self.scenario, self.bank, np.asarray(currents, dtype=float))
        p = self.plan.advanced(self.cycles)
        self.cycles += 1
        return estimate(acquire(probe, p), p)

    def variance(self, currents) -> float:
        try:
            return self.measure(currents).s2
        except DegenerateSignal:
            return 0.0

    def kurtosis(self, currents) -> float:
        try:
            return self.measure(currents).k
        except DegenerateSignal:
            return math.inf

    @property
    def bounds(self) -> np.ndarray:
        return np.column_stack([self.bank.lower, self.bank.upper])


def step1_find_zero(session: Session, cfg: PbssConfig, x0=None):
    """Minimize measured variance over the current box; returns ``(i0_hat, S2_min, trace)``."""
    bounds = session.bounds
    if x0 is None:
        x0 = bounds.mean(axis=1)
    x, fx, trace = minimize_field(session.variance, x0, bounds, cfg.nm)
    return x, fx, trace


def step2_pca(session: Session, i0_hat, cfg: PbssConfig, noise_floor: float = 0.0):
    """Principal directions of the variance field on the linear-region sphere.

    Returns ``(pcs, traces)`` with ``pcs`` a list of ``(unit direction, S2)``.
    """
    i0_hat = np.asarray(i0_hat, dtype=float)
    r = cfg.linear_radius
    pcs, traces = [], []
    for _ in range(cfg.n_sources):
        dom = SphereDomain(i0_hat, r, tuple(u for u, _ in pcs))
        u, s2, trace = optimize_on_sphere(lambda v: session.variance(dom.point(v)), dom, cfg.nm,
                                          maximize=True)
        if s2 <= noise_floor:
            raise DegenerateVariance(
                f"PC{len(pcs) + 1} variance {s2:.3g} does not exceed the noise floor {noise_floor:.3g}")
        pcs.append((u, float(s2)))
        traces.append(trace.best)
    return pcs, traces


def build_whitening(pcs, linear_radius: float, noise_floor: float = 0.0) -> np.ndarray:
    """``W = U diag(r / sqrt(S2_j))`` so the variance field looks isotropic in ``W``'s frame."""
    U = np.column_stack([u for u, _ in pcs])
    var = np.array([v for _, v in pcs]) - noise_floor
    if np.any(var <= 0):
        raise DegenerateVariance("whitening needs strictly positive PC variances")
    return U * (linear_radius / np.sqrt(var))


def whitened_to_current(whitening, w_white, i0_hat, radius: float) -> np.ndarray:
    """Current setting on the linear-region sphere along ``W w'``."""
    d = whitening @ np.asarray(w_white, dtype=float)
    return np.asarray(i0_hat) + radius * d / np.linalg.norm(d)


def step3_ica(session: Session, i0_hat, whitening, cfg: PbssConfig):
    """Kurtosis minima over unit whitened directions, each orthogonal to the previous ones."""
    r = cfg.linear_radius
    a = whitening.shape[1]
    ics, traces = [], []
    for _ in range(cfg.n_sources):
        dom = SphereDomain(np.zeros(a), 1.0, tuple(ics))
        u, _, trace = optimize_on_sphere(
            lambda v: session.kurtosis(whitened_to_current(whitening, v, i0_hat, r)), dom, cfg.nm)
        ics.append(u)
        traces.append(trace.best)
    return ics, traces


def step4_refine(session: Session, ic_points, cfg: PbssConfig):
    """Field-wide kurtosis descent from each IC estimate.

    The initial simplex edge is ``refine_edge_fraction * linear_radius``.
    """
    edge = cfg.refine_edge_fraction * cfg.linear_radius
    finals, traces = [], []
    for x0 in ic_points:
        x, _, trace = minimize_field(session.kurtosis, x0, session.bounds, cfg.nm, edge=edge)
        finals.append(x)
        traces.append(trace.best)
    return finals, traces


def run_pbss(scenario: MixingScenario, bank: WeightBank, cfg: PbssConfig = PbssConfig(),
             session: Session | None = None) -> PbssResult:
    """Run all four steps; raises :class:`PbssError` carrying the partial result."""
    cfg.check_bank(bank)
    if scenario.n_received != cfg.n_sources:
        raise InvalidParameter("engine requires as many received signals as sources")
    if session is None:
        session = Session(scenario, bank, cfg.plan)
    res = PbssResult()
    r = cfg.linear_radius
    try:
        i0_hat, floor, tr1 = step1_find_zero(session, cfg)
        res.i0_hat, res.noise_floor = i0_hat, floor
        res.traces["step1"] = [tr1.best]

        pcs, tr2 = step2_pca(session, i0_hat, cfg, floor)
        res.pcs = pcs
        res.traces["step2"] = tr2

        res.whitening = build_whitening(pcs, r, floor if cfg.subtract_noise_floor else 0.0)

        ics, tr3 = step3_ica(session, i0_hat, res.whitening, cfg)
        res.ics_whitened = ics
        points = [whitened_to_current(res.whitening, u, i0_hat, r) for u in ics]
        res.ics_current = [(p - i0_hat) / r for p in points]
        res.traces["step3"] = tr3

        finals, tr4 = step4_refine(session, points, cfg)
        res.ics_final = finals
        res.traces["step4"] = tr4
    except (ValueError, ArithmeticError) as exc:
        res.cycle_count = session.cycles
        raise PbssError(f"PBSS aborted: {exc}", res) from exc
    res.cycle_count = session.cycles
    return res


# ---------------------------------------------------------------------------
# analytic oracles and the latency model


def variance_gradient_oracle(M, w) -> np.ndarray:
    """``2 M M^T w``: gradient of output variance w.r.t. weights for unit-variance sources."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1] or abs(np.linalg.det(M)) <= 1e-12:
        raise InvalidParameter("mixing matrix must be square and nonsingular")
    return 2.0 * M @ M.T @ np.asarray(w, dtype=float)


def variance_hessian_oracle(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1] or abs(np.linalg.det(M)) <= 1e-12:
        raise InvalidParameter("mixing matrix must be square and nonsingular")
    return 2.0 * M @ M.T


def optimization_count(cfg: PbssConfig) -> int:
    a = cfg.n_sources
    return 1 + (a - 1) + (a - 1) + a


def nominal_cycle_count(cfg: PbssConfig, evals_per_iteration: float = 1.0) -> float:
    return optimization_count(cfg) * cfg.nm.iterations * evals_per_iteration


@dataclass(frozen=True)
class Overheads:
    """Per-cycle latencies besides acquisition: DAC comms, statistics, photonic settling."""

    t_c: float = 0.0
    t_s: float = 0.0
    t_p: float = 0.0


def latency_model(cfg: PbssConfig, overheads: Overheads = Overheads(), cycles: float | None = None,
                  evals_per_iteration: float = 1.0) -> float:
    """Total weight-determination latency ``N (t_a + t_c + t_s + t_p)`` in seconds.

    ``N`` defaults to optimizations x iterations x ``evals_per_iteration``;
    pass ``cycles`` to use a measured count instead.
    """
    n = nominal_cycle_count(cfg, evals_per_iteration) if cycles is None else cycles
    t = acquisition_latency(cfg.plan) + overheads.t_c + overheads.t_s + overheads.t_p
    return n * t


def with_plan(cfg: PbssConfig, f_s: float | None = None, n_s: int | None = None,
              t_start: float | None = None) -> PbssConfig:
    plan = cfg.plan
    plan = replace(plan, f_s=plan.f_s if f_s is None else f_s,
                   n_s=plan.n_s if n_s is None else n_s,
                   t_start=plan.t_start if t_start is None else t_start)
    return replace(cfg, plan=plan)
