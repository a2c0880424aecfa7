"""Sub-Nyquist acquisition and the (S^2, K) statistic estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import _kernels
from .signal_model import InvalidParameter
from .weightbank import MixedSignalProbe, eval_mixed

SNR_CONVENTION = "20*log10(|mean|/std)"


class DegenerateSignal(ValueError):
    pass


class SamplingMode(str, Enum):
    PERIODIC = "periodic"
    RANDOM = "random"


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SamplingPlan:
    """``n_s`` samples at ``f_s`` starting at ``t_start``.

    In random mode the sample instants are drawn uniformly from
    ``[t_start, t_start + window)``; the window defaults to ``n_s / f_s``.
    """

    f_s: float
    n_s: int
    t_start: float = 0.0
    mode: SamplingMode = SamplingMode.PERIODIC
    window: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SamplingMode(self.mode))
        if not (self.f_s > 0 and math.isfinite(self.f_s)):
            raise InvalidParameter("f_s must be positive")
        if isinstance(self.n_s, bool) or int(self.n_s) != self.n_s or not is_power_of_two(int(self.n_s)):
            raise InvalidParameter(f"n_s must be a power of two, got {self.n_s}")
        object.__setattr__(self, "n_s", int(self.n_s))
        if self.window is not None and not self.window > 0:
            raise InvalidParameter("window must be positive")

    @property
    def duration(self) -> float:
        if self.mode is SamplingMode.RANDOM and self.window is not None:
            return self.window
        return self.n_s / self.f_s

    @property
    def index0(self) -> int:
        """Absolute sample-clock index of the first sample (addresses the noise stream)."""
        return int(round(self.t_start * self.f_s))

    def times(self) -> np.ndarray:
        if self.mode is SamplingMode.PERIODIC:
            return self.t_start + np.arange(self.n_s) / self.f_s
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, self.index0])))
        return np.sort(self.t_start + self.duration * rng.random(self.n_s))

    def advanced(self, blocks: int = 1) -> "SamplingPlan":
        """The plan for the acquisition ``blocks`` back-to-back slots later."""
        return replace(self, t_start=self.t_start + blocks * self.duration)


@dataclass(frozen=True)
class StatEstimate:
    s2: float
    k: float
    plan: SamplingPlan | None = None


@dataclass(frozen=True)
class EstimatorQuality:
    mean: float
    std: float
    snr_db: float
    repeats: int

    @property
    def degenerate(self) -> bool:
        return self.std == 0.0


class StreamingMoments:
    """Running ``sum m^2`` and ``sum m^4`` fed one chunk at a time.

    The sums continue sample by sample across chunk boundaries, so the
    result does not depend on how the stream was chunked.
    """

    def __init__(self):
        self.n = 0
        self.sum2 = 0.0
        self.sum4 = 0.0

    def update(self, samples) -> None:
        samples = np.asarray(samples, dtype=np.float64).ravel()
        self.sum2, self.sum4 = _kernels.power_sums(samples, self.sum2, self.sum4)
        self.n += samples.size

    def result(self, plan: SamplingPlan | None = None) -> StatEstimate:
        if self.n < 1:
            raise DegenerateSignal("no samples accumulated")
        s2 = self.sum2 / self.n
        if s2 == 0.0:
            raise DegenerateSignal("zero variance: kurtosis undefined")
        k = (self.sum4 / self.n) / (s2 * s2) - 3.0
        return StatEstimate(s2, k, plan)


def acquire(probe: MixedSignalProbe, plan: SamplingPlan) -> np.ndarray:
    """Sample ``m(t)`` according to ``plan``."""
    return eval_mixed(probe, plan.times(), plan.index0)


def estimate(samples, plan: SamplingPlan | None = None) -> StatEstimate:
    """Zero-mean variance and excess-kurtosis estimates from one block."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 4:
        raise InvalidParameter("need at least 4 samples")
    acc = StreamingMoments()
    acc.update(samples)
    return acc.result(plan)


def sample_mean(samples) -> float:
    """Diagnostic only; the estimators assume a zero-mean signal and never subtract it."""
    return float(np.mean(samples))


def quality(values) -> EstimatorQuality:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise InvalidParameter("need at least two repeats")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    if std == 0.0:
        snr = math.inf
    elif mean == 0.0:
        snr = -math.inf
    else:
        snr = 20.0 * math.log10(abs(mean) / std)
    return EstimatorQuality(mean, std, snr, int(values.size))


def repeated_estimates(probe: MixedSignalProbe, plan: SamplingPlan, repeats: int) -> list[StatEstimate]:
    out = []
    for r in range(repeats):
        p = plan.advanced(r)
        out.append(estimate(acquire(probe, p), p))
    return out


def estimator_quality(probe: MixedSignalProbe, plan: SamplingPlan, repeats: int = 32):
    """Mean, spread and SNR of S^2 and K over back-to-back acquisitions."""
    if repeats < 2:
        raise InvalidParameter("repeats must be >= 2")
    ests = repeated_estimates(probe, plan, repeats)
    return quality([e.s2 for e in ests]), quality([e.k for e in ests])


def varvar_iid_predict(s2: float, k: float, n_s: int) -> float:
    """Variance of S^2 expected if the ``n_s`` samples were IID.

    ``k`` is excess kurtosis; the bracket uses the non-excess value ``k + 3``.
    """
    if n_s < 2:
        raise InvalidParameter("n_s must be >= 2")
    return s2 * s2 / n_s * ((k + 3.0) - 1.0 + 2.0 / (n_s - 1))


def acquisition_latency(plan: SamplingPlan) -> float:
    return plan.n_s / plan.f_s
