"""Micro-ring weight bank: heater current to balanced-photodetector weight.

Each ring maps a heater current ``i`` (mA) to a detuning ``a + b i**2``; the
Lorentzian drop transmission ``T`` then sets the balanced photocurrent weight
``R (1 - 2T)``. The bank sums weighted received signals into ``m(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .signal_model import InvalidParameter, MixingScenario


class CurrentOutOfRange(ValueError):
    pass


class NoZeroCrossing(ValueError):
    pass


class WeightModel(str, Enum):
    IDEAL = "ideal"
    LORENTZIAN = "lorentzian"


@dataclass(frozen=True)
class RingParams:
    """Per-ring constants. ``b`` is in mA^-2, currents in mA."""

    a: float = 0.5
    b: float = 0.125
    R: float = 1.0
    i_min: float = 0.0
    i_max: float = 5.0

    def __post_init__(self):
        if not (self.b > 0 and self.R > 0):
            raise InvalidParameter("ring requires b > 0 and R > 0")
        if not (self.i_min >= 0 and self.i_max > self.i_min):
            raise InvalidParameter("ring requires 0 <= i_min < i_max")
        if not self.a < 1:
            raise InvalidParameter("ring requires a < 1 for a real zero-weight current")
        if not self.i_min <= math.sqrt((1 - self.a) / self.b) <= self.i_max:
            raise InvalidParameter("zero-weight current lies outside the allowed range")

    def check_current(self, i) -> None:
        i = np.asarray(i)
        if np.any(i < self.i_min) or np.any(i > self.i_max) or not np.all(np.isfinite(i)):
            raise CurrentOutOfRange(f"current {i} outside [{self.i_min}, {self.i_max}] mA")


def lorentzian_T(delta):
    """Normalized Lorentzian transmission ``1 / (1 + delta**2)``."""
    return 1.0 / (1.0 + np.square(delta))


def detuning(ring: RingParams, i):
    ring.check_current(i)
    return ring.a + ring.b * np.square(i)


def photocurrent_weight(ring: RingParams, i):
    """Balanced photocurrent weight ``R (1 - 2 T(a + b i^2))`` in ``[-R, R]``."""
    return ring.R * (1.0 - 2.0 * lorentzian_T(detuning(ring, i)))


def zero_weight_current(ring: RingParams) -> float:
    if ring.a >= 1:
        raise NoZeroCrossing(f"a={ring.a} >= 1 leaves no zero-weight current")
    return math.sqrt((1.0 - ring.a) / ring.b)


def linearity_defect(ring: RingParams) -> float:
    """Analytic second derivative of the weight curve at the zero-weight current."""
    return 2.0 * ring.R * (2.0 * ring.a - 1.0) * ring.b


def weight_slope_at_zero(ring: RingParams) -> float:
    """Analytic ``dI/di`` at ``i0``: ``4 R b i0 T^2 * 2 delta``."""
    i0 = zero_weight_current(ring)
    delta = ring.a + ring.b * i0 * i0
    return 4.0 * ring.R * ring.b * i0 * lorentzian_T(delta) ** 2 * 2.0 * delta


def resonance_fwhm(Q: float, omega00: float) -> float:
    """Full width at half maximum of ``T``; half maximum sits at ``delta = +/-1``."""
    if not Q > 0:
        raise InvalidParameter("Q must be positive")
    return 2.0 * omega00 / Q


def optimal_frequency_offset(Q: float, omega00: float) -> float:
    """Laser offset from the cold resonance that zeroes the linearity defect.

    Equal to ``omega00 / (2 Q)``, a quarter of :func:`resonance_fwhm`.
    """
    if not Q > 0:
        raise InvalidParameter("Q must be positive")
    return omega00 / (2.0 * Q)


def detuning_offset(Q: float, omega00: float, omega: float) -> float:
    """``a = Q / omega00 * (omega - omega00)``."""
    return Q / omega00 * (omega - omega00)


@dataclass(frozen=True)
class WeightBank:
    rings: tuple
    weight_model: WeightModel = WeightModel.LORENTZIAN
    noise_std: float = 0.03
    noise_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rings", tuple(self.rings))
        object.__setattr__(self, "weight_model", WeightModel(self.weight_model))
        if not self.rings:
            raise InvalidParameter("weight bank needs at least one ring")
        if self.noise_std < 0:
            raise InvalidParameter("noise_std must be >= 0")

    @property
    def i0(self) -> np.ndarray:
        return np.array([zero_weight_current(r) for r in self.rings])

    @property
    def lower(self) -> np.ndarray:
        return np.array([r.i_min for r in self.rings])

    @property
    def upper(self) -> np.ndarray:
        return np.array([r.i_max for r in self.rings])

    def check_currents(self, currents) -> np.ndarray:
        currents = np.asarray(currents, dtype=np.float64)
        if currents.shape != (len(self.rings),):
            raise InvalidParameter(f"expected {len(self.rings)} currents, got shape {currents.shape}")
        for ring, i in zip(self.rings, currents):
            ring.check_current(i)
        return currents

    def weights(self, currents) -> np.ndarray:
        currents = self.check_currents(currents)
        if self.weight_model is WeightModel.IDEAL:
            return currents - self.i0
        return np.array([photocurrent_weight(r, i) for r, i in zip(self.rings, currents)])

    def with_noise(self, noise_std: float | None = None, noise_seed: int | None = None) -> "WeightBank":
        return WeightBank(self.rings, self.weight_model,
                          self.noise_std if noise_std is None else noise_std,
                          self.noise_seed if noise_seed is None else noise_seed)


def default_bank(n_rings: int = 2, model: WeightModel | str = WeightModel.LORENTZIAN,
                 noise_std: float = 0.03, noise_seed: int = 0) -> WeightBank:
    return WeightBank(tuple(RingParams() for _ in range(n_rings)), WeightModel(model),
                      noise_std, noise_seed)


def jacobian_at_zero(bank: WeightBank) -> np.ndarray:
    """Diagonal ``Df`` at ``i0``; the identity for the ideal model."""
    if bank.weight_model is WeightModel.IDEAL:
        return np.eye(len(bank.rings))
    return np.diag([weight_slope_at_zero(r) for r in bank.rings])


@dataclass(frozen=True)
class MixedSignalProbe:
    """Balanced-detector output for one fixed current setting."""

    scenario: MixingScenario
    bank: WeightBank
    currents: np.ndarray

    def __post_init__(self):
        if len(self.bank.rings) != self.scenario.n_received:
            raise InvalidParameter("ring count must equal the number of received signals")
        currents = self.bank.check_currents(self.currents).copy()
        currents.setflags(write=False)
        object.__setattr__(self, "currents", currents)

    @property
    def weights(self) -> np.ndarray:
        return self.bank.weights(self.currents)

    @property
    def source_coeffs(self) -> np.ndarray:
        """Per-source gains ``M^T w`` seen at the detector."""
        return self.scenario.mixing.T @ self.weights


def eval_mixed(probe: MixedSignalProbe, t, sample_index: int = 0):
    """``m(t) = w . r(t) + noise``; noise sample ``j`` is addressed by ``sample_index + j``."""
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = probe.scenario.combine(probe.source_coeffs, times, probe.bank.noise_std,
                                 probe.bank.noise_seed, sample_index)
    return float(out[0]) if scalar else out


def bank_from_dict(doc: dict, n_rings: int) -> WeightBank:
    """Parse ``{rings: [{a, b_per_mA2, R, i_min_mA, i_max_mA}], weight_model, noise_std, noise_seed}``."""
    rings_doc = doc.get("rings")
    if rings_doc is None:
        rings = tuple(RingParams() for _ in range(n_rings))
    else:
        rings = tuple(
            RingParams(float(r.get("a", 0.5)), float(r.get("b_per_mA2", 0.125)),
                       float(r.get("R", 1.0)), float(r.get("i_min_mA", 0.0)),
                       float(r.get("i_max_mA", 5.0)))
            for r in rings_doc
        )
    try:
        model = WeightModel(str(doc.get("weight_model", "lorentzian")).lower())
    except ValueError as exc:
        raise InvalidParameter(str(exc)) from exc
    return WeightBank(rings, model, float(doc.get("noise_std", 0.03)), int(doc.get("noise_seed", 0)))


def transfer_curve(ring: RingParams, n_points: int = 101):
    """Currents and weights across the ring's full range."""
    i = np.linspace(ring.i_min, ring.i_max, n_points)
    return i, photocurrent_weight(ring, i)


def effective_mixing(bank: WeightBank, mixing: Sequence[Sequence[float]]) -> np.ndarray:
    """``M' = Df(i0)^T M``, the mixing seen by current offsets in the linear region."""
    return jacobian_at_zero(bank).T @ np.asarray(mixing, dtype=float)
