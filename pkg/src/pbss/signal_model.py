"""BPSK source signals and their linear mixtures, evaluated in closed form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels

UNIT_VARIANCE_AMPLITUDE = math.sqrt(2.0)

DEFAULT_BAUD = 200e6
DEFAULT_N_BITS = 1137
DEFAULT_CARRIER = 1e9
DEFAULT_CARRIER_OFFSET = 176e3

M1 = ((0.6, 0.4), (0.4, 0.6))
M2 = ((1.0, 0.5), (1.0, 0.2))


class InvalidParameter(ValueError):
    pass


@dataclass(frozen=True)
class SourceSignal:
    """A repeating NRZ BPSK waveform ``amp * bit(t) * cos(2 pi f t + phase)``."""

    bits: np.ndarray
    baud_rate: float
    carrier_freq: float
    carrier_phase: float = 0.0
    amplitude: float = UNIT_VARIANCE_AMPLITUDE

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.float64)
        if bits.ndim != 1 or bits.size < 1:
            raise InvalidParameter("bits must be a non-empty 1-D sequence")
        if not np.all(np.abs(bits) == 1.0):
            raise InvalidParameter("bits must be +1/-1")
        if not self.baud_rate > 0 or not self.carrier_freq > 0:
            raise InvalidParameter("baud_rate and carrier_freq must be positive")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def n_bits(self) -> int:
        return int(self.bits.size)

    @property
    def period(self) -> float:
        """Repetition period of the bit sequence in seconds."""
        return self.n_bits / self.baud_rate

    @property
    def variance(self) -> float:
        return 0.5 * self.amplitude**2


def make_bpsk_source(seed: int, n_bits: int = DEFAULT_N_BITS, baud: float = DEFAULT_BAUD,
                     carrier: float = DEFAULT_CARRIER, phase: float = 0.0) -> SourceSignal:
    """Build a unit-variance BPSK source from a seeded random bit sequence.

    A single-bit sequence degenerates to a plain carrier (the bit is forced to
    +1 so the waveform is ``sqrt(2) cos``).
    """
    if n_bits < 1:
        raise InvalidParameter("n_bits must be >= 1")
    if not baud > 0 or not carrier > 0:
        raise InvalidParameter("baud and carrier must be positive")
    if n_bits == 1:
        bits = np.ones(1)
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        bits = 2.0 * rng.integers(0, 2, size=n_bits) - 1.0
    return SourceSignal(bits, float(baud), float(carrier), float(phase), UNIT_VARIANCE_AMPLITUDE)


def eval_source(s: SourceSignal, t):
    """Evaluate a source at scalar or array times (seconds)."""
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = _kernels.source_values(times, s.amplitude, s.baud_rate, s.carrier_freq,
                                 s.carrier_phase, s.bits)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class MixingScenario:
    """Independent sources and the real mixing matrix ``M`` (l x n)."""

    sources: tuple
    mixing: np.ndarray
    label: str = ""
    _packed: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sources = tuple(self.sources)
        mixing = np.array(self.mixing, dtype=np.float64)
        if not sources:
            raise InvalidParameter("at least one source required")
        if mixing.ndim != 2 or mixing.shape[1] != len(sources):
            raise InvalidParameter(
                f"mixing must be l x n with n={len(sources)}, got shape {mixing.shape}")
        if mixing.shape[0] < mixing.shape[1]:
            raise InvalidParameter("need at least as many received signals as sources (l >= n)")
        if mixing.shape[0] == mixing.shape[1] and abs(np.linalg.det(mixing)) <= 1e-12:
            raise InvalidParameter("mixing matrix is singular")
        mixing.setflags(write=False)
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "mixing", mixing)
        lengths = np.array([s.n_bits for s in sources], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
        packed = (
            np.array([s.amplitude for s in sources]),
            np.array([s.baud_rate for s in sources]),
            np.array([s.carrier_freq for s in sources]),
            np.array([s.carrier_phase for s in sources]),
            np.concatenate([s.bits for s in sources]),
            offsets,
            lengths,
        )
        object.__setattr__(self, "_packed", packed)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_received(self) -> int:
        return self.mixing.shape[0]

    def combine(self, coeffs, times, noise_std: float = 0.0, noise_seed: int = 0,
                index0: int = 0) -> np.ndarray:
        """Evaluate ``sum_k coeffs[k] s_k(t)`` plus index-addressed Gaussian noise."""
        amps, bauds, carriers, phases, bits, offsets, lengths = self._packed
        key = _kernels.noise_key(noise_seed)
        return _kernels.mixed_samples(times, coeffs, amps, bauds, carriers, phases,
                                      bits, offsets, lengths, noise_std, key, index0)


def eval_received(sc: MixingScenario, t) -> np.ndarray:
    """``r(t) = M s(t)``; returns shape (l,) for scalar t, else (l, len(t))."""
    s = np.array([np.atleast_1d(eval_source(src, t)) for src in sc.sources])
    r = sc.mixing @ s
    return r[:, 0] if np.ndim(t) == 0 else r


def default_scenario(mixing: Sequence[Sequence[float]] = M1, seeds=(1, 2),
                     phases=(0.0, 0.0), label: str = "") -> MixingScenario:
    """Two 200 MBaud, 1137-bit sources at 1 GHz +/- 176 kHz."""
    carriers = (DEFAULT_CARRIER + DEFAULT_CARRIER_OFFSET, DEFAULT_CARRIER - DEFAULT_CARRIER_OFFSET)
    sources = [make_bpsk_source(seed, DEFAULT_N_BITS, DEFAULT_BAUD, f, ph)
               for seed, f, ph in zip(seeds, carriers, phases)]
    return MixingScenario(tuple(sources), np.asarray(mixing, dtype=float), label)


def scenario_from_dict(doc: dict) -> MixingScenario:
    """Parse ``{sources: [{seed, n_bits, baud_hz, carrier_hz, phase_rad}], mixing: [[...]]}``."""
    try:
        srcs = [
            make_bpsk_source(int(s["seed"]), int(s.get("n_bits", DEFAULT_N_BITS)),
                             float(s.get("baud_hz", DEFAULT_BAUD)), float(s["carrier_hz"]),
                             float(s.get("phase_rad", 0.0)))
            for s in doc["sources"]
        ]
        mixing = np.asarray(doc["mixing"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"bad scenario document: {exc!r}") from exc
    return MixingScenario(tuple(srcs), mixing, str(doc.get("label", "")))


def scenario_to_dict(sc: MixingScenario, seeds: Sequence[int]) -> dict:
    return {
        "sources": [
            {"seed": int(seed), "n_bits": s.n_bits, "baud_hz": s.baud_rate,
             "carrier_hz": s.carrier_freq, "phase_rad": s.carrier_phase}
            for seed, s in zip(seeds, sc.sources)
        ],
        "mixing": sc.mixing.tolist(),
    }
