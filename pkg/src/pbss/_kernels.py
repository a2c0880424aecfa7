"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``PBSS_DISABLE_NUMBA=1`` (or have numba missing) to force the numpy
implementations. Both paths share the same arithmetic order so that results
agree to rounding of the transcendental functions; the power sums are
accumulated strictly left to right in both.
"""

from __future__ import annotations

import math
import os

import numpy as np

_TWO_PI = 2.0 * math.pi
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _numba_requested() -> bool:
    flag = os.environ.get("PBSS_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by PBSS_DISABLE_NUMBA")
    import numba as nb
except ImportError:
    nb = None

USING_NUMBA = nb is not None


# ---------------------------------------------------------------------------
# numpy reference implementations


def _splitmix64_np(x):
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def noise_key(seed: int) -> int:
    """Scramble a user seed into the 64-bit key used by :func:`gaussian_noise`."""
    return int(_splitmix64_np(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0])


def _gaussian_noise_np(key, index0, n):
    idx = np.arange(n, dtype=np.uint64) + np.uint64(index0)
    with np.errstate(over="ignore"):
        base = np.uint64(key) + np.uint64(2) * idx
        h1 = _splitmix64_np(base)
        h2 = _splitmix64_np(base + np.uint64(1))
    u1 = (h1 >> np.uint64(11)).astype(np.float64) * _INV53 + 0.5 * _INV53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def _source_values_np(times, amp, baud, carrier, phase, bits):
    sym = np.floor(times * baud).astype(np.int64) % bits.shape[0]
    cyc = times * carrier
    frac = cyc - np.floor(cyc)
    return amp * bits[sym] * np.cos(_TWO_PI * frac + phase)


def _mixed_samples_np(times, coeffs, amps, bauds, carriers, phases,
                      bits_flat, bit_offsets, bit_lengths,
                      noise_std, key, index0):
    out = np.zeros(times.shape[0])
    for k in range(coeffs.shape[0]):
        if coeffs[k] == 0.0:
            continue
        bits = bits_flat[bit_offsets[k]:bit_offsets[k] + bit_lengths[k]]
        out += coeffs[k] * _source_values_np(times, amps[k], bauds[k], carriers[k], phases[k], bits)
    if noise_std > 0.0:
        out += noise_std * _gaussian_noise_np(key, index0, times.shape[0])
    return out


def _power_sums_np(x, s2, s4):
    if x.size == 0:
        return float(s2), float(s4)
    sq = x * x
    # add.accumulate is strictly sequential, unlike np.sum's pairwise reduction
    s2 = np.add.accumulate(np.concatenate(([s2], sq)))[-1]
    s4 = np.add.accumulate(np.concatenate(([s4], sq * sq)))[-1]
    return float(s2), float(s4)


# ---------------------------------------------------------------------------
# numba implementations

if USING_NUMBA:

    @nb.njit(cache=True, nogil=True)
    def _splitmix64_nb(x):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @nb.njit(cache=True, nogil=True)
    def _gaussian_noise_nb(key, index0, n):
        out = np.empty(n)
        k = np.uint64(key)
        i0 = np.uint64(index0)
        for j in range(n):
            base = k + np.uint64(2) * (i0 + np.uint64(j))
            h1 = _splitmix64_nb(base)
            h2 = _splitmix64_nb(base + np.uint64(1))
            u1 = np.float64(h1 >> np.uint64(11)) * _INV53 + 0.5 * _INV53
            u2 = np.float64(h2 >> np.uint64(11)) * _INV53
            out[j] = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
        return out

    @nb.njit(cache=True, nogil=True)
    def _source_values_nb(times, amp, baud, carrier, phase, bits):
        n = times.shape[0]
        nbits = bits.shape[0]
        out = np.empty(n)
        for j in range(n):
            t = times[j]
            sym = np.int64(math.floor(t * baud)) % nbits
            cyc = t * carrier
            frac = cyc - math.floor(cyc)
            out[j] = amp * bits[sym] * math.cos(_TWO_PI * frac + phase)
        return out

    @nb.njit(cache=True, nogil=True)
    def _mixed_samples_nb(times, coeffs, amps, bauds, carriers, phases,
                          bits_flat, bit_offsets, bit_lengths,
                          noise_std, key, index0):
        n = times.shape[0]
        out = np.zeros(n)
        for k in range(coeffs.shape[0]):
            c = coeffs[k]
            if c == 0.0:
                continue
            off = bit_offsets[k]
            nbits = bit_lengths[k]
            amp = amps[k]
            baud = bauds[k]
            carrier = carriers[k]
            phase = phases[k]
            for j in range(n):
                t = times[j]
                sym = np.int64(math.floor(t * baud)) % nbits
                cyc = t * carrier
                frac = cyc - math.floor(cyc)
                out[j] += c * (amp * bits_flat[off + sym] * math.cos(_TWO_PI * frac + phase))
        if noise_std > 0.0:
            noise = _gaussian_noise_nb(key, index0, n)
            for j in range(n):
                out[j] += noise_std * noise[j]
        return out

    @nb.njit(cache=True, nogil=True)
    def _power_sums_nb(x, s2, s4):
        for j in range(x.shape[0]):
            sq = x[j] * x[j]
            s2 += sq
            s4 += sq * sq
        return s2, s4


# ---------------------------------------------------------------------------
# public dispatch


def gaussian_noise(key: int, index0: int, n: int) -> np.ndarray:
    """Standard normal samples addressed by ``(key, index0 + j)``.

    Each sample is a pure function of its absolute index, so any window of
    the stream can be regenerated without producing the samples before it.
    """
    if USING_NUMBA:
        return _gaussian_noise_nb(np.uint64(key), np.uint64(index0), n)
    return _gaussian_noise_np(key, index0, n)


def source_values(times, amp, baud, carrier, phase, bits) -> np.ndarray:
    times = np.ascontiguousarray(times, dtype=np.float64)
    bits = np.ascontiguousarray(bits, dtype=np.float64)
    if USING_NUMBA:
        return _source_values_nb(times, float(amp), float(baud), float(carrier), float(phase), bits)
    return _source_values_np(times, amp, baud, carrier, phase, bits)


def mixed_samples(times, coeffs, amps, bauds, carriers, phases,
                  bits_flat, bit_offsets, bit_lengths,
                  noise_std, key, index0) -> np.ndarray:
    """Evaluate ``sum_k coeffs[k] * s_k(t) + noise_std * n(index)`` at ``times``."""
    times = np.ascontiguousarray(times, dtype=np.float64)
    args = (
        times,
        np.ascontiguousarray(coeffs, dtype=np.float64),
        np.ascontiguousarray(amps, dtype=np.float64),
        np.ascontiguousarray(bauds, dtype=np.float64),
        np.ascontiguousarray(carriers, dtype=np.float64),
        np.ascontiguousarray(phases, dtype=np.float64),
        np.ascontiguousarray(bits_flat, dtype=np.float64),
        np.ascontiguousarray(bit_offsets, dtype=np.int64),
        np.ascontiguousarray(bit_lengths, dtype=np.int64),
        float(noise_std),
    )
    if USING_NUMBA:
        return _mixed_samples_nb(*args, np.uint64(key), np.uint64(index0))
    return _mixed_samples_np(*args, key, index0)


def power_sums(x, s2: float = 0.0, s4: float = 0.0) -> tuple[float, float]:
    """Sequential ``(s2 + sum x**2, s4 + sum x**4)`` in a single pass."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USING_NUMBA:
        s2, s4 = _power_sums_nb(x, float(s2), float(s4))
        return float(s2), float(s4)
    return _power_sums_np(x, s2, s4)
