"""Coherent BPSK demodulation against known ground truth, and the PBSS success test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal_model import MixingScenario, SourceSignal
from .weightbank import MixedSignalProbe, WeightBank, eval_mixed

# noise for demodulation captures is drawn from a stream region disjoint from acquisitions
DEMOD_INDEX_BASE = 1 << 60


@dataclass(frozen=True)
class DemodReport:
    source_index: int
    bit_errors: int
    alignment_offset: int
    polarity: int
    phase_used: float

    @property
    def success(self) -> bool:
        return self.bit_errors == 0


def _symbol_times(src: SourceSignal, t0: float, samples_per_cycle: int):
    per_symbol = math.ceil(samples_per_cycle * src.carrier_freq / src.baud_rate)
    k = np.arange(src.n_bits)[:, None]
    j = (np.arange(per_symbol)[None, :] + 0.5) / per_symbol
    return t0 + (k + j) / src.baud_rate


def demodulate(probe: MixedSignalProbe, source: SourceSignal, source_index: int = 0,
               t0: float = 0.0, samples_per_cycle: int = 16, n_phases: int = 16) -> DemodReport:
    """Best-case bit errors of ``probe``'s output against ``source``'s bit sequence.

    The output is captured over one full sequence period starting at ``t0``
    (assumed to fall on a symbol boundary), mixed down with the source carrier
    at ``n_phases`` trial phases and integrated per symbol. Errors are
    minimized over phase, circular alignment and polarity.
    """
    times = _symbol_times(source, t0, samples_per_cycle)
    m = eval_mixed(probe, times.ravel(), DEMOD_INDEX_BASE).reshape(times.shape)
    cyc = times * source.carrier_freq
    arg = 2.0 * np.pi * (cyc - np.floor(cyc)) + source.carrier_phase
    i_sym = np.sum(m * np.cos(arg), axis=1)
    q_sym = np.sum(m * np.sin(arg), axis=1)

    bits_f = np.fft.rfft(source.bits)
    L = source.n_bits
    best = None
    for p in range(n_phases):
        phi = 2.0 * np.pi * p / n_phases
        decision = np.where(i_sym * math.cos(phi) - q_sym * math.sin(phi) >= 0.0, 1.0, -1.0)
        # corr[o] = sum_k decision[k] * bits[(k + o) mod L]
        corr = np.rint(np.fft.irfft(np.conj(np.fft.rfft(decision)) * bits_f, n=L)).astype(int)
        o_pos, o_neg = int(np.argmax(corr)), int(np.argmin(corr))
        for errors, offset, pol in (((L - corr[o_pos]) // 2, o_pos, 1),
                                    ((L + corr[o_neg]) // 2, o_neg, -1)):
            if best is None or errors < best[0]:
                best = (int(errors), offset, pol, phi)
    errors, offset, pol, phi = best
    return DemodReport(source_index, errors, offset, pol, phi)


def demod_matrix(result_currents, scenario: MixingScenario, bank: WeightBank, **kw):
    """Reports indexed ``[ic][source]`` for each final current vector."""
    reports = []
    for x in result_currents:
        probe = MixedSignalProbe(scenario, bank, np.asarray(x, dtype=float))
        reports.append([demodulate(probe, src, j, **kw) for j, src in enumerate(scenario.sources)])
    return reports


def assign_sources(errors) -> dict:
    """Greedy IC-to-source matching by fewest bit errors; each IC claims one source."""
    errors = np.asarray(errors)
    n_ic, n_src = errors.shape
    pairs = sorted((int(errors[i, j]), i, j) for i in range(n_ic) for j in range(n_src))
    used_ic, assignment = set(), {}
    for e, i, j in pairs:
        if i in used_ic or j in assignment:
            continue
        assignment[j] = (i, e)
        used_ic.add(i)
    return assignment


def pbss_success(result, scenario: MixingScenario, bank: WeightBank, **kw) -> bool:
    """True iff every source is recovered error-free by a distinct final IC."""
    finals = result.ics_final if hasattr(result, "ics_final") else result
    if len(finals) < scenario.n_sources:
        return False
    reports = demod_matrix(finals, scenario, bank, **kw)
    errors = [[r.bit_errors for r in row] for row in reports]
    assignment = assign_sources(errors)
    return len(assignment) == scenario.n_sources and all(e == 0 for _, e in assignment.values())
