"""Sweeps over sampling rate and sample count: estimator quality and PBSS success."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .demod import pbss_success
from .engine import PbssConfig, PbssError, run_pbss, with_plan
from .signal_model import M1, M2, MixingScenario, default_scenario
from .stats import SamplingMode, SamplingPlan, estimator_quality, varvar_iid_predict
from .weightbank import MixedSignalProbe, WeightBank, default_bank

BASE_RATE = 960e3
FULL_FS = tuple(BASE_RATE * 2**k for k in range(12))
FULL_NS = tuple(2**k for k in range(8, 17))
DESK_FS = tuple(BASE_RATE * 2**k for k in (0, 3, 6, 9, 11))
DESK_NS = tuple(2**k for k in (8, 10, 12, 14, 16))

HIGH_VARIANCE_POINT = (0.0, 3.0)

STATS_CSV_COLUMNS = ("f_s_hz", "n_s", "stat", "mean", "std", "snr_db", "repeats")
SUCCESS_CSV_COLUMNS = ("mixing", "f_s_hz", "n_s", "s2_snr_db", "k_snr_db", "success_count", "trials")


def worker_count() -> int:
    """Worker threads from ``PBSS_THREADS`` (0 or unset = one per CPU)."""
    raw = os.environ.get("PBSS_THREADS", "0").strip() or "0"
    n = int(raw)
    return os.cpu_count() or 1 if n <= 0 else n


def ordered_map(fn, items: Sequence, workers: int | None = None) -> list:
    """``map`` that may run concurrently but always returns results in input order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ExperimentRecord:
    mixing: str
    f_s: float
    n_s: int
    s2_snr_db: float
    k_snr_db: float
    success_count: int
    trials: int
    failures: tuple = ()

    @property
    def success_rate(self) -> float:
        return self.success_count / self.trials if self.trials else 0.0


@dataclass(frozen=True)
class SweepConfig:
    f_s: tuple = DESK_FS
    n_s: tuple = DESK_NS
    trials: int = 32
    repeats: int = 32
    mixings: tuple = (("M1", M1), ("M2", M2))
    seed: int = 0
    high_variance_point: tuple = HIGH_VARIANCE_POINT
    fixed_n_s: int = 2048
    fixed_f_s: float = 7.68e6

    @classmethod
    def full(cls, **kw) -> "SweepConfig":
        return cls(f_s=FULL_FS, n_s=FULL_NS, **kw)


def trial_seeds(seed: int, trial: int) -> tuple[int, int]:
    """``(noise_seed, start_index)`` for one independently seeded trial."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))
    return int(rng.integers(0, 2**63)), int(rng.integers(0, 2**32))


def run_trial(scenario: MixingScenario, bank: WeightBank, cfg: PbssConfig, seed: int, trial: int):
    """One PBSS attempt with its own noise stream and start time; returns ``(success, result)``."""
    noise_seed, start = trial_seeds(seed, trial)
    bank = bank.with_noise(noise_seed=noise_seed)
    cfg = with_plan(cfg, t_start=start / cfg.plan.f_s)
    try:
        result = run_pbss(scenario, bank, cfg)
    except PbssError as exc:
        return False, exc.partial
    return pbss_success(result, scenario, bank), result


def success_count(scenario, bank, cfg, seed: int, trials: int, workers: int | None = None):
    outcomes = ordered_map(lambda t: run_trial(scenario, bank, cfg, seed, t)[0], list(range(trials)),
                           workers)
    return sum(outcomes), tuple(t for t, ok in enumerate(outcomes) if not ok)


def high_variance_probe(scenario, bank, point=HIGH_VARIANCE_POINT) -> MixedSignalProbe:
    return MixedSignalProbe(scenario, bank, np.asarray(point, dtype=float))


def sweep_success_vs_snr(config: SweepConfig = SweepConfig(), bank: WeightBank | None = None,
                         cfg: PbssConfig = PbssConfig(), workers: int | None = None) -> list[ExperimentRecord]:
    """Estimator SNR and PBSS success count for every (mixing, f_s, n_s) cell."""
    bank = default_bank() if bank is None else bank
    records = []
    for label, mixing in config.mixings:
        scenario = default_scenario(mixing, label=label)
        probe = high_variance_probe(scenario, bank, config.high_variance_point)
        for f_s in config.f_s:
            for n_s in config.n_s:
                plan = SamplingPlan(f_s, n_s)
                try:
                    q_s2, q_k = estimator_quality(probe, plan, config.repeats)
                    s2_snr, k_snr = q_s2.snr_db, q_k.snr_db
                except ValueError:
                    s2_snr = k_snr = math.nan
                cell_cfg = with_plan(cfg, f_s=f_s, n_s=n_s)
                ok, failed = success_count(scenario, bank, cell_cfg, config.seed, config.trials, workers)
                records.append(ExperimentRecord(label, f_s, n_s, s2_snr, k_snr, ok, config.trials, failed))
    return records


def alignment_cell(scenario: MixingScenario, f_s: float, n_s: int) -> bool:
    """True where periodic sampling is expected to alias badly.

    That is when the acquisition is shorter than the longest source
    repetition period, or when a carrier or symbol rate aliases to less than
    one cycle over the acquisition.
    """
    if n_s / f_s < max(s.period for s in scenario.sources):
        return True
    for s in scenario.sources:
        for rate in (s.carrier_freq, s.baud_rate):
            ratio = rate / f_s
            if abs(ratio - round(ratio)) * n_s < 1.0:
                return True
    return False


@dataclass(frozen=True)
class StatRow:
    f_s_hz: float
    n_s: int
    stat: str
    mean: float
    std: float
    snr_db: float
    repeats: int

    def as_tuple(self):
        return (self.f_s_hz, self.n_s, self.stat, self.mean, self.std, self.snr_db, self.repeats)


def _snr_db(mean, std):
    if std == 0:
        return math.inf
    return 20.0 * math.log10(abs(mean) / std)


def estimator_rows(probe: MixedSignalProbe, f_s: float, n_s: int, repeats: int, seed: int = 0) -> list[StatRow]:
    """Periodic S^2/K quality, random-sampling S^2 quality and the IID prediction for one cell."""
    q_s2, q_k = estimator_quality(probe, SamplingPlan(f_s, n_s), repeats)
    q_rand, _ = estimator_quality(probe, SamplingPlan(f_s, n_s, mode=SamplingMode.RANDOM, seed=seed),
                                  repeats)
    iid_std = math.sqrt(max(varvar_iid_predict(q_s2.mean, q_k.mean, n_s), 0.0))
    return [
        StatRow(f_s, n_s, "S2", q_s2.mean, q_s2.std, q_s2.snr_db, repeats),
        StatRow(f_s, n_s, "K", q_k.mean, q_k.std, q_k.snr_db, repeats),
        StatRow(f_s, n_s, "S2_random", q_rand.mean, q_rand.std, q_rand.snr_db, repeats),
        StatRow(f_s, n_s, "S2_iid", q_s2.mean, iid_std, _snr_db(q_s2.mean, iid_std), repeats),
    ]


def sweep_estimator_quality(config: SweepConfig = SweepConfig.full(), bank: WeightBank | None = None,
                            mixing=M1) -> list[StatRow]:
    """S^2/K consistency across f_s (fixed n_s) and across n_s (fixed f_s)."""
    bank = default_bank() if bank is None else bank
    scenario = default_scenario(mixing)
    probe = high_variance_probe(scenario, bank, config.high_variance_point)
    cells = [(f, config.fixed_n_s) for f in config.f_s]
    cells += [(config.fixed_f_s, n) for n in config.n_s if (config.fixed_f_s, n) not in cells]
    rows = []
    for f_s, n_s in cells:
        rows.extend(estimator_rows(probe, f_s, n_s, config.repeats, config.seed))
    return rows


def fit_snr_exponent(n_s: Iterable[int], snr_db: Iterable[float]) -> float:
    """Slope of log10(amplitude SNR) against log10(n_s); 0.5 means SNR ~ sqrt(n_s)."""
    x = np.log10(np.asarray(list(n_s), dtype=float))
    y = np.asarray(list(snr_db), dtype=float) / 20.0
    return float(np.polyfit(x, y, 1)[0])


def binned_success(records: Sequence[ExperimentRecord], bin_db: float = 3.0):
    """``[(bin_low_db, success_rate, n_cells)]`` with cells pooled per S^2-SNR bin."""
    finite = [r for r in records if math.isfinite(r.s2_snr_db)]
    bins: dict = {}
    for r in finite:
        b = math.floor(r.s2_snr_db / bin_db) * bin_db
        ok, n, cells = bins.get(b, (0, 0, 0))
        bins[b] = (ok + r.success_count, n + r.trials, cells + 1)
    return [(b, ok / n, cells) for b, (ok, n, cells) in sorted(bins.items())]


def count_inversions(rates: Sequence[float]) -> int:
    return sum(1 for a, b in zip(rates, rates[1:]) if b < a)


def snr_floor(records: Sequence[ExperimentRecord]) -> float | None:
    """Lowest S^2 SNR above which every cell succeeded in all trials; None if no such cell."""
    ordered = sorted((r for r in records if math.isfinite(r.s2_snr_db)), key=lambda r: r.s2_snr_db)
    floor = None
    for r in reversed(ordered):
        if r.success_count != r.trials:
            break
        floor = r.s2_snr_db
    return floor


def _fmt(x):
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def stats_csv(rows: Sequence[StatRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r.as_tuple()])
    return buf.getvalue()


def success_csv(records: Sequence[ExperimentRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUCCESS_CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(v) for v in (r.mixing, r.f_s, r.n_s, r.s2_snr_db, r.k_snr_db,
                                       r.success_count, r.trials)])
    return buf.getvalue()
