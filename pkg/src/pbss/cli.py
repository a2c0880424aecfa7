"""Command line entry point: ``pbss <subcommand> [--config PATH] [--seed N] [--out PATH] [--format F]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __doc__ as _pkg_doc
from .config import ConfigError, RunConfig, load_config
from .demod import pbss_success
from .engine import (Overheads, PbssError, latency_model, nominal_cycle_count, run_pbss,
                     variance_gradient_oracle, variance_hessian_oracle, with_plan)
from .experiments import (FULL_FS, FULL_NS, stats_csv, success_csv,
                          sweep_estimator_quality, sweep_success_vs_snr)
from .signal_model import M1, M2
from .stats import SNR_CONVENTION, acquisition_latency, estimate
from .weightbank import (RingParams, linearity_defect, photocurrent_weight, transfer_curve,
                         zero_weight_current)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _rows_to_json(header, rows) -> str:
    return _json([dict(zip(header, r)) for r in rows])


# ---------------------------------------------------------------------------
# subcommands; each returns (exit_code, text)


def cmd_transfer_curve(cfg: RunConfig, args) -> tuple[int, str]:
    header = ("ring", "current_mA", "weight")
    rows = []
    for k, ring in enumerate(cfg.bank.rings):
        i, w = transfer_curve(ring, args.points)
        rows.extend((k, float(x), float(y)) for x, y in zip(i, w))
    if args.format == "json":
        return 0, _rows_to_json(header, rows)
    return 0, _csv(header, rows)


def _sweep_cfg(cfg: RunConfig, args):
    sweep = cfg.sweep
    if args.full:
        sweep = replace(sweep, f_s=FULL_FS, n_s=FULL_NS)
    if args.trials is not None:
        sweep = replace(sweep, trials=args.trials)
    if args.repeats is not None:
        sweep = replace(sweep, repeats=args.repeats)
    return sweep


def cmd_stats_sweep(cfg: RunConfig, args) -> tuple[int, str]:
    rows = sweep_estimator_quality(_sweep_cfg(cfg, args), cfg.bank, cfg.scenario.mixing)
    if args.format == "json":
        return 0, _json({"snr_convention": SNR_CONVENTION,
                         "rows": [dict(zip(("f_s_hz", "n_s", "stat", "mean", "std", "snr_db", "repeats"),
                                           r.as_tuple())) for r in rows]})
    return 0, stats_csv(rows)


def cmd_success_sweep(cfg: RunConfig, args) -> tuple[int, str]:
    records = sweep_success_vs_snr(_sweep_cfg(cfg, args), cfg.bank, cfg.pbss)
    if args.format == "json":
        return 0, _json({"snr_convention": SNR_CONVENTION, "records": [
            {"mixing": r.mixing, "f_s_hz": r.f_s, "n_s": r.n_s, "s2_snr_db": r.s2_snr_db,
             "k_snr_db": r.k_snr_db, "success_count": r.success_count, "trials": r.trials}
            for r in records]})
    return 0, success_csv(records)


def cmd_pbss_run(cfg: RunConfig, args) -> tuple[int, str]:
    bank = cfg.bank
    try:
        result = run_pbss(cfg.scenario, bank, cfg.pbss)
        ok, error = pbss_success(result, cfg.scenario, bank), None
    except PbssError as exc:
        result, ok, error = exc.partial, False, str(exc)
    doc = result.to_json()
    doc["success"] = ok
    doc["error"] = error
    if args.format == "csv":
        return 0, _csv(("cycle_count", "success"), [(result.cycle_count, ok)])
    return 0, _json(doc)


def cmd_latency(cfg: RunConfig, args) -> tuple[int, str]:
    over = Overheads(args.t_c, args.t_s, args.t_p)
    header = ("n_sources", "f_s_hz", "n_s", "t_a_s", "cycles", "total_s")
    rows = []
    for n_s in sorted(set(cfg.sweep.n_s) | {cfg.pbss.plan.n_s}):
        pc = with_plan(cfg.pbss, n_s=n_s)
        rows.append((pc.n_sources, pc.plan.f_s, n_s, acquisition_latency(pc.plan),
                     nominal_cycle_count(pc), latency_model(pc, over)))
    if args.format == "json":
        return 0, _rows_to_json(header, rows)
    return 0, _csv(header, rows)


def validation_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Analytic oracle checks; each entry is ``(name, passed, detail)``."""
    rng = np.random.default_rng(seed)
    checks = []

    worst_g = worst_det = 0.0
    min_det = math.inf
    for M in (np.asarray(M1), np.asarray(M2), rng.normal(size=(2, 2)) + 2 * np.eye(2)):
        w = rng.normal(size=2)
        h = 1e-6

        def var(v):
            return float(np.sum((M.T @ v) ** 2))

        fd = np.array([(var(w + h * e) - var(w - h * e)) / (2 * h) for e in np.eye(2)])
        g = variance_gradient_oracle(M, w)
        worst_g = max(worst_g, float(np.max(np.abs(fd - g)) / max(np.max(np.abs(g)), 1e-12)))
        H = variance_hessian_oracle(M)
        min_det = min(min_det, float(np.linalg.det(H)))
        worst_det = max(worst_det, abs(np.linalg.det(H) - 4 * np.linalg.det(M) ** 2))
    checks.append(("variance gradient 2MM^T w", worst_g < 1e-6, f"max rel err {worst_g:.2e}"))
    checks.append(("variance Hessian positive definite", min_det > 0 and worst_det < 1e-9,
                   f"min det {min_det:.4g}"))

    ring = RingParams()
    i0 = zero_weight_current(ring)
    w0 = float(photocurrent_weight(ring, i0))
    checks.append(("zero-weight current", abs(w0) < 1e-12 and abs(i0 - 2.0) < 1e-12,
                   f"i0 {i0:.6f} mA, weight {w0:.1e}"))
    d = linearity_defect(ring)
    checks.append(("second derivative vanishes at a=1/2", abs(d) < 1e-12, f"I''(i0) {d:.1e}"))

    t = np.arange(4096) / 4096.0
    k_sin = estimate(np.cos(2 * np.pi * 8 * t)).k
    checks.append(("sinusoid kurtosis -1.5", abs(k_sin + 1.5) < 1e-3, f"K {k_sin:.6f}"))
    k_gauss = estimate(rng.standard_normal(2**16)).k
    checks.append(("Gaussian kurtosis 0", abs(k_gauss) < 0.1, f"K {k_gauss:.4f}"))
    bits = rng.choice([-1.0, 1.0], size=4096)
    k_bpsk = estimate(np.repeat(bits, 64) * np.tile(np.cos(2 * np.pi * (np.arange(64) + 0.5) / 64), 4096)).k
    checks.append(("BPSK kurtosis -1.5", abs(k_bpsk + 1.5) < 1e-3, f"K {k_bpsk:.6f}"))
    return checks


def cmd_validate(cfg: RunConfig, args) -> tuple[int, str]:
    checks = validation_checks(0 if args.seed is None else args.seed)
    ok = bool(all(p for _, p, _ in checks))
    if args.format == "csv":
        text = _csv(("check", "passed", "detail"), checks)
    else:
        text = _json({"passed": ok, "checks": [{"check": n, "passed": bool(p), "detail": d}
                                               for n, p, d in checks]})
    return (0 if ok else 1), text


_COMMANDS = {
    "transfer-curve": (cmd_transfer_curve, "weight-vs-current curve for each ring", "csv"),
    "stats-sweep": (cmd_stats_sweep, "estimator quality across f_s and n_s", "csv"),
    "success-sweep": (cmd_success_sweep, "PBSS success count per (f_s, n_s) cell", "csv"),
    "pbss-run": (cmd_pbss_run, "one PBSS run, result as JSON", "json"),
    "latency": (cmd_latency, "weight-determination latency table", "csv"),
    "validate": (cmd_validate, "run the analytic oracle checks", "json"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    common.add_argument("--seed", type=int, help="noise / sweep seed (u64)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="pbss", description=_pkg_doc)
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}
    for name, (_, help_text, _) in _COMMANDS.items():
        parsers[name] = sub.add_parser(name, parents=[common], help=help_text)
    parsers["transfer-curve"].add_argument("--points", type=int, default=101)
    for name in ("stats-sweep", "success-sweep"):
        p = parsers[name]
        p.add_argument("--full", action="store_true", help="full 12 x 9 grid instead of the desk grid")
        p.add_argument("--trials", type=int)
        p.add_argument("--repeats", type=int)
    for flag in ("--t-c", "--t-s", "--t-p"):
        parsers["latency"].add_argument(flag, type=float, default=0.0, help="per-cycle overhead, s")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fn, _, default_format = _COMMANDS[args.command]
    if args.format is None:
        args.format = default_format
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("pbss: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"pbss: {exc}", file=sys.stderr)
        return 2
    code, text = fn(cfg, args)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
