"""Time the numba and pure-numpy kernel paths against each other.

Each path runs in its own interpreter because the choice is made at import
time from ``PBSS_DISABLE_NUMBA``.

    python3 benchmarks/bench_kernels.py [--sizes 1024 16384 65536] [--repeats 20] [--pbss]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _worker(sizes, repeats, pbss):
    import numpy as np

    from pbss import _kernels
    from pbss.signal_model import default_scenario
    from pbss.stats import SamplingPlan, acquire
    from pbss.weightbank import MixedSignalProbe, default_bank

    scenario, bank = default_scenario(), default_bank()
    probe = MixedSignalProbe(scenario, bank, np.array([0.0, 3.0]))
    out = {"numba": _kernels.USING_NUMBA, "rows": []}
    for n in sizes:
        plan = SamplingPlan(122.88e6, n)
        x = acquire(probe, plan)
        timings = {}
        for name, fn in (("acquire", lambda: acquire(probe, plan)),
                         ("power_sums", lambda: _kernels.power_sums(x)),
                         ("noise", lambda: _kernels.gaussian_noise(1, 0, n))):
            fn()  # compile / cache load outside the timed region
            t0 = time.perf_counter()
            for _ in range(repeats):
                fn()
            timings[name] = (time.perf_counter() - t0) / repeats
        out["rows"].append({"n": n, **timings})
    if pbss:
        from pbss.engine import run_pbss

        run_pbss(scenario, bank)
        t0 = time.perf_counter()
        run_pbss(scenario, bank)
        out["pbss_run"] = time.perf_counter() - t0
    print(json.dumps(out))


def _run(disable, args):
    env = dict(os.environ, PBSS_DISABLE_NUMBA="1" if disable else "0")
    cmd = [sys.executable, __file__, "--worker", "--repeats", str(args.repeats),
           "--sizes", *map(str, args.sizes)] + (["--pbss"] if args.pbss else [])
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[1024, 16384, 65536])
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--pbss", action="store_true", help="also time one full PBSS run")
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.worker:
        _worker(args.sizes, args.repeats, args.pbss)
        return 0

    fast, slow = _run(False, args), _run(True, args)
    if not fast["numba"]:
        print("numba unavailable; both columns use numpy", file=sys.stderr)
    print(f"{'kernel':<12}{'n':>8}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for rf, rs in zip(fast["rows"], slow["rows"]):
        for k in ("acquire", "power_sums", "noise"):
            print(f"{k:<12}{rf['n']:>8}{rf[k] * 1e3:>12.3f}{rs[k] * 1e3:>12.3f}{rs[k] / rf[k]:>10.1f}")
    if args.pbss:
        print(f"{'pbss_run':<12}{'':>8}{fast['pbss_run'] * 1e3:>12.1f}{slow['pbss_run'] * 1e3:>12.1f}"
              f"{slow['pbss_run'] / fast['pbss_run']:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
