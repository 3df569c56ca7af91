#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure Python allocation kernels.

Runs each per-slot kernel over a batch of randomized slots with both
backends, checks the outputs agree bit for bit, and reports slots/second.

    python benchmarks/bench_kernels.py --slots 200000 --participants 3
"""

import argparse
import random
import time

from cscshare.kernels import _pure

try:
    from cscshare.kernels import _speedups
except ImportError:
    _speedups = None


def make_cases(slots, participants, seed):
    rng = random.Random(seed)
    cases = []
    for _ in range(slots):
        production = rng.randint(0, 120_000)
        consumption = [rng.randint(0, 60_000) for _ in range(participants)]
        weights = [rng.randint(1, 100) for _ in range(participants)]
        total = sum(weights)
        kors = [w / total for w in weights]
        cases.append((production, kors, consumption))
    return cases


def run_backend(module, cases, repeat):
    timings = {}
    for name, call in (
        ("static", lambda c: module.static_shares(c[0], c[1], c[2])),
        ("proportional", lambda c: module.proportional_shares(c[0], c[2])),
        ("waterfall", lambda c: module.waterfall_shares(c[0], c[2])),
    ):
        best = float("inf")
        result = None
        for _ in range(repeat):
            started = time.perf_counter()
            result = [call(c) for c in cases]
            best = min(best, time.perf_counter() - started)
        timings[name] = (best, result)
    return timings


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--slots", type=int, default=100_000)
    parser.add_argument("--participants", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    cases = make_cases(args.slots, args.participants, args.seed)
    pure = run_backend(_pure, cases, args.repeat)

    print(f"{args.slots} slots, {args.participants} participants, best of {args.repeat}")
    header = f"{'kernel':<14}{'python':>12}"
    if _speedups is not None:
        header += f"{'compiled':>12}{'speedup':>10}"
    print(header)

    compiled = run_backend(_speedups, cases, args.repeat) if _speedups else None
    for name in ("static", "proportional", "waterfall"):
        py_time, py_result = pure[name]
        line = f"{name:<14}{args.slots / py_time:>10.0f}/s"
        if compiled:
            c_time, c_result = compiled[name]
            if c_result != py_result:
                raise SystemExit(f"backend mismatch in {name} kernel")
            line += f"{args.slots / c_time:>10.0f}/s{py_time / c_time:>9.1f}x"
        print(line)
    if not compiled:
        print("compiled kernels not built; showing pure Python only")


if __name__ == "__main__":
    main()
