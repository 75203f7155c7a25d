"""Sandwich the identical-copy PS system between two simpler systems.

Identical copies under PS are awkward to analyze directly, so the lab
also simulates two coupled variants: a lower bound where each job only
ever occupies its least-loaded server, and an upper bound where copies
never get cancelled and every server runs as an independent PS queue.
The exact system must land between them; the upper bound's per-server
copy count has a textbook closed form (an M/M/1 queue), which doubles
as an end-to-end check of the engine.

Run:
    python demos/bounding_sandwich.py
    python demos/bounding_sandwich.py --lam 1.2 --busy 20000
"""

import argparse

from redlab.engine import BoundingMode, StopRule, replicated_time_average
from redlab.model import CopyMode, SystemConfig

LABELS = {
    BoundingMode.PS_LOWER_BOUND: "lower bound (least-loaded only)",
    BoundingMode.EXACT: "exact identical-copy system",
    BoundingMode.PS_UPPER_BOUND: "upper bound (no cancellation)",
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--lam", type=float, default=0.9)
    ap.add_argument("--busy", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    config = SystemConfig(K=args.K, d=args.d, lam=args.lam, mu=1.0,
                          copy_mode=CopyMode.IDENTICAL, policy="ps",
                          seed=args.seed, replications=3)
    stop = StopRule(busy_periods=args.busy)
    print(f"K={args.K}, d={args.d}, lam={args.lam}, identical copies, PS, "
          f"{config.replications} x {args.busy} busy periods per mode")
    print()

    results = {}
    for mode in (BoundingMode.PS_LOWER_BOUND, BoundingMode.EXACT,
                 BoundingMode.PS_UPPER_BOUND):
        mean, ci, runs = replicated_time_average(config, stop, mode=mode)
        results[mode] = (mean, ci, runs)
        print(f"{LABELS[mode]:<34} mean jobs {mean:8.4f} +- {ci:.4f}")
    print()

    lb, ex, ub = (results[m][0] for m in (BoundingMode.PS_LOWER_BOUND,
                                          BoundingMode.EXACT,
                                          BoundingMode.PS_UPPER_BOUND))
    order = "holds" if lb <= ex <= ub else "VIOLATED"
    print(f"ordering lower <= exact <= upper: {order}")

    per_server_load = args.lam * args.d / args.K
    mm1 = per_server_load / (1.0 - per_server_load) if per_server_load < 1 else float("inf")
    run0 = results[BoundingMode.PS_UPPER_BOUND][2][0]
    print()
    print(f"upper bound per-server copy counts (each server is M/M/1 at "
          f"load {per_server_load:.2f}, mean {mm1:.3f}):")
    for s, (m, ci) in enumerate(zip(run0.time_avg_copies_by_server,
                                    run0.copies_ci_by_server)):
        print(f"  server {s + 1}: {m:.4f} +- {ci:.4f}")


if __name__ == "__main__":
    main()
