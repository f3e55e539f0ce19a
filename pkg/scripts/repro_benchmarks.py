"""Normalized cumulative-regret table on the 2-D benchmark functions.

For each benchmark, runs the requested policies and reports the median
cumulative regret over a late window, normalized so random = 1.
"""
import argparse

from dcbo.harness import parse_config, run_experiment, summarize
from dcbo.problems import BENCHMARKS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicas", type=int, default=16)
    ap.add_argument("--steps", type=int, default=48)
    ap.add_argument("--draws", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--policies", default="gp_dcor, gp_mis, ei, gp_ucb, random")
    ap.add_argument("--benchmarks", default=",".join(sorted(BENCHMARKS)))
    ap.add_argument("--window", default="20:50")
    args = ap.parse_args()

    lo, hi = (int(v) for v in args.window.split(":"))
    names = [b.strip() for b in args.benchmarks.split(",") if b.strip()]
    policies = [p.strip() for p in args.policies.split(",")]
    if "random" not in policies:
        policies.append("random")

    table = {}
    for bench in names:
        cfg = parse_config(
            "task = max_search_benchmark\n"
            f"benchmark = {bench}\n"
            f"policies = {', '.join(policies)}\n"
            f"steps = {args.steps}\nreplicas = {args.replicas}\n"
            f"seed = {args.seed}\nn_draws = {args.draws}\n"
        )
        records = run_experiment(cfg)
        rows = summarize(records, stat="cum_regret", window=(lo, hi), normalize_by="random")
        table[bench] = {row["policy"]: row["median"] for row in rows}
        print(f"{bench}: done")

    print(f"\nmedian cumulative regret, steps {lo}..{hi}, random = 1.00")
    print(f"{'policy':>10s}  " + "  ".join(f"{b:>15s}" for b in names))
    for pol in policies:
        print(f"{pol:>10s}  " + "  ".join(f"{table[b][pol]:15.3f}" for b in names))


if __name__ == "__main__":
    main()
