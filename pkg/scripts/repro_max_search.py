"""Reproduce the 1-D max-search comparison on random smooth functions.

Runs a set of acquisition policies over freshly drawn functions and prints
mean simple regret at a few horizons plus the mean log-regret trace.
"""
import argparse

import numpy as np

from dcbo.harness import parse_config, run_experiment, write_records

DEFAULT_POLICIES = "gp_dcor, gp_mis, random, var_max, ei, gp_ucb, mes"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicas", type=int, default=32)
    ap.add_argument("--steps", type=int, default=48, help="policy steps after the 2 seeds")
    ap.add_argument("--draws", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--policies", default=DEFAULT_POLICIES)
    ap.add_argument("--out", default="")
    args = ap.parse_args()

    cfg = parse_config(
        "task = max_search_1d\n"
        f"policies = {args.policies}\n"
        f"steps = {args.steps}\nreplicas = {args.replicas}\n"
        f"seed = {args.seed}\nn_draws = {args.draws}\n"
    )
    records = run_experiment(cfg)
    if args.out:
        write_records(records, args.out)

    horizon = max(r.step for r in records)
    marks = [t for t in (5, 10, 20, 30, 50, horizon) if t <= horizon]
    print(f"{'policy':>10s}  " + "  ".join(f"regret@{t:<3d}" for t in marks))
    for pol in cfg.policies:
        row = []
        for t in marks:
            vals = [r.metric for r in records if r.policy == pol and r.step == t]
            row.append(float(np.mean(vals)))
        print(f"{pol:>10s}  " + "  ".join(f"{v:9.4f}" for v in row))

    print(f"\nmean log-regret (floor 1e-12), policy x step {marks}")
    for pol in cfg.policies:
        row = []
        for t in marks:
            vals = [max(r.metric, 1e-12) for r in records if r.policy == pol and r.step == t]
            row.append(float(np.mean(np.log(vals))))
        print(f"{pol:>10s}  " + "  ".join(f"{v:9.3f}" for v in row))


if __name__ == "__main__":
    main()
