#!/usr/bin/env python3
"""Run all three scaling experiments at desk scale and write CSVs.

Equivalent to the `phrchain bench ...` subcommands with the default grids;
kept as a script so a full reproduction is one command:

    python scripts/run_benchmarks.py --out-dir results
"""

import argparse
from pathlib import Path

from phrchain.bench import (
    BenchConfig,
    bench_block_creation,
    bench_consensus,
    bench_researcher_access,
    write_csv,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=Path("results"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--folds", type=int, default=4)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    config = BenchConfig(seed=args.seed, folds=args.folds)
    suffix = f"aggregation: mean over {args.folds} folds; seed={args.seed}"

    print("block creation benchmark ...")
    rows = bench_block_creation(config)
    write_csv(
        rows,
        ["patients", "hospitals", "creation_seconds", "transcript_bytes"],
        args.out_dir / "block_creation.csv",
        f"block creation; {suffix}",
    )

    print("consensus benchmark ...")
    rows = bench_consensus(config)
    write_csv(
        rows,
        ["miners", "malicious_pct", "simulated_seconds"],
        args.out_dir / "consensus.csv",
        f"consensus; virtual clock; {suffix}",
    )

    print("researcher access benchmark ...")
    researcher_config = BenchConfig(
        seed=args.seed, folds=args.folds, malicious=(0.1, 0.2, 0.3, 0.4, 0.5)
    )
    rows = bench_researcher_access(researcher_config)
    write_csv(
        rows,
        ["malicious_pct", "phase", "seconds"],
        args.out_dir / "researcher_access.csv",
        f"researcher access; wall clock; {suffix}",
    )

    print(f"wrote 3 CSVs to {args.out_dir}/")


if __name__ == "__main__":
    main()
