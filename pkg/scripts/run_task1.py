"""Task I pipeline on the synthetic weather simulator: generate, train, diagnose.

    python scripts/run_task1.py --n 60000 --out runs/task1

Wraps the CLI so every stage leaves a replayable manifest.
"""

import argparse
from pathlib import Path

from domainchar.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60_000, help="total simulated pairs")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/task1")
    args = ap.parse_args()
    out = Path(args.out)

    # 50/8/2 keeps 50k training pairs at the default n
    steps = [
        ["generate", "--n", args.n, "--fractions", "50,8,2", "--out", out / "data"],
        ["train", "--data", out / "data/dataset.csv", "--out", out / "model"],
        ["eval", "--model", out / "model/model.dcf", "--data", out / "data/dataset.csv",
         "--out", out / "eval"],
        ["eval", "--model", out / "model/model.dcf", "--data", out / "data/dataset.csv",
         "--self-calibration", "--label", "self", "--out", out / "eval_self"],
    ]
    for argv in steps:
        argv = [str(a) for a in argv] + ["--seed", str(args.seed), "--verbose"]
        print("domainchar", " ".join(argv), flush=True)
        if cli(argv) != 0:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
