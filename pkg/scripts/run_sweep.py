"""Task III noise sweep: contaminate an exact source mixture with out-of-ODD
observations and track the weight error d_E and the gap delta per eta.

    python scripts/run_sweep.py --model runs/task1/model/model.dcf --out runs/sweep
"""

import argparse
import json
from pathlib import Path

import numpy as np

from domainchar.cli import main as cli
from domainchar.io import read_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", required=True)
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()
    out = Path(args.out)
    argv = ["sweep", "--model", args.model, "--reps", str(args.reps),
            "--seed", str(args.seed), "--out", str(out)]
    if cli(argv) != 0:
        raise SystemExit(1)

    _, rows = read_csv(out / "sweep.csv")
    arr = np.array([[float(v) for v in r] for r in rows])
    meta = json.loads((out / "sweep_meta.json").read_text())
    print(f"{'eta':>5} {'median d_E':>12} {'median delta':>14} {'baseline':>12} {'flagged':>8}")
    for eta in np.unique(arr[:, 0]):
        sel = arr[:, 0] == eta
        rate = meta["detection_rate"][repr(float(eta))]
        print(f"{eta:5.1f} {np.median(arr[sel, 2]):12.3e} {np.median(arr[sel, 3]):14.3e} "
              f"{np.median(arr[sel, 4]):12.3e} {rate:8.2f}")


if __name__ == "__main__":
    main()
