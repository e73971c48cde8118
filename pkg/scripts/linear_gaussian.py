"""Train a flow on the linear-Gaussian toy and compare it to the exact posterior.

    python scripts/linear_gaussian.py --pairs 20000 --out runs/linear_gaussian
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from domainchar import evaluation as ev
from domainchar.flow import ConditionalFlow
from domainchar.io import save_flow, write_coverage
from domainchar.npe import TrainConfig, fit
from domainchar.toys import LinearGaussian


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/linear_gaussian")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lg = LinearGaussian()
    rng = np.random.default_rng(args.seed)
    th, x = lg.simulate(args.pairs, rng)
    thv, xv = lg.simulate(args.pairs // 5, rng)
    cfg = TrainConfig(seed=args.seed)
    flow = ConditionalFlow(lg.space(), lg.context_dim, cfg.num_layers, cfg.hidden,
                           cfg.num_bins, cfg.tail_bound, rng=np.random.default_rng(args.seed + 1),
                           context_mean=x.mean(0), context_scale=x.std(0))
    t = time.time()
    report = fit(flow, th, x, thv, xv, cfg, np.random.default_rng(args.seed + 2))
    seconds = time.time() - t

    erng = np.random.default_rng(args.seed + 3)
    _, xk = lg.simulate(500, erng)
    kl = lg.kl_to(flow, xk, 1000, erng)
    tt, xt = lg.simulate(1000, erng)
    curve = ev.expected_coverage(flow, tt, xt, np.linspace(0, 1, 11), 1024, erng)

    save_flow(flow, out / "model.dcf")
    report.to_csv(out / "train_report.csv")
    write_coverage(out / "coverage.csv", curve)
    summary = {"kl_mean": float(kl.mean()), "coverage_max_deviation": curve.max_deviation(),
               "best_val_loss": report.best_val_loss,
               "posterior_entropy": lg.posterior_entropy(),
               "epochs": len(report.epochs), "train_seconds": seconds}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
