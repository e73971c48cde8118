"""Command-line entry point.

Every command resolves its options from defaults, an optional ``--config``
JSON file (a previous run's ``manifest.json`` works too) and explicit flags,
in that order of precedence, and writes the resolved options to
``<out>/manifest.json`` so the run can be replayed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import evaluation as ev
from .domain import ObservationBag, characterize, temporal_weights
from .io import load_flow, save_flow, write_coverage, write_corner, write_csv
from .mixture import (IN_WEIGHTS, OUT_REGION, OUT_SIZE, SOURCE_REGIONS, SOURCE_SIZES,
                      baseline_gap, fit_weights, noise_sweep, region_bags)
from .npe import TrainConfig, train
from .params import default_space
from .simulator import Dataset, generate_dataset

log = logging.getLogger("domainchar")


def _ints(s):
    return [int(v) for v in str(s).split(",") if v != ""]


def _floats(s):
    return [float(v) for v in str(s).split(",") if v != ""]


def _paths(s):
    return [v for v in str(s).split(",") if v != ""]


COMMON = {"seed": (int, 0), "out": (str, "out")}

OPTIONS = {
    "generate": {"n": (int, 6000), "fractions": (_floats, [10.0, 2.0, 1.0])},
    "train": {"data": (str, None), "batch_size": (int, 256), "lr": (float, 1e-3),
              "epochs": (int, 200), "patience": (int, 10), "layers": (int, 6),
              "hidden": (_ints, [64, 64]), "bins": (int, 8), "tail_bound": (float, 3.0)},
    "eval": {"model": (str, None), "data": (str, None), "split": (str, "test"),
             "n_pairs": (int, 500), "n_samples": (int, 1024), "levels": (int, 21),
             "self_calibration": (bool, False), "ppc_records": (int, 5),
             "ppc_samples": (int, 100), "corner_record": (int, 0),
             "corner_samples": (int, 20000), "resolution": (int, 64),
             "label": (str, "model")},
    "characterize": {"model": (str, None), "bag": (str, None), "data": (str, None),
                     "split": (str, "test"), "bag_size": (int, 1000),
                     "half_life": (float, None), "n_samples": (int, 20000),
                     "hdr_samples": (int, 2048), "resolution": (int, 64)},
    "fit-mixture": {"model": (str, None), "target": (str, None), "sources": (_paths, None),
                    "M": (int, 16), "baseline_trials": (int, 200)},
    "sweep": {"model": (str, None), "etas": (int, 11), "reps": (int, 30), "M": (int, 16),
              "weights": (_floats, list(IN_WEIGHTS)), "baseline_trials": (int, 50),
              "n_boot": (int, 50), "bag_seed": (int, 1)},
}

REQUIRED = {"train": ["data"], "eval": ["model", "data"], "characterize": ["model"],
            "fit-mixture": ["model", "target", "sources"], "sweep": ["model"]}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="domainchar",
                                     description="Probabilistic weather-domain characterization")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="JSON options file or manifest")
        for name, (typ, _) in {**COMMON, **opts}.items():
            flag = "--" + name.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=name, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=name, default=None,
                               type=str if typ in (_ints, _floats, _paths) else typ)
    return parser


def _coerce(typ, value):
    if value is None:
        return None
    if typ in (_ints, _floats, _paths):
        return typ(value) if isinstance(value, str) else [
            (int if typ is _ints else float if typ is _floats else str)(v) for v in value]
    if typ is bool:
        return bool(value)
    return typ(value)


def resolve(command: str, args: argparse.Namespace) -> dict:
    table = {**COMMON, **OPTIONS[command]}
    cfg = {name: default for name, (_, default) in table.items()}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if "config" in data and "command" in data:
            if data["command"] != command:
                raise UsageError(f"manifest is for '{data['command']}', not '{command}'")
            data = data["config"]
        unknown = set(data) - set(table)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: _coerce(table[k][0], v) for k, v in data.items()})
    for name, (typ, _) in table.items():
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = _coerce(typ, value)
    missing = [k for k in REQUIRED.get(command, []) if cfg.get(k) is None]
    if command == "characterize" and cfg["bag"] is None and cfg["data"] is None:
        missing.append("bag or data")
    if missing:
        raise UsageError(f"missing required options: {', '.join(missing)}")
    return cfg


def _out(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, cfg: dict, outputs) -> None:
    manifest = {"command": command, "config": cfg, "version": __version__,
                "outputs": sorted(outputs)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_generate(cfg):
    out = _out(cfg)
    props = np.asarray(cfg["fractions"], float)
    if len(props) != 3 or np.any(props < 0) or props.sum() <= 0:
        raise UsageError("--fractions needs three non-negative proportions")
    ds = generate_dataset(default_space(), cfg["n"], cfg["seed"], tuple(props / props.sum()))
    ds.to_csv(out / "dataset.csv")
    return ["dataset.csv", "dataset.meta.json"]


def cmd_train(cfg):
    ds = Dataset.from_csv(cfg["data"])
    out = _out(cfg)
    tc = TrainConfig(batch_size=cfg["batch_size"], learning_rate=cfg["lr"],
                     max_epochs=cfg["epochs"], patience=cfg["patience"], seed=cfg["seed"],
                     num_layers=cfg["layers"], hidden=tuple(cfg["hidden"]),
                     num_bins=cfg["bins"], tail_bound=cfg["tail_bound"])
    flow, report = train(ds, tc)
    save_flow(flow, out / "model.dcf")
    report.to_csv(out / "train_report.csv")
    return ["model.dcf", "train_report.csv"]


def cmd_eval(cfg):
    flow = load_flow(cfg["model"])
    ds = Dataset.from_csv(cfg["data"]).subset(cfg["split"])
    out = _out(cfg)
    seed = cfg["seed"]
    n_pairs = min(cfg["n_pairs"], len(ds))
    x = ds.features[:n_pairs]
    theta = ds.theta[:n_pairs]
    if cfg["self_calibration"]:
        rng = np.random.default_rng([seed, 0])
        theta = np.vstack([flow.sample(xi, 1, rng) for xi in x])
    ranks = ev.rank_data(flow, theta, x, cfg["n_samples"], np.random.default_rng([seed, 1]))
    curve = ev.coverage_curve(ranks, np.linspace(0.0, 1.0, cfg["levels"]))
    write_coverage(out / "coverage.csv", curve)
    pis = ranks.pi()
    write_csv(out / "pi.csv", ["pair", "record", "pi"],
              zip(range(n_pairs), ds.index[:n_pairs], pis))
    s = ev.box_summary(pis)
    keys = ["n", "mean", "median", "q1", "q3", "whisker_low", "whisker_high"]
    write_csv(out / "pi_summary.csv", ["model", *keys], [[cfg["label"], *(s[k] for k in keys)]])
    rows = []
    rng = np.random.default_rng([seed, 2])
    for r in range(min(cfg["ppc_records"], len(ds))):
        res = ev.ppc(flow, ds, r, cfg["ppc_samples"], rng)
        rows += [(ds.index[r], k, "posterior", d) for k, d in enumerate(res.distances)]
        rows += [(ds.index[r], k, "prior", d) for k, d in enumerate(res.prior_distances)]
    write_csv(out / "ppc.csv", ["record", "draw", "kind", "distance"], rows)
    corner = ev.corner_data(flow.given(ds.features[cfg["corner_record"]]), cfg["resolution"],
                            cfg["corner_samples"], np.random.default_rng([seed, 3]))
    write_corner(out / "corner", corner)
    return ["coverage.csv", "pi.csv", "pi_summary.csv", "ppc.csv", "corner_marginals.csv",
            "corner_pairs.csv", "corner_levels.csv"]


def cmd_characterize(cfg):
    flow = load_flow(cfg["model"])
    if cfg["bag"] is not None:
        bag = ObservationBag.from_csv(cfg["bag"])
    else:
        ds = Dataset.from_csv(cfg["data"]).subset(cfg["split"])
        bag = ObservationBag.uniform(ds.features[:cfg["bag_size"]])
    if cfg["half_life"] is not None:
        if bag.timestamps is None:
            raise UsageError("--half-life needs a timestamp column in the bag")
        bag = ObservationBag(bag.features,
                             bag.weights * temporal_weights(bag.timestamps, cfg["half_life"]),
                             bag.timestamps)
    out = _out(cfg)
    ch = characterize(flow, bag)
    bag.to_csv(out / "bag.csv")
    artifact = {"model": str(cfg["model"]), "n_entries": len(ch),
                "weights": [float(w) for w in ch.weights],
                "contexts": [[float(v) for v in row] for row in ch.contexts],
                "space": flow.space.to_dict()}
    (out / "characterization.json").write_text(json.dumps(artifact, sort_keys=True) + "\n")
    seed = cfg["seed"]
    rows = []
    for k, gamma in enumerate(ev.CORNER_LEVELS):
        h = ev.hdr_threshold(ch, None, gamma, cfg["hdr_samples"],
                             np.random.default_rng([seed, 0, k]))
        rows.append((gamma, h.threshold))
    write_csv(out / "hdr.csv", ["gamma", "log_density_threshold"], rows)
    corner = ev.corner_data(ch, cfg["resolution"], cfg["n_samples"],
                            np.random.default_rng([seed, 1]))
    write_corner(out / "corner", corner)
    return ["bag.csv", "characterization.json", "hdr.csv", "corner_marginals.csv",
            "corner_pairs.csv", "corner_levels.csv"]


def cmd_fit_mixture(cfg):
    flow = load_flow(cfg["model"])
    target = characterize(flow, ObservationBag.from_csv(cfg["target"]))
    sources = [characterize(flow, ObservationBag.from_csv(p)) for p in cfg["sources"]]
    out = _out(cfg)
    fit = fit_weights(target, sources, cfg["M"], np.random.default_rng([cfg["seed"], 0]))
    base = baseline_gap(target, sources, cfg["M"], cfg["baseline_trials"],
                        np.random.default_rng([cfg["seed"], 1]), points=fit.points)
    write_csv(out / "weights.csv", ["source_index", "lambda_hat"], enumerate(fit.weights))
    summary = {"delta": fit.gap, "M": cfg["M"], "ridged": fit.ridged,
               "baseline_median": base.median, "baseline_q1": base.q1,
               "baseline_q3": base.q3}
    (out / "fit.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ["weights.csv", "fit.json"]


def cmd_sweep(cfg):
    flow = load_flow(cfg["model"])
    out = _out(cfg)
    sources, out_bag = region_bags(flow.space, cfg["bag_seed"])
    for k, bag in enumerate(sources, start=1):
        bag.to_csv(out / f"source_{k}.csv")
    out_bag.to_csv(out / "out_of_odd.csv")
    res = noise_sweep(flow, sources, cfg["weights"], out_bag,
                      np.linspace(0.0, 1.0, cfg["etas"]), cfg["reps"], cfg["M"],
                      np.random.default_rng(cfg["seed"]), cfg["baseline_trials"], cfg["n_boot"])
    write_csv(out / "sweep.csv", ["eta", "rep", "d_E", "delta", "baseline_median"],
              zip(res.eta, res.rep, res.d_e, res.delta, res.baseline_median))
    meta = {"source_regions": [{k: list(v) for k, v in r.items()} for r in SOURCE_REGIONS],
            "out_region": {k: list(v) for k, v in OUT_REGION.items()},
            "source_sizes": list(SOURCE_SIZES), "out_size": OUT_SIZE,
            "weights": list(cfg["weights"]), "odd_threshold": res.threshold,
            "odd_threshold_quantile": 95.0,
            "detection_rate": {repr(float(e)): res.detection_rate(e) for e in res.etas}}
    (out / "sweep_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return ["sweep.csv", "sweep_meta.json", "source_1.csv", "source_2.csv", "source_3.csv",
            "out_of_odd.csv"]


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
            "characterize": cmd_characterize, "fit-mixture": cmd_fit_mixture,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args.command, args)
        outputs = COMMANDS[args.command](cfg)
        _manifest(Path(cfg["out"]), args.command, cfg, outputs)
    except Exception as exc:  # single-line, machine-parsable failure report
        kind = {FileNotFoundError: "not_found", UsageError: "usage",
                PermissionError: "unwritable"}.get(type(exc), "failure")
        msg = " ".join(str(exc).split())
        print(json.dumps({"error": kind, "type": type(exc).__name__, "message": msg}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
