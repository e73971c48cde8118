"""Low-dimensional stochastic stand-in for a rendering simulator.

Weather goes in, an 8-feature observation comes out. Several features are
deliberately non-injective (night hides clouds and fog, dry weather hides
wind, sun azimuth scrambles glare) so posteriors are genuinely wide.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import ParamSpace, default_space

NOISE_SIGMA = 0.02
N_FEATURES = 8
FEATURE_NAMES = [f"o{i}" for i in range(1, N_FEATURES + 1)]
SPLITS = ("train", "val", "test")


def _normalized(w):
    w = np.asarray(w, float)
    c, f, r = w[..., 0] / 100.0, w[..., 1] / 100.0, w[..., 2] / 100.0
    s = (w[..., 3] + 90.0) / 180.0
    wind, d = w[..., 4] / 100.0, w[..., 5] / 100.0
    return c, f, r, s, wind, d


def clean_features(w, azimuth):
    """Noise-free features for predicted-weather rows ``w`` (..., 6)."""
    c, f, r, s, wind, d = _normalized(w)
    a = np.asarray(azimuth, float) / 360.0
    o1 = np.maximum(0.0, 2.0 * s - 1.0) * (1.0 - 0.6 * c) * (1.0 - 0.5 * f)
    o2 = (1.0 - f) * (1.0 - 0.3 * r)
    o3 = c * (0.5 + 0.5 * f)
    o4 = np.minimum(1.0, 0.7 * r + 0.3 * d)
    o5 = r * wind
    o6 = o1 * (1.0 - o3) * np.abs(np.cos(2.0 * np.pi * a))
    o7 = 0.5 * (o2 + o4) * (1.0 - 0.2 * c)
    o8 = np.tanh(o1 + o5 - o3)
    return np.stack(np.broadcast_arrays(o1, o2, o3, o4, o5, o6, o7, o8), axis=-1)


def record_rng(seed: int, index: int) -> np.random.Generator:
    """Per-record noise stream; independent of generation order."""
    return np.random.default_rng([int(seed), int(index)])


def simulate(w, azimuth, rng: np.random.Generator, space: ParamSpace | None = None):
    """One noisy observation for predicted weather ``w`` (physical units)."""
    space = space or default_space()
    w = np.asarray(w, float)
    if not np.all(space.contains(w)):
        raise ValueError(f"weather outside the parameter box: {w}")
    return clean_features(w, azimuth) + NOISE_SIGMA * rng.standard_normal(N_FEATURES)


def resimulate(ws, azimuth, noise_seed, space: ParamSpace | None = None):
    """Re-render many weathers with nuisance and noise frozen to a record.

    ``noise_seed`` is the ``(dataset seed, record index)`` pair. Weathers are
    clipped into the box first, since posterior samples may leak past it.
    """
    space = space or default_space()
    ws = np.clip(np.atleast_2d(np.asarray(ws, float)), space.lower, space.upper)
    noise = NOISE_SIGMA * record_rng(*noise_seed).standard_normal(N_FEATURES)
    return clean_features(ws, azimuth) + noise


@dataclass
class Dataset:
    space: ParamSpace
    params: np.ndarray          # (n, len(space.dims)), physical units
    features: np.ndarray        # (n, n_features)
    split: np.ndarray           # (n,) of "train" / "val" / "test"
    seed: int
    fractions: tuple = (1.0, 0.0, 0.0)
    index: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.params) == 0:
            raise ValueError("empty dataset")
        if self.index is None:
            self.index = np.arange(len(self.params))

    def __len__(self):
        return len(self.params)

    @property
    def theta(self) -> np.ndarray:
        return self.space.predicted(self.params)

    @property
    def azimuth(self) -> np.ndarray:
        return self.params[:, self.space.index("sun_azimuth_angle")]

    def subset(self, split: str) -> "Dataset":
        keep = self.split == split
        return Dataset(self.space, self.params[keep], self.features[keep],
                       self.split[keep], self.seed, self.fractions,
                       self.index[keep], dict(self.meta))

    def noise_seed(self, row: int) -> tuple[int, int]:
        return int(self.seed), int(self.index[row])

    # -- on-disk format ---------------------------------------------------

    def columns(self) -> list[str]:
        feats = [f"o{i}" for i in range(1, self.features.shape[1] + 1)]
        return ["index", *self.space.names, *feats, "split"]

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for i in range(len(self)):
                w.writerow([int(self.index[i]),
                            *(repr(float(v)) for v in self.params[i]),
                            *(repr(float(v)) for v in self.features[i]),
                            self.split[i]])
        meta = {"seed": int(self.seed), "n": len(self),
                "fractions": [float(f) for f in self.fractions],
                "noise_sigma": NOISE_SIGMA, "columns": self.columns(),
                "space": self.space.to_dict(), **self.meta}
        meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"dataset not found: {path}")
        mp = meta_path(path)
        meta = json.loads(mp.read_text()) if mp.exists() else {}
        space = ParamSpace.from_dict(meta["space"]) if "space" in meta else default_space()
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        n_par = len(space.dims)
        if header[1:1 + n_par] != space.names:
            raise ValueError(f"unexpected dataset columns in {path}")
        index = np.array([int(r[0]) for r in body])
        params = np.array([[float(v) for v in r[1:1 + n_par]] for r in body])
        feats = np.array([[float(v) for v in r[1 + n_par:-1]] for r in body])
        split = np.array([r[-1] for r in body])
        extra = {k: v for k, v in meta.items()
                 if k not in ("seed", "n", "fractions", "noise_sigma", "columns", "space")}
        return cls(space, params, feats, split, int(meta.get("seed", 0)),
                   tuple(meta.get("fractions", (1.0, 0.0, 0.0))), index, extra)


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def split_counts(n: int, fractions) -> tuple[int, int, int]:
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be 3 non-negative values summing to 1: {fractions}")
    n_train = int(round(n * fractions[0]))
    n_val = min(n - n_train, int(round(n * fractions[1])))
    return n_train, n_val, n - n_train - n_val


def observe(space: ParamSpace, params, seed: int, index) -> np.ndarray:
    """Noisy features for full-parameter rows with per-record noise streams."""
    theta = space.predicted(params)
    az = params[:, space.index("sun_azimuth_angle")]
    noise = np.stack([record_rng(seed, i).standard_normal(N_FEATURES) for i in index])
    return clean_features(theta, az) + NOISE_SIGMA * noise


def generate_dataset(space: ParamSpace, n: int, seed: int,
                     fractions=(1.0, 0.0, 0.0)) -> Dataset:
    n_train, n_val, n_test = split_counts(n, fractions)
    params = space.sample_prior(n, np.random.default_rng(seed))
    index = np.arange(n)
    feats = observe(space, params, seed, index)
    split = np.array(["train"] * n_train + ["val"] * n_val + ["test"] * n_test)
    return Dataset(space, params, feats, split, seed, tuple(fractions), index)


def generate_region(space: ParamSpace, n: int, seed: int, bounds: dict,
                    fixed: dict | None = None) -> Dataset:
    """Like ``generate_dataset`` but uniform on a sub-box.

    ``bounds`` maps dim names to (lower, upper); ``fixed`` pins dims to values.
    """
    rng = np.random.default_rng(seed)
    params = space.sample_prior(n, rng)
    for name, (lo, hi) in bounds.items():
        params[:, space.index(name)] = rng.uniform(lo, hi, size=n)
    for name, value in (fixed or {}).items():
        params[:, space.index(name)] = value
    index = np.arange(n)
    feats = observe(space, params, seed, index)
    return Dataset(space, params, feats, np.array(["test"] * n), seed,
                   (0.0, 0.0, 1.0), index)
