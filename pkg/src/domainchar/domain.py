"""Absolute domain characterization: weighted mixtures of per-observation posteriors."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .flow import ConditionalFlow

_CHUNK = 65536


@dataclass
class ObservationBag:
    features: np.ndarray          # (n, n_features)
    weights: np.ndarray           # (n,), raw multiplicities
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, float))
        self.weights = np.asarray(self.weights, float).reshape(-1)
        if len(self.features) == 0:
            raise ValueError("bag needs at least one observation")
        if len(self.weights) != len(self.features):
            raise ValueError("one weight per observation")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("bag weights must be positive")

    @classmethod
    def uniform(cls, features) -> "ObservationBag":
        features = np.atleast_2d(features)
        return cls(features, np.ones(len(features)))

    def __len__(self):
        return len(self.features)

    def to_csv(self, path) -> None:
        n_feat = self.features.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = [f"o{i}" for i in range(1, n_feat + 1)] + ["weight"]
            if self.timestamps is not None:
                header.append("timestamp")
            w.writerow(header)
            for i in range(len(self)):
                row = [repr(float(v)) for v in self.features[i]]
                row.append(repr(float(self.weights[i])))
                if self.timestamps is not None:
                    row.append(repr(float(self.timestamps[i])))
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "ObservationBag":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"bag not found: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if "weight" not in header:
            raise ValueError(f"{path}: missing weight column")
        wi = header.index("weight")
        ti = header.index("timestamp") if "timestamp" in header else None
        fcols = [i for i, h in enumerate(header) if i not in (wi, ti)]
        feats = np.array([[float(r[i]) for i in fcols] for r in body])
        weights = np.array([float(r[wi]) for r in body])
        ts = np.array([float(r[ti]) for r in body]) if ti is not None else None
        return cls(feats, weights, ts)


def temporal_weights(timestamps, half_life: float) -> np.ndarray:
    """Exponential decay weights; the newest observation gets weight 1."""
    if half_life <= 0:
        raise ValueError("half-life must be positive")
    t = np.asarray(timestamps, float)
    return 0.5 ** ((t.max() - t) / half_life)


class DomainCharacterization:
    """p_d(theta) = sum_i w_i q(theta | x_i) with normalized bag weights."""

    def __init__(self, flow: ConditionalFlow, contexts, weights):
        self.flow = flow
        self.space = flow.space
        self.contexts = np.atleast_2d(np.asarray(contexts, float))
        w = np.asarray(weights, float)
        self.weights = w / w.sum()
        self.log_weights = np.log(self.weights)

    def __len__(self):
        return len(self.weights)

    def component_log_probs(self, theta) -> np.ndarray:
        """(M, n_bag) matrix of log q(theta_m | x_i)."""
        theta = np.atleast_2d(theta)
        M, K = len(theta), len(self.contexts)
        out = np.empty(M * K)
        th = np.repeat(theta, K, axis=0)
        cx = np.tile(self.contexts, (M, 1))
        for s in range(0, M * K, _CHUNK):
            out[s:s + _CHUNK] = self.flow.log_prob(th[s:s + _CHUNK], cx[s:s + _CHUNK])
        return out.reshape(M, K)

    def log_prob(self, theta):
        theta = np.asarray(theta, float)
        lp = logsumexp(self.component_log_probs(theta) + self.log_weights, axis=1)
        return float(lp[0]) if theta.ndim == 1 else lp

    def pdf(self, theta):
        return np.exp(self.log_prob(theta))

    def sample_components(self, n: int, rng: np.random.Generator):
        """Ancestral draws and the bag entry each one came from."""
        if n < 1:
            raise ValueError("n must be >= 1")
        # base draws first: a single-entry bag then matches flow.sample exactly
        z = rng.standard_normal((n, self.flow.dim))
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.flow.push(z, self.contexts[idx])[0], idx

    def sample_and_log_prob(self, n: int, rng: np.random.Generator):
        theta, _ = self.sample_components(n, rng)
        return theta, self.log_prob(theta)

    def sample(self, n: int, rng: np.random.Generator):
        return self.sample_components(n, rng)[0]


def characterize(flow: ConditionalFlow, bag: ObservationBag) -> DomainCharacterization:
    return DomainCharacterization(flow, bag.features, bag.weights)
