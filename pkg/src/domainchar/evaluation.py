"""Posterior diagnostics: HDR sets, coverage, the pi statistic, PPC, corner data.

Conditional models expose ``log_prob(theta, context)`` and
``sample_and_log_prob(context, n, rng)``; unconditional ones (a bound
``Posterior`` or a ``DomainCharacterization``) drop the context argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simulator

CORNER_LEVELS = (0.6827, 0.9545, 0.9973)


def _hdr_index(gamma, n):
    # 1-based rank of the threshold among ascending log-densities
    k = np.ceil((1.0 - np.asarray(gamma, float)) * n - 1e-9).astype(int)
    return np.clip(k, 1, n)


@dataclass
class HdrEstimate:
    gamma: float
    threshold: float
    samples: np.ndarray
    log_densities: np.ndarray

    def contains(self, log_density):
        return np.asarray(log_density) >= self.threshold


def hdr_threshold(dist, context, gamma: float, n: int = 1024,
                  rng: np.random.Generator | None = None) -> HdrEstimate:
    """Sample-quantile threshold t with P(log p >= t) ~= gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if n < 100:
        raise ValueError("need at least 100 samples")
    rng = rng if rng is not None else np.random.default_rng()
    if context is None:
        samples, lp = dist.sample_and_log_prob(n, rng)
    else:
        samples, lp = dist.sample_and_log_prob(context, n, rng)
    t = np.sort(lp)[_hdr_index(gamma, n) - 1]
    return HdrEstimate(float(gamma), float(t), samples, lp)


@dataclass
class RankData:
    """Per test pair: log q(theta* | x) and sorted posterior-sample log-densities."""
    true_log_prob: np.ndarray     # (pairs,)
    sample_log_probs: np.ndarray  # (pairs, n), ascending

    @property
    def n(self) -> int:
        return self.sample_log_probs.shape[1]

    def pi(self) -> np.ndarray:
        below = self.sample_log_probs <= self.true_log_prob[:, None]
        return below.mean(axis=1)

    def covered(self, gamma: float) -> np.ndarray:
        if gamma <= 0.0:
            return np.zeros(len(self.true_log_prob), bool)
        if gamma >= 1.0:
            return np.ones(len(self.true_log_prob), bool)
        k = _hdr_index(gamma, self.n)
        return self.true_log_prob >= self.sample_log_probs[:, k - 1]


def rank_data(flow, thetas, contexts, n: int, rng: np.random.Generator) -> RankData:
    thetas = np.atleast_2d(thetas)
    contexts = np.atleast_2d(contexts)
    true_lp = np.asarray(flow.log_prob(thetas, contexts), float)
    sample_lp = np.empty((len(thetas), n))
    for i, x in enumerate(contexts):
        _, lp = flow.sample_and_log_prob(x, n, rng)
        sample_lp[i] = np.sort(lp)
    return RankData(true_lp, sample_lp)


@dataclass
class CoverageCurve:
    levels: np.ndarray
    coverage: np.ndarray
    n_pairs: int

    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.coverage - self.levels)))

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.coverage) >= 0))


def coverage_curve(ranks: RankData, levels) -> CoverageCurve:
    levels = np.asarray(levels, float)
    cov = np.array([ranks.covered(g).mean() for g in levels])
    return CoverageCurve(levels, cov, len(ranks.true_log_prob))


def expected_coverage(flow, thetas, contexts, levels=None, n: int = 1024,
                      rng: np.random.Generator | None = None) -> CoverageCurve:
    """Fraction of (theta*, x) pairs whose theta* lies in the gamma-HDR, per gamma."""
    if len(np.atleast_2d(thetas)) < 100:
        raise ValueError("need at least 100 test pairs")
    levels = np.linspace(0.0, 1.0, 11) if levels is None else levels
    rng = rng if rng is not None else np.random.default_rng()
    return coverage_curve(rank_data(flow, thetas, contexts, n, rng), levels)


def pi_statistic(flow, theta, context, n: int = 1024,
                 rng: np.random.Generator | None = None) -> float:
    """Fraction of posterior samples no more probable than the ground truth."""
    if n < 100:
        raise ValueError("need at least 100 samples")
    rng = rng if rng is not None else np.random.default_rng()
    _, lp = flow.sample_and_log_prob(context, n, rng)
    true_lp = flow.log_prob(np.atleast_2d(theta), np.atleast_2d(context))[0]
    return float(np.mean(lp <= true_lp))


def box_summary(values) -> dict:
    """Median, quartiles and Tukey whiskers (1.5 IQR, clipped to the data)."""
    v = np.sort(np.asarray(values, float))
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    # interpolated quartiles can sit beyond the extreme in-fence data point
    lo = min(v[v >= q1 - 1.5 * iqr].min(), q1)
    hi = max(v[v <= q3 + 1.5 * iqr].max(), q3)
    return {"n": int(len(v)), "mean": float(v.mean()), "median": float(med),
            "q1": float(q1), "q3": float(q3),
            "whisker_low": float(lo), "whisker_high": float(hi)}


@dataclass
class PpcResult:
    samples: np.ndarray
    observations: np.ndarray
    distances: np.ndarray
    prior_distances: np.ndarray


def ppc(flow, dataset, row: int, n: int = 100,
        rng: np.random.Generator | None = None) -> PpcResult:
    """Posterior predictive check for one dataset record.

    Posterior draws are re-simulated with the record's azimuth and noise
    frozen; distances are Euclidean in feature space. Prior draws pushed
    through the same frozen simulator give the contrast distribution.
    """
    rng = rng if rng is not None else np.random.default_rng()
    x = dataset.features[row]
    az = dataset.azimuth[row]
    seed = dataset.noise_seed(row)
    samples = flow.sample(x, n, rng)
    obs = simulator.resimulate(samples, az, seed, dataset.space)
    prior = dataset.space.predicted(dataset.space.sample_prior(n, rng))
    prior_obs = simulator.resimulate(prior, az, seed, dataset.space)
    return PpcResult(samples, obs, np.linalg.norm(obs - x, axis=1),
                     np.linalg.norm(prior_obs - x, axis=1))


@dataclass
class CornerData:
    names: list
    edges: list                 # per dim, resolution + 1 bin edges
    marginals: list             # per dim, histogram masses (sum to 1)
    pairs: dict                 # (i, j) with i > j -> (res, res) smoothed masses, axis 0 = dim i
    iso_levels: dict            # (i, j) -> mass thresholds, one per credibility level
    levels: tuple = CORNER_LEVELS

    def cell_area(self, i, j) -> float:
        return float(np.diff(self.edges[i])[0] * np.diff(self.edges[j])[0])

    def region_area(self, i, j, level) -> float:
        """Area of the grid HDR region at ``level`` for the (i, j) panel."""
        t = self.iso_levels[(i, j)][list(self.levels).index(level)]
        return float(np.sum(self.pairs[(i, j)] >= t)) * self.cell_area(i, j)


def _box_smooth(grid):
    padded = np.pad(grid, 1)
    out = sum(padded[1 + di:1 + di + grid.shape[0], 1 + dj:1 + dj + grid.shape[1]]
              for di in (-1, 0, 1) for dj in (-1, 0, 1))
    total = out.sum()
    return out / total if total > 0 else out


def grid_hdr_thresholds(masses, levels) -> np.ndarray:
    """Mass thresholds t such that cells with mass >= t hold ``level`` mass."""
    flat = np.sort(masses.ravel())[::-1]
    cum = np.cumsum(flat)
    idx = np.searchsorted(cum, np.asarray(levels) - 1e-12)
    return flat[np.minimum(idx, len(flat) - 1)]


def corner_data(dist, resolution: int = 64, n: int = 100_000,
                rng: np.random.Generator | None = None, ranges=None,
                levels=CORNER_LEVELS) -> CornerData:
    """Marginal histograms and smoothed pairwise grids from samples of ``dist``."""
    if resolution < 32:
        raise ValueError("resolution must be >= 32")
    rng = rng if rng is not None else np.random.default_rng()
    space = dist.space
    samples = np.atleast_2d(dist.sample(n, rng))
    D = samples.shape[1]
    if ranges is None:
        ranges = list(zip(space.lower, space.upper))
    edges = [np.linspace(lo, hi, resolution + 1) for lo, hi in ranges]
    marginals = []
    for d in range(D):
        counts, _ = np.histogram(samples[:, d], bins=edges[d])
        marginals.append(counts / max(counts.sum(), 1))
    pairs, iso = {}, {}
    for i in range(D):
        for j in range(i):
            counts, _, _ = np.histogram2d(samples[:, i], samples[:, j],
                                          bins=[edges[i], edges[j]])
            grid = _box_smooth(counts / max(counts.sum(), 1))
            pairs[(i, j)] = grid
            iso[(i, j)] = grid_hdr_thresholds(grid, levels)
    return CornerData(space.predicted_names, edges, marginals, pairs, iso, tuple(levels))
