"""Relative characterization: a target domain as a convex mix of source domains.

Distributions only need ``log_prob(theta)`` and ``sample(n, rng)``, so the
solver works on DomainCharacterization objects and on closed-form test
densities alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .domain import ObservationBag, characterize
from .simulator import generate_region

RIDGE = 1e-10
_COND_LIMIT = 1e10


def _pdfs(target, sources, points):
    p_t = np.exp(target.log_prob(points))
    P = np.column_stack([np.exp(s.log_prob(points)) for s in sources])
    return p_t, P


def gap_from_pdfs(p_target, P_sources, weights) -> float:
    r = np.asarray(p_target) - np.asarray(P_sources) @ np.asarray(weights, float)
    return float(np.mean(r * r))


def gap(target, sources, weights, points) -> float:
    """Monte Carlo mean squared gap between target pdf and the weighted source mix."""
    p_t, P = _pdfs(target, sources, np.atleast_2d(points))
    return gap_from_pdfs(p_t, P, weights)


def qp_objective(A, b, lam) -> float:
    return float(lam @ A @ lam - 2.0 * b @ lam)


def solve_simplex_qp(A, b):
    """Minimise lam' A lam - 2 b' lam over the probability simplex.

    Exact: every nonempty support is tried, the equality-constrained KKT
    system solved on it, and the feasible candidate with the lowest
    objective kept (earliest support in lexicographic order on ties).
    Returns ``(lam, ridged)`` where ``ridged`` marks a singular face at the
    optimum. Scale-free: A and b are rescaled before solving.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    S = len(b)
    scale = np.trace(A) / S
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    A_s, b_s = A / scale, b / scale
    supports = sorted(s for k in range(1, S + 1) for s in combinations(range(S), k))
    best, best_obj, best_ridged = None, np.inf, False
    for sup in supports:
        idx = list(sup)
        k = len(idx)
        ridged = False
        if k == 1:
            lam_t = np.ones(1)
        else:
            Att = A_s[np.ix_(idx, idx)]
            if np.linalg.cond(Att) > _COND_LIMIT:
                Att = Att + RIDGE * np.eye(k)
                ridged = True
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = 2.0 * Att
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.append(2.0 * b_s[idx], 1.0)
            try:
                lam_t = np.linalg.solve(kkt, rhs)[:k]
            except np.linalg.LinAlgError:
                continue
            if np.any(lam_t < -1e-12):
                continue
            lam_t = np.clip(lam_t, 0.0, None)
            lam_t /= lam_t.sum()
        lam = np.zeros(S)
        lam[idx] = lam_t
        obj = qp_objective(A_s, b_s, lam)
        if best is None or obj < best_obj - 1e-14 * max(1.0, abs(best_obj)):
            best, best_obj, best_ridged = lam, obj, ridged
    return best, best_ridged


@dataclass
class MixtureFit:
    weights: np.ndarray
    gap: float
    points: np.ndarray
    target_pdf: np.ndarray
    source_pdf: np.ndarray
    ridged: bool = False

    def objective(self, lam) -> float:
        M = len(self.points)
        A = self.source_pdf.T @ self.source_pdf / M
        b = self.source_pdf.T @ self.target_pdf / M
        return qp_objective(A, b, np.asarray(lam, float))


def fit_from_pdfs(p_target, P_sources, points=None) -> MixtureFit:
    P = np.atleast_2d(np.asarray(P_sources, float))
    M = len(p_target)
    A = P.T @ P / M
    b = P.T @ p_target / M
    lam, ridged = solve_simplex_qp(A, b)
    return MixtureFit(lam, gap_from_pdfs(p_target, P, lam), points,
                      np.asarray(p_target, float), P, ridged)


def fit_weights(target, sources, M: int = 16, rng: np.random.Generator | None = None,
                points=None) -> MixtureFit:
    """Fit simplex weights on M points drawn from the target."""
    S = len(sources)
    if S < 1 or M < S:
        raise ValueError("need at least one source and M >= number of sources")
    rng = rng if rng is not None else np.random.default_rng()
    if points is None:
        points = target.sample(M, rng)
    p_t, P = _pdfs(target, sources, points)
    return fit_from_pdfs(p_t, P, points)


@dataclass
class GapSummary:
    median: float
    q1: float
    q3: float
    values: np.ndarray


def baseline_gap(target, sources, M: int = 16, trials: int = 200,
                 rng: np.random.Generator | None = None, points=None) -> GapSummary:
    """Gap at weights drawn uniformly on the simplex (flat Dirichlet).

    Points are drawn before the weights, so with a shared seed this uses the
    same evaluation points as ``fit_weights``.
    """
    if trials < 30:
        raise ValueError("need at least 30 trials")
    rng = rng if rng is not None else np.random.default_rng()
    if points is None:
        points = target.sample(M, rng)
    p_t, P = _pdfs(target, sources, points)
    return _baseline_from_pdfs(p_t, P, trials, rng)


def _baseline_from_pdfs(p_t, P, trials, rng):
    lams = rng.dirichlet(np.ones(P.shape[1]), size=trials)
    if P.shape[1] == 1:
        lams = np.ones_like(lams)  # the simplex is a point; keep it exact
    vals = np.array([gap_from_pdfs(p_t, P, lam) for lam in lams])
    q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
    return GapSummary(float(med), float(q1), float(q3), vals)


def bootstrap_gaps(target, sources, M: int, n_boot: int, rng) -> np.ndarray:
    """Fitted gaps over independently re-drawn evaluation points."""
    return np.array([fit_weights(target, sources, M, rng).gap for _ in range(n_boot)])


# Disjoint weather regions for the sweep harness. Sources split fog density
# and keep precipitation low; the out-of-ODD region is heavy precipitation.
SOURCE_REGIONS = (
    {"fog_density": (0.0, 30.0), "precipitation": (0.0, 50.0)},
    {"fog_density": (35.0, 65.0), "precipitation": (0.0, 50.0)},
    {"fog_density": (70.0, 100.0), "precipitation": (0.0, 50.0)},
)
OUT_REGION = {"precipitation": (60.0, 100.0)}
SOURCE_SIZES = (27, 21, 26)
OUT_SIZE = 176
IN_WEIGHTS = (0.2, 0.3, 0.5)


def region_bags(space, seed: int, source_sizes=SOURCE_SIZES, out_size=OUT_SIZE,
                source_regions=SOURCE_REGIONS, out_region=OUT_REGION):
    """Equally weighted bags simulated uniformly inside each region."""
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(source_regions) + 1)]
    sources = [ObservationBag.uniform(generate_region(space, n, s, reg).features)
               for n, s, reg in zip(source_sizes, seeds, source_regions)]
    out = ObservationBag.uniform(generate_region(space, out_size, seeds[-1], out_region).features)
    return sources, out


def target_bag(source_bags, in_weights, out_bag, eta: float, rng) -> ObservationBag:
    """(1 - eta) * sum_k lam_k B_k  +  eta * (out-ODD images, uniform random weights)."""
    feats, weights = [], []
    for bag, lam in zip(source_bags, in_weights):
        w = (1.0 - eta) * lam / len(bag)
        if w > 0:
            feats.append(bag.features)
            weights.append(np.full(len(bag), w))
    u = rng.uniform(size=len(out_bag))
    if eta > 0:
        feats.append(out_bag.features)
        weights.append(eta * u / u.sum())
    return ObservationBag(np.vstack(feats), np.concatenate(weights))


@dataclass
class SweepResult:
    etas: np.ndarray
    reps: int
    eta: np.ndarray = field(default=None)
    rep: np.ndarray = field(default=None)
    d_e: np.ndarray = field(default=None)
    delta: np.ndarray = field(default=None)
    baseline_median: np.ndarray = field(default=None)
    threshold: float = float("nan")
    in_odd_gaps: np.ndarray = field(default=None)

    def median(self, column: str, eta: float) -> float:
        sel = np.isclose(self.eta, eta)
        return float(np.median(getattr(self, column)[sel]))

    def flagged(self) -> np.ndarray:
        return self.delta > self.threshold

    def detection_rate(self, eta: float) -> float:
        sel = np.isclose(self.eta, eta)
        return float(np.mean(self.flagged()[sel]))


def noise_sweep(flow, source_bags, in_weights, out_bag, etas=None, reps: int = 30,
                M: int = 16, rng: np.random.Generator | None = None,
                baseline_trials: int = 50, n_boot: int = 50,
                quantile: float = 95.0) -> SweepResult:
    """Fit mixture weights for targets contaminated by a proportion eta of
    out-of-ODD observations; also derive the in-ODD gap threshold."""
    etas = np.linspace(0.0, 1.0, 11) if etas is None else np.asarray(etas, float)
    if np.any((etas < 0) | (etas > 1)) or reps < 1:
        raise ValueError("etas must lie in [0, 1] and reps >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    base = int(rng.integers(2 ** 62))
    lam_true = np.asarray(in_weights, float)
    sources = [characterize(flow, b) for b in source_bags]

    in_target = characterize(flow, target_bag(source_bags, lam_true, out_bag, 0.0,
                                              np.random.default_rng([base, 0])))
    in_gaps = bootstrap_gaps(in_target, sources, M, n_boot,
                             np.random.default_rng([base, 1]))
    threshold = float(np.percentile(in_gaps, quantile))

    rows = []
    for i, eta in enumerate(etas):
        for r in range(reps):
            job = np.random.default_rng([base, 2, i, r])
            target = characterize(flow, target_bag(source_bags, lam_true, out_bag, eta, job))
            points = target.sample(M, job)
            p_t, P = _pdfs(target, sources, points)
            fit = fit_from_pdfs(p_t, P, points)
            base_gap = _baseline_from_pdfs(p_t, P, baseline_trials, job)
            rows.append((eta, r, float(np.linalg.norm(fit.weights - lam_true)),
                         fit.gap, base_gap.median))
    arr = np.array(rows)
    return SweepResult(etas, reps, arr[:, 0], arr[:, 1].astype(int), arr[:, 2],
                       arr[:, 3], arr[:, 4], threshold, in_gaps)
