import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import random_flow
from domainchar.evaluation import (CORNER_LEVELS, box_summary, corner_data, coverage_curve,
                                   expected_coverage, grid_hdr_thresholds, hdr_threshold,
                                   pi_statistic, ppc, rank_data)
from domainchar.flow import ConditionalFlow
from domainchar.params import ParamSpace, default_space
from domainchar.simulator import generate_dataset


def gaussian_flow(dim=1, context_dim=1):
    """Identity-initialised flow on a [-1, 1] box: exactly N(0, I)."""
    space = ParamSpace.box([f"t{i}" for i in range(dim)], -1.0, 1.0)
    return ConditionalFlow(space, context_dim, num_layers=2, hidden=(4,), num_bins=4,
                           rng=np.random.default_rng(0))


class Narrowed:
    """Model-space rescaling of a flow by ``s`` (s < 1 means overconfident)."""

    def __init__(self, flow, s):
        self.flow, self.s = flow, s
        self.space = flow.space

    def log_prob(self, theta, context):
        theta = np.atleast_2d(theta)
        return self.flow.log_prob(theta / self.s, context) - theta.shape[1] * np.log(self.s)

    def sample_and_log_prob(self, context, n, rng):
        s, _ = self.flow.sample_and_log_prob(context, n, rng)
        s = s * self.s
        return s, self.log_prob(s, context)


class PointMass:
    def __init__(self, w):
        self.w = np.asarray(w, float)

    def sample(self, context, n, rng):
        return np.tile(self.w, (n, 1))


def self_pairs(flow, n_pairs, rng, context_dim=2):
    ctx = rng.normal(size=(n_pairs, context_dim))
    thetas = np.concatenate([flow.sample(c, 1, rng) for c in ctx])
    return thetas, ctx


def test_hdr_gaussian_threshold_at_one_sigma():
    flow = gaussian_flow()
    est = hdr_threshold(flow, np.zeros(1), 0.6827, n=100_000, rng=np.random.default_rng(0))
    z = np.sqrt(-2 * est.threshold - np.log(2 * np.pi))
    assert abs(z - 1.0) <= 0.02


def test_hdr_membership_fraction_and_gamma_to_one():
    flow = random_flow(seed=1)
    est = hdr_threshold(flow, np.zeros(2), 0.8, n=1000, rng=np.random.default_rng(1))
    assert abs(est.contains(est.log_densities).mean() - 0.8) <= 1 / 1000 + 1e-12
    high = hdr_threshold(flow, np.zeros(2), 0.9999, n=1000, rng=np.random.default_rng(1))
    assert high.threshold == high.log_densities.min()


def test_hdr_unconditional_distribution():
    post = random_flow(seed=2).given(np.ones(2))
    est = hdr_threshold(post, None, 0.5, n=500, rng=np.random.default_rng(0))
    assert est.samples.shape == (500, 2)


@pytest.mark.parametrize("gamma,n", [(0.0, 500), (1.0, 500), (0.5, 99)])
def test_hdr_preconditions(gamma, n):
    with pytest.raises(ValueError):
        hdr_threshold(gaussian_flow(), np.zeros(1), gamma, n=n)


def test_self_calibration_on_diagonal():
    flow = random_flow(seed=3)
    rng = np.random.default_rng(4)
    thetas, ctx = self_pairs(flow, 2000, rng)
    curve = expected_coverage(flow, thetas, ctx, n=512, rng=rng)
    assert curve.coverage[0] == 0.0 and curve.coverage[-1] == 1.0
    assert curve.is_monotone()
    assert curve.max_deviation() <= 0.03


def test_narrowed_flow_is_overconfident():
    flow = random_flow(seed=5)
    rng = np.random.default_rng(6)
    thetas, ctx = self_pairs(flow, 500, rng)
    curve = expected_coverage(Narrowed(flow, 0.6), thetas, ctx, n=512, rng=rng)
    inner = curve.coverage[1:-1] - curve.levels[1:-1]
    assert np.all(inner < 0)


def test_coverage_needs_enough_pairs():
    flow = gaussian_flow()
    with pytest.raises(ValueError):
        expected_coverage(flow, np.zeros((50, 1)), np.zeros((50, 1)))


def test_coverage_high_level_dominates_median():
    flow = random_flow(seed=7)
    rng = np.random.default_rng(0)
    thetas, ctx = self_pairs(flow, 200, rng)
    ranks = rank_data(flow, thetas, ctx, 256, rng)
    curve = coverage_curve(ranks, [0.5, 1 - 1 / 256])
    assert curve.coverage[1] >= curve.coverage[0]


def test_pi_at_mode_is_one():
    flow = gaussian_flow(dim=2)
    assert pi_statistic(flow, np.zeros(2), np.zeros(1), n=1000,
                        rng=np.random.default_rng(0)) == 1.0


def test_pi_uniform_for_self_draws():
    flow = random_flow(seed=8)
    rng = np.random.default_rng(9)
    thetas, ctx = self_pairs(flow, 2000, rng)
    pis = rank_data(flow, thetas, ctx, 256, rng).pi()
    # continuous-rank correction: pi takes values k/n
    assert stats.kstest(pis - 0.5 / 256, "uniform").pvalue > 0.01


def test_pi_statistic_matches_rank_data():
    flow = random_flow(seed=10)
    theta, x = np.array([0.2, -0.4]), np.array([1.0, 0.0])
    a = pi_statistic(flow, theta, x, n=300, rng=np.random.default_rng(3))
    b = rank_data(flow, theta[None], x[None], 300, np.random.default_rng(3)).pi()[0]
    assert a == b


def test_coverage_pi_duality():
    flow = random_flow(seed=11)
    rng = np.random.default_rng(12)
    thetas, ctx = self_pairs(flow, 100, rng)
    n = 400
    ranks = rank_data(flow, thetas, ctx, n, rng)
    pi = ranks.pi()
    for gamma in np.linspace(0.05, 0.95, 19):
        inside = ranks.covered(gamma)
        assert np.all((1 - pi[inside]) <= gamma + 1 / n)
        assert np.all((1 - pi[~inside]) >= gamma - 1 / n)


def test_rank_statistics_deterministic():
    flow = random_flow(seed=13)
    th, x = np.zeros((3, 2)), np.ones((3, 2))
    a = rank_data(flow, th, x, 128, np.random.default_rng(1))
    b = rank_data(flow, th, x, 128, np.random.default_rng(1))
    assert np.array_equal(a.sample_log_probs, b.sample_log_probs)


def test_box_summary():
    s = box_summary([1, 2, 3, 4, 100])
    assert (s["median"], s["q1"], s["q3"]) == (3.0, 2.0, 4.0)
    assert s["whisker_low"] == 1.0 and s["whisker_high"] == 4.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_box_summary_ordering(values):
    s = box_summary(values)
    assert s["whisker_low"] <= s["q1"] + 1e-9
    assert s["q1"] <= s["median"] <= s["q3"]
    assert s["q3"] <= s["whisker_high"] + 1e-9


def test_ppc_point_mass_gives_zero_distances():
    space = default_space()
    ds = generate_dataset(space, 10, seed=3)
    res = ppc(PointMass(ds.theta[4]), ds, 4, n=20, rng=np.random.default_rng(0))
    assert np.all(res.distances == 0.0)
    assert res.prior_distances.shape == (20,) and np.median(res.prior_distances) > 0


def test_corner_gaussian_marginals_and_masses():
    post = gaussian_flow(dim=2).given(np.zeros(1))
    cd = corner_data(post, resolution=64, n=100_000, rng=np.random.default_rng(0),
                     ranges=[(-5, 5), (-5, 5)])
    for edges, m in zip(cd.edges, cd.marginals):
        assert abs(m.sum() - 1.0) <= 1e-12
        c = 0.5 * (edges[1:] + edges[:-1])
        mu = np.sum(m * c)
        sd = np.sqrt(np.sum(m * (c - mu) ** 2))
        assert abs(np.sum(m * ((c - mu) / sd) ** 3)) < 0.1
    assert abs(cd.pairs[(1, 0)].sum() - 1.0) <= 1e-12


def test_corner_one_sigma_area_matches_chi2():
    post = gaussian_flow(dim=2).given(np.zeros(1))
    cd = corner_data(post, resolution=64, n=100_000, rng=np.random.default_rng(1),
                     ranges=[(-4, 4), (-4, 4)])
    expected = np.pi * stats.chi2.ppf(0.6827, 2)
    assert abs(cd.region_area(1, 0, 0.6827) / expected - 1.0) <= 0.05
    areas = [cd.region_area(1, 0, g) for g in CORNER_LEVELS]
    assert areas[0] < areas[1] < areas[2]


def test_corner_resolution_precondition():
    with pytest.raises(ValueError):
        corner_data(gaussian_flow(dim=2).given(np.zeros(1)), resolution=16)


def test_grid_hdr_thresholds_mass():
    rng = np.random.default_rng(0)
    g = rng.random((20, 20))
    g /= g.sum()
    for level, t in zip(CORNER_LEVELS, grid_hdr_thresholds(g, CORNER_LEVELS)):
        assert g[g >= t].sum() >= level - 1e-12
        assert g[g > t].sum() < level
