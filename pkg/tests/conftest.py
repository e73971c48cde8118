import numpy as np
import pytest

from domainchar.flow import ConditionalFlow
from domainchar.params import ParamSpace


def random_flow(dim=2, context_dim=2, num_layers=4, hidden=(8,), num_bins=6,
                seed=0, scale=0.3, space=None):
    """Flow with every parameter perturbed away from the identity init."""
    rng = np.random.default_rng(seed)
    space = space or ParamSpace.box([f"t{i}" for i in range(dim)], -1.0, 1.0)
    flow = ConditionalFlow(space, context_dim, num_layers, hidden, num_bins, rng=rng)
    for p in flow.parameters():
        p += scale * rng.normal(size=p.shape)
    return flow


class GaussianMixtureDensity:
    """Closed-form mixture of isotropic Gaussians exposing log_prob/sample."""

    def __init__(self, means, sigmas, weights):
        self.means = np.atleast_2d(np.asarray(means, float))
        self.sigmas = np.asarray(sigmas, float)
        self.weights = np.asarray(weights, float) / np.sum(weights)
        self.dim = self.means.shape[1]

    def log_prob(self, theta):
        theta = np.atleast_2d(theta)
        d2 = ((theta[:, None, :] - self.means[None]) ** 2).sum(-1)
        comp = (-0.5 * d2 / self.sigmas ** 2 - self.dim * np.log(self.sigmas)
                - 0.5 * self.dim * np.log(2 * np.pi))
        m = comp.max(axis=1, keepdims=True)
        return (m + np.log(np.sum(self.weights * np.exp(comp - m), axis=1, keepdims=True)))[:, 0]

    def sample(self, n, rng):
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.means[idx] + self.sigmas[idx, None] * rng.standard_normal((n, self.dim))

    def sample_and_log_prob(self, n, rng):
        s = self.sample(n, rng)
        return s, self.log_prob(s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting: one PASS/FAIL line per criterion -------------------

ACCEPTANCE_DETAILS: dict = {}
_ACCEPTANCE_OUTCOMES: dict = {}


@pytest.fixture
def detail(request):
    """Record human-readable measurements for the running acceptance test."""
    key = request.node.name

    def note(text):
        ACCEPTANCE_DETAILS.setdefault(key, []).append(text)
    return note


def _criterion(nodeid):
    name = nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" in nodeid and name.startswith("test_criterion_"):
        return name
    return None


def pytest_runtest_logreport(report):
    name = _criterion(report.nodeid)
    if name is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE_OUTCOMES[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_OUTCOMES, key=lambda n: int(n.split("_")[2])):
        status = "PASS" if _ACCEPTANCE_OUTCOMES[name] == "passed" else "FAIL"
        number = name.split("_")[2]
        info = "; ".join(ACCEPTANCE_DETAILS.get(name, []))
        label = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {number}: {status}  {label}"
                                    + (f"  [{info}]" if info else ""))
