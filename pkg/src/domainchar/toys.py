"""Analytic benchmark: a linear-Gaussian simulator with a closed-form posterior."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamSpace


@dataclass
class LinearGaussian:
    """theta ~ N(0, I), x = A theta + sigma * eps.

    The box only fixes model coordinates (identity on [-1, 1]); the prior
    itself is Gaussian and unbounded.
    """

    A: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.5], [-0.3, 0.8],
                                                            [0.4, 0.2]]))
    sigma: float = 0.3

    def __post_init__(self):
        self.A = np.asarray(self.A, float)
        d = self.A.shape[1]
        self.cov = np.linalg.inv(np.eye(d) + self.A.T @ self.A / self.sigma ** 2)
        self._chol = np.linalg.cholesky(self.cov)
        self._prec = np.linalg.inv(self.cov)
        self._logdet = np.linalg.slogdet(2 * np.pi * self.cov)[1]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def context_dim(self) -> int:
        return self.A.shape[0]

    def space(self) -> ParamSpace:
        return ParamSpace.box([f"theta{i}" for i in range(self.dim)], -1.0, 1.0)

    def simulate(self, n: int, rng: np.random.Generator):
        theta = rng.standard_normal((n, self.dim))
        x = theta @ self.A.T + self.sigma * rng.standard_normal((n, self.context_dim))
        return theta, x

    def posterior_mean(self, x):
        return np.atleast_2d(x) @ self.A @ self.cov.T / self.sigma ** 2

    def posterior_log_prob(self, theta, x):
        d = np.atleast_2d(theta) - self.posterior_mean(x)
        return -0.5 * np.einsum("ij,jk,ik->i", d, self._prec, d) - 0.5 * self._logdet

    def posterior_sample(self, x, n: int, rng: np.random.Generator):
        return self.posterior_mean(x) + rng.standard_normal((n, self.dim)) @ self._chol.T

    def posterior_entropy(self) -> float:
        return 0.5 * (self._logdet + self.dim)

    def kl_to(self, flow, contexts, n: int, rng: np.random.Generator) -> np.ndarray:
        """Monte Carlo KL(true posterior || flow) per context."""
        out = []
        for x in np.atleast_2d(contexts):
            s = self.posterior_sample(x, n, rng)
            out.append(np.mean(self.posterior_log_prob(s, x) - flow.log_prob(s, x)))
        return np.array(out)
