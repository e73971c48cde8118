"""Physical parameter space: bounds, uniform prior, and model coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ParamDim:
    name: str
    lower: float
    upper: float
    fixed_value: float | None = None
    predicted: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower must be < upper")
        if self.fixed_value is not None:
            if not self.lower <= self.fixed_value <= self.upper:
                raise ValueError(f"{self.name}: fixed value outside bounds")
            if self.predicted:
                raise ValueError(f"{self.name}: a fixed dim cannot be predicted")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ParamSpace:
    """Ordered box of physical parameters.

    Only the ``predicted`` dims enter the flow; the rest are nuisance dims
    (free, sampled uniformly) or fixed dims carried through data generation.
    Model coordinates map each predicted dim affinely onto [-1, 1].
    """

    dims: tuple[ParamDim, ...]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("duplicate dim names")
        if not any(d.predicted for d in self.dims):
            raise ValueError("space needs at least one predicted dim")

    @classmethod
    def box(cls, names: Sequence[str], lower, upper) -> "ParamSpace":
        """All-predicted space, handy for toy problems."""
        lower = np.broadcast_to(np.asarray(lower, float), (len(names),))
        upper = np.broadcast_to(np.asarray(upper, float), (len(names),))
        return cls(tuple(ParamDim(n, float(lo), float(hi), predicted=True)
                         for n, lo, hi in zip(names, lower, upper)))

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def predicted_mask(self) -> np.ndarray:
        return np.array([d.predicted for d in self.dims])

    @property
    def predicted_index(self) -> np.ndarray:
        return np.flatnonzero(self.predicted_mask)

    @property
    def predicted_names(self) -> list[str]:
        return [d.name for d in self.dims if d.predicted]

    @property
    def ndim(self) -> int:
        """Number of predicted dims."""
        return int(self.predicted_mask.sum())

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims if d.predicted])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims if d.predicted])

    def index(self, name: str) -> int:
        return self.names.index(name)

    def sample_prior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws over every dim, shape (n, len(dims)); fixed dims are constant."""
        if n < 1:
            raise ValueError("n must be >= 1")
        lo = np.array([d.lower for d in self.dims])
        hi = np.array([d.upper for d in self.dims])
        out = lo + (hi - lo) * rng.random((n, len(self.dims)))
        for j, d in enumerate(self.dims):
            if d.fixed_value is not None:
                out[:, j] = d.fixed_value
        return out

    def predicted(self, full: np.ndarray) -> np.ndarray:
        """Select the predicted columns of a full parameter array."""
        return np.asarray(full)[..., self.predicted_index]

    def contains(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, float)
        return np.all((w >= self.lower) & (w <= self.upper), axis=-1)

    def to_model(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, float)
        return 2.0 * (w - self.lower) / (self.upper - self.lower) - 1.0

    def from_model(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, float)
        return self.lower + 0.5 * (u + 1.0) * (self.upper - self.lower)

    @property
    def log_jacobian(self) -> float:
        """log |d model / d physical|, constant over the box."""
        return float(np.sum(np.log(2.0 / (self.upper - self.lower))))

    def to_dict(self) -> dict:
        return {"dims": [
            {"name": d.name, "lower": d.lower, "upper": d.upper,
             "fixed_value": d.fixed_value, "predicted": d.predicted}
            for d in self.dims]}

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSpace":
        return cls(tuple(ParamDim(**d) for d in data["dims"]))


# Bounds of the fixed dims are nominal; only their fixed value is ever used.
_TABLE = (
    ParamDim("cloudiness", 0.0, 100.0, predicted=True),
    ParamDim("fog_density", 0.0, 100.0, predicted=True),
    ParamDim("precipitation", 0.0, 100.0, predicted=True),
    ParamDim("sun_azimuth_angle", 0.0, 360.0),
    ParamDim("sun_altitude_angle", -90.0, 90.0, predicted=True),
    ParamDim("wind_intensity", 0.0, 100.0, predicted=True),
    ParamDim("precipitation_deposits", 0.0, 100.0, predicted=True),
    ParamDim("fog_distance", 0.0, 100.0, fixed_value=0.75),
    ParamDim("fog_falloff", 0.0, 1.0, fixed_value=0.1),
    ParamDim("mie_scattering_scale", 0.0, 1.0, fixed_value=0.03),
    ParamDim("rayleigh_scattering_scale", 0.0, 1.0, fixed_value=0.033),
    ParamDim("scattering_intensity", 0.0, 1.0, fixed_value=1.0),
    ParamDim("wetness", 0.0, 100.0, fixed_value=0.0),
)


def default_space() -> ParamSpace:
    """The 13 simulator weather parameters, 6 of which are predicted."""
    return ParamSpace(_TABLE)
