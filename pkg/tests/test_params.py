import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from domainchar.params import ParamDim, ParamSpace, default_space

PREDICTED = ["cloudiness", "fog_density", "precipitation", "sun_altitude_angle",
             "wind_intensity", "precipitation_deposits"]


def test_default_space_layout():
    space = default_space()
    assert len(space.dims) == 13
    assert space.predicted_names == PREDICTED
    cloud = space.dims[space.index("cloudiness")]
    assert (cloud.lower, cloud.upper, cloud.predicted) == (0.0, 100.0, True)
    az = space.dims[space.index("sun_azimuth_angle")]
    assert (az.lower, az.upper, az.predicted, az.fixed_value) == (0.0, 360.0, False, None)
    fixed = {d.name: d.fixed_value for d in space.dims if d.fixed_value is not None}
    assert fixed == {"fog_distance": 0.75, "fog_falloff": 0.1, "mie_scattering_scale": 0.03,
                     "rayleigh_scattering_scale": 0.033, "scattering_intensity": 1.0,
                     "wetness": 0.0}
    alt = space.dims[space.index("sun_altitude_angle")]
    assert (alt.lower, alt.upper) == (-90.0, 90.0)


@pytest.mark.parametrize("kwargs", [
    dict(name="a", lower=1.0, upper=1.0),
    dict(name="a", lower=0.0, upper=np.inf),
    dict(name="a", lower=0.0, upper=1.0, fixed_value=2.0),
])
def test_param_dim_rejects_bad_bounds(kwargs):
    with pytest.raises(ValueError):
        ParamDim(**kwargs)


def test_prior_means_and_fixed_columns():
    space = default_space()
    s = space.sample_prior(10_000, np.random.default_rng(0))
    for j, d in enumerate(space.dims):
        if d.fixed_value is None:
            mid = 0.5 * (d.lower + d.upper)
            assert abs(s[:, j].mean() - mid) <= 0.02 * d.width
        else:
            assert np.all(s[:, j] == d.fixed_value)
    assert np.all(s[:, space.index("fog_falloff")] == 0.1)


def test_prior_deterministic():
    space = default_space()
    a = space.sample_prior(50, np.random.default_rng(7))
    b = space.sample_prior(50, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_prior_ks_uniform():
    space = default_space()
    s = space.sample_prior(100_000, np.random.default_rng(0))
    for j, d in enumerate(space.dims):
        if d.fixed_value is None:
            p = stats.kstest(s[:, j], "uniform", args=(d.lower, d.width)).pvalue
            assert p > 0.01, d.name


def test_model_coordinates_examples():
    space = default_space()
    w = np.array([50.0, 0.0, 100.0, 90.0, 25.0, 75.0])
    u = space.to_model(w)
    assert u[0] == 0.0 and u[3] == 1.0 and u[1] == -1.0
    assert np.max(np.abs(space.from_model(u) - w)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(arrays(float, 6, elements=st.floats(-1.0, 1.0)))
def test_model_roundtrip_from_unit_cube(u):
    space = default_space()
    assert np.max(np.abs(space.to_model(space.from_model(u)) - u)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(arrays(float, 6, elements=st.floats(0.0, 1.0)))
def test_model_roundtrip_from_box(frac):
    space = default_space()
    w = space.lower + frac * (space.upper - space.lower)
    assert np.max(np.abs(space.from_model(space.to_model(w)) - w)) <= 1e-12


def test_space_dict_roundtrip():
    space = default_space()
    assert ParamSpace.from_dict(space.to_dict()) == space
