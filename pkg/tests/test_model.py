import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scorelab import (
    Categorical,
    ClassLabel,
    Ensemble,
    MultivariateNormal,
    Normal,
    ScoreValue,
    ValidationError,
    forecast_cdf,
    forecast_sample,
    parse_forecast,
    parse_observation,
    serialize_forecast,
)
from scorelab.model import NumericFailure


class TestParsing:
    def test_normal_record(self):
        f = parse_forecast('{"type":"normal","mu":0,"sigma":1}')
        assert isinstance(f, Normal) and f.mu == 0.0 and f.sigma == 1.0

    def test_simplex_violation_rejected(self):
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"categorical","probs":[0.7,0.4]}')

    def test_no_silent_renormalization(self):
        # off by much more than the tolerance: must reject, not rescale
        with pytest.raises(ValidationError):
            Categorical(np.array([0.5, 0.4]))

    def test_ensemble_default_uniform_weights(self):
        f = parse_forecast('{"type":"ensemble","members":[0,1]}')
        assert isinstance(f, Ensemble)
        assert np.array_equal(f.weights, [0.5, 0.5])

    def test_empty_ensemble_rejected(self):
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"ensemble","members":[]}')

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"normal","mu":0,"sigma":0}')

    def test_unknown_type_and_keys(self):
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"poisson","lam":1}')
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"normal","mu":0,"sigma":1,"nu":3}')

    def test_malformed_json(self):
        with pytest.raises(ValidationError):
            parse_forecast("{not json")

    def test_mvnormal_requires_spd(self):
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"mvnormal","mean":[0,0],"cov":[[1,1],[1,1]]}')
        with pytest.raises(ValidationError):
            parse_forecast('{"type":"mvnormal","mean":[0,0],"cov":[[1,0.5],[0.2,1]]}')

    def test_nan_rejected_everywhere(self):
        with pytest.raises(ValidationError):
            Ensemble(np.array([0.0, np.nan]))
        with pytest.raises(ValidationError):
            parse_observation("null")

    def test_observations(self):
        assert parse_observation("3.5") == 3.5
        assert np.array_equal(parse_observation("[1, 2]"), [1.0, 2.0])
        assert parse_observation('{"class": 2}') == ClassLabel(2)
        with pytest.raises(ValidationError):
            parse_observation('{"class": -1}')


@st.composite
def forecast_records(draw):
    kind = draw(st.sampled_from(["categorical", "ensemble", "normal"]))
    finite = st.floats(-50, 50, allow_nan=False)
    if kind == "normal":
        return {"type": "normal", "mu": draw(finite), "sigma": draw(st.floats(0.01, 30))}
    if kind == "ensemble":
        members = draw(st.lists(finite, min_size=1, max_size=6))
        return {"type": "ensemble", "members": members}
    n = draw(st.integers(2, 5))
    raw = draw(st.lists(st.floats(0.01, 1), min_size=n, max_size=n))
    probs = (np.array(raw) / np.sum(raw)).tolist()
    probs[-1] = 1.0 - sum(probs[:-1])
    return {"type": "categorical", "probs": probs}


@settings(max_examples=200, deadline=None)
@given(forecast_records())
def test_parse_serialize_roundtrip(record):
    f = parse_forecast(json.dumps(record))
    once = serialize_forecast(f)
    twice = serialize_forecast(parse_forecast(json.dumps(once)))
    assert once == twice


class TestCdf:
    def test_step_midpoint(self):
        f = Ensemble(np.array([0.0, 1.0]))
        assert forecast_cdf(f, 0.5) == 0.5
        assert forecast_cdf(f, -1.0) == 0.0
        assert forecast_cdf(f, 1.0) == 1.0  # right-continuous at the top atom

    def test_normal_symmetry(self):
        assert forecast_cdf(Normal(0, 1), 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_categorical_atoms(self):
        f = Categorical(np.array([0.2, 0.3, 0.5]))
        assert forecast_cdf(f, -0.5) == 0.0
        assert forecast_cdf(f, 0.0) == pytest.approx(0.2)
        assert forecast_cdf(f, 1.7) == pytest.approx(0.5)

    def test_monotone_on_grid(self, rng):
        for f in (
            Ensemble(rng.normal(size=7)),
            Normal(0.3, 2.0),
            Categorical(np.array([0.1, 0.4, 0.5])),
        ):
            grid = np.sort(rng.uniform(-5, 5, size=1000))
            vals = forecast_cdf(f, grid)
            assert np.all(np.diff(vals) >= 0.0)
            assert np.all((vals >= 0.0) & (vals <= 1.0))

    def test_density_oracle_has_no_cdf(self):
        from scorelab import normal_oracle

        with pytest.raises(ValidationError):
            forecast_cdf(normal_oracle(), 0.0)


class TestSampling:
    def test_point_mass(self):
        f = Categorical(np.array([1.0, 0.0]))
        assert np.array_equal(forecast_sample(f, 5, seed=123), np.zeros(5))

    def test_law_of_large_numbers(self):
        draws = forecast_sample(Normal(0, 1), 10_000, seed=1)
        assert abs(float(np.mean(draws))) < 0.05

    def test_determinism_same_seed(self):
        f = Ensemble(np.arange(5.0))
        a = forecast_sample(f, 100, seed=7)
        b = forecast_sample(f, 100, seed=7)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, forecast_sample(f, 100, seed=8))

    def test_support(self):
        f = Ensemble(np.array([1.0, 2.0, 4.0]))
        draws = forecast_sample(f, 200, seed=3)
        assert set(np.unique(draws)) <= {1.0, 2.0, 4.0}

    def test_m_zero_rejected(self):
        with pytest.raises(ValidationError):
            forecast_sample(Normal(0, 1), 0, seed=0)

    def test_mvnormal_shape(self):
        f = MultivariateNormal(np.zeros(2), np.eye(2))
        assert forecast_sample(f, 9, seed=0).shape == (9, 2)


class TestScoreValue:
    def test_nan_is_hard_error(self):
        with pytest.raises(NumericFailure):
            ScoreValue(float("nan"), "closed-form")

    def test_neg_inf_forbidden(self):
        with pytest.raises(NumericFailure):
            ScoreValue(-math.inf, "closed-form")

    def test_pos_inf_allowed(self):
        assert ScoreValue(math.inf, "closed-form").value == math.inf

    def test_se_only_for_monte_carlo(self):
        with pytest.raises(ValidationError):
            ScoreValue(1.0, "closed-form", se=0.1)
        with pytest.raises(ValidationError):
            ScoreValue(1.0, "monte-carlo")
