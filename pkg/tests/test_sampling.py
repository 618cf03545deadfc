"""Tests for distribution specs, seeded draws, and sample-set plumbing."""

import pickle

import numpy as np
import pytest
from scipy import stats

from pulsetrain.dynamics import ErrorModel
from pulsetrain.sampling import (
    Beta,
    Exponential,
    Gaussian,
    SampleFactory,
    SampleSet,
    Uniform,
    draw,
    empirical_moments,
    spec_from_dict,
    spec_to_dict,
)

ALL_SPECS = [
    Uniform(-0.3, 0.3),
    Gaussian(mean=0.1, variance=0.02),
    Exponential(rate=12.0, offset=0.05, sign=-1),
    Beta(alpha=2.0, beta=5.0, lo=-0.2, hi=0.4),
    Gaussian(mean=0.0, variance=0.05, truncate=(-0.1, 0.3)),
]


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    lambda: Uniform(0.3, -0.3),
    lambda: Uniform(0.0, 0.0),
    lambda: Gaussian(mean=0.0, variance=0.0),
    lambda: Gaussian(mean=0.0, variance=-1.0),
    lambda: Exponential(rate=0.0),
    lambda: Exponential(rate=1.0, sign=2),
    lambda: Beta(alpha=0.0, beta=1.0),
    lambda: Beta(alpha=1.0, beta=-2.0),
    lambda: Beta(alpha=1.0, beta=1.0, lo=1.0, hi=0.0),
    lambda: Uniform(0.0, 1.0, truncate=(0.5, 0.5)),
])
def test_invalid_spec_parameters_raise(bad):
    with pytest.raises(ValueError):
        bad()


# ---------------------------------------------------------------------------
# Draws
# ---------------------------------------------------------------------------

def test_draw_shapes_and_labels():
    s = draw(Uniform(-0.3, 0.3), 100, seed=1)
    assert s.values.shape == (100, 1)
    assert s.size == 100 and s.dimension == 1
    assert np.all(s.labels == 1.0)


def test_draw_is_deterministic_per_seed():
    a = draw(Gaussian(0.1, 0.02), 500, seed=42)
    b = draw(Gaussian(0.1, 0.02), 500, seed=42)
    c = draw(Gaussian(0.1, 0.02), 500, seed=43)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_draw_accepts_seed_sequence_children():
    root = np.random.SeedSequence(7)
    kids = root.spawn(2)
    a = draw(Uniform(0.0, 1.0), 200, seed=kids[0])
    b = draw(Uniform(0.0, 1.0), 200, seed=kids[1])
    again = draw(Uniform(0.0, 1.0), 200, seed=np.random.SeedSequence(7).spawn(2)[0])
    assert not np.array_equal(a.values, b.values)
    assert np.array_equal(a.values, again.values)


def test_draw_multidimensional_requires_model():
    with pytest.raises(ValueError):
        draw(Uniform(-0.1, 0.1), 10, dim=3, seed=0)
    s = draw(Uniform(-0.1, 0.1), 10, dim=3, seed=0,
             model=ErrorModel.time_varying(3))
    assert s.values.shape == (10, 3)
    assert s.dimension == 3


def test_draw_validates_count_dim_and_model():
    with pytest.raises(ValueError):
        draw(Uniform(0.0, 1.0), 0, seed=0)
    with pytest.raises(ValueError):
        draw(Uniform(0.0, 1.0), 5, dim=0, seed=0)
    with pytest.raises(ValueError):
        draw(Uniform(0.0, 1.0), 5, dim=2, seed=0, model=ErrorModel.pulse_area())


def test_uniform_draws_stay_in_interval():
    s = draw(Uniform(-0.3, 0.3), 10_000, seed=3)
    assert s.values.min() >= -0.3
    assert s.values.max() <= 0.3


def test_uniform_moments():
    # var of U(-0.3, 0.3) is 0.6^2/12 = 0.03
    s = draw(Uniform(-0.3, 0.3), 50_000, seed=5)
    mean, var = empirical_moments(s)
    assert mean[0] == pytest.approx(0.0, abs=0.005)
    assert var[0] == pytest.approx(0.03, rel=0.05)


def test_uniform_passes_ks_test():
    s = draw(Uniform(0.0, 1.0), 100_000, seed=11)
    result = stats.kstest(s.values[:, 0], "uniform")
    assert result.pvalue > 0.01


def test_gaussian_mean_within_three_sigma():
    spec = Gaussian(mean=0.1, variance=0.02)
    s = draw(spec, 5000, seed=13)
    mean, var = empirical_moments(s)
    assert abs(mean[0] - 0.1) <= 3 * np.sqrt(0.02 / 5000)
    assert var[0] == pytest.approx(0.02, rel=0.1)


def test_exponential_support_and_mean():
    spec = Exponential(rate=10.0, offset=0.05, sign=-1)
    s = draw(spec, 40_000, seed=17)
    assert s.values.max() <= 0.05
    mean, _ = empirical_moments(s)
    assert mean[0] == pytest.approx(0.05 - 0.1, abs=0.005)


def test_beta_rescaled_support_and_mean():
    spec = Beta(alpha=2.0, beta=5.0, lo=-0.2, hi=0.4)
    s = draw(spec, 40_000, seed=19)
    assert s.values.min() >= -0.2
    assert s.values.max() <= 0.4
    mean, _ = empirical_moments(s)
    assert mean[0] == pytest.approx(-0.2 + 0.6 * 2.0 / 7.0, abs=0.005)


def test_truncation_clips_by_rejection():
    spec = Gaussian(mean=0.0, variance=1.0, truncate=(0.0, 0.5))
    s = draw(spec, 20_000, seed=23)
    assert s.values.min() >= 0.0
    assert s.values.max() <= 0.5
    # restricted shape, not clamped: no mass piles up at the edges
    edge = np.mean(np.abs(s.values - 0.5) < 1e-6)
    assert edge < 1e-3


def test_truncation_with_no_mass_raises():
    spec = Uniform(0.0, 1.0, truncate=(2.0, 3.0))
    with pytest.raises(ValueError):
        draw(spec, 10, seed=0)


def test_truncated_draws_remain_deterministic():
    spec = Exponential(rate=5.0, truncate=(0.0, 0.2))
    a = draw(spec, 1000, seed=29)
    b = draw(spec, 1000, seed=29)
    assert np.array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# SampleSet plumbing
# ---------------------------------------------------------------------------

def test_sample_set_validates_inputs():
    model = ErrorModel.pulse_area()
    with pytest.raises(ValueError):
        SampleSet(values=np.zeros((3, 1)), labels=np.ones(2),
                  spec=Uniform(0, 1), seed=None, model=model)
    with pytest.raises(ValueError):
        SampleSet(values=np.zeros((3, 2)), labels=np.ones(3),
                  spec=Uniform(0, 1), seed=None, model=model)
    with pytest.raises(ValueError):
        SampleSet(values=np.zeros((3, 1)), labels=np.full(3, 0.5),
                  spec=Uniform(0, 1), seed=None, model=model)


def test_sample_set_values_read_only():
    s = draw(Uniform(0.0, 1.0), 10, seed=0)
    with pytest.raises(ValueError):
        s.values[0, 0] = 2.0


def test_spec_dict_round_trip():
    for spec in ALL_SPECS:
        assert spec_from_dict(spec_to_dict(spec)) == spec
    with pytest.raises(ValueError):
        spec_from_dict({"kind": "cauchy"})


def test_sample_set_dict_round_trip_is_bit_exact():
    s = draw(Gaussian(0.1, 0.02, truncate=(-0.2, 0.4)), 257, seed=31)
    back = SampleSet.from_dict(s.to_dict())
    assert np.array_equal(back.values, s.values)
    assert back.spec == s.spec
    assert back.model == s.model


def test_sample_set_round_trip_multidimensional():
    s = draw(Uniform(-0.1, 0.1), 20, dim=2, seed=37,
             model=ErrorModel.area_and_detuning())
    back = SampleSet.from_dict(s.to_dict())
    assert np.array_equal(back.values, s.values)
    assert back.model == s.model


def test_seed_sequence_provenance_round_trip():
    seed = np.random.SeedSequence(99, spawn_key=(0, 4))
    s = draw(Uniform(0.0, 1.0), 50, seed=seed)
    back = SampleSet.from_dict(s.to_dict())
    redrawn = draw(back.spec, 50, seed=back.seed)
    assert np.array_equal(redrawn.values, s.values)


# ---------------------------------------------------------------------------
# Factories and moments
# ---------------------------------------------------------------------------

def test_sample_factory_matches_draw_and_pickles():
    factory = SampleFactory(spec=Uniform(-0.3, 0.3), count=128)
    seed = np.random.SeedSequence(5, spawn_key=(0, 2))
    direct = draw(Uniform(-0.3, 0.3), 128, seed=seed)
    assert np.array_equal(factory(2, seed).values, direct.values)
    clone = pickle.loads(pickle.dumps(factory))
    assert np.array_equal(clone(2, seed).values, direct.values)


def test_sample_factory_with_model():
    model = ErrorModel.time_varying(4)
    factory = SampleFactory(spec=Gaussian(0.1, 0.02), count=16, model=model)
    s = factory(0, 123)
    assert s.values.shape == (16, 4)
    assert s.model == model


def test_empirical_moments_unbiased_variance():
    s = draw(Uniform(0.0, 1.0), 100, seed=41)
    mean, var = empirical_moments(s)
    assert mean.shape == var.shape == (1,)
    assert var[0] == pytest.approx(np.var(s.values[:, 0], ddof=1))
    single = SampleSet(values=np.zeros((1, 1)), labels=np.ones(1),
                       spec=Uniform(0, 1), seed=None,
                       model=ErrorModel.pulse_area())
    with pytest.raises(ValueError):
        empirical_moments(single)
