import numpy as np
import pytest

from moneykin.gof import (dither, exponential_fit_pvalue, gamma_vs_exponential,
                          gaussian_vs_exponential, ks_histogram_exponential,
                          ks_to_exponential, ks_two_sample)


def test_dither_is_seeded_and_in_cell():
    v = np.array([0, 3, 3, 10])
    a, b = dither(v, seed=5), dither(v, seed=5)
    assert np.array_equal(a, b)
    assert ((a >= v) & (a < v + 1)).all()


def test_ks_small_for_true_exponential_sample():
    x = np.random.default_rng(0).exponential(10.0, 50_000)
    d, p = ks_to_exponential(x, 10.0, dither_seed=None)
    assert d < 0.01 and p > 0.01


def test_ks_dither_removes_lattice_artifact():
    """A unit-binned exponential at mean 10 sits ~0.09 away from the
    continuum law raw, but within ~0.02 once continuity-corrected."""
    rng = np.random.default_rng(1)
    geometric = rng.geometric(1.0 / 11.0, 100_000) - 1
    d_raw, _ = ks_to_exponential(geometric, 10.0, dither_seed=None)
    d_cc, _ = ks_to_exponential(geometric, 10.0, dither_seed=0)
    assert d_raw > 0.05
    assert d_cc < 0.025


def test_ks_histogram_matches_piecewise_linear_limit():
    rng = np.random.default_rng(2)
    geometric = rng.geometric(1.0 / 11.0, 200_000) - 1
    counts = np.bincount(geometric, minlength=200)[:200]
    d = ks_histogram_exponential(counts, 0.0, 1.0, 10.0)
    d_sample, _ = ks_to_exponential(geometric, 10.0, dither_seed=3)
    assert d == pytest.approx(d_sample, abs=0.005)


def test_two_sample_ks_on_identical_law():
    rng = np.random.default_rng(3)
    d, p = ks_two_sample(rng.exponential(5, 20_000), rng.exponential(5, 20_000))
    assert p > 0.01


def test_gamma_beats_exponential_on_gamma_data():
    rng = np.random.default_rng(4)
    x = rng.gamma(3.0, 2.0, 50_000)
    scores = gamma_vs_exponential(x, dither_seed=None)
    assert scores["margin"] > 100
    assert scores["shape"] == pytest.approx(3.0, rel=0.05)


def test_gamma_margin_never_negative():
    rng = np.random.default_rng(5)
    x = rng.exponential(3.0, 20_000)
    scores = gamma_vs_exponential(x, dither_seed=None)
    assert scores["margin"] >= 0.0  # the exponential nests inside the gamma
    assert scores["shape"] == pytest.approx(1.0, abs=0.05)


def test_gaussian_vs_exponential_prefers_correct_model():
    rng = np.random.default_rng(6)
    assert gaussian_vs_exponential(rng.normal(50, 2, 10_000),
                                   dither_seed=None)["margin"] > 0
    assert gaussian_vs_exponential(rng.exponential(10, 10_000),
                                   dither_seed=None)["margin"] < 0


def test_bootstrap_pvalue_accepts_true_null_rejects_alternative():
    rng = np.random.default_rng(7)
    d_null, p_null = exponential_fit_pvalue(rng.exponential(4.0, 5_000),
                                            n_boot=100, dither_seed=None)
    assert p_null > 0.01
    d_alt, p_alt = exponential_fit_pvalue(rng.gamma(4.0, 1.0, 5_000),
                                          n_boot=100, dither_seed=None)
    assert p_alt < 0.02
