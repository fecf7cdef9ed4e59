import numpy as np
import pytest

from mismatchreg.metrics import snr, stable_rank
from mismatchreg.synth import SynthConfig, generate, make_coefficients, make_mismatch, make_rng, model_response


@pytest.mark.parametrize("q", [0, 0.5, 1, 2, 5])
@pytest.mark.parametrize("d,m", [(5, 5), (8, 3), (1, 1)])
def test_coefficient_normalization(q, d, m):
    B = make_coefficients(d, m, q, make_rng(3))
    assert B.shape == (d, m)
    assert abs(np.sum(B**2) - m) < 1e-10
    s = np.linalg.svd(B, compute_uv=False)
    np.testing.assert_allclose(s / s[0], np.arange(1, min(d, m) + 1) ** (-float(q)), rtol=1e-10)


def test_q0_full_stable_rank_and_unit_scalar():
    assert stable_rank(make_coefficients(6, 6, 0, make_rng(1))) == pytest.approx(6, rel=1e-12)
    B = make_coefficients(1, 1, 0, make_rng(2))
    assert abs(B[0, 0]) == pytest.approx(1.0, rel=1e-14)


def test_q1_stable_rank():
    # (1 + 1/4 + 1/9) / 1
    assert stable_rank(make_coefficients(3, 3, 1, make_rng(4))) == pytest.approx(1.3611111111111111, rel=1e-10)


def test_large_q_tends_to_rank_one():
    assert stable_rank(make_coefficients(10, 10, 20, make_rng(4))) == pytest.approx(1.0, abs=1e-10)


def test_mismatch_trivial_cases():
    np.testing.assert_array_equal(make_mismatch(7, 0).theta, np.arange(1, 8))
    gm = make_mismatch(5, 5, missing_frac=1.0, rng=make_rng(1))
    np.testing.assert_array_equal(gm.theta, np.zeros(5))
    np.testing.assert_array_equal(gm.missing, np.arange(5))
    with pytest.raises(ValueError):
        make_mismatch(3, 4)


def test_mismatch_permutation_core():
    gm = make_mismatch(1000, 200, rng=make_rng(10))
    th = gm.theta
    np.testing.assert_array_equal(th[200:], np.arange(201, 1001))
    np.testing.assert_array_equal(np.sort(th[:200]), np.arange(1, 201))
    assert gm.is_permutation()
    assert gm.support.size <= 200


def test_mismatch_extensions():
    gm = make_mismatch(100, 40, missing_frac=0.25, many_to_one_frac=0.25, rng=make_rng(6))
    th = gm.theta
    assert np.sum(th == 0) == 10
    assert set(gm.support) <= set(range(40))
    counts = np.bincount(th[th > 0], minlength=101)
    assert np.sum(counts > 1) >= 1
    # duplicated rows point at predictors used elsewhere
    assert np.sum(counts[1:] - 1 >= 0) >= 1
    assert np.sum(counts[counts > 1] - 1) == 10


def test_generate_noiseless_identity():
    data, truth = generate(SynthConfig(n=50, d=4, sigma=0.0, seed=2))
    np.testing.assert_array_equal(data.Y, data.X @ truth.B_star)


def test_generate_self_consistent():
    cfg = SynthConfig(n=60, d=5, m=4, k_frac=0.3, sigma=0.4, missing_frac=0.2, many_to_one_frac=0.2, seed=77)
    data, truth = generate(cfg)
    Y = model_response(data.X, truth.B_star, truth.theta_star, truth.sigma, truth.noise, truth.X_missing)
    np.testing.assert_array_equal(Y, data.Y)


def test_generate_deterministic_and_seed_sensitive():
    cfg = SynthConfig(n=40, d=3, k_frac=0.2, q=1, sigma=0.1, seed=123)
    a, ta = generate(cfg)
    b, tb = generate(cfg)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.Y, b.Y)
    np.testing.assert_array_equal(ta.B_star, tb.B_star)
    assert ta.theta_star == tb.theta_star
    c, _ = generate(cfg, replication=1)
    assert not np.array_equal(a.X, c.X)


def test_snr_is_inverse_noise_variance():
    data, truth = generate(SynthConfig(n=500, d=15, k_frac=0.2, q=0, sigma=0.1, seed=1))
    assert snr(truth.B_star, 0.1, 15) == pytest.approx(100.0, rel=1e-10)


def test_predictor_moments():
    n, d = 4000, 5
    data, _ = generate(SynthConfig(n=n, d=d, seed=8))
    # 6-sigma Monte-Carlo bands
    assert np.all(np.abs(data.X.mean(axis=0)) < 6 / np.sqrt(n))
    assert np.all(np.abs(data.X.var(axis=0) - 1) < 6 * np.sqrt(2 / n))


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n=10, d=2, k_frac=1.0)
    with pytest.raises(ValueError):
        SynthConfig(n=10, d=2, missing_frac=0.6, many_to_one_frac=0.6)
    assert SynthConfig(n=500, d=15, k_frac=0.2).k == 100
    assert SynthConfig(n=10, d=2).m == 2
