import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advtwostage.errors import ArgumentError, DegenerateLeverageError, SingularSystemError
from advtwostage.linmodel import (
    Dataset,
    GroundTruth,
    gen_gaussian_dataset,
    loo_delta,
    loo_deltas,
    make_rng,
    ridge_fit,
    ridge_path,
    sample_theta0,
)


def random_data(seed, n, d):
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((n, d)), rng.standard_normal(n))


# -- generation ---------------------------------------------------------------


def test_zero_noise_response_is_first_column():
    truth = GroundTruth.from_theta([1.0, 0.0], 0.0)
    data = gen_gaussian_dataset(3, 2, truth, seed=5)
    assert np.array_equal(data.y, data.X[:, 0])


def test_same_seed_gives_identical_bytes():
    truth = sample_theta0("spherical", 100, seed=1)
    a = gen_gaussian_dataset(100, 100, truth, seed=(3, 4))
    b = gen_gaussian_dataset(100, 100, truth, seed=(3, 4))
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert ridge_fit(a, 0.2).theta_hat.tobytes() == ridge_fit(b, 0.2).theta_hat.tobytes()


def test_seed_streams_differ():
    assert make_rng((1, 0)).random() != make_rng((1, 1)).random()


def test_large_sample_moments():
    truth = GroundTruth.from_theta(np.ones(5) / np.sqrt(5), 1.0)
    data = gen_gaussian_dataset(10_000, 5, truth, seed=9)
    assert np.all(np.abs(data.X.mean(axis=0)) < 4 / np.sqrt(10_000))
    noise = data.y - data.X @ truth.theta0
    assert abs(noise.var() - 1.0) < 0.1


@pytest.mark.parametrize("n1,d", [(0, 3), (3, 0), (2.5, 3)])
def test_invalid_dimensions(n1, d):
    truth = GroundTruth.from_theta(np.ones(3), 1.0)
    with pytest.raises(ArgumentError):
        gen_gaussian_dataset(n1, d, truth, seed=0)


def test_truth_dimension_mismatch():
    with pytest.raises(ArgumentError):
        gen_gaussian_dataset(4, 3, GroundTruth.from_theta(np.ones(2), 1.0), seed=0)


def test_dataset_shape_checks():
    with pytest.raises(ArgumentError):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ArgumentError):
        Dataset(np.zeros(3), np.zeros(3))


# -- ground truth ---------------------------------------------------------------


def test_ones_over_sqrt_d():
    t = sample_theta0("ones_over_sqrt_d", 4)
    assert np.allclose(t.theta0, 0.5) and t.r2 == pytest.approx(1.0, rel=1e-12)


def test_spherical_norm_on_average():
    r2 = [sample_theta0("spherical", 50, seed=(2, k)).r2 for k in range(200)]
    assert abs(np.mean(r2) - 1.0) < 0.2


def test_spherical_one_dimension():
    t = sample_theta0("spherical", 1, seed=3)
    assert t.theta0.shape == (1,) and t.r2 == t.theta0[0] ** 2


def test_truth_validation():
    with pytest.raises(ArgumentError):
        GroundTruth.from_theta([1.0], -1.0)
    with pytest.raises(ArgumentError):
        sample_theta0("gaussian", 3)
    with pytest.raises(ArgumentError):
        sample_theta0("spherical", 0)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_r2_matches_norm(vals):
    t = GroundTruth.from_theta(vals, 1.0)
    assert t.r2 == pytest.approx(float(np.dot(vals, vals)), rel=1e-12, abs=1e-300)


# -- ridge ----------------------------------------------------------------------


def test_identity_design_ridgeless():
    y = np.array([1.0, -2.0, 3.0])
    assert np.allclose(ridge_fit(Dataset(np.eye(3), y), 0.0).theta_hat, y)


def test_identity_design_with_penalty():
    y = np.array([4.0, -2.0])
    assert np.allclose(ridge_fit(Dataset(np.eye(2), y), 0.5).theta_hat, y / 2)


def test_matches_dense_solve():
    data = random_data(1, 5, 3)
    expected = np.linalg.solve(data.X.T @ data.X + 5 * 0.3 * np.eye(3), data.X.T @ data.y)
    assert np.allclose(ridge_fit(data, 0.3).theta_hat, expected, rtol=1e-10, atol=1e-12)


def test_fit_invariants():
    data = random_data(2, 12, 7)
    fit = ridge_fit(data, 0.4)
    assert np.allclose(fit.fitted, data.X @ fit.theta_hat, rtol=1e-10)
    assert np.all(fit.leverage >= 0) and np.all(fit.leverage < 1)
    G = data.X.T @ data.X + 12 * 0.4 * np.eye(7)
    assert np.max(np.abs(G @ fit.gram_inv - np.eye(7))) < 1e-8
    assert not fit.ridgeless


def test_singular_ridgeless_names_rank():
    X = np.ones((4, 2))
    with pytest.raises(SingularSystemError, match="rank 1"):
        ridge_fit(Dataset(X, np.arange(4.0)), 0.0)


def test_overparameterised_ridgeless_is_min_norm_interpolator():
    data = random_data(3, 6, 15)
    fit = ridge_fit(data, 0.0)
    assert fit.ridgeless
    assert np.allclose(fit.theta_hat, np.linalg.pinv(data.X) @ data.y)
    assert np.allclose(data.X @ fit.theta_hat, data.y)
    assert np.allclose(fit.leverage, 1.0)


def test_negative_penalty_rejected():
    with pytest.raises(ArgumentError):
        ridge_fit(random_data(0, 3, 2), -1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 20), st.integers(1, 25))
def test_shrinkage_monotone_in_penalty(seed, n, d):
    data = random_data(seed, n, d)
    lams = [1e-3, 1e-2, 0.1, 1.0, 10.0]
    norms = [np.linalg.norm(ridge_fit(data, l).theta_hat) for l in lams]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(norms, norms[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 20), st.integers(1, 25))
def test_path_matches_individual_fits(seed, n, d):
    data = random_data(seed, n, d)
    lams = [0.0, 0.01, 1.0]
    path = ridge_path(data, lams)
    for k, lam in enumerate(lams):
        assert np.allclose(path[k], ridge_fit(data, lam).theta_hat, rtol=1e-7, atol=1e-9)


# -- leave-one-out --------------------------------------------------------------


def test_zero_row_has_zero_delta():
    data = random_data(4, 8, 3)
    X = data.X.copy()
    X[2] = 0.0
    d2 = Dataset(X, data.y)
    assert np.array_equal(loo_delta(ridge_fit(d2, 0.2), d2, 2), np.zeros(3))


def test_matches_refit_each_row():
    data = random_data(5, 8, 3)
    fit = ridge_fit(data, 0.2)
    for j in range(8):
        # the deleted fit keeps the total penalty 8 * 0.2 on the Gram matrix
        ref = ridge_fit(data.drop(j), 0.2 * 8 / 7).theta_hat
        got = fit.theta_hat - loo_delta(fit, data, j)
        assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)


def test_zero_residual_row():
    data = random_data(6, 8, 3)
    # the hat matrix does not depend on y, so pick y_0 equal to its own fit
    H = data.X @ ridge_fit(data, 0.2).gram_inv @ data.X.T
    y = data.y.copy()
    y[0] = (H[0, 1:] @ y[1:]) / (1 - H[0, 0])
    d3 = Dataset(data.X, y)
    assert np.allclose(loo_delta(ridge_fit(d3, 0.2), d3, 0), 0.0, atol=1e-14)


def test_interpolation_regime_raises_with_index():
    data = random_data(7, 4, 10)
    fit = ridge_fit(data, 0.0)
    with pytest.raises(DegenerateLeverageError) as info:
        loo_delta(fit, data, 1)
    assert info.value.index == 1
    with pytest.raises(DegenerateLeverageError):
        loo_deltas(fit, data)


def test_index_out_of_range():
    data = random_data(8, 4, 2)
    with pytest.raises(ArgumentError):
        loo_delta(ridge_fit(data, 1.0), data, 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 30), st.integers(1, 10), st.floats(0.05, 5))
def test_rank_one_exactness(seed, n, d, lam):
    data = random_data(seed, n, d)
    fit = ridge_fit(data, lam)
    deltas = loo_deltas(fit, data)
    for j in range(n):
        ref = ridge_fit(data.drop(j), lam * n / (n - 1)).theta_hat
        assert np.allclose(deltas[j], loo_delta(fit, data, j), rtol=1e-12, atol=1e-15)
        assert np.linalg.norm(fit.theta_hat - deltas[j] - ref) <= 1e-9 * max(np.linalg.norm(ref), 1e-12)
