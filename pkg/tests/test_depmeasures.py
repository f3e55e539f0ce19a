"""Distance covariance/correlation and the kNN mutual-information estimator."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dcbo.depmeasures import dist_cor, dist_cov, mi_knn


def dcov_squared_brute(x, y, alpha=1.0):
    """Textbook double-centered V-statistic, quadratic loops."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    m = len(x)
    a = np.zeros((m, m))
    b = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            a[i, j] = np.linalg.norm(x[i] - x[j]) ** alpha
            b[i, j] = np.linalg.norm(y[i] - y[j]) ** alpha
    A = a - a.mean(0)[None, :] - a.mean(1)[:, None] + a.mean()
    B = b - b.mean(0)[None, :] - b.mean(1)[:, None] + b.mean()
    return (A * B).mean()


def test_dcov_of_three_point_sample_has_closed_form():
    # for x = y = {0, 1, 2} the V-statistic works out to 40/81 exactly
    x = np.array([0.0, 1.0, 2.0])
    assert dist_cov(x, x) == pytest.approx(math.sqrt(40.0 / 81.0), abs=1e-15)
    assert dist_cor(x, x) == pytest.approx(1.0, abs=1e-15)


def test_dcor_self_is_one_and_bounded():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(50)
    assert dist_cor(x, x) == pytest.approx(1.0, abs=1e-12)
    y = rng.standard_normal(50)
    assert 0.0 <= dist_cor(x, y) <= 1.0


def test_dcor_two_distinct_points_is_one():
    # with two samples the centered matrices are always proportional,
    # so the correlation is exactly 1 whenever both coordinates vary
    assert dist_cor(np.array([0.0, 1.0]), np.array([5.0, -3.0])) == pytest.approx(1.0)


def test_degenerate_inputs_give_zero():
    x = np.arange(10.0)
    const = np.full(10, 3.3)
    assert dist_cor(x, const) == 0.0
    assert dist_cor(const, x) == 0.0
    assert dist_cov(const, const) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_matches_brute_force_double_centering(alpha):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((40, 3))
    y = rng.standard_normal((40, 2))
    assert dist_cov(x, y, alpha) ** 2 == pytest.approx(
        dcov_squared_brute(x, y, alpha), abs=1e-10
    )


def test_affine_dependence_scores_one():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(60)
    assert dist_cor(x, 2.5 * x - 1.0) == pytest.approx(1.0, abs=1e-10)
    assert dist_cor(x, -0.3 * x + 4.0) == pytest.approx(1.0, abs=1e-10)


def test_alpha_validation():
    x = np.arange(5.0)
    for bad in (0.0, 2.0, -1.0, 2.5):
        with pytest.raises(ValueError):
            dist_cor(x, x, alpha=bad)
    with pytest.raises(ValueError):
        dist_cov(np.array([1.0]), np.array([2.0]))  # needs >= 2 rows


def test_row_count_mismatch_rejected():
    with pytest.raises(ValueError):
        dist_cov(np.arange(5.0), np.arange(6.0))


@given(
    arrays(np.float64, (12,), elements=st.floats(-5, 5)),
    arrays(np.float64, (12,), elements=st.floats(-5, 5)),
)
@settings(max_examples=50, deadline=None)
def test_dcor_symmetric_and_in_unit_interval(x, y):
    r = dist_cor(x, y)
    assert 0.0 <= r <= 1.0
    assert dist_cor(y, x) == pytest.approx(r, abs=1e-12)


@given(
    arrays(np.float64, (15,), elements=st.floats(-3, 3)),
    arrays(np.float64, (15,), elements=st.floats(-3, 3)),
    st.floats(0.1, 4.0),
    st.floats(-2.0, 2.0),
)
@settings(max_examples=40, deadline=None)
def test_dcor_invariant_to_affine_maps_of_either_argument(x, y, a, b):
    r0 = dist_cor(x, y)
    assert dist_cor(a * x + b, y) == pytest.approx(r0, abs=1e-9)
    assert dist_cor(x, -a * y + b) == pytest.approx(r0, abs=1e-9)


def test_permutation_of_paired_rows_preserves_dcor():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((30, 2))
    y = x[:, :1] ** 2 + 0.1 * rng.standard_normal((30, 1))
    perm = rng.permutation(30)
    assert dist_cor(x[perm], y[perm]) == pytest.approx(dist_cor(x, y), abs=1e-12)


# ------------------------------------------------------------- mutual info

def test_mi_gaussian_pairs_match_closed_form():
    # I(X;Y) = -log(1 - rho^2)/2 for a bivariate normal
    for rho, tol in ((0.0, 0.04), (0.6, 0.05), (0.9, 0.06)):
        vals = []
        for s in range(20):
            rng = np.random.default_rng(100 + s)
            z = rng.standard_normal((800, 2))
            x = z[:, 0]
            y = rho * z[:, 0] + math.sqrt(1 - rho**2) * z[:, 1]
            vals.append(mi_knn(x, y, k=3))
        true = -0.5 * math.log(1 - rho**2) if rho else 0.0
        assert np.mean(vals) == pytest.approx(true, abs=tol)


def test_mi_deterministic_on_duplicate_heavy_input():
    # ties are broken by a seeded jitter, so repeat calls agree exactly
    x = np.repeat([0.0, 1.0, 2.0, 3.0], 25)
    y = np.repeat([1.0, 0.0, 1.0, 0.0], 25)
    assert mi_knn(x, y) == mi_knn(x, y)
    assert np.isfinite(mi_knn(x, y))


def test_mi_independent_is_near_zero_and_k_validated():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(500)
    y = rng.standard_normal(500)
    assert abs(mi_knn(x, y, k=3)) < 0.1
    with pytest.raises(ValueError):
        mi_knn(x, y, k=0)
    with pytest.raises(ValueError):
        mi_knn(x[:3], y[:3], k=5)  # k must leave at least one neighbour out
