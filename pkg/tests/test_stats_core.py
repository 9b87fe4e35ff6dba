import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbench import (
    DataError,
    DomainError,
    SeededRng,
    SizeError,
    draw_gaussian,
    draw_pivotal_pair,
    draw_pivotal_pairs,
    gaussian_cdf,
    gaussian_quantile,
    sample_moments,
    student_t_quantile,
    type7_quantile,
)

finite_floats = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
# values on a 1e-6 grid keep translation/scaling arithmetic well-conditioned
grid_floats = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False).map(
    lambda v: round(v, 6)
)


class TestGaussianCdf:
    def test_symmetry_at_zero(self):
        assert gaussian_cdf(0.0) == 0.5

    def test_table_values(self):
        assert gaussian_cdf(1.6448536) == pytest.approx(0.95, abs=1e-6)
        assert gaussian_cdf(-1.2815516) == pytest.approx(0.10, abs=1e-6)

    def test_absolute_error_below_1e12_vs_mpmath(self):
        mp.mp.dps = 30
        for z in np.linspace(-8.0, 8.0, 33):
            exact = float(mp.ncdf(mp.mpf(float(z))))
            assert abs(gaussian_cdf(float(z)) - exact) <= 1e-12

    def test_strictly_increasing(self):
        grid = np.linspace(-6, 6, 101)
        values = [gaussian_cdf(z) for z in grid]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            gaussian_cdf(float("nan"))
        with pytest.raises(DomainError):
            gaussian_cdf(float("inf"))


class TestGaussianQuantile:
    def test_median(self):
        assert gaussian_quantile(0.5) == 0.0

    def test_table_values(self):
        assert gaussian_quantile(0.05) == pytest.approx(-1.6448536, abs=1e-6)
        assert gaussian_quantile(0.975) == pytest.approx(1.9599640, abs=1e-6)

    def test_round_trip_on_99_point_grid(self):
        for p in np.linspace(0.01, 0.99, 99):
            assert gaussian_cdf(gaussian_quantile(float(p))) == pytest.approx(float(p), abs=1e-10)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            gaussian_quantile(p)


class TestStudentTQuantile:
    def test_median_is_zero(self):
        for df in (1.0, 5.0, 49.0, 1000.0):
            assert student_t_quantile(0.5, df) == pytest.approx(0.0, abs=1e-12)

    def test_frozen_high_precision_values(self):
        # inverted via mpmath quadrature of the t-density
        assert student_t_quantile(0.05, 49) == pytest.approx(-1.6765508926168539, abs=1e-4)
        assert student_t_quantile(0.05, 5) == pytest.approx(-2.0150483733330242, abs=1e-4)

    def test_antisymmetry(self):
        for p in (0.01, 0.1, 0.3):
            for df in (3, 30, 300):
                assert student_t_quantile(p, df) == pytest.approx(
                    -student_t_quantile(1 - p, df), abs=1e-9
                )

    def test_gaussian_limit(self):
        for p in np.linspace(0.01, 0.99, 99):
            assert student_t_quantile(float(p), 1e6) == pytest.approx(
                gaussian_quantile(float(p)), abs=1e-3
            )

    def test_domain(self):
        with pytest.raises(DomainError):
            student_t_quantile(0.0, 5)
        with pytest.raises(DomainError):
            student_t_quantile(0.5, 0.0)
        with pytest.raises(DomainError):
            student_t_quantile(0.5, -1.0)


class TestSampleMoments:
    def test_constant_sample(self):
        ms = sample_moments([3.5] * 7)
        assert ms.mean == 3.5
        assert ms.sd == 0.0
        assert ms.skewness == 0.0
        assert ms.excess_kurtosis == 0.0

    def test_two_points(self):
        ms = sample_moments([0.0, 2.0])
        assert ms.mean == 1.0
        assert ms.sd == pytest.approx(math.sqrt(2.0), abs=1e-15)

    def test_symmetric_sample_zero_skew(self):
        assert sample_moments([-1.0, 0.0, 1.0]).skewness == pytest.approx(0.0, abs=1e-15)

    def test_kurtosis_flag(self):
        assert sample_moments([0.0, 1.0, 2.0]).kurtosis_small_sample
        assert not sample_moments([0.0, 1.0, 2.0, 3.0]).kurtosis_small_sample

    def test_errors(self):
        with pytest.raises(SizeError):
            sample_moments([1.0])
        with pytest.raises(DataError):
            sample_moments([1.0, float("nan")])

    @given(st.lists(grid_floats, min_size=2, max_size=30), grid_floats)
    @settings(max_examples=100, deadline=None)
    def test_translation(self, xs, d):
        base = sample_moments(xs)
        shifted = sample_moments([x + d for x in xs])
        assert shifted.mean == pytest.approx(base.mean + d, abs=1e-10)
        assert shifted.sd == pytest.approx(base.sd, abs=1e-10)
        assert shifted.skewness == pytest.approx(base.skewness, abs=1e-6)
        assert shifted.excess_kurtosis == pytest.approx(base.excess_kurtosis, abs=1e-6)

    @given(
        st.lists(grid_floats, min_size=2, max_size=30),
        st.floats(min_value=0.1, max_value=10.0).map(lambda v: round(v, 3)),
    )
    @settings(max_examples=100, deadline=None)
    def test_positive_scaling(self, xs, lam):
        base = sample_moments(xs)
        scaled = sample_moments([lam * x for x in xs])
        assert scaled.mean == pytest.approx(lam * base.mean, rel=1e-12, abs=1e-12)
        assert scaled.sd == pytest.approx(lam * base.sd, rel=1e-12, abs=1e-12)
        assert scaled.skewness == pytest.approx(base.skewness, abs=1e-6)
        assert scaled.excess_kurtosis == pytest.approx(base.excess_kurtosis, abs=1e-6)


class TestType7Quantile:
    def test_exact_median(self):
        assert type7_quantile([1, 2, 3, 4, 5], 0.5) == 3.0

    def test_interpolated_tail(self):
        # h = 0.05*4 + 1 = 1.2 -> x_(1) + 0.2*(x_(2)-x_(1))
        assert type7_quantile([1, 2, 3, 4, 5], 0.05) == pytest.approx(1.2, abs=1e-12)

    def test_single_point(self):
        for p in (0.01, 0.5, 0.99):
            assert type7_quantile([7.0], p) == 7.0

    def test_empty_sample(self):
        with pytest.raises(SizeError):
            type7_quantile([], 0.5)

    @given(st.lists(finite_floats, min_size=1, max_size=40), st.floats(min_value=1e-6, max_value=1 - 1e-6))
    @settings(max_examples=200, deadline=None)
    def test_matches_numpy_linear_method(self, xs, p):
        # numpy's default 'linear' interpolation is the same type-7 definition
        assert type7_quantile(xs, p) == pytest.approx(
            float(np.quantile(np.array(xs), p, method="linear")), rel=1e-12, abs=1e-12
        )

    @given(st.lists(finite_floats, min_size=1, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_p(self, xs):
        ps = np.linspace(0.01, 0.99, 25)
        qs = [type7_quantile(xs, float(p)) for p in ps]
        assert all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))


class TestSeededRng:
    def test_determinism(self):
        a = draw_gaussian(SeededRng(7, 3), 100, 0.0, 1.0)
        b = draw_gaussian(SeededRng(7, 3), 100, 0.0, 1.0)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = draw_gaussian(SeededRng(7, 0), 100, 0.0, 1.0)
        b = draw_gaussian(SeededRng(7, 1), 100, 0.0, 1.0)
        assert not np.array_equal(a, b)

    def test_seed_bounds(self):
        with pytest.raises(DomainError):
            SeededRng(-1)
        with pytest.raises(DomainError):
            SeededRng(2**64)
        SeededRng(2**64 - 1, 2**64 - 1)  # boundary accepted


class TestDrawGaussian:
    def test_degenerate_sigma(self):
        out = draw_gaussian(SeededRng(1), 50, 2.5, 0.0)
        assert np.all(out == 2.5)

    def test_negative_sigma(self):
        with pytest.raises(DomainError):
            draw_gaussian(SeededRng(1), 10, 0.0, -1.0)

    def test_clt_mean_bound(self):
        out = draw_gaussian(SeededRng(99), 1_000_000, 0.0, 1.0)
        assert abs(out.mean()) <= 0.005  # 3 MC standard errors


class TestPivotalPairs:
    def test_chi_square_mean(self):
        n = 50
        _, v = draw_pivotal_pairs(SeededRng(5), n, 1_000_000)
        assert np.mean(v**2) == pytest.approx(n - 1, rel=0.01)

    def test_z_mean(self):
        z, _ = draw_pivotal_pairs(SeededRng(5), 50, 1_000_000)
        assert abs(z.mean()) <= 0.005

    def test_independence(self):
        z, v = draw_pivotal_pairs(SeededRng(5), 50, 1_000_000)
        assert abs(np.corrcoef(z, v)[0, 1]) <= 0.005

    def test_scalar_matches_vector(self):
        rng = SeededRng(11, 2)
        z, v = draw_pivotal_pair(rng, 20)
        zs, vs = draw_pivotal_pairs(rng, 20, 1)
        assert (z, v) == (zs[0], vs[0])
        assert v >= 0.0

    def test_window_size_validated(self):
        with pytest.raises(SizeError):
            draw_pivotal_pair(SeededRng(1), 1)
