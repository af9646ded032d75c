import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trendmon.corpus import FrequencySeries, Token
from trendmon.errors import InsufficientDataError
from trendmon.forecast import (ArimaSpec, Forecast, PreparedSeries, classify_trend,
                               default_grid, difference, fit_grid, forecast,
                               prepare, trend_line_stats)

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)
HOUR = timedelta(hours=1)


def make_series(counts):
    buckets = tuple((T0 + i * HOUR, int(c)) for i, c in enumerate(counts))
    return FrequencySeries(token=Token.from_surface("#xx"), bucket_width=HOUR,
                           buckets=buckets)


def ps(values):
    return PreparedSeries(values=tuple(float(v) for v in values),
                          bucket_width=HOUR, origin=T0)


def ar1_series(seed, n=500, phi=0.7, sigma=0.1):
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.normal(0.0, sigma)
    return x


class TestPrepare:
    def test_zero_counts_stay_zero(self):
        prepared = prepare(make_series([0] * 10))
        assert prepared.values == (0.0,) * 10

    def test_log1p_transform(self):
        # log1p(e-1) == 1 exactly; counts being integers, check the identity
        # directly and the pipeline on the nearest integer count
        assert math.log1p(math.e - 1) == pytest.approx(1.0)
        prepared = prepare(make_series([1] * 10))
        assert prepared.values == (math.log1p(1),) * 10

    def test_values_are_log1p_of_counts(self):
        counts = [0, 1, 4, 10, 2, 7, 3, 9]
        prepared = prepare(make_series(counts))
        assert prepared.values == tuple(math.log1p(c) for c in counts)
        assert prepared.d_applied == 0

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            prepare(make_series([1] * 7))


class TestDifference:
    def test_first_difference(self):
        assert difference([1, 3, 6, 10], 1) == [2, 3, 4]

    def test_second_difference(self):
        assert difference([1, 3, 6, 10], 2) == [1, 1]

    def test_zero_is_identity(self):
        assert difference([5.0, 1.0, 2.5], 0) == [5.0, 1.0, 2.5]

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            difference([1.0, 2.0], 2)

    @settings(max_examples=50)
    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
                    min_size=1, max_size=40))
    def test_left_inverse_of_cumsum(self, xs):
        summed = np.concatenate([[0.0], np.cumsum(xs)])
        recovered = difference(summed.tolist(), 1)
        assert np.allclose(recovered, xs, atol=1e-6)


class TestFitGrid:
    def test_ar1_recovery(self):
        grid = [ArimaSpec(p, d, q) for p in range(4) for d in range(2) for q in range(3)]
        fit = fit_grid(ps(ar1_series(0)), grid=grid, split_fraction=0.8)
        assert fit.spec.d == 0
        assert fit.spec.p >= 1
        assert 0.55 <= fit.ar_coeffs[0] <= 0.85

    def test_exact_ramp_selects_d1(self):
        grid = [ArimaSpec(p, d, q) for p in range(3) for d in range(2) for q in range(2)]
        fit = fit_grid(ps(np.arange(1.0, 101.0)), grid=grid)
        assert fit.spec.d == 1
        assert fit.validation_mse < 1e-6

    def test_white_noise_prefers_simplest(self):
        rng = np.random.default_rng(3)
        noise = rng.normal(0.0, 1.0, size=400)
        fit = fit_grid(ps(noise), grid=default_grid(3, 1, 3))
        close_to_noise_var = abs(fit.validation_mse - 1.0) < 0.1
        assert fit.spec == ArimaSpec(0, 0, 0) or close_to_noise_var

    def test_deterministic(self):
        series = ps(ar1_series(5, n=120))
        a = fit_grid(series, grid=default_grid(2, 1, 2))
        b = fit_grid(series, grid=default_grid(2, 1, 2))
        assert a == b

    def test_coefficient_lengths_match_spec(self):
        fit = fit_grid(ps(ar1_series(1, n=200)), grid=default_grid(3, 1, 2))
        assert len(fit.ar_coeffs) == fit.spec.p
        assert len(fit.ma_coeffs) == fit.spec.q
        assert math.isfinite(fit.residual_variance)
        assert math.isfinite(fit.validation_mse)

    def test_all_specs_infeasible_raises(self):
        with pytest.raises(InsufficientDataError):
            fit_grid(ps([1.0] * 8), grid=[ArimaSpec(3, 2, 3)])

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            fit_grid(ps([1.0] * 20), grid=[])

    def test_bad_split_rejected(self):
        with pytest.raises(ValueError):
            fit_grid(ps([1.0] * 20), grid=[ArimaSpec(0, 0, 0)], split_fraction=1.0)

    def test_grid_bounds_enforced(self):
        with pytest.raises(ValueError):
            ArimaSpec(4, 0, 0)
        with pytest.raises(ValueError):
            ArimaSpec(0, 3, 0)


class TestForecast:
    def test_ramp_continuation(self):
        series = ps(np.arange(1.0, 101.0))
        fit = fit_grid(series, grid=default_grid(2, 1, 1))
        fc = forecast(fit, series, horizon=10)
        for step, point in enumerate(fc.points, start=1):
            assert abs(point - (100.0 + step)) < 1e-3
        assert fc.trend == "rising"

    def test_mean_model_is_flat(self):
        rng = np.random.default_rng(1)
        series = ps(5.0 + rng.normal(0.0, 0.2, size=60))
        fit = fit_grid(series, grid=[ArimaSpec(0, 0, 0)])
        fc = forecast(fit, series, horizon=8)
        assert all(p == pytest.approx(fit.intercept) for p in fc.points)
        assert fc.trend == "flat"

    def test_ci_contains_points_and_widens(self):
        series = ps(ar1_series(2, n=150))
        fit = fit_grid(series, grid=default_grid(2, 1, 2))
        fc = forecast(fit, series, horizon=15)
        widths = [u - l for u, l in zip(fc.ci_upper, fc.ci_lower)]
        assert all(l <= p <= u for l, p, u in zip(fc.ci_lower, fc.points, fc.ci_upper))
        assert all(widths[i] <= widths[i + 1] + 1e-12 for i in range(len(widths) - 1))
        assert fit.residual_variance > 0

    def test_constant_difference_continues(self):
        values = np.cumsum(np.full(60, 2.5)) + 1.0
        series = ps(values)
        fit = fit_grid(series, grid=[ArimaSpec(0, 1, 0)])
        fc = forecast(fit, series, horizon=6)
        diffs = np.diff([values[-1], *fc.points])
        assert np.allclose(diffs, 2.5, atol=1e-9)

    def test_second_difference_constant_continues(self):
        base = np.cumsum(np.cumsum(np.full(50, 0.5)))
        series = ps(base)
        fit = fit_grid(series, grid=[ArimaSpec(0, 2, 0)])
        fc = forecast(fit, series, horizon=5)
        second = np.diff([base[-2], base[-1], *fc.points], n=2)
        assert np.allclose(second, 0.5, atol=1e-9)

    def test_horizon_bounds(self):
        series = ps(ar1_series(3, n=60))
        fit = fit_grid(series, grid=[ArimaSpec(1, 0, 0)])
        with pytest.raises(ValueError):
            forecast(fit, series, horizon=0)
        with pytest.raises(ValueError):
            forecast(fit, series, horizon=25)
        with pytest.raises(ValueError):
            forecast(fit, series, horizon=5, level=1.0)

    def test_level_changes_width(self):
        series = ps(ar1_series(4, n=100))
        fit = fit_grid(series, grid=[ArimaSpec(1, 0, 0)])
        fc95 = forecast(fit, series, horizon=5, level=0.95)
        fc50 = forecast(fit, series, horizon=5, level=0.50)
        assert fc95.ci_upper[0] - fc95.ci_lower[0] > fc50.ci_upper[0] - fc50.ci_lower[0]


class TestTrend:
    def test_classify_thresholds(self):
        assert classify_trend(0.02) == "rising"
        assert classify_trend(-0.02) == "declining"
        assert classify_trend(0.005) == "flat"
        assert classify_trend(-0.005) == "flat"

    def test_trend_line_stats(self):
        slope, var = trend_line_stats([1.0, 2.0, 3.0, 4.0])
        assert slope == pytest.approx(1.0)
        assert var == pytest.approx(0.0, abs=1e-12)
        slope, var = trend_line_stats([0.0, 1.0, 0.0, 1.0])
        assert var > 0
