"""ARIMA forecasting of keyword frequency series.

Counts are log1p-transformed, a (p,d,q) grid is searched with conditional
sum-of-squares estimation (Hannan-Rissanen start, then scipy least_squares),
and the spec with the lowest one-step-ahead validation MSE wins. Forecasts
carry Gaussian confidence intervals from accumulated psi-weight variance and
a rising/declining/flat verdict from the slope of the predicted points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import norm

from .config import ForecastConfig
from .corpus import FrequencySeries
from .errors import InsufficientDataError

logger = logging.getLogger(__name__)

MIN_SERIES_LENGTH = 8
TREND_RISING = "rising"
TREND_DECLINING = "declining"
TREND_FLAT = "flat"


@dataclass(frozen=True)
class PreparedSeries:
    values: tuple[float, ...]          # log1p(count) per bucket
    bucket_width: timedelta
    origin: datetime
    d_applied: int = 0                 # differencing happens inside the ARIMA spec
    token: str | None = None

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ArimaSpec:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("orders must be non-negative")
        if self.p > 3 or self.d > 2 or self.q > 3:
            raise ValueError("grid bounds are p<=3, d<=2, q<=3")

    @property
    def complexity(self):
        return (self.p + self.d + self.q, self.d, self.p, self.q)


@dataclass(frozen=True)
class ArimaFit:
    spec: ArimaSpec
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    intercept: float
    residual_variance: float
    validation_mse: float


@dataclass(frozen=True)
class Forecast:
    horizon: int
    points: tuple[float, ...]          # log scale
    ci_lower: tuple[float, ...]
    ci_upper: tuple[float, ...]
    level: float
    trend: str
    slope: float                       # least-squares slope of the points
    trend_residual_variance: float     # variance of points around their trend line


def prepare(series: FrequencySeries) -> PreparedSeries:
    """log1p-transform a frequency series; zero counts stay finite."""
    if len(series) < MIN_SERIES_LENGTH:
        raise InsufficientDataError(
            f"series has {len(series)} buckets; need >= {MIN_SERIES_LENGTH}")
    values = tuple(math.log1p(c) for c in series.counts)
    return PreparedSeries(values=values, bucket_width=series.bucket_width,
                          origin=series.origin, token=series.token.surface)


def difference(values: Sequence[float], d: int) -> list[float]:
    """Apply the lag-1 difference operator d times."""
    if d < 0:
        raise ValueError("d must be >= 0")
    if len(values) <= d:
        raise ValueError(f"need more than d={d} values, got {len(values)}")
    out = np.asarray(values, dtype=np.float64)
    for _ in range(d):
        out = np.diff(out)
    return out.tolist()


def default_grid(p_max: int = 3, d_max: int = 2, q_max: int = 3) -> list[ArimaSpec]:
    return [ArimaSpec(p, d, q)
            for p in range(p_max + 1) for d in range(d_max + 1) for q in range(q_max + 1)]


def _css_residuals(w: np.ndarray, intercept: float, ar: Sequence[float],
                   ma: Sequence[float]) -> np.ndarray:
    """Conditional residuals; the first p observations condition the recursion
    and keep residual 0, pre-sample shocks are 0."""
    p, q = len(ar), len(ma)
    n = len(w)
    eps = np.zeros(n)
    if q == 0:
        if p == 0:
            return w - intercept
        acc = w[p:] - intercept
        for i in range(p):
            acc = acc - ar[i] * w[p - 1 - i:n - 1 - i]
        eps[p:] = acc
        return eps
    for t in range(p, n):
        v = w[t] - intercept
        for i in range(p):
            v -= ar[i] * w[t - 1 - i]
        for j in range(q):
            idx = t - 1 - j
            if idx >= 0:
                v -= ma[j] * eps[idx]
        eps[t] = v
    return eps


def _hannan_rissanen(w: np.ndarray, p: int, q: int) -> np.ndarray:
    """Initial (intercept, ar, ma) via long-AR residual regression."""
    n = len(w)
    fallback = np.concatenate([[float(np.mean(w))], np.zeros(p + q)])
    if p == 0 and q == 0:
        return fallback
    if q == 0:
        cols = [np.ones(n - p)] + [w[p - 1 - i:n - 1 - i] for i in range(p)]
        beta, *_ = np.linalg.lstsq(np.column_stack(cols), w[p:], rcond=None)
        return beta
    m = min(max(2 * (p + q), 4), (n - 2) // 2)
    if m < 1 or n - m - q < p + q + 2:
        return fallback
    cols = [np.ones(n - m)] + [w[m - 1 - i:n - 1 - i] for i in range(m)]
    beta, *_ = np.linalg.lstsq(np.column_stack(cols), w[m:], rcond=None)
    eps_hat = np.zeros(n)
    eps_hat[m:] = w[m:] - np.column_stack(cols) @ beta
    t0 = m + q
    cols2 = [np.ones(n - t0)]
    cols2 += [w[t0 - 1 - i:n - 1 - i] for i in range(p)]
    cols2 += [eps_hat[t0 - 1 - j:n - 1 - j] for j in range(q)]
    beta2, *_ = np.linalg.lstsq(np.column_stack(cols2), w[t0:], rcond=None)
    beta2[1:] = np.clip(beta2[1:], -1.95, 1.95)
    return beta2


def _fit_css(w: np.ndarray, p: int, q: int) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Minimize the conditional sum of squares; returns (c, ar, ma, residuals)."""
    if p == 0 and q == 0:
        c = float(np.mean(w))
        return c, np.zeros(0), np.zeros(0), w - c

    def residual(params):
        eps = _css_residuals(w, params[0], params[1:1 + p], params[1 + p:])
        return np.nan_to_num(eps[p:], nan=1e8, posinf=1e8, neginf=-1e8)

    x0 = _hannan_rissanen(w, p, q)
    result = least_squares(residual, x0, method="lm", max_nfev=400)
    params = result.x
    c, ar, ma = float(params[0]), params[1:1 + p], params[1 + p:]
    eps = _css_residuals(w, c, ar, ma)
    if not np.all(np.isfinite(eps)):
        raise FloatingPointError("non-finite residuals at optimum")
    if not _stationary(ar):
        raise FloatingPointError("AR polynomial has a root on or inside the unit circle")
    if not _invertible(ma):
        raise FloatingPointError("MA polynomial has a root on or inside the unit circle")
    return c, ar, ma, eps


_ROOT_MARGIN = 1.0 + 1e-7


def _stationary(ar: Sequence[float]) -> bool:
    if len(ar) == 0:
        return True
    roots = np.roots(np.r_[-np.asarray(ar)[::-1], 1.0])
    return bool(np.all(np.abs(roots) > _ROOT_MARGIN))


def _invertible(ma: Sequence[float]) -> bool:
    if len(ma) == 0:
        return True
    roots = np.roots(np.r_[np.asarray(ma)[::-1], 1.0])
    return bool(np.all(np.abs(roots) > _ROOT_MARGIN))


def _tie_rtol(n_val: int) -> float:
    """MSEs within one standard error of the minimum count as tied; the SE of
    a Gaussian MSE estimate over n points is mse * sqrt(2/n)."""
    return max(0.02, math.sqrt(2.0 / max(1, n_val)))


def fit_grid(series: PreparedSeries, grid: Sequence[ArimaSpec] | None = None,
             split_fraction: float = 0.8) -> ArimaFit:
    """Fit every candidate on the leading split and pick the minimal
    one-step-ahead MSE on the held-out tail. MSEs within one standard error of
    the minimum count as tied; ties break toward smaller p+d+q, then smaller
    d, then smaller p. Non-stationary or non-invertible fits are skipped, as
    are specs whose train segment is too short."""
    if grid is None:
        grid = default_grid()
    if not grid:
        raise ValueError("grid must be non-empty")
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must be in (0, 1)")
    values = np.asarray(series.values, dtype=np.float64)
    n = len(values)
    split = max(1, min(n - 1, int(n * split_fraction)))
    fits: list[ArimaFit] = []
    skipped = 0
    for spec in sorted(grid, key=lambda s: s.complexity):
        p, d, q = spec.p, spec.d, spec.q
        if split - d < p + q + 2:
            skipped += 1
            continue
        w_full = values.copy()
        for _ in range(d):
            w_full = np.diff(w_full)
        val_start = max(p, split - d)
        if val_start > len(w_full) - 1:
            skipped += 1
            continue
        w_train = w_full[:split - d]
        try:
            c, ar, ma, eps_train = _fit_css(w_train, p, q)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            logger.debug("spec %s failed: %s", spec, exc)
            skipped += 1
            continue
        eps_full = _css_residuals(w_full, c, ar, ma)
        val_err = eps_full[val_start:]
        mse = float(np.mean(val_err * val_err))
        if not math.isfinite(mse):
            skipped += 1
            continue
        n_eff = len(w_train) - p
        dof = max(1, n_eff - (p + q + 1))
        sigma2 = float(np.sum(eps_train[p:] ** 2)) / dof
        fits.append(ArimaFit(spec=spec, ar_coeffs=tuple(float(a) for a in ar),
                             ma_coeffs=tuple(float(m) for m in ma), intercept=c,
                             residual_variance=sigma2, validation_mse=mse))
    if not fits:
        raise InsufficientDataError(
            f"all {skipped} grid specs infeasible for a series of length {n}")
    minimum = min(f.validation_mse for f in fits)
    rtol = _tie_rtol(n - split)
    tied = [f for f in fits if f.validation_mse <= minimum * (1.0 + rtol)]
    return min(tied, key=lambda f: f.spec.complexity)


def _psi_weights(fit: ArimaFit, horizon: int) -> np.ndarray:
    p, q = fit.spec.p, fit.spec.q
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for k in range(1, horizon):
        v = fit.ma_coeffs[k - 1] if k <= q else 0.0
        for i in range(1, min(k, p) + 1):
            v += fit.ar_coeffs[i - 1] * psi[k - i]
        psi[k] = v
    for _ in range(fit.spec.d):
        psi = np.cumsum(psi)
    return psi


def trend_line_stats(points: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of a sequence and the variance of its residuals."""
    y = np.asarray(points, dtype=np.float64)
    if len(y) < 2:
        return 0.0, 0.0
    t = np.arange(len(y), dtype=np.float64)
    design = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(coef[0]), float(np.mean(resid * resid))


def classify_trend(slope: float, epsilon: float = 0.01) -> str:
    if slope > epsilon:
        return TREND_RISING
    if slope < -epsilon:
        return TREND_DECLINING
    return TREND_FLAT


def forecast(fit: ArimaFit, series: PreparedSeries, horizon: int = 15,
             level: float = 0.95, trend_epsilon: float = 0.01) -> Forecast:
    """Iterated multi-step prediction on the log scale with a Gaussian CI."""
    if not 1 <= horizon <= 24:
        raise ValueError("horizon must be in 1..24")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    values = np.asarray(series.values, dtype=np.float64)
    p, d, q = fit.spec.p, fit.spec.d, fit.spec.q
    w = values.copy()
    for _ in range(d):
        w = np.diff(w)
    eps = _css_residuals(w, fit.intercept, fit.ar_coeffs, fit.ma_coeffs)
    n = len(w)
    wext = list(w)
    for h in range(1, horizon + 1):
        t = n + h - 1
        v = fit.intercept
        for i in range(p):
            v += fit.ar_coeffs[i] * wext[t - 1 - i]
        for j in range(q):
            idx = t - 1 - j
            if idx < n:
                v += fit.ma_coeffs[j] * eps[idx]
        wext.append(v)
    fc = np.array(wext[n:])
    # undo the differencing, one integration level at a time
    levels = [values]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    for lvl in range(d - 1, -1, -1):
        fc = levels[lvl][-1] + np.cumsum(fc)
    psi = _psi_weights(fit, horizon)
    variances = fit.residual_variance * np.cumsum(psi * psi)
    z = float(norm.ppf(0.5 + level / 2.0))
    widths = z * np.sqrt(np.maximum(variances, 0.0))
    slope, resid_var = trend_line_stats(fc)
    return Forecast(horizon=horizon,
                    points=tuple(float(v) for v in fc),
                    ci_lower=tuple(float(v) for v in fc - widths),
                    ci_upper=tuple(float(v) for v in fc + widths),
                    level=level,
                    trend=classify_trend(slope, trend_epsilon),
                    slope=slope,
                    trend_residual_variance=resid_var)


def fit_and_forecast(series: PreparedSeries, cfg: ForecastConfig) -> tuple[ArimaFit, Forecast]:
    fit = fit_grid(series, grid=default_grid(cfg.p_max, cfg.d_max, cfg.q_max),
                   split_fraction=cfg.split_fraction)
    fc = forecast(fit, series, horizon=cfg.horizon, level=cfg.level,
                  trend_epsilon=cfg.trend_epsilon)
    return fit, fc


def forecast_record(keyword: str, series: PreparedSeries, fc: Forecast | None,
                    validation_mse: float | None = None) -> dict:
    """JSON-ready export consumed by the service and the UI."""
    record = {
        "keyword": keyword,
        "origin": series.origin.astimezone(timezone.utc).isoformat().replace("+00:00", "Z"),
        "bucket_width_seconds": series.bucket_width.total_seconds(),
        "history": list(series.values),
    }
    if fc is None:
        record.update({"unforecast": True, "trend": None, "points": [],
                       "ci_lower": [], "ci_upper": [], "validation_mse": None})
    else:
        record.update({
            "unforecast": False,
            "points": list(fc.points),
            "ci_lower": list(fc.ci_lower),
            "ci_upper": list(fc.ci_upper),
            "level": fc.level,
            "trend": fc.trend,
            "validation_mse": validation_mse,
        })
    return record
