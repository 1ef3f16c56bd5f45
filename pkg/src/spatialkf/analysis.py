"""Efficacy metrics, vulnerability levels and hotspot sets, plus the
sensitivity and multi-year studies built on repeated filter runs."""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from ._validation import check_vector
from .exceptions import DataError
from .filter import NoiseConfig, marginal_std, run

N_LEVELS = 20
# k/20 rounds to the same double as the decimal literal, so 0.15 sits on a bound.
LEVEL_BOUNDS = np.arange(1, N_LEVELS) / N_LEVELS


def twenty_step_class(values):
    """Class 1..20 for values in [0, 1]; a value on a bound goes to the upper class."""
    values = np.asarray(values, dtype=float)
    return np.searchsorted(LEVEL_BOUNDS, values, side="right") + 1


def _include_mask(mask, d):
    if mask is None:
        return np.ones(d, bool)
    mask = np.asarray(mask, bool)
    if mask.shape != (d,):
        raise DataError(f"mask has shape {mask.shape}, expected ({d},)")
    if not mask.any():
        raise DataError("mask excludes every county")
    return mask


def absolute_errors(predicted, actual):
    predicted = check_vector(predicted, "predicted")
    actual = check_vector(actual, "actual", length=predicted.shape[0])
    return np.abs(predicted - actual)


def general_accuracy(abs_errors, mask=None):
    """Per-county ``1 - e_i / max(e)`` and its mean.

    With a ``mask`` only included counties enter the max and the mean;
    excluded entries come back as NaN. All-zero errors score 1.0 everywhere.
    """
    e = check_vector(abs_errors, "abs_errors")
    if np.any(e < 0):
        raise DataError("absolute errors must be non-negative")
    keep = _include_mask(mask, e.shape[0])
    emax = e[keep].max()
    per = np.full(e.shape, np.nan)
    per[keep] = 1.0 if emax == 0 else 1.0 - e[keep] / emax
    return per, float(per[keep].mean())


def hotspot_count(d, quantile=0.05, rounding="floor"):
    x = quantile * d
    if rounding == "floor":
        return int(math.floor(x))
    if rounding == "ceil":
        return int(math.ceil(x))
    raise DataError(f"rounding must be 'floor' or 'ceil', got {rounding!r}")


def actual_hotspots(rates, fips_order, quantile=0.05, rounding="floor", mask=None):
    """The top ``quantile`` share of counties by rate.

    Ties at the cutoff go to the lower FIPS code, so the result does not
    depend on input order.
    """
    rates = check_vector(rates, "rates", length=len(fips_order))
    keep = _include_mask(mask, rates.shape[0])
    idx = np.flatnonzero(keep)
    n = hotspot_count(idx.shape[0], quantile, rounding)
    ranked = sorted(idx, key=lambda i: (-rates[i], fips_order[i]))
    return frozenset(fips_order[i] for i in ranked[:n])


class VulnerabilityProfile(NamedTuple):
    levels: np.ndarray
    cdf: np.ndarray
    predicted_hotspots: frozenset
    mu: float
    sigma: float


def fit_normal(values, mask=None):
    """Mean and population standard deviation of the cross-section."""
    values = check_vector(values, "values")
    keep = _include_mask(mask, values.shape[0])
    if keep.sum() < 2:
        raise DataError("need at least two counties to fit a normal")
    mu = float(values[keep].mean())
    sigma = float(values[keep].std())
    if sigma == 0:
        raise DataError("predicted means are constant; cannot fit a normal")
    return mu, sigma


def vulnerability_levels(predicted_mean, fips_order=None, hotspot_cdf=0.95, mask=None):
    """Score counties against one normal fit to the predicted cross-section.

    Returns levels 1..20 (5-percentile bins of the fitted CDF), the CDF
    values, and the counties whose CDF exceeds ``hotspot_cdf``.
    """
    x = check_vector(predicted_mean, "predicted_mean")
    if fips_order is None:
        fips_order = tuple(range(x.shape[0]))
    elif len(fips_order) != x.shape[0]:
        raise DataError("fips_order length does not match predicted_mean")
    mu, sigma = fit_normal(x, mask)
    cdf = ndtr((x - mu) / sigma)
    levels = twenty_step_class(cdf)
    keep = _include_mask(mask, x.shape[0])
    hot = frozenset(fips_order[i] for i in np.flatnonzero((cdf > hotspot_cdf) & keep))
    return VulnerabilityProfile(levels, cdf, hot, mu, sigma)


def hotspot_accuracy(predicted, actual):
    actual = frozenset(actual)
    if not actual:
        raise DataError("actual hotspot set is empty")
    return len(frozenset(predicted) & actual) / len(actual)


@dataclass(frozen=True, eq=False)
class YearlyAssessment:
    year: int
    fips_order: tuple
    predicted: np.ndarray
    actual: np.ndarray
    std: np.ndarray
    abs_errors: np.ndarray
    general_accuracy: np.ndarray
    avg_general_accuracy: float
    actual_hotspots: frozenset
    predicted_hotspots: frozenset
    hotspot_accuracy: float
    vulnerability_level: np.ndarray
    cdf: np.ndarray
    missing: np.ndarray
    included: np.ndarray

    @property
    def max_error(self):
        return float(self.abs_errors[self.included].max())

    @property
    def avg_error(self):
        return float(self.abs_errors[self.included].mean())


def assess(
    year,
    predicted,
    actual,
    fips_order,
    std=None,
    missing=None,
    exclude_missing=False,
    hotspot_quantile=0.05,
    hotspot_rounding="floor",
):
    """All per-year products for one predicted column against its observation."""
    predicted = check_vector(predicted, "predicted", length=len(fips_order))
    actual = check_vector(actual, "actual", length=len(fips_order))
    d = predicted.shape[0]
    missing = np.zeros(d, bool) if missing is None else np.asarray(missing, bool)
    included = ~missing if exclude_missing else np.ones(d, bool)
    errors = absolute_errors(predicted, actual)
    per, avg = general_accuracy(errors, included)
    actual_hot = actual_hotspots(actual, fips_order, hotspot_quantile, hotspot_rounding, included)
    profile = vulnerability_levels(predicted, fips_order, 1.0 - hotspot_quantile, included)
    return YearlyAssessment(
        year=int(year),
        fips_order=tuple(fips_order),
        predicted=predicted,
        actual=actual,
        std=np.full(d, np.nan) if std is None else check_vector(std, "std", length=d),
        abs_errors=errors,
        general_accuracy=per,
        avg_general_accuracy=avg,
        actual_hotspots=actual_hot,
        predicted_hotspots=profile.predicted_hotspots,
        hotspot_accuracy=hotspot_accuracy(profile.predicted_hotspots, actual_hot) if actual_hot else float("nan"),
        vulnerability_level=profile.levels,
        cdf=profile.cdf,
        missing=missing,
        included=included,
    )


def assess_run(filter_run, panel, evaluate="prior", **kwargs):
    """Assess every training and prediction year of a :class:`FilterRun`.

    Training years are scored on the pre-update prediction by default
    (``evaluate="prior"``); ``"posterior"`` scores the updated estimate.
    Prediction years always use the forecast.
    """
    if evaluate not in ("prior", "posterior"):
        raise DataError(f"evaluate must be 'prior' or 'posterior', got {evaluate!r}")
    out = []
    for year in (*filter_run.train_years, *filter_run.predict_years):
        if evaluate == "posterior" and year in filter_run.posteriors:
            state = filter_run.posteriors[year]
        else:
            state = filter_run.priors[year]
        out.append(
            assess(
                year,
                state.mean,
                panel.column(year),
                panel.fips_order,
                std=marginal_std(state),
                missing=panel.missing_column(year),
                **kwargs,
            )
        )
    return out


class SummaryRow(NamedTuple):
    variable: str
    year: int
    avg_general_acc: float
    hotspot_acc: float
    avg_error: float
    max_error: float


def summarize(variable, assessments):
    return [
        SummaryRow(variable, a.year, a.avg_general_accuracy, a.hotspot_accuracy, a.avg_error, a.max_error)
        for a in assessments
    ]


class SensitivityRow(NamedTuple):
    observation_scale: float
    year: int
    avg_general_acc: float
    hotspot_acc: float
    avg_error: float
    max_error: float


def sensitivity_analysis(panel, process, scales, train_years, predict_years, initial_covariance_scale=None, **kwargs):
    """Rerun the pipeline for each observation scale ``r``.

    Everything except ``r`` is held fixed, including ``initial_covariance_scale``
    when given; when it is ``None`` the initial covariance tracks ``r``.
    One row per scale, for the last prediction year, sorted by ``r``.
    """
    scales = sorted(float(s) for s in scales)
    if not scales:
        raise DataError("at least one observation scale is required")
    if not predict_years:
        raise DataError("sensitivity analysis needs a prediction year")
    rows = []
    for r in scales:
        noise = NoiseConfig(process, r)
        fr = run(panel, noise, train_years, predict_years, initial_covariance_scale, keep_covariance=False)
        last = fr.states[-1]
        a = assess(
            last.year,
            last.mean,
            panel.column(last.year),
            panel.fips_order,
            missing=panel.missing_column(last.year),
            **kwargs,
        )
        rows.append(SensitivityRow(r, a.year, a.avg_general_accuracy, a.hotspot_accuracy, a.avg_error, a.max_error))
    return rows


class MultiYearResult(NamedTuple):
    train_count: int
    year: int
    abs_errors: np.ndarray
    max_error: float


def multi_year_study(panel, noise, train_counts=(4, 3, 2, 1), first_year=2014, last_year=2020, initial_covariance_scale=None):
    """Train on progressively fewer years and forecast through ``last_year``.

    For each ``k``: initialize on ``first_year``, train on the next ``k``
    years, forecast the rest. Returns one :class:`MultiYearResult` per
    (k, predicted year).
    """
    out = []
    for k in train_counts:
        k = int(k)
        if not 1 <= k < last_year - first_year:
            raise DataError(f"train count {k} outside 1..{last_year - first_year - 1}")
        train = range(first_year + 1, first_year + 1 + k)
        pred = range(first_year + 1 + k, last_year + 1)
        fr = run(panel, noise, train, pred, initial_covariance_scale, keep_covariance=False)
        for year in pred:
            errors = absolute_errors(fr.priors[year].mean, panel.column(year))
            out.append(MultiYearResult(k, year, errors, float(errors.max())))
    return out
