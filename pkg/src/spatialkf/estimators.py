"""scikit-learn style wrappers around the functional filter and analysis API.

``X`` for the forecaster is a ``(n_counties, n_years)`` panel: one row per
county, consecutive years in columns, the first column used for
initialization.
"""

import numpy as np
from scipy.special import ndtr
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import filter as kf
from ._validation import check_positive, check_vector
from .analysis import absolute_errors, fit_normal, general_accuracy, twenty_step_class
from .exceptions import DataError
from .geo import EARTH_RADIUS_KM, CentroidTable, SpatialCovariance, build_process_covariance, calibrate_decay


class SpatialKalmanForecaster(BaseEstimator):
    """Kalman filter over a county panel with an exponential-decay spatial Q.

    Parameters
    ----------
    threshold_km : float
        Distance at which the spatial correlation falls to one half.
    observation_scale : float
        Observation noise variance ``r`` (``R = r I``).
    initial_covariance_scale : float or None
        ``p0`` for the initial covariance ``p0 I``; ``None`` uses ``r``.
    earth_radius_km : float
    joseph_form : bool
        Use the Joseph-form covariance update.

    Attributes
    ----------
    process_covariance_ : ndarray of shape (n_counties, n_counties)
    decay_rate_ : float
    state_ : FilterState
        Posterior after the last fitted column.
    priors_ : ndarray of shape (n_counties, n_years - 1)
        Pre-update predicted means for each training column.
    """

    def __init__(
        self,
        threshold_km=500.0,
        observation_scale=0.01,
        initial_covariance_scale=None,
        earth_radius_km=EARTH_RADIUS_KM,
        joseph_form=False,
    ):
        self.threshold_km = threshold_km
        self.observation_scale = observation_scale
        self.initial_covariance_scale = initial_covariance_scale
        self.earth_radius_km = earth_radius_km
        self.joseph_form = joseph_form

    def fit(self, X, y=None, coords=None, process_covariance=None):
        """Initialize on ``X[:, 0]`` and filter the remaining columns.

        Either ``coords`` (``(n_counties, 2)`` latitude/longitude degrees) or a
        precomputed ``process_covariance`` must be given.
        """
        X = check_array(X, dtype=np.float64, ensure_min_features=1)
        d = X.shape[0]
        if process_covariance is not None:
            if isinstance(process_covariance, SpatialCovariance):
                process_covariance = process_covariance.matrix
            Q = check_array(process_covariance, dtype=np.float64)
            if Q.shape != (d, d):
                raise DataError(f"process_covariance must be ({d}, {d}), got {Q.shape}")
            self.decay_rate_ = float("nan")
        elif coords is not None:
            coords = check_array(coords, dtype=np.float64)
            if coords.shape != (d, 2):
                raise DataError(f"coords must be ({d}, 2), got {coords.shape}")
            table = CentroidTable([str(i).zfill(5) for i in range(d)], coords[:, 0], coords[:, 1])
            self.decay_rate_ = calibrate_decay(self.threshold_km)
            Q = build_process_covariance(table, self.decay_rate_, self.earth_radius_km).matrix
        else:
            raise DataError("fit needs coords or process_covariance")
        self.process_covariance_ = Q
        self._noise = kf.NoiseConfig(SpatialCovariance(Q, self.decay_rate_), check_positive(self.observation_scale, "observation_scale"))
        self.n_counties_ = d
        state = kf.init(X[:, 0], self._noise, self.initial_covariance_scale, year=0)
        priors = []
        for t in range(1, X.shape[1]):
            prior = kf.predict(state, self._noise)
            priors.append(prior.mean)
            state = kf.update(prior, X[:, t], self._noise, joseph=self.joseph_form)
        self.priors_ = np.column_stack(priors) if priors else np.empty((d, 0))
        self.state_ = state
        self.n_years_seen_ = X.shape[1]
        return self

    def partial_fit(self, x):
        """Predict one step and update with a new observed column."""
        check_is_fitted(self, "state_")
        x = check_vector(x, "x", length=self.n_counties_)
        prior = kf.predict(self.state_, self._noise)
        self.priors_ = np.column_stack([self.priors_, prior.mean])
        self.state_ = kf.update(prior, x, self._noise, joseph=self.joseph_form)
        self.n_years_seen_ += 1
        return self

    def predict(self, n_steps=1, return_std=False):
        """Forecast ``n_steps`` years ahead without updates.

        Returns an ``(n_counties, n_steps)`` array of means, plus the marginal
        standard deviations when ``return_std`` is set.
        """
        check_is_fitted(self, "state_")
        states = kf.forecast(self.state_, self._noise, int(n_steps))
        means = np.column_stack([s.mean for s in states]) if states else np.empty((self.n_counties_, 0))
        if not return_std:
            return means
        stds = np.column_stack([kf.marginal_std(s) for s in states]) if states else np.empty((self.n_counties_, 0))
        return means, stds

    def score(self, X, y=None):
        """Average general accuracy of the forecasts for the columns of ``X``."""
        X = check_array(X, dtype=np.float64)
        pred = self.predict(X.shape[1])
        return float(np.mean([general_accuracy(absolute_errors(pred[:, t], X[:, t]))[1] for t in range(X.shape[1])]))


class VulnerabilityLevels(TransformerMixin, BaseEstimator):
    """Bin a cross-section of rates into 20 levels under a fitted normal.

    ``fit`` learns the mean and population standard deviation; ``transform``
    returns levels 1..20 from 5-percentile bins of the normal CDF.
    """

    def __init__(self, hotspot_cdf=0.95):
        self.hotspot_cdf = hotspot_cdf

    def fit(self, X, y=None):
        self.mu_, self.sigma_ = fit_normal(np.ravel(check_array(X, ensure_2d=False, dtype=np.float64)))
        return self

    def predict_cdf(self, X):
        check_is_fitted(self, "sigma_")
        x = np.ravel(check_array(X, ensure_2d=False, dtype=np.float64))
        return ndtr((x - self.mu_) / self.sigma_)

    def transform(self, X):
        return twenty_step_class(self.predict_cdf(X))

    def hotspot_mask(self, X):
        return self.predict_cdf(X) > self.hotspot_cdf
