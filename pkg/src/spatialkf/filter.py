"""Kalman recursion with identity dynamics and identity observation model.

With F = H = I, a constant process covariance Q and R = r * I the textbook
equations reduce to

    predict:  m <- m,            P <- P + Q
    update:   S = P + r I,       K = P S^-1
              m <- m + K (z - m),
              P <- (I - K) P

S is factored once per update (Cholesky); its inverse is never formed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._validation import check_nonnegative, check_positive, check_square, check_vector
from .exceptions import DataError, FactorizationError, ProtocolError
from .geo import SpatialCovariance

PREDICTED = "predicted"
UPDATED = "updated"


@dataclass(frozen=True)
class NoiseConfig:
    """Process covariance Q and observation variance scale r (R = r I)."""

    process: SpatialCovariance
    observation_scale: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "observation_scale", check_positive(self.observation_scale, "observation_scale"))
        if isinstance(self.process, np.ndarray):
            object.__setattr__(self, "process", SpatialCovariance(check_square(self.process, "process"), float("nan")))

    @property
    def dim(self):
        return self.process.dim


@dataclass(frozen=True, eq=False)
class FilterState:
    """Mean and error covariance at one point of the predict/update cycle.

    ``covariance`` may be ``None`` for states recorded by :func:`run` with
    ``keep_covariance=False``; ``variance`` (its diagonal) is always kept.
    """

    mean: np.ndarray
    covariance: np.ndarray
    year: int
    phase: str
    variance: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.phase not in (PREDICTED, UPDATED):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.variance is None:
            if self.covariance is None:
                raise ValueError("either covariance or variance is required")
            object.__setattr__(self, "variance", np.diagonal(self.covariance).copy())
        for arr in (self.mean, self.covariance, self.variance):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def dim(self):
        return self.mean.shape[0]

    def without_covariance(self):
        return FilterState(self.mean, None, self.year, self.phase, self.variance)


def _symmetrize(c):
    c += c.T
    c *= 0.5
    return c


def init(initial_observation, noise, initial_covariance_scale=None, year=0):
    """Start the filter at an observed column.

    The initial covariance is ``p0 * I``; ``p0`` defaults to the observation
    scale.
    """
    d = noise.dim
    mean = check_vector(initial_observation, "initial_observation", length=d).copy()
    p0 = noise.observation_scale if initial_covariance_scale is None else check_nonnegative(
        initial_covariance_scale, "initial_covariance_scale"
    )
    cov = np.zeros((d, d))
    cov.flat[:: d + 1] = p0
    return FilterState(mean, cov, int(year), UPDATED)


def predict(state, noise):
    if state.phase != UPDATED:
        raise ProtocolError(f"predict called on a {state.phase} state (year {state.year}); update first")
    return _forecast_step(state, noise)


def _forecast_step(state, noise):
    if state.covariance is None:
        raise ProtocolError("cannot step a state recorded without its covariance")
    if noise.dim != state.dim:
        raise DataError(f"noise dimension {noise.dim} does not match state dimension {state.dim}")
    cov = np.add(state.covariance, noise.process.matrix)
    return FilterState(state.mean.copy(), cov, state.year + 1, PREDICTED)


def forecast(state, noise, steps):
    """``steps`` consecutive predicts with no update in between.

    Returns the list of predicted states, one per step.
    """
    if state.phase != UPDATED:
        raise ProtocolError(f"forecast must start from an updated state, got {state.phase}")
    out = []
    for _ in range(int(steps)):
        state = _forecast_step(state, noise)
        out.append(state)
    return out


def update(state, observation, noise, joseph=False):
    """Blend the predicted state with an observed column."""
    if state.phase != PREDICTED:
        raise ProtocolError(f"update called on an {state.phase} state (year {state.year}); predict first")
    if state.covariance is None:
        raise ProtocolError("cannot update a state recorded without its covariance")
    d = state.dim
    z = check_vector(observation, "observation", length=d)
    r = noise.observation_scale
    P = state.covariance
    S = P.copy()
    S.flat[:: d + 1] += r
    try:
        factor = linalg.cho_factor(S, lower=True, overwrite_a=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise FactorizationError(state.year) from exc
    # S and P are symmetric, so S^-1 P = (P S^-1)^T = K^T.
    Kt = linalg.cho_solve(factor, P, check_finite=False)
    del S, factor
    mean = state.mean + Kt.T @ (z - state.mean)
    if joseph:
        # (I - K) P (I - K)^T + r K K^T
        IK = -Kt.T
        IK.flat[:: d + 1] += 1.0
        cov = IK @ P @ IK.T
        cov += r * (Kt.T @ Kt)
    else:
        cov = Kt.T @ P
        np.subtract(P, cov, out=cov)
    del Kt
    _symmetrize(cov)
    return FilterState(mean, cov, state.year, UPDATED)


def marginal_std(state, tol=1e-9):
    """Per-county standard deviation ``sqrt(diag(P))``.

    Diagonal entries in ``[-tol, 0)`` are treated as rounding noise and
    clamped to zero.
    """
    var = np.asarray(state.variance if isinstance(state, FilterState) else np.diagonal(state), float)
    if np.any(var < -tol):
        worst = float(var.min())
        raise FactorizationError(getattr(state, "year", None), f"negative variance {worst:g} on covariance diagonal")
    return np.sqrt(np.clip(var, 0.0, None))


@dataclass(frozen=True)
class FilterRun:
    """States recorded by :func:`run`.

    ``priors`` and ``posteriors`` are keyed by year. Training years appear
    in both; prediction years only in ``priors``. ``states`` lists every
    recorded state in the order produced.
    """

    initial: FilterState
    states: list
    priors: dict
    posteriors: dict
    train_years: tuple
    predict_years: tuple

    def final(self, year):
        """The state a year ends in: posterior if trained, else prior."""
        if year in self.posteriors:
            return self.posteriors[year]
        return self.priors[year]


def _as_years(years):
    if years is None:
        return ()
    years = tuple(int(y) for y in years)
    if years and list(years) != list(range(years[0], years[0] + len(years))):
        raise DataError(f"year range must be contiguous and ascending, got {years}")
    return years


def run(panel, noise, train_years, predict_years=(), initial_covariance_scale=None, joseph=False, keep_covariance=True):
    """Initialize on the year before training, filter the training years,
    then forecast the prediction years without updates.

    With ``keep_covariance=False`` only the last state keeps its full
    covariance matrix, which bounds memory at large county counts.
    """
    train = _as_years(train_years)
    pred = _as_years(predict_years)
    if not train:
        raise DataError("at least one training year is required")
    if pred and pred[0] != train[-1] + 1:
        raise DataError(f"prediction years {pred[0]}.. must immediately follow training years ..{train[-1]}")
    start = train[0] - 1
    for y in (start, *train, *pred):
        panel.year_index(y)
    if panel.n_counties != noise.dim:
        raise DataError(f"panel has {panel.n_counties} counties but process covariance is {noise.dim}x{noise.dim}")

    state = init(panel.column(start), noise, initial_covariance_scale, year=start)
    initial = state if keep_covariance else state.without_covariance()
    records = []

    def push(s):
        # Once a newer state exists, the previous one's full matrix is no longer needed.
        if not keep_covariance and records and records[-1].covariance is not None:
            records[-1] = records[-1].without_covariance()
        records.append(s)

    for y in train:
        prior = predict(state, noise)
        state = None
        push(prior)
        state = update(prior, panel.column(y), noise, joseph=joseph)
        del prior
        push(state)
    for _ in pred:
        state = _forecast_step(state, noise)
        push(state)
    priors = {s.year: s for s in records if s.phase == PREDICTED}
    posteriors = {s.year: s for s in records if s.phase == UPDATED}
    return FilterRun(initial, records, priors, posteriors, train, pred)
