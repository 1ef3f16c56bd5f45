"""Run configuration: a flat ``key = value`` text file plus overrides.

Blank lines and lines starting with ``#`` are ignored. Year ranges are
written ``2015-2019`` (or a single year, or empty for none); lists are
comma separated.
"""

import dataclasses
import os
from dataclasses import dataclass, fields

from .data import DatasetKind
from .exceptions import ConfigError
from .geo import EARTH_RADIUS_KM

FIRST_YEAR = 2014
LAST_YEAR = 2020


def parse_years(text):
    text = str(text).strip()
    if not text:
        return ()
    lo, sep, hi = text.partition("-")
    try:
        lo = int(lo)
        hi = int(hi) if sep else lo
    except ValueError:
        raise ConfigError(f"invalid year range {text!r}") from None
    if hi < lo:
        raise ConfigError(f"year range {text!r} is descending")
    return tuple(range(lo, hi + 1))


def format_years(years):
    if not years:
        return ""
    return str(years[0]) if len(years) == 1 else f"{years[0]}-{years[-1]}"


def _floats(text):
    try:
        return tuple(float(s) for s in str(text).split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"invalid number list {text!r}") from None


def _ints(text):
    try:
        return tuple(int(s) for s in str(text).split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"invalid integer list {text!r}") from None


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"invalid boolean {text!r}")


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none", "default"):
        return None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"invalid number {text!r}") from None


def _float(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid number {text!r}") from None


def _int(text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid integer {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    rates_path: str
    centroids_path: str
    geometry_path: str = ""
    output_dir: str = "output"
    threshold_km: float = None
    observation_scale: float = 0.01
    initial_covariance_scale: float = None
    train_years: tuple = (2015, 2016, 2017, 2018, 2019)
    predict_years: tuple = (2020,)
    hotspot_quantile: float = 0.05
    hotspot_rounding: str = "floor"
    exclusion_mask: bool = False
    evaluate: str = "prior"
    earth_radius_km: float = EARTH_RADIUS_KM
    joseph_form: bool = False
    rio_arriba_fips: str = "35039"
    histogram_bins: int = 50
    insets: bool = False
    sensitivity_scales: tuple = (0.01, 0.03, 0.05)
    multiyear_train_counts: tuple = (4, 3, 2, 1)

    @property
    def kind(self):
        return DatasetKind.parse(self.dataset)

    @property
    def start_year(self):
        return self.train_years[0] - 1

    @property
    def resolved_threshold_km(self):
        return self.kind.default_threshold_km if self.threshold_km is None else self.threshold_km

    @property
    def resolved_initial_covariance_scale(self):
        return self.observation_scale if self.initial_covariance_scale is None else self.initial_covariance_scale

    def validate(self, check_paths=True):
        try:
            self.kind
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        if check_paths:
            for name in ("rates_path", "centroids_path"):
                path = getattr(self, name)
                if not path:
                    raise ConfigError(f"{name} is required")
                if not os.path.isfile(path):
                    raise ConfigError(f"{name}: file not found: {path}")
            if self.geometry_path and not os.path.isfile(self.geometry_path):
                raise ConfigError(f"geometry_path: file not found: {self.geometry_path}")
        if not self.train_years:
            raise ConfigError("train_years must not be empty")
        if self.predict_years and self.predict_years[0] != self.train_years[-1] + 1:
            raise ConfigError("predict_years must immediately follow train_years")
        years = (self.start_year, *self.train_years, *self.predict_years)
        if min(years) < FIRST_YEAR or max(years) > LAST_YEAR:
            raise ConfigError(f"years must lie within {FIRST_YEAR}-{LAST_YEAR}, got {years[0]}-{years[-1]}")
        for name in ("observation_scale", "earth_radius_km"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.threshold_km is not None and not self.threshold_km > 0:
            raise ConfigError("threshold_km must be positive")
        if self.initial_covariance_scale is not None and self.initial_covariance_scale < 0:
            raise ConfigError("initial_covariance_scale must be non-negative")
        if not 0 < self.hotspot_quantile < 1:
            raise ConfigError("hotspot_quantile must lie in (0, 1)")
        if self.hotspot_rounding not in ("floor", "ceil"):
            raise ConfigError("hotspot_rounding must be 'floor' or 'ceil'")
        if self.evaluate not in ("prior", "posterior"):
            raise ConfigError("evaluate must be 'prior' or 'posterior'")
        if self.histogram_bins < 1:
            raise ConfigError("histogram_bins must be at least 1")
        if not self.sensitivity_scales or any(s <= 0 for s in self.sensitivity_scales):
            raise ConfigError("sensitivity_scales must be a non-empty list of positive numbers")
        return self

    def to_text(self):
        """Serialize with every default resolved; reloads to an equal config."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "threshold_km":
                v = self.resolved_threshold_km
            elif f.name == "initial_covariance_scale":
                v = self.resolved_initial_covariance_scale
            lines.append(f"{f.name} = {_format(f.name, v)}")
        return "\n".join(lines) + "\n"

    def resolved(self):
        return dataclasses.replace(
            self, threshold_km=self.resolved_threshold_km, initial_covariance_scale=self.resolved_initial_covariance_scale
        )


_PARSERS = {
    "dataset": lambda s: str(s).strip().lower(),
    "rates_path": str,
    "centroids_path": str,
    "geometry_path": str,
    "output_dir": str,
    "threshold_km": _opt_float,
    "observation_scale": _float,
    "initial_covariance_scale": _opt_float,
    "train_years": parse_years,
    "predict_years": parse_years,
    "hotspot_quantile": _float,
    "hotspot_rounding": lambda s: str(s).strip().lower(),
    "exclusion_mask": _bool,
    "evaluate": lambda s: str(s).strip().lower(),
    "earth_radius_km": _float,
    "joseph_form": _bool,
    "rio_arriba_fips": lambda s: str(s).strip(),
    "histogram_bins": _int,
    "insets": _bool,
    "sensitivity_scales": _floats,
    "multiyear_train_counts": _ints,
}

FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def _format(name, value):
    if name in ("train_years", "predict_years"):
        return format_years(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_config(file_values=None, overrides=None):
    """Merge raw string values (file first, then overrides) into a RunConfig."""
    raw = dict(file_values or {})
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in ("dataset", "rates_path", "centroids_path"):
        if key not in raw:
            raise ConfigError(f"missing required setting {key!r}")
    kwargs = {}
    for key, value in raw.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown setting {key!r}")
        kwargs[key] = _PARSERS[key](value) if isinstance(value, str) else value
    return RunConfig(**kwargs)


def load_config(path=None, overrides=None):
    file_values = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            file_values = parse_config_text(fh.read(), path)
    return build_config(file_values, overrides)
