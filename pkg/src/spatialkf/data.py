"""County rate panels: ingestion, zero-fill, and the two imputation rules.

Every panel is reconciled against a :class:`~spatialkf.geo.CentroidTable`
(the 2020 county landscape), which fixes both the county count and the
row order.
"""

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_fips
from .exceptions import DataError

RIO_ARRIBA_FIPS = "35039"


class DatasetKind(enum.Enum):
    MORTALITY = "mortality"
    DISPENSING = "dispensing"
    DISABILITY = "disability"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise DataError(f"unknown dataset kind {value!r} (expected one of {choices})") from None

    @property
    def units(self):
        return _UNITS[self]

    @property
    def biennial(self):
        """Only the SVI disability ranks are published every other year."""
        return self is DatasetKind.DISABILITY

    @property
    def default_threshold_km(self):
        # Placeholders; the published per-dataset thresholds are not stated in prose.
        return _DEFAULT_THRESHOLD_KM[self]


_UNITS = {
    DatasetKind.MORTALITY: "deaths per 100,000 persons",
    DatasetKind.DISPENSING: "prescriptions per 100 persons",
    DatasetKind.DISABILITY: "percentile rank (0-100)",
}

_DEFAULT_THRESHOLD_KM = {
    DatasetKind.MORTALITY: 500.0,
    DatasetKind.DISABILITY: 500.0,
    DatasetKind.DISPENSING: 300.0,
}


@dataclass(frozen=True, eq=False)
class CountyPanel:
    """A ``d x T`` matrix of rates, one row per county and one column per year.

    ``missing`` flags cells that were absent from the raw file and hold the
    zero fill. Both arrays are read-only.
    """

    fips_order: tuple
    years: tuple
    values: np.ndarray
    missing: np.ndarray = field(default=None)

    def __post_init__(self):
        fips = tuple(self.fips_order)
        years = tuple(int(y) for y in self.years)
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(fips), len(years)):
            raise DataError(f"values shape {values.shape} does not match ({len(fips)}, {len(years)})")
        if len(set(fips)) != len(fips):
            raise DataError("panel FIPS order contains duplicates")
        if years and list(years) != list(range(years[0], years[0] + len(years))):
            raise DataError(f"panel years must be contiguous and ascending, got {years}")
        if not np.all(np.isfinite(values)):
            raise DataError("panel contains non-finite values")
        missing = np.zeros(values.shape, bool) if self.missing is None else np.array(self.missing, bool)
        if missing.shape != values.shape:
            raise DataError("missing mask shape does not match values")
        values.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "fips_order", fips)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @property
    def n_counties(self):
        return len(self.fips_order)

    def year_index(self, year):
        try:
            return self.years.index(int(year))
        except ValueError:
            raise DataError(f"year {year} not in panel years {self.years[0]}-{self.years[-1]}") from None

    def column(self, year):
        return self.values[:, self.year_index(year)]

    def missing_column(self, year):
        return self.missing[:, self.year_index(year)]

    def __eq__(self, other):
        if not isinstance(other, CountyPanel):
            return NotImplemented
        return (
            self.fips_order == other.fips_order
            and self.years == other.years
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.missing, other.missing)
        )

    __hash__ = None


def _read_rate_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["fips", "year", "rate"]:
            raise DataError(f"{path}: expected header 'fips,year,rate', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"{path}: malformed row at line {lineno}: expected 3 fields, got {len(row)}")
            try:
                fips = check_fips(row[0])
                year = int(row[1])
                rate = float(row[2])
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}: malformed row at line {lineno}: {exc}") from None
            if not np.isfinite(rate):
                raise DataError(f"{path}: malformed row at line {lineno}: non-finite rate")
            yield lineno, fips, year, rate


def load_panel(path, kind, landscape, years=None):
    """Load a ``fips,year,rate`` file onto the landscape's county order.

    Counties or (county, year) cells absent from the file are set to 0.0 and
    flagged in ``missing``. ``years`` defaults to the contiguous span of
    years present in the file; biennial data should pass the full annual
    span so the odd-year columns exist for :func:`interpolate_biennial`.
    """
    DatasetKind.parse(kind)
    rows = list(_read_rate_rows(path))
    unknown = sorted({fips for _, fips, _, _ in rows if fips not in landscape})
    if unknown:
        raise DataError(f"{path}: FIPS codes not in the county landscape: {', '.join(unknown)}")
    if years is None:
        if not rows:
            raise DataError(f"{path}: no data rows")
        present = [y for _, _, y, _ in rows]
        years = range(min(present), max(present) + 1)
    years = tuple(int(y) for y in years)
    col = {y: j for j, y in enumerate(years)}
    d = len(landscape)
    values = np.zeros((d, len(years)))
    missing = np.ones((d, len(years)), bool)
    for lineno, fips, year, rate in rows:
        j = col.get(year)
        if j is None:
            continue
        i = landscape.index(fips)
        if not missing[i, j]:
            raise DataError(f"{path}: duplicate observation for {fips} in {year} at line {lineno}")
        values[i, j] = rate
        missing[i, j] = False
    return CountyPanel(tuple(landscape.fips), years, values, missing)


def interpolate_biennial(panel):
    """Fill odd-year columns with the midpoint of the bracketing even years.

    ``value(y) = value(y-1) + (value(y+1) - value(y-1)) / 2`` for each odd
    calendar year ``y``; even-year columns are returned unchanged.
    """
    years = panel.years
    if not years or years[0] % 2 or years[-1] % 2:
        raise DataError(f"biennial interpolation needs even first and last years, got {years[:1]}..{years[-1:]}")
    values = panel.values.copy()
    missing = panel.missing.copy()
    for j in range(1, len(years) - 1, 2):
        lo, hi = values[:, j - 1], values[:, j + 1]
        values[:, j] = lo + (hi - lo) / 2
        missing[:, j] = panel.missing[:, j - 1] | panel.missing[:, j + 1]
    return replace(panel, values=values, missing=missing)


def apply_rio_arriba_fix(panel, fips=RIO_ARRIBA_FIPS):
    """Replace 2017-2019 for one county with quarter steps from 2016 to 2020."""
    fips = check_fips(fips)
    try:
        i = panel.fips_order.index(fips)
    except ValueError:
        raise DataError(f"county {fips} not in panel") from None
    j16, j20 = panel.year_index(2016), panel.year_index(2020)
    values = panel.values.copy()
    missing = panel.missing.copy()
    start = values[i, j16]
    step = (values[i, j20] - start) / 4
    for k in (1, 2, 3):
        values[i, j16 + k] = start + k * step
        missing[i, j16 + k] = panel.missing[i, j16] | panel.missing[i, j20]
    return replace(panel, values=values, missing=missing)


def clean_panel(panel, kind, rio_arriba_fips=RIO_ARRIBA_FIPS):
    """Apply the dataset-appropriate imputation rules to a loaded panel."""
    kind = DatasetKind.parse(kind)
    if kind.biennial:
        panel = interpolate_biennial(panel)
        if rio_arriba_fips and rio_arriba_fips in panel.fips_order:
            panel = apply_rio_arriba_fix(panel, rio_arriba_fips)
    return panel


def write_panel(panel, path):
    """Export as ``fips,<year1>,...,<yearT>``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", *panel.years])
        for f, row in zip(panel.fips_order, panel.values):
            w.writerow([f, *(repr(float(v)) for v in row)])


def read_panel(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0].strip().lower() != "fips":
            raise DataError(f"{path}: expected header starting with 'fips'")
        years = [int(y) for y in header[1:]]
        fips, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: malformed row at line {lineno}")
            fips.append(check_fips(row[0]))
            rows.append([float(v) for v in row[1:]])
    return CountyPanel(tuple(fips), tuple(years), np.array(rows).reshape(len(fips), len(years)))
