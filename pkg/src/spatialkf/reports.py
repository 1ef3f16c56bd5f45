"""CSV writers and readers for states, assessments and summary tables.

Floats are written with ``repr`` so a file read back reproduces the exact
doubles, and identical inputs give byte-identical files.
"""

import csv

import numpy as np

from ._validation import check_fips
from .analysis import YearlyAssessment
from .exceptions import DataError
from .filter import marginal_std

SUMMARY_HEADER = ["variable", "year", "avg_general_acc", "hotspot_acc", "avg_error", "max_error"]
ASSESSMENT_HEADER = [
    "fips",
    "abs_error",
    "general_accuracy",
    "level",
    "cdf",
    "is_actual_hotspot",
    "is_predicted_hotspot",
]


def _f(x):
    return repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_state(state, fips_order, path):
    """``fips,mean,std`` snapshot of one filter state."""
    std = marginal_std(state)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["fips", "mean", "std"])
        for f, m, s in zip(fips_order, state.mean, std):
            w.writerow([f, _f(m), _f(s)])


def write_assessment(assessment, path):
    actual, pred = assessment.actual_hotspots, assessment.predicted_hotspots
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(ASSESSMENT_HEADER)
        for i, f in enumerate(assessment.fips_order):
            w.writerow(
                [
                    f,
                    _f(assessment.abs_errors[i]),
                    _f(assessment.general_accuracy[i]),
                    int(assessment.vulnerability_level[i]),
                    _f(assessment.cdf[i]),
                    int(f in actual),
                    int(f in pred),
                ]
            )


def read_assessment(path, year, missing=None):
    """Rebuild a :class:`YearlyAssessment` from its CSV export.

    Only the columns in the file are recovered; predicted/actual rates and
    standard deviations come back as NaN. ``missing`` restores the
    missing-data mask when known (NaN accuracy marks excluded counties).
    """
    fips, err, acc, lvl, cdf, act, prd = [], [], [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ASSESSMENT_HEADER:
            raise DataError(f"{path}: unexpected assessment header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(ASSESSMENT_HEADER):
                raise DataError(f"{path}: malformed row at line {lineno}")
            try:
                fips.append(check_fips(row[0]))
                err.append(float(row[1]))
                acc.append(float(row[2]))
                lvl.append(int(row[3]))
                cdf.append(float(row[4]))
                act.append(row[5] == "1")
                prd.append(row[6] == "1")
            except ValueError as exc:
                raise DataError(f"{path}: malformed row at line {lineno}: {exc}") from None
    d = len(fips)
    acc = np.array(acc)
    included = ~np.isnan(acc)
    actual = frozenset(f for f, a in zip(fips, act) if a)
    pred = frozenset(f for f, p in zip(fips, prd) if p)
    per = np.array(acc)
    return YearlyAssessment(
        year=int(year),
        fips_order=tuple(fips),
        predicted=np.full(d, np.nan),
        actual=np.full(d, np.nan),
        std=np.full(d, np.nan),
        abs_errors=np.array(err),
        general_accuracy=per,
        avg_general_accuracy=float(per[included].mean()) if included.any() else float("nan"),
        actual_hotspots=actual,
        predicted_hotspots=pred,
        hotspot_accuracy=len(actual & pred) / len(actual) if actual else float("nan"),
        vulnerability_level=np.array(lvl, dtype=int),
        cdf=np.array(cdf),
        missing=np.zeros(d, bool) if missing is None else np.asarray(missing, bool),
        included=included,
    )


def write_summary(rows, path):
    """Training/prediction efficacy table, one row per (variable, year)."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([r.variable, r.year, _f(r.avg_general_acc), _f(r.hotspot_acc), _f(r.avg_error), _f(r.max_error)])


def read_summary(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {
                "variable": row["variable"],
                "year": int(row["year"]),
                **{k: float(row[k]) for k in SUMMARY_HEADER[2:]},
            }
            for row in reader
        ]


def write_sensitivity(variable, rows, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["variable", "observation_scale", "year", "avg_general_acc", "hotspot_acc", "avg_error", "max_error"])
        for r in rows:
            w.writerow(
                [variable, _f(r.observation_scale), r.year, _f(r.avg_general_acc), _f(r.hotspot_acc), _f(r.avg_error), _f(r.max_error)]
            )


def write_multiyear(variable, results, path):
    """Max error per (training-year count, predicted year)."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["variable", "train_years", "year", "avg_error", "max_error"])
        for r in results:
            w.writerow([variable, r.train_count, r.year, _f(r.abs_errors.mean()), _f(r.max_error)])
