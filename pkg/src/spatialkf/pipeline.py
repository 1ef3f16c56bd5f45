"""End-to-end pipeline: ingest, covariance, filter, assess, write artifacts."""

import contextlib
import csv
import logging
import os
import re
from dataclasses import dataclass

import numpy as np

from . import analysis, reports
from .config import FIRST_YEAR, LAST_YEAR
from .data import clean_panel, load_panel, write_panel
from .exceptions import SpatialKFError
from .filter import NoiseConfig, run
from .geo import build_process_covariance, calibrate_decay, load_centroids
from .render import emit_all, emit_error_histogram, load_geometry

log = logging.getLogger(__name__)


class StageError(SpatialKFError):
    """Wraps a module error with the pipeline stage it came from."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@contextlib.contextmanager
def stage(name):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (SpatialKFError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class Prepared:
    config: object
    landscape: object
    panel: object
    noise: NoiseConfig


def prepare(config):
    """Load the landscape and panel and build the process covariance."""
    cfg = config
    with stage("ingest"):
        landscape = load_centroids(cfg.centroids_path)
        panel = load_panel(cfg.rates_path, cfg.kind, landscape, years=range(FIRST_YEAR, LAST_YEAR + 1))
        panel = clean_panel(panel, cfg.kind, cfg.rio_arriba_fips if cfg.kind.biennial else None)
    with stage("covariance"):
        b = calibrate_decay(cfg.resolved_threshold_km)
        Q = build_process_covariance(landscape, b, cfg.earth_radius_km)
        noise = NoiseConfig(Q, cfg.observation_scale)
    return Prepared(cfg, landscape, panel, noise)


def _assess_kwargs(cfg):
    return dict(
        exclude_missing=cfg.exclusion_mask,
        hotspot_quantile=cfg.hotspot_quantile,
        hotspot_rounding=cfg.hotspot_rounding,
    )


def _out(cfg, name):
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def write_missing(panel, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", *panel.years])
        for f, row in zip(panel.fips_order, panel.missing):
            w.writerow([f, *(int(v) for v in row)])


def read_missing(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        years = [int(y) for y in next(reader)[1:]]
        rows = [[v == "1" for v in row[1:]] for row in reader]
    return years, np.array(rows, bool).reshape(len(rows), len(years))


def cmd_run(config, prepared=None):
    """Full train/predict run. Returns the list of yearly assessments."""
    cfg = config.validate()
    p = prepared or prepare(cfg)
    ds = cfg.kind.value
    with stage("filter"):
        fr = run(
            p.panel,
            p.noise,
            cfg.train_years,
            cfg.predict_years,
            cfg.resolved_initial_covariance_scale,
            joseph=cfg.joseph_form,
            keep_covariance=False,
        )
    with stage("analysis"):
        assessments = analysis.assess_run(fr, p.panel, evaluate=cfg.evaluate, **_assess_kwargs(cfg))
    with stage("write"):
        with open(_out(cfg, f"{ds}_config.txt"), "w") as fh:
            fh.write(cfg.to_text())
        write_panel(p.panel, _out(cfg, f"{ds}_panel.csv"))
        write_missing(p.panel, _out(cfg, f"{ds}_missing.csv"))
        for year in (*fr.train_years, *fr.predict_years):
            reports.write_state(fr.final(year), p.panel.fips_order, _out(cfg, f"{ds}_{year}_state.csv"))
        for a in assessments:
            reports.write_assessment(a, _out(cfg, f"{ds}_{a.year}_assessment.csv"))
        reports.write_summary(analysis.summarize(ds, assessments), _out(cfg, f"{ds}_summary.csv"))
    with stage("render"):
        geometry = load_geometry(cfg.geometry_path) if cfg.geometry_path else None
        for a in assessments:
            emit_all(a, geometry, cfg.output_dir, ds, cfg.histogram_bins, cfg.insets)
    return assessments


def cmd_sensitivity(config, scales=None, prepared=None):
    cfg = config.validate()
    p = prepared or prepare(cfg)
    ds = cfg.kind.value
    with stage("sensitivity"):
        rows = analysis.sensitivity_analysis(
            p.panel,
            p.noise.process,
            scales if scales is not None else cfg.sensitivity_scales,
            cfg.train_years,
            cfg.predict_years,
            cfg.initial_covariance_scale,
            **_assess_kwargs(cfg),
        )
    with stage("write"):
        reports.write_sensitivity(ds, rows, _out(cfg, f"{ds}_sensitivity.csv"))
    return rows


def cmd_multiyear(config, all_years=False, prepared=None):
    """Compare the fully trained filter with ones trained on fewer years.

    Writes one overlay histogram per (k, year): 2020 only by default, every
    predicted year with ``all_years``.
    """
    cfg = config.validate()
    p = prepared or prepare(cfg)
    ds = cfg.kind.value
    first, last = cfg.start_year, cfg.predict_years[-1] if cfg.predict_years else cfg.train_years[-1]
    with stage("multiyear"):
        results = analysis.multi_year_study(
            p.panel,
            p.noise,
            cfg.multiyear_train_counts,
            first_year=first,
            last_year=last,
            initial_covariance_scale=cfg.initial_covariance_scale,
        )
        full = run(p.panel, p.noise, range(first + 1, last), (last,), cfg.initial_covariance_scale, keep_covariance=False)
    with stage("write"):
        reports.write_multiyear(ds, results, _out(cfg, f"{ds}_multiyear.csv"))
        for r in results:
            if r.year != last and not all_years:
                continue
            ref = analysis.absolute_errors(full.priors[r.year].mean, p.panel.column(r.year))
            emit_error_histogram(
                ref,
                cfg.histogram_bins,
                _out(cfg, f"{ds}_{r.year}_multiyear_k{r.train_count}"),
                compare=r.abs_errors,
                labels=("full", f"trained_{r.train_count}"),
                title=f"{ds} {r.year}: fully trained vs {r.train_count} training year(s)",
            )
    return results


_ASSESSMENT_RE = re.compile(r"^(?P<ds>[a-z]+)_(?P<year>\d{4})_assessment\.csv$")


def cmd_render(config):
    """Re-render every saved assessment for the configured dataset."""
    cfg = config
    ds = cfg.kind.value
    with stage("render"):
        geometry = load_geometry(cfg.geometry_path) if cfg.geometry_path else None
        missing_path = os.path.join(cfg.output_dir, f"{ds}_missing.csv")
        years, missing = read_missing(missing_path) if os.path.isfile(missing_path) else ([], None)
        paths = []
        for name in sorted(os.listdir(cfg.output_dir)):
            m = _ASSESSMENT_RE.match(name)
            if not m or m["ds"] != ds:
                continue
            year = int(m["year"])
            mask = missing[:, years.index(year)] if missing is not None and year in years else None
            a = reports.read_assessment(os.path.join(cfg.output_dir, name), year, mask)
            paths += emit_all(a, geometry, cfg.output_dir, ds, cfg.histogram_bins, cfg.insets)
    return paths
