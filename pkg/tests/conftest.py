import csv

import numpy as np
import pytest

from spatialkf.geo import CentroidTable


def make_landscape(d, seed=0):
    """Random county centroids inside the contiguous-US bounding box."""
    rng = np.random.default_rng(seed)
    fips = [f"{(i // 50) + 1:02d}{(i % 50) * 2 + 1:03d}" for i in range(d)]
    return CentroidTable(fips, rng.uniform(25.0, 49.0, d), rng.uniform(-124.0, -67.0, d))


def make_rates(landscape, years=range(2014, 2021), seed=1, level=20.0):
    rng = np.random.default_rng(seed)
    d = len(landscape)
    walk = np.cumsum(rng.normal(0.0, 1.0, (d, len(years))), axis=1)
    return level + rng.gamma(2.0, 3.0, d)[:, None] + walk


def write_rates(path, fips, years, values, skip=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "year", "rate"])
        for i, f in enumerate(fips):
            for j, y in enumerate(years):
                if (f, y) in skip or f in skip:
                    continue
                w.writerow([f, y, repr(float(values[i, j]))])


def write_centroid_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "lat", "lon"])
        for f, lat, lon in zip(table.fips, table.latitudes, table.longitudes):
            w.writerow([f, repr(float(lat)), repr(float(lon))])


def write_square_geometry(path, table, half=0.1):
    import json

    feats = []
    for f, lat, lon in zip(table.fips, table.latitudes, table.longitudes):
        ring = [[lon - half, lat - half], [lon + half, lat - half], [lon + half, lat + half], [lon - half, lat + half], [lon - half, lat - half]]
        feats.append({"type": "Feature", "properties": {"fips": f}, "geometry": {"type": "Polygon", "coordinates": [ring]}})
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh)


@pytest.fixture
def landscape():
    return make_landscape(40)


@pytest.fixture
def dataset_files(tmp_path, landscape):
    """Centroid, rate and geometry files for a 40-county synthetic mortality panel."""
    years = list(range(2014, 2021))
    values = make_rates(landscape, years)
    cpath, rpath, gpath = tmp_path / "centroids.csv", tmp_path / "rates.csv", tmp_path / "counties.geojson"
    write_centroid_csv(cpath, landscape)
    write_rates(rpath, landscape.fips, years, values, skip={(landscape.fips[3], 2014)})
    write_square_geometry(gpath, landscape)
    return {"centroids": cpath, "rates": rpath, "geometry": gpath, "values": values, "years": years, "dir": tmp_path}


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion checked by test_acceptance.py")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "PASS" if report.passed else ("WAIVED" if report.skipped else "FAIL")
        _ACCEPTANCE[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status:6s} {title}")
