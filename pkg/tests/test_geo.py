import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialkf.exceptions import ConfigError, DataError
from spatialkf.geo import (
    CentroidTable,
    GeoPoint,
    build_process_covariance,
    calibrate_decay,
    haversine_km,
    haversine_matrix,
    load_centroids,
    write_centroids,
)

from .conftest import make_landscape
from .oracles import chord_distance_km, covariance_loop

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)


def test_identical_points_zero():
    assert haversine_km(GeoPoint(35.0, -85.0), GeoPoint(35.0, -85.0)) == 0.0


def test_quarter_great_circle():
    # 6371 * pi / 2, matched by the 3-D chord oracle
    assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 90)) == pytest.approx(10007.543398010286, abs=1e-9)
    assert chord_distance_km(0, 0, 0, 90) == pytest.approx(10007.543398010286, abs=1e-6)


def test_antipodal_bounded():
    assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(math.pi * 6371.0)
    assert haversine_km(GeoPoint(90, 0), GeoPoint(-90, 0)) <= math.pi * 6371.0


@pytest.mark.parametrize("bad", [(float("nan"), 0.0), (0.0, float("inf")), (91.0, 0.0), (0.0, -181.0)])
def test_rejects_bad_coordinates(bad):
    with pytest.raises(DataError):
        GeoPoint(*bad)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_symmetry_and_oracle(a, b):
    ab = haversine_km(a, b)
    assert ab == haversine_km(b, a)
    assert 0.0 <= ab <= math.pi * 6371.0 + 1e-9
    assert ab == pytest.approx(chord_distance_km(a.latitude, a.longitude, b.latitude, b.longitude), abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-6


def test_calibrate_unit_threshold():
    assert calibrate_decay(1.0) == pytest.approx(0.6931471805599453, rel=1e-15)


def test_calibrate_halves_at_threshold():
    for t in (0.5, 37.0, 300.0, 500.0, 1234.5):
        assert math.exp(-calibrate_decay(t) * t) == pytest.approx(0.5, abs=1e-15)


def test_calibrate_double_threshold_quarters():
    b = calibrate_decay(500.0)
    assert b == pytest.approx(0.0013862943611198907, rel=1e-15)
    assert math.exp(-b * 1000.0) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("bad", [0.0, -5.0, float("nan"), float("inf")])
def test_calibrate_rejects(bad):
    with pytest.raises(ConfigError):
        calibrate_decay(bad)


def test_covariance_three_county_oracle():
    lat, lon = [35.0, 36.5, 31.2], [-85.0, -80.1, -97.3]
    table = CentroidTable(["01001", "01003", "48001"], lat, lon)
    b = calibrate_decay(400.0)
    Q = build_process_covariance(table, b).matrix
    np.testing.assert_allclose(Q, covariance_loop(lat, lon, b), rtol=1e-12, atol=0)


def test_covariance_half_at_threshold():
    # two points on the equator exactly 300 km apart
    dlon = math.degrees(300.0 / 6371.0)
    table = CentroidTable(["00001", "00002"], [0.0, 0.0], [0.0, dlon])
    Q = build_process_covariance(table, calibrate_decay(300.0)).matrix
    assert Q[0, 1] == pytest.approx(0.5, abs=1e-12)


def test_covariance_invariants():
    table = make_landscape(300, seed=3)
    Q = build_process_covariance(table, calibrate_decay(250.0)).matrix
    assert np.all(np.diag(Q) == 1.0)
    assert np.array_equal(Q, Q.T)
    assert np.all((Q > 0) & (Q <= 1))
    assert not Q.flags.writeable


def test_covariance_monotone_in_distance():
    table = make_landscape(60, seed=5)
    D = haversine_matrix(table.latitudes, table.longitudes)
    Q = build_process_covariance(table, calibrate_decay(500.0)).matrix
    row_d, row_q = D[0, 1:], Q[0, 1:]
    order = np.argsort(row_d)
    assert np.all(np.diff(row_q[order]) < 0)


def test_covariance_psd_small():
    for seed in range(5):
        table = make_landscape(50, seed=seed)
        Q = build_process_covariance(table, calibrate_decay(300.0 + 100 * seed)).matrix
        assert np.linalg.eigvalsh(Q).min() >= -1e-9


def test_distance_matrix_block_boundary():
    # > one block of rows so the mirrored fill crosses block edges
    table = make_landscape(600, seed=2)
    D = haversine_matrix(table.latitudes, table.longitudes)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0.0)
    for i, j in [(0, 599), (255, 256), (300, 10), (511, 512)]:
        a = GeoPoint(table.latitudes[i], table.longitudes[i])
        b = GeoPoint(table.latitudes[j], table.longitudes[j])
        assert D[i, j] == pytest.approx(haversine_km(a, b), rel=1e-12)


def test_rejects_empty_and_duplicates():
    with pytest.raises(DataError):
        CentroidTable([], [], [])
    with pytest.raises(DataError, match="01001"):
        CentroidTable(["01001", "1001"], [30.0, 31.0], [-90.0, -91.0])


def test_centroid_csv_round_trip(tmp_path):
    table = make_landscape(12)
    write_centroids(table, tmp_path / "c.csv")
    back = load_centroids(tmp_path / "c.csv")
    assert back.fips == table.fips
    assert np.array_equal(back.latitudes, table.latitudes)
    assert np.array_equal(back.longitudes, table.longitudes)


def test_centroid_csv_errors(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("fips,latitude,longitude\n01001,1,2\n")
    with pytest.raises(DataError, match="header"):
        load_centroids(p)
    p.write_text("fips,lat,lon\n01001,1,2\n01003,abc,2\n")
    with pytest.raises(DataError, match=":3"):
        load_centroids(p)
