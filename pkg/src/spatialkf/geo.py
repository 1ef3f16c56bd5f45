"""Great-circle distances between county centroids and the spatial process covariance.

The process covariance is an exponential-decay kernel on haversine distance,

    q_ij = exp(-b * d(x_i, x_j)),

with the decay rate ``b`` calibrated so correlation halves at a chosen
distance threshold.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_fips, check_positive
from .exceptions import DataError

EARTH_RADIUS_KM = 6371.0

# Rows per block when filling the covariance; bounds temporaries to ~block*d doubles.
_BLOCK_ROWS = 256


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        lat, lon = float(self.latitude), float(self.longitude)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise DataError(f"non-finite coordinates ({self.latitude}, {self.longitude})")
        if not -90.0 <= lat <= 90.0:
            raise DataError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise DataError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", lon)


class CentroidTable:
    """Ordered county population centers.

    The row order here is the canonical county order used by every panel,
    state vector and covariance matrix in a run.
    """

    def __init__(self, fips, latitudes, longitudes):
        fips = tuple(check_fips(f) for f in fips)
        lat = np.asarray(latitudes, dtype=np.float64)
        lon = np.asarray(longitudes, dtype=np.float64)
        if not (len(fips) == lat.shape[0] == lon.shape[0]):
            raise DataError("fips, latitudes and longitudes must have equal length")
        if len(fips) == 0:
            raise DataError("centroid table is empty")
        seen = set()
        dups = sorted({f for f in fips if f in seen or seen.add(f)})
        if dups:
            raise DataError(f"duplicate FIPS codes in centroid table: {', '.join(dups)}")
        if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
            raise DataError("centroid table contains non-finite coordinates")
        if np.any(np.abs(lat) > 90.0) or np.any(np.abs(lon) > 180.0):
            raise DataError("centroid coordinates out of range")
        self.fips = fips
        self.latitudes = lat
        self.longitudes = lon
        self.latitudes.setflags(write=False)
        self.longitudes.setflags(write=False)
        self._index = {f: i for i, f in enumerate(fips)}

    @classmethod
    def from_points(cls, entries):
        """Build from an iterable of ``(fips, GeoPoint)`` pairs."""
        entries = list(entries)
        return cls(
            [f for f, _ in entries],
            [p.latitude for _, p in entries],
            [p.longitude for _, p in entries],
        )

    def __len__(self):
        return len(self.fips)

    def __iter__(self):
        for f, lat, lon in zip(self.fips, self.latitudes, self.longitudes):
            yield f, GeoPoint(lat, lon)

    def index(self, fips):
        return self._index[check_fips(fips)]

    def __contains__(self, fips):
        try:
            return check_fips(fips) in self._index
        except DataError:
            return False

    @property
    def coords(self):
        """``(d, 2)`` array of (latitude, longitude) in degrees."""
        return np.column_stack([self.latitudes, self.longitudes])


def load_centroids(path):
    """Read a ``fips,lat,lon`` CSV into a :class:`CentroidTable`."""
    fips, lats, lons = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["fips", "lat", "lon"]:
            raise DataError(f"{path}: expected header 'fips,lat,lon', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                fips.append(check_fips(row[0]))
                lats.append(float(row[1]))
                lons.append(float(row[2]))
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return CentroidTable(fips, lats, lons)


def write_centroids(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "lat", "lon"])
        for f, lat, lon in zip(table.fips, table.latitudes, table.longitudes):
            w.writerow([f, repr(float(lat)), repr(float(lon))])


def haversine_km(a, b, radius_km=EARTH_RADIUS_KM):
    """Great-circle distance in kilometers between two :class:`GeoPoint`.

    >>> round(haversine_km(GeoPoint(0, 0), GeoPoint(0, 90)), 2)
    10007.54
    """
    if not isinstance(a, GeoPoint):
        a = GeoPoint(*a)
    if not isinstance(b, GeoPoint):
        b = GeoPoint(*b)
    phi1, phi2 = math.radians(a.latitude), math.radians(b.latitude)
    dphi = phi2 - phi1
    dlam = math.radians(b.longitude - a.longitude)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    # rounding can push h a hair past 1 for antipodal points
    return 2.0 * radius_km * math.asin(math.sqrt(min(1.0, h)))


def _haversine_block(lat1, lon1, lat2, lon2, radius_km):
    # lat1/lon1 are column vectors (radians), lat2/lon2 row vectors.
    h = np.sin((lat2 - lat1) * 0.5) ** 2
    h += np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) * 0.5) ** 2
    np.minimum(h, 1.0, out=h)
    np.sqrt(h, out=h)
    np.arcsin(h, out=h)
    h *= 2.0 * radius_km
    return h


def haversine_matrix(latitudes, longitudes, radius_km=EARTH_RADIUS_KM):
    """Dense pairwise distance matrix (km), symmetric bit-for-bit."""
    return _pairwise(np.asarray(latitudes, float), np.asarray(longitudes, float), radius_km, None)


def calibrate_decay(threshold_km):
    """Decay rate ``b`` such that ``exp(-b * threshold_km) == 0.5``."""
    threshold_km = check_positive(threshold_km, "threshold_km")
    return math.log(2.0) / threshold_km


@dataclass(frozen=True, eq=False)
class SpatialCovariance:
    matrix: np.ndarray
    decay_rate: float

    @property
    def dim(self):
        return self.matrix.shape[0]


def _pairwise(lat_deg, lon_deg, radius_km, decay_rate):
    """Fill the upper triangle block-row by block-row, then mirror it.

    Each entry is computed independently, so the block size never changes
    the result.
    """
    d = lat_deg.shape[0]
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    out = np.empty((d, d), dtype=np.float64)
    for i0 in range(0, d, _BLOCK_ROWS):
        i1 = min(i0 + _BLOCK_ROWS, d)
        block = _haversine_block(lat[i0:i1, None], lon[i0:i1, None], lat[None, i0:], lon[None, i0:], radius_km)
        if decay_rate is not None:
            block *= -decay_rate
            np.exp(block, out=block)
        diag = block[:, : i1 - i0]
        iu = np.triu_indices(i1 - i0, 1)
        diag.T[iu] = diag[iu]
        np.fill_diagonal(diag, 1.0 if decay_rate is not None else 0.0)
        out[i0:i1, i0:] = block
        out[i1:, i0:i1] = block[:, i1 - i0 :].T
    return out


def build_process_covariance(centroids, decay_rate, radius_km=EARTH_RADIUS_KM):
    """Exponential-decay spatial covariance over the centroid table.

    Returns a :class:`SpatialCovariance` whose matrix has unit diagonal and is
    exactly symmetric.
    """
    decay_rate = check_positive(decay_rate, "decay_rate")
    if not isinstance(centroids, CentroidTable):
        raise DataError("centroids must be a CentroidTable")
    matrix = _pairwise(centroids.latitudes, centroids.longitudes, radius_km, decay_rate)
    matrix.setflags(write=False)
    return SpatialCovariance(matrix=matrix, decay_rate=decay_rate)
