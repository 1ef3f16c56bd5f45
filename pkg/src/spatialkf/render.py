"""Figure artifacts: choropleth GeoJSON/SVG maps and error histograms.

Maps are written twice: a GeoJSON FeatureCollection in true lon/lat with
the plotted values as properties, and a presentational SVG using a plain
equirectangular projection.
"""

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from ._validation import check_fips
from .exceptions import DataError

# 20-class palettes, lowest class first.
VULNERABILITY_COLORS = (
    "#08306B", "#104582", "#18599A", "#206EB1", "#3481BE",
    "#4C94C8", "#63A8D3", "#8ABFD1", "#B9D9CA", "#E8F2C3",
    "#FFEEB3", "#FECB9B", "#FDA982", "#F78569", "#E75F4E",
    "#D83833", "#C6171C", "#A60F17", "#870812", "#67000D",
)  # fmt: skip
ACCURACY_COLORS = (
    "#67000D", "#8A0F13", "#AE1E18", "#D12D1E", "#E15130",
    "#ED7945", "#F9A15A", "#FDBF75", "#FED992", "#FFF2B0",
    "#F1F9B2", "#D5ED97", "#B9E17C", "#97D267", "#6BBE5F",
    "#3FA957", "#19944D", "#10793C", "#085F2C", "#00441B",
)  # fmt: skip
MISSING_COLOR = "#000000"
HOTSPOT_HIT_COLOR = "#FF8C00"
HOTSPOT_MISS_COLOR = "#000000"
PREDICTED_HOTSPOT_COLOR = "#67000D"
UNPAINTED_COLOR = "#F0F0F0"
SERIES_COLORS = ("#2171B5", "#CB181D")

# (scale, source lon, source lat, target lon, target lat) for the SVG insets.
INSETS = {
    "02": (0.35, -152.0, 62.0, -117.0, 27.0),
    "15": (1.0, -157.0, 20.5, -105.0, 25.0),
}


@dataclass(frozen=True)
class ColorScale:
    kind: str
    bounds: tuple
    colors: tuple

    def __post_init__(self):
        b = np.asarray(self.bounds, float)
        if len(b) != len(self.colors) or np.any(np.diff(b) <= 0) or b[-1] < 1.0:
            raise ValueError("bounds must be strictly increasing, end at 1 and match the colors")

    def classify(self, values):
        """1-based class per value; a value on a bound belongs to the class above it."""
        return np.minimum(np.searchsorted(np.asarray(self.bounds[:-1]), np.asarray(values, float), side="right") + 1, len(self.colors))

    def color(self, cls):
        return self.colors[int(cls) - 1]


def _twenty_step(kind, colors):
    return ColorScale(kind, tuple(k / 20 for k in range(1, 21)), colors)


ACCURACY_SCALE = _twenty_step("accuracy_20step", ACCURACY_COLORS)
VULNERABILITY_SCALE = _twenty_step("vulnerability_20step", VULNERABILITY_COLORS)
HOTSPOT_SCALE = ColorScale("hotspot_binary", (0.5, 1.0), (UNPAINTED_COLOR, PREDICTED_HOTSPOT_COLOR))


def load_geometry(path):
    """Read county boundaries from GeoJSON; features need a ``fips`` property."""
    with open(path) as fh:
        doc = json.load(fh)
    features = doc.get("features") if isinstance(doc, dict) else None
    if features is None:
        raise DataError(f"{path}: not a GeoJSON FeatureCollection")
    out = {}
    for n, feat in enumerate(features):
        props = feat.get("properties") or {}
        if "fips" not in props:
            raise DataError(f"{path}: feature {n} has no 'fips' property")
        fips = check_fips(props["fips"])
        geom = feat.get("geometry") or {}
        if geom.get("type") not in ("Polygon", "MultiPolygon"):
            raise DataError(f"{path}: feature {fips} is not a polygon")
        for ring in _rings(geom):
            if len(ring) < 4 or list(ring[0]) != list(ring[-1]):
                raise DataError(f"{path}: feature {fips} has an unclosed ring")
        if fips in out:
            raise DataError(f"{path}: duplicate geometry for {fips}")
        out[fips] = geom
    return out


def _rings(geom):
    if geom["type"] == "Polygon":
        yield from geom["coordinates"]
    else:
        for poly in geom["coordinates"]:
            yield from poly


def _check_coverage(fips_order, geometry):
    gaps = [f for f in fips_order if f not in geometry]
    if gaps:
        raise DataError(f"no geometry for counties: {', '.join(gaps)}")


def _write_geojson(path, fips_order, geometry, properties):
    features = [
        {"type": "Feature", "properties": {"fips": f, **props}, "geometry": geometry[f]}
        for f, props in zip(fips_order, properties)
    ]
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, separators=(",", ":"))
        fh.write("\n")


def _project(fips, lon, lat, insets):
    if insets and fips[:2] in INSETS:
        scale, slon, slat, tlon, tlat = INSETS[fips[:2]]
        if fips[:2] == "02" and lon > 0:
            lon -= 360.0
        lon = tlon + scale * (lon - slon)
        lat = tlat + scale * (lat - slat)
    return lon, lat


def _write_svg_map(path, fips_order, geometry, colors, title, insets=False, width=960):
    rings = []
    for f, color in zip(fips_order, colors):
        for ring in _rings(geometry[f]):
            rings.append((f, color, [_project(f, float(x), float(y), insets) for x, y, *_ in ring]))
    lons = [p[0] for _, _, pts in rings for p in pts]
    lats = [p[1] for _, _, pts in rings for p in pts]
    lon0, lon1, lat0, lat1 = min(lons), max(lons), min(lats), max(lats)
    kx = math.cos(math.radians((lat0 + lat1) / 2))
    span_x = max((lon1 - lon0) * kx, 1e-9)
    scale = (width - 20) / span_x
    height = int(math.ceil((lat1 - lat0) * scale)) + 50
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="10" y="20" font-family="sans-serif" font-size="14">{title}</text>',
    ]
    by_county = {}
    for f, color, pts in rings:
        d = " ".join(
            f"{'M' if k == 0 else 'L'}{10 + (x - lon0) * kx * scale:.2f},{40 + (lat1 - y) * scale:.2f}"
            for k, (x, y) in enumerate(pts)
        )
        by_county.setdefault((f, color), []).append(d + " Z")
    for (f, color), parts in by_county.items():
        out.append(f'<path id="c{f}" fill="{color}" stroke="#FFFFFF" stroke-width="0.2" d="{" ".join(parts)}"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _stem(out_dir, dataset, year, kind):
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, f"{dataset}_{year}_{kind}")


def emit_heat_map(assessment, geometry, out_dir, dataset="dataset", insets=False):
    """Vulnerability choropleth: 20 blue-to-red levels, missing counties black."""
    fips = assessment.fips_order
    _check_coverage(fips, geometry)
    colors, props = [], []
    for i, f in enumerate(fips):
        level = int(assessment.vulnerability_level[i])
        missing = bool(assessment.missing[i])
        color = MISSING_COLOR if missing else VULNERABILITY_SCALE.color(level)
        colors.append(color)
        props.append({"level": level, "cdf": float(assessment.cdf[i]), "missing": missing, "color": color})
    stem = _stem(out_dir, dataset, assessment.year, "heatmap")
    _write_geojson(stem + ".geojson", fips, geometry, props)
    _write_svg_map(stem + ".svg", fips, geometry, colors, f"{dataset} {assessment.year} vulnerability", insets)
    return [stem + ".geojson", stem + ".svg"]


def emit_accuracy_map(assessment, geometry, out_dir, dataset="dataset", insets=False):
    """General-accuracy choropleth: 20 red-to-green classes of width 0.05."""
    fips = assessment.fips_order
    _check_coverage(fips, geometry)
    acc = assessment.general_accuracy
    colors, props = [], []
    for i, f in enumerate(fips):
        if np.isnan(acc[i]):
            color, cls, value = MISSING_COLOR, None, None
        else:
            cls = int(ACCURACY_SCALE.classify(acc[i]))
            color, value = ACCURACY_SCALE.color(cls), float(acc[i])
        colors.append(color)
        props.append({"general_accuracy": value, "class": cls, "color": color})
    stem = _stem(out_dir, dataset, assessment.year, "accuracy")
    _write_geojson(stem + ".geojson", fips, geometry, props)
    _write_svg_map(stem + ".svg", fips, geometry, colors, f"{dataset} {assessment.year} general accuracy", insets)
    return [stem + ".geojson", stem + ".svg"]


def hotspot_colors(fips_order, predicted, actual, mode):
    """Color per county for the hotspot maps.

    ``accuracy`` paints hits orange and misses black; false positives stay
    unpainted. ``prediction`` paints only the predicted hotspots.
    """
    if mode == "accuracy":
        return [
            (HOTSPOT_HIT_COLOR if f in predicted else HOTSPOT_MISS_COLOR) if f in actual else UNPAINTED_COLOR
            for f in fips_order
        ]
    if mode == "prediction":
        return [PREDICTED_HOTSPOT_COLOR if f in predicted else UNPAINTED_COLOR for f in fips_order]
    raise DataError(f"hotspot map mode must be 'accuracy' or 'prediction', got {mode!r}")


def emit_hotspot_map(assessment, geometry, out_dir, mode="accuracy", dataset="dataset", insets=False):
    fips = assessment.fips_order
    _check_coverage(fips, geometry)
    pred, actual = assessment.predicted_hotspots, assessment.actual_hotspots
    colors = hotspot_colors(fips, pred, actual, mode)
    props = [
        {"is_actual_hotspot": f in actual, "is_predicted_hotspot": f in pred, "color": c}
        for f, c in zip(fips, colors)
    ]
    stem = _stem(out_dir, dataset, assessment.year, f"hotspot_{mode}")
    _write_geojson(stem + ".geojson", fips, geometry, props)
    _write_svg_map(stem + ".svg", fips, geometry, colors, f"{dataset} {assessment.year} hotspots ({mode})", insets)
    return [stem + ".geojson", stem + ".svg"]


def histogram_counts(abs_errors, bins, upper=None):
    """Equal-width bins over ``[0, upper]`` (default: the max error).

    The last bin is closed on the right. With all-zero errors everything
    lands in the first bin.
    """
    bins = int(bins)
    if bins < 1:
        raise DataError("bins must be at least 1")
    e = np.asarray(abs_errors, float)
    top = float(e.max()) if upper is None else float(upper)
    if top <= 0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(e, bins=edges)
    return edges, counts


def _svg_histogram(path, edges, series, title, width=640, height=360):
    pad = 40
    top = max(int(c.max()) for _, c, _ in series) or 1
    bw = (width - 2 * pad) / (len(edges) - 1)
    span = edges[-1] - edges[0] or 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{pad}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#000000"/>',
    ]
    for n, (label, counts, max_error) in enumerate(series):
        color = SERIES_COLORS[n % len(SERIES_COLORS)]
        for k, c in enumerate(counts):
            h = (height - 2 * pad) * c / top
            out.append(
                f'<rect x="{pad + k * bw:.2f}" y="{height - pad - h:.2f}" width="{bw:.2f}" height="{h:.2f}" '
                f'fill="{color}" fill-opacity="0.5"/>'
            )
        x = pad + (max_error - edges[0]) / span * (width - 2 * pad)
        y = height - pad
        out.append(
            f'<path d="M{x:.2f},{y - 40 - 14 * n:.2f} L{x:.2f},{y - 4:.2f}" stroke="#FF0000" stroke-width="2"/>'
            f'<text x="{x:.2f}" y="{y - 44 - 14 * n:.2f}" font-family="sans-serif" font-size="11" '
            f'fill="#FF0000" text-anchor="middle">{label} max {max_error:.2f}</text>'
        )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def emit_error_histogram(abs_errors, bins, out_stem, compare=None, labels=("errors", "comparison"), title=None):
    """Write ``<out_stem>.csv`` (bin edges and counts), ``<out_stem>_max.csv``
    and ``<out_stem>.svg``.

    ``compare`` overlays a second error vector on shared bins; each
    series' maximum error is annotated.
    """
    series = [np.asarray(abs_errors, float)]
    if compare is not None:
        series.append(np.asarray(compare, float))
    upper = max(float(s.max()) for s in series)
    edges, _ = histogram_counts(series[0], bins, upper)
    counts = [histogram_counts(s, bins, upper)[1] for s in series]
    os.makedirs(os.path.dirname(out_stem) or ".", exist_ok=True)
    with open(out_stem + ".csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", *(f"count_{labels[n]}" for n in range(len(series)))])
        for k in range(len(edges) - 1):
            w.writerow([repr(float(edges[k])), repr(float(edges[k + 1])), *(int(c[k]) for c in counts)])
    with open(out_stem + "_max.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "max_error"])
        for n, s in enumerate(series):
            w.writerow([labels[n], repr(float(s.max()))])
    _svg_histogram(
        out_stem + ".svg",
        edges,
        [(labels[n], counts[n], float(s.max())) for n, s in enumerate(series)],
        title or os.path.basename(out_stem),
    )
    return [out_stem + ".csv", out_stem + "_max.csv", out_stem + ".svg"]


def emit_all(assessment, geometry, out_dir, dataset, bins=50, insets=False):
    """Every figure kind for one assessed year. Maps are skipped without geometry."""
    paths = []
    if geometry is not None:
        paths += emit_heat_map(assessment, geometry, out_dir, dataset, insets)
        paths += emit_accuracy_map(assessment, geometry, out_dir, dataset, insets)
        paths += emit_hotspot_map(assessment, geometry, out_dir, "accuracy", dataset, insets)
        paths += emit_hotspot_map(assessment, geometry, out_dir, "prediction", dataset, insets)
    stem = _stem(out_dir, dataset, assessment.year, "error_histogram")
    paths += emit_error_histogram(assessment.abs_errors[assessment.included], bins, stem)
    return paths
