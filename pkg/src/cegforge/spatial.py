"""Choropleth support: join a CEG's area variable to polygon geometry.

The graph's first variable is treated as the spatial one, so area names
are the labels on the root's outgoing edges. For an area, the probability
of an outcome category is computed from root-to-sink paths through that
area (and through every requested conditional category): each path is
weighted by the product of posterior-mean edge probabilities of all edges
AFTER the area edge, and the weights of paths ending in the category are
normalized by the total weight of qualifying paths. This is the single
place that definition lives; swap it here to try alternatives such as
count-weighted averaging.

Geometry is plain GeoJSON. Shapefiles must be converted to GeoJSON before
loading, which keeps geodesy dependencies out of the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .ceg import SINK_ID, CEGModel
from .errors import ConfigurationError, ParseError, UnknownNameError, ValidationError

__all__ = [
    "GREY_SENTINEL",
    "PALETTES",
    "AreaFeature",
    "AreaMap",
    "AreaProbabilityRow",
    "AreaProbabilityTable",
    "load_geo",
    "match_areas",
    "area_probabilities",
    "colour_for_value",
    "render_map_document",
]

GREY_SENTINEL = "#808080"

_WGS84_ALIASES = {
    "wgs84",
    "epsg:4326",
    "crs84",
    "ogc:crs84",
    "urn:ogc:def:crs:ogc:1.3:crs84",
}
_MERCATOR_ALIASES = {"epsg:3857", "web-mercator", "webmercator"}
_MERCATOR_RADIUS = 6378137.0

# Five-stop anchor tables approximating the named colour ramps; values are
# interpolated linearly in sRGB between neighbouring stops. The exact hues
# do not matter downstream, only that each ramp is fixed and monotone.
PALETTES: dict[str, tuple[str, ...]] = {
    "viridis": ("#440154", "#3B528B", "#21918C", "#5EC962", "#FDE725"),
    "magma": ("#000004", "#51127C", "#B73779", "#FB8861", "#FCFDBF"),
    "turbo": ("#30123B", "#28BBEC", "#A2FC3C", "#FB8022", "#7A0403"),
    "plasma": ("#0D0887", "#7E03A8", "#CC4778", "#F89441", "#F0F921"),
    "inferno": ("#000004", "#57106E", "#BC3754", "#F98C0A", "#FCFFA4"),
    "cividis": ("#00224E", "#35456C", "#6E6E78", "#A69D75", "#FDEA45"),
    "mako": ("#0B0405", "#39346B", "#357BA2", "#43BEA8", "#DEF5E5"),
    "rocket": ("#03051A", "#6B1D5E", "#CB3E71", "#F37651", "#FAEBDD"),
}

_ALLOWED_GEOMETRY = ("Polygon", "MultiPolygon")


@dataclass(frozen=True)
class AreaFeature:
    name: str
    geometry: dict
    matched: bool = False
    properties: dict | None = None


@dataclass(frozen=True)
class AreaMap:
    features: tuple[AreaFeature, ...]
    name_property: str

    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def matched_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.matched)

    def to_payload(self) -> dict:
        return {
            "name_property": self.name_property,
            "features": [
                {
                    "name": f.name,
                    "geometry": f.geometry,
                    "matched": f.matched,
                    "properties": f.properties or {},
                }
                for f in self.features
            ],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AreaMap":
        return cls(
            features=tuple(
                AreaFeature(
                    name=f["name"],
                    geometry=f["geometry"],
                    matched=f.get("matched", False),
                    properties=f.get("properties") or {},
                )
                for f in payload["features"]
            ),
            name_property=payload["name_property"],
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AreaMap":
        return cls.from_payload(json.loads(text))


def _inverse_mercator(x: float, y: float) -> tuple[float, float]:
    lon = math.degrees(x / _MERCATOR_RADIUS)
    lat = math.degrees(2.0 * math.atan(math.exp(y / _MERCATOR_RADIUS)) - math.pi / 2.0)
    return lon, lat


def _reproject_coords(coords, transform):
    if (
        isinstance(coords, (list, tuple))
        and len(coords) >= 2
        and all(isinstance(v, (int, float)) for v in coords[:2])
    ):
        lon, lat = transform(float(coords[0]), float(coords[1]))
        return [lon, lat] + [float(v) for v in coords[2:]]
    return [_reproject_coords(c, transform) for c in coords]


def load_geo(
    path=None,
    *,
    text: str | bytes | None = None,
    name_property: str = "name",
    crs: str | None = None,
) -> AreaMap:
    """Parse a GeoJSON FeatureCollection into an AreaMap.

    Coordinates are converted to WGS84 when ``crs`` names a supported
    source system (WGS84 aliases pass through; EPSG:3857 is inverted
    analytically). Any other identifier is rejected rather than guessed.
    """
    if (path is None) == (text is None):
        raise ConfigurationError("provide exactly one of path or text")
    if path is not None:
        with open(path, "rb") as fh:
            raw = fh.read()
    else:
        raw = text
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")

    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid GeoJSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("expected a GeoJSON FeatureCollection")

    transform = None
    if crs is not None:
        key = crs.strip().lower()
        if key in _WGS84_ALIASES:
            transform = None
        elif key in _MERCATOR_ALIASES:
            transform = _inverse_mercator
        else:
            raise ConfigurationError(f"unsupported CRS {crs!r}")

    features: list[AreaFeature] = []
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        if name_property not in props or props[name_property] in (None, ""):
            raise ValidationError(f"feature {i}: missing property {name_property!r}")
        geometry = feature.get("geometry") or {}
        gtype = geometry.get("type")
        if gtype not in _ALLOWED_GEOMETRY:
            raise ValidationError(
                f"feature {i}: geometry must be Polygon or MultiPolygon, got {gtype!r}"
            )
        if transform is not None:
            geometry = {
                "type": gtype,
                "coordinates": _reproject_coords(geometry["coordinates"], transform),
            }
        features.append(
            AreaFeature(
                name=str(props[name_property]),
                geometry=geometry,
                matched=False,
                properties={k: v for k, v in props.items()},
            )
        )
    return AreaMap(features=tuple(features), name_property=name_property)


def _area_labels(ceg: CEGModel) -> tuple[str, ...]:
    return tuple(e.label for e in ceg.outgoing(ceg.root_id))


def match_areas(area_map: AreaMap, ceg: CEGModel) -> AreaMap:
    """Flag features whose name is an area category of the CEG.

    Features naming no category stay in the map but are marked unmatched
    (rendered grey, excluded from probability computation). Two matched
    features may not share a name.
    """
    known = set(_area_labels(ceg))
    seen: set[str] = set()
    flagged = []
    for f in area_map.features:
        matched = f.name in known
        if matched:
            if f.name in seen:
                raise ValidationError(f"duplicate area name {f.name!r} in geometry")
            seen.add(f.name)
        flagged.append(replace(f, matched=matched))
    return replace(area_map, features=tuple(flagged))


@dataclass(frozen=True)
class AreaProbabilityRow:
    area: str
    category: str
    probability: float | None  # None when no qualifying path exists
    path_mass: float


@dataclass(frozen=True)
class AreaProbabilityTable:
    rows: tuple[AreaProbabilityRow, ...]
    colour_by_variable: str
    conditionals: tuple[str, ...] = ()

    def areas(self) -> tuple[str, ...]:
        out: list[str] = []
        for r in self.rows:
            if r.area not in out:
                out.append(r.area)
        return tuple(out)

    def categories(self) -> tuple[str, ...]:
        out: list[str] = []
        for r in self.rows:
            if r.category not in out:
                out.append(r.category)
        return tuple(out)

    def probability(self, area: str, category: str) -> float | None:
        for r in self.rows:
            if r.area == area and r.category == category:
                return r.probability
        raise UnknownNameError(f"no row for area {area!r}, category {category!r}")

    def distribution(self, area: str) -> dict[str, float | None]:
        out = {r.category: r.probability for r in self.rows if r.area == area}
        if not out:
            raise UnknownNameError(f"no rows for area {area!r}")
        return out

    def to_csv_text(self) -> str:
        import csv as _csv
        import io as _io

        buf = _io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        writer.writerow(["area", "category", "probability", "path_mass"])
        for r in self.rows:
            writer.writerow(
                [
                    r.area,
                    r.category,
                    "NA" if r.probability is None else f"{r.probability:.10g}",
                    f"{r.path_mass:.10g}",
                ]
            )
        return buf.getvalue()

    def to_payload(self) -> dict:
        return {
            "colour_by_variable": self.colour_by_variable,
            "conditionals": list(self.conditionals),
            "rows": [
                {
                    "area": r.area,
                    "category": r.category,
                    "probability": r.probability,
                    "path_mass": r.path_mass,
                }
                for r in self.rows
            ],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AreaProbabilityTable":
        return cls(
            rows=tuple(
                AreaProbabilityRow(
                    r["area"], r["category"], r["probability"], r["path_mass"]
                )
                for r in payload["rows"]
            ),
            colour_by_variable=payload["colour_by_variable"],
            conditionals=tuple(payload.get("conditionals", ())),
        )


def _edge_level(ceg: CEGModel) -> dict[tuple[str, str, str], int]:
    levels = {p.id: p.level for p in ceg.positions}
    return {
        (e.source, e.target, e.label): levels[e.source] for e in ceg.edges
    }


def area_probabilities(
    ceg: CEGModel,
    colour_by: str,
    conditionals: list[str] | tuple[str, ...] = (),
) -> AreaProbabilityTable:
    """Per-area distribution over the final variable's categories.

    ``colour_by`` must label an edge into the sink. Conditionals must name
    categories of intermediate variables (not the area, not the outcome),
    at most one per variable; paths missing any conditional are discarded.
    Areas with no qualifying path get rows with probability None, which is
    deliberately distinct from probability 0.
    """
    final_labels: list[str] = []
    for e in ceg.edges:
        if e.target == SINK_ID and e.label not in final_labels:
            final_labels.append(e.label)
    if colour_by not in final_labels:
        raise UnknownNameError(
            f"{colour_by!r} is not a category of the final variable"
        )

    edge_levels = _edge_level(ceg)
    levels_of_label: dict[str, set[int]] = {}
    for (_, _, label), lvl in edge_levels.items():
        levels_of_label.setdefault(label, set()).add(lvl)
    max_level = max(edge_levels.values(), default=0)

    wanted = tuple(conditionals)
    used_levels: set[int] = set()
    for category in wanted:
        lvls = levels_of_label.get(category)
        if lvls is None:
            raise UnknownNameError(f"unknown category {category!r}")
        inner = {l for l in lvls if 0 < l < max_level}
        if not inner:
            raise ValidationError(
                f"{category!r} is not a category of an intermediate variable"
            )
        if len(inner) > 1:
            raise ValidationError(
                f"{category!r} is ambiguous: it appears at several tree levels"
            )
        lvl = next(iter(inner))
        if lvl in used_levels:
            raise ValidationError(
                "at most one conditional per variable; "
                f"{category!r} duplicates level {lvl}"
            )
        used_levels.add(lvl)

    def weight(path) -> float:
        # area edge excluded: downstream transitions only
        w = 1.0
        for e in path[1:]:
            sm = ceg.stage_model(e.stage)
            w *= float(sm.posterior_mean[e.param_index])
        return w

    need = set(wanted)
    mass: dict[str, dict[str, float]] = {}
    totals: dict[str, float] = {}
    for path in ceg.paths():
        if not path:
            continue
        area = path[0].label
        labels = {e.label for e in path}
        if not need <= labels:
            continue
        w = weight(path)
        outcome = path[-1].label
        mass.setdefault(area, {})
        mass[area][outcome] = mass[area].get(outcome, 0.0) + w
        totals[area] = totals.get(area, 0.0) + w

    rows: list[AreaProbabilityRow] = []
    for area in sorted(_area_labels(ceg)):
        total = totals.get(area, 0.0)
        for category in final_labels:
            m = mass.get(area, {}).get(category, 0.0)
            if total <= 0.0:
                rows.append(AreaProbabilityRow(area, category, None, 0.0))
            else:
                rows.append(AreaProbabilityRow(area, category, m / total, m))
    return AreaProbabilityTable(
        rows=tuple(rows),
        colour_by_variable=colour_by,
        conditionals=wanted,
    )


def _hex_to_rgb(value: str) -> tuple[int, int, int]:
    v = value.lstrip("#")
    return int(v[0:2], 16), int(v[2:4], 16), int(v[4:6], 16)


def _rgb_to_hex(rgb: tuple[float, float, float]) -> str:
    return "#%02X%02X%02X" % tuple(int(round(max(0.0, min(255.0, c)))) for c in rgb)


def colour_for_value(
    palette: str, value: float, vmin: float, vmax: float
) -> str:
    """Deterministic linear ramp colour for a value in [vmin, vmax]."""
    if palette not in PALETTES:
        raise ConfigurationError(
            f"unknown palette {palette!r}; expected one of {', '.join(sorted(PALETTES))}"
        )
    stops = PALETTES[palette]
    if vmax > vmin:
        t = (value - vmin) / (vmax - vmin)
    else:
        # degenerate range: fall back to the raw probability scale
        t = value
    t = max(0.0, min(1.0, t))
    scaled = t * (len(stops) - 1)
    lo = int(math.floor(scaled))
    hi = min(lo + 1, len(stops) - 1)
    frac = scaled - lo
    c0 = _hex_to_rgb(stops[lo])
    c1 = _hex_to_rgb(stops[hi])
    return _rgb_to_hex(tuple(c0[i] + (c1[i] - c0[i]) * frac for i in range(3)))


def render_map_document(
    area_map: AreaMap,
    table: AreaProbabilityTable,
    palette: str,
    colour_by: str,
) -> dict:
    """GeoJSON FeatureCollection annotated with probabilities and fills.

    Matched features get a ramp colour over the [min, max] of the defined
    probabilities. Unmatched features keep the grey sentinel; matched
    features whose probability is undefined get grey plus a hatch marker
    so no-data is never mistaken for probability 0.
    """
    if palette not in PALETTES:
        raise ConfigurationError(
            f"unknown palette {palette!r}; expected one of {', '.join(sorted(PALETTES))}"
        )
    if colour_by not in table.categories():
        raise UnknownNameError(
            f"{colour_by!r} is not a category of the probability table"
        )

    values: dict[str, float | None] = {}
    for f in area_map.features:
        if f.matched:
            try:
                values[f.name] = table.probability(f.name, colour_by)
            except UnknownNameError:
                values[f.name] = None
    defined = [v for v in values.values() if v is not None]
    vmin = min(defined) if defined else 0.0
    vmax = max(defined) if defined else 0.0

    features = []
    for f in area_map.features:
        props = {
            "name": f.name,
            "matched": f.matched,
            "probability": None,
            "label": "no data",
            "fill": GREY_SENTINEL,
            "pattern": None,
        }
        if f.matched:
            value = values.get(f.name)
            if value is None:
                props["label"] = f"{f.name}: no qualifying paths"
                props["pattern"] = "hatch"
            else:
                props["probability"] = value
                props["label"] = f"{f.name}: {value:.1%}"
                props["fill"] = colour_for_value(palette, value, vmin, vmax)
        features.append(
            {"type": "Feature", "geometry": f.geometry, "properties": props}
        )
    return {
        "type": "FeatureCollection",
        "properties": {
            "colour_by": colour_by,
            "palette": palette,
            "conditionals": list(table.conditionals),
            "scale": {"min": vmin, "max": vmax},
        },
        "features": features,
    }
