"""Geometry loading, area matching, and choropleth probability tables."""

import json
import math

import pytest

from cegforge import (
    AreaMap,
    AreaProbabilityTable,
    ConfigurationError,
    ParseError,
    UnknownNameError,
    ValidationError,
    area_probabilities,
    assign_stages,
    colour_for_value,
    contract_to_ceg,
    create_event_tree,
    delete_nodes,
    initial_staging,
    load_csv,
    load_geo,
    match_areas,
    posterior_update,
    prior_table_skeleton,
    render_map_document,
    specify_priors,
    staged_tree_prior,
)
from cegforge.spatial import GREY_SENTINEL, PALETTES

SPATIAL_CSV = """\
area,time,outcome
north,day,won
north,day,lost
north,day,won
north,night,lost
north,night,won
south,day,won
south,day,won
south,night,lost
south,night,lost
south,night,won
"""


def _square(x0: float, y0: float, side: float = 1.0):
    return {
        "type": "Polygon",
        "coordinates": [
            [
                [x0, y0],
                [x0 + side, y0],
                [x0 + side, y0 + side],
                [x0, y0 + side],
                [x0, y0],
            ]
        ],
    }


def _collection(names, extra_props=None):
    return json.dumps(
        {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"name": n, **(extra_props or {})},
                    "geometry": _square(float(i), 0.0),
                }
                for i, n in enumerate(names)
            ],
        }
    )


def _spatial_model(tree=None):
    data = load_csv(text=SPATIAL_CSV)
    tree = tree if tree is not None else create_event_tree(data)
    groups = [[v.id] for v in tree.situations() if v.id != "s0"]
    staging = assign_stages(tree, initial_staging(tree), groups)
    overrides = {}
    for i, row in enumerate(prior_table_skeleton(tree, staging).rows, start=1):
        overrides[f"u{i}"] = [float(j + 2) for j in range(row.k)]
    priors = specify_priors(tree, staging, "custom", overrides)
    return tree, posterior_update(staged_tree_prior(tree, staging, priors))


def _brute_force(tree, model, conditionals=()):
    """Path enumeration straight off the tree and its stage models."""
    stage_of = {m: sm for sm in model.stage_models for m in sm.members}
    need = set(conditionals)
    mass: dict[str, dict[str, float]] = {}
    for leaf in tree.leaves():
        path = leaf.path
        if not need <= set(path):
            continue
        weight = 1.0
        vertex = tree.root.id
        for depth, label in enumerate(path):
            sm = stage_of[vertex]
            if depth >= 1:  # the area edge itself carries no weight
                weight *= sm.posterior_mean[sm.labels.index(label)]
            vertex = next(
                e.child for e in tree.children(vertex) if e.label == label
            )
        acc = mass.setdefault(path[0], {})
        acc[path[-1]] = acc.get(path[-1], 0.0) + weight
    return {
        area: {cat: m / sum(per.values()) for cat, m in per.items()}
        for area, per in mass.items()
    }


# ---------------------------------------------------------------------------
# Loading and matching


def test_load_geo_reads_names_and_properties():
    amap = load_geo(text=_collection(["north", "south"], {"code": "X"}))
    assert amap.names() == ("north", "south")
    assert amap.features[0].properties["code"] == "X"
    assert amap.matched_names() == ()


def test_load_geo_from_path(fixture_geojson_path):
    amap = load_geo(str(fixture_geojson_path))
    assert len(amap.features) == 33
    assert "City of London" in amap.names()


def test_load_geo_custom_name_property():
    text = json.dumps(
        {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"NAME": "north"},
                    "geometry": _square(0, 0),
                }
            ],
        }
    )
    amap = load_geo(text=text, name_property="NAME")
    assert amap.names() == ("north",)
    with pytest.raises(ValidationError, match="feature 0"):
        load_geo(text=text, name_property="name")


def test_load_geo_errors():
    with pytest.raises(ConfigurationError):
        load_geo()
    with pytest.raises(ParseError):
        load_geo(text="{not json")
    with pytest.raises(ParseError):
        load_geo(text=json.dumps({"type": "Feature"}))
    bad_geom = json.dumps(
        {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"name": "x"},
                    "geometry": {"type": "Point", "coordinates": [0, 0]},
                }
            ],
        }
    )
    with pytest.raises(ValidationError, match="Polygon"):
        load_geo(text=bad_geom)


def test_load_geo_crs_handling():
    # web-mercator coordinates invert to longitude/latitude
    radius = 6378137.0
    x = radius * math.pi / 4
    y = radius * math.log(math.tan(math.pi / 4 + math.radians(45) / 2))
    text = json.dumps(
        {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"name": "q"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[x, y], [x, y], [x, y], [x, y]]],
                    },
                }
            ],
        }
    )
    amap = load_geo(text=text, crs="EPSG:3857")
    lon, lat = amap.features[0].geometry["coordinates"][0][0]
    assert lon == pytest.approx(45.0, abs=1e-9)
    assert lat == pytest.approx(45.0, abs=1e-9)
    untouched = load_geo(text=_collection(["a"]), crs="WGS84")
    assert untouched.features[0].geometry == _square(0.0, 0.0)
    with pytest.raises(ConfigurationError):
        load_geo(text=_collection(["a"]), crs="EPSG:27700")


def test_match_areas_flags_known_names():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    amap = match_areas(load_geo(text=_collection(["north", "south", "east"])), ceg)
    assert amap.matched_names() == ("north", "south")
    east = next(f for f in amap.features if f.name == "east")
    assert not east.matched


def test_match_areas_rejects_duplicate_matched_names():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    with pytest.raises(ValidationError, match="duplicate"):
        match_areas(load_geo(text=_collection(["north", "north"])), ceg)


def test_area_map_payload_round_trip():
    amap = load_geo(text=_collection(["north", "south"]))
    assert AreaMap.from_json(amap.to_json()) == amap


# ---------------------------------------------------------------------------
# Probabilities


def test_area_probabilities_match_brute_force():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    table = area_probabilities(ceg, "won")
    want = _brute_force(tree, model)
    for area in ("north", "south"):
        for category in ("lost", "won"):
            assert table.probability(area, category) == pytest.approx(
                want[area][category], abs=1e-9
            )
        dist = table.distribution(area)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)


def test_area_probabilities_with_conditionals_match_brute_force():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    table = area_probabilities(ceg, "won", conditionals=["night"])
    assert table.conditionals == ("night",)
    want = _brute_force(tree, model, conditionals=("night",))
    for area in ("north", "south"):
        for category in ("lost", "won"):
            assert table.probability(area, category) == pytest.approx(
                want[area][category], abs=1e-9
            )


def test_area_probabilities_weight_excludes_area_edge():
    # by construction, the two areas share every downstream distribution,
    # so their conditionals must coincide even though the area edge
    # probabilities differ
    data = load_csv(text=SPATIAL_CSV)
    tree = create_event_tree(data)
    staging = assign_stages(
        tree,
        initial_staging(tree),
        [["s1", "s2"], ["s3", "s4", "s5", "s6"]],
    )
    priors = specify_priors(tree, staging, "uniform")
    ceg = contract_to_ceg(posterior_update(staged_tree_prior(tree, staging, priors)))
    table = area_probabilities(ceg, "won")
    assert table.probability("north", "won") == pytest.approx(
        table.probability("south", "won"), abs=1e-12
    )


def test_area_probabilities_validation():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    with pytest.raises(UnknownNameError):
        area_probabilities(ceg, "day")  # not a final-variable category
    with pytest.raises(UnknownNameError):
        area_probabilities(ceg, "won", conditionals=["missing"])
    with pytest.raises(ValidationError):
        area_probabilities(ceg, "won", conditionals=["north"])  # area level
    with pytest.raises(ValidationError):
        area_probabilities(ceg, "won", conditionals=["lost"])  # final level
    with pytest.raises(ValidationError):
        area_probabilities(ceg, "won", conditionals=["day", "night"])


def test_early_terminated_branch_becomes_category():
    # prune below north/night: that edge now runs straight to the sink and
    # its label joins the outcome categories
    data = load_csv(text=SPATIAL_CSV)
    tree = delete_nodes(create_event_tree(data), ["s4"])
    tree2, model = _spatial_model(tree)
    ceg = contract_to_ceg(model)
    table = area_probabilities(ceg, "won")
    assert set(table.categories()) == {"lost", "won", "night"}
    want = _brute_force(tree, model)
    assert table.probability("north", "night") == pytest.approx(
        want["north"]["night"], abs=1e-9
    )
    # south has no pruned branch, so its "night" outcome carries no mass
    assert table.probability("south", "night") == 0.0
    assert sum(table.distribution("north").values()) == pytest.approx(1.0)


def test_no_qualifying_paths_yields_none():
    # remove the night branch under north entirely (prune, then drop the
    # stranded terminal), so conditioning on night leaves north empty
    data = load_csv(text=SPATIAL_CSV)
    tree = delete_nodes(delete_nodes(create_event_tree(data), ["s4"]), ["s4"])
    tree2, model = _spatial_model(tree)
    ceg = contract_to_ceg(model)
    table = area_probabilities(ceg, "won", conditionals=["night"])
    assert table.probability("north", "won") is None
    assert table.probability("north", "lost") is None
    assert table.probability("south", "won") is not None
    north_rows = [r for r in table.rows if r.area == "north"]
    assert all(r.path_mass == 0.0 for r in north_rows)
    # None must survive CSV round-tripping as NA, not as zero
    csv_lines = table.to_csv_text().splitlines()
    assert any(line.startswith("north,won,NA") for line in csv_lines)


def test_probability_table_payload_round_trip():
    tree, model = _spatial_model()
    table = area_probabilities(contract_to_ceg(model), "won")
    clone = AreaProbabilityTable.from_payload(table.to_payload())
    assert clone == table


def test_probability_lookup_errors():
    tree, model = _spatial_model()
    table = area_probabilities(contract_to_ceg(model), "won")
    with pytest.raises(UnknownNameError):
        table.probability("west", "won")
    with pytest.raises(UnknownNameError):
        table.distribution("west")


# ---------------------------------------------------------------------------
# Colour ramps and rendering


def test_colour_for_value_endpoints_and_midpoint():
    stops = PALETTES["viridis"]
    assert colour_for_value("viridis", 0.0, 0.0, 1.0) == stops[0]
    assert colour_for_value("viridis", 1.0, 0.0, 1.0) == stops[-1]
    # the middle of five stops is an exact anchor
    assert colour_for_value("viridis", 0.5, 0.0, 1.0) == stops[2]


def test_colour_for_value_interpolates_linearly():
    got = colour_for_value("viridis", 0.125, 0.0, 1.0)
    lo, hi = PALETTES["viridis"][0], PALETTES["viridis"][1]

    def chan(s, i):
        return int(s[1 + 2 * i : 3 + 2 * i], 16)

    want = "#%02X%02X%02X" % tuple(
        int(round(chan(lo, i) + (chan(hi, i) - chan(lo, i)) * 0.5)) for i in range(3)
    )
    assert got == want


def test_colour_for_value_range_handling():
    assert colour_for_value("magma", -5.0, 0.0, 1.0) == PALETTES["magma"][0]
    assert colour_for_value("magma", 5.0, 0.0, 1.0) == PALETTES["magma"][-1]
    # degenerate range falls back to the raw 0..1 scale
    assert colour_for_value("magma", 1.0, 0.7, 0.7) == PALETTES["magma"][-1]
    with pytest.raises(ConfigurationError):
        colour_for_value("sunset", 0.5, 0.0, 1.0)


def test_all_palettes_have_five_stops():
    assert len(PALETTES) == 8
    for stops in PALETTES.values():
        assert len(stops) == 5
        assert all(s.startswith("#") and len(s) == 7 for s in stops)


def test_render_map_document_fills_and_labels():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    amap = match_areas(load_geo(text=_collection(["north", "south", "east"])), ceg)
    table = area_probabilities(ceg, "won")
    doc = render_map_document(amap, table, "viridis", "won")
    assert doc["type"] == "FeatureCollection"
    assert doc["properties"]["colour_by"] == "won"
    assert doc["properties"]["palette"] == "viridis"
    by_name = {f["properties"]["name"]: f["properties"] for f in doc["features"]}
    assert by_name["east"]["fill"] == GREY_SENTINEL
    assert by_name["east"]["label"] == "no data"
    north = by_name["north"]
    assert north["probability"] == pytest.approx(table.probability("north", "won"))
    assert north["label"] == f"north: {north['probability']:.1%}"
    assert north["fill"].startswith("#") and north["fill"] != GREY_SENTINEL
    lo = min(table.probability(a, "won") for a in ("north", "south"))
    hi = max(table.probability(a, "won") for a in ("north", "south"))
    assert doc["properties"]["scale"] == {"min": lo, "max": hi}


def test_render_map_document_hatches_undefined():
    data = load_csv(text=SPATIAL_CSV)
    tree = delete_nodes(delete_nodes(create_event_tree(data), ["s4"]), ["s4"])
    tree2, model = _spatial_model(tree)
    ceg = contract_to_ceg(model)
    amap = match_areas(load_geo(text=_collection(["north", "south"])), ceg)
    table = area_probabilities(ceg, "won", conditionals=["night"])
    doc = render_map_document(amap, table, "turbo", "won")
    north = next(f["properties"] for f in doc["features"] if f["properties"]["name"] == "north")
    assert north["pattern"] == "hatch"
    assert north["fill"] == GREY_SENTINEL
    assert north["label"] == "north: no qualifying paths"
    assert north["probability"] is None


def test_render_map_document_validation():
    tree, model = _spatial_model()
    ceg = contract_to_ceg(model)
    amap = match_areas(load_geo(text=_collection(["north"])), ceg)
    table = area_probabilities(ceg, "won")
    with pytest.raises(ConfigurationError):
        render_map_document(amap, table, "sunset", "won")
    with pytest.raises(UnknownNameError):
        render_map_document(amap, table, "viridis", "draw")
