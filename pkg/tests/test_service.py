"""HTTP service: session lifecycle, build chain, concurrency, archives."""

import json

import pytest
from fastapi.testclient import TestClient

from cegforge.service import create_app

CSV = """\
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

GEO = {
    "type": "FeatureCollection",
    "features": [
        {
            "type": "Feature",
            "properties": {"name": name},
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[i, 0], [i + 1, 0], [i + 1, 1], [i, 1], [i, 0]]],
            },
        }
        for i, name in enumerate(["north", "south", "west"])
    ],
}


@pytest.fixture()
def client():
    return TestClient(create_app())


@pytest.fixture()
def sid(client) -> str:
    return client.post("/sessions").json()["session_id"]


def _build_through_ceg(client, sid: str) -> None:
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV, "area_column": "area"})
    client.post(f"/sessions/{sid}/tree", json={})
    client.post(f"/sessions/{sid}/staging/ahc", json={})
    client.post(f"/sessions/{sid}/priors", json={"mode": "uniform"})
    client.post(f"/sessions/{sid}/staged-tree", json={})
    client.post(f"/sessions/{sid}/ceg", json={})


def test_session_lifecycle(client):
    created = client.post("/sessions")
    assert created.status_code == 201
    body = created.json()
    sid = body["session_id"]
    assert body["revision"] == 0
    assert body["artifacts"] == {
        "dataset": False,
        "tree": False,
        "staging": False,
        "prior_table": False,
        "staged_model": False,
        "ceg": False,
        "area_map": False,
    }
    listed = client.get("/sessions").json()["sessions"]
    assert any(s["session_id"] == sid for s in listed)
    assert client.get(f"/sessions/{sid}").status_code == 200
    assert client.delete(f"/sessions/{sid}").json() == {"deleted": True}
    assert client.delete(f"/sessions/{sid}").json() == {"deleted": False}
    assert client.get(f"/sessions/{sid}").status_code == 404


def test_dataset_upload_previews_levels(client, sid):
    r = client.post(
        f"/sessions/{sid}/dataset",
        json={"csv_text": CSV, "area_column": "area", "preview": 3},
    )
    assert r.status_code == 200
    block = r.json()["dataset"]
    assert block["column_names"] == ["area", "time", "outcome"]
    assert block["n_rows"] == 10
    assert len(block["preview"]) == 3
    assert block["levels"]["outcome"] == ["lost", "won"]
    assert block["area_column"] == "area"
    assert block["fingerprint"]
    assert r.json()["revision"] == 1


def test_dataset_upload_validation(client, sid):
    assert client.post(f"/sessions/{sid}/dataset", json={}).status_code == 422
    bad = client.post(f"/sessions/{sid}/dataset", json={"csv_text": "a,b\n1\n"})
    assert bad.status_code == 422
    assert "row 1" in bad.json()["detail"]


def test_upload_size_limit():
    app = create_app(max_upload=64)
    client = TestClient(app)
    sid = client.post("/sessions").json()["session_id"]
    r = client.post(f"/sessions/{sid}/dataset", json={"csv_text": "a,b\n" + "1,2\n" * 40})
    assert r.status_code == 422
    assert "upload exceeds" in r.json()["detail"]


def test_unknown_session_is_404(client):
    assert client.get("/sessions/nope").status_code == 404
    assert client.post("/sessions/nope/tree", json={}).status_code == 404


def test_cross_origin_browser_clients_are_allowed(client):
    r = client.get("/sessions", headers={"Origin": "http://example.test:5173"})
    assert r.status_code == 200
    assert r.headers["access-control-allow-origin"] == "*"
    preflight = client.options(
        "/sessions",
        headers={
            "Origin": "http://example.test:5173",
            "Access-Control-Request-Method": "POST",
            "Access-Control-Request-Headers": "content-type",
        },
    )
    assert preflight.status_code == 200
    assert preflight.headers["access-control-allow-origin"] == "*"


def test_missing_prerequisite_is_409_with_hint(client, sid):
    r = client.post(f"/sessions/{sid}/tree", json={})
    assert r.status_code == 409
    assert "upload a CSV first" in r.json()["detail"]
    r = client.get(f"/sessions/{sid}/ceg/summary")
    assert r.status_code == 409


def test_stale_revision_is_409(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    r = client.post(f"/sessions/{sid}/tree", json={"revision": 0})
    assert r.status_code == 409
    assert "stale revision" in r.json()["detail"]
    ok = client.post(f"/sessions/{sid}/tree", json={"revision": 1})
    assert ok.status_code == 200


def test_columns_moves_prediction_variable_last(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    r = client.post(
        f"/sessions/{sid}/columns",
        json={"columns": ["outcome", "area", "time"], "prediction_variable": "outcome"},
    )
    assert r.json()["dataset"]["column_names"] == ["area", "time", "outcome"]
    assert r.json()["dataset"]["selection"] == ["area", "time", "outcome"]


def test_filter_preserves_selection(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV, "area_column": "area"})
    client.post(f"/sessions/{sid}/columns", json={"columns": ["time", "outcome"]})
    r = client.post(f"/sessions/{sid}/filter", json={"area_subset": ["north"]})
    block = r.json()["dataset"]
    assert block["n_rows"] == 5
    assert block["column_names"] == ["time", "outcome"]


def test_tree_build_and_render(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    r = client.post(f"/sessions/{sid}/tree", json={"columns": ["area", "time", "outcome"]})
    body = r.json()
    assert "Summary of Nodes" in body["tree"]["summary"]
    render = body["render"]["tree"]
    assert len(render["vertices"]) == 15
    assert len(render["edges"]) == 14
    root = next(v for v in render["vertices"] if v["id"] == "s0")
    assert root["staged"] is True  # the root starts staged
    assert body["render"]["left_to_colour"] == 6
    assert body["render"]["floret_status"] == {"north": "orange", "south": "orange"}


def test_tree_delete_resets_staging(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    client.post(f"/sessions/{sid}/tree", json={})
    client.post(f"/sessions/{sid}/staging/ahc", json={})
    r = client.post(f"/sessions/{sid}/tree/delete", json={"ids": ["s4"]})
    body = r.json()
    assert body["artifacts"]["staging"] is True
    assert body["render"]["left_to_colour"] > 0  # back to just the root


def test_manual_groups_then_ahc(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    client.post(f"/sessions/{sid}/tree", json={})
    r = client.post(
        f"/sessions/{sid}/staging/groups",
        json={"groups": [["s3", "s4"]], "colours": ["#123456"]},
    )
    assert r.status_code == 200
    assert r.json()["staging"]["left_to_colour"] == 4
    r = client.post(f"/sessions/{sid}/staging/ahc", json={})
    body = r.json()
    assert body["staging"]["left_to_colour"] == 0
    assert isinstance(body["merges"], list)
    for merge in body["merges"]:
        assert merge["logbf"] > 0
    # the manual stage survives the sweep
    payload = body["staging"]["payload"]
    frozen = [s for s in payload["stages"] if s["frozen"]]
    assert any(s["members"] == ["s3", "s4"] for s in frozen)


def test_floret_status_tracks_partial_colouring(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    client.post(f"/sessions/{sid}/tree", json={})
    r = client.post(
        f"/sessions/{sid}/staging/groups",
        json={"groups": [["s1"], ["s3", "s4"]]},
    )
    status = r.json()["render"]["floret_status"]
    assert status["north"] == "green"  # s1, s3, s4 all staged
    assert status["south"] == "orange"


def test_priors_skeleton_then_custom(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    client.post(f"/sessions/{sid}/tree", json={})
    client.post(f"/sessions/{sid}/staging/ahc", json={})
    skeleton = client.get(f"/sessions/{sid}/priors").json()["priors"]
    assert skeleton["complete"] is False
    assert "Stage Colour Key:" in skeleton["colour_key"]
    names = [row["name"] for row in skeleton["payload"]["rows"]]
    overrides = {}
    for row in skeleton["payload"]["rows"]:
        overrides[row["name"]] = [2.0] * len(row["labels"])
    r = client.post(
        f"/sessions/{sid}/priors", json={"mode": "custom", "overrides": overrides}
    )
    body = r.json()["priors"]
    assert body["complete"] is True
    assert [row["name"] for row in body["payload"]["rows"]] == names


def test_staged_tree_carries_update_table_and_moments(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    client.post(f"/sessions/{sid}/tree", json={})
    client.post(f"/sessions/{sid}/staging/ahc", json={})
    client.post(f"/sessions/{sid}/priors", json={"mode": "uniform"})
    r = client.post(f"/sessions/{sid}/staged-tree", json={})
    block = r.json()["staged_tree"]
    assert "payload" in block and "updated" in block
    rows = block["update_table"]["rows"]
    assert all(
        row["posterior"] == [p + d for p, d in zip(row["prior"], row["data"])]
        for row in rows
    )
    stages = r.json()["render"]["stages"]
    first = next(iter(stages.values()))
    assert {"labels", "prior_mean", "posterior_variance", "ess"} <= set(first)


def test_ceg_build_and_projection(client, sid):
    _build_through_ceg(client, sid)
    body = client.get(f"/sessions/{sid}/ceg").json()
    render = body["render"]["ceg"]
    assert render["positions"][0]["id"] == "w0"
    assert render["sink"]["id"] == "w∞"
    assert render["label_mode"] == "posterior_mean"
    for i, edge in enumerate(render["edges"]):
        assert i in render["outgoing"][edge["source"]]
        assert i in render["incoming"][edge["target"]]
    # prior-only build uses the un-updated model
    prior_only = client.post(f"/sessions/{sid}/ceg", json={"use_data": False}).json()
    sm = prior_only["ceg"]["payload"]["stage_models"][0]
    assert all(v == 0 for v in sm["data"])


def test_ceg_summary_table_and_reduced(client, sid):
    _build_through_ceg(client, sid)
    summary = client.get(f"/sessions/{sid}/ceg/summary").json()["summary"]
    assert "Chain Event Graph Summary" in summary["text"]
    table = client.get(f"/sessions/{sid}/ceg/table").json()["table"]
    assert table["csv"].startswith("stage,")
    reduced = client.post(f"/sessions/{sid}/ceg/reduced", json={"filter": ["won"]})
    body = reduced.json()
    assert body["reduced_render"]["reduced_by"] == ["won"]
    # reduction is a transient view; the session's CEG stays whole
    assert body["render"]["ceg"]["reduced_by"] == []
    missing = client.post(f"/sessions/{sid}/ceg/reduced", json={"filter": ["draw"]})
    assert missing.status_code == 404


def test_ceg_compare_between_sessions(client):
    a = client.post("/sessions").json()["session_id"]
    b = client.post("/sessions").json()["session_id"]
    _build_through_ceg(client, a)
    client.post(f"/sessions/{b}/dataset", json={"csv_text": CSV})
    client.post(f"/sessions/{b}/tree", json={})
    # model B keeps every situation apart, so the scores differ
    groups = [[f"s{i}"] for i in range(1, 7)]
    client.post(f"/sessions/{b}/staging/groups", json={"groups": groups})
    client.post(f"/sessions/{b}/priors", json={"mode": "uniform"})
    client.post(f"/sessions/{b}/staged-tree", json={})
    client.post(f"/sessions/{b}/ceg", json={})
    r = client.post(f"/sessions/{a}/ceg/compare", json={"other_session": b})
    comparison = r.json()["comparison"]
    assert "Log Bayes factor of Model 1 vs Model 2:" in comparison["text"]
    assert comparison["payload"]["warning"] is None
    inline = client.post(
        f"/sessions/{a}/ceg/compare",
        json={"other": client.get(f"/sessions/{a}/ceg").json()["ceg"]["payload"]},
    ).json()["comparison"]
    assert inline["payload"]["preferred"] == "tie"
    bad = client.post(f"/sessions/{a}/ceg/compare", json={})
    assert bad.status_code == 422


def test_map_flow(client, sid):
    _build_through_ceg(client, sid)
    r = client.post(f"/sessions/{sid}/map/geo", json={"geojson": GEO})
    assert r.json()["map"]["matched"] == ["north", "south"]
    probs = client.post(
        f"/sessions/{sid}/map/probabilities",
        json={"colour_by": "won", "palette": "magma"},
    )
    body = probs.json()
    assert body["document"]["properties"]["palette"] == "magma"
    rows = body["probabilities"]["payload"]["rows"]
    assert {row["area"] for row in rows} == {"north", "south"}
    with_cond = client.post(
        f"/sessions/{sid}/map/probabilities",
        json={"colour_by": "won", "conditionals": ["night"]},
    )
    assert with_cond.json()["probabilities"]["payload"]["conditionals"] == ["night"]
    bad = client.post(f"/sessions/{sid}/map/probabilities", json={"colour_by": "day"})
    assert bad.status_code == 404


def test_map_requires_area_variable_first(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV, "area_column": "area"})
    client.post(f"/sessions/{sid}/tree", json={"columns": ["time", "outcome", "area"]})
    client.post(f"/sessions/{sid}/staging/ahc", json={})
    client.post(f"/sessions/{sid}/priors", json={"mode": "uniform"})
    client.post(f"/sessions/{sid}/staged-tree", json={})
    client.post(f"/sessions/{sid}/ceg", json={})
    client.post(f"/sessions/{sid}/map/geo", json={"geojson": GEO})
    r = client.post(f"/sessions/{sid}/map/probabilities", json={"colour_by": "north"})
    assert r.status_code == 400
    assert "area variable first" in r.json()["detail"]


def test_upstream_change_clears_downstream(client, sid):
    _build_through_ceg(client, sid)
    assert client.get(f"/sessions/{sid}").json()["artifacts"]["ceg"] is True
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    arts = client.get(f"/sessions/{sid}").json()["artifacts"]
    assert arts["dataset"] is True
    assert arts["tree"] is False
    assert arts["ceg"] is False


def test_archive_round_trip_is_byte_identical(client, sid):
    _build_through_ceg(client, sid)
    client.post(f"/sessions/{sid}/map/geo", json={"geojson": GEO})
    first = client.get(f"/sessions/{sid}/archive").json()["archive"]
    loaded = client.post("/sessions/load", json={"archive": first})
    assert loaded.status_code == 201
    clone_id = loaded.json()["session_id"]
    second = client.get(f"/sessions/{clone_id}/archive").json()["archive"]
    assert second == first
    # the clone is fully usable downstream
    summary = client.get(f"/sessions/{clone_id}/ceg/summary")
    assert summary.status_code == 200


def test_archive_accepts_object_and_rejects_junk(client, sid):
    client.post(f"/sessions/{sid}/dataset", json={"csv_text": CSV})
    archive = client.get(f"/sessions/{sid}/archive").json()["archive"]
    as_object = client.post("/sessions/load", json={"archive": json.loads(archive)})
    assert as_object.status_code == 201
    assert client.post("/sessions/load", json={}).status_code == 422
    assert (
        client.post("/sessions/load", json={"archive": "{not json"}).status_code == 422
    )
    broken = json.loads(archive)
    broken["artifacts"]["tree"] = {"wrong": True}
    r = client.post("/sessions/load", json={"archive": broken})
    assert r.status_code == 422
    assert "archive artifact 'tree'" in r.json()["detail"]
