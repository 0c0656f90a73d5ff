"""Session-oriented HTTP API over the modelling modules.

Each session holds one artifact chain (dataset, tree, staging, priors,
staged model, CEG, geometry). Mutating an upstream artifact clears
everything downstream and bumps the session revision; writes carrying a
stale revision are rejected with 409 so two tabs cannot silently clobber
each other. Every response includes a render projection so clients can
draw without re-deriving model facts.

Sessions live in memory. GET /sessions/{id}/archive returns a canonical
JSON archive; POST /sessions/load rebuilds an identical session from one
(the re-exported archive is byte-identical).
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any

from fastapi import Body, FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import ceg as ceg_mod
from . import spatial as spatial_mod
from .dataset import Dataset, TimeSpec, designate, filter_rows, load_csv, select_columns
from .errors import (
    CegError,
    ConfigurationError,
    ConflictError,
    IncompleteError,
    ParseError,
    UnknownNameError,
    ValidationError,
)
from .event_tree import EventTree, create_event_tree, delete_nodes, summarize_tree
from .pipeline import stage_colour_key
from .priors import (
    PriorTable,
    StagedTreeModel,
    dirichlet_moments,
    prior_table_skeleton,
    specify_priors,
    staged_tree_prior,
)
from .staging import (
    Staging,
    assign_stages,
    initial_staging,
    run_ahc,
    summarize_staging,
)

__all__ = ["create_app", "serve", "DEFAULT_HOST", "DEFAULT_PORT", "DEFAULT_MAX_UPLOAD"]

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8000
DEFAULT_MAX_UPLOAD = 10_000_000  # bytes of body text

_STATUS = {
    ParseError: 422,
    ValidationError: 422,
    IncompleteError: 409,
    ConflictError: 409,
    UnknownNameError: 404,
    ConfigurationError: 400,
}


@dataclass
class Session:
    id: str
    revision: int = 0
    source: Dataset | None = None  # as uploaded (plus row filters)
    selection: list[str] | None = None
    dataset: Dataset | None = None  # after column selection
    tree: EventTree | None = None
    staging: Staging | None = None
    prior_table: PriorTable | None = None
    model: StagedTreeModel | None = None  # priors only, data all zero
    updated: StagedTreeModel | None = None  # after conjugate update
    ceg: ceg_mod.CEGModel | None = None
    area_map: spatial_mod.AreaMap | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # artifact names downstream of each mutation point, in clearing order
    _CHAIN = {
        "source": ("selection", "dataset", "tree", "staging", "prior_table", "model", "updated", "ceg"),
        "dataset": ("tree", "staging", "prior_table", "model", "updated", "ceg"),
        "tree": ("staging", "prior_table", "model", "updated", "ceg"),
        "staging": ("prior_table", "model", "updated", "ceg"),
        "prior_table": ("model", "updated", "ceg"),
        "model": ("updated", "ceg"),
        "ceg": (),
    }

    def clear_downstream(self, changed: str) -> None:
        for name in self._CHAIN[changed]:
            setattr(self, name, None)

    def require(self, name: str, hint: str):
        value = getattr(self, name)
        if value is None:
            raise ConflictError(f"no {name.replace('_', ' ')} in this session yet; {hint}")
        return value


def _session_digest(session: Session) -> dict[str, bool]:
    return {
        "dataset": session.source is not None,
        "tree": session.tree is not None,
        "staging": session.staging is not None,
        "prior_table": session.prior_table is not None,
        "staged_model": session.model is not None,
        "ceg": session.ceg is not None,
        "area_map": session.area_map is not None,
    }


def _moments_block(model: StagedTreeModel) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for sm in model.stage_models:
        prior_m = dirichlet_moments(sm.prior)
        post_m = dirichlet_moments(sm.posterior)
        out[sm.stage_id] = {
            "labels": list(sm.labels),
            "prior": list(sm.prior),
            "prior_mean": list(prior_m.mean),
            "prior_variance": list(prior_m.variance),
            "data": list(sm.data),
            "posterior": list(sm.posterior),
            "posterior_mean": list(post_m.mean),
            "posterior_variance": list(post_m.variance),
            "ess": sm.ess,
        }
    return out


def _floret_status(tree: EventTree, staging: Staging) -> dict[str, str]:
    """Colouring completeness per first-variable category.

    green: every situation under that branch is staged; amber: some are;
    orange: none are. Used by map-mode floret colouring.
    """
    status: dict[str, str] = {}
    for edge in tree.children(tree.root.id):
        ids = [edge.child] + [v for v in tree.descendants(edge.child)]
        sits = [i for i in ids if not tree.is_leaf(i)]
        if not sits:
            status[edge.label] = "green"
            continue
        done = sum(1 for i in sits if staging.stage_of(i) is not None)
        status[edge.label] = (
            "green" if done == len(sits) else "orange" if done == 0 else "amber"
        )
    return status


def _render(session: Session) -> dict[str, Any]:
    render: dict[str, Any] = {}
    tree = session.tree
    staging = session.staging
    if tree is not None:
        render["tree"] = {
            "vertices": [
                {
                    "id": v.id,
                    "level": v.level,
                    "is_leaf": tree.is_leaf(v.id),
                    "colour": staging.colour_of(v.id) if staging else None,
                    "staged": bool(staging and staging.stage_of(v.id)),
                }
                for v in tree.vertices
            ],
            "edges": [
                {"parent": e.parent, "child": e.child, "label": e.label, "count": e.count}
                for e in tree.edges
            ],
        }
        if staging is not None:
            summary = summarize_staging(tree, staging)
            render["left_to_colour"] = summary.left_to_colour
            render["colour_counts"] = dict(summary.colour_counts)
            render["floret_status"] = _floret_status(tree, staging)
    model = session.updated or session.model
    if model is not None:
        render["stages"] = _moments_block(model)
    graph = session.ceg
    if graph is not None:
        render["ceg"] = _ceg_projection(graph)
    return render


def _ceg_projection(graph: ceg_mod.CEGModel) -> dict[str, Any]:
    edges = []
    incoming: dict[str, list[int]] = {}
    outgoing: dict[str, list[int]] = {}
    for i, e in enumerate(graph.edges):
        edges.append(
            {
                "source": e.source,
                "target": e.target,
                "label": e.label,
                "stage": e.stage,
                "value": graph.edge_value(e),
            }
        )
        outgoing.setdefault(e.source, []).append(i)
        incoming.setdefault(e.target, []).append(i)
    return {
        "positions": [
            {
                "id": p.id,
                "level": p.level,
                "members": list(p.members),
                "stage": p.stage,
                "colour": graph.stage_colours.get(p.stage, "#FFFFFF"),
            }
            for p in graph.positions
        ],
        "sink": {"id": ceg_mod.SINK_ID, "members": list(graph.sink_members)},
        "edges": edges,
        "incoming": incoming,
        "outgoing": outgoing,
        "label_mode": graph.label_mode,
        "reduced_by": list(graph.reduced_by),
    }


def _archive_payload(session: Session) -> dict[str, Any]:
    return {
        "version": 1,
        "revision": session.revision,
        "artifacts": {
            "source": session.source.to_payload() if session.source else None,
            "selection": session.selection,
            "dataset": session.dataset.to_payload() if session.dataset else None,
            "tree": session.tree.to_payload() if session.tree else None,
            "staging": session.staging.to_payload() if session.staging else None,
            "prior_table": session.prior_table.to_payload()
            if session.prior_table
            else None,
            "model": session.model.to_payload() if session.model else None,
            "updated": session.updated.to_payload() if session.updated else None,
            "ceg": session.ceg.to_payload() if session.ceg else None,
            "area_map": session.area_map.to_payload() if session.area_map else None,
        },
    }


def _archive_text(session: Session) -> str:
    return json.dumps(_archive_payload(session), indent=2, sort_keys=True) + "\n"


def _load_archive(session: Session, payload: dict) -> None:
    if not isinstance(payload, dict) or "artifacts" not in payload:
        raise ParseError("archive: missing artifacts block")
    arts = payload["artifacts"]

    def read(name, loader):
        raw = arts.get(name)
        if raw is None:
            return None
        try:
            return loader(raw)
        except CegError:
            raise
        except Exception as exc:
            raise ParseError(f"archive artifact {name!r}: {exc}") from exc

    session.source = read("source", Dataset.from_payload)
    session.selection = arts.get("selection")
    session.dataset = read("dataset", Dataset.from_payload)
    session.tree = read("tree", EventTree.from_payload)
    session.staging = read("staging", Staging.from_payload)
    session.prior_table = read("prior_table", PriorTable.from_payload)
    session.model = read("model", StagedTreeModel.from_payload)
    session.updated = read("updated", StagedTreeModel.from_payload)
    session.ceg = read("ceg", ceg_mod.CEGModel.from_payload)
    session.area_map = read("area_map", spatial_mod.AreaMap.from_payload)
    session.revision = int(payload.get("revision", 0))


def create_app(max_upload: int | None = None) -> FastAPI:
    app = FastAPI(title="cegforge service", docs_url=None, redoc_url=None)
    # browser clients may be served from a different origin than the API
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    limit = max_upload or int(os.environ.get("CEGFORGE_MAX_UPLOAD", DEFAULT_MAX_UPLOAD))
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    @app.exception_handler(CegError)
    def _ceg_error(_request: Request, exc: CegError) -> JSONResponse:
        status = next(
            (code for kind, code in _STATUS.items() if isinstance(exc, kind)), 422
        )
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    def get_session(sid: str) -> Session:
        session = sessions.get(sid)
        if session is None:
            raise UnknownNameError(f"unknown session {sid!r}")
        return session

    def mutate(session: Session, body: dict) -> None:
        """Optimistic concurrency: reject writes against a stale revision."""
        expected = body.get("revision")
        if expected is not None and int(expected) != session.revision:
            raise ConflictError(
                f"stale revision {expected}; session is at {session.revision}"
            )

    def respond(session: Session, **extra: Any) -> dict:
        return {
            "session_id": session.id,
            "revision": session.revision,
            "artifacts": _session_digest(session),
            "render": _render(session),
            **extra,
        }

    # -- lifecycle ---------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session() -> dict:
        session = Session(id=uuid.uuid4().hex)
        sessions[session.id] = session
        return respond(session)

    @app.get("/sessions")
    def list_sessions() -> dict:
        return {
            "sessions": [
                {
                    "session_id": s.id,
                    "revision": s.revision,
                    "artifacts": _session_digest(s),
                }
                for s in sessions.values()
            ]
        }

    @app.get("/sessions/{sid}")
    def get_session_state(sid: str) -> dict:
        return respond(get_session(sid))

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        existed = sessions.pop(sid, None) is not None
        return {"deleted": existed}

    @app.get("/sessions/{sid}/archive")
    def save_archive(sid: str) -> dict:
        session = get_session(sid)
        return {"session_id": session.id, "archive": _archive_text(session)}

    @app.post("/sessions/load", status_code=201)
    def load_archive(body: dict = Body(...)) -> dict:
        raw = body.get("archive")
        if raw is None:
            raise ValidationError("body must carry an archive field")
        if isinstance(raw, str):
            if len(raw) > limit:
                raise ValidationError(f"archive exceeds the {limit}-byte upload limit")
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"archive: invalid JSON: {exc}") from exc
        else:
            payload = raw
        session = Session(id=uuid.uuid4().hex)
        _load_archive(session, payload)
        sessions[session.id] = session
        return respond(session)

    # -- dataset -----------------------------------------------------------

    @app.post("/sessions/{sid}/dataset")
    def upload_dataset(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            text = body.get("csv_text")
            if not isinstance(text, str):
                raise ValidationError("body must carry csv_text")
            if len(text.encode("utf-8")) > limit:
                raise ValidationError(f"upload exceeds the {limit}-byte limit")
            data = load_csv(
                text=text,
                header=body.get("header", True),
                separator=body.get("separator", ","),
                quote=body.get("quote", '"'),
                exclude_first_column=body.get("exclude_first_column", False),
            )
            if body.get("area_column") or body.get("time_column"):
                spec = None
                if body.get("time_column"):
                    spec = TimeSpec(
                        name=body["time_column"],
                        granularity=body.get("time_granularity", "date"),
                        format=body.get("time_format", "%Y-%m-%d"),
                    )
                data = designate(data, area_column=body.get("area_column"), time_column=spec)
            session.source = data
            session.dataset = data
            session.selection = None
            session.clear_downstream("dataset")
            session.revision += 1
            return respond(session, dataset=_dataset_block(session, body.get("preview", 10)))

    def _dataset_block(session: Session, preview_rows: int = 10) -> dict:
        data = session.dataset or session.source
        if data is None:
            return {}
        return {
            "column_names": list(data.column_names),
            "n_rows": data.n_rows,
            "preview": [list(r) for r in data.rows[: max(0, int(preview_rows))]],
            "levels": {name: list(data.levels(name)) for name in data.column_names},
            "area_column": data.area_column,
            "time_column": data.time_column.name if data.time_column else None,
            "selection": session.selection,
            "fingerprint": data.fingerprint(),
        }

    @app.get("/sessions/{sid}/dataset")
    def get_dataset(sid: str, preview: int = Query(10, ge=0, le=1000)) -> dict:
        session = get_session(sid)
        session.require("source", "upload a CSV first")
        return respond(session, dataset=_dataset_block(session, preview))

    @app.post("/sessions/{sid}/columns")
    def choose_columns(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            source = session.require("source", "upload a CSV first")
            columns = list(body.get("columns") or [])
            if not columns:
                raise ValidationError("body must carry a non-empty columns list")
            prediction = body.get("prediction_variable")
            if prediction is not None:
                # the prediction variable is always the final tree variable
                columns = [c for c in columns if c != prediction] + [prediction]
            selected = select_columns(source, columns)
            session.selection = list(selected.column_names)
            session.dataset = selected
            session.clear_downstream("dataset")
            session.revision += 1
            return respond(session, dataset=_dataset_block(session))

    @app.post("/sessions/{sid}/filter")
    def filter_dataset(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            source = session.require("source", "upload a CSV first")
            subset = body.get("area_subset")
            time_range = body.get("time_range")
            filtered = filter_rows(
                source,
                area_subset=set(subset) if subset else None,
                time_range=tuple(time_range) if time_range else None,
            )
            session.source = filtered
            session.dataset = (
                select_columns(filtered, session.selection)
                if session.selection
                else filtered
            )
            session.clear_downstream("dataset")
            session.revision += 1
            return respond(session, dataset=_dataset_block(session))

    # -- tree ---------------------------------------------------------------

    @app.post("/sessions/{sid}/tree")
    def build_tree(sid: str, body: dict = Body(default={})) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            source = session.require("source", "upload a CSV first")
            columns = body.get("columns") or session.selection
            session.tree = create_event_tree(source, columns=columns)
            session.clear_downstream("tree")
            session.staging = initial_staging(session.tree)
            session.revision += 1
            return respond(session, tree=_tree_block(session))

    def _tree_block(session: Session) -> dict:
        tree = session.tree
        if tree is None:
            return {}
        return {
            "payload": tree.to_payload(),
            "summary": summarize_tree(tree).format(),
            "dot": tree.to_dot(),
        }

    @app.get("/sessions/{sid}/tree")
    def get_tree(sid: str) -> dict:
        session = get_session(sid)
        session.require("tree", "build the event tree first")
        return respond(session, tree=_tree_block(session))

    @app.post("/sessions/{sid}/tree/delete")
    def delete_tree_nodes(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            tree = session.require("tree", "build the event tree first")
            ids = body.get("ids") or []
            session.tree = delete_nodes(tree, ids)
            session.clear_downstream("tree")
            session.staging = initial_staging(session.tree)
            session.revision += 1
            return respond(session, tree=_tree_block(session))

    # -- staging -------------------------------------------------------------

    @app.post("/sessions/{sid}/staging/groups")
    def colour_groups(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            tree = session.require("tree", "build the event tree first")
            staging = session.staging or initial_staging(tree)
            session.staging = assign_stages(
                tree, staging, body.get("groups") or [], colours=body.get("colours")
            )
            session.clear_downstream("staging")
            session.revision += 1
            return respond(session, staging=_staging_block(session))

    @app.post("/sessions/{sid}/staging/ahc")
    def colour_ahc(sid: str, body: dict = Body(default={})) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            tree = session.require("tree", "build the event tree first")
            staging = session.staging or initial_staging(tree)
            trace: list = []
            session.staging = run_ahc(tree, staging, trace=trace)
            session.clear_downstream("staging")
            session.revision += 1
            return respond(
                session,
                staging=_staging_block(session),
                merges=[
                    {"merged": [list(m) for m in t["merged"]], "logbf": t["logbf"]}
                    for t in trace
                ],
            )

    def _staging_block(session: Session) -> dict:
        tree, staging = session.tree, session.staging
        if tree is None or staging is None:
            return {}
        summary = summarize_staging(tree, staging)
        return {
            "payload": staging.to_payload(),
            "summary": summary.format(),
            "left_to_colour": summary.left_to_colour,
        }

    @app.get("/sessions/{sid}/staging")
    def get_staging(sid: str) -> dict:
        session = get_session(sid)
        session.require("tree", "build the event tree first")
        session.require("staging", "stage the tree first")
        return respond(session, staging=_staging_block(session))

    # -- priors and staged model ---------------------------------------------

    @app.get("/sessions/{sid}/priors")
    def get_priors(sid: str) -> dict:
        session = get_session(sid)
        tree = session.require("tree", "build the event tree first")
        staging = session.require("staging", "stage the tree first")
        table = session.prior_table or prior_table_skeleton(tree, staging)
        return respond(
            session,
            priors={
                "payload": table.to_payload(),
                "text": table.format(),
                "colour_key": stage_colour_key(table),
                "complete": table.is_complete(),
            },
        )

    @app.post("/sessions/{sid}/priors")
    def set_priors(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            tree = session.require("tree", "build the event tree first")
            staging = session.require("staging", "stage the tree first")
            mode = body.get("mode")
            if not mode:
                raise ValidationError("body must carry a prior mode")
            overrides = body.get("overrides")
            if overrides is not None:
                overrides = {k: list(v) for k, v in overrides.items()}
            session.prior_table = specify_priors(tree, staging, mode, overrides=overrides)
            session.clear_downstream("prior_table")
            session.revision += 1
            return respond(
                session,
                priors={
                    "payload": session.prior_table.to_payload(),
                    "text": session.prior_table.format(),
                    "colour_key": stage_colour_key(session.prior_table),
                    "complete": session.prior_table.is_complete(),
                },
            )

    @app.post("/sessions/{sid}/staged-tree")
    def build_staged_tree(sid: str, body: dict = Body(default={})) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            tree = session.require("tree", "build the event tree first")
            staging = session.require("staging", "stage the tree first")
            table = session.require("prior_table", "specify priors first")
            label_type = body.get("label_type", "priors")
            session.model = staged_tree_prior(tree, staging, table, label_type=label_type)
            session.updated = ceg_mod.posterior_update(session.model)
            session.ceg = None
            session.revision += 1
            return respond(session, staged_tree=_staged_block(session))

    def _staged_block(session: Session) -> dict:
        if session.model is None:
            return {}
        block = {"payload": session.model.to_payload()}
        if session.updated is not None:
            block["updated"] = session.updated.to_payload()
            block["update_table"] = ceg_mod.update_table(session.updated).to_payload()
        return block

    @app.get("/sessions/{sid}/staged-tree")
    def get_staged_tree(sid: str) -> dict:
        session = get_session(sid)
        session.require("model", "build the staged tree first")
        return respond(session, staged_tree=_staged_block(session))

    # -- CEG -------------------------------------------------------------------

    @app.post("/sessions/{sid}/ceg")
    def build_ceg(sid: str, body: dict = Body(default={})) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            session.require("model", "build the staged tree first")
            use_data = body.get("use_data", True)
            model = session.updated if use_data else session.model
            session.ceg = ceg_mod.contract_to_ceg(
                model, label_mode=body.get("label_mode", "posterior_mean")
            )
            session.revision += 1
            return respond(session, ceg=_ceg_block(session.ceg))

    def _ceg_block(graph: ceg_mod.CEGModel) -> dict:
        return {"payload": graph.to_payload(), "dot": graph.to_dot()}

    @app.get("/sessions/{sid}/ceg")
    def get_ceg(sid: str) -> dict:
        session = get_session(sid)
        graph = session.require("ceg", "build the CEG first")
        return respond(session, ceg=_ceg_block(graph))

    @app.post("/sessions/{sid}/ceg/reduced")
    def reduce_ceg(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        graph = session.require("ceg", "build the CEG first")
        categories = body.get("filter")
        if categories is None:
            raise ValidationError("body must carry a filter list")
        reduced = ceg_mod.create_reduced_ceg(graph, categories)
        return respond(
            session,
            ceg=_ceg_block(reduced),
            reduced_render=_ceg_projection(reduced),
        )

    @app.get("/sessions/{sid}/ceg/summary")
    def ceg_summary(sid: str) -> dict:
        session = get_session(sid)
        graph = session.require("ceg", "build the CEG first")
        summary = ceg_mod.summarize_ceg(graph)
        return respond(session, summary={"payload": summary.to_payload(), "text": summary.format()})

    @app.get("/sessions/{sid}/ceg/table")
    def ceg_table(sid: str) -> dict:
        session = get_session(sid)
        source = session.ceg or session.updated
        if source is None:
            raise ConflictError("no staged model in this session yet; build the staged tree first")
        table = ceg_mod.update_table(source)
        return respond(
            session,
            table={"payload": table.to_payload(), "text": table.format(), "csv": table.to_csv_text()},
        )

    @app.post("/sessions/{sid}/ceg/compare")
    def ceg_compare(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        graph = session.require("ceg", "build the CEG first")
        if body.get("other_session"):
            other_session = get_session(body["other_session"])
            other = other_session.require("ceg", "build the other session's CEG first")
        elif body.get("other") is not None:
            other = ceg_mod.CEGModel.from_payload(body["other"])
        else:
            raise ValidationError("body must carry other_session or other")
        result = ceg_mod.compare_ceg_models(
            ceg_mod.summarize_ceg(graph), ceg_mod.summarize_ceg(other)
        )
        return respond(session, comparison={"payload": result.to_payload(), "text": result.format()})

    # -- map ---------------------------------------------------------------------

    @app.post("/sessions/{sid}/map/geo")
    def upload_geo(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        with session.lock:
            mutate(session, body)
            raw = body.get("geojson")
            if raw is None:
                raise ValidationError("body must carry geojson")
            text = raw if isinstance(raw, str) else json.dumps(raw)
            if len(text.encode("utf-8")) > limit:
                raise ValidationError(f"upload exceeds the {limit}-byte limit")
            area_map = spatial_mod.load_geo(
                text=text,
                name_property=body.get("name_property", "name"),
                crs=body.get("crs"),
            )
            if session.ceg is not None:
                area_map = spatial_mod.match_areas(area_map, session.ceg)
            session.area_map = area_map
            session.revision += 1
            return respond(session, map=_map_block(session))

    def _map_block(session: Session) -> dict:
        if session.area_map is None:
            return {}
        return {
            "payload": session.area_map.to_payload(),
            "matched": list(session.area_map.matched_names()),
            "names": list(session.area_map.names()),
        }

    @app.get("/sessions/{sid}/map/geo")
    def get_geo(sid: str) -> dict:
        session = get_session(sid)
        session.require("area_map", "upload GeoJSON first")
        return respond(session, map=_map_block(session))

    @app.post("/sessions/{sid}/map/probabilities")
    def map_probabilities(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        graph = session.require("ceg", "build the CEG first")
        area_map = session.require("area_map", "upload GeoJSON first")
        colour_by = body.get("colour_by")
        if not colour_by:
            raise ValidationError("body must carry colour_by")
        _check_area_first(session)
        area_map = spatial_mod.match_areas(area_map, graph)
        session.area_map = area_map
        table = spatial_mod.area_probabilities(
            graph, colour_by, tuple(body.get("conditionals") or ())
        )
        document = spatial_mod.render_map_document(
            area_map, table, body.get("palette", "viridis"), colour_by
        )
        return respond(
            session,
            probabilities={"payload": table.to_payload(), "csv": table.to_csv_text()},
            document=document,
        )

    def _check_area_first(session: Session) -> None:
        graph = session.ceg
        data = session.source
        if graph is None or data is None or data.area_column is None:
            return
        if graph.variable_order and graph.variable_order[0] != data.area_column:
            raise ConfigurationError(
                f"map generation needs the area variable first in the tree; "
                f"got {graph.variable_order[0]!r}, area column is {data.area_column!r}"
            )

    return app


def serve(host: str | None = None, port: int | None = None, max_upload: int | None = None) -> None:
    import uvicorn

    uvicorn.run(
        create_app(max_upload=max_upload),
        host=host or os.environ.get("CEGFORGE_HOST", DEFAULT_HOST),
        port=int(port if port is not None else os.environ.get("CEGFORGE_PORT", DEFAULT_PORT)),
        log_level="warning",
    )
