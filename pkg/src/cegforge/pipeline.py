"""Scripted batch runs: a JSON config fully determines every artifact.

A config is ``{"steps": [{"op": ..., ...}, ...]}``. Steps execute in
order over a single working state (dataset, tree, staging, priors, staged
model, CEG, geometry). Artifact writes are canonical JSON or text so two
runs of the same config produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field

from . import ceg as ceg_mod
from . import spatial as spatial_mod
from .dataset import Dataset, TimeSpec, designate, filter_rows, load_csv, select_columns
from .errors import CegError, ConfigurationError, ValidationError
from .event_tree import EventTree, create_event_tree, delete_nodes, summarize_tree
from .priors import PriorTable, StagedTreeModel, specify_priors, staged_tree_prior
from .staging import Staging, assign_stages, initial_staging, run_ahc, summarize_staging

__all__ = ["PipelineState", "load_config", "run_pipeline", "stage_colour_key"]


def _ansi_swatch(colour: str) -> str:
    r = int(colour[1:3], 16)
    g = int(colour[3:5], 16)
    b = int(colour[5:7], 16)
    return f"\x1b[48;2;{r};{g};{b}m  \x1b[0m"


def stage_colour_key(prior_table: PriorTable, ansi: bool = False) -> str:
    """One swatch line per stage, in stage order."""
    lines = ["Stage Colour Key:"]
    for row in prior_table.rows:
        swatch = _ansi_swatch(row.colour) + " " if ansi else ""
        lines.append(f"{swatch}{row.colour}")
    return "\n".join(lines) + "\n"


@dataclass
class PipelineState:
    dataset: Dataset | None = None
    source: Dataset | None = None  # pre-column-selection dataset
    tree: EventTree | None = None
    staging: Staging | None = None
    prior_table: PriorTable | None = None
    model: StagedTreeModel | None = None
    ceg: ceg_mod.CEGModel | None = None
    area_map: spatial_mod.AreaMap | None = None
    prob_table: spatial_mod.AreaProbabilityTable | None = None
    outputs: list[str] = field(default_factory=list)

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigurationError(
                f"step needs {name!r} but no earlier step produced it"
            )
        return value


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict) or not isinstance(config.get("steps", []), list):
        raise ConfigurationError("pipeline config must be an object with a steps list")
    return config


def _write_text(state: PipelineState, base_dir: str, rel: str, text: str) -> None:
    path = os.path.join(base_dir, rel)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    state.outputs.append(path)


def run_pipeline(
    config: dict, base_dir: str = ".", echo=None, ansi: bool = False
) -> PipelineState:
    """Execute the steps; raises the first module error unchanged.

    ``echo`` receives already-newline-terminated blocks and must write
    them verbatim; the default writes to stdout.
    """
    if echo is None:
        echo = lambda text: sys.stdout.write(text)
    state = PipelineState()
    for i, step in enumerate(config.get("steps", [])):
        op = step.get("op")
        if not op:
            raise ConfigurationError(f"step {i}: missing op")
        try:
            _run_step(state, op, step, base_dir, echo, ansi)
        except CegError:
            raise
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"step {i} ({op}): bad arguments: {exc}") from exc
    return state


def _run_step(state, op, step, base_dir, echo, ansi) -> None:
    if op == "load":
        path = os.path.join(base_dir, step["path"])
        data = load_csv(
            path,
            header=step.get("header", True),
            separator=step.get("separator", ","),
            quote=step.get("quote", '"'),
            exclude_first_column=step.get("exclude_first_column", False),
        )
        if step.get("area_column") or step.get("time_column"):
            time_spec = None
            if step.get("time_column"):
                time_spec = TimeSpec(
                    name=step["time_column"],
                    granularity=step.get("time_granularity", "date"),
                    format=step.get("time_format", "%Y-%m-%d"),
                )
            data = designate(
                data, area_column=step.get("area_column"), time_column=time_spec
            )
        state.source = data
        state.dataset = data
    elif op == "select":
        data = state.require("dataset")
        state.dataset = select_columns(data, step["columns"])
    elif op == "filter":
        # row filters run before column selection and reset it
        data = state.require("source")
        subset = step.get("area_subset")
        filtered = filter_rows(
            data,
            area_subset=set(subset) if subset else None,
            time_range=tuple(step["time_range"]) if step.get("time_range") else None,
        )
        state.source = filtered
        state.dataset = filtered
    elif op == "tree":
        # passing columns here keeps the tree's dataset digest tied to the
        # full source, so models over different column picks stay comparable
        if step.get("columns") is not None:
            state.tree = create_event_tree(
                state.require("source"), columns=step["columns"]
            )
        else:
            state.tree = create_event_tree(state.require("dataset"))
        state.staging = initial_staging(state.tree)
        echo(summarize_tree(state.tree).format())
    elif op == "delete":
        tree = state.require("tree")
        state.tree = delete_nodes(tree, step["ids"])
        state.staging = initial_staging(state.tree)
        echo(summarize_tree(state.tree).format())
    elif op == "stage":
        tree = state.require("tree")
        staging = state.staging or initial_staging(tree)
        state.staging = assign_stages(
            tree, staging, step["groups"], colours=step.get("colours")
        )
        echo(summarize_staging(tree, state.staging).format())
    elif op == "ahc":
        tree = state.require("tree")
        staging = state.staging or initial_staging(tree)
        state.staging = run_ahc(tree, staging)
        echo(summarize_staging(tree, state.staging).format())
    elif op == "priors":
        tree = state.require("tree")
        staging = state.require("staging")
        state.prior_table = specify_priors(
            tree, staging, step["mode"], overrides=step.get("overrides")
        )
        if step.get("print_colours"):
            echo(stage_colour_key(state.prior_table, ansi=ansi))
        echo(state.prior_table.format())
    elif op == "staged":
        tree = state.require("tree")
        staging = state.require("staging")
        table = state.require("prior_table")
        state.model = staged_tree_prior(
            tree, staging, table, label_type=step.get("label_type", "priors")
        )
    elif op == "update":
        model = state.require("model")
        state.model = ceg_mod.posterior_update(model)
    elif op == "ceg":
        model = state.require("model")
        state.ceg = ceg_mod.contract_to_ceg(
            model, label_mode=step.get("label_mode", "posterior_mean")
        )
    elif op == "reduce":
        graph = state.require("ceg")
        state.ceg = ceg_mod.create_reduced_ceg(graph, step["filter"])
    elif op == "summary":
        graph = state.require("ceg")
        text = ceg_mod.summarize_ceg(graph).format()
        echo(text)
        if step.get("out"):
            _write_text(state, base_dir, step["out"], text)
    elif op == "table":
        source = state.ceg or state.require("model")
        table = ceg_mod.update_table(source)
        echo(table.format())
        if step.get("out"):
            _write_text(state, base_dir, step["out"], table.to_csv_text())
    elif op == "key":
        table = state.require("prior_table")
        echo(stage_colour_key(table, ansi=ansi))
    elif op == "geo":
        path = os.path.join(base_dir, step["path"])
        area_map = spatial_mod.load_geo(
            path,
            name_property=step.get("name_property", "name"),
            crs=step.get("crs"),
        )
        if state.ceg is not None:
            area_map = spatial_mod.match_areas(area_map, state.ceg)
        state.area_map = area_map
    elif op == "map":
        graph = state.require("ceg")
        area_map = state.require("area_map")
        area_map = spatial_mod.match_areas(area_map, graph)
        state.area_map = area_map
        state.prob_table = spatial_mod.area_probabilities(
            graph, step["colour_by"], step.get("conditionals", ())
        )
        document = spatial_mod.render_map_document(
            area_map,
            state.prob_table,
            step.get("palette", "viridis"),
            step["colour_by"],
        )
        if step.get("out"):
            _write_text(
                state,
                base_dir,
                step["out"],
                json.dumps(document, indent=2, sort_keys=True) + "\n",
            )
        if step.get("table_out"):
            _write_text(state, base_dir, step["table_out"], state.prob_table.to_csv_text())
    elif op == "export":
        artifact = step["artifact"]
        rel = step["out"]
        if artifact == "tree":
            _write_text(state, base_dir, rel, state.require("tree").to_json() + "\n")
        elif artifact == "tree-dot":
            _write_text(state, base_dir, rel, state.require("tree").to_dot())
        elif artifact == "staging":
            _write_text(state, base_dir, rel, state.require("staging").to_json() + "\n")
        elif artifact == "priors":
            _write_text(
                state, base_dir, rel, state.require("prior_table").to_json() + "\n"
            )
        elif artifact == "staged":
            _write_text(state, base_dir, rel, state.require("model").to_json() + "\n")
        elif artifact == "ceg":
            _write_text(state, base_dir, rel, state.require("ceg").to_json() + "\n")
        elif artifact == "ceg-dot":
            _write_text(state, base_dir, rel, state.require("ceg").to_dot())
        else:
            raise ConfigurationError(f"unknown export artifact {artifact!r}")
    elif op == "compare":
        graph = state.require("ceg")
        with open(os.path.join(base_dir, step["other"]), "r", encoding="utf-8") as fh:
            other = ceg_mod.CEGModel.from_json(fh.read())
        result = ceg_mod.compare_ceg_models(
            ceg_mod.summarize_ceg(graph), ceg_mod.summarize_ceg(other)
        )
        echo(result.format())
        if step.get("out"):
            _write_text(state, base_dir, step["out"], result.format())
    else:
        raise ConfigurationError(f"unknown pipeline op {op!r}")
