"""Command-line driver: build artifacts file-by-file or run whole pipelines.

Artifacts are canonical JSON (sorted keys, two-space indent, trailing
newline) so repeated runs over the same inputs are byte-identical.
"""

from __future__ import annotations

import json
import sys

import click

from . import ceg as ceg_mod
from . import spatial as spatial_mod
from .dataset import TimeSpec, designate, load_csv
from .errors import CegError
from .event_tree import EventTree, create_event_tree, delete_nodes, summarize_tree
from .pipeline import load_config, run_pipeline, stage_colour_key
from .priors import PriorTable, specify_priors, staged_tree_prior
from .staging import Staging, assign_stages, initial_staging, run_ahc, summarize_staging


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _canonical(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _split_csv_list(raw: str | None) -> list[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


def _columns_arg(raw: str | None) -> list | None:
    parts = _split_csv_list(raw)
    if not parts:
        return None
    return [int(p) if p.lstrip("-").isdigit() else p for p in parts]


def _load_dataset(csv_path, header, separator, quote, exclude_first_column,
                  area_column, time_column, time_granularity, time_format):
    data = load_csv(
        csv_path,
        header=header,
        separator=separator,
        quote=quote,
        exclude_first_column=exclude_first_column,
    )
    if area_column or time_column:
        spec = None
        if time_column:
            spec = TimeSpec(name=time_column, granularity=time_granularity, format=time_format)
        data = designate(data, area_column=area_column, time_column=spec)
    return data


_dataset_options = [
    click.option("--no-header", "header", flag_value=False, default=True,
                 help="Treat the first row as data, not column names."),
    click.option("--separator", default=",", show_default=True),
    click.option("--quote", default='"', show_default=True),
    click.option("--exclude-first-column", is_flag=True,
                 help="Drop the first column (row ids)."),
    click.option("--area-column", default=None, help="Column holding area names."),
    click.option("--time-column", default=None, help="Column holding dates."),
    click.option("--time-granularity", default="date", show_default=True,
                 type=click.Choice(["date", "month-year", "year"])),
    click.option("--time-format", default="%Y-%m-%d", show_default=True),
]


def _apply(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@click.group()
def main() -> None:
    """Build and explore chain event graph models."""


def _run(fn):
    try:
        fn()
    except CegError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


# -- data ---------------------------------------------------------------------


@main.group()
def data() -> None:
    """Inspect delimited data files."""


@data.command("show")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@_apply(_dataset_options)
@click.option("--rows", default=6, show_default=True, help="Preview row count.")
def data_show(csv_path, rows, **kw) -> None:
    """Print column names, level counts, and the first rows."""
    def go():
        dataset = _load_dataset(csv_path, **kw)
        click.echo(f"{dataset.n_rows} rows, {dataset.n_columns} columns")
        for name in dataset.column_names:
            click.echo(f"  {name}: {len(dataset.levels(name))} levels")
        for row in dataset.rows[:rows]:
            click.echo("  " + ", ".join(row))
    _run(go)


# -- tree ---------------------------------------------------------------------


@main.group()
def tree() -> None:
    """Event tree construction and editing."""


@tree.command("build")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@_apply(_dataset_options)
@click.option("--columns", default=None,
              help="Comma-separated column names or 1-based indices, in tree order.")
@click.option("--out", "out_path", default=None, help="Write the tree as JSON.")
def tree_build(csv_path, columns, out_path, **kw) -> None:
    """Build an event tree from a CSV file."""
    def go():
        dataset = _load_dataset(csv_path, **kw)
        built = create_event_tree(dataset, columns=_columns_arg(columns))
        click.echo(summarize_tree(built).format(), nl=False)
        if out_path:
            _write_text(out_path, built.to_json() + "\n")
    _run(go)


@tree.command("delete")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--ids", required=True, help="Comma-separated vertex ids to cut below.")
@click.option("--out", "out_path", default=None)
def tree_delete(tree_path, ids, out_path) -> None:
    """Remove impossible branches below the named vertices."""
    def go():
        built = EventTree.from_payload(_read_json(tree_path))
        trimmed = delete_nodes(built, _split_csv_list(ids))
        click.echo(summarize_tree(trimmed).format(), nl=False)
        if out_path:
            _write_text(out_path, trimmed.to_json() + "\n")
    _run(go)


@tree.command("summary")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
def tree_summary(tree_path) -> None:
    _run(lambda: click.echo(
        summarize_tree(EventTree.from_payload(_read_json(tree_path))).format(), nl=False
    ))


@tree.command("dot")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
def tree_dot(tree_path) -> None:
    _run(lambda: click.echo(
        EventTree.from_payload(_read_json(tree_path)).to_dot(), nl=False
    ))


# -- stage ----------------------------------------------------------------------


@main.group()
def stage() -> None:
    """Colour situations into stages."""


@stage.command("manual")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--groups", required=True,
              help='Semicolon-separated groups of comma-separated ids, e.g. "s13,s21;s5,s9".')
@click.option("--colours", default=None, help="Comma-separated hex colours, one per group.")
@click.option("--staging", "staging_path", default=None,
              help="Existing staging JSON to extend.")
@click.option("--out", "out_path", default=None)
def stage_manual(tree_path, groups, colours, staging_path, out_path) -> None:
    """Put listed situations into shared stages."""
    def go():
        built = EventTree.from_payload(_read_json(tree_path))
        staging = (
            Staging.from_payload(_read_json(staging_path))
            if staging_path
            else initial_staging(built)
        )
        node_groups = [_split_csv_list(g) for g in groups.split(";") if g.strip()]
        staging = assign_stages(
            built, staging, node_groups, colours=_split_csv_list(colours) or None
        )
        click.echo(summarize_staging(built, staging).format(), nl=False)
        if out_path:
            _write_text(out_path, staging.to_json() + "\n")
    _run(go)


@stage.command("ahc")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--staging", "staging_path", default=None,
              help="Existing staging JSON; its stages are kept frozen.")
@click.option("--out", "out_path", default=None)
def stage_ahc(tree_path, staging_path, out_path) -> None:
    """Greedy Bayes-factor merging of the remaining uncoloured situations."""
    def go():
        built = EventTree.from_payload(_read_json(tree_path))
        staging = (
            Staging.from_payload(_read_json(staging_path))
            if staging_path
            else initial_staging(built)
        )
        staging = run_ahc(built, staging)
        click.echo(summarize_staging(built, staging).format(), nl=False)
        if out_path:
            _write_text(out_path, staging.to_json() + "\n")
    _run(go)


@stage.command("summary")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("staging_path", type=click.Path(exists=True, dir_okay=False))
def stage_summary(tree_path, staging_path) -> None:
    def go():
        built = EventTree.from_payload(_read_json(tree_path))
        staging = Staging.from_payload(_read_json(staging_path))
        click.echo(summarize_staging(built, staging).format(), nl=False)
    _run(go)


# -- priors ----------------------------------------------------------------------


@main.group()
def priors() -> None:
    """Stage prior specification."""


def _parse_overrides(pairs) -> dict[str, list[float]] | None:
    if not pairs:
        return None
    out: dict[str, list[float]] = {}
    for pair in pairs:
        name, _, values = pair.partition("=")
        out[name.strip()] = [float(v) for v in _split_csv_list(values)]
    return out


@priors.command("specify")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("staging_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", required=True, type=click.Choice(["custom", "uniform", "phantom"], case_sensitive=False))
@click.option("--override", "overrides", multiple=True,
              help='Stage prior as "u3=1,1"; repeatable. Required for every stage in custom mode.')
@click.option("--print-colours", is_flag=True, help="Print the stage colour key first.")
@click.option("--ansi", is_flag=True, help="Use ANSI colour swatches in the key.")
@click.option("--out", "out_path", default=None)
def priors_specify(tree_path, staging_path, mode, overrides, print_colours, ansi, out_path) -> None:
    """Fill the per-stage prior table."""
    def go():
        built = EventTree.from_payload(_read_json(tree_path))
        staging = Staging.from_payload(_read_json(staging_path))
        table = specify_priors(built, staging, mode, overrides=_parse_overrides(overrides))
        if print_colours:
            click.echo(stage_colour_key(table, ansi=ansi), nl=False)
        click.echo(table.format(), nl=False)
        if out_path:
            _write_text(out_path, table.to_json() + "\n")
    _run(go)


@priors.command("key")
@click.argument("priors_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--ansi", is_flag=True)
def priors_key(priors_path, ansi) -> None:
    _run(lambda: click.echo(
        stage_colour_key(PriorTable.from_payload(_read_json(priors_path)), ansi=ansi),
        nl=False,
    ))


# -- model / ceg --------------------------------------------------------------------


@main.group()
def model() -> None:
    """Staged tree models."""


@model.command("build")
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("staging_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("priors_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--label-type", default="priors", show_default=True,
              type=click.Choice(["priors", "prior_means", "none"]))
@click.option("--update/--no-update", default=True, show_default=True,
              help="Fold the observed counts into the posterior.")
@click.option("--out", "out_path", default=None)
def model_build(tree_path, staging_path, priors_path, label_type, update, out_path) -> None:
    """Attach stage priors (and optionally data) to a coloured tree."""
    def go():
        built = EventTree.from_payload(_read_json(tree_path))
        staging = Staging.from_payload(_read_json(staging_path))
        table = PriorTable.from_payload(_read_json(priors_path))
        staged = staged_tree_prior(built, staging, table, label_type=label_type)
        if update:
            staged = ceg_mod.posterior_update(staged)
        click.echo(ceg_mod.update_table(staged).format(), nl=False)
        if out_path:
            _write_text(out_path, staged.to_json() + "\n")
    _run(go)


@main.group()
def ceg() -> None:
    """Chain event graph construction and reporting."""


@ceg.command("build")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--label", "label_mode", default="posterior_mean", show_default=True,
              type=click.Choice(list(ceg_mod.LABEL_MODES)))
@click.option("--out", "out_path", default=None)
def ceg_build(model_path, label_mode, out_path) -> None:
    """Contract a staged tree model into its CEG."""
    def go():
        from .priors import StagedTreeModel

        staged = StagedTreeModel.from_payload(_read_json(model_path))
        graph = ceg_mod.contract_to_ceg(staged, label_mode=label_mode)
        click.echo(ceg_mod.summarize_ceg(graph).format(), nl=False)
        if out_path:
            _write_text(out_path, graph.to_json() + "\n")
    _run(go)


@ceg.command("reduce")
@click.argument("ceg_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--filter", "filters", multiple=True, required=True,
              help="Category a path must contain; repeatable (all must hold).")
@click.option("--out", "out_path", default=None)
def ceg_reduce(ceg_path, filters, out_path) -> None:
    """Keep only paths passing through every given category."""
    def go():
        graph = ceg_mod.CEGModel.from_payload(_read_json(ceg_path))
        reduced = ceg_mod.create_reduced_ceg(graph, list(filters))
        click.echo(
            f"{len(reduced.positions)} positions, {len(reduced.edges)} edges "
            f"after filtering on {', '.join(filters)}"
        )
        if out_path:
            _write_text(out_path, reduced.to_json() + "\n")
    _run(go)


@ceg.command("summary")
@click.argument("ceg_path", type=click.Path(exists=True, dir_okay=False))
def ceg_summary(ceg_path) -> None:
    _run(lambda: click.echo(
        ceg_mod.summarize_ceg(ceg_mod.CEGModel.from_payload(_read_json(ceg_path))).format(),
        nl=False,
    ))


@ceg.command("table")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "as_csv", is_flag=True, help="Emit CSV instead of the aligned table.")
def ceg_table(path, as_csv) -> None:
    """Prior/data/posterior table for a CEG or staged model file."""
    def go():
        payload = _read_json(path)
        if "positions" in payload:
            source = ceg_mod.CEGModel.from_payload(payload)
        else:
            from .priors import StagedTreeModel

            source = StagedTreeModel.from_payload(payload)
        table = ceg_mod.update_table(source)
        click.echo(table.to_csv_text() if as_csv else table.format(), nl=False)
    _run(go)


@ceg.command("compare")
@click.argument("ceg_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("ceg_b", type=click.Path(exists=True, dir_okay=False))
def ceg_compare(ceg_a, ceg_b) -> None:
    """Log Bayes factor between two CEG files."""
    def go():
        first = ceg_mod.CEGModel.from_payload(_read_json(ceg_a))
        second = ceg_mod.CEGModel.from_payload(_read_json(ceg_b))
        result = ceg_mod.compare_ceg_models(
            ceg_mod.summarize_ceg(first), ceg_mod.summarize_ceg(second)
        )
        click.echo(result.format(), nl=False)
    _run(go)


@ceg.command("dot")
@click.argument("ceg_path", type=click.Path(exists=True, dir_okay=False))
def ceg_dot(ceg_path) -> None:
    _run(lambda: click.echo(
        ceg_mod.CEGModel.from_payload(_read_json(ceg_path)).to_dot(), nl=False
    ))


# -- map --------------------------------------------------------------------------


@main.group()
def map() -> None:
    """Choropleth outputs."""


@map.command("build")
@click.option("--ceg", "ceg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--geo", "geo_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--name-prop", default="name", show_default=True,
              help="Feature property holding the area name.")
@click.option("--crs", default=None, help="Source CRS of the geometry.")
@click.option("--colour-by", required=True, help="Outcome category to colour by.")
@click.option("--conditionals", default=None,
              help="Comma-separated categories a path must contain.")
@click.option("--palette", default="viridis", show_default=True,
              type=click.Choice(sorted(spatial_mod.PALETTES)))
@click.option("--out", "out_path", default=None, help="Write the annotated GeoJSON.")
@click.option("--table-out", default=None, help="Write the probability table CSV.")
def map_build(ceg_path, geo_path, name_prop, crs, colour_by, conditionals,
              palette, out_path, table_out) -> None:
    """Colour polygons by per-area outcome probability."""
    def go():
        graph = ceg_mod.CEGModel.from_payload(_read_json(ceg_path))
        area_map = spatial_mod.load_geo(geo_path, name_property=name_prop, crs=crs)
        area_map = spatial_mod.match_areas(area_map, graph)
        table = spatial_mod.area_probabilities(
            graph, colour_by, _split_csv_list(conditionals)
        )
        document = spatial_mod.render_map_document(area_map, table, palette, colour_by)
        matched = len(area_map.matched_names())
        click.echo(f"{matched} of {len(area_map.features)} features matched an area")
        if out_path:
            _write_text(out_path, _canonical(document))
        if table_out:
            _write_text(table_out, table.to_csv_text())
    _run(go)


# -- pipeline / serve ----------------------------------------------------------------


@main.group()
def pipeline() -> None:
    """Scripted batch runs."""


@pipeline.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--base-dir", default=None,
              help="Directory paths in the config are relative to (default: the config's).")
@click.option("--ansi", is_flag=True)
def pipeline_run(config_path, base_dir, ansi) -> None:
    """Execute the steps of a JSON pipeline config."""
    import os

    def go():
        config = load_config(config_path)
        root = base_dir or os.path.dirname(os.path.abspath(config_path))
        run_pipeline(
            config, base_dir=root, echo=lambda s: click.echo(s, nl=False), ansi=ansi
        )
    _run(go)


@main.command("serve")
@click.option("--host", default=None, help="Bind address (env CEGFORGE_HOST).")
@click.option("--port", default=None, type=int, help="Port (env CEGFORGE_PORT).")
@click.option("--max-upload", default=None, type=int,
              help="Upload size limit in bytes (env CEGFORGE_MAX_UPLOAD).")
def serve_cmd(host, port, max_upload) -> None:
    """Run the HTTP service."""
    from .service import serve

    serve(host=host, port=port, max_upload=max_upload)


if __name__ == "__main__":
    main()
