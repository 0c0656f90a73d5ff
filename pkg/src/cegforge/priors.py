"""Per-stage Dirichlet priors: custom, uniform and phantom allocations.

The PriorTable is the contract between colouring and modelling: one row
per stage (leaves are never staged), each row holding the stage's prior
vector over its ordered outgoing edge labels. Rows are named u1, u2, ...
ordered by tree level and then by colour hex, so the numbering is stable
for a given staging. Displayed levels are 1-based (the root stage is
level 1); tree vertex levels remain 0-based internally.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace

from .errors import (
    ConfigurationError,
    IncompleteError,
    UnknownNameError,
    ValidationError,
)
from .event_tree import EventTree
from .staging import StageModel, Staging, _as_prior

__all__ = [
    "PriorRow",
    "PriorTable",
    "DirichletMoments",
    "StagedTreeModel",
    "prior_table_skeleton",
    "specify_priors",
    "phantom_allocation",
    "dirichlet_moments",
    "staged_tree_prior",
]

MODES = ("custom", "uniform", "phantom")
LABEL_TYPES = ("priors", "prior_means", "none")


@dataclass(frozen=True)
class PriorRow:
    name: str  # display id: u1, u2, ...
    stage_id: str  # staging-internal id
    colour: str
    level: int  # 1-based display level
    labels: tuple[str, ...]
    members: tuple[str, ...]
    prior: tuple[float, ...] | None = None

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def n_nodes(self) -> int:
        return len(self.members)

    @property
    def prior_mean(self) -> tuple[float, ...] | None:
        if self.prior is None:
            return None
        total = sum(self.prior)
        return tuple(a / total for a in self.prior)


def _fmt_vector(values, digits: int | None = None) -> str:
    if values is None:
        return ""
    if digits is None:
        parts = [f"{v:g}" for v in values]
    else:
        parts = [f"{v:.{digits}f}" for v in values]
    return ", ".join(parts)


@dataclass(frozen=True)
class PriorTable:
    rows: tuple[PriorRow, ...]

    def row(self, ref: str | int) -> PriorRow:
        """Look a row up by name ("u4"), 1-based number, or stage id."""
        if isinstance(ref, int):
            if not 1 <= ref <= len(self.rows):
                raise UnknownNameError(
                    f"row number {ref} out of range 1..{len(self.rows)}"
                )
            return self.rows[ref - 1]
        for row in self.rows:
            if ref in (row.name, row.stage_id):
                return row
        raise UnknownNameError(f"unknown prior table row {ref!r}")

    def is_complete(self) -> bool:
        return all(row.prior is not None for row in self.rows)

    def format(self) -> str:
        """Aligned text table; prior means shown at 2 decimal places."""
        header = (
            "Stage",
            "Colour",
            "Level",
            "Outgoing Edges",
            "Nodes",
            "Prior",
            "Prior Mean",
        )
        body = [
            (
                row.name,
                row.colour,
                str(row.level),
                str(row.k),
                str(row.n_nodes),
                _fmt_vector(row.prior),
                _fmt_vector(row.prior_mean, 2),
            )
            for row in self.rows
        ]
        widths = [
            max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
            for i in range(len(header))
        ]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
            "  ".join("-" * w for w in widths),
        ]
        lines.extend(
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)) for r in body
        )
        return "\n".join(lines) + "\n"

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["stage", "colour", "level", "edges", "nodes", "prior", "prior_mean"]
        )
        for row in self.rows:
            writer.writerow(
                [
                    row.name,
                    row.colour,
                    row.level,
                    row.k,
                    row.n_nodes,
                    _fmt_vector(row.prior),
                    _fmt_vector(row.prior_mean, 2),
                ]
            )
        return buf.getvalue()

    def to_payload(self) -> dict:
        return {
            "rows": [
                {
                    "name": r.name,
                    "stage_id": r.stage_id,
                    "colour": r.colour,
                    "level": r.level,
                    "labels": list(r.labels),
                    "members": list(r.members),
                    "prior": list(r.prior) if r.prior is not None else None,
                }
                for r in self.rows
            ]
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "PriorTable":
        return cls(
            rows=tuple(
                PriorRow(
                    name=r["name"],
                    stage_id=r["stage_id"],
                    colour=r["colour"],
                    level=r["level"],
                    labels=tuple(r["labels"]),
                    members=tuple(r["members"]),
                    prior=tuple(r["prior"]) if r.get("prior") is not None else None,
                )
                for r in payload["rows"]
            )
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PriorTable":
        return cls.from_payload(json.loads(text))


def prior_table_skeleton(tree: EventTree, staging: Staging) -> PriorTable:
    """Empty-prior rows for every stage, in display order.

    Rows are ordered by tree level, then colour hex; names u1..uN follow
    that order. Requires a fully assigned staging.
    """
    unassigned = staging.unassigned(tree)
    if unassigned:
        raise IncompleteError(
            f"{len(unassigned)} situations are not staged yet "
            f"(first: {unassigned[0]}); finish colouring before setting priors"
        )
    entries = []
    for stage_id, members in staging.stages().items():
        if not members:
            continue
        level = tree.vertex(members[0]).level
        labels = tree.out_labels(members[0])
        colour = staging.stage_colours[stage_id]
        entries.append((level, colour.upper(), stage_id, members, labels, colour))
    entries.sort(key=lambda e: (e[0], e[1]))
    rows = [
        PriorRow(
            name=f"u{i + 1}",
            stage_id=stage_id,
            colour=colour,
            level=level + 1,
            labels=labels,
            members=members,
        )
        for i, (level, _, stage_id, members, labels, colour) in enumerate(entries)
    ]
    return PriorTable(rows=tuple(rows))


def _resolve_overrides(
    table: PriorTable, overrides: dict | None
) -> dict[str, tuple[float, ...]]:
    """Validate overrides and key them by row name."""
    resolved: dict[str, tuple[float, ...]] = {}
    if not overrides:
        return resolved
    for ref, vector in overrides.items():
        row = table.row(ref)
        values = tuple(float(v) for v in vector)
        if len(values) != row.k:
            raise ValidationError(
                f"prior for {row.name} has length {len(values)}, expected {row.k}"
            )
        _as_prior(values)
        resolved[row.name] = values
    return resolved


def specify_priors(
    tree: EventTree,
    staging: Staging,
    mode: str,
    overrides: dict | None = None,
) -> PriorTable:
    """Fill the prior table in the requested mode, then apply overrides.

    Modes: ``custom`` (every stage must be covered by ``overrides``),
    ``uniform`` (all-ones vectors), ``phantom`` (see
    :func:`phantom_allocation`). Override keys may be row names ("u4"),
    1-based row numbers, or staging-internal stage ids.
    """
    mode_key = mode.strip().lower()
    if mode_key not in MODES:
        raise ConfigurationError(
            f"unknown prior mode {mode!r}; expected one of {', '.join(MODES)}"
        )
    skeleton = prior_table_skeleton(tree, staging)
    resolved = _resolve_overrides(skeleton, overrides)

    if mode_key == "uniform":
        base = {row.name: tuple(1.0 for _ in row.labels) for row in skeleton.rows}
    elif mode_key == "phantom":
        base = {
            row.name: row.prior
            for row in phantom_allocation(tree, staging).rows
        }
    else:
        missing = [row.name for row in skeleton.rows if row.name not in resolved]
        if missing:
            raise IncompleteError(
                f"custom priors missing for {len(missing)} stages: "
                f"{', '.join(missing[:8])}"
            )
        base = {}

    rows = []
    for row in skeleton.rows:
        prior = resolved.get(row.name, base.get(row.name))
        rows.append(replace(row, prior=prior))
    return PriorTable(rows=tuple(rows))


def phantom_allocation(tree: EventTree, staging: Staging) -> PriorTable:
    """Spread an imaginary sample of size alpha evenly through the tree.

    alpha is the maximum out-degree over situations. The root receives
    mass alpha split equally over its outgoing edges; every other
    situation splits its incoming mass equally over its own outgoing
    edges. On trees with deletions the division is over retained edges
    only, so no mass leaks to pruned branches. A stage's prior is the
    per-label sum of its members' edge masses.
    """
    skeleton = prior_table_skeleton(tree, staging)
    situations = tree.situations()
    alpha = max(len(tree.children(v.id)) for v in situations)

    mass: dict[str, float] = {tree.root.id: float(alpha)}
    edge_mass: dict[tuple[str, str], float] = {}
    for v in tree.vertices:  # parents precede children in storage order
        if tree.is_leaf(v.id):
            continue
        share = mass[v.id] / len(tree.children(v.id))
        for edge in tree.children(v.id):
            edge_mass[(v.id, edge.label)] = share
            mass[edge.child] = share

    rows = []
    for row in skeleton.rows:
        prior = tuple(
            sum(edge_mass[(m, label)] for m in row.members) for label in row.labels
        )
        rows.append(replace(row, prior=prior))
    return PriorTable(rows=tuple(rows))


@dataclass(frozen=True)
class DirichletMoments:
    mean: tuple[float, ...]
    variance: tuple[float, ...]


def dirichlet_moments(prior) -> DirichletMoments:
    """Marginal mean and variance of each Dirichlet component.

    mean_j = a_j / A and var_j = a_j (A - a_j) / (A^2 (A + 1)) with
    A = sum(a).
    """
    values = tuple(float(v) for v in _as_prior(prior))
    total = sum(values)
    mean = tuple(a / total for a in values)
    variance = tuple(
        a * (total - a) / (total * total * (total + 1.0)) for a in values
    )
    return DirichletMoments(mean=mean, variance=variance)


@dataclass(frozen=True)
class StagedTreeModel:
    """A coloured tree with priors attached; data not yet applied (y = 0)."""

    tree: EventTree
    staging: Staging
    prior_table: PriorTable
    stage_models: tuple[StageModel, ...]
    label_type: str = "priors"

    def stage_model(self, name: str) -> StageModel:
        for sm in self.stage_models:
            if sm.stage_id == name:
                return sm
        raise UnknownNameError(f"unknown stage {name!r}")

    def to_payload(self) -> dict:
        return {
            "tree": self.tree.to_payload(),
            "staging": self.staging.to_payload(),
            "prior_table": self.prior_table.to_payload(),
            "stage_models": [sm.to_payload() for sm in self.stage_models],
            "label_type": self.label_type,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "StagedTreeModel":
        return cls(
            tree=EventTree.from_payload(payload["tree"]),
            staging=Staging.from_payload(payload["staging"]),
            prior_table=PriorTable.from_payload(payload["prior_table"]),
            stage_models=tuple(
                StageModel.from_payload(p) for p in payload["stage_models"]
            ),
            label_type=payload.get("label_type", "priors"),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StagedTreeModel":
        return cls.from_payload(json.loads(text))


def staged_tree_prior(
    tree: EventTree,
    staging: Staging,
    priors: PriorTable,
    label_type: str = "priors",
) -> StagedTreeModel:
    """Attach a complete PriorTable to the coloured tree.

    Every stage model starts with zero data, so posterior = prior. The
    ``label_type`` (priors | prior_means | none) only affects rendering.
    """
    if label_type not in LABEL_TYPES:
        raise ConfigurationError(
            f"unknown label type {label_type!r}; expected one of {', '.join(LABEL_TYPES)}"
        )
    missing = [row.name for row in priors.rows if row.prior is None]
    if missing:
        raise IncompleteError(
            f"prior table rows without a vector: {', '.join(missing[:8])}"
        )
    current = prior_table_skeleton(tree, staging)
    if {r.stage_id for r in current.rows} != {r.stage_id for r in priors.rows}:
        raise IncompleteError("prior table does not cover the current staging")

    models = []
    for row in priors.rows:
        if len(row.prior or ()) != row.k:
            raise ValidationError(
                f"prior for {row.name} has length {len(row.prior or ())}, "
                f"expected {row.k}"
            )
        models.append(
            StageModel(
                stage_id=row.name,
                members=row.members,
                labels=row.labels,
                prior=row.prior,  # type: ignore[arg-type]
                data=tuple(0 for _ in row.labels),
            )
        )
    return StagedTreeModel(
        tree=tree,
        staging=staging,
        prior_table=priors,
        stage_models=tuple(models),
        label_type=label_type,
    )
