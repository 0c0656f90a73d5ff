"""Chain Event Graphs: posterior updating, contraction, reduction, scoring.

Contraction merges situations that share a stage and whose subtrees unfold
identically: two situations are position-equivalent iff they are in the
same stage and, for every outgoing label, the children reached along that
label are themselves position-equivalent. All leaves collapse into the
single sink position. Equivalence is computed bottom-up, so the recursion
grounds at the deepest level.

Position ids are w0, w1, ... assigned by (level, lowest member id); the
sink is w-infinity, written "w∞". Reduction keeps the original position
ids so reduced views stay visually aligned with the full graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import UnknownNameError, ValidationError
from .event_tree import EventTree
from .priors import StagedTreeModel
from .staging import StageModel

__all__ = [
    "SINK_ID",
    "Position",
    "CegEdge",
    "CEGModel",
    "ModelSummary",
    "ComparisonResult",
    "UpdateTable",
    "posterior_update",
    "contract_to_ceg",
    "create_reduced_ceg",
    "summarize_ceg",
    "summarize_stage_models",
    "compare_ceg_models",
    "update_table",
]

SINK_ID = "w∞"

LABEL_MODES = ("prior", "prior_mean", "posterior", "posterior_mean", "none")

LOW_INFORMATION_ESS = 100.0

_NOTE_LINES = (
    "Note: ESS (Effective Sample Size) reflects the total information "
    "(prior + data) available for each stage.",
    'Stages with ESS < 100 are flagged with "**" as potentially '
    "low-information stages.",
    "Increasing the strength of the prior would help this.",
)

_CAUTION_NOTE = (
    "Some stages are low-information (ESS < 100); this score reflects prior "
    "alignment as much as data and should be interpreted with caution."
)


def _numeric_id(vertex_id: str) -> int:
    try:
        return int(vertex_id.lstrip("sw"))
    except ValueError:
        return 10**9


@dataclass(frozen=True)
class Position:
    id: str
    level: int
    members: tuple[str, ...]
    stage: str


@dataclass(frozen=True)
class CegEdge:
    source: str
    target: str
    label: str
    stage: str
    param_index: int


@dataclass(frozen=True)
class CEGModel:
    variable_order: tuple[str, ...]
    positions: tuple[Position, ...]
    sink_members: tuple[str, ...]
    edges: tuple[CegEdge, ...]
    stage_models: tuple[StageModel, ...]
    stage_colours: dict[str, str]
    label_mode: str = "posterior_mean"
    dataset_fingerprint: str | None = None
    reduced_by: tuple[str, ...] = field(default_factory=tuple)

    def position(self, position_id: str) -> Position:
        for p in self.positions:
            if p.id == position_id:
                return p
        raise UnknownNameError(f"unknown position {position_id!r}")

    def stage_model(self, stage: str) -> StageModel:
        for sm in self.stage_models:
            if sm.stage_id == stage:
                return sm
        raise UnknownNameError(f"unknown stage {stage!r}")

    def outgoing(self, position_id: str) -> tuple[CegEdge, ...]:
        return tuple(e for e in self.edges if e.source == position_id)

    def incoming(self, position_id: str) -> tuple[CegEdge, ...]:
        return tuple(e for e in self.edges if e.target == position_id)

    @property
    def root_id(self) -> str:
        return self.positions[0].id if self.positions else SINK_ID

    def edge_value(self, edge: CegEdge) -> float | None:
        """Numeric display value of an edge under the label mode."""
        if self.label_mode == "none":
            return None
        sm = self.stage_model(edge.stage)
        vector = {
            "prior": sm.prior,
            "prior_mean": sm.prior_mean,
            "posterior": sm.posterior,
            "posterior_mean": sm.posterior_mean,
        }[self.label_mode]
        return float(vector[edge.param_index])

    def paths(self) -> tuple[tuple[CegEdge, ...], ...]:
        """All root-to-sink paths, in depth-first edge order."""
        if not self.positions:
            return ()
        out: list[tuple[CegEdge, ...]] = []
        stack: list[tuple[str, tuple[CegEdge, ...]]] = [(self.root_id, ())]
        while stack:
            node, sofar = stack.pop()
            if node == SINK_ID:
                out.append(sofar)
                continue
            hops = self.outgoing(node)
            for e in reversed(hops):
                stack.append((e.target, sofar + (e,)))
        return tuple(out)

    # -- serialization -----------------------------------------------------

    def to_payload(self) -> dict:
        return {
            "variable_order": list(self.variable_order),
            "positions": [
                {
                    "id": p.id,
                    "level": p.level,
                    "members": list(p.members),
                    "stage": p.stage,
                }
                for p in self.positions
            ],
            "sink": {"id": SINK_ID, "members": list(self.sink_members)},
            "edges": [
                {
                    "source": e.source,
                    "target": e.target,
                    "label": e.label,
                    "stage": e.stage,
                    "param_index": e.param_index,
                }
                for e in self.edges
            ],
            "stage_models": [sm.to_payload() for sm in self.stage_models],
            "stage_colours": dict(sorted(self.stage_colours.items())),
            "label_mode": self.label_mode,
            "dataset_fingerprint": self.dataset_fingerprint,
            "reduced_by": list(self.reduced_by),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "CEGModel":
        return cls(
            variable_order=tuple(payload["variable_order"]),
            positions=tuple(
                Position(p["id"], p["level"], tuple(p["members"]), p["stage"])
                for p in payload["positions"]
            ),
            sink_members=tuple(payload["sink"]["members"]),
            edges=tuple(
                CegEdge(
                    e["source"], e["target"], e["label"], e["stage"], e["param_index"]
                )
                for e in payload["edges"]
            ),
            stage_models=tuple(
                StageModel.from_payload(p) for p in payload["stage_models"]
            ),
            stage_colours=dict(payload.get("stage_colours", {})),
            label_mode=payload.get("label_mode", "posterior_mean"),
            dataset_fingerprint=payload.get("dataset_fingerprint"),
            reduced_by=tuple(payload.get("reduced_by", ())),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CEGModel":
        return cls.from_payload(json.loads(text))

    def to_dot(self) -> str:
        lines = ["digraph ceg {", "  rankdir=LR;"]
        for p in self.positions:
            colour = self.stage_colours.get(p.stage, "#FFFFFF")
            lines.append(
                f'  "{p.id}" [label="{p.id}", style=filled, fillcolor="{colour}"];'
            )
        lines.append(f'  "{SINK_ID}" [label="{SINK_ID}", shape=doublecircle];')
        for e in self.edges:
            value = self.edge_value(e)
            text = e.label if value is None else f"{e.label} ({value:.2f})"
            text = text.replace('"', '\\"')
            lines.append(f'  "{e.source}" -> "{e.target}" [label="{text}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def posterior_update(
    model: StagedTreeModel, counts: dict[str, list[int]] | None = None
) -> StagedTreeModel:
    """Apply the conjugate update: posterior parameters = prior + data.

    Data vectors are the per-label sums of each stage's member situations'
    outgoing edge counts, read from the model's tree. ``counts`` may
    override individual stages (keyed by stage name) for synthetic runs.
    """
    updated = []
    for sm in model.stage_models:
        if counts is not None and sm.stage_id in counts:
            y = tuple(int(v) for v in counts[sm.stage_id])
            if len(y) != sm.k:
                raise ValidationError(
                    f"counts for {sm.stage_id} have length {len(y)}, expected {sm.k}"
                )
        else:
            y = tuple(
                sum(model.tree.out_counts(m)[i] for m in sm.members)
                for i in range(sm.k)
            )
        updated.append(replace(sm, data=y))
    return replace(model, stage_models=tuple(updated))


def contract_to_ceg(model: StagedTreeModel, label_mode: str = "posterior_mean") -> CEGModel:
    """Collapse the staged tree into its Chain Event Graph."""
    if label_mode not in LABEL_MODES:
        raise ValidationError(
            f"unknown label mode {label_mode!r}; expected one of {', '.join(LABEL_MODES)}"
        )
    tree = model.tree
    unstaged = model.staging.unassigned(tree)
    if unstaged:
        raise ValidationError(
            f"staging incomplete: {len(unstaged)} situations uncoloured "
            f"(first: {unstaged[0]})"
        )

    stage_of: dict[str, str] = {}
    for sm in model.stage_models:
        for member in sm.members:
            stage_of[member] = sm.stage_id

    # bottom-up equivalence classes; leaves share the sink class
    cls_of: dict[str, tuple] = {leaf.id: ("sink",) for leaf in tree.leaves()}
    situations = sorted(
        tree.situations(), key=lambda v: (-v.level, _numeric_id(v.id))
    )
    for v in situations:
        signature = (
            stage_of[v.id],
            tuple((e.label, cls_of[e.child]) for e in tree.children(v.id)),
        )
        cls_of[v.id] = signature

    groups: dict[tuple, list[str]] = {}
    for v in tree.situations():
        groups.setdefault(cls_of[v.id], []).append(v.id)

    ordered = sorted(
        groups.values(),
        key=lambda ms: (
            tree.vertex(ms[0]).level,
            min(_numeric_id(m) for m in ms),
        ),
    )
    positions = []
    pos_of: dict[str, str] = {}
    for i, members in enumerate(ordered):
        members_sorted = tuple(sorted(members, key=_numeric_id))
        pid = f"w{i}"
        positions.append(
            Position(
                id=pid,
                level=tree.vertex(members_sorted[0]).level,
                members=members_sorted,
                stage=stage_of[members_sorted[0]],
            )
        )
        for m in members_sorted:
            pos_of[m] = pid

    edges: list[CegEdge] = []
    for p in positions:
        representative = p.members[0]
        sm = next(m for m in model.stage_models if m.stage_id == p.stage)
        for idx, e in enumerate(tree.children(representative)):
            target = pos_of.get(e.child, SINK_ID)
            edges.append(
                CegEdge(
                    source=p.id,
                    target=target,
                    label=e.label,
                    stage=p.stage,
                    param_index=sm.labels.index(e.label) if sm.labels else idx,
                )
            )

    stage_colours = {
        row.name: row.colour for row in model.prior_table.rows
    }
    return CEGModel(
        variable_order=tree.variable_order,
        positions=tuple(positions),
        sink_members=tuple(leaf.id for leaf in tree.leaves()),
        edges=tuple(edges),
        stage_models=model.stage_models,
        stage_colours=stage_colours,
        label_mode=label_mode,
        dataset_fingerprint=tree.dataset_fingerprint,
    )


def create_reduced_ceg(ceg: CEGModel, filter_by: list[str] | str) -> CEGModel:
    """Keep only root-to-sink paths containing ALL the given categories.

    Positions and edges on no surviving path are dropped; stage parameters
    are untouched. Position ids are preserved.
    """
    wanted = (filter_by,) if isinstance(filter_by, str) else tuple(filter_by)
    if not wanted:
        return ceg
    known = {e.label for e in ceg.edges}
    for category in wanted:
        if category not in known:
            raise UnknownNameError(f"unknown category {category!r}")

    surviving_edges: set[tuple[str, str, str]] = set()
    surviving_nodes: set[str] = set()
    needed = set(wanted)
    for path in ceg.paths():
        labels = {e.label for e in path}
        if needed <= labels:
            for e in path:
                surviving_edges.add((e.source, e.target, e.label))
                surviving_nodes.add(e.source)
                surviving_nodes.add(e.target)

    return replace(
        ceg,
        positions=tuple(p for p in ceg.positions if p.id in surviving_nodes),
        edges=tuple(
            e for e in ceg.edges if (e.source, e.target, e.label) in surviving_edges
        ),
        reduced_by=ceg.reduced_by + wanted,
    )


@dataclass(frozen=True)
class SummaryRow:
    stage: str
    log_score: float
    ess: float

    @property
    def flagged(self) -> bool:
        return self.ess < LOW_INFORMATION_ESS


def _fmt_ess(value: float) -> str:
    if abs(value - round(value)) < 1e-9:
        return str(int(round(value)))
    return f"{value:g}"


@dataclass(frozen=True)
class ModelSummary:
    total: float
    rows: tuple[SummaryRow, ...]
    dataset_fingerprint: str | None = None

    @property
    def has_low_information(self) -> bool:
        return any(r.flagged for r in self.rows)

    def format(self) -> str:
        lines = [
            "Chain Event Graph Summary",
            "-" * 52,
            f"Total Log Marginal Likelihood:  {self.total:.3f}",
            "Stage  LogScore  ESS",
        ]
        for r in self.rows:
            flag = "  **" if r.flagged else ""
            lines.append(f"{r.stage}  {r.log_score:.3f}  {_fmt_ess(r.ess)}{flag}")
        lines.append("")
        lines.extend(_NOTE_LINES)
        return "\n".join(lines) + "\n"

    def to_payload(self) -> dict:
        return {
            "total": self.total,
            "rows": [
                {
                    "stage": r.stage,
                    "log_score": r.log_score,
                    "ess": r.ess,
                    "flagged": r.flagged,
                }
                for r in self.rows
            ],
            "dataset_fingerprint": self.dataset_fingerprint,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ModelSummary":
        return cls(
            total=payload["total"],
            rows=tuple(
                SummaryRow(r["stage"], r["log_score"], r["ess"])
                for r in payload["rows"]
            ),
            dataset_fingerprint=payload.get("dataset_fingerprint"),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelSummary":
        return cls.from_payload(json.loads(text))


def summarize_stage_models(
    stage_models, dataset_fingerprint: str | None = None
) -> ModelSummary:
    rows = tuple(
        SummaryRow(stage=sm.stage_id, log_score=sm.log_score(), ess=sm.ess)
        for sm in stage_models
    )
    return ModelSummary(
        total=float(sum(r.log_score for r in rows)),
        rows=rows,
        dataset_fingerprint=dataset_fingerprint,
    )


def summarize_ceg(ceg: CEGModel) -> ModelSummary:
    """Per-stage log scores, effective sample sizes, and their total."""
    return summarize_stage_models(ceg.stage_models, ceg.dataset_fingerprint)


@dataclass(frozen=True)
class ComparisonResult:
    log_bayes_factor: float
    preferred: str  # "Model 1" | "Model 2" | "tie"
    total_a: float
    total_b: float
    warning: str | None = None
    caution: str | None = None

    def format(self) -> str:
        lines = [
            f"Log marginal of model 1:  {self.total_a:.3f}",
            f"Log marginal of model 2:  {self.total_b:.3f}",
            f"Log Bayes factor of Model 1 vs Model 2:  {self.log_bayes_factor:.3f}",
            f"Preferred Model: {self.preferred}"
            if self.preferred != "tie"
            else "Preferred Model: tie (equal scores)",
        ]
        if self.warning:
            lines.append(f"Warning: {self.warning}")
        if self.caution:
            lines.append(f"Caution: {self.caution}")
        return "\n".join(lines) + "\n"

    def to_payload(self) -> dict:
        return {
            "log_bayes_factor": self.log_bayes_factor,
            "preferred": self.preferred,
            "total_a": self.total_a,
            "total_b": self.total_b,
            "warning": self.warning,
            "caution": self.caution,
        }


def compare_ceg_models(a: ModelSummary, b: ModelSummary) -> ComparisonResult:
    """Log Bayes factor of model 1 against model 2.

    Positive favours Model 1, negative Model 2, exact zero is a tie. If
    the two summaries carry different dataset fingerprints the result
    carries a warning (scores on different data are not comparable).
    """
    logbf = a.total - b.total
    preferred = "Model 1" if logbf > 0 else "Model 2" if logbf < 0 else "tie"
    warning = None
    if (
        a.dataset_fingerprint is not None
        and b.dataset_fingerprint is not None
        and a.dataset_fingerprint != b.dataset_fingerprint
    ):
        warning = (
            "the models were scored on different datasets; "
            "the log Bayes factor is not meaningful"
        )
    caution = (
        _CAUTION_NOTE if (a.has_low_information or b.has_low_information) else None
    )
    return ComparisonResult(
        log_bayes_factor=logbf,
        preferred=preferred,
        total_a=a.total,
        total_b=b.total,
        warning=warning,
        caution=caution,
    )


@dataclass(frozen=True)
class UpdateTable:
    """Prior-to-posterior update rows, one per stage."""

    rows: tuple[dict, ...]

    def format(self) -> str:
        header = ("Stage", "Prior", "Prior Mean", "Data", "Posterior", "Posterior Mean")
        body = [
            (
                r["stage"],
                ", ".join(f"{v:g}" for v in r["prior"]),
                ", ".join(f"{v:.2f}" for v in r["prior_mean"]),
                ", ".join(f"{v:g}" for v in r["data"]),
                ", ".join(f"{v:g}" for v in r["posterior"]),
                ", ".join(f"{v:.2f}" for v in r["posterior_mean"]),
            )
            for r in self.rows
        ]
        widths = [
            max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i])
            for i in range(len(header))
        ]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
            "  ".join("-" * w for w in widths),
        ]
        lines.extend(
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row))
            for row in body
        )
        return "\n".join(lines) + "\n"

    def to_csv_text(self) -> str:
        import csv as _csv
        import io as _io

        buf = _io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["stage", "prior", "prior_mean", "data", "posterior", "posterior_mean"]
        )
        for r in self.rows:
            writer.writerow(
                [
                    r["stage"],
                    ", ".join(f"{v:g}" for v in r["prior"]),
                    ", ".join(f"{v:.2f}" for v in r["prior_mean"]),
                    ", ".join(f"{v:g}" for v in r["data"]),
                    ", ".join(f"{v:g}" for v in r["posterior"]),
                    ", ".join(f"{v:.2f}" for v in r["posterior_mean"]),
                ]
            )
        return buf.getvalue()

    def to_payload(self) -> dict:
        return {"rows": [dict(r) for r in self.rows]}


def update_table(source: CEGModel | StagedTreeModel) -> UpdateTable:
    """Table-shaped view of every stage's prior, data and posterior."""
    stage_models = source.stage_models
    colours = (
        source.stage_colours
        if isinstance(source, CEGModel)
        else {row.name: row.colour for row in source.prior_table.rows}
    )
    rows = tuple(
        {
            "stage": sm.stage_id,
            "colour": colours.get(sm.stage_id, "#FFFFFF"),
            "labels": list(sm.labels),
            "prior": list(sm.prior),
            "prior_mean": list(sm.prior_mean),
            "data": list(sm.data),
            "posterior": list(sm.posterior),
            "posterior_mean": list(sm.posterior_mean),
        }
        for sm in stage_models
    )
    return UpdateTable(rows=rows)
