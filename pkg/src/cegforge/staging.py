"""Stages over an event tree: manual colouring, AHC, and model scoring.

A stage is a set of situations judged to share one conditional probability
vector over their outgoing edges. Stages are keyed by colour in displays;
#FFFFFF is reserved for unassigned situations. Manually created stages are
frozen: Agglomerative Hierarchical Clustering never alters their
membership and only clusters what is left.

Scoring uses the Dirichlet-multinomial log marginal likelihood. For a
stage with prior vector a (total A), data y (total N) and posterior
a* = a + y (total A*), the per-stage term is

    lgamma(A) - lgamma(A*) + sum_j [lgamma(a*_j) - lgamma(a_j)]

and the score of a staging is the sum over stages. Merging two stages adds
their prior and data vectors elementwise; the log Bayes factor of a merge
is the merged term minus the two separate terms.
"""

from __future__ import annotations

import colorsys
import json
import re
from dataclasses import dataclass, field
from itertools import combinations, count
from math import lgamma

import numpy as np
from scipy.special import gammaln

from .errors import UnknownNameError, ValidationError
from .event_tree import EventTree

__all__ = [
    "DEFAULT_COLOUR",
    "Staging",
    "StageModel",
    "StagingSummary",
    "initial_staging",
    "assign_stages",
    "log_marginal_stage",
    "merge_score",
    "run_ahc",
    "summarize_staging",
    "palette_colours",
]

DEFAULT_COLOUR = "#FFFFFF"

_HEX_RE = re.compile(r"^#[0-9A-Fa-f]{6}$")

# First entries of the auto palette; extended programmatically when a
# staging needs more distinct colours than are listed here.
_PALETTE_BASE = (
    "#7987D7", "#D6E3AE", "#D6A56F", "#D7ADCD", "#79D391", "#8F52E0",
    "#CCD3D2", "#D884D2", "#6FB1D8", "#E0B65C", "#9C8ADE", "#7FD0B0",
    "#DE8F6E", "#8FA8E8", "#C2E078", "#E39DC0", "#6ED4CF", "#D8C26E",
)


def _normalize_colour(colour: str) -> str:
    if not _HEX_RE.match(colour):
        raise ValidationError(f"invalid colour {colour!r}; expected #RRGGBB hex")
    return colour.upper()


def palette_colours(n: int, used: set[str] | frozenset[str] = frozenset()) -> list[str]:
    """Deterministic sequence of n distinct hex colours avoiding `used`."""
    taken = {c.upper() for c in used} | {DEFAULT_COLOUR}
    out: list[str] = []
    for colour in _PALETTE_BASE:
        if len(out) == n:
            return out
        if colour not in taken:
            out.append(colour)
            taken.add(colour)
    for i in count():
        if len(out) == n:
            break
        hue = (i * 0.6180339887498949) % 1.0
        r, g, b = colorsys.hsv_to_rgb(hue, 0.45, 0.85)
        colour = "#%02X%02X%02X" % (round(r * 255), round(g * 255), round(b * 255))
        if colour not in taken:
            out.append(colour)
            taken.add(colour)
    return out


def _numeric_id(vertex_id: str) -> int:
    try:
        return int(vertex_id.lstrip("sw"))
    except ValueError:
        return 0


@dataclass(frozen=True)
class Staging:
    """Partition (possibly partial) of situations into colour-keyed stages."""

    assignment: dict[str, str]
    stage_colours: dict[str, str]
    frozen_stages: frozenset[str] = field(default_factory=frozenset)
    counter: int = 0
    default_colour: str = DEFAULT_COLOUR

    def stage_of(self, situation_id: str) -> str | None:
        return self.assignment.get(situation_id)

    def colour_of(self, situation_id: str) -> str:
        stage = self.assignment.get(situation_id)
        if stage is None:
            return self.default_colour
        return self.stage_colours[stage]

    def members(self, stage_id: str) -> tuple[str, ...]:
        if stage_id not in self.stage_colours:
            raise UnknownNameError(f"unknown stage {stage_id!r}")
        found = [s for s, g in self.assignment.items() if g == stage_id]
        return tuple(sorted(found, key=_numeric_id))

    def stages(self) -> dict[str, tuple[str, ...]]:
        acc: dict[str, list[str]] = {g: [] for g in self.stage_colours}
        for sit, stage in self.assignment.items():
            acc[stage].append(sit)
        return {
            g: tuple(sorted(ms, key=_numeric_id))
            for g, ms in acc.items()
        }

    def stage_for_colour(self, colour: str) -> str | None:
        wanted = colour.upper()
        for stage, col in self.stage_colours.items():
            if col.upper() == wanted:
                return stage
        return None

    def unassigned(self, tree: EventTree) -> tuple[str, ...]:
        return tuple(
            v.id for v in tree.situations() if v.id not in self.assignment
        )

    def is_complete(self, tree: EventTree) -> bool:
        return not self.unassigned(tree)

    # -- serialization -----------------------------------------------------

    def to_payload(self) -> dict:
        groups = self.stages()
        return {
            "stages": [
                {
                    "id": g,
                    "members": list(groups[g]),
                    "colour": self.stage_colours[g],
                    "frozen": g in self.frozen_stages,
                }
                for g in sorted(groups, key=lambda g: (_numeric_id(g), g))
            ],
            "counter": self.counter,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Staging":
        assignment: dict[str, str] = {}
        colours: dict[str, str] = {}
        frozen: set[str] = set()
        for entry in payload["stages"]:
            colours[entry["id"]] = entry["colour"]
            for sit in entry["members"]:
                assignment[sit] = entry["id"]
            if entry.get("frozen"):
                frozen.add(entry["id"])
        return cls(
            assignment=assignment,
            stage_colours=colours,
            frozen_stages=frozenset(frozen),
            counter=payload.get("counter", 0),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Staging":
        return cls.from_payload(json.loads(text))


def initial_staging(tree: EventTree) -> Staging:
    """Fresh staging: the root alone in its own (default-coloured) stage."""
    root_stage = "g0"
    return Staging(
        assignment={tree.root.id: root_stage},
        stage_colours={root_stage: DEFAULT_COLOUR},
        frozen_stages=frozenset(),
        counter=1,
    )


def _check_group_compatible(
    tree: EventTree, members: list[str], context: str
) -> tuple[int, tuple[str, ...]]:
    """All members must share level and ordered edge-label tuple."""
    first = members[0]
    level = tree.vertex(first).level
    labels = tree.out_labels(first)
    for other in members[1:]:
        if tree.vertex(other).level != level:
            raise ValidationError(
                f"{context}: {first} (level {level}) and {other} "
                f"(level {tree.vertex(other).level}) are at different levels"
            )
        if tree.out_labels(other) != labels:
            raise ValidationError(
                f"{context}: {first} and {other} have different edge labels "
                f"({list(labels)} vs {list(tree.out_labels(other))})"
            )
    return level, labels


def assign_stages(
    tree: EventTree,
    staging: Staging,
    node_groups: list[list[str]],
    colours: list[str] | None = None,
) -> Staging:
    """Manually place situation groups into frozen stages.

    Each group becomes a new frozen stage, or joins the existing stage that
    already carries the given colour. Situations already staged elsewhere
    are reassigned. When ``colours`` is omitted an auto palette is used.
    """
    if not node_groups:
        raise ValidationError("no node groups given")
    groups = [[str(v) for v in g] for g in node_groups]
    flat = [v for g in groups for v in g]
    if len(set(flat)) != len(flat):
        raise ValidationError("a situation id appears more than once in the request")
    for vertex_id in flat:
        if tree.is_leaf(vertex_id):
            raise ValidationError(f"{vertex_id} is a leaf and cannot be staged")

    group_meta = [
        _check_group_compatible(tree, g, f"group {i + 1}") for i, g in enumerate(groups)
    ]

    if colours is not None:
        if len(colours) != len(groups):
            raise ValidationError(
                f"{len(groups)} groups but {len(colours)} colours given"
            )
        normalized = [_normalize_colour(c) for c in colours]
        if len(set(normalized)) != len(normalized):
            raise ValidationError("duplicate colours in the request")
        if DEFAULT_COLOUR in normalized:
            raise ValidationError(f"{DEFAULT_COLOUR} is reserved for unassigned nodes")
    else:
        in_use = set(staging.stage_colours.values())
        normalized = palette_colours(len(groups), in_use)

    assignment = dict(staging.assignment)
    stage_colours = dict(staging.stage_colours)
    frozen = set(staging.frozen_stages)
    counter = staging.counter

    for group, colour, (level, labels) in zip(groups, normalized, group_meta):
        existing = None
        for stage, col in stage_colours.items():
            if col == colour:
                existing = stage
                break
        if existing is not None:
            # joining an existing stage: its members must stay compatible
            current = [s for s, g in assignment.items() if g == existing]
            _check_group_compatible(tree, current + group, f"colour {colour}")
            target = existing
        else:
            target = f"g{counter}"
            counter += 1
            stage_colours[target] = colour
        for vertex_id in group:
            assignment[vertex_id] = target
        frozen.add(target)

    # drop stages emptied by reassignment and free their colours
    occupied = set(assignment.values())
    for stage in list(stage_colours):
        if stage not in occupied:
            del stage_colours[stage]
            frozen.discard(stage)

    return Staging(
        assignment=assignment,
        stage_colours=stage_colours,
        frozen_stages=frozenset(frozen),
        counter=counter,
    )


# ---------------------------------------------------------------------------
# Scoring


def _as_prior(prior) -> np.ndarray:
    arr = np.asarray(prior, dtype=float)
    if arr.ndim != 1:
        raise ValidationError("prior must be a flat vector")
    if np.any(arr <= 0):
        raise ValidationError(f"prior entries must be positive, got {arr.tolist()}")
    return arr


def _as_data(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1:
        raise ValidationError("data must be a flat vector")
    if np.any(arr < 0):
        raise ValidationError(f"data entries must be non-negative, got {arr.tolist()}")
    if np.any(arr != np.floor(arr)):
        raise ValidationError(f"data entries must be integers, got {arr.tolist()}")
    return arr


def _log_marginal(prior: np.ndarray, data: np.ndarray) -> float:
    posterior = prior + data
    return float(
        gammaln(prior.sum())
        - gammaln(posterior.sum())
        + np.sum(gammaln(posterior) - gammaln(prior))
    )


def log_marginal_stage(prior, data) -> float:
    """Log marginal likelihood term of one stage.

    Args:
        prior: Dirichlet parameters, positive, length >= 2.
        data: observed edge counts, non-negative integers, same length.
    """
    a = _as_prior(prior)
    y = _as_data(data)
    if len(a) != len(y):
        raise ValidationError(f"length mismatch: prior {len(a)} vs data {len(y)}")
    if len(a) < 2:
        raise ValidationError("a stage needs at least two outgoing edges to score")
    return _log_marginal(a, y)


@dataclass(frozen=True)
class StageModel:
    """One stage with its prior, data and posterior vectors."""

    stage_id: str
    members: tuple[str, ...]
    labels: tuple[str, ...]
    prior: tuple[float, ...]
    data: tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.labels) == len(self.prior) == len(self.data)):
            raise ValidationError(
                f"stage {self.stage_id}: labels/prior/data lengths differ"
            )
        _as_prior(self.prior)
        _as_data(self.data)

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def posterior(self) -> tuple[float, ...]:
        return tuple(a + y for a, y in zip(self.prior, self.data))

    @property
    def prior_mean(self) -> tuple[float, ...]:
        total = sum(self.prior)
        return tuple(a / total for a in self.prior)

    @property
    def posterior_mean(self) -> tuple[float, ...]:
        total = sum(self.posterior)
        return tuple(a / total for a in self.posterior)

    # CPV: the stage's conditional probability vector (posterior mean)
    @property
    def theta(self) -> tuple[float, ...]:
        return self.posterior_mean

    @property
    def ess(self) -> float:
        """Effective sample size: total posterior mass."""
        return float(sum(self.posterior))

    def log_score(self) -> float:
        if self.k < 2:
            return 0.0  # single-outcome stage carries no evidence
        return _log_marginal(np.asarray(self.prior), np.asarray(self.data, dtype=float))

    def to_payload(self) -> dict:
        return {
            "stage_id": self.stage_id,
            "members": list(self.members),
            "labels": list(self.labels),
            "prior": list(self.prior),
            "data": list(self.data),
            "posterior": list(self.posterior),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "StageModel":
        return cls(
            stage_id=payload["stage_id"],
            members=tuple(payload["members"]),
            labels=tuple(payload["labels"]),
            prior=tuple(payload["prior"]),
            data=tuple(payload["data"]),
        )


def merge_score(stage_a: StageModel, stage_b: StageModel) -> float:
    """Log Bayes factor of merging two stages into one.

    Positive means the merged model is preferred. The merged stage has
    prior and data equal to the elementwise sums of the inputs.
    """
    if stage_a.labels != stage_b.labels:
        raise ValidationError(
            f"cannot merge stages with different labels: "
            f"{list(stage_a.labels)} vs {list(stage_b.labels)}"
        )
    a1, y1 = np.asarray(stage_a.prior), np.asarray(stage_a.data, dtype=float)
    a2, y2 = np.asarray(stage_b.prior), np.asarray(stage_b.data, dtype=float)
    return (
        _log_marginal(a1 + a2, y1 + y2) - _log_marginal(a1, y1) - _log_marginal(a2, y2)
    )


# ---------------------------------------------------------------------------
# Agglomerative hierarchical clustering


@dataclass
class _SearchStage:
    members: tuple[str, ...]
    level: int
    labels: tuple[str, ...]
    prior: np.ndarray
    data: np.ndarray
    existing_id: str | None  # kept id/colour if the stage survives unmerged
    uid: int = -1
    lm: float = 0.0  # cached log marginal of this stage alone

    @property
    def key(self) -> int:
        return min(_numeric_id(m) for m in self.members)


def _lm_fast(prior: np.ndarray, data: np.ndarray) -> float:
    # scalar lgamma beats vectorized gammaln at these tiny lengths
    abar = float(prior.sum())
    total = lgamma(abar) - lgamma(abar + float(data.sum()))
    for idx in range(prior.shape[0]):
        total += lgamma(float(prior[idx] + data[idx])) - lgamma(float(prior[idx]))
    return total


def _situation_data(tree: EventTree, members: tuple[str, ...], labels) -> np.ndarray:
    data = np.zeros(len(labels))
    for m in members:
        data += np.asarray(tree.out_counts(m), dtype=float)
    return data


def run_ahc(
    tree: EventTree,
    staging: Staging,
    priors: dict[str, list[float]] | None = None,
    trace: list | None = None,
) -> Staging:
    """Complete a staging by greedy bottom-up merging.

    Every unassigned situation starts as its own singleton stage with a
    uniform Dir(1,...,1) prior (or its entry in ``priors``, keyed by
    situation id). Repeatedly, among all pairs of non-frozen stages at the
    same level with identical ordered edge labels, the pair with maximal
    log Bayes factor is merged while that factor is positive. Ties break
    on the numerically smallest (stage, stage) pair. Frozen stages are
    never touched. New stages receive palette colours that avoid existing
    ones.

    When ``trace`` is a list, one record per accepted merge is appended:
    ``{"stages": [...member tuples...], "merged": (members_a, members_b),
    "logbf": float}`` with the candidate pool snapshot taken before the
    merge.
    """
    working: list[_SearchStage] = []
    for stage_id, members in staging.stages().items():
        if stage_id in staging.frozen_stages:
            continue
        level, labels = _check_group_compatible(tree, list(members), f"stage {stage_id}")
        prior = np.zeros(len(labels))
        for m in members:
            if priors and m in priors:
                prior += _as_prior(priors[m])
            else:
                prior += np.ones(len(labels))
        working.append(
            _SearchStage(
                members=members,
                level=level,
                labels=labels,
                prior=prior,
                data=_situation_data(tree, members, labels),
                existing_id=stage_id,
            )
        )
    for sit in staging.unassigned(tree):
        labels = tree.out_labels(sit)
        prior = (
            _as_prior(priors[sit])
            if priors and sit in priors
            else np.ones(len(labels))
        )
        if len(prior) != len(labels):
            raise ValidationError(
                f"prior for {sit} has length {len(prior)}, expected {len(labels)}"
            )
        working.append(
            _SearchStage(
                members=(sit,),
                level=tree.vertex(sit).level,
                labels=labels,
                prior=prior,
                data=_situation_data(tree, (sit,), labels),
                existing_id=None,
            )
        )

    for uid, stage in enumerate(working):
        stage.uid = uid
        stage.lm = _lm_fast(stage.prior, stage.data)
    next_uid = len(working)

    # pair scores survive across iterations; a merge only invalidates the
    # pairs that touched the two merged stages
    pairs: dict[tuple[int, int], tuple[float, int, int]] = {}

    def score_pair(a: _SearchStage, b: _SearchStage) -> None:
        if a.level != b.level or a.labels != b.labels:
            return
        logbf = _lm_fast(a.prior + b.prior, a.data + b.data) - a.lm - b.lm
        lo, hi = sorted((a.key, b.key))
        pairs[(min(a.uid, b.uid), max(a.uid, b.uid))] = (logbf, lo, hi)

    for i, j in combinations(range(len(working)), 2):
        score_pair(working[i], working[j])

    while pairs:
        # maximize logBF; tie-break on the smallest (stage, stage) pair
        best_key = min(pairs, key=lambda k: (-pairs[k][0], pairs[k][1], pairs[k][2]))
        logbf = pairs[best_key][0]
        if logbf <= 0:
            break
        a = next(s for s in working if s.uid == best_key[0])
        b = next(s for s in working if s.uid == best_key[1])
        if trace is not None:
            trace.append(
                {
                    "stages": [s.members for s in working],
                    "merged": (a.members, b.members),
                    "logbf": logbf,
                }
            )
        merged = _SearchStage(
            members=tuple(sorted(a.members + b.members, key=_numeric_id)),
            level=a.level,
            labels=a.labels,
            prior=a.prior + b.prior,
            data=a.data + b.data,
            existing_id=None,
            uid=next_uid,
        )
        next_uid += 1
        merged.lm = _lm_fast(merged.prior, merged.data)
        dropped = set(best_key)
        pairs = {k: v for k, v in pairs.items() if not (dropped & set(k))}
        working = [s for s in working if s.uid not in dropped]
        for other in working:
            score_pair(merged, other)
        working.append(merged)

    assignment = dict(staging.assignment)
    stage_colours = dict(staging.stage_colours)
    counter = staging.counter

    surviving_pre_existing = {s.existing_id for s in working if s.existing_id}
    for stage_id, members in staging.stages().items():
        if stage_id in staging.frozen_stages or stage_id in surviving_pre_existing:
            continue
        # pre-existing unfrozen stage was merged away; retire its id/colour
        del stage_colours[stage_id]
        for m in members:
            assignment.pop(m, None)

    fresh = sorted(
        (s for s in working if s.existing_id is None),
        key=lambda s: (s.level, s.key),
    )
    new_colours = palette_colours(len(fresh), set(stage_colours.values()))
    for state, colour in zip(fresh, new_colours):
        stage_id = f"g{counter}"
        counter += 1
        stage_colours[stage_id] = colour
        for m in state.members:
            assignment[m] = stage_id

    return Staging(
        assignment=assignment,
        stage_colours=stage_colours,
        frozen_stages=staging.frozen_stages,
        counter=counter,
    )


# ---------------------------------------------------------------------------
# Summaries


@dataclass(frozen=True)
class StagingSummary:
    total_nodes: int
    total_edges: int
    left_to_colour: int
    colour_counts: dict[str, int]

    def format(self) -> str:
        lines = [
            "Summary of Staged Tree Object",
            "=============================",
            f"Total nodes: {self.total_nodes}",
            f"Total edges: {self.total_edges}",
            f"Nodes left to be coloured: {self.left_to_colour}",
            "",
            "Node colour counts:",
        ]
        for colour in sorted(self.colour_counts):
            n = self.colour_counts[colour]
            noun = "node" if n == 1 else "nodes"
            lines.append(f"{colour} ({n} {noun})")
        return "\n".join(lines) + "\n"


def summarize_staging(tree: EventTree, staging: Staging) -> StagingSummary:
    """Colouring progress: the root counts as coloured, leaves never do."""
    root_id = tree.root.id
    counts: dict[str, int] = {}
    left = 0
    for v in tree.vertices:
        if tree.is_leaf(v.id):
            colour = staging.default_colour
        else:
            colour = staging.colour_of(v.id)
            if (
                v.id != root_id
                and staging.stage_of(v.id) is None
            ):
                left += 1
        counts[colour] = counts.get(colour, 0) + 1
    return StagingSummary(
        total_nodes=len(tree.vertices),
        total_edges=len(tree.edges),
        left_to_colour=left,
        colour_counts=counts,
    )
