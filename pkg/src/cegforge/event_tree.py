"""Event trees: the symmetric tree over selected categorical columns.

Vertices are ids ``s0, s1, ...`` assigned breadth first, level by level,
children in lexicographic label order within each parent and parents in id
order. Edge counts record how many dataset rows match the value prefix on
the path to that edge; unobserved combinations keep their zero-count edges
so the structure always shows every logical unfolding.

Deletion is the asymmetry tool: deleting a vertex prunes everything below
it while the vertex itself stays behind as a terminal, so the category on
its incoming edge (and its count) is retained. Deleting a vertex that is
already a leaf removes the leaf. Ids never change under deletion; the id
sequence simply acquires holes.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

from .dataset import Dataset, select_columns
from .errors import UnknownNameError, ValidationError

__all__ = [
    "Vertex",
    "Edge",
    "EventTree",
    "TreeSummary",
    "create_event_tree",
    "delete_nodes",
    "summarize_tree",
]


@dataclass(frozen=True)
class Vertex:
    id: str
    level: int
    path: tuple[str, ...]


@dataclass(frozen=True)
class Edge:
    parent: str
    child: str
    label: str
    count: int


@dataclass(frozen=True)
class EventTree:
    variable_order: tuple[str, ...]
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    deleted_ids: frozenset[str] = field(default_factory=frozenset)
    # digest of the source dataset (pre column selection), for comparison
    # warnings between models; not part of the tree structure itself
    dataset_fingerprint: str | None = None

    @cached_property
    def _by_id(self) -> dict[str, Vertex]:
        return {v.id: v for v in self.vertices}

    @cached_property
    def _children(self) -> dict[str, tuple[Edge, ...]]:
        acc: dict[str, list[Edge]] = defaultdict(list)
        for e in self.edges:
            acc[e.parent].append(e)
        return {k: tuple(v) for k, v in acc.items()}

    @cached_property
    def _incoming(self) -> dict[str, Edge]:
        return {e.child: e for e in self.edges}

    @property
    def root(self) -> Vertex:
        return self.vertices[0]

    def vertex(self, vertex_id: str) -> Vertex:
        try:
            return self._by_id[vertex_id]
        except KeyError:
            raise UnknownNameError(f"unknown vertex id {vertex_id!r}") from None

    def has_vertex(self, vertex_id: str) -> bool:
        return vertex_id in self._by_id

    def children(self, vertex_id: str) -> tuple[Edge, ...]:
        self.vertex(vertex_id)
        return self._children.get(vertex_id, ())

    def incoming_edge(self, vertex_id: str) -> Edge | None:
        self.vertex(vertex_id)
        return self._incoming.get(vertex_id)

    def situations(self) -> tuple[Vertex, ...]:
        return tuple(v for v in self.vertices if self._children.get(v.id))

    def leaves(self) -> tuple[Vertex, ...]:
        return tuple(v for v in self.vertices if not self._children.get(v.id))

    def is_leaf(self, vertex_id: str) -> bool:
        self.vertex(vertex_id)
        return not self._children.get(vertex_id)

    def descendants(self, vertex_id: str) -> set[str]:
        """Strict descendants of a vertex (the vertex itself excluded)."""
        out: set[str] = set()
        stack = [e.child for e in self.children(vertex_id)]
        while stack:
            node = stack.pop()
            out.add(node)
            stack.extend(e.child for e in self._children.get(node, ()))
        return out

    def out_labels(self, vertex_id: str) -> tuple[str, ...]:
        return tuple(e.label for e in self.children(vertex_id))

    def out_counts(self, vertex_id: str) -> tuple[int, ...]:
        return tuple(e.count for e in self.children(vertex_id))

    def total_count(self) -> int:
        return sum(e.count for e in self.children(self.root.id))

    def root_to_leaf_paths(self) -> tuple[tuple[str, ...], ...]:
        return tuple(v.path for v in self.leaves())

    # -- serialization -----------------------------------------------------

    def to_payload(self) -> dict:
        return {
            "variable_order": list(self.variable_order),
            "vertices": [
                {"id": v.id, "level": v.level, "path": list(v.path)}
                for v in self.vertices
            ],
            "edges": [
                {"parent": e.parent, "child": e.child, "label": e.label, "count": e.count}
                for e in self.edges
            ],
            "deleted_ids": sorted(self.deleted_ids),
            "dataset_fingerprint": self.dataset_fingerprint,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "EventTree":
        return cls(
            variable_order=tuple(payload["variable_order"]),
            vertices=tuple(
                Vertex(v["id"], v["level"], tuple(v["path"])) for v in payload["vertices"]
            ),
            edges=tuple(
                Edge(e["parent"], e["child"], e["label"], e["count"])
                for e in payload["edges"]
            ),
            deleted_ids=frozenset(payload.get("deleted_ids", ())),
            dataset_fingerprint=payload.get("dataset_fingerprint"),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_payload(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EventTree":
        return cls.from_payload(json.loads(text))

    def to_dot(self) -> str:
        lines = ["digraph event_tree {", "  rankdir=LR;", '  node [shape=circle];']
        for v in self.vertices:
            lines.append(f'  "{v.id}" [label="{v.id}"];')
        for e in self.edges:
            label = e.label.replace('"', '\\"')
            lines.append(f'  "{e.parent}" -> "{e.child}" [label="{label} ({e.count})"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def create_event_tree(
    data: Dataset, columns: list[str | int] | None = None
) -> EventTree:
    """Build the symmetric event tree over the selected columns.

    One path exists for every element of the Cartesian product of the
    columns' category levels, in column order, including combinations never
    observed in the data (their edges carry count 0).
    """
    ds = select_columns(data, columns) if columns is not None else data
    if ds.n_columns < 1:
        raise ValidationError("need at least one column to build a tree")
    level_values: list[tuple[str, ...]] = []
    for name in ds.column_names:
        values = ds.levels(name)
        if not values:
            raise ValidationError(
                f"column {name!r} has no category levels; dataset is empty"
            )
        level_values.append(values)

    depth = len(level_values)
    prefix_counts: list[dict[tuple[str, ...], int]] = [
        defaultdict(int) for _ in range(depth)
    ]
    for row in ds.rows:
        for d in range(depth):
            prefix_counts[d][row[: d + 1]] += 1

    vertices: list[Vertex] = [Vertex("s0", 0, ())]
    edges: list[Edge] = []
    current = vertices[:]
    next_id = 1
    for d in range(depth):
        following: list[Vertex] = []
        for parent in current:
            for label in level_values[d]:
                path = parent.path + (label,)
                child = Vertex(f"s{next_id}", d + 1, path)
                next_id += 1
                vertices.append(child)
                edges.append(
                    Edge(parent.id, child.id, label, prefix_counts[d].get(path, 0))
                )
                following.append(child)
        current = following

    return EventTree(
        variable_order=ds.column_names,
        vertices=tuple(vertices),
        edges=tuple(edges),
        dataset_fingerprint=data.fingerprint(),
    )


def delete_nodes(tree: EventTree, ids: list[str]) -> EventTree:
    """Prune the tree below each named vertex.

    Every strict descendant of a named vertex is removed along with its
    incident edges; the named vertex itself remains as a terminal with its
    incoming edge (and count) intact. A named vertex that is already a leaf
    is removed. Retained vertices keep their ids.
    """
    named: list[str] = []
    seen: set[str] = set()
    for vertex_id in ids:
        if vertex_id in seen:
            continue
        seen.add(vertex_id)
        named.append(vertex_id)
    if not named:
        raise ValidationError("no vertex ids given to delete")

    root_id = tree.root.id
    removed: set[str] = set()
    for vertex_id in named:
        if vertex_id == root_id:
            raise ValidationError("the root vertex cannot be deleted")
        tree.vertex(vertex_id)
        if tree.is_leaf(vertex_id):
            removed.add(vertex_id)
        else:
            removed |= tree.descendants(vertex_id)

    return EventTree(
        variable_order=tree.variable_order,
        vertices=tuple(v for v in tree.vertices if v.id not in removed),
        edges=tuple(e for e in tree.edges if e.child not in removed),
        deleted_ids=tree.deleted_ids | removed,
        dataset_fingerprint=tree.dataset_fingerprint,
    )


@dataclass(frozen=True)
class TreeSummary:
    n_nodes: int
    n_levels: int
    n_edges: int
    n_labels: int
    labels: tuple[str, ...]

    def format(self) -> str:
        lines = [
            "Summary of Nodes",
            "================",
            f"Number of nodes: {self.n_nodes}",
            f"Unique node levels: {self.n_levels}",
            "",
            "Summary of Edges",
            "================",
            f"Number of edges: {self.n_edges}",
            f"Unique labels in edges: {self.n_labels}",
            "",
            "Edge labels",
            "===========",
        ]
        lines.extend(self.labels)
        return "\n".join(lines) + "\n"


def summarize_tree(tree: EventTree) -> TreeSummary:
    """Counts plus the distinct edge labels in first-appearance order."""
    labels: list[str] = []
    seen: set[str] = set()
    for e in tree.edges:
        if e.label not in seen:
            seen.add(e.label)
            labels.append(e.label)
    return TreeSummary(
        n_nodes=len(tree.vertices),
        n_levels=len({v.level for v in tree.vertices}),
        n_edges=len(tree.edges),
        n_labels=len(labels),
        labels=tuple(labels),
    )
