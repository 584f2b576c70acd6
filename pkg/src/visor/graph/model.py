"""Graph domain objects.

Nodes, edges, and state snapshots are treated as immutable: mutation always
produces replacement objects, which is what makes snapshot-isolated readers
cheap (they just hold a state pointer).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ValidationError
from . import values


@dataclass(frozen=True)
class Node:
    node_id: int
    node_class: str
    properties: dict

    def project(self, names) -> dict:
        return {n: self.properties[n] for n in names if n in self.properties}


@dataclass(frozen=True)
class Edge:
    edge_id: int
    edge_class: str
    src: int
    dst: int
    properties: dict


@dataclass(frozen=True)
class Constraint:
    prop: str
    op: str
    value: object

    def __post_init__(self):
        values.check_operator(self.op, self.value)
        object.__setattr__(self, "value", values.normalize(self.value))

    def matches(self, props: dict) -> bool:
        # A constraint only matches nodes that carry the property.
        if self.prop not in props:
            return False
        return values.compare(self.op, props[self.prop], self.value)


def as_constraints(raw) -> tuple[Constraint, ...]:
    """Accept Constraint objects or (prop, op, value) triples."""
    out = []
    for c in raw:
        if isinstance(c, Constraint):
            out.append(c)
        else:
            prop, op, value = c
            out.append(Constraint(prop, op, value))
    return tuple(out)


@dataclass(frozen=True)
class ResultSpec:
    """How find/neighbor results are shaped.

    properties: project to these names (None keeps all properties)
    count_only: return the match count instead of nodes
    sort: ascending sort by this property; ties and missing values fall
          back to node id
    limit: cap the number of returned nodes (applied after sorting)
    """

    properties: tuple[str, ...] | None = None
    count_only: bool = False
    sort: str | None = None
    limit: int | None = None

    def __post_init__(self):
        if self.limit is not None and self.limit < 0:
            raise ValidationError("limit must be >= 0")
        if self.properties is not None:
            object.__setattr__(self, "properties", tuple(self.properties))


def shape_results(nodes: list[Node], spec: ResultSpec | None):
    """Order, count, trim, and project a raw match list."""
    nodes.sort(key=lambda n: n.node_id)
    if spec is None:
        return nodes
    if spec.count_only:
        return len(nodes)
    if spec.sort is not None:
        prop = spec.sort
        present = [n for n in nodes if prop in n.properties]
        absent = [n for n in nodes if prop not in n.properties]
        try:
            present.sort(key=lambda n: (values.sort_key(n.properties[prop]), n.node_id))
        except TypeError:  # mixed classes can hold differently typed values
            raise ValidationError(f"sort property {prop!r} has mixed value types")
        nodes = present + absent
    if spec.limit is not None:
        nodes = nodes[: spec.limit]
    if spec.properties is not None:
        nodes = [
            Node(n.node_id, n.node_class, n.project(spec.properties)) for n in nodes
        ]
    return nodes
