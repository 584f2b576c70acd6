"""JSON <-> domain conversions shared by the command handlers.

The JSON property encoding is native where possible; the two non-JSON
value types are wrapped objects:

    datetime   {"_date": "<ISO-8601, UTC>"}
    blob ref   {"_blob": "<locator>"}

Constraints are `{"Prop": [op, comparand]}` with op one of
== != > >= < <=.  Transform operations are tagged objects, e.g.
`{"type": "resize", "width": 128, "height": 128}`.
"""

from __future__ import annotations

from datetime import datetime

from ..errors import ValidationError
from ..graph.model import Constraint, ResultSpec
from ..graph.values import BlobRef, to_utc
from ..visual.ops import Crop, Resize, Threshold


def json_to_prop(value):
    if isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, dict):
        if set(value) == {"_date"} and isinstance(value["_date"], str):
            raw = value["_date"].replace("Z", "+00:00")
            try:
                return to_utc(datetime.fromisoformat(raw))
            except ValueError as exc:
                raise ValidationError(f"bad _date value: {exc}") from None
        if set(value) == {"_blob"} and isinstance(value["_blob"], str):
            return BlobRef(value["_blob"])
    raise ValidationError(f"unsupported property value: {value!r}")


def prop_to_json(value):
    if isinstance(value, datetime):
        return {"_date": to_utc(value).isoformat()}
    if isinstance(value, BlobRef):
        return {"_blob": value.locator}
    return value


def parse_properties(raw, *, allow_reserved: bool = False) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValidationError("properties must be an object")
    props = {}
    for name, value in raw.items():
        if not isinstance(name, str) or not name:
            raise ValidationError("property names must be non-empty strings")
        if name.startswith("_") and not allow_reserved:
            raise ValidationError(f"property name {name!r} is reserved")
        props[name] = json_to_prop(value)
    return props


def parse_constraints(raw) -> list[Constraint]:
    if raw is None:
        return []
    if not isinstance(raw, dict):
        raise ValidationError("constraints must be an object")
    out = []
    for prop, clause in raw.items():
        if (
            not isinstance(clause, list)
            or len(clause) != 2
            or not isinstance(clause[0], str)
        ):
            raise ValidationError(
                f"constraint on {prop!r} must be [operator, comparand]"
            )
        out.append(Constraint(prop, clause[0], json_to_prop(clause[1])))
    return out


def parse_results(raw) -> ResultSpec | None:
    if raw is None:
        return ResultSpec(properties=())
    if not isinstance(raw, dict):
        raise ValidationError("results must be an object")
    if raw.get("count"):
        return ResultSpec(count_only=True)
    props = raw.get("list")
    if props is not None and (
        not isinstance(props, list) or not all(isinstance(p, str) for p in props)
    ):
        raise ValidationError("results.list must be a list of property names")
    sort = raw.get("sort")
    if sort is not None and not isinstance(sort, str):
        raise ValidationError("results.sort must be a property name")
    limit = raw.get("limit")
    if limit is not None and (isinstance(limit, bool) or not isinstance(limit, int)):
        raise ValidationError("results.limit must be an integer")
    return ResultSpec(
        properties=tuple(props) if props is not None else (),
        sort=sort,
        limit=limit,
    )


def parse_operations(raw) -> list:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ValidationError("operations must be an array")
    ops = []
    for entry in raw:
        if not isinstance(entry, dict) or not isinstance(entry.get("type"), str):
            raise ValidationError(f"bad operation entry: {entry!r}")
        kind = entry["type"]
        if kind == "threshold":
            ops.append(Threshold(_int_field(entry, "value")))
        elif kind == "resize":
            ops.append(Resize(_int_field(entry, "width"), _int_field(entry, "height")))
        elif kind == "crop":
            ops.append(
                Crop(
                    _int_field(entry, "x"),
                    _int_field(entry, "y"),
                    _int_field(entry, "width"),
                    _int_field(entry, "height"),
                )
            )
        else:
            raise ValidationError(f"unknown operation type {kind!r}")
    return ops


def _int_field(obj: dict, key: str) -> int:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"operation field {key!r} must be an integer")
    return value
