"""Property values: typing rules, ordering, and binary encoding.

A property holds one of: bool, 64-bit signed int, 64-bit float, UTF-8
string, UTC datetime (microsecond precision), or a blob locator.  The value
type of a (class, property-name) pair is fixed by its first write; the
schema registry enforcing that lives in the store, the per-value helpers
live here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from ..errors import TypeConflictError, ValidationError

TAG_BOOL = 0
TAG_INT = 1
TAG_FLOAT = 2
TAG_STR = 3
TAG_DATETIME = 4
TAG_BLOB = 5

TAG_NAMES = {
    TAG_BOOL: "bool",
    TAG_INT: "int",
    TAG_FLOAT: "float",
    TAG_STR: "string",
    TAG_DATETIME: "datetime",
    TAG_BLOB: "blob-ref",
}

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_MICRO = timedelta(microseconds=1)

OPERATORS = ("==", "!=", ">", ">=", "<", "<=")
_ORDERING_OPS = {">", ">=", "<", "<="}
# Ordering is defined for numbers, datetimes, and (lexicographically) strings.
_ORDERABLE_TAGS = {TAG_INT, TAG_FLOAT, TAG_STR, TAG_DATETIME}


@dataclass(frozen=True)
class BlobRef:
    """Opaque locator naming a blob in the visual store."""

    locator: str


def to_utc(dt: datetime) -> datetime:
    """Coerce to an aware UTC datetime; naive input is taken as UTC."""
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def datetime_to_micros(dt: datetime) -> int:
    # Integer arithmetic: round-trips bit-exactly, unlike timestamp().
    return (to_utc(dt) - _EPOCH) // _MICRO


def micros_to_datetime(us: int) -> datetime:
    return _EPOCH + us * _MICRO


def type_tag(value) -> int:
    # bool before int: bool is a subclass of int.
    if isinstance(value, bool):
        return TAG_BOOL
    if isinstance(value, int):
        return TAG_INT
    if isinstance(value, float):
        return TAG_FLOAT
    if isinstance(value, str):
        return TAG_STR
    if isinstance(value, datetime):
        return TAG_DATETIME
    if isinstance(value, BlobRef):
        return TAG_BLOB
    raise ValidationError(f"unsupported property value type: {type(value).__name__}")


def normalize(value):
    """Validate a value and return its canonical in-memory form."""
    tag = type_tag(value)
    if tag == TAG_INT and not INT64_MIN <= value <= INT64_MAX:
        raise ValidationError(f"integer out of 64-bit range: {value}")
    if tag == TAG_DATETIME:
        return to_utc(value)
    return value


def sort_key(value):
    """Total-order key within one value type (index and sort support)."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, datetime):
        return datetime_to_micros(value)
    if isinstance(value, BlobRef):
        return value.locator
    return value


def check_operator(op: str, comparand) -> None:
    if op not in OPERATORS:
        raise ValidationError(f"unknown constraint operator: {op!r}")
    tag = type_tag(comparand)
    if op in _ORDERING_OPS and tag not in _ORDERABLE_TAGS:
        raise TypeConflictError(
            f"operator {op!r} not defined for {TAG_NAMES[tag]} comparands"
        )


def tags_comparable(stored_tag: int, comparand_tag: int) -> bool:
    if stored_tag == comparand_tag:
        return True
    return {stored_tag, comparand_tag} == {TAG_INT, TAG_FLOAT}


def compare(op: str, stored, comparand) -> bool:
    """Evaluate `stored op comparand`; both already normalized."""
    a, b = sort_key(stored), sort_key(comparand)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "<":
        return a < b
    return a <= b


# --- binary encoding (write-ahead log, snapshots) ---------------------------
#
# value := tag u8, payload
#   bool      u8
#   int       i64
#   float     f64
#   string    u32 byte length, utf-8 bytes
#   datetime  i64 microseconds since Unix epoch, UTC
#   blob-ref  u32 byte length, utf-8 locator
# All integers little-endian.

_U8 = struct.Struct("<B")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")
_U32 = struct.Struct("<I")


def encode_str(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    out += _U32.pack(len(raw))
    out += raw


def decode_str(buf: bytes, off: int) -> tuple[str, int]:
    (n,) = _U32.unpack_from(buf, off)
    off += 4
    return buf[off : off + n].decode("utf-8"), off + n


def encode_value(out: bytearray, value) -> None:
    tag = type_tag(value)
    out += _U8.pack(tag)
    if tag == TAG_BOOL:
        out += _U8.pack(1 if value else 0)
    elif tag == TAG_INT:
        out += _I64.pack(value)
    elif tag == TAG_FLOAT:
        out += _F64.pack(value)
    elif tag == TAG_STR:
        encode_str(out, value)
    elif tag == TAG_DATETIME:
        out += _I64.pack(datetime_to_micros(value))
    else:
        encode_str(out, value.locator)


def decode_value(buf: bytes, off: int):
    (tag,) = _U8.unpack_from(buf, off)
    off += 1
    if tag == TAG_BOOL:
        (v,) = _U8.unpack_from(buf, off)
        return bool(v), off + 1
    if tag == TAG_INT:
        (v,) = _I64.unpack_from(buf, off)
        return v, off + 8
    if tag == TAG_FLOAT:
        (v,) = _F64.unpack_from(buf, off)
        return v, off + 8
    if tag == TAG_STR:
        return decode_str(buf, off)
    if tag == TAG_DATETIME:
        (us,) = _I64.unpack_from(buf, off)
        return micros_to_datetime(us), off + 8
    if tag == TAG_BLOB:
        loc, off = decode_str(buf, off)
        return BlobRef(loc), off
    raise ValidationError(f"corrupt value tag {tag}")


def encode_props(out: bytearray, props: dict) -> None:
    out += _U32.pack(len(props))
    for name in sorted(props):
        encode_str(out, name)
        encode_value(out, props[name])


def decode_props(buf: bytes, off: int) -> tuple[dict, int]:
    (n,) = _U32.unpack_from(buf, off)
    off += 4
    props = {}
    for _ in range(n):
        name, off = decode_str(buf, off)
        value, off = decode_value(buf, off)
        props[name] = value
    return props, off
