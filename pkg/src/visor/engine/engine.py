"""Envelope execution.

One envelope = one ordered command array + one ordered blob array, executed
as a single graph transaction: the first failing command aborts everything,
every response slot is still filled (status 6 marks the commands that never
ran), and blob-consuming commands take request blobs strictly in command
order.

The engine is stateless between envelopes.  Envelopes containing write
verbs serialize on an engine-wide lock (the store's single-committer rule
made visible at this layer); read envelopes run concurrently.
"""

from __future__ import annotations

import json
import threading

import numpy as np

from ..errors import (
    STATUS_ABORTED,
    STATUS_INTERNAL,
    STATUS_VALIDATION,
    ValidationError,
    VisorError,
)
from ..graph.store import READ_ONLY, READ_WRITE, GraphStore
from ..graph.values import BlobRef
from ..visual import codecs
from ..visual.ops import apply_ops
from . import convert

IMAGE_CLASS = "Image"
DESCRIPTOR_CLASS = "Descriptor"
DESCRIPTOR_SET_CLASS = "DescriptorSet"
BLOB_PROP = "_blob"

WRITE_VERBS = {"AddEntity", "Connect", "AddImage", "AddDescriptorSet", "AddDescriptor"}
READ_VERBS = {"FindEntity", "FindImage", "FindDescriptor", "ClassifyDescriptor"}
ALL_VERBS = WRITE_VERBS | READ_VERBS


class _Ctx:
    def __init__(self, engine, txn, dtxn, blobs, timing):
        self.engine = engine
        self.txn = txn
        self.dtxn = dtxn
        self.blobs = blobs
        self.cursor = 0
        self.out_blobs: list[bytes] = []
        self.refs: dict[int, list[int]] = {}
        self.stored_locators: list[str] = []
        self.timing = timing

    def next_blob(self) -> bytes:
        if self.cursor >= len(self.blobs):
            raise ValidationError("command expects a blob but none are left")
        blob = self.blobs[self.cursor]
        self.cursor += 1
        return blob

    def register_ref(self, body: dict, node_ids: list[int]) -> None:
        ref = body.get("_ref")
        if ref is None:
            return
        if isinstance(ref, bool) or not isinstance(ref, int) or ref < 1:
            raise ValidationError("_ref must be a positive integer")
        if ref in self.refs:
            raise ValidationError(f"_ref {ref} already used in this envelope")
        self.refs[ref] = list(node_ids)

    def resolve_ref(self, ref) -> list[int]:
        if isinstance(ref, bool) or not isinstance(ref, int) or ref not in self.refs:
            raise ValidationError(f"reference {ref!r} names no earlier result")
        return self.refs[ref]

    def track(self, category: str):
        return _TimeBlock(self.timing, category)


class _TimeBlock:
    def __init__(self, timing, category):
        self.timing = timing
        self.category = category

    def __enter__(self):
        if self.timing is not None:
            self._token = self.timing.start(self.category)

    def __exit__(self, *exc):
        if self.timing is not None:
            self.timing.stop(self._token)
        return False


class QueryEngine:
    def __init__(self, graph: GraphStore, visual, descriptors):
        self.graph = graph
        self.visual = visual
        self.descriptors = descriptors
        self._write_lock = threading.Lock()

    # --- entry point ---------------------------------------------------------

    def execute(self, request, blobs=(), timing=None):
        """Run one envelope; returns (responses, returned blobs).

        `request` is a JSON string or an already-parsed command array.
        Responses align 1:1 with commands; a request that cannot be parsed
        at all yields a single synthetic error response.
        """
        blobs = list(blobs)
        if isinstance(request, (str, bytes)):
            try:
                commands = json.loads(request)
            except ValueError as exc:
                return [_error(STATUS_VALIDATION, f"parse error: {exc}")], []
        else:
            commands = request
        if not isinstance(commands, list):
            return [_error(STATUS_VALIDATION, "request must be a command array")], []

        mismatch = self._blob_mismatch(commands, blobs)
        if mismatch is not None:
            responses = [_error(STATUS_VALIDATION, mismatch)]
            responses += [_aborted()] * (len(commands) - 1)
            return responses, []

        write = any(
            isinstance(cmd, dict) and WRITE_VERBS.intersection(cmd) for cmd in commands
        )
        if write:
            with self._write_lock:
                return self._run(commands, blobs, timing, READ_WRITE)
        return self._run(commands, blobs, timing, READ_ONLY)

    def _blob_mismatch(self, commands, blobs) -> str | None:
        expected = 0
        for cmd in commands:
            if not isinstance(cmd, dict) or len(cmd) != 1:
                return None  # malformed command will abort the envelope anyway
            verb, body = next(iter(cmd.items()))
            if not isinstance(body, dict):
                return None
            if verb in ("AddImage", "AddDescriptor"):
                expected += 1
            elif verb in ("FindDescriptor", "ClassifyDescriptor"):
                expected += 0 if "vector" in body else 1
        if expected != len(blobs):
            return (
                f"commands consume {expected} blob(s) but the envelope "
                f"carries {len(blobs)}"
            )
        return None

    def _run(self, commands, blobs, timing, mode):
        txn = self.graph.begin(mode)
        ctx = _Ctx(self, txn, self.descriptors.begin(), blobs, timing)
        try:
            responses = []
            failed = False
            for cmd in commands:
                if failed:
                    responses.append(_aborted())
                    continue
                frag = self._run_command(cmd, ctx)
                failed = failed or frag.get("status", 0) != 0
                responses.append(frag)

            if failed:
                self.graph.abort(txn)
                for locator in ctx.stored_locators:
                    self.visual.blobs.delete(locator)
                return responses, []

            try:
                with ctx.track("metadata"):
                    self.graph.commit(txn)
                self.descriptors.commit(ctx.dtxn)
            except VisorError as exc:
                for locator in ctx.stored_locators:
                    self.visual.blobs.delete(locator)
                responses = [_error(exc.status, f"commit failed: {exc}")] + [
                    _aborted() for _ in commands[1:]
                ]
                return responses, []
            return responses, ctx.out_blobs
        finally:
            if txn.state == "open":  # safety net: never leak a handle
                self.graph.abort(txn)

    def _run_command(self, cmd, ctx) -> dict:
        if not isinstance(cmd, dict) or len(cmd) != 1:
            return _error(
                STATUS_VALIDATION, "each command is {verb: body} with one verb"
            )
        verb, body = next(iter(cmd.items()))
        if verb not in ALL_VERBS:
            return _error(STATUS_VALIDATION, f"unknown verb {verb!r}")
        if not isinstance(body, dict):
            return _error(STATUS_VALIDATION, f"{verb} body must be an object")
        handler = getattr(self, "_exec_" + _snake(verb))
        try:
            return handler(body, ctx)
        except VisorError as exc:
            return _error(exc.status, str(exc))
        except Exception as exc:  # noqa: BLE001 - report, never crash the envelope
            return _error(STATUS_INTERNAL, f"{type(exc).__name__}: {exc}")

    # --- graph verbs ----------------------------------------------------------

    def _exec_add_entity(self, body, ctx):
        cls = _req_str(body, "class")
        props = convert.parse_properties(body.get("properties"))
        with ctx.track("metadata"):
            node_id = self.graph.add_node(ctx.txn, cls, props)
        ctx.register_ref(body, [node_id])
        return {"status": 0, "_id": node_id}

    def _exec_connect(self, body, ctx):
        cls = _req_str(body, "class")
        props = convert.parse_properties(body.get("properties"))
        src = self._endpoint(body, "src", ctx)
        dst = self._endpoint(body, "dst", ctx)
        with ctx.track("metadata"):
            edge_id = self.graph.add_edge(ctx.txn, cls, src, dst, props)
        return {"status": 0, "_id": edge_id}

    def _endpoint(self, body, key, ctx) -> int:
        spec = body.get(key)
        if not isinstance(spec, dict):
            raise ValidationError(f"Connect.{key} must be an object")
        if "ref" in spec:
            ids = ctx.resolve_ref(spec["ref"])
        elif "class" in spec:
            cons = convert.parse_constraints(spec.get("constraints"))
            with ctx.track("metadata"):
                nodes = self.graph.find_nodes(ctx.txn, spec["class"], cons)
            ids = [n.node_id for n in nodes]
        else:
            raise ValidationError(f"Connect.{key} needs a ref or a class")
        if len(ids) != 1:
            raise ValidationError(
                f"Connect.{key} must resolve to exactly one node, got {len(ids)}"
            )
        return ids[0]

    def _exec_find_entity(self, body, ctx):
        cls = _req_str(body, "class")
        return self._find(body, ctx, cls)

    def _find(self, body, ctx, cls):
        cons = convert.parse_constraints(body.get("constraints"))
        spec = convert.parse_results(body.get("results"))
        link = body.get("link")
        with ctx.track("metadata"):
            if link is not None:
                start, edge_class, direction = self._parse_link(link, ctx)
                result = self.graph.neighbors(
                    ctx.txn, start, edge_class, direction, cls, cons, spec
                )
            else:
                result = self.graph.find_nodes(ctx.txn, cls, cons, spec)
        if isinstance(result, int):
            return {"status": 0, "count": result}
        ctx.register_ref(body, [n.node_id for n in result])
        entities = [
            {"_id": n.node_id, **{k: convert.prop_to_json(v) for k, v in n.properties.items()}}
            for n in result
        ]
        return {"status": 0, "returned": len(entities), "entities": entities}

    def _parse_link(self, link, ctx):
        if not isinstance(link, dict) or "ref" not in link:
            raise ValidationError("link must be an object with a ref")
        direction = link.get("direction", "any")
        if direction not in ("in", "out", "any"):
            raise ValidationError(f"bad link direction {direction!r}")
        edge_class = link.get("class")
        if edge_class is not None and not isinstance(edge_class, str):
            raise ValidationError("link.class must be a string")
        return ctx.resolve_ref(link["ref"]), edge_class, direction

    # --- image verbs ----------------------------------------------------------

    def _exec_add_image(self, body, ctx):
        fmt = body.get("format", "tiled")
        tile_size = body.get("tile_size", 128)
        if isinstance(tile_size, bool) or not isinstance(tile_size, int):
            raise ValidationError("tile_size must be an integer")
        ops = convert.parse_operations(body.get("operations"))
        props = convert.parse_properties(body.get("properties"))
        blob = ctx.next_blob()

        with ctx.track("retrieval"):
            pixels = codecs.decode(blob)
        if ops:
            with ctx.track("preprocess"):
                pixels = apply_ops(pixels, ops)
        with ctx.track("retrieval"):
            record = self.visual.store_image(pixels, fmt, tile_size)
        ctx.stored_locators.append(record.blob_locator)

        node_props = {
            "width": record.width,
            "height": record.height,
            "channels": record.channels,
            "format": record.format,
            BLOB_PROP: BlobRef(record.blob_locator),
        }
        overlap = set(props) & set(node_props)
        if overlap:
            raise ValidationError(f"properties {sorted(overlap)} are set by AddImage")
        node_props.update(props)
        with ctx.track("metadata"):
            node_id = self.graph.add_node(ctx.txn, IMAGE_CLASS, node_props)
        ctx.register_ref(body, [node_id])
        self._apply_link(body, ctx, node_id)
        return {"status": 0, "_id": node_id}

    def _apply_link(self, body, ctx, node_id) -> None:
        link = body.get("link")
        if link is None:
            return
        if not isinstance(link, dict) or "ref" not in link:
            raise ValidationError("link must be an object with a ref")
        edge_class = link.get("class")
        if not isinstance(edge_class, str) or not edge_class:
            raise ValidationError("link.class is required when linking a new node")
        direction = link.get("direction", "out")
        ids = ctx.resolve_ref(link["ref"])
        if len(ids) != 1:
            raise ValidationError(
                f"link.ref must resolve to exactly one node, got {len(ids)}"
            )
        src, dst = (ids[0], node_id) if direction == "out" else (node_id, ids[0])
        props = convert.parse_properties(link.get("properties"))
        with ctx.track("metadata"):
            self.graph.add_edge(ctx.txn, edge_class, src, dst, props)

    def _exec_find_image(self, body, ctx):
        frag = self._find(body, ctx, IMAGE_CLASS)
        if "entities" not in frag:
            return frag  # count-only
        ops = convert.parse_operations(body.get("operations"))
        out_format = body.get("format", "png")
        # Entities were projected by the result spec; re-read full nodes to
        # reach the blob locator.
        blob_count = 0
        for entity in frag["entities"]:
            node = self.graph.get_node(ctx.txn, entity["_id"])
            locator = node.properties.get(BLOB_PROP)
            if not isinstance(locator, BlobRef):
                raise ValidationError(
                    f"node {node.node_id} is not an image (no blob attached)"
                )
            data = self.visual.retrieve_image(
                locator.locator, ops, out_format, timing=ctx.timing
            )
            ctx.out_blobs.append(data)
            blob_count += 1
        frag["blobs_returned"] = blob_count
        return frag

    # --- descriptor verbs -------------------------------------------------------

    def _exec_add_descriptor_set(self, body, ctx):
        name = _req_str(body, "set" if "set" in body else "name")
        dims = body.get("dimensions")
        if isinstance(dims, bool) or not isinstance(dims, int):
            raise ValidationError("dimensions must be an integer")
        ctx.dtxn.create_set(name, dims)
        with ctx.track("metadata"):
            node_id = self.graph.add_node(
                ctx.txn, DESCRIPTOR_SET_CLASS, {"name": name, "dimensions": dims}
            )
        ctx.register_ref(body, [node_id])
        return {"status": 0, "_id": node_id}

    def _exec_add_descriptor(self, body, ctx):
        name = _req_str(body, "set")
        label = body.get("label")
        if label is not None and not isinstance(label, str):
            raise ValidationError("label must be a string")
        props = convert.parse_properties(body.get("properties"))
        vector = self._vector_arg(body, ctx, name)

        node_props = {"set": name}
        if label is not None:
            node_props["label"] = label
        overlap = set(props) & set(node_props)
        if overlap:
            raise ValidationError(f"properties {sorted(overlap)} are set by AddDescriptor")
        node_props.update(props)
        with ctx.track("metadata"):
            node_id = self.graph.add_node(ctx.txn, DESCRIPTOR_CLASS, node_props)
        descriptor_id = ctx.dtxn.add(name, vector, label, node_id)
        ctx.register_ref(body, [node_id])
        self._apply_link(body, ctx, node_id)
        return {"status": 0, "_id": node_id, "descriptor_id": descriptor_id}

    def _exec_find_descriptor(self, body, ctx):
        name = _req_str(body, "set")
        k = _req_int(body, "k_neighbors")
        vector = self._vector_arg(body, ctx, name)
        with ctx.track("metadata"):
            hits = ctx.dtxn.knn(name, vector, k)
        entities = [
            {
                "_id": h.descriptor_id,
                "_distance": h.distance,
                "_label": h.label,
                "_entity": h.metadata_node,
            }
            for h in hits
        ]
        ctx.register_ref(
            body, [h.metadata_node for h in hits if h.metadata_node is not None]
        )
        return {"status": 0, "returned": len(entities), "entities": entities}

    def _exec_classify_descriptor(self, body, ctx):
        name = _req_str(body, "set")
        k = _req_int(body, "k_neighbors")
        vector = self._vector_arg(body, ctx, name)
        with ctx.track("metadata"):
            label = ctx.dtxn.classify(name, vector, k)
        return {"status": 0, "label": label}

    def _vector_arg(self, body, ctx, set_name) -> np.ndarray:
        inline = body.get("vector")
        if inline is not None:
            if not isinstance(inline, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in inline
            ):
                raise ValidationError("vector must be an array of numbers")
            return np.asarray(inline, np.float64)
        blob = ctx.next_blob()
        if len(blob) % 4:
            raise ValidationError(
                f"vector blob length {len(blob)} is not a multiple of 4"
            )
        vector = np.frombuffer(blob, "<f4")
        # Give dimension mismatches a blob-specific message up front.
        ds_dim = self._set_dimension(ctx, set_name)
        if ds_dim is not None and len(vector) != ds_dim:
            raise ValidationError(
                f"vector blob holds {len(vector)} floats, set {set_name!r} "
                f"expects {ds_dim}"
            )
        return vector

    def _set_dimension(self, ctx, name):
        if name in ctx.dtxn.new_sets:
            return ctx.dtxn.new_sets[name]
        ds = self.descriptors._committed_get(name)
        return ds.dimension if ds is not None else None


def _snake(verb: str) -> str:
    out = []
    for ch in verb:
        if ch.isupper() and out:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _error(status: int, info: str) -> dict:
    return {"status": status, "info": info}


def _aborted() -> dict:
    return {"status": STATUS_ABORTED, "info": "aborted due to earlier error"}


def _req_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{key!r} must be a non-empty string")
    return value


def _req_int(body: dict, key: str) -> int:
    value = body.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{key!r} must be an integer")
    return value
