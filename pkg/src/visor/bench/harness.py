"""The three-query benchmark with unified and ad-hoc modes.

Q1 fetches one slice by unique id with a threshold + resize pipeline,
Q2 fetches every slice of one patient's scan, resized,
Q3 fetches all scans of patients over 75 treated with Temodar, resized.

In unified mode the transforms run server-side inside the query; in ad-hoc
mode the same envelopes request untouched full-size images and the client
applies identical transforms locally.  Both paths share one resize kernel,
so final pixels are identical and the comparison isolates where the work
(and the bytes) went.

Per-row accounting: metadata time comes from the server's breakdown,
preprocessing is server-side (unified) or measured client-side (ad-hoc),
and retrieval absorbs the rest of the wall clock: disk, encode, network.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..visual import codecs
from ..visual.ops import Resize, Threshold, apply_ops
from ..wire.client import WireClient
from .ingest import parse_address

UNIFIED = "unified"
ADHOC = "adhoc"
MODES = (UNIFIED, ADHOC)


@dataclass(frozen=True)
class QueryDef:
    name: str
    commands: list  # FindImage commands carry an empty "operations" placeholder
    client_ops: tuple  # transforms applied client-side in ad-hoc mode

    def with_ops(self, server_side: bool) -> list:
        ops = [_op_json(op) for op in self.client_ops] if server_side else []
        out = []
        for cmd in self.commands:
            cmd = {k: dict(v) for k, v in cmd.items()}
            for body in cmd.values():
                if "operations" in body:
                    body["operations"] = ops
            out.append(cmd)
        return out


@dataclass
class QueryOutcome:
    images: list = field(default_factory=list)  # final pixel arrays
    total_us: int = 0
    metadata_us: int = 0
    retrieval_us: int = 0
    preprocess_us: int = 0
    bytes_transferred: int = 0


@dataclass
class BenchRow:
    query: str
    mode: str
    repetitions: int
    metadata_us: int
    retrieval_us: int
    preprocess_us: int
    total_us: int
    bytes_transferred: int
    images: int

    COLUMNS = (
        "query",
        "mode",
        "repetitions",
        "metadata_us",
        "retrieval_us",
        "preprocess_us",
        "total_us",
        "bytes_transferred",
        "images",
    )


@dataclass
class BenchReport:
    rows: list[BenchRow]
    meta: dict


def _op_json(op):
    if isinstance(op, Threshold):
        return {"type": "threshold", "value": op.value}
    if isinstance(op, Resize):
        return {"type": "resize", "width": op.width, "height": op.height}
    raise TypeError(f"unsupported benchmark op {op!r}")


def build_queries(
    manifest: dict, resize=(128, 128), threshold: int = 150
) -> list[QueryDef]:
    patient = manifest["patients"][0]
    scan = patient["scans"][0]
    middle = scan["slices"][len(scan["slices"]) // 2]
    resize_op = Resize(*resize)

    q1 = QueryDef(
        "Q1",
        [
            {
                "FindImage": {
                    "constraints": {"id": ["==", middle["id"]]},
                    "operations": [],
                }
            }
        ],
        (Threshold(threshold), resize_op),
    )
    q2 = QueryDef(
        "Q2",
        [
            {
                "FindEntity": {
                    "class": "Patient",
                    "constraints": {"PatientID": ["==", patient["PatientID"]]},
                    "_ref": 1,
                }
            },
            {
                "FindEntity": {
                    "class": "Scan",
                    "link": {"ref": 1, "class": "hasScan"},
                    "_ref": 2,
                }
            },
            {
                "FindImage": {
                    "link": {"ref": 2, "class": "hasSlice"},
                    "operations": [],
                }
            },
        ],
        (resize_op,),
    )
    q3 = QueryDef(
        "Q3",
        [
            {
                "FindEntity": {
                    "class": "Patient",
                    "constraints": {"Age": [">", 75], "ChemoDrug": ["==", "Temodar"]},
                    "_ref": 1,
                }
            },
            {
                "FindEntity": {
                    "class": "Scan",
                    "link": {"ref": 1, "class": "hasScan"},
                    "_ref": 2,
                }
            },
            {
                "FindImage": {
                    "link": {"ref": 2, "class": "hasSlice"},
                    "operations": [],
                }
            },
        ],
        (resize_op,),
    )
    return [q1, q2, q3]


def run_single(client: WireClient, qdef: QueryDef, mode: str) -> QueryOutcome:
    """One execution of one query in one mode, fully accounted."""
    commands = qdef.with_ops(server_side=(mode == UNIFIED))
    bytes_before = client.bytes_in + client.bytes_out

    started = time.monotonic()
    responses, blobs, timing = client.query_timed(commands)
    client_preprocess = 0.0
    images = []
    for blob in blobs:
        pixels = codecs.decode(blob)
        if mode == ADHOC:
            t0 = time.monotonic()
            pixels = apply_ops(pixels, qdef.client_ops)
            client_preprocess += time.monotonic() - t0
        images.append(pixels)
    total = time.monotonic() - started

    for r in responses:
        if r.get("status") != 0:
            raise RuntimeError(f"{qdef.name} failed: {r}")
    timing = timing or {}
    metadata_us = int(timing.get("metadata_us", 0))
    if mode == UNIFIED:
        preprocess_us = int(timing.get("preprocess_us", 0))
    else:
        preprocess_us = int(client_preprocess * 1e6)
    total_us = int(total * 1e6)
    retrieval_us = max(0, total_us - metadata_us - preprocess_us)
    return QueryOutcome(
        images=images,
        total_us=total_us,
        metadata_us=metadata_us,
        retrieval_us=retrieval_us,
        preprocess_us=preprocess_us,
        bytes_transferred=client.bytes_in + client.bytes_out - bytes_before,
    )


def run_queries(
    address: str,
    mode: str,
    repetitions: int,
    manifest: dict,
    resize=(128, 128),
    threshold: int = 150,
    clients: int = 1,
) -> BenchReport:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    meta = {
        "address": address,
        "mode": mode,
        "repetitions": repetitions,
        "resize": list(resize),
        "threshold": threshold,
        "clients": clients,
    }
    if repetitions <= 0:
        return BenchReport(rows=[], meta=meta)

    queries = build_queries(manifest, resize, threshold)
    host, port = parse_address(address)

    def client_run(_):
        results = {q.name: [] for q in queries}
        with WireClient(host, port) as client:
            for _ in range(repetitions):
                for qdef in queries:
                    results[qdef.name].append(run_single(client, qdef, mode))
        return results

    if clients == 1:
        all_results = [client_run(0)]
    else:
        with ThreadPoolExecutor(max_workers=clients) as pool:
            all_results = list(pool.map(client_run, range(clients)))

    rows = []
    for qdef in queries:
        outcomes = [o for result in all_results for o in result[qdef.name]]
        n = len(outcomes)
        rows.append(
            BenchRow(
                query=qdef.name,
                mode=mode,
                repetitions=n,
                metadata_us=int(np.mean([o.metadata_us for o in outcomes])),
                retrieval_us=int(np.mean([o.retrieval_us for o in outcomes])),
                preprocess_us=int(np.mean([o.preprocess_us for o in outcomes])),
                total_us=int(np.mean([o.total_us for o in outcomes])),
                bytes_transferred=int(np.mean([o.bytes_transferred for o in outcomes])),
                images=len(outcomes[-1].images),
            )
        )
    return BenchReport(rows=rows, meta=meta)
