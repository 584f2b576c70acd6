"""Load a generated cohort into a running server.

One envelope per patient, so an interrupted ingest leaves no partial
patients behind.  PatientID uniqueness is enforced here with a lookup
before insert (backed by the server's pre-created index when configured);
re-ingesting a manifest reports each existing patient as a duplicate.
"""

from __future__ import annotations

from pathlib import Path

from ..wire.client import WireClient
from .synth import load_manifest

RECOMMENDED_INDEXES = ("Patient.PatientID", "Image.id")


def parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    return host or "127.0.0.1", int(port)


def patient_envelope(patient: dict, root: Path, fmt: str = "tiled"):
    """Build (commands, blobs) inserting one patient subtree."""
    commands = [
        {
            "AddEntity": {
                "class": "Patient",
                "properties": {
                    "PatientID": patient["PatientID"],
                    "Age": patient["Age"],
                    "ChemoDrug": patient["ChemoDrug"],
                },
                "_ref": 1,
            }
        }
    ]
    blobs = []
    ref = 2
    for scan in patient["scans"]:
        scan_ref = ref
        ref += 1
        commands.append(
            {
                "AddEntity": {
                    "class": "Scan",
                    "properties": {"ScanID": scan["ScanID"]},
                    "_ref": scan_ref,
                }
            }
        )
        commands.append(
            {
                "Connect": {
                    "class": "hasScan",
                    "src": {"ref": 1},
                    "dst": {"ref": scan_ref},
                }
            }
        )
        for entry in scan["slices"]:
            commands.append(
                {
                    "AddImage": {
                        "format": fmt,
                        "properties": {"id": entry["id"], "index": entry["index"]},
                        "link": {"ref": scan_ref, "class": "hasSlice"},
                    }
                }
            )
            blobs.append((root / entry["file"]).read_bytes())
    return commands, blobs


def ingest(manifest, address: str, fmt: str = "tiled") -> dict:
    """Returns counts: patients/scans/images inserted, duplicates skipped."""
    if not isinstance(manifest, dict):
        manifest = load_manifest(manifest)
    root = Path(manifest["_root"])
    host, port = parse_address(address)
    counts = {"patients": 0, "scans": 0, "images": 0, "duplicates": 0, "errors": []}

    with WireClient(host, port) as client:
        for patient in manifest["patients"]:
            responses, _, _ = client.query(
                [
                    {
                        "FindEntity": {
                            "class": "Patient",
                            "constraints": {
                                "PatientID": ["==", patient["PatientID"]]
                            },
                            "results": {"count": True},
                        }
                    }
                ]
            )
            if responses[0].get("status") != 0:
                counts["errors"].append(responses[0])
                continue
            if responses[0]["count"] > 0:
                counts["duplicates"] += 1
                counts["errors"].append(
                    {
                        "status": 1,
                        "info": f"duplicate PatientID {patient['PatientID']!r}",
                    }
                )
                continue

            commands, blobs = patient_envelope(patient, root, fmt)
            responses, _, _ = client.query(commands, blobs)
            bad = [r for r in responses if r.get("status") != 0]
            if bad:
                counts["errors"].append(bad[0])
                continue
            counts["patients"] += 1
            counts["scans"] += len(patient["scans"])
            counts["images"] += sum(len(s["slices"]) for s in patient["scans"])
    return counts
