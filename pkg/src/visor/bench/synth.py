"""Synthetic medical-imaging cohort generator.

Self-contained stand-in for a real scan archive: every slice is seeded
noise plus geometric structure (an elliptical outline whose size tracks
slice depth, plus a bright blob), encoded as grayscale PNG.  Generation is
fully determined by (seed, params): the same inputs produce byte-identical
images and an identical manifest.

Documented property distributions, all drawn from one seeded generator:
    Age        uniform integer in [age_min, age_max]   (defaults 55..95)
    ChemoDrug  uniform choice from the drugs tuple
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..visual import codecs

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class CohortParams:
    patients: int = 10
    scans_per_patient: int = 1
    slices_per_scan: int = 155
    width: int = 256
    height: int = 256
    age_min: int = 55
    age_max: int = 95
    drugs: tuple = ("Temodar", "DrugB", "DrugC", "none")

    def __post_init__(self):
        if self.patients < 0 or self.scans_per_patient < 1 or self.slices_per_scan < 1:
            raise ValidationError("cohort counts must be positive")
        if self.width < 8 or self.height < 8:
            raise ValidationError("slice dimensions must be at least 8x8")
        if self.age_min > self.age_max:
            raise ValidationError("age_min must be <= age_max")
        object.__setattr__(self, "drugs", tuple(self.drugs))


def slice_pixels(
    rng: np.random.Generator, width: int, height: int, slice_index: int, slices: int
) -> np.ndarray:
    """One synthetic slice; consumes a fixed number of rng draws."""
    img = rng.integers(0, 40, size=(height, width)).astype(np.float64)

    yy, xx = np.mgrid[0:height, 0:width]
    cx, cy = width / 2.0, height / 2.0
    depth = (slice_index + 0.5) / slices  # 0..1 through the stack
    # Outline shrinks toward both ends of the stack.
    rx = (0.18 + 0.27 * np.sin(np.pi * depth)) * width
    ry = (0.22 + 0.30 * np.sin(np.pi * depth)) * height
    ellipse = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2
    img[ellipse <= 1.0] += 90.0
    img[(ellipse > 1.0) & (ellipse <= 1.15)] += 140.0

    # A bright blob at an rng-chosen spot inside the outline.
    bx = cx + rng.uniform(-0.5, 0.5) * rx
    by = cy + rng.uniform(-0.5, 0.5) * ry
    br = rng.uniform(0.04, 0.10) * min(width, height)
    blob = (xx - bx) ** 2 + (yy - by) ** 2 <= br**2
    img[blob] += 110.0

    return np.clip(img, 0, 255).astype(np.uint8)


def generate(seed: int, params: CohortParams, out_dir) -> dict:
    """Write the image tree and manifest.json; returns the manifest."""
    out = Path(out_dir)
    images = out / "images"
    images.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    patients = []
    for p in range(params.patients):
        patient_id = f"P{p:04d}"
        age = int(rng.integers(params.age_min, params.age_max + 1))
        drug = params.drugs[int(rng.integers(0, len(params.drugs)))]
        scans = []
        for s in range(params.scans_per_patient):
            scan_id = f"{patient_id}_s{s:02d}"
            slices = []
            for i in range(params.slices_per_scan):
                slice_id = f"{scan_id}_i{i:03d}"
                pixels = slice_pixels(
                    rng, params.width, params.height, i, params.slices_per_scan
                )
                rel = f"images/{slice_id}.png"
                (out / rel).write_bytes(codecs.encode(pixels, codecs.PNG))
                slices.append({"id": slice_id, "file": rel, "index": i})
            scans.append({"ScanID": scan_id, "slices": slices})
        patients.append(
            {
                "PatientID": patient_id,
                "Age": age,
                "ChemoDrug": drug,
                "scans": scans,
            }
        )

    manifest = {
        "generator": "visor-bench",
        "version": MANIFEST_VERSION,
        "seed": seed,
        "params": asdict(params),
        "patients": patients,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def manifest_digest(manifest: dict) -> str:
    """Stable hash of a manifest (metadata only, files hashed separately)."""
    return hashlib.sha256(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    manifest = json.loads(path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValidationError(f"unsupported manifest version {manifest.get('version')}")
    manifest["_root"] = str(path.parent)
    return manifest
