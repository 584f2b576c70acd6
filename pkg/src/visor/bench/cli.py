"""visor command line: generate / ingest / bench / report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import VisorError
from . import report as report_mod
from .harness import MODES, run_queries
from .ingest import ingest
from .synth import CohortParams, generate, load_manifest, manifest_digest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="visor", description="Dataset and benchmark tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic cohort")
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--patients", type=int, default=10)
    gen.add_argument("--scans", type=int, default=1)
    gen.add_argument("--slices", type=int, default=155)
    gen.add_argument("--width", type=int, default=256)
    gen.add_argument("--height", type=int, default=256)
    gen.add_argument("--age-min", type=int, default=55)
    gen.add_argument("--age-max", type=int, default=95)
    gen.add_argument("--out", required=True, help="output directory")

    ing = sub.add_parser("ingest", help="load a cohort into a server")
    ing.add_argument("--manifest", required=True, help="manifest.json or its directory")
    ing.add_argument("--address", default="127.0.0.1:55555")
    ing.add_argument("--format", default="tiled", choices=["tiled", "png"])

    ben = sub.add_parser("bench", help="run the three benchmark queries")
    ben.add_argument("--manifest", required=True)
    ben.add_argument("--address", default="127.0.0.1:55555")
    ben.add_argument("--mode", default="both", choices=[*MODES, "both"])
    ben.add_argument("--repetitions", type=int, default=3)
    ben.add_argument("--resize", type=int, default=128, help="square resize target")
    ben.add_argument("--threshold", type=int, default=150)
    ben.add_argument("--clients", type=int, default=1)
    ben.add_argument("--format", default="text", choices=["text", "csv", "json"])
    ben.add_argument("--out", help="write the report here instead of stdout")

    rep = sub.add_parser("report", help="re-render a saved json report")
    rep.add_argument("--in", dest="input", required=True, help="report json file")
    rep.add_argument("--format", default="text", choices=["text", "csv", "json"])
    rep.add_argument("--out")

    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            params = CohortParams(
                patients=args.patients,
                scans_per_patient=args.scans,
                slices_per_scan=args.slices,
                width=args.width,
                height=args.height,
                age_min=args.age_min,
                age_max=args.age_max,
            )
            manifest = generate(args.seed, params, args.out)
            print(
                json.dumps(
                    {
                        "out": args.out,
                        "patients": len(manifest["patients"]),
                        "digest": manifest_digest(manifest),
                    }
                )
            )
        elif args.command == "ingest":
            counts = ingest(args.manifest, args.address, args.format)
            print(json.dumps({k: v for k, v in counts.items() if k != "errors"}))
            if counts["errors"]:
                for err in counts["errors"]:
                    print(f"ingest error: {err}", file=sys.stderr)
                return 1
        elif args.command == "bench":
            manifest = load_manifest(args.manifest)
            modes = list(MODES) if args.mode == "both" else [args.mode]
            reports = [
                run_queries(
                    args.address,
                    mode,
                    args.repetitions,
                    manifest,
                    resize=(args.resize, args.resize),
                    threshold=args.threshold,
                    clients=args.clients,
                )
                for mode in modes
            ]
            _emit(report_mod.render(report_mod.merge(*reports), args.format), args.out)
        elif args.command == "report":
            loaded = report_mod.from_json(Path(args.input).read_text())
            _emit(report_mod.render(loaded, args.format), args.out)
    except VisorError as exc:
        print(f"visor: {exc}", file=sys.stderr)
        return 2
    except ConnectionError as exc:
        print(f"visor: connection failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"visor: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
