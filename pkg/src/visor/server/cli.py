"""visor-server command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import VisorError
from .config import load_config
from .core import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visor-server", description="Run the visual data service."
    )
    parser.add_argument("--port", type=int, help="TCP port (default 55555; 0 picks one)")
    parser.add_argument("--host", help="bind address (default 127.0.0.1)")
    parser.add_argument("--data-dir", help="store directory (created if missing)")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument(
        "--max-message-mib", type=int, help="frame size limit in MiB (default 256)"
    )
    parser.add_argument("--workers", type=int, help="worker pool size (default 4)")
    parser.add_argument(
        "--index",
        action="append",
        dest="indexes",
        metavar="CLASS.PROP",
        help="create this index at startup (repeatable)",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = load_config(
            config_file=args.config,
            port=args.port,
            host=args.host,
            data_dir=args.data_dir,
            max_message_mib=args.max_message_mib,
            workers=args.workers,
            indexes=args.indexes,
        )
        serve(config)
    except VisorError as exc:
        print(f"visor-server: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"visor-server: cannot start: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
