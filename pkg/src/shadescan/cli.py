"""Command line entry point: ``scan``, ``prevalence`` and ``cache``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

from shadescan.coords import Gav
from shadescan.errors import ShadescanError
from shadescan.pipeline import PipelineConfig, build_client, fixture_stub_runner, run_pipeline
from shadescan.pom import prevalence_scan
from shadescan.pov import MavenRunner
from shadescan.registry import ResponseCache, default_cache_dir
from shadescan.report import emit_report, render_table

log = logging.getLogger("shadescan")

# CLI flag -> PipelineConfig field
_SCAN_FLAGS = {
    "original": "original",
    "cve": "cve_id",
    "pov": "pov_dir",
    "backend": "backend",
    "fixture_root": "fixture_root",
    "pages": "max_pages",
    "page_size": "page_size",
    "classes": "query_class_count",
    "threshold": "consolidation_threshold",
    "clone_threshold": "clone_threshold",
    "workers": "worker_count",
    "build_workers": "build_worker_count",
    "request_delay": "request_interval",
    "cache_dir": "cache_dir",
    "query_class": "extra_query_classes",
    "keep_workspaces": "keep_workspaces",
}


def _env_flag(text: str) -> tuple[str, bool]:
    name, sep, value = text.partition("=")
    if not sep or value.lower() not in ("true", "false"):
        raise argparse.ArgumentTypeError(f"expected NAME=true|false, got {text!r}")
    return name, value.lower() == "true"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadescan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="search the registry for vulnerable clones of one artifact")
    scan.add_argument("--config", type=Path, help="JSON file with PipelineConfig fields")
    scan.add_argument("--original", type=Gav.parse, help="G:A:V of the vulnerable artifact")
    scan.add_argument("--cve", help="CVE identifier")
    scan.add_argument("--pov", type=Path, help="proof-of-vulnerability project directory")
    scan.add_argument("--backend", choices=["live", "fixture"])
    scan.add_argument("--fixture-root", type=Path)
    scan.add_argument("--pages", type=int, help="result pages per query class (default 5)")
    scan.add_argument("--page-size", type=int, help="results per page (default 200)")
    scan.add_argument("--classes", type=int, help="number of query classes (default 10)")
    scan.add_argument("--threshold", type=int, help="result sets a candidate must appear in (default 2)")
    scan.add_argument("--clone-threshold", type=int, help="minimum cloned classes (default 2)")
    scan.add_argument("--query-class", action="append", help="extra class name to query (repeatable)")
    scan.add_argument("--workers", type=int)
    scan.add_argument("--build-workers", type=int)
    scan.add_argument("--request-delay", type=float, help="minimum seconds between registry requests")
    scan.add_argument("--cache-dir", type=Path)
    scan.add_argument("--no-cache", action="store_true")
    scan.add_argument("--runner", choices=["stub", "maven"], help="default: stub for fixture, maven for live")
    scan.add_argument("--build-timeout", type=float, default=600.0)
    scan.add_argument("--env", type=_env_flag, action="append", default=[],
                      help="POV precondition flag, NAME=true|false")
    scan.add_argument("--keep-workspaces", action="store_true", default=None)
    scan.add_argument("--mask", action="store_true", help="hash candidate coordinates in reports")
    scan.add_argument("--report-json", type=Path)
    scan.add_argument("--report-table", type=Path)

    prev = sub.add_parser("prevalence", help="count shade plugin and relocation usage in poms")
    prev.add_argument("--poms", required=True, help="glob for pom files (quote it; ** allowed)")
    prev.add_argument("--output", type=Path, help="write JSON here instead of stdout")

    cache = sub.add_parser("cache", help="inspect or clear the response cache")
    group = cache.add_mutually_exclusive_group(required=True)
    group.add_argument("--clear", action="store_true")
    group.add_argument("--stats", action="store_true")
    cache.add_argument("--cache-dir", type=Path)
    return parser


def scan_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge defaults < config file < command line flags."""
    values: dict = {}
    if args.config is not None:
        values.update(json.loads(args.config.read_text(encoding="utf-8")))
    for flag, key in _SCAN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            values[key] = value
    if args.env:
        values["environment"] = {**values.get("environment", {}), **dict(args.env)}
    if args.no_cache:
        values["cache_dir"] = None
    elif values.get("cache_dir") is None:
        values["cache_dir"] = default_cache_dir()
    for required, flag in (("original", "--original"), ("cve_id", "--cve")):
        if not values.get(required):
            raise SystemExit(f"shadescan scan: {flag} is required")
    values.setdefault("backend", "fixture" if values.get("fixture_root") else "live")
    return PipelineConfig.from_mapping(values)


def cmd_scan(args: argparse.Namespace) -> int:
    config = scan_config(args)
    client = build_client(config)
    runner_kind = args.runner or ("stub" if config.backend == "fixture" else "maven")
    if runner_kind == "stub":
        if config.fixture_root is None:
            raise SystemExit("shadescan scan: the stub runner needs --fixture-root")
        runner = fixture_stub_runner(config.fixture_root, client)
    else:
        repo = config.cache_dir / "m2" if config.cache_dir else None
        runner = MavenRunner(timeout=args.build_timeout, local_repository=repo)
    report = run_pipeline(config, client, runner)
    formats = []
    if args.report_json:
        formats.append("json")
    if args.report_table:
        formats.append("text-table")
    emit_report(report, formats, json_path=args.report_json, table_path=args.report_table, mask=args.mask)
    sys.stdout.write(render_table(report))
    log.info("registry requests: %d, cache hits: %d", client.network_requests, client.cache_hits)
    return 0


def cmd_prevalence(args: argparse.Namespace) -> int:
    paths = sorted(Path(p) for p in glob.glob(args.poms, recursive=True) if Path(p).is_file())
    matches: list = []
    record = prevalence_scan((p.read_bytes() for p in paths), matches)
    parsed = {index for index, _, _ in matches}
    doc = {
        "pom_count": record.pom_count,
        "shade_plugin_count": record.shade_plugin_count,
        "relocation_count": record.relocation_count,
        "files": [
            {"path": str(paths[i]), "shade_plugin": shaded, "relocations": relocated}
            for i, shaded, relocated in matches
            if shaded
        ],
        "malformed": [str(p) for i, p in enumerate(paths) if i not in parsed],
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_cache(args: argparse.Namespace) -> int:
    cache = ResponseCache(args.cache_dir or default_cache_dir())
    if args.clear:
        cache.clear()
        print(f"cleared {cache.root}")
    else:
        print(json.dumps({"root": str(cache.root), **cache.stats()}, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"scan": cmd_scan, "prevalence": cmd_prevalence, "cache": cmd_cache}[args.command]
    try:
        return handler(args)
    except ShadescanError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
