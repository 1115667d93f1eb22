"""Serialize pipeline reports as JSON and as a per-stage text table."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable
from importlib import resources
from pathlib import Path

from shadescan.pipeline import STAGES, PipelineReport

REPORT_SCHEMA_VERSION = 1


def mask_token(value: str) -> str:
    return "masked-" + hashlib.sha256(value.encode("utf-8")).hexdigest()[:12]


def report_to_dict(report: PipelineReport, mask: bool = False) -> dict:
    def name(value) -> str:
        return mask_token(str(value)) if mask else str(value)

    def clone_dict(clone) -> dict:
        data = clone.to_dict()
        data["candidate"] = name(clone.candidate)
        if mask:
            data["relocation"] = {}
            data["relocation_entries"] = len(clone.relocation.entries)
        else:
            data["relocation_entries"] = len(clone.relocation.entries)
        return data

    confirmed = []
    for item in report.confirmed:
        verification = item.verification.to_dict()
        verification["candidate"] = name(item.gav)
        confirmed.append({"gav": name(item.gav), "clone": clone_dict(item.clone), "verification": verification})
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "generated_at": report.generated_at,
        "masked": mask,
        "config": report.config,
        "query_classes": list(report.query_classes),
        "stages": list(STAGES),
        "stage_stats": {
            "artifacts": report.stage_stats.as_list(),
            "components": report.stage_stats_ga.as_list(),
        },
        "removed": {stage: sorted(name(g) for g in gavs) for stage, gavs in report.removed.items()},
        "clones": [clone_dict(c) for c in report.clones],
        "confirmed": confirmed,
        "confirmed_ga": [{"ga": name(ga), "versions": n} for ga, n in report.confirmed_ga],
        "diagnostics": dict(sorted(report.diagnostics.items())),
    }


def render_json(report: PipelineReport, mask: bool = False) -> str:
    return json.dumps(report_to_dict(report, mask), indent=2) + "\n"


def render_table(report: PipelineReport) -> str:
    """Text table, one column per stage in pipeline order."""
    rows = [
        ("artifacts (GAV)", report.stage_stats.as_list()),
        ("components (GA)", report.stage_stats_ga.as_list()),
    ]
    label_width = max(len(label) for label, _ in rows)
    cells = [[("-" if v is None else str(v)) for v in values] for _, values in rows]
    widths = [max(len(stage), *(len(r[i]) for r in cells)) for i, stage in enumerate(STAGES)]
    lines = [
        " " * label_width + "  " + "  ".join(s.rjust(w) for s, w in zip(STAGES, widths)),
    ]
    for (label, _), row in zip(rows, cells):
        lines.append(label.ljust(label_width) + "  " + "  ".join(c.rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def report_schema() -> dict:
    return json.loads(resources.files("shadescan").joinpath("schemas/report.schema.json").read_text())


def emit_report(
    report: PipelineReport,
    formats: Iterable[str] = ("json", "text-table"),
    *,
    json_path: str | Path | None = None,
    table_path: str | Path | None = None,
    mask: bool = False,
) -> dict[str, Path]:
    """Write the requested formats; returns the paths written by format."""
    written = {}
    for fmt in formats:
        if fmt == "json":
            if json_path is None:
                raise ValueError("json format needs json_path")
            path = Path(json_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(render_json(report, mask), encoding="utf-8")
        elif fmt == "text-table":
            if table_path is None:
                raise ValueError("text-table format needs table_path")
            path = Path(table_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(render_table(report), encoding="utf-8")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written[fmt] = path
    return written
