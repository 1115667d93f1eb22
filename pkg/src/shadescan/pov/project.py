"""POV projects and their ``pov.json`` metadata."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from shadescan.coords import Gav
from shadescan.errors import MalformedXml, MissingMetadata, PovError, SignalForUnknownTest
from shadescan.javalex import IDENT, significant, tokenize
from shadescan.pom import parse_pom
from shadescan.pov.surefire import FAILURE, SUCCESS

METADATA_FILE = "pov.json"
METADATA_SCHEMA_VERSION = 1
SIGNALS = (SUCCESS, FAILURE)


@dataclass
class PovProject:
    root_dir: Path
    cve_id: str
    original: Gav
    expected_signals: dict[str, str]
    payload_files: list[str] = field(default_factory=list)
    skippable: dict[str, str] = field(default_factory=dict)
    environment: dict[str, bool] = field(default_factory=dict)

    def source_files(self) -> list[Path]:
        return sorted(p for p in self.root_dir.rglob("*.java") if "target" not in p.relative_to(self.root_dir).parts)


def _test_source(root: Path, class_name: str) -> Path | None:
    rel = Path(*class_name.split(".")).with_suffix(".java")
    for base in ("src/test/java", "src/main/java"):
        path = root / base / rel
        if path.is_file():
            return path
    return None


def _declares_method(path: Path, method: str) -> bool:
    tokens = significant(tokenize(path.read_text(encoding="utf-8")))
    return any(
        tok.kind == IDENT and tok.text == method and nxt.text == "("
        for tok, nxt in zip(tokens, tokens[1:])
    )


def load_pov(root_dir: str | Path) -> PovProject:
    root = Path(root_dir)
    meta_path = root / METADATA_FILE
    if not meta_path.is_file():
        raise MissingMetadata(f"{meta_path} not found")
    if not (root / "pom.xml").is_file():
        raise MissingMetadata(f"{root / 'pom.xml'} not found")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MissingMetadata(f"{meta_path}: {exc}") from exc
    if meta.get("schema_version") != METADATA_SCHEMA_VERSION:
        raise MissingMetadata(f"{meta_path}: unsupported schema_version {meta.get('schema_version')!r}")
    for key in ("cve_id", "original", "expected_signals"):
        if key not in meta:
            raise MissingMetadata(f"{meta_path}: missing {key!r}")

    original = Gav.parse(meta["original"])
    signals = meta["expected_signals"]
    if not isinstance(signals, dict) or not signals:
        raise MissingMetadata(f"{meta_path}: expected_signals must be a non-empty object")
    for test_id, signal in signals.items():
        if signal not in SIGNALS:
            raise PovError(f"{test_id}: signal must be one of {SIGNALS}, got {signal!r}")
        class_name, sep, method = test_id.partition("#")
        source = _test_source(root, class_name) if sep else None
        if source is None or not _declares_method(source, method):
            raise SignalForUnknownTest(f"{test_id} does not resolve to a test in {root}")
    skippable = meta.get("skippable", {})
    unknown = set(skippable) - set(signals)
    if unknown:
        raise SignalForUnknownTest(f"skippable names tests without a signal: {sorted(unknown)}")

    try:
        pom = parse_pom((root / "pom.xml").read_bytes())
    except MalformedXml as exc:
        raise PovError(f"POV pom is malformed: {exc}") from exc
    if not any(dep.matches(original.ga) and dep.section == "dependencies" for dep in pom.dependencies):
        raise PovError(f"POV pom does not depend on {original}")

    return PovProject(
        root_dir=root,
        cve_id=meta["cve_id"],
        original=original,
        expected_signals=dict(signals),
        payload_files=list(meta.get("payload_files", [])),
        skippable=dict(skippable),
        environment={k: bool(v) for k, v in meta.get("environment", {}).items()},
    )
