"""End-to-end clone search for one original artifact and one vulnerability.

Stages, in order, each with a survivor count in the report:

    query results -> consolidated -> valid pom -> no dependency
    -> sources acquired -> clones detected -> pov compilable
    -> pov testable -> vulnerability confirmed (-> shaded)

A candidate that fails is attributed to the first stage it fails.
"""

from __future__ import annotations

import datetime as _dt
import logging
import shutil
import tempfile
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from shadescan.clone import (
    DEFAULT_CLONE_THRESHOLD,
    ArtifactCloneReport,
    RelocationMap,
    SourceLoadStats,
    detect_artifact_clone,
    load_units,
)
from shadescan.coords import Ga, Gav
from shadescan.errors import (
    CorruptArchive,
    MalformedXml,
    OriginalNotFound,
    PovError,
    PovSelfCheckFailed,
    RegistryError,
)
from shadescan.fingerprint import (
    DEFAULT_QUERY_CLASSES,
    list_class_names,
    select_query_classes,
)
from shadescan.pom import PomModel, parse_pom, references_original, resolve_chain
from shadescan.pov import PovProject, StubRunner, VerificationResult, instantiate, load_pov, verify
from shadescan.pov.runner import BuildRunner
from shadescan.registry import FixtureBackend, LiveBackend, RegistryClient, ResponseCache
from shadescan.registry.client import DEFAULT_MAX_PAGES, DEFAULT_PAGE_SIZE

log = logging.getLogger(__name__)

STAGES = (
    "query results",
    "consolidated",
    "valid pom",
    "no dependency",
    "sources acquired",
    "clones detected",
    "pov compilable",
    "pov testable",
    "vulnerability confirmed",
    "shaded",
)
POV_STAGES = STAGES[6:]


@dataclass
class PipelineConfig:
    original: Gav
    cve_id: str
    pov_dir: Path | None = None
    query_class_count: int = DEFAULT_QUERY_CLASSES
    page_size: int = DEFAULT_PAGE_SIZE
    max_pages: int = DEFAULT_MAX_PAGES
    consolidation_threshold: int = 2
    clone_threshold: int = DEFAULT_CLONE_THRESHOLD
    worker_count: int = 4
    build_worker_count: int = 1
    backend: str = "fixture"
    fixture_root: Path | None = None
    cache_dir: Path | None = None
    extra_query_classes: list[str] = field(default_factory=list)
    request_interval: float | None = None
    environment: dict[str, bool] = field(default_factory=dict)
    workspace_root: Path | None = None
    keep_workspaces: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.original, str):
            self.original = Gav.parse(self.original)
        for name in (
            "query_class_count", "page_size", "max_pages", "consolidation_threshold",
            "clone_threshold", "worker_count", "build_worker_count",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.backend not in ("live", "fixture"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "fixture" and self.fixture_root is None:
            raise ValueError("fixture backend needs fixture_root")
        for name in ("pov_dir", "fixture_root", "cache_dir", "workspace_root"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                setattr(self, name, Path(value))

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in ("workspace_root", "keep_workspaces", "cache_dir"):
                continue
            value = getattr(self, f.name)
            out[f.name] = str(value) if isinstance(value, (Gav, Path)) else value
        return out

    @classmethod
    def from_mapping(cls, data: dict) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class StageStats:
    query_results: int | None = None
    consolidated: int | None = None
    valid_pom: int | None = None
    no_dependency: int | None = None
    sources_acquired: int | None = None
    clones_detected: int | None = None
    pov_compilable: int | None = None
    pov_testable: int | None = None
    vulnerability_confirmed: int | None = None
    shaded: int | None = None

    def as_list(self) -> list[int | None]:
        return [getattr(self, f.name) for f in fields(self)]

    @classmethod
    def from_list(cls, values: Sequence[int | None]) -> StageStats:
        return cls(*values)

    def is_monotone(self) -> bool:
        values = [v for v in self.as_list()[:-1] if v is not None]
        ordered = all(a >= b for a, b in zip(values, values[1:]))
        if self.shaded is None:
            return ordered
        return ordered and self.vulnerability_confirmed is not None and self.shaded <= self.vulnerability_confirmed


@dataclass
class ConfirmedClone:
    gav: Gav
    clone: ArtifactCloneReport
    verification: VerificationResult


@dataclass
class PipelineReport:
    config: dict
    query_classes: list[str]
    stage_stats: StageStats
    stage_stats_ga: StageStats
    removed: dict[str, list[str]]
    clones: list[ArtifactCloneReport]
    confirmed: list[ConfirmedClone]
    diagnostics: dict = field(default_factory=dict)
    generated_at: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    )

    @property
    def confirmed_ga(self) -> list[tuple[Ga, int]]:
        return aggregate_by_ga([c.gav for c in self.confirmed])


def consolidate(match_sets: Iterable[tuple[str, Iterable[Gav]]], threshold: int = 2) -> set[Gav]:
    """GAVs found by at least ``threshold`` distinct query classes."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    hits: dict[Gav, set[str]] = {}
    for class_name, gavs in match_sets:
        for gav in gavs:
            hits.setdefault(gav, set()).add(class_name)
    return {gav for gav, names in hits.items() if len(names) >= threshold}


def aggregate_by_ga(gavs: Iterable[Gav]) -> list[tuple[Ga, int]]:
    counts = Counter(g.ga for g in gavs)
    return sorted(counts.items(), key=lambda kv: (kv[0].group, kv[0].artifact))


def build_client(config: PipelineConfig) -> RegistryClient:
    if config.backend == "live":
        backend = LiveBackend()
    else:
        backend = FixtureBackend(config.fixture_root)
    cache = ResponseCache(config.cache_dir) if config.cache_dir is not None else None
    return RegistryClient(backend, cache, min_request_interval=config.request_interval)


def fixture_stub_runner(root: str | Path, client: RegistryClient) -> StubRunner:
    """Stub runner replaying ``<root>/stub-reports/<repository dir>/*.xml`` per target.

    Imports are resolved against the classes in the target's binary jar and
    the jars of its direct compile dependencies, fetched through ``client``.
    """
    root = Path(root)
    reports = {}
    base = root / "stub-reports"
    if base.is_dir():
        for xml in sorted(base.rglob("*.xml")):
            rel = xml.parent.relative_to(base).parts
            if len(rel) < 3:
                continue
            gav = Gav(".".join(rel[:-2]), rel[-2], rel[-1])
            reports.setdefault(str(gav), []).append(xml.read_bytes())

    def jar_classes(gav: Gav) -> set[str]:
        try:
            return {str(c) for c in list_class_names(client.fetch_binary(gav))}
        except RegistryError:
            return set()

    def classpath(gav: Gav) -> set[str]:
        names = jar_classes(gav)
        try:
            pom = parse_pom(client.fetch_pom(gav).data)
        except (RegistryError, MalformedXml):
            return names
        for dep in pom.dependencies:
            if dep.section != "dependencies" or dep.scope in ("test", "provided") or not dep.version:
                continue
            if "${" in dep.version or "${" in dep.group or "${" in dep.artifact:
                continue
            names |= jar_classes(Gav(dep.group, dep.artifact, dep.version))
        return names

    return StubRunner(reports, classpath=classpath)


@dataclass
class _CandidateResult:
    gav: Gav
    removed_at: str | None = None
    clone: ArtifactCloneReport | None = None
    detail: str = ""


class Pipeline:
    def __init__(
        self,
        config: PipelineConfig,
        client: RegistryClient | None = None,
        runner: BuildRunner | None = None,
    ) -> None:
        self.config = config
        self.client = client or build_client(config)
        self.runner = runner
        self.load_stats = SourceLoadStats()
        self.diagnostics: Counter = Counter()

    # helpers

    def _fetch_pom_model(self, gav: Gav) -> PomModel | None:
        try:
            return parse_pom(self.client.fetch_pom(gav).data)
        except (RegistryError, MalformedXml) as exc:
            log.info("parent pom %s unavailable: %s", gav, exc)
            return None

    def _original_inputs(self):
        original = self.config.original
        try:
            binary = self.client.fetch_binary(original)
            sources = self.client.fetch_sources(original)
        except RegistryError as exc:
            raise OriginalNotFound(f"{original}: {exc}") from exc
        classes = list_class_names(binary)
        units = load_units(sources, self.load_stats)
        return classes, units

    def _process_candidate(self, gav: Gav, original_units, query) -> _CandidateResult:
        try:
            pom = parse_pom(self.client.fetch_pom(gav).data)
        except (RegistryError, MalformedXml) as exc:
            return _CandidateResult(gav, "valid pom", detail=str(exc))
        chain = resolve_chain(pom, self._fetch_pom_model)
        verdict = references_original(chain, self.config.original.ga, gav)
        if verdict.refers_to_original:
            return _CandidateResult(gav, "no dependency", detail=verdict.matched_pattern)
        try:
            units = load_units(self.client.fetch_sources(gav), self.load_stats)
        except (RegistryError, CorruptArchive) as exc:
            return _CandidateResult(gav, "sources acquired", detail=str(exc))
        report = detect_artifact_clone(
            original_units, units, query,
            original=self.config.original, candidate=gav, threshold=self.config.clone_threshold,
        )
        if not report.verdict:
            return _CandidateResult(gav, "clones detected", clone=report)
        return _CandidateResult(gav, None, clone=report)

    def _verify(self, pov: PovProject, gav: Gav, relocation: RelocationMap, original_classes, workdir: Path):
        workspace = workdir / f"{gav.group}__{gav.artifact}__{gav.version}"
        try:
            instance = instantiate(pov, gav, relocation, workspace, original_classes)
        except PovError as exc:
            return VerificationResult(gav, False, False, detail=str(exc))
        try:
            return verify(instance, self.runner, self.config.environment, self.client.cache)
        finally:
            if not self.config.keep_workspaces:
                shutil.rmtree(workspace, ignore_errors=True)

    # main

    def run(self) -> PipelineReport:
        cfg = self.config
        pov = load_pov(cfg.pov_dir) if cfg.pov_dir is not None else None
        if pov is not None and self.runner is None:
            raise ValueError("a POV needs a build runner")
        if pov is not None and pov.original.ga != cfg.original.ga:
            log.warning("POV targets %s but the original is %s", pov.original, cfg.original)

        classes, original_units = self._original_inputs()
        query = select_query_classes(classes, cfg.query_class_count)
        query = list(dict.fromkeys([*cfg.extra_query_classes, *query]))

        workdir = Path(tempfile.mkdtemp(prefix="shadescan-", dir=cfg.workspace_root))
        try:
            if pov is not None:
                self._self_check(pov, workdir)
            return self._run_stages(pov, classes, original_units, query, workdir)
        finally:
            if not cfg.keep_workspaces:
                shutil.rmtree(workdir, ignore_errors=True)

    def _self_check(self, pov: PovProject, workdir: Path) -> None:
        result = self._verify(pov, pov.original, RelocationMap(), None, workdir / "self-check")
        if not result.confirmed:
            states = {o.test_id: o.state for o in result.outcomes}
            raise PovSelfCheckFailed(
                f"POV for {pov.cve_id} does not reproduce its expected signals on {pov.original}: {states or result.detail}"
            )

    def _search(self, query: list[str]) -> list[tuple[str, list[Gav]]]:
        cfg = self.config

        def one(name: str) -> tuple[str, list[Gav]]:
            try:
                hits = self.client.search_by_class(name, cfg.max_pages, cfg.page_size)
            except RegistryError as exc:
                log.warning("query for %s failed: %s", name, exc)
                self.diagnostics["failed_queries"] += 1
                hits = []
            return name, [g for g in hits if g != cfg.original]

        with ThreadPoolExecutor(cfg.worker_count) as pool:
            return list(pool.map(one, query))

    def _run_stages(self, pov, classes, original_units, query, workdir) -> PipelineReport:
        cfg = self.config
        survivors: dict[str, list[Gav]] = {}
        removed: dict[str, list[str]] = {stage: [] for stage in STAGES[1:-1]}

        match_sets = self._search(query)
        all_hits = sorted({g for _, gavs in match_sets for g in gavs})
        survivors["query results"] = all_hits
        consolidated = sorted(consolidate(match_sets, cfg.consolidation_threshold))
        survivors["consolidated"] = consolidated
        removed["consolidated"] = [str(g) for g in all_hits if g not in set(consolidated)]

        with ThreadPoolExecutor(cfg.worker_count) as pool:
            results = list(pool.map(lambda g: self._process_candidate(g, original_units, query), consolidated))

        order = ["valid pom", "no dependency", "sources acquired", "clones detected"]
        for stage_index, stage in enumerate(order):
            survivors[stage] = [
                r.gav for r in results
                if r.removed_at is None or order.index(r.removed_at) > stage_index
            ]
        for r in results:
            if r.removed_at is not None:
                removed[r.removed_at].append(str(r.gav))
        clones = [r.clone for r in results if r.removed_at is None]

        confirmed: list[ConfirmedClone] = []
        if pov is not None:
            original_classes = sorted(classes)

            def check(report: ArtifactCloneReport):
                return report, self._verify(pov, report.candidate, report.relocation, original_classes, workdir)

            with ThreadPoolExecutor(cfg.build_worker_count) as pool:
                verified = list(pool.map(check, clones))
            survivors["pov compilable"] = [r.candidate for r, v in verified if v.compiled]
            survivors["pov testable"] = [r.candidate for r, v in verified if v.compiled and v.tested]
            survivors["vulnerability confirmed"] = [r.candidate for r, v in verified if v.confirmed]
            survivors["shaded"] = [r.candidate for r, v in verified if v.confirmed and r.is_shaded]
            for r, v in verified:
                if not v.compiled:
                    removed["pov compilable"].append(str(r.candidate))
                elif not v.tested:
                    removed["pov testable"].append(str(r.candidate))
                elif not v.confirmed:
                    removed["vulnerability confirmed"].append(str(r.candidate))
                else:
                    confirmed.append(ConfirmedClone(r.candidate, r, v))
        else:
            for stage in POV_STAGES:
                removed.pop(stage, None)

        stats = StageStats.from_list([len(survivors[s]) if s in survivors else None for s in STAGES])
        stats_ga = StageStats.from_list(
            [len({g.ga for g in survivors[s]}) if s in survivors else None for s in STAGES]
        )
        diagnostics = dict(self.diagnostics)
        diagnostics.update(
            original_classes=len(classes),
            source_units=self.load_stats.units,
            lex_errors=self.load_stats.lex_errors,
            skipped_other_language=self.load_stats.skipped_other_language,
        )
        return PipelineReport(
            config=cfg.echo(),
            query_classes=query,
            stage_stats=stats,
            stage_stats_ga=stats_ga,
            removed=removed,
            clones=clones,
            confirmed=confirmed,
            diagnostics=diagnostics,
        )


def run_pipeline(
    config: PipelineConfig,
    client: RegistryClient | None = None,
    runner: BuildRunner | None = None,
) -> PipelineReport:
    return Pipeline(config, client, runner).run()
