"""Decide whether a POV run confirms the vulnerability."""

from __future__ import annotations

import base64
import hashlib
import logging
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from shadescan.coords import Gav
from shadescan.errors import MalformedReport, RunnerError
from shadescan.pov.instantiate import PovInstance
from shadescan.pov.runner import BuildRunner
from shadescan.pov.surefire import ERROR, SKIP, TestOutcome, parse_surefire
from shadescan.registry.cache import ResponseCache

log = logging.getLogger(__name__)


def evaluate_outcomes(
    outcomes: Iterable[TestOutcome],
    expected: Mapping[str, str],
    skippable: Mapping[str, str] | None = None,
    environment: Mapping[str, bool] | None = None,
) -> bool:
    """True only when every expected test produced exactly its expected signal.

    This is stricter than surefire's own verdict: any error rejects, and a
    skip rejects unless the test is declared skippable under a precondition
    that ``environment`` reports as unmet on this platform. At least one
    expected test must actually run.
    """
    outcomes = list(outcomes)
    if not outcomes or not expected:
        return False
    if any(o.state == ERROR for o in outcomes):
        return False
    skippable = skippable or {}
    environment = environment or {}
    observed = defaultdict(list)
    for o in outcomes:
        observed[o.test_id].append(o.state)
    ran = False
    for test_id, signal in expected.items():
        states = observed.get(test_id)
        if not states:
            return False
        for state in states:
            if state == SKIP:
                flag = skippable.get(test_id)
                if flag is None or environment.get(flag, True):
                    return False
                continue
            if state != signal:
                return False
            ran = True
    return ran


@dataclass
class VerificationResult:
    candidate: Gav
    compiled: bool
    tested: bool
    outcomes: list[TestOutcome] = field(default_factory=list)
    confirmed: bool = False
    detail: str = ""

    def __post_init__(self) -> None:
        if self.confirmed and not (self.compiled and self.tested):
            raise ValueError("cannot confirm without compiling and testing")

    def to_dict(self) -> dict:
        return {
            "candidate": str(self.candidate),
            "compiled": self.compiled,
            "tested": self.tested,
            "confirmed": self.confirmed,
            "outcomes": [
                {"test_id": o.test_id, "state": o.state, "message": o.message} for o in self.outcomes
            ],
        }


def workspace_digest(workspace: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(p for p in workspace.rglob("*") if p.is_file()):
        rel = path.relative_to(workspace)
        if rel.parts[0] == "target":
            continue
        h.update(rel.as_posix().encode() + b"\0" + path.read_bytes() + b"\0")
    return h.hexdigest()


def _run_phases(instance: PovInstance, runner: BuildRunner) -> tuple[bool, list[bytes] | None, str]:
    try:
        compiled = runner.compile(instance)
    except RunnerError as exc:
        return False, None, str(exc)
    if not compiled.ok:
        return False, None, compiled.log
    try:
        return True, runner.test(instance), ""
    except RunnerError as exc:
        return True, None, str(exc)


def verify(
    instance: PovInstance,
    runner: BuildRunner,
    environment: Mapping[str, bool] | None = None,
    cache: ResponseCache | None = None,
) -> VerificationResult:
    pov = instance.source_pov
    env = {**pov.environment, **(environment or {})}
    key = None
    cached = None
    if cache is not None and runner.cacheable:
        key = hashlib.sha256(f"{runner.name}:{workspace_digest(instance.workspace)}".encode()).hexdigest()
        cached = cache.get_json("builds", key)
    if cached is not None:
        compiled = cached["compiled"]
        reports = None if cached["reports"] is None else [base64.b64decode(r) for r in cached["reports"]]
        detail = "cached"
    else:
        compiled, reports, detail = _run_phases(instance, runner)

    def outcomes_of(bundle):
        try:
            return parse_surefire(bundle), ""
        except MalformedReport as exc:
            return [], f"malformed report: {exc}"

    outcomes, problem = outcomes_of(reports or [])
    if cached is None and runner.retry_on_error and any(o.state == ERROR for o in outcomes):
        log.info("retrying %s once after error outcome", instance.target)
        compiled, reports, detail = _run_phases(instance, runner)
        outcomes, problem = outcomes_of(reports or [])
    if key is not None and cached is None:
        cache.put_json("builds", key, {
            "compiled": compiled,
            "reports": None if reports is None else [base64.b64encode(r).decode() for r in reports],
        })
    tested = bool(reports) and not problem
    confirmed = compiled and tested and evaluate_outcomes(outcomes, pov.expected_signals, pov.skippable, env)
    return VerificationResult(instance.target, compiled, tested, outcomes, confirmed, problem or detail)
