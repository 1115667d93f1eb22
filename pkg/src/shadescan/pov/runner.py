"""Build runners: the real Maven toolchain, and a stub that replays canned reports."""

from __future__ import annotations

import logging
import subprocess
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from shadescan.coords import Gav
from shadescan.errors import LexError, RunnerCrash, RunnerTimeout
from shadescan.javalex import KEYWORD, significant, tokenize
from shadescan.pov.instantiate import PovInstance

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 600.0
COMPILE = "compile"
TEST = "test"


@dataclass
class CompileResult:
    ok: bool
    log: str = ""


class BuildRunner(Protocol):
    name: str
    retry_on_error: bool
    cacheable: bool

    def compile(self, instance: PovInstance) -> CompileResult: ...

    def test(self, instance: PovInstance) -> list[bytes]: ...


@dataclass
class BuildOutcome:
    phase: str
    compiled: bool
    reports: list[bytes] = field(default_factory=list)
    log: str = ""


def run_build(instance: PovInstance, runner: BuildRunner, phase: str) -> BuildOutcome:
    """Run ``phase`` for an instance; ``test`` always compiles first and stops on failure."""
    if phase not in (COMPILE, TEST):
        raise ValueError(f"unknown phase {phase!r}")
    compiled = runner.compile(instance)
    if phase == COMPILE or not compiled.ok:
        return BuildOutcome(phase, compiled.ok, [], compiled.log)
    return BuildOutcome(phase, True, runner.test(instance), compiled.log)


class MavenRunner:
    """Runs ``mvn`` in the instance workspace.

    The compile phase runs ``test-compile`` since POV code lives in test
    sources. Test failures do not fail the run; reports are read from
    ``target/surefire-reports``.
    """

    name = "maven"
    retry_on_error = True
    cacheable = True

    def __init__(
        self,
        executable: str = "mvn",
        timeout: float = DEFAULT_TIMEOUT,
        local_repository: str | Path | None = None,
        extra_args: Iterable[str] = (),
    ) -> None:
        self.executable = executable
        self.timeout = timeout
        self.local_repository = local_repository
        self.extra_args = list(extra_args)

    def _run(self, workspace: Path, *goals: str) -> subprocess.CompletedProcess:
        cmd = [self.executable, "-B", *goals, *self.extra_args]
        if self.local_repository:
            cmd.append(f"-Dmaven.repo.local={self.local_repository}")
        try:
            return subprocess.run(
                cmd, cwd=workspace, capture_output=True, text=True, timeout=self.timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise RunnerTimeout(f"{' '.join(goals)} in {workspace} exceeded {self.timeout}s") from exc
        except OSError as exc:
            raise RunnerCrash(f"cannot run {self.executable}: {exc}") from exc

    def compile(self, instance: PovInstance) -> CompileResult:
        proc = self._run(instance.workspace, "test-compile")
        return CompileResult(proc.returncode == 0, proc.stdout[-4000:] + proc.stderr[-4000:])

    def test(self, instance: PovInstance) -> list[bytes]:
        reports_dir = instance.workspace / "target" / "surefire-reports"
        for stale in reports_dir.glob("TEST-*.xml"):
            stale.unlink()
        proc = self._run(instance.workspace, "test", "-Dmaven.test.failure.ignore=true")
        reports = [p.read_bytes() for p in sorted(reports_dir.glob("TEST-*.xml"))]
        if proc.returncode != 0 and not reports:
            raise RunnerCrash(f"mvn test exited {proc.returncode}: {proc.stdout[-2000:]}")
        return reports


BUILTIN_PREFIXES = (
    "java.", "javax.", "jdk.", "sun.", "org.junit.", "org.hamcrest.", "org.assertj.",
    "org.opentest4j.", "org.mockito.",
)


def _balanced(tokens) -> bool:
    pairs = {")": "(", "]": "[", "}": "{"}
    stack = []
    for tok in tokens:
        if tok.kind != "punct":
            continue
        if tok.text in "([{":
            stack.append(tok.text)
        elif tok.text in pairs:
            if not stack or stack.pop() != pairs[tok.text]:
                return False
    return not stack


class StubRunner:
    """Replays canned surefire reports keyed by the instance's target GAV.

    Compilation is a syntactic check: every Java file must lex with balanced
    brackets, and when ``classpath`` is given every import outside the JDK
    and test libraries must name a class the target provides (or one the
    POV defines itself).
    """

    name = "stub"
    retry_on_error = False
    cacheable = False

    def __init__(
        self,
        reports: Mapping[str, list[bytes]] | None = None,
        default_reports: list[bytes] | None = None,
        compile_failures: Iterable[str] = (),
        classpath: Callable[[Gav], Iterable[str]] | None = None,
    ) -> None:
        self.reports = {str(k): v for k, v in (reports or {}).items()}
        self.default_reports = default_reports
        self.compile_failures = {str(g) for g in compile_failures}
        self.classpath = classpath
        self.calls: list[tuple[str, str]] = []

    def compile(self, instance: PovInstance) -> CompileResult:
        self.calls.append((COMPILE, str(instance.target)))
        if str(instance.target) in self.compile_failures:
            return CompileResult(False, "compile failure (canned)")
        available = set(self.classpath(instance.target)) if self.classpath else None
        sources = sorted(instance.workspace.rglob("*.java"))
        parsed = {}
        for src in sources:
            try:
                parsed[src] = significant(tokenize(src.read_text(encoding="utf-8")))
            except LexError as exc:
                return CompileResult(False, f"{src}: {exc}")
            if not _balanced(parsed[src]):
                return CompileResult(False, f"{src}: unbalanced brackets")
        if available is None:
            return CompileResult(True)
        own = {_own_class(instance.workspace, src) for src in sources}
        packages = {c.rpartition(".")[0] for c in available | own}
        for src, tokens in parsed.items():
            for name, wildcard, static in _imports(tokens):
                if name.startswith(BUILTIN_PREFIXES):
                    continue
                if wildcard and not static:
                    ok = name in packages
                elif static:
                    ok = any(name.startswith(c + ".") or name == c for c in available | own)
                else:
                    ok = name in available or name in own
                if not ok:
                    return CompileResult(False, f"{src}: cannot resolve import {name}")
        return CompileResult(True)

    def test(self, instance: PovInstance) -> list[bytes]:
        self.calls.append((TEST, str(instance.target)))
        reports = self.reports.get(str(instance.target), self.default_reports)
        return list(reports or [])


def _own_class(workspace: Path, src: Path) -> str:
    rel = src.relative_to(workspace).with_suffix("")
    parts = rel.parts
    for marker in ("java",):
        if marker in parts:
            parts = parts[parts.index(marker) + 1 :]
    return ".".join(parts)


def _imports(tokens):
    depth = 0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1
        elif depth == 0 and tok.kind == KEYWORD and tok.text == "import":
            j = i + 1
            static = j < len(tokens) and tokens[j].text == "static"
            if static:
                j += 1
            k = j
            while k < len(tokens) and tokens[k].text != ";":
                k += 1
            name = "".join(t.text for t in tokens[j:k])
            wildcard = name.endswith(".*")
            yield (name[:-2] if wildcard else name), wildcard, static
            i = k
        i += 1
