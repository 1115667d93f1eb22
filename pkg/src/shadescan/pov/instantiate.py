"""Turn a POV project into one that targets a clone candidate.

The pom dependency on the original is pointed at the candidate, and every
reference to a relocated class in the POV's Java sources (imports, static
imports and inline qualified names) is rewritten to the class's new package.
Edits are spliced into the original text at token offsets so all other bytes
survive unchanged.
"""

from __future__ import annotations

import re
import shutil
import tempfile
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from shadescan.clone import RelocationMap
from shadescan.coords import Gav
from shadescan.errors import LexError, PovError, UnmappedReference
from shadescan.fingerprint import QualifiedClassName
from shadescan.javalex import KEYWORD, qualified_chains, significant, tokenize
from shadescan.pov.project import PovProject

_DEPENDENCY = re.compile(r"<dependency\s*>(.*?)</dependency\s*>", re.DOTALL)


def _element(name: str) -> re.Pattern:
    return re.compile(rf"(<{name}\s*>)(.*?)(</{name}\s*>)", re.DOTALL)


_GROUP, _ARTIFACT, _VERSION = _element("groupId"), _element("artifactId"), _element("version")


@dataclass
class PovInstance:
    source_pov: PovProject
    target: Gav
    workspace: Path
    rewritten_imports: int = 0
    rewritten_references: int = 0


def rewrite_pom_text(text: str, original: Gav, candidate: Gav) -> tuple[str, int]:
    """Point dependencies on ``original`` (matched by group and artifact) at ``candidate``."""
    changed = 0

    def fix(match: re.Match) -> str:
        nonlocal changed
        body = match.group(1)
        g, a = _GROUP.search(body), _ARTIFACT.search(body)
        if not g or not a:
            return match.group(0)
        if (g.group(2).strip(), a.group(2).strip()) != (original.group, original.artifact):
            return match.group(0)
        body = _GROUP.sub(lambda m: m.group(1) + candidate.group + m.group(3), body, count=1)
        body = _ARTIFACT.sub(lambda m: m.group(1) + candidate.artifact + m.group(3), body, count=1)
        if _VERSION.search(body):
            body = _VERSION.sub(lambda m: m.group(1) + candidate.version + m.group(3), body, count=1)
        else:
            body = _ARTIFACT.sub(
                lambda m: m.group(0) + f"<version>{candidate.version}</version>", body, count=1
            )
        changed += 1
        start, end = match.span(1)
        return match.group(0)[: start - match.start()] + body + match.group(0)[end - match.start() :]

    return _DEPENDENCY.sub(fix, text), changed


def _pom_targets(text: str, gav: Gav) -> bool:
    for match in _DEPENDENCY.finditer(text):
        g, a = _GROUP.search(match.group(1)), _ARTIFACT.search(match.group(1))
        if g and a and (g.group(2).strip(), a.group(2).strip()) == (gav.group, gav.artifact):
            return True
    return False


def rewrite_java_source(
    text: str,
    relocation: RelocationMap,
    original_classes: Iterable[QualifiedClassName] | None = None,
    path: str = "<source>",
) -> tuple[str, int, int]:
    """Rewrite relocated class references; returns (text, imports changed, other references changed)."""
    try:
        tokens = significant(tokenize(text))
    except LexError as exc:
        raise PovError(f"{path}: {exc}") from exc
    entries = relocation.entries
    packages = relocation.packages()
    if original_classes is None:
        known = set(entries)
        guarded_packages = set(packages)
    else:
        known = set(original_classes) | set(entries)
        guarded_packages = {c.package for c in known}

    in_import = set()
    depth = 0
    for idx, tok in enumerate(tokens):
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1
        elif depth == 0 and tok.kind == KEYWORD and tok.text == "import":
            j = idx
            while j < len(tokens) and tokens[j].text != ";":
                in_import.add(j)
                j += 1

    edits: list[tuple[int, int, str, bool]] = []
    for i, j in qualified_chains(tokens):
        segs = [tokens[k].text for k in range(i, j, 2)]
        importing = i in in_import
        replaced = False
        for m in range(len(segs), 1, -1):
            qcn = QualifiedClassName(".".join(segs[: m - 1]), segs[m - 1])
            if qcn in entries:
                new = entries[qcn]
                if new != qcn:
                    edits.append((tokens[i].start, tokens[i + 2 * (m - 1)].end, str(new), importing))
                replaced = True
                break
            if qcn in known or (qcn.package in guarded_packages and segs[m - 1][:1].isupper()):
                raise UnmappedReference(str(qcn), path)
        if replaced:
            continue
        # wildcard package import: import a.b.*;
        if importing and j < len(tokens) - 1 and tokens[j].text == "." and tokens[j + 1].text == "*":
            pkg = ".".join(segs)
            if pkg in packages and packages[pkg] != pkg:
                edits.append((tokens[i].start, tokens[j - 1].end, packages[pkg], True))

    imports = sum(1 for e in edits if e[3])
    for start, end, new, _ in sorted(edits, reverse=True):
        text = text[:start] + new + text[end:]
    return text, imports, len(edits) - imports


def rewrite_workspace(
    workspace: str | Path,
    original: Gav,
    candidate: Gav,
    relocation: RelocationMap,
    original_classes: Iterable[QualifiedClassName] | None = None,
) -> tuple[int, int]:
    """Apply the pom and source rewrites in place; returns (imports, references) changed."""
    workspace = Path(workspace)
    pom_path = workspace / "pom.xml"
    pom_text = pom_path.read_text(encoding="utf-8")
    new_pom, changed = rewrite_pom_text(pom_text, original, candidate)
    if not changed and not _pom_targets(pom_text, candidate):
        raise PovError(f"{pom_path} has no dependency on {original.ga}")
    if new_pom != pom_text:
        pom_path.write_text(new_pom, encoding="utf-8")

    classes = list(original_classes) if original_classes is not None else None
    imports = refs = 0
    for src in sorted(workspace.rglob("*.java")):
        if "target" in src.relative_to(workspace).parts:
            continue
        text = src.read_text(encoding="utf-8")
        new, n_imports, n_refs = rewrite_java_source(text, relocation, classes, str(src.relative_to(workspace)))
        if new != text:
            src.write_text(new, encoding="utf-8")
        imports += n_imports
        refs += n_refs
    return imports, refs


def instantiate(
    pov: PovProject,
    candidate: Gav,
    relocation: RelocationMap,
    workspace: str | Path | None = None,
    original_classes: Iterable[QualifiedClassName] | None = None,
) -> PovInstance:
    if workspace is None:
        workspace = Path(tempfile.mkdtemp(prefix=f"pov-{candidate.artifact}-"))
    workspace = Path(workspace)
    shutil.copytree(pov.root_dir, workspace, dirs_exist_ok=True, ignore=shutil.ignore_patterns("target"))
    imports, refs = rewrite_workspace(workspace, pov.original, candidate, relocation, original_classes)
    return PovInstance(pov, candidate, workspace, imports, refs)
