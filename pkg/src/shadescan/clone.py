"""Type-2 clone detection between an original artifact's sources and a candidate's.

Each compilation unit is reduced to a token stream with comments and
whitespace dropped, package and import declarations set aside, and every
qualified type reference cut down to its simple name. Two classes are
clones when their streams are identical, which is what a simultaneous
traversal of two syntax trees would conclude under the same two
normalizations. Identifiers other than type scopes are compared verbatim.
"""

from __future__ import annotations

import io
import logging
import posixpath
import zipfile
from collections import Counter, defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, field

from shadescan.coords import Gav
from shadescan.errors import CorruptArchive, LexError
from shadescan.fingerprint import QualifiedClassName
from shadescan.javalex import IDENT, KEYWORD, significant, tokenize, qualified_chains
from shadescan.registry.model import RegistryBlob

log = logging.getLogger(__name__)

DEFAULT_CLONE_THRESHOLD = 2

OTHER_JVM_SOURCES = (".kt", ".kts", ".scala", ".groovy", ".clj")

_TYPE_DECL_KEYWORDS = {"class", "interface", "enum"}


@dataclass(frozen=True)
class NormalizedUnit:
    origin_path: str
    package_decl: str
    declared_types: tuple[str, ...]
    token_stream: tuple[tuple[str, str], ...] = field(repr=False)
    imports: tuple[str, ...] = field(default=(), repr=False)

    @property
    def simple_name(self) -> str:
        stem = posixpath.splitext(posixpath.basename(self.origin_path))[0]
        if stem in self.declared_types or not self.declared_types:
            return stem
        return self.declared_types[0]

    @property
    def qualified_name(self) -> QualifiedClassName:
        return QualifiedClassName(self.package_decl, self.simple_name)


def _is_package_segment(text: str) -> bool:
    return text[:1].islower() or text[:1] == "_"


def _erase_type_scopes(tokens: list) -> list:
    """Drop lower-case package prefixes from ``a.b.Type`` chains."""
    drop: set[int] = set()
    for i, j in qualified_chains(tokens):
        idents = list(range(i, j, 2))
        for pos, k in enumerate(idents):
            if not _is_package_segment(tokens[k].text):
                if pos > 0:
                    drop.update(range(i, k))
                break
    return [t for n, t in enumerate(tokens) if n not in drop]


def _dotted(tokens) -> str:
    return "".join(t.text for t in tokens)


def normalize(source_text: str, origin_path: str = "<unknown>") -> NormalizedUnit:
    tokens = significant(tokenize(source_text))
    package = ""
    imports = []
    body = []
    depth = 0
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if depth == 0 and tok.kind == KEYWORD and tok.text in ("package", "import"):
            j = i + 1
            while j < n and tokens[j].text != ";":
                j += 1
            if tok.text == "package":
                package = _dotted(tokens[i + 1 : j])
            else:
                imports.append(_dotted(tokens[i + 1 : j]))
            i = j + 1
            continue
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1
        body.append(tok)
        i += 1

    declared = []
    depth = 0
    for k, tok in enumerate(body):
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1
        elif depth == 0 and k + 1 < len(body) and body[k + 1].kind == IDENT:
            is_decl = tok.kind == KEYWORD and tok.text in _TYPE_DECL_KEYWORDS
            is_record = (
                tok.kind == IDENT
                and tok.text == "record"
                and k + 2 < len(body)
                and body[k + 2].text in ("(", "<")
            )
            if (is_decl or is_record) and not (k > 0 and body[k - 1].text == "."):
                declared.append(body[k + 1].text)

    stream = tuple((t.kind, t.text) for t in _erase_type_scopes(body))
    return NormalizedUnit(origin_path, package, tuple(declared), stream, tuple(imports))


def render(unit: NormalizedUnit) -> str:
    """Space-separated rendering of a unit's token stream."""
    return " ".join(text for _, text in unit.token_stream)


@dataclass(frozen=True)
class ClassCloneVerdict:
    original: QualifiedClassName
    candidate: QualifiedClassName
    is_clone: bool
    mismatch_position: int | None = None

    def __post_init__(self) -> None:
        if self.is_clone and self.mismatch_position is not None:
            raise ValueError("a clone has no mismatch position")


def first_mismatch(a, b) -> int | None:
    for idx, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return idx
    if len(a) != len(b):
        return min(len(a), len(b))
    return None


def compare_units(a: NormalizedUnit, b: NormalizedUnit) -> ClassCloneVerdict:
    if a.simple_name != b.simple_name:
        raise ValueError(f"cannot compare {a.simple_name} with {b.simple_name}")
    pos = first_mismatch(a.token_stream, b.token_stream)
    return ClassCloneVerdict(a.qualified_name, b.qualified_name, pos is None, pos)


@dataclass
class RelocationMap:
    entries: dict[QualifiedClassName, QualifiedClassName] = field(default_factory=dict)

    def __post_init__(self) -> None:
        targets = list(self.entries.values())
        if len(set(targets)) != len(targets):
            raise ValueError("relocation map is not injective")
        for src, dst in self.entries.items():
            if src.simple_name != dst.simple_name:
                raise ValueError(f"relocation {src} -> {dst} changes the simple name")

    @classmethod
    def identity(cls, classes: Iterable[QualifiedClassName] = ()) -> RelocationMap:
        return cls({c: c for c in classes})

    @property
    def is_identity(self) -> bool:
        return all(src == dst for src, dst in self.entries.items())

    def packages(self) -> dict[str, str]:
        """Original package -> most common target package."""
        votes: dict[str, Counter] = defaultdict(Counter)
        for src, dst in self.entries.items():
            votes[src.package][dst.package] += 1
        return {pkg: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[0][0] for pkg, c in votes.items()}

    def to_dict(self) -> dict[str, str]:
        return {str(k): str(v) for k, v in sorted(self.entries.items())}

    @classmethod
    def from_dict(cls, data: dict[str, str]) -> RelocationMap:
        return cls({QualifiedClassName.parse(k): QualifiedClassName.parse(v) for k, v in data.items()})


def prefix_rewrite(original_package: str, candidate_package: str) -> tuple[str, str]:
    """The package-prefix substitution that turns one package into the other.

    ``prefix_rewrite("org.json", "shaded.org.json") == ("", "shaded")``
    """
    a = original_package.split(".") if original_package else []
    b = candidate_package.split(".") if candidate_package else []
    common = 0
    while common < min(len(a), len(b)) and a[-1 - common] == b[-1 - common]:
        common += 1
    return ".".join(a[: len(a) - common]), ".".join(b[: len(b) - common])


@dataclass
class ArtifactCloneReport:
    original: Gav | None
    candidate: Gav | None
    matched_query_classes: int
    cloned_classes: int
    relocation: RelocationMap
    verdict: bool
    class_verdicts: list[ClassCloneVerdict] = field(default_factory=list, repr=False)

    @property
    def is_shaded(self) -> bool:
        return any(src.package != dst.package for src, dst in self.relocation.entries.items())

    def to_dict(self) -> dict:
        return {
            "original": str(self.original) if self.original else None,
            "candidate": str(self.candidate) if self.candidate else None,
            "matched_query_classes": self.matched_query_classes,
            "cloned_classes": self.cloned_classes,
            "is_shaded": self.is_shaded,
            "verdict": self.verdict,
            "relocation": self.relocation.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ArtifactCloneReport:
        return cls(
            original=Gav.parse(data["original"]) if data.get("original") else None,
            candidate=Gav.parse(data["candidate"]) if data.get("candidate") else None,
            matched_query_classes=data["matched_query_classes"],
            cloned_classes=data["cloned_classes"],
            relocation=RelocationMap.from_dict(data["relocation"]),
            verdict=data["verdict"],
        )


def detect_artifact_clone(
    original_sources: Iterable[NormalizedUnit],
    candidate_sources: Iterable[NormalizedUnit],
    query_classes: Iterable[str],
    *,
    original: Gav | None = None,
    candidate: Gav | None = None,
    threshold: int = DEFAULT_CLONE_THRESHOLD,
) -> ArtifactCloneReport:
    """Compare two source sets class by class and decide whether the candidate is a clone.

    The candidate is a clone when every query class it contains is cloned
    and at least ``threshold`` classes are cloned overall. When a simple
    name is cloned under several candidate packages, the pairing agreeing
    with the most common package-prefix rewrite wins.
    """
    by_name: dict[str, list[NormalizedUnit]] = defaultdict(list)
    for unit in candidate_sources:
        by_name[unit.simple_name].append(unit)
    originals = sorted(original_sources, key=lambda u: (u.simple_name, u.package_decl, u.origin_path))

    verdicts: list[ClassCloneVerdict] = []
    positives: dict[QualifiedClassName, list[QualifiedClassName]] = {}
    for unit in originals:
        matches = []
        for cand in sorted(by_name.get(unit.simple_name, ()), key=lambda u: (u.package_decl, u.origin_path)):
            verdict = compare_units(unit, cand)
            verdicts.append(verdict)
            if verdict.is_clone and cand.qualified_name not in matches:
                matches.append(cand.qualified_name)
        if matches:
            positives.setdefault(unit.qualified_name, [])
            for m in matches:
                if m not in positives[unit.qualified_name]:
                    positives[unit.qualified_name].append(m)

    votes = Counter()
    unambiguous = [(src, dsts[0]) for src, dsts in positives.items() if len(dsts) == 1]
    for src, dst in unambiguous or [(s, d) for s, ds in positives.items() for d in ds]:
        votes[prefix_rewrite(src.package, dst.package)] += 1
    ranked = [rw for rw, _ in sorted(votes.items(), key=lambda kv: (-kv[1], kv[0]))]

    def preference(src: QualifiedClassName, dst: QualifiedClassName):
        rw = prefix_rewrite(src.package, dst.package)
        return (ranked.index(rw) if rw in ranked else len(ranked), dst.package)

    entries: dict[QualifiedClassName, QualifiedClassName] = {}
    taken: set[QualifiedClassName] = set()
    for src in sorted(positives, key=lambda s: (len(positives[s]), s)):
        for dst in sorted(positives[src], key=lambda d: preference(src, d)):
            if dst not in taken:
                entries[src] = dst
                taken.add(dst)
                break
    relocation = RelocationMap(entries)

    cloned_names = {src.simple_name for src in entries}
    original_names = {u.simple_name for u in originals}
    present = [q for q in dict.fromkeys(query_classes) if q in by_name and q in original_names]
    verdict = (
        len(entries) >= threshold
        and all(q in cloned_names for q in present)
    )
    return ArtifactCloneReport(
        original=original,
        candidate=candidate,
        matched_query_classes=len(present),
        cloned_classes=len(entries),
        relocation=relocation,
        verdict=verdict,
        class_verdicts=verdicts,
    )


@dataclass
class SourceLoadStats:
    units: int = 0
    lex_errors: int = 0
    skipped_other_language: int = 0


def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def load_units(archive: RegistryBlob | bytes, stats: SourceLoadStats | None = None) -> list[NormalizedUnit]:
    """Normalize every ``.java`` member of a sources archive.

    Units that fail to lex and sources in other JVM languages are skipped
    and counted in ``stats``.
    """
    data = archive.data if isinstance(archive, RegistryBlob) else archive
    stats = stats if stats is not None else SourceLoadStats()
    units = []
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except (zipfile.BadZipFile, EOFError, ValueError) as exc:
        raise CorruptArchive(str(exc)) from exc
    with zf:
        for name in sorted(zf.namelist()):
            if name.endswith(OTHER_JVM_SOURCES):
                stats.skipped_other_language += 1
                continue
            base = posixpath.basename(name)
            if not name.endswith(".java") or base in ("package-info.java", "module-info.java"):
                continue
            try:
                text = _decode(zf.read(name))
            except (zipfile.BadZipFile, EOFError, ValueError) as exc:
                raise CorruptArchive(f"{name}: {exc}") from exc
            try:
                units.append(normalize(text, name))
            except LexError as exc:
                stats.lex_errors += 1
                log.info("skipping %s: %s", name, exc)
    stats.units += len(units)
    return units
