"""Pick the class names used to query the registry for clone candidates.

Unqualified class names survive package relocation, so they make a cheap
fingerprint. Names with many camel-case tokens are more likely to be unique
than short ones like ``Utils``.
"""

from __future__ import annotations

import io
import posixpath
import zipfile
from collections.abc import Iterable
from dataclasses import dataclass

from shadescan.errors import CorruptArchive
from shadescan.registry.model import RegistryBlob

DEFAULT_QUERY_CLASSES = 10

_EXCLUDED = {"package-info", "module-info"}
_VERSIONED_PREFIX = "META-INF/versions/"


@dataclass(frozen=True, order=True)
class QualifiedClassName:
    package: str
    simple_name: str

    def __post_init__(self) -> None:
        if not self.simple_name or any(c in self.simple_name for c in "./$"):
            raise ValueError(f"bad simple name {self.simple_name!r}")

    def __str__(self) -> str:
        return f"{self.package}.{self.simple_name}" if self.package else self.simple_name

    @classmethod
    def parse(cls, dotted: str) -> QualifiedClassName:
        package, _, simple = dotted.rpartition(".")
        return cls(package, simple)


@dataclass(frozen=True)
class ClassNameScore:
    name: str
    token_count: int


def class_name_from_member(member: str, suffix: str) -> QualifiedClassName | None:
    """Map an archive member path to its top-level class, or None if it is not one."""
    if not member.endswith(suffix):
        return None
    if member.startswith(_VERSIONED_PREFIX):
        # META-INF/versions/<n>/com/ex/Foo.class
        parts = member.split("/", 3)
        if len(parts) < 4:
            return None
        member = parts[3]
    directory, base = posixpath.split(member[: -len(suffix)])
    simple = base.split("$", 1)[0]
    if not simple or simple in _EXCLUDED or "-" in simple:
        return None
    if directory.startswith("META-INF"):
        return None
    return QualifiedClassName(directory.replace("/", "."), simple)


def list_class_names(archive: RegistryBlob) -> set[QualifiedClassName]:
    suffix = ".java" if archive.kind.value == "sources-archive" else ".class"
    try:
        with zipfile.ZipFile(io.BytesIO(archive.data)) as zf:
            members = zf.namelist()
    except (zipfile.BadZipFile, EOFError, ValueError) as exc:
        raise CorruptArchive(f"{archive.gav}: {exc}") from exc
    names = set()
    for member in members:
        qcn = class_name_from_member(member, suffix)
        if qcn is not None:
            names.add(qcn)
    return names


def _char_class(ch: str) -> str:
    if ch == "_" or ch == "$":
        return "sep"
    if ch.isdigit():
        return "digit"
    if ch.isupper():
        return "upper"
    return "lower"


def camel_token_count(name: str) -> int:
    """Count camel-case tokens in ``name``.

    ``JSONDriverManagerFactory`` has 4 (an acronym run is one token),
    ``Utils`` has 1. A digit run is its own token and underscores separate
    tokens without counting as one.
    """
    count = 0
    prev = "sep"
    for i, ch in enumerate(name):
        cls = _char_class(ch)
        if cls == "sep":
            prev = cls
            continue
        if prev == "sep":
            starts = True
        elif cls == "digit" or prev == "digit":
            starts = cls != prev
        elif cls == "upper":
            if prev == "lower":
                starts = True
            else:
                nxt = name[i + 1] if i + 1 < len(name) else ""
                starts = bool(nxt) and _char_class(nxt) == "lower"
        else:
            starts = False
        count += starts
        prev = cls
    return count


def score(name: str) -> ClassNameScore:
    return ClassNameScore(name, camel_token_count(name))


def rank_key(name: str) -> tuple[int, int, str]:
    return (-camel_token_count(name), -len(name), name)


def select_query_classes(names: Iterable[QualifiedClassName | str], k: int = DEFAULT_QUERY_CLASSES) -> list[str]:
    """Return the ``k`` simple names most likely to be unique, best first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    simple = {n.simple_name if isinstance(n, QualifiedClassName) else n for n in names}
    return sorted(simple, key=rank_key)[:k]
