"""Build descriptor analysis.

Two jobs: decide whether a clone candidate openly refers to the original
artifact (in which case ordinary dependency scanners already see it), and
count shade-plugin and relocation usage over a corpus of poms.
"""

from __future__ import annotations

import fnmatch
import logging
import xml.etree.ElementTree as ET
from collections.abc import Iterable
from dataclasses import dataclass, field

from shadescan.coords import Ga, Gav
from shadescan.errors import MalformedXml

log = logging.getLogger(__name__)

SHADE_PLUGIN = "maven-shade-plugin"
MAX_PARENT_DEPTH = 10

PATTERN_DEPENDENCY = "dependency-section"
PATTERN_SHADE = "shade-plugin-section"
PATTERN_SAME_GA = "same-ga"
PATTERN_NONE = "none"


def _local(tag) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _strip_namespaces(root: ET.Element) -> ET.Element:
    for el in root.iter():
        el.tag = _local(el.tag)
    return root


def _text(el: ET.Element | None, name: str) -> str | None:
    if el is None:
        return None
    child = el.find(name)
    if child is None or child.text is None:
        return None
    value = child.text.strip()
    return value or None


def parse_xml(data: bytes) -> ET.Element:
    try:
        return _strip_namespaces(ET.fromstring(data))
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc


@dataclass(frozen=True)
class DependencyRef:
    group: str | None
    artifact: str | None
    version: str | None = None
    scope: str | None = None
    optional: bool = False
    section: str = "dependencies"

    def matches(self, ga: Ga) -> bool:
        return _id_equals(self.group, ga.group) and _id_equals(self.artifact, ga.artifact)


def _id_equals(value: str | None, wanted: str) -> bool:
    if value is None:
        return False
    if "${" in value:
        log.info("unresolved property %s treated as non-matching", value)
        return False
    return value == wanted


@dataclass
class PomModel:
    group: str | None
    artifact: str
    version: str | None
    parent: Gav | None = None
    packaging: str = "jar"
    dependencies: list[DependencyRef] = field(default_factory=list)
    shade_plugin_present: bool = False
    shade_artifact_refs: list[str] = field(default_factory=list)
    relocations_present: bool = False

    @property
    def coordinates(self) -> Gav | None:
        try:
            return Gav(self.group or "", self.artifact, self.version or "")
        except ValueError:
            return None

    @property
    def ga(self) -> Ga | None:
        try:
            return Ga(self.group or "", self.artifact)
        except ValueError:
            return None


def _dependencies(container: ET.Element | None, section: str) -> list[DependencyRef]:
    if container is None:
        return []
    out = []
    for dep in container.findall("dependency"):
        out.append(
            DependencyRef(
                group=_text(dep, "groupId"),
                artifact=_text(dep, "artifactId"),
                version=_text(dep, "version"),
                scope=_text(dep, "scope"),
                optional=(_text(dep, "optional") or "").lower() == "true",
                section=section,
            )
        )
    return out


def _shade_plugins(root: ET.Element) -> list[ET.Element]:
    """Every ``plugin`` element whose direct ``artifactId`` child names the shade plugin."""
    found = []
    for plugin in root.iter("plugin"):
        for child in plugin:
            if child.tag == "artifactId" and child.text == SHADE_PLUGIN:
                found.append(plugin)
                break
    return found


def _shade_refs(plugin: ET.Element) -> list[str]:
    refs = []
    for artifact_set in plugin.iter("artifactSet"):
        for el in artifact_set.iter():
            if el.tag in ("include", "exclude") and el.text and el.text.strip():
                refs.append(el.text.strip())
    for el in plugin.iter("artifact"):
        if el.text and el.text.strip():
            refs.append(el.text.strip())
    for dep in plugin.iter("dependency"):
        g, a = _text(dep, "groupId"), _text(dep, "artifactId")
        if g and a:
            refs.append(f"{g}:{a}")
    return refs


def parse_pom(data: bytes) -> PomModel:
    root = parse_xml(data)
    if root.tag != "project":
        raise MalformedXml(f"root element is <{root.tag}>, expected <project>")
    parent_el = root.find("parent")
    parent = None
    if parent_el is not None:
        try:
            parent = Gav(
                _text(parent_el, "groupId") or "",
                _text(parent_el, "artifactId") or "",
                _text(parent_el, "version") or "",
            )
        except ValueError:
            log.info("ignoring incomplete parent element")
    artifact = _text(root, "artifactId")
    if artifact is None:
        raise MalformedXml("pom has no artifactId")
    group = _text(root, "groupId") or _text(parent_el, "groupId")
    version = _text(root, "version") or _text(parent_el, "version")

    deps = _dependencies(root.find("dependencies"), "dependencies")
    deps += _dependencies(root.find("dependencyManagement/dependencies"), "dependencyManagement")
    for profile in root.findall("profiles/profile"):
        deps += _dependencies(profile.find("dependencies"), "profile")

    plugins = _shade_plugins(root)
    refs: list[str] = []
    for plugin in plugins:
        refs.extend(_shade_refs(plugin))
    return PomModel(
        group=group,
        artifact=artifact,
        version=version,
        parent=parent,
        packaging=_text(root, "packaging") or "jar",
        dependencies=deps,
        shade_plugin_present=bool(plugins),
        shade_artifact_refs=refs,
        relocations_present=any(p.find(".//relocations") is not None for p in plugins),
    )


def shade_ref_matches(pattern: str, ga: Ga) -> bool:
    """Match a shade artifact pattern (``group:artifact[:type[:classifier]]``, globs allowed)."""
    parts = pattern.split(":")
    if "${" in pattern or not parts[0]:
        return False
    group_pat = parts[0]
    artifact_pat = parts[1] if len(parts) > 1 else "*"
    # bare wildcards name no particular artifact
    if set(group_pat) <= {"*"} and set(artifact_pat) <= {"*"}:
        return False
    return fnmatch.fnmatchcase(ga.group, group_pat) and fnmatch.fnmatchcase(ga.artifact, artifact_pat)


@dataclass(frozen=True)
class DependencyVerdict:
    candidate: Gav
    refers_to_original: bool
    matched_pattern: str = PATTERN_NONE
    via_parent: bool = False

    def __post_init__(self) -> None:
        if self.refers_to_original != (self.matched_pattern != PATTERN_NONE):
            raise ValueError("refers_to_original must agree with matched_pattern")


def references_original(chain: list[PomModel], original: Ga, candidate: Gav | None = None) -> DependencyVerdict:
    """Check a candidate pom and its parents for references to ``original``.

    ``chain[0]`` is the candidate's own pom, followed by its parents up to
    the root.
    """
    if not chain:
        raise ValueError("pom chain is empty")
    own = chain[0]
    if candidate is None:
        candidate = own.coordinates
        if candidate is None:
            raise ValueError("candidate coordinates unknown; pass candidate explicitly")
    if own.ga == original:
        return DependencyVerdict(candidate, True, PATTERN_SAME_GA)
    for depth, pom in enumerate(chain):
        if any(dep.matches(original) for dep in pom.dependencies):
            return DependencyVerdict(candidate, True, PATTERN_DEPENDENCY, depth > 0)
        if any(shade_ref_matches(ref, original) for ref in pom.shade_artifact_refs):
            return DependencyVerdict(candidate, True, PATTERN_SHADE, depth > 0)
    return DependencyVerdict(candidate, False)


@dataclass(frozen=True)
class PrevalenceRecord:
    pom_count: int = 0
    shade_plugin_count: int = 0
    relocation_count: int = 0

    def __add__(self, other: PrevalenceRecord) -> PrevalenceRecord:
        return PrevalenceRecord(
            self.pom_count + other.pom_count,
            self.shade_plugin_count + other.shade_plugin_count,
            self.relocation_count + other.relocation_count,
        )

    @property
    def shade_ratio(self) -> float:
        return self.shade_plugin_count / self.pom_count if self.pom_count else 0.0

    @property
    def relocation_ratio(self) -> float:
        return self.relocation_count / self.pom_count if self.pom_count else 0.0


def classify_pom(data: bytes) -> tuple[bool, bool]:
    """(uses shade plugin, shade plugin declares relocations) for one pom."""
    root = parse_xml(data)
    plugins = _shade_plugins(root)
    relocated = any(next(p.iter("relocations"), None) is not None for p in plugins)
    return bool(plugins), relocated


def prevalence_scan(corpus: Iterable[bytes], matches: list | None = None) -> PrevalenceRecord:
    """Count poms using the shade plugin, and those among them relocating packages.

    When ``matches`` is given, ``(index, shaded, relocated)`` is appended for
    every pom that parsed.
    """
    total = shaded = relocated = 0
    for index, data in enumerate(corpus):
        total += 1
        try:
            uses_shade, uses_reloc = classify_pom(data)
        except MalformedXml as exc:
            log.warning("pom #%d is malformed: %s", index, exc)
            continue
        shaded += uses_shade
        relocated += uses_reloc
        if matches is not None:
            matches.append((index, uses_shade, uses_reloc))
    return PrevalenceRecord(total, shaded, relocated)


def resolve_chain(own: PomModel, fetch_parent, max_depth: int = MAX_PARENT_DEPTH) -> list[PomModel]:
    """Follow parent references via ``fetch_parent(gav) -> PomModel | None``.

    The walk stops at the root, on a fetch failure, on a cycle, or after
    ``max_depth`` parents.
    """
    chain = [own]
    seen = {own.coordinates}
    current = own
    while current.parent is not None and len(chain) <= max_depth:
        if current.parent in seen:
            log.warning("parent cycle at %s", current.parent)
            break
        parent = fetch_parent(current.parent)
        if parent is None:
            break
        seen.add(current.parent)
        chain.append(parent)
        current = parent
    return chain
