"""Read (and, for test doubles, write) surefire XML test reports."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import quoteattr

from shadescan.errors import MalformedReport

SUCCESS = "success"
FAILURE = "failure"
ERROR = "error"
SKIP = "skip"
STATES = (SUCCESS, FAILURE, ERROR, SKIP)

_CHILD_STATES = {"failure": FAILURE, "error": ERROR, "skipped": SKIP}


def normalize_test_id(classname: str, name: str) -> str:
    # junit5 may report "test()" or "test(String)[1]"
    for stop in ("(", "["):
        if stop in name:
            name = name[: name.index(stop)]
    return f"{classname}#{name.strip()}" if classname else name.strip()


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    test_id: str
    state: str
    message: str | None = None

    def __post_init__(self) -> None:
        if self.state not in STATES:
            raise ValueError(f"unknown test state {self.state!r}")


def _outcome(case: ET.Element) -> TestOutcome:
    test_id = normalize_test_id(case.get("classname", ""), case.get("name", ""))
    for child in case:
        state = _CHILD_STATES.get(child.tag)
        if state is not None:
            return TestOutcome(test_id, state, child.get("message") or (child.text or "").strip() or None)
    return TestOutcome(test_id, SUCCESS)


def parse_report(data: bytes) -> list[TestOutcome]:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedReport(str(exc)) from exc
    if root.tag == "testsuite":
        suites = [root]
    elif root.tag == "testsuites":
        suites = root.findall("testsuite")
    else:
        raise MalformedReport(f"unexpected root element <{root.tag}>")
    return [_outcome(case) for suite in suites for case in suite.iter("testcase")]


def parse_surefire(bundle: Iterable[bytes | str | Path]) -> list[TestOutcome]:
    outcomes = []
    for item in bundle:
        data = item if isinstance(item, bytes) else Path(item).read_bytes()
        outcomes.extend(parse_report(data))
    return outcomes


def render_surefire(results: Mapping[str, str], suite_name: str = "pov") -> bytes:
    """Write a single-suite report for ``{"pkg.Class#method": state}``."""
    cases = []
    counts = dict.fromkeys(STATES, 0)
    for test_id, state in results.items():
        if state not in STATES:
            raise ValueError(f"unknown test state {state!r}")
        counts[state] += 1
        classname, _, name = test_id.rpartition("#")
        attrs = f"name={quoteattr(name)} classname={quoteattr(classname)} time=\"0.001\""
        if state == SUCCESS:
            cases.append(f"  <testcase {attrs}/>")
        else:
            tag = {FAILURE: "failure", ERROR: "error", SKIP: "skipped"}[state]
            cases.append(f"  <testcase {attrs}>\n    <{tag} message=\"{state}\"/>\n  </testcase>")
    header = (
        f'<testsuite name={quoteattr(suite_name)} tests="{len(results)}" '
        f'failures="{counts[FAILURE]}" errors="{counts[ERROR]}" skipped="{counts[SKIP]}">'
    )
    body = "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>', header, *cases, "</testsuite>", ""
    ])
    return body.encode("utf-8")
