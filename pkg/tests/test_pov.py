import json
import os
import stat
import textwrap

import pytest

import corpus
from shadescan.coords import Gav
from shadescan.errors import (
    MalformedReport,
    MissingMetadata,
    PovError,
    RunnerCrash,
    SignalForUnknownTest,
    UnmappedReference,
)
from shadescan.clone import RelocationMap
from shadescan.fingerprint import QualifiedClassName
from shadescan.pov import instantiate, load_pov, verify
from shadescan.pov.instantiate import rewrite_java_source, rewrite_pom_text
from shadescan.pov.runner import COMPILE, TEST, MavenRunner, StubRunner, run_build
from shadescan.pov.surefire import (
    ERROR,
    FAILURE,
    SKIP,
    SUCCESS,
    TestOutcome,
    normalize_test_id,
    parse_report,
    parse_surefire,
    render_surefire,
)
from shadescan.pov.verify import evaluate_outcomes
from shadescan.registry import ResponseCache

TEST_ID = corpus.POV_TEST_ID
SHADED = Gav("com.vendor", "toolkit", "2.1")
LIB_CLASSES = [QualifiedClassName(corpus.LIB_PACKAGE, c) for c in corpus.CLASS_NAMES]


def shaded_map(package="com.vendor.shaded.jsonlite", classes=LIB_CLASSES):
    return RelocationMap({c: QualifiedClassName(package, c.simple_name) for c in classes})


@pytest.fixture
def pov(tmp_path):
    return load_pov(corpus.write_pov(tmp_path / "pov"))


def outcome(state, test_id=TEST_ID):
    return TestOutcome(test_id, state)


# loading


def test_load_pov(pov):
    assert pov.cve_id == corpus.CVE
    assert pov.original == corpus.ORIGINAL
    assert pov.expected_signals == {TEST_ID: SUCCESS}
    assert pov.payload_files == [f"src/test/resources/{corpus.CVE}.json"]


def _edit_meta(root, **changes):
    meta = json.loads((root / "pov.json").read_text())
    meta.update(changes)
    for key, value in list(meta.items()):
        if value is None:
            del meta[key]
    (root / "pov.json").write_text(json.dumps(meta))


@pytest.mark.parametrize(
    "changes, error",
    [
        ({"cve_id": None}, MissingMetadata),
        ({"schema_version": 2}, MissingMetadata),
        ({"expected_signals": {}}, MissingMetadata),
        ({"expected_signals": {TEST_ID: "skip"}}, PovError),
        ({"expected_signals": {TEST_ID + "Typo": "success"}}, SignalForUnknownTest),
        ({"expected_signals": {"org.example.pov.Missing#x": "success"}}, SignalForUnknownTest),
        ({"skippable": {"a.B#c": "flag"}}, SignalForUnknownTest),
        ({"original": "org.other:lib:1"}, PovError),
    ],
)
def test_load_errors(tmp_path, changes, error):
    root = corpus.write_pov(tmp_path / "pov")
    _edit_meta(root, **changes)
    with pytest.raises(error):
        load_pov(root)


def test_missing_metadata_file(tmp_path):
    root = corpus.write_pov(tmp_path / "pov")
    (root / "pov.json").unlink()
    with pytest.raises(MissingMetadata):
        load_pov(root)


# rewriting


def test_identity_instantiation_is_byte_identical(pov, tmp_path):
    inst = instantiate(pov, corpus.ORIGINAL, RelocationMap.identity(LIB_CLASSES), tmp_path / "ws", LIB_CLASSES)
    for src in pov.root_dir.rglob("*"):
        if src.is_file():
            assert (inst.workspace / src.relative_to(pov.root_dir)).read_bytes() == src.read_bytes()
    assert inst.rewritten_imports == inst.rewritten_references == 0


def test_relocated_instantiation(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    text = (inst.workspace / "src/test/java/org/example/pov/DeepNestingPovTest.java").read_text()
    assert "org.acme.jsonlite" not in text
    assert "import com.vendor.shaded.jsonlite.JsonTokenStreamReader;" in text
    assert "com.vendor.shaded.jsonlite.JsonParseException.class" in text
    assert inst.rewritten_imports == 2 and inst.rewritten_references == 1
    pom = (inst.workspace / "pom.xml").read_text()
    assert "<groupId>com.vendor</groupId>" in pom and "<artifactId>toolkit</artifactId>" in pom
    assert "<version>2.1</version>" in pom and "jsonlite" not in pom
    # the source POV is untouched
    assert "org.acme.jsonlite" in (pov.root_dir / "src/test/java/org/example/pov/DeepNestingPovTest.java").read_text()


def test_instantiation_is_idempotent(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    before = {p: p.read_bytes() for p in inst.workspace.rglob("*") if p.is_file()}
    from shadescan.pov.instantiate import rewrite_workspace

    assert rewrite_workspace(inst.workspace, pov.original, SHADED, shaded_map(), LIB_CLASSES) == (0, 0)
    assert {p: p.read_bytes() for p in inst.workspace.rglob("*") if p.is_file()} == before


def test_unmapped_reference(pov, tmp_path):
    partial = shaded_map(classes=[c for c in LIB_CLASSES if c.simple_name != "JsonParseException"])
    with pytest.raises(UnmappedReference) as err:
        instantiate(pov, SHADED, partial, tmp_path / "ws", LIB_CLASSES)
    assert err.value.reference == "org.acme.jsonlite.JsonParseException"


def test_rewrite_handles_static_and_wildcard_imports():
    src = textwrap.dedent("""\
        import static org.acme.jsonlite.Utils.quote;
        import org.acme.jsonlite.*;
        import java.util.List;
        class T { String s = "org.acme.jsonlite.Utils"; org.acme.jsonlite.JsonArray a; }
        """)
    out, imports, refs = rewrite_java_source(src, shaded_map("x.y"))
    assert "import static x.y.Utils.quote;" in out
    assert "import x.y.*;" in out
    assert '"org.acme.jsonlite.Utils"' in out  # string literals are left alone
    assert "x.y.JsonArray a;" in out
    assert (imports, refs) == (2, 1)


def test_rewrite_pom_inserts_missing_version():
    pom = "<project><dependencies><dependency><groupId>org.acme</groupId><artifactId>jsonlite</artifactId></dependency></dependencies></project>"
    out, changed = rewrite_pom_text(pom, corpus.ORIGINAL, SHADED)
    assert changed == 1
    assert "<artifactId>toolkit</artifactId><version>2.1</version>" in out


def test_pom_without_dependency_rejected(pov, tmp_path):
    (pov.root_dir / "pom.xml").write_text(corpus.pom_xml(Gav("a", "b", "1")))
    with pytest.raises(PovError):
        instantiate(pov, SHADED, shaded_map(), tmp_path / "ws")


# surefire


def test_parse_report_states():
    xml = b"""<testsuite name="s">
      <testcase classname="a.B" name="ok"/>
      <testcase classname="a.B" name="bad"><failure message="boom"/></testcase>
      <testcase classname="a.B" name="err"><error>trace</error></testcase>
      <testcase classname="a.B" name="off"><skipped/></testcase>
      <testcase classname="a.B" name="param(String)[1]"/>
    </testsuite>"""
    got = [(o.test_id, o.state, o.message) for o in parse_report(xml)]
    assert got == [
        ("a.B#ok", SUCCESS, None),
        ("a.B#bad", FAILURE, "boom"),
        ("a.B#err", ERROR, "trace"),
        ("a.B#off", SKIP, None),
        ("a.B#param", SUCCESS, None),
    ]


def test_parse_testsuites_wrapper_and_files(tmp_path):
    path = tmp_path / "TEST-x.xml"
    path.write_bytes(render_surefire({"a.B#c": FAILURE}))
    wrapped = b"<testsuites>" + render_surefire({"a.B#d": SUCCESS}).split(b"?>", 1)[1] + b"</testsuites>"
    assert [o.state for o in parse_surefire([path, wrapped])] == [FAILURE, SUCCESS]


@pytest.mark.parametrize("data", [b"<testsuite", b"<html/>"])
def test_malformed_reports(data):
    with pytest.raises(MalformedReport):
        parse_report(data)


def test_normalize_test_id():
    assert normalize_test_id("a.B", "c()") == "a.B#c"
    assert normalize_test_id("", "c") == "c"


def test_render_parse_round_trip():
    results = {"a.B#s": SUCCESS, "a.B#f": FAILURE, "a.B#e": ERROR, "a.B#k": SKIP}
    assert {o.test_id: o.state for o in parse_report(render_surefire(results))} == results


# decision table


# (expected signals, observed states, skippable, environment, confirmed)
DECISIONS = [
    ("exploit-success/success", {TEST_ID: SUCCESS}, [SUCCESS], None, None, True),
    ("exploit-success/failure", {TEST_ID: SUCCESS}, [FAILURE], None, None, False),
    ("exploit-success/skip", {TEST_ID: SUCCESS}, [SKIP], None, None, False),
    ("exploit-success/error", {TEST_ID: SUCCESS}, [ERROR], None, None, False),
    ("regression-failure/failure", {TEST_ID: FAILURE}, [FAILURE], None, None, True),
    ("regression-failure/success", {TEST_ID: FAILURE}, [SUCCESS], None, None, False),
    ("regression-failure/error", {TEST_ID: FAILURE}, [ERROR], None, None, False),
    ("skip-allowed-when-assumption-unmet", {TEST_ID: SUCCESS, "a.B#c": SUCCESS}, [SKIP, SUCCESS],
     {TEST_ID: "posix"}, {"posix": False}, True),
    ("skip-rejected-when-assumption-met", {TEST_ID: SUCCESS}, [SKIP], {TEST_ID: "posix"}, {"posix": True}, False),
    ("only-skips-never-confirm", {TEST_ID: SUCCESS}, [SKIP], {TEST_ID: "posix"}, {"posix": False}, False),
    ("missing-expected-test", {TEST_ID: SUCCESS, "a.B#c": SUCCESS}, [SUCCESS], None, None, False),
    ("no-outcomes", {TEST_ID: SUCCESS}, [], None, None, False),
]


@pytest.mark.parametrize("name, expected, states, skippable, env, confirmed", DECISIONS, ids=[d[0] for d in DECISIONS])
def test_decision_table(name, expected, states, skippable, env, confirmed):
    ids = list(expected)
    outcomes = [outcome(state, ids[i] if i < len(ids) else TEST_ID) for i, state in enumerate(states)]
    assert evaluate_outcomes(outcomes, expected, skippable, env) is confirmed


def test_error_in_unrelated_test_rejects():
    outcomes = [outcome(SUCCESS), outcome(ERROR, "a.B#other")]
    assert not evaluate_outcomes(outcomes, {TEST_ID: SUCCESS})


# running


def stub_for(target, state, **kw):
    return StubRunner({str(target): [render_surefire({TEST_ID: state})]}, **kw)


def test_run_build_compiles_before_testing(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    runner = stub_for(SHADED, SUCCESS)
    assert run_build(inst, runner, TEST).compiled
    assert runner.calls == [(COMPILE, str(SHADED)), (TEST, str(SHADED))]
    failing = stub_for(SHADED, SUCCESS, compile_failures=[SHADED])
    outcome_ = run_build(inst, failing, TEST)
    assert not outcome_.compiled and outcome_.reports == []
    assert failing.calls == [(COMPILE, str(SHADED))]


def test_stub_classpath_check(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    shaded_names = {str(c) for c in shaded_map().entries.values()}
    assert stub_for(SHADED, SUCCESS, classpath=lambda g: shaded_names).compile(inst).ok
    unshaded = {str(c) for c in LIB_CLASSES}
    result = stub_for(SHADED, SUCCESS, classpath=lambda g: unshaded).compile(inst)
    assert not result.ok and "cannot resolve import" in result.log


def test_stub_rejects_unbalanced_sources(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    src = inst.workspace / "src/test/java/org/example/pov/DeepNestingPovTest.java"
    src.write_text(src.read_text() + "}")
    assert not StubRunner().compile(inst).ok


@pytest.mark.parametrize("state, confirmed", [(SUCCESS, True), (FAILURE, False), (SKIP, False), (ERROR, False)])
def test_verify(pov, tmp_path, state, confirmed):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    result = verify(inst, stub_for(SHADED, state))
    assert result.compiled and result.tested
    assert result.confirmed is confirmed


def test_verify_without_reports_is_untested(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    result = verify(inst, StubRunner())
    assert result.compiled and not result.tested and not result.confirmed


def test_verify_malformed_report_is_untested(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    result = verify(inst, StubRunner({str(SHADED): [b"<testsuite"]}))
    assert not result.tested and "malformed" in result.detail


FAKE_MVN = """#!/bin/sh
echo "$@" >> "$PWD/mvn-calls.log"
case "$*" in
  *test-compile*) exit 0 ;;
esac
mkdir -p target/surefire-reports
cat > target/surefire-reports/TEST-pov.xml <<'EOF'
REPORT
EOF
exit 0
"""


def fake_maven(tmp_path, state):
    script = tmp_path / "mvn"
    script.write_text(FAKE_MVN.replace("REPORT", render_surefire({TEST_ID: state}).decode()))
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return MavenRunner(executable=str(script), timeout=30)


@pytest.mark.skipif(os.name != "posix", reason="uses a shell script as the build tool")
def test_maven_runner_with_fake_tool(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    runner = fake_maven(tmp_path, SUCCESS)
    result = verify(inst, runner)
    assert result.confirmed
    calls = (inst.workspace / "mvn-calls.log").read_text().splitlines()
    assert calls == ["-B test-compile", "-B test -Dmaven.test.failure.ignore=true"]


@pytest.mark.skipif(os.name != "posix", reason="uses a shell script as the build tool")
def test_maven_build_results_are_cached(pov, tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    runner = fake_maven(tmp_path, SUCCESS)
    assert verify(inst, runner, cache=cache).confirmed
    (inst.workspace / "mvn-calls.log").unlink()
    again = verify(inst, runner, cache=cache)
    assert again.confirmed and again.detail == "cached"
    assert not (inst.workspace / "mvn-calls.log").exists()


def test_maven_runner_missing_tool(pov, tmp_path):
    inst = instantiate(pov, SHADED, shaded_map(), tmp_path / "ws", LIB_CLASSES)
    result = verify(inst, MavenRunner(executable=str(tmp_path / "no-such-mvn")))
    assert not result.compiled and "cannot run" in result.detail
    with pytest.raises(RunnerCrash):
        MavenRunner(executable=str(tmp_path / "no-such-mvn")).test(inst)


def test_metadata_matches_published_schema(pov):
    import jsonschema
    from importlib import resources

    schema = json.loads(resources.files("shadescan").joinpath("schemas/pov.schema.json").read_text())
    jsonschema.validate(json.loads((pov.root_dir / "pov.json").read_text()), schema)
