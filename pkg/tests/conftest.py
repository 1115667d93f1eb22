import pytest

import corpus
from shadescan.pipeline import PipelineConfig, build_client, fixture_stub_runner, run_pipeline


@pytest.fixture(scope="session")
def scenario_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("scenarios")


@pytest.fixture(scope="session")
def scenarios(scenario_dir):
    return {name: build(scenario_dir) for name, build in corpus.SCENARIOS.items()}


def run_scenario(scenario, **overrides):
    """Run a fixture scenario with the stub runner; returns (report, client, runner)."""
    options = dict(fixture_root=scenario.root)
    options.update(overrides)
    pov_dir = options.pop("pov_dir", scenario.pov_dir)
    config = PipelineConfig(scenario.original, corpus.CVE, pov_dir, **options)
    client = build_client(config)
    runner = fixture_stub_runner(scenario.root, client)
    return run_pipeline(config, client, runner), client, runner


# acceptance criteria record their verdicts here for the terminal summary
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
