"""Shared fixtures: the default curve library and cached scenario runs.

Both are expensive (the scenario matrix runs five worlds across ten seeds), so
they are built once per session and shared by the unit and acceptance tests.
"""

import pytest

from kinoplan import build_curve_library, get_scenario, run_scenario

SCENARIO_NAMES = ("cross", "overtake", "bypass", "follow", "wait")
SEEDS = tuple(range(10))


@pytest.fixture(scope="session")
def library():
    return build_curve_library()


@pytest.fixture(scope="session")
def library_csv(library, tmp_path_factory):
    """The default library written to disk, for CLI invocations."""
    path = tmp_path_factory.mktemp("lib") / "library.csv"
    library.save_csv(path)
    return str(path)


@pytest.fixture(scope="session")
def scenario_runs(library):
    """TraceLog for every (builtin scenario, seed) pair used by the suite."""
    runs = {}
    for name in SCENARIO_NAMES:
        for seed in SEEDS:
            runs[(name, seed)] = run_scenario(get_scenario(name), seed=seed,
                                              library=library)
    return runs


@pytest.fixture(scope="session")
def blocked_run(library):
    return run_scenario(get_scenario("blocked"), seed=0, library=library)
