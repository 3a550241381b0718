import pytest

from alienconcepts.catalog import load_catalog, trial_primitives
from alienconcepts.dsl.evaluate import Evaluator
from alienconcepts.geometry import enumerate_universe
from alienconcepts.harness.trials import trial_universe

SMALL = ("bar", "wedge", "trapezoid", "stair")
RICH = ("bowtie", "arrow", "flag", "diamond")


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def small_universe():
    return trial_universe(SMALL)


@pytest.fixture(scope="session")
def rich_universe():
    return trial_universe(RICH)


@pytest.fixture(scope="session")
def small_evaluator(small_universe):
    return Evaluator(small_universe)


@pytest.fixture(scope="session")
def two_part_universe(catalog):
    return enumerate_universe(trial_primitives(list(RICH), catalog), max_parts=2)


@pytest.fixture(scope="session")
def bundled():
    from alienconcepts.harness.trials import load_bundled_trials

    return {s.trial_id: s for s in load_bundled_trials()}


@pytest.fixture(scope="session")
def quick_cfg():
    from alienconcepts.harness.experiment import RunConfig

    return RunConfig(steps=1500, chains=2)


@pytest.fixture(scope="session")
def quick_pools(bundled, quick_cfg):
    """Short-chain pools for a few trials over the small primitive set."""
    from alienconcepts.harness.experiment import infer_trial

    ids = ("single-part-3", "has-part-3", "orient-3")
    return {t: infer_trial(bundled[t], quick_cfg) for t in ids}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
