import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pvwpe import synth  # noqa: E402
from pvwpe.detector import FixedThreshold, IqrOutlier, analyze_region  # noqa: E402
from pvwpe.profiler import WindowSpec, hyperparameter_sweep, profile_all  # noqa: E402
from pvwpe.wpe import EmbeddingConfig  # noqa: E402

DEFAULT_CFG = EmbeddingConfig(6, 3)
DEFAULT_WIN = WindowSpec(90 * 288, 288)


@pytest.fixture(scope="session")
def fixture_spec():
    return synth.default_fleet_spec()


@pytest.fixture(scope="session")
def fleet(fixture_spec):
    return synth.generate_fleet(fixture_spec)


@pytest.fixture(scope="session")
def faulted_ids(fixture_spec):
    return {f.site_id for f in fixture_spec.faults}


@pytest.fixture(scope="session")
def profiles(fleet):
    return profile_all(fleet, DEFAULT_CFG, DEFAULT_WIN)


@pytest.fixture(scope="session")
def analysis(profiles):
    return analyze_region("all", profiles, FixedThreshold(0.8))


@pytest.fixture(scope="session")
def analysis_iqr(profiles):
    return analyze_region("all", profiles, IqrOutlier())


@pytest.fixture(scope="session")
def sweep(fleet):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return hyperparameter_sweep(fleet)


@pytest.fixture(scope="session")
def fleet_csv(tmp_path_factory, fleet):
    from pvwpe.ingest import write_long_csv

    path = tmp_path_factory.mktemp("fixture") / "fleet.csv"
    write_long_csv(fleet, path)
    return path
