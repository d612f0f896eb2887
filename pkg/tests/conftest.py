import numpy as np
import pytest
from click.testing import CliRunner

from pointkan.synth import synth_clouds, synth_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def runner():
    """
    A `CliRunner` inside a fresh temporary directory, so tests can use local
    paths for the files commands write.
    """
    runner = CliRunner()
    with runner.isolated_filesystem():
        yield runner


@pytest.fixture(scope="session")
def shapes_dir(tmp_path_factory):
    """Small three shape dataset with train and test manifests"""
    out = tmp_path_factory.mktemp("shapes")
    synth_dataset(out, ["sphere", "cube", "cylinder"], 6, 64, 0.02, 0, 2)
    return out


@pytest.fixture(scope="session")
def toy_clouds():
    rng = np.random.default_rng(7)
    return synth_clouds(["sphere", "cube", "cylinder"], 4, 64, 0.02, rng)
