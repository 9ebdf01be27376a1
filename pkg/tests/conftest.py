"""Shared fixtures: one default synthetic corpus for the slow end-to-end
tests so it is generated a single time per session."""
import pytest

from edgesal.dataset import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory):
    """The default 50-image 256x256 corpus plus its records."""
    root = tmp_path_factory.mktemp("corpus256")
    records = generate_synthetic(SyntheticSpec(), root)
    return root, records
