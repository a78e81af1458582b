import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import build_demo_bpe_asset  # noqa: E402

from hcsum.fixtures import write_demo_corpus  # noqa: E402


@pytest.fixture(scope="session")
def demo_bpe_dir(tmp_path_factory) -> Path:
    return build_demo_bpe_asset(tmp_path_factory.mktemp("bpe_asset"))


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("corpus") / "corpus.csv"
    write_demo_corpus(path, n_admissions=4, seed=0, n_long=1)
    return path


@pytest.fixture(scope="session")
def stub_server():
    from hcsum.stub_backend import StubServer

    with StubServer(echo_words=64, embed_dim=8) as server:
        yield server
