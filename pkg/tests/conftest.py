from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from visor.descriptors import DescriptorStore
from visor.engine import QueryEngine
from visor.graph import GraphStore
from visor.server import Server, ServerConfig
from visor.visual import VisualStore


@pytest.fixture
def tmp_dir():
    path = Path(tempfile.mkdtemp(prefix="visor-test-"))
    yield path
    shutil.rmtree(path, ignore_errors=True)


@pytest.fixture
def graph(tmp_dir):
    store = GraphStore(tmp_dir / "graph")
    yield store
    store.close()


@pytest.fixture
def engine(tmp_dir):
    store = GraphStore(tmp_dir / "graph")
    eng = QueryEngine(
        store, VisualStore(tmp_dir / "blobs"), DescriptorStore(tmp_dir / "descriptors")
    )
    yield eng
    store.close()


@pytest.fixture
def server_factory(tmp_dir):
    """Start in-process servers on ephemeral ports; stopped at teardown."""
    servers = []
    counter = iter(range(1000))

    def start(indexes=(), **kwargs) -> Server:
        data_dir = tmp_dir / f"server-{next(counter)}"
        config = ServerConfig(
            port=0, data_dir=str(data_dir), indexes=tuple(indexes), **kwargs
        )
        server = Server(config)
        server.start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()


@pytest.fixture
def three_patients(graph):
    """The documented fixture: Patients aged 84, 85, 90."""
    txn = graph.begin()
    ids = [
        graph.add_node(txn, "Patient", {"PatientID": f"P{i}", "Age": age})
        for i, age in enumerate((84, 85, 90), 1)
    ]
    graph.commit(txn)
    return ids


def random_image(rng: np.random.Generator, width=None, height=None, channels=1):
    h = height if height is not None else int(rng.integers(1, 48))
    w = width if width is not None else int(rng.integers(1, 48))
    shape = (h, w) if channels == 1 else (h, w, channels)
    return rng.integers(0, 256, shape).astype(np.uint8)
