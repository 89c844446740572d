from pathlib import Path

import numpy as np
import pytest

from epvae.chn import ChnParams, build_topology, init_params

DATA = Path(__file__).resolve().parents[1] / "data"
MNIST_IMAGES = DATA / "mnist5k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist5k-labels-idx1-ubyte.gz"


@pytest.fixture(scope="session")
def mnist():
    from epvae.data import load_mnist
    return load_mnist(MNIST_IMAGES, MNIST_LABELS)


def random_net(n, seed, kind="dense"):
    """A dense (or roughly thirds-partitioned layered) net with init-scale weights."""
    n_in = max(1, n // 3)
    n_out = max(1, n // 3)
    mask = build_topology(kind, n_in, n - n_in - n_out, n_out)
    return init_params(mask, seed)


def zero_params(mask):
    return ChnParams(mask, np.zeros((mask.n_total, mask.n_total)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
