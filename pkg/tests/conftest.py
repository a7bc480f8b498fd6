import numpy as np
import pytest

from dyadic_embed.cli import ball_grid, convergent_sequence
from dyadic_embed.embedding import BuildConfig, build
from dyadic_embed.normed_spaces import AmbientSpace, PointCloud


def sequence_cloud(count=50):
    return PointCloud(convergent_sequence(count), AmbientSpace(2, 1))


def grid_cloud(h=0.4, d=3, p=2):
    return PointCloud(ball_grid(d, p, h), AmbientSpace(p, d))


@pytest.fixture(scope="session")
def seq_cloud():
    return sequence_cloud()


@pytest.fixture(scope="session")
def ball_cloud():
    return grid_cloud()


@pytest.fixture(scope="session")
def seq_artifact(seq_cloud):
    return build(seq_cloud, "identity", BuildConfig())


@pytest.fixture(scope="session")
def ball_artifact(ball_cloud):
    return build(ball_cloud, "identity", BuildConfig())


@pytest.fixture(scope="session")
def ball_artifact_c2(ball_cloud):
    return build(ball_cloud, "diagonal:2", BuildConfig())


@pytest.fixture(scope="session")
def random_cloud():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-2, 2, size=(50, 2))
    return PointCloud(pts, AmbientSpace(2, 2))


@pytest.fixture(scope="session")
def random_artifact(random_cloud):
    return build(random_cloud, "identity", BuildConfig())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
