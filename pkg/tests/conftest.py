import numpy as np
import pytest

from infogeom.model import ChannelSpec, DiscreteInput, GaussianInput, Quadrature


def centered_points(rng, m, K, scale=1.0):
    pts = scale * rng.standard_normal((m, K))
    return pts - pts.mean(axis=1, keepdims=True)


def random_spd(rng, q, ridge=0.5):
    A = rng.standard_normal((q, q))
    return A @ A.T + ridge * np.eye(q)


def bpsk():
    return DiscreteInput.equiprobable([[1.0, -1.0]])


def scalar_bpsk(snr=1.0):
    return ChannelSpec.from_G([[np.sqrt(snr)]], bpsk())


def four_point_2x2(seed=3):
    """Moderate-SNR 2x2 channel with a generic 4-point input and correlated noise."""
    rng = np.random.default_rng(seed)
    law = DiscreteInput.equiprobable(centered_points(rng, 2, 4))
    H = 0.6 * rng.standard_normal((2, 2)) + 0.5 * np.eye(2)
    P = 0.6 * rng.standard_normal((2, 2)) + 0.6 * np.eye(2)
    C = np.array([[1.0, 0.2, 0.1], [0.0, 0.9, -0.3]])
    Sn = np.array([[1.0, 0.2, 0.0], [0.2, 1.1, 0.1], [0.0, 0.1, 0.8]])
    return ChannelSpec(H, P, C, Sn, law)


def gaussian_2x2(seed=5):
    rng = np.random.default_rng(seed)
    return ChannelSpec(
        rng.standard_normal((2, 2)),
        rng.standard_normal((2, 2)),
        np.eye(2),
        random_spd(rng, 2),
        GaussianInput(random_spd(rng, 2)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def quad():
    return Quadrature(20)


@pytest.fixture(scope="session")
def fine():
    # derivative checks need the quadrature error well below the FD tolerance
    return Quadrature(60)
