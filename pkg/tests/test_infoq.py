import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bpsk, centered_points, gaussian_2x2, random_spd, scalar_bpsk
from infogeom.infoq import (
    entropy,
    entropy_by_integration,
    entropy_power,
    gaussian_mi,
    info_values,
    low_snr_mi,
    mutual_information,
    noise_entropy,
)
from infogeom.model import ChannelSpec, DiscreteInput, GaussianInput, MonteCarlo, Quadrature, ScenarioError


def gauss_entropy(S):
    n = S.shape[0]
    return 0.5 * (n * math.log(2 * math.pi * math.e) + np.linalg.slogdet(S)[1])


def test_pure_noise_entropy(rng, quad):
    Sz = random_spd(rng, 2)
    spec = ChannelSpec.from_G(np.zeros((2, 1)), bpsk(), Sigma_z=Sz)
    assert entropy(spec, quad) == pytest.approx(gauss_entropy(Sz), abs=1e-12)
    one = ChannelSpec.from_G([[0.0]], bpsk())
    assert entropy(one, quad) == pytest.approx(1.418939, abs=1e-6)


def test_gaussian_scalar_entropy(quad):
    g = ChannelSpec.from_G([[1.0]], GaussianInput([[1.0]]))
    assert entropy(g, quad) == pytest.approx(0.5 * math.log(4 * math.pi * math.e), abs=1e-14)
    assert entropy_by_integration(g, Quadrature(20)) == pytest.approx(1.765512, abs=1e-6)


def test_bpsk_high_snr_entropy():
    h = entropy(scalar_bpsk(100.0), Quadrature(40))
    assert abs(h - (math.log(2) + 0.5 * math.log(2 * math.pi * math.e))) < 1e-3
    assert abs(mutual_information(scalar_bpsk(100.0), Quadrature(40)) - math.log(2)) < 1e-3


def test_mutual_information_examples(quad):
    single = ChannelSpec.from_G(np.eye(2), DiscreteInput.equiprobable(np.zeros((2, 1))))
    assert abs(mutual_information(single, quad)) < 1e-12
    g = ChannelSpec.from_G([[1.0]], GaussianInput([[1.0]]))
    assert mutual_information(g, quad) == pytest.approx(0.5 * math.log(2), abs=1e-14)
    assert gaussian_mi(g) == pytest.approx(0.346574, abs=1e-6)
    assert gaussian_mi(g.replace(P=[[0.0]])) == 0.0


def test_gaussian_mi_matches_integration():
    spec = gaussian_2x2()
    assert entropy_by_integration(spec, Quadrature(20)) - noise_entropy(spec) == pytest.approx(gaussian_mi(spec), abs=1e-8)


def test_entropy_power_examples(quad):
    spec = ChannelSpec.from_G(np.zeros((1, 1)), bpsk(), Sigma_z=[[2.5]])
    assert entropy_power(spec, quad) == pytest.approx(2.5, rel=1e-13)
    diag = ChannelSpec.from_G(np.zeros((2, 1)), bpsk(), Sigma_z=np.diag([1.0, 4.0]))
    assert entropy_power(diag, quad) == pytest.approx(2.0, rel=1e-13)
    assert entropy_power(scalar_bpsk(1.0), quad) > entropy_power(scalar_bpsk(0.0), quad)


def test_info_values_consistency(quad):
    spec = scalar_bpsk(2.0)
    iv = info_values(spec, quad)
    assert iv.mi_nats + noise_entropy(spec) == iv.entropy_nats
    assert iv.entropy_power == pytest.approx(math.exp(2 * iv.entropy_nats) / (2 * math.pi * math.e), rel=1e-14)


def test_entropy_mc_stderr():
    spec = scalar_bpsk(1.0)
    h, err = entropy(spec, MonteCarlo(100_000, 1), with_stderr=True)
    assert err > 0
    assert abs(h - entropy(spec, Quadrature(40))) < 4 * err


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), K=st.integers(2, 5))
def test_mi_bounds(seed, K):
    rng = np.random.default_rng(seed)
    law = DiscreteInput.equiprobable(centered_points(rng, 2, K, scale=2.0))
    spec = ChannelSpec.from_G(rng.standard_normal((2, 2)), law)
    I = mutual_information(spec, Quadrature(20))
    assert -1e-9 <= I <= math.log(K) + 1e-6


def test_translation_invariance(quad):
    # a symmetric point set and its mirror image give the same output entropy
    pts = np.array([[1.0, -1.0, 0.5, -0.5], [0.2, -0.2, -1.0, 1.0]])
    a = ChannelSpec.from_G([[1.0, 0.3], [0.1, 0.8]], DiscreteInput.equiprobable(pts))
    b = a.replace(input=DiscreteInput.equiprobable(-pts))
    assert entropy(a, quad) == pytest.approx(entropy(b, quad), abs=1e-12)


def test_mi_concave_in_snr(quad):
    grid = np.arange(0.0, 4.01, 0.5)
    I = np.array([mutual_information(scalar_bpsk(s), Quadrature(40)) for s in grid])
    assert np.all(np.diff(I, 2) <= 1e-9)


def test_low_snr_formula():
    g = ChannelSpec.from_G([[1.0]], GaussianInput([[0.0]]), Sigma_z=[[100.0]])
    assert low_snr_mi(g) == 0.0
    one = ChannelSpec.from_G([[1.0]], GaussianInput([[1.0]]), Sigma_z=[[100.0]])
    assert low_snr_mi(one, 100.0) == pytest.approx(0.004975, abs=1e-15)
    with pytest.raises(ScenarioError):
        low_snr_mi(one, 50.0)
    with pytest.raises(ScenarioError):
        low_snr_mi(ChannelSpec.from_G(np.eye(2), GaussianInput(np.eye(2)), Sigma_z=np.diag([1.0, 2.0])))


def test_low_snr_matches_mutual_information():
    pts = np.array([[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]])
    H = np.array([[1.0, 0.4], [-0.3, 0.9]])
    N0 = 50.0
    spec = ChannelSpec(H, np.eye(2), np.eye(2), N0 * np.eye(2), DiscreteInput.equiprobable(pts))
    HQH = H @ spec.input.cov @ H.T
    bound = 5 * N0**-2 * np.linalg.norm(HQH, 2) ** 3
    assert abs(low_snr_mi(spec) - mutual_information(spec, Quadrature(20))) < bound
