import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import bpsk, centered_points, four_point_2x2, gaussian_2x2, random_spd, scalar_bpsk
from infogeom import matcalc as mc
from infogeom.estat import (
    conditional_batch,
    conditional_stats,
    estimation_summary,
    gaussian_fisher,
    gaussian_mmse,
    score,
)
from infogeom.model import (
    ChannelSpec,
    DiscreteInput,
    GaussianInput,
    MonteCarlo,
    Quadrature,
    UnsupportedError,
    expect_over_y,
    sample_y,
)


def bpsk_mmse_oracle(snr):
    # 1 - E[tanh^2(sqrt(snr) y)] with y the BPSK output, by adaptive integration
    a = np.sqrt(snr)

    def dens(y):
        return 0.5 * (np.exp(-(y - a) ** 2 / 2) + np.exp(-(y + a) ** 2 / 2)) / np.sqrt(2 * np.pi)

    val, _ = integrate.quad(lambda y: (1 - np.tanh(a * y) ** 2) * dens(y), -np.inf, np.inf, epsabs=1e-13)
    return val


def test_zero_gain_gives_prior(rng):
    pts = centered_points(rng, 2, 3)
    law = DiscreteInput.equiprobable(pts)
    Sz = random_spd(rng, 2)
    spec = ChannelSpec.from_G(np.zeros((2, 2)), law, Sigma_z=Sz)
    cs = conditional_stats(spec, rng.standard_normal(2))
    assert np.allclose(cs.phi, law.cov, atol=1e-14)
    assert np.allclose(cs.gamma, np.linalg.inv(Sz), atol=1e-12)
    S = estimation_summary(spec, Quadrature(10))
    assert np.allclose(S.mmse, law.cov, atol=1e-13)
    assert np.allclose(S.fisher, np.linalg.inv(Sz), atol=1e-12)
    assert np.allclose(S.phi_kron, np.kron(law.cov, law.cov), atol=1e-13)


def test_bpsk_conditional_examples():
    cs = conditional_stats(scalar_bpsk(1.0), [0.0])
    assert cs.phi[0, 0] == pytest.approx(1.0, abs=1e-15)
    y = 0.7
    assert conditional_stats(scalar_bpsk(2.0), [y]).phi[0, 0] == pytest.approx(1 - np.tanh(np.sqrt(2) * y) ** 2, abs=1e-14)


def test_gaussian_scalar_conditional():
    cs = conditional_stats(ChannelSpec.from_G([[1.0]], GaussianInput([[1.0]])), [0.3])
    assert cs.phi[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert cs.gamma[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert cs.cond_mean[0] == pytest.approx(0.15, abs=1e-15)


@pytest.mark.parametrize("snr", [0.5, 1.0, 3.0])
def test_bpsk_mmse_against_independent_integral(snr):
    # sech^2 has complex poles near the real axis, so Gauss-Hermite converges slowly
    S = estimation_summary(scalar_bpsk(snr), Quadrature(150))
    assert S.mmse[0, 0] == pytest.approx(bpsk_mmse_oracle(snr), abs=1e-8)


def test_bpsk_mmse_value_at_unit_snr():
    assert bpsk_mmse_oracle(1.0) == pytest.approx(0.449599, abs=1e-6)


def test_gaussian_closed_forms():
    assert np.allclose(gaussian_mmse(ChannelSpec.from_G(np.zeros((1, 1)), GaussianInput([[1.0]]))), 1.0)
    g = ChannelSpec.from_G([[np.sqrt(3.0)]], GaussianInput([[1.0]]))
    assert gaussian_mmse(g)[0, 0] == pytest.approx(0.25, abs=1e-15)
    assert gaussian_fisher(g)[0, 0] == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(UnsupportedError):
        gaussian_mmse(scalar_bpsk())


def test_singular_gaussian_covariance_uses_innovation_form(rng):
    A = rng.standard_normal((3, 1))
    Ss = A @ A.T
    G = rng.standard_normal((2, 3))
    spec = ChannelSpec.from_G(G, GaussianInput(Ss))
    # limit of the information form for Ss + eps I
    ref = gaussian_mmse(ChannelSpec.from_G(G, GaussianInput(Ss + 1e-9 * np.eye(3))))
    assert np.allclose(gaussian_mmse(spec), ref, atol=1e-7)


def test_gaussian_summary_matches_engine_average():
    spec = gaussian_2x2()
    S = estimation_summary(spec, Quadrature(20))
    Phi = gaussian_mmse(spec)
    assert np.allclose(S.mmse, Phi, atol=1e-12)
    avg = expect_over_y(spec, Quadrature(20), lambda Y: conditional_batch(spec, Y)[2])
    assert np.allclose(avg, S.fisher, atol=1e-10)
    assert np.allclose(S.fisher, np.linalg.inv(spec.Sigma_y), atol=1e-12)


def test_gaussian_phi_independent_of_y(rng):
    spec = gaussian_2x2()
    phis = [conditional_stats(spec, 10 * rng.standard_normal(2)).phi for _ in range(10)]
    assert all(np.array_equal(p, phis[0]) for p in phis)


def test_gamma_identity_and_orderings(rng):
    spec = four_point_2x2()
    Szi = spec.Sigma_z_inv
    for _ in range(10):
        cs = conditional_stats(spec, 3 * rng.standard_normal(2))
        G = spec.G
        assert np.allclose(cs.gamma, Szi - Szi @ G @ cs.phi @ G.T @ Szi, atol=1e-13)
        assert mc.min_eig(cs.phi) >= -1e-13
        assert mc.min_eig(Szi - cs.gamma) >= -1e-12
    S = estimation_summary(spec, Quadrature(30))
    assert mc.min_eig(S.mmse) >= 0
    assert mc.min_eig(spec.input.cov - S.mmse) >= -1e-12
    assert mc.min_eig(S.fisher) >= 0
    assert mc.min_eig(Szi - S.fisher) >= -1e-12
    assert mc.min_eig(S.phi_kron) >= -1e-12 and mc.min_eig(S.gamma_kron) >= -1e-12


def test_conditional_fisher_can_be_indefinite():
    # well-separated BPSK: between the two clusters the posterior variance exceeds what the noise allows
    spec = scalar_bpsk(9.0)
    assert conditional_stats(spec, [0.0]).gamma[0, 0] < 0


def test_summary_fields_match_direct_averages():
    spec = four_point_2x2()
    q = Quadrature(25)
    S = estimation_summary(spec, q)
    Phi_avg = expect_over_y(spec, q, lambda Y: conditional_batch(spec, Y)[1])
    assert np.allclose(S.mmse, Phi_avg, atol=1e-14)


def test_score_outer_product_matches_fisher():
    spec = four_point_2x2()
    J = estimation_summary(spec, Quadrature(40)).fisher
    Y = sample_y(spec, 200_000, seed=8)
    sc = score(spec, Y)
    outer = np.einsum("bi,bj->bij", sc, sc)
    mean = outer.mean(axis=0)
    err = outer.std(axis=0) / np.sqrt(len(Y))
    assert np.all(np.abs(mean - J) <= 3 * err + 1e-12)


def test_mc_summary_close_to_quadrature():
    spec = four_point_2x2()
    Sq = estimation_summary(spec, Quadrature(40))
    Sm = estimation_summary(spec, MonteCarlo(100_000, 2), with_stderr=True)
    assert np.all(np.abs(Sm.mmse - Sq.mmse) <= 5 * Sm.stderr["mmse"] + 1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_summary_symmetric(seed):
    rng = np.random.default_rng(seed)
    law = DiscreteInput.equiprobable(centered_points(rng, 2, 3))
    spec = ChannelSpec.from_G(rng.standard_normal((2, 2)), law, Sigma_z=random_spd(rng, 2))
    S = estimation_summary(spec, Quadrature(8))
    for M in (S.mmse, S.fisher, S.phi_kron, S.gamma_kron):
        assert np.array_equal(M, M.T)
