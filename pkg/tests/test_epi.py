import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import centered_points, scalar_bpsk
from infogeom import calculus as cal
from infogeom import epi
from infogeom import matcalc as mc
from infogeom import verify as vf
from infogeom.infoq import entropy_power
from infogeom.model import ChannelSpec, DiscreteInput, GaussianInput, Quadrature

PRODUCT_BPSK = DiscreteInput.equiprobable([[1, 1, -1, -1], [1, -1, 1, -1]])


def random_aligned(rng, p=2, m=2):
    law = DiscreteInput.equiprobable(centered_points(rng, m, 3))
    H = rng.standard_normal((2, p))
    V = np.linalg.qr(rng.standard_normal((m, m)))[0][:, : min(p, m)]
    return cal.AlignedPrecoderSpec.from_channel(H, rng.uniform(0.2, 1.5, min(p, m)), law, V_P=V)


def test_zero_channel_gives_zero_hessian(quad):
    a = cal.AlignedPrecoderSpec.from_channel(np.zeros((2, 2)), [1.0, 0.5], PRODUCT_BPSK)
    rep = epi.epi_hessian_lambda(a, quad)
    assert np.array_equal(rep.hessian, np.zeros((2, 2)))
    assert rep.nsd


def test_gaussian_scalar_entropy_power_is_linear():
    # N = sigma * lam * s2 + 1, so the Hessian over lam vanishes
    a = cal.AlignedPrecoderSpec.from_channel([[1.7]], [0.6], GaussianInput([[1.0]]))
    rep = epi.epi_hessian_lambda(a, None)
    assert abs(rep.hessian[0, 0]) < 1e-14
    assert rep.entropy_power == pytest.approx(1 + 1.7**2 * 0.6, rel=1e-13)


def test_parallel_bpsk_matches_fd_of_entropy_power(fine):
    a = cal.AlignedPrecoderSpec.from_channel(np.diag([1.1, 0.6]), [0.9, 1.4], PRODUCT_BPSK)
    rep = epi.epi_hessian_lambda(a, fine)
    fd = vf.fd_hessian(lambda x: entropy_power(a.with_lambda(x).base, fine), a.lam, vf.FdPlan(1e-3, richardson=True))
    assert vf.rel_error(rep.hessian, fd) < 1e-4


def test_dual_paths_agree(rng, quad):
    for _ in range(5):
        rep = epi.epi_hessian_lambda(random_aligned(rng), quad)
        assert rep.path_rel_diff < 1e-6


def test_dual_paths_agree_with_zero_power(rng, quad):
    a = random_aligned(rng)
    a0 = a.with_lambda([a.lam[0], 0.0])
    assert epi.epi_hessian_lambda(a0, quad).path_rel_diff < 1e-6


def test_random_aligned_specs_nsd(rng, quad):
    for _ in range(10):
        p, m = rng.integers(1, 4, size=2)
        rep = epi.epi_hessian_lambda(random_aligned(rng, int(p), int(m)), Quadrature(12))
        assert rep.nsd, rep.max_eigenvalue


def test_decomposition_terms(rng, quad):
    a = random_aligned(rng)
    rep = epi.epi_hessian_lambda(a, quad)
    Hh = cal.hess_mi_lambda(a, quad)
    rank_one = rep.hessian - (2 * rep.entropy_power / a.base.n) * Hh
    assert mc.min_eig(rank_one) >= -1e-12
    assert np.linalg.matrix_rank(rank_one, tol=1e-10) <= 1
    assert mc.max_eig(Hh) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_scalar_bpsk_entropy_power_concave_in_power(gain, lam):
    a = cal.AlignedPrecoderSpec.from_channel([[gain]], [lam], DiscreteInput.equiprobable([[1.0, -1.0]]))
    assert epi.epi_hessian_lambda(a, Quadrature(40)).hessian[0, 0] <= 1e-12


def test_costa_gaussian_equality():
    spec = ChannelSpec.from_G([[1.3]], GaussianInput([[0.8]]), Sigma_z=[[0.5]])
    rep = epi.costa_scalar_epi_check(spec, None)
    assert rep.t.size == 9
    assert np.abs(rep.second_differences).max() <= 1e-8
    assert np.abs(rep.chord_slack).max() <= 1e-8
    assert rep.concave and rep.chord_ok


def test_costa_bpsk_inequality():
    rep = epi.costa_scalar_epi_check(scalar_bpsk(2.0), Quadrature(80))
    assert rep.concave and rep.chord_ok
    assert rep.chord_slack[1:-1].min() > 0
    assert rep.second_differences.max() < 0


def test_costa_endpoints_exact():
    spec = scalar_bpsk(1.0)
    rep = epi.costa_scalar_epi_check(spec, Quadrature(40))
    assert rep.chord_slack[0] == 0.0
    assert abs(rep.chord_slack[-1]) < 1e-14
    assert rep.power[0] == entropy_power(spec, Quadrature(40))


def test_sigma_z_check_is_informational(quad):
    t, power, second = epi.entropy_power_sigma_z_check(scalar_bpsk(), quad, [[1.0]])
    assert power.shape == t.shape and second.shape == (t.size - 2,)
