"""Entropy power concavity: Hessian over the precoder power split and the scalar Costa check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcalc as mc
from .calculus import (
    NSD_RTOL,
    AlignedPrecoderSpec,
    _rotated_schur_moment,
    hess_mi_lambda_chain,
    jac_entropy,
    jac_P_lambda,
)
from .estat import estimation_summary
from .infoq import entropy, power_from_entropy
from .model import ChannelSpec, Engine


@dataclass(frozen=True, eq=False)
class EpiReport:
    hessian: np.ndarray
    entropy_power: float
    max_eigenvalue: float
    nsd: bool
    chain_hessian: np.ndarray
    path_rel_diff: float


def epi_hessian_lambda(aspec: AlignedPrecoderSpec, engine: Engine, rtol: float = NSD_RTOL) -> EpiReport:
    """Hessian of the output entropy power over ``lam``.

    Direct: ``(N/n) Diag(sigma) (d d'/n - E[Phi~ o Phi~]) Diag(sigma)`` with
    ``d = diag(V_P' E V_P)``.
    Chain: ``(2N/n) (2 g g'/n + H_lam h)`` where the entropy gradient ``g`` and
    Hessian ``H_lam h`` are pushed through ``P(lam)`` from the ``P`` formulas.
    The chain path needs ``lam > 0``; otherwise it falls back to the aligned
    gradient and Hessian expressions.
    """
    spec = aspec.base
    n = spec.n
    S = estimation_summary(spec, engine)
    h = entropy(spec, engine)
    N = power_from_entropy(h, n)
    sig = aspec.sigma_tilde
    Ds = np.diag(sig)
    d = np.diag(aspec.V_P.T @ S.mmse @ aspec.V_P)
    schur = _rotated_schur_moment(S, aspec.V_P)
    direct = mc.symmetrize((N / n) * Ds @ (np.outer(d, d) / n - schur) @ Ds)

    if np.all(aspec.lam > 0):
        DP = jac_P_lambda(aspec.U_P, aspec.lam, aspec.V_P)
        g = jac_entropy(spec, wrt="P", summary=S) @ DP
        Hh = hess_mi_lambda_chain(spec, U=aspec.U_P, V=aspec.V_P, summary=S)
    else:
        g = 0.5 * sig * d
        Hh = -0.5 * Ds @ schur @ Ds
    chain = mc.symmetrize((2 * N / n) * (2 * np.outer(g, g) / n + Hh))

    top = mc.max_eig(direct)
    scale = max(np.abs(direct).max(), np.abs(chain).max())
    rel = float(np.abs(direct - chain).max() / scale) if scale > 0 else 0.0
    nsd = top <= rtol * (1.0 + np.linalg.norm(direct, 2))
    return EpiReport(direct, N, top, bool(nsd), chain, rel)


@dataclass(frozen=True, eq=False)
class CostaReport:
    t: np.ndarray
    power: np.ndarray
    second_differences: np.ndarray
    chord_t: np.ndarray
    chord_slack: np.ndarray
    concave: bool
    chord_ok: bool


def _noisier(spec: ChannelSpec, t: float) -> ChannelSpec:
    # t = 0 keeps the original noise parametrization bit for bit
    if t == 0:
        return spec
    return spec.with_noise_cov(spec.Sigma_z + t * np.eye(spec.n))


def costa_scalar_epi_check(
    spec: ChannelSpec,
    engine: Engine,
    t_grid=None,
    chord_t=(0.0, 0.25, 0.5, 0.75, 1.0),
    tol: float = 1e-9,
) -> CostaReport:
    """Entropy power of ``x + sqrt(t) w`` with ``x`` the output of ``spec``, ``w ~ N(0, I)``.

    Checks that second differences over ``t_grid`` are at most ``tol`` (relative)
    and that ``N(t) >= (1 - t) N(0) + t N(1)`` at the chord points.
    """
    t = np.linspace(0.0, 1.0, 9) if t_grid is None else np.asarray(t_grid, dtype=float)
    power = np.array([power_from_entropy(entropy(_noisier(spec, float(ti)), engine), spec.n) for ti in t])
    second = power[2:] - 2 * power[1:-1] + power[:-2]
    ct = np.asarray(chord_t, dtype=float)
    N0 = power_from_entropy(entropy(spec, engine), spec.n)
    N1 = power_from_entropy(entropy(_noisier(spec, 1.0), engine), spec.n)
    Nc = np.array([power_from_entropy(entropy(_noisier(spec, float(ti)), engine), spec.n) for ti in ct])
    slack = Nc - ((1 - ct) * N0 + ct * N1)
    scale = tol * max(1.0, float(np.abs(power).max()))
    return CostaReport(
        t=t,
        power=power,
        second_differences=second,
        chord_t=ct,
        chord_slack=slack,
        concave=bool(np.all(second <= scale)),
        chord_ok=bool(np.all(slack >= -scale)),
    )


def entropy_power_sigma_z_check(spec: ChannelSpec, engine: Engine, direction, steps=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Experimental: entropy power along ``Sigma_z + t * direction``.

    Concavity in the noise covariance is a numerical observation only and
    is not asserted; the second differences are returned for inspection.
    """
    Dz = mc.symmetrize(np.asarray(direction, dtype=float))
    t = np.asarray(steps, dtype=float)
    power = np.array(
        [power_from_entropy(entropy(spec.with_noise_cov(spec.Sigma_z + ti * Dz), engine), spec.n) for ti in t]
    )
    return t, power, power[2:] - 2 * power[1:-1] + power[:-2]
