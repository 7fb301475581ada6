"""Conditional and averaged MMSE and Fisher information matrices.

At an output ``y`` the posterior covariance of the input is ``Phi(y)`` and
the conditional Fisher matrix is
``Gamma(y) = Sz^{-1} - Sz^{-1} G Phi(y) G' Sz^{-1}``.
Averaging over ``y`` gives the MMSE matrix ``E`` and the Fisher matrix ``J``;
the second-order derivative formulas also need ``E[Phi kron Phi]`` and
``E[Gamma kron Gamma]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcalc import symmetrize
from .model import (
    ChannelSpec,
    DiscreteInput,
    Engine,
    UnsupportedError,
    expect_over_y,
    posterior,
)


@dataclass(frozen=True, eq=False)
class ConditionalStats:
    y: np.ndarray
    cond_mean: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True, eq=False)
class EstimationSummary:
    mmse: np.ndarray
    fisher: np.ndarray
    phi_kron: np.ndarray
    gamma_kron: np.ndarray
    stderr: dict | None = None


def _batch_kron(A: np.ndarray) -> np.ndarray:
    """Row-wise ``A_b kron A_b`` for a stack of square matrices."""
    B, q, _ = A.shape
    return np.einsum("bij,bkl->bikjl", A, A).reshape(B, q * q, q * q)


def gaussian_mmse(spec: ChannelSpec) -> np.ndarray:
    """Posterior covariance under Gaussian signaling (constant in ``y``)."""
    if isinstance(spec.input, DiscreteInput):
        raise UnsupportedError("Gaussian closed form requested for a discrete input")
    Ss, G = spec.Sigma_s, spec.G
    try:
        np.linalg.cholesky(Ss)
    except np.linalg.LinAlgError:
        # innovation form, valid for singular input covariance
        SG = Ss @ G.T
        return symmetrize(Ss - SG @ np.linalg.solve(spec.Sigma_y, SG.T))
    info = np.linalg.inv(Ss) + G.T @ spec.Sigma_z_inv @ G
    return symmetrize(np.linalg.inv(symmetrize(info)))


def gaussian_fisher(spec: ChannelSpec) -> np.ndarray:
    if isinstance(spec.input, DiscreteInput):
        raise UnsupportedError("Gaussian closed form requested for a discrete input")
    return symmetrize(np.linalg.inv(spec.Sigma_y))


def _gamma_from_phi(spec: ChannelSpec, Phi: np.ndarray) -> np.ndarray:
    A = spec.Sigma_z_inv @ spec.G
    Gam = spec.Sigma_z_inv[None] - np.einsum("ia,bac,jc->bij", A, Phi, A)
    return 0.5 * (Gam + np.swapaxes(Gam, 1, 2))


def conditional_batch(spec: ChannelSpec, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Conditional mean, ``Phi`` and ``Gamma`` for each row of ``Y``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B = Y.shape[0]
    law = spec.input
    if isinstance(law, DiscreteInput):
        W = posterior(spec, Y)
        S = law.points.T
        mu = W @ S
        Dv = S[None, :, :] - mu[:, None, :]
        Phi = np.einsum("bk,bki,bkj->bij", W, Dv, Dv)
        Phi = 0.5 * (Phi + np.swapaxes(Phi, 1, 2))
    else:
        Phi0 = gaussian_mmse(spec)
        gain = spec.Sigma_s @ spec.G.T @ np.linalg.inv(spec.Sigma_y)
        mu = Y @ gain.T
        Phi = np.broadcast_to(Phi0, (B,) + Phi0.shape)
    return mu, Phi, _gamma_from_phi(spec, Phi)


def conditional_stats(spec: ChannelSpec, y) -> ConditionalStats:
    y = np.asarray(y, dtype=float).reshape(-1)
    mu, Phi, Gam = conditional_batch(spec, y[None, :])
    return ConditionalStats(y=y, cond_mean=mu[0], phi=np.array(Phi[0]), gamma=Gam[0])


def score(spec: ChannelSpec, Y) -> np.ndarray:
    """Gradient of ``log p(y)``: ``Sz^{-1} (G E[s|y] - y)``, one row per output."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    mu, _, _ = conditional_batch(spec, Y)
    return (mu @ spec.G.T - Y) @ spec.Sigma_z_inv.T


def estimation_summary(spec: ChannelSpec, engine: Engine, with_stderr: bool = False) -> EstimationSummary:
    """``E``, ``J``, ``E[Phi kron Phi]`` and ``E[Gamma kron Gamma]``.

    Gaussian inputs use the closed forms since ``Phi`` does not depend on ``y``.
    """
    if not isinstance(spec.input, DiscreteInput):
        Phi, J = gaussian_mmse(spec), gaussian_fisher(spec)
        err = None
        if with_stderr:
            err = {k: np.zeros_like(v) for k, v in (("mmse", Phi), ("fisher", J))}
        return EstimationSummary(Phi, J, np.kron(Phi, Phi), np.kron(J, J), err)

    def integrand(Y):
        _, Phi, Gam = conditional_batch(spec, Y)
        return Phi, Gam, _batch_kron(Phi), _batch_kron(Gam)

    out = expect_over_y(spec, engine, integrand, with_stderr=with_stderr)
    means, errs = out if with_stderr else (out, None)
    mmse, fisher, pk, gk = (symmetrize(M) for M in means)
    stderr = None
    if errs is not None:
        stderr = dict(zip(("mmse", "fisher", "phi_kron", "gamma_kron"), errs))
    return EstimationSummary(mmse, fisher, pk, gk, stderr)
