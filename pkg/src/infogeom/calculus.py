"""Closed-form Jacobians and Hessians of the MMSE, Fisher, entropy and mutual information.

Layout: Jacobians of symmetric-matrix outputs carry ``D^+`` on the left
(rows indexed by vech), derivatives with respect to symmetric-matrix
variables carry ``D`` on the right (columns indexed by vech), and matrix
variables are vectorized column by column. Every function accepts an
optional precomputed ``EstimationSummary`` so one average over ``y`` can
feed several formulas.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import matcalc as mc
from .estat import EstimationSummary, conditional_batch, estimation_summary, gaussian_mmse
from .model import (
    ChannelSpec,
    DiscreteInput,
    Engine,
    GaussianInput,
    Quadrature,
    ScenarioError,
    UnsupportedError,
    expect_over_y,
)
from .infoq import input_precoded_cov, white_noise_level

NSD_RTOL = 1e-8
Q_UNSUPPORTED = (
    "derivatives with respect to Q = P Sigma_s P' are defined only for Gaussian inputs "
    "or in the low-SNR expansion: for other inputs the mutual information is not a "
    "function of Q alone, since two precoders with the same Q can give different values"
)

TARGETS = ("G", "P", "H", "C", "Sigma_z", "Sigma_n", "snr", "lambda", "Q_gaussian", "Q_lowsnr")


def _summary(spec, engine, summary):
    return summary if summary is not None else estimation_summary(spec, engine)


def is_nsd(A: np.ndarray, rtol: float = NSD_RTOL) -> bool:
    return mc.max_eig(A) <= rtol * (1.0 + np.linalg.norm(A, 2))


def _check_wrt(wrt: str, allowed: tuple[str, ...]) -> None:
    if wrt in ("Q", "Q_P", "Sigma_s"):
        raise UnsupportedError(Q_UNSUPPORTED)
    if wrt not in allowed:
        raise UnsupportedError(f"derivative with respect to {wrt!r} not available; choose from {allowed}")


# first order: MMSE and Fisher


def jac_mmse(spec: ChannelSpec, engine: Engine | None = None, wrt: str = "G", summary=None) -> np.ndarray:
    _check_wrt(wrt, ("G", "P", "H"))
    S = _summary(spec, engine, summary)
    m = spec.m
    left = -2.0 * mc.dup_pinv(m) @ S.phi_kron
    Szi = spec.Sigma_z_inv
    if wrt == "G":
        right = np.kron(np.eye(m), spec.G.T @ Szi)
    elif wrt == "P":
        right = np.kron(np.eye(m), spec.P.T @ spec.cov_H)
    else:
        right = np.kron(spec.P.T, spec.P.T @ spec.H.T @ Szi)
    return left @ right


def jac_fisher(spec: ChannelSpec, engine: Engine | None = None, wrt: str = "C", summary=None) -> np.ndarray:
    _check_wrt(wrt, ("C", "Sigma_z", "Sigma_n"))
    S = _summary(spec, engine, summary)
    n = spec.n
    Dp, D = mc.dup_pinv(n), mc.duplication(n)
    if wrt == "C":
        return -2.0 * Dp @ S.gamma_kron @ np.kron(spec.C @ spec.Sigma_n, np.eye(n))
    if wrt == "Sigma_z":
        return -Dp @ S.gamma_kron @ D
    CC = np.kron(spec.C, spec.C)
    return -Dp @ S.gamma_kron @ CC @ mc.duplication(spec.n_prime)


# first order: entropy and mutual information


def jac_entropy(spec: ChannelSpec, engine: Engine | None = None, wrt: str = "P", summary=None) -> np.ndarray:
    _check_wrt(wrt, ("G", "P", "H", "C", "Sigma_z", "Sigma_n"))
    S = _summary(spec, engine, summary)
    E, J, Szi = S.mmse, S.fisher, spec.Sigma_z_inv
    if wrt == "G":
        return mc.vec(Szi @ spec.G @ E)
    if wrt == "P":
        return mc.vec(spec.cov_H @ spec.P @ E)
    if wrt == "H":
        return mc.vec(Szi @ spec.G @ E @ spec.P.T)
    if wrt == "C":
        return mc.vec(J @ spec.C @ spec.Sigma_n)
    if wrt == "Sigma_z":
        return 0.5 * mc.vec(J) @ mc.duplication(spec.n)
    return 0.5 * mc.vec(spec.C.T @ J @ spec.C) @ mc.duplication(spec.n_prime)


def _noise_entropy_jac(spec: ChannelSpec, wrt: str) -> np.ndarray:
    Szi = spec.Sigma_z_inv
    if wrt == "C":
        return mc.vec(Szi @ spec.C @ spec.Sigma_n)
    if wrt == "Sigma_z":
        return 0.5 * mc.vec(Szi) @ mc.duplication(spec.n)
    return 0.5 * mc.vec(spec.C.T @ Szi @ spec.C) @ mc.duplication(spec.n_prime)


def jac_mi(spec: ChannelSpec, engine: Engine | None = None, wrt: str = "P", summary=None) -> np.ndarray:
    g = jac_entropy(spec, engine, wrt, summary)
    if wrt in ("G", "P", "H"):
        return g
    return g - _noise_entropy_jac(spec, wrt)


# second order: entropy and mutual information


def hess_entropy(spec: ChannelSpec, engine: Engine | None = None, wrt: str = "P", summary=None) -> np.ndarray:
    _check_wrt(wrt, ("G", "P", "H", "C", "Sigma_z", "Sigma_n"))
    S = _summary(spec, engine, summary)
    E, J, Szi, Ch = S.mmse, S.fisher, spec.Sigma_z_inv, spec.cov_H
    m, n = spec.m, spec.n
    Im, In = np.eye(m), np.eye(n)
    Nm, Nn = mc.symmetrization(m), mc.symmetrization(n)
    G, P, H, C, Sn = spec.G, spec.P, spec.H, spec.C, spec.Sigma_n
    if wrt == "G":
        out = np.kron(E, Szi) - 2.0 * np.kron(Im, Szi @ G) @ Nm @ S.phi_kron @ np.kron(Im, G.T @ Szi)
    elif wrt == "P":
        out = np.kron(E, Ch) - 2.0 * np.kron(Im, Ch @ P) @ Nm @ S.phi_kron @ np.kron(Im, P.T @ Ch)
    elif wrt == "H":
        out = np.kron(P @ E @ P.T, Szi) - 2.0 * np.kron(P, Szi @ G) @ Nm @ S.phi_kron @ np.kron(P.T, G.T @ Szi)
    elif wrt == "C":
        out = np.kron(Sn, J) - 2.0 * np.kron(Sn @ C.T, In) @ Nn @ S.gamma_kron @ np.kron(C @ Sn, In)
    elif wrt == "Sigma_z":
        D = mc.duplication(n)
        out = -0.5 * D.T @ S.gamma_kron @ D
    else:
        D = mc.duplication(spec.n_prime)
        CC = np.kron(C, C)
        out = -0.5 * D.T @ CC.T @ S.gamma_kron @ CC @ D
    return mc.symmetrize(out)


def _noise_entropy_hess(spec: ChannelSpec, wrt: str) -> np.ndarray:
    Szi, C, Sn, n = spec.Sigma_z_inv, spec.C, spec.Sigma_n, spec.n
    if wrt == "C":
        In = np.eye(n)
        return np.kron(Sn, Szi) - 2.0 * np.kron(Sn @ C.T, In) @ mc.symmetrization(n) @ np.kron(Szi, Szi) @ np.kron(
            C @ Sn, In
        )
    if wrt == "Sigma_z":
        D = mc.duplication(n)
        return -0.5 * D.T @ np.kron(Szi, Szi) @ D
    D = mc.duplication(spec.n_prime)
    W = C.T @ Szi @ C
    return -0.5 * D.T @ np.kron(W, W) @ D


def hess_mi(spec: ChannelSpec, engine: Engine | None = None, wrt: str = "P", summary=None) -> np.ndarray:
    Hh = hess_entropy(spec, engine, wrt, summary)
    if wrt in ("G", "P", "H"):
        return Hh
    return mc.symmetrize(Hh - _noise_entropy_hess(spec, wrt))


# scalar SNR


def snr_spec(template: ChannelSpec, snr: float) -> ChannelSpec:
    """``template`` with the precoder replaced by ``sqrt(snr) I``."""
    if template.p != template.m:
        raise ScenarioError("an SNR precoder sqrt(snr) I needs p = m")
    if snr < 0:
        raise ScenarioError("snr must be non-negative")
    return template.replace(P=np.sqrt(snr) * np.eye(template.m))


def jac_mi_snr(template: ChannelSpec, snr: float, engine: Engine | None = None, summary=None) -> float:
    """``dI/dsnr = Tr(Cov_H E) / 2``."""
    spec = snr_spec(template, snr)
    S = _summary(spec, engine, summary)
    return 0.5 * float(np.trace(spec.cov_H @ S.mmse))


def hess_mi_snr(template: ChannelSpec, snr: float, engine: Engine | None = None) -> float:
    """``d2I/dsnr2 = -E[Tr((Cov_H Phi)^2)] / 2``, averaged node by node."""
    spec = snr_spec(template, snr)
    Ch = spec.cov_H
    if isinstance(spec.input, GaussianInput):
        A = Ch @ gaussian_mmse(spec)
        return -0.5 * float(np.trace(A @ A))

    def integrand(Y):
        _, Phi, _ = conditional_batch(spec, Y)
        A = np.einsum("ij,bjk->bik", Ch, Phi)
        return np.einsum("bij,bji->b", A, A)

    return -0.5 * float(expect_over_y(spec, engine, integrand))


# squared singular values of the precoder


def _eig_decreasing(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, U = np.linalg.eigh(mc.symmetrize(A))
    order = np.argsort(w)[::-1]
    w, U = w[order], U[:, order]
    for j in range(U.shape[1]):
        col = U[:, j]
        first = np.flatnonzero(np.abs(col) > 1e-12)[0]
        if col[first] < 0:
            U[:, j] = -col
    scale = max(1.0, float(np.abs(w).max()))
    w = np.where(np.abs(w) <= 1e-12 * scale, 0.0, w)
    return w, U


def _orthonormal_columns(V: np.ndarray, tol: float = 1e-10) -> bool:
    return np.allclose(V.T @ V, np.eye(V.shape[1]), atol=tol)


@dataclass(frozen=True, eq=False)
class AlignedPrecoderSpec:
    """Channel whose precoder has left singular vectors ``U_H[:, :k]``,
    the eigenvectors of ``Cov_H``, with ``k = min(p, m)``:
    ``P = U_H[:, :k] Diag(sqrt(lam)) V_P'``."""

    base: ChannelSpec
    U_H: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    V_P: np.ndarray

    def __post_init__(self):
        spec = self.base
        p, m = spec.p, spec.m
        k = min(p, m)
        U = np.asarray(self.U_H, dtype=float)
        sig = np.asarray(self.sigma, dtype=float).ravel()
        lam = np.asarray(self.lam, dtype=float).ravel()
        V = np.asarray(self.V_P, dtype=float)
        if U.shape != (p, p) or not _orthonormal_columns(U):
            raise ScenarioError("U_H must be a p x p orthogonal matrix")
        if sig.shape != (p,) or np.any(sig < 0) or np.any(np.diff(sig) > 1e-12 * max(1.0, sig.max(initial=0))):
            raise ScenarioError("sigma must hold p non-negative eigenvalues in decreasing order")
        if lam.shape != (k,) or np.any(lam < 0):
            raise ScenarioError(f"lambda must hold {k} non-negative values")
        if V.shape != (m, k) or not _orthonormal_columns(V):
            raise ScenarioError(f"V_P must be {m} x {k} with orthonormal columns")
        scale = 1.0 + np.linalg.norm(spec.cov_H, 2)
        if np.abs(U @ np.diag(sig) @ U.T - spec.cov_H).max() > 1e-10 * scale:
            raise ScenarioError("Cov_H is not U_H Diag(sigma) U_H'")
        P = U[:, :k] @ np.diag(np.sqrt(lam)) @ V.T
        if np.abs(P - spec.P).max() > 1e-10 * (1.0 + np.abs(P).max()):
            raise ScenarioError("precoder is not U_H Diag(sqrt(lambda)) V_P'")
        for name, arr in (("U_H", U), ("sigma", sig), ("lam", lam), ("V_P", V)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_channel(cls, H, lam, input, C=None, Sigma_n=None, V_P=None) -> "AlignedPrecoderSpec":
        """Synthesize the aligned precoder from the channel and the power split."""
        H = np.atleast_2d(np.asarray(H, dtype=float))
        n, p = H.shape
        C = np.eye(n) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
        Sigma_n = np.eye(C.shape[1]) if Sigma_n is None else np.atleast_2d(np.asarray(Sigma_n, dtype=float))
        m = input.dim
        k = min(p, m)
        Sz = C @ Sigma_n @ C.T
        cov_H = H.T @ np.linalg.solve(Sz, H)
        sig, U = _eig_decreasing(cov_H)
        sig = np.clip(sig, 0.0, None)
        lam = np.asarray(lam, dtype=float).ravel()
        V = np.eye(m)[:, :k] if V_P is None else np.asarray(V_P, dtype=float)
        if lam.shape != (k,):
            raise ScenarioError(f"lambda must hold {k} values")
        if np.any(lam < 0):
            raise ScenarioError("lambda must be non-negative")
        P = U[:, :k] @ np.diag(np.sqrt(lam)) @ V.T
        return cls(ChannelSpec(H, P, C, Sigma_n, input), U, sig, lam, V)

    @classmethod
    def from_spec(cls, spec: ChannelSpec) -> "AlignedPrecoderSpec":
        """Recover the aligned factorization of an existing precoder (validated)."""
        sig, U = _eig_decreasing(spec.cov_H)
        sig = np.clip(sig, 0.0, None)
        k = min(spec.p, spec.m)
        M = U[:, :k].T @ spec.P
        lam = np.sum(M * M, axis=1)
        V = np.zeros((spec.m, k))
        for j in range(k):
            if lam[j] > 0:
                V[:, j] = M[j] / np.sqrt(lam[j])
        # complete columns for zero-power modes
        if np.any(lam <= 0):
            Q, _ = np.linalg.qr(np.column_stack([V[:, lam > 0], np.eye(spec.m)]))
            fill = iter(Q[:, int(np.sum(lam > 0)) :].T)
            for j in np.flatnonzero(lam <= 0):
                V[:, j] = next(fill)
        if not _orthonormal_columns(V):
            raise ScenarioError("precoder is not aligned with the eigenvectors of H' Sz^-1 H")
        return cls(spec, U, sig, lam, V)

    def with_lambda(self, lam) -> "AlignedPrecoderSpec":
        lam = np.asarray(lam, dtype=float).ravel()
        if np.any(lam < 0):
            raise ScenarioError("lambda must be non-negative")
        P = self.U_P @ np.diag(np.sqrt(lam)) @ self.V_P.T
        return AlignedPrecoderSpec(self.base.replace(P=P), self.U_H, self.sigma, lam, self.V_P)

    @property
    def k(self) -> int:
        return self.lam.size

    @property
    def U_P(self) -> np.ndarray:
        return self.U_H[:, : self.k]

    @property
    def sigma_tilde(self) -> np.ndarray:
        return self.sigma[: self.k]

    @cached_property
    def transformed_input(self):
        """Law of ``V_P' s`` (the input seen by the diagonalized channel)."""
        law = self.base.input
        if isinstance(law, DiscreteInput):
            return DiscreteInput(self.V_P.T @ law.points, law.probs)
        return GaussianInput(mc.symmetrize(self.V_P.T @ law.cov @ self.V_P))


def _rotated_schur_moment(S: EstimationSummary, V: np.ndarray) -> np.ndarray:
    """``E[(V' Phi V) o (V' Phi V)]`` from ``E[Phi kron Phi]``."""
    VV = np.kron(V, V)
    R = mc.reduction(V.shape[1])
    return mc.symmetrize(R.T @ VV.T @ S.phi_kron @ VV @ R)


def jac_mi_lambda(aspec: AlignedPrecoderSpec, engine: Engine | None = None, summary=None) -> np.ndarray:
    """``sigma o diag(V_P' E V_P) / 2``."""
    S = _summary(aspec.base, engine, summary)
    return 0.5 * aspec.sigma_tilde * np.diag(aspec.V_P.T @ S.mmse @ aspec.V_P)


def hess_mi_lambda(aspec: AlignedPrecoderSpec, engine: Engine | None = None, summary=None) -> np.ndarray:
    """``-Diag(sigma) E[Phi~ o Phi~] Diag(sigma) / 2`` with ``Phi~ = V_P' Phi V_P``."""
    S = _summary(aspec.base, engine, summary)
    Ds = np.diag(aspec.sigma_tilde)
    return mc.symmetrize(-0.5 * Ds @ _rotated_schur_moment(S, aspec.V_P) @ Ds)


def lambda_precoder(U: np.ndarray, lam, V: np.ndarray) -> np.ndarray:
    return U @ np.diag(np.sqrt(np.asarray(lam, dtype=float))) @ V.T


def split_precoder(P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``P = U Diag(sqrt(lam)) V'`` with ``k = min(p, m)`` singular triplets."""
    U, s, Vt = np.linalg.svd(P, full_matrices=False)
    return U, s**2, Vt.T


def jac_P_lambda(U: np.ndarray, lam, V: np.ndarray) -> np.ndarray:
    """Jacobian of ``vec P`` with respect to ``lam`` (needs ``lam > 0``)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise UnsupportedError("the chain rule through sqrt(lambda) needs lambda > 0")
    return np.kron(V, U) @ mc.reduction(lam.size) @ np.diag(0.5 / np.sqrt(lam))


def hess_mi_lambda_chain(spec: ChannelSpec, engine: Engine | None = None, U=None, V=None, summary=None) -> np.ndarray:
    """Hessian over ``lam`` for any precoder ``P = U Diag(sqrt(lam)) V'``.

    Chain rule through ``P``:
    ``D_lam P' H_P I D_lam P + (D_P I kron I_k) H_lam P``. The second term
    is diagonal because each entry of ``P`` is linear in ``sqrt(lam_j)``.
    ``U`` and ``V`` default to the singular vectors of ``spec.P``.
    """
    Us, lam, Vs = split_precoder(spec.P)
    U = Us if U is None else np.asarray(U, dtype=float)
    V = Vs if V is None else np.asarray(V, dtype=float)
    lam = np.diag(U.T @ spec.P @ V) ** 2
    if np.abs(lambda_precoder(U, lam, V) - spec.P).max() > 1e-10 * (1 + np.abs(spec.P).max()):
        raise ScenarioError("spec.P is not of the form U Diag(sqrt(lambda)) V'")
    S = _summary(spec, engine, summary)
    DP = jac_P_lambda(U, lam, V)
    M = np.kron(V, U) @ mc.reduction(lam.size)
    grad_P = jac_mi(spec, wrt="P", summary=S)
    second = np.diag((grad_P @ M) * (-0.25 * lam**-1.5))
    return mc.symmetrize(DP.T @ hess_mi(spec, wrt="P", summary=S) @ DP + second)


# transmit covariance


def hess_mi_Q_gaussian(spec: ChannelSpec) -> np.ndarray:
    """Hessian of ``1/2 log det(I + Cov_H Q)`` over vech(Q), Gaussian inputs only."""
    if not isinstance(spec.input, GaussianInput):
        raise UnsupportedError(Q_UNSUPPORTED)
    Q = input_precoded_cov(spec)
    Ch = spec.cov_H
    p = spec.p
    A = mc.symmetrize(np.linalg.solve(np.eye(p) + Ch @ Q, Ch))
    D = mc.duplication(p)
    return mc.symmetrize(-0.5 * D.T @ np.kron(A, A) @ D)


def jac_mi_Q_gaussian(spec: ChannelSpec) -> np.ndarray:
    if not isinstance(spec.input, GaussianInput):
        raise UnsupportedError(Q_UNSUPPORTED)
    Q = input_precoded_cov(spec)
    A = np.linalg.solve(np.eye(spec.p) + spec.cov_H @ Q, spec.cov_H)
    return 0.5 * mc.vec(mc.symmetrize(A)) @ mc.duplication(spec.p)


def lowsnr_jac_hess_Q(spec: ChannelSpec, N0: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Jacobian and Hessian over vech(Q) of the second-order low-SNR expansion."""
    N0 = white_noise_level(spec, N0)
    Q = input_precoded_cov(spec)
    HH = spec.H.T @ spec.H
    D = mc.duplication(spec.p)
    jac = mc.vec(HH) @ D / (2 * N0) - mc.vec(HH @ Q @ HH) @ D / (2 * N0**2)
    hess = -D.T @ np.kron(HH, HH) @ D / (2 * N0**2)
    return jac, mc.symmetrize(hess)


# complex diagonal channel


@dataclass(frozen=True)
class ComplexHessianReport:
    direct: np.ndarray
    extended: np.ndarray
    max_abs_diff: float


def _complex_direct(points: np.ndarray, probs: np.ndarray, lam: np.ndarray, nodes: int) -> np.ndarray:
    n, K = points.shape
    a = np.sqrt(lam)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    grids = np.meshgrid(*([x] * (2 * n)), indexing="ij")
    wg = np.meshgrid(*([w] * (2 * n)), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1) * np.sqrt(0.5)
    Wz = np.prod(np.stack([g.ravel() for g in wg], axis=1), axis=1)
    noise = Z[:, :n] + 1j * Z[:, n:]
    total = np.zeros((n, n))
    for k in range(K):
        if probs[k] == 0:
            continue
        Y = (a * points[:, k])[None, :] + noise
        R = Y[:, None, :] - (a[:, None] * points).T[None, :, :]
        ll = -np.sum(np.abs(R) ** 2, axis=2) + np.log(np.where(probs > 0, probs, 1.0))[None, :]
        ll = np.where(probs[None, :] > 0, ll, -np.inf)
        ll -= ll.max(axis=1, keepdims=True)
        Wp = np.exp(ll)
        Wp /= Wp.sum(axis=1, keepdims=True)
        mu = Wp @ points.T
        Dv = points.T[None, :, :] - mu[:, None, :]
        Phi = np.einsum("bk,bki,bkj->bij", Wp, Dv, Dv.conj())
        Phib = np.einsum("bk,bki,bkj->bij", Wp, Dv, Dv)
        val = np.abs(Phi) ** 2 + np.abs(Phib) ** 2
        total += probs[k] * np.tensordot(Wz, val, axes=(0, 0))
    return mc.symmetrize(-total)


def hess_entropy_lambda_complex(points, probs, lambda_c, engine: Engine | None = None) -> ComplexHessianReport:
    """Entropy Hessian over ``lambda_c`` for ``y = Diag(sqrt(lambda_c)) s + w``, ``E[w w^H] = I``.

    Evaluated through the complex conditional MMSE and pseudo-MMSE matrices,
    and separately through the equivalent real model of twice the dimension
    with noise covariance ``I/2``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    pr = np.asarray(probs, dtype=float).ravel()
    lam = np.asarray(lambda_c, dtype=float).ravel()
    n = pts.shape[0]
    if lam.shape != (n,) or np.any(lam < 0):
        raise ScenarioError(f"lambda_c must hold {n} non-negative values")
    engine = engine or Quadrature()
    if not isinstance(engine, Quadrature):
        raise UnsupportedError("the complex Hessian is evaluated with quadrature only")
    if 2 * n > engine.max_dim:
        raise UnsupportedError(f"complex dimension {n} needs {2 * n} real quadrature dimensions")
    real_input = DiscreteInput(np.vstack([pts.real, pts.imag]), pr)
    direct = _complex_direct(pts, real_input.probs, lam, engine.nodes)

    lam_r = np.concatenate([lam, lam])
    base = ChannelSpec(np.eye(2 * n), np.diag(np.sqrt(lam_r)), np.eye(2 * n), 0.5 * np.eye(2 * n), real_input)
    aspec = AlignedPrecoderSpec(base, np.eye(2 * n), np.full(2 * n, 2.0), lam_r, np.eye(2 * n))
    Hr = hess_mi_lambda(aspec, engine)
    Jm = np.vstack([np.eye(n), np.eye(n)])
    extended = mc.symmetrize(Jm.T @ Hr @ Jm)
    return ComplexHessianReport(direct, extended, float(np.abs(direct - extended).max()))
