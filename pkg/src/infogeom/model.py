"""Linear vector Gaussian channel ``y = H P s + C n`` and averages over ``y``.

The input ``s`` is either a finite mixture of mass points or a zero-mean
Gaussian vector. Densities are evaluated in the log domain. Expectations
over the output are taken with a deterministic Gauss-Hermite rule or a
seeded Monte Carlo plan; both reduce in a fixed order so results are
reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

LOG_2PI = math.log(2.0 * math.pi)
CHUNK = 4096


class ScenarioError(ValueError):
    """Malformed channel description (shapes, probabilities, definiteness)."""


class UnsupportedError(ValueError):
    """The requested quantity is not defined for this input law or setting."""


def _matrix(name: str, a, ndim: int = 2) -> np.ndarray:
    try:
        arr = np.array(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{name}: not a numeric array") from exc
    if ndim == 2 and arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != ndim:
        raise ScenarioError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    if arr.size == 0:
        raise ScenarioError(f"{name}: empty array")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{name}: non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_spd(name: str, A: np.ndarray) -> np.ndarray:
    if A.shape[0] != A.shape[1]:
        raise ScenarioError(f"{name}: must be square, got {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ScenarioError(f"{name}: must be symmetric")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ScenarioError(f"{name}: must be positive definite") from exc
    # cholesky accepts some exactly singular inputs with a zero pivot
    if np.min(np.diag(L)) ** 2 <= 1e-14 * np.max(np.diag(A)):
        raise ScenarioError(f"{name}: must be positive definite (numerically singular)")
    return L


@dataclass(frozen=True, eq=False)
class DiscreteInput:
    """Equally or unequally weighted mass points; ``points`` is ``m x K``."""

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = _matrix("points", self.points)
        pr = _matrix("probs", np.ravel(self.probs), ndim=1)
        if pts.shape[1] != pr.size:
            raise ScenarioError(f"{pts.shape[1]} mass points but {pr.size} probabilities")
        if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-12:
            raise ScenarioError("probabilities must be non-negative and sum to 1")
        mean = pts @ pr
        if np.max(np.abs(mean)) > 1e-9:
            raise ScenarioError(f"input must be zero-mean, got mean {mean.tolist()}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return (self.points * self.probs) @ self.points.T

    @classmethod
    def equiprobable(cls, points) -> "DiscreteInput":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts, np.full(pts.shape[1], 1.0 / pts.shape[1]))


@dataclass(frozen=True, eq=False)
class GaussianInput:
    cov: np.ndarray

    def __post_init__(self):
        cov = _matrix("cov", self.cov)
        # PSD is enough here; a singular input covariance is legitimate
        if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, atol=1e-12):
            raise ScenarioError("Gaussian input covariance must be symmetric")
        if np.linalg.eigvalsh(cov)[0] < -1e-12 * max(1.0, np.abs(cov).max()):
            raise ScenarioError("Gaussian input covariance must be positive semidefinite")
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


InputLaw = Union[DiscreteInput, GaussianInput]


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """``y = H P s + C n`` with ``n ~ N(0, Sigma_n)`` independent of ``s``."""

    H: np.ndarray
    P: np.ndarray
    C: np.ndarray
    Sigma_n: np.ndarray
    input: InputLaw

    def __post_init__(self):
        for name in ("H", "P", "C", "Sigma_n"):
            object.__setattr__(self, name, _matrix(name, getattr(self, name)))
        H, P, C, Sn = self.H, self.P, self.C, self.Sigma_n
        if H.shape[1] != P.shape[0]:
            raise ScenarioError(f"H is {H.shape} but P is {P.shape}")
        if P.shape[1] != self.input.dim:
            raise ScenarioError(f"P has {P.shape[1]} columns but input has dimension {self.input.dim}")
        if C.shape[0] != H.shape[0]:
            raise ScenarioError(f"C has {C.shape[0]} rows but H has {H.shape[0]}")
        if C.shape[1] < C.shape[0]:
            raise ScenarioError("C must be n x n' with n' >= n")
        if Sn.shape != (C.shape[1], C.shape[1]):
            raise ScenarioError(f"Sigma_n must be {C.shape[1]}x{C.shape[1]}, got {Sn.shape}")
        _check_spd("Sigma_n", Sn)
        _check_spd("Sigma_z = C Sigma_n C'", self.Sigma_z)

    @classmethod
    def from_G(cls, G, input: InputLaw, Sigma_z=None) -> "ChannelSpec":
        """Shortcut ``y = G s + z`` with ``H = G``, ``P = I``, ``C = I``."""
        G = np.atleast_2d(np.asarray(G, dtype=float))
        n, m = G.shape
        Sz = np.eye(n) if Sigma_z is None else np.atleast_2d(np.asarray(Sigma_z, dtype=float))
        return cls(G, np.eye(m), np.eye(n), Sz, input)

    def replace(self, **changes) -> "ChannelSpec":
        return replace(self, **changes)

    def with_noise_cov(self, Sigma_z) -> "ChannelSpec":
        """Same signal path, noise parametrized directly by ``Sigma_z``."""
        return replace(self, C=np.eye(self.n), Sigma_n=np.atleast_2d(np.asarray(Sigma_z, dtype=float)))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.P.shape[1]

    @property
    def n_prime(self) -> int:
        return self.C.shape[1]

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.input, DiscreteInput)

    @cached_property
    def G(self) -> np.ndarray:
        return self.H @ self.P

    @cached_property
    def Sigma_z(self) -> np.ndarray:
        Sz = self.C @ self.Sigma_n @ self.C.T
        return 0.5 * (Sz + Sz.T)

    @cached_property
    def chol_z(self) -> np.ndarray:
        return np.linalg.cholesky(self.Sigma_z)

    @cached_property
    def Sigma_z_inv(self) -> np.ndarray:
        Linv = solve_triangular(self.chol_z, np.eye(self.n), lower=True)
        return Linv.T @ Linv

    @cached_property
    def cov_H(self) -> np.ndarray:
        """Channel covariance ``H' Sigma_z^{-1} H`` (p x p)."""
        A = self.H.T @ self.Sigma_z_inv @ self.H
        return 0.5 * (A + A.T)

    @cached_property
    def Sigma_s(self) -> np.ndarray:
        return self.input.cov

    @cached_property
    def Sigma_y(self) -> np.ndarray:
        Sy = self.G @ self.Sigma_s @ self.G.T + self.Sigma_z
        return 0.5 * (Sy + Sy.T)

    @cached_property
    def logdet_z(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_z))))


@dataclass(frozen=True)
class Quadrature:
    """Tensorized Gauss-Hermite rule, ``nodes`` per output dimension."""

    nodes: int = 20
    max_dim: int = 4

    def __post_init__(self):
        if self.nodes < 1:
            raise ScenarioError("quadrature needs at least one node")


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.samples < 2:
            raise ScenarioError("Monte Carlo needs at least two samples")


Engine = Union[Quadrature, MonteCarlo]


def _as_batch(spec: ChannelSpec, y) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=float)
    single = y.ndim <= 1
    Y = y.reshape(1, -1) if single else y
    if Y.shape[1] != spec.n:
        raise ScenarioError(f"output vectors must have dimension {spec.n}")
    return Y, single


def _gauss_logpdf(Y: np.ndarray, means: np.ndarray, L: np.ndarray) -> np.ndarray:
    """log N(Y_b; means_k, L L') for every pair, shape (B, K)."""
    B, n = Y.shape
    K = means.shape[0]
    R = (Y[:, None, :] - means[None, :, :]).reshape(B * K, n)
    W = solve_triangular(L, R.T, lower=True)
    quad = np.einsum("ij,ij->j", W, W).reshape(B, K)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * quad - 0.5 * (n * LOG_2PI + logdet)


def log_pdf_y_given_s(spec: ChannelSpec, y, s) -> float:
    """``log p(y | s)``: Gaussian ``N(G s, Sigma_z)`` evaluated at ``y``."""
    Y, _ = _as_batch(spec, y)
    mean = (spec.G @ np.asarray(s, dtype=float).reshape(-1)).reshape(1, -1)
    return float(_gauss_logpdf(Y, mean, spec.chol_z)[0, 0])


def _joint_loglik(spec: ChannelSpec, Y: np.ndarray) -> np.ndarray:
    """``log p_k + log p(y | s_k)`` for each output row and mass point."""
    law = spec.input
    means = (spec.G @ law.points).T
    with np.errstate(divide="ignore"):
        logp = np.log(law.probs)
    return _gauss_logpdf(Y, means, spec.chol_z) + logp[None, :]


def log_pdf_y(spec: ChannelSpec, y):
    """Marginal output log density; scalar for one ``y``, vector for a batch."""
    Y, single = _as_batch(spec, y)
    if spec.is_discrete:
        out = logsumexp(_joint_loglik(spec, Y), axis=1)
    else:
        L = np.linalg.cholesky(spec.Sigma_y)
        out = _gauss_logpdf(Y, np.zeros((1, spec.n)), L)[:, 0]
    return float(out[0]) if single else out


def posterior(spec: ChannelSpec, y) -> np.ndarray:
    """Posterior weights of the mass points given ``y``; shape (K,) or (B, K)."""
    if not spec.is_discrete:
        raise UnsupportedError("posterior weights exist only for discrete inputs")
    Y, single = _as_batch(spec, y)
    ll = _joint_loglik(spec, Y)
    W = np.exp(ll - ll.max(axis=1, keepdims=True))
    # explicit renormalization; subtracting a large log-normalizer loses digits
    W /= W.sum(axis=1, keepdims=True)
    return W[0] if single else W


def sample_y(spec: ChannelSpec, count: int, seed=0) -> np.ndarray:
    """``count`` i.i.d. outputs. The random stream depends only on ``seed``
    and the dimensions, so perturbed specs share the same draws."""
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    xi_s = rng.standard_normal((count, spec.m))
    xi_n = rng.standard_normal((count, spec.n_prime))
    law = spec.input
    if isinstance(law, DiscreteInput):
        idx = np.searchsorted(np.cumsum(law.probs), u, side="right")
        idx = np.minimum(idx, law.probs.size - 1)
        S = law.points[:, idx].T
    else:
        w, V = np.linalg.eigh(law.cov)
        S = xi_s @ (V * np.sqrt(np.clip(w, 0.0, None))).T
    noise = xi_n @ (spec.C @ np.linalg.cholesky(spec.Sigma_n)).T
    return S @ spec.G.T + noise


def _hermite_rule(nodes: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return Z, W


def output_nodes(spec: ChannelSpec, engine: Engine) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``Y`` (N x n) and weights ``w`` with ``E[f(y)] ~ sum_i w_i f(Y_i)``."""
    if isinstance(engine, MonteCarlo):
        Y = sample_y(spec, engine.samples, engine.seed)
        return Y, np.full(engine.samples, 1.0 / engine.samples)
    if spec.n > engine.max_dim:
        raise UnsupportedError(
            f"quadrature is capped at n <= {engine.max_dim} output dimensions (n = {spec.n}); use Monte Carlo"
        )
    Z, wz = _hermite_rule(engine.nodes, spec.n)
    if isinstance(spec.input, DiscreteInput):
        law = spec.input
        means = (spec.G @ law.points).T
        noise = Z @ spec.chol_z.T
        Y = (means[:, None, :] + noise[None, :, :]).reshape(-1, spec.n)
        w = (law.probs[:, None] * wz[None, :]).ravel()
        return Y, w
    return Z @ np.linalg.cholesky(spec.Sigma_y).T, wz


class _Neumaier:
    """Compensated running sum of equally shaped arrays."""

    def __init__(self):
        self.total = None
        self.comp = None

    def add(self, x: np.ndarray) -> None:
        if self.total is None:
            self.total = np.array(x, dtype=float)
            self.comp = np.zeros_like(self.total)
            return
        t = self.total + x
        big = np.abs(self.total) >= np.abs(x)
        self.comp += np.where(big, (self.total - t) + x, (x - t) + self.total)
        self.total = t

    def value(self) -> np.ndarray:
        return self.total + self.comp


Integrand = Callable[[np.ndarray], Union[np.ndarray, tuple]]


def expect_over_y(spec: ChannelSpec, engine: Engine, f: Integrand, with_stderr: bool = False):
    """Average of ``f`` over the output distribution.

    ``f`` receives a batch of outputs (B x n) and returns an array whose
    leading axis is B, or a tuple of such arrays. The result mirrors that
    structure. With ``with_stderr`` the Monte Carlo standard errors are
    returned alongside (zeros for quadrature).
    """
    Y, w = output_nodes(spec, engine)
    sums: list[_Neumaier] | None = None
    squares: list[_Neumaier] | None = None
    is_tuple = False
    for start in range(0, Y.shape[0], CHUNK):
        Yc, wc = Y[start : start + CHUNK], w[start : start + CHUNK]
        out = f(Yc)
        is_tuple = isinstance(out, tuple)
        parts = out if is_tuple else (out,)
        if sums is None:
            sums = [_Neumaier() for _ in parts]
            squares = [_Neumaier() for _ in parts]
        for acc, sq, arr in zip(sums, squares, parts):
            arr = np.asarray(arr, dtype=float)
            acc.add(np.tensordot(wc, arr, axes=(0, 0)))
            if with_stderr:
                sq.add(np.tensordot(wc, arr * arr, axes=(0, 0)))
    means = [acc.value() for acc in sums]
    if not with_stderr:
        return tuple(means) if is_tuple else means[0]
    if isinstance(engine, MonteCarlo):
        N = engine.samples
        errs = [np.sqrt(np.clip(sq.value() - mu * mu, 0.0, None) / (N - 1)) for sq, mu in zip(squares, means)]
    else:
        errs = [np.zeros_like(mu) for mu in means]
    if is_tuple:
        return tuple(means), tuple(errs)
    return means[0], errs[0]


# scenario files


def _rows(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).tolist()


def engine_from_dict(d: dict) -> Engine:
    if not isinstance(d, dict) or "mode" not in d:
        raise ScenarioError("engine must be an object with a 'mode' key")
    mode = d["mode"]
    try:
        if mode == "quadrature":
            return Quadrature(int(d.get("nodes", 20)))
        if mode == "mc":
            return MonteCarlo(int(d.get("samples", 200_000)), int(d.get("seed", 0)))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad engine parameters: {exc}") from exc
    raise ScenarioError(f"unknown engine mode {mode!r}")


def engine_to_dict(engine: Engine) -> dict:
    if isinstance(engine, Quadrature):
        return {"mode": "quadrature", "nodes": engine.nodes}
    return {"mode": "mc", "samples": engine.samples, "seed": engine.seed}


def parse_engine(text: str) -> Engine:
    """``quadrature:<nodes>`` or ``mc:<samples>:<seed>``."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "quadrature" and len(parts) in (1, 2):
            return Quadrature(int(parts[1]) if len(parts) == 2 else 20)
        if parts[0] == "mc" and len(parts) == 3:
            return MonteCarlo(int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ScenarioError(f"bad engine string {text!r}") from exc
    raise ScenarioError(f"bad engine string {text!r}; use quadrature:<nodes> or mc:<samples>:<seed>")


def input_from_dict(d: dict) -> InputLaw:
    if not isinstance(d, dict):
        raise ScenarioError("input must be an object")
    kind = d.get("type")
    try:
        if kind == "discrete":
            return DiscreteInput(d["points"], d["probs"])
        if kind == "gaussian":
            return GaussianInput(d["cov"])
    except KeyError as exc:
        raise ScenarioError(f"input is missing {exc}") from exc
    raise ScenarioError(f"unknown input type {kind!r}")


def input_to_dict(law: InputLaw) -> dict:
    if isinstance(law, DiscreteInput):
        return {"type": "discrete", "points": _rows(law.points), "probs": law.probs.tolist()}
    return {"type": "gaussian", "cov": _rows(law.cov)}


def spec_from_dict(d: dict) -> ChannelSpec:
    """Channel from the scenario layout; ``C`` defaults to ``I`` and ``Sigma_n`` to ``I``."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("H", "P", "input"):
        if key not in d:
            raise ScenarioError(f"scenario is missing {key!r}")
    H = _matrix("H", d["H"])
    C = _matrix("C", d["C"]) if "C" in d else np.eye(H.shape[0])
    Sn = _matrix("Sigma_n", d["Sigma_n"]) if "Sigma_n" in d else np.eye(C.shape[1])
    return ChannelSpec(H, d["P"], C, Sn, input_from_dict(d["input"]))


def spec_to_dict(spec: ChannelSpec, engine: Engine | None = None) -> dict:
    out = {
        "H": _rows(spec.H),
        "P": _rows(spec.P),
        "C": _rows(spec.C),
        "Sigma_n": _rows(spec.Sigma_n),
        "input": input_to_dict(spec.input),
    }
    if engine is not None:
        out["engine"] = engine_to_dict(engine)
    return out


def specs_equal(a: ChannelSpec, b: ChannelSpec) -> bool:
    """Bitwise equality of all defining arrays and the input law."""
    same = all(np.array_equal(getattr(a, k), getattr(b, k)) for k in ("H", "P", "C", "Sigma_n"))
    if type(a.input) is not type(b.input):
        return False
    if isinstance(a.input, DiscreteInput):
        return same and np.array_equal(a.input.points, b.input.points) and np.array_equal(a.input.probs, b.input.probs)
    return same and np.array_equal(a.input.cov, b.input.cov)
