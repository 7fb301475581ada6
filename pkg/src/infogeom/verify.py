"""Independent oracles: finite differences, the two-point counterexample, concavity sweeps."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from . import calculus as cal
from . import matcalc as mc
from .estat import estimation_summary
from .infoq import entropy, gaussian_mi, input_precoded_cov, low_snr_mi, mutual_information
from .model import ChannelSpec, DiscreteInput, Engine, GaussianInput, Quadrature, ScenarioError, UnsupportedError


@dataclass(frozen=True)
class FdPlan:
    """Central differences with relative step ``step * (|x| + 1)``.

    ``richardson`` combines steps ``h`` and ``h/2`` as ``(4 D(h/2) - D(h)) / 3``,
    cancelling the ``h^2`` error term.
    """

    step: float = 1e-4
    scheme: str = "central"
    coupling: bool = True
    richardson: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("finite-difference step must be positive")
        if self.scheme != "central":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


def _steps(x0: np.ndarray, plan: FdPlan) -> np.ndarray:
    return plan.step * (np.abs(x0) + 1.0)


def _finite(v, x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(v)):
        raise FloatingPointError(f"non-finite function value at {x}")
    return v


def _extrapolated(fd: Callable, f: Callable, x0, plan: FdPlan) -> np.ndarray:
    coarse = fd(f, x0, replace(plan, richardson=False))
    fine = fd(f, x0, replace(plan, richardson=False, step=plan.step / 2))
    return (4 * fine - coarse) / 3


def fd_jacobian(f: Callable, x0, plan: FdPlan = FdPlan()) -> np.ndarray:
    """Central-difference Jacobian, rows indexed by outputs and columns by inputs."""
    if plan.richardson:
        return _extrapolated(fd_jacobian, f, x0, plan)
    x0 = np.asarray(x0, dtype=float).ravel()
    h = _steps(x0, plan)
    cols = []
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = h[i]
        cols.append((_finite(f(x0 + e), x0 + e) - _finite(f(x0 - e), x0 - e)) / (2 * h[i]))
    return np.stack(cols, axis=1)


def fd_hessian(f: Callable, x0, plan: FdPlan = FdPlan()) -> np.ndarray:
    """Central-difference Hessian of a scalar function, symmetrized."""
    if plan.richardson:
        return mc.symmetrize(_extrapolated(fd_hessian, f, x0, plan))
    x0 = np.asarray(x0, dtype=float).ravel()
    h = _steps(x0, plan)
    k = x0.size

    def F(x):
        return float(_finite(f(x), x)[0])

    f0 = F(x0)
    Hm = np.zeros((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        Hm[i, i] = (F(x0 + ei) - 2 * f0 + F(x0 - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            Hm[i, j] = Hm[j, i] = (
                F(x0 + ei + ej) - F(x0 + ei - ej) - F(x0 - ei + ej) + F(x0 - ei - ej)
            ) / (4 * h[i] * h[j])
    return mc.symmetrize(Hm)


def rel_error(closed, fd) -> float:
    """Max-norm error relative to the larger max norm of the two arrays."""
    a, b = np.asarray(closed, dtype=float), np.asarray(fd, dtype=float)
    err = float(np.abs(a - b).max())
    scale = max(float(np.abs(a).max()), float(np.abs(b).max()))
    return err / scale if scale > 1e-300 else err


@dataclass(frozen=True, eq=False)
class DerivativeReport:
    quantity: str
    wrt: str
    order: int
    closed_form: np.ndarray
    fd: np.ndarray
    abs_err: float
    rel_err: float


# parameter plumbing


def parameter(spec: ChannelSpec, wrt: str) -> np.ndarray:
    if wrt == "G":
        return mc.vec(spec.G)
    if wrt in ("P", "H", "C"):
        return mc.vec(getattr(spec, wrt))
    if wrt == "Sigma_z":
        return mc.vech(spec.Sigma_z)
    if wrt == "Sigma_n":
        return mc.vech(spec.Sigma_n)
    raise UnsupportedError(f"no matrix parameter {wrt!r}")


def rebuild(spec: ChannelSpec, wrt: str, x) -> ChannelSpec:
    """Spec with the ``wrt`` slot replaced by the vec (or vech) coordinates ``x``."""
    if wrt == "G":
        return spec.replace(H=mc.unvec(x, spec.n, spec.m), P=np.eye(spec.m))
    if wrt == "P":
        return spec.replace(P=mc.unvec(x, spec.p, spec.m))
    if wrt == "H":
        return spec.replace(H=mc.unvec(x, spec.n, spec.p))
    if wrt == "C":
        return spec.replace(C=mc.unvec(x, spec.n, spec.n_prime))
    if wrt == "Sigma_z":
        return spec.with_noise_cov(mc.unvech(x, spec.n))
    if wrt == "Sigma_n":
        return spec.replace(Sigma_n=mc.unvech(x, spec.n_prime))
    raise UnsupportedError(f"no matrix parameter {wrt!r}")


def _value(quantity: str, engine: Engine) -> Callable[[ChannelSpec], np.ndarray]:
    if quantity == "mmse":
        return lambda s: mc.vech(estimation_summary(s, engine).mmse)
    if quantity == "fisher":
        return lambda s: mc.vech(estimation_summary(s, engine).fisher)
    if quantity == "entropy":
        return lambda s: np.array([entropy(s, engine)])
    if quantity == "mi":
        return lambda s: np.array([mutual_information(s, engine)])
    raise UnsupportedError(f"unknown quantity {quantity!r}")


def _closed(quantity: str, order: int):
    table = {
        ("mmse", 1): cal.jac_mmse,
        ("fisher", 1): cal.jac_fisher,
        ("entropy", 1): cal.jac_entropy,
        ("entropy", 2): cal.hess_entropy,
        ("mi", 1): cal.jac_mi,
        ("mi", 2): cal.hess_mi,
    }
    if (quantity, order) not in table:
        raise UnsupportedError(f"no closed form for order-{order} derivative of {quantity}")
    return table[(quantity, order)]


def _fd(f, x0, order, plan):
    return fd_jacobian(f, x0, plan) if order == 1 else fd_hessian(f, x0, plan)


def _report(quantity, wrt, order, closed, fd) -> DerivativeReport:
    closed = np.atleast_2d(np.asarray(closed, dtype=float))
    fd = np.atleast_2d(np.asarray(fd, dtype=float)).reshape(closed.shape)
    return DerivativeReport(quantity, wrt, order, closed, fd, float(np.abs(closed - fd).max()), rel_error(closed, fd))


def snr_of(spec: ChannelSpec) -> float:
    c = float(spec.P[0, 0]) if spec.P.size else 0.0
    if spec.p != spec.m or not np.allclose(spec.P, c * np.eye(spec.m), atol=1e-14) or c < 0:
        raise ScenarioError("SNR derivatives need P = sqrt(snr) I")
    return c * c


def _gaussian_q_spec(spec: ChannelSpec, Q) -> ChannelSpec:
    return spec.replace(P=np.eye(spec.p), input=GaussianInput(Q))


def check_derivative(
    spec,
    engine: Engine,
    quantity: str = "mi",
    wrt: str = "P",
    order: int = 1,
    plan: FdPlan = FdPlan(),
) -> DerivativeReport:
    """Closed form versus finite differences for one (quantity, variable, order).

    ``spec`` may be an ``AlignedPrecoderSpec`` for ``wrt="lambda"``; a plain
    spec then uses the chain rule through its own singular vectors.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if wrt in ("Q", "Q_P", "Sigma_s"):
        raise UnsupportedError(cal.Q_UNSUPPORTED)
    if wrt in ("snr", "lambda", "Q_gaussian", "Q_lowsnr") and quantity not in ("mi", "entropy"):
        raise UnsupportedError(f"{wrt} derivatives are provided for the mutual information only")
    aspec = spec if isinstance(spec, cal.AlignedPrecoderSpec) else None
    base = aspec.base if aspec is not None else spec

    if wrt == "snr":
        snr = snr_of(base)
        f = lambda x: np.array([mutual_information(cal.snr_spec(base, x[0]), engine)])
        closed = cal.jac_mi_snr(base, snr, engine) if order == 1 else cal.hess_mi_snr(base, snr, engine)
        return _report("mi", wrt, order, closed, _fd(f, [snr], order, plan))

    if wrt == "lambda":
        if aspec is not None:
            f = lambda x: np.array([mutual_information(aspec.with_lambda(x).base, engine)])
            x0 = aspec.lam
            closed = cal.jac_mi_lambda(aspec, engine) if order == 1 else cal.hess_mi_lambda(aspec, engine)
        else:
            U, x0, V = cal.split_precoder(base.P)
            f = lambda x: np.array([mutual_information(base.replace(P=cal.lambda_precoder(U, x, V)), engine)])
            if order == 1:
                closed = cal.jac_mi(base, engine, "P") @ cal.jac_P_lambda(U, x0, V)
            else:
                closed = cal.hess_mi_lambda_chain(base, engine, U, V)
        return _report("mi", wrt, order, closed, _fd(f, x0, order, plan))

    if wrt == "Q_gaussian":
        x0 = mc.vech(input_precoded_cov(base))
        f = lambda x: np.array([gaussian_mi(_gaussian_q_spec(base, mc.unvech(x)))])
        closed = cal.jac_mi_Q_gaussian(base) if order == 1 else cal.hess_mi_Q_gaussian(base)
        return _report("mi", wrt, order, closed, _fd(f, x0, order, plan))

    if wrt == "Q_lowsnr":
        x0 = mc.vech(input_precoded_cov(base))
        f = lambda x: np.array([low_snr_mi(_gaussian_q_spec(base, mc.unvech(x)))])
        jac, hess = cal.lowsnr_jac_hess_Q(base)
        return _report("mi", wrt, order, jac if order == 1 else hess, _fd(f, x0, order, plan))

    closed_fn = _closed(quantity, order)
    closed = closed_fn(base, engine, wrt)
    value = _value(quantity, engine)
    f = lambda x: value(rebuild(base, wrt, x))
    return _report(quantity, wrt, order, closed, _fd(f, parameter(base, wrt), order, plan))


# two-point counterexample


@dataclass(frozen=True)
class CounterexampleScenario:
    """``H = [[1, b], [b, 1]]``, ``P = Diag(sqrt(lam))``, ``Sigma_z = I``, two equiprobable points.

    The points are ``+-(1, -1)``: the difference vector of ``2 e1`` and ``2 e2``
    with the mean removed, which leaves the output distances unchanged.
    """

    rho: float
    beta: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ScenarioError("rho must be positive")
        if not 0 <= self.beta <= 1:
            raise ScenarioError("beta must lie in [0, 1]")

    @property
    def H(self) -> np.ndarray:
        return np.array([[1.0, self.beta], [self.beta, 1.0]])

    @property
    def input(self) -> DiscreteInput:
        return DiscreteInput(np.array([[1.0, -1.0], [-1.0, 1.0]]), np.array([0.5, 0.5]))

    def spec(self, lam1: float, lam2: float) -> ChannelSpec:
        P = np.diag(np.sqrt([lam1, lam2]))
        return ChannelSpec(self.H, P, np.eye(2), np.eye(2), self.input)

    def grid(self, points: int) -> np.ndarray:
        return np.linspace(0.0, self.rho, points)


def counterexample_distances(sc: CounterexampleScenario, lam1: float, lam2: float) -> float:
    """Squared distance between the two noiseless received points."""
    if lam1 < 0 or lam2 < 0:
        raise ScenarioError("powers must be non-negative")
    b = sc.beta
    return 4.0 * ((1 + b * b) * (lam1 + lam2) - 4.0 * b * math.sqrt(lam1 * lam2))


def counterexample_mi_curve(sc: CounterexampleScenario, engine: Engine, grid=None, points: int = 21):
    """Rows ``(lam1, I)`` along ``lam1 + lam2 = rho``."""
    lam1 = sc.grid(points) if grid is None else np.asarray(grid, dtype=float)
    vals = np.array([mutual_information(sc.spec(l1, max(sc.rho - l1, 0.0)), engine) for l1 in lam1])
    return np.column_stack([lam1, vals])


def counterexample_hessian(sc: CounterexampleScenario, engine: Engine, lam1: float, lam2: float) -> np.ndarray:
    """Hessian of the mutual information over ``(lam1, lam2)`` (chain rule, no alignment)."""
    return cal.hess_mi_lambda_chain(sc.spec(lam1, lam2), engine, U=np.eye(2), V=np.eye(2))


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def counterexample_csv(rho: float, betas: Iterable[float], points: int, engine: Engine) -> str:
    betas = list(betas)
    cols = []
    lam1 = None
    for b in betas:
        curve = counterexample_mi_curve(CounterexampleScenario(rho, b), engine, points=points)
        lam1 = curve[:, 0]
        cols.append(curve[:, 1])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda1"] + [f"mi_nats_beta_{fmt(b)}" for b in betas])
    for i, l1 in enumerate(lam1):
        w.writerow([fmt(l1)] + [fmt(c[i]) for c in cols])
    return buf.getvalue()


# concavity sweep


@dataclass(frozen=True)
class SweepRow:
    family: str
    variable: str
    verdict: str
    max_eigenvalue: float


FAMILIES = ("general", "aligned", "parallel", "low_snr", "gaussian")
VARIABLES = ("snr", "lambda", "Q")


@dataclass
class SweepConfig:
    families: tuple = FAMILIES
    snr_grid: tuple = (0.25, 1.0, 4.0)
    seed: int = 7
    engine: Engine = field(default_factory=Quadrature)
    beta: float = 0.5
    rho: float = 10.0
    N0: float = 50.0


def _verdict(H) -> tuple[str, float]:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    top = mc.max_eig(H)
    return ("concave" if cal.is_nsd(H) else "not concave"), top


def _snr_column(template: ChannelSpec, cfg: SweepConfig) -> tuple[str, float]:
    vals = [cal.hess_mi_snr(template, s, cfg.engine) for s in cfg.snr_grid]
    return _verdict(np.array([[max(vals)]]))


def _random_orthogonal(rng, q) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((q, q)))
    return Q * np.sign(np.diag(R))


def _product_bpsk(m: int) -> DiscreteInput:
    grid = np.array(np.meshgrid(*([[-1.0, 1.0]] * m), indexing="ij")).reshape(m, -1)
    return DiscreteInput.equiprobable(grid)


def _lambda_to_vechQ(U: np.ndarray) -> np.ndarray:
    """Linear map ``lam -> vech(U Diag(lam) U')`` (valid when ``V' Sigma_s V = I``)."""
    k = U.shape[1]
    return mc.dup_pinv(U.shape[0]) @ np.kron(U, U) @ mc.reduction(k)


def concavity_sweep(cfg: SweepConfig | None = None) -> list[SweepRow]:
    """Concavity verdicts of the mutual information per channel family and variable."""
    cfg = cfg or SweepConfig()
    rng = np.random.default_rng(cfg.seed)
    rows: list[SweepRow] = []

    def add(family, variable, verdict_pair):
        verdict, top = verdict_pair
        rows.append(SweepRow(family, variable, verdict, top))

    for fam in cfg.families:
        if fam == "general":
            sc = CounterexampleScenario(cfg.rho, cfg.beta)
            template = ChannelSpec(sc.H, np.eye(2), np.eye(2), np.eye(2), sc.input)
            add(fam, "snr", _snr_column(template, cfg))
            add(fam, "lambda", _verdict(counterexample_hessian(sc, cfg.engine, cfg.rho / 2, cfg.rho / 2)))
            rows.append(SweepRow(fam, "Q", "n/a", math.nan))
        elif fam == "aligned":
            H = rng.standard_normal((2, 2))
            law = _product_bpsk(2)
            template = ChannelSpec(H, np.eye(2), np.eye(2), np.eye(2), law)
            aspec = cal.AlignedPrecoderSpec.from_channel(H, rng.uniform(0.3, 2.0, 2), law, V_P=_random_orthogonal(rng, 2))
            add(fam, "snr", _snr_column(template, cfg))
            add(fam, "lambda", _verdict(cal.hess_mi_lambda(aspec, cfg.engine)))
            rows.append(SweepRow(fam, "Q", "n/a", math.nan))
        elif fam == "parallel":
            H = np.diag(rng.uniform(0.5, 2.0, 2))
            law = _product_bpsk(2)
            template = ChannelSpec(H, np.eye(2), np.eye(2), np.eye(2), law)
            aspec = cal.AlignedPrecoderSpec.from_channel(H, rng.uniform(0.3, 2.0, 2), law)
            Hl = cal.hess_mi_lambda(aspec, cfg.engine)
            add(fam, "snr", _snr_column(template, cfg))
            add(fam, "lambda", _verdict(Hl))
            # Q = Diag(lambda) for independent unit-power inputs
            add(fam, "Q", _verdict(Hl))
        elif fam == "low_snr":
            H = rng.standard_normal((2, 2))
            law = _product_bpsk(2)
            Sn = cfg.N0 * np.eye(2)
            template = ChannelSpec(H, np.eye(2), np.eye(2), Sn, law)
            U = _random_orthogonal(rng, 2)
            lam = rng.uniform(0.3, 2.0, 2)
            spec = template.replace(P=cal.lambda_precoder(U, lam, np.eye(2)))
            _, HQ = cal.lowsnr_jac_hess_Q(spec)
            L = _lambda_to_vechQ(U)
            add(fam, "snr", _snr_column(template, cfg))
            add(fam, "lambda", _verdict(L.T @ HQ @ L))
            add(fam, "Q", _verdict(HQ))
        elif fam == "gaussian":
            H = rng.standard_normal((2, 2))
            law = GaussianInput(np.eye(2))
            template = ChannelSpec(H, np.eye(2), np.eye(2), np.eye(2), law)
            U, V = _random_orthogonal(rng, 2), _random_orthogonal(rng, 2)
            spec = template.replace(P=cal.lambda_precoder(U, rng.uniform(0.3, 2.0, 2), V))
            add(fam, "snr", _snr_column(template, cfg))
            add(fam, "lambda", _verdict(cal.hess_mi_lambda_chain(spec, cfg.engine, U, V)))
            add(fam, "Q", _verdict(cal.hess_mi_Q_gaussian(spec)))
        else:
            raise ScenarioError(f"unknown family {fam!r}; choose from {FAMILIES}")
    return rows


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "variable", "verdict", "max_eigenvalue"])
    for r in rows:
        w.writerow([r.family, r.variable, r.verdict, "nan" if math.isnan(r.max_eigenvalue) else fmt(r.max_eigenvalue)])
    return buf.getvalue()
