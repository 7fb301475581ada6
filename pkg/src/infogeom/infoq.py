"""Differential entropy, mutual information and entropy power of the output (nats)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ChannelSpec,
    DiscreteInput,
    Engine,
    ScenarioError,
    UnsupportedError,
    expect_over_y,
    log_pdf_y,
)

LOG_2PI_E = math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class InfoValues:
    entropy_nats: float
    mi_nats: float
    entropy_power: float


def noise_entropy(spec: ChannelSpec) -> float:
    return 0.5 * (spec.n * LOG_2PI_E + spec.logdet_z)


def gaussian_entropy(spec: ChannelSpec) -> float:
    if isinstance(spec.input, DiscreteInput):
        raise UnsupportedError("Gaussian closed form requested for a discrete input")
    _, logdet = np.linalg.slogdet(spec.Sigma_y)
    return 0.5 * (spec.n * LOG_2PI_E + float(logdet))


def entropy_by_integration(spec: ChannelSpec, engine: Engine, with_stderr: bool = False):
    """``E[-log p(y)]`` through the expectation engine, for any input law."""
    out = expect_over_y(spec, engine, lambda Y: -log_pdf_y(spec, Y), with_stderr=with_stderr)
    if with_stderr:
        return float(out[0]), float(out[1])
    return float(out)


def entropy(spec: ChannelSpec, engine: Engine, with_stderr: bool = False):
    """Differential entropy; Gaussian inputs use the log-det closed form."""
    if not isinstance(spec.input, DiscreteInput):
        h = gaussian_entropy(spec)
        return (h, 0.0) if with_stderr else h
    return entropy_by_integration(spec, engine, with_stderr)


def mutual_information(spec: ChannelSpec, engine: Engine, with_stderr: bool = False):
    if with_stderr:
        h, err = entropy(spec, engine, True)
        return h - noise_entropy(spec), err
    return entropy(spec, engine) - noise_entropy(spec)


def power_from_entropy(h: float, n: int) -> float:
    return math.exp(2.0 * h / n - LOG_2PI_E)


def entropy_power(spec: ChannelSpec, engine: Engine) -> float:
    return power_from_entropy(entropy(spec, engine), spec.n)


def info_values(spec: ChannelSpec, engine: Engine) -> InfoValues:
    h = entropy(spec, engine)
    return InfoValues(h, h - noise_entropy(spec), power_from_entropy(h, spec.n))


def gaussian_mi(spec: ChannelSpec) -> float:
    """``1/2 log det(I + Sz^{-1} H P Ss P' H')``."""
    if isinstance(spec.input, DiscreteInput):
        raise UnsupportedError("Gaussian closed form requested for a discrete input")
    M = np.eye(spec.n) + spec.Sigma_z_inv @ spec.G @ spec.Sigma_s @ spec.G.T
    sign, logdet = np.linalg.slogdet(M)
    return 0.5 * float(logdet)


def input_precoded_cov(spec: ChannelSpec) -> np.ndarray:
    """``Q = P Ss P'``."""
    Q = spec.P @ spec.Sigma_s @ spec.P.T
    return 0.5 * (Q + Q.T)


def white_noise_level(spec: ChannelSpec, N0: float | None = None) -> float:
    """``N0`` such that ``Sigma_z = N0 I``; raises if the noise is not white."""
    Sz = spec.Sigma_z
    level = float(np.trace(Sz)) / spec.n
    if not np.allclose(Sz, level * np.eye(spec.n), rtol=0.0, atol=1e-12 * level):
        raise ScenarioError("low-SNR expansion needs Sigma_z = N0 * I")
    if N0 is not None and not math.isclose(level, N0, rel_tol=1e-12):
        raise ScenarioError(f"Sigma_z = {level} I does not match N0 = {N0}")
    return level


def low_snr_mi(spec: ChannelSpec, N0: float | None = None) -> float:
    """Second-order low-SNR expansion of the mutual information."""
    N0 = white_noise_level(spec, N0)
    HQH = spec.H @ input_precoded_cov(spec) @ spec.H.T
    return float(np.trace(HQH) / (2 * N0) - np.trace(HQH @ HQH) / (4 * N0**2))
