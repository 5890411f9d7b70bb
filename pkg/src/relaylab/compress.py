"""Compress-and-forward with rate-distortion or Wyner-Ziv compression at the relay.

Pipeline (all in nats internally):

1. the source waterfills over H11 as if the relay were absent -> Q11*, R11;
2. the destination decodes the relay first, treating the source as noise,
   so the relay waterfills over the whitened channel
   (I + H11 Q11* H11^H)^(-1/2) H12 -> Q22*, R12;
3. the relay compresses y2 at rate R12, modelled as y2~ = A y2 + z~ with
   z~ ~ CN(0, Z); the distortion comes from reverse waterfilling over the
   eigenmodes of S22 (rate-distortion) or of S_{2|1} (Wyner-Ziv);
4. R_CF = logdet(I + H^ Q11* H^^H) with H^ = [H11; (Z + A A^H)^(-1/2) A H21].

The rate constraint of the compression step is read as the Gaussian
distortion-rate condition logdet(S) - logdet(D) <= R.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization, PowerConstraints
from .hermitian import (
    eig_hermitian,
    hermitian_part,
    logdet_psd,
    psd_sqrt,
    reverse_waterfill,
    waterfill_capacity,
)
from .reports import to_bits

SCHEMES = ("RD", "WZ")


@dataclass
class CompressionParams:
    a: np.ndarray  # N2 x N2 scaling
    z: np.ndarray  # N2 x N2 compression-noise covariance
    scheme: str
    distortion: Optional[np.ndarray] = None
    water_level: float = float("nan")


@dataclass
class CFResult:
    r11: float  # nats
    r12: float
    r_cf: float
    q11: np.ndarray
    q22: np.ndarray
    params: CompressionParams
    s11: np.ndarray
    s22: np.ndarray
    s21: np.ndarray
    s2_given_1: np.ndarray

    @property
    def rate_bits(self) -> float:
        return to_bits(self.r_cf)

    @property
    def bits(self) -> dict:
        return {"R11": to_bits(self.r11), "R12": to_bits(self.r12), "R_CF": to_bits(self.r_cf)}


def cf_source_covariance(ch: ChannelRealization, pc: PowerConstraints) -> tuple[np.ndarray, float]:
    """Source covariance that waterfills H11 alone, and its rate R11 (nats)."""
    return waterfill_capacity(ch.h11, pc.p1)


def interference_whitener(ch: ChannelRealization, q11: np.ndarray) -> np.ndarray:
    n1 = ch.h11.shape[0]
    return psd_sqrt(np.eye(n1) + ch.h11 @ q11 @ ch.h11.conj().T, inverse=True)


def cf_relay_rate(ch: ChannelRealization, pc: PowerConstraints, q11: np.ndarray) -> tuple[np.ndarray, float]:
    """Relay covariance and rate R12 (nats) against the source's interference."""
    h_eff = interference_whitener(ch, q11) @ ch.h12
    return waterfill_capacity(h_eff, pc.p2)


def _distortion(s: np.ndarray, r12: float):
    eig = eig_hermitian(s)
    d, mu = reverse_waterfill(eig.eigenvalues, r12)
    u = eig.eigenvectors
    dmat = (u * d) @ u.conj().T
    # (I - D S^{-1})^(1/2) shares the eigenbasis: sqrt(1 - d_i / lam_i)
    a = (u * np.sqrt(np.clip(1.0 - d / eig.eigenvalues, 0.0, None))) @ u.conj().T
    return dmat, a, mu


def rd_params(s22: np.ndarray, r12: float) -> CompressionParams:
    """Rate-distortion compression of y2 with covariance S22 at rate R12 (nats)."""
    s22 = hermitian_part(s22)
    d, a, mu = _distortion(s22, r12)
    return CompressionParams(a, d, "RD", d, mu)


def conditional_covariance(s11: np.ndarray, s22: np.ndarray, s21: np.ndarray) -> np.ndarray:
    """S_{2|1} = S22 - S21 S11^{-1} S21^H, regularized by 1e-12 tr(S_{2|1}) if singular."""
    s = hermitian_part(s22 - s21 @ np.linalg.solve(s11, s21.conj().T))
    lam = np.linalg.eigvalsh(s)
    if lam[0] <= 1e-12 * max(lam[-1], 0.0):
        s = s + 1e-12 * max(np.real(np.trace(s)), 1e-300) * np.eye(s.shape[0])
    return s


def wz_params(s11: np.ndarray, s22: np.ndarray, s21: np.ndarray, r12: float) -> CompressionParams:
    """Wyner-Ziv compression: reverse waterfilling against S_{2|1}."""
    s = conditional_covariance(s11, s22, s21)
    d, a, mu = _distortion(s, r12)
    return CompressionParams(a, d, "WZ", d, mu)


def signal_covariances(ch: ChannelRealization, q11: np.ndarray):
    """(S11, S22, S21): destination (relay signal cancelled) and relay observations."""
    h11, h21 = ch.h11, ch.h21
    s11 = np.eye(h11.shape[0]) + h11 @ q11 @ h11.conj().T
    s22 = np.eye(h21.shape[0]) + h21 @ q11 @ h21.conj().T
    s21 = h21 @ q11 @ h11.conj().T
    return hermitian_part(s11), hermitian_part(s22), s21


def effective_channel(ch: ChannelRealization, params: CompressionParams) -> np.ndarray:
    """[H11; (Z + A A^H)^(-1/2) A H21]."""
    a, z = params.a, params.z
    lower = psd_sqrt(z + a @ a.conj().T, inverse=True) @ a @ ch.h21
    return np.vstack([ch.h11, lower])


def cf_rate(ch: ChannelRealization, pc: PowerConstraints, scheme: str = "WZ",
            r12: Optional[float] = None) -> CFResult:
    """Compress-and-forward rate.  ``r12`` (nats) overrides the relay's rate."""
    scheme = scheme.upper()
    if scheme not in SCHEMES:
        raise ValueError(f"unknown compression scheme {scheme!r}")
    q11, r11 = cf_source_covariance(ch, pc)
    q22, r12_relay = cf_relay_rate(ch, pc, q11)
    r12 = r12_relay if r12 is None else float(r12)
    s11, s22, s21 = signal_covariances(ch, q11)
    s21c = conditional_covariance(s11, s22, s21)
    params = rd_params(s22, r12) if scheme == "RD" else wz_params(s11, s22, s21, r12)
    if r12 == 0:
        r_cf = r11  # A = 0: the compressed signal carries nothing
    else:
        h_hat = effective_channel(ch, params)
        r_cf = logdet_psd(np.eye(h_hat.shape[0]) + h_hat @ q11 @ h_hat.conj().T)
    return CFResult(r11, r12, r_cf, q11, q22, params, s11, s22, s21, s21c)
