"""Dense complex Hermitian kernels and the two spectral allocation procedures.

All rates in this module are in nats.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class LinalgDomainError(ValueError):
    """Input outside the domain of a matrix function (non-finite, not PD, ...)."""


class SingularBlock(LinalgDomainError):
    """The block that must be inverted is (numerically) singular."""


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # unitary, columns match eigenvalues


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise LinalgDomainError("matrix has non-finite entries")


def hermitian_part(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return 0.5 * (x + x.conj().T)


def eig_hermitian(x) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending."""
    x = np.asarray(x, dtype=complex)
    _check_finite(x)
    w, u = np.linalg.eigh(hermitian_part(x))
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], u[:, order])


def _pd_threshold(x: np.ndarray) -> float:
    return x.shape[0] * 1e-12 * np.linalg.norm(x)


def logdet_psd(x) -> float:
    """log det of a positive definite Hermitian matrix, via Cholesky.

    Raises LinalgDomainError when the smallest eigenvalue does not clear
    ``dim * 1e-12 * ||X||_F``.
    """
    x = hermitian_part(x)
    _check_finite(x)
    lam_min = np.linalg.eigvalsh(x)[0]
    if lam_min <= _pd_threshold(x):
        raise LinalgDomainError(
            f"matrix is not positive definite (smallest eigenvalue {lam_min:.3e})"
        )
    chol = np.linalg.cholesky(x)
    return float(2.0 * np.sum(np.log(np.real(np.diag(chol)))))


def schur_complement(q, m1: int) -> np.ndarray:
    """Schur complement of the lower-right block: Q11 - Q12 Q22^{-1} Q21.

    ``m1`` is the size of the upper-left block.
    """
    q = hermitian_part(q)
    _check_finite(q)
    q11, q12, q22 = q[:m1, :m1], q[:m1, m1:], q[m1:, m1:]
    if q22.shape[0] == 0:
        return q11.copy()
    tr = max(np.real(np.trace(q)), np.finfo(float).tiny)
    if np.linalg.eigvalsh(q22)[0] <= 1e-10 * tr:
        raise SingularBlock("lower block Q22 is singular; use the PSD-relaxed form")
    return hermitian_part(q11 - q12 @ np.linalg.solve(q22, q12.conj().T))


def psd_sqrt(x, inverse: bool = False) -> np.ndarray:
    """Square root (or inverse square root) of a PSD matrix.

    Eigenvalues are clamped at 0 first; rounding can leave tiny negatives.
    """
    w, u = np.linalg.eigh(hermitian_part(x))
    w = np.clip(w, 0.0, None)
    if inverse:
        if np.any(w <= 0):
            raise LinalgDomainError("inverse square root of a singular matrix")
        s = 1.0 / np.sqrt(w)
    else:
        s = np.sqrt(w)
    return (u * s) @ u.conj().T


def _bisect(f, lo: float, hi: float, rtol: float = 1e-12, maxiter: int = 400) -> float:
    # f increasing on [lo, hi], f(lo) <= 0 <= f(hi)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * max(abs(lo), abs(hi), 1e-300):
            break
    return 0.5 * (lo + hi)


def waterfill(eigvals, power: float) -> tuple[np.ndarray, float]:
    """Waterfilling over parallel channels with gains ``eigvals``.

    Returns the per-mode powers and the rate sum(log(1 + lam_i p_i)) in nats.
    The water level is located by bisection, then recomputed exactly on the
    active set so the powers sum to ``power``.
    """
    lam = np.asarray(eigvals, dtype=float).ravel()
    if not (np.all(np.isfinite(lam)) and np.isfinite(power)):
        raise LinalgDomainError("non-finite waterfilling input")
    if np.any(lam < 0) or power < 0:
        raise LinalgDomainError("waterfilling needs nonnegative gains and power")
    n = lam.size
    pos = lam > 0
    if not np.any(pos):
        # every mode dead: any split is optimal, spread it evenly
        return np.full(n, power / max(n, 1)), 0.0
    if power == 0:
        return np.zeros(n), 0.0
    inv = np.full(n, np.inf)
    inv[pos] = 1.0 / lam[pos]

    def excess(mu):
        return np.sum(np.clip(mu - inv[pos], 0.0, None)) - power

    lo = inv[pos].min()
    hi = inv[pos].max() + power
    mu = _bisect(excess, lo, hi)
    # a mode with 1/lam == mu exactly is included
    active = pos & (inv <= mu)
    mu = (power + inv[active].sum()) / active.sum()
    p = np.zeros(n)
    p[active] = np.clip(mu - inv[active], 0.0, None)
    return p, float(np.sum(np.log1p(lam * p)))


def reverse_waterfill(eigvals, rate: float) -> tuple[np.ndarray, float]:
    """Reverse waterfilling: distortions d_i = min(mu, lam_i) with
    sum(log(lam_i / d_i)) = rate (nats). Returns (distortions, mu)."""
    lam = np.asarray(eigvals, dtype=float).ravel()
    if not (np.all(np.isfinite(lam)) and np.isfinite(rate)):
        raise LinalgDomainError("non-finite reverse waterfilling input")
    if np.any(lam <= 0) or rate < 0:
        raise LinalgDomainError("reverse waterfilling needs positive eigenvalues, rate >= 0")
    top = lam.max()
    if rate == 0:
        return lam.copy(), float(top)
    loglam = np.log(lam)

    # work on log(mu); rate spent is decreasing in mu
    def deficit(logmu):
        return rate - np.sum(np.clip(loglam - logmu, 0.0, None))

    logmu = _bisect(deficit, np.log(top) - rate - 1.0, np.log(top))
    active = loglam > logmu
    logmu = (loglam[active].sum() - rate) / active.sum()
    mu = float(np.exp(logmu))
    return np.minimum(mu, lam), mu


def waterfill_capacity(h, power: float) -> tuple[np.ndarray, float]:
    """Capacity-achieving covariance of the MIMO channel ``h`` (rows = receive)
    under a total power constraint, with the rate in nats."""
    h = np.asarray(h, dtype=complex)
    m = h.shape[1]
    if m == 0 or power == 0:
        return np.zeros((m, m), dtype=complex), 0.0
    w, u = np.linalg.eigh(h.conj().T @ h)
    # rounding noise on null modes would otherwise set absurd water levels
    w = np.where(w > 1e-13 * max(w.max(), 0.0), w, 0.0)
    p, rate = waterfill(w, power)
    return (u * p) @ u.conj().T, rate
