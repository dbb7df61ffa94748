"""Zeta filter: replace the unrecoverable eigenvalue tail with a power law.

Modes ``1..K`` keep their empirical eigenvalues. Modes ``i > K`` get
``c * i**-beta`` with ``c = lambda_K * K**beta``, so the decay continues
smoothly from the last trusted eigenvalue. Eigenvectors are never touched and
total variance is not renormalized.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from spectral_lab.diagnostics import (
    NoiseFloor,
    SignalDecomposition,
    noise_floor,
    recoverable_dimension,
    spectral_slope,
)
from spectral_lab.errors import CalibrationRefused, ContractError
from spectral_lab.matrix import Spectrum
from spectral_lab.separation import MahalanobisResult

AUTO = "auto"


@dataclass(frozen=True)
class CalibratedSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    K: int
    beta: float
    c: float
    raw_eigenvalues: np.ndarray
    beta_source: str = "given"
    K_source: str = "given"
    beta_floored: bool = False
    fitted_beta: float | None = None

    @property
    def D(self) -> int:
        return self.eigenvalues.shape[0]

    def provenance(self) -> dict:
        return {
            "method": "zeta_filter",
            "K": self.K,
            "K_source": self.K_source,
            "beta": self.beta,
            "beta_source": self.beta_source,
            "beta_floored": self.beta_floored,
            "fitted_beta": self.fitted_beta,
            "c": self.c,
            "trace_raw": float(np.sum(self.raw_eigenvalues)),
            "trace_calibrated": float(np.sum(self.eigenvalues)),
        }


def calibrate(
    s: Spectrum,
    K: int | str = AUTO,
    beta: float | str = AUTO,
    nf: NoiseFloor | None = None,
) -> CalibratedSpectrum:
    """Splice a power-law tail onto the spectrum after mode K.

    Args:
        s: spectrum to calibrate.
        K: splice index, or ``"auto"`` for the recoverable dimension under
            ``nf`` (theory floor with c0 = 1 when ``nf`` is None).
        beta: tail exponent, or ``"auto"`` to fit it over the recoverable head
            (modes 1..max(K, 3)). A fit that is not positive is floored at 0
            with a warning.

    Raises:
        CalibrationRefused: when K is 0 or lambda_K is not positive.
        ContractError: K outside 1..D, or an explicit negative beta.
    """
    lam = s.eigenvalues
    D = lam.size
    K_source = "given"
    if isinstance(K, str):
        if K != AUTO:
            raise ContractError(f"K must be an integer or 'auto', got {K!r}")
        K = recoverable_dimension(s, nf if nf is not None else noise_floor(s))
        K_source = "recoverable_dimension"
        if K == 0:
            raise CalibrationRefused("no mode clears the noise floor; nothing to anchor the tail on")
    K = int(K)
    if K == 0:
        raise CalibrationRefused("K = 0: nothing recoverable")
    if not 1 <= K <= D:
        raise ContractError(f"K={K} out of range 1..{D}")
    if lam[K - 1] <= 0:
        raise CalibrationRefused(f"lambda_{K} = {lam[K - 1]} is not positive")

    beta_source = "given"
    floored = False
    fitted = None
    if isinstance(beta, str):
        if beta != AUTO:
            raise ContractError(f"beta must be a number or 'auto', got {beta!r}")
        fitted = _head_slope(lam, K)
        beta_source = "head_fit"
        if fitted <= 0:
            warnings.warn(
                f"fitted spectral slope {fitted:.4g} is not positive; using beta = 0 (flat tail)",
                stacklevel=2,
            )
            beta, floored = 0.0, True
        else:
            beta = fitted
    beta = float(beta)
    if beta < 0 or not math.isfinite(beta):
        raise ContractError(f"beta must be finite and >= 0, got {beta}")

    c = float(lam[K - 1]) * K**beta
    out = lam.copy()
    tail = np.arange(K + 1, D + 1, dtype=np.float64)
    out[K:] = c * tail ** (-beta)
    return CalibratedSpectrum(
        eigenvalues=out,
        eigenvectors=s.eigenvectors,
        K=K,
        beta=beta,
        c=c,
        raw_eigenvalues=lam,
        beta_source=beta_source,
        K_source=K_source,
        beta_floored=floored,
        fitted_beta=fitted,
    )


def _head_slope(lam: np.ndarray, K: int) -> float:
    """Slope over modes 1..max(K, 3); a two-point fit when only 2 modes are positive."""
    hi = min(lam.size, max(K, 3))
    try:
        return spectral_slope(lam, (1, hi)).beta
    except ContractError:
        if lam.size >= 2 and lam[1] > 0:
            return math.log(lam[0] / lam[1]) / math.log(2.0)
        raise CalibrationRefused("fewer than two positive modes; cannot fit a tail exponent")


def calibrated_mahalanobis(sd: SignalDecomposition, cs: CalibratedSpectrum) -> MahalanobisResult:
    """d_M^2 over all modes using the calibrated eigenvalues.

    ``truncated_energy`` is the head (modes 1..K) part of the same sum.
    """
    if sd.alphas_sq.shape != cs.eigenvalues.shape:
        raise ContractError(
            f"mode count mismatch: {sd.alphas_sq.size} vs {cs.eigenvalues.size}"
        )
    lam = cs.eigenvalues
    per_mode = np.zeros_like(lam)
    pos = lam > 0
    per_mode[pos] = sd.alphas_sq[pos] / lam[pos]
    return MahalanobisResult(math.fsum(per_mode), math.fsum(per_mode[: cs.K]), per_mode, cs.K)


def calibrated_fisher(s: Spectrum, cs: CalibratedSpectrum, d: np.ndarray) -> np.ndarray:
    """Fisher direction sum_i (alpha_i / calibrated lambda_i) v_i."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (s.D,) or cs.D != s.D:
        raise ContractError(f"dimension mismatch: d {d.shape}, spectra {s.D} / {cs.D}")
    alphas = s.eigenvectors.T @ d
    lam = cs.eigenvalues
    coef = np.zeros_like(lam)
    pos = lam > 0
    if not pos.any():
        raise ContractError("calibrated spectrum has no positive eigenvalues")
    coef[pos] = alphas[pos] / lam[pos]
    return s.eigenvectors @ coef
