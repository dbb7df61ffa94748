"""Class separation: Mahalanobis energy, Fisher directions and ROC-AUC."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from spectral_lab.diagnostics import SignalDecomposition, valid_modes
from spectral_lab.errors import ContractError
from spectral_lab.matrix import Spectrum


@dataclass(frozen=True)
class MahalanobisResult:
    """Full and truncated squared Mahalanobis distance of one contrast.

    ``per_mode`` holds alpha_i^2 / lambda_i for every mode that entered the
    full sum, in mode order.
    """

    full_energy: float
    truncated_energy: float
    per_mode: np.ndarray
    K_used: int

    @property
    def d_m(self) -> float:
        return math.sqrt(self.full_energy)

    @property
    def d_m_truncated(self) -> float:
        return math.sqrt(self.truncated_energy)


@dataclass(frozen=True)
class AucResult:
    gaussian_auc: float
    empirical_auc: float
    class_id: int
    n_pos: int
    n_neg: int


def mahalanobis_energy(sd: SignalDecomposition, K: int | None = None) -> MahalanobisResult:
    """d_M^2 = sum of alpha_i^2 / lambda_i over valid modes.

    ``K`` truncates the sum to the first K modes; ``None`` uses all of them.
    Modes at or below ``lambda_1 * 1e-10`` are treated as zero variance and
    skipped (pseudo-inverse convention).
    """
    ok = valid_modes(sd.lambdas)
    n_valid = int(np.count_nonzero(ok))
    if n_valid == 0:
        raise ContractError("no modes with positive variance")
    if K is None:
        K = n_valid
    if not 0 <= K <= n_valid:
        raise ContractError(f"K={K} exceeds the {n_valid} valid modes")
    per_mode = sd.alphas_sq[ok] / sd.lambdas[ok]
    full = math.fsum(per_mode)
    truncated = math.fsum(per_mode[:K])
    return MahalanobisResult(full, truncated, per_mode, K)


def _alphas(s: Spectrum, d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (s.D,):
        raise ContractError(f"difference vector has shape {d.shape}, expected ({s.D},)")
    return s.eigenvectors.T @ d


def spectral_direction(
    eigenvectors: np.ndarray, lambdas: np.ndarray, alphas: np.ndarray, K: int | None = None
) -> np.ndarray:
    """Sum over the first K usable modes of (alpha_i / lambda_i) v_i."""
    ok = valid_modes(lambdas)
    if not ok.any():
        raise ContractError("all eigenvalues are below the zero clamp")
    if K is not None:
        ok = ok & (np.arange(lambdas.size) < K)
    coef = np.zeros_like(lambdas)
    coef[ok] = alphas[ok] / lambdas[ok]
    return eigenvectors @ coef


def fisher_direction(s: Spectrum, d: np.ndarray, K: int | None = None) -> np.ndarray:
    """Spectral pseudo-inverse direction Sigma^+ d, optionally truncated to K modes."""
    return spectral_direction(s.eigenvectors, s.eigenvalues, _alphas(s, d), K)


def _phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def gaussian_auc(d_m_squared: float) -> float:
    """Phi(d_M / 2) for two equal-covariance Gaussian classes.

    This is the balanced accuracy of the Fisher score thresholded midway
    between the class means. The area under the ROC curve of the same score
    is :func:`fisher_score_auc`, Phi(d_M / sqrt(2)).
    """
    if d_m_squared < 0:
        raise ContractError(f"d_M^2 must be >= 0, got {d_m_squared}")
    return _phi(math.sqrt(d_m_squared) / 2.0)


def fisher_score_auc(d_m_squared: float) -> float:
    """P(w^T x_1 > w^T x_0) for w = Sigma^-1 d: Phi(d_M / sqrt(2)).

    The score difference of a random positive/negative pair is normal with
    mean d_M^2 and variance 2 d_M^2.
    """
    if d_m_squared < 0:
        raise ContractError(f"d_M^2 must be >= 0, got {d_m_squared}")
    return _phi(math.sqrt(d_m_squared / 2.0))


def roc_auc(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float:
    """Mann-Whitney AUC with half credit for ties.

    Counts are exact integers (from binary searches into the sorted
    negatives), so the result matches pairwise enumeration.
    """
    pos = np.asarray(scores_pos, dtype=np.float64).ravel()
    neg = np.sort(np.asarray(scores_neg, dtype=np.float64).ravel())
    if pos.size == 0 or neg.size == 0:
        raise ContractError("ROC-AUC needs at least one positive and one negative score")
    below = np.searchsorted(neg, pos, side="left")
    at_or_below = np.searchsorted(neg, pos, side="right")
    wins2 = 2 * int(np.sum(below)) + int(np.sum(at_or_below - below))
    return wins2 / (2 * pos.size * neg.size)


def macro_ovr_auc(scores: np.ndarray, labels: Sequence[int]) -> tuple[float, list[float]]:
    """One-vs-rest AUC per class (column c scores class c) and their unweighted mean."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise ContractError(
            f"scores must be (N, C) with N={labels.shape[0]}, got {scores.shape}"
        )
    n_classes = scores.shape[1]
    if n_classes < 2:
        raise ContractError("one-vs-rest AUC needs at least 2 classes")
    per_class = []
    for c in range(n_classes):
        mine = labels == c
        if not mine.any():
            raise ContractError(f"class {c} is absent from the labels")
        if mine.all():
            raise ContractError(f"class {c} has no negatives")
        per_class.append(roc_auc(scores[mine, c], scores[~mine, c]))
    return float(np.mean(per_class)), per_class
