"""Dense symmetric linear algebra for embedding covariances.

Everything here is a pure function of its inputs. The spectrum of the
covariance ``X^T X / N`` is the squared singular values of ``X / sqrt(N)``, so
the SVD and covariance views are interchangeable; this module works with the
covariance eigendecomposition throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from spectral_lab.errors import ContractError, DataQualityError, NumericalError

Convention = Literal["population", "unbiased"]

# Off-diagonal Frobenius tolerance relative to ||M||_F and sweep budget for Jacobi.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
CENTER_TOL = 1e-8
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class EmbeddingSet:
    """N x D real embeddings with optional integer class labels.

    Attributes:
        data: (N, D) float64 array, one sample per row.
        labels: optional (N,) int array with classes 0..C-1, each present.
    """

    data: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise ContractError(f"embeddings must be 2-D, got shape {data.shape}")
        n, d = data.shape
        if n < 2 or d < 1:
            raise ContractError(f"need N >= 2 and D >= 1, got N={n}, D={d}")
        if not np.all(np.isfinite(data)):
            bad = int(np.count_nonzero(~np.isfinite(data)))
            raise DataQualityError(f"embedding matrix contains {bad} NaN/Inf entries")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != n:
                raise ContractError(
                    f"labels must have length N={n}, got shape {labels.shape}"
                )
            if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ContractError("labels must be integers")
            labels = labels.astype(np.int64)
            if labels.min() < 0:
                raise ContractError("labels must be non-negative")
            present = np.unique(labels)
            expected = np.arange(int(labels.max()) + 1)
            if present.shape != expected.shape:
                missing = sorted(set(expected.tolist()) - set(present.tolist()))
                raise ContractError(f"class ids {missing} have no samples")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def D(self) -> int:
        return self.data.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray
    divisor_convention: Convention = "population"
    source_N: int | None = None

    @property
    def D(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues with matched orthonormal eigenvectors.

    ``eigenvalues`` are clamped at zero; ``raw_eigenvalues`` keep the solver
    output for audit. Column ``i`` of ``eigenvectors`` pairs with entry ``i``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_N: int | None = None
    raw_eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def D(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))


@dataclass(frozen=True)
class PrincipalAngles:
    sines: np.ndarray

    @property
    def k(self) -> int:
        return self.sines.shape[0]

    @property
    def max_sine(self) -> float:
        return float(self.sines[-1])


def center(e: EmbeddingSet, by_class: bool = False) -> EmbeddingSet:
    """Subtract column means.

    With ``by_class=True`` each class is centered on its own mean, so the
    covariance computed afterwards is the pooled within-class covariance.
    """
    x = e.data
    if by_class:
        if e.labels is None:
            raise ContractError("by_class centering needs labels")
        out = np.empty_like(x)
        for c in range(e.n_classes):
            rows = e.labels == c
            out[rows] = x[rows] - x[rows].mean(axis=0)
    else:
        out = x - x.mean(axis=0)
    return EmbeddingSet(out, e.labels)


def covariance(e: EmbeddingSet, convention: Convention = "population") -> CovarianceMatrix:
    """``X^T X`` divided by N (population) or N-1 (unbiased); X must be centered."""
    x = e.data
    means = np.abs(x.mean(axis=0))
    if np.any(means > CENTER_TOL):
        worst = int(np.argmax(means))
        raise ContractError(
            f"input is not centered: column {worst} has mean {means[worst]:.3e}"
        )
    if convention == "population":
        divisor = e.N
    elif convention == "unbiased":
        divisor = e.N - 1
    else:
        raise ContractError(f"unknown divisor convention {convention!r}")
    m = x.T @ x / divisor
    m = 0.5 * (m + m.T)
    return CovarianceMatrix(m, convention, e.N)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings for one cyclic sweep: n-1 rounds of n/2 disjoint (p, q) pairs."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(
    a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Rotations are applied in round-robin order, n/2 disjoint pairs at a time,
    which is the same set of plane rotations as the serial cyclic ordering
    grouped into commuting batches. Returns unsorted ``(w, V)``.

    Raises:
        NumericalError: if the off-diagonal norm is still above
            ``tol * ||a||_F`` after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    if n == 1:
        return a.diagonal().copy(), np.ones((1, 1))
    pad = n % 2
    if pad:
        a = np.pad(a, ((0, 1), (0, 1)))
    m = a.shape[0]
    v = np.eye(m)
    scale = np.linalg.norm(a)
    target = tol * scale
    rounds = _round_robin(m)

    offdiag = ~np.eye(m, dtype=bool)

    def off_norm() -> float:
        return float(np.linalg.norm(a[offdiag]))

    off = off_norm()
    sweeps = 0
    while off > target:
        if sweeps >= max_sweeps:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps: "
                f"off-diagonal residual {off:.3e} > {target:.3e}"
            )
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            app = a[p, p]
            aqq = a[q, q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = np.where(active, (aqq - app) / (2.0 * apq), 0.0)
                big = np.abs(theta) > 1e150
                t = np.where(
                    big,
                    0.5 / theta,
                    np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
                )
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            ap = a[:, p]
            aq = a[:, q]
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap = a[p, :]
            aq = a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp = v[:, p]
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        sweeps += 1
        off = off_norm()

    w = a.diagonal().copy()
    if pad:
        # the padded coordinate never rotates, so it is the last row/column
        w = w[:n]
        v = v[:n, :n]
    return w, v


def _fix_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def eig_sym(m: CovarianceMatrix | np.ndarray, source_N: int | None = None) -> Spectrum:
    """Eigendecomposition of a covariance matrix, sorted descending.

    The input is symmetrized by averaging with its transpose. Each eigenvector
    is sign-fixed so its largest-magnitude entry (first one on ties) is
    non-negative, making serialized spectra stable across runs.
    """
    if isinstance(m, CovarianceMatrix):
        a = m.entries
        source_N = m.source_N if source_N is None else source_N
    else:
        a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataQualityError("matrix contains NaN/Inf")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(a)))):
        raise ContractError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    w, v = jacobi_eigh(0.5 * (a + a.T))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = _fix_signs(v[:, order])
    return Spectrum(np.maximum(w, 0.0), v, source_N, raw_eigenvalues=w)


def op_norm_sym_diff(a: CovarianceMatrix | np.ndarray, b: CovarianceMatrix | np.ndarray) -> float:
    """Spectral norm of ``a - b`` for symmetric a, b (max absolute eigenvalue)."""
    a = a.entries if isinstance(a, CovarianceMatrix) else np.asarray(a, dtype=np.float64)
    b = b.entries if isinstance(b, CovarianceMatrix) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    w, _ = jacobi_eigh(0.5 * (diff + diff.T))
    return float(np.max(np.abs(w))) if w.size else 0.0


def principal_angles(ref: Spectrum | np.ndarray, test: Spectrum | np.ndarray, k: int) -> PrincipalAngles:
    """Sines of the principal angles between the leading-k eigenvector blocks.

    The cosines are the singular values of ``V_ref[:, :k]^T V_test[:, :k]``.
    Small angles are taken from the component of the test block orthogonal to
    the reference block, where ``sqrt(1 - cos^2)`` would lose precision.
    """
    vr = ref.eigenvectors if isinstance(ref, Spectrum) else np.asarray(ref)
    vt = test.eigenvectors if isinstance(test, Spectrum) else np.asarray(test)
    if vr.shape[0] != vt.shape[0]:
        raise ContractError(f"dimension mismatch: {vr.shape[0]} vs {vt.shape[0]}")
    if not 1 <= k <= min(vr.shape[1], vt.shape[1]):
        raise ContractError(f"k={k} out of range 1..{min(vr.shape[1], vt.shape[1])}")
    a = vr[:, :k]
    b = vt[:, :k]
    cosines = np.clip(np.linalg.svd(a.T @ b, compute_uv=False), 0.0, 1.0)
    from_cos = np.sqrt(1.0 - cosines**2)  # ascending, since cosines descend
    resid = b - a @ (a.T @ b)
    from_perp = np.clip(np.sort(np.linalg.svd(resid, compute_uv=False)), 0.0, 1.0)
    sines = np.where(from_perp**2 < 0.5, from_perp, from_cos)
    return PrincipalAngles(np.maximum.accumulate(sines))
