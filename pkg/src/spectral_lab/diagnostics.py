"""Finite-sample spectral diagnostics of an embedding covariance.

Label-agnostic quantities (effective rank, noise floor, recoverable dimension
K(N), spectral slope) only need a :class:`Spectrum`. Label-aware ones
(structural dimensionality k(N), Mahalanobis energy) work on a
:class:`SignalDecomposition` of one class contrast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from spectral_lab.errors import ContractError, DivergenceError
from spectral_lab.matrix import (
    CovarianceMatrix,
    EmbeddingSet,
    Spectrum,
    center,
    covariance,
    eig_sym,
    op_norm_sym_diff,
)

DEFAULT_VARIANCE_FRACTION = 0.95
DEFAULT_TAU = 0.1
DEFAULT_C0 = 1.0
# Modes at or below this fraction of lambda_1 are numerical zeros.
VALID_MODE_RTOL = 1e-10
SLOPE_FLOOR_RTOL = 1e-12
ZETA_TERMS = 100_000
VACUOUS_GAP = 1e-14

NoiseMethod = Literal["theory", "split_half"]


def _values(s: Spectrum | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(s, Spectrum):
        return s.eigenvalues
    return np.asarray(s, dtype=np.float64)


def valid_modes(lambdas: np.ndarray) -> np.ndarray:
    """Boolean mask of modes with lambda_i > lambda_1 * 1e-10."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0 or lambdas[0] <= 0:
        return np.zeros(lambdas.shape, dtype=bool)
    return lambdas > lambdas[0] * VALID_MODE_RTOL


@dataclass(frozen=True)
class SignalDecomposition:
    """Per-mode variance and squared class-difference projection.

    ``alphas`` keeps the signed projections ``v_i^T d`` so that classifier
    directions can be rebuilt without recomputing them.
    """

    lambdas: np.ndarray
    alphas_sq: np.ndarray
    class_id: int = 0
    alphas: np.ndarray | None = field(default=None, repr=False)
    d: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        lam = np.asarray(self.lambdas, dtype=np.float64)
        asq = np.asarray(self.alphas_sq, dtype=np.float64)
        if lam.shape != asq.shape:
            raise ContractError(
                f"lambdas and alphas_sq differ in length: {lam.shape} vs {asq.shape}"
            )
        if np.any(asq < 0):
            raise ContractError("alphas_sq must be non-negative")
        if np.any(np.diff(lam) > 0):
            raise ContractError("lambdas must be non-increasing")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "alphas_sq", asq)

    @property
    def modes(self) -> int:
        return int(np.count_nonzero(self.lambdas > 0))

    @property
    def ratios(self) -> np.ndarray:
        """alpha_i^2 / lambda_i on valid modes, 0 elsewhere."""
        out = np.zeros_like(self.lambdas)
        ok = valid_modes(self.lambdas)
        with np.errstate(over="ignore"):  # inf still compares correctly against tau
            out[ok] = self.alphas_sq[ok] / self.lambdas[ok]
        return out


@dataclass(frozen=True)
class NoiseFloor:
    value: float
    method: str
    c0: float | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "c0": self.c0, "seed": self.seed}


def effective_rank(s: Spectrum | Sequence[float], variance_fraction: float = DEFAULT_VARIANCE_FRACTION) -> int:
    """Smallest m whose leading m eigenvalues explain ``variance_fraction`` of the trace."""
    if not 0.0 < variance_fraction <= 1.0:
        raise ContractError(f"variance_fraction must be in (0, 1], got {variance_fraction}")
    lam = np.clip(_values(s), 0.0, None)
    total = float(np.sum(lam))
    if total <= 0.0:
        raise ContractError("effective rank is undefined for an all-zero spectrum")
    explained = np.cumsum(lam) / total
    # absorbs rounding in the cumulative sum, e.g. 0.5 + 0.3 + 0.15
    hits = np.nonzero(explained >= variance_fraction - 1e-12)[0]
    return int(hits[0]) + 1 if hits.size else lam.size


def class_contrast(e: EmbeddingSet, class_id: int, other: int | None = None) -> np.ndarray:
    """Mean difference mu_class - mu_rest (one-vs-rest) or mu_class - mu_other."""
    if e.labels is None:
        raise ContractError("class contrasts need labels")
    if not 0 <= class_id < e.n_classes:
        raise ContractError(f"class {class_id} not in 0..{e.n_classes - 1}")
    inside = e.labels == class_id
    if other is None:
        outside = ~inside
    else:
        if not 0 <= other < e.n_classes or other == class_id:
            raise ContractError(f"invalid pairwise contrast {class_id} vs {other}")
        outside = e.labels == other
    if not inside.any() or not outside.any():
        raise ContractError(f"class {class_id} contrast has an empty side")
    return e.data[inside].mean(axis=0) - e.data[outside].mean(axis=0)


def decompose(s: Spectrum, d: np.ndarray, class_id: int = 0) -> SignalDecomposition:
    """Project a mean-difference vector onto the eigenbasis."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (s.D,):
        raise ContractError(f"difference vector has shape {d.shape}, expected ({s.D},)")
    alphas = s.eigenvectors.T @ d
    return SignalDecomposition(s.eigenvalues, alphas**2, class_id, alphas, d)


def signal_decomposition(
    s: Spectrum, e: EmbeddingSet, class_id: int, other: int | None = None
) -> SignalDecomposition:
    return decompose(s, class_contrast(e, class_id, other), class_id)


def structural_dimensionality(sd: SignalDecomposition, tau: float = DEFAULT_TAU) -> int:
    """k(N): count of valid modes with alpha_i^2 / lambda_i >= tau."""
    if tau <= 0:
        raise ContractError(f"tau must be positive, got {tau}")
    ok = valid_modes(sd.lambdas)
    return int(np.count_nonzero(sd.ratios[ok] >= tau))


def split_half_floor(
    e: EmbeddingSet, seed: int = 0, by_class: bool = False
) -> float:
    """Half the operator-norm gap between covariances of two random halves.

    Rows are split by a permutation drawn from ``seed``; with an odd N the
    last permuted row is left out.
    """
    if e.N < 4:
        raise ContractError(f"split-half needs N >= 4, got {e.N}")
    perm = np.random.default_rng(seed).permutation(e.N)
    half = e.N // 2
    covs = []
    for rows in (perm[:half], perm[half : 2 * half]):
        x = e.data[rows]
        if by_class and e.labels is not None:
            x = x.copy()
            labels = e.labels[rows]
            for c in np.unique(labels):
                x[labels == c] -= x[labels == c].mean(axis=0)
        else:
            x = x - x.mean(axis=0)
        g = x.T @ x / half
        covs.append(CovarianceMatrix(0.5 * (g + g.T), "population", half))
    return half_covariance_gap(*covs)


def half_covariance_gap(a: CovarianceMatrix, b: CovarianceMatrix) -> float:
    return op_norm_sym_diff(a, b) / 2.0


def noise_floor(
    s: Spectrum,
    method: NoiseMethod = "theory",
    c0: float = DEFAULT_C0,
    embeddings: EmbeddingSet | None = None,
    seed: int = 0,
    by_class: bool = False,
) -> NoiseFloor:
    """Operator-norm scale of the covariance estimation error.

    ``theory`` gives ``c0 * lambda_1 * sqrt(D / N)``; ``split_half`` measures
    it from the data behind the spectrum.
    """
    if method == "theory":
        if s.source_N is None or s.source_N < 1:
            raise ContractError("theory noise floor needs the spectrum's sample count")
        lam1 = float(s.eigenvalues[0]) if s.D else 0.0
        return NoiseFloor(c0 * lam1 * math.sqrt(s.D / s.source_N), "theory", c0=c0)
    if method == "split_half":
        if embeddings is None:
            raise ContractError("split_half noise floor needs the embeddings")
        return NoiseFloor(split_half_floor(embeddings, seed, by_class), "split_half", seed=seed)
    raise ContractError(f"unknown noise-floor method {method!r}")


def recoverable_dimension(s: Spectrum | Sequence[float], nf: NoiseFloor | float) -> int:
    """K(N): number of eigenvalues at or above the noise floor (strictly positive only)."""
    floor = nf.value if isinstance(nf, NoiseFloor) else float(nf)
    lam = _values(s)
    return int(np.count_nonzero((lam >= floor) & (lam > 0)))


@dataclass(frozen=True)
class SlopeFit:
    beta: float
    r_squared: float
    fit_range: tuple[int, int]
    n_modes: int

    def __iter__(self):
        return iter((self.beta, self.r_squared))


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return slope, intercept, r2


def spectral_slope(
    s: Spectrum | Sequence[float], fit_range: tuple[int, int] | None = None
) -> SlopeFit:
    """Power-law exponent beta from OLS of log lambda_i on log i.

    ``fit_range`` is an inclusive 1-based mode interval (default: all modes).
    Modes at or below ``lambda_1 * 1e-12`` are dropped. R^2 is NaN when the
    fitted values are constant.
    """
    lam = _values(s)
    lo, hi = fit_range if fit_range is not None else (1, lam.size)
    lo, hi = max(1, int(lo)), min(lam.size, int(hi))
    idx = np.arange(lo, hi + 1)
    vals = lam[lo - 1 : hi]
    keep = vals > (lam[0] * SLOPE_FLOOR_RTOL if lam.size else 0.0)
    keep &= vals > 0
    if np.count_nonzero(keep) < 3:
        raise ContractError(
            f"spectral slope needs >= 3 positive modes in {lo}..{hi}, got {np.count_nonzero(keep)}"
        )
    slope, _, r2 = _ols(np.log(idx[keep]), np.log(vals[keep]))
    return SlopeFit(-slope + 0.0, r2, (lo, hi), int(np.count_nonzero(keep)))


def truncated_zeta(beta: float, K: int) -> float:
    """Partial sum of i^-beta for i = 1..K."""
    if K < 1:
        raise ContractError(f"K must be >= 1, got {K}")
    i = np.arange(K, 0, -1, dtype=np.float64)
    return math.fsum(i ** (-beta))


def riemann_zeta(beta: float) -> float:
    """zeta(beta) for beta > 1: direct sum to 1e5 plus an Euler-Maclaurin tail."""
    if not beta > 1.0 + 1e-6:
        raise DivergenceError(f"zeta({beta}) diverges: harmonic regime beta <= 1")
    m = ZETA_TERMS
    head = truncated_zeta(beta, m)
    tail = m ** (1.0 - beta) / (beta - 1.0) - 0.5 * m ** (-beta) + beta * m ** (-beta - 1.0) / 12.0
    return head + tail


def eigengap(s: Spectrum | Sequence[float], k: int) -> float:
    lam = _values(s)
    if not 1 <= k < lam.size:
        raise ContractError(f"k={k} out of range 1..{lam.size - 1}")
    return float(lam[k - 1] - lam[k])


def davis_kahan_bound(op_err: float, s: Spectrum | Sequence[float], k: int) -> float:
    """min(1, 2 * op_err / delta_k) with delta_k = lambda_k - lambda_{k+1}."""
    if op_err < 0:
        raise ContractError(f"operator-norm error must be >= 0, got {op_err}")
    gap = eigengap(s, k)
    if gap <= VACUOUS_GAP:
        return 1.0
    return min(1.0, 2.0 * op_err / gap)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Everything ``diagnose`` measures, plus the thresholds that produced it."""

    N: int
    D: int
    effective_rank: int
    K_of_N: int
    beta: SlopeFit
    noise_floor: NoiseFloor
    variance_fraction: float
    tau: float
    eigenvalues: np.ndarray
    raw_eigenvalues: np.ndarray
    k_of_N: dict[int, int] = field(default_factory=dict)
    mahalanobis: dict[int, dict] = field(default_factory=dict)
    dk_bound: dict[int, dict] = field(default_factory=dict)
    gap_source: str = "empirical"
    covariance_mode: str = "total"

    @property
    def k_of_N_mean(self) -> float | None:
        if not self.k_of_N:
            return None
        return float(np.mean(list(self.k_of_N.values())))

    def to_dict(self) -> dict:
        out = {
            "N": self.N,
            "D": self.D,
            "covariance": self.covariance_mode,
            "thresholds": {"variance_fraction": self.variance_fraction, "tau": self.tau},
            "noise_floor": self.noise_floor.to_dict(),
            "effective_rank": self.effective_rank,
            "K_of_N": self.K_of_N,
            "beta": {
                "value": self.beta.beta,
                "r_squared": _json_float(self.beta.r_squared),
                "fit_range": list(self.beta.fit_range),
                "n_modes": self.beta.n_modes,
            },
            "trace": float(np.sum(self.eigenvalues)),
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "raw_eigenvalues": [float(x) for x in self.raw_eigenvalues],
            "davis_kahan": {
                "gap_source": self.gap_source,
                "op_err": self.noise_floor.value,
                "per_k": {str(k): v for k, v in self.dk_bound.items()},
            },
        }
        if self.k_of_N:
            out["classes"] = {
                str(c): {"k_of_N": self.k_of_N[c], **self.mahalanobis[c]}
                for c in sorted(self.k_of_N)
            }
            out["k_of_N_mean"] = self.k_of_N_mean
        return out

    def table_rows(self) -> list[tuple[str, float]]:
        """(metric, value) rows named like the usual results tables."""
        rows: list[tuple[str, float]] = [("Eff. Rank", self.effective_rank), ("K(N)", self.K_of_N)]
        for c in sorted(self.k_of_N):
            rows.append((f"k(N) (class {c})", self.k_of_N[c]))
        for c in sorted(self.mahalanobis):
            rows.append((f"M-E (class {c})", self.mahalanobis[c]["d_m_squared"]))
        return rows


def _json_float(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


def default_fit_range(D: int, K: int) -> tuple[int, int]:
    return 1, min(D, max(5, K))


def diagnose(
    e: EmbeddingSet,
    variance_fraction: float = DEFAULT_VARIANCE_FRACTION,
    tau: float = DEFAULT_TAU,
    noise_method: NoiseMethod = "theory",
    c0: float = DEFAULT_C0,
    k_list: Sequence[int] = (1,),
    reference: Spectrum | None = None,
    within_class: bool = False,
    seed: int = 0,
) -> DiagnosticsReport:
    """Run the full diagnostic pass on one embedding set.

    Label-aware blocks (k(N), Mahalanobis energy) are filled only when ``e``
    carries labels. Each class is contrasted against the rest.
    """
    from spectral_lab.separation import mahalanobis_energy

    by_class = within_class and e.labels is not None
    s = eig_sym(covariance(center(e, by_class=by_class)))
    nf = noise_floor(s, noise_method, c0, embeddings=e, seed=seed, by_class=by_class)
    K = recoverable_dimension(s, nf)
    fit_range = default_fit_range(s.D, K)
    try:
        slope = spectral_slope(s, fit_range)
    except ContractError:
        slope = SlopeFit(math.nan, math.nan, fit_range, 0)
    gap_spec = reference if reference is not None else s
    dk = {}
    for k in k_list:
        if not 1 <= k < s.D:
            raise ContractError(f"k={k} out of range 1..{s.D - 1}")
        dk[int(k)] = {
            "eigengap": eigengap(gap_spec, k),
            "bound": davis_kahan_bound(nf.value, gap_spec, k),
        }

    k_of_n: dict[int, int] = {}
    energies: dict[int, dict] = {}
    if e.labels is not None:
        for c in range(e.n_classes):
            sd = signal_decomposition(s, e, c)
            k_of_n[c] = structural_dimensionality(sd, tau)
            if not valid_modes(sd.lambdas).any():
                continue
            K_used = min(K, int(np.count_nonzero(valid_modes(sd.lambdas))))
            me = mahalanobis_energy(sd, K_used) if K_used > 0 else None
            full = mahalanobis_energy(sd)
            trunc = me.truncated_energy if me is not None else 0.0
            energies[c] = {
                "d_m_squared": full.full_energy,
                "d_m": math.sqrt(full.full_energy),
                "d_m_squared_truncated": trunc,
                "d_m_truncated": math.sqrt(trunc),
                "K_used": K_used,
            }

    return DiagnosticsReport(
        N=e.N,
        D=e.D,
        effective_rank=effective_rank(s, variance_fraction),
        K_of_N=K,
        beta=slope,
        noise_floor=nf,
        variance_fraction=variance_fraction,
        tau=tau,
        eigenvalues=s.eigenvalues,
        raw_eigenvalues=s.raw_eigenvalues,
        k_of_N=k_of_n,
        mahalanobis=energies,
        dk_bound=dk,
        gap_source="reference" if reference is not None else "empirical",
        covariance_mode="within_class" if by_class else "total",
    )
