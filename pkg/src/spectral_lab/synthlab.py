"""Synthetic two-class Gaussian embeddings with known population truth.

The population covariance is ``U diag(lambda) U^T`` with ``lambda_i = i**-beta``
and ``U`` a seeded random rotation. Class means are ``-d/2`` and ``+d/2`` with
``d = sum_i a_i u_i``, so the population Mahalanobis energy is
``sum_i a_i**2 / lambda_i`` (``sum_i a_i**2 * i**beta`` without nuisance modes).

Randomness
----------
Every sample matrix is drawn from its own stream. The stream seed is

    mix64(noise_seed, N, trial, stream)

where ``mix64`` folds each word into a SplitMix64 state (``h = splitmix64(h ^ w)``).
The stream is a numpy ``PCG64`` generator; only its ``random()`` doubles are
used, and normals come from the Box-Muller transform below. A row of a sweep
therefore depends on nothing but ``(spec, N, trial)``: adding grid points,
changing the trial count or running rows on several threads leaves existing
rows bit-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from spectral_lab import diagnostics as dg
from spectral_lab.errors import ContractError, SpectralLabError
from spectral_lab.matrix import (
    CovarianceMatrix,
    EmbeddingSet,
    Spectrum,
    center,
    covariance,
    eig_sym,
    op_norm_sym_diff,
    principal_angles,
)
from spectral_lab.separation import (
    fisher_direction,
    fisher_score_auc,
    gaussian_auc,
    mahalanobis_energy,
    roc_auc,
)
from spectral_lab.zetafilter import calibrate, calibrated_fisher

MASK64 = (1 << 64) - 1
TRAIN_STREAM = 0
TEST_STREAM = 1
REFERENCE_STREAM = 2


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (state advanced by the golden gamma first)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(*words: int) -> int:
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


def standard_normal(seed: int, shape: tuple[int, ...]) -> np.ndarray:
    """Box-Muller normals from a PCG64 stream seeded with ``seed``.

    Uniform pairs (u1, u2) become ``r cos(2 pi u2)`` and ``r sin(2 pi u2)`` with
    ``r = sqrt(-2 log u1)``, written to consecutive slots in C order.
    """
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    gen = np.random.Generator(np.random.PCG64(seed))
    u = gen.random(2 * pairs)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(angle)
    z[1::2] = r * np.sin(angle)
    return z[:count].reshape(shape)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator parameters.

    ``signal`` lists a_1, a_2, ... (missing entries are 0). ``nuisance_modes``
    are 1-based mode indices whose variance is multiplied by
    ``nuisance_scale``; they must carry no signal.
    """

    D: int
    beta: float
    signal: tuple[float, ...] = ()
    n_per_class: int = 500
    rotation_seed: int = 0
    noise_seed: int = 0
    nuisance_modes: tuple[int, ...] = ()
    nuisance_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "signal", tuple(float(a) for a in self.signal))
        object.__setattr__(self, "nuisance_modes", tuple(int(i) for i in self.nuisance_modes))
        if self.D < 2:
            raise ContractError(f"D must be >= 2, got {self.D}")
        if not self.beta >= 0:
            raise ContractError(f"beta must be >= 0, got {self.beta}")
        if len(self.signal) > self.D:
            raise ContractError(f"signal has {len(self.signal)} coefficients for D={self.D}")
        for seed in (self.rotation_seed, self.noise_seed):
            if not 0 <= seed <= MASK64:
                raise ContractError(f"seeds must be unsigned 64-bit, got {seed}")
        for i in self.nuisance_modes:
            if not 1 <= i <= self.D:
                raise ContractError(f"nuisance mode {i} outside 1..{self.D}")
            if i <= len(self.signal) and self.signal[i - 1] != 0:
                raise ContractError(f"nuisance mode {i} carries signal {self.signal[i - 1]}")
        if self.nuisance_scale <= 0:
            raise ContractError("nuisance_scale must be positive")

    def signal_vector(self) -> np.ndarray:
        a = np.zeros(self.D)
        a[: len(self.signal)] = self.signal
        return a

    def mode_variances(self) -> np.ndarray:
        lam = np.arange(1, self.D + 1, dtype=np.float64) ** (-self.beta)
        for i in self.nuisance_modes:
            lam[i - 1] *= self.nuisance_scale
        return lam

    def population_d_m_squared(self) -> float:
        a = self.signal_vector()
        return math.fsum(a**2 / self.mode_variances())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["signal"] = list(self.signal)
        out["nuisance_modes"] = list(self.nuisance_modes)
        return out


@dataclass(frozen=True)
class Population:
    sigma: CovarianceMatrix
    sqrt_sigma: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    spectrum: Spectrum
    basis: np.ndarray  # column i is u_{i+1}, in mode order
    d_m_squared: float

    @property
    def d(self) -> np.ndarray:
        return self.mu1 - self.mu0


def random_rotation(D: int, seed: int) -> np.ndarray:
    """QR of a seeded Gaussian matrix with R's diagonal made positive."""
    q, r = np.linalg.qr(standard_normal(mix64(seed, D), (D, D)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@lru_cache(maxsize=16)
def gen_population(spec: SyntheticSpec) -> Population:
    """Population covariance, class means and spectrum for ``spec``."""
    D = spec.D
    u = random_rotation(D, spec.rotation_seed)
    lam = spec.mode_variances()
    sigma = (u * lam) @ u.T
    sigma = 0.5 * (sigma + sigma.T)
    root = (u * np.sqrt(lam)) @ u.T
    root = 0.5 * (root + root.T)
    d = u @ spec.signal_vector()
    order = np.argsort(-lam, kind="stable")
    spectrum = Spectrum(lam[order], u[:, order], None, raw_eigenvalues=lam[order])
    for arr in (sigma, root, d, u, lam):
        arr.flags.writeable = False
    return Population(
        sigma=CovarianceMatrix(sigma, "population", None),
        sqrt_sigma=root,
        mu0=-0.5 * d,
        mu1=0.5 * d,
        spectrum=spectrum,
        basis=u,
        d_m_squared=spec.population_d_m_squared(),
    )


def sample(spec: SyntheticSpec, N: int, trial: int, stream: int = TRAIN_STREAM) -> EmbeddingSet:
    """N samples (N // 2 per class), class 0 rows first, from stream (N, trial, stream)."""
    if N % 2:
        warnings.warn(f"N={N} is odd; drawing {N // 2} samples per class", stacklevel=2)
    n = N // 2
    if n < 2:
        raise ContractError(f"need at least 2 samples per class, got N={N}")
    pop = gen_population(spec)
    z = standard_normal(mix64(spec.noise_seed, N, trial, stream), (2 * n, spec.D))
    x = z @ pop.sqrt_sigma
    x[:n] += pop.mu0
    x[n:] += pop.mu1
    labels = np.repeat(np.array([0, 1]), n)
    return EmbeddingSet(x, labels)


@dataclass(frozen=True)
class SweepConfig:
    k_list: tuple[int, ...] = (1, 2, 3, 4)
    variance_fraction: float = dg.DEFAULT_VARIANCE_FRACTION
    tau: float = dg.DEFAULT_TAU
    noise_method: str = "theory"
    c0: float = dg.DEFAULT_C0
    n_test: int = 4000
    calibrate: bool = True
    zeta_K: int | str = "auto"
    zeta_beta: float | str = "auto"
    reference_N: int | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["k_list"] = list(self.k_list)
        out.pop("workers")  # execution detail, must not affect outputs
        return out


def row_columns(cfg: SweepConfig) -> list[str]:
    cols = [
        "N", "trial", "status", "error",
        "effective_rank", "K_of_N", "k_of_N", "beta", "beta_r2", "beta_fit_hi",
        "noise_floor", "trace",
        "me_full", "me_truncated", "me_population",
        "op_err",
    ]
    for k in cfg.k_list:
        cols += [f"sin_k{k}", f"gap_k{k}", f"dk_bound_k{k}", f"dk_applies_k{k}"]
        if cfg.reference_N:
            cols.append(f"sin_ref_k{k}")
    cols += [
        "auc_raw", "auc_calibrated", "auc_gaussian", "auc_fisher_population",
        "calib_status", "calib_K", "calib_beta", "calib_c",
    ]
    return cols


@dataclass
class SweepResult:
    rows: list[dict]
    master_seed: int
    spec: SyntheticSpec
    config: SweepConfig
    N_grid: tuple[int, ...]
    trials: int
    modes: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return row_columns(self.config)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns
        w.writerow(cols)
        for row in self.rows:
            w.writerow([_csv_cell(row.get(c)) for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "master_seed": self.master_seed,
            "spec": self.spec.to_dict(),
            "config": self.config.to_dict(),
            "N_grid": list(self.N_grid),
            "trials": self.trials,
            "columns": self.columns,
            "rows": [{c: _json_cell(r.get(c)) for c in self.columns} for r in self.rows],
        }
        return json.dumps(doc, indent=2)

    def ok_rows(self) -> list[dict]:
        return [r for r in self.rows if r["status"] == "ok"]

    def medians(self, field_name: str) -> dict[int, float]:
        """Median of ``field_name`` over successful trials, per N."""
        if field_name not in self.columns:
            raise ContractError(f"unknown sweep field {field_name!r}")
        out = {}
        for N in self.N_grid:
            vals = [
                float(r[field_name])
                for r in self.ok_rows()
                if r["N"] == N and r[field_name] is not None and math.isfinite(float(r[field_name]))
            ]
            if vals:
                out[N] = float(np.median(vals))
        return out


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _run_row(spec: SyntheticSpec, N: int, trial: int, cfg: SweepConfig) -> tuple[dict, tuple | None]:
    row: dict = {c: math.nan for c in row_columns(cfg)}
    row.update(N=N, trial=trial, status="ok", error="")
    pop = gen_population(spec)
    row["me_population"] = pop.d_m_squared
    row["auc_gaussian"] = gaussian_auc(pop.d_m_squared)
    row["auc_fisher_population"] = fisher_score_auc(pop.d_m_squared)
    try:
        e = sample(spec, N, trial, TRAIN_STREAM)
        cov = covariance(center(e, by_class=True))
        s = eig_sym(cov)
        nf = dg.noise_floor(s, cfg.noise_method, cfg.c0, embeddings=e, seed=trial, by_class=True)
        K = dg.recoverable_dimension(s, nf)
        row.update(
            effective_rank=dg.effective_rank(s, cfg.variance_fraction),
            K_of_N=K,
            noise_floor=nf.value,
            trace=s.trace,
        )
        lo, hi = dg.default_fit_range(s.D, K)
        row["beta_fit_hi"] = hi
        try:
            fit = dg.spectral_slope(s, (lo, hi))
            row.update(beta=fit.beta, beta_r2=fit.r_squared)
        except ContractError:
            pass

        d_hat = dg.class_contrast(e, 1)
        sd = dg.decompose(s, d_hat, class_id=1)
        row["k_of_N"] = dg.structural_dimensionality(sd, cfg.tau)
        n_valid = int(np.count_nonzero(dg.valid_modes(s.eigenvalues)))
        me = mahalanobis_energy(sd, min(K, n_valid))
        row.update(me_full=me.full_energy, me_truncated=me.truncated_energy)

        op_err = op_norm_sym_diff(cov, pop.sigma)
        row["op_err"] = op_err
        ref_spec = None
        if cfg.reference_N:
            ref = sample(spec, cfg.reference_N, trial, REFERENCE_STREAM)
            ref_spec = eig_sym(covariance(center(ref, by_class=True)))
        for k in cfg.k_list:
            gap = dg.eigengap(pop.spectrum, k)
            row[f"sin_k{k}"] = principal_angles(pop.spectrum, s, k).max_sine
            row[f"gap_k{k}"] = gap
            row[f"dk_bound_k{k}"] = dg.davis_kahan_bound(op_err, pop.spectrum, k)
            row[f"dk_applies_k{k}"] = bool(gap > 2.0 * op_err)
            if ref_spec is not None:
                row[f"sin_ref_k{k}"] = principal_angles(ref_spec, s, k).max_sine

        test = sample(spec, cfg.n_test, trial, TEST_STREAM)
        pos, neg = test.labels == 1, test.labels == 0
        w = fisher_direction(s, d_hat)
        scores = test.data @ w
        row["auc_raw"] = roc_auc(scores[pos], scores[neg])
        if cfg.calibrate:
            try:
                cs = calibrate(s, cfg.zeta_K, cfg.zeta_beta, nf)
                wc = calibrated_fisher(s, cs, d_hat)
                sc = test.data @ wc
                row.update(
                    auc_calibrated=roc_auc(sc[pos], sc[neg]),
                    calib_status="floored" if cs.beta_floored else "ok",
                    calib_K=cs.K,
                    calib_beta=cs.beta,
                    calib_c=cs.c,
                )
            except SpectralLabError as exc:
                row.update(auc_calibrated=row["auc_raw"], calib_status=f"refused: {exc}")
        else:
            row["calib_status"] = "off"
        modes = (s.eigenvalues.copy(), sd.alphas_sq.copy())
    except (SpectralLabError, ArithmeticError, ValueError) as exc:
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
        modes = None
    return row, modes


def thread_cap(requested: int) -> int:
    """Workers allowed: ``requested`` capped by $SPECTRAL_LAB_THREADS when set."""
    cap = os.environ.get("SPECTRAL_LAB_THREADS")
    n = max(1, int(requested))
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ContractError(f"SPECTRAL_LAB_THREADS must be an integer, got {cap!r}")
    return n


def run_sweep(
    spec: SyntheticSpec,
    N_grid: Sequence[int],
    trials: int,
    config: SweepConfig | None = None,
) -> SweepResult:
    """Run every (N, trial) row of the grid; failed rows are kept with their reason."""
    cfg = config or SweepConfig()
    grid = tuple(int(n) for n in N_grid)
    if not grid:
        raise ContractError("N_grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ContractError(f"N_grid must be strictly ascending, got {grid}")
    if trials < 1:
        raise ContractError(f"trials must be >= 1, got {trials}")
    for k in cfg.k_list:
        if not 1 <= k < spec.D:
            raise ContractError(f"k={k} out of range 1..{spec.D - 1}")
    gen_population(spec)  # build once before threads fan out

    jobs = [(N, t) for N in grid for t in range(trials)]
    workers = thread_cap(cfg.workers)
    if workers == 1:
        results = [_run_row(spec, N, t, cfg) for N, t in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_row(spec, job[0], job[1], cfg), jobs))

    rows, modes = [], {}
    for (N, t), (row, m) in sorted(zip(jobs, results), key=lambda item: item[0]):
        rows.append(row)
        if m is not None:
            modes[(N, t)] = m
    return SweepResult(rows, spec.noise_seed, spec, cfg, grid, trials, modes)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    N: tuple[int, ...]
    medians: tuple[float, ...]

    @property
    def r_squared_defined(self) -> bool:
        return math.isfinite(self.r_squared)

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r_squared))

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared if self.r_squared_defined else None,
            "r_squared_defined": self.r_squared_defined,
            "N": list(self.N),
            "medians": list(self.medians),
        }


def scaling_fit(sr: SweepResult, field_name: str) -> ScalingFit:
    """OLS of log(median over trials) against log N."""
    med = sr.medians(field_name)
    if len(med) < 3:
        raise ContractError(f"scaling fit needs >= 3 distinct N, got {len(med)}")
    Ns = sorted(med)
    vals = np.array([med[n] for n in Ns])
    if np.any(vals <= 0):
        raise ContractError(f"field {field_name!r} has non-positive medians; cannot fit in log space")
    slope, intercept, r2 = dg._ols(np.log(np.array(Ns, dtype=float)), np.log(vals))
    return ScalingFit(slope + 0.0, intercept, r2, tuple(Ns), tuple(float(v) for v in vals))


def mode_table(sr: SweepResult) -> Iterable[tuple]:
    """(N, trial, mode, lambda, alpha_sq) for every successful row, log-log ready."""
    for (N, t), (lam, asq) in sorted(sr.modes.items()):
        for i, (l, a) in enumerate(zip(lam, asq), start=1):
            yield N, t, i, float(l), float(a)
