"""Effective rank, k(N), K(N), noise floors, spectral slope, zeta sums, Davis-Kahan.

Oracles: mpmath.zeta for the zeta function, numpy.polyfit for the slope,
brute-force cumulative sums for the ranks.
"""

import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from spectral_lab.diagnostics import (
    NoiseFloor,
    SignalDecomposition,
    class_contrast,
    davis_kahan_bound,
    decompose,
    diagnose,
    effective_rank,
    eigengap,
    half_covariance_gap,
    noise_floor,
    recoverable_dimension,
    riemann_zeta,
    signal_decomposition,
    spectral_slope,
    split_half_floor,
    structural_dimensionality,
    truncated_zeta,
)
from spectral_lab.errors import ContractError, DivergenceError
from spectral_lab.matrix import CovarianceMatrix, EmbeddingSet, Spectrum, center, covariance, eig_sym


def spectrum_of(values, N=None, vectors=None):
    lam = np.asarray(values, dtype=float)
    v = np.eye(lam.size) if vectors is None else vectors
    return Spectrum(lam, v, N, raw_eigenvalues=lam)


descending = st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=1, max_size=30).map(
    lambda xs: np.sort(np.array(xs))[::-1]
)


def brute_effective_rank(lam, frac):
    total = sum(lam)
    for m in range(1, len(lam) + 1):
        if sum(lam[:m]) / total >= frac - 1e-12:
            return m
    return len(lam)


class TestEffectiveRank:
    def test_dominant_mode(self):
        assert effective_rank([0.96, 0.04], 0.95) == 1

    def test_uniform_twenty(self):
        assert effective_rank(np.ones(20), 0.95) == 19

    def test_cumulative_hits_exactly(self):
        assert effective_rank([0.5, 0.3, 0.15, 0.05], 0.95) == 3

    def test_all_zero(self):
        with pytest.raises(ContractError, match="undefined"):
            effective_rank(np.zeros(4))

    def test_fraction_range(self):
        with pytest.raises(ContractError):
            effective_rank([1.0, 0.5], 0.0)

    @given(descending, st.floats(0.01, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_against_brute_force(self, lam, frac):
        assume(lam.sum() > 1e-3)
        assert effective_rank(lam, frac) == brute_effective_rank(lam.tolist(), frac)

    @given(descending, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_fraction(self, lam, f1, f2):
        assume(lam.sum() > 1e-3)
        lo, hi = sorted((f1, f2))
        assert effective_rank(lam, lo) <= effective_rank(lam, hi)


class TestSignalDecomposition:
    def test_aligned_with_first_mode(self):
        sd = decompose(spectrum_of([3.0, 2.0, 1.0]), np.array([2.0, 0.0, 0.0]))
        np.testing.assert_array_equal(sd.alphas_sq, [4.0, 0.0, 0.0])

    def test_zero_difference(self):
        x = np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 0.0], [3.0, 0.0]])
        e = EmbeddingSet(np.vstack([x, x]), np.array([0, 0, 0, 0, 1, 1, 1, 1]))
        s = eig_sym(covariance(center(e)))
        assert np.all(signal_decomposition(s, e, 1).alphas_sq == 0.0)

    def test_identity_basis(self):
        sd = decompose(spectrum_of([2.0, 1.0]), np.array([1.0, 2.0]))
        np.testing.assert_array_equal(sd.alphas_sq, [1.0, 4.0])

    def test_one_vs_rest_contrast(self):
        x = np.array([[0.0], [2.0], [10.0], [20.0]])
        e = EmbeddingSet(x, np.array([0, 0, 1, 2]))
        assert class_contrast(e, 0)[0] == pytest.approx(1.0 - 15.0)
        assert class_contrast(e, 1, other=2)[0] == pytest.approx(-10.0)

    def test_contract_violations(self):
        e = EmbeddingSet(np.zeros((3, 2)), np.array([0, 1, 1]))
        with pytest.raises(ContractError):
            class_contrast(e, 2)
        with pytest.raises(ContractError):
            class_contrast(e, 1, other=1)
        with pytest.raises(ContractError):
            class_contrast(EmbeddingSet(np.zeros((3, 2))), 0)
        with pytest.raises(ContractError):
            SignalDecomposition(np.array([1.0, 2.0]), np.array([0.0, 0.0]))
        with pytest.raises(ContractError):
            SignalDecomposition(np.array([2.0, 1.0]), np.array([-1.0, 0.0]))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 20))
    @settings(max_examples=50, deadline=None)
    def test_parseval(self, seed, D):
        rng = np.random.default_rng(seed)
        labels = np.repeat([0, 1, 2], 10)
        e = EmbeddingSet(rng.standard_normal((30, D)) + labels[:, None], labels)
        s = eig_sym(covariance(center(e)))
        for c in range(3):
            sd = signal_decomposition(s, e, c)
            d = class_contrast(e, c)
            assert math.fsum(sd.alphas_sq) == pytest.approx(float(d @ d), rel=1e-9)
            assert np.all(sd.alphas_sq >= 0)


class TestStructuralDimensionality:
    def test_single_mode(self):
        sd = SignalDecomposition(np.ones(3), np.array([1.0, 0.05, 0.001]))
        assert structural_dimensionality(sd, 0.1) == 1

    def test_no_signal(self):
        assert structural_dimensionality(SignalDecomposition(np.ones(4), np.zeros(4))) == 0

    def test_ratio_arithmetic(self):
        sd = SignalDecomposition(np.array([2.0, 0.1]), np.array([0.4, 0.02]))
        assert structural_dimensionality(sd, 0.1) == 2

    def test_zero_variance_modes_skipped(self):
        sd = SignalDecomposition(np.array([1.0, 0.0]), np.array([1.0, 5.0]))
        assert structural_dimensionality(sd, 0.1) == 1

    def test_tau_positive(self):
        with pytest.raises(ContractError):
            structural_dimensionality(SignalDecomposition(np.ones(2), np.ones(2)), 0.0)

    @given(descending, st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_tau(self, lam, t1, t2, seed):
        asq = np.random.default_rng(seed).exponential(size=lam.size)
        sd = SignalDecomposition(lam, asq)
        lo, hi = sorted((t1, t2))
        assert structural_dimensionality(sd, hi) <= structural_dimensionality(sd, lo)


class TestNoiseFloor:
    def test_unit_ratio(self):
        nf = noise_floor(spectrum_of(np.r_[1.0, np.zeros(99)], N=100))
        assert nf.value == 1.0 and nf.method == "theory" and nf.c0 == 1.0

    def test_arithmetic(self):
        nf = noise_floor(spectrum_of(np.r_[2.0, np.zeros(63)], N=256), c0=1.0)
        assert nf.value == 1.0

    def test_theory_needs_n(self):
        with pytest.raises(ContractError):
            noise_floor(spectrum_of([1.0, 0.5]))

    def test_split_half_identical_halves(self):
        # every row identical: both half covariances are exactly zero
        e = EmbeddingSet(np.tile([1.0, -2.0, 0.5], (8, 1)))
        assert split_half_floor(e, seed=3) == 0.0
        c = CovarianceMatrix(np.diag([2.0, 1.0]))
        assert half_covariance_gap(c, c) == 0.0

    def test_split_half_value_by_hand(self):
        x = np.random.default_rng(14).standard_normal((40, 3))
        e = EmbeddingSet(x)
        perm = np.random.default_rng(5).permutation(40)
        halves = []
        for rows in (perm[:20], perm[20:]):
            h = x[rows] - x[rows].mean(axis=0)
            halves.append(h.T @ h / 20)
        expected = np.linalg.norm(halves[0] - halves[1], 2) / 2
        assert split_half_floor(e, seed=5) == pytest.approx(expected, rel=1e-10)

    def test_split_half_small_n(self):
        with pytest.raises(ContractError):
            split_half_floor(EmbeddingSet(np.zeros((3, 2))))

    def test_split_half_provenance(self):
        e = EmbeddingSet(np.random.default_rng(15).standard_normal((20, 2)))
        nf = noise_floor(eig_sym(covariance(center(e))), "split_half", embeddings=e, seed=9)
        assert nf.to_dict()["method"] == "split_half" and nf.seed == 9

    def test_unknown_method(self):
        with pytest.raises(ContractError):
            noise_floor(spectrum_of([1.0], N=4), "magic")


class TestRecoverableDimension:
    def test_threshold_count(self):
        assert recoverable_dimension([1.0, 0.5, 0.1, 0.01], NoiseFloor(0.05, "theory")) == 3

    def test_zero_floor(self):
        assert recoverable_dimension([3.0, 1.0, 0.0, 0.0], 0.0) == 2

    def test_power_law(self):
        lam = np.arange(1, 51, dtype=float) ** -2.0
        assert recoverable_dimension(lam, 0.01) == 10

    @given(descending, st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_floor(self, lam, f1, f2):
        lo, hi = sorted((f1, f2))
        assert recoverable_dimension(lam, hi) <= recoverable_dimension(lam, lo)


class TestSpectralSlope:
    def test_exact_power_law(self):
        fit = spectral_slope(np.arange(1, 11, dtype=float) ** -2.0, (1, 10))
        assert fit.beta == pytest.approx(2.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_constant(self):
        beta, r2 = spectral_slope(np.full(6, 0.3))
        assert beta == 0.0 and math.isnan(r2)

    def test_three_modes(self):
        assert spectral_slope([1.0, 0.25, 0.111111]).beta == pytest.approx(2.0, abs=1e-6)

    def test_needs_three_modes(self):
        with pytest.raises(ContractError):
            spectral_slope([1.0, 0.5, 0.0, 0.0])

    def test_against_polyfit(self):
        lam = np.sort(np.random.default_rng(16).exponential(size=12))[::-1]
        slope = np.polyfit(np.log(np.arange(2, 9)), np.log(lam[1:8]), 1)[0]
        fit = spectral_slope(lam, (2, 8))
        assert fit.beta == pytest.approx(-slope, rel=1e-10)
        assert fit.fit_range == (2, 8) and fit.n_modes == 7


class TestZeta:
    def test_truncated_examples(self):
        assert truncated_zeta(2, 1) == 1.0
        assert truncated_zeta(2, 3) == pytest.approx(49 / 36, rel=1e-15)
        assert truncated_zeta(0, 5) == 5.0

    def test_truncated_needs_positive_k(self):
        with pytest.raises(ContractError):
            truncated_zeta(2, 0)

    def test_known_values(self):
        assert abs(riemann_zeta(2.0) - math.pi**2 / 6) <= 1e-9
        assert abs(riemann_zeta(4.0) - math.pi**4 / 90) <= 1e-9

    @pytest.mark.parametrize("beta", [1.1, 1.25, 1.5, 2.5, 3.0, 7.0])
    def test_against_mpmath(self, beta):
        assert abs(riemann_zeta(beta) - float(mpmath.zeta(beta))) <= 1e-9

    @pytest.mark.parametrize("beta", [1.0, 0.5, 1.0 + 1e-7])
    def test_divergent(self, beta):
        with pytest.raises(DivergenceError, match="harmonic"):
            riemann_zeta(beta)

    @pytest.mark.parametrize("K", [1, 10, 100, 10_000])
    def test_truncation_within_tail_bound(self, K):
        assert abs(truncated_zeta(2, K) - math.pi**2 / 6) <= 1.0 / K

    @given(st.floats(1.05, 6.0), st.integers(1, 3000))
    @settings(max_examples=60, deadline=None)
    def test_full_dominates_partial(self, beta, K):
        assert riemann_zeta(beta) >= truncated_zeta(beta, K)


class TestDavisKahan:
    def test_zero_error(self):
        assert davis_kahan_bound(0.0, [1.0, 0.5, 0.1], 1) == 0.0

    def test_arithmetic(self):
        assert davis_kahan_bound(0.1, [1.0, 0.5, 0.25], 1) == pytest.approx(0.4, rel=1e-15)

    def test_vacuous(self):
        assert davis_kahan_bound(0.01, [1.0, 1.0, 0.5], 1) == 1.0

    def test_capped(self):
        assert davis_kahan_bound(10.0, [1.0, 0.5], 1) == 1.0

    def test_k_range(self):
        with pytest.raises(ContractError):
            davis_kahan_bound(0.1, [1.0, 0.5], 2)
        with pytest.raises(ContractError):
            eigengap([1.0, 0.5], 0)
        with pytest.raises(ContractError):
            davis_kahan_bound(-1.0, [1.0, 0.5], 1)


class TestDiagnose:
    def make(self, labeled=True):
        rng = np.random.default_rng(17)
        labels = np.repeat([0, 1, 2], 60)
        x = rng.standard_normal((180, 6)) * np.array([3.0, 2.0, 1.0, 0.5, 0.3, 0.1])
        x[:, 0] += labels * 2.0
        return EmbeddingSet(x, labels if labeled else None)

    def test_labeled_report(self):
        rep = diagnose(self.make(), k_list=(1, 2))
        doc = rep.to_dict()
        assert set(doc["classes"]) == {"0", "1", "2"}
        assert 0 <= rep.K_of_N <= rep.D
        assert doc["thresholds"] == {"variance_fraction": 0.95, "tau": 0.1}
        assert doc["davis_kahan"]["gap_source"] == "empirical"
        for c, block in doc["classes"].items():
            assert block["d_m_squared_truncated"] <= block["d_m_squared"] + 1e-12
        json.dumps(doc, allow_nan=False)

    def test_unlabeled_subset(self):
        doc = diagnose(self.make(labeled=False)).to_dict()
        assert "classes" not in doc and "k_of_N_mean" not in doc

    def test_thresholds_echoed_verbatim(self):
        doc = diagnose(self.make(), variance_fraction=0.8, tau=0.37).to_dict()
        assert doc["thresholds"] == {"variance_fraction": 0.8, "tau": 0.37}

    def test_table_names(self):
        names = [m for m, _ in diagnose(self.make()).table_rows()]
        assert names[:2] == ["Eff. Rank", "K(N)"]
        assert any(n.startswith("k(N)") for n in names) and any(n.startswith("M-E") for n in names)

    def test_reference_gaps(self):
        ref = spectrum_of([10.0, 5.0, 1.0, 0.5, 0.2, 0.1])
        rep = diagnose(self.make(), k_list=(1,), reference=ref)
        assert rep.dk_bound[1]["eigengap"] == 5.0 and rep.gap_source == "reference"

    def test_k_out_of_range(self):
        with pytest.raises(ContractError):
            diagnose(self.make(), k_list=(6,))

    def test_recoverable_dimension_consistent(self):
        e = self.make()
        rep = diagnose(e)
        s = eig_sym(covariance(center(e)))
        assert rep.K_of_N == recoverable_dimension(s, noise_floor(s))
