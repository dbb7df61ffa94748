"""Synthetic populations, seeded sampling and the sweep harness."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from spectral_lab.errors import ContractError
from spectral_lab.matrix import center, covariance, op_norm_sym_diff
from spectral_lab.synthlab import (
    SweepConfig,
    SweepResult,
    SyntheticSpec,
    gen_population,
    mix64,
    mode_table,
    random_rotation,
    run_sweep,
    sample,
    scaling_fit,
    splitmix64,
    standard_normal,
    thread_cap,
)

SMALL = SyntheticSpec(D=12, beta=1.5, signal=(1.0, 0.5, 0.25), rotation_seed=3, noise_seed=4)
FAST = SweepConfig(k_list=(1, 2), n_test=200)


class TestRandomness:
    def test_splitmix64_reference_outputs(self):
        # first three outputs of the reference SplitMix64 generator seeded with 0
        state, outs = 0, []
        for _ in range(3):
            outs.append(splitmix64(state))
            state = (state + 0x9E3779B97F4A7C15) % 2**64
        assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_mix64_order_sensitive(self):
        assert mix64(1, 2, 3) != mix64(1, 3, 2)
        assert mix64(1, 2, 3) == mix64(1, 2, 3)
        assert 0 <= mix64(2**64 - 1, 7) < 2**64

    def test_box_muller_is_standard_normal(self):
        z = standard_normal(123, (200_000,))
        assert abs(z.mean()) < 0.01 and abs(z.var() - 1.0) < 0.01
        assert stats.kstest(z, "norm").pvalue > 1e-3

    def test_odd_count_shape(self):
        assert standard_normal(1, (3, 3)).shape == (3, 3)


class TestPopulation:
    def test_isotropic(self):
        pop = gen_population(SyntheticSpec(D=6, beta=0.0, rotation_seed=9))
        np.testing.assert_allclose(np.linalg.eigvalsh(pop.sigma.entries), np.ones(6), atol=1e-12)

    def test_closed_form_energy(self):
        spec = SyntheticSpec(D=8, beta=1.7, signal=(2.0,))
        pop = gen_population(spec)
        assert pop.d_m_squared == 4.0
        direct = pop.d @ np.linalg.solve(pop.sigma.entries, pop.d)
        assert direct == pytest.approx(4.0, rel=1e-10)

    def test_energy_sum(self):
        spec = SyntheticSpec(D=5, beta=2.0, signal=(1.0, 0.5, 0.25))
        assert spec.population_d_m_squared() == pytest.approx(1.0 + 0.25 * 4 + 0.0625 * 9)

    def test_rotation_reproducible_and_orthogonal(self):
        a, b = random_rotation(10, 42), random_rotation(10, 42)
        assert a.tobytes() == b.tobytes()
        np.testing.assert_allclose(a.T @ a, np.eye(10), atol=1e-12)
        assert not np.allclose(a, random_rotation(10, 43))

    def test_spectrum_is_power_law(self):
        pop = gen_population(SMALL)
        np.testing.assert_allclose(pop.spectrum.eigenvalues, np.arange(1, 13) ** -1.5)
        v = pop.spectrum.eigenvectors
        np.testing.assert_allclose((v * pop.spectrum.eigenvalues) @ v.T, pop.sigma.entries, atol=1e-13)

    def test_nuisance_modes(self):
        spec = SyntheticSpec(D=6, beta=1.0, signal=(1.0,), nuisance_modes=(4, 5), nuisance_scale=50.0)
        lam = spec.mode_variances()
        assert lam[3] == 50.0 / 4 and lam[4] == 50.0 / 5
        pop = gen_population(spec)
        assert pop.spectrum.eigenvalues[0] == 50.0 / 4
        assert pop.d_m_squared == 1.0

    def test_spec_validation(self):
        with pytest.raises(ContractError):
            SyntheticSpec(D=1, beta=1.0)
        with pytest.raises(ContractError):
            SyntheticSpec(D=4, beta=-1.0)
        with pytest.raises(ContractError):
            SyntheticSpec(D=2, beta=1.0, signal=(1.0, 1.0, 1.0))
        with pytest.raises(ContractError):
            SyntheticSpec(D=4, beta=1.0, noise_seed=-1)
        with pytest.raises(ContractError):
            SyntheticSpec(D=4, beta=1.0, signal=(1.0,), nuisance_modes=(1,))


class TestSample:
    def test_four_rows(self):
        e = sample(SMALL, 4, 0)
        np.testing.assert_array_equal(e.labels, [0, 0, 1, 1])
        assert e.data.shape == (4, 12)

    def test_bit_identical(self):
        assert sample(SMALL, 50, 3).data.tobytes() == sample(SMALL, 50, 3).data.tobytes()

    def test_streams_differ(self):
        assert not np.array_equal(sample(SMALL, 50, 3).data, sample(SMALL, 50, 4).data)
        assert not np.array_equal(sample(SMALL, 50, 3, 0).data, sample(SMALL, 50, 3, 1).data)

    def test_odd_n_warns(self):
        with pytest.warns(UserWarning, match="odd"):
            e = sample(SMALL, 7, 0)
        assert e.N == 6

    def test_too_small(self):
        with pytest.raises(ContractError):
            sample(SMALL, 2, 0)

    def test_large_n_covariance(self):
        spec = SyntheticSpec(D=8, beta=1.0, signal=(1.0, 0.5), rotation_seed=1, noise_seed=2)
        e = sample(spec, 100_000, 0)
        cov = covariance(center(e, by_class=True)).entries
        sigma = gen_population(spec).sigma.entries
        assert np.linalg.norm(cov - sigma) / np.linalg.norm(sigma) <= 0.05

    def test_class_means(self):
        spec = SyntheticSpec(D=4, beta=0.0, signal=(3.0,), rotation_seed=5)
        e = sample(spec, 40_000, 0)
        pop = gen_population(spec)
        np.testing.assert_allclose(e.data[e.labels == 1].mean(axis=0), pop.mu1, atol=0.03)
        np.testing.assert_allclose(e.data[e.labels == 0].mean(axis=0), pop.mu0, atol=0.03)


class TestSweep:
    def test_smoke_single_row(self):
        sr = run_sweep(SMALL, (64,), 1, FAST)
        assert len(sr.rows) == 1
        row = sr.rows[0]
        assert row["status"] == "ok", row["error"]
        for col in sr.columns:
            if col in ("error",):
                continue
            v = row[col]
            assert v is not None and not (isinstance(v, float) and math.isnan(v)), col

    def test_row_count_and_order(self):
        sr = run_sweep(SMALL, (32, 64, 128), 3, FAST)
        assert len(sr.rows) == 9
        assert [(r["N"], r["trial"]) for r in sr.rows] == [(n, t) for n in (32, 64, 128) for t in range(3)]

    def test_deterministic_across_runs_and_workers(self):
        a = run_sweep(SMALL, (32, 64), 3, FAST)
        b = run_sweep(SMALL, (32, 64), 3, SweepConfig(k_list=(1, 2), n_test=200, workers=4))
        assert a.to_csv() == b.to_csv()
        assert a.to_json() == b.to_json()

    def test_rows_independent_of_grid(self):
        a = run_sweep(SMALL, (64,), 2, FAST)
        b = run_sweep(SMALL, (32, 64, 128), 4, FAST)
        rows_b = {(r["N"], r["trial"]): r for r in b.rows}
        for r in a.rows:
            assert r == rows_b[(r["N"], r["trial"])]

    def test_grid_validation(self):
        with pytest.raises(ContractError):
            run_sweep(SMALL, (), 1, FAST)
        with pytest.raises(ContractError):
            run_sweep(SMALL, (64, 32), 1, FAST)
        with pytest.raises(ContractError):
            run_sweep(SMALL, (64,), 0, FAST)
        with pytest.raises(ContractError):
            run_sweep(SMALL, (64,), 1, SweepConfig(k_list=(12,)))

    def test_failed_row_recorded(self):
        sr = run_sweep(SMALL, (2, 64), 1, FAST)
        assert sr.rows[0]["status"] == "error" and "ContractError" in sr.rows[0]["error"]
        assert sr.rows[1]["status"] == "ok"

    def test_op_err_is_true_error(self):
        sr = run_sweep(SMALL, (100,), 1, FAST)
        e = sample(SMALL, 100, 0)
        cov = covariance(center(e, by_class=True))
        assert sr.rows[0]["op_err"] == op_norm_sym_diff(cov, gen_population(SMALL).sigma)

    def test_truth_consistency_at_large_n(self):
        spec = SyntheticSpec(D=16, beta=1.0, signal=(1.0, 0.5, 0.5), rotation_seed=7, noise_seed=8)
        sr = run_sweep(spec, (20_000,), 3, SweepConfig(k_list=(1,), n_test=200, calibrate=False))
        for r in sr.rows:
            assert abs(r["me_full"] - r["me_population"]) / r["me_population"] <= 0.10

    def test_davis_kahan_satisfaction(self):
        spec = SyntheticSpec(D=16, beta=2.0, signal=(1.0, 0.5), rotation_seed=10, noise_seed=11)
        grid = tuple(32 * 2**j for j in range(10))
        sr = run_sweep(spec, grid, 20, SweepConfig(k_list=(1, 2, 3), n_test=50, calibrate=False))
        checked = 0
        for r in sr.ok_rows():
            for k in (1, 2, 3):
                if r[f"dk_applies_k{k}"]:
                    checked += 1
                    assert r[f"sin_k{k}"] <= r[f"dk_bound_k{k}"]
        assert len(sr.ok_rows()) >= 200 and checked > 100

    def test_reference_column(self):
        sr = run_sweep(SMALL, (64,), 1, SweepConfig(k_list=(1,), n_test=100, reference_N=2000))
        assert 0.0 <= sr.rows[0]["sin_ref_k1"] <= 1.0

    def test_calibration_columns(self):
        sr = run_sweep(SMALL, (64,), 2, FAST)
        for r in sr.rows:
            assert r["calib_status"] in ("ok", "floored") or r["calib_status"].startswith("refused")
            assert 0.0 <= r["auc_calibrated"] <= 1.0

    def test_mode_table(self):
        sr = run_sweep(SMALL, (32, 64), 1, FAST)
        rows = list(mode_table(sr))
        assert len(rows) == 2 * 12
        assert rows[0][:3] == (32, 0, 1)


class TestScalingFit:
    def synthetic(self, values_by_n):
        cfg = SweepConfig(k_list=(1,))
        rows = []
        for N, vals in values_by_n.items():
            for t, v in enumerate(vals):
                rows.append({"N": N, "trial": t, "status": "ok", "op_err": v})
        return SweepResult(rows, 0, SMALL, cfg, tuple(values_by_n), len(next(iter(values_by_n.values()))))

    def test_exact_power(self):
        sr = self.synthetic({n: [3.0 * n**-0.5, 3.0 * n**-0.5] for n in (100, 400, 1600)})
        fit = scaling_fit(sr, "op_err")
        assert fit.slope == pytest.approx(-0.5, abs=1e-12) and fit.r_squared == pytest.approx(1.0)
        assert math.exp(fit.intercept) == pytest.approx(3.0)

    def test_constant_field(self):
        fit = scaling_fit(self.synthetic({n: [2.0] for n in (10, 20, 40)}), "op_err")
        assert fit.slope == 0.0 and not fit.r_squared_defined
        assert fit.to_dict()["r_squared"] is None

    def test_needs_three_points(self):
        with pytest.raises(ContractError):
            scaling_fit(self.synthetic({10: [1.0], 20: [0.5]}), "op_err")

    def test_non_positive(self):
        with pytest.raises(ContractError, match="non-positive"):
            scaling_fit(self.synthetic({10: [1.0], 20: [0.0], 40: [1.0]}), "op_err")

    def test_unknown_field(self):
        with pytest.raises(ContractError):
            scaling_fit(self.synthetic({10: [1.0], 20: [1.0], 40: [1.0]}), "nonsense")

    def test_median_of_trials(self):
        sr = self.synthetic({10: [1.0, 5.0, 2.0], 20: [1.0, 1.0, 1.0], 40: [3.0, 3.0, 9.0]})
        assert sr.medians("op_err") == {10: 2.0, 20: 1.0, 40: 3.0}


class TestThreadCap:
    def test_env_caps(self, monkeypatch):
        monkeypatch.setenv("SPECTRAL_LAB_THREADS", "2")
        assert thread_cap(8) == 2
        monkeypatch.delenv("SPECTRAL_LAB_THREADS")
        assert thread_cap(8) == 8
        assert thread_cap(0) == 1

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv("SPECTRAL_LAB_THREADS", "many")
        with pytest.raises(ContractError):
            thread_cap(4)


@given(st.integers(2, 40), st.integers(0, 2**64 - 1), st.integers(2, 30), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_sample_reproducibility_property(D, seed, half, trial):
    spec = SyntheticSpec(D=D, beta=1.0, noise_seed=seed, rotation_seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = sample(spec, 2 * half, trial)
        b = sample(spec, 2 * half, trial)
    assert a.data.tobytes() == b.data.tobytes()
