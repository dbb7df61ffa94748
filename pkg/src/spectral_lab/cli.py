"""Command-line front end: ``spectral-lab <command> [flags]``.

Every report is a JSON envelope holding the tool version, the effective
configuration, digests of the inputs and the command's result. Input digests
are taken over the decoded values (their canonical binary encoding), so a
CSV file and a binary file holding the same numbers give the same report.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from spectral_lab import __version__
from spectral_lab import diagnostics as dg
from spectral_lab import io as sio
from spectral_lab.config import RunConfig, load_config
from spectral_lab.errors import ConfigError, ContractError, SpectralLabError
from spectral_lab.matrix import (
    EmbeddingSet,
    Spectrum,
    center,
    covariance,
    eig_sym,
    op_norm_sym_diff,
    principal_angles,
)
from spectral_lab.separation import fisher_direction, fisher_score_auc, gaussian_auc, roc_auc
from spectral_lab.synthlab import mode_table, run_sweep, scaling_fit
from spectral_lab.zetafilter import calibrate, calibrated_fisher

TOOL = "spectral-lab"

EXIT_CODES = """\
exit codes:
  0  success
  2  input file unreadable or malformed
  3  data quality (NaN/Inf values, numerical non-convergence)
  4  contract violation (shape or label mismatch, k out of range, ...)
  5  zeta calibration refused (no mode above the noise floor)
  6  configuration or usage error (unknown config keys, bad flag values)
"""


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with the configuration exit code."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


# -- helpers -----------------------------------------------------------------


def _matrix_digest(x: np.ndarray) -> str:
    return sio.digest(sio.encode_binary(x))


def _labels_digest(y: np.ndarray) -> str:
    return "sha256:" + hashlib.sha256(np.asarray(y, dtype="<i8").tobytes()).hexdigest()


def _load_matrix(path: str, role: str, inputs: dict) -> np.ndarray:
    x, _ = sio.read_matrix(path)
    inputs[role] = {"rows": int(x.shape[0]), "cols": int(x.shape[1]), "sha256": _matrix_digest(x)}
    return x


def _load_labels(path: str, role: str, inputs: dict) -> np.ndarray:
    y, _ = sio.read_labels(path)
    inputs[role] = {"rows": int(y.shape[0]), "sha256": _labels_digest(y)}
    return y


def _load_spectrum_or_matrix(path: str, role: str, inputs: dict) -> tuple[Spectrum, EmbeddingSet | None]:
    """A spectrum JSON document, or a matrix file whose covariance spectrum is taken."""
    raw = sio.read_bytes(path)
    if sio.is_json(raw):
        doc = sio.load_json(raw, role)
        body = doc.get("result", doc)
        inputs[role] = {"kind": "spectrum", "sha256": sio.digest(raw)}
        return sio.spectrum_from_dict(body), None
    x = sio.decode_matrix(raw)
    inputs[role] = {"rows": int(x.shape[0]), "cols": int(x.shape[1]), "sha256": _matrix_digest(x)}
    e = EmbeddingSet(x)
    return eig_sym(covariance(center(e))), e


def _parse_k_list(text: str | None, default: tuple[int, ...]) -> tuple[int, ...]:
    if text is None:
        return tuple(default)
    try:
        ks = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"--k must be a comma-separated list of integers, got {text!r}", ["k"])
    if not ks:
        raise ConfigError("--k is empty", ["k"])
    return ks


def _auto_or_number(text: str | None, default, kind, flag: str):
    if text is None:
        return default
    if text == "auto":
        return "auto"
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{flag} must be a number or 'auto', got {text!r}", [flag.lstrip("-")])


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg


def _effective(args, cfg: RunConfig) -> dict:
    """Threshold settings after CLI overrides are applied to the config file."""
    method = args.noise_floor if getattr(args, "noise_floor", None) else cfg.noise_method
    return {
        "variance_fraction": _pick(getattr(args, "variance_fraction", None), cfg.variance_fraction),
        "tau": _pick(getattr(args, "tau", None), cfg.tau),
        "noise_floor": {"method": method.replace("-", "_"), "c0": _pick(getattr(args, "c0", None), cfg.c0)},
        "seed": _pick(getattr(args, "seed", None), cfg.seed),
    }


def _pick(flag, fallback):
    return fallback if flag is None else flag


def _envelope(command: str, config: dict, inputs: dict, result: dict, notes: list[str] | None = None) -> dict:
    doc = {
        "schema": f"{TOOL}/{command}/1",
        "tool": {"name": TOOL, "version": __version__},
        "config": config,
        "inputs": inputs,
        "result": result,
    }
    if notes:
        doc["warnings"] = notes
    return doc


def _emit_text(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_spectrum(doc: dict, values: np.ndarray, vectors: np.ndarray | None, args) -> None:
    """JSON report, or a matrix file with one row per mode: (lambda_i, v_i...)."""
    fmt = args.format
    if fmt == "json":
        _emit_text(sio.dumps(doc), args.output)
        return
    table = values[:, None] if vectors is None else np.column_stack([values, vectors.T])
    if fmt == "bin":
        if not args.output:
            raise ConfigError("--format bin needs --output", ["output"])
        sio.write_matrix(args.output, table, "bin")
    else:
        header = ["eigenvalue"] + ([f"v{j}" for j in range(1, table.shape[1])] if vectors is not None else [])
        _emit_text(sio.encode_csv(table, header).decode("utf-8"), args.output)


def _capture_warnings(fn, *a, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = fn(*a, **kw)
    notes = [str(w.message) for w in caught]
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    return out, notes


# -- commands ----------------------------------------------------------------


def cmd_spectrum(args) -> int:
    cfg = _run_config(args)
    path = args.input or cfg.input
    if not path:
        raise ConfigError("spectrum needs --input", ["input"])
    inputs: dict = {}
    e = EmbeddingSet(_load_matrix(path, "input", inputs))
    s = eig_sym(covariance(center(e)), source_N=e.N)
    result = sio.spectrum_to_dict(s, include_vectors=args.vectors)
    config = {"centering": "total", "divisor": "population", "vectors": args.vectors, "format": args.format}
    doc = _envelope("spectrum", config, inputs, result)
    _emit_spectrum(doc, s.eigenvalues, s.eigenvectors if args.vectors else None, args)
    return 0


def cmd_diagnose(args) -> int:
    cfg = _run_config(args)
    eff = _effective(args, cfg)
    k_list = _parse_k_list(args.k, (1,))
    path = args.input or cfg.input
    if not path:
        raise ConfigError("diagnose needs --input", ["input"])
    inputs: dict = {}
    x = _load_matrix(path, "input", inputs)
    labels_path = args.labels or cfg.labels
    labels = _load_labels(labels_path, "labels", inputs) if labels_path else None
    if labels is not None and labels.shape[0] != x.shape[0]:
        raise ContractError(f"{labels.shape[0]} labels for {x.shape[0]} rows")
    e = EmbeddingSet(x, labels)
    reference = None
    if args.ref:
        reference, _ = _load_spectrum_or_matrix(args.ref, "reference", inputs)
        if reference.D != e.D:
            raise ContractError(f"reference has D={reference.D}, input has D={e.D}")
    report = dg.diagnose(
        e,
        variance_fraction=eff["variance_fraction"],
        tau=eff["tau"],
        noise_method=eff["noise_floor"]["method"],
        c0=eff["noise_floor"]["c0"],
        k_list=k_list,
        reference=reference,
        within_class=args.within_class,
        seed=eff["seed"],
    )
    result = report.to_dict()
    result["table"] = [{"metric": m, "value": v} for m, v in report.table_rows()]
    config = {**eff, "k_list": list(k_list), "within_class": args.within_class}
    _emit_text(sio.dumps(_envelope("diagnose", config, inputs, result)), args.output)
    return 0


def cmd_stability(args) -> int:
    cfg = _run_config(args)
    eff = _effective(args, cfg)
    k_list = _parse_k_list(args.k, cfg.k_list)
    if not args.ref or not args.test:
        raise ConfigError("stability needs --ref and --test", ["ref", "test"])
    inputs: dict = {}
    ref_e = EmbeddingSet(_load_matrix(args.ref, "reference", inputs))
    test_e = EmbeddingSet(_load_matrix(args.test, "test", inputs))
    if ref_e.D != test_e.D:
        raise ContractError(f"reference has D={ref_e.D}, test has D={test_e.D}")
    D = ref_e.D
    for k in k_list:
        if not 1 <= k < D:
            raise ContractError(f"k={k} out of range 1..{D - 1}")
    ref_cov = covariance(center(ref_e))
    test_cov = covariance(center(test_e))
    ref_s, test_s = eig_sym(ref_cov, ref_e.N), eig_sym(test_cov, test_e.N)
    floor = dg.split_half_floor(test_e, seed=eff["seed"])
    op_diff = op_norm_sym_diff(ref_cov, test_cov)
    rows = []
    for k in k_list:
        sine = principal_angles(ref_s, test_s, k).max_sine
        gap = dg.eigengap(ref_s, k)
        bound = dg.davis_kahan_bound(floor, ref_s, k)
        rows.append({
            "k": k,
            "sin_theta": sine,
            "eigengap": gap,
            "dk_bound": bound,
            "bound_applies": bool(gap > 2.0 * floor),
            "bound_below_measured": bool(bound < sine),
            "dk_bound_measured_diff": dg.davis_kahan_bound(op_diff, ref_s, k),
        })
    result = {
        "D": D,
        "N_ref": ref_e.N,
        "N_test": test_e.N,
        "noise_floor": {"method": "split_half", "value": floor, "seed": eff["seed"]},
        "op_norm_difference": op_diff,
        "per_k": rows,
    }
    config = {"k_list": list(k_list), "seed": eff["seed"], "centering": "total"}
    _emit_text(sio.dumps(_envelope("stability", config, inputs, result)), args.output)
    return 0


def cmd_zeta_filter(args) -> int:
    cfg = _run_config(args)
    eff = _effective(args, cfg)
    K = _auto_or_number(args.k, cfg.zeta_K, int, "--k")
    beta = _auto_or_number(args.beta, cfg.zeta_beta, float, "--beta")
    path = args.input or cfg.input
    if not path:
        raise ConfigError("zeta-filter needs --input", ["input"])
    inputs: dict = {}
    s, e = _load_spectrum_or_matrix(path, "input", inputs)
    if e is not None:
        s = eig_sym(covariance(center(e)), source_N=e.N)
    nf = None
    if K == "auto":
        nf = dg.noise_floor(s, eff["noise_floor"]["method"], eff["noise_floor"]["c0"], embeddings=e, seed=eff["seed"])
    cs, notes = _capture_warnings(calibrate, s, K, beta, nf)
    if args.dry_run:
        sys.stdout.write(f"K={cs.K}\nbeta={cs.beta!r}\nc={cs.c!r}\n")
        return 0
    result = {
        "N": s.source_N,
        "D": cs.D,
        "eigenvalues": [float(v) for v in cs.eigenvalues],
        "raw_eigenvalues": [float(v) for v in cs.raw_eigenvalues],
        "provenance": {**cs.provenance(), "noise_floor": nf.to_dict() if nf else None},
    }
    if args.vectors:
        result["eigenvectors"] = [[float(v) for v in col] for col in cs.eigenvectors.T]
    config = {
        "zeta": {"K": K, "beta": beta},
        "noise_floor": eff["noise_floor"],
        "seed": eff["seed"],
        "format": args.format,
    }
    doc = _envelope("zeta-filter", config, inputs, result, notes)
    _emit_spectrum(doc, cs.eigenvalues, cs.eigenvectors if args.vectors else None, args)
    return 0


def cmd_classify(args) -> int:
    cfg = _run_config(args)
    eff = _effective(args, cfg)
    train_path = args.train or args.input or cfg.input
    labels_path = args.labels or cfg.labels
    if not (train_path and labels_path and args.test and args.test_labels):
        raise ConfigError(
            "classify needs --train, --labels, --test and --test-labels",
            ["train", "labels", "test", "test_labels"],
        )
    inputs: dict = {}
    xtr = _load_matrix(train_path, "train", inputs)
    ytr = _load_labels(labels_path, "train_labels", inputs)
    xte = _load_matrix(args.test, "test", inputs)
    yte = _load_labels(args.test_labels, "test_labels", inputs)
    if ytr.shape[0] != xtr.shape[0]:
        raise ContractError(f"{ytr.shape[0]} train labels for {xtr.shape[0]} rows")
    if yte.shape[0] != xte.shape[0]:
        raise ContractError(f"{yte.shape[0]} test labels for {xte.shape[0]} rows")
    train = EmbeddingSet(xtr, ytr)
    test = EmbeddingSet(xte)
    if test.D != train.D:
        raise ContractError(f"train has D={train.D}, test has D={test.D}")
    C = train.n_classes
    if C < 2:
        raise ContractError("training labels contain a single class")
    unseen = sorted(set(np.unique(yte).tolist()) - set(range(C)))
    if unseen:
        raise ContractError(f"classes {unseen} present in test but absent in train")
    if np.unique(yte).size < 2:
        raise ContractError("test labels contain a single class; AUC is undefined")

    s = eig_sym(covariance(center(train, by_class=True)), source_N=train.N)
    contrasts = [dg.class_contrast(train, c) for c in range(C)]
    raw_dirs = [fisher_direction(s, d) for d in contrasts]

    result: dict = {"N_train": train.N, "N_test": test.N, "D": train.D, "n_classes": C}
    result["raw"] = _ovr_block(test.data, yte, raw_dirs)
    result["train_separation"] = [_separation_row(s, c, d) for c, d in enumerate(contrasts)]
    notes: list[str] = []
    config = {**eff, "calibrated": args.calibrated, "covariance": "within_class"}
    if args.calibrated:
        K = _auto_or_number(args.k, cfg.zeta_K, int, "--k")
        beta = _auto_or_number(args.beta, cfg.zeta_beta, float, "--beta")
        nf = dg.noise_floor(
            s, eff["noise_floor"]["method"], eff["noise_floor"]["c0"],
            embeddings=train, seed=eff["seed"], by_class=True,
        )
        cs, notes = _capture_warnings(calibrate, s, K, beta, nf)
        cal_dirs = [calibrated_fisher(s, cs, d) for d in contrasts]
        result["calibrated"] = _ovr_block(test.data, yte, cal_dirs)
        result["calibrated"]["provenance"] = {**cs.provenance(), "noise_floor": nf.to_dict()}
        config["zeta"] = {"K": K, "beta": beta}
    summary = dg.diagnose(
        train,
        variance_fraction=eff["variance_fraction"],
        tau=eff["tau"],
        noise_method=eff["noise_floor"]["method"],
        c0=eff["noise_floor"]["c0"],
        k_list=(),
        within_class=True,
        seed=eff["seed"],
    )
    table = summary.table_rows() + [("Test AUC", result["raw"]["macro_auc"])]
    if args.calibrated:
        table.append(("Test AUC (calibrated)", result["calibrated"]["macro_auc"]))
    result["table"] = [{"metric": m, "value": v} for m, v in table]
    _emit_text(sio.dumps(_envelope("classify", config, inputs, result, notes)), args.output)
    return 0


def _ovr_block(x: np.ndarray, y: np.ndarray, directions: list[np.ndarray]) -> dict:
    per_class = {}
    for c, w in enumerate(directions):
        mine = y == c
        if not mine.any():
            per_class[str(c)] = None  # class absent from the test set
            continue
        scores = x @ w
        per_class[str(c)] = roc_auc(scores[mine], scores[~mine])
    present = [v for v in per_class.values() if v is not None]
    return {"macro_auc": float(np.mean(present)), "per_class_auc": per_class}


def _separation_row(s: Spectrum, c: int, d: np.ndarray) -> dict:
    from spectral_lab.separation import mahalanobis_energy

    me = mahalanobis_energy(dg.decompose(s, d, c))
    return {
        "class": c,
        "d_m_squared": me.full_energy,
        "gaussian_auc": gaussian_auc(me.full_energy),
        "fisher_score_auc": fisher_score_auc(me.full_energy),
    }


def cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config", ["config"])
    cfg = load_config(args.config)
    if cfg.sweep is None:
        raise ConfigError("simulate config needs a 'sweep' block", ["sweep"])
    if args.seed is not None:
        cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
    if args.k is not None:
        cfg = RunConfig(**{**cfg.__dict__, "k_list": _parse_k_list(args.k, cfg.k_list)})
    out_dir = args.output or cfg.output_dir
    if not out_dir:
        raise ConfigError("simulate needs --output or output_dir in the config", ["output_dir"])
    spec = cfg.synthetic_spec()
    sweep_cfg = cfg.sweep_config(workers=args.workers)
    if args.dry_run:
        rows = len(cfg.sweep.N_grid) * cfg.sweep.trials
        sys.stdout.write(f"rows={rows}\n" + sio.dumps(cfg.to_dict()))
        return 0

    sr = run_sweep(spec, cfg.sweep.N_grid, cfg.sweep.trials, sweep_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "sweep.csv": sr.to_csv(),
        "sweep.json": sr.to_json() + "\n",
        "modes.csv": _modes_csv(sr),
        "stability.csv": _stability_csv(sr),
    }
    scaling = {
        "op_err": _fit_or_reason(sr, "op_err", -0.5),
        "K_of_N": _fit_or_reason(sr, "K_of_N", 1.0 / (2.0 * spec.beta) if spec.beta > 0 else None),
    }
    files["scaling.json"] = sio.dumps(scaling)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    result = {
        "rows": len(sr.rows),
        "failed_rows": sum(r["status"] != "ok" for r in sr.rows),
        "files": {name: "sha256:" + hashlib.sha256(text.encode()).hexdigest() for name, text in files.items()},
        "scaling": scaling,
    }
    doc = _envelope("simulate", cfg.to_dict(), {"config": {"sha256": sio.digest(sio.read_bytes(args.config))}}, result)
    (out / "report.json").write_text(sio.dumps(doc), encoding="utf-8")
    return 0


def _fit_or_reason(sr, field_name: str, expected) -> dict:
    try:
        fit = scaling_fit(sr, field_name).to_dict()
    except ContractError as exc:
        return {"slope": None, "reason": str(exc), "expected_slope": expected}
    fit["expected_slope"] = expected
    return fit


def _log_cell(v: float) -> str:
    return repr(math.log(v)) if v > 0 else ""


def _modes_csv(sr) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "trial", "mode", "log_mode", "lambda", "log_lambda", "alpha_sq", "log_alpha_sq"])
    for N, t, i, lam, asq in mode_table(sr):
        w.writerow([N, t, i, repr(math.log(i)), repr(lam), _log_cell(lam), repr(asq), _log_cell(asq)])
    return buf.getvalue()


def _stability_csv(sr) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "k", "trials_ok", "median_sin", "q25_sin", "q75_sin", "median_dk_bound", "eigengap"])
    for N in sr.N_grid:
        rows = [r for r in sr.ok_rows() if r["N"] == N]
        for k in sr.config.k_list:
            sines = np.array([r[f"sin_k{k}"] for r in rows], dtype=float)
            if sines.size == 0:
                w.writerow([N, k, 0, "", "", "", "", ""])
                continue
            bounds = np.array([r[f"dk_bound_k{k}"] for r in rows], dtype=float)
            q25, med, q75 = np.quantile(sines, [0.25, 0.5, 0.75])
            w.writerow([
                N, k, sines.size, repr(float(med)), repr(float(q25)), repr(float(q75)),
                repr(float(np.median(bounds))), repr(float(rows[0][f"gap_k{k}"])),
            ])
    return buf.getvalue()


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog=TOOL,
        description="Spectral diagnostics for embedding covariances.",
        epilog=EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, thresholds=False, output=True):
        sp.add_argument("--config", help="RunConfig JSON; command-line flags override it")
        if output:
            sp.add_argument("--output", help="output file (default: stdout)")
        if thresholds:
            sp.add_argument("--noise-floor", choices=["theory", "split_half", "split-half"], default=None)
            sp.add_argument("--c0", type=float, help="constant of the theory noise floor (default 1.0)")
            sp.add_argument("--seed", type=int, help="seed for the split-half shuffle (default 0)")
        sp.epilog = EXIT_CODES
        sp.formatter_class = argparse.RawDescriptionHelpFormatter

    sp = sub.add_parser("spectrum", help="eigenvalues (and optionally eigenvectors) of the covariance")
    common(sp)
    sp.add_argument("--input", help="matrix file (CSV or SPL1 binary)")
    sp.add_argument("--vectors", action="store_true", help="include sign-fixed eigenvectors")
    sp.add_argument("--format", choices=["json", "csv", "bin"], default="json")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("diagnose", help="effective rank, K(N), k(N), Mahalanobis energy, slope, DK bounds")
    common(sp, thresholds=True)
    sp.add_argument("--input", help="matrix file")
    sp.add_argument("--labels", help="label file, one integer per row")
    sp.add_argument("--ref", help="reference matrix or spectrum JSON for eigengaps")
    sp.add_argument("--tau", type=float, help="k(N) threshold (default 0.1)")
    sp.add_argument("--variance-fraction", type=float, help="effective-rank fraction (default 0.95)")
    sp.add_argument("--k", help="comma-separated subspace sizes for DK bounds (default 1)")
    sp.add_argument("--within-class", action="store_true", help="pool class-centered covariance")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("stability", help="principal-angle rotation between two samples")
    common(sp)
    sp.add_argument("--ref", help="reference matrix file")
    sp.add_argument("--test", help="test matrix file")
    sp.add_argument("--k", help="comma-separated subspace sizes (default 1,2,3,4)")
    sp.add_argument("--seed", type=int, help="seed for the split-half floor (default 0)")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("zeta-filter", help="replace the unrecoverable tail with a power law")
    common(sp, thresholds=True)
    sp.add_argument("--input", help="matrix file or spectrum JSON")
    sp.add_argument("--k", help="splice index K or 'auto' (default auto)")
    sp.add_argument("--beta", help="tail exponent or 'auto' (default auto)")
    sp.add_argument("--dry-run", action="store_true", help="print K, beta, c and write nothing")
    sp.add_argument("--vectors", action="store_true", help="include eigenvectors in the output")
    sp.add_argument("--format", choices=["json", "csv", "bin"], default="json")
    sp.set_defaults(func=cmd_zeta_filter)

    sp = sub.add_parser("classify", help="one-vs-rest Fisher AUC, raw and zeta-calibrated")
    common(sp, thresholds=True)
    sp.add_argument("--train", help="training matrix file")
    sp.add_argument("--input", help="alias of --train")
    sp.add_argument("--labels", help="training labels")
    sp.add_argument("--test", help="test matrix file")
    sp.add_argument("--test-labels", help="test labels")
    sp.add_argument("--calibrated", action="store_true", help="also score with the zeta-filtered spectrum")
    sp.add_argument("--k", help="splice index K or 'auto' for --calibrated")
    sp.add_argument("--beta", help="tail exponent or 'auto' for --calibrated")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("simulate", help="synthetic sweep with known population truth")
    common(sp, output=False)
    sp.add_argument("--output", help="output directory (default: output_dir from the config)")
    sp.add_argument("--seed", type=int, help="noise seed, overrides the config")
    sp.add_argument("--k", help="comma-separated subspace sizes, overrides the config")
    sp.add_argument("--workers", type=int, default=None, help="worker threads (capped by SPECTRAL_LAB_THREADS)")
    sp.add_argument("--dry-run", action="store_true", help="print the effective config and row count only")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SpectralLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ConfigError) and exc.keys:
            print(f"offending keys: {', '.join(exc.keys)}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
