"""Run configuration: a JSON document with a closed set of keys.

Unknown keys anywhere in the document are rejected with every offending key
listed, so a typo never silently falls back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from spectral_lab.diagnostics import DEFAULT_C0, DEFAULT_TAU, DEFAULT_VARIANCE_FRACTION
from spectral_lab.errors import ConfigError, InputFileError
from spectral_lab.synthlab import SweepConfig, SyntheticSpec

CONFIG_SCHEMA = "spectral-lab/config/1"

TOP_KEYS = {
    "input", "labels", "variance_fraction", "tau", "noise_floor", "k_list",
    "zeta", "seed", "output_dir", "sweep", "schema",
}
NOISE_KEYS = {"method", "c0"}
ZETA_KEYS = {"K", "beta"}
SWEEP_KEYS = {
    "D", "beta", "signal", "rotation_seed", "N_grid", "trials", "n_test",
    "calibrate", "n_per_class", "nuisance_modes", "nuisance_scale", "reference_N",
    "workers",
}


@dataclass(frozen=True)
class SweepBlock:
    D: int = 64
    beta: float = 2.0
    signal: tuple[float, ...] = (1.0, 0.5, 0.25)
    rotation_seed: int = 0
    N_grid: tuple[int, ...] = (128, 256, 512, 1024, 2048, 4096, 8192, 16384)
    trials: int = 20
    n_test: int = 4000
    calibrate: bool = True
    n_per_class: int = 500
    nuisance_modes: tuple[int, ...] = ()
    nuisance_scale: float = 1.0
    reference_N: int | None = None
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    labels: str | None = None
    variance_fraction: float = DEFAULT_VARIANCE_FRACTION
    tau: float = DEFAULT_TAU
    noise_method: str = "theory"
    c0: float = DEFAULT_C0
    k_list: tuple[int, ...] = (1, 2, 3, 4)
    zeta_K: int | str = "auto"
    zeta_beta: float | str = "auto"
    seed: int = 0
    output_dir: str | None = None
    sweep: SweepBlock | None = None

    def to_dict(self) -> dict:
        """Effective values in the same nested shape as the input document."""
        out: dict[str, Any] = {
            "input": self.input,
            "labels": self.labels,
            "variance_fraction": self.variance_fraction,
            "tau": self.tau,
            "noise_floor": {"method": self.noise_method, "c0": self.c0},
            "k_list": list(self.k_list),
            "zeta": {"K": self.zeta_K, "beta": self.zeta_beta},
            "seed": self.seed,
            "output_dir": self.output_dir,
        }
        if self.sweep is not None:
            sw = asdict(self.sweep)
            sw.pop("workers")
            out["sweep"] = {k: list(v) if isinstance(v, tuple) else v for k, v in sw.items()}
        return out

    def synthetic_spec(self) -> SyntheticSpec:
        sw = self._need_sweep()
        return SyntheticSpec(
            D=sw.D,
            beta=sw.beta,
            signal=sw.signal,
            n_per_class=sw.n_per_class,
            rotation_seed=sw.rotation_seed,
            noise_seed=self.seed,
            nuisance_modes=sw.nuisance_modes,
            nuisance_scale=sw.nuisance_scale,
        )

    def sweep_config(self, workers: int | None = None) -> SweepConfig:
        sw = self._need_sweep()
        return SweepConfig(
            k_list=self.k_list,
            variance_fraction=self.variance_fraction,
            tau=self.tau,
            noise_method=self.noise_method,
            c0=self.c0,
            n_test=sw.n_test,
            calibrate=sw.calibrate,
            zeta_K=self.zeta_K,
            zeta_beta=self.zeta_beta,
            reference_N=sw.reference_N,
            workers=sw.workers if workers is None else workers,
        )

    def _need_sweep(self) -> SweepBlock:
        if self.sweep is None:
            raise ConfigError("config has no 'sweep' block", ["sweep"])
        return self.sweep


def _unknown(doc: dict, allowed: set[str], prefix: str = "") -> list[str]:
    return [prefix + k for k in sorted(doc) if k not in allowed]


def _typed(value, kind, key: str, bad: list[str]):
    """Coerce ``value`` to ``kind`` or record ``key`` as a schema violation."""
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    bad.append(key)
    return None


def _int_list(value, key: str, bad: list[str]) -> tuple[int, ...]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        bad.append(key)
        return ()
    return tuple(value)


def _float_list(value, key: str, bad: list[str]) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        bad.append(key)
        return ()
    return tuple(float(v) for v in value)


def _auto_or(value, kind, key: str, bad: list[str]):
    if value == "auto":
        return "auto"
    return _typed(value, kind, key, bad)


def parse_config(doc: Any) -> RunConfig:
    """Validate a config document; raises ConfigError naming every bad key."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", [])
    unknown = _unknown(doc, TOP_KEYS)
    nf = doc.get("noise_floor", {})
    zeta = doc.get("zeta", {})
    sweep = doc.get("sweep")
    bad: list[str] = []
    if not isinstance(nf, dict):
        bad.append("noise_floor")
        nf = {}
    if not isinstance(zeta, dict):
        bad.append("zeta")
        zeta = {}
    if sweep is not None and not isinstance(sweep, dict):
        bad.append("sweep")
        sweep = None
    unknown += _unknown(nf, NOISE_KEYS, "noise_floor.")
    unknown += _unknown(zeta, ZETA_KEYS, "zeta.")
    if sweep is not None:
        unknown += _unknown(sweep, SWEEP_KEYS, "sweep.")
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)

    kw: dict[str, Any] = {}
    for key, kind in (("input", str), ("labels", str), ("output_dir", str)):
        if doc.get(key) is not None:
            kw[key] = _typed(doc[key], kind, key, bad)
    for key in ("variance_fraction", "tau"):
        if key in doc:
            kw[key] = _typed(doc[key], float, key, bad)
    if "seed" in doc:
        kw["seed"] = _typed(doc["seed"], int, "seed", bad)
    if "k_list" in doc:
        kw["k_list"] = _int_list(doc["k_list"], "k_list", bad)
    if "method" in nf:
        kw["noise_method"] = _typed(nf["method"], str, "noise_floor.method", bad)
        if kw["noise_method"] not in (None, "theory", "split_half"):
            bad.append("noise_floor.method")
    if "c0" in nf:
        kw["c0"] = _typed(nf["c0"], float, "noise_floor.c0", bad)
    if "K" in zeta:
        kw["zeta_K"] = _auto_or(zeta["K"], int, "zeta.K", bad)
    if "beta" in zeta:
        kw["zeta_beta"] = _auto_or(zeta["beta"], float, "zeta.beta", bad)

    if sweep is not None:
        sw: dict[str, Any] = {}
        for key, kind in (
            ("D", int), ("beta", float), ("rotation_seed", int), ("trials", int),
            ("n_test", int), ("calibrate", bool), ("n_per_class", int),
            ("nuisance_scale", float), ("workers", int),
        ):
            if key in sweep:
                sw[key] = _typed(sweep[key], kind, f"sweep.{key}", bad)
        if "signal" in sweep:
            sw["signal"] = _float_list(sweep["signal"], "sweep.signal", bad)
        if "N_grid" in sweep:
            sw["N_grid"] = _int_list(sweep["N_grid"], "sweep.N_grid", bad)
        if "nuisance_modes" in sweep:
            sw["nuisance_modes"] = _int_list(sweep["nuisance_modes"], "sweep.nuisance_modes", bad)
        if sweep.get("reference_N") is not None:
            sw["reference_N"] = _typed(sweep["reference_N"], int, "sweep.reference_N", bad)
        if not bad:
            kw["sweep"] = SweepBlock(**sw)

    if bad:
        raise ConfigError(f"invalid values for config keys: {', '.join(bad)}", bad)
    return RunConfig(**kw)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", []) from exc
    return parse_config(doc)
