"""Config-driven sweeps over measurement counts and frame-potential orders.

Configs are INI files::

    [hamiltonian]
    variant = ISING
    n_s = 5
    n_b = 3

    [protocol]
    T = 15

    [sweep]
    n_list = 1..40
    K_list = 1
    method = enumerate

    [output]
    output_dir = out/fig2a
    emit = frame_potential, theory

Unknown keys are rejected. Every parsed value is echoed into
``summary.json``.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import theory
from .frame_potential import (
    FramePotentialEstimate,
    Method,
    frame_potentials,
    haar_frame_potential,
    purity_frame_potential,
)
from .hamiltonian import (
    CouplingSpec,
    HamiltonianSet,
    UnsupportedClassificationError,
    Variant,
    build,
    classify_alpha,
    is_integrable,
)
from .propagator import Spectral, hermitian_eig
from .protocol import (
    DEFAULT_MAX_BRANCHES,
    DEFAULT_PRUNE_THRESHOLD,
    ProtocolConfig,
    average_state,
    enumerate_ensemble,
    revival_curve,
    sample_ensemble,
)
from .spin_hilbert import zero_state

ROWS_SCHEMA = "hdtzeno.rows/1"
ROW_FIELDS = [
    "n", "K", "delta_t", "F_value", "F_err", "truncated_mass",
    "theory_hdt", "theory_hdt_plus", "theory_zeno", "alpha", "c_H",
    "haar_baseline", "method", "M", "seed",
]
EMIT_CHOICES = {"frame_potential", "theory", "revival", "classify", "derivation_check"}
METHODS = {"enumerate", "sample"}
TIME_UNITS_NOTE = "dimensionless time with hbar = 1; couplings set the energy unit"
MAX_DENSE_QUBITS = 12
MAX_DERIVATION_QUBITS = 6


class ConfigError(ValueError):
    """Invalid experiment configuration, with the offending line when known."""


@dataclass
class ExperimentConfig:
    hamiltonian: CouplingSpec
    T: float = 15.0
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    max_branches: int = DEFAULT_MAX_BRANCHES
    n_list: list[int] = field(default_factory=lambda: [1])
    K_list: list[int] = field(default_factory=lambda: [1])
    method: str = "enumerate"
    M: int = 1000
    seed: int = 0
    r: float = 0.1
    output_dir: Path = Path("out")
    emit: list[str] = field(default_factory=lambda: ["frame_potential", "theory"])
    compare_integrable: bool = False
    revival_t_max: float = 10.0
    revival_points: int = 2001
    derivation_dts: list[float] = field(default_factory=lambda: [0.1, 0.05, 0.025])

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigError("T must be finite and positive")
        if not self.n_list:
            raise ConfigError("n_list must not be empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("n_list must be strictly increasing")
        if self.n_list[0] < 1:
            raise ConfigError("n_list entries must be >= 1")
        if not self.K_list or min(self.K_list) < 1:
            raise ConfigError("K_list must be non-empty with entries >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {sorted(METHODS)}")
        if self.method == "sample" and self.M < 2:
            raise ConfigError("M must be >= 2 for sampling")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        bad = set(self.emit) - EMIT_CHOICES
        if bad:
            raise ConfigError(f"unknown emit entries {sorted(bad)}")

    @property
    def partition(self):
        return self.hamiltonian.partition

    def echo(self) -> dict:
        out = dataclasses.asdict(self)
        out["hamiltonian"] = {
            k: (v.value if isinstance(v, Variant) else v)
            for k, v in dataclasses.asdict(self.hamiltonian).items()
        }
        out["output_dir"] = str(self.output_dir)
        return out


# ------------------------------------------------------------------ parsing

def _ints(text: str) -> list[int]:
    out = []
    for chunk in text.replace(" ", "").split(","):
        if ".." in chunk:
            lo, hi = chunk.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            out.append(int(chunk))
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def _words(text: str) -> list[str]:
    return [w.strip() for w in text.split(",") if w.strip()]


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_HAMILTONIAN_KEYS = {
    "variant": lambda s: Variant(s.strip().upper()),
    "n_s": int,
    "n_b": int,
    "J_x": float,
    "J_z": float,
    "J_zz": float,
    "J_yy": float,
    "J_xxx": float,
}
_KEYS = {
    "protocol": {"T": float, "prune_threshold": float, "max_branches": int},
    "sweep": {
        "n_list": _ints,
        "K_list": _ints,
        "method": lambda s: s.strip().lower(),
        "M": int,
        "seed": int,
        "r": float,
        "compare_integrable": _bool,
    },
    "output": {"output_dir": Path, "emit": _words},
    "revival": {"t_max": float, "points": int},
    "derivation": {"dts": _floats},
}
_ATTR = {("revival", "t_max"): "revival_t_max", ("revival", "points"): "revival_points", ("derivation", "dts"): "derivation_dts"}


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    where = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section and ("=" in line) and not line.startswith(("#", ";")):
            where[(section, line.split("=", 1)[0].strip())] = i
    return where


def _read_ini(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return cp


def parse_config(texts: list[tuple[str, str]], overrides: dict | None = None) -> ExperimentConfig:
    """Merge INI texts (later ones win) and flag overrides into a config.

    ``texts`` holds ``(source_name, text)`` pairs. Errors name the source
    and line of the offending key.
    """
    ham: dict = {}
    kw: dict = {}
    origin: dict[tuple[str, str], str] = {}
    for source, text in texts:
        cp = _read_ini(text, source)
        lines = _line_numbers(text)
        for section in cp.sections():
            for key, raw in cp.items(section):
                loc = f"{source}:{lines.get((section, key), '?')}"
                origin[(section, key)] = loc
                if section == "hamiltonian":
                    parser = _HAMILTONIAN_KEYS.get(key)
                else:
                    parser = _KEYS.get(section, {}).get(key)
                if parser is None:
                    raise ConfigError(f"{loc}: unknown key {key!r} in section [{section}]")
                try:
                    value = parser(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{loc}: bad value for {key}: {exc}") from exc
                if section == "hamiltonian":
                    ham[key] = value
                else:
                    kw[_ATTR.get((section, key), key)] = value
    kw.update(overrides or {})
    for needed in ("n_s", "n_b"):
        if needed not in ham:
            raise ConfigError(f"[hamiltonian] {needed} is required")
    try:
        spec = CouplingSpec(**ham)
        return ExperimentConfig(hamiltonian=spec, **kw)
    except ConfigError as exc:
        loc = _guess_origin(str(exc), origin)
        raise ConfigError(f"{loc}: {exc}" if loc else str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"[hamiltonian]: {exc}") from exc


def _guess_origin(message: str, origin: dict[tuple[str, str], str]) -> str | None:
    for (_, key), loc in origin.items():
        if message.startswith(key) or f" {key}" in message:
            return loc
    return None


def load_config(path: str | Path | None = None, preset: str | None = None, **overrides) -> ExperimentConfig:
    texts = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        texts.append((f"<preset {preset}>", PRESETS[preset]))
    if path is not None:
        path = Path(path)
        try:
            texts.append((str(path), path.read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not texts:
        raise ConfigError("give a config file or a preset")
    return parse_config(texts, {k: v for k, v in overrides.items() if v is not None})


# ------------------------------------------------------------------ presets

def _preset(n_s, n_b, T, n_list, *, variant="ISING", K_list="1", method="enumerate",
            M=1000, emit="frame_potential, theory", extra="") -> str:
    return (
        f"[hamiltonian]\nvariant = {variant}\nn_s = {n_s}\nn_b = {n_b}\n\n"
        f"[protocol]\nT = {T}\n\n"
        f"[sweep]\nn_list = {n_list}\nK_list = {K_list}\nmethod = {method}\nM = {M}\nseed = 20250101\nr = 0.1\n{extra}\n"
        f"[output]\nemit = {emit}\n"
    )


_ZENO_GRID = "20, 30, 40, 60, 80, 120, 160, 240, 320, 480"
PRESETS = {
    "fig2a": _preset(5, 3, 15, "1..40"),
    "fig2b": _preset(7, 1, 15, "1..60"),
    "fig2c": _preset(7, 1, 5, "1..60"),
    "fig3": _preset(7, 1, 15, "1..30", K_list="1, 3, 10", method="sample", M=1000,
                    extra="compare_integrable = true\n"),
    "fig4a": _preset(5, 3, 15, _ZENO_GRID, variant="ISING"),
    "fig4b": _preset(5, 3, 15, _ZENO_GRID, variant="YY"),
    "fig4c": _preset(5, 3, 15, _ZENO_GRID, variant="XXX"),
    "fig6": _preset(7, 1, 15, "1..60", emit="frame_potential, revival"),
}


# ------------------------------------------------------------------ running

@dataclass
class ZenoConstants:
    alpha: int
    c_H_low_haar: float
    c_H_low_evolved: float
    c_H_high: dict[int, float]

    def for_order(self, K: int) -> float:
        return self.c_H_high[K] if self.alpha == 3 else self.c_H_low_haar


def zeno_constants(hs: HamiltonianSet, Ks, T: float) -> ZenoConstants:
    alpha = classify_alpha(hs)
    high = {K: theory.c_H_high(hs, K) for K in sorted(set(Ks) | {1})} if alpha == 3 else {}
    return ZenoConstants(
        alpha=alpha,
        c_H_low_haar=theory.c_H_low(hs, "HAAR"),
        c_H_low_evolved=theory.c_H_low(hs, "EVOLVED", T=T),
        c_H_high=high,
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _theory_columns(cfg: ExperimentConfig, consts: ZenoConstants, n: int, K: int) -> dict:
    N_s, N_b = cfg.partition.dim_s, cfg.partition.dim_b
    if K == 1:
        hdt, plus = theory.hdt_f1(N_s, N_b, n), None
    else:
        hdt, plus = theory.hdt_fk_bound(N_s, N_b, n, K), theory.hdt_fk_bound_plus(N_s, N_b, n, K)
    c_H = consts.for_order(K)
    zeno = theory.zeno_bound(cfg.T, n, consts.alpha, c_H) if n >= 1 else 1.0
    return {"theory_hdt": hdt, "theory_hdt_plus": plus, "theory_zeno": zeno,
            "alpha": consts.alpha, "c_H": c_H, "haar_baseline": haar_frame_potential(cfg.partition.n_s, K)}


def sweep_rows(cfg: ExperimentConfig, spec: CouplingSpec | None = None) -> list[dict]:
    """One row per ``(n, K)``; ``spec`` overrides the config's Hamiltonian."""
    spec = spec or cfg.hamiltonian
    hs = build(spec)
    spectral = hermitian_eig(hs.H)
    consts = zeno_constants(hs, cfg.K_list, cfg.T)
    rows = []
    for n in cfg.n_list:
        for est in _estimates(hs, spectral, cfg, n):
            row = {
                "n": n, "K": est.K, "delta_t": cfg.T / n,
                "F_value": est.value, "F_err": est.std_error, "truncated_mass": est.truncated_mass,
            }
            row.update(_theory_columns(cfg, consts, n, est.K))
            row.update({
                "method": "EXACT" if cfg.method == "enumerate" else "PAIR_ESTIMATOR",
                "M": est.M if est.M is not None else "",
                "seed": cfg.seed if cfg.method == "sample" else "",
            })
            rows.append(row)
    return rows


def _estimates(hs: HamiltonianSet, spectral: Spectral, cfg: ExperimentConfig, n: int):
    pcfg = ProtocolConfig(cfg.T, n, cfg.partition, prune_threshold=cfg.prune_threshold,
                          max_branches=cfg.max_branches)
    if cfg.method == "sample":
        ens = sample_ensemble(hs, pcfg, cfg.M, cfg.seed, spectral)
        return frame_potentials(ens, cfg.K_list)

    out = {}
    if 1 in cfg.K_list:
        f1 = purity_frame_potential(average_state(hs, pcfg, spectral))
        out[1] = FramePotentialEstimate(1, f1, 0.0, Method.EXACT)
    higher = [K for K in cfg.K_list if K != 1]
    if higher:
        ens = enumerate_ensemble(hs, pcfg, spectral)
        for est in frame_potentials(ens, higher):
            out[est.K] = est
    return [out[K] for K in cfg.K_list]


def write_rows(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    buf.write(f"# schema: {ROWS_SCHEMA}\n")
    writer = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in ROW_FIELDS})
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_table(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(float(x)) for x in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def thresholds(cfg: ExperimentConfig, consts: ZenoConstants) -> dict:
    n_s, n_b = cfg.partition.n_s, cfg.partition.n_b
    c_H = consts.for_order(1)
    out = {"n_sat": theory.n_sat(n_s, n_b, cfg.r), "alpha": consts.alpha, "c_H_used": c_H}
    try:
        out["n_zeno"] = theory.n_zeno(cfg.T, n_s, consts.alpha, c_H)
        out["n_gamma"] = theory.n_gamma(cfg.T, n_b, consts.alpha, c_H)
        out["t_threshold"] = theory.t_threshold(n_s, n_b, cfg.r, consts.alpha, c_H)
    except theory.UndefinedThresholdError:
        out.update(n_zeno=None, n_gamma=None, t_threshold=None)
    return out


def plateau(ns: list[int], values: list[float], r: float) -> dict:
    """Range of ``n`` whose ``F^(1)`` is within a factor ``1 + r`` of the minimum."""
    values = np.asarray(values)
    lo = values.min() * (1 + r)
    inside = [n for n, v in zip(ns, values) if v <= lo]
    return {
        "n_first": inside[0],
        "n_last": inside[-1],
        "interior": bool(inside[0] > ns[0] and inside[-1] < ns[-1]),
    }


def classification(cfg: ExperimentConfig, consts: ZenoConstants) -> dict:
    try:
        integrable = is_integrable(cfg.hamiltonian)
    except UnsupportedClassificationError:
        integrable = None
    return {
        "alpha": consts.alpha,
        "integrable": integrable,
        "c_H": {
            "low_haar": consts.c_H_low_haar,
            "low_evolved": consts.c_H_low_evolved,
            "high": {str(k): v for k, v in consts.c_H_high.items()},
        },
    }


def derivation_report(cfg: ExperimentConfig):
    if cfg.partition.n_total > MAX_DERIVATION_QUBITS:
        raise ConfigError(
            f"derivation check is limited to {MAX_DERIVATION_QUBITS} qubits, got {cfg.partition.n_total}"
        )
    hs = build(cfg.hamiltonian)
    return theory.zeno_derivation_check(hs, K=max(cfg.K_list), dts=cfg.derivation_dts)


def run(cfg: ExperimentConfig) -> dict:
    """Run the configured sweep and write its artifacts to ``cfg.output_dir``."""
    start = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    hs = build(cfg.hamiltonian)
    consts = zeno_constants(hs, cfg.K_list, cfg.T)

    summary = {"software_version": __version__, "config": cfg.echo(), "time_units": TIME_UNITS_NOTE}
    summary.update(thresholds(cfg, consts))
    summary["classification"] = classification(cfg, consts)

    rows = sweep_rows(cfg) if "frame_potential" in cfg.emit else []
    if "theory" not in cfg.emit:
        for row in rows:
            for k in ("theory_hdt", "theory_hdt_plus", "theory_zeno"):
                row[k] = None
    write_rows(out / "rows.csv", rows)
    f1 = [(r["n"], r["F_value"]) for r in rows if r["K"] == 1]
    if f1:
        ns, vals = zip(*f1)
        summary["argmin_n_F1"] = int(ns[int(np.argmin(vals))])
        summary["min_F1"] = float(min(vals))
        summary["plateau"] = plateau(list(ns), list(vals), cfg.r)
    if cfg.compare_integrable and "frame_potential" in cfg.emit:
        if cfg.hamiltonian.variant is not Variant.ISING:
            raise ConfigError("compare_integrable needs the ISING variant")
        integrable = dataclasses.replace(cfg.hamiltonian, J_z=0.0)
        write_rows(out / "rows_integrable.csv", sweep_rows(cfg, integrable))

    if "revival" in cfg.emit:
        times = np.linspace(0.0, cfg.revival_t_max, cfg.revival_points)
        rc = revival_curve(hs, zero_state(cfg.partition.n_total), times)
        write_table(out / "revival.csv", ["t", "xi"], rc.rows())
        summary["first_revival_time"] = rc.first_revival_time
    if "derivation_check" in cfg.emit:
        rep = derivation_report(cfg)
        write_table(out / "derivation.csv", ["dt", "trotter_err", "pm_exact", "pm_perturbative"], rep.rows())
        summary["derivation"] = {"trotter_exponent": rep.trotter_exponent, "pm_exponent": rep.pm_exponent}

    summary["wall_time_s"] = time.perf_counter() - start
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return summary


def theory_only(cfg: ExperimentConfig) -> dict:
    """Theory curves and thresholds with no simulation."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    hs = build(cfg.hamiltonian)
    consts = zeno_constants(hs, cfg.K_list, cfg.T)
    rows = []
    for n in range(0, max(cfg.n_list) + 1):
        for K in cfg.K_list:
            row = {"n": n, "K": K, "delta_t": cfg.T / n if n else None}
            row.update(_theory_columns(cfg, consts, n, K))
            rows.append(row)
    write_rows(out / "theory.csv", rows)
    summary = {"software_version": __version__, "config": cfg.echo(), "time_units": TIME_UNITS_NOTE}
    summary.update(thresholds(cfg, consts))
    summary["classification"] = classification(cfg, consts)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return summary


def validate(cfg: ExperimentConfig) -> list[str]:
    """Feasibility diagnostics; an empty list means nothing to flag."""
    notes = []
    part = cfg.partition
    n_max = max(cfg.n_list)
    if cfg.method == "enumerate" and any(K >= 2 for K in cfg.K_list):
        log2_branches = part.n_b * n_max
        if log2_branches > math.log2(cfg.max_branches):
            notes.append(
                f"warning: up to 2^{log2_branches} branches at n={n_max} exceed the cap of "
                f"{cfg.max_branches} before pruning; raise prune_threshold or use method=sample"
            )
    elif cfg.method == "enumerate" and part.n_b * n_max > math.log2(cfg.max_branches):
        notes.append(
            f"note: 2^{part.n_b * n_max} records at n={n_max} exceed the branch cap; "
            "K=1 rows use the exact average-state route and are unaffected"
        )
    if part.n_total > MAX_DENSE_QUBITS:
        notes.append(f"warning: {part.n_total} qubits exceeds the dense-matrix limit of {MAX_DENSE_QUBITS}")
    if "derivation_check" in cfg.emit and part.n_total > MAX_DERIVATION_QUBITS:
        notes.append(f"warning: derivation check needs at most {MAX_DERIVATION_QUBITS} qubits")
    if "theory" in cfg.emit and not any(K >= 2 for K in cfg.K_list):
        notes.append("note: the higher-order HDT bound columns apply only for K >= 2; K_list has only K=1")
    return notes


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")
