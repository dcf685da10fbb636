"""Config-driven experiments: validation, dispatch, and atomic persistence of reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from lcsfluct import estimators as est
from lcsfluct.errors import LcsFluctError, ValidationError
from lcsfluct.model import ModelParams
from lcsfluct.seeding import check_seed, derive_seed

COMMANDS = ("gamma-curve", "gamma-star", "variance-scan", "bias-scan", "events", "coupling-path", "selftest")
FORMATS = ("csv", "json", "svg")
ENV_OUTPUT_DIR = "LCSFLUCT_OUTPUT_DIR"

COLUMNS = {
    "gamma-curve": ["q", "n", "reps", "gamma_hat", "stderr"],
    "gamma-star": ["k", "n", "reps", "gamma_hat", "stderr"],
    "variance-scan": ["n", "reps", "var_hat", "stderr"],
    "bias-scan": ["d", "reps", "inner_reps", "mean_delta", "ci_lo", "ci_hi", "kappa_hat"],
    "events": ["eps", "q_e", "reps", "freq_O", "binom_tail_O", "freq_K", "freq_Q_at_opt", "kappa_hat"],
    "coupling-path": ["level", "reps", "mean_lc", "stderr", "mean_increment", "increment_stderr"],
    "selftest": ["check", "passed", "detail"],
}

DEFAULT_MODEL = {"k": 2, "d": 16, "beta": 0.75, "p": 0.5, "m": 16}
DEFAULT_Q_GRID = [round(0.1 * i, 1) for i in range(-6, 7)]

_DEFAULTS = {
    "gamma-curve": {"reps": 200, "n": 2000},
    "gamma-star": {"reps": 200, "n_grid": [1000, 2000, 5000, 10000]},
    "variance-scan": {"reps": 2000, "n_grid": [512, 1024, 2048, 4096]},
    "bias-scan": {"reps": 200, "inner_reps": 8, "d_grid": [16, 32, 64]},
    "events": {"reps": 100, "inner_reps": 8, "eps": 0.25, "model": {"k": 2, "d": 8, "beta": 0.75, "p": 0.5, "m": 8}},
    "coupling-path": {"reps": 200, "model": {"k": 2, "d": 64, "beta": 0.75, "p": 0.5, "m": 16}},
    "selftest": {"reps": 50},
}


@dataclass
class ExperimentConfig:
    command: str
    model: dict | None = None
    k: int | list | None = None
    n: int | None = None
    q_grid: list | None = None
    n_grid: list | None = None
    d_grid: list | None = None
    reps: int | None = None
    inner_reps: int | None = None
    eps: float | list | None = None
    gamma_e: float | None = None
    q_e: float | None = None
    kappa: float | None = None
    curve_n: int = 1000
    curve_reps: int = 100
    n_boot: int = 400
    master_seed: int = 0
    output_dir: str | None = None
    workers: int = 1
    emit: list = field(default_factory=lambda: ["csv", "json"])

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ValidationError(key, "unknown configuration field")
        if "command" not in data:
            raise ValidationError("command", "missing")
        return cls(**data)

    def with_defaults(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ValidationError("command", f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        merged = asdict(self)
        for key, value in _DEFAULTS[self.command].items():
            if merged.get(key) is None:
                merged[key] = value
        if merged["model"] is None:
            merged["model"] = dict(DEFAULT_MODEL)
        if merged["q_grid"] is None:
            merged["q_grid"] = list(DEFAULT_Q_GRID)
        if merged["k"] is None:
            merged["k"] = merged["model"].get("k", 2)
        return ExperimentConfig(**merged)

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentReport:
    command: str
    manifest: dict
    columns: list
    rows: list
    summary: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls(**json.loads(text))


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serialisable: {type(obj)!r}")


def _plain(value):
    return json.loads(json.dumps(value, default=_json_default))


# ------------------------------------------------------------- validation


def _positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise ValidationError(name, f"must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _model_params(spec: dict, **overrides) -> ModelParams:
    spec = {**spec, **overrides}
    for key in spec:
        if key not in ("k", "d", "beta", "p", "m", "kind"):
            raise ValidationError(f"model.{key}", "unknown model field")
    try:
        return ModelParams(k=spec.get("k", 2), d=spec["d"], beta=spec["beta"], p=spec["p"], m=spec["m"])
    except KeyError as exc:
        raise ValidationError(f"model.{exc.args[0]}", "missing") from None
    except ValidationError as exc:
        raise ValidationError(f"model.{exc.field}", str(exc).split(": ", 1)[-1]) from None


def _k_list(k):
    ks = k if isinstance(k, list) else [k]
    return [_positive_int(v, "k", minimum=2) for v in ks]


def validate(config: ExperimentConfig) -> ExperimentConfig:
    """Fill defaults and check every parameter the chosen command will use."""
    cfg = config.with_defaults()
    check_seed(cfg.master_seed, "master_seed")
    _positive_int(cfg.workers, "workers")
    _positive_int(cfg.reps, "reps")
    for fmt in cfg.emit:
        if fmt not in FORMATS:
            raise ValidationError("emit", f"unsupported format {fmt!r}; expected a subset of {FORMATS}")
    cmd = cfg.command
    if cmd == "gamma-curve":
        _k_list(cfg.k)
        _positive_int(cfg.n, "n")
        _positive_int(cfg.reps, "reps", minimum=2)
        for q in cfg.q_grid:
            if not -1 <= q <= 1:
                raise ValidationError("q_grid", f"q={q} outside [-1, 1]")
    elif cmd == "gamma-star":
        _k_list(cfg.k)
        _positive_int(cfg.reps, "reps", minimum=2)
        if len(cfg.n_grid) < 3:
            raise ValidationError("n_grid", "need at least 3 grid points")
        for n in cfg.n_grid:
            _positive_int(n, "n_grid")
    elif cmd == "variance-scan":
        _positive_int(cfg.reps, "reps", minimum=30)
        for n in cfg.n_grid:
            _positive_int(n, "n_grid")
            _variance_model(cfg.model, n)
    elif cmd == "bias-scan":
        _positive_int(cfg.inner_reps, "inner_reps")
        for d in cfg.d_grid:
            _model_params(cfg.model, d=d)
    elif cmd == "events":
        _model_params(cfg.model)
        _positive_int(cfg.inner_reps, "inner_reps")
        for eps in (cfg.eps if isinstance(cfg.eps, list) else [cfg.eps]):
            if not isinstance(eps, (int, float)) or eps <= 0:
                raise ValidationError("eps", f"must be > 0, got {eps!r}")
        if cfg.q_e is None and cfg.gamma_e is None:
            raise ValidationError("q_e", "events needs q_e or gamma_e")
        if cfg.q_e is not None and not 0 < cfg.q_e < 1:
            raise ValidationError("q_e", f"must lie in (0, 1), got {cfg.q_e}")
    elif cmd == "coupling-path":
        _model_params(cfg.model)
        _positive_int(cfg.reps, "reps", minimum=30)
    return cfg


def _variance_model(spec, n):
    if spec.get("kind", "long-block") == "iid":
        return est.IidSpec(k=spec.get("k", 2), n=n)
    d = spec.get("d")
    if not isinstance(d, int) or d < 2:
        raise ValidationError("model.d", f"must be an integer >= 2, got {d!r}")
    if n % (2 * d):
        raise ValidationError("n_grid", f"n={n} is not a multiple of 2d={2 * d}")
    return _model_params({k: v for k, v in spec.items() if k != "kind"}, m=n // (2 * d))


# -------------------------------------------------------------- pipelines


def _run_gamma_curve(cfg):
    rows, summary = [], {}
    for ki, k in enumerate(_k_list(cfg.k)):
        curve = est.estimate_mean_curve(k, cfg.n, cfg.q_grid, cfg.reps, derive_seed(cfg.master_seed, ki), cfg.workers)
        rows += [{"q": p.q, "n": p.n, "reps": p.reps, "gamma_hat": p.gamma_hat, "stderr": p.stderr} for p in curve.points]
        entry = {
            "gamma_star_hat": curve.gamma_star_hat,
            "symmetry_ok": all(r["ok"] for r in est.symmetry_probe(curve)),
            "concavity_ok": all(r["ok"] for r in est.concavity_probe(curve)),
            "derivative_probe": curve.derivative_probe,
        }
        if cfg.gamma_e is not None:
            entry["q_e"] = est.solve_q_e(curve, cfg.gamma_e)
        summary[f"k={k}"] = entry
    return rows, summary


def _run_gamma_star(cfg):
    rows, summary = [], {}
    for ki, k in enumerate(_k_list(cfg.k)):
        fit = est.fit_gamma_star(k, cfg.n_grid, cfg.reps, derive_seed(cfg.master_seed, ki), cfg.workers, cfg.n_boot)
        rows += [{"k": k, "n": p.n, "reps": p.reps, "gamma_hat": p.gamma_hat, "stderr": p.stderr} for p in fit.points]
        summary[f"k={k}"] = {"gamma_star_hat": fit.gamma_star_hat, "gamma_star_stderr": fit.gamma_star_stderr,
                             "rate_coef": fit.rate_coef}
    return rows, summary


def _run_variance_scan(cfg):
    rows = []
    for i, n in enumerate(cfg.n_grid):
        v = est.estimate_variance(_variance_model(cfg.model, n), cfg.reps, derive_seed(cfg.master_seed, i),
                                  cfg.workers, cfg.n_boot)
        rows.append({"n": v.n, "reps": v.reps, "var_hat": v.var_hat, "stderr": v.stderr})
    summary = {"steele_ok": all(r["var_hat"] <= r["n"] + 3 * r["stderr"] for r in rows)}
    if len(rows) >= 3 and all(r["var_hat"] > 0 for r in rows):
        slope, intercept, slope_se = est.fit_scaling_slope([(r["n"], r["var_hat"], r["stderr"]) for r in rows])
        summary.update(slope=slope, intercept=intercept, slope_stderr=slope_se)
    return rows, summary


def _run_bias_scan(cfg):
    rows, estimates = [], []
    for i, d in enumerate(cfg.d_grid):
        params = _model_params(cfg.model, d=d)
        b = est.estimate_bias(params, cfg.reps, cfg.inner_reps, derive_seed(cfg.master_seed, i), cfg.workers)
        estimates.append((b, params))
        rows.append({"d": d, "reps": b.reps, "inner_reps": b.inner_reps, "mean_delta": b.mean_delta,
                     "ci_lo": b.ci95[0], "ci_hi": b.ci95[1], "kappa_hat": b.kappa_hat})
    return rows, {"kappa_trend": kappa_trend(estimates)}


def kappa_trend(estimates):
    """Adjacent kappa_hat pairs along d; 'ok' unless kappa drops by more than 3 combined sigma."""
    out = []
    for (lo, p_lo), (hi, p_hi) in zip(estimates, estimates[1:]):
        se_lo = (lo.ci95[1] - lo.ci95[0]) / (2 * est.Z95) / p_lo.d ** p_lo.beta
        se_hi = (hi.ci95[1] - hi.ci95[0]) / (2 * est.Z95) / p_hi.d ** p_hi.beta
        slack = 3 * math.hypot(se_lo, se_hi)
        out.append({"d_lo": lo.d, "d_hi": hi.d, "kappa_lo": lo.kappa_hat, "kappa_hi": hi.kappa_hat,
                    "slack": slack, "ok": hi.kappa_hat >= lo.kappa_hat - slack})
    return out


def _run_events(cfg):
    params = _model_params(cfg.model)
    summary = {}
    q_e = cfg.q_e
    if q_e is None:
        curve_grid = [round(0.1 * i, 1) for i in range(-9, 10)]
        curve = est.estimate_mean_curve(params.k, cfg.curve_n, curve_grid, cfg.curve_reps,
                                        derive_seed(cfg.master_seed, 0), cfg.workers)
        q_e = est.solve_q_e(curve, cfg.gamma_e)
        summary["q_e_solved"] = q_e
    kappa = cfg.kappa
    if kappa is None:
        bias = est.estimate_bias(params, max(30, cfg.reps // 2), cfg.inner_reps, derive_seed(cfg.master_seed, 1),
                                 cfg.workers)
        kappa = bias.kappa_hat
        summary["kappa_hat_estimated"] = kappa
    rows = []
    eps_list = cfg.eps if isinstance(cfg.eps, list) else [cfg.eps]
    for i, eps in enumerate(eps_list):
        ev = est.event_frequencies(params, q_e, eps, cfg.reps, derive_seed(cfg.master_seed, 2, i), kappa,
                                   cfg.inner_reps, cfg.workers)
        rows.append({"eps": eps, "q_e": q_e, "reps": ev.reps, "freq_O": ev.freq_O, "binom_tail_O": ev.binom_tail_O,
                     "freq_K": ev.freq_K, "freq_Q_at_opt": ev.freq_Q_at_opt, "kappa_hat": kappa})
    summary["freq_O_envelope"] = math.exp(-params.m * params.p**2 / 2)
    return rows, summary


def _run_coupling_path(cfg):
    params = _model_params(cfg.model)
    stats = est.coupling_path_stats(params, cfg.reps, cfg.master_seed, cfg.workers)
    rows = []
    for lvl, mean, se in stats.levels:
        inc = stats.increments[lvl - 1] if lvl >= 1 else None
        rows.append({"level": lvl, "reps": stats.reps, "mean_lc": mean, "stderr": se,
                     "mean_increment": inc[1] if inc else None, "increment_stderr": inc[2] if inc else None})
    mean_inc = sum(i[1] for i in stats.increments) / len(stats.increments)
    summary = {
        "separation_sigma": (stats.levels[0][1] - stats.levels[-1][1])
        / max(1e-12, (stats.levels[0][2] ** 2 + stats.levels[-1][2] ** 2) ** 0.5),
        "mean_increment": mean_inc,
        "max_abs_increment": stats.max_abs_increment,
        "variance_floor_diagnostic": est.variance_floor_diagnostic(mean_inc, params),
    }
    return rows, summary


def _run_selftest(cfg):
    from lcsfluct.selftest import run_checks

    results = run_checks(cfg.master_seed, cfg.reps)
    rows = [{"check": name, "passed": int(ok), "detail": detail} for name, ok, detail in results]
    return rows, {"all_passed": all(ok for _, ok, _ in results)}


PIPELINES = {
    "gamma-curve": _run_gamma_curve,
    "gamma-star": _run_gamma_star,
    "variance-scan": _run_variance_scan,
    "bias-scan": _run_bias_scan,
    "events": _run_events,
    "coupling-path": _run_coupling_path,
    "selftest": _run_selftest,
}


def resolve_output_dir(cfg: ExperimentConfig, flag=None):
    return flag or cfg.output_dir or os.environ.get(ENV_OUTPUT_DIR) or "results"


def run_experiment(config: ExperimentConfig, write=True) -> ExperimentReport:
    from lcsfluct import __version__

    cfg = validate(config)
    rows, summary = PIPELINES[cfg.command](cfg)
    manifest = {
        "config": cfg.to_dict(),
        "tool": "lcsfluct",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "master_seed": cfg.master_seed,
    }
    report = ExperimentReport(command=cfg.command, manifest=_plain(manifest), columns=list(COLUMNS[cfg.command]),
                              rows=_plain(rows), summary=_plain(summary))
    if write:
        out = resolve_output_dir(cfg)
        emit_report(report, set(cfg.emit) | {"csv"}, out)
    return report


# ---------------------------------------------------------------- output


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def rows_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([format_value(row.get(col)) for col in report.columns])
    return buf.getvalue()


def atomic_write(path, data: str | bytes):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def output_paths(command, output_dir):
    stem = command.replace("-", "_")
    return {
        "csv": os.path.join(output_dir, f"{stem}_rows.csv"),
        "json": os.path.join(output_dir, f"{stem}_report.json"),
        "svg": os.path.join(output_dir, f"{stem}.svg"),
        "manifest": os.path.join(output_dir, f"{stem}_manifest.json"),
    }


def emit_report(report: ExperimentReport, formats, output_dir):
    """Write the requested formats (plus the manifest); returns {format: path}."""
    formats = set(formats)
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValidationError("emit", f"unsupported format {fmt!r}; expected a subset of {FORMATS}")
    paths = output_paths(report.command, output_dir)
    written = {}
    atomic_write(paths["manifest"], json.dumps(report.manifest, indent=2, sort_keys=True) + "\n")
    written["manifest"] = paths["manifest"]
    if "csv" in formats:
        atomic_write(paths["csv"], rows_csv(report))
        written["csv"] = paths["csv"]
    if "json" in formats:
        atomic_write(paths["json"], report.to_json() + "\n")
        written["json"] = paths["json"]
    if "svg" in formats:
        from lcsfluct.plots import render_svg

        atomic_write(paths["svg"], render_svg(report))
        written["svg"] = paths["svg"]
    return written


__all__ = [
    "COLUMNS",
    "COMMANDS",
    "ExperimentConfig",
    "ExperimentReport",
    "LcsFluctError",
    "emit_report",
    "run_experiment",
    "validate",
]
