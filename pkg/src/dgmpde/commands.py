"""Implementations of the CLI verbs. Every output is plain CSV or JSON."""
from __future__ import annotations

import csv
import dataclasses
import inspect
import json
import os
import time

import numpy as np

from .autodiff import TapeError, value_of
from .baselines import ConvergenceError, McConfig, bs_grid_solver, feynman_kac_mc, mfg_grid_solver, ou_simulate
from .cli import ConfigError
from .problems import REGISTRY
from .residuals import DerivConfig, ResidualError
from .training import (TrainConfig, TrainingError, checkpoint_load, checkpoint_save, history_csv, train)

NUMERIC_ERRORS = (TrainingError, ResidualError, TapeError, FloatingPointError, ConvergenceError)


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, (str, int, np.integer)) else _fmt(x) for x in r])


def build_problem(problem_id, coefficients=None, domain=None, sampling=None):
    cls, rec = REGISTRY[problem_id]
    coefficients = dict(coefficients or {})
    names = {f.name for f in dataclasses.fields(rec)}
    for key in coefficients:
        if key not in names:
            raise ConfigError(f"unknown coefficient {key!r} for {problem_id}; known: {sorted(names)}")
    options = {p for p in inspect.signature(cls.__init__).parameters if p not in ("self", "coeffs", "sizes")}
    for key in domain or {}:
        if key not in options:
            raise ConfigError(f"unknown [domain] option {key!r} for {problem_id}; known: {sorted(options)}")
    try:
        return cls(rec(**coefficients), sizes=dict(sampling or {}), **(domain or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem settings: {exc}") from exc


def problem_from_config(cfg):
    return build_problem(cfg["problem"], cfg.get("coefficients"), cfg.get("domain"), cfg.get("sampling"))


def deriv_config(cfg) -> DerivConfig:
    try:
        return DerivConfig(**cfg.get("derivatives", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[derivatives]: {exc}") from exc


def train_config(cfg) -> TrainConfig:
    sec = dict(cfg.get("training", {}))
    if "lr_schedule" in sec:
        try:
            sec["lr_schedule"] = [(int(a), float(b)) for a, b in sec["lr_schedule"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError("lr_schedule must be a list of [iteration, rate] pairs") from exc
    try:
        return TrainConfig(seed=int(cfg["seed"]), **sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[training]: {exc}") from exc


def evaluation_grid(cfg, problem) -> np.ndarray:
    """Product grid from ``[evaluation]`` axes ``[start, stop, count]``."""
    sec = cfg.get("evaluation", {})
    d = problem.dim
    names = ["t"] + (["x"] if d == 1 else []) + [f"x{i + 1}" for i in range(d)]
    if d == 1 and "x" in sec and "x1" in sec:
        raise ConfigError("give the spatial axis as either x or x1")
    for key in sec:
        if key == "checkpoint":
            continue
        if key not in names:
            raise ConfigError(f"evaluation axis {key!r} does not match the problem's {d} spatial dimension(s)")
    lo, hi = problem.box.input_bounds()
    box_lo, box_hi = problem.box.t0, problem.box.T
    axes = []
    for i in range(d + 1):
        keys = ["t"] if i == 0 else (["x", "x1"] if d == 1 else [f"x{i}"])
        key = next((k for k in keys if k in sec), keys[0])
        default = [box_lo, box_hi, 21] if i == 0 else [problem.box.lo[i - 1], problem.box.hi[i - 1], 21]
        spec = sec.get(key, default)
        try:
            a, b, n = float(spec[0]), float(spec[1]), int(spec[2])
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"evaluation axis {key} must be [start, stop, count]") from exc
        if n < 1:
            raise ConfigError(f"evaluation axis {key} needs at least one point")
        axes.append(np.linspace(a, b, n) if n > 1 else np.array([a]))
    if not (lo[0] - 1e-12 <= axes[0].min() and axes[0].max() <= hi[0] + 1e-12):
        raise ConfigError("evaluation times must lie in the problem's time range")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _columns(problem):
    return ["t"] + (["x"] if problem.dim == 1 else [f"x{i + 1}" for i in range(problem.dim)])


def _load(cfg, out):
    path = cfg.get("evaluation", {}).get("checkpoint", os.path.join(out, "checkpoint.bin"))
    if not os.path.isfile(path):
        raise ConfigError(f"checkpoint not found: {path}")
    try:
        models, state, meta = checkpoint_load(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if meta.get("problem") != cfg["problem"]:
        raise ConfigError(f"checkpoint holds problem {meta.get('problem')!r}, config names {cfg['problem']!r}")
    problem = build_problem(meta["problem"], meta.get("coefficients"), meta.get("domain"), meta.get("sampling"))
    return problem, models, meta


# -- verbs ------------------------------------------------------------------------

def cmd_train(cfg, out, deterministic=False):
    problem = problem_from_config(cfg)
    net = cfg.get("network", {})
    tcfg = train_config(cfg)
    dcfg = deriv_config(cfg)
    rng = np.random.default_rng(int(cfg["seed"]))
    try:
        models = problem.new_models(rng, int(net.get("layers", 3)), int(net.get("width", 50)),
                                    net.get("activation", "tanh"))
    except ValueError as exc:
        raise ConfigError(f"[network]: {exc}") from exc
    meta = {"problem": cfg["problem"], "coefficients": dataclasses.asdict(problem.coeffs),
            "domain": cfg.get("domain", {}), "sampling": cfg.get("sampling", {}), "seed": int(cfg["seed"])}
    try:
        result = train(problem, models, tcfg, dcfg)
    except TrainingError as exc:
        # keep the last finite parameters for inspection
        meta.update(iterations=len(exc.history), aborted=str(exc))
        checkpoint_save(models, None, meta, os.path.join(out, "checkpoint.bin"))
        with open(os.path.join(out, "history.csv"), "w") as fh:
            fh.write(history_csv(exc.history, deterministic))
        raise
    meta["iterations"] = result.iterations
    checkpoint_save(models, result.state, meta, os.path.join(out, "checkpoint.bin"))
    with open(os.path.join(out, "history.csv"), "w") as fh:
        fh.write(history_csv(result.history, deterministic))
    return result


def cmd_evaluate(cfg, out, deterministic=False):
    problem, models, meta = _load(cfg, out)
    pts = evaluation_grid(cfg, problem)
    dcfg = deriv_config(cfg)
    values = {n: np.asarray(value_of(models[n](pts))) for n in problem.unknowns}
    controls = problem.control(models, pts, dcfg)
    outside = np.zeros(pts.shape[0], dtype=bool)
    for m in models.values():
        outside |= m.outside(pts)
    header = _columns(problem) + list(values) + list(controls) + ["extrapolated"]
    rows = ([*p, *(values[n][i] for n in values), *(controls[c][i] for c in controls), int(outside[i])]
            for i, p in enumerate(pts))
    _write_csv(os.path.join(out, "surface.csv"), header, rows)
    return pts, values, controls


def cmd_compare(cfg, out, deterministic=False):
    start = time.perf_counter()
    source = cfg.get("compare", {}).get("source", "checkpoint")
    iterations = 0
    if source == "checkpoint":
        problem, models, meta = _load(cfg, out)
        iterations = int(meta.get("iterations", 0))
        pts = evaluation_grid(cfg, problem)
        values = problem.report_values(models, pts)
    elif source == "oracle":
        problem = problem_from_config(cfg)
        pts = evaluation_grid(cfg, problem)
        values = problem.report_reference(pts)
    elif source == "baseline":
        problem = problem_from_config(cfg)
        pts = evaluation_grid(cfg, problem)
        values = baseline_values(cfg, problem, pts)
    else:
        raise ConfigError(f"unknown compare source {source!r}")
    reference = problem.report_reference(pts)
    if reference is None or values is None:
        raise ConfigError(f"no reference available for {problem.id}")
    report = error_report(problem, pts, values, reference)
    cols = _columns(problem)
    _write_csv(os.path.join(out, "errors.csv"), cols + ["quantity", "value", "reference", "abs_err", "rel_err"],
               report["rows"])
    _write_csv(os.path.join(out, "error_slices.csv"), ["quantity", "t", "max_err", "mae", "rmse"], report["slices"])
    summary = {"problem": problem.id, "seed": int(cfg["seed"]), "iterations": iterations,
               "mae": report["mae"], "rmse": report["rmse"], "max_err": report["max_err"],
               "wall_ms": 0 if deterministic else round(1e3 * (time.perf_counter() - start), 3)}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def error_report(problem, pts, values, reference) -> dict:
    """Absolute and relative errors; the relative denominator is floored at
    ``1e-8`` times the largest reference magnitude of that quantity."""
    rows, slices, all_err = [], [], []
    for q, ref in reference.items():
        val = np.asarray(values[q], dtype=np.float64)
        ref = np.asarray(ref, dtype=np.float64)
        if val.shape != ref.shape:
            raise ConfigError(f"grid mismatch for {q}: {val.shape} vs {ref.shape}")
        err = np.abs(val - ref)
        floor = 1e-8 * max(float(np.max(np.abs(ref))), 1e-300)
        rel = err / np.maximum(np.abs(ref), floor)
        for i, p in enumerate(pts):
            rows.append([*p, q, val[i], ref[i], err[i], rel[i]])
        for t in np.unique(pts[:, 0]):
            e = err[pts[:, 0] == t]
            slices.append([q, t, e.max(), e.mean(), np.sqrt(np.mean(e**2))])
        all_err.append(err)
    err = np.concatenate(all_err)
    return {"rows": rows, "slices": slices, "mae": float(err.mean()),
            "rmse": float(np.sqrt(np.mean(err**2))), "max_err": float(err.max())}


BASELINE_SCHEMES = {
    "european_call": ("implicit_grid", "monte_carlo"),
    "american_put": ("implicit_grid",),
    "fokker_planck": ("ou_monte_carlo",),
    "mfg": ("fixed_point_grid",),
    "merton": ("closed_form",),
    "execution": ("closed_form",),
    "systemic": ("closed_form",),
}


def _scheme(cfg, problem):
    sec = cfg.get("baseline", {})
    known = BASELINE_SCHEMES[problem.id]
    scheme = sec.get("scheme", known[0])
    if scheme not in known:
        raise ConfigError(f"unknown scheme {scheme!r} for {problem.id}; known: {', '.join(known)}")
    return scheme, sec


def baseline_values(cfg, problem, pts):
    """Baseline solution interpolated to ``pts`` (for comparisons)."""
    from scipy.interpolate import RegularGridInterpolator

    scheme, sec = _scheme(cfg, problem)
    if scheme == "implicit_grid":
        g = _bs_grid(problem, sec)
        return {"f": RegularGridInterpolator((g.t, g.x), g.u)(pts[:, :2])}
    if scheme == "fixed_point_grid":
        r = _mfg_grid(problem, sec)
        h = RegularGridInterpolator((r.t, r.q), r.h, bounds_error=False, fill_value=None)(pts[:, :2])
        m = RegularGridInterpolator((r.t, r.q), r.m, bounds_error=False, fill_value=None)(pts[:, :2])
        return {"h": h, "m": m}
    if scheme == "closed_form":
        return problem.report_reference(pts)
    raise ConfigError(f"scheme {scheme!r} has no gridded output to compare")


def _bs_grid(problem, sec):
    kind = "put" if problem.id == "american_put" else "call"
    return bs_grid_solver(problem.coeffs, int(sec.get("n_t", 200)), int(sec.get("n_x", 200)),
                          problem.box.sample_hi[0], kind=kind, american=problem.id == "american_put")


def _mfg_grid(problem, sec):
    return mfg_grid_solver(problem.coeffs, int(sec.get("n_t", 400)), int(sec.get("n_x", 401)),
                           problem.box.sample_hi[0])


def cmd_baseline(cfg, out, deterministic=False):
    problem = problem_from_config(cfg)
    scheme, sec = _scheme(cfg, problem)
    path = os.path.join(out, "baseline.csv")
    seed = int(cfg["seed"])
    if scheme == "implicit_grid":
        g = _bs_grid(problem, sec)
        rows = ([t, x, g.u[i, j]] for i, t in enumerate(g.t) for j, x in enumerate(g.x))
        _write_csv(path, ["t", "x", "value"], rows)
    elif scheme == "monte_carlo":
        pts = evaluation_grid(cfg, problem)
        c = problem.coeffs
        mc = McConfig(int(sec.get("paths", 10_000)), 1, seed, antithetic=True)
        rows = []
        for p in pts:
            est, se = feynman_kac_mc(c, lambda s: np.maximum(s - c.K, 0.0), mc, t=p[0], x=p[1])
            rows.append([p[0], p[1], est, se])
        _write_csv(path, ["t", "x", "value", "std_err"], rows)
    elif scheme == "ou_monte_carlo":
        t = np.unique(evaluation_grid(cfg, problem)[:, 0])
        paths = ou_simulate(problem.coeffs, int(sec.get("paths", 100_000)), t, seed)
        mean, var, mse, vse = paths.moments()
        _write_csv(path, ["t", "mean", "variance", "mean_se", "variance_se"], zip(t, mean, var, mse, vse))
    elif scheme == "fixed_point_grid":
        r = _mfg_grid(problem, sec)
        rows = ([t, q, r.h[i, j], r.m[i, j]] for i, t in enumerate(r.t) for j, q in enumerate(r.q))
        _write_csv(path, ["t", "q", "h", "m"], rows)
        _write_csv(os.path.join(out, "mean_path.csv"), ["t", "mean_inventory", "net_flow"], zip(r.t, r.mean, r.mu))
    else:  # closed_form
        pts = evaluation_grid(cfg, problem)
        ref = problem.report_reference(pts)
        _write_csv(path, _columns(problem) + list(ref), ([*p, *(ref[q][i] for q in ref)] for i, p in enumerate(pts)))
    return path
