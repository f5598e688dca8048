"""Command-line harness: configured experiments, CSV outputs, one manifest.

Config files are flat key = value text with dotted section prefixes and #
comments.  Unknown keys, missing required keys, and unparsable values are
rejected with key-level diagnostics and exit code 2.  Audit failures exit 1
and print a machine-readable failure list; clean runs exit 0.

Every experiment writes <name>.csv files (header row, 17 significant digits,
UNIX newlines) plus manifest.json recording the config echo, CLI overrides,
package version, wall clock, the seed-derivation rule, and a sha256 checksum
of each CSV.  Ensembles are generated by a worker pool over path indices and
collected in path-index order, so outputs are bit-identical at any worker
count for a fixed (config, seed).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (
    comparison_audit,
    estimate_moments,
    holder_exponents,
    lyapunov_fit,
    space_holder_exponent,
    sup_growth,
    tail_audit,
    time_holder_exponent,
    trichotomy_profile,
)
from .kernels import (
    KernelParams,
    kernel_closed_form,
    kernel_spectral,
    suggest_quadrature,
)
from .noise import GridSpec, NoiseSpec, derive_stream, lag_covariance, \
    sample_increment
from .solver import (
    Field,
    ModelParams,
    SigmaSpec,
    coupled_paths,
    localized_picard_pair,
    simulate_path,
)

SEED_RULE = ("stream for path p uses a Philox generator keyed by the pair "
             "(master_seed, p); derive_stream(master_seed, p)")


class ConfigError(Exception):
    """Invalid configuration; carries key-level diagnostics."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


# ------------------------------------------------------------ config schema

def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s)


def _str(s: str) -> str:
    return s


def _floats(s: str) -> tuple[float, ...]:
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _ints(s: str) -> tuple[int, ...]:
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


@dataclass(frozen=True)
class Key:
    parse: object
    required: bool = True
    default: object = None


MODEL = {
    "model.alpha": Key(_float),
    "model.nu": Key(_float),
    "model.beta": Key(_float),
    "model.dim": Key(_int, required=False, default=1),
}
GRID = {
    "grid.length": Key(_float),
    "grid.points": Key(_int),
}
SIGMA = {
    "sigma.family": Key(_str),
    "sigma.scale": Key(_float),
    "sigma.cap": Key(_float, required=False, default=1.0),
    "sigma.lower": Key(_float, required=False, default=None),
}
INIT = {"init.value": Key(_float)}
RUN = {
    "run.horizon": Key(_float),
    "run.dt": Key(_float),
    "run.paths": Key(_int),
    "run.seed": Key(_int),
    "run.snapshots": Key(_floats, required=False, default=None),
}

SCHEMAS = {
    "kernel-test": {
        "model.alpha": Key(_float),
        "model.nu": Key(_float),
        "model.dim": Key(_int, required=False, default=1),
        "kernel.times": Key(_floats),
        "kernel.xmax": Key(_float),
        "kernel.points": Key(_int, required=False, default=21),
        "kernel.tolerance": Key(_float, required=False, default=1e-6),
    },
    "noise-test": {
        "model.beta": Key(_float),
        "model.dim": Key(_int, required=False, default=1),
        **GRID,
        "noise.samples": Key(_int),
        "noise.dt": Key(_float),
        "noise.lags": Key(_ints),
        "noise.max_z": Key(_float, required=False, default=5.0),
        "run.seed": Key(_int),
    },
    "simulate": {
        **MODEL, **GRID, **SIGMA, **INIT, **RUN,
        "sim.sites": Key(_ints, required=False, default=None),
    },
    "moments": {
        **MODEL, **GRID, **SIGMA, **INIT, **RUN,
        "moments.orders": Key(_ints, required=False, default=(2, 3)),
        "moments.sites": Key(_ints, required=False, default=None),
    },
    "tails": {
        **MODEL, **GRID, **SIGMA, **INIT, **RUN,
        "tails.time": Key(_float, required=False, default=None),
        "tails.levels": Key(_floats),
    },
    "compare": {
        **MODEL, **GRID, **SIGMA, **INIT, **RUN,
        "sigma_v.family": Key(_str),
        "sigma_v.scale": Key(_float),
        "sigma_v.cap": Key(_float, required=False, default=1.0),
        "sigma_v.lower": Key(_float, required=False, default=None),
        "init_v.value": Key(_float),
        "compare.mode": Key(_str, required=False, default="weak"),
        "compare.tolerance": Key(_float, required=False, default=1e-9),
    },
    "sup-growth": {
        **MODEL, **GRID, **SIGMA, **INIT, **RUN,
        "growth.radii": Key(_floats),
        "growth.time": Key(_float, required=False, default=None),
        "growth.min_r2": Key(_float, required=False, default=0.9),
    },
    "holder": {
        **MODEL, **GRID, **SIGMA, **INIT, **RUN,
        "holder.space_lags": Key(_ints, required=False, default=(1, 2, 4, 8)),
        "holder.tolerance": Key(_float, required=False, default=0.15),
    },
    "trichotomy": {
        "model.beta": Key(_float),
        "model.dim": Key(_int, required=False, default=1),
        **GRID,
        "tri.rate": Key(_float),
    },
    "picard-approx": {
        **MODEL, **GRID, **SIGMA, **INIT,
        "run.horizon": Key(_float),
        "run.dt": Key(_float),
        "run.paths": Key(_int),
        "run.seed": Key(_int),
        "picard.levels": Key(_ints),
        "picard.rounds": Key(_int),
    },
}


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    errors = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {ln}: expected 'key = value', got {line!r}")
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key:
            errors.append(f"line {ln}: empty key")
        elif key in out:
            errors.append(f"line {ln}: duplicate key {key!r}")
        else:
            out[key] = val
    if errors:
        raise ConfigError(errors)
    return out


def apply_schema(raw: dict[str, str], schema: dict[str, Key]) -> dict:
    errors = []
    for key in raw:
        if key not in schema:
            errors.append(f"unknown key {key!r}")
    cfg = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                cfg[key] = spec.parse(raw[key])
            except (ValueError, TypeError) as e:
                errors.append(f"key {key!r}: cannot parse {raw[key]!r} ({e})")
        elif spec.required:
            errors.append(f"missing required key {key!r}")
        else:
            cfg[key] = spec.default
    if errors:
        raise ConfigError(errors)
    return cfg


# --------------------------------------------------------------- builders

def _build_grid(cfg) -> GridSpec:
    return GridSpec(dim=cfg["model.dim"], length=cfg["grid.length"],
                    points=cfg["grid.points"])


def _build_sigma(cfg, prefix="sigma") -> SigmaSpec:
    return SigmaSpec(cfg[f"{prefix}.family"], cfg[f"{prefix}.scale"],
                     cap=cfg[f"{prefix}.cap"], lower=cfg[f"{prefix}.lower"])


def _build_params(cfg, prefix="sigma") -> ModelParams:
    grid = _build_grid(cfg)
    kernel = KernelParams(cfg["model.alpha"], cfg["model.nu"],
                          cfg["model.dim"])
    noise = NoiseSpec(beta=cfg["model.beta"], grid=grid)
    return ModelParams(kernel, noise, _build_sigma(cfg, prefix))


def _snapshots(cfg) -> tuple[float, ...]:
    snaps = cfg["run.snapshots"]
    return snaps if snaps is not None else (cfg["run.horizon"],)


def _default_sites(grid: GridSpec) -> tuple[int, ...]:
    stride = max(1, grid.points // 16)
    return tuple(range(0, grid.points, stride))


def _ensemble(params, u0, cfg, threads):
    horizon, dt = cfg["run.horizon"], cfg["run.dt"]
    seed, paths = cfg["run.seed"], cfg["run.paths"]
    snaps = _snapshots(cfg)

    def one(p):
        return simulate_path(params, u0, horizon, dt, derive_stream(seed, p),
                             snaps)

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(one, range(paths)))


# ---------------------------------------------------------------- runners

def _run_kernel_test(cfg, threads):
    alpha = cfg["model.alpha"]
    if alpha not in (1.0, 2.0):
        raise ConfigError([
            "key 'model.alpha': closed-form reference exists only for "
            f"alpha in {{1, 2}}, got {alpha}"])
    params = KernelParams(alpha, cfg["model.nu"], cfg["model.dim"])
    xs = np.linspace(0.0, cfg["kernel.xmax"], cfg["kernel.points"])
    tol = cfg["kernel.tolerance"]
    rows = [("t", "x", "spectral", "closed_form", "rel_err")]
    failures = []
    worst = 0.0
    for t in cfg["kernel.times"]:
        spec_vals = kernel_spectral(t, xs, params, suggest_quadrature(t, params))
        closed = kernel_closed_form(t, xs, params)
        for x, s, c in zip(xs, spec_vals, closed):
            rel = abs(s - c) / abs(c) if c != 0 else math.inf
            worst = max(worst, rel)
            rows.append((t, float(x), float(s), float(c), rel))
            # machine-noise floor: tiny densities cancel below ~1e-12 abs
            if abs(s - c) > tol * abs(c) + 1e-12:
                failures.append(
                    f"kernel mismatch at t={t} x={float(x):.6g}: rel {rel:.3g}")
    details = {"worst_rel_err": worst, "tolerance": tol}
    return not failures, failures, details, {"kernel": rows}


def _run_noise_test(cfg, threads):
    grid = _build_grid(cfg)
    ns = NoiseSpec(beta=cfg["model.beta"], grid=grid)
    dt, samples = cfg["noise.dt"], cfg["noise.samples"]
    lags = cfg["noise.lags"]
    if any(l < 0 or l >= grid.points for l in lags):
        raise ConfigError([
            f"key 'noise.lags': lags must lie in [0, {grid.points})"])
    exact = dt * lag_covariance(ns)
    stream = derive_stream(cfg["run.seed"], 0)
    prods = np.empty((samples, len(lags)))
    for s in range(samples):
        x = sample_increment(ns, dt, stream.generator)
        for j, lag in enumerate(lags):
            prods[s, j] = np.mean(x * np.roll(x, -lag, axis=0))
    rows = [("lag", "empirical", "exact", "z")]
    failures = []
    for j, lag in enumerate(lags):
        emp = float(prods[:, j].mean())
        se = float(prods[:, j].std() / math.sqrt(samples))
        ref = float(exact[(lag,) + (0,) * (grid.dim - 1)])
        z = (emp - ref) / se if se > 0 else 0.0
        rows.append((lag, emp, ref, z))
        if abs(z) > cfg["noise.max_z"]:
            failures.append(f"lag {lag}: |z| = {abs(z):.2f} exceeds "
                            f"{cfg['noise.max_z']}")
    return not failures, failures, {"samples": samples}, {"covariance": rows}


CENSOR_LIMIT = 0.01


def _run_simulate(cfg, threads):
    params = _build_params(cfg)
    u0 = Field.constant(params.grid, cfg["init.value"])
    ens = _ensemble(params, u0, cfg, threads)
    sites = cfg["sim.sites"] or _default_sites(params.grid)
    rows = [("path", "time", "site", "value")]
    censored = 0
    for p, tr in enumerate(ens):
        if tr.censored:
            censored += 1
            continue
        for fld in tr.fields:
            for s in sites:
                rows.append((p, fld.time_stamp, s, float(fld.values[s])))
    frac = censored / len(ens)
    failures = ([] if frac <= CENSOR_LIMIT else
                [f"censored fraction {frac:.3g} exceeds {CENSOR_LIMIT}"])
    details = {"paths": len(ens), "censored": censored}
    return not failures, failures, details, {"fields": rows}


def _run_moments(cfg, threads):
    params = _build_params(cfg)
    u0 = Field.constant(params.grid, cfg["init.value"])
    ens = _ensemble(params, u0, cfg, threads)
    orders = cfg["moments.orders"]
    sites = cfg["moments.sites"] or _default_sites(params.grid)
    failures = []
    details = {}
    moment_rows = [("k", "t", "pooled_estimate", "pooled_se")]
    growth_rows = [("kind", "key", "value", "se")]
    try:
        table = estimate_moments(ens, orders, _snapshots(cfg), sites)
        for k in orders:
            for t in table.times:
                est, se = table.pooled(k, t)
                moment_rows.append((k, t, est, se))
        fit = lyapunov_fit(table, ks=orders)
        for k in orders:
            growth_rows.append(("gamma", str(k), fit.gamma[k],
                                fit.gamma_se[k]))
        for (ka, kb), (d, d_se) in fit.normalized_gaps.items():
            growth_rows.append(("gap", f"{ka}->{kb}", d, d_se))
            if d < -2.0 * d_se:
                failures.append(
                    f"normalized moment rates decrease from k={ka} to "
                    f"k={kb}: gap {d:.4g} below -2 se")
        growth_rows.append(("theta", "", fit.theta, fit.theta_se))
        k0 = orders[0]
        if fit.gamma[k0] <= 3.0 * fit.gamma_se[k0]:
            failures.append(
                f"gamma({k0}) = {fit.gamma[k0]:.4g} not positive at 3 se")
        details = {"pre_asymptotic": fit.pre_asymptotic,
                   "theta": fit.theta, "theta_se": fit.theta_se,
                   "censored": table.censored_count}
    except ValueError as e:
        failures.append(f"estimation failed: {e}")
    return (not failures, failures, details,
            {"moments": moment_rows, "growth": growth_rows})


def _run_tails(cfg, threads):
    params = _build_params(cfg)
    u0 = Field.constant(params.grid, cfg["init.value"])
    ens = _ensemble(params, u0, cfg, threads)
    t = cfg["tails.time"] if cfg["tails.time"] is not None \
        else cfg["run.horizon"]
    failures = []
    rows = [("level", "empirical", "ci_low", "ci_high", "bound", "resolved")]
    lower_rows = [("k", "level", "probability_bound", "empirical")]
    details = {}
    try:
        rep = tail_audit(ens, t, cfg["tails.levels"], cfg["init.value"])
        for i, lv in enumerate(rep.levels):
            rows.append((lv, rep.exceedance[i], rep.ci_low[i], rep.ci_high[i],
                         rep.bounds[i], rep.resolved[i]))
        for k, lam, p, emp in rep.lower_points:
            lower_rows.append((k, lam, p, emp))
        for i in rep.violations:
            failures.append(
                f"level {rep.levels[i]:.6g}: empirical lower CI "
                f"{rep.ci_low[i]:.4g} exceeds bound {rep.bounds[i]:.4g}")
        if not rep.censoring_ok:
            failures.append(
                f"censored fraction {rep.censored_fraction:.3g} exceeds "
                f"{CENSOR_LIMIT}")
        details = {"fitted_A": rep.fitted_A, "paths": rep.path_count}
    except ValueError as e:
        failures.append(f"estimation failed: {e}")
    return (not failures, failures, details,
            {"tails": rows, "tails_lower": lower_rows})


def _run_compare(cfg, threads):
    params_u = _build_params(cfg, "sigma")
    params_v = _build_params(cfg, "sigma_v")
    u0 = Field.constant(params_u.grid, cfg["init.value"])
    v0 = Field.constant(params_u.grid, cfg["init_v.value"])
    horizon, dt = cfg["run.horizon"], cfg["run.dt"]
    seed = cfg["run.seed"]
    snaps = _snapshots(cfg)

    def one(p):
        return coupled_paths(params_u, params_v, u0, v0, horizon, dt,
                             derive_stream(seed, p), snapshot_times=snaps)

    with ThreadPoolExecutor(max_workers=threads) as ex:
        pairs = list(ex.map(one, range(cfg["run.paths"])))

    failures = []
    rows = [("path", "max_excess", "final_min_gap")]
    check_rows = [("k", "time", "moment_gap", "se", "ok")]
    details = {}
    try:
        rep = comparison_audit(pairs, tol=cfg["compare.tolerance"],
                               mode=cfg["compare.mode"])
        for p, (tu, tv) in enumerate(pairs):
            if tu.censored or tv.censored:
                continue
            excess = max(float((fu.values - fv.values).max())
                         for fu, fv in zip(tu.fields, tv.fields))
            gap = float((tv.fields[-1].values - tu.fields[-1].values).min())
            rows.append((p, excess, gap))
        for k, t, diff, se, ok in rep.moment_checks:
            check_rows.append((k, t, diff, se, ok))
        if not rep.passed:
            if rep.violation_count:
                failures.append(
                    f"{rep.violation_count} paths exceed the ordering "
                    f"tolerance (max excess {rep.max_excess:.4g})")
            if (rep.mode == "strong"
                    and rep.strict_positive_paths < rep.path_count):
                failures.append(
                    f"strict gap positive in only "
                    f"{rep.strict_positive_paths}/{rep.path_count} paths")
            if rep.mode == "moment":
                for k, t, diff, se, ok in rep.moment_checks:
                    if not ok:
                        failures.append(
                            f"moment order {k} at t={t:.6g}: dominating "
                            f"side lower by {-diff:.4g} "
                            f"(> 2 se = {2 * se:.4g})")
            if not rep.censoring_ok:
                failures.append(
                    f"censored fraction {rep.censored_fraction:.3g} "
                    f"exceeds {CENSOR_LIMIT}")
        details = {"mode": rep.mode, "max_excess": rep.max_excess,
                   "min_strict_gap": rep.min_strict_gap}
    except ValueError as e:
        failures.append(f"audit failed: {e}")
    return (not failures, failures, details,
            {"compare": rows, "moment_checks": check_rows})


def _run_sup_growth(cfg, threads):
    params = _build_params(cfg)
    u0 = Field.constant(params.grid, cfg["init.value"])
    ens = _ensemble(params, u0, cfg, threads)
    t = cfg["growth.time"] if cfg["growth.time"] is not None \
        else cfg["run.horizon"]
    failures = []
    rows = [("radius", "median_sup")]
    details = {}
    try:
        rep = sup_growth(ens, t, cfg["growth.radii"])
        for r, m in zip(rep.radii, rep.median_sups):
            rows.append((r, m))
        if rep.slope <= 0.0:
            failures.append(f"regression slope {rep.slope:.4g} not positive")
        if rep.r_squared < cfg["growth.min_r2"]:
            failures.append(
                f"R^2 {rep.r_squared:.4g} below {cfg['growth.min_r2']}")
        details = {"slope": rep.slope, "r_squared": rep.r_squared,
                   "exponent": rep.exponent}
    except ValueError as e:
        failures.append(f"estimation failed: {e}")
    return not failures, failures, details, {"sup_growth": rows}


def _run_holder(cfg, threads):
    params = _build_params(cfg)
    u0 = Field.constant(params.grid, cfg["init.value"])
    ens = _ensemble(params, u0, cfg, threads)
    alpha, beta = cfg["model.alpha"], cfg["model.beta"]
    tol = cfg["holder.tolerance"]
    failures = []
    rows = [("axis", "exponent", "se", "r_squared", "theory")]
    details = {}
    try:
        rep = holder_exponents(ens, space_lags=cfg["holder.space_lags"])
        th_s = space_holder_exponent(alpha, beta)
        th_t = time_holder_exponent(alpha, beta)
        rows.append(("space", rep.space_exponent, rep.space_se,
                     rep.space_r2, th_s))
        rows.append(("time", rep.time_exponent, rep.time_se,
                     rep.time_r2, th_t))
        if not rep.in_regime:
            failures.append("variogram regression out of regime "
                            "(saturated or poor fit)")
        if abs(rep.space_exponent - th_s) > tol:
            failures.append(
                f"space exponent {rep.space_exponent:.4g} deviates from "
                f"{th_s:.4g} by more than {tol}")
        if abs(rep.time_exponent - th_t) > tol:
            failures.append(
                f"time exponent {rep.time_exponent:.4g} deviates from "
                f"{th_t:.4g} by more than {tol}")
        details = {"space": rep.space_exponent, "time": rep.time_exponent}
    except ValueError as e:
        failures.append(f"estimation failed: {e}")
    return not failures, failures, details, {"holder": rows}


def _run_trichotomy(cfg, threads):
    grid = _build_grid(cfg)
    prof = trichotomy_profile(cfg["tri.rate"], grid, cfg["model.beta"])
    radii = grid.torus_radius().ravel()
    vals = prof.values.ravel()
    order = np.argsort(radii, kind="stable")
    rows = [("radius", "value")]
    for i in order:
        rows.append((float(radii[i]), float(vals[i])))
    failures = []
    run = np.maximum.accumulate(vals[order][::-1])[::-1]
    if np.any(vals[order] < run - 1e-12):
        failures.append("profile is not radially nonincreasing")
    return not failures, failures, {"sites": len(vals)}, {"profile": rows}


def _run_picard(cfg, threads):
    params = _build_params(cfg)
    u0 = Field.constant(params.grid, cfg["init.value"])
    horizon, dt = cfg["run.horizon"], cfg["run.dt"]
    paths, seed = cfg["run.paths"], cfg["run.seed"]
    levels, rounds = cfg["picard.levels"], cfg["picard.rounds"]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(
            ["key 'picard.levels': levels must be strictly increasing"])

    def one(task):
        li, p = divmod(task, paths)
        stream = derive_stream(seed, li * paths + p)
        pic, exact = localized_picard_pair(params, u0, levels[li], rounds,
                                           horizon, dt, stream)
        return li, float(np.mean(np.abs(pic.values - exact.values)))

    with ThreadPoolExecutor(max_workers=threads) as ex:
        results = list(ex.map(one, range(len(levels) * paths)))
    errors = {li: [] for li in range(len(levels))}
    for li, err in results:
        errors[li].append(err)
    means = [float(np.mean(errors[li])) for li in range(len(levels))]
    rows = [("level", "mean_abs_error")]
    for n, m in zip(levels, means):
        rows.append((n, m))
    failures = []
    if any(b >= a for a, b in zip(means, means[1:])):
        failures.append(
            "localization error is not strictly decreasing in the level: "
            + ", ".join(f"n={n}: {m:.6g}" for n, m in zip(levels, means)))
    return not failures, failures, {"levels": list(levels)}, {"picard": rows}


RUNNERS = {
    "kernel-test": _run_kernel_test,
    "noise-test": _run_noise_test,
    "simulate": _run_simulate,
    "moments": _run_moments,
    "tails": _run_tails,
    "compare": _run_compare,
    "sup-growth": _run_sup_growth,
    "holder": _run_holder,
    "trichotomy": _run_trichotomy,
    "picard-approx": _run_picard,
}


# ----------------------------------------------------------------- output

def _cell(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: Path, rows) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in rows:
            writer.writerow([_cell(c) for c in row])
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    return x


def run(subcommand: str, config_path: str, out_dir: str, paths: int = None,
        seed: int = None, threads: int = 1) -> int:
    """Execute one configured experiment.  Returns the process exit code."""
    started = time.monotonic()
    try:
        if subcommand not in SCHEMAS:
            raise ConfigError([f"unknown subcommand {subcommand!r}"])
        if threads < 1:
            raise ConfigError([f"--threads must be >= 1, got {threads}"])
        schema = SCHEMAS[subcommand]
        try:
            text = Path(config_path).read_text()
        except OSError as e:
            raise ConfigError([f"cannot read config {config_path!r}: {e}"])
        cfg = apply_schema(parse_config_text(text), schema)
        overrides = {}
        if paths is not None:
            if "run.paths" not in schema:
                raise ConfigError(
                    [f"--paths does not apply to {subcommand!r}"])
            cfg["run.paths"] = paths
            overrides["paths"] = paths
        if seed is not None:
            if "run.seed" not in schema:
                raise ConfigError(
                    [f"--seed does not apply to {subcommand!r}"])
            cfg["run.seed"] = seed
            overrides["seed"] = seed
        try:
            passed, failures, details, files = RUNNERS[subcommand](cfg,
                                                                   threads)
        except ValueError as e:
            # constructor-level rejection of config values
            raise ConfigError([str(e)])
    except ConfigError as e:
        print(json.dumps({"config_errors": e.messages}))
        return 2

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for name, rows in files.items():
        checksums[f"{name}.csv"] = _write_csv(out / f"{name}.csv", rows)
    manifest = {
        "subcommand": subcommand,
        "package_version": __version__,
        "config": _jsonable(cfg),
        "cli_overrides": overrides,
        "threads": threads,
        "seed_rule": SEED_RULE,
        "wall_clock_seconds": time.monotonic() - started,
        "outputs": checksums,
        "audit": {"passed": passed, "failures": failures,
                  "details": _jsonable(details)},
    }
    with open(out / "manifest.json", "w", newline="") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    print(json.dumps({"subcommand": subcommand, "passed": passed,
                      "failures": failures,
                      "outputs": sorted(checksums)}))
    return 0 if passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stableheat",
        description="Simulation and verification harness for a stochastic "
                    "heat equation with fractional dissipation and "
                    "spatially correlated forcing.")
    parser.add_argument("subcommand", choices=sorted(SCHEMAS))
    parser.add_argument("--config", required=True, help="key = value file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--paths", type=int, default=None,
                        help="override run.paths")
    parser.add_argument("--seed", type=int, default=None,
                        help="override run.seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for path generation")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, args.out, paths=args.paths,
               seed=args.seed, threads=args.threads)


if __name__ == "__main__":
    raise SystemExit(main())
