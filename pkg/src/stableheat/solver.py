"""Lattice integrator for the stochastic heat equation with stable diffusion.

Dynamics: du = -nu (-Laplacian)^(alpha/2) u dt + sigma(u) dW, with dW the
correlated forcing from the noise module (white in time, Riesz-correlated in
space), integrated in mild form by an exponential-Euler scheme:

    u_{i+1} = P_dt [ u_i + sigma(u_i) dW_i ]

where P_t acts spectrally through the multipliers exp(-t nu |xi|^alpha).
The linear flow is exact, so sigma = 0 reproduces the heat flow to rounding
and the ensemble mean of u_t equals P_t u_0 for every sigma with zero-mean
forcing.  Coupled path pairs share the per-step white modes, which preserves
the pathwise comparison structure of the continuum equation.

The localized iterates build the solution by Picard iteration with a
radially windowed kernel (support |z| <= (n s)^(1/alpha) at elapsed time s)
and the level-n tapered noise, so field values at well-separated sites
depend on disjoint blocks of randomness.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelParams
from .noise import (
    GridSpec,
    NoiseSpec,
    RngStream,
    half_filter,
    increment_from_white,
    periodized_riesz,
)

SIGMA_FAMILIES = ("linear", "clipped_linear", "bounded_smooth", "additive_probe")


class BlowUpError(RuntimeError):
    """A path left the finite range; carries the first bad time."""

    def __init__(self, time: float):
        super().__init__(f"non-finite field values at t={time:.6g}")
        self.time = time


@dataclass(frozen=True)
class SigmaSpec:
    """Multiplicative-noise coefficient sigma.

    Families (all Lipschitz, sigma(0)=0 except the additive probe):
      linear          sigma(x) = scale * x
      clipped_linear  sigma(x) = scale * sign(x) * min(|x|, cap)
      bounded_smooth  sigma(x) = scale * cap * tanh(x / cap)
      additive_probe  sigma(x) = scale      (test-only constant forcing)

    `lower` is an optional growth floor: sigma(x) >= lower * x for x >= 0.
    Only the linear family can satisfy it globally, so it is rejected
    elsewhere.  The floor applies on x >= 0 only; solutions stay
    nonnegative, so the negative axis never matters dynamically.
    """

    family: str
    scale: float = 1.0
    cap: float = 1.0
    lower: float | None = None

    def __post_init__(self):
        if self.family not in SIGMA_FAMILIES:
            raise ValueError(
                f"family must be one of {SIGMA_FAMILIES}, got {self.family!r}"
            )
        if not math.isfinite(self.scale):
            raise ValueError("scale must be finite")
        if self.cap <= 0.0:
            raise ValueError(f"cap must be positive, got {self.cap}")
        if self.lower is not None:
            if self.family != "linear":
                raise ValueError(
                    "a linear growth floor is only satisfiable by the "
                    "linear family"
                )
            if not (0.0 < self.lower <= abs(self.scale)):
                raise ValueError(
                    f"lower must lie in (0, |scale|], got {self.lower}"
                )

    @property
    def lipschitz(self) -> float:
        return 0.0 if self.family == "additive_probe" else abs(self.scale)

    @property
    def is_additive(self) -> bool:
        return self.family == "additive_probe"


def sigma_apply(spec: SigmaSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if spec.family == "linear":
        return spec.scale * x
    if spec.family == "clipped_linear":
        return spec.scale * np.clip(x, -spec.cap, spec.cap)
    if spec.family == "bounded_smooth":
        return spec.scale * spec.cap * np.tanh(x / spec.cap)
    return np.full_like(x, spec.scale, dtype=float)


@dataclass(frozen=True)
class ModelParams:
    kernel: KernelParams
    noise: NoiseSpec
    sigma: SigmaSpec

    def __post_init__(self):
        if self.noise.grid.dim != self.kernel.dim:
            raise ValueError(
                f"grid dim {self.noise.grid.dim} != kernel dim {self.kernel.dim}"
            )
        limit = min(self.kernel.alpha, float(self.kernel.dim))
        if not self.noise.beta < limit:
            raise ValueError(
                f"noise.beta must satisfy beta < min(alpha, dim) = {limit}, "
                f"got {self.noise.beta}"
            )

    @property
    def grid(self) -> GridSpec:
        return self.noise.grid


@dataclass(frozen=True)
class Field:
    """One lattice snapshot; values are immutable and must be finite."""

    grid: GridSpec
    values: np.ndarray
    time_stamp: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid {self.grid.shape}")
        if not np.isfinite(v).all():
            raise ValueError(
                f"non-finite field values at t={self.time_stamp:.6g}"
            )
        if self.time_stamp < 0.0:
            raise ValueError("time_stamp must be nonnegative")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: GridSpec, value: float, time_stamp: float = 0.0):
        return cls(grid, np.full(grid.shape, float(value)), time_stamp)


@dataclass(frozen=True)
class Trajectory:
    """Ordered snapshots of one path plus its seed provenance.

    A censored trajectory ends early: `blow_up_time` records the first
    non-finite step and `fields` holds the snapshots reached before it.
    """

    params: ModelParams
    dt: float
    fields: tuple[Field, ...]
    seed: tuple[int, int]
    blow_up_time: float | None = None

    def __post_init__(self):
        times = [f.time_stamp for f in self.fields]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        grids = {f.grid for f in self.fields}
        if len(grids) > 1:
            raise ValueError("snapshots must share one grid")

    @property
    def censored(self) -> bool:
        return self.blow_up_time is not None

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(f.time_stamp for f in self.fields)

    def at_time(self, t: float) -> Field:
        for f in self.fields:
            if math.isclose(f.time_stamp, t, rel_tol=1e-9, abs_tol=1e-12):
                return f
        raise KeyError(f"no snapshot at t={t}")


@functools.lru_cache(maxsize=128)
def _multipliers(alpha: float, nu: float, grid: GridSpec, t: float) -> np.ndarray:
    m = np.exp(-t * nu * grid.frequencies() ** alpha)
    m.flags.writeable = False
    return m


def _flow(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.fft.fftn(values) * mult).real


def _advance(values: np.ndarray, sigma: SigmaSpec, dw: np.ndarray,
             mult: np.ndarray) -> np.ndarray:
    # overflow here is a detected blow-up, not a numerical accident; the
    # caller checks finiteness, so silence the intermediate warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _flow(values + sigma_apply(sigma, values) * dw, mult)


def semigroup_apply(fld: Field, t: float, kernel: KernelParams) -> Field:
    """Exact linear flow over time t, applied spectrally."""
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if kernel.dim != fld.grid.dim:
        raise ValueError("kernel and field dimensions differ")
    mult = _multipliers(kernel.alpha, kernel.nu, fld.grid, t)
    return Field(fld.grid, _flow(fld.values, mult), fld.time_stamp + t)


def suggest_dt(params: ModelParams) -> float:
    """Step-size heuristic: resolves the stiffest mode and keeps the
    per-step multiplicative variance sigma'^2 dt f(dx) perturbative."""
    g = params.grid
    diffusive = g.spacing ** params.kernel.alpha / (4.0 * params.kernel.nu)
    lip = params.sigma.lipschitz
    if lip == 0.0:
        return diffusive
    f_dx = periodized_riesz(g, params.noise.beta)[(1,) + (0,) * (g.dim - 1)]
    return min(diffusive, 0.1 / (lip ** 2 * f_dx))


def _check_dt(dt: float, params: ModelParams):
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if params.sigma.lipschitz == 0.0:
        # the linear flow is exact at any step size; nothing to destabilize
        return
    safe = suggest_dt(params)
    if dt > 4.0 * safe:
        warnings.warn(
            f"dt={dt:.3g} exceeds the stability heuristic {safe:.3g}",
            RuntimeWarning,
            stacklevel=3,
        )


def step(fld: Field, dt: float, params: ModelParams, stream: RngStream) -> Field:
    """One exponential-Euler update driven by a fresh forcing increment."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    white = stream.white(fld.grid)
    dw = increment_from_white(params.noise, white, dt)
    mult = _multipliers(params.kernel.alpha, params.kernel.nu, fld.grid, dt)
    new = _advance(fld.values, params.sigma, dw, mult)
    t_new = fld.time_stamp + dt
    if not np.isfinite(new).all():
        raise BlowUpError(t_new)
    return Field(fld.grid, new, t_new)


def _snapshot_steps(snapshot_times, horizon: float, dt: float) -> dict[int, float]:
    """Map requested times to step indices; times must sit on the step lattice."""
    out: dict[int, float] = {}
    for s in snapshot_times:
        if s < 0.0 or s > horizon + 1e-9 * max(1.0, horizon):
            raise ValueError(f"snapshot time {s} outside [0, {horizon}]")
        idx = round(s / dt)
        if abs(idx * dt - s) > 1e-9 * max(1.0, abs(s)):
            raise ValueError(
                f"snapshot time {s} is not a multiple of dt={dt}"
            )
        out[idx] = s
    return out


def simulate_path(params: ModelParams, u0: Field, horizon: float, dt: float,
                  stream: RngStream, snapshot_times=None,
                  stability_check: bool = True) -> Trajectory:
    """Advance one path to the horizon, snapshotting at the requested times.

    Initial data must be nonnegative and bounded.  A non-finite step ends
    the path: the trajectory keeps the snapshots already taken and records
    the blow-up time.
    """
    if u0.values.min() < 0.0:
        raise ValueError("initial data must be nonnegative")
    if horizon < 0.0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    seed = (stream.master_seed, stream.stream_id)
    if horizon == 0.0:
        return Trajectory(params, dt, (u0,), seed)
    if stability_check:
        _check_dt(dt, params)
    elif dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    nsteps = round(horizon / dt)
    if abs(nsteps * dt - horizon) > 1e-9 * max(1.0, horizon) or nsteps == 0:
        raise ValueError(f"horizon {horizon} is not a multiple of dt={dt}")
    if snapshot_times is None:
        snapshot_times = (horizon,)
    marks = _snapshot_steps(snapshot_times, horizon, dt)

    mult = _multipliers(params.kernel.alpha, params.kernel.nu, params.grid, dt)
    sigma = params.sigma
    noise_spec = params.noise
    grid = params.grid
    out: list[Field] = []
    if 0 in marks:
        out.append(u0)
    values = u0.values
    blow_up = None
    for i in range(1, nsteps + 1):
        white = stream.white(grid)
        dw = increment_from_white(noise_spec, white, dt)
        values = _advance(values, sigma, dw, mult)
        if not np.isfinite(values).all():
            blow_up = i * dt
            break
        if i in marks:
            out.append(Field(grid, values, marks[i]))
    return Trajectory(params, dt, tuple(out), seed, blow_up_time=blow_up)


def coupled_paths(params_u: ModelParams, params_v: ModelParams, u0: Field,
                  v0: Field, horizon: float, dt: float, stream: RngStream,
                  snapshot_times=None) -> tuple[Trajectory, Trajectory]:
    """Two paths driven by the identical forcing realization per step.

    The configurations may differ only in sigma and initial data; kernel
    and noise must match so the shared increments mean the same thing on
    both sides.
    """
    if params_u.kernel != params_v.kernel or params_u.noise != params_v.noise:
        raise ValueError(
            "coupled paths must share kernel and noise; only sigma and "
            "initial data may differ"
        )
    if u0.grid != v0.grid or u0.grid != params_u.grid:
        raise ValueError("coupled paths must share one grid")
    if u0.values.min() < 0.0 or v0.values.min() < 0.0:
        raise ValueError("initial data must be nonnegative")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    _check_dt(dt, params_u)
    _check_dt(dt, params_v)

    nsteps = round(horizon / dt)
    if abs(nsteps * dt - horizon) > 1e-9 * max(1.0, horizon) or nsteps == 0:
        raise ValueError(f"horizon {horizon} is not a multiple of dt={dt}")
    if snapshot_times is None:
        snapshot_times = (horizon,)
    marks = _snapshot_steps(snapshot_times, horizon, dt)

    grid = params_u.grid
    mult = _multipliers(params_u.kernel.alpha, params_u.kernel.nu, grid, dt)
    seed = (stream.master_seed, stream.stream_id)
    out_u: list[Field] = []
    out_v: list[Field] = []
    if 0 in marks:
        out_u.append(u0)
        out_v.append(v0)
    vu, vv = u0.values, v0.values
    blow_u = blow_v = None
    for i in range(1, nsteps + 1):
        white = stream.white(grid)
        dw = increment_from_white(params_u.noise, white, dt)
        vu = _advance(vu, params_u.sigma, dw, mult)
        vv = _advance(vv, params_v.sigma, dw, mult)
        ok_u = np.isfinite(vu).all()
        ok_v = np.isfinite(vv).all()
        if not (ok_u and ok_v):
            # the shared driving noise is gone once either side degenerates
            t_bad = i * dt
            blow_u = None if ok_u else t_bad
            blow_v = None if ok_v else t_bad
            break
        if i in marks:
            out_u.append(Field(grid, vu, marks[i]))
            out_v.append(Field(grid, vv, marks[i]))
    return (
        Trajectory(params_u, dt, tuple(out_u), seed, blow_up_time=blow_u),
        Trajectory(params_v, dt, tuple(out_v), seed, blow_up_time=blow_v),
    )


@functools.lru_cache(maxsize=8)
def _windowed_kernel_hats(alpha: float, nu: float, grid: GridSpec, dt: float,
                          nsteps: int, n: int) -> np.ndarray:
    """Transforms of the radially windowed flow kernels, one per step lag.

    Entry m is the transform of p_{m dt}(z) * 1{|z| <= (n m dt)^(1/alpha)},
    normalized so spectral multiplication realizes lattice convolution
    against cell measure dx^d.
    """
    radius = grid.torus_radius()
    cell = grid.cell_volume
    out = np.empty((nsteps + 1,) + grid.shape, dtype=complex)
    out[0] = 0.0
    for m in range(1, nsteps + 1):
        s = m * dt
        mult = _multipliers(alpha, nu, grid, s)
        p_lat = np.fft.ifftn(mult).real / cell
        window = radius <= (n * s) ** (1.0 / alpha)
        out[m] = np.fft.fftn(p_lat * window) * cell
    out.flags.writeable = False
    return out


def _picard_iterates(params: ModelParams, u0: Field, n: int, j: int, t: float,
                     dt: float, whites: list[np.ndarray]) -> np.ndarray:
    grid = params.grid
    nsteps = len(whites)
    smoothed = NoiseSpec(params.noise.beta, grid, smoothing_n=n)
    dws = [increment_from_white(smoothed, w, dt) for w in whites]
    khat = _windowed_kernel_hats(
        params.kernel.alpha, params.kernel.nu, grid, dt, nsteps, n)

    base = np.empty((nsteps + 1,) + grid.shape)
    base[0] = u0.values
    for i in range(1, nsteps + 1):
        mult = _multipliers(params.kernel.alpha, params.kernel.nu, grid, i * dt)
        base[i] = _flow(u0.values, mult)

    current = np.broadcast_to(u0.values, (nsteps + 1,) + grid.shape).copy()
    sigma = params.sigma
    axes = tuple(range(1, 1 + grid.dim))
    for _ in range(j):
        ghat = np.fft.fftn(
            np.asarray([sigma_apply(sigma, current[l]) * dws[l]
                        for l in range(nsteps)]), axes=axes)
        nxt = base.copy()
        for i in range(1, nsteps + 1):
            acc = np.sum(khat[i - np.arange(i)] * ghat[:i], axis=0)
            nxt[i] += np.fft.ifftn(acc).real
        current = nxt
    return current[nsteps]


def _picard_setup(params: ModelParams, u0: Field, n: int, j: int, t: float,
                  dt: float):
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be an integer >= 1, got {n}")
    if j < 0 or int(j) != j:
        raise ValueError(f"j must be an integer >= 0, got {j}")
    if u0.grid != params.grid:
        raise ValueError("initial data grid differs from model grid")
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    nsteps = round(t / dt)
    if abs(nsteps * dt - t) > 1e-9 * max(1.0, t) or nsteps == 0:
        raise ValueError(f"t {t} is not a multiple of dt={dt}")
    radius = (n * t) ** (1.0 / params.kernel.alpha)
    if radius > params.grid.length / 2.0:
        warnings.warn(
            f"localization radius {radius:.3g} exceeds the torus half-width "
            f"{params.grid.length / 2.0:.3g}; truncation is vacuous",
            RuntimeWarning,
            stacklevel=3,
        )
    return nsteps


def localized_picard(params: ModelParams, u0: Field, n: int, j: int, t: float,
                     dt: float, stream: RngStream) -> Field:
    """j-fold localized Picard iterate at time t with localization level n.

    Iterate zero is the initial datum held constant in time; each round
    applies the mild-form map with the radially windowed kernels and the
    level-n tapered noise.  The j=0 call returns u0 unchanged (and draws
    nothing), so iterates at different j are comparable only when each is
    built from its own stream.
    """
    nsteps = _picard_setup(params, u0, n, j, t, dt)
    if j == 0:
        return u0
    whites = [stream.white(params.grid) for _ in range(nsteps)]
    return Field(params.grid,
                 _picard_iterates(params, u0, n, j, t, dt, whites), t)


def localized_picard_pair(params: ModelParams, u0: Field, n: int, j: int,
                          t: float, dt: float,
                          stream: RngStream) -> tuple[Field, Field]:
    """Localized iterate and the full exponential-Euler endpoint, coupled.

    Both fields consume the same white modes; the full path filters them
    through the exact covariance while the iterate uses the level-n taper,
    so their gap isolates the localization error path-by-path.
    """
    nsteps = _picard_setup(params, u0, n, j, t, dt)
    whites = [stream.white(params.grid) for _ in range(nsteps)]
    grid = params.grid
    mult = _multipliers(params.kernel.alpha, params.kernel.nu, grid, dt)
    values = u0.values
    for w in whites:
        dw = increment_from_white(params.noise, w, dt)
        values = _advance(values, params.sigma, dw, mult)
        if not np.isfinite(values).all():
            raise BlowUpError((whites.index(w) + 1) * dt)
    exact = Field(grid, values, t)
    if j == 0:
        return u0, exact
    picard = Field(grid, _picard_iterates(params, u0, n, j, t, dt, whites), t)
    return picard, exact
