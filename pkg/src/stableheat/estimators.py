"""Ensemble statistics: moments, tails, regularity, growth, and audits.

Everything here is a pure fold over a list of Trajectory objects.  Censored
paths (blow-ups) are counted and excluded, never silently dropped, and the
audits carry a censoring guard.  Fits report jackknife standard errors over
paths; analytic tail formulas are evaluated exactly and compared against
empirical exceedances with binomial confidence intervals.

Closed-form exponents used throughout, for diffusion order alpha and
correlation exponent beta:
  moment growth in k:      (2 alpha - beta) / (alpha - beta)
  spatial smoothness:      (alpha - beta) / 2
  temporal smoothness:     (alpha - beta) / (2 alpha)
  sup-over-ball normalizer: alpha / (2 alpha - beta)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .noise import GridSpec
from .solver import Field, Trajectory

JACKKNIFE_BLOCKS = 32
REL_SE_FIT_CUT = 0.30
CENSOR_AUDIT_LIMIT = 0.01
SATURATION_LIMIT = 0.95


def moment_growth_exponent(alpha: float, beta: float) -> float:
    return (2.0 * alpha - beta) / (alpha - beta)


def space_holder_exponent(alpha: float, beta: float) -> float:
    return (alpha - beta) / 2.0


def time_holder_exponent(alpha: float, beta: float) -> float:
    return (alpha - beta) / (2.0 * alpha)


def sup_growth_exponent(alpha: float, beta: float) -> float:
    return alpha / (2.0 * alpha - beta)


def chebyshev_tail_constant(A: float, alpha: float, beta: float) -> float:
    """Decay constant of the optimized-Chebyshev upper tail bound."""
    if A <= 0.0:
        raise ValueError(f"A must be positive, got {A}")
    if not 0.0 < beta < alpha:
        raise ValueError(f"need 0 < beta < alpha, got beta={beta} alpha={alpha}")
    frac = (alpha - beta) / (2.0 * alpha - beta)
    return alpha / (2.0 * alpha - beta) * (frac / A) ** ((alpha - beta) / alpha)


def upper_tail_bound(lam: float, t: float, A: float, u0_bar: float,
                     alpha: float, beta: float, nu: float) -> float:
    """P(u_t(x) > lam) upper bound for lam above the moment scale A*u0_bar."""
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if u0_bar <= 0.0:
        raise ValueError(f"u0_bar must be positive, got {u0_bar}")
    if nu <= 0.0:
        raise ValueError(f"nu must be positive, got {nu}")
    if lam <= A * u0_bar:
        raise ValueError(
            f"lam must exceed A*u0_bar = {A * u0_bar:.6g}, got {lam}"
        )
    c = chebyshev_tail_constant(A, alpha, beta)
    log_ratio = math.log(lam / (A * u0_bar))
    expo = (c * nu ** (beta / alpha) / t ** ((alpha - beta) / alpha)
            * abs(log_ratio) ** ((2.0 * alpha - beta) / alpha))
    return math.exp(-expo)


def lower_tail_bound(k: float, t: float, A: float, u0_lower: float,
                     alpha: float, beta: float, nu: float,
                     u0_upper: float | None = None) -> tuple[float, float]:
    """(level, probability): P(u_t(x) > level) >= probability.

    The level is pinned to k by the moment scale; the probability comes
    from a second-moment (Paley-Zygmund) argument and never exceeds 1/4.
    The default threshold k >= 2 is an exploratory floor: the analysis
    only promises the bound for all k large.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if t <= 0.0 or nu <= 0.0 or A <= 0.0 or u0_lower <= 0.0:
        raise ValueError("t, nu, A, u0_lower must all be positive")
    if u0_upper is None:
        u0_upper = u0_lower
    if u0_upper < u0_lower:
        raise ValueError("u0_upper must be >= u0_lower")
    q = moment_growth_exponent(alpha, beta)
    nu_pow = nu ** (-beta / (alpha - beta))
    lam = u0_lower / (2.0 * A) * math.exp(
        t * k ** (alpha / (alpha - beta)) * nu_pow / A)
    c = 2.0 ** q * (A * 2.0 ** q - 2.0 / A)
    ratio = u0_lower / u0_upper
    expo = -c * k ** q * nu_pow * t + k * math.log(ratio ** 4 / A ** 8)
    prob = min(0.25, 0.25 * math.exp(expo))
    return lam, prob


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Binomial proportion confidence interval, well behaved at 0 and n."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


# ------------------------------------------------------------------ shared

def _split_ensemble(ensemble) -> tuple[list[Trajectory], int]:
    if not ensemble:
        raise ValueError("empty ensemble")
    alive = [tr for tr in ensemble if not tr.censored]
    censored = len(ensemble) - len(alive)
    if not alive:
        raise ValueError("all paths censored")
    return alive, censored


def _jackknife_se(per_path: np.ndarray, stat) -> float:
    """Delete-block jackknife SE of stat(per_path) over the path axis."""
    n = per_path.shape[0]
    blocks = min(JACKKNIFE_BLOCKS, n)
    vals = []
    for b in range(blocks):
        mask = np.ones(n, dtype=bool)
        mask[b::blocks] = False
        vals.append(stat(per_path[mask]))
    return float(np.std(vals) * math.sqrt(blocks - 1))


def _site_values(fld: Field, sites) -> np.ndarray:
    out = np.empty(len(sites))
    for i, s in enumerate(sites):
        out[i] = fld.values[s] if np.isscalar(s) else fld.values[tuple(s)]
    return out


# ------------------------------------------------------------------ moments

@dataclass(frozen=True)
class MomentTable:
    """Empirical E|u_t(x)|^k over an ensemble, with per-entry SEs.

    `estimates[i, j, l]` is the k_values[i]-th absolute moment at time
    times[j], site sites[l].  `path_pooled[p, i, j]` is path p's site
    average of |u|^k, the series the growth fits consume.
    """

    k_values: tuple[int, ...]
    times: tuple[float, ...]
    sites: tuple
    estimates: np.ndarray
    standard_errors: np.ndarray
    path_count: int
    censored_count: int
    path_pooled: np.ndarray = field(repr=False)

    def pooled(self, k: int, t: float) -> tuple[float, float]:
        """Site-pooled estimate and SE at one (k, t)."""
        i = self.k_values.index(k)
        j = self.times.index(t)
        series = self.path_pooled[:, i, j]
        return float(series.mean()), float(series.std() / math.sqrt(len(series)))


def estimate_moments(ensemble, ks, ts, sites) -> MomentTable:
    """Empirical absolute moments at the requested orders, times, sites.

    Censored paths are excluded and counted.  Moment orders above 6 are
    refused: their Monte Carlo error under multiplicative forcing is
    hopeless at realistic path counts.
    """
    ks = tuple(int(k) for k in ks)
    ts = tuple(float(t) for t in ts)
    sites = tuple(sites)
    if not ks or any(k < 1 for k in ks):
        raise ValueError("moment orders must be integers >= 1")
    if max(ks) > 6:
        raise ValueError(f"moment order cap is 6, got {max(ks)}")
    alive, censored = _split_ensemble(ensemble)
    if len(alive) < 100:
        raise ValueError(
            f"need at least 100 uncensored paths, got {len(alive)}"
        )
    p_count = len(alive)
    values = np.empty((p_count, len(ts), len(sites)))
    for p, tr in enumerate(alive):
        for j, t in enumerate(ts):
            try:
                fld = tr.at_time(t)
            except KeyError:
                raise ValueError(
                    f"trajectory {p} has no snapshot at t={t}"
                ) from None
            values[p, j] = _site_values(fld, sites)
    abs_pow = np.abs(values)[:, None, :, :] ** np.asarray(ks)[None, :, None, None]
    estimates = abs_pow.mean(axis=0)
    ses = abs_pow.std(axis=0) / math.sqrt(p_count)
    pooled = abs_pow.mean(axis=3)
    return MomentTable(ks, ts, sites, estimates, ses, p_count, censored,
                       pooled)


@dataclass(frozen=True)
class LyapunovFit:
    """Per-order growth rates of log-moments and the order-scaling fit."""

    k_values: tuple[int, ...]
    gamma: dict
    gamma_se: dict
    normalized_gaps: dict
    theta: float
    theta_se: float
    pre_asymptotic: bool
    fit_times: dict

    def normalized(self, k: int) -> float:
        return self.gamma[k] / k


def _slope(ts: np.ndarray, ys: np.ndarray) -> float:
    A = np.vstack([ts, np.ones_like(ts)]).T
    return float(np.linalg.lstsq(A, ys, rcond=None)[0][0])


def lyapunov_fit(table: MomentTable, ks=(2, 3, 4)) -> LyapunovFit:
    """Exponential growth rates gamma(k) of the pooled moments in time.

    Only entries with relative SE below 30% enter a fit; at least four
    surviving time points are required per order.  Non-monotone pooled
    moments flag the window as pre-asymptotic rather than failing.
    """
    ks = tuple(int(k) for k in ks)
    if any(k not in table.k_values for k in ks):
        raise ValueError(f"table lacks some of the orders {ks}")
    gamma = {}
    gamma_se = {}
    fit_times = {}
    pre_asymptotic = False
    kept_series = {}
    for k in ks:
        i = table.k_values.index(k)
        pooled = table.path_pooled[:, i, :]
        m = pooled.mean(axis=0)
        rel = pooled.std(axis=0) / math.sqrt(table.path_count) / m
        keep = rel < REL_SE_FIT_CUT
        if keep.sum() < 4:
            raise ValueError(
                f"k={k}: only {int(keep.sum())} entries pass the "
                f"{REL_SE_FIT_CUT:.0%} relative-SE filter; need 4"
            )
        ts = np.asarray(table.times)[keep]
        series = pooled[:, keep]
        if np.any(np.diff(np.log(series.mean(axis=0))) <= 0.0):
            pre_asymptotic = True
        gamma[k] = _slope(ts, np.log(series.mean(axis=0)))
        gamma_se[k] = _jackknife_se(
            series, lambda sub, _ts=ts: _slope(_ts, np.log(sub.mean(axis=0))))
        fit_times[k] = tuple(float(t) for t in ts)
        kept_series[k] = (ts, series)

    normalized_gaps = {}
    for ka, kb in zip(ks, ks[1:]):
        ta, sa = kept_series[ka]
        tb, sb = kept_series[kb]
        joint = np.concatenate([sa, sb], axis=1)
        na = sa.shape[1]

        def gap_stat(sub, _ta=ta, _tb=tb, _na=na, _ka=ka, _kb=kb):
            ga = _slope(_ta, np.log(sub[:, :_na].mean(axis=0)))
            gb = _slope(_tb, np.log(sub[:, _na:].mean(axis=0)))
            return gb / _kb - ga / _ka

        d = gamma[kb] / kb - gamma[ka] / ka
        normalized_gaps[(ka, kb)] = (d, _jackknife_se(joint, gap_stat))

    if all(gamma[k] > 0.0 for k in ks):
        logk = np.log(np.asarray(ks, dtype=float))
        theta = _slope(logk, np.log([gamma[k] for k in ks]))

        def theta_stat(sub):
            gs = []
            for k in ks:
                ts_k, series_k = kept_series[k]
                i0 = table.k_values.index(k)
                keep_t = [table.times.index(t) for t in fit_times[k]]
                gs.append(_slope(ts_k, np.log(sub[:, i0, keep_t].mean(axis=0))))
            if any(g <= 0.0 for g in gs):
                return theta
            return _slope(logk, np.log(gs))

        theta_se = _jackknife_se(table.path_pooled, theta_stat)
    else:
        theta, theta_se = math.nan, math.nan
        pre_asymptotic = True
    return LyapunovFit(ks, gamma, gamma_se, normalized_gaps, theta, theta_se,
                       pre_asymptotic, fit_times)


# -------------------------------------------------------------------- tails

@dataclass(frozen=True)
class TailReport:
    levels: tuple[float, ...]
    exceedance: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    bounds: tuple[float, ...]
    resolved: tuple[bool, ...]
    fitted_A: float
    violations: tuple[int, ...]
    lower_points: tuple
    path_count: int
    censored_fraction: float
    censoring_ok: bool

    @property
    def passed(self) -> bool:
        return not self.violations and self.censoring_ok


def fit_moment_scale(table: MomentTable, u0_bar: float, alpha: float,
                     beta: float, nu: float) -> float:
    """Smallest A making A^k u0^k exp(A k^q nu^(-b/(a-b)) t) dominate the table.

    Per entry the defect is monotone in A, so each root is found by a
    bracketed solve and the fit is the worst case over entries.
    """
    if u0_bar <= 0.0:
        raise ValueError("u0_bar must be positive")
    q = moment_growth_exponent(alpha, beta)
    nu_pow = nu ** (-beta / (alpha - beta))
    best = 0.0
    for i, k in enumerate(table.k_values):
        for j, t in enumerate(table.times):
            m = float(table.path_pooled[:, i, j].mean())
            if m <= 0.0:
                continue

            def defect(a, _k=k, _t=t, _m=m):
                return (_k * math.log(a * u0_bar)
                        + a * _k ** q * nu_pow * _t - math.log(_m))

            lo, hi = 1e-8, 1e8
            if defect(lo) >= 0.0:
                continue
            root = optimize.brentq(defect, lo, hi, xtol=1e-12, rtol=1e-12)
            best = max(best, root)
    if best == 0.0:
        raise ValueError("moment table gives no positive scale fit")
    return best


def tail_audit(ensemble, t: float, levels, u0_bar: float,
               moment_ks=(1, 2, 3, 4), probe_site=0) -> TailReport:
    """Empirical exceedances at one site versus the fitted analytic bound.

    The scale A is fitted from the ensemble's own moment table, the bound
    is clamped to 1 below its validity threshold (never a violation), and
    a violation is an empirical lower confidence bound above the bound.
    """
    alive, censored = _split_ensemble(ensemble)
    n = len(alive)
    frac = censored / (censored + n)
    params = alive[0].params
    alpha, beta, nu = params.kernel.alpha, params.noise.beta, params.kernel.nu
    table = estimate_moments(alive, moment_ks, (t,), (probe_site,))
    fitted = fit_moment_scale(table, u0_bar, alpha, beta, nu)

    samples = np.array([tr.at_time(t).values[probe_site] for tr in alive])
    levels = tuple(float(lv) for lv in levels)
    emp, lo, hi, bounds, resolved, violations = [], [], [], [], [], []
    for idx, lv in enumerate(levels):
        count = int((samples > lv).sum())
        w_lo, w_hi = wilson_interval(count, n)
        if lv <= fitted * u0_bar:
            bound = 1.0
        else:
            bound = upper_tail_bound(lv, t, fitted, u0_bar, alpha, beta, nu)
        emp.append(count / n)
        lo.append(w_lo)
        hi.append(w_hi)
        bounds.append(bound)
        resolved.append(count > 0)
        if w_lo > bound:
            violations.append(idx)

    lower_points = []
    for k in (2, 3, 4):
        lam, p = lower_tail_bound(k, t, fitted, u0_bar, alpha, beta, nu)
        lower_points.append((k, lam, p, float((samples > lam).mean())))

    return TailReport(levels, tuple(emp), tuple(lo), tuple(hi), tuple(bounds),
                      tuple(resolved), fitted, tuple(violations),
                      tuple(lower_points), n, frac,
                      frac <= CENSOR_AUDIT_LIMIT)


# --------------------------------------------------------------- sup growth

@dataclass(frozen=True)
class SupGrowthReport:
    radii: tuple[float, ...]
    median_sups: tuple[float, ...]
    exponent: float
    slope: float
    intercept: float
    r_squared: float
    path_count: int
    censored_fraction: float


def sup_growth(ensemble, t: float, radii) -> SupGrowthReport:
    """Regression of median log sup over balls against (log R)^exponent.

    Balls live in the torus metric, so radii are capped at half the box;
    the growth statement is asymptotic in R and unreachable on a finite
    lattice, which is why only positivity/goodness of the regression is
    asserted by the audits, never an exponent match.
    """
    radii = tuple(float(r) for r in radii)
    if len(radii) < 4:
        raise ValueError("need at least 4 radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if radii[0] <= 1.0:
        raise ValueError(
            "radii must exceed 1: the growth normalizer (log R)^q "
            "needs log R > 0"
        )
    alive, censored = _split_ensemble(ensemble)
    grid = alive[0].fields[0].grid
    if radii[-1] > grid.length / 2.0:
        raise ValueError(
            f"largest radius {radii[-1]} exceeds torus half-width "
            f"{grid.length / 2.0}"
        )
    dist = grid.torus_radius()
    masks = [dist <= r for r in radii]
    sups = np.empty((len(alive), len(radii)))
    for p, tr in enumerate(alive):
        v = tr.at_time(t).values
        for j, mask in enumerate(masks):
            sups[p, j] = v[mask].max()
    medians = np.median(sups, axis=0)
    expo = sup_growth_exponent(alive[0].params.kernel.alpha,
                               alive[0].params.noise.beta)
    xs = np.log(np.asarray(radii)) ** expo
    ys = np.log(medians)
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return SupGrowthReport(radii, tuple(medians), expo, float(coef[0]),
                           float(coef[1]), r2, len(alive),
                           censored / len(ensemble))


# ------------------------------------------------------------------- Holder

@dataclass(frozen=True)
class HolderReport:
    space_exponent: float
    space_se: float
    space_r2: float
    space_lags: tuple[float, ...]
    time_exponent: float
    time_se: float
    time_r2: float
    time_lags: tuple[float, ...]
    in_regime: bool


def _variogram_fit(lags: np.ndarray, per_path: np.ndarray):
    """Log-log slope/2 of a variogram with jackknife SE and R^2."""
    ys = np.log(per_path.mean(axis=0))
    xs = np.log(lags)
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    pred = A @ coef
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ys - pred) ** 2)) / ss_tot if ss_tot > 0 else 0.0
    se = _jackknife_se(
        per_path, lambda sub: _slope(xs, np.log(sub.mean(axis=0))))
    return float(coef[0]) / 2.0, se / 2.0, r2


def holder_exponents(ensemble, space_lags=(2, 4, 8, 16),
                     anchor_time: float | None = None) -> HolderReport:
    """Smoothness exponents from spatial and temporal variograms.

    Spatial: site-shift squared differences at the anchor snapshot over
    dyadic lattice lags.  Temporal: squared differences between the anchor
    snapshot and the later snapshots.  Slopes of log E|du|^2 are twice the
    exponents.  A smooth field saturates the regression (exponent >= 1);
    that is reported as out-of-regime with the exponent capped at 1.
    """
    alive, _ = _split_ensemble(ensemble)
    times = alive[0].times
    if len(times) < 5:
        raise ValueError("need an anchor snapshot plus at least 4 later ones")
    anchor = times[0] if anchor_time is None else anchor_time
    later = [t for t in times if t > anchor + 1e-12]
    if len(later) < 4:
        raise ValueError("need at least 4 snapshots after the anchor")
    space_lags = tuple(int(l) for l in space_lags)
    if len(space_lags) < 4:
        raise ValueError("need at least 4 spatial lags")
    grid = alive[0].fields[0].grid
    if grid.dim != 1:
        raise ValueError("variogram probes are one-dimensional")

    sp = np.empty((len(alive), len(space_lags)))
    tp = np.empty((len(alive), len(later)))
    for p, tr in enumerate(alive):
        ref = tr.at_time(anchor).values
        for j, lag in enumerate(space_lags):
            sp[p, j] = np.mean((np.roll(ref, -lag) - ref) ** 2)
        for j, t in enumerate(later):
            tp[p, j] = np.mean((tr.at_time(t).values - ref) ** 2)

    sp_lag_phys = np.asarray(space_lags) * grid.spacing
    eta_s, se_s, r2_s = _variogram_fit(sp_lag_phys, sp)
    t_lags = np.asarray(later) - anchor
    eta_t, se_t, r2_t = _variogram_fit(t_lags, tp)

    # a genuinely smooth field (e.g. zero forcing) shows variogram slope
    # near 2, i.e. exponent near 1; call anything at 0.95+ saturated
    in_regime = (eta_s < SATURATION_LIMIT and eta_t < SATURATION_LIMIT
                 and r2_s > 0.9 and r2_t > 0.9)
    return HolderReport(min(eta_s, 1.0), se_s, r2_s,
                        tuple(float(x) for x in sp_lag_phys),
                        min(eta_t, 1.0), se_t, r2_t,
                        tuple(float(x) for x in t_lags), in_regime)


# --------------------------------------------------------------- comparison

@dataclass(frozen=True)
class ComparisonReport:
    mode: str
    path_count: int
    tolerance: float
    violation_count: int
    max_excess: float
    min_strict_gap: float
    strict_positive_paths: int
    moment_checks: tuple
    censored_fraction: float
    censoring_ok: bool

    @property
    def passed(self) -> bool:
        if not self.censoring_ok:
            return False
        if self.mode == "weak":
            return self.violation_count == 0
        if self.mode == "strong":
            return (self.violation_count == 0
                    and self.strict_positive_paths == self.path_count)
        return all(ok for *_, ok in self.moment_checks)


def comparison_audit(pairs, tol: float = 1e-9, mode: str = "weak",
                     ks=(2, 3, 4)) -> ComparisonReport:
    """Ordering audit over coupled trajectory pairs, ordered (lower, upper).

    weak: no site/time where the lower path exceeds the upper beyond tol.
    strong: additionally every path keeps a strictly positive gap at the
    final common snapshot.  moment: at every common snapshot the per-order
    ensemble moments of the dominating side stay within two standard
    errors (of the paired difference) of dominance.
    """
    if mode not in ("weak", "strong", "moment"):
        raise ValueError(f"unknown mode {mode!r}")
    if tol <= 0.0:
        raise ValueError("tolerance must be positive and documented")
    if not pairs:
        raise ValueError("empty ensemble")
    for tu, tv in pairs:
        if tu.seed != tv.seed:
            raise ValueError(
                "uncoupled inputs: trajectory pair with differing seeds"
            )
    usable = [(tu, tv) for tu, tv in pairs
              if not (tu.censored or tv.censored)]
    censored_fraction = 1.0 - len(usable) / len(pairs)
    if not usable:
        raise ValueError("all pairs censored")
    times = usable[0][0].times
    if any(tu.times != times or tv.times != times for tu, tv in usable):
        raise ValueError("pairs must share a common snapshot grid")

    violation_count = 0
    max_excess = -math.inf
    min_gap = math.inf
    strict_positive = 0
    diffs = {(k, j): [] for k in ks for j in range(len(times))}
    for tu, tv in usable:
        excess = -math.inf
        for j, (fu, fv) in enumerate(zip(tu.fields, tv.fields)):
            excess = max(excess, float((fu.values - fv.values).max()))
            for k in ks:
                diffs[(k, j)].append(float(np.mean(fv.values ** k)
                                           - np.mean(fu.values ** k)))
        if excess > tol:
            violation_count += 1
        max_excess = max(max_excess, excess)
        gap = float((tv.fields[-1].values - tu.fields[-1].values).min())
        min_gap = min(min_gap, gap)
        if gap > 0.0:
            strict_positive += 1

    moment_checks = []
    for k in ks:
        for j, t in enumerate(times):
            d = np.asarray(diffs[(k, j)])
            mean = float(d.mean())
            se = float(d.std() / math.sqrt(len(d)))
            moment_checks.append((k, t, mean, se, mean >= -2.0 * se))

    return ComparisonReport(mode, len(usable), tol, violation_count,
                            max_excess, min_gap, strict_positive,
                            tuple(moment_checks), censored_fraction,
                            censored_fraction <= CENSOR_AUDIT_LIMIT)


# --------------------------------------------------------------- positivity

@dataclass(frozen=True)
class PositivityReport:
    infima: tuple[float, ...]
    overall_min: float
    eps_grid: tuple[float, ...]
    dip_fractions: tuple[float, ...]


def positivity_audit(ensemble, sites, eps_grid) -> PositivityReport:
    """Per-path infimum over the probe sites and all snapshots, and the
    fraction of paths dipping below each threshold (monotone in eps)."""
    alive, _ = _split_ensemble(ensemble)
    eps_grid = tuple(sorted(float(e) for e in eps_grid))
    infima = []
    for tr in alive:
        vals = [float(_site_values(f, sites).min()) for f in tr.fields]
        infima.append(min(vals))
    arr = np.asarray(infima)
    fracs = tuple(float((arr < e).mean()) for e in eps_grid)
    return PositivityReport(tuple(infima), float(arr.min()), eps_grid, fracs)


# --------------------------------------------------------------- trichotomy

def trichotomy_profile(lam: float, grid: GridSpec, beta: float,
                       alpha: float = 2.0) -> Field:
    """Radial initial datum whose logarithmic decay rate is lam.

    lam = inf gives the indicator of the unit ball; lam = 0 a profile with
    slower-than-any-power-of-log decay; finite lam > 0 decays like
    exp(-lam (log|x|)^(2/(2-beta))).  Stated for the Gaussian case, so
    alpha must be 2.
    """
    if alpha != 2.0:
        raise ValueError("the decay trichotomy construction requires alpha=2")
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta out of range: {beta}")
    if lam < 0.0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    r = grid.torus_radius()
    if math.isinf(lam):
        vals = (r <= 1.0).astype(float)
    elif lam == 0.0:
        vals = np.minimum(1.0, 1.0 / (1.0 + np.log1p(r)))
    else:
        p = 2.0 / (2.0 - beta)
        vals = np.ones_like(r)
        outside = r > 1.0
        vals[outside] = np.exp(-lam * np.log(r[outside]) ** p)
    return Field(grid, vals, 0.0)
