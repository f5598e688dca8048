"""Stable heat kernels and spatial correlation integrals.

The linear part of the model is the fractional heat semigroup generated by
-nu*(-Laplacian)^(alpha/2).  Its transition density

    p_t(x) = (2*pi)^-d * int exp(-i x.z) exp(-t*nu*|z|^alpha) dz

has closed forms only at alpha=2 (Gaussian) and alpha=1 in one dimension
(Cauchy); everywhere else it is evaluated by trapezoid quadrature on a
symmetric frequency box.  The spatial forcing correlation is the Riesz kernel
f(x) = |x|^-beta, and this module also evaluates the overlap integrals of the
kernel against f that control second moments of the forced field:

    full:        int p_2t(w) f(w) dw
    truncated:   double integrals of p_t x p_t x f over products of a
                 centered ball and its complement, by Monte Carlo.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

# Hard floor on spectral content resolved by a frequency box: reject the rule
# when exp(-t*nu*cutoff^alpha) > exp(-TRUNCATION_MIN).
TRUNCATION_MIN = math.log(1e6)
# Heuristic aliasing guard: warn when the decay factor at the folding
# frequency pi/spacing still carries more than exp(-ALIAS_MIN) of mass.
ALIAS_MIN = math.log(1e6)
# Target decay used when suggesting a cutoff.
CUTOFF_TARGET = math.log(1e12)


@dataclass(frozen=True)
class KernelParams:
    """Stability index alpha in (0, 2], diffusivity nu > 0, dimension 1 or 2."""

    alpha: float
    nu: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.nu <= 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid rule on the frequency box [-cutoff, cutoff]^dim.

    mode_count is the number of intervals per axis (even, >= 16); the node
    set is the mode_count+1 symmetric points including the origin, where the
    integrand's |z|^alpha cusp sits on a node.
    """

    mode_count: int
    cutoff: float

    def __post_init__(self):
        if self.mode_count < 16 or self.mode_count % 2 != 0:
            raise ValueError(
                f"mode_count must be even and >= 16, got {self.mode_count}"
            )
        if self.cutoff <= 0.0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.cutoff / self.mode_count

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.cutoff, self.cutoff, self.mode_count + 1)

    def weights(self) -> np.ndarray:
        w = np.full(self.mode_count + 1, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


def suggest_quadrature(t: float, params: KernelParams,
                       mode_count: int | None = None) -> QuadratureSpec:
    """Pick a cutoff so the integrand has decayed below 1e-12 at the box edge."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    cutoff = (CUTOFF_TARGET / (t * params.nu)) ** (1.0 / params.alpha)
    if mode_count is None:
        mode_count = 2 ** 21 if params.dim == 1 else 2 ** 10
    return QuadratureSpec(mode_count=mode_count, cutoff=cutoff)


def _check_rule(t: float, params: KernelParams, quad: QuadratureSpec) -> None:
    if t <= 0.0:
        raise ValueError("t must be positive")
    decay_at_edge = t * params.nu * quad.cutoff ** params.alpha
    if decay_at_edge < TRUNCATION_MIN:
        raise ValueError(
            f"cutoff {quad.cutoff} too small to resolve t={t}: spectral mass "
            f"exp(-{decay_at_edge:.2f}) remains outside the box"
        )
    folding = t * params.nu * (math.pi / quad.spacing) ** params.alpha
    if folding < ALIAS_MIN:
        warnings.warn(
            f"quadrature spacing {quad.spacing:.3g} coarse for t={t}: "
            f"aliasing heuristic t*nu*(pi/spacing)^alpha = {folding:.2f}",
            RuntimeWarning,
            stacklevel=3,
        )


def kernel_spectral(t: float, x, params: KernelParams,
                    quad: QuadratureSpec) -> np.ndarray:
    """Evaluate p_t at one or more points by frequency-box quadrature.

    x is a point of shape (dim,) or a stack of points (m, dim); returns an
    array of shape (m,).  Scalars are accepted in dimension one.
    """
    _check_rule(t, params, quad)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != params.dim:
        if params.dim == 1:
            pts = pts.reshape(-1, 1)
        else:
            raise ValueError(f"points must have {params.dim} coordinates")
    z = quad.nodes()
    w = quad.weights()
    if params.dim == 1:
        decay = w * np.exp(-t * params.nu * np.abs(z) ** params.alpha)
        out = np.array([(decay * np.cos(xi[0] * z)).sum() for xi in pts])
        return out / (2.0 * math.pi)
    # dim == 2: tensor rule, integrand cos(x1 z1 + x2 z2) exp(-t nu |z|^alpha)
    zz1, zz2 = np.meshgrid(z, z, indexing="ij")
    decay = np.exp(-t * params.nu * np.hypot(zz1, zz2) ** params.alpha)
    decay *= np.outer(w, w)
    out = np.empty(len(pts))
    for i, xi in enumerate(pts):
        out[i] = (decay * np.cos(xi[0] * zz1 + xi[1] * zz2)).sum()
    return out / (2.0 * math.pi) ** 2


def kernel_closed_form(t: float, x, params: KernelParams) -> np.ndarray:
    """Gaussian (alpha=2, any dim) or Cauchy (alpha=1, dim=1) density."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != params.dim and params.dim == 1:
        pts = pts.reshape(-1, 1)
    r2 = (pts ** 2).sum(axis=-1)
    if params.alpha == 2.0:
        var = 4.0 * params.nu * t
        return np.exp(-r2 / var) / (math.pi * var) ** (params.dim / 2.0)
    if params.alpha == 1.0 and params.dim == 1:
        c = params.nu * t
        return (c / math.pi) / (c * c + r2)
    raise ValueError(
        f"no closed form for alpha={params.alpha}, dim={params.dim}"
    )


def kernel_sample(t: float, params: KernelParams, size: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw from p_t by the Chambers-Mallows-Stuck construction.

    Returns shape (size,) in dim 1 and (size, 2) in dim 2 (coordinates are
    independent only at alpha=2; dim 2 draws are restricted to that case).

    The symmetric stable variate with characteristic function exp(-|z|^alpha)
    is S = sin(alpha U)/cos(U)^(1/alpha) * (cos((1-alpha)U)/E)^((1-alpha)/alpha)
    with U uniform on (-pi/2, pi/2) and E standard exponential; p_t is the
    law of (nu t)^(1/alpha) * S.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if params.dim == 2 and params.alpha != 2.0:
        raise ValueError("dim-2 sampling implemented only at alpha=2")
    n = size * params.dim
    alpha = params.alpha
    U = rng.uniform(-math.pi / 2.0, math.pi / 2.0, n)
    E = rng.standard_exponential(n)
    if alpha == 1.0:
        s = np.tan(U)
    else:
        s = (np.sin(alpha * U) / np.cos(U) ** (1.0 / alpha)
             * (np.cos((1.0 - alpha) * U) / E) ** ((1.0 - alpha) / alpha))
    out = (params.nu * t) ** (1.0 / alpha) * s
    return out if params.dim == 1 else out.reshape(size, 2)


def riesz(x, beta: float) -> np.ndarray:
    """Riesz correlation kernel f(x) = |x|^-beta; x must avoid the origin."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    dim = pts.shape[-1]
    if not (0.0 < beta < dim):
        raise ValueError(f"beta must lie in (0, {dim}), got {beta}")
    r = np.sqrt((pts ** 2).sum(axis=-1))
    if np.any(r == 0.0):
        raise ValueError("riesz kernel is singular at the origin")
    return r ** (-beta)


def riesz_fourier_constant(dim: int, beta: float) -> float:
    """Constant C with  FT[|x|^-beta](z) = C * |z|^(beta-dim)."""
    if not (0.0 < beta < dim):
        raise ValueError(f"beta must lie in (0, {dim}), got {beta}")
    return (2.0 ** (dim - beta) * math.pi ** (dim / 2.0)
            * _gamma((dim - beta) / 2.0) / _gamma(beta / 2.0))


def correlation_integral_full(t: float, params: KernelParams, beta: float,
                              quad: QuadratureSpec) -> float:
    """int p_2t(w) f(w) dw by radial spectral quadrature.

    Rewriting the overlap through the Fourier side turns the double spatial
    dependence into a single integral against the Riesz spectral density:

        int p_2t f = (2 pi)^-d * C(d, beta) * int exp(-2 t nu |z|^alpha)
                                                  |z|^(beta-d) dz

    The |z|^(beta-d) singularity is integrable; the origin node gets the
    analytic integral of the singular factor over its own cell.
    """
    _check_rule(2.0 * t, params, quad)
    if not (0.0 < beta < params.dim):
        raise ValueError(f"beta must lie in (0, {params.dim}), got {beta}")
    C = riesz_fourier_constant(params.dim, beta)
    z = quad.nodes()
    w = quad.weights()
    h = quad.spacing
    d = params.dim
    if d == 1:
        dens = np.abs(z, dtype=float)
        dens[quad.mode_count // 2] = 1.0  # placeholder, origin patched below
        vals = w * np.exp(-2.0 * t * params.nu * dens ** params.alpha) \
            * dens ** (beta - 1.0)
        vals[quad.mode_count // 2] = 2.0 * (h / 2.0) ** beta / beta
        return C / (2.0 * math.pi) * float(vals.sum())
    zz1, zz2 = np.meshgrid(z, z, indexing="ij")
    r = np.hypot(zz1, zz2)
    mid = quad.mode_count // 2
    r[mid, mid] = 1.0
    vals = np.outer(w, w) * np.exp(-2.0 * t * params.nu * r ** params.alpha) \
        * r ** (beta - 2.0)
    # disc approximation of the origin cell: int_cell |z|^(beta-2) dz
    vals[mid, mid] = 2.0 * math.pi * (h / 2.0) ** beta / beta
    return C / (2.0 * math.pi) ** 2 * float(vals.sum())


def correlation_integral_full_exact(t: float, params: KernelParams,
                                    beta: float) -> float:
    """Closed form of the full overlap integral (radial Gamma reduction)."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    d, alpha = params.dim, params.alpha
    C = riesz_fourier_constant(d, beta)
    sphere = 2.0 * math.pi ** (d / 2.0) / _gamma(d / 2.0)
    s = 2.0 * t * params.nu
    return (C / (2.0 * math.pi) ** d * sphere
            * _gamma(beta / alpha) / (alpha * s ** (beta / alpha)))


@dataclass(frozen=True)
class TruncatedEstimate:
    """Monte Carlo estimate of one truncated overlap integral."""

    value: float
    std_error: float
    hits: int
    sample_count: int
    resolved: bool  # False when too few hits to trust the point


def correlation_integral_truncated(t: float, radius: float,
                                   params: KernelParams, beta: float,
                                   case: str, sample_count: int,
                                   rng: np.random.Generator,
                                   min_hits: int = 20) -> TruncatedEstimate:
    """Truncated double overlap integrals by importance sampling.

    case "outer_outer":  int_{|y|>R, |w|>R} p_t(y) p_t(w) f(y-w) dy dw
    case "outer_inner":  int_{|y|>R, |w|<=R} p_t(y) p_t(w) f(y-w) dy dw

    Both coordinates are drawn from p_t itself (the natural importance
    proposal), so the estimator is the sample mean of f(Y-W) restricted to
    the case's region.  Dimension one only.  The near-diagonal singularity
    of f makes the weight variance heavy-tailed for beta >= 1/2; the
    reported standard error is the empirical one.
    """
    if params.dim != 1:
        raise ValueError("truncated integrals are implemented in dim 1 only")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if case not in ("outer_outer", "outer_inner"):
        raise ValueError(f"unknown case {case!r}")
    y = kernel_sample(t, params, sample_count, rng)
    w = kernel_sample(t, params, sample_count, rng)
    gap = np.abs(y - w)
    gap[gap == 0.0] = np.finfo(float).tiny  # measure-zero tie guard
    weights = gap ** (-beta)
    if case == "outer_outer":
        mask = (np.abs(y) > radius) & (np.abs(w) > radius)
    else:
        mask = (np.abs(y) > radius) & (np.abs(w) <= radius)
    vals = weights * mask
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(sample_count))
    hits = int(mask.sum())
    return TruncatedEstimate(value=est, std_error=se, hits=hits,
                             sample_count=sample_count,
                             resolved=hits >= min_hits)
