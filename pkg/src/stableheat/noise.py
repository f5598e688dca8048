"""Spatially correlated Gaussian forcing on a periodic lattice.

The driving noise is white in time and has Riesz spatial correlation
E[F(t,x) F(s,y)] = min(t,s) * |x-y|^-beta.  On the torus the target lag
covariance is the minimum-image periodization of |r|^-beta with the origin
cell replaced by its cell average, and increments over a time step dt are
synthesized spectrally:

    dW = Re IFFT( hhat_k * xi_k ) * N^d * sqrt(2 dt / L^d)

with xi_k iid standard complex normals and hhat_k = sqrt(w_k), where w_k are
the lattice transform weights of the target covariance.  Every weight is
strictly positive for beta in (0, dim) (verified at validation time), so the
half filter hhat is real and the filtered field has exactly the target lag
covariance at every pair of sites.

The smoothing family replaces the physical half kernel h = IFFT(hhat) by
h * Q_n with the separable triangular taper Q_n, reproducing the mollified
noise used to localize the field: the smoothed covariance is the lattice
autoconvolution of the tapered half kernel and increases pointwise to the
exact covariance as n grows.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class GridSpec:
    """Periodic lattice: dim axes of length, points sites per axis."""

    dim: int
    length: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.length <= 0.0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.points < 32 or self.points % 2 != 0:
            raise ValueError(
                f"points must be even and >= 32, got {self.points}"
            )

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def site_count(self) -> int:
        return self.points ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    def signed_axis(self) -> np.ndarray:
        """Signed torus coordinate per axis, in (-L/2, L/2]."""
        x = self.axis_coordinates()
        return np.where(x <= self.length / 2.0, x, x - self.length)

    def torus_radius(self) -> np.ndarray:
        """Minimum-image distance of every site from the origin site."""
        s = np.abs(self.signed_axis())
        if self.dim == 1:
            return s
        return np.hypot(s[:, None], s[None, :])

    def frequencies(self) -> np.ndarray:
        """Angular frequency modulus |xi_k| on the mode lattice."""
        f = 2.0 * math.pi * np.fft.fftfreq(self.points, d=self.spacing)
        if self.dim == 1:
            return np.abs(f)
        return np.hypot(f[:, None], f[None, :])


@dataclass(frozen=True)
class NoiseSpec:
    beta: float
    grid: GridSpec
    smoothing_n: int | None = None

    def __post_init__(self):
        if not (0.0 < self.beta < self.grid.dim):
            raise ValueError(
                f"beta must lie in (0, {self.grid.dim}), got {self.beta}"
            )
        if self.smoothing_n is not None:
            if int(self.smoothing_n) != self.smoothing_n or self.smoothing_n < 1:
                raise ValueError(
                    f"smoothing_n must be an integer >= 1, got {self.smoothing_n}"
                )

    @property
    def exact(self) -> "NoiseSpec":
        return self if self.smoothing_n is None else \
            NoiseSpec(self.beta, self.grid, None)


@functools.lru_cache(maxsize=64)
def _origin_cell_average(dim: int, beta: float, dx: float) -> float:
    # cell average of |x|^-beta over the origin cell
    if dim == 1:
        return (dx / 2.0) ** (-beta) / (1.0 - beta) if beta != 1.0 else 0.0
    quarter, _ = integrate.dblquad(
        lambda y, x: (x * x + y * y) ** (-beta / 2.0),
        0.0, dx / 2.0, 0.0, dx / 2.0)
    return 4.0 * quarter / dx ** 2


def periodized_riesz(grid: GridSpec, beta: float) -> np.ndarray:
    """Target lag covariance: minimum-image |r|^-beta, cell-averaged origin."""
    if not (0.0 < beta < grid.dim):
        raise ValueError(f"beta must lie in (0, {grid.dim}), got {beta}")
    r = grid.torus_radius()
    f = np.zeros_like(r)
    np.power(r, -beta, where=r > 0.0, out=f)
    origin = (0,) * grid.dim
    f[origin] = _origin_cell_average(grid.dim, beta, grid.spacing)
    return f


@functools.lru_cache(maxsize=32)
def _weights_cached(beta: float, grid: GridSpec) -> np.ndarray:
    f = periodized_riesz(grid, beta)
    w = grid.cell_volume * np.fft.fftn(f).real
    wmin = float(w.min())
    if wmin <= 0.0:
        # never observed for beta in (0, dim); refuse to synthesize from a
        # non-positive mode rather than clip silently
        raise ValueError(
            f"covariance transform has a non-positive mode ({wmin:.3e})"
        )
    w.flags.writeable = False
    return w


def riesz_spectral_weights(spec: NoiseSpec) -> np.ndarray:
    """Per-mode variance weights of the exact (unsmoothed) noise.

    The lag covariance they encode is C(r) = (1/L^d) sum_k w_k e^(i k.r),
    which reproduces periodized_riesz exactly on the lattice.
    """
    return _weights_cached(spec.beta, spec.grid)


@functools.lru_cache(maxsize=32)
def _half_kernel_cached(beta: float, grid: GridSpec) -> np.ndarray:
    w = _weights_cached(beta, grid)
    h = np.fft.ifftn(np.sqrt(w)).real / grid.cell_volume
    h.flags.writeable = False
    return h


def taper(x, n: float) -> np.ndarray:
    """Separable triangular window prod_j (1 - |x_j|/n)+ .

    x has shape (..., dim) or is scalar/1d in dimension one.
    """
    if n < 1:
        raise ValueError(f"taper level must be >= 1, got {n}")
    pts = np.asarray(x, dtype=float)
    if pts.ndim <= 1:
        return np.clip(1.0 - np.abs(pts) / n, 0.0, None)
    return np.prod(np.clip(1.0 - np.abs(pts) / n, 0.0, None), axis=-1)


def _taper_lattice(grid: GridSpec, n: int) -> np.ndarray:
    s = grid.signed_axis()
    t = np.clip(1.0 - np.abs(s) / n, 0.0, None)
    if grid.dim == 1:
        return t
    return t[:, None] * t[None, :]


def half_filter(spec: NoiseSpec) -> np.ndarray:
    """Real spectral filter hhat with hhat^2 = mode weights.

    For the exact noise this is sqrt(riesz_spectral_weights); with
    smoothing_n set it is the transform of the tapered half kernel, so the
    exact and smoothed noises couple through shared white modes.
    """
    if spec.smoothing_n is None:
        return np.sqrt(_weights_cached(spec.beta, spec.grid))
    h = _half_kernel_cached(spec.beta, spec.grid)
    hn = h * _taper_lattice(spec.grid, spec.smoothing_n)
    return spec.grid.cell_volume * np.fft.fftn(hn).real


def smoothed_weights(spec: NoiseSpec) -> np.ndarray:
    """Mode weights of the tapered noise: squared magnitude of its filter."""
    if spec.smoothing_n is None:
        raise ValueError("spec has no smoothing level set")
    return half_filter(spec) ** 2


def lag_covariance(spec: NoiseSpec) -> np.ndarray:
    """Lag covariance encoded by the mode weights (exact or smoothed)."""
    w = half_filter(spec) ** 2
    n = spec.grid.site_count
    return np.fft.ifftn(w * n / spec.grid.length ** spec.grid.dim).real


def white_modes(grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    """Standard complex normal modes; consumes exactly 2*N^d normals."""
    g = rng.standard_normal((2,) + grid.shape)
    return (g[0] + 1j * g[1]) / math.sqrt(2.0)


def increment_from_white(spec: NoiseSpec, white: np.ndarray,
                         dt: float) -> np.ndarray:
    """Filter white modes into a forcing increment over one step of size dt."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = spec.grid
    scale = g.site_count * math.sqrt(2.0 * dt / g.length ** g.dim)
    return np.fft.ifftn(half_filter(spec) * white).real * scale


def sample_increment(spec: NoiseSpec, dt: float,
                     rng: np.random.Generator) -> np.ndarray:
    """One forcing increment with covariance dt * lag_covariance(spec)."""
    return increment_from_white(spec, white_modes(spec.grid, rng), dt)


def smoothing_residual_time_integral(spec: NoiseSpec, kernel_alpha: float,
                                     kernel_nu: float, t: float) -> float:
    """int_0^t (p_2s * f_n)(0) ds for the replacement residual f_n.

    f_n is the covariance of the difference between exact and smoothed
    noise, (h - h_n) autoconvolved; per mode the s-integral of the heat
    factor has the closed antiderivative (1 - e^(-2 t nu m)) / (2 nu m).
    """
    if spec.smoothing_n is None:
        raise ValueError("spec has no smoothing level set")
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    g = spec.grid
    resid = (half_filter(spec.exact) - half_filter(spec)) ** 2
    m = g.frequencies() ** kernel_alpha
    with np.errstate(invalid="ignore"):
        integ = np.where(
            m > 0.0,
            (1.0 - np.exp(-2.0 * t * kernel_nu * m)) / (2.0 * kernel_nu * m),
            t,
        )
    return float((resid * integ).sum() / g.length ** g.dim)


@dataclass
class RngStream:
    """Counter-based random stream: key = (master_seed, stream_id).

    Two streams with different ids are statistically independent; the same
    pair always reproduces the same draw sequence.  `draws` counts consumed
    variates for the reproducibility manifest.
    """

    master_seed: int
    stream_id: int
    generator: np.random.Generator = field(init=False, repr=False)
    draws: int = field(init=False, default=0)

    def __post_init__(self):
        if not (0 <= self.master_seed < 2 ** 64):
            raise ValueError("master_seed must fit in 64 bits")
        if not (0 <= self.stream_id < 2 ** 64):
            raise ValueError("stream_id must fit in 64 bits")
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def normals(self, shape) -> np.ndarray:
        out = self.generator.standard_normal(shape)
        self.draws += out.size
        return out

    def white(self, grid: GridSpec) -> np.ndarray:
        out = white_modes(grid, self.generator)
        self.draws += 2 * grid.site_count
        return out


def derive_stream(master_seed: int, path_index: int) -> RngStream:
    """Documented path-to-stream rule: Philox key (master_seed, path_index)."""
    return RngStream(master_seed=master_seed, stream_id=path_index)
