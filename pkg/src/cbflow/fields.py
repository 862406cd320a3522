"""Vector fields on a periodic torus, stored as truncated Fourier coefficients.

Conventions used throughout the package:

* Physical samples live on the uniform collocation grid x_j = j*L/N
  (componentwise), stored component-first with shape (d, N, ..., N).
* Coefficients are Fourier-series coefficients: u(x) = sum_k c_k exp(i k.x)
  with k = (2*pi/L)*n and integer mode numbers n in {-N/2, ..., N/2-1} laid
  out in numpy FFT order.  The forward transform therefore carries the
  1/N^d factor (a constant field has c_0 equal to its value), and the
  inverse is the plain unnormalized series sum.
* L^p norms are rectangle-rule quadratures on the collocation grid, which
  is spectrally accurate for smooth fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, InputError, NumericsError

__all__ = [
    "TorusGrid",
    "SpectralField",
    "SolverParams",
    "forward_transform",
    "inverse_transform",
    "lp_norm",
    "validate_params",
    "picard_exponents",
    "random_solenoidal_field",
    "taylor_green",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the torus [0, L]^d with N modes per axis."""

    d: int
    N: int
    L: float = 2.0 * np.pi

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigError(f"spatial dimension must be 2 or 3, got d={self.d}")
        if self.N % 2 != 0 or self.N < 8:
            raise ConfigError(f"modes per axis must be even and >= 8, got N={self.N}")
        if not (self.L > 0):
            raise ConfigError(f"box edge length must be positive, got L={self.L}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def npoints(self) -> int:
        return self.N**self.d

    @property
    def cell_volume(self) -> float:
        return (self.L / self.N) ** self.d

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(1, self.d + 1))

    def mesh(self) -> np.ndarray:
        """Collocation coordinates, shape (d, N, ..., N)."""
        x1 = np.arange(self.N) * (self.L / self.N)
        return np.stack(np.meshgrid(*([x1] * self.d), indexing="ij"))

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers n per axis, shape (d, N, ..., N), FFT order."""
        n1 = np.fft.fftfreq(self.N, d=1.0 / self.N)
        return np.stack(np.meshgrid(*([n1] * self.d), indexing="ij"))

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Physical wavevectors k = (2*pi/L) * n."""
        return (2.0 * np.pi / self.L) * self.mode_numbers

    @cached_property
    def k_squared(self) -> np.ndarray:
        return np.sum(self.wavevectors**2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds-rule mask: True where every |n| < N/3."""
        kmax = self.N / 3.0
        return np.all(np.abs(self.mode_numbers) < kmax, axis=0)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True where any axis sits on the unmatched -N/2 mode."""
        return np.any(self.mode_numbers == -self.N // 2, axis=0)


def _check_samples(samples: np.ndarray, grid: TorusGrid) -> np.ndarray:
    samples = np.asarray(samples)
    expected = (grid.d,) + grid.shape
    if samples.shape != expected:
        raise InputError(
            f"sample array has shape {samples.shape}, expected {expected}"
        )
    if np.iscomplexobj(samples):
        raise InputError("physical samples must be real-valued")
    return samples.astype(np.float64, copy=False)


def _fft_forward(samples: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.fft.fftn(samples, axes=grid.spatial_axes) / grid.npoints


def _fft_inverse(coeffs: np.ndarray, axes: tuple[int, ...], npoints: int) -> np.ndarray:
    return np.fft.ifftn(coeffs * npoints, axes=axes)


@dataclass(frozen=True)
class SpectralField:
    """A real d-component vector field held as Fourier coefficients.

    Immutable after construction: the coefficient array is marked
    read-only, so instances are safe to share across threads.
    """

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        expected = (self.grid.d,) + self.grid.shape
        if coeffs.shape != expected:
            raise InputError(
                f"coefficient array has shape {coeffs.shape}, expected {expected}"
            )
        if coeffs.flags.writeable:
            coeffs = coeffs.copy()
            coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    def samples(self) -> np.ndarray:
        """Physical-space samples on the collocation grid, shape (d, N, ..., N)."""
        phys = _fft_inverse(self.coeffs, self.grid.spatial_axes, self.grid.npoints)
        return np.ascontiguousarray(phys.real)

    def div_residual(self) -> float:
        """Scale-free divergence residual sqrt(sum|k.c|^2 / sum|k|^2|c|^2)."""
        k = self.grid.wavevectors
        kdotc = np.sum(k * self.coeffs, axis=0)
        num = np.linalg.norm(kdotc)
        den = np.sqrt(np.sum(self.grid.k_squared * np.sum(np.abs(self.coeffs) ** 2, axis=0)))
        if den == 0.0:
            return 0.0
        return float(num / den)

    def is_solenoidal(self, tol: float = 1e-12) -> bool:
        return self.div_residual() <= tol

    def conjugate_symmetry_defect(self) -> float:
        """Relative deviation of coeffs from the real-field symmetry c(-k)=conj(c(k))."""
        flipped = self.coeffs
        for ax in self.grid.spatial_axes:
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        num = np.linalg.norm(self.coeffs - np.conj(flipped))
        den = np.linalg.norm(self.coeffs)
        return float(num / den) if den > 0 else 0.0

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.grid != self.grid:
            raise InputError("fields live on different grids")
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if other.grid != self.grid:
            raise InputError("fields live on different grids")
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    @classmethod
    def zero(cls, grid: TorusGrid) -> "SpectralField":
        return cls(grid, np.zeros((grid.d,) + grid.shape, dtype=np.complex128))


def forward_transform(samples: np.ndarray, grid: TorusGrid) -> SpectralField:
    """Transform physical samples (d, N, ..., N) to a SpectralField."""
    samples = _check_samples(samples, grid)
    return SpectralField(grid, _fft_forward(samples, grid))


def inverse_transform(field: SpectralField) -> np.ndarray:
    """Physical samples of the field; inverse of forward_transform."""
    return field.samples()


def magnitude_quadrature_norm(mag: np.ndarray, p: float, grid: TorusGrid) -> float:
    """Rectangle-rule L^p norm of a nonnegative scalar sample array."""
    if not (np.isfinite(p) and p >= 1.0):
        raise ValueError(f"Lebesgue exponent must satisfy 1 <= p < inf, got p={p}")
    if not np.all(np.isfinite(mag)):
        raise NumericsError("field samples are not finite")
    return float((np.sum(mag**p) * grid.cell_volume) ** (1.0 / p))


def lp_norm(field: SpectralField, p: float) -> float:
    """L^p norm of the pointwise Euclidean magnitude, by grid quadrature."""
    phys = field.samples()
    mag = np.sqrt(np.sum(phys**2, axis=0))
    return magnitude_quadrature_norm(mag, p, field.grid)


def picard_exponents(d: int, p: float, r: float) -> tuple[float, float]:
    """The two time exponents 1/2 - d/(2p) and 1 - d(r-1)/(2p)."""
    return 0.5 - d / (2.0 * p), 1.0 - d * (r - 1.0) / (2.0 * p)


@dataclass
class SolverParams:
    """Model and discretization parameters shared by the solvers.

    constants may hold measured smoothing-estimate constants (see
    cbflow.estimates); budget calculators fall back to it when no explicit
    constant is passed.
    """

    grid: TorusGrid
    r: float
    p: float
    T: float
    nt: int
    constants: object | None = None

    def __post_init__(self):
        validate_params(self)


def validate_params(params: SolverParams) -> SolverParams:
    """Check the exponent hypotheses; raise ConfigError naming the failing bound."""
    d, r, p = params.grid.d, params.r, params.p
    if r < 1:
        raise ConfigError(f"absorption exponent must satisfy r >= 1, got r={r}")
    bound = max(d, d * (r - 1.0) / 2.0)
    if not p > bound:
        raise ConfigError(
            f"Lebesgue exponent must satisfy p > max(d, d(r-1)/2) = {bound}, got p={p}"
        )
    a, b = picard_exponents(d, p, r)
    if not a > 0:
        raise ConfigError(f"exponent 1/2 - d/(2p) = {a} must be positive")
    if not b > 0:
        raise ConfigError(f"exponent 1 - d(r-1)/(2p) = {b} must be positive")
    if params.T <= 0:
        raise ConfigError(f"time horizon must be positive, got T={params.T}")
    if params.nt < 8:
        raise ConfigError(f"need at least 8 time intervals, got nt={params.nt}")
    return params


def random_solenoidal_field(
    grid: TorusGrid, rng: np.random.Generator, decay: float = 1.0
) -> SpectralField:
    """Random band-limited solenoidal field.

    White Gaussian samples are transformed, damped by (1+|k|^2)^-decay,
    stripped of Nyquist content, and Leray-projected.  The construction is
    the sampling law used by the estimate lab, fixed here so measured
    constants are reproducible.
    """
    from .operators import leray_project

    samples = rng.standard_normal((grid.d,) + grid.shape)
    coeffs = _fft_forward(samples, grid)
    coeffs *= (1.0 + grid.k_squared) ** (-decay)
    coeffs[:, grid.nyquist_mask] = 0.0
    return leray_project(SpectralField(grid, coeffs))


def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> SpectralField:
    """Taylor-Green vortex: solenoidal, smooth, and a classic starter datum."""
    x = grid.mesh() * (2.0 * np.pi / grid.L)
    if grid.d == 2:
        u = np.stack([np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])])
    else:
        u = np.stack(
            [
                np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2]),
                -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2]),
                np.zeros(grid.shape),
            ]
        )
    return forward_transform(amplitude * u, grid)
