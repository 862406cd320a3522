"""Spectral realizations of the abstract operators of the projected system.

On the torus every operator is a per-mode multiplier or a dealiased
pseudospectral product:

* heat semigroup: coefficient-wise factor exp(-|k|^2 t);
* Leray projection: per-mode tensor I - k k^T/|k|^2, identity on the mean
  mode (constants are divergence-free);
* convection (u.grad)v: 2/3-rule dealiased product, then projected;
* damping |u|^(r-1) u and its Gateaux derivative: evaluated pointwise on a
  2x-oversampled grid then truncated.  Exact for the cubic case; for
  non-integer r the residual aliasing is controlled by resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .fields import SpectralField, TorusGrid, _fft_inverse

__all__ = [
    "MultiplierTable",
    "heat_semigroup",
    "leray_project",
    "convection",
    "damping",
    "damping_derivative",
    "gradient_magnitude",
]

# points with |u| below this are treated as u = 0 in the derivative branch
_ZERO_CLAMP = 1e-14


@dataclass
class MultiplierTable:
    """Cached per-mode multipliers for one grid: heat factors and Leray tensor."""

    grid: TorusGrid
    _heat: dict = field(default_factory=dict, repr=False)
    _leray: np.ndarray | None = field(default=None, repr=False)

    def heat_factors(self, t: float) -> np.ndarray:
        """exp(-|k|^2 t); values in (0, 1], equal to 1 iff t = 0 or k = 0."""
        if t < 0:
            raise ValueError(f"semigroup time must be nonnegative, got t={t}")
        key = float(t)
        got = self._heat.get(key)
        if got is None:
            got = np.exp(-self.grid.k_squared * key)
            got.flags.writeable = False
            self._heat[key] = got
        return got

    def leray_tensor(self) -> np.ndarray:
        """The projection tensor I - k k^T/|k|^2, shape (d, d, N, ..., N).

        Identity on the k = 0 mode, where the multiplier formula is singular.
        """
        if self._leray is None:
            grid = self.grid
            k = grid.wavevectors
            k2 = grid.k_squared.copy()
            k2[(0,) * grid.d] = 1.0  # mean mode: avoid 0/0, overwritten below
            tensor = np.zeros((grid.d, grid.d) + grid.shape)
            for i in range(grid.d):
                for j in range(grid.d):
                    tensor[i, j] = (1.0 if i == j else 0.0) - k[i] * k[j] / k2
            for i in range(grid.d):
                for j in range(grid.d):
                    tensor[i, j][(0,) * grid.d] = 1.0 if i == j else 0.0
            tensor.flags.writeable = False
            self._leray = tensor
        return self._leray


def _table(grid: TorusGrid, table: MultiplierTable | None) -> MultiplierTable:
    if table is None:
        return MultiplierTable(grid)
    if table.grid != grid:
        raise InputError("multiplier table belongs to a different grid")
    return table


def heat_semigroup(
    t: float, g: SpectralField, table: MultiplierTable | None = None
) -> SpectralField:
    """Apply the heat semigroup: each coefficient scaled by exp(-|k|^2 t)."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got t={t}")
    if t == 0:
        return g
    factors = _table(g.grid, table).heat_factors(t)
    return SpectralField(g.grid, g.coeffs * factors)


def project_coeffs(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Leray-project a raw coefficient array (d, N, ..., N) in place-free form."""
    k = grid.wavevectors
    k2 = grid.k_squared.copy()
    zero = (0,) * grid.d
    k2[zero] = 1.0
    kdotc = np.sum(k * coeffs, axis=0) / k2
    kdotc[zero] = 0.0  # identity on the mean mode
    return coeffs - k * kdotc


def leray_project(g: SpectralField) -> SpectralField:
    """Project onto divergence-free fields, mode by mode."""
    return SpectralField(g.grid, project_coeffs(np.array(g.coeffs), g.grid))


def _to_physical(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return _fft_inverse(coeffs, grid.spatial_axes, grid.npoints).real


def _to_spectral(phys: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.fft.fftn(phys, axes=grid.spatial_axes) / grid.npoints


def convection_coeffs(
    ucoeffs: np.ndarray, vcoeffs: np.ndarray, grid: TorusGrid
) -> np.ndarray:
    """Coefficients of P[(u.grad)v] with 2/3-rule dealiasing."""
    mask = grid.dealias_mask
    uc = ucoeffs * mask
    vc = vcoeffs * mask
    u_phys = _to_physical(uc, grid)
    out_phys = np.zeros_like(u_phys)
    k = grid.wavevectors
    for j in range(grid.d):
        dv_j = _to_physical(1j * k[j] * vc, grid)  # all components of dv/dx_j
        out_phys += u_phys[j] * dv_j
    out = _to_spectral(out_phys, grid)
    out *= mask
    return project_coeffs(out, grid)


def convection(u: SpectralField, v: SpectralField) -> SpectralField:
    """Projected convective term P[(u.grad)v]; output is solenoidal."""
    if u.grid != v.grid:
        raise InputError("convection operands live on different grids")
    return SpectralField(u.grid, convection_coeffs(u.coeffs, v.coeffs, u.grid))


def _oversample_pad(coeffs: np.ndarray, grid: TorusGrid) -> tuple[np.ndarray, tuple[int, ...], int]:
    """Zero-pad coefficients onto the 2x refined grid (same series coefficients)."""
    N, d = grid.N, grid.d
    M = 2 * N
    axes = grid.spatial_axes
    shifted = np.fft.fftshift(coeffs, axes=axes)
    lead = coeffs.shape[: axes[0]]
    big = np.zeros(lead + (M,) * d, dtype=np.complex128)
    sl = (slice(None),) * len(lead) + (slice(M // 2 - N // 2, M // 2 + N // 2),) * d
    big[sl] = shifted
    return np.fft.ifftshift(big, axes=axes), axes, M**d


def _oversample_truncate(big: np.ndarray, grid: TorusGrid) -> np.ndarray:
    N, d = grid.N, grid.d
    M = 2 * N
    axes = grid.spatial_axes
    shifted = np.fft.fftshift(big, axes=axes)
    lead = big.shape[: axes[0]]
    sl = (slice(None),) * len(lead) + (slice(M // 2 - N // 2, M // 2 + N // 2),) * d
    return np.fft.ifftshift(shifted[sl], axes=axes)


def _pointwise_on_fine(coeffs: np.ndarray, grid: TorusGrid, fn) -> np.ndarray:
    """Evaluate a pointwise map of the field on the 2x grid; return N-grid coeffs."""
    big, axes, npts = _oversample_pad(coeffs, grid)
    phys = _fft_inverse(big, axes, npts).real
    out_phys = fn(phys)
    out_big = np.fft.fftn(out_phys, axes=axes) / npts
    return _oversample_truncate(out_big, grid)


def damping_coeffs(ucoeffs: np.ndarray, grid: TorusGrid, r: float) -> np.ndarray:
    """Coefficients of P[|u|^(r-1) u]."""
    if r == 1.0:
        return project_coeffs(np.array(ucoeffs), grid)

    def fn(phys):
        mag = np.sqrt(np.sum(phys**2, axis=0))
        return np.power(mag, r - 1.0) * phys

    return project_coeffs(_pointwise_on_fine(ucoeffs, grid, fn), grid)


def damping(u: SpectralField, r: float) -> SpectralField:
    """Forchheimer damping P[|u|^(r-1) u]; output is solenoidal."""
    if r < 1:
        raise ValueError(f"absorption exponent must satisfy r >= 1, got r={r}")
    return SpectralField(u.grid, damping_coeffs(u.coeffs, u.grid, r))


def damping_derivative_coeffs(
    ucoeffs: np.ndarray, vcoeffs: np.ndarray, grid: TorusGrid, r: float
) -> np.ndarray:
    """Coefficients of the Gateaux derivative of the damping at u along v.

    P[|u|^(r-1) v + (r-1)|u|^(r-3) u (u.v)], with the integrand set to zero
    where |u| vanishes (the negative power appears only for r < 3).
    """
    if r == 1.0:
        return project_coeffs(np.array(vcoeffs), grid)

    ubig, axes, npts = _oversample_pad(ucoeffs, grid)
    vbig, _, _ = _oversample_pad(vcoeffs, grid)
    u_phys = _fft_inverse(ubig, axes, npts).real
    v_phys = _fft_inverse(vbig, axes, npts).real
    mag = np.sqrt(np.sum(u_phys**2, axis=0))
    nonzero = mag > _ZERO_CLAMP
    mag_safe = np.where(nonzero, mag, 1.0)
    pow_r1 = np.where(nonzero, mag_safe ** (r - 1.0), 0.0)
    pow_r3 = np.where(nonzero, mag_safe ** (r - 3.0), 0.0)
    udotv = np.sum(u_phys * v_phys, axis=0)
    out_phys = pow_r1 * v_phys + (r - 1.0) * pow_r3 * udotv * u_phys
    out_big = np.fft.fftn(out_phys, axes=axes) / npts
    return project_coeffs(_oversample_truncate(out_big, grid), grid)


def damping_derivative(u: SpectralField, v: SpectralField, r: float) -> SpectralField:
    """Gateaux derivative of the damping term at u in direction v."""
    if r < 1:
        raise ValueError(f"absorption exponent must satisfy r >= 1, got r={r}")
    if u.grid != v.grid:
        raise InputError("derivative operands live on different grids")
    return SpectralField(u.grid, damping_derivative_coeffs(u.coeffs, v.coeffs, u.grid, r))


def gradient_magnitude(g: SpectralField) -> np.ndarray:
    """Pointwise Frobenius magnitude of grad g, sampled on the collocation grid."""
    grid = g.grid
    k = grid.wavevectors
    total = np.zeros(grid.shape)
    for j in range(grid.d):
        dg_j = _fft_inverse(1j * k[j] * g.coeffs, grid.spatial_axes, grid.npoints).real
        total += np.sum(dg_j**2, axis=0)
    return np.sqrt(total)
