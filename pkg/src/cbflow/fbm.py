"""Scalar fractional Brownian motion: exact synthesis and the Volterra kernel.

Sample paths come from circulant embedding of fractional Gaussian noise
(Davies-Harte), which reproduces the exact joint law of the increments at
uniform nodes in O(n log n).  The Volterra kernel K_H that represents fBm
as a Wiener integral is implemented separately and checked against the
covariance through the identity int_0^(t^s) K_H(t,u) K_H(s,u) du = R_H(t,s).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import beta as _beta_fn

from .errors import NumericsError
from .timegrid import TimeGrid

__all__ = [
    "fbm_covariance",
    "fbm_path",
    "volterra_kernel",
    "fbm_kernel_identity",
    "FbmKernelTable",
]


def fbm_covariance(H: float, t, s):
    """R_H(t,s) = (t^2H + s^2H - |t-s|^2H)/2."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))


@lru_cache(maxsize=32)
def _embedding_sqrt_eigs(n: int, H: float) -> np.ndarray:
    """sqrt of circulant eigenvalues embedding the n-lag fGn covariance.

    The embedding size doubles until the spectrum is nonnegative (rarely
    needed for H > 1/2, but cheap insurance).
    """
    m = n
    while True:
        k = np.arange(m + 1, dtype=float)
        c = 0.5 * ((k + 1.0) ** (2 * H) + np.abs(k - 1.0) ** (2 * H)) - k ** (2 * H)
        row = np.concatenate([c[:m], [c[m]], c[m - 1:0:-1]])
        eigs = np.fft.fft(row).real
        if eigs.min() > -1e-10 * eigs.max():
            eigs = np.clip(eigs, 0.0, None)
            out = np.sqrt(eigs)
            out.flags.writeable = False
            return out
        if m > 2**22:
            raise NumericsError(
                f"circulant embedding stays indefinite for H={H} at size {m}"
            )
        m *= 2


def _sample_fgn(n: int, H: float, rng: np.random.Generator, n_paths: int) -> np.ndarray:
    """(n_paths, n) unit-spacing fractional Gaussian noise with exact joint law."""
    sq = _embedding_sqrt_eigs(n, H)
    size = len(sq)
    m = size // 2  # embedding half-size (>= n)
    z = np.zeros((n_paths, size), dtype=np.complex128)
    z[:, 0] = rng.standard_normal(n_paths)
    z[:, m] = rng.standard_normal(n_paths)
    half = (
        rng.standard_normal((n_paths, m - 1)) + 1j * rng.standard_normal((n_paths, m - 1))
    ) / np.sqrt(2.0)
    z[:, 1:m] = half
    z[:, m + 1:] = np.conj(half[:, ::-1])
    fgn = np.sqrt(size) * np.fft.ifft(sq * z, axis=1).real[:, :n]
    return fgn


def fbm_path(
    H: float,
    grid: TimeGrid,
    rng: np.random.Generator,
    n_paths: int = 1,
) -> np.ndarray:
    """Scalar fBm sampled at the grid nodes with exact joint law.

    Returns shape (nt+1,) for a single path, else (n_paths, nt+1); the
    path starts at 0.
    """
    if not (0.0 < H < 1.0):
        raise ValueError(f"Hurst parameter must lie in (0, 1), got H={H}")
    fgn = _sample_fgn(grid.nt, float(H), rng, n_paths)
    fgn *= grid.dt**H
    paths = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(fgn, axis=1)], axis=1
    )
    return paths[0] if n_paths == 1 else paths


def _kernel_const(H: float) -> float:
    # the numerator H(2H-1) makes the kernel identity hold; H(H-1) would be
    # negative under the radical
    return float(np.sqrt(H * (2 * H - 1.0) / _beta_fn(2.0 - 2.0 * H, H - 0.5)))


def volterra_kernel(H: float, t: float, s: float, quad_n: int = 64) -> float:
    """K_H(t,s) = c_H s^(1/2-H) int_s^t (u-s)^(H-3/2) u^(H-1/2) du, H > 1/2.

    The endpoint singularity is absorbed by the substitution
    w = (u-s)^(H-1/2), after which fixed Gauss-Legendre converges fast.
    Zero for s >= t, per the Volterra structure.
    """
    if not H > 0.5:
        raise ValueError(f"the reduced kernel needs H > 1/2, got H={H}")
    if s >= t or s <= 0.0:
        return 0.0
    a = H - 0.5
    w_max = (t - s) ** a
    xg, wg = np.polynomial.legendre.leggauss(quad_n)
    w = 0.5 * w_max * (xg + 1.0)
    u = s + w ** (1.0 / a)
    inner = 0.5 * w_max * np.sum(wg * u ** (H - 0.5)) / a
    return _kernel_const(H) * s ** (0.5 - H) * inner


def fbm_kernel_identity(
    H: float, t: float, s: float, quad_n: int = 64
) -> float:
    """|int_0^(t^s) K_H(t,u) K_H(s,u) du  -  R_H(t,s)|.

    The outer integral is adaptive (QAGS handles the integrable endpoint
    singularities u^(1-2H) at 0 and (s-u)^(H-1/2) at s).
    """
    if not H > 0.5:
        raise ValueError(f"the reduced kernel needs H > 1/2, got H={H}")
    if t <= 0 or s <= 0:
        return float(abs(fbm_covariance(H, max(t, 0.0), max(s, 0.0))))
    upper = min(t, s)

    def integrand(u):
        return volterra_kernel(H, t, u, quad_n) * volterra_kernel(H, s, u, quad_n)

    with np.errstate(all="ignore"):
        lhs, err = integrate.quad(
            integrand, 0.0, upper, limit=400, epsabs=1e-10, epsrel=1e-10
        )
    if not np.isfinite(lhs) or err > 1e-5:
        raise NumericsError(
            f"outer quadrature did not converge (estimate error {err})"
        )
    return float(abs(lhs - fbm_covariance(H, t, s)))


@dataclass
class FbmKernelTable:
    """Kernel values K_H(t_j, s_i) tabulated on a time grid.

    Lower-triangular by construction: K_H(t,s) = 0 for s >= t, and the
    kernel is nonnegative for H > 1/2.
    """

    H: float
    grid: TimeGrid
    quad_n: int = 64

    def __post_init__(self):
        nodes = self.grid.nodes
        m = len(nodes)
        vals = np.zeros((m, m))
        for j in range(m):
            for i in range(m):
                if 0.0 < nodes[i] < nodes[j]:
                    vals[j, i] = volterra_kernel(self.H, nodes[j], nodes[i], self.quad_n)
        self.values = vals
        self.c_H = _kernel_const(self.H)
