"""Time discretization and the per-mode exponential product quadrature.

The Duhamel integrals that drive every solver here have the per-mode form

    I(t_j) = int_0^{t_j} exp(-lam (t_j - s)) c(s) ds,      lam = |k|^2 >= 0,

with c smooth between nodes.  Reconstructing c piecewise-linearly gives the
recurrence  I_{j+1} = E_j I_j + w_old_j c_j + w_new_j c_{j+1}  with

    E = exp(-x),   w_old = dt (1 - E - x E)/x^2,   w_new = dt (x - 1 + E)/x^2,

x = lam*dt.  The rule is exact for c linear on each interval and second
order otherwise; series expansions take over for small x where the closed
forms cancel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .fields import SpectralField, TorusGrid

__all__ = ["TimeGrid", "Trajectory", "interval_weights", "exp_convolve"]

_SMALL_X = 1e-3


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_j = j*T/nt, j = 0..nt."""

    T: float
    nt: int

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigError(f"time horizon must be positive, got T={self.T}")
        if self.nt < 8:
            raise ConfigError(f"need at least 8 time intervals, got nt={self.nt}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    @property
    def dt(self) -> float:
        return self.T / self.nt


@dataclass
class Trajectory:
    """Coefficient samples of a field path: times (m,), coeffs (m, d, N, ..., N)."""

    grid: TorusGrid
    times: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        expected = (len(self.times), self.grid.d) + self.grid.shape
        if self.coeffs.shape != expected:
            raise InputError(
                f"trajectory coeffs have shape {self.coeffs.shape}, expected {expected}"
            )

    def __len__(self) -> int:
        return len(self.times)

    def field_at(self, j: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[j])

    def norms(self, p: float) -> np.ndarray:
        from .fields import lp_norm

        return np.array([lp_norm(self.field_at(j), p) for j in range(len(self))])

    def sup_norm(self, p: float) -> float:
        return float(np.max(self.norms(p)))

    @classmethod
    def zero(cls, grid: TorusGrid, times: np.ndarray) -> "Trajectory":
        m = len(times)
        return cls(grid, times, np.zeros((m, grid.d) + grid.shape, dtype=np.complex128))


def interval_weights(lam: np.ndarray, dt: float):
    """(E, w_old, w_new) for one interval of width dt and decay rates lam."""
    x = lam * dt
    E = np.exp(-x)
    small = x < _SMALL_X
    xs = np.where(small, 1.0, x)  # dummy to keep the closed forms finite
    w_old = dt * (-np.expm1(-xs) - xs * np.exp(-xs)) / xs**2
    w_new = dt * (xs + np.expm1(-xs)) / xs**2
    w_old_series = dt * (0.5 - x / 3.0 + x**2 / 8.0 - x**3 / 30.0)
    w_new_series = dt * (0.5 - x / 6.0 + x**2 / 24.0 - x**3 / 120.0)
    w_old = np.where(small, w_old_series, w_old)
    w_new = np.where(small, w_new_series, w_new)
    return E, w_old, w_new


def exp_convolve(lam: np.ndarray, times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Cumulative exponential convolution at every node.

    values[j] holds the integrand samples c(t_j), one array of decay rates
    lam per entry (lam broadcasts against values[j]).  Returns I with
    I[j] = int_0^{t_j} exp(-lam (t_j - s)) c(s) ds under piecewise-linear
    reconstruction of c.  Node spacing may be non-uniform.
    """
    m = len(times)
    out = np.zeros_like(values)
    if m == 0:
        return out
    dts = np.diff(times)
    uniform = dts.size > 0 and np.allclose(dts, dts[0], rtol=1e-12, atol=0.0)
    if uniform:
        E, w_old, w_new = interval_weights(lam, float(dts[0]))
    acc = np.zeros_like(values[0])
    for j in range(m - 1):
        if not uniform:
            dt = float(dts[j])
            if dt <= 0:
                raise InputError("time nodes must be strictly increasing")
            E, w_old, w_new = interval_weights(lam, dt)
        acc = E * acc + w_old * values[j] + w_new * values[j + 1]
        out[j + 1] = acc
    return out
