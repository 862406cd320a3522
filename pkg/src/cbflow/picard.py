"""Mild-solution Picard iteration and existence-time budgets.

The solver iterates whole trajectories: starting from the heat flow of the
initial datum, each sweep applies the Duhamel map

    u_{n+1}(t) = e^{-tA} x + G(u_n)(t),
    G(u)(t) = -int_0^t e^{-(t-s)A} [B(u) + C(u)](s) ds
              + int_0^t e^{-(t-s)A} P f(s) ds,

with the time integrals evaluated per Fourier mode by the exponential
product quadrature of cbflow.timegrid.  The budget calculator inverts the
contraction and smallness conditions that certify geometric convergence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, InfeasibleBudgetError, InputError, NonConvergenceError
from .fields import SolverParams, SpectralField, lp_norm, picard_exponents, validate_params
from .operators import convection_coeffs, damping_coeffs, project_coeffs
from .timegrid import TimeGrid, Trajectory, exp_convolve

__all__ = [
    "PicardTrace",
    "ExistenceBudget",
    "heat_flow",
    "mild_rhs",
    "existence_time",
    "picard_solve",
    "uniqueness_check",
    "UniquenessReport",
]

_T_FLOOR = 1e-12


@dataclass
class PicardTrace:
    """Diagnostics of one fixed-point run.

    f_n are sup-in-time L^p norms of the iterates, D_n the sup norms of
    consecutive differences, ratios their successive quotients.
    """

    f_n: list[float] = field(default_factory=list)
    D_n: list[float] = field(default_factory=list)
    rho_predicted: float | None = None
    converged: bool = False
    iterations: int = 0
    residual: float | None = None
    t_certified: bool = True

    @property
    def ratios(self) -> list[float]:
        out = []
        for a, b in zip(self.D_n[:-1], self.D_n[1:]):
            if a > 1e-300:
                out.append(b / a)
        return out

    @property
    def rho_measured(self) -> float | None:
        # ratios with a denominator near roundoff carry no information
        floor = 1e-3 * max(self.D_n[0], 1e-300) * np.finfo(float).eps
        vals = [
            b / a
            for a, b in zip(self.D_n[:-1], self.D_n[1:])
            if a > max(floor, 1e-300)
        ]
        return max(vals) if vals else None


@dataclass
class ExistenceBudget:
    """Certified horizon with the bound K and contraction factor it induces."""

    Tstar: float
    K: float
    rho: float
    f0: float
    C: float
    pinned_K: bool = False


def heat_flow(x: SpectralField, times: np.ndarray) -> Trajectory:
    """Trajectory t -> e^{-tA} x sampled at the given nodes."""
    grid = x.grid
    factors = np.exp(-np.multiply.outer(np.asarray(times), grid.k_squared))
    coeffs = factors[:, None] * x.coeffs[None]
    return Trajectory(grid, np.asarray(times, dtype=float), coeffs)


def _nonlinearity(
    coeffs: np.ndarray,
    grid,
    r: float,
    include_convection: bool,
    include_damping: bool,
) -> np.ndarray:
    out = np.zeros_like(coeffs)
    if include_convection:
        out -= convection_coeffs(coeffs, coeffs, grid)
    if include_damping:
        out -= damping_coeffs(coeffs, grid, r)
    return out


def mild_rhs(
    u: Trajectory,
    f: Trajectory | None,
    params: SolverParams,
    *,
    include_convection: bool = True,
    include_damping: bool = True,
) -> Trajectory:
    """The Duhamel increment G(u) evaluated at every node of u."""
    validate_params(params)
    grid = params.grid
    if u.grid != grid:
        raise InputError("trajectory grid does not match params.grid")
    if f is not None:
        if f.grid != grid:
            raise InputError("forcing grid does not match params.grid")
        if len(f) != len(u) or not np.allclose(f.times, u.times, rtol=0, atol=1e-14):
            raise InputError("forcing is sampled on different time nodes")
    integrand = np.empty_like(u.coeffs)
    for j in range(len(u)):
        integrand[j] = _nonlinearity(
            u.coeffs[j], grid, params.r, include_convection, include_damping
        )
        if f is not None:
            integrand[j] += project_coeffs(np.array(f.coeffs[j]), grid)
    G = exp_convolve(grid.k_squared, u.times, integrand)
    return Trajectory(grid, u.times, G)


def _induced_K(T: float, C: float, a: float, b: float, r: float) -> float:
    """Largest admissible iterate bound at horizon T (from the recurrence)."""
    K_conv = 1.0 / (4.0 * C * T**a)
    if r > 1.0:
        K_damp = (1.0 / (4.0 * C * T**b)) ** (1.0 / (r - 1.0))
    else:
        K_damp = np.inf if C * T**b <= 0.25 else 0.0
    return min(K_conv, K_damp)


def contraction_factor(T: float, K: float, C: float, d: int, p: float, r: float) -> float:
    """rho = C (K T^(1/2 - d/2p) + K^(r-1) T^(1 - d(r-1)/2p))."""
    a, b = picard_exponents(d, p, r)
    return C * (K * T**a + K ** (r - 1.0) * T**b)


def existence_time(
    f0: float,
    C: float,
    d: int,
    p: float,
    r: float,
    T_max: float,
    K: float | None = None,
    rel_tol: float = 1e-10,
) -> ExistenceBudget:
    """Largest certified horizon T* <= T_max, by bisection.

    With K = None the iterate bound is induced from the horizon (the value
    that caps the nonlinear recurrence); a pinned K instead checks the
    contraction factor and the smallness condition against that K.
    Raises InfeasibleBudgetError when no horizon >= 1e-12 works, reporting
    the seed-norm threshold that would.
    """
    if f0 < 0:
        raise ValueError(f"seed norm must be nonnegative, got f0={f0}")
    if C <= 0:
        raise ValueError(f"estimate constant must be positive, got C={C}")
    if T_max <= _T_FLOOR:
        raise ValueError(f"T_max must exceed {_T_FLOOR}, got {T_max}")
    a, b = picard_exponents(d, p, r)
    if a <= 0 or b <= 0:
        raise InfeasibleBudgetError(
            f"Picard exponents must be positive, got {a} and {b}; check (d, p, r)"
        )
    pinned = K is not None

    def K_at(T: float) -> float:
        return K if pinned else _induced_K(T, C, a, b, r)

    def feasible(T: float) -> bool:
        KT = K_at(T)
        if not np.isfinite(KT) or KT <= 0:
            return False
        return f0 < 0.5 * KT and contraction_factor(T, KT, C, d, p, r) < 1.0

    if not feasible(_T_FLOOR):
        threshold = 0.5 * K_at(_T_FLOOR)
        if pinned and contraction_factor(_T_FLOOR, K, C, d, p, r) >= 1.0:
            msg = f"pinned K={K} yields contraction factor >= 1 at every horizon >= {_T_FLOOR}"
        else:
            msg = (
                f"seed norm f0={f0} exceeds the admissible threshold {threshold}"
                f" at the smallest horizon {_T_FLOOR}"
            )
        raise InfeasibleBudgetError(msg, threshold=threshold)

    if feasible(T_max):
        Tstar = T_max
    else:
        lo, hi = _T_FLOOR, T_max
        while (hi - lo) > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        Tstar = lo
    KT = K_at(Tstar)
    return ExistenceBudget(
        Tstar=Tstar,
        K=KT,
        rho=contraction_factor(Tstar, KT, C, d, p, r),
        f0=f0,
        C=C,
        pinned_K=pinned,
    )


def seed_norm(x: SpectralField, f: Trajectory | None, p: float, C: float) -> float:
    """f0 = ||x||_p + C * int_0^T ||f(s)||_p ds (trapezoid in time)."""
    f0 = lp_norm(x, p)
    if f is not None and len(f) > 1:
        norms = f.norms(p)
        f0 += C * float(np.trapz(norms, f.times))
    return f0


def picard_solve(
    x: SpectralField,
    f: Trajectory | None,
    params: SolverParams,
    tol: float = 1e-10,
    max_iter: int = 50,
    *,
    initial: Trajectory | None = None,
    budget: ExistenceBudget | None = None,
    times: np.ndarray | None = None,
    include_convection: bool = True,
    include_damping: bool = True,
) -> tuple[Trajectory, PicardTrace]:
    """Iterate the Duhamel map to its fixed point on [0, params.T].

    Returns the converged trajectory and the full trace.  A horizon beyond
    a supplied budget's T* is allowed (the certified bound is sufficient,
    not necessary) but flagged in the trace and warned about.
    """
    validate_params(params)
    grid = params.grid
    if x.grid != grid:
        raise InputError("initial datum grid does not match params.grid")
    if times is None:
        times = TimeGrid(params.T, params.nt).nodes
    trace = PicardTrace()
    if budget is not None:
        trace.rho_predicted = budget.rho
        if params.T > budget.Tstar * (1.0 + 1e-12):
            trace.t_certified = False
            warnings.warn(
                f"horizon T={params.T} exceeds the certified T*={budget.Tstar}; "
                "convergence is no longer guaranteed",
                stacklevel=2,
            )

    u0 = heat_flow(x, times)
    u = u0 if initial is None else initial
    if initial is not None and (
        u.grid != grid or len(u) != len(times) or not np.allclose(u.times, times)
    ):
        raise InputError("initial iterate is sampled on different time nodes")

    p = params.p
    for n in range(max_iter):
        trace.f_n.append(u.sup_norm(p))
        G = mild_rhs(
            u,
            f,
            params,
            include_convection=include_convection,
            include_damping=include_damping,
        )
        new_coeffs = u0.coeffs + G.coeffs
        if not np.all(np.isfinite(new_coeffs)):
            raise BlowUpError(
                f"iterate {n + 1} is non-finite (blow-up or horizon too long)",
                last_iterate=u,
                iteration=n + 1,
            )
        u_next = Trajectory(grid, times, new_coeffs)
        diff = Trajectory(grid, times, new_coeffs - u.coeffs)
        Dn = diff.sup_norm(p)
        trace.D_n.append(Dn)
        u = u_next
        trace.iterations = n + 1
        if Dn < tol:
            trace.converged = True
            break
    if not trace.converged:
        raise NonConvergenceError(
            f"no convergence to tol={tol} within {max_iter} iterations "
            f"(last difference {trace.D_n[-1] if trace.D_n else np.nan})",
            trace=trace,
        )
    trace.f_n.append(u.sup_norm(p))

    G = mild_rhs(
        u, f, params, include_convection=include_convection, include_damping=include_damping
    )
    resid = Trajectory(grid, times, u.coeffs - u0.coeffs - G.coeffs)
    trace.residual = resid.sup_norm(p)
    return u, trace


@dataclass
class UniquenessReport:
    distance: float
    tol: float
    traces: tuple[PicardTrace, PicardTrace]

    @property
    def passed(self) -> bool:
        return self.distance < 10.0 * self.tol


def uniqueness_check(
    x: SpectralField,
    f: Trajectory | None,
    params: SolverParams,
    seeds: tuple[Trajectory, Trajectory] | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> UniquenessReport:
    """Run the fixed point from two seed iterates; report the sup-L^p distance.

    Defaults to the zero trajectory and the heat flow of x.
    """
    times = TimeGrid(params.T, params.nt).nodes
    if seeds is None:
        seeds = (
            Trajectory.zero(params.grid, times),
            heat_flow(x, times),
        )
    u1, tr1 = picard_solve(x, f, params, tol=tol, max_iter=max_iter, initial=seeds[0])
    u2, tr2 = picard_solve(x, f, params, tol=tol, max_iter=max_iter, initial=seeds[1])
    diff = Trajectory(params.grid, u1.times, u1.coeffs - u2.coeffs)
    return UniquenessReport(distance=diff.sup_norm(params.p), tol=tol, traces=(tr1, tr2))
