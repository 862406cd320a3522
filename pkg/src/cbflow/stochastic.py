"""Pathwise mild solvers: subtract the noise convolution, contract on a ball.

For each noise realization w the shifted unknown v = u - w solves a
deterministic fixed-point problem

    v(t) = e^{-tA} x - int_0^t e^{-(t-s)A} [B(v+w) + C(v+w)](s) ds

on a horizon certified by the random-time budget built from the realized
noise size mu_p = sup_t ||w(t)||_p.  Convergence is monitored inside the
ball ||v(t)||_p <= M; a ball exit halves the horizon and retries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError, InputError
from .fields import SolverParams, SpectralField, lp_norm, picard_exponents, validate_params
from .noise import NoisePath, NoiseSpec, fbm_convolution, levy_convolution, wiener_convolution
from .picard import PicardTrace, heat_flow, mild_rhs
from .timegrid import TimeGrid, Trajectory

__all__ = [
    "BallSpec",
    "PathResult",
    "EnsembleSummary",
    "random_time_budget",
    "pathwise_solve",
    "ensemble_run",
    "write_ensemble_csv",
    "ENSEMBLE_CSV_HEADER",
]

_T_FLOOR = 1e-12
_MAX_BALL_RETRIES = 5


@dataclass
class BallSpec:
    """Ball radius, certified random horizon, and the noise size behind it."""

    M: float
    Ttilde: float
    mu_p: float
    rho: float | None = None


@dataclass
class PathResult:
    """Outcome of one pathwise solve."""

    path_id: int
    seed: int
    family: str
    hurst: float | None
    mu_p: float
    Ttilde: float
    converged: bool
    exit_reason: str  # converged | ball-exit | non-contraction
    iterations: int
    contraction_measured: float | None
    contraction_predicted: float | None
    residual: float | None
    trace: PicardTrace | None = None
    v: Trajectory | None = None
    u: Trajectory | None = None


def stochastic_contraction(
    T: float, M: float, mu_p: float, C: float, d: int, p: float, r: float
) -> float:
    """C (T^a (M + mu) + T^b (M^(r-1) + mu^(r-1))) with the Picard exponents."""
    a, b = picard_exponents(d, p, r)
    return C * (T**a * (M + mu_p) + T**b * (M ** (r - 1.0) + mu_p ** (r - 1.0)))


def _ball_condition(
    T: float, x_norm: float, M: float, mu_p: float, C: float, d: int, p: float, r: float
) -> float:
    a, b = picard_exponents(d, p, r)
    return x_norm + C * T**a * (M**2 + mu_p**2) + C * T**b * (M**r + mu_p**r)


def random_time_budget(
    x_norm: float,
    M: float,
    mu_p: float,
    C: float,
    d: int,
    p: float,
    r: float,
    T: float,
    rel_tol: float = 1e-10,
) -> BallSpec:
    """Largest horizon <= T on which the shifted map contracts inside the ball.

    Both the contraction condition and the ball-invariance condition are
    monotone in the horizon, so bisection finds the boundary.
    """
    if not M > x_norm:
        raise HypothesisError(
            f"ball radius must exceed the datum norm (M > ||x||_p): got M={M},"
            f" ||x||_p={x_norm}; the ball condition is unsatisfiable"
        )
    if mu_p < 0:
        raise ValueError(f"noise sup-norm must be nonnegative, got {mu_p}")
    if C <= 0:
        raise ValueError(f"estimate constant must be positive, got C={C}")

    def feasible(Tt: float) -> bool:
        return (
            stochastic_contraction(Tt, M, mu_p, C, d, p, r) < 1.0
            and _ball_condition(Tt, x_norm, M, mu_p, C, d, p, r) <= M
        )

    if feasible(T):
        Tt = T
    else:
        lo, hi = _T_FLOOR, T
        if not feasible(lo):
            return BallSpec(M=M, Ttilde=0.0, mu_p=mu_p, rho=None)
        while (hi - lo) > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        Tt = lo
    return BallSpec(
        M=M, Ttilde=Tt, mu_p=mu_p, rho=stochastic_contraction(Tt, M, mu_p, C, d, p, r)
    )


def generate_noise(
    spec: NoiseSpec, grid: TimeGrid, rng: np.random.Generator | None = None
) -> NoisePath:
    if spec.family == "wiener":
        return wiener_convolution(spec, grid, rng)
    if spec.family == "levy":
        return levy_convolution(spec, grid, rng)
    return fbm_convolution(spec, grid, rng)


def _resolve_constant(params: SolverParams, C: float | None) -> float:
    if C is not None:
        return C
    if params.constants is not None:
        combined = params.constants.combined()
        if combined is not None:
            return combined
    raise InputError(
        "no estimate constant available: pass C= or attach measured constants to params"
    )


def pathwise_solve(
    x: SpectralField,
    spec: NoiseSpec,
    params: SolverParams,
    M: float | None = None,
    tol: float = 1e-10,
    rng: np.random.Generator | None = None,
    *,
    C: float | None = None,
    master_seed: int | None = None,
    max_iter: int = 50,
    path_id: int = 0,
    keep_trajectories: bool = True,
    include_convection: bool = True,
    include_damping: bool = True,
) -> PathResult:
    """Solve one noise path: generate w, certify a horizon, contract on v.

    The fixed point runs on the noise-path nodes up to the certified
    horizon (jump-refined nodes for levy noise).  A ball exit halves the
    horizon and retries up to five times.  Without an explicit rng the
    generator is seeded by SeedSequence([master_seed or spec.seed, path_id]).
    """
    validate_params(params)
    p = params.p
    x_norm = lp_norm(x, p)
    if M is None:
        M = 2.0 * max(x_norm, 1.0)
    if master_seed is None:
        master_seed = 0 if spec.seed is None else int(spec.seed)
    ss = np.random.SeedSequence([int(master_seed), int(path_id)])
    seed_word = int(ss.generate_state(1, dtype=np.uint64)[0])
    if rng is None:
        rng = np.random.default_rng(ss)
    Cval = _resolve_constant(params, C)

    w = generate_noise(spec, TimeGrid(params.T, params.nt), rng)
    w_norms = w.norms(p)
    mu_p = float(np.max(w_norms))
    budget = random_time_budget(x_norm, M, mu_p, Cval, params.grid.d, p, params.r, params.T)
    Ttilde = budget.Ttilde

    result = PathResult(
        path_id=path_id,
        seed=seed_word,
        family=spec.family,
        hurst=spec.hurst,
        mu_p=mu_p,
        Ttilde=Ttilde,
        converged=False,
        exit_reason="ball-exit",
        iterations=0,
        contraction_measured=None,
        contraction_predicted=None,
        residual=None,
    )
    if Ttilde <= 0.0:
        return result

    grid = params.grid
    for _ in range(1 + _MAX_BALL_RETRIES):
        mask = w.times <= Ttilde * (1.0 + 1e-12)
        nodes = w.times[mask]
        if len(nodes) < 2:
            Ttilde *= 0.5
            continue
        w_sub = w.coeffs[mask]
        u0 = heat_flow(x, nodes)
        trace = PicardTrace()
        trace.rho_predicted = stochastic_contraction(
            float(nodes[-1]), M, mu_p, Cval, grid.d, p, params.r
        )
        v = u0
        converged = False
        ball_exit = False
        for n in range(max_iter):
            trace.f_n.append(v.sup_norm(p))
            shifted = Trajectory(grid, nodes, v.coeffs + w_sub)
            G = mild_rhs(
                shifted,
                None,
                params,
                include_convection=include_convection,
                include_damping=include_damping,
            )
            new_coeffs = u0.coeffs + G.coeffs
            if not np.all(np.isfinite(new_coeffs)):
                ball_exit = True
                break
            v_next = Trajectory(grid, nodes, new_coeffs)
            if v_next.sup_norm(p) > M * (1.0 + 1e-12):
                ball_exit = True
                break
            Dn = Trajectory(grid, nodes, new_coeffs - v.coeffs).sup_norm(p)
            trace.D_n.append(Dn)
            v = v_next
            trace.iterations = n + 1
            if Dn < tol:
                converged = True
                break
        if ball_exit:
            Ttilde *= 0.5
            continue
        result.Ttilde = float(nodes[-1])
        result.iterations = trace.iterations
        result.contraction_predicted = trace.rho_predicted
        result.contraction_measured = trace.rho_measured
        result.trace = trace
        if not converged:
            result.exit_reason = "non-contraction"
            return result
        shifted = Trajectory(grid, nodes, v.coeffs + w_sub)
        G = mild_rhs(
            shifted,
            None,
            params,
            include_convection=include_convection,
            include_damping=include_damping,
        )
        resid = Trajectory(grid, nodes, v.coeffs - u0.coeffs - G.coeffs)
        result.residual = resid.sup_norm(p)
        trace.residual = result.residual
        trace.converged = True
        result.converged = True
        result.exit_reason = "converged"
        if keep_trajectories:
            result.v = v
            result.u = Trajectory(grid, nodes, v.coeffs + w_sub)
        return result
    return result


@dataclass
class EnsembleSummary:
    n_paths: int
    master_seed: int
    family: str
    fraction_converged: float
    Ttilde_quantiles: dict[float, float]
    mu_p_mean: float
    mu_p_max: float
    results: list[PathResult] = field(repr=False, default_factory=list)


def ensemble_run(
    x: SpectralField,
    spec: NoiseSpec,
    params: SolverParams,
    M: float | None = None,
    n_paths: int = 1,
    master_seed: int | None = None,
    *,
    C: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> EnsembleSummary:
    """Independent pathwise solves with per-path derived seeds.

    Path i uses the generator seeded by SeedSequence([master_seed, i]), so
    the ensemble is reproducible no matter how paths are scheduled;
    aggregation is ordered by path index.  Per-path failures are recorded,
    not raised.
    """
    if n_paths < 1:
        raise ValueError(f"need at least one path, got n_paths={n_paths}")
    if master_seed is None:
        master_seed = 0 if spec.seed is None else int(spec.seed)
    results = []
    for i in range(n_paths):
        results.append(
            pathwise_solve(
                x,
                spec,
                params,
                M=M,
                tol=tol,
                C=C,
                master_seed=master_seed,
                max_iter=max_iter,
                path_id=i,
                keep_trajectories=False,
            )
        )
    tt = np.array([res.Ttilde for res in results])
    qs = {q: float(np.quantile(tt, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
    mus = np.array([res.mu_p for res in results])
    return EnsembleSummary(
        n_paths=n_paths,
        master_seed=int(master_seed),
        family=spec.family,
        fraction_converged=float(np.mean([res.converged for res in results])),
        Ttilde_quantiles=qs,
        mu_p_mean=float(np.mean(mus)),
        mu_p_max=float(np.max(mus)),
        results=results,
    )


ENSEMBLE_CSV_HEADER = [
    "path_id",
    "seed",
    "family",
    "H",
    "mu_p",
    "Ttilde",
    "converged",
    "iters",
    "contraction_measured",
    "contraction_predicted",
    "residual",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_ensemble_csv(path, results: list[PathResult]) -> None:
    """Per-path rows in the documented schema (floats via repr: round-trip exact)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENSEMBLE_CSV_HEADER)
        for res in results:
            writer.writerow(
                [
                    res.path_id,
                    res.seed,
                    res.family,
                    _fmt(res.hurst),
                    _fmt(res.mu_p),
                    _fmt(res.Ttilde),
                    str(res.converged).lower(),
                    res.iterations,
                    _fmt(res.contraction_measured),
                    _fmt(res.contraction_predicted),
                    _fmt(res.residual),
                ]
            )
