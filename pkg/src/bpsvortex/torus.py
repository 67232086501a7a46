"""Doubly periodic vortices by direct minimization of the convex action.

With ``u = u0 + U`` and ``U = T^t v`` the system becomes the Euler-Lagrange
equation of

    I(v) = sum_i int 1/2 |grad v_i|^2 + exp(u0_i + w_i) dx - sum_i p_i mean(v_i),
    w = T^t v,

whose unique minimizer exists iff every ``q_i > 0``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import grid as G
from .coupling import (
    CholeskyFactors,
    CouplingMatrix,
    CouplingParams,
    build_matrix,
    check_existence,
    cholesky,
    compute_q,
    eigenvalues,
    forcing,
)
from .observables import flux, vorticity
from .optimize import lbfgs
from .sources import BackgroundField, VortexSpec, torus_background, torus_delta_sources

EXP_CLAMP = 700.0
DRIFT_LIMIT = 1e3
DIVERGED = "existence-condition-violated-or-underresolved"


@dataclass
class SolveOptions:
    tol_rel: float = 1e-10
    max_iter: int = 5000
    seed: int = 0
    init: str = "zero"
    memory: int = 12
    drift_limit: float = DRIFT_LIMIT


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    grad_norm: float
    functional_value: float
    constraint_residuals: np.ndarray
    flux_errors: np.ndarray
    wall_time: float
    status: str = ""
    tolerance: float = 0.0
    mean_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    overflow: bool = False
    n_evals: int = 0


@dataclass
class TorusProblem:
    params: CouplingParams
    coupling: CouplingMatrix
    factors: CholeskyFactors
    spec: VortexSpec
    background: BackgroundField
    grid: G.Grid
    f: np.ndarray
    p: np.ndarray
    q: np.ndarray
    sources: np.ndarray

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def kappa(self) -> float:
        # smallest eigenvalue of A v^2
        return eigenvalues(self.coupling)[1] * self.params.v**2


def build_torus_problem(
    params: CouplingParams, spec: VortexSpec, resolution, sigma: float | None = None
) -> TorusProblem:
    if not spec.is_torus:
        raise ValueError("torus problem needs a torus vortex spec")
    if spec.N != params.N:
        raise ValueError(f"vortex spec has {spec.N} species, params expect {params.N}")
    m1, m2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    grid = G.Grid.torus(*spec.periods, m1, m2)
    A = build_matrix(params)
    factors = cholesky(A)
    counts = spec.counts()
    f = forcing(params, grid.area, counts)
    p = -grid.area * (factors.L @ f)
    return TorusProblem(
        params=params,
        coupling=A,
        factors=factors,
        spec=spec,
        background=torus_background(spec, grid, sigma),
        grid=grid,
        f=f,
        p=p,
        q=compute_q(params, grid.area, counts),
        sources=torus_delta_sources(spec, grid, sigma),
    )


def _exponentials(problem: TorusProblem, v: np.ndarray):
    arg = problem.background.samples + problem.factors.apply_Tt(v)
    overflow = bool(np.any(arg > EXP_CLAMP))
    return np.exp(np.minimum(arg, EXP_CLAMP)), overflow


def _functional_and_gradient(problem: TorusProblem, v: np.ndarray):
    grid = problem.grid
    lap = G.laplacian(v, grid)
    E, overflow = _exponentials(problem, v)
    kinetic = -0.5 * np.sum(v * lap) * grid.cell_area
    means = G.mean(v, grid)
    value = kinetic + np.sum(E) * grid.cell_area - float(problem.p @ means)
    lf = problem.factors.L @ problem.f
    grad = -lap + problem.factors.apply_T(E) + lf[:, None, None]
    return value, grad, overflow


def functional(problem: TorusProblem, v: np.ndarray) -> float:
    return _functional_and_gradient(problem, v)[0]


def gradient(problem: TorusProblem, v: np.ndarray) -> np.ndarray:
    """L2 gradient of the action; zero exactly at a discrete solution."""
    return _functional_and_gradient(problem, v)[1]


def constraint_values(problem: TorusProblem, v: np.ndarray) -> np.ndarray:
    """``J_i(v) = int exp(u0_i + w_i)``; equals ``q_i`` at the minimizer."""
    E, _ = _exponentials(problem, v)
    return G.integrate(E, problem.grid)


def recover_u(problem: TorusProblem, v: np.ndarray) -> np.ndarray:
    return problem.background.samples + problem.factors.apply_Tt(v)


def random_start(grid: G.Grid, N: int, seed: int, amplitude: float = 1.0, modes: int = 4) -> np.ndarray:
    """Smooth random fields with a handful of low Fourier modes."""
    rng = np.random.default_rng(seed)
    X, Y = grid.coords
    L1, L2 = grid.lengths
    out = np.zeros((N,) + grid.shape)
    for i in range(N):
        out[i] += amplitude * rng.normal()
        for k1 in range(-modes, modes + 1):
            for k2 in range(0, modes + 1):
                if k1 == 0 and k2 == 0:
                    continue
                c = rng.normal(size=2) * amplitude / (1 + k1 * k1 + k2 * k2)
                ph = 2 * np.pi * (k1 * X / L1 + k2 * Y / L2)
                out[i] += c[0] * np.cos(ph) + c[1] * np.sin(ph)
    return out


def initial_guess(problem: TorusProblem, options: SolveOptions) -> np.ndarray:
    if options.init == "zero":
        return np.zeros((problem.N,) + problem.grid.shape)
    if options.init == "random":
        return random_start(problem.grid, problem.N, options.seed)
    raise ValueError(f"unknown init {options.init!r}")


def minimize(
    problem: TorusProblem, options: SolveOptions | None = None, v0: np.ndarray | None = None, force: bool = False
):
    """Return ``(v, report)``. Refuses when the existence condition fails unless ``force``."""
    options = options or SolveOptions()
    grid = problem.grid
    existence = check_existence(problem.params, grid.area, problem.spec.counts())
    if not existence.satisfied and not force:
        raise ValueError("existence condition violated; pass force=True to attempt the solve anyway")
    start = time.perf_counter()
    x0 = initial_guess(problem, options) if v0 is None else np.array(v0, dtype=float)
    precond = G.shifted_inverse(grid, problem.kappa)
    dA = grid.cell_area

    def inner(a, b):
        return float(np.vdot(a, b)) * dA

    def stop(x, it):
        if np.max(np.abs(G.mean(x, grid))) > options.drift_limit:
            return DIVERGED
        return None

    gtol = options.tol_rel * np.sqrt(problem.N * grid.area)
    res = lbfgs(
        lambda x: _functional_and_gradient(problem, x),
        x0,
        inner=inner,
        precond=precond,
        gtol=gtol,
        max_iter=options.max_iter,
        memory=options.memory,
        stop=stop,
    )
    v = res.x
    _, _, overflow = _functional_and_gradient(problem, v)
    status = res.status
    if overflow or res.overflow:
        status = DIVERGED
    converged = res.converged and not overflow
    J = constraint_values(problem, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        cres = np.abs(J - problem.q) / np.abs(problem.q)
    u = recover_u(problem, v)
    fl = flux(vorticity(u, problem.params, normalized=False), grid)
    n = problem.spec.counts().array
    report = SolveReport(
        converged=converged,
        iterations=res.iterations,
        grad_norm=res.grad_norm,
        functional_value=float(res.f),
        constraint_residuals=cres,
        flux_errors=np.abs(fl - 2 * np.pi * n) / (2 * np.pi * np.maximum(n, 1)),
        wall_time=time.perf_counter() - start,
        status=status,
        tolerance=gtol,
        mean_drift=G.mean(v, grid),
        overflow=overflow or res.overflow,
        n_evals=res.n_evals,
    )
    return v, report
