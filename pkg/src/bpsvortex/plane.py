"""Planar vortices on a truncated Dirichlet box, plus exponential decay fits.

In normalized variables (vacuum ``u = 0``, coupling matrix scaled by ``v^2``)
the unknown ``v = L U`` with ``u = u0 + U`` minimizes

    I(v) = sum_i 1/2 |grad v_i|^2 + (e^{u0_i}, e^{w_i} - 1 - w_i)
           + (e^{u0_i} - 1, w_i) + (g_i, v_i),     w = T^t v,  g = L h.

The background ``u0`` decays only like ``-mu n_i / |x|^2``, so by default the
box boundary carries ``U = -u0`` (``u = 0``) instead of ``U = 0``; that keeps
the truncation error exponentially small.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import grid as G
from .coupling import (
    CholeskyFactors,
    CouplingMatrix,
    CouplingParams,
    build_matrix,
    cholesky,
    eigenvalues,
    inverse_closed_form,
)
from .observables import flux, vorticity
from .optimize import lbfgs
from .sources import VortexSpec, choose_mu, planar_background, planar_h
from .torus import DIVERGED, EXP_CLAMP, SolveOptions, SolveReport

BOX_MARGIN_DEFAULT = 15.0
BOX_MARGIN_MIN = 10.0


def decay_length(params: CouplingParams) -> float:
    return np.sqrt(params.N) / (params.g * params.v)


def default_half_width(params: CouplingParams, spec: VortexSpec) -> float:
    return spec.r_far + BOX_MARGIN_DEFAULT * decay_length(params)


@dataclass
class PlaneProblem:
    params: CouplingParams
    coupling: CouplingMatrix
    factors: CholeskyFactors
    spec: VortexSpec
    mu: float
    grid: G.Grid
    u0: np.ndarray
    h: np.ndarray
    g_sources: np.ndarray
    H_fields: np.ndarray
    boundary: np.ndarray

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def kappa(self) -> float:
        return eigenvalues(self.coupling)[1]

    @property
    def exp_u0(self) -> np.ndarray:
        return np.exp(self.u0)


def _boundary_term(spec: VortexSpec, grid: G.Grid, mu: float, factors: CholeskyFactors) -> np.ndarray:
    """Ghost-node contribution of ``v_ghost = -L u0_ghost`` to the 5-point Laplacian."""
    x, y = grid.axes
    L = grid.half_width
    h1, h2 = grid.spacing
    m1, m2 = grid.shape
    out = np.zeros((spec.N, m1, m2))
    gx_lo, gx_hi = -L - 0.5 * h1, L + 0.5 * h1
    gy_lo, gy_hi = -L - 0.5 * h2, L + 0.5 * h2

    def ghost(xs, ys):
        return -factors.apply_L(planar_background(spec, mu, xs, ys))

    out[:, 0, :] += ghost(np.full(m2, gx_lo), y) / h1**2
    out[:, -1, :] += ghost(np.full(m2, gx_hi), y) / h1**2
    out[:, :, 0] += ghost(x, np.full(m1, gy_lo)) / h2**2
    out[:, :, -1] += ghost(x, np.full(m1, gy_hi)) / h2**2
    return out


def build_plane_problem(
    params: CouplingParams,
    spec: VortexSpec,
    resolution,
    half_width: float | None = None,
    mu: float | None = None,
    boundary_lift: bool = True,
) -> PlaneProblem:
    if spec.is_torus:
        raise ValueError("plane problem needs a plane vortex spec")
    if spec.N != params.N:
        raise ValueError(f"vortex spec has {spec.N} species, params expect {params.N}")
    min_width = spec.r_far + BOX_MARGIN_MIN * decay_length(params)
    if half_width is None:
        half_width = default_half_width(params, spec)
    elif half_width < min_width:
        raise ValueError(f"box half width {half_width} is below R_far + 10 decay lengths = {min_width:.4g}")
    m1, m2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    grid = G.Grid.box(half_width, m1, m2)
    A = build_matrix(params, rescaled=True)
    factors = cholesky(A)
    if mu is None:
        mu = max(1.0, choose_mu(spec, A))
    X, Y = grid.coords
    u0 = planar_background(spec, mu, X, Y)
    h = planar_h(spec, mu, X, Y)
    H = np.tensordot(inverse_closed_form(A), h, axes=(1, 0))
    if spec.counts().n_total and H.max() >= 0.5:
        raise ValueError(f"mu={mu} gives max H = {H.max():.3f} >= 1/2 on the grid")
    boundary = _boundary_term(spec, grid, mu, factors) if boundary_lift else np.zeros((params.N,) + grid.shape)
    return PlaneProblem(
        params=params,
        coupling=A,
        factors=factors,
        spec=spec,
        mu=float(mu),
        grid=grid,
        u0=u0,
        h=h,
        g_sources=factors.apply_L(h),
        H_fields=H,
        boundary=boundary,
    )


def _functional_and_gradient(problem: PlaneProblem, v: np.ndarray):
    grid = problem.grid
    lap = G.laplacian(v, grid)
    w = problem.factors.apply_Tt(v)
    overflow = bool(np.any(problem.u0 + w > EXP_CLAMP))
    w_c = np.minimum(w, EXP_CLAMP)
    e0 = problem.exp_u0
    ew1 = np.expm1(w_c)
    density = (
        e0 * (ew1 - w_c)
        + (e0 - 1.0) * w_c
        + problem.g_sources * v
        - problem.boundary * v
        - 0.5 * v * lap
    )
    value = float(np.sum(density) * grid.cell_area)
    # E - 1 = e^{u0}(e^w - 1) + (e^{u0} - 1)
    Em1 = e0 * ew1 + (e0 - 1.0)
    grad = -lap - problem.boundary + problem.factors.apply_T(Em1) + problem.g_sources
    return value, grad, overflow


def functional_plane(problem: PlaneProblem, v: np.ndarray) -> float:
    return _functional_and_gradient(problem, v)[0]


def gradient_plane(problem: PlaneProblem, v: np.ndarray) -> np.ndarray:
    return _functional_and_gradient(problem, v)[1]


def recover_u(problem: PlaneProblem, v: np.ndarray) -> np.ndarray:
    """Normalized ``u`` (vacuum 0); the physical ``|phi_i|^2`` is ``v^2 e^{u_i}``."""
    return problem.u0 + problem.factors.apply_Tt(v)


def random_start(grid: G.Grid, N: int, seed: int, amplitude: float = 1.0, modes: int = 6) -> np.ndarray:
    """Smooth random fields vanishing on the box boundary."""
    rng = np.random.default_rng(seed)
    X, Y = grid.coords
    L = grid.half_width
    out = np.zeros((N,) + grid.shape)
    for i in range(N):
        for j1 in range(1, modes + 1):
            for j2 in range(1, modes + 1):
                c = rng.normal() * amplitude / (j1 * j1 + j2 * j2)
                out[i] += c * np.sin(j1 * np.pi * (X + L) / (2 * L)) * np.sin(j2 * np.pi * (Y + L) / (2 * L))
    return out


def minimize_plane(problem: PlaneProblem, options: SolveOptions | None = None, v0: np.ndarray | None = None):
    options = options or SolveOptions()
    grid = problem.grid
    start = time.perf_counter()
    if v0 is not None:
        x0 = np.array(v0, dtype=float)
    elif options.init == "zero":
        x0 = np.zeros((problem.N,) + grid.shape)
    elif options.init == "random":
        x0 = random_start(grid, problem.N, options.seed)
    else:
        raise ValueError(f"unknown init {options.init!r}")
    dA = grid.cell_area

    def inner(a, b):
        return float(np.vdot(a, b)) * dA

    gtol = options.tol_rel * np.sqrt(problem.N * grid.area)
    res = lbfgs(
        lambda x: _functional_and_gradient(problem, x),
        x0,
        inner=inner,
        precond=G.shifted_inverse(grid, problem.kappa),
        gtol=gtol,
        max_iter=options.max_iter,
        memory=options.memory,
    )
    v = res.x
    _, _, overflow = _functional_and_gradient(problem, v)
    u = recover_u(problem, v)
    fl = flux(vorticity(u, problem.params, normalized=True), grid)
    n = problem.spec.counts().array
    report = SolveReport(
        converged=res.converged and not overflow,
        iterations=res.iterations,
        grad_norm=res.grad_norm,
        functional_value=float(res.f),
        constraint_residuals=np.zeros(0),
        flux_errors=np.abs(fl - 2 * np.pi * n) / (2 * np.pi * np.maximum(n, 1)),
        wall_time=time.perf_counter() - start,
        status=DIVERGED if overflow else res.status,
        tolerance=gtol,
        mean_drift=G.mean(v, grid),
        overflow=overflow,
        n_evals=res.n_evals,
    )
    return v, report


@dataclass
class DecayFit:
    rate: float
    r_squared: float
    residual: float
    n_annuli: int


def fit_decay(u: np.ndarray, grid: G.Grid, window, center=(0.0, 0.0), annulus_width: float | None = None) -> DecayFit:
    """Least-squares exponential rate of ``max_{annulus} |u(x)|`` (Euclidean norm over species).

    ``u`` may be a single field or a stack; the fit is of ``log`` of the
    per-annulus maximum against the annulus mid-radius.
    """
    r_min, r_max = window
    u = np.asarray(u, dtype=float)
    if u.ndim == 2:
        u = u[None]
    norm = np.sqrt(np.sum(u**2, axis=0))
    X, Y = grid.coords
    r = np.hypot(X - center[0], Y - center[1])
    width = annulus_width or 2 * max(grid.spacing)
    edges = np.arange(r_min, r_max + 0.5 * width, width)
    if len(edges) < 2:
        raise ValueError("decay window is empty")
    idx = np.digitize(r.ravel(), edges) - 1
    flat = norm.ravel()
    radii, values = [], []
    for k in range(len(edges) - 1):
        sel = idx == k
        if not np.any(sel):
            continue
        peak = flat[sel].max()
        if peak > 0:
            radii.append(0.5 * (edges[k] + edges[k + 1]))
            values.append(np.log(peak))
    if len(radii) < 8:
        raise ValueError(f"decay window has {len(radii)} usable annuli, need at least 8")
    radii = np.asarray(radii)
    values = np.asarray(values)
    slope, intercept = np.polyfit(radii, values, 1)
    pred = slope * radii + intercept
    ss_res = float(np.sum((values - pred) ** 2))
    ss_tot = float(np.sum((values - values.mean()) ** 2))
    return DecayFit(
        rate=float(-slope),
        r_squared=1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        residual=float(np.sqrt(ss_res / len(radii))),
        n_annuli=len(radii),
    )
