"""Self-checks run by ``bpsvortex verify``.

Each check returns ``(name, passed, detail)``. Two mutation hooks exist so
the suite itself can be tested: ``corrupt-matrix`` perturbs one entry of the
reference matrix the Cholesky factor is compared against, and
``drop-exponential`` removes the exponential term from the analytic gradient.
"""
from __future__ import annotations

import numpy as np
from scipy import integrate as quadrature

from . import plane as P
from . import torus as T
from .coupling import (
    CouplingParams,
    VortexCounts,
    build_matrix,
    check_existence,
    cholesky,
    compute_q,
    eigenvalues,
    forcing,
    inverse_closed_form,
)
from .sources import VortexSpec, planar_h

MUTATIONS = ("corrupt-matrix", "drop-exponential")


def random_params(rng, max_N: int = 16) -> CouplingParams:
    return CouplingParams(
        e=float(rng.uniform(0.2, 3.0)),
        g=float(rng.uniform(0.2, 3.0)),
        v=float(rng.uniform(0.3, 2.0)),
        N=int(rng.integers(1, max_N + 1)),
    )


def check_linear_algebra(draws: int = 200, seed: int = 0, mutate: str | None = None):
    rng = np.random.default_rng(seed)
    worst = {"cholesky": 0.0, "inverse": 0.0, "eigen": 0.0}
    for _ in range(draws):
        params = random_params(rng)
        A = build_matrix(params, rescaled=bool(rng.integers(2)))
        dense = A.dense
        if mutate == "corrupt-matrix" and A.N > 1:
            dense = dense.copy()
            dense[0, 1] += 1e-3 * abs(dense).max()
        fac = cholesky(A)
        Tm = fac.T
        scale = abs(dense).max()
        worst["cholesky"] = max(worst["cholesky"], abs(Tm.T @ Tm - dense).max() / scale)
        inv = inverse_closed_form(A)
        worst["inverse"] = max(worst["inverse"], abs(inv - np.linalg.inv(A.dense)).max() / abs(inv).max())
        lam = np.linalg.eigvalsh(A.dense)
        l1, lN = eigenvalues(A)
        expected = np.sort(np.r_[l1, np.full(A.N - 1, lN)])
        worst["eigen"] = max(worst["eigen"], abs(lam - expected).max() / lam.max())
    return [
        ("cholesky T^tT = A", worst["cholesky"] <= 1e-12, f"max rel err {worst['cholesky']:.2e}"),
        ("closed-form inverse", worst["inverse"] <= 1e-10, f"max rel err {worst['inverse']:.2e}"),
        ("eigenvalue formulas", worst["eigen"] <= 1e-10, f"max rel err {worst['eigen']:.2e}"),
    ]


def check_existence_equivalence(draws: int = 500, seed: int = 1):
    rng = np.random.default_rng(seed)
    bad = 0
    q_err = 0.0
    for _ in range(draws):
        params = random_params(rng, 6)
        counts = VortexCounts(tuple(rng.integers(0, 6, size=params.N)))
        area = float(rng.uniform(1.0, 200.0))
        rep = check_existence(params, area, counts)
        if not rep.q_consistent:
            bad += 1
        A = build_matrix(params)
        q_dense = -area * np.linalg.solve(A.dense, forcing(params, area, counts))
        q = compute_q(params, area, counts)
        q_err = max(q_err, abs(q - q_dense).max() / max(abs(q_dense).max(), 1.0))
        if rep.satisfied and not counts.n_total < rep.aggregate_bound:
            bad += 1
    return [
        ("existence <=> q > 0", bad == 0, f"{bad} inconsistent reports"),
        ("q = -|Omega| A^-1 F", q_err <= 1e-9, f"max rel err {q_err:.2e}"),
    ]


def _fd_gradient_error(func, grad_fn, v, dA, rng, points: int = 20, eps: float = 1e-3):
    """Worst pointwise relative gap between ``grad_fn`` and fourth-order central differences of ``func``."""
    g = grad_fn(v)
    worst = 0.0
    for _ in range(points):
        idx = (int(rng.integers(v.shape[0])),) + tuple(int(rng.integers(m)) for m in v.shape[1:])

        def shifted(step):
            x = v.copy()
            x[idx] += step
            return func(x)

        fd = (8 * (shifted(eps) - shifted(-eps)) - (shifted(2 * eps) - shifted(-2 * eps))) / (12 * eps * dA)
        worst = max(worst, abs(fd - g[idx]) / max(abs(g[idx]), abs(fd), 1e-8))
    return worst


def check_gradients(configs: int = 10, resolution: int = 64, seed: int = 2, mutate: str | None = None):
    rng = np.random.default_rng(seed)
    worst_t = worst_p = 0.0
    for c in range(configs):
        params = CouplingParams(float(rng.uniform(1, 2.5)), float(rng.uniform(0.5, 1.5)), 1.0, int(rng.integers(1, 4)))
        L = 8.0
        pts = [[tuple(rng.uniform(0, L, 2))] for _ in range(params.N)]
        tp = T.build_torus_problem(params, VortexSpec.torus(pts, (L, L)), resolution)
        v = 0.3 * T.random_start(tp.grid, params.N, seed + c)

        def tgrad(x, tp=tp):
            g = T.gradient(tp, x)
            if mutate == "drop-exponential":
                g = g - tp.factors.apply_T(T._exponentials(tp, x)[0])
            return g

        worst_t = max(worst_t, _fd_gradient_error(lambda x: T.functional(tp, x), tgrad, v, tp.grid.cell_area, rng))
        spec = VortexSpec.plane([[tuple(rng.uniform(-1, 1, 2))] for _ in range(params.N)])
        pp = P.build_plane_problem(params, spec, resolution)
        w = 0.3 * P.random_start(pp.grid, params.N, seed + c)

        def pgrad(x, pp=pp):
            g = P.gradient_plane(pp, x)
            if mutate == "drop-exponential":
                g = g - pp.factors.apply_T(pp.exp_u0 * np.exp(pp.factors.apply_Tt(x)))
            return g

        worst_p = max(worst_p, _fd_gradient_error(lambda x: P.functional_plane(pp, x), pgrad, w, pp.grid.cell_area, rng))
    return [
        ("torus gradient vs central differences", worst_t <= 1e-6, f"max rel err {worst_t:.2e}"),
        ("plane gradient vs central differences", worst_p <= 1e-6, f"max rel err {worst_p:.2e}"),
    ]


def h_integral(spec: VortexSpec, mu: float, species: int, center=(0.0, 0.0)) -> float:
    """``int_{R^2} h_i`` by nested adaptive quadrature in polar coordinates about ``center``."""
    cx, cy = center

    def ring(r):
        f = lambda t: planar_h(spec, mu, cx + r * np.cos(t), cy + r * np.sin(t))[species]
        return r * quadrature.quad(f, 0.0, 2 * np.pi, epsabs=0, epsrel=1e-11, limit=200)[0]

    radii = [np.hypot(px - cx, py - cy) for px, py in spec.points[species]]
    breaks = sorted(set([0.0] + radii + [max(radii, default=0.0) + 10 * np.sqrt(mu)]))
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        total += quadrature.quad(ring, a, b, epsabs=0, epsrel=1e-11, limit=200)[0]
    total += quadrature.quad(ring, breaks[-1], np.inf, epsabs=0, epsrel=1e-11, limit=200)[0]
    return total


def check_source_mass(layouts: int = 3, seed: int = 3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(layouts):
        N = int(rng.integers(1, 4))
        pts = [[tuple(rng.uniform(-3, 3, 2)) for _ in range(int(rng.integers(1, 3)))] for _ in range(N)]
        spec = VortexSpec.plane(pts)
        mu = float(rng.uniform(0.5, 8.0))
        for i in range(N):
            val = h_integral(spec, mu, i)
            worst = max(worst, abs(val - 4 * np.pi * len(pts[i])) / (4 * np.pi * len(pts[i])))
    return [("int h_i = 4 pi n_i", worst <= 1e-6, f"max rel err {worst:.2e}")]


def check_decoupling(resolution: int = 48):
    """At e^2 = g^2/N the coupled solve equals independent scalar solves."""
    g, N, L = 2.0, 3, 9.0
    params = CouplingParams(g / np.sqrt(N), g, 1.0, N)
    pts = [[(2.0, 2.5)], [(6.0, 4.0), (3.0, 7.0)], []]
    opts = T.SolveOptions(tol_rel=1e-12)
    prob = T.build_torus_problem(params, VortexSpec.torus(pts, (L, L)), resolution)
    u = T.recover_u(prob, T.minimize(prob, opts)[0])
    # a single species with e = g = g_N / sqrt(N) has the same diagonal entry g^2 / 2N
    scalar = CouplingParams(g / np.sqrt(N), g / np.sqrt(N), 1.0, 1)
    worst = 0.0
    for i in range(N):
        sp = T.build_torus_problem(scalar, VortexSpec.torus([pts[i]], (L, L)), resolution)
        ui = T.recover_u(sp, T.minimize(sp, opts)[0])[0]
        worst = max(worst, abs(ui - u[i]).max())
    return [("decoupling at e^2 = g^2/N", worst <= 1e-8, f"sup diff {worst:.2e}")]


def check_flux_identity(resolution: int = 64):
    params = CouplingParams(2.0, 1.0, 1.0, 2)
    L = 2 * np.pi
    prob = T.build_torus_problem(params, VortexSpec.torus([[(1.0, 2.0)], []], (L, L)), resolution)
    v, rep = T.minimize(prob)
    return [
        ("torus solve converges", rep.converged, rep.status),
        ("J_i = q_i at the minimizer", rep.constraint_residuals.max() <= 1e-6, f"{rep.constraint_residuals.max():.2e}"),
        ("flux_i = 2 pi n_i", rep.flux_errors.max() <= 1e-6, f"{rep.flux_errors.max():.2e}"),
    ]


def run_all(mutate: str | None = None):
    if mutate is not None and mutate not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutate!r}")
    results = []
    results += check_linear_algebra(mutate=mutate)
    results += check_existence_equivalence()
    results += check_gradients(mutate=mutate)
    results += check_source_mass()
    results += check_decoupling()
    results += check_flux_identity()
    return results
