"""Gauge-invariant quantities reconstructed from the log-moduli ``u_i = ln |phi_i|^2``.

Torus solutions carry the physical ``u`` (vacuum ``2 ln v``); plane solutions
carry the normalized ``u`` (vacuum ``0``, ``|phi|^2 = v^2 e^u``). Functions
that care take a ``normalized`` flag.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import CouplingParams, build_matrix
from .grid import Grid, gradient, integrate, laplacian
from .sources import VortexSpec


@dataclass
class Observables:
    B12: np.ndarray
    flux: np.ndarray
    tension: float
    covariant_density: np.ndarray
    residual_S: np.ndarray
    phi_abs: np.ndarray


def phi_squared(u: np.ndarray, params: CouplingParams, normalized: bool) -> np.ndarray:
    return params.v**2 * np.exp(u) if normalized else np.exp(u)


def vorticity(u: np.ndarray, params: CouplingParams, normalized: bool = False) -> np.ndarray:
    """``B^i_12 = [g^2/N (v^2 - |phi_i|^2) + (e^2 - g^2/N)(v^2 - mean_j |phi_j|^2)] / 4``."""
    N, e2, g2, v2 = params.N, params.e**2, params.g**2, params.v**2
    phi2 = phi_squared(u, params, normalized)
    return 0.25 * ((g2 / N) * (v2 - phi2) + (e2 - g2 / N) * (v2 - phi2.mean(axis=0)))


def flux(B12: np.ndarray, grid: Grid) -> np.ndarray:
    return np.atleast_1d(integrate(B12, grid))


def tension(flux_values, params: CouplingParams) -> float:
    return float(params.v**2 / params.N * np.sum(flux_values))


def covariant_density(u: np.ndarray, grid: Grid, params: CouplingParams, normalized: bool = False) -> np.ndarray:
    """``sum_l |(d_l - i B_l) phi_i|^2 = |phi_i|^2 |grad u_i|^2 / 2``."""
    ux, uy = gradient(u, grid)
    return 0.5 * phi_squared(u, params, normalized) * (ux**2 + uy**2)


def core_mask(spec: VortexSpec, grid: Grid, radius: float | None = None) -> np.ndarray:
    """True for cells within ``radius`` (default ``3h``) of any vortex (periodic distance on the torus)."""
    if radius is None:
        radius = 3 * max(grid.spacing)
    X, Y = grid.coords
    mask = np.zeros(grid.shape, dtype=bool)
    for px, py in spec.all_points():
        dx, dy = X - px, Y - py
        if grid.is_torus:
            L1, L2 = grid.periods
            dx = dx - L1 * np.round(dx / L1)
            dy = dy - L2 * np.round(dy / L2)
        mask |= dx**2 + dy**2 <= radius**2
    return mask


def residual_system(
    u: np.ndarray,
    spec: VortexSpec,
    grid: Grid,
    params: CouplingParams,
    normalized: bool | None = None,
    sources: np.ndarray | None = None,
    mask_radius: float | None = None,
) -> np.ndarray:
    """Per-species discrete L2 norm of ``Lap u_i - sum_j a_ij (e^{u_j} - vac)`` off the cores.

    On the torus ``sources`` (the discrete delta field used to build the
    background) is subtracted when given, since a mollified delta has tails
    reaching beyond the core mask.
    """
    if normalized is None:
        normalized = not grid.is_torus
    A = build_matrix(params, rescaled=normalized).dense
    vac = 1.0 if normalized else params.v**2
    res = laplacian(u, grid) - np.tensordot(A, np.exp(u) - vac, axes=(1, 0))
    if sources is not None:
        res = res - sources
    keep = ~core_mask(spec, grid, mask_radius)
    return np.sqrt(np.sum(res[:, keep] ** 2, axis=1) * grid.cell_area)


def winding_phase(spec: VortexSpec, X, Y) -> np.ndarray:
    """``sum_s arg(z - p_is)`` per species."""
    out = np.zeros((spec.N,) + np.shape(X))
    for i in range(spec.N):
        for px, py in spec.points[i]:
            out[i] += np.arctan2(Y - py, X - px)
    return out


def reconstruct_phi_plane(u: np.ndarray, spec: VortexSpec, grid: Grid, params: CouplingParams):
    """Complex Higgs fields and gauge potentials of a plane solution.

    Returns masked arrays ``(phi, B1, B2)``; cells within ``3h`` of a vortex are masked.
    """
    X, Y = grid.coords
    theta = winding_phase(spec, X, Y)
    phi = params.v * np.exp(0.5 * u + 1j * theta)
    # analytic gradient of the phase, finite differences for u
    tx = np.zeros_like(u)
    ty = np.zeros_like(u)
    for i in range(spec.N):
        for px, py in spec.points[i]:
            r2 = (X - px) ** 2 + (Y - py) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                tx[i] += -(Y - py) / r2
                ty[i] += (X - px) / r2
    h1, h2 = grid.spacing
    ux = np.gradient(u, h1, axis=-2)
    uy = np.gradient(u, h2, axis=-1)
    # B = -2i dbar ln phi  =>  B1 = uy/2 + theta_x,  B2 = -ux/2 + theta_y
    B1 = 0.5 * uy + tx
    B2 = -0.5 * ux + ty
    mask = np.broadcast_to(core_mask(spec, grid), u.shape)
    return (
        np.ma.array(phi, mask=mask),
        np.ma.array(B1, mask=mask),
        np.ma.array(B2, mask=mask),
    )


def compute_observables(
    u: np.ndarray,
    spec: VortexSpec,
    grid: Grid,
    params: CouplingParams,
    normalized: bool | None = None,
    sources: np.ndarray | None = None,
) -> Observables:
    if normalized is None:
        normalized = not grid.is_torus
    B = vorticity(u, params, normalized)
    fl = flux(B, grid)
    return Observables(
        B12=B,
        flux=fl,
        tension=tension(fl, params),
        covariant_density=covariant_density(u, grid, params, normalized),
        residual_S=residual_system(u, spec, grid, params, normalized, sources),
        phi_abs=np.sqrt(phi_squared(u, params, normalized)),
    )
