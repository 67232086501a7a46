"""Vortex locations and the singular background functions built from them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .coupling import CouplingMatrix, VortexCounts, inverse_closed_form
from .grid import Grid, mean

# exp() underflows to exactly 0 below this
HIT_SENTINEL = -746.0


@dataclass(frozen=True)
class VortexSpec:
    """Vortex positions per species; repeated points encode multiplicity.

    ``periods`` is ``None`` for the plane; on the torus all points are reduced
    into the fundamental cell.
    """

    points: tuple
    periods: tuple[float, float] | None = None

    def __post_init__(self):
        pts = []
        for species in self.points:
            arr = np.asarray(species, dtype=float).reshape(-1, 2)
            if not np.all(np.isfinite(arr)):
                raise ValueError("vortex coordinates must be finite")
            if self.periods is not None:
                arr = np.mod(arr, np.asarray(self.periods, dtype=float))
            pts.append(tuple(map(tuple, arr)))
        object.__setattr__(self, "points", tuple(pts))
        if self.periods is not None:
            object.__setattr__(self, "periods", tuple(float(L) for L in self.periods))

    @classmethod
    def torus(cls, points, periods) -> "VortexSpec":
        return cls(tuple(points), tuple(periods))

    @classmethod
    def plane(cls, points) -> "VortexSpec":
        return cls(tuple(points), None)

    @property
    def N(self) -> int:
        return len(self.points)

    @property
    def is_torus(self) -> bool:
        return self.periods is not None

    def counts(self) -> VortexCounts:
        return VortexCounts(tuple(len(p) for p in self.points))

    def species_array(self, i: int) -> np.ndarray:
        return np.asarray(self.points[i], dtype=float).reshape(-1, 2)

    def all_points(self) -> np.ndarray:
        arrs = [self.species_array(i) for i in range(self.N)]
        return np.concatenate(arrs) if arrs else np.zeros((0, 2))

    @property
    def r_far(self) -> float:
        pts = self.all_points()
        return float(np.max(np.hypot(pts[:, 0], pts[:, 1]))) if len(pts) else 0.0

    def translated(self, offset) -> "VortexSpec":
        off = np.asarray(offset, dtype=float)
        return VortexSpec(tuple(self.species_array(i) + off for i in range(self.N)), self.periods)


@dataclass
class BackgroundField:
    samples: np.ndarray
    mean: np.ndarray
    kind: str
    mollifier_sigma: float = 0.0


def _source_coefficients(spec: VortexSpec, grid: Grid, sigma: float) -> np.ndarray:
    """Full-FFT-layout coefficients of ``(4 pi/|Omega|) sum_s exp(-i k.p) m(k)`` per species."""
    m1, m2 = grid.shape
    h1, h2 = grid.spacing
    k1 = 2 * np.pi * np.fft.fftfreq(m1, d=h1)[:, None]
    k2 = 2 * np.pi * np.fft.fftfreq(m2, d=h2)[None, :]
    mollifier = np.exp(-0.5 * sigma**2 * (k1**2 + k2**2)) if sigma > 0 else 1.0
    coef = np.zeros((spec.N, m1, m2), dtype=complex)
    for i in range(spec.N):
        for px, py in spec.points[i]:
            coef[i] += np.exp(-1j * k1 * px) * np.exp(-1j * k2 * py)
    return (4 * np.pi / grid.area) * coef * mollifier, k1**2 + k2**2


def _check_torus(spec: VortexSpec, grid: Grid):
    if not (spec.is_torus and grid.is_torus):
        raise ValueError("torus background needs a torus spec and a torus grid")
    if not np.allclose(spec.periods, grid.periods, rtol=1e-12, atol=0):
        raise ValueError(f"grid periods {grid.periods} do not match domain periods {spec.periods}")


def _synthesize(coef: np.ndarray, grid: Grid) -> np.ndarray:
    m1, m2 = grid.shape
    return np.real(sfft.ifft2(coef, axes=(-2, -1))) * (m1 * m2)


def torus_background(spec: VortexSpec, grid: Grid, sigma: float | None = None) -> BackgroundField:
    """Zero-mean periodic solution of ``Lap u0 = -4 pi n_i/|Omega| + 4 pi sum_s delta``.

    The deltas are band-limited to the grid and Gaussian-mollified with width
    ``sigma`` (one grid spacing by default, ``0`` for no mollification).
    """
    _check_torus(spec, grid)
    if sigma is None:
        sigma = max(grid.spacing)
    coef, ksq = _source_coefficients(spec, grid, sigma)
    ksq[0, 0] = 1.0
    uh = -coef / ksq
    uh[:, 0, 0] = 0.0
    samples = _synthesize(uh, grid)
    samples -= mean(samples, grid)[:, None, None]
    return BackgroundField(samples=samples, mean=mean(samples, grid), kind="spectral-torus", mollifier_sigma=sigma)


def torus_delta_sources(spec: VortexSpec, grid: Grid, sigma: float | None = None) -> np.ndarray:
    """The discrete ``4 pi sum_s delta_{p_s}`` consistent with :func:`torus_background`."""
    _check_torus(spec, grid)
    if sigma is None:
        sigma = max(grid.spacing)
    coef, _ = _source_coefficients(spec, grid, sigma)
    return _synthesize(coef, grid)


def _sq_dist(spec: VortexSpec, i: int, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for px, py in spec.points[i]:
        yield (x - px) ** 2 + (y - py) ** 2


def planar_background(spec: VortexSpec, mu: float, x, y) -> np.ndarray:
    """``u0_i = -sum_s ln(1 + mu / |x - p_is|^2)``, shape ``(N,) + x.shape``.

    Exact hits return :data:`HIT_SENTINEL`.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros((spec.N,) + x.shape)
    for i in range(spec.N):
        hit = np.zeros(x.shape, dtype=bool)
        for r2 in _sq_dist(spec, i, x, y):
            at = r2 == 0
            hit |= at
            with np.errstate(divide="ignore", over="ignore"):
                out[i] -= np.where(at, 0.0, np.log1p(mu / np.where(at, 1.0, r2)))
        out[i][hit] = HIT_SENTINEL
        np.maximum(out[i], HIT_SENTINEL, out=out[i])
    return out


def planar_h(spec: VortexSpec, mu: float, x, y) -> np.ndarray:
    """``h_i = 4 sum_s mu / (mu + |x - p_is|^2)^2 = -Lap u0_i`` away from the vortices."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros((spec.N,) + x.shape)
    for i in range(spec.N):
        for r2 in _sq_dist(spec, i, x, y):
            out[i] += 4 * mu / (mu + r2) ** 2
    return out


def _check_mesh(spec: VortexSpec, mu: float, points_per_side: int):
    pts = spec.all_points()
    pad = 4 * np.sqrt(mu)
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    gx = np.linspace(lo[0], hi[0], points_per_side)
    gy = np.linspace(lo[1], hi[1], points_per_side)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    return np.concatenate([X.ravel(), pts[:, 0]]), np.concatenate([Y.ravel(), pts[:, 1]])


def sup_H(spec: VortexSpec, A: CouplingMatrix, mu: float, points_per_side: int = 129) -> float:
    """``sup_x max_i (A^{-1} h)_i`` sampled around the vortices."""
    if spec.counts().n_total == 0:
        return 0.0
    x, y = _check_mesh(spec, mu, points_per_side)
    H = np.tensordot(inverse_closed_form(A), planar_h(spec, mu, x, y), axes=(1, 0))
    return float(H.max())


def choose_mu(spec: VortexSpec, A: CouplingMatrix, points_per_side: int = 129, margin: float = 0.01) -> float:
    """Smallest ``mu = 2^k`` (k >= 0) with ``sup H < 1/2`` (with a relative safety margin)."""
    mu = 1.0
    for _ in range(61):
        if sup_H(spec, A, mu, points_per_side) < 0.5 * (1 - margin):
            return mu
        mu *= 2
    raise RuntimeError("could not find mu with sup H < 1/2 after 60 doublings")
