"""Sampling grids and the linear operators used on them.

Two kinds of grid are supported:

* ``torus``: nodes ``x_j = j * h`` on ``[0, L1) x [0, L2)``; operators are
  spectral (real FFT).
* ``box``: cell-centred nodes ``x_k = -L + (k + 1/2) h`` on ``[-L, L]^2``;
  operators are the 5-point stencil with homogeneous Dirichlet ghost values,
  diagonalised by the type-I sine transform.

Fields are arrays whose last two axes are the grid axes, so a stack of
species ``(N, m1, m2)`` passes through every operator unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

AXES = (-2, -1)


@dataclass(frozen=True)
class Grid:
    kind: str
    shape: tuple[int, int]
    periods: tuple[float, float] | None = None
    half_width: float | None = None

    def __post_init__(self):
        m1, m2 = self.shape
        if m1 <= 0 or m2 <= 0 or m1 % 2 or m2 % 2:
            raise ValueError(f"resolution must be positive and even, got {self.shape}")
        if self.kind == "torus":
            if self.periods is None or min(self.periods) <= 0:
                raise ValueError("torus grid needs positive periods")
        elif self.kind == "box":
            if self.half_width is None or self.half_width <= 0:
                raise ValueError("box grid needs a positive half width")
        else:
            raise ValueError(f"unknown grid kind {self.kind!r}")

    @classmethod
    def torus(cls, L1: float, L2: float, m1: int, m2: int | None = None) -> "Grid":
        return cls("torus", (int(m1), int(m2 if m2 is not None else m1)), periods=(float(L1), float(L2)))

    @classmethod
    def box(cls, half_width: float, m1: int, m2: int | None = None) -> "Grid":
        return cls("box", (int(m1), int(m2 if m2 is not None else m1)), half_width=float(half_width))

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def lengths(self) -> tuple[float, float]:
        if self.is_torus:
            return self.periods
        return (2 * self.half_width, 2 * self.half_width)

    @property
    def spacing(self) -> tuple[float, float]:
        (L1, L2), (m1, m2) = self.lengths, self.shape
        return (L1 / m1, L2 / m2)

    @property
    def cell_area(self) -> float:
        h1, h2 = self.spacing
        return h1 * h2

    @property
    def area(self) -> float:
        L1, L2 = self.lengths
        return L1 * L2

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        (h1, h2), (m1, m2) = self.spacing, self.shape
        if self.is_torus:
            return np.arange(m1) * h1, np.arange(m2) * h2
        L = self.half_width
        return -L + (np.arange(m1) + 0.5) * h1, -L + (np.arange(m2) + 0.5) * h2

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes
        return np.meshgrid(x, y, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers in the real-FFT layout (torus only)."""
        (h1, h2), (m1, m2) = self.spacing, self.shape
        k1 = 2 * np.pi * np.fft.fftfreq(m1, d=h1)
        k2 = 2 * np.pi * np.fft.rfftfreq(m2, d=h2)
        return k1[:, None], k2[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return k1**2 + k2**2

    @cached_property
    def dirichlet_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the negative 5-point Laplacian in the sine basis (box only)."""
        (h1, h2), (m1, m2) = self.spacing, self.shape
        j1 = np.arange(1, m1 + 1)[:, None]
        j2 = np.arange(1, m2 + 1)[None, :]
        return (2 - 2 * np.cos(np.pi * j1 / (m1 + 1))) / h1**2 + (2 - 2 * np.cos(np.pi * j2 / (m2 + 1))) / h2**2


def integrate(f: np.ndarray, grid: Grid):
    """Rectangle rule over the last two axes (exact for band-limited periodic data)."""
    return np.sum(f, axis=AXES) * grid.cell_area


def mean(f: np.ndarray, grid: Grid):
    return integrate(f, grid) / grid.area


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.is_torus:
        fh = sfft.rfft2(f, axes=AXES)
        return sfft.irfft2(-grid.ksq * fh, s=grid.shape, axes=AXES)
    h1, h2 = grid.spacing
    pad = [(0, 0)] * (f.ndim - 2) + [(1, 1), (1, 1)]
    fp = np.pad(f, pad)
    return (fp[..., 2:, 1:-1] - 2 * f + fp[..., :-2, 1:-1]) / h1**2 + (
        fp[..., 1:-1, 2:] - 2 * f + fp[..., 1:-1, :-2]
    ) / h2**2


def gradient(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Spectral gradient on the torus (Nyquist modes dropped); second-order
    central differences with zero ghost values on the box."""
    if grid.is_torus:
        k1, k2 = grid.wavenumbers
        m1, m2 = grid.shape
        k1 = k1.copy()
        k2 = k2.copy()
        k1[m1 // 2] = 0.0
        k2[:, -1] = 0.0
        fh = sfft.rfft2(f, axes=AXES)
        return (
            sfft.irfft2(1j * k1 * fh, s=grid.shape, axes=AXES),
            sfft.irfft2(1j * k2 * fh, s=grid.shape, axes=AXES),
        )
    h1, h2 = grid.spacing
    pad = [(0, 0)] * (f.ndim - 2) + [(1, 1), (1, 1)]
    fp = np.pad(f, pad)
    return (fp[..., 2:, 1:-1] - fp[..., :-2, 1:-1]) / (2 * h1), (fp[..., 1:-1, 2:] - fp[..., 1:-1, :-2]) / (2 * h2)


def poisson_solve_zero_mean(rhs: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``Laplacian u = rhs - mean(rhs)`` with ``mean(u) = 0`` on the torus.

    Returns the solution and the mean that was removed from ``rhs``.
    """
    if not grid.is_torus:
        raise ValueError("zero-mean Poisson solve requires a torus grid")
    removed = mean(rhs, grid)
    rh = sfft.rfft2(rhs, axes=AXES)
    ksq = grid.ksq.copy()
    ksq[0, 0] = 1.0
    uh = -rh / ksq
    uh[..., 0, 0] = 0.0
    return sfft.irfft2(uh, s=grid.shape, axes=AXES), removed


def shifted_inverse(grid: Grid, kappa):
    """Return a function applying ``(-Laplacian + kappa)^{-1}``.

    ``kappa`` may be a scalar or one value per leading (species) index.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if np.any(kappa <= 0):
        raise ValueError("shift must be positive")
    kap = kappa[:, None, None]
    if grid.is_torus:
        denom = grid.ksq[None] + kap

        def apply(r):
            rh = sfft.rfft2(r, axes=AXES)
            return sfft.irfft2(rh / (denom if r.ndim == 3 else denom[0]), s=grid.shape, axes=AXES)

        return apply

    denom = grid.dirichlet_eigenvalues[None] + kap

    def apply(r):
        rh = sfft.dstn(r, type=1, axes=AXES, norm="ortho")
        return sfft.idstn(rh / (denom if r.ndim == 3 else denom[0]), type=1, axes=AXES, norm="ortho")

    return apply
