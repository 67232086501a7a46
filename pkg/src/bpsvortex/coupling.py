"""Coupling matrix of the U(1) x SU(N) vortex system and the scalars derived from it.

The matrix has the constant-off-diagonal form ``a + delta_ij * b`` with

    a = (e^2/2 - g^2/(2N)) / N,    b = g^2 / (2N),

optionally multiplied by ``v^2`` for the planar (normalized) problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

MAX_SPECIES = 1024


@dataclass(frozen=True)
class CouplingParams:
    """Physical constants: Abelian coupling ``e``, non-Abelian coupling ``g``,
    vacuum scale ``v`` and number of species ``N``."""

    e: float
    g: float
    v: float
    N: int

    def __post_init__(self):
        for name in ("e", "g", "v"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        if self.N > MAX_SPECIES:
            raise ValueError(f"N is capped at {MAX_SPECIES}, got {self.N}")
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class CouplingMatrix:
    N: int
    a: float
    b: float
    rescaled: bool = False

    def __post_init__(self):
        if not self.b > 0 or not self.N * self.a + self.b > 0:
            raise np.linalg.LinAlgError(
                f"coupling matrix is not positive definite (a={self.a}, b={self.b}, N={self.N})"
            )

    def entry(self, i: int, j: int) -> float:
        return self.a + (self.b if i == j else 0.0)

    @property
    def dense(self) -> np.ndarray:
        return np.full((self.N, self.N), self.a) + self.b * np.eye(self.N)


@dataclass(frozen=True)
class CholeskyFactors:
    """Upper-triangular ``T`` with ``A = T^t T`` stored as its diagonal and the
    constant row values ``alpha`` (``alpha[-1] == 0``), plus ``L = (T^t)^{-1}``."""

    t_diag: np.ndarray
    alpha: np.ndarray
    L: np.ndarray

    @property
    def N(self) -> int:
        return len(self.t_diag)

    @property
    def T(self) -> np.ndarray:
        N = self.N
        T = np.triu(np.repeat(self.alpha[:, None], N, axis=1), k=1)
        T[np.diag_indices(N)] = self.t_diag
        return T

    def apply_Tt(self, v: np.ndarray) -> np.ndarray:
        """``w = T^t v`` along axis 0: w_i = t_ii v_i + sum_{k<i} alpha_k v_k."""
        weighted = self.alpha.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        lower = np.cumsum(weighted, axis=0) - weighted
        return self.t_diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v + lower

    def apply_T(self, x: np.ndarray) -> np.ndarray:
        """``T x`` along axis 0: t_ii x_i + alpha_i sum_{j>i} x_j."""
        tail = np.cumsum(x[::-1], axis=0)[::-1] - x
        shape = (-1,) + (1,) * (x.ndim - 1)
        return self.t_diag.reshape(shape) * x + self.alpha.reshape(shape) * tail

    def apply_L(self, x: np.ndarray) -> np.ndarray:
        return np.tensordot(self.L, x, axes=(1, 0))


@dataclass(frozen=True)
class VortexCounts:
    n_per_species: tuple

    def __post_init__(self):
        n = tuple(int(k) for k in self.n_per_species)
        if any(k < 0 for k in n):
            raise ValueError("vortex counts must be nonnegative")
        object.__setattr__(self, "n_per_species", n)

    @property
    def n_total(self) -> int:
        return sum(self.n_per_species)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.n_per_species, dtype=float)


@dataclass
class ExistenceReport:
    q: np.ndarray
    p: np.ndarray
    bounds: np.ndarray
    margins: np.ndarray
    satisfied: bool
    aggregate_bound: float
    q_consistent: bool = True
    alpha_signs: np.ndarray = field(default_factory=lambda: np.zeros(0))


def build_matrix(params: CouplingParams, rescaled: bool = False) -> CouplingMatrix:
    N = params.N
    a = (params.e**2 / 2 - params.g**2 / (2 * N)) / N
    b = params.g**2 / (2 * N)
    if rescaled:
        a *= params.v**2
        b *= params.v**2
    return CouplingMatrix(N=N, a=a, b=b, rescaled=rescaled)


def eigenvalues(A: CouplingMatrix) -> tuple[float, float]:
    """Return ``(lambda_1, lambda_N)``: the simple eigenvalue ``N a + b`` and the
    ``(N-1)``-fold eigenvalue ``b``. A single species has only ``a + b``."""
    top = A.N * A.a + A.b
    return (top, top) if A.N == 1 else (top, A.b)


def cholesky(A: CouplingMatrix) -> CholeskyFactors:
    N, a, b = A.N, A.a, A.b
    if not (b > 0 and N * a + b > 0):
        raise np.linalg.LinAlgError("coupling matrix is not positive definite")
    t = np.empty(N)
    alpha = np.zeros(N)
    acc = 0.0  # running sum of alpha_k^2
    for k in range(N):
        d = (a + b) - acc
        if d <= 0:
            raise np.linalg.LinAlgError("Cholesky pivot is not positive")
        t[k] = math.sqrt(d)
        if k < N - 1:
            alpha[k] = (a - acc) / t[k]
            acc += alpha[k] ** 2
    T = np.triu(np.repeat(alpha[:, None], N, axis=1), k=1)
    T[np.diag_indices(N)] = t
    L = solve_triangular(T.T, np.eye(N), lower=True)
    return CholeskyFactors(t_diag=t, alpha=alpha, L=L)


def inverse_closed_form(A: CouplingMatrix) -> np.ndarray:
    N, a, b = A.N, A.a, A.b
    den = b * (N * a + b)
    if den == 0:
        raise np.linalg.LinAlgError("coupling matrix is singular")
    inv = np.full((N, N), -a)
    inv[np.diag_indices(N)] = (N - 1) * a + b
    return inv / den


def forcing(params: CouplingParams, area: float, counts: VortexCounts) -> np.ndarray:
    """Constant forcing ``f_i = 4 pi n_i / |Omega| - v^2 sum_j a_ij`` of the torus problem."""
    A = build_matrix(params)
    row_sum = A.N * A.a + A.b
    return 4 * np.pi * counts.array / area - params.v**2 * row_sum


def compute_q(params: CouplingParams, area: float, counts: VortexCounts) -> np.ndarray:
    if not area > 0:
        raise ValueError("area must be positive")
    e2, g2, v2, N = params.e**2, params.g**2, params.v**2, params.N
    n = counts.n_total
    return v2 * area + 8 * np.pi * (1 / g2 - 1 / (N * e2)) * n - (8 * np.pi * N / g2) * counts.array


def compute_p(factors: CholeskyFactors, q: np.ndarray) -> np.ndarray:
    return factors.apply_T(np.asarray(q, dtype=float))


def check_existence(params: CouplingParams, area: float, counts: VortexCounts) -> ExistenceReport:
    if len(counts.n_per_species) != params.N:
        raise ValueError(f"expected {params.N} vortex counts, got {len(counts.n_per_species)}")
    e2, g2, v2, N = params.e**2, params.g**2, params.v**2, params.N
    n = counts.n_total
    bound = g2 * v2 * area / (8 * np.pi * N) + (1 - g2 / (N * e2)) * n / N
    bounds = np.full(N, bound)
    margins = bounds - counts.array
    satisfied = bool(np.all(margins > 0))
    q = compute_q(params, area, counts)
    factors = cholesky(build_matrix(params))
    report = ExistenceReport(
        q=q,
        p=compute_p(factors, q),
        bounds=bounds,
        margins=margins,
        satisfied=satisfied,
        aggregate_bound=e2 * v2 * N * area / (8 * np.pi),
        q_consistent=satisfied == bool(np.all(q > 0)),
        alpha_signs=np.sign(factors.alpha[:-1]),
    )
    return report


def critical_area(params: CouplingParams, counts: VortexCounts) -> float:
    """Smallest cell area above which every ``q_i > 0`` (zero if any area works)."""
    e2, g2, v2, N = params.e**2, params.g**2, params.v**2, params.N
    shift = counts.n_total * (1 - g2 / (N * e2)) / N
    return max(0.0, float(np.max(8 * np.pi * N * (counts.array - shift) / (g2 * v2))))
