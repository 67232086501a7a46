"""Preconditioned limited-memory BFGS for smooth convex functionals on grid fields.

The iterate is an arbitrary ndarray. The caller supplies the gradient in a
weighted inner product (the L2 gradient of a discretised functional) together
with that inner product, so the preconditioner can be a discrete elliptic
inverse such as ``(-Laplacian + kappa)^{-1}``.

The line search accepts approximate-Wolfe steps (Hager & Zhang) once function
differences reach rounding level, which lets the iteration drive the gradient
far below ``sqrt(eps)`` relative to the functional value.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class LBFGSResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    grad_norm: float
    iterations: int
    n_evals: int
    converged: bool
    status: str
    overflow: bool = False


class _Evaluator:
    def __init__(self, fg):
        self.fg = fg
        self.count = 0

    def __call__(self, x):
        self.count += 1
        f, g, overflow = self.fg(x)
        return f, g, bool(overflow) or not np.isfinite(f)


def _line_search(evaluate, inner, x, f0, d, dphi0, alpha, alpha_max, max_evals=40):
    """Return ``(alpha, f, g, ok)`` for a step along descent direction ``d``."""
    c1, c2, delta = 1e-4, 0.9, 0.1
    eps_f = 1e-12 * max(abs(f0), 1.0)
    lo, dphi_lo = 0.0, dphi0
    hi, dphi_hi = np.inf, np.nan
    best = None
    for _ in range(max_evals):
        f, g, bad = evaluate(x + alpha * d)
        if bad:
            hi, dphi_hi = alpha, np.nan
        else:
            dphi = inner(g, d)
            decrease = f <= f0 + c1 * alpha * dphi0 or (
                f <= f0 + eps_f and dphi <= (1 - 2 * delta) * abs(dphi0)
            )
            if f < f0 and (best is None or f < best[1]):
                best = (alpha, f, g)
            if decrease and abs(dphi) <= c2 * abs(dphi0):
                return alpha, f, g, True
            if dphi < 0 and f <= f0 + eps_f:
                lo, dphi_lo = alpha, dphi
            else:
                hi, dphi_hi = alpha, dphi
        if np.isinf(hi):
            if alpha >= alpha_max:
                break
            alpha = min(4 * alpha, alpha_max)
            continue
        width = hi - lo
        if np.isfinite(dphi_hi) and dphi_hi > dphi_lo:
            trial = lo - dphi_lo * width / (dphi_hi - dphi_lo)
            alpha = float(np.clip(trial, lo + 0.1 * width, hi - 0.1 * width))
        else:
            alpha = lo + 0.5 * width if lo > 0 else 0.25 * hi
        if width <= 1e-16 * max(hi, 1.0):
            break
    if best is not None:
        return best[0], best[1], best[2], True
    return 0.0, f0, None, False


def lbfgs(
    fg: Callable,
    x0: np.ndarray,
    *,
    inner: Callable,
    precond: Callable | None = None,
    gtol: float,
    max_iter: int = 5000,
    memory: int = 12,
    alpha_max: float = 1e10,
    stop: Callable | None = None,
) -> LBFGSResult:
    """Minimise with ``fg(x) -> (f, grad, overflow_flag)`` until ``||grad|| <= gtol``.

    ``stop(x, it)`` may return a status string to abort (e.g. divergence).
    """
    evaluate = _Evaluator(fg)
    precond = precond or (lambda r: r)
    x = np.array(x0, dtype=float, copy=True)
    f, g, bad = evaluate(x)
    if bad:
        return LBFGSResult(x, f, g, np.inf, 0, evaluate.count, False, "overflow-at-start", True)
    pairs: deque = deque(maxlen=memory)
    gnorm = np.sqrt(inner(g, g))
    status = "max-iter"
    it = 0
    resets = 0
    while True:
        if gnorm <= gtol:
            status = "converged"
            break
        if it >= max_iter:
            break
        if stop is not None:
            reason = stop(x, it)
            if reason:
                status = reason
                break
        # two-loop recursion with H0 = gamma * P^{-1}
        q = g.copy()
        coeffs = []
        for s, y, rho in reversed(pairs):
            a = rho * inner(s, q)
            coeffs.append(a)
            q -= a * y
        r = precond(q)
        if pairs:
            s, y, rho = pairs[-1]
            r *= inner(s, y) / inner(y, precond(y))
        for (s, y, rho), a in zip(pairs, reversed(coeffs)):
            b = rho * inner(y, r)
            r += (a - b) * s
        d = -r
        dphi0 = inner(g, d)
        if not dphi0 < 0:
            pairs.clear()
            d = -precond(g)
            dphi0 = inner(g, d)
        alpha, f_new, g_new, ok = _line_search(evaluate, inner, x, f, d, dphi0, 1.0, alpha_max)
        if not ok:
            if pairs and resets < 3:
                pairs.clear()
                resets += 1
                continue
            status = "line-search-failed"
            break
        resets = 0
        s = alpha * d
        y = g_new - g
        sy = inner(s, y)
        x = x + s
        f, g = f_new, g_new
        if sy > 1e-300:
            pairs.append((s, y, 1.0 / sy))
        gnorm = np.sqrt(inner(g, g))
        it += 1
        log.debug("iter %d f=%.16e |g|=%.3e alpha=%.3e", it, f, gnorm, alpha)
    return LBFGSResult(x, f, g, float(gnorm), it, evaluate.count, status == "converged", status)
