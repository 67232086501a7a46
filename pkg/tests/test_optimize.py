import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bpsvortex.optimize import lbfgs


def dot(a, b):
    return float(np.vdot(a, b))


def quadratic(diag, b):
    def fg(x):
        return 0.5 * dot(x, diag * x) - dot(b, x), diag * x - b, False

    return fg


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_quadratic_minimum(seed):
    rng = np.random.default_rng(seed)
    diag = rng.uniform(0.5, 50.0, size=40)
    b = rng.normal(size=40)
    res = lbfgs(quadratic(diag, b), np.zeros(40), inner=dot, gtol=1e-10)
    assert res.converged and res.status == "converged"
    np.testing.assert_allclose(res.x, b / diag, atol=1e-9)


def test_exact_preconditioner_needs_one_step():
    diag = np.logspace(0, 8, 50)
    b = np.ones(50)
    res = lbfgs(quadratic(diag, b), np.zeros(50), inner=dot, precond=lambda r: r / diag, gtol=1e-12)
    assert res.converged
    assert res.iterations == 1


def test_weighted_inner_product():
    # functional 0.5 * w * |x|^2 - w * (c, x) has L2_w gradient x - c
    w = 0.01
    c = np.arange(5.0)

    def fg(x):
        return 0.5 * w * dot(x, x) - w * dot(c, x), x - c, False

    res = lbfgs(fg, np.zeros(5), inner=lambda a, b: w * dot(a, b), gtol=1e-12)
    np.testing.assert_allclose(res.x, c, atol=1e-12)


def test_convex_exponential_functional_reaches_tight_tolerance():
    rng = np.random.default_rng(1)
    a = rng.normal(size=200)

    def fg(x):
        e = np.exp(x)
        return float(np.sum(e - a * x)), e - a, False

    a = np.abs(a) + 0.1
    res = lbfgs(fg, np.zeros(200), inner=dot, gtol=1e-13)
    assert res.converged
    np.testing.assert_allclose(res.x, np.log(a), atol=1e-12)


def test_max_iter_and_stop_callback():
    diag = np.logspace(0, 6, 100)
    fg = quadratic(diag, np.ones(100))
    res = lbfgs(fg, np.zeros(100), inner=dot, gtol=1e-14, max_iter=3)
    assert res.status == "max-iter" and not res.converged and res.iterations == 3
    res = lbfgs(fg, np.zeros(100), inner=dot, gtol=1e-14, stop=lambda x, it: "halt" if it == 2 else None)
    assert res.status == "halt" and res.iterations == 2


def test_overflow_at_start_is_reported():
    res = lbfgs(lambda x: (np.inf, x, True), np.zeros(3), inner=dot, gtol=1e-8)
    assert res.status == "overflow-at-start" and res.overflow and not res.converged


def test_unbounded_below_does_not_claim_convergence():
    # linear functional: no minimizer
    res = lbfgs(lambda x: (-float(x.sum()), -np.ones_like(x), False), np.zeros(4), inner=dot, gtol=1e-8, max_iter=50)
    assert not res.converged
