import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as quadrature

from bpsvortex import grid as G
from bpsvortex.sources import VortexSpec, planar_background, torus_delta_sources


def band_limited(grid, seed, modes=5):
    rng = np.random.default_rng(seed)
    X, Y = grid.coords
    L1, L2 = grid.lengths
    f = np.zeros(grid.shape)
    for k1 in range(-modes, modes + 1):
        for k2 in range(-modes, modes + 1):
            a, b = rng.normal(size=2)
            ph = 2 * np.pi * (k1 * X / L1 + k2 * Y / L2)
            f += a * np.cos(ph) + b * np.sin(ph)
    return f


def test_resolution_must_be_even():
    with pytest.raises(ValueError):
        G.Grid.torus(1.0, 1.0, 33)
    with pytest.raises(ValueError):
        G.Grid.box(1.0, 0)


def test_box_nodes_are_cell_centred():
    g = G.Grid.box(2.0, 4)
    np.testing.assert_allclose(g.axes[0], [-1.5, -0.5, 0.5, 1.5])
    assert g.spacing == (1.0, 1.0)


def test_integrate_constant_and_sine():
    g = G.Grid.torus(3.0, 5.0, 32, 48)
    assert G.integrate(np.ones(g.shape), g) == pytest.approx(15.0, rel=1e-15)
    X, _ = g.coords
    assert abs(G.integrate(np.sin(2 * np.pi * X / 3.0), g)) < 1e-13


def test_integrate_planar_background_against_radial_quadrature():
    g = G.Grid.box(20.0, 512)
    X, Y = g.coords
    spec = VortexSpec.plane([[(0.0, 0.0)]])
    numeric = G.integrate(np.exp(planar_background(spec, 1.0, X, Y)[0]), g)
    # e^{u0} = 1 - 1/(1 + r^2); the square splits into 8 triangles, radial part in closed form
    deficit = 8 * quadrature.quad(lambda t: 0.5 * np.log1p((20.0 / np.cos(t)) ** 2), 0, np.pi / 4, epsabs=0, epsrel=1e-13)[0]
    exact = 40.0**2 - deficit
    assert numeric == pytest.approx(exact, rel=1e-4)


def test_spectral_laplacian_eigenfunction():
    g = G.Grid.torus(3.0, 2.0, 64, 32)
    X, Y = g.coords
    f = np.cos(2 * np.pi * X / 3.0)
    np.testing.assert_allclose(G.laplacian(f, g), -((2 * np.pi / 3.0) ** 2) * f, atol=1e-12)
    assert abs(G.laplacian(np.full(g.shape, 2.5), g)).max() < 1e-12


def _fd4_laplacian(f, grid):
    h1, h2 = grid.spacing
    out = np.zeros_like(f)
    for axis, h in ((0, h1), (1, h2)):
        r = lambda s: np.roll(f, s, axis=axis)
        out += (-r(2) + 16 * r(1) - 30 * f + 16 * r(-1) - r(-2)) / (12 * h * h)
    return out


def test_spectral_laplacian_matches_fourth_order_differences():
    errs = []
    for m in (64, 128):
        g = G.Grid.torus(2 * np.pi, 2 * np.pi, m)
        f = band_limited(g, seed=4)
        errs.append(abs(G.laplacian(f, g) - _fd4_laplacian(f, g)).max())
    # fourth order: halving h shrinks the gap by ~16
    assert errs[0] / errs[1] > 12


def test_box_laplacian_sine_modes():
    g = G.Grid.box(1.5, 40, 30)
    (h1, h2), (m1, m2) = g.spacing, g.shape
    i = np.arange(1, m1 + 1)[:, None]
    j = np.arange(1, m2 + 1)[None, :]
    f = np.sin(np.pi * 3 * i / (m1 + 1)) * np.sin(np.pi * 5 * j / (m2 + 1))
    lam = (2 - 2 * np.cos(3 * np.pi / (m1 + 1))) / h1**2 + (2 - 2 * np.cos(5 * np.pi / (m2 + 1))) / h2**2
    np.testing.assert_allclose(G.laplacian(f, g), -lam * f, atol=1e-10)


def test_poisson_round_trip_and_zero():
    g = G.Grid.torus(4.0, 6.0, 64, 96)
    f = band_limited(g, seed=7)
    f -= G.mean(f, g)
    sol, removed = G.poisson_solve_zero_mean(f, g)
    assert abs(removed) < 1e-12
    np.testing.assert_allclose(G.laplacian(sol, g), f, atol=1e-11 * abs(f).max())
    assert abs(G.mean(sol, g)) < 1e-13
    zero, _ = G.poisson_solve_zero_mean(np.zeros(g.shape), g)
    assert not zero.any()


def test_poisson_reports_removed_mean():
    g = G.Grid.torus(2.0, 2.0, 16)
    _, removed = G.poisson_solve_zero_mean(np.full(g.shape, 3.0), g)
    assert removed == pytest.approx(3.0)


def test_poisson_green_function_against_direct_fourier_sum():
    L1, L2, m = 5.0, 7.0, 32
    g = G.Grid.torus(L1, L2, m)
    p = (1.3, 2.1)
    spec = VortexSpec.torus([[p]], (L1, L2))
    delta = torus_delta_sources(spec, g, sigma=0.0)[0]
    sol, removed = G.poisson_solve_zero_mean(delta, g)
    assert removed == pytest.approx(4 * np.pi / g.area)
    # explicit mode-by-mode sum of -(4 pi / |Omega|) e^{ik(x-p)} / |k|^2 over the grid band
    k1s = 2 * np.pi * np.fft.fftfreq(m, d=L1 / m)
    k2s = 2 * np.pi * np.fft.fftfreq(m, d=L2 / m)
    X, Y = g.coords
    for a, b in [(20, 25), (0, 0), (5, 30)]:
        x, y = X[a, b], Y[a, b]
        total = 0.0
        for k1 in k1s:
            for k2 in k2s:
                if k1 == 0 and k2 == 0:
                    continue
                total += np.cos(k1 * (x - p[0]) + k2 * (y - p[1])) / (k1 * k1 + k2 * k2)
        assert sol[a, b] == pytest.approx(-4 * np.pi / g.area * total, abs=1e-6)


def test_shifted_inverse_both_kinds():
    for g in (G.Grid.torus(3.0, 3.0, 32), G.Grid.box(2.0, 32)):
        rng = np.random.default_rng(0)
        r = rng.normal(size=(2,) + g.shape)
        apply = G.shifted_inverse(g, [0.5, 2.0])
        x = apply(r)
        back = -G.laplacian(x, g) + np.array([0.5, 2.0])[:, None, None] * x
        np.testing.assert_allclose(back, r, atol=1e-9)
    with pytest.raises(ValueError):
        G.shifted_inverse(g, 0.0)


def test_box_gradient_is_central_difference():
    g = G.Grid.box(1.0, 16)
    X, Y = g.coords
    gx, gy = G.gradient(X * Y, g)
    np.testing.assert_allclose(gx[1:-1, 1:-1], Y[1:-1, 1:-1], atol=1e-12)
    np.testing.assert_allclose(gy[1:-1, 1:-1], X[1:-1, 1:-1], atol=1e-12)


def test_spectral_gradient_of_sine():
    g = G.Grid.torus(2.0, 3.0, 32)
    X, Y = g.coords
    gx, gy = G.gradient(np.sin(np.pi * X) * np.cos(2 * np.pi * Y / 3.0), g)
    np.testing.assert_allclose(gx, np.pi * np.cos(np.pi * X) * np.cos(2 * np.pi * Y / 3.0), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_parseval(seed):
    g = G.Grid.torus(2.0, 3.0, 32, 16)
    f = np.random.default_rng(seed).normal(size=g.shape)
    fh = np.fft.fft2(f)
    assert np.sum(f**2) == pytest.approx(np.sum(abs(fh) ** 2) / f.size, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(["torus", "box"]))
def test_operators_are_linear(seed, alpha, beta, kind):
    g = G.Grid.torus(2.0, 3.0, 16) if kind == "torus" else G.Grid.box(1.0, 16)
    rng = np.random.default_rng(seed)
    f, h = rng.normal(size=(2,) + g.shape)
    ops = (G.laplacian, lambda x, gg: G.gradient(x, gg)[0], lambda x, gg: G.shifted_inverse(gg, 1.0)(x))
    for op in ops:
        lhs = op(alpha * f + beta * h, g)
        rhs = alpha * op(f, g) + beta * op(h, g)
        assert abs(lhs - rhs).max() <= 1e-12 * max(1.0, abs(lhs).max())
