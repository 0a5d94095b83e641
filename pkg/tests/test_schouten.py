import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from lnlab.canonical import ball_solution, exterior_solution
from lnlab.cone import CurvatureFunction
from lnlab.domain import Profile1D, annulus, cylindrical, dirichlet, spherical
from lnlab.schouten import (Jet1D, grid_neg_schouten_eigs, kelvin_point, kelvin_transform,
                            neg_schouten_eigs, neg_schouten_matrix, sample_grid,
                            stencil_neg_schouten_eigs, u_blocks, w_blocks)


def radial_field(g, dg, d2g, center=None):
    """Point field u(x) = g(|x - center|) with its gradient and Hessian."""
    def value(x):
        x = np.asarray(x, dtype=float)
        c = 0.0 if center is None else center
        return g(np.linalg.norm(x - c, axis=-1))

    def derivs(x):
        c = np.zeros_like(x) if center is None else center
        d = x - c
        r = np.linalg.norm(d)
        e = d / r
        grad = dg(r) * e
        hess = d2g(r) * np.outer(e, e) + dg(r) / r * (np.eye(x.size) - np.outer(e, e))
        return g(r), grad, hess
    return value, derivs


@settings(max_examples=60)
@given(st.integers(3, 9), st.floats(0.5, 3.0), st.floats(-2.0, 2.0), st.floats(-3.0, 3.0),
       st.floats(0.2, 4.0))
def test_u_and_w_forms_agree(n, u0, du, d2u, r):
    jet = Jet1D(u0, du, d2u, n)
    for sym in (spherical(), cylindrical(2)):
        a = neg_schouten_eigs(jet, sym, r, n).flat()
        b = neg_schouten_eigs(jet.to_w(), sym, r, n).flat()
        assert_allclose(a, b, rtol=1e-9, atol=1e-9 * (1 + np.max(np.abs(a))))


@settings(max_examples=40)
@given(st.integers(3, 7), st.floats(0.5, 3.0), st.floats(-2.0, 2.0), st.floats(-3.0, 3.0))
def test_jet_round_trip(n, u0, du, d2u):
    jet = Jet1D(u0, du, d2u, n)
    back = jet.to_w().to_u()
    assert_allclose([back.value, back.d1, back.d2], [u0, du, d2u], rtol=1e-10, atol=1e-10)


def test_blocks_match_full_matrix():
    # a radial field in R^5 evaluated away from the center
    n = 5
    value, derivs = radial_field(lambda r: (1 + r * r) ** -1.2, lambda r: -2.4 * r * (1 + r * r) ** -2.2,
                                 lambda r: -2.4 * (1 + r * r) ** -2.2 + 10.56 * r * r * (1 + r * r) ** -3.2)
    x = np.array([0.3, -0.2, 0.5, 0.1, 0.4])
    u0, grad, hess = derivs(x)
    full = np.sort(np.linalg.eigvalsh(neg_schouten_matrix(u0, grad, hess)))
    r = np.linalg.norm(x)
    jet = Jet1D(u0, np.dot(grad, x / r), (x / r) @ hess @ (x / r), n)
    blocks = np.sort(neg_schouten_eigs(jet, spherical(), r, n).flat())
    assert_allclose(full, blocks, rtol=1e-12)


def test_cylindrical_blocks_match_full_matrix():
    # u depends on the last k = 3 coordinates of R^6 only
    n, k = 6, 3
    g = lambda s: (0.5 + s) ** -2.0
    dg = lambda s: -2.0 * (0.5 + s) ** -3.0
    d2g = lambda s: 6.0 * (0.5 + s) ** -4.0
    x = np.array([0.7, -1.1, 0.2, 0.3, -0.4, 0.6])
    y = x[n - k:]
    rho = np.linalg.norm(y)
    e = y / rho
    grad = np.zeros(n)
    grad[n - k:] = dg(rho) * e
    hess = np.zeros((n, n))
    hess[n - k:, n - k:] = d2g(rho) * np.outer(e, e) + dg(rho) / rho * (np.eye(k) - np.outer(e, e))
    full = np.sort(np.linalg.eigvalsh(neg_schouten_matrix(g(rho), grad, hess)))
    blocks = np.sort(neg_schouten_eigs(Jet1D(g(rho), dg(rho), d2g(rho), n), cylindrical(k), rho, n).flat())
    assert_allclose(full, blocks, rtol=1e-12)


def test_vectorized_blocks_agree():
    rng = np.random.default_rng(0)
    u = rng.uniform(0.5, 2.0, 10)
    du = rng.normal(size=10)
    d2u = rng.normal(size=10)
    r = rng.uniform(0.2, 2.0, 10)
    n = 4
    m = n - 2
    w = u ** (-2 / m)
    dw = -2 / m * u ** (-2 / m - 1) * du
    d2w = -2 / m * (-2 / m - 1) * u ** (-2 / m - 2) * du ** 2 - 2 / m * u ** (-2 / m - 1) * d2u
    assert_allclose(u_blocks(u, du, d2u, r, spherical(), n), w_blocks(w, dw, d2w, r, spherical()),
                    rtol=1e-10, atol=1e-12)


def test_flat_metric_has_zero_eigenvalues():
    lam = grid_neg_schouten_eigs(np.ones((3, 3, 3)), (1, 1, 1), 0.1)
    assert_allclose(lam.flat(), 0.0, atol=0)


def test_grid_evaluator_is_second_order():
    f = CurvatureFunction(4, 1)
    sol = ball_solution(f, 1.0)
    x = np.array([0.2, -0.1, 0.15, 0.05])
    exact = 2.0 * sol.scale ** (-2.0)
    errs = []
    for h in (4e-2, 2e-2, 1e-2):
        grid = sample_grid(sol, x, h)
        lam = grid_neg_schouten_eigs(grid, (1, 1, 1, 1), h)
        errs.append(np.max(np.abs(lam.flat() - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_grid_and_stencil_evaluators_agree():
    f = CurvatureFunction(3, 2)
    sol = exterior_solution(f, 1.0)
    x = np.array([1.4, 0.3, -0.2])
    h = 1e-3
    a = grid_neg_schouten_eigs(sample_grid(sol, x, h), (1, 1, 1), h)
    b = stencil_neg_schouten_eigs(sol, x, h)
    assert_allclose(a.flat(), b.flat(), rtol=1e-12)


def test_grid_point_must_be_stencil_interior():
    with pytest.raises(IndexError):
        grid_neg_schouten_eigs(np.ones((3, 3, 3)), (0, 1, 1), 0.1)


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.3, 3.0))
def test_inversion_is_an_involution(y, lam):
    y = np.asarray(y)
    if np.linalg.norm(y) < 1e-3:
        return
    back = kelvin_point(kelvin_point(y, np.zeros(4), lam), np.zeros(4), lam)
    assert_allclose(back, y, rtol=1e-10, atol=1e-12)


def test_kelvin_transform_is_an_involution_on_fields():
    f = CurvatureFunction(5, 1)
    u = exterior_solution(f, 1.0)
    x0 = np.zeros(5)
    twice = kelvin_transform(kelvin_transform(u, x0, 0.8), x0, 0.8)
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(50, 5))
    pts *= (1.5 + rng.uniform(size=(50, 1))) / np.linalg.norm(pts, axis=1, keepdims=True)
    assert_allclose(twice(pts), u(pts), rtol=1e-13)


def test_kelvin_preserves_eigenvalues_off_center():
    # a non-radial positive field: translated ball solution
    f = CurvatureFunction(4, 2)
    sol = ball_solution(f, 2.0, center=(0.3, 0.0, -0.2, 0.1))
    K = kelvin_transform(sol, np.zeros(4), 1.0)
    y = np.array([1.6, 0.4, -0.3, 0.9])
    y_star = kelvin_point(y, np.zeros(4), 1.0)
    h = 1e-3
    a = stencil_neg_schouten_eigs(K, y, h * np.linalg.norm(y), richardson=True)
    b = stencil_neg_schouten_eigs(sol, y_star, h * np.linalg.norm(y_star), richardson=True)
    assert_allclose(a.flat(), b.flat(), atol=1e-8)


def test_profile_kelvin_maps_annulus_to_annulus():
    f = CurvatureFunction(3, 1)
    sol = exterior_solution(f, 1.0)
    r = np.linspace(1.5, 4.0, 21)
    dom = annulus(1.5, 4.0, dirichlet(float(sol.radial(1.5))), dirichlet(float(sol.radial(4.0))))
    p = Profile1D(r, sol.w(r), dom, f)
    q = kelvin_transform(p, None, 1.0)
    assert_allclose(q.domain.lo, 0.25)
    assert_allclose(q.domain.hi, 1 / 1.5)
    inner = ball_solution(f, 1.0)
    assert_allclose(q.u, inner.radial(q.mesh), rtol=1e-13)
    assert_allclose(q.domain.left.value, inner.radial(0.25), rtol=1e-13)


def test_kelvin_rejects_bad_inputs():
    f = CurvatureFunction(3, 1)
    with pytest.raises(ValueError):
        kelvin_transform(ball_solution(f), np.zeros(3), 0.0)
    K = kelvin_transform(ball_solution(f, 2.0), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        K(np.zeros(3))
