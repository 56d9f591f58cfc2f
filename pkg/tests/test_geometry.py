import math

import numpy as np
import pytest

from imcf.chart import conformal_factor, map_point, sigma_metric, slice_sphere
from imcf.errors import GridTooCoarse, NonFiniteGeometry
from imcf.geometry import (
    GraphFunction,
    area,
    axisym_curvatures,
    boundary_frame,
    differentiate,
    directional_boundary_derivative,
    dual_path_residual,
    enforce_neumann,
    geometry_field,
    meridian_profile,
    neumann_residual,
)
from imcf.initial_data import cap, perturbed_cap


def polar_grid(m, k=32):
    r = np.linspace(0.0, 1.0, m)
    th = 2 * np.pi * np.arange(k) / k
    return np.meshgrid(r, th, indexing="ij")


def nonsymmetric(m, k=32):
    R, T = polar_grid(m, k)
    return GraphFunction("polar2d", 2 + 0.2 * np.cos(np.pi * R) + 0.05 * R**2 * np.cos(2 * T) * (1 - R**2) ** 2)


def test_too_coarse():
    with pytest.raises(GridTooCoarse):
        GraphFunction("axisymmetric", np.full(4, 2.0))


@pytest.mark.parametrize("mode", ["interval", "axisymmetric"])
def test_constant_has_zero_derivatives(mode):
    Du, D2u = differentiate(GraphFunction(mode, np.full(21, 2.5)))
    assert np.all(Du == 0.0) and np.all(D2u == 0.0)


def test_quadratics_are_exact():
    r = np.linspace(0.0, 1.0, 41)
    Du, D2u = differentiate(GraphFunction("axisymmetric", 1.5 + r**2))
    # u = 1.5 + x^2 + y^2 evaluated along the x axis
    np.testing.assert_allclose(Du[:, 0], 2 * r, atol=1e-11)
    np.testing.assert_allclose(D2u[:, 0, 0], 2.0, atol=1e-9)
    np.testing.assert_allclose(D2u[:, 1, 1], 2.0, atol=1e-9)
    x = np.linspace(-1, 1, 41)
    Du, D2u = differentiate(GraphFunction("interval", 2 + x**2 - 0.3 * x))
    np.testing.assert_allclose(Du[:, 0], 2 * x - 0.3, atol=1e-11)
    np.testing.assert_allclose(D2u[:, 0, 0], 2.0, atol=1e-9)


def test_polar_quadratic_is_exact():
    R, T = polar_grid(31, 16)
    X, Y = R * np.cos(T), R * np.sin(T)
    u = GraphFunction("polar2d", 2 + X**2 + 0.5 * X * Y - 0.25 * Y**2 + 0.1 * X)
    Du, D2u = differentiate(u)
    ex = np.column_stack([(2 * X + 0.5 * Y + 0.1).ravel(), (0.5 * X - 0.5 * Y).ravel()])
    np.testing.assert_allclose(Du, ex, atol=1e-9)
    np.testing.assert_allclose(D2u, np.broadcast_to([[2.0, 0.5], [0.5, -0.5]], D2u.shape), atol=1e-7)


def test_neumann_residual_is_second_order():
    res = []
    for m in (101, 201):
        r = np.linspace(0.0, 1.0, m)
        res.append(neumann_residual(GraphFunction("axisymmetric", 2 + 0.2 * np.cos(np.pi * r))))
    assert res[0] / res[1] >= 3.5


def test_enforce_neumann_zeroes_residual():
    x = np.linspace(-1, 1, 51)
    vals = enforce_neumann(2 + 0.1 * x, "interval")
    assert neumann_residual(GraphFunction("interval", vals)) <= 1e-13


@pytest.mark.parametrize("mode", ["interval", "axisymmetric"])
@pytest.mark.parametrize("lam", [1.5, 2.0, 4.0])
def test_cap_is_umbilic_sphere(mode, lam):
    geom = geometry_field(cap(lam, 401, mode))
    k = (lam * lam - 1) / (2 * lam)
    assert np.max(np.abs(geom.kappa - k)) <= 1e-6
    n = geom.kappa.shape[1]
    np.testing.assert_allclose(geom.H, n * k, atol=2e-6)
    sph = slice_sphere(lam)
    centre = np.zeros(geom.X.shape[1])
    centre[0] = sph.center_height
    assert np.max(np.abs(np.linalg.norm(geom.X - centre, axis=1) - sph.radius)) <= 1e-12


def test_cap2_heights():
    geom = geometry_field(cap(2.0, 401))
    assert geom.w[0] == pytest.approx(1 / 3, abs=1e-15)
    assert geom.w[-1] == pytest.approx(3 / 5, abs=1e-15)
    # independent evaluation of the chart
    assert map_point([1.0, 0.0], 2.0)[0] == pytest.approx(3 / 5, abs=1e-15)


def test_field_invariants_on_perturbed_cap():
    u = perturbed_cap(2.0, 0.2, 401)
    geom = geometry_field(u)
    np.testing.assert_allclose(np.linalg.norm(geom.N, axis=1), 1.0, atol=1e-14)
    tang = np.einsum("pc,pic->pi", geom.N, geom.dX)
    assert np.max(np.abs(tang) / np.linalg.norm(geom.dX, axis=2)) <= 1e-8
    # metric two ways: pullback of the ambient metric and e^{2psi}(u_i u_j + sigma_ij)
    pts = u.points()
    sig = sigma_metric(pts, u.values)
    e2 = conformal_factor(pts, u.values) ** 2
    g_formula = e2[:, None, None] * (np.einsum("pi,pj->pij", geom.Du, geom.Du) + sig)
    np.testing.assert_allclose(geom.g, g_formula, rtol=1e-10, atol=1e-14)
    v2 = 1 + np.einsum("pi,pij,pj->p", geom.Du, np.linalg.inv(sig), geom.Du)
    np.testing.assert_allclose(geom.v, np.sqrt(v2), rtol=1e-12)
    assert np.all(geom.v >= 1.0)
    np.testing.assert_allclose(geom.H, np.einsum("pij,pji->p", geom.g_inv, geom.h), rtol=1e-12)
    assert np.all(np.diff(geom.kappa, axis=1) >= 0.0)
    assert np.all(np.einsum("pc,pc->p", geom.df_dlambda, geom.N) < 0.0)
    assert np.all(geom.N[:, 0] < 0.0)


def test_flat_disk_geometry():
    geom = geometry_field(GraphFunction("axisymmetric", np.ones(41)))
    np.testing.assert_allclose(geom.kappa, 0.0, atol=1e-13)
    np.testing.assert_allclose(geom.w, 0.0, atol=1e-15)


def test_below_disk_is_rejected():
    with pytest.raises(NonFiniteGeometry):
        geometry_field(GraphFunction("axisymmetric", np.full(11, 0.9)))


def test_revolution_formulas_on_caps():
    for mode in ("interval", "axisymmetric"):
        k_mer, k_par = axisym_curvatures(meridian_profile(cap(2.0, 201, mode)))
        np.testing.assert_allclose(k_mer, 0.75, atol=1e-12)
        np.testing.assert_allclose(k_par, 0.75, atol=1e-12)


def test_revolution_formulas_agree_with_kernel():
    u = perturbed_cap(2.0, 0.2, 401)
    assert np.max(dual_path_residual(u)) <= 1e-6
    k_mer, k_par = axisym_curvatures(meridian_profile(u))
    geom = geometry_field(u)
    np.testing.assert_allclose(k_mer + k_par, geom.H, rtol=1e-7)


def test_pole_is_umbilic():
    gaps = []
    for m in (101, 201):
        u = perturbed_cap(2.0, 0.2, m)
        k = geometry_field(u).kappa[0]
        gaps.append(abs(k[1] - k[0]))
    assert gaps[1] <= max(gaps[0], 1e-7)
    assert gaps[1] <= 1e-7


@pytest.mark.parametrize("mode", ["interval", "axisymmetric"])
def test_conormal_is_the_sphere_normal(mode):
    # perpendicularity: the conormal pushes forward to the position vector itself
    for u in (cap(2.0, 401, mode), perturbed_cap(2.0, 0.2, 401, mode)):
        geom = geometry_field(u)
        fr = boundary_frame(u, geom)
        g = geom.g[fr.index]
        np.testing.assert_allclose(np.einsum("pi,pij,pj->p", fr.n_tilde, g, fr.n_tilde), 1.0, rtol=1e-13)
        push = np.einsum("pi,pic->pc", fr.n_tilde, geom.dX[fr.index])
        assert np.max(np.abs(push - geom.X[fr.index])) <= 1e-6


def test_conormal_orthogonal_to_boundary_polar():
    R, T = polar_grid(201)
    u = GraphFunction("polar2d", enforce_neumann(2 + 0.2 * np.cos(np.pi * R), "polar2d"))
    geom = geometry_field(u)
    fr = boundary_frame(u, geom)
    cross = np.einsum("pi,pij,pj->p", fr.n_tilde, geom.g[fr.index], fr.z_I)
    assert np.max(np.abs(cross)) <= 1e-10


def test_polar_matches_axisymmetric():
    m = 101
    R, _ = polar_grid(m, 16)
    prof = perturbed_cap(2.0, 0.2, m)
    gp = geometry_field(GraphFunction("polar2d", np.broadcast_to(prof.values[:, None], R.shape)))
    ga = geometry_field(prof)
    np.testing.assert_allclose(gp.H.reshape(R.shape)[:, 0], ga.H, rtol=1e-9)
    assert area(GraphFunction("polar2d", np.broadcast_to(prof.values[:, None], R.shape))) == pytest.approx(
        area(prof), rel=1e-6)


def test_boundary_derivative_examples():
    u = cap(2.0, 401)
    geom = geometry_field(u)
    fr = boundary_frame(u, geom)
    assert directional_boundary_derivative(geom.w, u, fr)[0] == pytest.approx(0.6, abs=1e-6)
    assert directional_boundary_derivative(np.full(u.m, 3.0), u, fr)[0] == pytest.approx(0.0, abs=1e-12)


def test_boundary_height_refinement():
    res = []
    for m in (201, 401):
        u = perturbed_cap(2.0, 0.2, m)
        geom = geometry_field(u)
        fr = boundary_frame(u, geom)
        res.append(abs(directional_boundary_derivative(geom.w, u, fr)[0] - geom.w[-1]))
    assert res[0] / res[1] >= 3.0


def test_cap_areas():
    assert area(cap(2.0, 401)) == pytest.approx(32 * math.pi / 45, rel=1e-9)
    # closed-form cap area 8 pi lam^2 / ((1 + lam)^2 (1 + lam^2))
    for lam in (1.5, 4.0):
        ex = 8 * math.pi * lam**2 / ((1 + lam) ** 2 * (1 + lam**2))
        assert area(cap(lam, 401)) == pytest.approx(ex, rel=1e-9)
    assert area(cap(2.0, 401, "interval")) == pytest.approx(8 / 3 * math.acos(0.8), rel=1e-9)
