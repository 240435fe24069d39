import math

import numpy as np
import pytest
from scipy import integrate

from homegeo.geometry import NIL3, SOL3, Isometry, IsometryKind, apply_isometry, sol_T
from homegeo.mesh import TriMesh, mesh_area
from homegeo.plateau import (MeshDegenerationError, MinimizationError, MinimizeOptions, RegionSpec,
                             boundary_curves, douglas_areas, graphness_check, height_profile,
                             minimize_area_annulus, nil_graph_spec, nil_vertical_spec, perturbation_check,
                             ruled_mesh, slab_and_monotonicity_check, sol_spec, spec_from_boundary)


def test_sol_boundary_curves():
    inner, outer = boundary_curves(sol_spec(), 64)
    assert inner.shape == outer.shape == (64, 3)
    np.testing.assert_allclose(inner[:, 2], 1.1)
    np.testing.assert_allclose(outer[:, 2], 1.0)
    np.testing.assert_allclose(np.linalg.norm(inner[:, :2], axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(outer[:, :2], axis=1), 4.0)


def test_nil_boundary_curves():
    inner, outer = boundary_curves(nil_graph_spec(), 32)
    np.testing.assert_allclose(inner[:, 2], 0.1)
    np.testing.assert_allclose(outer[:, 2], 0.0)


def test_boundary_curves_degenerate_and_validation():
    inner, outer = boundary_curves(sol_spec(eps=0.0), 16)
    np.testing.assert_allclose(inner[:, 2], outer[:, 2])
    with pytest.raises(ValueError):
        boundary_curves(sol_spec(), 8)
    with pytest.raises(ValueError):
        sol_spec(r=2.0, R=1.0)
    with pytest.raises(ValueError):
        sol_spec(eps=-0.1)
    with pytest.raises(ValueError):
        RegionSpec(NIL3, "sol_special_plane", 1.0, 2.0, 0.1)


def test_spec_json_roundtrip_and_fit():
    spec = nil_graph_spec(graph="x3=x1*x2/2")
    assert RegionSpec.from_json(spec.to_json()) == spec
    fit = spec_from_boundary(SOL3, boundary_curves(sol_spec(), 64))
    assert fit.r == pytest.approx(1.0) and fit.R == pytest.approx(4.0)
    assert fit.eps == pytest.approx(0.1) and fit.h == pytest.approx(1.0)


def test_vertical_plane_lift_roundtrip():
    spec = nil_vertical_spec()
    X = spec.lift(np.array([0.3, -1.0]), np.array([0.5, 2.0]), np.array([0.05, 0.0]))
    np.testing.assert_allclose(spec.planar(X), [[0.3, 0.5], [-1.0, 2.0]], atol=1e-14)
    np.testing.assert_allclose(spec.height(X), [0.05, 0.0], atol=1e-14)


def test_flat_annulus_area():
    spec = sol_spec(eps=0.0)
    res = minimize_area_annulus(SOL3, spec=spec, n_theta=64)
    assert res.iterations == 0
    polygon = 0.5 * 64 * math.sin(2 * math.pi / 64) * (spec.R**2 - spec.r**2)
    assert res.area == pytest.approx(polygon, rel=1e-12)
    assert res.area == pytest.approx(math.pi * (spec.R**2 - spec.r**2), rel=2e-3)


@pytest.mark.parametrize("spec", [sol_spec(R=2.0), nil_graph_spec(R=2.0)], ids=["sol3", "nil3"])
def test_minimizer_small_mesh(spec):
    res = minimize_area_annulus(spec.space, spec=spec, n_theta=48)
    assert res.grad_norm <= 1e-6
    hist = np.array(res.area_history)
    assert np.all(np.diff(hist) <= 0)
    assert res.area == hist[-1] < hist[0]
    t = spec.height(res.mesh.vertices)
    # coarse Sol meshes dip a few 1e-4 below the lower plane
    assert t.min() >= spec.h - 1e-3 and t.max() <= spec.h + spec.eps + 1e-3
    assert perturbation_check(spec.space, res.mesh, spec, n=100, delta=1e-3) >= -1e-9


def test_minimizer_gradient_rule_agrees_with_newton():
    spec = nil_graph_spec(R=1.5)
    a = minimize_area_annulus(NIL3, spec=spec, n_theta=24)
    b = minimize_area_annulus(NIL3, spec=spec, n_theta=24,
                              opts={"step_rule": "gradient", "max_iter": 20000, "grad_tol": 1e-6})
    assert b.area == pytest.approx(a.area, abs=1e-9)


def test_boundary_input_path():
    spec = sol_spec(R=2.0)
    curves = boundary_curves(spec, 32)
    init = ruled_mesh(spec, 32)
    res = minimize_area_annulus(SOL3, boundary=curves, init=init)
    ref = minimize_area_annulus(SOL3, spec=spec, n_theta=32)
    assert res.area == pytest.approx(ref.area, abs=1e-12)
    shifted = [c + [0.0, 0.0, 0.01] for c in curves]
    with pytest.raises(ValueError):
        minimize_area_annulus(SOL3, boundary=shifted, init=init)
    with pytest.raises(ValueError):
        minimize_area_annulus(SOL3)


@pytest.mark.parametrize("spec,g", [
    (sol_spec(R=2.5), sol_T(0.1)),
    (sol_spec(R=2.5), Isometry(IsometryKind.SOL_TRANSLATE_X2, 0.4)),
    (nil_graph_spec(R=2.0), Isometry(IsometryKind.NIL_VERTICAL, 0.7)),
], ids=["sol_T", "sol_x2", "nil_vertical"])
def test_isometry_equivariance(spec, g):
    opts = {"grad_tol": 1e-7}
    base = minimize_area_annulus(spec.space, spec=spec, n_theta=32, opts=opts)
    init = ruled_mesh(spec, 32).transformed(spec.space, g)
    curves = [apply_isometry(spec.space, g, c) for c in boundary_curves(spec, 32)]
    moved_spec = spec.with_(h=spec.h + (g.parameter if g.kind in (IsometryKind.SOL_TC, IsometryKind.NIL_VERTICAL)
                                        else 0.0))
    moved = minimize_area_annulus(spec.space, boundary=curves, init=init, spec=moved_spec, opts=opts)
    assert not moved.remeshed
    assert moved.area == pytest.approx(base.area, abs=1e-9)
    back = apply_isometry(spec.space, Isometry(g.kind, -g.parameter), moved.mesh.vertices)
    np.testing.assert_allclose(back, base.mesh.vertices, atol=1e-6)


def test_options_validation():
    assert MinimizeOptions.from_json(None) == MinimizeOptions()
    opts = MinimizeOptions.from_json({"max_iter": 5, "quadrature": 3})
    assert MinimizeOptions.from_json(opts.to_json()) == opts
    for bad in ({"maxiter": 3}, {"step_rule": "bfgs"}, {"quadrature": 2}):
        with pytest.raises(ValueError):
            MinimizeOptions.from_json(bad)


def test_non_convergence_raises():
    with pytest.raises(MinimizationError) as info:
        minimize_area_annulus(SOL3, spec=sol_spec(), n_theta=32, opts={"max_iter": 1, "grad_tol": 1e-14})
    assert info.value.iterations == 1
    assert info.value.grad_norm > 0


def test_degenerate_init_is_remeshed():
    spec = sol_spec(R=2.0)
    bad = ruled_mesh(spec, 32, n_radial=40)
    with pytest.raises(MeshDegenerationError):
        minimize_area_annulus(SOL3, spec=spec, init=bad, n_theta=32, opts={"remesh": False})
    res = minimize_area_annulus(SOL3, spec=spec, init=bad, n_theta=32)
    assert res.remeshed
    assert res.grad_norm <= 1e-6


def _sol_lateral_reference(r, lo, hi):
    f = lambda th, s: r * math.sqrt(math.exp(2 * s) * math.sin(th) ** 2 + math.exp(-2 * s) * math.cos(th) ** 2)
    return integrate.dblquad(f, lo, hi, 0.0, 2 * math.pi, epsabs=1e-12, epsrel=1e-12)[0]


def test_douglas_sol_values():
    spec = sol_spec()
    out = douglas_areas(spec)
    assert out["area_disk_bottom"] == pytest.approx(math.pi, abs=1e-8)
    assert out["area_disk_top"] == pytest.approx(math.pi, abs=1e-8)
    assert out["area_lateral"] == pytest.approx(_sol_lateral_reference(1.0, 1.0, 1.1), rel=1e-9)
    assert out["inequality_holds"]


def test_douglas_fails_for_tall_thin_cylinder():
    out = douglas_areas(sol_spec(r=0.05, eps=1.6))
    assert out["area_lateral"] == pytest.approx(_sol_lateral_reference(0.05, 1.0, 2.6), rel=1e-9)
    assert not out["inequality_holds"]


def test_douglas_monotone_in_eps():
    lat = [douglas_areas(sol_spec(eps=e))["area_lateral"] for e in (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)]
    assert np.all(np.diff(lat) > 0)
    assert douglas_areas(sol_spec(eps=0.0))["area_lateral"] == 0.0


def test_douglas_nil_values():
    # on x3 = 0 the area density is sqrt(1 + rho^2 / 4)
    out = douglas_areas(nil_graph_spec(r=0.5))
    exact = 8 * math.pi / 3 * ((1 + 0.25 / 4) ** 1.5 - 1)
    assert out["area_disk_bottom"] == pytest.approx(exact, rel=1e-12)
    assert out["area_lateral"] == pytest.approx(2 * math.pi * 0.5 * 0.1, rel=1e-9)


def test_slab_and_monotonicity():
    spec = sol_spec(eps=0.1, R=2.0)
    radii = [2.0, 3.0, 4.0]
    meshes = [minimize_area_annulus(SOL3, spec=spec.with_(R=R), n_theta=48).mesh for R in radii]
    rep = slab_and_monotonicity_check(spec, meshes, radii, rho=1.5)
    assert rep["all_in_slab"]
    assert rep["monotone"]
    assert rep["all_gaps_positive"]
    means = [p["mean_height_at_rho"] for p in rep["per_R"]]
    assert means[0] <= means[1] <= means[2]
    with pytest.raises(ValueError):
        slab_and_monotonicity_check(spec, meshes, radii[::-1], rho=1.5)
    with pytest.raises(ValueError):
        slab_and_monotonicity_check(spec, meshes, radii, rho=2.5)


def test_height_profile_rows():
    spec = nil_graph_spec()
    prof = height_profile(spec, ruled_mesh(spec, 32), [0.6, 1.0, 2.0])
    assert prof.shape == (3, 4)
    assert np.all(np.diff(prof[:, 1]) < 0)
    assert np.all(prof[:, 2] <= prof[:, 1]) and np.all(prof[:, 1] <= prof[:, 3])


def test_graphness_flat_annulus():
    spec = sol_spec(eps=0.0)
    rep = graphness_check(SOL3, ruled_mesh(spec, 32))
    assert rep["is_graph"]
    assert rep["min_normal_component"] == pytest.approx(1.0, abs=1e-12)


def test_graphness_nil_annulus(nil_result):
    assert graphness_check(NIL3, nil_result.mesh)["is_graph"]


@pytest.mark.parametrize("name", ["sol_result", "nil_result"])
def test_default_mesh_minimizer(name, request):
    res = request.getfixturevalue(name)
    spec = res.spec
    assert res.grad_norm <= 1e-6
    assert np.all(np.diff(res.area_history) <= 0)
    t = spec.height(res.mesh.vertices)
    assert t.min() >= spec.h - 1e-3 and t.max() <= spec.h + spec.eps + 1e-3
    assert perturbation_check(spec.space, res.mesh, spec) >= -1e-9


def test_graphness_detects_fold():
    # a strip that folds back over itself in x1
    xs = np.array([0.0, 1.0, 2.0, 1.0])
    zs = np.array([0.0, 0.0, 0.5, 1.0])
    V = np.array([[x, y, z] for x, z in zip(xs, zs) for y in (0.0, 1.0)])
    T = []
    for k in range(3):
        a, b, c, d = 2 * k, 2 * k + 1, 2 * k + 2, 2 * k + 3
        T += [[a, c, d], [a, d, b]]
    rep = graphness_check(NIL3, TriMesh(V, np.array(T)), samples_per_triangle=8)
    assert not rep["is_graph"]
    assert not rep["injective_projection"]


def test_graphness_rejects_unoriented_mesh():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
    with pytest.raises(ValueError):
        graphness_check(SOL3, TriMesh(V, np.array([[0, 1, 2], [1, 2, 3]])))


def test_perturbation_check_detects_non_minimum():
    spec = sol_spec()
    M = ruled_mesh(spec, 32)
    bumped = M.vertices.copy()
    bumped[M.interior, 2] += 0.05
    worst = perturbation_check(SOL3, M.with_vertices(bumped), spec, n=200, delta=1e-2)
    assert worst < -1e-9
    assert mesh_area(SOL3, M.with_vertices(bumped)) > mesh_area(SOL3, M)
