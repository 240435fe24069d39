"""Acceptance criteria, one test each, with a pass/fail line per criterion in the summary."""
import math

import numpy as np

from conftest import criterion
from homegeo import catalog
from homegeo.geometry import NIL3, SOL3, connection_table
from homegeo.graph import (annulus, exact_error, graph_difference_report, graph_surface, rectangle,
                           solve_minimal_graph)
from homegeo.maxprinciple import DiscreteSurfaceFunction, discrete_max_principle_check, random_subharmonic_field
from homegeo.oracles import connection_table_fd
from homegeo.plateau import (douglas_areas, graphness_check, minimize_area_annulus, nil_graph_spec,
                             perturbation_check, ruled_mesh, slab_and_monotonicity_check, sol_spec)
from homegeo.surfaces import (ParamSurface, inverse_height_field, laplace_beltrami_at, mean_curvature_at,
                              second_fundamental_norm_at)
from homegeo.sweep import ContactKind, SweepFamily, crossings_at, reference_patch, sweep_contact


def saddle(x1, x2):
    return x1 * x2 / 2


def test_criterion_01_connection_tables():
    with criterion(1, "connection tables match finite-difference Christoffel symbols", 5) as d:
        rng = np.random.default_rng(42)
        worst = 0.0
        for space in (SOL3, NIL3):
            table = connection_table(space)
            for p in rng.uniform(-2, 2, size=(100, 3)):
                worst = max(worst, float(np.max(np.abs(connection_table_fd(space, p) - table))))
        d["max_err"] = f"{worst:.2e}"
        assert worst <= 1e-6


def test_criterion_02_minimality():
    with criterion(2, "reference surfaces have |H| <= 1e-4", 30) as d:
        worst = 0.0
        surfaces = catalog.minimal_reference_surfaces()
        assert len(surfaces) == 10
        for name, S in surfaces:
            space = NIL3 if name == "nil3" else SOL3
            worst = max(worst, float(np.max(np.abs(mean_curvature_at(space, S, *S.sample(32))))))
        d["max_H"] = f"{worst:.2e}"
        assert worst <= 1e-4


def test_criterion_03_second_fundamental_form():
    with criterion(3, "totally geodesic leaves vs special and vertical planes", 10) as d:
        geo = max(float(np.max(second_fundamental_norm_at(SOL3, S, *S.sample(32))))
                  for S in (catalog.sol_h1_plane(0.3), catalog.sol_h2_plane(-0.4)))
        special = max(float(np.max(np.abs(second_fundamental_norm_at(SOL3, S, *S.sample(32)) - math.sqrt(2))))
                      for S in (catalog.sol_special_plane(t) for t in (0.0, 1.0, 2.0)))
        vertical = max(float(np.max(np.abs(second_fundamental_norm_at(NIL3, S, *S.sample(32)) - 1 / math.sqrt(2))))
                       for S in (catalog.nil_vertical_plane((0, 0), (1, 0)),
                                 catalog.nil_vertical_plane((0.5, 0.5), (1, -1))))
        d.update(geodesic=f"{geo:.1e}", special_dev=f"{special:.1e}", vertical_dev=f"{vertical:.1e}")
        assert geo <= 1e-4
        assert special <= 1e-3
        assert vertical <= 1e-3


def test_criterion_04_subharmonicity():
    with criterion(4, "1/s and 1/y1 are subharmonic on minimal surfaces", 60) as d:
        f_sol = inverse_height_field(SOL3)
        sol_surfaces = [catalog.sol_special_plane(t) for t in (0.5, 1.0, 2.0)]
        sol_surfaces += [catalog.sol_exp_surface(a, s_range=(0.05, 2.0)) for a in (0.5, 1.0, 2.0)]
        sol_min, sol_max = math.inf, -math.inf
        for S in sol_surfaces:
            U, V = S.sample(32)
            s = S(U, V)[..., 2]
            assert 0 < s.min() and s.max() <= 2.0
            L = laplace_beltrami_at(SOL3, S, f_sol, U, V)
            sol_min, sol_max = min(sol_min, float(L.min())), max(sol_max, float(L.max()))

        f_nil = inverse_height_field(NIL3)
        wave = lambda a, b: saddle(a, b) + 0.3 * np.sin(a + b)
        g = solve_minimal_graph(rectangle((0.25, 3.75, -1.75, 1.75), 48), NIL3, wave)
        exact = ParamSurface(lambda u, v: np.stack(np.broadcast_arrays(u, v, saddle(u, v)), -1),
                             (0.25, 3.75, -1.75, 1.75), name="saddle")
        nil_surfaces = [graph_surface(g, margin=0.05), exact]
        nil_min, nil_max = math.inf, -math.inf
        for S in nil_surfaces:
            U, V = S.sample(32)
            y1 = S(U, V)[..., 0]
            assert 0 < y1.min() and y1.max() <= 4
            L = laplace_beltrami_at(NIL3, S, f_nil, U, V)
            nil_min, nil_max = min(nil_min, float(L.min())), max(nil_max, float(L.max()))
        d.update(sol_min=f"{sol_min:.2e}", nil_min=f"{nil_min:.2e}", witness=f"{max(sol_max, nil_max):.2e}")
        assert sol_min >= -1e-8
        assert nil_min >= -1e-8
        assert sol_max > 1e-4 and nil_max > 1e-4


def test_criterion_05_graph_solver():
    with criterion(5, "saddle recovered on the annulus, error shrinks 3x on refinement", 120) as d:
        e64 = exact_error(solve_minimal_graph(annulus(1.0, 3.0, 64), NIL3, saddle), saddle)
        e128 = exact_error(solve_minimal_graph(annulus(1.0, 3.0, 128), NIL3, saddle), saddle)
        d.update(err64=f"{e64:.2e}", err128=f"{e128:.2e}", ratio=f"{e64 / e128:.1f}")
        assert e64 <= 1e-3
        assert e64 / e128 >= 3


def test_criterion_06_initialization_independence():
    with criterion(6, "solves from different initializations agree", 120) as d:
        dom = annulus(1.0, 3.0, 64)
        data = lambda a, b: saddle(a, b) + 0.3 * np.sin(a + b)
        u = solve_minimal_graph(dom, NIL3, data, init="harmonic")
        v = solve_minimal_graph(dom, NIL3, data, init="perturbed", seed=42)
        rep = graph_difference_report(u, v)
        gap = max(rep["max_interior_gap"], float(np.max(np.abs(u.heights - v.heights)[dom.interior])))
        d["max_gap"] = f"{gap:.2e}"
        assert gap <= 2e-8


def test_criterion_07_douglas():
    with criterion(7, "Douglas inequality holds for small eps and fails for a tall thin cylinder", 10) as d:
        ok = douglas_areas(sol_spec(r=1.0, eps=0.1))
        bad = douglas_areas(sol_spec(r=0.05, eps=1.6))
        err = max(abs(ok["area_disk_bottom"] - math.pi), abs(ok["area_disk_top"] - math.pi))
        d.update(disk_err=f"{err:.1e}", lateral=f"{ok['area_lateral']:.6f}",
                 thin_margin=f"{bad['area_lateral'] - bad['area_disk_bottom'] - bad['area_disk_top']:.4f}")
        assert err <= 1e-8
        assert ok["inequality_holds"]
        assert not bad["inequality_holds"]


def _plateau_bounds(spec):
    res = minimize_area_annulus(spec.space, spec=spec)
    t = spec.height(res.mesh.vertices)
    worst = perturbation_check(spec.space, res.mesh, spec, n=100, seed=42)
    return res, float(t.min()), float(t.max()), worst


def test_criterion_08_plateau_slab():
    with criterion(8, "minimized annuli stay in the slab and are local minima", 600) as d:
        sol, lo, hi, worst = _plateau_bounds(sol_spec())
        d.update(sol_slab=f"[{lo:.6f},{hi:.6f}]", sol_grad=f"{sol.grad_norm:.1e}", sol_pert=f"{worst:.1e}")
        assert 0.999 <= lo and hi <= 1.101
        assert sol.grad_norm <= 1e-6
        assert worst >= -1e-9
        spec = nil_graph_spec()
        nil, lo, hi, worst = _plateau_bounds(spec)
        gc = graphness_check(NIL3, nil.mesh)
        d.update(nil_slab=f"[{lo:.6f},{hi:.6f}]", nil_grad=f"{nil.grad_norm:.1e}", nil_pert=f"{worst:.1e}",
                 graph=gc["is_graph"])
        assert spec.h - 1e-3 <= lo and hi <= spec.h + spec.eps + 1e-3
        assert nil.grad_norm <= 1e-6
        assert worst >= -1e-9
        assert gc["is_graph"]


def test_criterion_09_monotonicity():
    with criterion(9, "heights at radius 1.5 grow with R and inner gaps are positive", 900) as d:
        spec = sol_spec()
        radii = [2.0, 3.0, 4.0]
        meshes = [minimize_area_annulus(SOL3, spec=spec.with_(R=R)).mesh for R in radii]
        rep = slab_and_monotonicity_check(spec, meshes, radii, rho=1.5, order_tol=1e-3)
        gaps = [p["inner_gap"] for p in rep["per_R"]]
        d.update(means=",".join(f"{p['mean_height_at_rho']:.5f}" for p in rep["per_R"]),
                 gaps=",".join(f"{g:.4f}" for g in gaps))
        assert rep["monotone"]
        assert all(g > 0 for g in gaps)


def test_criterion_10_sweep():
    with criterion(10, "sweep contact is interior, none beyond eps", 300) as d:
        spec = sol_spec()
        M = minimize_area_annulus(SOL3, spec=spec).mesh
        plane = reference_patch(spec, 1.05, spec.R + 1.0, hole=1.2 * spec.r)
        fam = SweepFamily.from_spec(spec)
        res = sweep_contact(SOL3, M, plane, fam)
        beyond = SweepFamily.from_spec(spec, c_max=2 * spec.eps)
        hits = sum(len(crossings_at(SOL3, M, plane, beyond.at(c))) for c in np.linspace(0.101, 0.2, 12))
        d.update(c_star=f"{res.c_star:.9f}" if res.c_star is not None else None, kind=res.contact_kind.value,
                 hits_beyond=hits)
        assert res.contact_kind is ContactKind.INTERIOR
        assert 0 < res.c_star < 0.1
        assert hits == 0


def test_criterion_11_max_principle():
    with criterion(11, "discrete maximum principle on random fields and on 1/s", 60) as d:
        spec = sol_spec()
        rng = np.random.default_rng(42)
        worst = -math.inf
        for n_theta in (32, 64):
            M = ruled_mesh(spec, n_theta)
            for _ in range(25):
                f = random_subharmonic_field(M, rng, "cotan", SOL3)
                res = discrete_max_principle_check(DiscreteSurfaceFunction(M, f, SOL3), "cotan")
                assert res["status"] == "passed"
                worst = max(worst, res["interior_max"] - res["boundary_sup"])
        A = minimize_area_annulus(SOL3, spec=spec).mesh
        F = DiscreteSurfaceFunction(A, 1.0 / spec.height(A.vertices), SOL3)
        res = discrete_max_principle_check(F, "delaunay")
        gap = res["interior_max"] - res["boundary_sup"]
        d.update(random_worst=f"{worst:.2e}", inv_s_gap=f"{gap:.1e}", status=res["status"],
                 min_lap=f"{res['min_laplacian']:.1e}")
        assert worst <= 1e-10
        assert res["passes"] and gap <= 1e-6
