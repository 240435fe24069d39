import numpy as np
import pytest

from homegeo.geometry import NIL3, SOL3
from homegeo.graph import GraphGrid, rectangle
from homegeo.maxprinciple import (DiscreteSurfaceFunction, apply_laplacian, discrete_max_principle_check,
                                  grid_to_mesh, intrinsic_delaunay, laplacian_matrix, random_subharmonic_field)
from homegeo.mesh import TriMesh
from homegeo.plateau import ruled_mesh, sol_spec


@pytest.fixture(scope="module")
def mesh():
    return ruled_mesh(sol_spec(), 32)


def test_constant_function_passes(mesh):
    res = discrete_max_principle_check(DiscreteSurfaceFunction(mesh, np.full(len(mesh.vertices), 2.0)))
    assert res["passes"] and res["status"] == "passed"
    assert res["interior_max"] == res["boundary_sup"] == 2.0
    assert res["min_laplacian"] == 0.0


def test_interior_spike_fails_hypothesis(mesh):
    f = np.zeros(len(mesh.vertices))
    f[mesh.interior[len(mesh.interior) // 2]] = 1.0
    res = discrete_max_principle_check(DiscreteSurfaceFunction(mesh, f))
    assert res["status"] == "hypothesis_failed"
    assert res["passes"]
    assert not res["conclusion_holds"]
    assert res["min_laplacian"] < 0


def test_closed_surface_rejected():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    T = np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]])
    with pytest.raises(ValueError):
        discrete_max_principle_check(DiscreteSurfaceFunction(TriMesh(V, T), np.zeros(4)))


def test_value_shape_checked(mesh):
    with pytest.raises(ValueError):
        DiscreteSurfaceFunction(mesh, np.zeros(3))


def test_laplacian_validation(mesh):
    with pytest.raises(ValueError):
        laplacian_matrix(mesh, "fem")
    with pytest.raises(ValueError):
        laplacian_matrix(mesh, "cotan")


@pytest.mark.parametrize("kind", ["uniform", "cotan", "delaunay"])
def test_laplacian_structure(mesh, kind):
    L = laplacian_matrix(mesh, kind, SOL3)
    np.testing.assert_allclose(np.asarray(L.sum(axis=1)).ravel(), 0.0, atol=1e-10)
    off = L - np.diag(L.diagonal())
    assert off.min() >= 0
    assert np.allclose((L - L.T).toarray(), 0.0)


@pytest.mark.parametrize("kind", ["uniform", "cotan"])
def test_random_subharmonic_fields(mesh, kind):
    rng = np.random.default_rng(42)
    for _ in range(50):
        f = random_subharmonic_field(mesh, rng, kind, SOL3)
        F = DiscreteSurfaceFunction(mesh, f, SOL3)
        assert apply_laplacian(F, kind)[mesh.interior].min() >= -1e-9
        res = discrete_max_principle_check(F, kind)
        assert res["status"] == "passed"
        assert res["interior_max"] <= res["boundary_sup"] + 1e-10


def test_intrinsic_delaunay_weights_nonnegative():
    M = ruled_mesh(sol_spec(), 48)
    T, lengths = intrinsic_delaunay(SOL3, M)
    assert T.shape == M.triangles.shape
    assert TriMesh(M.vertices, T).is_oriented()
    cot = {}
    for tri in T:
        for k in range(3):
            a, b, o = int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3]), int(tri[k])
            la = lengths[tuple(sorted((a, b)))]
            lb = lengths[tuple(sorted((a, o)))]
            lc = lengths[tuple(sorted((b, o)))]
            cosv = (lb**2 + lc**2 - la**2) / (2 * lb * lc)
            cot.setdefault(tuple(sorted((a, b))), []).append(cosv / np.sqrt(1 - cosv**2))
    assert min(sum(v) for v in cot.values() if len(v) == 2) >= -1e-12


def test_delaunay_flips_obtuse_pair():
    # two triangles sharing a long diagonal: both opposite angles are obtuse
    V = np.array([[0, 0, 0], [2, 0, 0], [1, 0.2, 0], [1, -0.2, 0]], float)
    T = np.array([[0, 1, 2], [1, 0, 3]])
    T2, lengths = intrinsic_delaunay(SOL3, TriMesh(V, T))
    assert (2, 3) in lengths
    assert lengths[(2, 3)] == pytest.approx(0.4, rel=1e-12)
    assert not any({0, 1} <= set(t) for t in T2.tolist())


def test_grid_carrier():
    dom = rectangle((-1, 1, -1, 1), 9)
    xy = dom.xy()
    g = GraphGrid(dom, np.where(dom.active, 0.0, np.nan), NIL3)
    M = grid_to_mesh(g)
    assert M.is_oriented()
    assert len(M.boundary_loops) == 1
    F = DiscreteSurfaceFunction.from_grid(g, xy[..., 0])
    # linear functions are discretely harmonic for the symmetric grid stencil
    np.testing.assert_allclose(apply_laplacian(F)[M.interior], 0.0, atol=1e-12)
    res = discrete_max_principle_check(F)
    assert res["status"] == "passed"
    assert res["boundary_sup"] == pytest.approx(1.0)
