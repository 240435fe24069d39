"""Boundary-aware triangle meshes in canonical coordinates, with Riemannian area.

Triangles are affine in the chart.  The area of a triangle with edge
matrix ``E = [p1 - p0, p2 - p0]`` is the integral of
``sqrt(det(E^T G(x) E))`` over the reference triangle, evaluated with a
one-point (centroid) or three-point rule.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .geometry import SpaceId, apply_isometry, coframe_at, metric_at, metric_derivative_at

# barycentric points and weights (weights sum to one)
QUADRATURE = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    3: (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3)),
}


class MeshTopologyError(ValueError):
    pass


def boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Directed edges ``(i, j)`` used by exactly one triangle (undirected count one)."""
    t = np.asarray(triangles)
    if len(t) == 0:
        return np.zeros((0, 2), dtype=int)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e[counts[inv.ravel()] == 1]


def chain_loops(edges: np.ndarray) -> list[np.ndarray]:
    """Order directed boundary edges into closed vertex cycles."""
    nxt = {}
    for i, j in edges:
        if int(i) in nxt:
            raise MeshTopologyError(f"vertex {i} starts two boundary edges")
        nxt[int(i)] = int(j)
    loops = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur not in nxt or cur in seen:
                raise MeshTopologyError("boundary edges do not close into loops")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.array(loop, dtype=int))
    return loops


@dataclass
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray | None = None
    boundary_loops: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=int).reshape(-1, 3)
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise MeshTopologyError("triangle references a missing vertex")
        if not self.boundary_loops:
            self.boundary_loops = chain_loops(boundary_edges(self.triangles))
        if self.boundary_flags is None:
            flags = np.zeros(len(self.vertices), dtype=bool)
            for loop in self.boundary_loops:
                flags[loop] = True
            self.boundary_flags = flags
        self.boundary_flags = np.asarray(self.boundary_flags, dtype=bool)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_flags)

    def with_vertices(self, vertices) -> "TriMesh":
        return TriMesh(np.array(vertices, dtype=float), self.triangles.copy(),
                       self.boundary_flags.copy(), [l.copy() for l in self.boundary_loops])

    def transformed(self, space: SpaceId, g) -> "TriMesh":
        return self.with_vertices(apply_isometry(space, g, self.vertices))

    def is_oriented(self) -> bool:
        """Every edge shared by two triangles is traversed in opposite directions."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        _, counts = np.unique(e, axis=0, return_counts=True)
        return bool(np.all(counts == 1))

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    def boundary_segments(self) -> np.ndarray:
        """``(k, 2, 3)`` array of boundary edge endpoints."""
        segs = []
        for loop in self.boundary_loops:
            segs.append(np.stack([self.vertices[loop], self.vertices[np.roll(loop, -1)]], axis=1))
        if not segs:
            return np.zeros((0, 2, 3))
        return np.concatenate(segs)


# ---------------------------------------------------------------------------
# area

def _edge_matrices(V: np.ndarray, T: np.ndarray):
    p0, p1, p2 = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    E = np.stack([p1 - p0, p2 - p0], axis=-1)  # (m, 3, 2)
    return np.stack([p0, p1, p2], axis=1), E


def triangle_areas(space: SpaceId, V, T, quadrature: int = 1) -> np.ndarray:
    V = np.asarray(V, float)
    T = np.asarray(T, int)
    if len(T) == 0:
        return np.zeros(0)
    P, E = _edge_matrices(V, T)
    bary, w = QUADRATURE[quadrature]
    out = np.zeros(len(T))
    for lam, wq in zip(bary, w):
        x = np.einsum("k,mkd->md", lam, P)
        M = np.einsum("mia,mij,mjb->mab", E, metric_at(space, x), E)
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] ** 2
        out += wq * 0.5 * np.sqrt(np.maximum(det, 0.0))
    return out


def mesh_area(space: SpaceId, M: TriMesh, quadrature: int = 1) -> float:
    return float(triangle_areas(space, M.vertices, M.triangles, quadrature).sum())


def area_and_gradient(space: SpaceId, V, T, quadrature: int = 1):
    """Total area and its gradient with respect to every vertex coordinate."""
    V = np.asarray(V, float)
    T = np.asarray(T, int)
    grad = np.zeros_like(V)
    if len(T) == 0:
        return 0.0, grad
    P, E = _edge_matrices(V, T)
    bary, w = QUADRATURE[quadrature]
    total = 0.0
    for lam, wq in zip(bary, w):
        x = np.einsum("k,mkd->md", lam, P)
        G = metric_at(space, x)
        dG = metric_derivative_at(space, x)
        GE = np.einsum("mij,mjb->mib", G, E)
        M = np.einsum("mia,mib->mab", E, GE)
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] ** 2
        det = np.maximum(det, 1e-300)
        A = wq * 0.5 * np.sqrt(det)
        total += A.sum()
        K = np.empty_like(M)
        K[:, 0, 0] = M[:, 1, 1] / det
        K[:, 1, 1] = M[:, 0, 0] / det
        K[:, 0, 1] = K[:, 1, 0] = -M[:, 0, 1] / det
        # edge part: dA = A * sum((G E K) * dE)
        GEK = A[:, None, None] * np.einsum("mib,mbc->mic", GE, K)
        # metric part: dA/dx_k = A/2 tr(K E^T dG_k E), spread by barycentric weights
        dM = np.einsum("mia,mkij,mjb->mkab", E, dG, E)
        gx = 0.5 * A[:, None] * np.einsum("mab,mkba->mk", K, dM)
        np.add.at(grad, T[:, 1], GEK[:, :, 0])
        np.add.at(grad, T[:, 2], GEK[:, :, 1])
        np.add.at(grad, T[:, 0], -GEK[:, :, 0] - GEK[:, :, 1])
        for k in range(3):
            np.add.at(grad, T[:, k], lam[k] * gx)
    return float(total), grad


def riemannian_gradient_norm(space: SpaceId, V, grad, mask=None) -> float:
    """``sqrt(sum_v grad_v^T G(v)^{-1} grad_v)`` over the selected vertices."""
    V = np.asarray(V, float)
    g = np.asarray(grad, float)
    if mask is not None:
        V, g = V[mask], g[mask]
    Ginv = np.linalg.inv(metric_at(space, V))
    return float(np.sqrt(np.einsum("vi,vij,vj->", g, Ginv, g)))


def vertex_areas(space: SpaceId, V, T) -> np.ndarray:
    """One third of the incident triangle areas at each vertex."""
    a = triangle_areas(space, V, T)
    out = np.zeros(len(V))
    for k in range(3):
        np.add.at(out, T[:, k], a / 3)
    return out


def triangle_normals(space: SpaceId, V, T) -> np.ndarray:
    """Unit normals in frame components at triangle centroids (orientation from vertex order)."""
    P, E = _edge_matrices(np.asarray(V, float), np.asarray(T, int))
    c = P.mean(axis=1)
    Th = coframe_at(space, c)
    a = np.einsum("mij,mj->mi", Th, E[:, :, 0])
    b = np.einsum("mij,mj->mi", Th, E[:, :, 1])
    n = np.cross(a, b)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def min_angles(space: SpaceId, V, T) -> np.ndarray:
    """Smallest interior angle (degrees) of each triangle in the metric at its centroid."""
    P, _ = _edge_matrices(np.asarray(V, float), np.asarray(T, int))
    G = metric_at(space, P.mean(axis=1))
    angles = []
    for k in range(3):
        e1 = P[:, (k + 1) % 3] - P[:, k]
        e2 = P[:, (k + 2) % 3] - P[:, k]
        d = np.einsum("mi,mij,mj->m", e1, G, e2)
        n1 = np.sqrt(np.einsum("mi,mij,mj->m", e1, G, e1))
        n2 = np.sqrt(np.einsum("mi,mij,mj->m", e2, G, e2))
        angles.append(np.degrees(np.arccos(np.clip(d / (n1 * n2), -1, 1))))
    return np.min(angles, axis=0)


# ---------------------------------------------------------------------------
# planar point location

def locate(points: np.ndarray, verts2d: np.ndarray, tris: np.ndarray, eps: float = 1e-12):
    """Containing triangles of 2D query points.

    Returns ``(counts, first_index, barycentric)``: how many triangles
    contain each point, the first such triangle (-1 if none) and the
    barycentric coordinates in it.  Candidates come from a KD-tree on
    triangle centroids.
    """
    q = np.asarray(points, float).reshape(-1, 2)
    A = verts2d[tris[:, 0]]
    B = verts2d[tris[:, 1]]
    C = verts2d[tris[:, 2]]
    cen = (A + B + C) / 3
    reach = np.max(np.linalg.norm(np.stack([A, B, C]) - cen, axis=-1)) + abs(eps) + 1e-12
    v0 = B - A
    v1 = C - A
    den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
    lists = cKDTree(cen).query_ball_point(q, reach)
    sizes = np.fromiter((len(x) for x in lists), int, len(lists))
    qi = np.repeat(np.arange(len(q)), sizes)
    ti = np.fromiter((t for x in lists for t in x), int, int(sizes.sum()))
    d = q[qi] - A[ti]
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (d[:, 0] * v1[ti, 1] - v1[ti, 0] * d[:, 1]) / den[ti]
        l2 = (v0[ti, 0] * d[:, 1] - d[:, 0] * v0[ti, 1]) / den[ti]
    l0 = 1 - l1 - l2
    ok = (l0 >= -eps) & (l1 >= -eps) & (l2 >= -eps) & (np.abs(den[ti]) > 0)
    qi, ti, l0, l1, l2 = qi[ok], ti[ok], l0[ok], l1[ok], l2[ok]
    counts = np.bincount(qi, minlength=len(q))
    first = np.full(len(q), -1)
    bary = np.zeros((len(q), 3))
    # keep the lowest-index hit per query point
    order = np.lexsort((ti, qi))
    qi, ti = qi[order], ti[order]
    l0, l1, l2 = l0[order], l1[order], l2[order]
    uniq = np.ones(len(qi), dtype=bool)
    uniq[1:] = qi[1:] != qi[:-1]
    first[qi[uniq]] = ti[uniq]
    bary[qi[uniq]] = np.stack([l0[uniq], l1[uniq], l2[uniq]], -1)
    return counts, first, bary


# ---------------------------------------------------------------------------
# file formats

def write_obj(path, M: TriMesh) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for x, y, z in M.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for i, j, k in M.triangles + 1:
            fh.write(f"f {i} {j} {k}\n")
    return path


def read_obj(path) -> TriMesh:
    verts, faces = [], []
    with Path(path).open() as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshTopologyError("only triangular faces are supported")
                faces.append([i - 1 for i in idx])
    return TriMesh(np.array(verts), np.array(faces, dtype=int))


def write_scalar_csv(path, values) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_index", "value"])
        for i, val in enumerate(np.asarray(values, float)):
            w.writerow([i, f"{val:.17g}"])
    return path


def read_scalar_csv(path) -> np.ndarray:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    out = np.empty(len(rows))
    for r in rows:
        out[int(r["vertex_index"])] = float(r["value"])
    return out
