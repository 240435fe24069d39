"""Translation sweep of a minimized annulus against a test surface.

The annulus is pushed along a one-parameter family of isometries ``g_c``
and the largest ``c`` at which it still meets the test surface is located
by a coarse scan followed by bisection.  Intersections are exact
triangle/triangle tests in chart coordinates, so a contact is any
transversal crossing rather than a proximity threshold.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Isometry, SpaceId, apply_isometry
from .mesh import TriMesh
from .plateau import RegionSpec
from .surfaces import ParamSurface


class ContactKind(str, enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    NONE = "None"


class ContactAmbiguityError(RuntimeError):
    """Contact points were found both on and away from the boundary."""

    def __init__(self, message: str, c: float, boundary_distances: np.ndarray):
        super().__init__(message)
        self.c = c
        self.boundary_distances = boundary_distances


@dataclass
class SweepFamily:
    """Isometries ``c -> g_c`` for ``c`` in ``[0, c_max]`` with ``g_0`` the identity."""

    space: SpaceId
    generator: Callable[[float], Isometry]
    c_max: float

    def at(self, c: float) -> Isometry:
        return self.generator(float(c))

    @classmethod
    def from_spec(cls, spec: RegionSpec, c_max: float | None = None) -> "SweepFamily":
        """Push the annulus down by ``c`` along its reference translation."""
        return cls(spec.space, lambda c: spec.translation(-c), spec.eps if c_max is None else c_max)


@dataclass
class ScanOptions:
    c_step: float = 0.005
    refine_tol: float = 1e-6
    contact_tol: float = 1e-4

    @classmethod
    def from_json(cls, obj: dict | None) -> "ScanOptions":
        obj = dict(obj or {})
        unknown = set(obj) - {"c_step", "refine_tol", "contact_tol"}
        if unknown:
            raise ValueError(f"unknown scan options {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict:
        return {"c_step": self.c_step, "refine_tol": self.refine_tol, "contact_tol": self.contact_tol}


@dataclass
class SweepResult:
    c_star: float | None
    contact_kind: ContactKind
    contact_point: np.ndarray | None
    boundary_distance: float | None = None
    saturated: bool = False
    scanned: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "c_star": self.c_star,
            "contact_kind": self.contact_kind.value,
            "contact_point": None if self.contact_point is None else self.contact_point.tolist(),
            "boundary_distance": self.boundary_distance,
            "saturated": self.saturated,
        }


# ---------------------------------------------------------------------------
# exact intersection

def segment_triangle_hits(P0, P1, A, B, C, eps: float = 1e-14):
    """Vectorized Moller-Trumbore test of segments ``P0 P1`` against triangles ``ABC``.

    Returns ``(hit, points)``.  Segments parallel to the triangle plane are
    treated as misses.
    """
    d = P1 - P0
    e1 = B - A
    e2 = C - A
    pv = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pv)
    ok = np.abs(det) > eps * np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1) * np.linalg.norm(d, axis=1)
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tv = P0 - A
    u = np.einsum("ij,ij->i", tv, pv) * inv
    qv = np.cross(tv, e1)
    v = np.einsum("ij,ij->i", d, qv) * inv
    t = np.einsum("ij,ij->i", e2, qv) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= 0) & (t <= 1)
    return hit, P0 + t[:, None] * d


def _candidate_pairs(VA, TA, VB, TB, tree_B=None):
    """Triangle pairs whose bounding boxes overlap."""
    a = VA[TA]
    b = VB[TB]
    lo_a, hi_a = a.min(1), a.max(1)
    lo_b, hi_b = b.min(1), b.max(1)
    keep = np.all((hi_a >= lo_b.min(0)) & (lo_a <= hi_b.max(0)), axis=1)
    ia = np.flatnonzero(keep)
    if ia.size == 0:
        return ia, ia
    cb = b.mean(1)
    rb = np.linalg.norm(b - cb[:, None], axis=2).max()
    ca = a[ia].mean(1)
    ra = np.linalg.norm(a[ia] - ca[:, None], axis=2).max(1)
    tree = tree_B if tree_B is not None else cKDTree(cb)
    lists = tree.query_ball_point(ca, ra + rb)
    counts = np.fromiter((len(x) for x in lists), int, len(lists))
    if counts.sum() == 0:
        return np.zeros(0, int), np.zeros(0, int)
    pa = np.repeat(ia, counts)
    pb = np.fromiter((j for x in lists for j in x), int, int(counts.sum()))
    box = np.all((hi_a[pa] >= lo_b[pb]) & (lo_a[pa] <= hi_b[pb]), axis=1)
    return pa[box], pb[box]


def mesh_intersection_points(VA, TA, VB, TB, tree_B=None) -> np.ndarray:
    """Points where edges of one mesh cross triangles of the other."""
    pa, pb = _candidate_pairs(VA, TA, VB, TB, tree_B)
    if pa.size == 0:
        return np.zeros((0, 3))
    a = VA[TA[pa]]
    b = VB[TB[pb]]
    pts = []
    for k in range(3):
        for s, tri in ((a, b), (b, a)):
            hit, p = segment_triangle_hits(s[:, k], s[:, (k + 1) % 3], tri[:, 0], tri[:, 1], tri[:, 2])
            pts.append(p[hit])
    return np.concatenate(pts)


# ---------------------------------------------------------------------------
# test surfaces

def param_mesh(S: ParamSurface, n: int = 64) -> TriMesh:
    """Triangulate a parametrized patch on an ``n x n`` grid."""
    u0, u1, v0, v1 = S.domain
    U, W = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n), indexing="ij")
    V = S(U, W).reshape(-1, 3)
    idx = np.arange(n * n).reshape(n, n)
    i, j = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    T = np.concatenate([np.stack([idx[i, j], idx[i + 1, j], idx[i + 1, j + 1]], -1),
                        np.stack([idx[i, j], idx[i + 1, j + 1], idx[i, j + 1]], -1)])
    return TriMesh(V, T)


def reference_patch(spec: RegionSpec, level: float, outer: float, hole: float = 0.0,
                    n_theta: int = 128, n_radial: int = 48) -> TriMesh:
    """The reference surface at ``level`` over the planar disk of radius ``outer``.

    A positive ``hole`` removes the concentric disk of that radius.
    """
    if not 0 <= hole < outer:
        raise ValueError("need 0 <= hole < outer")
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    start = hole if hole > 0 else outer / n_radial
    rho = np.linspace(start, outer, n_radial)
    RH, TH = np.meshgrid(rho, th, indexing="ij")
    V = spec.lift(RH * np.cos(TH), RH * np.sin(TH), np.full(RH.shape, float(level))).reshape(-1, 3)
    idx = np.arange(n_radial * n_theta).reshape(n_radial, n_theta)
    i, j = np.meshgrid(np.arange(n_radial - 1), np.arange(n_theta), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jn = (j + 1) % n_theta
    T = np.concatenate([np.stack([idx[i, j], idx[i + 1, j], idx[i + 1, jn]], -1),
                        np.stack([idx[i, j], idx[i + 1, jn], idx[i, jn]], -1)])
    if hole == 0:
        centre = len(V)
        V = np.vstack([V, spec.lift(0.0, 0.0, float(level))[None]])
        fan = np.stack([np.full(n_theta, centre), idx[0], np.roll(idx[0], -1)], -1)
        T = np.concatenate([T, fan])
    return TriMesh(V, T)


# ---------------------------------------------------------------------------
# sweep

def _segment_distances(points: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Chart distance from each point to the nearest segment."""
    if len(points) == 0 or len(segs) == 0:
        return np.full(len(points), np.inf)
    a, b = segs[:, 0], segs[:, 1]
    d = b - a
    dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    out = np.empty(len(points))
    for k in range(0, len(points), 256):
        p = points[k:k + 256, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - a, d) / dd, 0, 1)
        out[k:k + 256] = np.linalg.norm(p - (a + t[..., None] * d), axis=2).min(1)
    return out


def crossings_at(space: SpaceId, M: TriMesh, S_test: ParamSurface | TriMesh, g: Isometry) -> np.ndarray:
    """Crossing points of ``g(M)`` with the test surface."""
    S = param_mesh(S_test) if isinstance(S_test, ParamSurface) else S_test
    V = apply_isometry(space, g, M.vertices)
    return mesh_intersection_points(V, M.triangles, S.vertices, S.triangles)


def sweep_contact(space: SpaceId, M: TriMesh, S_test: ParamSurface | TriMesh, family: SweepFamily,
                  scan: ScanOptions | dict | None = None) -> SweepResult:
    """Largest ``c`` in ``[0, c_max]`` at which ``g_c(M)`` still meets ``S_test``.

    The scan walks down from ``c_max`` in steps of ``c_step``; the first
    intersecting sample brackets the contact and bisection refines it to
    ``refine_tol``.  The contact is classified by the chart distance of the
    crossing points to ``g_c(boundary of M)``: within ``contact_tol`` is
    ``Boundary``, beyond it ``Interior``.  A mixture raises
    :class:`ContactAmbiguityError`.  If ``g_{c_max}(M)`` still meets the
    surface the result is ``c_max`` with ``saturated`` set.
    """
    opts = scan if isinstance(scan, ScanOptions) else ScanOptions.from_json(scan)
    if opts.c_step <= 0 or opts.refine_tol <= 0:
        raise ValueError("c_step and refine_tol must be positive")
    S = param_mesh(S_test) if isinstance(S_test, ParamSurface) else S_test
    VB, TB = S.vertices, S.triangles
    tree_B = cKDTree(VB[TB].mean(1))

    def crossings(c):
        V = apply_isometry(space, family.at(c), M.vertices)
        return mesh_intersection_points(V, M.triangles, VB, TB, tree_B)

    scanned = []
    n = int(math.ceil(family.c_max / opts.c_step - 1e-12))
    grid = np.linspace(0.0, family.c_max, n + 1)
    hi = lo = None
    for k in range(len(grid) - 1, -1, -1):
        pts = crossings(grid[k])
        scanned.append((float(grid[k]), len(pts)))
        if len(pts):
            lo = k
            break
    if lo is None:
        return SweepResult(None, ContactKind.NONE, None, scanned=scanned)
    c_lo, pts_lo = float(grid[lo]), pts
    saturated = lo == len(grid) - 1
    if not saturated:
        c_hi = float(grid[lo + 1])
        while c_hi - c_lo > opts.refine_tol:
            mid = 0.5 * (c_lo + c_hi)
            pts = crossings(mid)
            if len(pts):
                c_lo, pts_lo = mid, pts
            else:
                c_hi = mid
    g = family.at(c_lo)
    segs = M.with_vertices(apply_isometry(space, g, M.vertices)).boundary_segments()
    dist = _segment_distances(pts_lo, segs)
    near = dist <= opts.contact_tol
    if near.any() and not near.all():
        raise ContactAmbiguityError(
            f"contact at c={c_lo:.6g} has {int(near.sum())} of {len(dist)} crossings within "
            f"{opts.contact_tol:g} of the boundary", c_lo, dist)
    kind = ContactKind.BOUNDARY if near.all() else ContactKind.INTERIOR
    point = pts_lo[np.argmin(dist)]
    return SweepResult(c_lo, kind, point, float(dist.min()), saturated, scanned)
