"""Annuli between two boundary circles and discrete area minimization.

A :class:`RegionSpec` fixes a reference minimal surface foliated by its
translates (special planes ``s = t`` in Sol3; vertical translates of an
entire xi-graph, or the planes ``y1 = t``, in Nil3).  Points are written
through a lift ``(a, b, t) -> canonical point`` where ``(a, b)`` are
planar coordinates on the reference and ``t`` is the translation level,
so the slab between two translates is ``h <= height <= h + eps``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import NIL3, SOL3, Isometry, IsometryKind, SpaceId, metric_at
from .mesh import TriMesh, area_and_gradient, locate, triangle_areas, triangle_normals, vertex_areas

QUALITY_FLOOR_DEG = 15.0

log = logging.getLogger(__name__)


class MeshDegenerationError(RuntimeError):
    """Triangle quality fell below the floor even after a remesh."""


class MinimizationError(RuntimeError):
    def __init__(self, message: str, grad_norm: float, iterations: int):
        super().__init__(f"{message} (gradient norm {grad_norm:.3e} after {iterations} iterations)")
        self.grad_norm = grad_norm
        self.iterations = iterations


class ReferenceKind(str, enum.Enum):
    SOL_SPECIAL_PLANE = "SolSpecialPlane"
    NIL_VERTICAL_PLANE = "NilVerticalPlane"
    NIL_ENTIRE_GRAPH = "NilEntireGraph"


@dataclass(frozen=True)
class EntireGraph:
    """An entire xi-graph ``x3 = g(x1, x2)`` with its gradient."""

    name: str
    g: Callable
    grad: Callable


ENTIRE_GRAPHS = {
    "x3=0": EntireGraph("x3=0", lambda a, b: np.zeros_like(np.asarray(a, float)),
                        lambda a, b: (np.zeros_like(np.asarray(a, float)), np.zeros_like(np.asarray(b, float)))),
    "x3=x1*x2/2": EntireGraph("x3=x1*x2/2", lambda a, b: np.asarray(a) * np.asarray(b) / 2,
                              lambda a, b: (np.asarray(b, float) / 2, np.asarray(a, float) / 2)),
}


@dataclass(frozen=True)
class RegionSpec:
    space: SpaceId
    reference: ReferenceKind
    r: float
    R: float
    eps: float
    h: float = 0.0
    graph: str = "x3=0"

    def __post_init__(self):
        object.__setattr__(self, "reference", ReferenceKind(self.reference))
        if not 0 < self.r < self.R:
            raise ValueError("region needs 0 < r < R")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        sol_ref = self.reference is ReferenceKind.SOL_SPECIAL_PLANE
        if sol_ref == self.space.is_nil:
            raise ValueError(f"reference {self.reference.value} does not live in {self.space}")
        if self.reference is ReferenceKind.NIL_ENTIRE_GRAPH:
            if self.graph not in ENTIRE_GRAPHS:
                raise ValueError(f"unknown entire graph {self.graph!r}; known: {sorted(ENTIRE_GRAPHS)}")
            _check_graph_minimal(ENTIRE_GRAPHS[self.graph])

    # -- lifts ---------------------------------------------------------------

    def lift(self, a, b, t) -> np.ndarray:
        a, b, t = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(t, float))
        ref = self.reference
        if ref is ReferenceKind.SOL_SPECIAL_PLANE:
            return np.stack([a, b, t], -1)
        if ref is ReferenceKind.NIL_ENTIRE_GRAPH:
            return np.stack([a, b, ENTIRE_GRAPHS[self.graph].g(a, b) + t], -1)
        # plane y1 = t with (y2, y3) = (a, b), written in canonical coordinates
        return np.stack([t, a, b - t * a / 2], -1)

    def lift_jacobian(self, a, b, t):
        """``(L_a, L_b, L_t)`` tangent vectors of the lift."""
        a, b, t = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(t, float))
        z, o = np.zeros_like(a), np.ones_like(a)
        ref = self.reference
        if ref is ReferenceKind.SOL_SPECIAL_PLANE:
            return np.stack([o, z, z], -1), np.stack([z, o, z], -1), np.stack([z, z, o], -1)
        if ref is ReferenceKind.NIL_ENTIRE_GRAPH:
            ga, gb = ENTIRE_GRAPHS[self.graph].grad(a, b)
            return np.stack([o, z, ga], -1), np.stack([z, o, gb], -1), np.stack([z, z, o], -1)
        return np.stack([z, o, -t / 2], -1), np.stack([z, z, o], -1), np.stack([o, z, -a / 2], -1)

    def height(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        ref = self.reference
        if ref is ReferenceKind.SOL_SPECIAL_PLANE:
            return X[..., 2]
        if ref is ReferenceKind.NIL_ENTIRE_GRAPH:
            return X[..., 2] - ENTIRE_GRAPHS[self.graph].g(X[..., 0], X[..., 1])
        return X[..., 0]

    def planar(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        if self.reference is ReferenceKind.NIL_VERTICAL_PLANE:
            return np.stack([X[..., 1], X[..., 2] + X[..., 0] * X[..., 1] / 2], -1)
        return X[..., :2]

    @property
    def axis(self) -> int:
        """Frame index of the translation direction (E3, or E1 for vertical planes)."""
        return 0 if self.reference is ReferenceKind.NIL_VERTICAL_PLANE else 2

    def translation(self, c: float) -> Isometry:
        """Isometry that raises every level by ``c``."""
        ref = self.reference
        if ref is ReferenceKind.SOL_SPECIAL_PLANE:
            return Isometry(IsometryKind.SOL_TC, c)
        if ref is ReferenceKind.NIL_ENTIRE_GRAPH:
            return Isometry(IsometryKind.NIL_VERTICAL, c)
        return Isometry(IsometryKind.NIL_TRANSLATE1, c)

    def with_(self, **kw) -> "RegionSpec":
        d = dict(space=self.space, reference=self.reference, r=self.r, R=self.R, eps=self.eps,
                 h=self.h, graph=self.graph)
        d.update(kw)
        return RegionSpec(**d)

    def to_json(self) -> dict:
        out = {"space": str(self.space), "reference": self.reference.value, "r": self.r, "R": self.R,
               "eps": self.eps, "h": self.h}
        if self.reference is ReferenceKind.NIL_ENTIRE_GRAPH:
            out["graph"] = self.graph
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RegionSpec":
        space = SpaceId.parse(obj["space"])
        default_ref = "NilEntireGraph" if space.is_nil else "SolSpecialPlane"
        return cls(space, ReferenceKind(obj.get("reference", default_ref)), float(obj["r"]), float(obj["R"]),
                   float(obj["eps"]), float(obj.get("h", 0.0)), obj.get("graph", "x3=0"))


def _check_graph_minimal(G: EntireGraph, tol: float = 1e-6):
    from .catalog import nil_graph
    from .surfaces import mean_curvature_at

    S = nil_graph(G.g, half_width=2.0)
    U, V = S.sample(9)
    if np.max(np.abs(mean_curvature_at(NIL3, S, U, V))) > tol:
        raise ValueError(f"entire graph {G.name} is not minimal")


def sol_spec(r=1.0, R=4.0, eps=0.1, h=1.0) -> RegionSpec:
    return RegionSpec(SOL3, ReferenceKind.SOL_SPECIAL_PLANE, r, R, eps, h)


def nil_graph_spec(r=0.5, R=3.0, eps=0.1, h=0.0, graph="x3=0") -> RegionSpec:
    return RegionSpec(NIL3, ReferenceKind.NIL_ENTIRE_GRAPH, r, R, eps, h, graph)


def nil_vertical_spec(r=0.5, R=3.0, eps=0.1, h=0.0) -> RegionSpec:
    return RegionSpec(NIL3, ReferenceKind.NIL_VERTICAL_PLANE, r, R, eps, h)


# ---------------------------------------------------------------------------
# boundary curves and initial mesh

def boundary_curves(spec: RegionSpec, n: int = 64):
    """``(inner, outer)`` closed polylines, each ``(n, 3)``, counter-clockwise in planar coordinates.

    The inner circle of radius ``r`` sits at level ``h + eps``; the outer
    circle of radius ``R`` at level ``h``.
    """
    if n < 16:
        raise ValueError("polyline resolution must be at least 16")
    th = 2 * math.pi * np.arange(n) / n
    c, s = np.cos(th), np.sin(th)
    inner = spec.lift(spec.r * c, spec.r * s, np.full(n, spec.h + spec.eps))
    outer = spec.lift(spec.R * c, spec.R * s, np.full(n, spec.h))
    return inner, outer


def default_radial_count(r: float, R: float, n_theta: int, cap: int | None = None) -> int:
    """Radial node count keeping planar triangles above the quality floor with margin.

    Capped at ``n_theta // 2`` by default (32 radial nodes for 64 angular).
    """
    cap = n_theta // 2 if cap is None else cap
    dth = 2 * math.pi / n_theta
    fit = 1 + int(math.log(R / r) / (math.tan(math.radians(20.0)) * dth))
    return max(2, min(cap, fit))


def ruled_mesh(spec: RegionSpec, n_theta: int = 128, n_radial: int | None = None) -> TriMesh:
    """Annulus mesh interpolating the two boundary circles.

    Radii are spaced geometrically and the level is linear in the radial
    index, so the initial surface is the lift of a planar harmonic profile.
    """
    nr = n_radial or default_radial_count(spec.r, spec.R, n_theta)
    w = np.linspace(0.0, 1.0, nr)
    rho = spec.r * (spec.R / spec.r) ** w
    level = spec.h + spec.eps * (1.0 - w)
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    RH, TH = np.meshgrid(rho, th, indexing="ij")
    LV = np.broadcast_to(level[:, None], RH.shape)
    V = spec.lift(RH * np.cos(TH), RH * np.sin(TH), LV).reshape(-1, 3)
    idx = np.arange(nr * n_theta).reshape(nr, n_theta)
    i, j = np.meshgrid(np.arange(nr - 1), np.arange(n_theta), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jn = (j + 1) % n_theta
    t1 = np.stack([idx[i, j], idx[i + 1, j], idx[i + 1, jn]], -1)
    t2 = np.stack([idx[i, j], idx[i + 1, jn], idx[i, jn]], -1)
    T = np.concatenate([t1, t2])
    flags = np.zeros(len(V), dtype=bool)
    flags[idx[0]] = flags[idx[-1]] = True
    # inner loop runs clockwise, outer counter-clockwise (interior on the left)
    loops = [idx[0][::-1].copy(), idx[-1].copy()]
    return TriMesh(V, T, flags, loops)


def planar_min_angles(spec: RegionSpec, M: TriMesh) -> np.ndarray:
    P = spec.planar(M.vertices)[M.triangles]
    out = []
    for k in range(3):
        e1 = P[:, (k + 1) % 3] - P[:, k]
        e2 = P[:, (k + 2) % 3] - P[:, k]
        cosv = (e1 * e2).sum(-1) / (np.linalg.norm(e1, axis=-1) * np.linalg.norm(e2, axis=-1))
        out.append(np.degrees(np.arccos(np.clip(cosv, -1, 1))))
    return np.min(out, axis=0)


def planar_signed_areas(spec: RegionSpec, V, T) -> np.ndarray:
    P = spec.planar(V)[T]
    a = P[:, 1] - P[:, 0]
    b = P[:, 2] - P[:, 0]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


# ---------------------------------------------------------------------------
# minimization
#
# Each interior vertex moves along the translation direction through a fixed
# planar position: V_v = lift(a_v, b_v, t_v) with the level t_v free.  Letting
# vertices also slide tangentially only exploits the discretization error of
# the piecewise-linear area and makes the problem degenerate.

@dataclass
class MinimizeOptions:
    max_iter: int = 100
    grad_tol: float = 1e-6
    step_rule: str = "newton"
    quadrature: int = 1
    remesh: bool = True

    @classmethod
    def from_json(cls, obj: dict | None) -> "MinimizeOptions":
        obj = dict(obj or {})
        known = {"max_iter", "grad_tol", "step_rule", "quadrature", "remesh"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown minimizer options {sorted(unknown)}")
        out = cls(**obj)
        if out.step_rule not in ("newton", "gradient"):
            raise ValueError("step_rule must be 'newton' or 'gradient'")
        if out.quadrature not in (1, 3):
            raise ValueError("quadrature must be 1 or 3")
        return out

    def to_json(self) -> dict:
        return {"max_iter": self.max_iter, "grad_tol": self.grad_tol, "step_rule": self.step_rule,
                "quadrature": self.quadrature, "remesh": self.remesh}


@dataclass
class MinimizeResult:
    mesh: TriMesh
    area: float
    grad_norm: float
    mean_curvature_proxy: float
    iterations: int
    area_history: list = field(default_factory=list)
    remeshed: bool = False
    spec: RegionSpec | None = None


def _vertex_neighbors(M: TriMesh) -> list[np.ndarray]:
    e = M.edges()
    n = len(M.vertices)
    A = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    A = (A + A.T).tocsr()
    return [A.indices[A.indptr[i]:A.indptr[i + 1]] for i in range(n)]


def _distance2_coloring(free: np.ndarray, nbrs: list[np.ndarray], n: int) -> np.ndarray:
    """Greedy colouring of free vertices so that no vertex has two neighbours of one colour."""
    color = np.full(n, -1)
    for v in free:
        used = set()
        for w in nbrs[v]:
            used.update(color[nbrs[w]][color[nbrs[w]] >= 0].tolist())
            if color[w] >= 0:
                used.add(int(color[w]))
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color


class LevelProblem:
    """Mesh area as a function of the interior vertex levels."""

    def __init__(self, space: SpaceId, spec: RegionSpec, M: TriMesh, quadrature: int = 1):
        self.space = space
        self.spec = spec
        self.M = M
        self.T = M.triangles
        self.free = M.interior
        self.quadrature = quadrature
        self.ab = spec.planar(M.vertices)
        self.t0 = spec.height(M.vertices)
        self.nbrs = _vertex_neighbors(M)
        self.color = _distance2_coloring(self.free, self.nbrs, len(M.vertices))
        self.pos = np.full(len(M.vertices), -1)
        self.pos[self.free] = np.arange(len(self.free))

    def vertices(self, t) -> np.ndarray:
        return self.spec.lift(self.ab[:, 0], self.ab[:, 1], t)

    def direction(self, t) -> np.ndarray:
        return self.spec.lift_jacobian(self.ab[:, 0], self.ab[:, 1], t)[2]

    def area_grad(self, t):
        """Area, d(area)/d(level) for every vertex, and the full coordinate gradient."""
        V = self.vertices(t)
        A, g = area_and_gradient(self.space, V, self.T, self.quadrature)
        return A, np.einsum("vi,vi->v", g, self.direction(t)), g

    def grad_norm(self, t, g_level) -> float:
        """Riemannian norm of the gradient restricted to the level directions."""
        V = self.vertices(t)[self.free]
        L = self.direction(t)[self.free]
        speed = np.sqrt(np.einsum("vi,vij,vj->v", L, metric_at(self.space, V), L))
        return float(np.linalg.norm(g_level[self.free] / speed))

    def hessian(self, t, step: float = 1e-6) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        cf = self.color[self.free]
        for c in range(cf.max() + 1):
            mem = self.free[cf == c]
            tp, tm = t.copy(), t.copy()
            tp[mem] += step
            tm[mem] -= step
            d = (self.area_grad(tp)[1] - self.area_grad(tm)[1]) / (2 * step)
            owner = np.full(len(t), -1)
            for v in mem:
                owner[self.nbrs[v]] = v
                owner[v] = v
            rr = self.free[owner[self.free] >= 0]
            rows.append(self.pos[rr])
            cols.append(self.pos[owner[rr]])
            vals.append(d[rr])
        n = len(self.free)
        H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        return ((H + H.T) * 0.5).tocsr()


def spec_from_boundary(space: SpaceId, boundary) -> RegionSpec:
    """Default region spec matching two boundary circles (Sol planes or Nil graph ``x3 = 0``)."""
    inner, outer = (np.asarray(c, float) for c in boundary)
    ref = ReferenceKind.NIL_ENTIRE_GRAPH if space.is_nil else ReferenceKind.SOL_SPECIAL_PLANE
    probe = RegionSpec(space, ref, 1.0, 2.0, 0.0)
    ri = float(np.mean(np.linalg.norm(probe.planar(inner), axis=-1)))
    ro = float(np.mean(np.linalg.norm(probe.planar(outer), axis=-1)))
    hi = float(np.mean(probe.height(inner)))
    ho = float(np.mean(probe.height(outer)))
    return RegionSpec(space, ref, ri, ro, max(hi - ho, 0.0), ho)


def minimize_area_annulus(space: SpaceId, boundary=None, init: TriMesh | None = None,
                          opts: MinimizeOptions | dict | None = None, spec: RegionSpec | None = None,
                          n_theta: int = 128, n_radial: int | None = None) -> MinimizeResult:
    """Discrete least-area annulus with fixed boundary vertices.

    ``spec`` defines the level parametrization; it defaults to one fitted
    to ``boundary``.  ``init`` defaults to the ruled mesh of ``spec``.
    Newton steps (or Riemannian gradient steps) use Armijo backtracking,
    so accepted areas never increase.
    """
    opts = opts if isinstance(opts, MinimizeOptions) else MinimizeOptions.from_json(opts)
    if spec is None:
        if boundary is None:
            raise ValueError("need a region spec or boundary curves")
        spec = spec_from_boundary(space, boundary)
    if spec.space != space:
        raise ValueError("spec and space disagree")
    if init is None:
        init = ruled_mesh(spec, n_theta, n_radial)
    if boundary is not None:
        _check_boundary_matches(init, boundary)
    remeshed = False
    if np.min(planar_min_angles(spec, init)) < QUALITY_FLOOR_DEG:
        if not opts.remesh:
            raise MeshDegenerationError("triangle quality below the floor")
        init = resample_onto(spec, init, ruled_mesh(spec, n_theta, n_radial))
        remeshed = True
        if np.min(planar_min_angles(spec, init)) < QUALITY_FLOOR_DEG:
            raise MeshDegenerationError("triangle quality below the floor after remeshing")
    result = _minimize(space, spec, init, opts)
    result.remeshed = remeshed
    return result


def _check_boundary_matches(M: TriMesh, boundary):
    pts = np.concatenate([np.asarray(c, float) for c in boundary])
    bv = M.vertices[M.boundary_flags]
    d = np.min(np.linalg.norm(bv[:, None, :] - pts[None, :, :], axis=-1), axis=1)
    if np.max(d) > 1e-9:
        raise ValueError("initial mesh boundary does not lie on the boundary polylines")


def resample_onto(spec: RegionSpec, source: TriMesh, target: TriMesh) -> TriMesh:
    """Move interior vertices of ``target`` to the heights of ``source`` over the same planar points."""
    P_src = spec.planar(source.vertices)
    P_tgt = spec.planar(target.vertices)
    counts, tri, bary = locate(P_tgt, P_src, source.triangles, eps=1e-9)
    hs = spec.height(source.vertices)
    V = target.vertices.copy()
    for v in target.interior:
        if tri[v] < 0:
            continue
        h = float(bary[v] @ hs[source.triangles[tri[v]]])
        V[v] = spec.lift(P_tgt[v, 0], P_tgt[v, 1], h)
    return target.with_vertices(V)


def _minimize(space: SpaceId, spec: RegionSpec, M: TriMesh, opts: MinimizeOptions) -> MinimizeResult:
    prob = LevelProblem(space, spec, M, opts.quadrature)
    free = prob.free
    t = prob.t0.copy()
    area, gl, gfull = prob.area_grad(t)
    gnorm = prob.grad_norm(t, gl)
    history = [area]
    mu = 0.0
    it = 0
    while gnorm > opts.grad_tol:
        if it >= opts.max_iter:
            raise MinimizationError("area minimization did not converge", gnorm, it)
        it += 1
        g = gl[free]
        accepted = False
        if opts.step_rule == "newton":
            H = prob.hessian(t)
            d = np.maximum(np.abs(H.diagonal()), 1e-12)
            for _ in range(12):
                K = H + mu * sp.diags(d) if mu > 0 else H
                try:
                    dx = spla.spsolve(K.tocsc(), -g)
                except RuntimeError:
                    dx = None
                if dx is not None and np.all(np.isfinite(dx)) and g @ dx < 0:
                    accepted, t_new, res = _armijo(prob, t, dx, g, area, tries=6)
                    if accepted:
                        mu = 0.0 if mu <= 1e-6 else mu / 10
                        break
                mu = max(10 * mu, 1e-4)
        else:
            accepted, t_new, res = _armijo(prob, t, -g, g, area, tries=60)
        if not accepted:
            raise MinimizationError("line search failed", gnorm, it)
        t = t_new
        area, gl, gfull = res
        gnorm = prob.grad_norm(t, gl)
        history.append(area)
        log.debug("iter %d area %.15g grad %.3e mu %.1e", it, area, gnorm, mu)

    V = prob.vertices(t)
    va = vertex_areas(space, V, M.triangles)
    gv = np.abs(gl[free]) / np.sqrt(np.einsum("vi,vij,vj->v", prob.direction(t)[free],
                                              metric_at(space, V[free]), prob.direction(t)[free]))
    proxy = float(np.max(gv / (2 * va[free]))) if len(free) else 0.0
    return MinimizeResult(M.with_vertices(V), float(area), gnorm, proxy, it, history, spec=spec)


def _armijo(prob: LevelProblem, t, dx, g, area, tries: int):
    slope = float(g @ dx)
    step = 1.0
    for _ in range(tries):
        tt = t.copy()
        tt[prob.free] += step * dx
        res = prob.area_grad(tt)
        # near stationarity the decrease drops below rounding; accept no increase there
        tiny = abs(step * slope) < 1e-13 * max(area, 1.0)
        if res[0] <= area + 1e-4 * step * slope or (tiny and res[0] <= area):
            return True, tt, res
        step *= 0.5
    return False, t, None


def perturbation_check(space: SpaceId, M: TriMesh, spec: RegionSpec | None = None, n: int = 100,
                       delta: float = 1e-3, seed: int = 42, quadrature: int = 1) -> float:
    """Smallest area change over ``n`` random single-vertex moves of length ``delta``.

    With ``spec`` the moves are along the level direction (the variables
    of the minimizer), with random sign; without it they are random chart
    directions in R^3.
    """
    rng = np.random.default_rng(seed)
    worst = math.inf
    cache: dict[int, np.ndarray] = {}
    for _ in range(n):
        v = int(rng.choice(M.interior))
        if spec is None:
            d = rng.normal(size=3)
            d *= delta / np.linalg.norm(d)
            newpos = M.vertices[v] + d
        else:
            ab = spec.planar(M.vertices[v])
            newpos = spec.lift(ab[0], ab[1], spec.height(M.vertices[v]) + delta * rng.choice([-1.0, 1.0]))
        if v not in cache:
            cache[v] = np.flatnonzero(np.any(M.triangles == v, axis=1))
        tris = M.triangles[cache[v]]
        before = triangle_areas(space, M.vertices, tris, quadrature).sum()
        V = M.vertices.copy()
        V[v] = newpos
        after = triangle_areas(space, V, tris, quadrature).sum()
        worst = min(worst, float(after - before))
    return worst


# ---------------------------------------------------------------------------
# Douglas-criterion areas

def _param_area(spec: RegionSpec, mapping, n_rad: int, n_theta: int, lo: float, hi: float) -> float:
    """Area of ``(w, theta) -> point`` with Gauss-Legendre in ``w`` and trapezoid in ``theta``."""
    if hi <= lo:
        return 0.0
    x, wts = np.polynomial.legendre.leggauss(n_rad)
    w = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * wts
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    W, TH = np.meshgrid(w, th, indexing="ij")
    X, Xw, Xt = mapping(W, TH)
    G = metric_at(spec.space, X)
    E = np.einsum("...ij,...j->...i", G, Xw)
    F = np.einsum("...ij,...j->...i", G, Xt)
    det = (Xw * E).sum(-1) * (Xt * F).sum(-1) - (Xw * F).sum(-1) ** 2
    dens = np.sqrt(np.maximum(det, 0.0))
    return float(np.sum(wts[:, None] * dens) * (2 * math.pi / n_theta))


def disk_area(spec: RegionSpec, level: float, n_rad: int = 64, n_theta: int = 256) -> float:
    def mapping(rho, th):
        c, s = np.cos(th), np.sin(th)
        lv = np.full_like(rho, level)
        X = spec.lift(rho * c, rho * s, lv)
        La, Lb, _ = spec.lift_jacobian(rho * c, rho * s, lv)
        return X, La * c[..., None] + Lb * s[..., None], rho[..., None] * (-La * s[..., None] + Lb * c[..., None])

    return _param_area(spec, mapping, n_rad, n_theta, 0.0, spec.r)


def lateral_area(spec: RegionSpec, n_rad: int = 64, n_theta: int = 256, rtol: float = 1e-12) -> float:
    """Cylinder area over the inner circle; ``theta`` nodes double until the value is stable.

    In Sol3 the integrand sharpens like ``e^{-2s}`` near ``theta = 0``, so a
    fixed angular grid is not enough for tall cylinders.
    """
    r = spec.r

    def mapping(t, th):
        c, s = np.cos(th), np.sin(th)
        X = spec.lift(r * c, r * s, t)
        La, Lb, Lt = spec.lift_jacobian(r * c, r * s, t)
        return X, Lt, r * (-La * s[..., None] + Lb * c[..., None])

    prev = _param_area(spec, mapping, n_rad, n_theta, spec.h, spec.h + spec.eps)
    while n_theta < 2**16:
        n_theta *= 2
        cur = _param_area(spec, mapping, n_rad, n_theta, spec.h, spec.h + spec.eps)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


def douglas_areas(spec: RegionSpec, n_rad: int = 64, n_theta: int = 256) -> dict:
    """Lateral cylinder area against the two spanning disks."""
    lat = lateral_area(spec, n_rad, n_theta)
    bottom = disk_area(spec, spec.h, n_rad, n_theta)
    top = disk_area(spec, spec.h + spec.eps, n_rad, n_theta)
    return {"area_lateral": lat, "area_disk_bottom": bottom, "area_disk_top": top,
            "inequality_holds": bool(lat < bottom + top)}


# ---------------------------------------------------------------------------
# slab, monotonicity and graph checks

def heights_on_circle(spec: RegionSpec, M: TriMesh, rho: float, n: int = 128) -> np.ndarray:
    """Height of the mesh above planar points on the circle of radius ``rho``."""
    th = 2 * math.pi * np.arange(n) / n
    Q = np.column_stack([rho * np.cos(th), rho * np.sin(th)])
    counts, tri, bary = locate(Q, spec.planar(M.vertices), M.triangles, eps=1e-10)
    if np.any(tri < 0):
        raise ValueError(f"radius {rho} is not covered by the mesh projection")
    hv = spec.height(M.vertices)
    return np.einsum("qk,qk->q", bary, hv[M.triangles[tri]])


def height_profile(spec: RegionSpec, M: TriMesh, radii) -> np.ndarray:
    """Rows ``(radius, mean, min, max)`` of the height over circles."""
    rows = []
    for rho in radii:
        hs = heights_on_circle(spec, M, float(rho))
        rows.append((float(rho), float(hs.mean()), float(hs.min()), float(hs.max())))
    return np.array(rows)


def slab_and_monotonicity_check(spec: RegionSpec, meshes, radii_R, rho: float,
                                slab_tol: float = 1e-3, order_tol: float = 1e-3) -> dict:
    """Slab containment per mesh and ordering of heights at radius ``rho`` as ``R`` grows.

    ``meshes[k]`` must be the minimized annulus for outer radius
    ``radii_R[k]`` (sorted ascending) with the inner circle of ``spec``.
    """
    if len(meshes) != len(radii_R):
        raise ValueError("one outer radius per mesh is required")
    if list(radii_R) != sorted(radii_R):
        raise ValueError("outer radii must be ascending")
    per = []
    rings = []
    for M, R in zip(meshes, radii_R):
        sub = spec.with_(R=float(R))
        inner, outer = boundary_curves(sub, 16)
        if not (sub.r < rho < R):
            raise ValueError(f"probe radius {rho} must lie strictly between r and R={R}")
        hv = spec.height(M.vertices)
        loops_r = [np.mean(np.linalg.norm(spec.planar(M.vertices[l]), axis=-1)) for l in M.boundary_loops]
        if not (np.isclose(min(loops_r), sub.r, rtol=1e-6) and np.isclose(max(loops_r), R, rtol=1e-6)):
            raise ValueError("mesh boundary does not match the region spec")
        ring = heights_on_circle(spec, M, rho)
        rings.append(ring)
        per.append({"R": float(R), "slab_min": float(hv.min()), "slab_max": float(hv.max()),
                    "in_slab": bool(hv.min() >= spec.h - slab_tol and hv.max() <= spec.h + spec.eps + slab_tol),
                    "mean_height_at_rho": float(ring.mean()),
                    "inner_gap": float(ring.min() - spec.h)})
    ordered = all(bool(np.all(rings[k + 1] >= rings[k] - order_tol)) for k in range(len(rings) - 1))
    return {"per_R": per, "rho": rho, "monotone": ordered,
            "all_in_slab": all(p["in_slab"] for p in per),
            "all_gaps_positive": all(p["inner_gap"] > 0 for p in per)}


def graphness_check(space: SpaceId, M: TriMesh, axis: int = 2, planar: Callable | None = None,
                    samples_per_triangle: int = 1) -> dict:
    """Whether ``M`` is a graph along frame direction ``axis``.

    Normal components along ``E_axis`` must share a strict sign, and no
    projected triangle may overlap another (centroid point-in-triangle
    test in the projection ``planar``, default ``(x1, x2)``).
    """
    if not M.is_oriented():
        raise ValueError("mesh is not consistently oriented")
    n = triangle_normals(space, M.vertices, M.triangles)
    comp = n[:, axis]
    sign = 1.0 if comp.sum() >= 0 else -1.0
    comp = sign * comp
    P = planar(M.vertices) if planar is not None else M.vertices[:, :2]
    tri = M.triangles
    rng = np.random.default_rng(0)
    pts = []
    for _ in range(samples_per_triangle):
        b = rng.dirichlet(np.ones(3), size=len(tri)) if samples_per_triangle > 1 else np.full((len(tri), 3), 1 / 3)
        pts.append(np.einsum("tk,tkd->td", b, P[tri]))
    pts = np.concatenate(pts)
    counts, _, _ = locate(pts, P, tri, eps=-1e-12)
    injective = bool(np.all(counts <= 1))
    return {"is_graph": bool(np.all(comp > 0) and injective), "min_normal_component": float(comp.min()),
            "injective_projection": injective}
