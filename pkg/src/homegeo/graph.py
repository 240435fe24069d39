"""Dirichlet problem for minimal graphs.

A graph is ``x3 = f(x1, x2)`` in Nil3 (a xi-graph) or ``s = f(x1, x2)`` in
Sol3; in both canonical charts the graph direction is the third
coordinate.  Nodes live on a structured grid in parameters ``(p, q)``
(polar ``(t, theta)`` or Cartesian ``(x1, x2)``), the base map
``(p, q) -> (x1, x2)`` is differentiated analytically and the height by
finite differences: second order in ``p`` and on Cartesian grids, fourth
order in the periodic angle of polar grids.  The residual at a node is the mean
curvature that :func:`homegeo.surfaces.jet_curvature` assigns to the
resulting 2-jet, so the discrete operator is the general surface
formula applied to the graph parametrization.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Chart, SpaceId
from .surfaces import jet_curvature


class GraphSolverError(RuntimeError):
    """Newton iteration failed; ``residual`` holds the last max-norm residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class DomainKind(str, enum.Enum):
    DISK = "Disk"
    ANNULUS = "Annulus"
    RECTANGLE = "Rectangle"


class GraphAxis(str, enum.Enum):
    NIL_XI = "NilXi"
    SOL_S = "SolS"


def graph_axis_for(space: SpaceId) -> GraphAxis:
    return GraphAxis.NIL_XI if space.is_nil else GraphAxis.SOL_S


@dataclass
class GraphDomain:
    """Structured grid over a planar region.

    Annuli use polar parameters ``t in [0, 1]`` (radial) and ``theta``
    (periodic).  ``grading="geometric"`` spaces radii geometrically,
    otherwise linearly.  Rectangles and disks use a Cartesian grid; the
    disk is the staircase set of nodes inside the circle.
    """

    kind: DomainKind
    n: int
    r: float = 0.0
    R: float = 1.0
    bounds: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    n_theta: int | None = None
    grading: str = "uniform"
    p: np.ndarray = field(init=False, repr=False)
    q: np.ndarray = field(init=False, repr=False)
    periodic_q: bool = field(init=False)
    active: np.ndarray = field(init=False, repr=False)
    boundary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.kind = DomainKind(self.kind)
        if self.n < 8:
            raise ValueError("domain resolution must be at least 8")
        if self.kind is DomainKind.ANNULUS:
            if not 0 < self.r < self.R:
                raise ValueError("annulus needs 0 < r < R")
            if self.grading not in ("uniform", "geometric"):
                raise ValueError(f"unknown grading {self.grading!r}")
            nq = self.n_theta or self.n
            self.p = np.linspace(0.0, 1.0, self.n)
            self.q = 2 * math.pi * np.arange(nq) / nq
            self.periodic_q = True
            self.active = np.ones((self.n, nq), dtype=bool)
            self.boundary = np.zeros_like(self.active)
            self.boundary[0] = self.boundary[-1] = True
            return
        if self.kind is DomainKind.DISK:
            if self.R <= 0:
                raise ValueError("disk radius must be positive")
            self.bounds = (-self.R, self.R, -self.R, self.R)
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("degenerate rectangle")
        self.p = np.linspace(x0, x1, self.n)
        self.q = np.linspace(y0, y1, self.n)
        self.periodic_q = False
        P, Q = np.meshgrid(self.p, self.q, indexing="ij")
        if self.kind is DomainKind.DISK:
            act = P**2 + Q**2 <= self.R**2 * (1 + 1e-12)
        else:
            act = np.ones_like(P, dtype=bool)
        pad = np.pad(act, 1, constant_values=False)
        full = np.ones_like(act)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                full &= pad[1 + di:1 + di + act.shape[0], 1 + dj:1 + dj + act.shape[1]]
        self.active = act
        self.boundary = act & ~full

    # -- geometry of the parameter grid ------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.active.shape

    @property
    def steps(self) -> tuple[float, float]:
        return float(self.p[1] - self.p[0]), float(self.q[1] - self.q[0])

    @property
    def interior(self) -> np.ndarray:
        return self.active & ~self.boundary

    def radius_map(self, t):
        """``rho(t)`` and its first two derivatives (annuli only)."""
        r, R = self.r, self.R
        if self.grading == "geometric":
            k = math.log(R / r)
            rho = r * np.exp(k * t)
            return rho, k * rho, k * k * rho
        return r + (R - r) * t, np.full_like(t, R - r), np.zeros_like(t)

    def base_jet(self, P, Q):
        """``(B, B_p, B_q, B_pp, B_pq, B_qq)``, each ``(..., 2)``."""
        if self.kind is DomainKind.ANNULUS:
            rho, d1, d2 = self.radius_map(P)
            c, s = np.cos(Q), np.sin(Q)
            st = lambda a, b: np.stack([a, b], -1)
            return (st(rho * c, rho * s), st(d1 * c, d1 * s), st(-rho * s, rho * c),
                    st(d2 * c, d2 * s), st(-d1 * s, d1 * c), st(-rho * c, -rho * s))
        z = np.zeros_like(P)
        o = np.ones_like(P)
        st = lambda a, b: np.stack([a, b], -1)
        return st(P, Q), st(o, z), st(z, o), st(z, z), st(z, z), st(z, z)

    def mesh(self):
        return np.meshgrid(self.p, self.q, indexing="ij")

    def xy(self) -> np.ndarray:
        P, Q = self.mesh()
        return self.base_jet(P, Q)[0]

    def same_as(self, other: "GraphDomain") -> bool:
        return (self.kind == other.kind and self.shape == other.shape
                and np.allclose(self.xy(), other.xy(), atol=1e-14, rtol=0))

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "n": self.n, "r": self.r, "R": self.R,
                "bounds": list(self.bounds), "n_theta": self.n_theta, "grading": self.grading}

    @classmethod
    def from_json(cls, obj: dict) -> "GraphDomain":
        return cls(DomainKind(obj["kind"]), int(obj["n"]), float(obj.get("r", 0.0)),
                   float(obj.get("R", 1.0)), tuple(obj.get("bounds", (-1.0, 1.0, -1.0, 1.0))),
                   obj.get("n_theta"), obj.get("grading", "uniform"))


def annulus(r: float, R: float, n: int, n_theta: int | None = None, grading: str = "uniform") -> GraphDomain:
    return GraphDomain(DomainKind.ANNULUS, n, r=r, R=R, n_theta=n_theta, grading=grading)


def disk(R: float, n: int) -> GraphDomain:
    return GraphDomain(DomainKind.DISK, n, R=R)


def rectangle(bounds, n: int) -> GraphDomain:
    return GraphDomain(DomainKind.RECTANGLE, n, bounds=tuple(float(b) for b in bounds))


@dataclass
class GraphGrid:
    domain: GraphDomain
    heights: np.ndarray
    space: SpaceId
    graph_axis: GraphAxis | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.shape != self.domain.shape:
            raise ValueError(f"heights shape {self.heights.shape} != grid shape {self.domain.shape}")
        if not np.all(np.isfinite(self.heights[self.domain.active])):
            raise ValueError("heights must be finite")
        if self.graph_axis is None:
            self.graph_axis = graph_axis_for(self.space)

    def points(self) -> np.ndarray:
        """Canonical-chart points of active nodes, ``(k, 3)``."""
        xy = self.domain.xy()[self.domain.active]
        return np.column_stack([xy, self.heights[self.domain.active]])


@dataclass
class SolverOptions:
    max_iter: int = 50
    tol: float = 1e-8
    damping: bool = True

    @classmethod
    def from_json(cls, obj: dict | None) -> "SolverOptions":
        obj = obj or {}
        unknown = set(obj) - {"max_iter", "tol", "damping"}
        if unknown:
            raise ValueError(f"unknown solver options {sorted(unknown)}")
        return cls(int(obj.get("max_iter", 50)), float(obj.get("tol", 1e-8)), bool(obj.get("damping", True)))

    def to_json(self) -> dict:
        return {"max_iter": self.max_iter, "tol": self.tol, "damping": self.damping}


# ---------------------------------------------------------------------------
# discrete operators

class _Stencils:
    """Sparse difference matrices, rows on interior nodes, columns on all nodes."""

    def __init__(self, dom: GraphDomain):
        self.dom = dom
        n_p, n_q = dom.shape
        idx = np.arange(n_p * n_q).reshape(n_p, n_q)
        I, J = np.nonzero(dom.interior)
        self.rows = idx[I, J]
        self.I, self.J = I, J
        hp, hq = dom.steps

        def nb(di, dj):
            jj = J + dj
            if dom.periodic_q:
                jj = jj % n_q
            return idx[I + di, jj]

        m = len(I)
        r = np.arange(m)
        N = n_p * n_q

        def mat(entries):
            rr = np.concatenate([r] * len(entries))
            cc = np.concatenate([nb(di, dj) for (di, dj), _ in entries])
            vv = np.concatenate([np.full(m, w) for _, w in entries])
            return sp.csr_matrix((vv, (rr, cc)), shape=(m, N))

        self.D = {
            "f": mat([((0, 0), 1.0)]),
            "fp": mat([((1, 0), 0.5 / hp), ((-1, 0), -0.5 / hp)]),
            "fpp": mat([((1, 0), 1 / hp**2), ((0, 0), -2 / hp**2), ((-1, 0), 1 / hp**2)]),
        }
        if dom.periodic_q:
            # fourth-order periodic stencils in theta
            d1 = {1: 8 / 12, -1: -8 / 12, 2: -1 / 12, -2: 1 / 12}
            d2 = {0: -30 / 12, 1: 16 / 12, -1: 16 / 12, 2: -1 / 12, -2: -1 / 12}
        else:
            d1 = {1: 0.5, -1: -0.5}
            d2 = {0: -2.0, 1: 1.0, -1: 1.0}
        self.D["fq"] = mat([((0, j), w / hq) for j, w in d1.items()])
        self.D["fqq"] = mat([((0, j), w / hq**2) for j, w in d2.items()])
        self.D["fpq"] = mat([((i, j), 0.5 * i * w / (hp * hq)) for i in (1, -1) for j, w in d1.items()])
        P, Q = dom.mesh()
        self.base = [b[I, J] for b in dom.base_jet(P, Q)]
        free = dom.interior.ravel()
        self.free_cols = np.flatnonzero(free)
        self.fixed_cols = np.flatnonzero(dom.active.ravel() & ~free)

    def jets(self, f_flat):
        return {k: D @ f_flat for k, D in self.D.items()}

    def flat_laplacian(self) -> sp.csr_matrix:
        """Euclidean Laplacian of the plane pulled back to ``(p, q)``."""
        B, Bp, Bq, Bpp, Bpq, Bqq = self.base
        g = np.stack([np.stack([(Bp * Bp).sum(-1), (Bp * Bq).sum(-1)], -1),
                      np.stack([(Bp * Bq).sum(-1), (Bq * Bq).sum(-1)], -1)], -2)
        gi = np.linalg.inv(g)
        Jm = np.stack([Bp, Bq], -1)  # (m, 2, 2), columns are B_p, B_q
        Jinv = np.linalg.inv(Jm)
        Gam = {key: np.einsum("mij,mj->mi", Jinv, val) for key, val in
               (("pp", Bpp), ("pq", Bpq), ("qq", Bqq))}
        c_pp, c_pq, c_qq = gi[:, 0, 0], 2 * gi[:, 0, 1], gi[:, 1, 1]
        c_p = -(c_pp * Gam["pp"][:, 0] + c_pq * Gam["pq"][:, 0] + c_qq * Gam["qq"][:, 0])
        c_q = -(c_pp * Gam["pp"][:, 1] + c_pq * Gam["pq"][:, 1] + c_qq * Gam["qq"][:, 1])
        D = self.D
        return (sp.diags(c_pp) @ D["fpp"] + sp.diags(c_pq) @ D["fpq"] + sp.diags(c_qq) @ D["fqq"]
                + sp.diags(c_p) @ D["fp"] + sp.diags(c_q) @ D["fq"]).tocsr()


_JET_KEYS = ("f", "fp", "fq", "fpp", "fpq", "fqq")


def _curvature_from_jets(space: SpaceId, base, jet) -> np.ndarray:
    B, Bp, Bq, Bpp, Bpq, Bqq = base
    lift = lambda b, h: np.concatenate([b, h[:, None]], axis=-1)
    geo = jet_curvature(space, lift(B, jet["f"]), lift(Bp, jet["fp"]), lift(Bq, jet["fq"]),
                        lift(Bpp, jet["fpp"]), lift(Bpq, jet["fpq"]), lift(Bqq, jet["fqq"]), check=False)
    return geo.mean_curvature


def _check_space(space: SpaceId):
    if not isinstance(space, SpaceId) or space.chart is not Chart.CANONICAL:
        raise ValueError("graphs are solved in the canonical chart")


def graph_residual(g: GraphGrid) -> np.ndarray:
    """Mean curvature of the discrete graph at every interior node, grid-shaped (NaN elsewhere)."""
    _check_space(g.space)
    st = _Stencils(g.domain)
    H = _curvature_from_jets(g.space, st.base, st.jets(np.nan_to_num(g.heights).ravel()))
    out = np.full(g.domain.shape, np.nan)
    out[st.I, st.J] = H
    return out


def max_residual(g: GraphGrid) -> float:
    res = graph_residual(g)
    return float(np.nanmax(np.abs(res))) if np.any(g.domain.interior) else 0.0


def _sample_boundary(domain: GraphDomain, boundary) -> np.ndarray:
    """Heights array with boundary nodes set from a callable or an array."""
    f = np.zeros(domain.shape)
    if callable(boundary):
        xy = domain.xy()
        vals = np.asarray(boundary(xy[..., 0], xy[..., 1]), dtype=float)
        f = np.broadcast_to(vals, domain.shape).copy()
    else:
        arr = np.asarray(boundary, dtype=float)
        if arr.ndim == 0:
            f[:] = float(arr)
        elif arr.shape == domain.shape:
            f = arr.copy()
        else:
            raise ValueError("boundary data must be callable, scalar or grid-shaped")
    f[~domain.active] = np.nan
    if not np.all(np.isfinite(f[domain.boundary])):
        raise ValueError("boundary data must be finite")
    return f


def harmonic_extension(domain: GraphDomain, f_boundary: np.ndarray) -> np.ndarray:
    st = _Stencils(domain)
    L = st.flat_laplacian()
    fb = np.nan_to_num(f_boundary).ravel().copy()
    fb[st.free_cols] = 0.0
    rhs = -(L @ fb)
    u = spla.spsolve(L[:, st.free_cols].tocsc(), rhs)
    out = f_boundary.copy()
    out.ravel()[st.free_cols] = u
    return out


def _interior_bump(domain: GraphDomain, seed: int, amplitude: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    xy = domain.xy()
    k = rng.uniform(0.5, 2.0, size=2)
    ph = rng.uniform(0, 2 * math.pi, size=2)
    w = np.sin(k[0] * xy[..., 0] + ph[0]) * np.cos(k[1] * xy[..., 1] + ph[1])
    # taper with the torsion function (-lap phi = 1, phi = 0 on the boundary)
    st = _Stencils(domain)
    phi = np.zeros(domain.shape)
    phi.ravel()[st.free_cols] = spla.spsolve(st.flat_laplacian()[:, st.free_cols].tocsc(),
                                             -np.ones(len(st.free_cols)))
    phi /= np.max(np.abs(phi))
    return amplitude * np.where(domain.interior, w * phi, 0.0)


def solve_minimal_graph(domain: GraphDomain, space: SpaceId, boundary,
                        opts: SolverOptions | dict | None = None, init="harmonic",
                        seed: int = 42) -> GraphGrid:
    """Damped Newton solve of the minimal-graph Dirichlet problem.

    ``boundary`` is a callable ``(x1, x2) -> height``, a constant or a
    grid-shaped array whose boundary entries are used.  ``init`` is
    ``"harmonic"`` (discrete harmonic extension), ``"perturbed"``
    (harmonic extension plus a seeded smooth interior bump) or an array.
    """
    _check_space(space)
    opts = opts if isinstance(opts, SolverOptions) else SolverOptions.from_json(opts)
    f = _sample_boundary(domain, boundary)
    if isinstance(init, str):
        if init not in ("harmonic", "perturbed"):
            raise ValueError(f"unknown init {init!r}")
        f = harmonic_extension(domain, f)
        if init == "perturbed":
            f = f + _interior_bump(domain, seed, 0.3)
    else:
        arr = np.asarray(init, dtype=float)
        if arr.shape != domain.shape:
            raise ValueError("init array has the wrong shape")
        f = np.where(domain.interior, arr, f)

    st = _Stencils(domain)
    free = st.free_cols
    x = np.nan_to_num(f).ravel().copy()

    def residual(xf):
        return _curvature_from_jets(space, st.base, st.jets(xf))

    res = residual(x)
    norm = float(np.max(np.abs(res))) if res.size else 0.0
    history = [norm]
    it = 0
    while norm > opts.tol:
        if it >= opts.max_iter:
            raise GraphSolverError("Newton iteration did not converge", norm, it)
        it += 1
        jet = st.jets(x)
        J = sp.csr_matrix((len(res), x.size))
        for key in _JET_KEYS:
            hstep = 1e-6 * (1.0 + np.abs(jet[key]))
            jp = dict(jet)
            jm = dict(jet)
            jp[key] = jet[key] + hstep
            jm[key] = jet[key] - hstep
            d = (_curvature_from_jets(space, st.base, jp) - _curvature_from_jets(space, st.base, jm)) / (2 * hstep)
            J = J + sp.diags(d) @ st.D[key]
        try:
            dx = spla.spsolve(J.tocsc()[:, free], -res)
        except RuntimeError as exc:  # singular factorization
            raise GraphSolverError(f"linear solve failed: {exc}", norm, it) from exc
        if not np.all(np.isfinite(dx)):
            raise GraphSolverError("Newton step is not finite", norm, it)
        step = 1.0
        accepted = False
        for _ in range(11 if opts.damping else 1):
            trial = x.copy()
            trial[free] += step * dx
            r_new = residual(trial)
            n_new = float(np.max(np.abs(r_new)))
            # merit is the l2 norm, for which the Newton step is a descent direction
            if np.isfinite(n_new) and (np.linalg.norm(r_new) < np.linalg.norm(res) or not opts.damping):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise GraphSolverError("line search failed to reduce the residual", norm, it)
        x, res, norm = trial, r_new, n_new
        history.append(norm)

    heights = x.reshape(domain.shape)
    heights[~domain.active] = np.nan
    return GraphGrid(domain, heights, space,
                     info={"iterations": it, "residual": norm, "history": history, "tol": opts.tol})


def graph_difference_report(u: GraphGrid, v: GraphGrid, sign_tol: float = 1e-12) -> dict:
    """Sup-norm gaps between two graphs and whether ``u - v`` has constant sign."""
    if u.space != v.space or not u.domain.same_as(v.domain):
        raise ValueError("graphs must share domain and space")
    dom = u.domain
    d = u.heights - v.heights
    di = d[dom.interior]
    db = d[dom.boundary]
    da = d[dom.active]
    return {
        "max_interior_gap": float(np.max(np.abs(di))) if di.size else 0.0,
        "max_boundary_gap": float(np.max(np.abs(db))) if db.size else 0.0,
        "monotone_flag": bool(np.all(da >= -sign_tol) or np.all(da <= sign_tol)),
    }


def exact_error(g: GraphGrid, exact: Callable) -> float:
    xy = g.domain.xy()
    e = g.heights - exact(xy[..., 0], xy[..., 1])
    return float(np.max(np.abs(e[g.domain.active])))


def write_graph_csv(path, g: GraphGrid) -> Path:
    path = Path(path)
    xy = g.domain.xy()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x1", "x2", "height", "boundary"])
        for i, j in zip(*np.nonzero(g.domain.active)):
            w.writerow([i, j, f"{xy[i, j, 0]:.17g}", f"{xy[i, j, 1]:.17g}",
                        f"{g.heights[i, j]:.17g}", int(g.domain.boundary[i, j])])
    return path


def read_graph_csv(path, domain: GraphDomain, space: SpaceId) -> GraphGrid:
    h = np.full(domain.shape, np.nan)
    xy = domain.xy()
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            i, j = int(row["i"]), int(row["j"])
            if not domain.active[i, j]:
                raise ValueError(f"node ({i}, {j}) is not part of the domain")
            if abs(float(row["x1"]) - xy[i, j, 0]) > 1e-9 or abs(float(row["x2"]) - xy[i, j, 1]) > 1e-9:
                raise ValueError(f"node ({i}, {j}) coordinates do not match the domain")
            h[i, j] = float(row["height"])
    if np.any(np.isnan(h[domain.active])):
        raise ValueError("CSV does not cover every domain node")
    return GraphGrid(domain, h, space)


def graph_surface(g: GraphGrid, degree: int = 5, margin: float = 0.0):
    """Smooth :class:`~homegeo.surfaces.ParamSurface` interpolating a rectangle graph."""
    from scipy.interpolate import RectBivariateSpline

    from .surfaces import ParamSurface

    if g.domain.kind is not DomainKind.RECTANGLE:
        raise ValueError("spline interpolation needs a rectangle grid")
    spline = RectBivariateSpline(g.domain.p, g.domain.q, g.heights, kx=degree, ky=degree)

    def func(u, v):
        u, v = np.broadcast_arrays(u, v)
        h = spline.ev(u.ravel(), v.ravel()).reshape(u.shape)
        return np.stack([u, v, h], axis=-1)

    x0, x1, y0, y1 = g.domain.bounds
    mx, my = (x1 - x0) * margin, (y1 - y0) * margin
    return ParamSurface(func, (x0 + mx, x1 - mx, y0 + my, y1 - my), name="graph_surface")
