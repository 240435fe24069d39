"""Extrinsic and intrinsic geometry of surfaces in Nil3 and Sol3.

Everything is evaluated from the 2-jet of a parametrization
``(u, v) -> X(u, v)`` written in canonical coordinates.  Covariant second
derivatives are assembled in the canonical frame:

    nabla_{X_u} X_v = Theta X_uv + (D_{X_u} Theta) X_v + conn(Theta X_u, Theta X_v)

where ``Theta`` is the coframe and ``conn`` the frame-connection table.
The graph solver reuses :func:`jet_curvature` on grid-differenced jets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Chart, SpaceId, coframe_at, coframe_derivative, frame_connection

NORMAL_SIGN_EPS = 1e-12


class DegenerateSurfaceError(ValueError):
    """The parametrization is not an immersion at the requested point."""


ScalarField = Callable[[np.ndarray], np.ndarray]


@dataclass
class ParamSurface:
    """A parametrized patch ``func(u, v) -> (..., 3)`` over a rectangle.

    ``func`` must broadcast over array arguments.  Derivatives are centred
    differences with step ``step`` (scaled by ``h`` arguments where given).
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    domain: tuple[float, float, float, float]
    step: float = 1e-4
    name: str = ""

    def __call__(self, u, v) -> np.ndarray:
        return np.asarray(self.func(np.asarray(u, float), np.asarray(v, float)), dtype=float)

    def first_derivatives(self, u, v, h: float | None = None, order: int = 2):
        h = self.step if h is None else h
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        if order == 2:
            Xu = (self(u + h, v) - self(u - h, v)) / (2 * h)
            Xv = (self(u, v + h) - self(u, v - h)) / (2 * h)
        elif order == 4:
            Xu = (8 * (self(u + h, v) - self(u - h, v)) - (self(u + 2 * h, v) - self(u - 2 * h, v))) / (12 * h)
            Xv = (8 * (self(u, v + h) - self(u, v - h)) - (self(u, v + 2 * h) - self(u, v - 2 * h))) / (12 * h)
        else:
            raise ValueError("order must be 2 or 4")
        return Xu, Xv

    def jet(self, u, v, h: float | None = None):
        """``(X, Xu, Xv, Xuu, Xuv, Xvv)`` at ``(u, v)``."""
        h = self.step if h is None else h
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        X = self(u, v)
        xp, xm = self(u + h, v), self(u - h, v)
        yp, ym = self(u, v + h), self(u, v - h)
        Xu = (xp - xm) / (2 * h)
        Xv = (yp - ym) / (2 * h)
        Xuu = (xp - 2 * X + xm) / h**2
        Xvv = (yp - 2 * X + ym) / h**2
        Xuv = (self(u + h, v + h) - self(u + h, v - h)
               - self(u - h, v + h) + self(u - h, v - h)) / (4 * h * h)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    def sample(self, n: int, margin: float = 0.0):
        """``n x n`` grid of parameter values, inset by ``margin`` (fraction of the side)."""
        u0, u1, v0, v1 = self.domain
        du, dv = (u1 - u0) * margin, (v1 - v0) * margin
        uu = np.linspace(u0 + du, u1 - du, n)
        vv = np.linspace(v0 + dv, v1 - dv, n)
        return np.meshgrid(uu, vv, indexing="ij")


# ---------------------------------------------------------------------------
# jet-level formulas

@dataclass
class JetGeometry:
    metric: np.ndarray         # (..., 2, 2) first fundamental form
    normal: np.ndarray         # (..., 3) unit normal, frame components
    second_form: np.ndarray    # (..., 2, 2)
    shape_operator: np.ndarray  # (..., 2, 2)

    @property
    def mean_curvature(self) -> np.ndarray:
        return 0.5 * np.trace(self.shape_operator, axis1=-2, axis2=-1)

    @property
    def second_form_norm(self) -> np.ndarray:
        S = self.shape_operator
        tr_s2 = np.einsum("...ij,...ji->...", S, S)
        return np.sqrt(np.maximum(tr_s2, 0.0))


def orient_normal(n: np.ndarray) -> np.ndarray:
    """Flip ``n`` so its E3 component is positive, else its E1 component, else E2."""
    sign = np.sign(np.where(np.abs(n[..., 2]) > NORMAL_SIGN_EPS, n[..., 2],
                            np.where(np.abs(n[..., 0]) > NORMAL_SIGN_EPS, n[..., 0], n[..., 1])))
    sign = np.where(sign == 0, 1.0, sign)
    return n * sign[..., None]


def first_form(space: SpaceId, X, Xu, Xv):
    T = coframe_at(space, X)
    a = np.einsum("...ij,...j->...i", T, Xu)
    b = np.einsum("...ij,...j->...i", T, Xv)
    g = np.stack([np.stack([(a * a).sum(-1), (a * b).sum(-1)], -1),
                  np.stack([(a * b).sum(-1), (b * b).sum(-1)], -1)], -2)
    return g, a, b, T


def jet_curvature(space: SpaceId, X, Xu, Xv, Xuu, Xuv, Xvv, check: bool = True) -> JetGeometry:
    """Second fundamental form data of a surface from its 2-jet."""
    g, a, b, T = first_form(space, X, Xu, Xv)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if check and np.any(~(det > 1e-14 * (g[..., 0, 0] * g[..., 1, 1] + 1e-300))):
        raise DegenerateSurfaceError("first fundamental form is not positive definite")
    n = np.cross(a, b)
    n = orient_normal(n / np.linalg.norm(n, axis=-1, keepdims=True))

    def cov(Xw, Xz, wf, zf, Xwz):
        return (np.einsum("...ij,...j->...i", T, Xwz)
                + np.einsum("...ij,...j->...i", coframe_derivative(space, X, Xw), Xz)
                + frame_connection(space, wf, zf))

    L = (n * cov(Xu, Xu, a, a, Xuu)).sum(-1)
    M = (n * cov(Xu, Xv, a, b, Xuv)).sum(-1)
    N = (n * cov(Xv, Xv, b, b, Xvv)).sum(-1)
    II = np.stack([np.stack([L, M], -1), np.stack([M, N], -1)], -2)
    S = np.linalg.solve(g, II)
    return JetGeometry(g, n, II, S)


# ---------------------------------------------------------------------------
# operations on parametrized patches

def induced_metric_at(space: SpaceId, S: ParamSurface, u, v, h: float | None = None) -> np.ndarray:
    X = S(u, v)
    Xu, Xv = S.first_derivatives(u, v, h)
    g = first_form(space, X, Xu, Xv)[0]
    det = np.linalg.det(g)
    if np.any(~(det > 0)):
        raise DegenerateSurfaceError("degenerate parametrization")
    return g


def surface_geometry_at(space: SpaceId, S: ParamSurface, u, v, h: float | None = None) -> JetGeometry:
    return jet_curvature(space, *S.jet(u, v, h))


def mean_curvature_at(space: SpaceId, S: ParamSurface, u, v, h: float | None = None):
    return surface_geometry_at(space, S, u, v, h).mean_curvature


def second_fundamental_norm_at(space: SpaceId, S: ParamSurface, u, v, h: float | None = None):
    return surface_geometry_at(space, S, u, v, h).second_form_norm


def unit_normal_at(space: SpaceId, S: ParamSurface, u, v) -> np.ndarray:
    """Oriented unit normal in frame components."""
    X = S(u, v)
    Xu, Xv = S.first_derivatives(u, v)
    _, a, b, _ = first_form(space, X, Xu, Xv)
    n = np.cross(a, b)
    return orient_normal(n / np.linalg.norm(n, axis=-1, keepdims=True))


def laplace_beltrami_at(space: SpaceId, S: ParamSurface, f: ScalarField, u, v,
                        h: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Intrinsic Laplacian of ``f`` restricted to ``S`` (divergence form).

    The flux ``sqrt(det g) g^{-1} grad(f o X)`` is formed with the patch's
    own step and then differenced with step ``h``; Richardson extrapolation
    combines steps ``h`` and ``h/2``.
    """
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    hi = S.step

    def flux(uu, vv):
        X = S(uu, vv)
        Xu, Xv = S.first_derivatives(uu, vv)
        g = first_form(space, X, Xu, Xv)[0]
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        if np.any(~(det > 0)):
            raise DegenerateSurfaceError("degenerate parametrization")
        fu = (f(S(uu + hi, vv)) - f(S(uu - hi, vv))) / (2 * hi)
        fv = (f(S(uu, vv + hi)) - f(S(uu, vv - hi))) / (2 * hi)
        root = np.sqrt(det)
        # sqrt(det) g^{-1} = adj(g) / sqrt(det)
        wu = (g[..., 1, 1] * fu - g[..., 0, 1] * fv) / root
        wv = (-g[..., 0, 1] * fu + g[..., 0, 0] * fv) / root
        return wu, wv, root

    def div(step):
        wu_p, _, _ = flux(u + step, v)
        wu_m, _, _ = flux(u - step, v)
        _, wv_p, _ = flux(u, v + step)
        _, wv_m, _ = flux(u, v - step)
        root = flux(u, v)[2]
        return ((wu_p - wu_m) + (wv_p - wv_m)) / (2 * step * root)

    if not richardson:
        return div(h)
    return (4 * div(h / 2) - div(h)) / 3


def conformal_quantities(space: SpaceId, S: ParamSurface, u, v, h: float = 1e-3):
    """Frame components ``(A1, A2, A3)`` of ``X_z`` and the conformality defect.

    ``z = u + i v``; the defect is ``|A1^2 + A2^2 + A3^2|``, which vanishes
    exactly when ``(u, v)`` are isothermal.  In the Nil3 y chart this gives
    ``A1 = y1_z, A2 = y2_z, A3 = y3_z - y1 y2_z``.
    """
    X = S(u, v)
    Xu, Xv = S.first_derivatives(u, v, h, order=4)
    Xz = 0.5 * (Xu - 1j * Xv)
    T = coframe_at(space, X)
    A = np.einsum("...ij,...j->...i", T, Xz)
    defect = np.abs((A ** 2).sum(-1))
    return A, defect


def conformal_dbar(space: SpaceId, S: ParamSurface, u, v, h: float = 1e-3) -> np.ndarray:
    """``d/dzbar`` of the frame components ``A_k`` (fourth-order differences)."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)

    def A(uu, vv):
        return conformal_quantities(space, S, uu, vv)[0]

    Au = (8 * (A(u + h, v) - A(u - h, v)) - (A(u + 2 * h, v) - A(u - 2 * h, v))) / (12 * h)
    Av = (8 * (A(u, v + h) - A(u, v - h)) - (A(u, v + 2 * h) - A(u, v - 2 * h))) / (12 * h)
    return 0.5 * (Au + 1j * Av)


# ---------------------------------------------------------------------------
# scalar fields tested for subharmonicity

def inverse_height_field(space: SpaceId) -> ScalarField:
    """``1/s`` on Sol3, ``1/y1`` on Nil3 (``y1 = x1`` in either chart)."""
    if space.is_nil:
        return lambda p: 1.0 / np.asarray(p)[..., 0]
    return lambda p: 1.0 / np.asarray(p)[..., 2]


def height_coordinate(space: SpaceId) -> ScalarField:
    if space.is_nil:
        return lambda p: np.asarray(p)[..., 0]
    return lambda p: np.asarray(p)[..., 2]


def to_canonical(space: SpaceId, X: np.ndarray) -> np.ndarray:
    if space.chart is Chart.NIL_Y:
        out = np.array(X, dtype=float, copy=True)
        out[..., 2] -= out[..., 0] * out[..., 1] / 2
        return out
    return X

