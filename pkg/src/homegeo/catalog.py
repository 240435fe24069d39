"""Named surfaces of Nil3 and Sol3 used as minimality and curvature references."""
from __future__ import annotations

import math

import numpy as np

from .surfaces import ParamSurface


def _stack(*cs):
    return np.stack(np.broadcast_arrays(*cs), axis=-1)


# --- Sol3 -------------------------------------------------------------------

def sol_special_plane(t: float, half_width: float = 1.0) -> ParamSurface:
    """Level set ``s = t`` parametrized by ``(x1, x2)``."""
    w = half_width
    return ParamSurface(lambda u, v: _stack(u, v, np.full_like(u, t)), (-w, w, -w, w),
                        name=f"sol_special_plane(s={t})")


def sol_h1_plane(t: float, half_width: float = 1.0) -> ParamSurface:
    """Totally geodesic leaf ``x1 = t`` parametrized by ``(x2, s)``."""
    w = half_width
    return ParamSurface(lambda u, v: _stack(np.full_like(u, t), u, v), (-w, w, -w, w),
                        name=f"sol_h1_plane(x1={t})")


def sol_h2_plane(t: float, half_width: float = 1.0) -> ParamSurface:
    """Totally geodesic leaf ``x2 = t`` parametrized by ``(x1, s)``."""
    w = half_width
    return ParamSurface(lambda u, v: _stack(u, np.full_like(u, t), v), (-w, w, -w, w),
                        name=f"sol_h2_plane(x2={t})")


def sol_exp_surface(a: float, s_range=(-1.0, 1.0), x2_range=(-1.0, 1.0)) -> ParamSurface:
    """``x1 = a e^{-s}`` parametrized by ``(x2, s)``."""
    return ParamSurface(lambda u, v: _stack(a * np.exp(-v), u, v), (*x2_range, *s_range),
                        name=f"sol_exp_surface(a={a})")


def sol_special_plane_conformal(t: float) -> ParamSurface:
    """Isothermal chart ``(u, v) -> (u e^{-t}, v e^{t}, t)`` of ``s = t``."""
    et = math.exp(t)
    return ParamSurface(lambda u, v: _stack(u / et, v * et, np.full_like(u, t)), (-1, 1, -1, 1),
                        name=f"sol_special_plane_conformal(s={t})")


def sol_h1_conformal(t: float, v_range=(0.5, 3.0)) -> ParamSurface:
    """Isothermal chart of ``x1 = t``: ``(u, v) -> (t, u, log v)``, v > 0.

    The leaf is the hyperbolic upper half-plane in these coordinates.
    """
    return ParamSurface(lambda u, v: _stack(np.full_like(u, t), u, np.log(v)), (-1, 1, *v_range),
                        name=f"sol_h1_conformal(x1={t})")


def sol_exp_conformal(a: float, v_range=(1.5, 6.0)) -> ParamSurface:
    """Isothermal chart of ``x1 = a e^{-s}``: ``s = log(v / sqrt(1 + a^2))``, ``x2 = u``."""
    k = math.sqrt(1 + a * a)

    def f(u, v):
        s = np.log(v / k)
        return _stack(a * np.exp(-s), u, s)

    return ParamSurface(f, (-1, 1, *v_range), name=f"sol_exp_conformal(a={a})")


# --- Nil3 -------------------------------------------------------------------

def nil_graph(height, half_width: float = 1.0, name: str = "") -> ParamSurface:
    """xi-graph ``x3 = height(x1, x2)`` over a square."""
    w = half_width
    return ParamSurface(lambda u, v: _stack(u, v, height(u, v)), (-w, w, -w, w),
                        name=name or "nil_graph")


def nil_flat_graph(half_width: float = 1.0) -> ParamSurface:
    return nil_graph(lambda u, v: np.zeros_like(u), half_width, "nil_graph(x3=0)")


def nil_saddle_graph(half_width: float = 1.0) -> ParamSurface:
    return nil_graph(lambda u, v: u * v / 2, half_width, "nil_graph(x3=x1*x2/2)")


def nil_vertical_plane(base=(0.0, 0.0), direction=(1.0, 0.0), half_width: float = 1.0) -> ParamSurface:
    """Preimage of the line ``base + u * direction`` under the projection to (x1, x2)."""
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    b = np.asarray(base, float)
    w = half_width
    return ParamSurface(lambda u, v: _stack(b[0] + u * d[0], b[1] + u * d[1], v), (-w, w, -w, w),
                        name=f"nil_vertical_plane(base=({b[0]:g},{b[1]:g}), dir=({d[0]:.4g},{d[1]:.4g}))")


def nil_rotational_conformal(v_range=(-2.0, -0.5)) -> ParamSurface:
    """Isothermal chart of the rotational graph ``x3 = 0``.

    In polar coordinates the induced metric is ``dr^2 + r^2 (1 + r^2/4) dtheta^2``;
    ``r = 2 / sinh(-v)`` makes ``(theta, v)`` isothermal for ``v < 0``.
    """
    def f(u, v):
        r = 2.0 / np.sinh(-v)
        return _stack(r * np.cos(u), r * np.sin(u), np.zeros_like(u))

    return ParamSurface(f, (0.0, 2 * math.pi, *v_range), name="nil_rotational_conformal")


def minimal_reference_surfaces():
    """``(space_name, surface)`` pairs that are minimal in their geometry."""
    out = []
    for t in (0.0, 1.0, 2.0):
        out.append(("sol3", sol_special_plane(t)))
    for a in (0.5, 1.0, 2.0):
        out.append(("sol3", sol_exp_surface(a)))
    out.append(("nil3", nil_flat_graph()))
    out.append(("nil3", nil_saddle_graph()))
    out.append(("nil3", nil_vertical_plane((0.0, 0.0), (1.0, 0.0))))
    out.append(("nil3", nil_vertical_plane((0.5, 0.5), (1.0, -1.0))))
    return out
