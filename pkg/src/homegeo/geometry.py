"""Model geometries of Nil3 and Sol3 in global coordinates.

Both spaces are R^3 with a left-invariant metric.  Sol3 uses coordinates
``(x1, x2, s)`` with metric ``e^{2s} dx1^2 + e^{-2s} dx2^2 + ds^2``.  Nil3
uses ``(x1, x2, x3)`` with metric
``dx1^2 + dx2^2 + (x2/2 dx1 - x1/2 dx2 + dx3)^2``, and optionally the
``y`` chart ``(y1, y2, y3) = (x1, x2, x3 + x1 x2 / 2)``.

All point-valued functions accept arrays of shape ``(..., 3)`` and
broadcast over the leading axes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Space(str, enum.Enum):
    NIL3 = "nil3"
    SOL3 = "sol3"


class Chart(str, enum.Enum):
    CANONICAL = "canonical"
    NIL_Y = "nil_y"


@dataclass(frozen=True)
class SpaceId:
    space: Space
    chart: Chart = Chart.CANONICAL

    def __post_init__(self):
        object.__setattr__(self, "space", Space(self.space))
        object.__setattr__(self, "chart", Chart(self.chart))
        if self.space is Space.SOL3 and self.chart is Chart.NIL_Y:
            raise ValueError("the y chart exists only on Nil3")

    @property
    def is_nil(self) -> bool:
        return self.space is Space.NIL3

    @classmethod
    def parse(cls, name: str) -> "SpaceId":
        key = name.lower().replace("-", "_").replace("₃", "3")
        table = {"nil3": NIL3, "nil": NIL3, "sol3": SOL3, "sol": SOL3,
                 "nil3_y": NIL3_Y, "nil_y": NIL3_Y}
        try:
            return table[key]
        except KeyError:
            raise ValueError(f"unknown space {name!r}") from None

    def __str__(self):
        if self.chart is Chart.NIL_Y:
            return "nil3_y"
        return self.space.value


NIL3 = SpaceId(Space.NIL3)
SOL3 = SpaceId(Space.SOL3)
NIL3_Y = SpaceId(Space.NIL3, Chart.NIL_Y)


@dataclass(frozen=True)
class Point:
    """A point of a model space, tagged with the chart it is written in."""

    coords: tuple[float, float, float]
    chart: Chart = Chart.CANONICAL

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if len(c) != 3 or not all(math.isfinite(v) for v in c):
            raise ValueError(f"point needs three finite coordinates, got {self.coords!r}")
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "chart", Chart(self.chart))

    def to_json(self) -> dict:
        return {"chart": self.chart.value, "coordinates": list(self.coords)}

    @classmethod
    def from_json(cls, obj: dict) -> "Point":
        return cls(tuple(obj["coordinates"]), Chart(obj.get("chart", "canonical")))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def _coords(space: SpaceId, p) -> np.ndarray:
    """Unwrap ``p`` into a float array, checking the chart tag if present."""
    if isinstance(p, Point):
        if p.chart is not space.chart:
            raise ValueError(f"point in chart {p.chart.value} used with space {space}")
        return np.asarray(p.coords, dtype=float)
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"expected trailing dimension 3, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# metric, frame, coframe

def metric_at(space: SpaceId, p) -> np.ndarray:
    """Gram matrix of the ambient metric in the coordinate basis at ``p``."""
    x = _coords(space, p)
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    G = np.zeros(x.shape[:-1] + (3, 3))
    if space.space is Space.SOL3:
        G[..., 0, 0] = np.exp(2 * c)
        G[..., 1, 1] = np.exp(-2 * c)
        G[..., 2, 2] = 1.0
    elif space.chart is Chart.CANONICAL:
        G[..., 0, 0] = 1 + b * b / 4
        G[..., 1, 1] = 1 + a * a / 4
        G[..., 2, 2] = 1.0
        G[..., 0, 1] = G[..., 1, 0] = -a * b / 4
        G[..., 0, 2] = G[..., 2, 0] = b / 2
        G[..., 1, 2] = G[..., 2, 1] = -a / 2
    else:
        # dy1^2 + dy2^2 + (dy3 - y1 dy2)^2
        G[..., 0, 0] = 1.0
        G[..., 1, 1] = 1 + a * a
        G[..., 2, 2] = 1.0
        G[..., 1, 2] = G[..., 2, 1] = -a
    return G


def metric_derivative_at(space: SpaceId, p) -> np.ndarray:
    """Coordinate derivatives of the metric; ``out[..., k, i, j] = d_k G_ij``."""
    x = _coords(space, p)
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    dG = np.zeros(x.shape[:-1] + (3, 3, 3))
    if space.space is Space.SOL3:
        dG[..., 2, 0, 0] = 2 * np.exp(2 * c)
        dG[..., 2, 1, 1] = -2 * np.exp(-2 * c)
    elif space.chart is Chart.CANONICAL:
        dG[..., 0, 1, 1] = a / 2
        dG[..., 0, 0, 1] = dG[..., 0, 1, 0] = -b / 4
        dG[..., 0, 1, 2] = dG[..., 0, 2, 1] = -0.5
        dG[..., 1, 0, 0] = b / 2
        dG[..., 1, 0, 1] = dG[..., 1, 1, 0] = -a / 4
        dG[..., 1, 0, 2] = dG[..., 1, 2, 0] = 0.5
    else:
        dG[..., 0, 1, 1] = 2 * a
        dG[..., 0, 1, 2] = dG[..., 0, 2, 1] = -1.0
    return dG


def canonical_frame_at(space: SpaceId, p, allow_y_chart: bool = False) -> np.ndarray:
    """Canonical orthonormal frame at ``p``.

    Returns an array whose ``[..., :, i]`` column holds the coordinate
    components of ``E_{i+1}``.  The frame is defined in the canonical chart;
    pass ``allow_y_chart=True`` to get its expression in the Nil3 y chart.
    """
    if space.chart is Chart.NIL_Y and not allow_y_chart:
        raise ValueError("canonical frame requested in the y chart; pass allow_y_chart=True")
    x = _coords(space, p)
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    F = np.zeros(x.shape[:-1] + (3, 3))
    if space.space is Space.SOL3:
        F[..., 0, 0] = np.exp(-c)
        F[..., 1, 1] = np.exp(c)
        F[..., 2, 2] = 1.0
    elif space.chart is Chart.CANONICAL:
        F[..., 0, 0] = 1.0
        F[..., 2, 0] = -b / 2
        F[..., 1, 1] = 1.0
        F[..., 2, 1] = a / 2
        F[..., 2, 2] = 1.0
    else:
        F[..., 0, 0] = 1.0
        F[..., 1, 1] = 1.0
        F[..., 2, 1] = a
        F[..., 2, 2] = 1.0
    return F


def coframe_at(space: SpaceId, p) -> np.ndarray:
    """Dual coframe: row ``i`` holds the 1-form ``theta^{i+1}``.

    ``coframe_at(p) @ v`` gives the frame components of a coordinate vector.
    """
    x = _coords(space, p)
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    T = np.zeros(x.shape[:-1] + (3, 3))
    if space.space is Space.SOL3:
        T[..., 0, 0] = np.exp(c)
        T[..., 1, 1] = np.exp(-c)
        T[..., 2, 2] = 1.0
    elif space.chart is Chart.CANONICAL:
        T[..., 0, 0] = 1.0
        T[..., 1, 1] = 1.0
        T[..., 2, 0] = b / 2
        T[..., 2, 1] = -a / 2
        T[..., 2, 2] = 1.0
    else:
        T[..., 0, 0] = 1.0
        T[..., 1, 1] = 1.0
        T[..., 2, 1] = -a
        T[..., 2, 2] = 1.0
    return T


def coframe_derivative(space: SpaceId, p, w) -> np.ndarray:
    """Directional derivative of :func:`coframe_at` at ``p`` along ``w``."""
    x = _coords(space, p)
    w = np.asarray(w, dtype=float)
    shape = np.broadcast_shapes(x.shape, w.shape)[:-1]
    D = np.zeros(shape + (3, 3))
    if space.space is Space.SOL3:
        c = x[..., 2]
        D[..., 0, 0] = w[..., 2] * np.exp(c)
        D[..., 1, 1] = -w[..., 2] * np.exp(-c)
    elif space.chart is Chart.CANONICAL:
        D[..., 2, 0] = w[..., 1] / 2
        D[..., 2, 1] = -w[..., 0] / 2
    else:
        D[..., 2, 1] = -w[..., 0]
    return D


def to_frame(space: SpaceId, p, v) -> np.ndarray:
    """Frame components of the coordinate vector ``v`` based at ``p``."""
    return np.einsum("...ij,...j->...i", coframe_at(space, p), np.asarray(v))


def from_frame(space: SpaceId, p, a) -> np.ndarray:
    """Coordinate components of the vector with frame components ``a``."""
    F = canonical_frame_at(space, p, allow_y_chart=True)
    return np.einsum("...ij,...j->...i", F, np.asarray(a))


def inner(space: SpaceId, p, v, w) -> np.ndarray:
    G = metric_at(space, p)
    return np.einsum("...i,...ij,...j->...", np.asarray(v), G, np.asarray(w))


# ---------------------------------------------------------------------------
# connection tables: CONNECTION[i, j] = frame components of nabla_{E_i} E_j

_SOL_TABLE = np.zeros((3, 3, 3))
_SOL_TABLE[0, 0] = (0, 0, -1)
_SOL_TABLE[1, 1] = (0, 0, 1)
_SOL_TABLE[0, 2] = (1, 0, 0)
_SOL_TABLE[1, 2] = (0, -1, 0)

_NIL_TABLE = np.zeros((3, 3, 3))
_NIL_TABLE[1, 0] = (0, 0, -0.5)
_NIL_TABLE[2, 0] = (0, -0.5, 0)
_NIL_TABLE[0, 1] = (0, 0, 0.5)
_NIL_TABLE[2, 1] = (0.5, 0, 0)
_NIL_TABLE[0, 2] = (0, -0.5, 0)
_NIL_TABLE[1, 2] = (0.5, 0, 0)

_SOL_TABLE.flags.writeable = False
_NIL_TABLE.flags.writeable = False


def connection_table(space: SpaceId) -> np.ndarray:
    return _NIL_TABLE if space.is_nil else _SOL_TABLE


def frame_connection(space: SpaceId, w, v) -> np.ndarray:
    """``sum_ij w_i v_j nabla_{E_i} E_j`` in frame components (bilinear)."""
    table = connection_table(space)
    w = np.asarray(w)
    v = np.asarray(v)
    return np.einsum("...i,...j,ijk->...k", w, v, table)


# ---------------------------------------------------------------------------
# isometries

class IsometryKind(str, enum.Enum):
    SOL_TRANSLATE_X1 = "SolTranslateX1"
    SOL_TRANSLATE_X2 = "SolTranslateX2"
    SOL_TC = "SolTc"
    SOL_SIGMA = "SolSigma"
    SOL_TAU = "SolTau"
    NIL_TRANSLATE1 = "NilTranslate1"
    NIL_TRANSLATE2 = "NilTranslate2"
    NIL_VERTICAL = "NilVertical"
    NIL_ROTATE = "NilRotate"
    NIL_REFLECT = "NilReflect"
    COMPOSITE = "Composite"


_SOL_KINDS = {IsometryKind.SOL_TRANSLATE_X1, IsometryKind.SOL_TRANSLATE_X2,
              IsometryKind.SOL_TC, IsometryKind.SOL_SIGMA, IsometryKind.SOL_TAU}
_NIL_KINDS = {IsometryKind.NIL_TRANSLATE1, IsometryKind.NIL_TRANSLATE2,
              IsometryKind.NIL_VERTICAL, IsometryKind.NIL_ROTATE, IsometryKind.NIL_REFLECT}
_PARAMETERLESS = {IsometryKind.SOL_SIGMA, IsometryKind.SOL_TAU, IsometryKind.NIL_REFLECT}


@dataclass(frozen=True)
class Isometry:
    """One of the listed isometry families, or a left-to-right composite."""

    kind: IsometryKind
    parameter: float = 0.0
    parts: tuple["Isometry", ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "kind", IsometryKind(self.kind))
        object.__setattr__(self, "parameter", float(self.parameter))
        object.__setattr__(self, "parts", tuple(self.parts))
        if self.kind is not IsometryKind.COMPOSITE and self.parts:
            raise ValueError("only composites carry parts")

    def then(self, other: "Isometry") -> "Isometry":
        """Apply ``self`` first, then ``other``."""
        return compose(self, other)

    def spaces(self) -> set[Space]:
        if self.kind is IsometryKind.COMPOSITE:
            out: set[Space] = set()
            for g in self.parts:
                out |= g.spaces()
            return out
        return {Space.SOL3} if self.kind in _SOL_KINDS else {Space.NIL3}

    def to_json(self) -> dict:
        if self.kind is IsometryKind.COMPOSITE:
            return {"kind": self.kind.value, "parts": [g.to_json() for g in self.parts]}
        if self.kind in _PARAMETERLESS:
            return {"kind": self.kind.value}
        return {"kind": self.kind.value, "parameter": self.parameter}

    @classmethod
    def from_json(cls, obj: dict) -> "Isometry":
        kind = IsometryKind(obj["kind"])
        if kind is IsometryKind.COMPOSITE:
            return cls(kind, parts=tuple(cls.from_json(o) for o in obj["parts"]))
        return cls(kind, obj.get("parameter", 0.0))


def compose(*gs: Isometry) -> Isometry:
    """Composite applying ``gs`` left to right; nested composites are flattened."""
    flat: list[Isometry] = []
    for g in gs:
        if g.kind is IsometryKind.COMPOSITE:
            flat.extend(g.parts)
        else:
            flat.append(g)
    return Isometry(IsometryKind.COMPOSITE, parts=tuple(flat))


def sol_T(c: float) -> Isometry:
    """``(x1, x2, s) -> (e^{-c} x1, e^c x2, s + c)``."""
    return Isometry(IsometryKind.SOL_TC, c)


def _apply_one(kind: IsometryKind, c: float, x: np.ndarray) -> np.ndarray:
    a, b, s = x[..., 0], x[..., 1], x[..., 2]
    if kind is IsometryKind.SOL_TRANSLATE_X1:
        out = (a + c, b, s)
    elif kind is IsometryKind.SOL_TRANSLATE_X2:
        out = (a, b + c, s)
    elif kind is IsometryKind.SOL_TC:
        out = (math.exp(-c) * a, math.exp(c) * b, s + c)
    elif kind is IsometryKind.SOL_SIGMA:
        out = (b, -a, -s)
    elif kind is IsometryKind.SOL_TAU:
        out = (-a, b, s)
    elif kind is IsometryKind.NIL_TRANSLATE1:
        out = (a + c, b, s + c * b / 2)
    elif kind is IsometryKind.NIL_TRANSLATE2:
        out = (a, b + c, s - c * a / 2)
    elif kind is IsometryKind.NIL_VERTICAL:
        out = (a, b, s + c)
    elif kind is IsometryKind.NIL_ROTATE:
        cs, sn = math.cos(c), math.sin(c)
        out = (cs * a - sn * b, sn * a + cs * b, s)
    elif kind is IsometryKind.NIL_REFLECT:
        out = (-a, b, -s)
    else:  # pragma: no cover
        raise ValueError(kind)
    return np.stack(np.broadcast_arrays(*out), axis=-1)


def apply_isometry(space: SpaceId, g: Isometry, p):
    """Image of ``p`` (a :class:`Point` or array of canonical coordinates)."""
    if space.chart is not Chart.CANONICAL:
        raise ValueError("isometries act in the canonical chart")
    if g.spaces() - {space.space}:
        raise ValueError(f"isometry {g.kind.value} does not act on {space}")
    x = _coords(space, p)
    if g.kind is IsometryKind.COMPOSITE:
        for part in g.parts:
            x = _apply_one(part.kind, part.parameter, x)
    else:
        x = _apply_one(g.kind, g.parameter, x)
    if isinstance(p, Point):
        return Point(tuple(x), p.chart)
    return x


def sol_isotropy_group() -> list[Isometry]:
    """The eight elements of the isotropy group of the Sol3 origin.

    Enumerated as ``sigma^k`` and ``sigma^k tau`` for ``k = 0..3``.
    """
    sigma = Isometry(IsometryKind.SOL_SIGMA)
    tau = Isometry(IsometryKind.SOL_TAU)
    out = []
    for k in range(4):
        out.append(compose(*([sigma] * k)))
        out.append(compose(*([sigma] * k), tau))
    return out


# ---------------------------------------------------------------------------
# Killing fields

def killing_field_at(space: SpaceId, k: int, p) -> np.ndarray:
    """Killing field ``F_k`` (1-based) in coordinate components."""
    if space.chart is not Chart.CANONICAL:
        raise ValueError("Killing fields are listed in the canonical chart")
    x = _coords(space, p)
    a, b, s = x[..., 0], x[..., 1], x[..., 2]
    one = np.ones_like(a)
    zero = np.zeros_like(a)
    if space.space is Space.SOL3:
        fields = {1: (one, zero, zero), 2: (zero, one, zero), 3: (-a, b, one)}
    else:
        fields = {1: (one, zero, b / 2), 2: (zero, one, -a / 2),
                  3: (zero, zero, one), 4: (-b, a, zero)}
    if k not in fields:
        raise ValueError(f"no Killing field F_{k} on {space}")
    return np.stack(fields[k], axis=-1)


def killing_indices(space: SpaceId) -> Sequence[int]:
    return (1, 2, 3, 4) if space.is_nil else (1, 2, 3)


# ---------------------------------------------------------------------------
# Nil3 chart change

def nil_chart_convert(p, target: Chart | str, space: SpaceId | None = None):
    """Convert between the canonical ``x`` and the ``y`` chart of Nil3.

    ``p`` is a :class:`Point` (its tag gives the source chart) or an array,
    in which case it is assumed to be in the chart opposite to ``target``.
    """
    if space is not None and not space.is_nil:
        raise ValueError("chart conversion is defined on Nil3 only")
    target = Chart(target)
    if isinstance(p, Point):
        source = p.chart
        x = np.asarray(p.coords)
    else:
        source = Chart.NIL_Y if target is Chart.CANONICAL else Chart.CANONICAL
        x = np.asarray(p, dtype=float)
    if source is target:
        out = x.copy()
    else:
        sign = 1.0 if target is Chart.NIL_Y else -1.0
        out = x.copy()
        out[..., 2] = x[..., 2] + sign * x[..., 0] * x[..., 1] / 2
    if isinstance(p, Point):
        return Point(tuple(out), target)
    return out


def check_space(space) -> SpaceId:
    if isinstance(space, SpaceId):
        return space
    if isinstance(space, str):
        return SpaceId.parse(space)
    raise TypeError(f"expected SpaceId, got {type(space).__name__}")
