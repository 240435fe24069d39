"""Finite-difference oracles that cross-check the closed-form geometry.

Nothing here reads the connection tables: everything is rebuilt from
``metric_at`` and ``canonical_frame_at`` by central differences.
"""
from __future__ import annotations

import numpy as np

from .geometry import (SpaceId, apply_isometry, canonical_frame_at, coframe_at,
                       killing_field_at, metric_at)

FD_STEP = 1e-5


def _partials(fn, p: np.ndarray, h: float) -> np.ndarray:
    """Central-difference partials of ``fn`` at ``p``; output axis 0 is the direction."""
    out = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out.append((fn(p + e) - fn(p - e)) / (2 * h))
    return np.stack(out)


def christoffel_fd(space: SpaceId, p, h: float = FD_STEP) -> np.ndarray:
    """Coordinate Christoffel symbols ``Gamma[k, i, j]`` from a differenced metric."""
    p = np.asarray(p, dtype=float)
    dG = _partials(lambda q: metric_at(space, q), p, h)  # dG[l, i, j] = d_l G_ij
    Ginv = np.linalg.inv(metric_at(space, p))
    # Gamma_{lij} = 1/2 (d_i G_jl + d_j G_il - d_l G_ij)
    lower = 0.5 * (np.einsum("ijl->lij", dG) + np.einsum("jil->lij", dG) - dG)
    return np.einsum("kl,lij->kij", Ginv, lower)


def connection_table_fd(space: SpaceId, p, h: float = FD_STEP) -> np.ndarray:
    """``out[i, j]`` = frame components of ``nabla_{E_i} E_j`` computed at ``p``."""
    p = np.asarray(p, dtype=float)
    F = canonical_frame_at(space, p, allow_y_chart=True)
    dF = _partials(lambda q: canonical_frame_at(space, q, allow_y_chart=True), p, h)
    Gam = christoffel_fd(space, p, h)
    T = coframe_at(space, p)
    out = np.empty((3, 3, 3))
    for i in range(3):
        Ei = F[:, i]
        for j in range(3):
            Ej = F[:, j]
            deriv = np.einsum("a,ak->k", Ei, dF[:, :, j])
            cov = deriv + np.einsum("kab,a,b->k", Gam, Ei, Ej)
            out[i, j] = T @ cov
    return out


def lie_derivative_metric_fd(space: SpaceId, k: int, p, h: float = FD_STEP) -> np.ndarray:
    """``(L_F g)_ij = F^l d_l g_ij + g_lj d_i F^l + g_il d_j F^l`` by central differences."""
    p = np.asarray(p, dtype=float)
    F = killing_field_at(space, k, p)
    dG = _partials(lambda q: metric_at(space, q), p, h)
    dF = _partials(lambda q: killing_field_at(space, k, q), p, h)  # dF[i, l] = d_i F^l
    G = metric_at(space, p)
    return np.einsum("l,lij->ij", F, dG) + np.einsum("lj,il->ij", G, dF) + np.einsum("il,jl->ij", G, dF)


def isometry_jacobian_fd(space: SpaceId, g, p, h: float = FD_STEP) -> np.ndarray:
    """``J[:, k]`` = derivative of ``g`` along the ``k``-th coordinate at ``p``."""
    p = np.asarray(p, dtype=float)
    return _partials(lambda q: apply_isometry(space, g, q), p, h).T


def pullback_defect(space: SpaceId, g, p, v, w, h: float = FD_STEP) -> float:
    """``<dg v, dg w>_{g(p)} - <v, w>_p`` with a differenced Jacobian."""
    p = np.asarray(p, dtype=float)
    J = isometry_jacobian_fd(space, g, p, h)
    q = apply_isometry(space, g, p)
    lhs = (J @ v) @ metric_at(space, q) @ (J @ w)
    rhs = v @ metric_at(space, p) @ w
    return float(lhs - rhs)
