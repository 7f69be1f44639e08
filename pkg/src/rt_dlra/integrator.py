"""Projector-splitting substeps on one rectangular patch.

Discrete conventions: ``f`` on a patch is the matrix ``U @ S @ V.T`` of shape
``(n_cells, n_phi)`` with cells flattened as ``ix * ny + iy``. ``U`` and ``V``
have Euclidean-orthonormal columns, so projections onto the bases carry no
quadrature weight; ``dphi`` only appears where ``f`` is integrated over angle
(density, isotropic scattering).

Each substep integrates the K equation with RK4, then performs the S and L
updates with right-hand sides evaluated at the K-step result. Those right
sides do not depend on S or L, so the S and L flows are integrated exactly;
within the span of the old angular basis they cancel, which makes a substep at
full rank reproduce the dense per-ordinate scheme.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import upwind_diff
from .tensor_core import qr_factor, svd, truncation_rank

__all__ = [
    "ConsistencyError",
    "CFLWarning",
    "LowRankState",
    "Patch",
    "FluxMatrix",
    "UpwindOperators",
    "BoundaryValues",
    "rk4",
    "flux_matrix",
    "upwind_rhs",
    "angular_flux_projection",
    "advection_substep",
    "collision_rhs",
    "collision_substep",
    "density",
]

ZERO_SPEED = 1e-14


class ConsistencyError(RuntimeError):
    """Internal invariant of a low-rank factorization was violated."""


class CFLWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class LowRankState:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.S.shape[0]

    def K(self) -> np.ndarray:
        return self.U @ self.S

    def dense(self) -> np.ndarray:
        return self.U @ self.S @ self.V.T

    def orthonormality_error(self) -> float:
        r = self.rank
        eye = np.eye(r)
        return max(np.abs(self.U.T @ self.U - eye).max(initial=0.0),
                   np.abs(self.V.T @ self.V - eye).max(initial=0.0))

    @classmethod
    def from_dense(cls, F, tol: float = 0.0, min_rank: int = 1,
                   max_rank: int | None = None) -> "LowRankState":
        """Truncated SVD of a dense ``(n_cells, n_phi)`` matrix."""
        sv = svd(F)
        r = truncation_rank(sv.singular_values, tol, min(min_rank, sv.singular_values.size))
        if max_rank is not None:
            r = min(r, max_rank)
        r = max(r, min_rank)
        return cls(sv.left[:, :r].copy(), np.diag(sv.singular_values[:r]),
                   sv.right[:, :r].copy())


@dataclass(frozen=True)
class Patch:
    """Structured block of ``nx * ny`` cells."""

    nx: int
    ny: int
    dx: float
    dy: float

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def spacing(self, axis: str) -> float:
        return self.dx if axis == "x" else self.dy

    def line(self, side: str) -> np.ndarray:
        """Flat indices of the cells along ``side``, ordered along the side."""
        ix, iy = np.arange(self.nx), np.arange(self.ny)
        if side == "left":
            return iy
        if side == "right":
            return (self.nx - 1) * self.ny + iy
        if side == "bottom":
            return ix * self.ny
        if side == "top":
            return ix * self.ny + self.ny - 1
        raise ValueError(f"unknown side {side!r}")


def axis_sides(axis: str) -> tuple[str, str]:
    if axis == "x":
        return "left", "right"
    if axis == "y":
        return "bottom", "top"
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


@dataclass(frozen=True)
class FluxMatrix:
    """``C = V.T diag(v) V = P diag(Lambda) P.T``."""

    C: np.ndarray
    P: np.ndarray
    Lambda: np.ndarray

    @property
    def signs(self) -> np.ndarray:
        s = np.sign(self.Lambda)
        s[np.abs(self.Lambda) <= ZERO_SPEED] = 0
        return s.astype(np.int8)


def flux_matrix(V, velocities) -> FluxMatrix:
    V = np.asarray(V, dtype=float)
    r = V.shape[1]
    if np.abs(V.T @ V - np.eye(r)).max(initial=0.0) > 1e-8:
        raise ConsistencyError("angular basis is not orthonormal")
    C = V.T @ (np.asarray(velocities, dtype=float)[:, None] * V)
    C = 0.5 * (C + C.T)
    lam, P = np.linalg.eigh(C)
    return FluxMatrix(C, P, lam)


class UpwindOperators:
    """First-order one-sided differences along one axis of a patch.

    ``backward`` is the stencil for positive speeds and consumes the ghost
    line at the low face, ``forward`` the one for negative speeds and consumes
    the ghost line at the high face.
    """

    def __init__(self, patch: Patch, axis: str):
        axis_sides(axis)
        self.patch = patch
        self.axis = axis
        self.ax = 0 if axis == "x" else 1
        self.inv_h = 1.0 / patch.spacing(axis)

    def _apply(self, A, lo, hi, signs, scale=None):
        p = self.patch
        m = A.shape[1]
        out = upwind_diff(A.reshape(p.nx, p.ny, m), lo, hi, signs, self.inv_h,
                          self.ax, scale)
        return out.reshape(p.n_cells, m)

    def split(self, A, lo, hi, signs, scale=None):
        return self._apply(A, lo, hi, signs, scale)

    def backward(self, A, lo):
        m = A.shape[1]
        return self._apply(A, lo, np.zeros_like(lo), np.ones(m, np.int8))

    def forward(self, A, hi):
        m = A.shape[1]
        return self._apply(A, np.zeros_like(hi), hi, -np.ones(m, np.int8))

    def matrices(self):
        """Dense 1-D stencils ``(D_minus, D_plus)`` of size ``n``; the ghost
        enters as ``-inv_h * ghost`` in the first row of ``D_minus`` and
        ``+inv_h * ghost`` in the last row of ``D_plus``."""
        n = self.patch.nx if self.ax == 0 else self.patch.ny
        h = self.inv_h
        Dm = h * (np.eye(n) - np.eye(n, k=-1))
        Dp = h * (np.eye(n, k=1) - np.eye(n))
        return Dm, Dp


@dataclass(frozen=True)
class BoundaryValues:
    """Ghost K values at the low and high faces of ``axis``."""

    axis: str
    low: np.ndarray
    high: np.ndarray

    @property
    def rank(self) -> int:
        return self.low.shape[1]


def rk4(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def upwind_rhs(K, flux: FluxMatrix, ops: UpwindOperators, bv: BoundaryValues,
               c_adv: float = 1.0):
    """``-c_adv * D K C`` with each eigen-column of ``K P`` upwinded by the sign
    of its eigenvalue."""
    r = flux.C.shape[0]
    if K.shape[1] != r or bv.rank != r:
        raise ValueError(
            f"rank mismatch: K has {K.shape[1]}, flux {r}, boundary {bv.rank} columns")
    P = flux.P
    D = ops.split(K @ P, bv.low @ P, bv.high @ P, flux.signs, flux.Lambda)
    return (-c_adv) * (D @ P.T)


def angular_flux_projection(U, K, V, velocities, ops: UpwindOperators,
                            bv: BoundaryValues, c_adv: float = 1.0):
    """``R = (U.T @ A(K @ V.T)).T`` for the per-ordinate upwind advection ``A``.

    Ordinate ``k`` is differenced according to the sign of its own speed with
    ghost values ``bv @ V[k]``. Returns an ``(n_phi, r)`` matrix.
    """
    v = np.asarray(velocities, dtype=float)
    Am = U.T @ ops.backward(K, bv.low)
    Ap = U.T @ ops.forward(K, bv.high)
    vp = np.where(v > ZERO_SPEED, v, 0.0)
    vn = np.where(v < -ZERO_SPEED, v, 0.0)
    return (-c_adv) * (vp[:, None] * (V @ Am.T) + vn[:, None] * (V @ Ap.T))


def _s_and_l(U1, S1, V0, R, dt) -> LowRankState:
    # S flow runs backward, L flow forward; both right sides are fixed
    S2 = S1 - dt * (R.T @ V0)
    L1 = V0 @ S2.T + dt * R
    V1, St = qr_factor(L1)
    return LowRankState(U1, St.T, V1)


def advection_substep(state: LowRankState, patch: Patch, velocities, axis: str,
                      bv: BoundaryValues, dt: float, c_adv: float = 1.0) -> LowRankState:
    """One projector-splitting step of ``f_t + c_adv v f_axis = 0``.

    ``bv`` holds the ghost K values (current rank) frozen over the step.
    """
    if bv.axis != axis:
        raise ValueError(f"boundary values are for axis {bv.axis!r}, not {axis!r}")
    ops = UpwindOperators(patch, axis)
    flux = flux_matrix(state.V, velocities)
    lam_max = np.abs(flux.Lambda).max(initial=0.0)
    cfl = c_adv * lam_max * dt * ops.inv_h
    if cfl > 1.0:
        warnings.warn(f"CFL number {cfl:.3f} exceeds 1 on axis {axis}", CFLWarning,
                      stacklevel=2)
    K1 = rk4(lambda K: upwind_rhs(K, flux, ops, bv, c_adv), state.K(), dt)
    U1, S1 = qr_factor(K1)
    R = angular_flux_projection(U1, K1, state.V, velocities, ops, bv, c_adv)
    return _s_and_l(U1, S1, state.V, R, dt)


def collision_rhs(K, w, c_s, c_t, Q, dphi):
    """K-equation right side of ``f_t = c_s rho / 2pi - c_t f + Q``; ``w = V.T @ 1``."""
    rho = (K @ w) * dphi
    return (np.outer(c_s * rho / (2.0 * math.pi), w) - c_t[:, None] * K
            + np.outer(Q, w))


def collision_substep(state: LowRankState, c_s, c_t, Q, dphi: float,
                      dt: float) -> LowRankState:
    """Absorption, isotropic scattering and source; coefficients are flat
    per-cell arrays of the patch."""
    c_s, c_t, Q = (np.ravel(a) for a in (c_s, c_t, Q))
    V0 = state.V
    w = V0.sum(axis=0)
    K1 = rk4(lambda K: collision_rhs(K, w, c_s, c_t, Q, dphi), state.K(), dt)
    U1, S1 = qr_factor(K1)
    rho = (K1 @ w) * dphi
    iso = U1.T @ (c_s * rho / (2.0 * math.pi) + Q)
    R = iso[None, :] - V0 @ (U1.T @ (c_t[:, None] * K1)).T
    return _s_and_l(U1, S1, V0, R, dt)


def density(state: LowRankState, dphi: float) -> np.ndarray:
    """Flat per-cell ``rho = sum_k f[:, k] * dphi``."""
    return state.U @ (state.S @ state.V.sum(axis=0)) * dphi
