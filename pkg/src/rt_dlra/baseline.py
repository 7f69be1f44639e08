"""Single-domain low-rank baseline, dense oracle and the error norm."""
from __future__ import annotations

import math

import numpy as np

from .decomposition import SubdomainState, ToleranceConfig, Topology, dd_step
from .integrator import ZERO_SPEED, LowRankState, rk4
from .kernels import upwind_diff
from .problem import Problem

__all__ = ["MAX_DENSE_ENTRIES", "classic_step", "full_tensor_step", "dense_initial",
           "relative_error", "total_mass"]

MAX_DENSE_ENTRIES = 10 ** 8


def classic_step(state: LowRankState, problem: Problem, dt: float,
                 tol: float | ToleranceConfig, *, seed: int = 0, step: int = 0,
                 self_augment: bool = True):
    """One step with a single low-rank factorization for the whole domain.

    Runs the same pipeline as :func:`dd_step` on a 1x1 topology, so only the
    physical boundary packets enter. Without inflow those cannot raise the
    rank, hence ``self_augment`` defaults to on here.
    Returns ``(state, intermediate_rank)``.
    """
    topo = Topology(problem.grid, 1, 1)
    states, record = dd_step([SubdomainState.wrap(0, state)], problem, topo, dt, tol,
                             seed=seed, step=step, self_augment=self_augment)
    return states[0].lr, record.intermediate[0]


def dense_initial(problem: Problem) -> np.ndarray:
    return np.full((problem.grid.n_cells, problem.angles.n_phi), problem.f0)


def _ghosts(problem: Problem, axis: str):
    g = problem.grid
    if axis == "x":
        s = g.y_centers
        return problem.inflow("left", s), problem.inflow("right", s)
    s = g.x_centers
    return problem.inflow("bottom", s), problem.inflow("top", s)


def _boundary_outflow(F3, lo, hi, v, axis, c_adv, dphi, face):
    """Net rate of mass leaving through the two faces of ``axis``."""
    pos, neg = v > ZERO_SPEED, v < -ZERO_SPEED
    if axis == "x":
        first, last = F3[0], F3[-1]
    else:
        first, last = F3[:, 0], F3[:, -1]
    high = np.where(pos, last, np.where(neg, hi, 0.0)) @ v
    low = np.where(pos, lo, np.where(neg, first, 0.0)) @ v
    return c_adv * dphi * face * float(np.sum(high) - np.sum(low))


def full_tensor_step(f, problem: Problem, dt: float, outflow: list | None = None):
    """Dense reference step: x advection, y advection, collision, each by RK4
    with per-ordinate upwinding.

    If ``outflow`` is a list, the mass leaving through physical faces during
    the step (negative for net inflow) is appended to it.
    """
    g, ang = problem.grid, problem.angles
    n_phi = ang.n_phi
    if g.n_cells * n_phi > MAX_DENSE_ENTRIES:
        raise MemoryError(
            f"dense tensor of {g.n_cells * n_phi} entries exceeds {MAX_DENSE_ENTRIES}")
    f = np.asarray(f, dtype=float)
    if f.shape != (g.n_cells, n_phi):
        raise ValueError(f"expected shape {(g.n_cells, n_phi)}, got {f.shape}")
    c_adv = problem.material.c_adv
    lost = 0.0
    for axis in ("x", "y"):
        v = ang.velocities(axis)
        signs = np.where(v > ZERO_SPEED, 1, np.where(v < -ZERO_SPEED, -1, 0)).astype(np.int8)
        lo, hi = _ghosts(problem, axis)
        ax = 0 if axis == "x" else 1
        inv_h = 1.0 / (g.dx if axis == "x" else g.dy)
        face = g.dy if axis == "x" else g.dx

        def rhs(F, lo=lo, hi=hi, v=v, signs=signs, ax=ax, inv_h=inv_h):
            d = upwind_diff(F.reshape(g.nx, g.ny, n_phi), lo, hi, signs, inv_h, ax, v)
            return (-c_adv) * d.reshape(F.shape)

        if outflow is None:
            f = rk4(rhs, f, dt)
            continue
        stages = []

        def tracked(F, rhs=rhs, lo=lo, hi=hi, v=v, axis=axis, face=face):
            stages.append(_boundary_outflow(F.reshape(g.nx, g.ny, n_phi), lo, hi, v,
                                            axis, c_adv, ang.dphi, face))
            return rhs(F)

        f = rk4(tracked, f, dt)
        lost += dt / 6.0 * (stages[0] + 2 * stages[1] + 2 * stages[2] + stages[3])
    m = problem.material
    c_s, c_t, Q = m.c_s.ravel(), m.c_t.ravel(), m.Q.ravel()

    def collide(F):
        rho = F.sum(axis=1) * ang.dphi
        return (c_s * rho / (2.0 * math.pi) + Q)[:, None] - c_t[:, None] * F

    f = rk4(collide, f, dt)
    if outflow is not None:
        outflow.append(lost)
    return f


def total_mass(f, dx: float, dy: float, dphi: float) -> float:
    return float(np.sum(f)) * dx * dy * dphi


def relative_error(f, f_ref, dx: float, dy: float, dphi: float) -> float:
    """Discrete ``||f - f_ref||_2 / ||1||_2`` over space and angle."""
    f, f_ref = np.asarray(f, dtype=float), np.asarray(f_ref, dtype=float)
    if f.shape != f_ref.shape:
        raise ValueError(f"shape mismatch {f.shape} vs {f_ref.shape}")
    w = dx * dy * dphi
    return math.sqrt(float(np.sum((f - f_ref) ** 2)) * w) / math.sqrt(f.size * w)
