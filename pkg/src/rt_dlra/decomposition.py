"""Block domain decomposition of the low-rank solver.

Every subdomain owns a :class:`LowRankState` for its cells. Before each
advection substep the subdomains swap :class:`BoundaryPacket` objects with
their two neighbours along the advection axis; physical sides are fed with
synthetic rank-1 packets built by the problem. A step is

    augment (x) -> x advection -> truncate -> augment (y) -> y advection
    -> truncate -> collision

with packets re-extracted after the x truncation.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .integrator import (
    ZERO_SPEED,
    BoundaryValues,
    LowRankState,
    Patch,
    UpwindOperators,
    advection_substep,
    axis_sides,
    collision_substep,
    density,
)
from .packets import BoundaryPacket
from .problem import AngularGrid, ConfigError, Problem, SpatialGrid, initial_state
from .tensor_core import qr_factor, svd, truncation_rank

__all__ = [
    "Subdomain",
    "Topology",
    "ToleranceConfig",
    "SubdomainState",
    "StepRecord",
    "RankClampWarning",
    "extract_boundary_packet",
    "incoming_packets",
    "project_boundary",
    "flux_directions",
    "augment",
    "truncate",
    "dd_step",
    "dof_count",
    "initial_subdomains",
    "states_from_dense",
    "gather_dense",
    "gather_density",
]

OPPOSITE = {"left": "right", "right": "left", "bottom": "top", "top": "bottom"}

# singular values of the out-of-span block below this multiple of the data
# scale are rounding noise, not new directions
_NOISE = 1e-13


class RankClampWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Subdomain:
    sid: int
    bi: int
    bj: int
    x_range: tuple[int, int]
    y_range: tuple[int, int]
    neighbors: dict = field(compare=False)  # side -> sid, None on physical sides
    patch: Patch

    @property
    def n_cells(self) -> int:
        return self.patch.n_cells

    def contains(self, x: float, y: float, grid: SpatialGrid) -> bool:
        x0 = grid.x_min + self.x_range[0] * grid.dx
        x1 = grid.x_min + self.x_range[1] * grid.dx
        y0 = grid.y_min + self.y_range[0] * grid.dy
        y1 = grid.y_min + self.y_range[1] * grid.dy
        return x0 <= x <= x1 and y0 <= y <= y1


class Topology:
    """``blocks_x * blocks_y`` equal blocks; ids run row by row from the
    bottom-left block (``sid = bj * blocks_x + bi``)."""

    def __init__(self, grid: SpatialGrid, blocks_x: int, blocks_y: int):
        if blocks_x < 1 or blocks_y < 1:
            raise ConfigError("need at least one block per axis")
        if grid.nx % blocks_x or grid.ny % blocks_y:
            raise ConfigError(
                f"grid {grid.nx}x{grid.ny} is not divisible into "
                f"{blocks_x}x{blocks_y} blocks")
        self.grid = grid
        self.blocks_x, self.blocks_y = blocks_x, blocks_y
        mx, my = grid.nx // blocks_x, grid.ny // blocks_y
        subs = []
        for bj in range(blocks_y):
            for bi in range(blocks_x):
                nb = {
                    "left": self.sid(bi - 1, bj) if bi > 0 else None,
                    "right": self.sid(bi + 1, bj) if bi < blocks_x - 1 else None,
                    "bottom": self.sid(bi, bj - 1) if bj > 0 else None,
                    "top": self.sid(bi, bj + 1) if bj < blocks_y - 1 else None,
                }
                subs.append(Subdomain(
                    self.sid(bi, bj), bi, bj, (bi * mx, (bi + 1) * mx),
                    (bj * my, (bj + 1) * my), nb, Patch(mx, my, grid.dx, grid.dy)))
        self.subdomains: list[Subdomain] = subs

    def sid(self, bi: int, bj: int) -> int:
        return bj * self.blocks_x + bi

    def __len__(self) -> int:
        return len(self.subdomains)

    def __getitem__(self, sid: int) -> Subdomain:
        return self.subdomains[sid]

    def locate(self, x: float, y: float) -> int:
        """Id of the block containing point ``(x, y)`` (clipped to the domain)."""
        g = self.grid
        bi = int((x - g.x_min) / (g.x_max - g.x_min) * self.blocks_x)
        bj = int((y - g.y_min) / (g.y_max - g.y_min) * self.blocks_y)
        return self.sid(min(max(bi, 0), self.blocks_x - 1),
                        min(max(bj, 0), self.blocks_y - 1))

    def cells(self, sid: int) -> np.ndarray:
        """Global flat cell indices of block ``sid`` in local order."""
        sub = self.subdomains[sid]
        ix = np.arange(*sub.x_range)
        iy = np.arange(*sub.y_range)
        return (ix[:, None] * self.grid.ny + iy[None, :]).ravel()

    def local_view(self, sid: int, field_xy: np.ndarray) -> np.ndarray:
        sub = self.subdomains[sid]
        return field_xy[slice(*sub.x_range), slice(*sub.y_range)]

    def local_material(self, sid: int, problem: Problem):
        """Flat ``(c_s, c_t, Q)`` of one block."""
        m = problem.material
        return tuple(np.ascontiguousarray(self.local_view(sid, a)).ravel()
                     for a in (m.c_s, m.c_t, m.Q))

    def side_coordinates(self, sid: int, side: str) -> np.ndarray:
        sub = self.subdomains[sid]
        if side in ("left", "right"):
            return self.grid.y_centers[slice(*sub.y_range)]
        return self.grid.x_centers[slice(*sub.x_range)]


@dataclass(frozen=True)
class ToleranceConfig:
    tol: float = 0.0
    min_rank: int = 1

    def __post_init__(self):
        if not self.tol >= 0:
            raise ValueError(f"tol must be nonnegative, got {self.tol}")
        if self.min_rank < 1:
            raise ValueError(f"min_rank must be at least 1, got {self.min_rank}")


@dataclass(frozen=True)
class SubdomainState:
    """A block's factors plus rank bookkeeping for the current step.

    ``r_t`` is the largest intermediate (augmented) rank seen so far in the
    step, ``r_before`` the stored rank the step started from.
    """

    sid: int
    lr: LowRankState
    r_before: int
    r_t: int

    @classmethod
    def wrap(cls, sid: int, lr: LowRankState) -> "SubdomainState":
        return cls(sid, lr, lr.rank, lr.rank)

    @property
    def rank(self) -> int:
        return self.lr.rank

    def with_lr(self, lr: LowRankState) -> "SubdomainState":
        return replace(self, lr=lr, r_t=max(self.r_t, lr.rank))


@dataclass(frozen=True)
class StepRecord:
    """Per-subdomain ranks of one completed step."""

    stored: tuple
    intermediate: tuple


def extract_boundary_packet(state: SubdomainState, patch: Patch, side: str) -> BoundaryPacket:
    lr = state.lr
    K_slice = lr.U[patch.line(side)] @ lr.S
    return BoundaryPacket(state.sid, side, K_slice, lr.V)


def incoming_packets(topology: Topology, problem: Problem, sid: int, axis: str,
                     outgoing: dict) -> tuple[BoundaryPacket, BoundaryPacket]:
    """Packets arriving at the low and high face of ``sid`` along ``axis``.

    ``outgoing`` maps ``(sender, side)`` to packets extracted from the senders.
    """
    sub = topology[sid]
    result = []
    for side in axis_sides(axis):
        nb = sub.neighbors[side]
        if nb is None:
            result.append(problem.boundary_packet(side, topology.side_coordinates(sid, side)))
        else:
            result.append(outgoing[(nb, OPPOSITE[side])])
    return result[0], result[1]


def _check_packet(packet: BoundaryPacket, axis: str, n_line: int, n_phi: int):
    if packet.side not in axis_sides(axis):
        raise ValueError(f"packet from side {packet.side!r} cannot feed axis {axis!r}")
    if packet.K_slice.shape[0] != n_line or packet.V.shape[0] != n_phi:
        raise ValueError(
            f"packet shapes {packet.K_slice.shape}/{packet.V.shape} do not match "
            f"interface of {n_line} cells and {n_phi} angles")


def project_boundary(own: SubdomainState, patch: Patch, low_packet: BoundaryPacket,
                     high_packet: BoundaryPacket, axis: str,
                     angles: AngularGrid) -> BoundaryValues:
    """Ghost K values on both faces of ``axis``.

    On each face the incoming half-range is taken from the packet and the
    outgoing half-range from the own boundary line, then projected onto the
    own angular basis.
    """
    lr = own.lr
    V = lr.V
    for side, packet in zip(axis_sides(axis), (low_packet, high_packet)):
        _check_packet(packet, axis, patch.line(side).size, V.shape[0])
    faces = []
    for side, packet in zip(axis_sides(axis), (low_packet, high_packet)):
        m_in = angles.incoming(side).astype(float)
        own_line = lr.U[patch.line(side)] @ lr.S
        Kb = (packet.K_slice @ (packet.V.T @ (m_in[:, None] * V))
              + own_line @ (V.T @ ((1.0 - m_in)[:, None] * V)))
        faces.append(Kb)
    return BoundaryValues(axis, faces[0], faces[1])


def _packet_directions(packet: BoundaryPacket) -> np.ndarray:
    # V_nb @ W with W = right factor * sigma of the interface slice
    sv = svd(packet.K_slice)
    return packet.V @ (sv.right * sv.singular_values)


def flux_directions(lr: LowRankState, patch: Patch, velocities, axis: str,
                    dt: float, c_adv: float = 1.0) -> np.ndarray:
    """Weighted angular directions of the first-order advection increment.

    The increment ``dt * A(U S V.T)`` of per-ordinate upwinding factors as
    ``D_minus K (v_plus V).T + D_plus K (v_minus V).T``; each angular block is
    weighted by the singular values of its spatial factor, like a packet.
    Boundary rows use the own boundary line as ghost (no inflow is implied).
    """
    ops = UpwindOperators(patch, axis)
    low, high = axis_sides(axis)
    K = lr.K()
    v = np.asarray(velocities, dtype=float)
    blocks = []
    for D, vk in ((ops.backward(K, K[patch.line(low)]), np.where(v > ZERO_SPEED, v, 0.0)),
                  (ops.forward(K, K[patch.line(high)]), np.where(v < -ZERO_SPEED, v, 0.0))):
        sv = svd((c_adv * dt) * D)
        blocks.append((vk[:, None] * lr.V) @ (sv.right * sv.singular_values))
    return np.hstack(blocks)


def augment(state: SubdomainState, low_packet: BoundaryPacket,
            high_packet: BoundaryPacket, tol: float,
            rng: np.random.Generator | None = None,
            extra: np.ndarray | None = None) -> SubdomainState:
    """Enlarge the angular basis with neighbour directions.

    The own basis is kept whole; directions of the neighbour data orthogonal
    to it are added while their singular-value tail exceeds ``tol``. The
    spatial basis is padded with random orthonormal columns whose weights are
    zero, so the represented function does not change.

    ``extra`` holds further weighted candidate directions ``(n_phi, m)``
    competing under the same tolerance (see :func:`flux_directions`).
    """
    lr = state.lr
    U0, S0, V0 = lr.U, lr.S, lr.V
    r = lr.rank
    n_cells, n_phi = U0.shape[0], V0.shape[0]
    cands = [_packet_directions(low_packet), _packet_directions(high_packet)]
    if extra is not None:
        cands.append(np.asarray(extra, dtype=float))
    N = np.hstack(cands)
    for _ in range(2):
        N = N - V0 @ (V0.T @ N)
    sv = svd(N)
    scale = max(np.linalg.norm(S0), np.linalg.norm(N), np.finfo(float).tiny)
    tau = sv.singular_values[sv.singular_values > _NOISE * scale]
    r_new = truncation_rank(tau, tol, 0) if tau.size else 0
    room = min(n_cells, n_phi) - r
    if r_new > room:
        warnings.warn(f"subdomain {state.sid}: augmented rank {r + r_new} clamped to "
                      f"{r + room}", RankClampWarning, stacklevel=2)
        r_new = room
    if r_new == 0:
        return state
    V1, SV = qr_factor(np.hstack([V0, sv.left[:, :r_new]]))
    rng = rng if rng is not None else np.random.default_rng(0)
    U_rand = rng.uniform(-1.0, 1.0, size=(n_cells, r_new))
    U1, SU = qr_factor(np.hstack([U0, U_rand]))
    S_hat = np.zeros((r + r_new, r + r_new))
    S_hat[:r, :r] = S0
    return state.with_lr(LowRankState(U1, SU @ S_hat @ SV.T, V1))


def truncate(state: SubdomainState, tol: float, min_rank: int = 1) -> SubdomainState:
    """Drop the smallest singular values of ``S`` while their tail stays within
    ``tol``; never below ``min_rank`` (or the current rank if that is lower)."""
    lr = state.lr
    sv = svd(lr.S)
    r = truncation_rank(sv.singular_values, tol, min(min_rank, lr.rank))
    r = max(r, 1)
    new = LowRankState(lr.U @ sv.left[:, :r], np.diag(sv.singular_values[:r]),
                       lr.V @ sv.right[:, :r])
    return replace(state, lr=new)


def _rng(seed: int, sid: int, step: int, axis: str) -> np.random.Generator:
    return np.random.default_rng([seed, sid, step, 0 if axis == "x" else 1])


def _advect_one(state, sub, problem, axis, low, high, dt, tolc, seed, step,
                self_augment):
    v, c_adv = problem.angles.velocities(axis), problem.material.c_adv
    extra = (flux_directions(state.lr, sub.patch, v, axis, dt, c_adv)
             if self_augment else None)
    st = augment(state, low, high, tolc.tol, _rng(seed, sub.sid, step, axis), extra)
    bv = project_boundary(st, sub.patch, low, high, axis, problem.angles)
    lr = advection_substep(st.lr, sub.patch, v, axis, bv, dt, c_adv)
    return truncate(st.with_lr(lr), tolc.tol, tolc.min_rank)


def _collide_one(state, topology, problem, dt):
    c_s, c_t, Q = topology.local_material(state.sid, problem)
    lr = collision_substep(state.lr, c_s, c_t, Q, problem.angles.dphi, dt)
    return state.with_lr(lr)


def dd_step(states, problem: Problem, topology: Topology, dt: float,
            tol: float | ToleranceConfig, *, seed: int = 0, step: int = 0,
            transport: Callable | None = None, workers: int | None = None,
            self_augment: bool = False):
    """Advance every subdomain by one time step.

    Parameters
    ----------
    states : sequence of SubdomainState
        Indexed by subdomain id.
    transport : callable, optional
        ``transport(packet, receiver_sid) -> packet`` applied to every packet
        on its way to a receiver (instrumentation, wire round trips).
    workers : int, optional
        Advance subdomains on a thread pool of this size.
    self_augment : bool
        Also offer the out-of-span directions of each block's own advection
        increment to the augmentation. Lets the rank grow without inflow.

    Returns
    -------
    states : list of SubdomainState
    record : StepRecord
    """
    tolc = tol if isinstance(tol, ToleranceConfig) else ToleranceConfig(tol)
    if len(states) != len(topology):
        raise ValueError(f"{len(states)} states for {len(topology)} subdomains")
    states = [SubdomainState(s.sid, s.lr, s.rank, s.rank) for s in states]
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    run = pool.map if pool else map
    try:
        for axis in ("x", "y"):
            outgoing = {}
            for st in states:
                patch = topology[st.sid].patch
                for side in axis_sides(axis):
                    outgoing[(st.sid, side)] = extract_boundary_packet(st, patch, side)

            def advance(st, axis=axis, outgoing=outgoing):
                low, high = incoming_packets(topology, problem, st.sid, axis, outgoing)
                if transport is not None:
                    low, high = transport(low, st.sid), transport(high, st.sid)
                return _advect_one(st, topology[st.sid], problem, axis, low, high,
                                   dt, tolc, seed, step, self_augment)

            states = list(run(advance, states))
        states = list(run(lambda st: _collide_one(st, topology, problem, dt), states))
    finally:
        if pool:
            pool.shutdown()
    record = StepRecord(tuple(s.rank for s in states), tuple(s.r_t for s in states))
    return states, record


def dof_count(ranks, n_cells, n_phi: int) -> int:
    """``sum_i r_i * (n_cells_i + n_phi + r_i)``."""
    ranks = np.atleast_1d(np.asarray(ranks, dtype=np.int64))
    cells = np.broadcast_to(np.asarray(n_cells, dtype=np.int64), ranks.shape)
    return int(np.sum(ranks * (cells + n_phi + ranks)))


def initial_subdomains(problem: Problem, topology: Topology, rank: int = 1):
    return [SubdomainState.wrap(sub.sid, initial_state(problem, rank, sub.n_cells))
            for sub in topology.subdomains]


def states_from_dense(F, topology: Topology, tol: float = 0.0, min_rank: int = 1):
    return [SubdomainState.wrap(sub.sid, LowRankState.from_dense(
        F[topology.cells(sub.sid)], tol, min_rank)) for sub in topology.subdomains]


def gather_dense(states, topology: Topology) -> np.ndarray:
    n_phi = states[0].lr.V.shape[0]
    F = np.empty((topology.grid.n_cells, n_phi))
    for st in states:
        F[topology.cells(st.sid)] = st.lr.dense()
    return F


def gather_density(states, topology: Topology, dphi: float) -> np.ndarray:
    """Global density indexed ``[ix, iy]``."""
    rho = np.empty(topology.grid.n_cells)
    for st in states:
        rho[topology.cells(st.sid)] = density(st.lr, dphi)
    return rho.reshape(topology.grid.nx, topology.grid.ny)
