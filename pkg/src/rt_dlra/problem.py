"""Grids, material fields, physical boundaries and the benchmark problems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .packets import PHYSICAL, BoundaryPacket

__all__ = [
    "ConfigError",
    "SpatialGrid",
    "AngularGrid",
    "MaterialField",
    "BoundaryCondition",
    "PhysicalBoundarySpec",
    "BlockLayout",
    "Problem",
    "LATTICE_ABSORBERS",
    "LATTICE_MATERIALS",
    "HOHLRAUM_MATERIALS",
    "lattice_layout",
    "hohlraum_layout",
    "build_from_layout",
    "build_lattice",
    "build_hohlraum",
    "build_point_source",
    "initial_state",
]


class ConfigError(ValueError):
    """Inconsistent problem or run configuration."""


@dataclass(frozen=True)
class SpatialGrid:
    nx: int
    ny: int
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"grid needs positive cell counts, got {self.nx}x{self.ny}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigError("grid extents must be increasing")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy


@dataclass(frozen=True)
class AngularGrid:
    """Midpoint grid on ``[0, 2*pi)``.

    The half-range masks are computed in exact integer arithmetic from the
    cell index, so a midpoint sitting on a cut point is assigned the way the
    inflow conditions state it (``phi <= pi/2`` counts as right-moving).
    """

    n_phi: int

    def __post_init__(self):
        if self.n_phi < 1:
            raise ConfigError(f"n_phi must be positive, got {self.n_phi}")

    @property
    def dphi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    @property
    def phi(self) -> np.ndarray:
        return (np.arange(self.n_phi) + 0.5) * self.dphi

    @property
    def vx(self) -> np.ndarray:
        return np.cos(self.phi)

    @property
    def vy(self) -> np.ndarray:
        return np.sin(self.phi)

    def velocities(self, axis: str) -> np.ndarray:
        return self.vx if axis == "x" else self.vy

    @property
    def _twice_odd(self) -> np.ndarray:
        # phi_k / (2 pi) = (2k+1) / (2 n)
        return 2 * np.arange(self.n_phi) + 1

    @property
    def x_positive(self) -> np.ndarray:
        m = self._twice_odd
        return (2 * m <= self.n_phi) | (2 * m >= 3 * self.n_phi)

    @property
    def x_negative(self) -> np.ndarray:
        return ~self.x_positive

    @property
    def y_positive(self) -> np.ndarray:
        return self._twice_odd <= self.n_phi

    @property
    def y_negative(self) -> np.ndarray:
        return ~self.y_positive

    def incoming(self, side: str) -> np.ndarray:
        """Mask of ordinates entering the domain through ``side``."""
        return {
            "left": self.x_positive,
            "right": self.x_negative,
            "bottom": self.y_positive,
            "top": self.y_negative,
        }[side]


@dataclass(frozen=True)
class MaterialField:
    """Coefficient fields indexed ``[ix, iy]``."""

    c_s: np.ndarray
    c_t: np.ndarray
    Q: np.ndarray
    c_adv: float = 1.0

    def __post_init__(self):
        if not (self.c_s.shape == self.c_t.shape == self.Q.shape):
            raise ConfigError("material fields must share one shape")
        if np.any(self.c_s < 0) or np.any(self.c_t < self.c_s):
            raise ConfigError("need c_t >= c_s >= 0 everywhere")
        if not self.c_adv > 0:
            raise ConfigError(f"c_adv must be positive, got {self.c_adv}")

    @property
    def c_a(self) -> np.ndarray:
        return self.c_t - self.c_s


@dataclass(frozen=True)
class BoundaryCondition:
    """Inflow data on one side; applied only on that side's incoming half-range.

    ``kind`` is one of ``zero_inflow_outflow``, ``constant_inflow`` (uses
    ``value``) or ``gaussian_inflow`` (uses ``y0``, ``sigma``, ``amplitude``;
    the centre is measured along the side).
    """

    kind: str = "zero_inflow_outflow"
    value: float = 0.0
    y0: float = 0.5
    sigma: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero_inflow_outflow", "constant_inflow", "gaussian_inflow"):
            raise ConfigError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "gaussian_inflow":
            if not self.sigma > 0:
                raise ConfigError(f"gaussian sigma must be positive, got {self.sigma}")
            if self.amplitude < 0:
                raise ConfigError("gaussian amplitude must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero_inflow_outflow" or (
            self.kind == "constant_inflow" and self.value == 0.0)

    def profile(self, s: np.ndarray) -> np.ndarray:
        """Inflow value at positions ``s`` along the side."""
        s = np.asarray(s, dtype=float)
        if self.kind == "constant_inflow":
            return np.full_like(s, self.value)
        if self.kind == "gaussian_inflow":
            norm = self.amplitude / (math.sqrt(2.0 * math.pi) * self.sigma)
            return norm * np.exp(-((s - self.y0) ** 2) / (2.0 * self.sigma ** 2))
        return np.zeros_like(s)


@dataclass(frozen=True)
class PhysicalBoundarySpec:
    left: BoundaryCondition = field(default_factory=BoundaryCondition)
    right: BoundaryCondition = field(default_factory=BoundaryCondition)
    bottom: BoundaryCondition = field(default_factory=BoundaryCondition)
    top: BoundaryCondition = field(default_factory=BoundaryCondition)

    def side(self, name: str) -> BoundaryCondition:
        return getattr(self, name)


@dataclass(frozen=True)
class BlockLayout:
    """Material kind per block; ``kinds[j][i]`` is block column ``i``, row ``j``
    (both 0-based, row 0 at the bottom)."""

    kinds: tuple

    @property
    def blocks_x(self) -> int:
        return len(self.kinds[0])

    @property
    def blocks_y(self) -> int:
        return len(self.kinds)

    @classmethod
    def from_cells(cls, blocks_x: int, blocks_y: int, default: str,
                   cells: Mapping[tuple, str]) -> "BlockLayout":
        """Build from 1-based ``{(i, j): kind}`` overrides."""
        rows = [[default] * blocks_x for _ in range(blocks_y)]
        for (i, j), kind in cells.items():
            if not (1 <= i <= blocks_x and 1 <= j <= blocks_y):
                raise ConfigError(f"block ({i}, {j}) outside {blocks_x}x{blocks_y} layout")
            rows[j - 1][i - 1] = kind
        return cls(tuple(tuple(r) for r in rows))

    def replace(self, cells: Mapping[tuple, str]) -> "BlockLayout":
        rows = [list(r) for r in self.kinds]
        for (i, j), kind in cells.items():
            if not (1 <= i <= self.blocks_x and 1 <= j <= self.blocks_y):
                raise ConfigError(
                    f"block ({i}, {j}) outside {self.blocks_x}x{self.blocks_y} layout")
            rows[j - 1][i - 1] = kind
        return BlockLayout(tuple(tuple(r) for r in rows))

    def kind_field(self, nx: int, ny: int) -> np.ndarray:
        if nx % self.blocks_x or ny % self.blocks_y:
            raise ConfigError(
                f"grid {nx}x{ny} is not aligned with the "
                f"{self.blocks_x}x{self.blocks_y} block layout")
        grid = np.array(self.kinds, dtype=object).T  # [i, j]
        return np.repeat(np.repeat(grid, nx // self.blocks_x, axis=0),
                         ny // self.blocks_y, axis=1)


@dataclass(frozen=True)
class Problem:
    name: str
    grid: SpatialGrid
    angles: AngularGrid
    material: MaterialField
    boundary: PhysicalBoundarySpec
    f0: float = 1e-9
    layout: BlockLayout | None = None

    def __post_init__(self):
        if self.material.c_s.shape != (self.grid.nx, self.grid.ny):
            raise ConfigError("material fields do not match the spatial grid")

    def time_step(self, cfl: float = 0.5) -> float:
        return cfl * min(self.grid.dx, self.grid.dy) / self.material.c_adv

    def side_coordinates(self, side: str) -> np.ndarray:
        return self.grid.y_centers if side in ("left", "right") else self.grid.x_centers

    def inflow(self, side: str, s: np.ndarray) -> np.ndarray:
        """Dense ghost values ``(len(s), n_phi)``; zero on outgoing ordinates."""
        prof = self.boundary.side(side).profile(s)
        return prof[:, None] * self.angles.incoming(side)[None, :]

    def boundary_packet(self, side: str, s: np.ndarray) -> BoundaryPacket:
        """Rank-1 synthetic packet carrying the inflow data on ``side``.

        ``V`` is the normalised incoming-half indicator, so the packet enters
        the interface projection exactly like a neighbour's data would.
        """
        mask = self.angles.incoming(side).astype(float)
        norm = np.linalg.norm(mask)
        bc = self.boundary.side(side)
        if norm == 0.0:
            mask, norm = np.ones(self.angles.n_phi), math.sqrt(self.angles.n_phi)
        K = (bc.profile(s) * norm)[:, None]
        return BoundaryPacket(PHYSICAL, side, K, (mask / norm)[:, None])


# Lattice: 7x7 blocks, 1-based (i, j) from the bottom left.
LATTICE_ABSORBERS = frozenset({
    (2, 2), (4, 2), (6, 2), (3, 3), (5, 3), (2, 4), (6, 4),
    (3, 5), (5, 5), (2, 6), (6, 6),
})

LATTICE_MATERIALS = {
    "absorber": (0.0, 10.0, 0.0),
    "scatterer": (1.0, 1.0, 0.0),
    "source": (1.0, 1.0, 1.0),
    "vacuum": (0.0, 0.0, 0.0),
}

HOHLRAUM_MATERIALS = {
    "absorber": (0.0, 100.0, 0.0),
    "scatterer": (1.0, 1.0, 0.0),
    "source": (1.0, 1.0, 1.0),
    "vacuum": (0.0, 0.0, 0.0),
}


def lattice_layout() -> BlockLayout:
    cells = {ij: "absorber" for ij in LATTICE_ABSORBERS}
    cells[(4, 4)] = "source"
    return BlockLayout.from_cells(7, 7, "scatterer", cells)


def hohlraum_layout() -> BlockLayout:
    """5x5 blocks: absorbing right column, top and bottom walls that leave the
    inflow column open, and a central absorbing block."""
    cells = {(5, j): "absorber" for j in range(1, 6)}
    for i in range(2, 5):
        cells[(i, 1)] = "absorber"
        cells[(i, 5)] = "absorber"
    cells[(3, 3)] = "absorber"
    return BlockLayout.from_cells(5, 5, "vacuum", cells)


def build_from_layout(name, nx, ny, n_phi, layout: BlockLayout,
                      materials: Mapping[str, tuple],
                      boundary: PhysicalBoundarySpec | None = None,
                      f0: float = 1e-9, c_adv: float = 1.0) -> Problem:
    kinds = layout.kind_field(nx, ny)
    unknown = set(np.unique(kinds)) - set(materials)
    if unknown:
        raise ConfigError(f"unknown material kinds {sorted(unknown)}")
    coef = np.array([[materials[k] for k in row] for row in kinds])
    material = MaterialField(coef[..., 0].copy(), coef[..., 1].copy(),
                             coef[..., 2].copy(), c_adv)
    return Problem(name, SpatialGrid(nx, ny), AngularGrid(n_phi), material,
                   boundary or PhysicalBoundarySpec(), f0, layout)


def build_lattice(nx: int = 252, ny: int = 252, n_phi: int = 252,
                  layout: BlockLayout | None = None) -> Problem:
    """Checkerboard lattice with a central unit source and outflow on all sides."""
    layout = layout or lattice_layout()
    return build_from_layout("lattice", nx, ny, n_phi, layout, LATTICE_MATERIALS)


def build_hohlraum(nx: int = 200, ny: int = 200, n_phi: int = 200,
                   layout: BlockLayout | None = None) -> Problem:
    """Vacuum cavity with absorbing walls; unit inflow through the left side."""
    layout = layout or hohlraum_layout()
    bc = PhysicalBoundarySpec(left=BoundaryCondition("constant_inflow", value=1.0))
    return build_from_layout("hohlraum", nx, ny, n_phi, layout, HOHLRAUM_MATERIALS, bc)


def build_point_source(nx: int = 600, ny: int = 600, n_phi: int = 200,
                       y0: float = 0.85, sigma: float = 0.01,
                       layout: BlockLayout | None = None) -> Problem:
    """Hohlraum geometry fed by a narrow Gaussian on the left side."""
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    layout = layout or hohlraum_layout()
    bc = PhysicalBoundarySpec(left=BoundaryCondition("gaussian_inflow", y0=y0, sigma=sigma))
    return build_from_layout("point_source", nx, ny, n_phi, layout, HOHLRAUM_MATERIALS, bc)


def initial_state(problem: Problem, rank: int, n_cells: int | None = None):
    """Exact low-rank form of the constant initial value ``problem.f0``.

    Columns beyond the first are an orthonormal completion with zero weights.
    ``n_cells`` selects a patch size other than the full grid.
    """
    from .integrator import LowRankState

    n_cells = problem.grid.n_cells if n_cells is None else n_cells
    n_phi = problem.angles.n_phi
    if not 1 <= rank <= min(n_cells, n_phi):
        raise ValueError(f"rank {rank} outside [1, {min(n_cells, n_phi)}]")
    U = _constant_basis(n_cells, rank)
    V = _constant_basis(n_phi, rank)
    S = np.zeros((rank, rank))
    S[0, 0] = problem.f0 * math.sqrt(n_cells * n_phi)
    return LowRankState(U, S, V)


def _constant_basis(n: int, r: int) -> np.ndarray:
    # [1, e_0, ..., e_{r-2}] is independent whenever r <= n
    A = np.zeros((n, r))
    A[:, 0] = 1.0
    A[np.arange(r - 1), np.arange(1, r)] = 1.0
    Q, _ = np.linalg.qr(A)
    Q *= np.where(Q[0] < 0, -1.0, 1.0)
    Q[:, 0] = 1.0 / math.sqrt(n)
    return Q
