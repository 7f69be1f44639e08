"""Plain-text run configuration.

One ``key = value`` per line, ``#`` starts a comment. Block materials are
set with ``block i j = kind`` (1-based, counted from the bottom-left block).
Physical sides take ``boundary_<side> = zero | constant <value> |
gaussian <y0> <sigma> [<amplitude>]``.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass

from .problem import (
    HOHLRAUM_MATERIALS,
    LATTICE_MATERIALS,
    BlockLayout,
    BoundaryCondition,
    ConfigError,
    PhysicalBoundarySpec,
    Problem,
    build_from_layout,
    hohlraum_layout,
    lattice_layout,
)

__all__ = ["RunConfig", "parse_config", "build_problem", "PROBLEMS", "SOLVERS",
           "REQUIRED_KEYS", "DEFAULT_TOL"]

PROBLEMS = ("lattice", "hohlraum", "point_source", "custom")
SOLVERS = ("dd", "classic", "full_tensor")
KINDS = ("absorber", "scatterer", "source", "vacuum")
REQUIRED_KEYS = ("problem", "nx", "ny", "n_phi", "t_end")

# tolerances of the reference experiments, per problem and solver
DEFAULT_TOL = {
    ("lattice", "dd"): 6e-6, ("lattice", "classic"): 3e-5,
    ("hohlraum", "dd"): 1e-3, ("hohlraum", "classic"): 1e-4,
    ("point_source", "dd"): 1e-4, ("point_source", "classic"): 1e-5,
}
DEFAULT_BLOCKS = {"lattice": (7, 7), "hohlraum": (5, 5), "point_source": (5, 5)}


@dataclass(frozen=True)
class RunConfig:
    problem: str
    nx: int
    ny: int
    n_phi: int
    t_end: float
    blocks_x: int = 1
    blocks_y: int = 1
    tol: float = 1e-4
    min_rank: int = 1
    cfl: float = 0.5
    snapshots: tuple = ()
    seed: int = 0
    solver: str = "dd"
    out: str | None = None
    y0: float = 0.85
    sigma: float = 0.01
    geometry: tuple | None = None  # (blocks_x, blocks_y) of the material layout
    block_default: str = "vacuum"
    blocks: tuple = ()  # ((i, j, kind), ...)
    boundaries: tuple = ()  # ((side, spec), ...)
    self_augment: bool | None = None  # None: on for classic, off for dd
    workers: int = 1
    reference: str = "none"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snapshots"] = list(self.snapshots)
        d["geometry"] = list(self.geometry) if self.geometry else None
        d["blocks"] = [list(b) for b in self.blocks]
        d["boundaries"] = [list(b) for b in self.boundaries]
        return d

    @property
    def uses_self_augment(self) -> bool:
        return self.solver == "classic" if self.self_augment is None else self.self_augment

    def validated(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        for key in ("nx", "ny", "n_phi", "blocks_x", "blocks_y", "min_rank", "workers"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        if self.nx % self.blocks_x:
            raise ConfigError(f"nx = {self.nx} is not divisible by blocks_x = {self.blocks_x}")
        if self.ny % self.blocks_y:
            raise ConfigError(f"ny = {self.ny} is not divisible by blocks_y = {self.blocks_y}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError(f"t_end must be a finite nonnegative time, got {self.t_end}")
        if not self.tol >= 0:
            raise ConfigError(f"tol must be nonnegative, got {self.tol}")
        if not self.cfl > 0:
            raise ConfigError(f"cfl must be positive, got {self.cfl}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        bad = [t for t in self.snapshots if not 0 <= t <= self.t_end]
        if bad:
            raise ConfigError(f"snapshot times {bad} outside [0, t_end = {self.t_end}]")
        if self.reference not in ("none", "full_tensor"):
            raise ConfigError(f"reference must be 'none' or 'full_tensor', got {self.reference!r}")
        if self.problem == "custom" and self.geometry is None:
            raise ConfigError("custom problems need 'geometry = BXxBY'")
        for i, j, kind in self.blocks:
            if kind not in KINDS:
                raise ConfigError(f"unknown block kind {kind!r}; expected one of {KINDS}")
        if self.block_default not in KINDS:
            raise ConfigError(f"unknown block kind {self.block_default!r}")
        for side, spec in self.boundaries:
            _parse_boundary(spec)
        build_problem(self)  # layout alignment
        return self


def _parse_boundary(spec: str) -> BoundaryCondition:
    parts = spec.split()
    if not parts:
        raise ConfigError("empty boundary specification")
    kind, args = parts[0], parts[1:]
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise ConfigError(f"boundary parameters must be numbers: {spec!r}") from None
    if kind == "zero" and not vals:
        return BoundaryCondition()
    if kind == "constant" and len(vals) == 1:
        return BoundaryCondition("constant_inflow", value=vals[0])
    if kind == "gaussian" and len(vals) in (2, 3):
        return BoundaryCondition("gaussian_inflow", y0=vals[0], sigma=vals[1],
                                 amplitude=vals[2] if len(vals) == 3 else 1.0)
    raise ConfigError(f"cannot read boundary specification {spec!r}")


_INT_KEYS = {"nx", "ny", "n_phi", "blocks_x", "blocks_y", "min_rank", "seed", "workers"}
_FLOAT_KEYS = {"t_end", "tol", "cfl", "y0", "sigma"}
_STR_KEYS = {"problem", "solver", "out", "block_default", "reference"}
_SIDES = ("left", "right", "bottom", "top")
_BLOCK_RE = re.compile(r"^block\s+(\d+)\s+(\d+)$")


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "snapshots":
            return tuple(sorted(float(t) for t in re.split(r"[,\s]+", raw) if t))
        if key == "self_augment":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if key == "geometry":
            m = re.fullmatch(r"(\d+)\s*x\s*(\d+)", raw)
            if not m:
                raise ValueError(raw)
            return int(m.group(1)), int(m.group(2))
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None
    return raw


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate configuration text.

    ``overrides`` (already typed, e.g. from command-line flags) replace file
    values; ``None`` entries are ignored.
    """
    values: dict = {}
    blocks: dict = {}
    boundaries: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        m = _BLOCK_RE.match(key)
        if m:
            blocks[(int(m.group(1)), int(m.group(2)))] = raw
        elif key.startswith("boundary_") and key[9:] in _SIDES:
            boundaries[key[9:]] = raw
        elif key in _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"snapshots", "self_augment",
                                                            "geometry"}:
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _convert(key, raw, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    problem = values["problem"]
    solver = values.setdefault("solver", "dd")
    if "tol" not in values and (problem, solver) in DEFAULT_TOL:
        values["tol"] = DEFAULT_TOL[(problem, solver)]
    if solver == "dd" and problem in DEFAULT_BLOCKS:
        bx, by = DEFAULT_BLOCKS[problem]
        values.setdefault("blocks_x", bx)
        values.setdefault("blocks_y", by)
    values["blocks"] = tuple((i, j, k) for (i, j), k in sorted(blocks.items()))
    values["boundaries"] = tuple(sorted(boundaries.items()))
    return RunConfig(**values).validated()


def build_problem(cfg: RunConfig) -> Problem:
    """Problem described by a configuration (layout overrides applied)."""
    cells = {(i, j): k for i, j, k in cfg.blocks}
    if cfg.problem == "lattice":
        layout, materials = lattice_layout(), LATTICE_MATERIALS
        bc = PhysicalBoundarySpec()
    elif cfg.problem in ("hohlraum", "point_source"):
        layout, materials = hohlraum_layout(), HOHLRAUM_MATERIALS
        left = (BoundaryCondition("constant_inflow", value=1.0) if cfg.problem == "hohlraum"
                else BoundaryCondition("gaussian_inflow", y0=cfg.y0, sigma=cfg.sigma))
        bc = PhysicalBoundarySpec(left=left)
    else:
        layout = BlockLayout.from_cells(cfg.geometry[0], cfg.geometry[1],
                                        cfg.block_default, {})
        materials, bc = LATTICE_MATERIALS, PhysicalBoundarySpec()
    if cfg.geometry and cfg.problem != "custom" and cfg.geometry != (layout.blocks_x,
                                                                     layout.blocks_y):
        layout = BlockLayout.from_cells(cfg.geometry[0], cfg.geometry[1],
                                        cfg.block_default, {})
    if cells:
        layout = layout.replace(cells)
    if cfg.boundaries:
        bc = dataclasses.replace(bc, **{s: _parse_boundary(v) for s, v in cfg.boundaries})
    return build_from_layout(cfg.problem, cfg.nx, cfg.ny, cfg.n_phi, layout, materials, bc)
