"""Run orchestration and plain-file output.

A run directory holds::

    manifest.json            resolved config, traces, timings
    density_t<time>.csv      x,y,rho snapshots
    ranks.csv, dof.csv       one row per time step
    final/                   final factors (CSV) for ``compare``
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import dense_initial, full_tensor_step, relative_error
from .config import RunConfig, build_problem
from .decomposition import (
    SubdomainState,
    ToleranceConfig,
    Topology,
    dd_step,
    dof_count,
    gather_dense,
    gather_density,
    initial_subdomains,
)
from .integrator import LowRankState
from .kernels import BACKEND

__all__ = ["RunManifest", "run", "write_density_csv", "read_density_csv",
           "load_final", "compare", "default_out_dir"]

OUT_ENV = "RT_DLRA_OUT"
_FMT = "{:.17g}"


@dataclass
class RunManifest:
    config: dict
    out_dir: str
    dt: float
    times: list = field(default_factory=list)
    stored_max_rank: list = field(default_factory=list)
    intermediate_max_rank: list = field(default_factory=list)
    dof_stored: list = field(default_factory=list)
    dof_intermediate: list = field(default_factory=list)
    final_ranks: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    error_vs_reference: float | None = None
    wall_clock_s: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times)

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["n_steps"] = self.n_steps
        d["version"] = __version__
        d["backend"] = BACKEND
        return json.dumps(d, indent=2, sort_keys=True)


def default_out_dir(cfg: RunConfig) -> Path:
    root = os.environ.get(OUT_ENV, "rt_dlra_runs")
    return Path(root) / f"{cfg.problem}_{cfg.solver}_{cfg.nx}x{cfg.ny}x{cfg.n_phi}"


def write_density_csv(rho, path, x_centers, y_centers) -> None:
    """Write ``rho[ix, iy]`` as ``x,y,rho`` rows, y-major."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (len(x_centers), len(y_centers)):
        raise ValueError(f"field shape {rho.shape} does not match the grid")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density field is not finite")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "rho"])
        for iy, y in enumerate(y_centers):
            for ix, x in enumerate(x_centers):
                w.writerow([_FMT.format(x), _FMT.format(y), _FMT.format(rho[ix, iy])])


def read_density_csv(path):
    """Inverse of :func:`write_density_csv`: ``(x_centers, y_centers, rho)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    rho = data[:, 2].reshape(len(ys), len(xs)).T
    return xs, ys, rho


def _write_matrix(path, M) -> None:
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def _read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _snapshot_name(t: float) -> str:
    return f"density_t{t:.6f}.csv"


class _Solver:
    """Uniform stepping interface over the three solvers."""

    def __init__(self, cfg: RunConfig, problem):
        self.cfg, self.problem = cfg, problem
        self.n_phi = problem.angles.n_phi
        if cfg.solver == "dd":
            self.topology = Topology(problem.grid, cfg.blocks_x, cfg.blocks_y)
        else:
            self.topology = Topology(problem.grid, 1, 1)
        self.cells = [s.n_cells for s in self.topology.subdomains]
        self.tolc = ToleranceConfig(cfg.tol, cfg.min_rank)
        if cfg.solver == "full_tensor":
            self.f = dense_initial(problem)
        else:
            self.states = initial_subdomains(problem, self.topology)

    def step(self, dt: float, index: int):
        if self.cfg.solver == "full_tensor":
            self.f = full_tensor_step(self.f, self.problem, dt)
            full = min(self.problem.grid.n_cells, self.n_phi)
            return (full,), (full,)
        self.states, rec = dd_step(
            self.states, self.problem, self.topology, dt, self.tolc, seed=self.cfg.seed,
            step=index, workers=self.cfg.workers, self_augment=self.cfg.uses_self_augment)
        return rec.stored, rec.intermediate

    def density(self) -> np.ndarray:
        g = self.problem.grid
        if self.cfg.solver == "full_tensor":
            return (self.f.sum(axis=1) * self.problem.angles.dphi).reshape(g.nx, g.ny)
        return gather_density(self.states, self.topology, self.problem.angles.dphi)

    def dense(self) -> np.ndarray:
        if self.cfg.solver == "full_tensor":
            return self.f
        return gather_dense(self.states, self.topology)

    def ranks(self) -> list:
        if self.cfg.solver == "full_tensor":
            return [min(self.problem.grid.n_cells, self.n_phi)]
        return [s.rank for s in self.states]

    def save(self, folder: Path) -> None:
        folder.mkdir(parents=True, exist_ok=True)
        if self.cfg.solver == "full_tensor":
            _write_matrix(folder / "F_0.csv", self.f)
            return
        for st in self.states:
            _write_matrix(folder / f"U_{st.sid}.csv", st.lr.U)
            _write_matrix(folder / f"S_{st.sid}.csv", st.lr.S)
            _write_matrix(folder / f"V_{st.sid}.csv", st.lr.V)


def _schedule(t_end: float, snapshots) -> list:
    return sorted(set(float(t) for t in snapshots) | {float(t_end)})


def run(cfg: RunConfig, out_dir=None, progress=None) -> RunManifest:
    """Integrate to ``cfg.t_end`` writing snapshots, traces and the manifest.

    Steps are shortened where needed so that every snapshot time and
    ``t_end`` are hit exactly.
    """
    problem = build_problem(cfg)
    out = Path(out_dir or cfg.out or default_out_dir(cfg))
    out.mkdir(parents=True, exist_ok=True)
    dt = problem.time_step(cfg.cfl)
    manifest = RunManifest(cfg.to_dict(), str(out), dt)
    start = time.perf_counter()
    if cfg.t_end == 0:
        manifest.wall_clock_s = time.perf_counter() - start
        (out / "manifest.json").write_text(manifest.to_json())
        return manifest

    solver = _Solver(cfg, problem)
    ref = dense_initial(problem) if cfg.reference == "full_tensor" else None
    g = problem.grid
    n_sub = len(solver.topology)
    n_phi = problem.angles.n_phi
    full = cfg.solver == "full_tensor"
    rank_cols = [f"r_{i}" for i in range(n_sub)] + [f"rt_{i}" for i in range(n_sub)]
    with open(out / "ranks.csv", "w", newline="") as fr, \
            open(out / "dof.csv", "w", newline="") as fd:
        rank_w, dof_w = csv.writer(fr), csv.writer(fd)
        rank_w.writerow(["step", "t"] + rank_cols)
        dof_w.writerow(["step", "t", "dof_stored", "dof_intermediate"])
        t, index = 0.0, 0
        for target in _schedule(cfg.t_end, cfg.snapshots):
            while target - t > 1e-12 * max(1.0, target):
                h = min(dt, target - t)
                if target - (t + h) <= 1e-9 * dt:
                    h = target - t
                stored, inter = solver.step(h, index)
                if ref is not None:
                    ref = full_tensor_step(ref, problem, h)
                t = target if h == target - t else t + h
                index += 1
                if full:
                    d_s = d_i = g.n_cells * n_phi
                else:
                    d_s = dof_count(stored, solver.cells, n_phi)
                    d_i = dof_count(inter, solver.cells, n_phi)
                rank_w.writerow([index, _FMT.format(t)] + list(stored) + list(inter))
                dof_w.writerow([index, _FMT.format(t), d_s, d_i])
                manifest.times.append(t)
                manifest.stored_max_rank.append(int(max(stored)))
                manifest.intermediate_max_rank.append(int(max(inter)))
                manifest.dof_stored.append(int(d_s))
                manifest.dof_intermediate.append(int(d_i))
                if progress:
                    progress(index, t, stored, inter)
            if target in cfg.snapshots:
                name = _snapshot_name(target)
                write_density_csv(solver.density(), out / name, g.x_centers, g.y_centers)
                manifest.snapshots.append({"t": target, "file": name})
    manifest.final_ranks = [int(r) for r in solver.ranks()]
    if ref is not None:
        manifest.error_vs_reference = relative_error(solver.dense(), ref, g.dx, g.dy,
                                                     problem.angles.dphi)
    solver.save(out / "final")
    manifest.wall_clock_s = time.perf_counter() - start
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest


def load_final(run_dir):
    """Dense final distribution function of a finished run and its grid."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "manifest.json").read_text())
    cfg = meta["config"]
    nx, ny, n_phi = cfg["nx"], cfg["ny"], cfg["n_phi"]
    folder = run_dir / "final"
    if not folder.is_dir():
        raise FileNotFoundError(f"{run_dir} holds no final state (t_end = 0?)")
    if cfg["solver"] == "full_tensor":
        F = _read_matrix(folder / "F_0.csv")
    else:
        from .problem import SpatialGrid

        bx, by = (cfg["blocks_x"], cfg["blocks_y"]) if cfg["solver"] == "dd" else (1, 1)
        topo = Topology(SpatialGrid(nx, ny), bx, by)
        states = []
        for sub in topo.subdomains:
            U = _read_matrix(folder / f"U_{sub.sid}.csv")
            S = _read_matrix(folder / f"S_{sub.sid}.csv")
            V = _read_matrix(folder / f"V_{sub.sid}.csv")
            r = S.shape[0]
            states.append(SubdomainState.wrap(sub.sid, LowRankState(
                U.reshape(sub.n_cells, r), S, V.reshape(n_phi, r))))
        F = gather_dense(states, topo)
    return F, (1.0 / nx, 1.0 / ny, 2.0 * math.pi / n_phi)


def compare(run_a, run_b) -> float:
    """Relative L2 error of run ``a`` against run ``b`` (the reference)."""
    Fa, (dx, dy, dphi) = load_final(run_a)
    Fb, grid_b = load_final(run_b)
    if Fa.shape != Fb.shape:
        raise ValueError(f"runs have different grids: {Fa.shape} vs {Fb.shape}")
    return relative_error(Fa, Fb, dx, dy, dphi)
