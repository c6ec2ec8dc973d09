"""Coverage of mobility traces, largest Lyapunov exponent and bifurcation scans."""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Iterable
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .dynsys import IntegratorConfig
from .dynsys import SystemDef
from .dynsys import as_state
from .dynsys import integrate
from .dynsys import separation_log_sum
from .errors import ConfigError
from .exports import fmt17
from .exports import mean_and_ci95
from .exports import mean_and_std
from .exports import write_csv
from .mobility import AgentTrace
from .mobility import Arena
from .mobility import UavConfig
from .mobility import generate_uav_trace
from .mobility import random_walk_trace
from .returnmap import SymbolPartition
from .section import SectionComponent
from .section import iter_raw_crossings

_LOG = logging.getLogger(__name__)

MIN_RENORMALIZATIONS = 100


# --------------------------------------------------------------------------- coverage


@dataclass
class CoverageGrid:
    """Square cells over a rectangle; a cell is covered when a sampled position lies within
    ``sensing_radius`` of its center (inclusive)."""

    x0: float
    y0: float
    width: float
    height: float
    cells_x: int
    cells_y: int
    sensing_radius: float
    periodic: bool = False
    visited: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.cells_x < 1 or self.cells_y < 1:
            raise ConfigError("coverage grid needs at least one cell per side")
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("coverage grid extents must be > 0")
        if self.sensing_radius < 0:
            raise ConfigError("sensing_radius must be >= 0")
        self.visited = np.zeros(self.cells_x * self.cells_y, dtype=bool)
        cx = self.x0 + (np.arange(self.cells_x) + 0.5) * self.cell_width
        cy = self.y0 + (np.arange(self.cells_y) + 0.5) * self.cell_height
        gx, gy = np.meshgrid(cx, cy, indexing="xy")
        centers = np.column_stack([gx.ravel() - self.x0, gy.ravel() - self.y0])
        boxsize = (self.width, self.height) if self.periodic else None
        self._tree = cKDTree(centers, boxsize=boxsize)

    @classmethod
    def for_arena(
        cls, arena: Arena, cells: int = 100, sensing_radius: float | None = None
    ) -> CoverageGrid:
        cell = arena.width / cells
        return cls(
            x0=0.0,
            y0=0.0,
            width=arena.width,
            height=arena.height,
            cells_x=cells,
            cells_y=max(1, int(round(arena.height / cell))),
            sensing_radius=cell if sensing_radius is None else float(sensing_radius),
            periodic=arena.wrap,
        )

    @property
    def cell_width(self) -> float:
        return self.width / self.cells_x

    @property
    def cell_height(self) -> float:
        return self.height / self.cells_y

    @property
    def cell_size(self) -> float:
        return min(self.cell_width, self.cell_height)

    @property
    def fraction(self) -> float:
        return float(np.count_nonzero(self.visited)) / self.visited.size

    def blank(self, sensing_radius: float | None = None) -> CoverageGrid:
        return CoverageGrid(
            self.x0,
            self.y0,
            self.width,
            self.height,
            self.cells_x,
            self.cells_y,
            self.sensing_radius if sensing_radius is None else float(sensing_radius),
            self.periodic,
        )

    def mark_points(self, points: np.ndarray) -> None:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2) - (self.x0, self.y0)
        if pts.size == 0:
            return
        if self.periodic:
            box = np.array([self.width, self.height])
            pts = np.mod(pts, box)
            pts = np.where(pts >= box, 0.0, pts)
        hits = self._tree.query_ball_point(pts, r=self.sensing_radius)
        for idx in hits:
            if idx:
                self.visited[idx] = True

    def mark_trace(self, trace: AgentTrace) -> None:
        self.mark_points(sample_trace(trace, self.cell_size / 2.0))


def sample_trace(trace: AgentTrace, spacing: float) -> np.ndarray:
    """Positions along the waypoint polyline, no farther apart than ``spacing``."""
    pos = trace.positions
    if pos.shape[0] <= 1:
        return pos
    arena = trace.arena
    chunks = [pos[:1]]
    for a, b in zip(pos[:-1], pos[1:]):
        d = arena.displacement(a, b) if arena is not None else b - a
        n = max(1, int(math.ceil(float(np.hypot(*d)) / spacing)))
        s = np.arange(1, n + 1, dtype=np.float64)[:, None] / n
        chunks.append(a + s * d)
    return np.vstack(chunks)


def coverage_rate(
    traces: Iterable[AgentTrace], grid: CoverageGrid, sensing_radius: float | None = None
) -> float:
    """Covered fraction of ``grid`` cells; ``grid`` itself is left untouched."""
    work = grid.blank(sensing_radius)
    for trace in traces:
        work.mark_trace(trace)
    return work.fraction


@dataclass(frozen=True)
class CoverageComparison:
    seeds: tuple[int, ...]
    moves: tuple[int, ...]
    chaotic: tuple[float, ...]
    random_walk: tuple[float, ...]

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {"seeds": list(self.seeds), "moves": list(self.moves)}
        for name, values in (("chaotic", self.chaotic), ("random_walk", self.random_walk)):
            mean, std = mean_and_std(list(values))
            _m, lo, hi = mean_and_ci95(list(values))
            out[name] = {"mean": mean, "std": std, "ci95": [lo, hi], "values": list(values)}
        return out


def compare_coverage(
    system: SystemDef,
    component: SectionComponent,
    partition: SymbolPartition,
    cfg: UavConfig,
    *,
    reference: Sequence[float],
    seeds: Sequence[int],
    moves: int,
    dt: float = 0.01,
    cells: int = 100,
    sensing_radius: float | None = None,
    ic_radius: float = 0.5,
    jobs: int = 1,
    metrics: Any = None,
) -> CoverageComparison:
    """Chaotic UAV against a random walk, seed by seed, at equal path length."""
    grid = CoverageGrid.for_arena(cfg.arena, cells, sensing_radius)

    def one(seed: int) -> tuple[int, float, float]:
        uav = generate_uav_trace(
            system,
            component,
            partition,
            cfg,
            reference=reference,
            dt=dt,
            max_moves=moves,
            seed=seed,
            ic_radius=ic_radius,
            metrics=metrics,
        )
        n_moves = len(uav) - 1
        walk = random_walk_trace(cfg, seed, moves=n_moves, metrics=metrics)
        return n_moves, coverage_rate([uav], grid), coverage_rate([walk], grid)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    comparison = CoverageComparison(
        seeds=tuple(int(s) for s in seeds),
        moves=tuple(r[0] for r in results),
        chaotic=tuple(r[1] for r in results),
        random_walk=tuple(r[2] for r in results),
    )
    _LOG.info("coverage_compared", extra={"seeds": len(seeds), "moves": moves})
    return comparison


def write_coverage_csv(comparison: CoverageComparison, path: Path) -> None:
    rows = []
    for seed, chaotic, walk in zip(comparison.seeds, comparison.chaotic, comparison.random_walk):
        rows.append([f"uav-{seed}", fmt17(chaotic)])
        rows.append([f"random_walk-{seed}", fmt17(walk)])
    write_csv(path, ["agent", "coverage"], rows)


# --------------------------------------------------------------------------- Lyapunov


@dataclass(frozen=True)
class LleEstimate:
    lambda1: float
    transient_discarded: int
    renorm_interval: float
    trajectory_span: float
    dt: float
    d0: float
    renormalizations: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda1": self.lambda1,
            "transient_discarded": self.transient_discarded,
            "renorm_interval": self.renorm_interval,
            "trajectory_span": self.trajectory_span,
            "dt": self.dt,
            "d0": self.d0,
            "renormalizations": self.renormalizations,
        }


def lle_benettin(
    system: SystemDef,
    s0: Sequence[float],
    dt: float = 0.01,
    span: float = 1000.0,
    renorm_interval: float = 1.0,
    d0: float = 1e-8,
    *,
    transient: float = 100.0,
) -> LleEstimate:
    """Two-trajectory estimate with renormalization to ``d0`` every ``renorm_interval``.

    The partner starts at ``d0`` along the diagonal; ``lambda1`` is the mean of
    ``ln(d/d0)`` per unit time over ``span`` after ``transient`` time units.
    """
    state = as_state(system, s0)
    if not (dt > 0 and renorm_interval >= dt and d0 > 0):
        raise ConfigError("need dt > 0, renorm_interval >= dt and d0 > 0")
    steps_per = max(1, int(round(renorm_interval / dt)))
    n_renorm = int(math.floor(span / (steps_per * dt) + 1e-9))
    if n_renorm < MIN_RENORMALIZATIONS:
        raise ConfigError(
            f"span {span} gives {n_renorm} renormalizations; need >= {MIN_RENORMALIZATIONS}"
        )
    transient_steps = max(0, int(round(transient / dt)))
    total = separation_log_sum(
        system,
        state,
        dt,
        transient_steps=transient_steps,
        renormalizations=n_renorm,
        steps_per_renorm=steps_per,
        d0=d0,
    )
    interval = steps_per * dt
    estimate = LleEstimate(
        lambda1=float(total / (n_renorm * interval)),
        transient_discarded=transient_steps,
        renorm_interval=interval,
        trajectory_span=n_renorm * interval,
        dt=float(dt),
        d0=float(d0),
        renormalizations=n_renorm,
    )
    _LOG.info("lle_estimate", extra={"system": system.name, "lambda1": estimate.lambda1})
    return estimate


# --------------------------------------------------------------------------- bifurcation


@dataclass(frozen=True)
class BifurcationDiagram:
    param_name: str
    param_values: tuple[float, ...]
    columns: tuple[np.ndarray, ...] = field(compare=False)

    def __len__(self) -> int:
        return len(self.param_values)


def distinct_values(values: Sequence[float] | np.ndarray, tol: float = 1e-3) -> int:
    """Number of clusters after merging sorted values closer than ``tol``."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        return 0
    return int(np.count_nonzero(np.diff(arr) > tol)) + 1


def _column(
    system: SystemDef,
    component: SectionComponent,
    s0: Sequence[float],
    dt: float,
    transient_steps: int,
    steps: int,
    n_last: int,
) -> np.ndarray:
    start = integrate(
        system, s0, IntegratorConfig(dt=dt, steps=1, transient_steps=transient_steps)
    ).final_state
    last: deque[float] = deque(maxlen=n_last)
    for raw, _comp in iter_raw_crossings(system, start, dt, [component], max_steps=steps):
        last.append(float(raw.state[component.norm_coord]))
    return np.array(last, dtype=np.float64)


def bifurcation_scan(
    system: SystemDef,
    param_name: str,
    values: Sequence[float],
    component: SectionComponent,
    *,
    s0: Sequence[float],
    dt: float = 0.01,
    transient_steps: int = 20_000,
    steps: int = 100_000,
    n_last: int = 200,
    jobs: int = 1,
) -> BifurcationDiagram:
    """Raw ``norm_coord`` values of the last ``n_last`` crossings for each parameter value."""
    system.param(param_name)
    ordered = tuple(float(v) for v in np.sort(np.asarray(values, dtype=np.float64)))

    def run(value: float) -> np.ndarray:
        swept = system.with_params(**{param_name: value})
        return _column(swept, component, s0, dt, transient_steps, steps, n_last)

    if jobs > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            columns = tuple(pool.map(run, ordered))
    else:
        columns = tuple(run(v) for v in ordered)
    return BifurcationDiagram(param_name=param_name, param_values=ordered, columns=columns)


def write_bifurcation_csv(diagram: BifurcationDiagram, path: Path) -> None:
    rows = (
        [fmt17(p), fmt17(v)]
        for p, col in zip(diagram.param_values, diagram.columns)
        for v in col
    )
    write_csv(path, ["param", "value"], rows)


__all__ = [
    "CoverageGrid",
    "CoverageComparison",
    "LleEstimate",
    "BifurcationDiagram",
    "sample_trace",
    "coverage_rate",
    "compare_coverage",
    "write_coverage_csv",
    "lle_benettin",
    "distinct_values",
    "bifurcation_scan",
    "write_bifurcation_csv",
]
