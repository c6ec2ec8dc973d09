"""Mobility traces driven by section crossings.

Three generators share one trace type: UAV paths steered by L/A/R symbols, exhibition-scenario
agents driven by a partial return map, and a seeded random-walk baseline.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from collections.abc import Mapping
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np

from .codes import Codes
from .codes import mk_note
from .dynsys import IntegratorConfig
from .dynsys import SystemDef
from .dynsys import as_state
from .dynsys import integrate
from .errors import ConfigError
from .errors import NumericalError
from .errors import SeriesError
from .exports import fmt6
from .exports import fmt17
from .exports import read_csv
from .exports import write_csv
from .exports import write_json
from .exports import write_text
from .returnmap import SymbolPartition
from .rng import RNG
from .rng import sample_ball
from .section import Crossing
from .section import RhoSeries
from .section import SectionComponent
from .section import component_map
from .section import iter_crossings
from .section import slot_fraction
from .telemetry import emit

_LOG = logging.getLogger(__name__)

EVENT_KINDS = ("entry", "stay_room1", "to_room2", "exit")
DEFAULT_TURNS: Mapping[str, int] = {"L": 1, "A": 0, "R": -1}
# Perturbed starts must stay bounded this many steps; Rossler starts can leave the basin.
START_TRIAL_STEPS = 5_000
MAX_START_DRAWS = 25


# --------------------------------------------------------------------------- geometry


@dataclass(frozen=True)
class Arena:
    width: float = 100.0
    height: float = 100.0
    wrap: bool = True

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("arena width and height must be > 0")

    def confine(self, x: float, y: float) -> tuple[float, float]:
        if self.wrap:
            return x % self.width, y % self.height
        return min(max(x, 0.0), self.width), min(max(y, 0.0), self.height)

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``b - a``, using the minimal image when the arena wraps."""
        d = np.asarray(b, dtype=np.float64) - np.asarray(a, dtype=np.float64)
        if self.wrap:
            size = np.array([self.width, self.height])
            d = d - size * np.round(d / size)
        return d


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0


def normalize_heading(h: float) -> float:
    """Heading folded into (-pi, pi]."""
    out = math.remainder(h, 2.0 * math.pi)
    return math.pi if out == -math.pi else out


@dataclass(frozen=True)
class UavConfig:
    speed: float = 1.0
    turn_angle: float = math.pi / 6.0
    step_time: float = 1.0
    start_pose: Pose = Pose(50.0, 50.0, 0.0)
    arena: Arena = Arena()

    def __post_init__(self) -> None:
        if not self.speed > 0:
            raise ConfigError(f"speed must be > 0, got {self.speed}")
        if not self.step_time > 0:
            raise ConfigError(f"step_time must be > 0, got {self.step_time}")
        if not 0 < self.turn_angle < math.pi:
            raise ConfigError(f"turn_angle must be in (0, pi), got {self.turn_angle}")

    @property
    def step_length(self) -> float:
        return self.speed * self.step_time


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigError(f"degenerate rectangle {self}")

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)

    @property
    def size(self) -> tuple[float, float]:
        return self.x1 - self.x0, self.y1 - self.y0

    def on_boundary(self, p: Sequence[float], tol: float = 1e-9) -> bool:
        x, y = p
        inside = self.x0 - tol <= x <= self.x1 + tol and self.y0 - tol <= y <= self.y1 + tol
        edge = (
            abs(x - self.x0) <= tol
            or abs(x - self.x1) <= tol
            or abs(y - self.y0) <= tol
            or abs(y - self.y1) <= tol
        )
        return inside and edge


@dataclass(frozen=True)
class Segment:
    a: tuple[float, float]
    b: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.a, self.b)

    def point_at(self, u: float) -> tuple[float, float]:
        u = min(1.0, max(0.0, float(u)))
        return self.a[0] + u * (self.b[0] - self.a[0]), self.a[1] + u * (self.b[1] - self.a[1])


@dataclass(frozen=True)
class ScenarioGeometry:
    """Two adjacent rooms with doorways at the entry, between the rooms, and at the exit."""

    room1: Rect = Rect(0.0, 0.0, 20.0, 15.0)
    room2: Rect = Rect(20.0, 0.0, 40.0, 15.0)
    entry_segment: Segment = Segment((0.0, 6.5), (0.0, 8.5))
    transition_segment: Segment = Segment((20.0, 6.5), (20.0, 8.5))
    exit_segment: Segment = Segment((40.0, 6.5), (40.0, 8.5))
    walk_speed: float = 1.2
    time_scale: float | None = None
    target_median_seconds: float = 600.0

    def __post_init__(self) -> None:
        if not self.walk_speed > 0:
            raise ConfigError(f"walk_speed must be > 0, got {self.walk_speed}")
        if self.time_scale is not None and not self.time_scale > 0:
            raise ConfigError(f"time_scale must be > 0, got {self.time_scale}")
        checks = (
            ("entry_segment", self.entry_segment, (self.room1,)),
            ("transition_segment", self.transition_segment, (self.room1, self.room2)),
            ("exit_segment", self.exit_segment, (self.room2,)),
        )
        for name, seg, rooms in checks:
            for room in rooms:
                if not (room.on_boundary(seg.a) and room.on_boundary(seg.b)):
                    raise ConfigError(f"{name} must lie on the boundary of {room}")

    def segment_for(self, kind: str) -> Segment:
        if kind == "entry":
            return self.entry_segment
        if kind == "exit":
            return self.exit_segment
        return self.transition_segment


# --------------------------------------------------------------------------- traces


@dataclass(frozen=True)
class Waypoint:
    t: float
    x: float
    y: float
    label: str = ""


@dataclass(frozen=True)
class TraceEvent:
    t: float
    kind: str
    rho: float


@dataclass(frozen=True)
class AgentTrace:
    agent_id: int
    waypoints: tuple[Waypoint, ...]
    events: tuple[TraceEvent, ...] = ()
    truncated: bool = False
    kind: str = "scenario"
    arena: Arena | None = None
    notes: tuple[dict[str, Any], ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        times = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SeriesError(f"agent {self.agent_id}: waypoint times must strictly increase")

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def times(self) -> np.ndarray:
        return np.array([w.t for w in self.waypoints], dtype=np.float64)

    @property
    def positions(self) -> np.ndarray:
        return np.array([(w.x, w.y) for w in self.waypoints], dtype=np.float64).reshape(-1, 2)

    @property
    def event_kinds(self) -> list[str]:
        return [e.kind for e in self.events]

    def head(self, n: int) -> AgentTrace:
        """Prefix with the first ``n`` waypoints (events dropped)."""
        return AgentTrace(
            self.agent_id, self.waypoints[:n], (), self.truncated, self.kind, self.arena
        )


# --------------------------------------------------------------------------- UAV


def uav_step(
    pose: Pose, symbol: str, cfg: UavConfig, *, turns: Mapping[str, int] = DEFAULT_TURNS
) -> Pose:
    """Turn by the symbol (L left, A ahead, R right), then advance one step."""
    if symbol not in turns:
        raise ConfigError(f"unknown symbol '{symbol}'; expected one of {sorted(turns)}")
    heading = normalize_heading(pose.heading + turns[symbol] * cfg.turn_angle)
    x = pose.x + cfg.step_length * math.cos(heading)
    y = pose.y + cfg.step_length * math.sin(heading)
    x, y = cfg.arena.confine(x, y)
    return Pose(x, y, heading)


def reference_state(
    system: SystemDef, s0: Sequence[float], dt: float, transient_steps: int
) -> np.ndarray:
    """State on the attractor after discarding ``transient_steps`` steps from ``s0``."""
    cfg = IntegratorConfig(dt=dt, steps=1, transient_steps=transient_steps)
    return integrate(system, s0, cfg).final_state


def _perturbed_start(
    system: SystemDef, ref: np.ndarray, rng: np.random.Generator, radius: float, dt: float
) -> tuple[np.ndarray, int]:
    """Perturbed copy of ``ref`` whose trial run stays bounded, with the number of redraws.

    Draws come from the agent's own stream, so the accepted start is reproducible.
    """
    trial = IntegratorConfig(dt=dt, steps=1, transient_steps=START_TRIAL_STEPS)
    for redraws in range(MAX_START_DRAWS):
        start = as_state(system, ref + sample_ball(rng, system.dim, radius))
        try:
            integrate(system, start, trial)
        except NumericalError:
            continue
        return start, redraws
    raise NumericalError(
        f"no bounded start within {radius} of the reference after {MAX_START_DRAWS} draws"
    )


def _redraw_notes(agent_id: int, redraws: int, metrics: Any) -> tuple[dict[str, Any], ...]:
    if redraws == 0:
        return ()
    _LOG.warning("start_redrawn", extra={"agent": agent_id, "redraws": redraws})
    emit(metrics, "start_redraws", redraws)
    return (mk_note(Codes.START_REDRAWN, data={"agent": agent_id, "redraws": redraws}),)


def generate_uav_trace(
    system: SystemDef,
    component: SectionComponent,
    partition: SymbolPartition,
    cfg: UavConfig,
    *,
    reference: Sequence[float],
    dt: float = 0.01,
    duration: float | None = None,
    max_moves: int | None = None,
    seed: int = 0,
    ic_radius: float = 0.5,
    chunk_steps: int = 100_000,
    agent_id: int = 0,
    metrics: Any = None,
) -> AgentTrace:
    """One move per section crossing within ``duration`` flow-time units (or ``max_moves``).

    ``reference`` is an on-attractor state; the seed perturbs it inside a ball of ``ic_radius``.
    """
    if duration is None and max_moves is None:
        raise ConfigError("generate_uav_trace needs duration or max_moves")
    if not component.calibrated:
        raise ConfigError(f"component {component.id} must be calibrated")
    rng = RNG(seed).for_agent(agent_id)
    ref = np.asarray(reference, dtype=np.float64)
    start, redraws = _perturbed_start(system, ref, rng, ic_radius, dt)
    notes = _redraw_notes(agent_id, redraws, metrics)
    max_steps = None if duration is None else max(1, int(round(duration / dt)))
    pose = cfg.start_pose
    waypoints = [Waypoint(0.0, pose.x, pose.y, "")]
    crossings = iter_crossings(
        system,
        start,
        dt,
        [component],
        chunk_steps=chunk_steps,
        max_steps=max_steps,
        metrics=metrics,
    )
    for k, crossing in enumerate(crossings, start=1):
        symbol = partition.symbol_of(crossing.rho)
        pose = uav_step(pose, symbol, cfg)
        waypoints.append(Waypoint(k * cfg.step_time, pose.x, pose.y, symbol))
        if max_moves is not None and k >= max_moves:
            break
    emit(metrics, "agents_generated", kind="uav")
    return AgentTrace(agent_id, tuple(waypoints), kind="uav", arena=cfg.arena, notes=notes)


def random_walk_trace(
    cfg: UavConfig,
    seed: int,
    duration: float | None = None,
    *,
    moves: int | None = None,
    agent_id: int = 0,
    metrics: Any = None,
) -> AgentTrace:
    """Heading redrawn uniformly in (-pi, pi] every step; same kinematics as :func:`uav_step`."""
    if moves is None:
        if duration is None:
            raise ConfigError("random_walk_trace needs duration or moves")
        moves = int(math.floor(duration / cfg.step_time))
    rng = RNG(seed).for_agent(agent_id)
    headings = math.pi - rng.uniform(0.0, 2.0 * math.pi, size=int(moves))
    pose = cfg.start_pose
    waypoints = [Waypoint(0.0, pose.x, pose.y, "")]
    for k, heading in enumerate(headings, start=1):
        x = pose.x + cfg.step_length * math.cos(heading)
        y = pose.y + cfg.step_length * math.sin(heading)
        x, y = cfg.arena.confine(x, y)
        pose = Pose(x, y, float(heading))
        waypoints.append(Waypoint(k * cfg.step_time, x, y, "walk"))
    emit(metrics, "agents_generated", kind="random_walk")
    return AgentTrace(agent_id, tuple(waypoints), kind="random_walk", arena=cfg.arena)


# --------------------------------------------------------------------------- scenario


@dataclass(frozen=True)
class ScenarioRun:
    """Integration settings shared by every scenario agent."""

    reference: tuple[float, ...]
    dt: float = 0.01
    decorrelation_time: float = 5.0
    ic_radius: float = 0.5
    step_budget: int = 500_000
    chunk_steps: int = 20_000

    def __post_init__(self) -> None:
        if self.step_budget < 1:
            raise ConfigError("step_budget must be >= 1")
        if self.decorrelation_time < 0:
            raise ConfigError("decorrelation_time must be >= 0")


@dataclass(frozen=True)
class _AgentFlow:
    agent_id: int
    crossings: tuple[Crossing, ...]
    truncated: bool
    notes: tuple[dict[str, Any], ...] = ()


def _role_ids(comps: Sequence[SectionComponent]) -> dict[str, str]:
    out: dict[str, str] = {}
    for c in sorted(comps, key=lambda c: c.index):
        out.setdefault(c.role, c.id)
    missing = [r for r in ("initial", "transitional", "final") if r not in out]
    if missing:
        raise ConfigError(f"scenario components lack roles: {missing}")
    return out


def _simulate_agent(
    agent_id: int,
    system: SystemDef,
    comps: Sequence[SectionComponent],
    run: ScenarioRun,
    seed: int,
    metrics: Any,
) -> _AgentFlow:
    roles = {c.id: c.role for c in comps}
    rng = RNG(seed).for_agent(agent_id)
    ref = np.asarray(run.reference, dtype=np.float64)
    start, redraws = _perturbed_start(system, ref, rng, run.ic_radius, run.dt)
    notes = _redraw_notes(agent_id, redraws, metrics)
    collected: list[Crossing] = []
    stream = iter_crossings(
        system,
        start,
        run.dt,
        comps,
        chunk_steps=run.chunk_steps,
        max_steps=run.step_budget,
        metrics=metrics,
    )
    for crossing in stream:
        role = roles[crossing.component_id]
        if role == "initial":
            if crossing.time >= run.decorrelation_time:
                collected = [crossing]
            continue
        if not collected:
            continue
        collected.append(crossing)
        if role == "final":
            return _AgentFlow(agent_id, tuple(collected), truncated=False, notes=notes)
    return _AgentFlow(agent_id, tuple(collected), truncated=True, notes=notes)


def _auto_time_scale(flows: Iterable[_AgentFlow], target_seconds: float) -> float:
    spans = [f.crossings[-1].time - f.crossings[0].time for f in flows if not f.truncated]
    spans = [s for s in spans if s > 0]
    if not spans:
        return 1.0
    return float(target_seconds / np.median(spans))


def _flow_to_trace(
    flow: _AgentFlow,
    comps: Sequence[SectionComponent],
    geometry: ScenarioGeometry,
    time_scale: float,
    run: ScenarioRun,
) -> AgentTrace:
    by_id = component_map(comps)
    cs = flow.crossings
    waypoints: list[Waypoint] = []
    events: list[TraceEvent] = []
    prev: Waypoint | None = None

    def place(t_flow: float, pos: tuple[float, float], label: str) -> Waypoint:
        nonlocal prev
        t = (t_flow - run.decorrelation_time) * time_scale
        if prev is not None:
            walk = math.dist((prev.x, prev.y), pos) / geometry.walk_speed
            t = max(t, prev.t + max(walk, 1e-3))
        wp = Waypoint(t, pos[0], pos[1], label)
        waypoints.append(wp)
        prev = wp
        return wp

    for i, c in enumerate(cs):
        comp = by_id[c.component_id]
        u = slot_fraction(c, comp)
        nxt = by_id[cs[i + 1].component_id] if i + 1 < len(cs) else None
        if comp.role == "initial":
            kind = "entry"
        elif comp.role == "final":
            kind = "exit"
        elif nxt is not None and nxt.role == "final":
            kind = "to_room2"
        else:
            kind = "stay_room1"
        wp = place(c.time, geometry.segment_for(kind).point_at(u), kind)
        events.append(TraceEvent(wp.t, kind, c.rho))
        if kind == "stay_room1" and nxt is not None:
            cx, cy = geometry.room1.center
            w, h = geometry.room1.size
            detour = (cx + (u - 0.5) * 0.5 * w, cy + (u - 0.5) * 0.5 * h)
            place(0.5 * (c.time + cs[i + 1].time), detour, "detour")
    notes: list[dict[str, Any]] = list(flow.notes)
    if flow.truncated:
        notes.append(mk_note(Codes.AGENT_TRUNCATED, data={"agent": flow.agent_id}))
    trace = AgentTrace(
        flow.agent_id, tuple(waypoints), tuple(events), flow.truncated, "scenario", None,
        tuple(notes),
    )
    if not flow.truncated and not event_grammar_ok(trace):
        note = mk_note(Codes.GRAMMAR_VIOLATION, data={"agent": flow.agent_id})
        _LOG.warning("scenario_grammar_violation", extra={"agent": flow.agent_id})
        trace = AgentTrace(
            trace.agent_id, trace.waypoints, trace.events, trace.truncated, trace.kind, None,
            trace.notes + (note,),
        )
    return trace


def generate_scenario_traces(
    n_agents: int,
    system: SystemDef,
    comps: Sequence[SectionComponent],
    geometry: ScenarioGeometry,
    seed: int,
    run: ScenarioRun,
    *,
    jobs: int = 1,
    metrics: Any = None,
) -> list[AgentTrace]:
    """Independent agents entering through the initial component and leaving at the final one.

    Each agent's crossings map onto doorway segments at the crossing's slot fraction; flow time
    is scaled to seconds (``time_scale`` or the median entry-to-exit span mapped to
    ``target_median_seconds``). Output is ordered by agent id.
    """
    if n_agents < 1:
        raise ConfigError(f"n_agents must be >= 1, got {n_agents}")
    _role_ids(comps)
    for c in comps:
        if not c.calibrated:
            raise ConfigError(f"component {c.id} must be calibrated")

    def simulate(agent_id: int) -> _AgentFlow:
        return _simulate_agent(agent_id, system, comps, run, seed, metrics)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flows = list(pool.map(simulate, range(n_agents)))
    else:
        flows = [simulate(i) for i in range(n_agents)]
    scale = geometry.time_scale or _auto_time_scale(flows, geometry.target_median_seconds)
    traces = [_flow_to_trace(f, comps, geometry, scale, run) for f in flows]
    truncated = sum(1 for t in traces if t.truncated)
    if truncated:
        _LOG.warning("agent_truncated", extra={"agents": truncated, "total": n_agents})
        emit(metrics, "agents_truncated", truncated)
    emit(metrics, "agents_generated", n_agents, kind="scenario")
    _LOG.info(
        "scenario_traces",
        extra={"agents": n_agents, "truncated": truncated, "time_scale": scale},
    )
    return traces


def event_grammar_ok(trace: AgentTrace) -> bool:
    """``entry stay_room1* to_room2 exit``."""
    kinds = trace.event_kinds
    if len(kinds) < 3:
        return False
    return (
        kinds[0] == "entry"
        and kinds[-2] == "to_room2"
        and kinds[-1] == "exit"
        and all(k == "stay_room1" for k in kinds[1:-2])
    )


def rho_series_from_traces(
    traces: Iterable[AgentTrace], comps: Sequence[SectionComponent]
) -> list[RhoSeries]:
    """Per-agent rho series rebuilt from trace events, one crossing per doorway event."""
    ids = _role_ids(comps)
    comp_for = {
        "entry": ids["initial"],
        "stay_room1": ids["transitional"],
        "to_room2": ids["transitional"],
        "exit": ids["final"],
    }
    out = []
    for trace in traces:
        by_time = {w.t: w for w in trace.waypoints}
        crossings = []
        for ev in trace.events:
            wp = by_time.get(ev.t)
            pos = np.array([wp.x, wp.y]) if wp is not None else np.zeros(2)
            crossings.append(Crossing(comp_for[ev.kind], ev.t, pos, ev.rho))
        out.append(RhoSeries(crossings=tuple(crossings), agent_id=trace.agent_id))
    return out


# --------------------------------------------------------------------------- exports


def write_traces_csv(traces: Iterable[AgentTrace], path: Path) -> None:
    rows = (
        [tr.agent_id, fmt17(w.t), fmt17(w.x), fmt17(w.y), w.label]
        for tr in traces
        for w in tr.waypoints
    )
    write_csv(path, ["agent", "t", "x", "y", "event"], rows)


def read_traces_csv(path: Path, arena: Arena | None = None) -> list[AgentTrace]:
    grouped: dict[int, list[Waypoint]] = {}
    for row in read_csv(path):
        wp = Waypoint(float(row["t"]), float(row["x"]), float(row["y"]), row.get("event", ""))
        grouped.setdefault(int(row["agent"]), []).append(wp)
    return [AgentTrace(aid, tuple(wps), arena=arena) for aid, wps in sorted(grouped.items())]


def ns2_lines(trace: AgentTrace) -> list[str]:
    """ns-2 setdest script for one node; the move to waypoint k departs at t_{k-1}."""
    if not trace.waypoints:
        return []
    node = f"$node_({trace.agent_id})"
    first = trace.waypoints[0]
    lines = [f"{node} set X_ {fmt6(first.x)}", f"{node} set Y_ {fmt6(first.y)}"]
    for a, b in zip(trace.waypoints, trace.waypoints[1:]):
        speed = math.dist((a.x, a.y), (b.x, b.y)) / (b.t - a.t)
        lines.append(
            f'$ns_ at {fmt6(a.t)} "{node} setdest {fmt6(b.x)} {fmt6(b.y)} {fmt6(speed)}"'
        )
    return lines


def write_ns2(traces: Iterable[AgentTrace], path: Path) -> None:
    write_text(path, [line for tr in traces for line in ns2_lines(tr)])


def traces_to_dict(traces: Iterable[AgentTrace]) -> dict[str, Any]:
    return {
        "traces": [
            {
                "agent": tr.agent_id,
                "kind": tr.kind,
                "truncated": tr.truncated,
                "waypoints": [[w.t, w.x, w.y, w.label] for w in tr.waypoints],
                "events": [{"t": e.t, "kind": e.kind, "rho": e.rho} for e in tr.events],
                "notes": list(tr.notes),
            }
            for tr in traces
        ]
    }


def write_traces_json(traces: Iterable[AgentTrace], path: Path) -> None:
    write_json(path, traces_to_dict(traces))


__all__ = [
    "EVENT_KINDS",
    "Arena",
    "Pose",
    "UavConfig",
    "Rect",
    "Segment",
    "ScenarioGeometry",
    "ScenarioRun",
    "Waypoint",
    "TraceEvent",
    "AgentTrace",
    "normalize_heading",
    "uav_step",
    "reference_state",
    "generate_uav_trace",
    "random_walk_trace",
    "generate_scenario_traces",
    "event_grammar_ok",
    "rho_series_from_traces",
    "write_traces_csv",
    "read_traces_csv",
    "ns2_lines",
    "write_ns2",
    "traces_to_dict",
    "write_traces_json",
]
