"""Experiment configuration: YAML files validated by pydantic models.

Role rules are checked at load time and quoted verbatim in the resulting error.
"""

from __future__ import annotations

import copy
import math
import os
from collections.abc import Mapping
from collections.abc import Sequence
from pathlib import Path
from typing import Any
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import ValidationError
from pydantic import model_validator

from .dynsys import SystemDef
from .dynsys import fixed_points
from .dynsys import make_system
from .errors import ConfigError
from .exports import canonical_hash
from .mobility import Arena
from .mobility import Pose
from .mobility import Rect
from .mobility import ScenarioGeometry
from .mobility import ScenarioRun
from .mobility import Segment
from .mobility import UavConfig
from .returnmap import RULE_NEEDS_INITIAL_AND_FINAL
from .returnmap import RULE_NO_PREDECESSOR
from .returnmap import RULE_NO_SUCCESSOR
from .section import SectionComponent
from .version import SCHEMA_VERSION

OUT_DIR_ENV = "CHAOSMOB_OUT_DIR"

RULE_CONTIGUOUS = "component indices must be unique and contiguous from 1"
RULE_DISJOINT = "components must have disjoint (coord, level, direction) triples"

_DEFAULT_INITIAL: dict[str, list[float]] = {
    "rossler": [1.0, 1.0, 0.0],
    "lorenz": [1.0, 1.0, 20.0],
}


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemSection(_Model):
    name: str = "rossler"
    params: dict[str, float] = Field(default_factory=dict)
    dim: int | None = None
    initial_state: list[float] | None = None


class IntegratorSection(_Model):
    dt: float = Field(0.01, gt=0)
    steps: int = Field(100_000, gt=0)
    transient_steps: int = Field(10_000, ge=0)
    chunk_steps: int = Field(100_000, gt=0)
    export_csv: bool = True


class ComponentSection(_Model):
    id: str = Field(min_length=1)
    index: int = Field(ge=1)
    coord: str | int = "x"
    level: float = 0.0
    level_source: Literal["value", "fixed_point"] = "value"
    fixed_point: int = Field(1, ge=0)
    direction: Literal[1, -1] = 1
    role: Literal["initial", "transitional", "final", "cyclic"] = "cyclic"
    norm_coord: str | int = "y"
    orientation: Literal["auto", "ascending", "descending"] = "auto"
    norm_lo: float | None = None
    norm_hi: float | None = None


class PartitionSection(_Model):
    component: str | None = None
    breakpoints: list[float] | None = None
    symbols: list[str] = Field(default_factory=lambda: ["L", "A", "R"])


class MapSection(_Model):
    periods: list[int] = Field(default_factory=lambda: [1, 2])
    tol: float = Field(0.01, gt=0)
    eps_image: float = Field(0.01, gt=0)
    delta_pre: float = Field(0.1, gt=0)
    max_segment_crossings: int | None = Field(None, ge=2)
    expected_support: list[str] | None = None
    folding_pairs: list[str] = Field(default_factory=list)
    tearing_from: list[str] = Field(default_factory=list)
    divergence_eps: float = Field(0.05, gt=0)
    profile_window: int = Field(25, ge=3)


class ArenaSection(_Model):
    width: float = Field(100.0, gt=0)
    height: float = Field(100.0, gt=0)
    wrap: bool = True


class UavSection(_Model):
    speed: float = Field(1.0, gt=0)
    turn_angle_deg: float = Field(30.0, gt=0, lt=180)
    step_time: float = Field(1.0, gt=0)
    start: list[float] = Field(default_factory=lambda: [50.0, 50.0, 0.0])
    arena: ArenaSection = Field(default_factory=ArenaSection)


class GeometrySection(_Model):
    room1: list[float] = Field(default_factory=lambda: [0.0, 0.0, 20.0, 15.0])
    room2: list[float] = Field(default_factory=lambda: [20.0, 0.0, 40.0, 15.0])
    entry: list[list[float]] = Field(default_factory=lambda: [[0.0, 6.5], [0.0, 8.5]])
    transition: list[list[float]] = Field(default_factory=lambda: [[20.0, 6.5], [20.0, 8.5]])
    exit: list[list[float]] = Field(default_factory=lambda: [[40.0, 6.5], [40.0, 8.5]])
    walk_speed: float = Field(1.2, gt=0)
    time_scale: float | Literal["auto"] = "auto"
    target_median_seconds: float = Field(600.0, gt=0)


class MobilitySection(_Model):
    kind: Literal["uav", "scenario", "random_walk"] = "uav"
    agents: int = Field(1, ge=1)
    duration: float | None = Field(None, gt=0)
    max_moves: int | None = Field(1000, ge=1)
    step_budget: int = Field(500_000, ge=1)
    decorrelation_time: float = Field(5.0, ge=0)
    ic_radius: float = Field(0.5, ge=0)
    uav: UavSection = Field(default_factory=UavSection)
    geometry: GeometrySection = Field(default_factory=GeometrySection)


class CoverageSection(_Model):
    cells: int = Field(100, ge=1)
    sensing_radius: float | None = Field(None, ge=0)
    seeds: list[int] = Field(default_factory=lambda: list(range(10)))
    moves: int = Field(10_000, ge=1)


class LleSection(_Model):
    params: dict[str, float] = Field(default_factory=dict)
    initial_state: list[float] | None = None
    span: float = Field(1000.0, gt=0)
    renorm_interval: float = Field(1.0, gt=0)
    d0: float = Field(1e-8, gt=0)
    transient: float = Field(100.0, ge=0)


class BifurcationSection(_Model):
    param: str = "c"
    values: list[float] | None = None
    start: float = 2.5
    stop: float = 6.0
    num: int = Field(36, ge=0)
    component: str | None = None
    n_last: int = Field(200, ge=1)
    steps: int = Field(100_000, ge=1)
    transient_steps: int = Field(20_000, ge=0)

    def grid(self) -> list[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        return [float(v) for v in np.linspace(self.start, self.stop, self.num)]


class MetricsSection(_Model):
    coverage: CoverageSection = Field(default_factory=CoverageSection)
    lle: LleSection = Field(default_factory=LleSection)
    bifurcation: BifurcationSection = Field(default_factory=BifurcationSection)


class ExperimentConfig(_Model):
    schema_version: str = SCHEMA_VERSION
    system: SystemSection = Field(default_factory=SystemSection)
    integrator: IntegratorSection = Field(default_factory=IntegratorSection)
    components: list[ComponentSection] = Field(default_factory=list)
    partition: PartitionSection = Field(default_factory=PartitionSection)
    map: MapSection = Field(default_factory=MapSection)
    mobility: MobilitySection = Field(default_factory=MobilitySection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)
    seed: int = 0
    jobs: int = Field(1, ge=1)
    output_dir: str = "out"

    @model_validator(mode="after")
    def _check_roles(self) -> ExperimentConfig:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {self.schema_version!r}; expected {SCHEMA_VERSION!r}"
            )
        comps = self.components
        if not comps:
            return self
        indices = sorted(c.index for c in comps)
        if indices != list(range(1, len(comps) + 1)):
            raise ValueError(f'rule violated: "{RULE_CONTIGUOUS}" (indices {indices})')
        ids = [c.id for c in comps]
        if len(set(ids)) != len(ids):
            raise ValueError(f"component ids must be unique (got {ids})")
        triples = {(str(c.coord), _level_key(c), c.direction) for c in comps}
        if len(triples) != len(comps):
            raise ValueError(f'rule violated: "{RULE_DISJOINT}"')
        roles = {c.id: c.role for c in comps}
        partial = any(r != "cyclic" for r in roles.values())
        if partial and not ({"initial", "final"} <= set(roles.values())):
            raise ValueError(f'rule violated: "{RULE_NEEDS_INITIAL_AND_FINAL}"')
        for entry in self.map.expected_support or []:
            src, dst = parse_transition(entry)
            for cid in (src, dst):
                if cid not in roles:
                    raise ValueError(f"expected_support names unknown component '{cid}'")
            if roles[dst] == "initial":
                raise ValueError(f'rule violated: "{RULE_NO_PREDECESSOR}" ({entry})')
            if roles[src] == "final":
                raise ValueError(f'rule violated: "{RULE_NO_SUCCESSOR}" ({entry})')
        if self.partition.component is not None and self.partition.component not in roles:
            raise ValueError(f"partition names unknown component '{self.partition.component}'")
        return self


def _level_key(c: ComponentSection) -> str:
    return repr(c.level) if c.level_source == "value" else f"fixed_point:{c.fixed_point}"


def parse_transition(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in str(text).split("->")]
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"transition must look like 'A->B', got {text!r}")
    return parts[0], parts[1]


# --------------------------------------------------------------------------- loading


def _apply_set(data: dict[str, Any], assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects dotted.key=value, got {assignment!r}")
    value = yaml.safe_load(raw) if raw.strip() else None
    node: Any = data
    parts = key.strip().split(".")
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node.setdefault(part, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def config_from_mapping(
    data: Mapping[str, Any] | None,
    *,
    sets: Sequence[str] = (),
    overrides: Mapping[str, Any] | None = None,
) -> ExperimentConfig:
    """Validate raw data after applying ``--set`` assignments and flag overrides."""
    raw: dict[str, Any] = copy.deepcopy(dict(data or {}))
    try:
        for assignment in sets:
            _apply_set(raw, assignment)
    except (IndexError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot apply --set: {exc}") from exc
    env_out = os.getenv(OUT_DIR_ENV)
    if env_out:
        raw["output_dir"] = env_out
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "agents":
            raw.setdefault("mobility", {})["agents"] = value
        elif key == "out":
            raw["output_dir"] = str(value)
        else:
            raw[key] = value
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        msg = str(err.get("msg", "")).removeprefix("Value error, ")
        lines.append(f"{loc}: {msg}")
    return "invalid config: " + "; ".join(lines)


def load_config(
    path: Path,
    *,
    sets: Sequence[str] = (),
    overrides: Mapping[str, Any] | None = None,
) -> ExperimentConfig:
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_mapping(data, sets=sets, overrides=overrides)


def resolved_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return cfg.model_dump(mode="json")


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the resolved config without its output directory."""
    payload = resolved_dict(cfg)
    payload.pop("output_dir", None)
    return canonical_hash(payload)


def dump_resolved(cfg: ExperimentConfig, path: Path) -> None:
    """YAML dump of the resolved config; the output directory is implied by the file location."""
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = resolved_dict(cfg)
    payload.pop("output_dir", None)
    with path.open("w", encoding="utf-8") as fh:
        yaml.safe_dump(payload, fh, sort_keys=True, default_flow_style=False)


# --------------------------------------------------------------------------- builders


def build_system(cfg: ExperimentConfig, params: Mapping[str, float] | None = None) -> SystemDef:
    merged = {**cfg.system.params, **(params or {})}
    return make_system(cfg.system.name, merged, dim=cfg.system.dim)


def initial_state(cfg: ExperimentConfig, system: SystemDef) -> list[float]:
    if cfg.system.initial_state is not None:
        return list(cfg.system.initial_state)
    return list(_DEFAULT_INITIAL.get(system.name, [1.0] * system.dim))


def build_components(cfg: ExperimentConfig, system: SystemDef) -> list[SectionComponent]:
    out = []
    for c in cfg.components:
        coord = system.coord_index(c.coord)
        level = c.level
        if c.level_source == "fixed_point":
            pts = fixed_points(system).points
            if c.fixed_point >= len(pts):
                raise ConfigError(f"component {c.id}: fixed point {c.fixed_point} does not exist")
            level = float(pts[c.fixed_point][coord])
        out.append(
            SectionComponent(
                id=c.id,
                index=c.index,
                coord=coord,
                level=level,
                direction=c.direction,
                role=c.role,
                norm_coord=system.coord_index(c.norm_coord),
                norm_lo=c.norm_lo,
                norm_hi=c.norm_hi,
                orientation=c.orientation,
            )
        )
    return out


def build_uav_config(cfg: ExperimentConfig) -> UavConfig:
    u = cfg.mobility.uav
    start = list(u.start) + [0.0] * (3 - len(u.start))
    return UavConfig(
        speed=u.speed,
        turn_angle=math.radians(u.turn_angle_deg),
        step_time=u.step_time,
        start_pose=Pose(float(start[0]), float(start[1]), float(start[2])),
        arena=Arena(u.arena.width, u.arena.height, u.arena.wrap),
    )


def _segment(points: Sequence[Sequence[float]]) -> Segment:
    if len(points) != 2 or any(len(p) != 2 for p in points):
        raise ConfigError("a segment is two [x, y] points")
    (ax, ay), (bx, by) = points
    return Segment((float(ax), float(ay)), (float(bx), float(by)))


def _rect(values: Sequence[float]) -> Rect:
    if len(values) != 4:
        raise ConfigError("a room is [x0, y0, x1, y1]")
    return Rect(*(float(v) for v in values))


def build_geometry(cfg: ExperimentConfig) -> ScenarioGeometry:
    g = cfg.mobility.geometry
    return ScenarioGeometry(
        room1=_rect(g.room1),
        room2=_rect(g.room2),
        entry_segment=_segment(g.entry),
        transition_segment=_segment(g.transition),
        exit_segment=_segment(g.exit),
        walk_speed=g.walk_speed,
        time_scale=None if g.time_scale == "auto" else float(g.time_scale),
        target_median_seconds=g.target_median_seconds,
    )


def build_scenario_run(cfg: ExperimentConfig, reference: Sequence[float]) -> ScenarioRun:
    m = cfg.mobility
    return ScenarioRun(
        reference=tuple(float(v) for v in reference),
        dt=cfg.integrator.dt,
        decorrelation_time=m.decorrelation_time,
        ic_radius=m.ic_radius,
        step_budget=m.step_budget,
        chunk_steps=cfg.integrator.chunk_steps,
    )


__all__ = [
    "OUT_DIR_ENV",
    "ExperimentConfig",
    "parse_transition",
    "config_from_mapping",
    "load_config",
    "resolved_dict",
    "config_hash",
    "dump_resolved",
    "build_system",
    "initial_state",
    "build_components",
    "build_uav_config",
    "build_geometry",
    "build_scenario_run",
]
