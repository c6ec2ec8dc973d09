"""Multi-component Poincare sections and the concatenated normalized variable rho.

Component ``i`` owns the rho slot ``[i-1, i]``. Crossings are detected on the recorded samples
and polished onto the plane with a root solve over one RK4 sub-step.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Iterable
from collections.abc import Iterator
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import brentq

from .codes import Codes
from .codes import mk_note
from .dynsys import IntegratorConfig
from .dynsys import SystemDef
from .dynsys import Trajectory
from .dynsys import as_state
from .dynsys import integrate
from .dynsys import nearest_fixed_point
from .dynsys import rk4_step
from .errors import CalibrationError
from .errors import ConfigError
from .errors import SeriesError
from .exports import fmt17
from .exports import read_json
from .exports import write_csv
from .exports import write_json
from .numerics import CALIBRATION_MARGIN
from .numerics import MIN_CALIBRATION_CROSSINGS
from .numerics import OUT_OF_CALIBRATION_FRACTION
from .numerics import ROOT_XTOL
from .numerics import TANGENCY_STEPS
from .telemetry import emit

_LOG = logging.getLogger(__name__)

ROLES = ("initial", "transitional", "final", "cyclic")
ORIENTATIONS = ("auto", "ascending", "descending")


@dataclass(frozen=True)
class SectionComponent:
    """One axis-aligned plane ``state[coord] == level`` crossed with sign ``direction``."""

    id: str
    index: int
    coord: int
    level: float
    direction: int = 1
    role: str = "cyclic"
    norm_coord: int = 1
    norm_lo: float | None = None
    norm_hi: float | None = None
    orientation: str = "auto"

    def __post_init__(self) -> None:
        if not self.id:
            raise ConfigError("component id must be non-empty")
        if int(self.index) < 1:
            raise ConfigError(f"component {self.id}: index must be >= 1, got {self.index}")
        if self.direction not in (1, -1):
            raise ConfigError(f"component {self.id}: direction must be +1 or -1")
        if self.role not in ROLES:
            raise ConfigError(f"component {self.id}: role must be one of {ROLES}")
        if self.orientation not in ORIENTATIONS:
            raise ConfigError(f"component {self.id}: orientation must be one of {ORIENTATIONS}")
        if (self.norm_lo is None) != (self.norm_hi is None):
            raise ConfigError(f"component {self.id}: set both norm_lo and norm_hi or neither")
        if self.norm_lo is not None and self.norm_lo == self.norm_hi:
            raise ConfigError(f"component {self.id}: norm_lo must differ from norm_hi")

    @property
    def calibrated(self) -> bool:
        return self.norm_lo is not None and self.orientation != "auto"

    @property
    def slot(self) -> tuple[float, float]:
        return float(self.index - 1), float(self.index)

    @property
    def plane(self) -> tuple[int, float]:
        return int(self.coord), float(self.level)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "index": self.index,
            "coord": self.coord,
            "level": self.level,
            "direction": self.direction,
            "role": self.role,
            "norm_coord": self.norm_coord,
            "norm_lo": self.norm_lo,
            "norm_hi": self.norm_hi,
            "orientation": self.orientation,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SectionComponent:
        lo = data.get("norm_lo")
        hi = data.get("norm_hi")
        return cls(
            id=str(data["id"]),
            index=int(data["index"]),
            coord=int(data["coord"]),
            level=float(data["level"]),
            direction=int(data.get("direction", 1)),
            role=str(data.get("role", "cyclic")),
            norm_coord=int(data.get("norm_coord", 1)),
            norm_lo=None if lo is None else float(lo),
            norm_hi=None if hi is None else float(hi),
            orientation=str(data.get("orientation", "auto")),
        )


@dataclass(frozen=True)
class RawCrossing:
    component_id: str
    time: float
    state: np.ndarray


@dataclass(frozen=True)
class Crossing:
    component_id: str
    time: float
    state: np.ndarray
    rho: float


@dataclass(frozen=True)
class RhoSeries:
    crossings: tuple[Crossing, ...] = ()
    agent_id: int | None = None
    notes: tuple[dict[str, Any], ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.crossings)

    def __iter__(self) -> Iterator[Crossing]:
        return iter(self.crossings)

    def __getitem__(self, idx: int) -> Crossing:
        return self.crossings[idx]

    @property
    def rhos(self) -> np.ndarray:
        return np.array([c.rho for c in self.crossings], dtype=np.float64)

    @property
    def times(self) -> np.ndarray:
        return np.array([c.time for c in self.crossings], dtype=np.float64)

    @property
    def component_ids(self) -> list[str]:
        return [c.component_id for c in self.crossings]


# --------------------------------------------------------------------------- validation


def validate_components(comps: Sequence[SectionComponent]) -> None:
    indices = sorted(c.index for c in comps)
    if indices != list(range(1, len(comps) + 1)):
        raise ConfigError(
            "component indices must be unique and contiguous from 1 "
            f"(got {indices})"
        )
    ids = [c.id for c in comps]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"component ids must be unique (got {ids})")
    triples = [(c.coord, c.level, c.direction) for c in comps]
    if len(set(triples)) != len(triples):
        raise ConfigError("components must have disjoint (coord, level, direction) triples")


def component_map(comps: Iterable[SectionComponent]) -> dict[str, SectionComponent]:
    return {c.id: c for c in comps}


def slot_fraction(crossing: Crossing, comp: SectionComponent) -> float:
    """Position of the crossing inside its slot, in [0, 1], orientation already applied."""
    return min(1.0, max(0.0, crossing.rho - (comp.index - 1)))


# --------------------------------------------------------------------------- detection


def _refine(
    traj: Trajectory, comp: SectionComponent, k: int, g_left: float, g_right: float
) -> tuple[float, np.ndarray]:
    left = traj.samples[k]
    dt = traj.dt
    system = traj.system
    if g_right == 0.0:
        theta = 1.0
        state = np.array(traj.samples[k + 1])
    elif system is None:
        theta = g_left / (g_left - g_right)
        state = left + theta * (traj.samples[k + 1] - left)
    else:
        coord = comp.coord
        level = comp.level

        def plane_gap(th: float) -> float:
            if th <= 0.0:
                return g_left
            return float(rk4_step(system, left, th * dt)[coord] - level)

        try:
            theta = float(brentq(plane_gap, 0.0, 1.0, xtol=ROOT_XTOL))
        except ValueError:
            # bracket lost to rounding at the right end
            theta = g_left / (g_left - g_right)
        state = left.copy() if theta <= 0.0 else rk4_step(system, left, theta * dt)
    state = np.array(state, dtype=np.float64)
    state[comp.coord] = comp.level
    return traj.t0 + (k + theta) * dt, state


def detect_raw_crossings(traj: Trajectory, comp: SectionComponent) -> list[RawCrossing]:
    """All transversal crossings of ``comp`` between consecutive samples, in time order."""
    if len(traj) < 2:
        return []
    g = traj.samples[:, comp.coord] - comp.level
    if comp.direction > 0:
        mask = (g[:-1] < 0.0) & (g[1:] >= 0.0)
    else:
        mask = (g[:-1] > 0.0) & (g[1:] <= 0.0)
    out: list[RawCrossing] = []
    for k in np.flatnonzero(mask):
        t, state = _refine(traj, comp, int(k), float(g[k]), float(g[k + 1]))
        out.append(RawCrossing(component_id=comp.id, time=float(t), state=state))
    return out


def _normalize(value: float, comp: SectionComponent) -> tuple[float, bool]:
    if comp.norm_lo is None or comp.norm_hi is None:
        raise CalibrationError(f"component {comp.id} has no normalization bounds")
    lo = float(comp.norm_lo)
    hi = float(comp.norm_hi)
    span = hi - lo
    u = (float(value) - lo) / span
    tolerance = OUT_OF_CALIBRATION_FRACTION
    out_of_range = u < -tolerance or u > 1.0 + tolerance
    u = min(1.0, max(0.0, u))
    if comp.orientation == "descending":
        u = 1.0 - u
    return (comp.index - 1) + u, out_of_range


def normalize_rho(raw: RawCrossing, comp: SectionComponent, *, metrics: Any = None) -> float:
    """Map the crossing's ``norm_coord`` value into the component's rho slot (clamped)."""
    value = float(raw.state[comp.norm_coord])
    rho, out_of_range = _normalize(value, comp)
    if out_of_range:
        _LOG.warning(
            "rho_out_of_calibration",
            extra={"component": comp.id, "value": value, "lo": comp.norm_lo, "hi": comp.norm_hi},
        )
        emit(metrics, "out_of_calibration", component=comp.id)
    return rho


def detect_crossings(
    traj: Trajectory, comp: SectionComponent, *, metrics: Any = None
) -> list[Crossing]:
    if not comp.calibrated:
        raise CalibrationError(f"component {comp.id} must be calibrated before normalization")
    raws = detect_raw_crossings(traj, comp)
    emit(metrics, "crossings_detected", len(raws), component=comp.id)
    return [
        Crossing(r.component_id, r.time, r.state, normalize_rho(r, comp, metrics=metrics))
        for r in raws
    ]


# --------------------------------------------------------------------------- calibration


def calibrate_component(
    raws: Sequence[RawCrossing],
    comp: SectionComponent,
    *,
    system: SystemDef | None = None,
) -> SectionComponent:
    """Set norm bounds from observed crossings (1% margin) and resolve ``auto`` orientation."""
    values = np.array(
        [r.state[comp.norm_coord] for r in raws if r.component_id == comp.id], dtype=np.float64
    )
    if values.size < MIN_CALIBRATION_CROSSINGS:
        raise CalibrationError(
            f"component {comp.id}: calibration needs >= {MIN_CALIBRATION_CROSSINGS} crossings, "
            f"got {values.size}"
        )
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        raise CalibrationError(f"component {comp.id}: all crossings share one value {lo}")
    margin = CALIBRATION_MARGIN * (hi - lo)
    lo -= margin
    hi += margin
    orientation = comp.orientation
    if orientation == "auto":
        orientation = _resolve_orientation(comp, lo, hi, system)
    return replace(comp, norm_lo=lo, norm_hi=hi, orientation=orientation)


def _resolve_orientation(
    comp: SectionComponent, lo: float, hi: float, system: SystemDef | None
) -> str:
    # Inner edge (closest to the equilibrium next to the plane) maps to the slot's lower end.
    fp = nearest_fixed_point(system, comp.coord, comp.level) if system is not None else None
    if fp is None:
        orientation = "ascending"
    else:
        ref = float(fp[comp.norm_coord])
        orientation = "ascending" if abs(lo - ref) <= abs(hi - ref) else "descending"
    note = mk_note(
        Codes.ORIENTATION_RESOLVED,
        Codes.ORIENTATION_RESOLVED.default_msg.format(component=comp.id, orientation=orientation),
    )
    _LOG.info("orientation_resolved", extra={"component": comp.id, "note": note})
    return orientation


def calibrate_components(
    traj: Trajectory,
    comps: Sequence[SectionComponent],
    *,
    system: SystemDef | None = None,
) -> list[SectionComponent]:
    """Calibrate every component that is not calibrated yet against ``traj``."""
    sys_ref = system if system is not None else traj.system
    out: list[SectionComponent] = []
    for comp in comps:
        if comp.calibrated:
            out.append(comp)
            continue
        if comp.norm_lo is not None:
            # explicit bounds, orientation still to resolve
            orientation = _resolve_orientation(
                comp, float(comp.norm_lo), float(comp.norm_hi), sys_ref  # type: ignore[arg-type]
            )
            out.append(replace(comp, orientation=orientation))
            continue
        raws = detect_raw_crossings(traj, comp)
        out.append(calibrate_component(raws, comp, system=sys_ref))
    return out


# --------------------------------------------------------------------------- merging


class _TangencyGuard:
    """Keeps crossings of one plane at least ``TANGENCY_STEPS * dt`` apart."""

    def __init__(self, dt: float, metrics: Any = None) -> None:
        self.min_gap = TANGENCY_STEPS * dt
        self.metrics = metrics
        self.last_by_plane: dict[tuple[int, float], float] = {}
        self.last_time: float | None = None
        self.dropped: dict[str, int] = defaultdict(int)

    def admit(self, raw: RawCrossing, comp: SectionComponent) -> bool:
        if self.last_time is not None and raw.time <= self.last_time:
            self._drop(raw, comp, "non_increasing_time")
            return False
        last = self.last_by_plane.get(comp.plane)
        if last is not None and raw.time - last < self.min_gap:
            self._drop(raw, comp, "tangency")
            return False
        self.last_by_plane[comp.plane] = raw.time
        self.last_time = raw.time
        return True

    def _drop(self, raw: RawCrossing, comp: SectionComponent, reason: str) -> None:
        self.dropped[comp.id] += 1
        _LOG.warning(
            "crossing_tangency_drop",
            extra={"component": comp.id, "time": raw.time, "reason": reason},
        )
        emit(self.metrics, "tangency_drops", component=comp.id)

    def notes(self) -> list[dict[str, Any]]:
        return [
            mk_note(Codes.TANGENCY_DROP, data={"component": cid, "dropped": n})
            for cid, n in sorted(self.dropped.items())
        ]


def _ordered(
    raws_by_comp: Mapping[str, Sequence[RawCrossing]], comps: Mapping[str, SectionComponent]
) -> list[tuple[RawCrossing, SectionComponent]]:
    items = [(r, comps[cid]) for cid, rs in raws_by_comp.items() for r in rs]
    items.sort(key=lambda rc: (rc[0].time, rc[1].index))
    return items


def merge_crossings(
    raws_by_comp: Mapping[str, Sequence[RawCrossing]],
    comps: Sequence[SectionComponent],
    dt: float,
    *,
    metrics: Any = None,
) -> tuple[list[tuple[RawCrossing, SectionComponent]], list[dict[str, Any]]]:
    """Time-ordered merge of per-component crossings with the tangency guard applied."""
    guard = _TangencyGuard(dt, metrics)
    kept = [rc for rc in _ordered(raws_by_comp, component_map(comps)) if guard.admit(*rc)]
    return kept, guard.notes()


def _finish_series(
    kept: Sequence[tuple[RawCrossing, SectionComponent]],
    notes: list[dict[str, Any]],
    agent_id: int | None,
    metrics: Any,
) -> RhoSeries:
    crossings: list[Crossing] = []
    clamped: dict[str, int] = defaultdict(int)
    for raw, comp in kept:
        rho, out_of_range = _normalize(float(raw.state[comp.norm_coord]), comp)
        if out_of_range:
            clamped[comp.id] += 1
            emit(metrics, "out_of_calibration", component=comp.id)
        crossings.append(Crossing(raw.component_id, raw.time, raw.state, rho))
    for cid, count in sorted(clamped.items()):
        msg = Codes.OUT_OF_CALIBRATION.default_msg.format(component=cid)
        notes.append(mk_note(Codes.OUT_OF_CALIBRATION, msg, {"component": cid, "count": count}))
        _LOG.warning("rho_out_of_calibration", extra={"component": cid, "count": count})
    return RhoSeries(crossings=tuple(crossings), agent_id=agent_id, notes=tuple(notes))


def build_rho_series(
    traj: Trajectory,
    comps: Sequence[SectionComponent],
    *,
    agent_id: int | None = None,
    metrics: Any = None,
) -> RhoSeries:
    """Crossings of all components merged in time order, each normalized into its slot."""
    validate_components(comps)
    for comp in comps:
        if not comp.calibrated:
            raise CalibrationError(f"component {comp.id} must be calibrated first")
    if len(traj) < 2:
        return RhoSeries(agent_id=agent_id)
    raws_by_comp: dict[str, list[RawCrossing]] = {}
    for comp in comps:
        raws_by_comp[comp.id] = detect_raw_crossings(traj, comp)
        emit(metrics, "crossings_detected", len(raws_by_comp[comp.id]), component=comp.id)
    kept, notes = merge_crossings(raws_by_comp, comps, traj.dt, metrics=metrics)
    return _finish_series(kept, notes, agent_id, metrics)


# --------------------------------------------------------------------------- streaming


def iter_raw_crossings(
    system: SystemDef,
    s0: Sequence[float] | np.ndarray,
    dt: float,
    comps: Sequence[SectionComponent],
    *,
    chunk_steps: int = 100_000,
    max_steps: int | None = None,
    transient_steps: int = 0,
    t0: float = 0.0,
    metrics: Any = None,
) -> Iterator[tuple[RawCrossing, SectionComponent]]:
    """Integrate in chunks and yield guarded crossings as they appear.

    Consecutive chunks share their boundary sample, so no sample pair is inspected twice.
    Stops after ``max_steps`` integration steps (unbounded when ``None``).
    """
    validate_components(comps)
    by_id = component_map(comps)
    guard = _TangencyGuard(dt, metrics)
    state = as_state(system, s0)
    t = float(t0)
    first = True
    done = 0
    while max_steps is None or done < max_steps:
        n = chunk_steps if max_steps is None else min(chunk_steps, max_steps - done)
        cfg = IntegratorConfig(
            dt=dt, steps=n + 1, transient_steps=transient_steps if first else 0
        )
        traj = integrate(system, state, cfg, t0=t)
        first = False
        raws_by_comp = {c.id: detect_raw_crossings(traj, c) for c in comps}
        for cid, rs in raws_by_comp.items():
            emit(metrics, "crossings_detected", len(rs), component=cid)
        for raw, comp in _ordered(raws_by_comp, by_id):
            if guard.admit(raw, comp):
                yield raw, comp
        done += n
        state = traj.final_state
        t = traj.t_end


def iter_crossings(
    system: SystemDef,
    s0: Sequence[float] | np.ndarray,
    dt: float,
    comps: Sequence[SectionComponent],
    **kwargs: Any,
) -> Iterator[Crossing]:
    metrics = kwargs.get("metrics")
    for comp in comps:
        if not comp.calibrated:
            raise CalibrationError(f"component {comp.id} must be calibrated first")
    for raw, comp in iter_raw_crossings(system, s0, dt, comps, **kwargs):
        rho = normalize_rho(raw, comp, metrics=metrics)
        yield Crossing(raw.component_id, raw.time, raw.state, rho)


# --------------------------------------------------------------------------- exports


def write_rho_csv(series: RhoSeries, path: Path) -> None:
    rows = (
        [n, c.component_id, fmt17(c.time), fmt17(c.rho)] for n, c in enumerate(series.crossings)
    )
    write_csv(path, ["n", "component", "t", "rho"], rows)


def rho_series_to_dict(series: RhoSeries) -> dict[str, Any]:
    return {
        "agent_id": series.agent_id,
        "crossings": [
            {
                "component": c.component_id,
                "time": c.time,
                "rho": c.rho,
                "state": [float(v) for v in c.state],
            }
            for c in series.crossings
        ],
        "notes": list(series.notes),
    }


def rho_series_from_dict(data: Mapping[str, Any]) -> RhoSeries:
    crossings = tuple(
        Crossing(
            component_id=str(item["component"]),
            time=float(item["time"]),
            state=np.asarray(item["state"], dtype=np.float64),
            rho=float(item["rho"]),
        )
        for item in data.get("crossings", [])
    )
    times = [c.time for c in crossings]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise SeriesError("rho series times must be strictly increasing")
    agent = data.get("agent_id")
    return RhoSeries(
        crossings=crossings,
        agent_id=None if agent is None else int(agent),
        notes=tuple(data.get("notes", ())),
    )


def write_rho_json(series: RhoSeries, path: Path) -> None:
    write_json(path, rho_series_to_dict(series))


def read_rho_json(path: Path) -> RhoSeries:
    return rho_series_from_dict(read_json(path))


def write_components_json(comps: Sequence[SectionComponent], path: Path) -> None:
    write_json(path, {"components": [c.to_dict() for c in comps]})


def read_components_json(path: Path) -> list[SectionComponent]:
    payload = read_json(path)
    return [SectionComponent.from_dict(item) for item in payload.get("components", [])]


__all__ = [
    "ROLES",
    "SectionComponent",
    "RawCrossing",
    "Crossing",
    "RhoSeries",
    "validate_components",
    "component_map",
    "slot_fraction",
    "detect_raw_crossings",
    "detect_crossings",
    "normalize_rho",
    "calibrate_component",
    "calibrate_components",
    "merge_crossings",
    "build_rho_series",
    "iter_raw_crossings",
    "iter_crossings",
    "write_rho_csv",
    "write_rho_json",
    "read_rho_json",
    "rho_series_to_dict",
    "rho_series_from_dict",
    "write_components_json",
    "read_components_json",
]
