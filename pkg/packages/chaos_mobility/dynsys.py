"""Chaotic ODE systems and the fixed-step fourth-order Runge-Kutta integrator.

Every integration path (single step, recorded trajectory, Lyapunov pair) goes through the
same compiled kernels so identical inputs give bit-identical states.
"""

from __future__ import annotations

import logging
import math
import zipfile
from collections.abc import Iterator
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np

from .codes import Codes
from .codes import mk_note
from .errors import ConfigError
from .errors import DimensionError
from .errors import DivergenceError
from .errors import NumericalError
from .errors import StageOverflowError
from .exports import fmt17
from .exports import write_csv
from .numerics import DIVERGENCE_BOUND
from .numerics import MAX_BUILTIN_DT

try:
    from numba import njit  # type: ignore
except Exception:  # pragma: no cover - fallback for missing numba

    def njit(*_args, **_kwargs):  # type: ignore
        def deco(fn):
            return fn

        return deco


_LOG = logging.getLogger(__name__)

KIND_ROSSLER = 0
KIND_LORENZ = 1
KIND_LINEAR = 2

# Kernel status codes: 1..4 = non-finite RK4 stage, 5 = divergence, 6 = collapsed separation
_STATUS_DIVERGED = 5
_STATUS_COLLAPSED = 6

MAX_TOTAL_STEPS = 200_000_000
_NPZ_DATE_TIME = (1980, 1, 1, 0, 0, 0)


# --------------------------------------------------------------------------- kernels


@njit(cache=True, nogil=True, fastmath=False)
def _rhs(kind, p, s, out):  # pragma: no cover - compiled
    if kind == 0:
        x = s[0]
        y = s[1]
        z = s[2]
        out[0] = -y - z
        out[1] = x + p[0] * y
        out[2] = p[1] + z * (x - p[2])
    elif kind == 1:
        x = s[0]
        y = s[1]
        z = s[2]
        out[0] = p[0] * (y - x)
        out[1] = p[1] * x - y - x * z
        out[2] = -p[2] * z + x * y
    else:
        for i in range(s.shape[0]):
            out[i] = -p[0] * s[i]


@njit(cache=True, nogil=True, fastmath=False)
def _finite(v):  # pragma: no cover - compiled
    for i in range(v.shape[0]):
        if not math.isfinite(v[i]):
            return False
    return True


@njit(cache=True, nogil=True, fastmath=False)
def _exceeds(v, bound):  # pragma: no cover - compiled
    for i in range(v.shape[0]):
        if abs(v[i]) > bound:
            return True
    return False


@njit(cache=True, nogil=True, fastmath=False)
def _rk4_into(kind, p, s, dt, out, k1, k2, k3, k4, tmp):  # pragma: no cover - compiled
    n = s.shape[0]
    _rhs(kind, p, s, k1)
    if not _finite(k1):
        return 1
    for i in range(n):
        tmp[i] = s[i] + 0.5 * dt * k1[i]
    _rhs(kind, p, tmp, k2)
    if not _finite(k2):
        return 2
    for i in range(n):
        tmp[i] = s[i] + 0.5 * dt * k2[i]
    _rhs(kind, p, tmp, k3)
    if not _finite(k3):
        return 3
    for i in range(n):
        tmp[i] = s[i] + dt * k3[i]
    _rhs(kind, p, tmp, k4)
    if not _finite(k4):
        return 4
    h6 = dt / 6.0
    for i in range(n):
        out[i] = s[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


@njit(cache=True, nogil=True, fastmath=False)
def _integrate_kernel(kind, p, s0, dt, transient, samples, bound):  # pragma: no cover
    n = s0.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    cur = s0.copy()
    nxt = np.empty(n)
    for step in range(transient):
        status = _rk4_into(kind, p, cur, dt, nxt, k1, k2, k3, k4, tmp)
        if status != 0:
            return status, step + 1
        if _exceeds(nxt, bound):
            return 5, step + 1
        cur, nxt = nxt, cur
    for i in range(n):
        samples[0, i] = cur[i]
    for k in range(1, samples.shape[0]):
        status = _rk4_into(kind, p, samples[k - 1], dt, samples[k], k1, k2, k3, k4, tmp)
        if status != 0:
            return status, transient + k
        if _exceeds(samples[k], bound):
            return 5, transient + k
    return 0, 0


@njit(cache=True, nogil=True, fastmath=False)
def _benettin_kernel(
    kind, p, s0, dt, transient, n_renorm, steps_per, d0, bound
):  # pragma: no cover - compiled
    n = s0.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    x = s0.copy()
    nx = np.empty(n)
    y = np.empty(n)
    ny = np.empty(n)
    for step in range(transient):
        status = _rk4_into(kind, p, x, dt, nx, k1, k2, k3, k4, tmp)
        if status != 0:
            return status, step + 1, 0.0
        if _exceeds(nx, bound):
            return 5, step + 1, 0.0
        x, nx = nx, x
    offset = d0 / math.sqrt(n)
    for i in range(n):
        y[i] = x[i] + offset
    total = 0.0
    counter = transient
    for r in range(n_renorm):
        for j in range(steps_per):
            counter += 1
            status = _rk4_into(kind, p, x, dt, nx, k1, k2, k3, k4, tmp)
            if status != 0:
                return status, counter, total
            status = _rk4_into(kind, p, y, dt, ny, k1, k2, k3, k4, tmp)
            if status != 0:
                return status, counter, total
            if _exceeds(nx, bound) or _exceeds(ny, bound):
                return 5, counter, total
            x, nx = nx, x
            y, ny = ny, y
        d2 = 0.0
        for i in range(n):
            diff = y[i] - x[i]
            d2 += diff * diff
        d = math.sqrt(d2)
        if d == 0.0 or not math.isfinite(d):
            return 6, r, total
        total += math.log(d / d0)
        scale = d0 / d
        for i in range(n):
            y[i] = x[i] + (y[i] - x[i]) * scale
    return 0, 0, total


# --------------------------------------------------------------------------- systems


@dataclass(frozen=True)
class _SystemEntry:
    kind: int
    dim: int | None
    param_names: tuple[str, ...]
    defaults: tuple[float, ...]
    coord_names: tuple[str, ...] | None
    builtin: bool


_REGISTRY: dict[str, _SystemEntry] = {
    "rossler": _SystemEntry(
        KIND_ROSSLER, 3, ("a", "b", "c"), (0.1775, 0.215, 5.995), ("x", "y", "z"), True
    ),
    "lorenz": _SystemEntry(
        KIND_LORENZ, 3, ("sigma", "R", "beta"), (10.0, 70.0, 8.0 / 3.0), ("x", "y", "z"), True
    ),
    # Test-only linear system x' = -k x used to verify the integrator.
    "linear_decay": _SystemEntry(KIND_LINEAR, None, ("k",), (1.0,), None, False),
}


@dataclass(frozen=True)
class SystemDef:
    """A named ODE system: dimension, ordered parameters and its derivative rule."""

    name: str
    dim: int
    params: tuple[float, ...]
    param_names: tuple[str, ...]
    coord_names: tuple[str, ...]
    kind: int
    builtin: bool = True

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"system dimension must be >= 1, got {self.dim}")
        if len(self.params) != len(self.param_names):
            raise ConfigError("params and param_names differ in length")
        if not all(math.isfinite(v) for v in self.params):
            raise ConfigError(f"parameters of {self.name} must be finite: {self.params}")
        if self.kind in (KIND_ROSSLER, KIND_LORENZ) and self.dim != 3:
            raise ConfigError(f"{self.name} is three-dimensional")

    @property
    def params_array(self) -> np.ndarray:
        return np.asarray(self.params, dtype=np.float64)

    def param(self, name: str) -> float:
        try:
            return self.params[self.param_names.index(name)]
        except ValueError:
            raise ConfigError(f"unknown parameter '{name}' for system {self.name}") from None

    def with_params(self, **updates: float) -> SystemDef:
        values = list(self.params)
        for key, val in updates.items():
            if key not in self.param_names:
                raise ConfigError(f"unknown parameter '{key}' for system {self.name}")
            values[self.param_names.index(key)] = float(val)
        return SystemDef(
            name=self.name,
            dim=self.dim,
            params=tuple(values),
            param_names=self.param_names,
            coord_names=self.coord_names,
            kind=self.kind,
            builtin=self.builtin,
        )

    def coord_index(self, coord: int | str) -> int:
        if isinstance(coord, str) and not coord.lstrip("-").isdigit():
            if coord not in self.coord_names:
                raise ConfigError(
                    f"unknown coordinate '{coord}' for {self.name}; expected {self.coord_names}"
                )
            return self.coord_names.index(coord)
        idx = int(coord)
        if not 0 <= idx < self.dim:
            raise ConfigError(f"coordinate index {idx} out of range for dim={self.dim}")
        return idx

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "params": dict(zip(self.param_names, self.params, strict=True)),
        }


def make_system(
    name: str, params: Mapping[str, float] | None = None, *, dim: int | None = None
) -> SystemDef:
    key = str(name or "").strip().lower()
    entry = _REGISTRY.get(key)
    if entry is None:
        raise ConfigError(f"unknown system '{name}'; known: {sorted(_REGISTRY)}")
    values = dict(zip(entry.param_names, entry.defaults, strict=True))
    for pname, pval in (params or {}).items():
        if pname not in values:
            raise ConfigError(f"unknown parameter '{pname}' for system {key}")
        values[pname] = float(pval)
    n = entry.dim if entry.dim is not None else int(dim or 1)
    if entry.dim is not None and dim is not None and int(dim) != entry.dim:
        raise ConfigError(f"{key} has fixed dimension {entry.dim}")
    coords = entry.coord_names or tuple(f"x{i}" for i in range(n))
    return SystemDef(
        name=key,
        dim=n,
        params=tuple(values[p] for p in entry.param_names),
        param_names=entry.param_names,
        coord_names=coords,
        kind=entry.kind,
        builtin=entry.builtin,
    )


def known_systems() -> list[str]:
    return sorted(_REGISTRY)


# --------------------------------------------------------------------------- states


def as_state(system: SystemDef, s: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.array(s, dtype=np.float64, copy=True).reshape(-1)
    if arr.shape[0] != system.dim:
        raise DimensionError(
            f"state of length {arr.shape[0]} does not match {system.name} dim={system.dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"state must be finite, got {arr.tolist()}")
    return arr


def derivative(system: SystemDef, s: Sequence[float] | np.ndarray) -> np.ndarray:
    state = as_state(system, s)
    out = np.empty_like(state)
    _rhs(system.kind, system.params_array, state, out)
    return out


def rk4_step(system: SystemDef, s: Sequence[float] | np.ndarray, dt: float) -> np.ndarray:
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"dt must be > 0, got {dt}")
    state = as_state(system, s)
    n = system.dim
    out = np.empty(n)
    status = _rk4_into(
        system.kind,
        system.params_array,
        state,
        float(dt),
        out,
        np.empty(n),
        np.empty(n),
        np.empty(n),
        np.empty(n),
        np.empty(n),
    )
    if status != 0:
        raise StageOverflowError(int(status))
    return out


# --------------------------------------------------------------------------- integration


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    steps: int = 10_000
    transient_steps: int = 0

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if int(self.steps) <= 0:
            raise ConfigError(f"steps must be > 0, got {self.steps}")
        if int(self.transient_steps) < 0:
            raise ConfigError(f"transient_steps must be >= 0, got {self.transient_steps}")
        if int(self.transient_steps) + int(self.steps) > MAX_TOTAL_STEPS:
            raise ConfigError(f"step budget exceeds {MAX_TOTAL_STEPS}")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled solution; ``samples[k]`` is the state at ``t0 + k*dt``."""

    t0: float
    dt: float
    samples: np.ndarray
    system: SystemDef | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DimensionError("trajectory samples must be a 2-D array")
        if arr.shape[0] > 0 and not np.all(np.isfinite(arr)):
            raise ValueError("trajectory contains non-finite states")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if arr is self.samples or arr.base is self.samples:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.samples)

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self) - 1)

    @property
    def final_state(self) -> np.ndarray:
        return np.array(self.samples[-1])

    @classmethod
    def empty(cls, dim: int, dt: float = 0.01, system: SystemDef | None = None) -> Trajectory:
        return cls(t0=0.0, dt=dt, samples=np.empty((0, dim)), system=system)


def _raise_kernel_status(status: int, step: int) -> None:
    if status == _STATUS_DIVERGED:
        raise DivergenceError(step, DIVERGENCE_BOUND)
    if 1 <= status <= 4:
        raise StageOverflowError(status, step)


def integrate(
    system: SystemDef,
    s0: Sequence[float] | np.ndarray,
    cfg: IntegratorConfig,
    *,
    t0: float = 0.0,
) -> Trajectory:
    """Discard ``transient_steps`` steps, then record ``steps`` states.

    The first recorded sample is the state after the transient, at ``t0 + transient*dt``.
    """
    state = as_state(system, s0)
    if system.builtin and cfg.dt > MAX_BUILTIN_DT:
        raise ConfigError(f"dt={cfg.dt} exceeds the stability guard {MAX_BUILTIN_DT}")
    samples = np.empty((int(cfg.steps), system.dim))
    status, step = _integrate_kernel(
        system.kind,
        system.params_array,
        state,
        float(cfg.dt),
        int(cfg.transient_steps),
        samples,
        DIVERGENCE_BOUND,
    )
    if status != 0:
        _LOG.warning(
            "integration_failed",
            extra={"system": system.name, "status": int(status), "step": int(step)},
        )
        _raise_kernel_status(int(status), int(step))
    return Trajectory(
        t0=float(t0) + cfg.dt * int(cfg.transient_steps),
        dt=float(cfg.dt),
        samples=samples,
        system=system,
    )


def separation_log_sum(
    system: SystemDef,
    s0: Sequence[float] | np.ndarray,
    dt: float,
    *,
    transient_steps: int,
    renormalizations: int,
    steps_per_renorm: int,
    d0: float,
) -> float:
    """Sum of ln(d/d0) for a trajectory pair renormalized to separation ``d0``.

    The partner starts ``d0`` away along the diagonal after the transient.
    """
    state = as_state(system, s0)
    status, index, total = _benettin_kernel(
        system.kind,
        system.params_array,
        state,
        float(dt),
        int(transient_steps),
        int(renormalizations),
        int(steps_per_renorm),
        float(d0),
        DIVERGENCE_BOUND,
    )
    if status == _STATUS_COLLAPSED:
        raise NumericalError(f"trajectory separation collapsed at renormalization {index}")
    _raise_kernel_status(int(status), int(index))
    return float(total)


def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    headers = ["t"] + [f"x{i}" for i in range(traj.dim)]
    times = traj.times
    rows = ([fmt17(t)] + [fmt17(v) for v in state] for t, state in zip(times, traj.samples))
    write_csv(path, headers, rows)


def save_trajectory_npz(traj: Trajectory, path: Path) -> None:
    """Write an ``.npz`` archive whose members carry a fixed timestamp (reruns are byte-equal)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {"t0": np.float64(traj.t0), "dt": np.float64(traj.dt), "samples": traj.samples}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for key, value in arrays.items():
            info = zipfile.ZipInfo(f"{key}.npy", date_time=_NPZ_DATE_TIME)
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asanyarray(value), allow_pickle=False)


def load_trajectory_npz(path: Path, system: SystemDef | None = None) -> Trajectory:
    with np.load(path) as data:
        return Trajectory(
            t0=float(data["t0"]),
            dt=float(data["dt"]),
            samples=np.array(data["samples"]),
            system=system,
        )


# --------------------------------------------------------------------------- equilibria


@dataclass(frozen=True)
class FixedPointSet:
    points: tuple[np.ndarray, ...]
    complex_dropped: bool = False
    notes: tuple[dict[str, Any], ...] = ()

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, idx: int) -> np.ndarray:
        return self.points[idx]


def fixed_points(system: SystemDef) -> FixedPointSet:
    """Closed-form equilibria of the built-in systems."""
    if system.kind == KIND_LORENZ:
        _sigma, r, beta = system.params
        origin = np.zeros(3)
        if r <= 1.0:
            return FixedPointSet((origin,))
        q = math.sqrt(beta * (r - 1.0))
        return FixedPointSet(
            (origin, np.array([q, q, r - 1.0]), np.array([-q, -q, r - 1.0]))
        )
    if system.kind == KIND_ROSSLER:
        a, b, c = system.params
        # a z^2 - c z + b = 0 with x = a z, y = -z
        if a == 0.0:
            if c == 0.0:
                return FixedPointSet(())
            z = b / c
            return FixedPointSet((np.array([0.0, -z, z]),))
        disc = c * c - 4.0 * a * b
        if disc < 0.0:
            note = mk_note(Codes.COMPLEX_ROOTS, data={"discriminant": disc})
            _LOG.warning("fixed_points_complex", extra={"system": system.name, "disc": disc})
            return FixedPointSet((), complex_dropped=True, notes=(note,))
        root = math.sqrt(disc)
        big = (c + math.copysign(root, c)) / (2.0 * a)
        small = b / (a * big) if big != 0.0 else (c - root) / (2.0 * a)
        zs = sorted({small, big}, key=abs)
        return FixedPointSet(tuple(np.array([a * z, -z, z]) for z in zs))
    if system.kind == KIND_LINEAR:
        return FixedPointSet((np.zeros(system.dim),))
    raise ConfigError(f"no closed-form equilibria for system {system.name}")


def nearest_fixed_point(system: SystemDef, coord: int, level: float) -> np.ndarray | None:
    """Equilibrium closest to the plane ``state[coord] == level`` (first one on ties)."""
    pts = fixed_points(system).points
    if not pts:
        return None
    return min(pts, key=lambda p: abs(float(p[coord]) - float(level)))


__all__ = [
    "SystemDef",
    "IntegratorConfig",
    "Trajectory",
    "FixedPointSet",
    "make_system",
    "known_systems",
    "as_state",
    "derivative",
    "rk4_step",
    "integrate",
    "fixed_points",
    "nearest_fixed_point",
    "separation_log_sum",
    "write_trajectory_csv",
    "save_trajectory_npz",
    "load_trajectory_npz",
]
