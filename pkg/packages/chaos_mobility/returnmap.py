"""First-return and partial first-return maps, symbolic dynamics and map mechanisms."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks
from scipy.spatial import cKDTree

from .codes import Codes
from .codes import mk_note
from .errors import ConfigError
from .errors import SeriesError
from .exports import fmt17
from .exports import read_csv
from .exports import read_json
from .exports import write_csv
from .exports import write_json
from .exports import write_text
from .section import RhoSeries
from .telemetry import emit

_LOG = logging.getLogger(__name__)

MAX_PERIOD = 6
MIN_PAIRS_PER_PERIOD = 50
DEFAULT_TOL = 0.01
DEFAULT_EPS_IMAGE = 0.01
DEFAULT_DELTA_PRE = 0.1
# Minimum peak prominence, as a fraction of the smoothed profile range.
PEAK_PROMINENCE = 0.01

RULE_NEEDS_INITIAL_AND_FINAL = (
    "a partial return map needs at least one initial and one final component"
)
RULE_NO_PREDECESSOR = "it is not possible to reach an initial component"
RULE_NO_SUCCESSOR = "a final component has no successor point"


@dataclass(frozen=True)
class ReturnPair:
    rho_n: float
    rho_next: float
    from_component: str
    to_component: str
    n: int
    agent_id: int | None = None
    segment: int = 0


@dataclass(frozen=True)
class PartialReturnMap:
    """Set of (rho_n, rho_{n+1}) pairs plus the component role table."""

    pairs: tuple[ReturnPair, ...]
    roles: Mapping[str, str] = field(default_factory=dict)
    notes: tuple[dict[str, Any], ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        for p in self.pairs:
            if self.roles.get(p.to_component) == "initial":
                raise SeriesError(
                    f"{RULE_NO_PREDECESSOR}: pair {p.from_component}->{p.to_component}"
                )
            if self.roles.get(p.from_component) == "final":
                raise SeriesError(
                    f"{RULE_NO_SUCCESSOR}: pair {p.from_component}->{p.to_component}"
                )

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def abscissae(self) -> np.ndarray:
        return np.array([p.rho_n for p in self.pairs], dtype=np.float64)

    @property
    def ordinates(self) -> np.ndarray:
        return np.array([p.rho_next for p in self.pairs], dtype=np.float64)

    def components(self) -> list[str]:
        seen = set(self.roles)
        for p in self.pairs:
            seen.update((p.from_component, p.to_component))
        return sorted(seen)

    def between(self, from_component: str, to_component: str | None = None) -> list[ReturnPair]:
        return [
            p
            for p in self.pairs
            if p.from_component == from_component
            and (to_component is None or p.to_component == to_component)
        ]

    def component_pairs(self) -> list[tuple[str, str]]:
        return sorted({(p.from_component, p.to_component) for p in self.pairs})


# --------------------------------------------------------------------------- construction


def build_first_return_map(series: RhoSeries) -> PartialReturnMap:
    """Pairs of consecutive crossings; every component is cyclic."""
    if len(series) < 2:
        raise SeriesError(f"a first-return map needs >= 2 crossings, got {len(series)}")
    cs = series.crossings
    pairs = tuple(
        ReturnPair(
            rho_n=cs[i].rho,
            rho_next=cs[i + 1].rho,
            from_component=cs[i].component_id,
            to_component=cs[i + 1].component_id,
            n=i,
            agent_id=series.agent_id,
        )
        for i in range(len(cs) - 1)
    )
    roles = {cid: "cyclic" for cid in sorted(set(series.component_ids))}
    return PartialReturnMap(pairs=pairs, roles=roles)


def check_roles(roles: Mapping[str, str]) -> None:
    values = set(roles.values())
    if "initial" not in values or "final" not in values:
        raise ConfigError(RULE_NEEDS_INITIAL_AND_FINAL)


def build_partial_return_map(
    series: RhoSeries | Sequence[RhoSeries],
    roles: Mapping[str, str],
    *,
    max_segment_crossings: int | None = None,
    metrics: Any = None,
) -> PartialReturnMap:
    """Pairs formed inside segments running from an initial to a final crossing.

    Crossings before the first initial crossing are ignored; a second initial crossing restarts
    the segment. Segments that end without a final crossing (end of data, restart, or more than
    ``max_segment_crossings`` crossings) are truncated; their pairs are kept.
    """
    check_roles(roles)
    batch = [series] if isinstance(series, RhoSeries) else list(series)
    pairs: list[ReturnPair] = []
    truncated = 0
    for ser in batch:
        segment = -1
        prev = None
        length = 0
        for n, c in enumerate(ser.crossings):
            role = roles.get(c.component_id)
            if role is None:
                raise SeriesError(f"crossing of unknown component '{c.component_id}'")
            if role == "initial":
                if prev is not None:
                    truncated += 1
                segment += 1
                prev = (n, c)
                length = 1
                continue
            if prev is None:
                continue
            pn, pc = prev
            pairs.append(
                ReturnPair(
                    rho_n=pc.rho,
                    rho_next=c.rho,
                    from_component=pc.component_id,
                    to_component=c.component_id,
                    n=pn,
                    agent_id=ser.agent_id,
                    segment=segment,
                )
            )
            length += 1
            if role == "final":
                prev = None
            elif max_segment_crossings is not None and length >= max_segment_crossings:
                truncated += 1
                prev = None
            else:
                prev = (n, c)
        if prev is not None:
            truncated += 1
    notes: list[dict[str, Any]] = []
    if truncated:
        notes.append(mk_note(Codes.SEGMENT_TRUNCATED, data={"segments": truncated}))
        _LOG.warning("segment_truncated", extra={"segments": truncated})
        emit(metrics, "segments_truncated", truncated)
    return PartialReturnMap(pairs=tuple(pairs), roles=dict(roles), notes=tuple(notes))


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    components: tuple[str, ...]
    counts: np.ndarray

    def get(self, from_component: str, to_component: str) -> int:
        i = self.components.index(from_component)
        j = self.components.index(to_component)
        return int(self.counts[i, j])

    def support(self) -> set[tuple[str, str]]:
        rows, cols = np.nonzero(self.counts)
        return {(self.components[i], self.components[j]) for i, j in zip(rows, cols)}

    def to_dict(self) -> dict[str, Any]:
        return {
            "components": list(self.components),
            "counts": {
                f"{a}->{b}": int(self.counts[i, j])
                for i, a in enumerate(self.components)
                for j, b in enumerate(self.components)
            },
        }


def transition_matrix(
    rmap: PartialReturnMap, components: Sequence[str] | None = None
) -> TransitionCounts:
    comps = tuple(components) if components is not None else tuple(rmap.components())
    counts = np.zeros((len(comps), len(comps)), dtype=np.int64)
    lookup = {c: i for i, c in enumerate(comps)}
    for p in rmap.pairs:
        counts[lookup[p.from_component], lookup[p.to_component]] += 1
    return TransitionCounts(components=comps, counts=counts)


# --------------------------------------------------------------------------- symbols


@dataclass(frozen=True)
class SymbolPartition:
    slot: tuple[float, float]
    breakpoints: tuple[float, ...]
    symbols: tuple[str, ...]
    component_id: str | None = None

    def symbol_of(self, rho: float) -> str:
        return self.symbols[int(np.searchsorted(self.breakpoints, rho, side="right"))]

    def to_dict(self) -> dict[str, Any]:
        return {
            "component": self.component_id,
            "slot": list(self.slot),
            "breakpoints": list(self.breakpoints),
            "symbols": list(self.symbols),
        }


def partition_symbols(
    slot: tuple[float, float],
    breakpoints: Sequence[float],
    symbols: Sequence[str],
    *,
    component_id: str | None = None,
) -> SymbolPartition:
    lo, hi = float(slot[0]), float(slot[1])
    bps = tuple(float(b) for b in breakpoints)
    syms = tuple(str(s) for s in symbols)
    if len(syms) != len(bps) + 1:
        raise ConfigError("a partition needs exactly one more symbol than breakpoints")
    if len(set(syms)) != len(syms):
        raise ConfigError(f"partition symbols must be distinct: {syms}")
    if any(b <= a for a, b in zip(bps, bps[1:])):
        raise ConfigError(f"breakpoints must be strictly ascending: {bps}")
    if any(not lo < b < hi for b in bps):
        raise ConfigError(f"breakpoints must lie strictly inside the slot [{lo}, {hi}]")
    return SymbolPartition(slot=(lo, hi), breakpoints=bps, symbols=syms, component_id=component_id)


def symbolize_values(values: Iterable[float], partition: SymbolPartition) -> str:
    return "".join(partition.symbol_of(v) for v in values)


def symbolize(
    series: RhoSeries, partitions: SymbolPartition | Mapping[str, SymbolPartition]
) -> str:
    """Symbol word of a series, one letter per crossing, in time order."""
    if isinstance(partitions, SymbolPartition):
        single = partitions
        table: Mapping[str, SymbolPartition] = {}
    else:
        single = None
        table = partitions
    out: list[str] = []
    for c in series.crossings:
        part = single if single is not None else table.get(c.component_id)
        if part is None or (
            single is not None
            and part.component_id is not None
            and part.component_id != c.component_id
        ):
            raise SeriesError(f"no partition for component '{c.component_id}'")
        out.append(part.symbol_of(c.rho))
    return "".join(out)


# --------------------------------------------------------------------------- periodic orbits


@dataclass(frozen=True)
class PeriodicOrbit:
    period: int
    rho_cycle: tuple[float, ...]
    symbol_word: str
    residual: float
    support: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "period": self.period,
            "word": self.symbol_word,
            "cycle": list(self.rho_cycle),
            "residual": self.residual,
            "support": self.support,
        }


def _chains(rmap: PartialReturnMap) -> list[tuple[np.ndarray, list[str]]]:
    """Maximal runs of pairs that continue one another within an agent segment."""
    chains: list[tuple[np.ndarray, list[str]]] = []
    values: list[float] = []
    comps: list[str] = []
    last: ReturnPair | None = None
    for p in rmap.pairs:
        continues = (
            last is not None
            and p.agent_id == last.agent_id
            and p.segment == last.segment
            and p.n == last.n + 1
            and p.rho_n == last.rho_next
        )
        if not continues:
            if values:
                chains.append((np.asarray(values), comps))
            values = [p.rho_n]
            comps = [p.from_component]
        values.append(p.rho_next)
        comps.append(p.to_component)
        last = p
    if values:
        chains.append((np.asarray(values), comps))
    return chains


def _rotations(cycle: Sequence[float]) -> list[tuple[float, ...]]:
    return [tuple(cycle[i:]) + tuple(cycle[:i]) for i in range(len(cycle))]


def _has_subperiod(cycle: np.ndarray, tol: float) -> bool:
    k = cycle.shape[0]
    for p in range(1, k):
        if k % p == 0 and np.max(np.abs(np.roll(cycle, -p) - cycle)) < tol:
            return True
    return False


def _same_orbit(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    return any(np.max(np.abs(np.asarray(rot) - b)) < tol for rot in _rotations(a))


def _canonical(
    cycle: np.ndarray, comps: Sequence[str], partition: SymbolPartition | None
) -> tuple[tuple[float, ...], str]:
    k = cycle.shape[0]
    best: tuple[str, float, int] | None = None
    for i in range(k):
        rot = np.roll(cycle, -i)
        word = (
            symbolize_values(rot, partition)
            if partition is not None
            else "".join(np.roll(np.asarray(comps, dtype=object), -i))
        )
        key = (word, float(rot[0]), i)
        if best is None or key < best:
            best = key
    assert best is not None
    shift = best[2]
    return tuple(float(v) for v in np.roll(cycle, -shift)), best[0]


def extract_periodic_orbits(
    rmap: PartialReturnMap,
    k: int,
    tol: float = DEFAULT_TOL,
    *,
    partition: SymbolPartition | None = None,
) -> list[PeriodicOrbit]:
    """Recurrence search for period-``k`` cycles in the empirical map data.

    A window ``r[i..i+k-1]`` is a candidate when ``max_j |r[i+k+j] - r[i+j]| < tol``. Candidates
    that recur at a proper divisor of ``k`` or whose spread is below ``2*tol`` are rejected.
    Candidates within ``tol`` of an accepted orbit (up to rotation) join its cluster; the cluster
    representative is the member with the smallest residual.
    """
    if not 1 <= int(k) <= MAX_PERIOD:
        raise SeriesError(f"period must be in [1, {MAX_PERIOD}], got {k}")
    if len(rmap) < MIN_PAIRS_PER_PERIOD * k:
        raise SeriesError(
            f"period {k} needs >= {MIN_PAIRS_PER_PERIOD * k} pairs, got {len(rmap)}"
        )
    candidates: list[tuple[float, int, int, np.ndarray, list[str]]] = []
    for ci, (r, comps) in enumerate(_chains(rmap)):
        if r.shape[0] < 2 * k:
            continue
        d = np.abs(r[k:] - r[:-k])
        residuals = sliding_window_view(d, k).max(axis=1)
        for i in np.flatnonzero(residuals < tol):
            cycle = r[i : i + k].copy()
            if k > 1 and (np.ptp(cycle) < 2 * tol or _has_subperiod(cycle, tol)):
                continue
            candidates.append((float(residuals[i]), ci, int(i), cycle, comps[i : i + k]))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    reps: list[tuple[np.ndarray, list[str], float]] = []
    support: list[int] = []
    for residual, _ci, _i, cycle, comps in candidates:
        for idx, (rep, _c, _res) in enumerate(reps):
            if _same_orbit(rep, cycle, tol):
                support[idx] += 1
                break
        else:
            reps.append((cycle, comps, residual))
            support.append(1)
    orbits = []
    for (cycle, comps, residual), count in zip(reps, support):
        canon, word = _canonical(cycle, comps, partition)
        orbits.append(
            PeriodicOrbit(
                period=int(k), rho_cycle=canon, symbol_word=word, residual=residual, support=count
            )
        )
    _LOG.info("periodic_orbits", extra={"period": int(k), "found": len(orbits)})
    return orbits


def relabel_orbit(orbit: PeriodicOrbit, partition: SymbolPartition) -> PeriodicOrbit:
    canon, word = _canonical(np.asarray(orbit.rho_cycle), [""] * orbit.period, partition)
    return PeriodicOrbit(orbit.period, canon, word, orbit.residual, orbit.support)


def dominant_orbit(orbits: Sequence[PeriodicOrbit]) -> PeriodicOrbit | None:
    if not orbits:
        return None
    return max(orbits, key=lambda o: (o.support, -o.residual))


def default_partition(
    period1: PeriodicOrbit,
    period2: PeriodicOrbit,
    slot: tuple[float, float] = (0.0, 1.0),
    *,
    symbols: Sequence[str] = ("L", "A", "R"),
    component_id: str | None = None,
) -> SymbolPartition:
    """L/A/R breakpoints placed so the fixed point reads A and the period-2 cycle reads AR.

    The A bin covers the fixed point and the lower period-2 point; the R bin starts halfway
    between the fixed point and the upper period-2 point.
    """
    fixed = period1.rho_cycle[0]
    lo, hi = sorted(period2.rho_cycle)
    if not lo < fixed < hi:
        raise SeriesError("period-2 points must straddle the period-1 point")
    left_edge = float(slot[0])
    b1 = max(lo - (fixed - lo) / 2.0, (left_edge + lo) / 2.0)
    b2 = (fixed + hi) / 2.0
    return partition_symbols(slot, (b1, b2), symbols, component_id=component_id)


def orbit_return_error(orbit: PeriodicOrbit, rmap: PartialReturnMap) -> float:
    """Push the first cycle point through the map ``period`` times by nearest neighbour."""
    x = rmap.abscissae
    y = rmap.ordinates
    if x.size == 0:
        raise SeriesError("cannot push an orbit through an empty map")
    tree = cKDTree(x.reshape(-1, 1))
    start = orbit.rho_cycle[0]
    cur = start
    for _ in range(orbit.period):
        _dist, idx = tree.query([cur])
        cur = float(y[int(idx)])
    return abs(cur - start)


# --------------------------------------------------------------------------- mechanisms


@dataclass(frozen=True)
class FoldingWitness:
    rho_beta: float
    rho_gamma: float
    image: float

    def to_dict(self) -> dict[str, float]:
        return {"beta": self.rho_beta, "gamma": self.rho_gamma, "image": self.image}


def detect_folding(
    rmap: PartialReturnMap,
    from_component: str,
    to_component: str,
    eps_image: float = DEFAULT_EPS_IMAGE,
    delta_pre: float = DEFAULT_DELTA_PRE,
    *,
    max_witnesses: int | None = None,
) -> list[FoldingWitness]:
    """Pairs of preimages farther apart than ``delta_pre`` whose images lie within ``eps_image``."""
    sel = rmap.between(from_component, to_component)
    if not sel:
        raise SeriesError(f"no pairs {from_component}->{to_component} in the map")
    pre = np.array([p.rho_n for p in sel])
    img = np.array([p.rho_next for p in sel])
    tree = cKDTree(img.reshape(-1, 1))
    ij = tree.query_pairs(r=eps_image, output_type="ndarray")
    if ij.size == 0:
        return []
    i, j = ij[:, 0], ij[:, 1]
    keep = (np.abs(img[i] - img[j]) < eps_image) & (np.abs(pre[i] - pre[j]) > delta_pre)
    i, j = i[keep], j[keep]
    beta = np.minimum(pre[i], pre[j])
    gamma = np.maximum(pre[i], pre[j])
    image = 0.5 * (img[i] + img[j])
    order = np.lexsort((image, gamma, beta))
    if max_witnesses is not None:
        order = order[:max_witnesses]
    return [FoldingWitness(float(beta[o]), float(gamma[o]), float(image[o])) for o in order]


@dataclass(frozen=True)
class TearingSplit:
    boundary: float
    left_target: str
    right_target: str


@dataclass(frozen=True)
class TearingResult:
    from_component: str
    splits: tuple[TearingSplit, ...]
    notes: tuple[dict[str, Any], ...] = ()

    @property
    def torn(self) -> bool:
        return bool(self.splits)

    def targets(self) -> set[str]:
        return {s.left_target for s in self.splits} | {s.right_target for s in self.splits}

    def to_dict(self) -> dict[str, Any]:
        return {
            "from": self.from_component,
            "splits": [
                {"boundary": s.boundary, "left": s.left_target, "right": s.right_target}
                for s in self.splits
            ],
            "notes": list(self.notes),
        }


def detect_tearing(rmap: PartialReturnMap, from_component: str) -> TearingResult:
    """Every abscissa where the target component changes, at the gap midpoint."""
    sel = sorted(rmap.between(from_component), key=lambda p: (p.rho_n, p.to_component))
    targets = {p.to_component for p in sel}
    if len(targets) < 2:
        note = mk_note(Codes.NO_TEARING, data={"from": from_component, "targets": sorted(targets)})
        return TearingResult(from_component=from_component, splits=(), notes=(note,))
    splits = [
        TearingSplit(0.5 * (a.rho_n + b.rho_n), a.to_component, b.to_component)
        for a, b in zip(sel, sel[1:])
        if a.to_component != b.to_component
    ]
    return TearingResult(from_component=from_component, splits=tuple(splits))


@dataclass(frozen=True)
class RouteDivergence:
    rho_a: float
    rho_b: float
    route_a: str
    route_b: str
    segment_a: tuple[int | None, int]
    segment_b: tuple[int | None, int]


def detect_route_divergence(
    rmap: PartialReturnMap,
    initial_component: str,
    eps: float = 0.05,
    *,
    max_witnesses: int = 1000,
) -> list[RouteDivergence]:
    """Segments entering within ``eps`` of each other whose second successor differs."""
    by_segment: dict[tuple[int | None, int], list[ReturnPair]] = {}
    for p in rmap.pairs:
        by_segment.setdefault((p.agent_id, p.segment), []).append(p)
    entries: list[tuple[float, str, tuple[int | None, int]]] = []
    for key, seg in by_segment.items():
        seg.sort(key=lambda p: p.n)
        if len(seg) < 2 or seg[0].from_component != initial_component:
            continue
        entries.append((seg[0].rho_n, seg[1].to_component, key))
    entries.sort(key=lambda e: (e[0], e[1], (-1 if e[2][0] is None else e[2][0]), e[2][1]))
    out: list[RouteDivergence] = []
    for i, (ra, route_a, key_a) in enumerate(entries):
        for rb, route_b, key_b in entries[i + 1 :]:
            if rb - ra >= eps:
                break
            if route_a != route_b:
                out.append(RouteDivergence(ra, rb, route_a, route_b, key_a, key_b))
                if len(out) >= max_witnesses:
                    return out
    return out


@dataclass(frozen=True)
class BranchProfile:
    peak_rho: float
    peak_index: int
    violation_fraction: float
    interior_maxima: int
    smoothed: np.ndarray = field(repr=False, compare=False)

    def unimodal(self, max_violation: float = 0.02) -> bool:
        n = self.smoothed.shape[0]
        return 0 < self.peak_index < n - 1 and self.violation_fraction <= max_violation


def map_branch_profile(
    rmap: PartialReturnMap, window: int = 25, *, component: str | None = None
) -> BranchProfile:
    """Moving-average profile of the map sorted by abscissa, split at its global maximum."""
    sel = [p for p in rmap.pairs if component is None or p.from_component == component]
    if len(sel) < max(3, window):
        raise SeriesError(f"branch profile needs >= {max(3, window)} pairs, got {len(sel)}")
    sel.sort(key=lambda p: p.rho_n)
    x = np.array([p.rho_n for p in sel])
    y = uniform_filter1d(np.array([p.rho_next for p in sel]), size=window, mode="nearest")
    peak = int(np.argmax(y))
    d = np.diff(y)
    violations = int(np.count_nonzero(d[:peak] < 0) + np.count_nonzero(d[peak:] > 0))
    maxima, _props = find_peaks(y, prominence=PEAK_PROMINENCE * float(np.ptp(y)))
    return BranchProfile(
        peak_rho=float(x[peak]),
        peak_index=peak,
        violation_fraction=violations / max(1, d.shape[0]),
        interior_maxima=int(maxima.shape[0]),
        smoothed=y,
    )


# --------------------------------------------------------------------------- exports

_MAP_HEADERS = ["rho_n", "rho_next", "from", "to", "agent", "n", "segment"]


def write_map_csv(rmap: PartialReturnMap, path: Path) -> None:
    rows = (
        [
            fmt17(p.rho_n),
            fmt17(p.rho_next),
            p.from_component,
            p.to_component,
            "" if p.agent_id is None else p.agent_id,
            p.n,
            p.segment,
        ]
        for p in rmap.pairs
    )
    write_csv(path, _MAP_HEADERS, rows)


def read_map_csv(path: Path, roles: Mapping[str, str] | None = None) -> PartialReturnMap:
    pairs = tuple(
        ReturnPair(
            rho_n=float(row["rho_n"]),
            rho_next=float(row["rho_next"]),
            from_component=row["from"],
            to_component=row["to"],
            n=int(row.get("n") or i),
            agent_id=int(row["agent"]) if row.get("agent") else None,
            segment=int(row.get("segment") or 0),
        )
        for i, row in enumerate(read_csv(path))
    )
    return PartialReturnMap(pairs=pairs, roles=dict(roles or {}))


def write_gnuplot_files(rmap: PartialReturnMap, out_dir: Path) -> list[Path]:
    """One two-column ``map_<from>_<to>.dat`` file per component pair present in the map."""
    paths = []
    for a, b in rmap.component_pairs():
        path = out_dir / f"map_{a}_{b}.dat"
        lines = [f"# rho_n rho_next ({a} -> {b})"]
        lines.extend(f"{fmt17(p.rho_n)} {fmt17(p.rho_next)}" for p in rmap.between(a, b))
        write_text(path, lines)
        paths.append(path)
    return paths


def write_orbits_json(
    orbits: Sequence[PeriodicOrbit], path: Path, rmap: PartialReturnMap | None = None
) -> None:
    """Orbit list; with a map, each entry also carries its nearest-neighbour return error."""
    entries = []
    for o in orbits:
        entry = o.to_dict()
        if rmap is not None:
            entry["return_error"] = orbit_return_error(o, rmap)
        entries.append(entry)
    write_json(path, {"orbits": entries})


def partition_from_dict(data: Mapping[str, Any]) -> SymbolPartition:
    try:
        slot = data["slot"]
        return partition_symbols(
            (float(slot[0]), float(slot[1])),
            data["breakpoints"],
            data["symbols"],
            component_id=data.get("component"),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"malformed partition record: {exc}") from exc


def write_partition_json(partition: SymbolPartition, path: Path) -> None:
    write_json(path, partition.to_dict())


def read_partition_json(path: Path) -> SymbolPartition:
    return partition_from_dict(read_json(path))


__all__ = [
    "ReturnPair",
    "PartialReturnMap",
    "TransitionCounts",
    "SymbolPartition",
    "PeriodicOrbit",
    "FoldingWitness",
    "TearingSplit",
    "TearingResult",
    "RouteDivergence",
    "BranchProfile",
    "build_first_return_map",
    "build_partial_return_map",
    "check_roles",
    "transition_matrix",
    "partition_symbols",
    "symbolize",
    "symbolize_values",
    "extract_periodic_orbits",
    "relabel_orbit",
    "dominant_orbit",
    "default_partition",
    "orbit_return_error",
    "detect_folding",
    "detect_tearing",
    "detect_route_divergence",
    "map_branch_profile",
    "write_map_csv",
    "read_map_csv",
    "write_gnuplot_files",
    "write_orbits_json",
    "partition_from_dict",
    "write_partition_json",
    "read_partition_json",
]
