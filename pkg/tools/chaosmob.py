"""Command-line front end: one subcommand per pipeline stage.

Stages share an output directory; each reads the artifacts of the stage before it and records
its run (resolved config, seed, artifact hashes) in ``manifest.json``.

    python -m tools.chaosmob integrate --config configs/rossler_uav.yaml --out out/rossler
    python -m tools.chaosmob section --config configs/rossler_uav.yaml --out out/rossler
    python -m tools.chaosmob replay --manifest out/rossler/manifest.json --out out/replay
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import shutil
import sys
from collections.abc import Callable
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

from chaos_mobility.codes import Codes
from chaos_mobility.codes import mk_note
from chaos_mobility.config import ExperimentConfig
from chaos_mobility.config import build_components
from chaos_mobility.config import build_geometry
from chaos_mobility.config import build_scenario_run
from chaos_mobility.config import build_system
from chaos_mobility.config import build_uav_config
from chaos_mobility.config import config_from_mapping
from chaos_mobility.config import config_hash
from chaos_mobility.config import dump_resolved
from chaos_mobility.config import initial_state
from chaos_mobility.config import load_config
from chaos_mobility.config import parse_transition
from chaos_mobility.config import resolved_dict
from chaos_mobility.dynsys import IntegratorConfig
from chaos_mobility.dynsys import SystemDef
from chaos_mobility.dynsys import integrate
from chaos_mobility.dynsys import load_trajectory_npz
from chaos_mobility.dynsys import save_trajectory_npz
from chaos_mobility.dynsys import write_trajectory_csv
from chaos_mobility.errors import ChaosMobError
from chaos_mobility.errors import ConfigError
from chaos_mobility.errors import MissingArtifactError
from chaos_mobility.errors import NumericalError
from chaos_mobility.errors import SeriesError
from chaos_mobility.exports import read_json
from chaos_mobility.exports import sha256_file
from chaos_mobility.exports import write_json
from chaos_mobility.metrics import bifurcation_scan
from chaos_mobility.metrics import compare_coverage
from chaos_mobility.metrics import distinct_values
from chaos_mobility.metrics import lle_benettin
from chaos_mobility.metrics import write_bifurcation_csv
from chaos_mobility.metrics import write_coverage_csv
from chaos_mobility.mobility import AgentTrace
from chaos_mobility.mobility import event_grammar_ok
from chaos_mobility.mobility import generate_scenario_traces
from chaos_mobility.mobility import generate_uav_trace
from chaos_mobility.mobility import random_walk_trace
from chaos_mobility.mobility import reference_state
from chaos_mobility.mobility import write_ns2
from chaos_mobility.mobility import write_traces_csv
from chaos_mobility.mobility import write_traces_json
from chaos_mobility.returnmap import PeriodicOrbit
from chaos_mobility.returnmap import SymbolPartition
from chaos_mobility.returnmap import build_first_return_map
from chaos_mobility.returnmap import build_partial_return_map
from chaos_mobility.returnmap import default_partition
from chaos_mobility.returnmap import detect_folding
from chaos_mobility.returnmap import detect_route_divergence
from chaos_mobility.returnmap import detect_tearing
from chaos_mobility.returnmap import dominant_orbit
from chaos_mobility.returnmap import extract_periodic_orbits
from chaos_mobility.returnmap import map_branch_profile
from chaos_mobility.returnmap import partition_symbols
from chaos_mobility.returnmap import read_map_csv
from chaos_mobility.returnmap import read_partition_json
from chaos_mobility.returnmap import relabel_orbit
from chaos_mobility.returnmap import transition_matrix
from chaos_mobility.returnmap import write_gnuplot_files
from chaos_mobility.returnmap import write_map_csv
from chaos_mobility.returnmap import write_orbits_json
from chaos_mobility.returnmap import write_partition_json
from chaos_mobility.section import SectionComponent
from chaos_mobility.section import build_rho_series
from chaos_mobility.section import calibrate_components
from chaos_mobility.section import read_components_json
from chaos_mobility.section import read_rho_json
from chaos_mobility.section import write_components_json
from chaos_mobility.section import write_rho_csv
from chaos_mobility.section import write_rho_json
from chaos_mobility.telemetry import RunTelemetry
from chaos_mobility.version import SCHEMA_VERSION
from chaos_mobility.version import TOOL_NAME
from chaos_mobility.version import TOOL_VERSION

_LOG = logging.getLogger("chaosmob")

LOG_LEVEL_ENV = "CHAOSMOB_LOG_LEVEL"
MANIFEST = "manifest.json"
RESOLVED_CONFIG = "config.resolved.yaml"
METRICS_FILE = "metrics.prom"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

MAX_WITNESSES_WRITTEN = 1000


@dataclass
class StageResult:
    artifacts: list[Path] = field(default_factory=list)
    inputs: list[Path] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RunContext:
    cfg: ExperimentConfig
    out_dir: Path
    telemetry: RunTelemetry


def _require(out_dir: Path, name: str, producer: str) -> Path:
    path = out_dir / name
    if not path.is_file():
        raise MissingArtifactError(str(path), producer)
    return path


def _system(ctx: RunContext) -> SystemDef:
    return build_system(ctx.cfg)


def _ordered_components(comps: Sequence[SectionComponent]) -> list[SectionComponent]:
    return sorted(comps, key=lambda c: c.index)


def _pick_component(
    comps: Sequence[SectionComponent], component_id: str | None
) -> SectionComponent:
    ordered = _ordered_components(comps)
    if not ordered:
        raise ConfigError("config defines no section components")
    if component_id is None:
        return ordered[0]
    for c in ordered:
        if c.id == component_id:
            return c
    raise ConfigError(f"unknown component '{component_id}'")


def _reference(ctx: RunContext, system: SystemDef) -> list[float]:
    integ = ctx.cfg.integrator
    state = reference_state(system, initial_state(ctx.cfg, system), integ.dt, integ.transient_steps)
    return [float(v) for v in state]


def _map_components(
    ctx: RunContext,
) -> tuple[list[SectionComponent], Path]:
    path = _require(ctx.out_dir, "components.json", "section")
    return read_components_json(path), path


def _run_agents(
    ctx: RunContext, make: Callable[[int], AgentTrace], n_agents: int
) -> list[AgentTrace]:
    if ctx.cfg.jobs > 1 and n_agents > 1:
        with ThreadPoolExecutor(max_workers=ctx.cfg.jobs) as pool:
            return list(pool.map(make, range(n_agents)))
    return [make(i) for i in range(n_agents)]


# --------------------------------------------------------------------------- stages


def cmd_integrate(ctx: RunContext) -> StageResult:
    system = _system(ctx)
    integ = ctx.cfg.integrator
    traj = integrate(
        system,
        initial_state(ctx.cfg, system),
        IntegratorConfig(dt=integ.dt, steps=integ.steps, transient_steps=integ.transient_steps),
    )
    result = StageResult(summary={"samples": len(traj), "t_end": traj.t_end})
    npz = ctx.out_dir / "trajectory.npz"
    save_trajectory_npz(traj, npz)
    result.artifacts.append(npz)
    if integ.export_csv:
        csv_path = ctx.out_dir / "trajectory.csv"
        write_trajectory_csv(traj, csv_path)
        result.artifacts.append(csv_path)
    return result


def cmd_section(ctx: RunContext) -> StageResult:
    system = _system(ctx)
    npz = _require(ctx.out_dir, "trajectory.npz", "integrate")
    traj = load_trajectory_npz(npz, system)
    comps = calibrate_components(traj, build_components(ctx.cfg, system), system=system)
    series = build_rho_series(traj, comps, metrics=ctx.telemetry)
    paths = [
        ctx.out_dir / "components.json",
        ctx.out_dir / "rho_series.csv",
        ctx.out_dir / "rho_series.json",
    ]
    write_components_json(comps, paths[0])
    write_rho_csv(series, paths[1])
    write_rho_json(series, paths[2])
    return StageResult(
        artifacts=paths,
        inputs=[npz],
        summary={"crossings": len(series.crossings), "notes": len(series.notes)},
    )


def _support_notes(
    cfg: ExperimentConfig, support: set[tuple[str, str]]
) -> tuple[list[str] | None, list[dict[str, Any]]]:
    if cfg.map.expected_support is None:
        return None, []
    expected = {parse_transition(t) for t in cfg.map.expected_support}
    if expected == support:
        return sorted(f"{a}->{b}" for a, b in expected), []
    data = {
        "missing": sorted(f"{a}->{b}" for a, b in expected - support),
        "unexpected": sorted(f"{a}->{b}" for a, b in support - expected),
    }
    _LOG.warning("support_mismatch", extra=data)
    return sorted(f"{a}->{b}" for a, b in expected), [mk_note(Codes.SUPPORT_MISMATCH, data=data)]


def _mechanisms(cfg: ExperimentConfig, rmap: Any, roles: dict[str, str]) -> dict[str, Any]:
    m = cfg.map
    out: dict[str, Any] = {"folding": {}, "tearing": {}, "route_divergence": {}, "branches": {}}
    for entry in m.folding_pairs:
        src, dst = parse_transition(entry)
        witnesses = detect_folding(
            rmap, src, dst, m.eps_image, m.delta_pre, max_witnesses=MAX_WITNESSES_WRITTEN
        )
        out["folding"][f"{src}->{dst}"] = {
            "eps_image": m.eps_image,
            "delta_pre": m.delta_pre,
            "count": len(witnesses),
            "witnesses": [w.to_dict() for w in witnesses],
        }
    for cid in m.tearing_from:
        out["tearing"][cid] = detect_tearing(rmap, cid).to_dict()
    for cid, role in sorted(roles.items()):
        if role != "initial":
            continue
        found = detect_route_divergence(
            rmap, cid, m.divergence_eps, max_witnesses=MAX_WITNESSES_WRITTEN
        )
        out["route_divergence"][cid] = {
            "eps": m.divergence_eps,
            "count": len(found),
            "witnesses": [dataclasses.asdict(d) for d in found],
        }
    if all(role == "cyclic" for role in roles.values()):
        for cid in sorted(roles):
            try:
                profile = map_branch_profile(rmap, m.profile_window, component=cid)
            except SeriesError:
                continue
            out["branches"][cid] = {
                "window": m.profile_window,
                "peak_rho": profile.peak_rho,
                "violation_fraction": profile.violation_fraction,
                "interior_maxima": profile.interior_maxima,
                "unimodal": profile.unimodal(),
            }
    return out


def cmd_map(ctx: RunContext) -> StageResult:
    comps, comps_path = _map_components(ctx)
    series_path = _require(ctx.out_dir, "rho_series.json", "section")
    series = read_rho_json(series_path)
    ordered = _ordered_components(comps)
    roles = {c.id: c.role for c in ordered}
    if all(role == "cyclic" for role in roles.values()):
        rmap = build_first_return_map(series)
    else:
        rmap = build_partial_return_map(
            series,
            roles,
            max_segment_crossings=ctx.cfg.map.max_segment_crossings,
            metrics=ctx.telemetry,
        )
    counts = transition_matrix(rmap, [c.id for c in ordered])
    support = counts.support()
    expected, mismatch = _support_notes(ctx.cfg, support)
    result = StageResult(inputs=[comps_path, series_path])
    map_csv = ctx.out_dir / "return_map.csv"
    write_map_csv(rmap, map_csv)
    result.artifacts.append(map_csv)
    result.artifacts.extend(write_gnuplot_files(rmap, ctx.out_dir))
    transitions = ctx.out_dir / "transitions.json"
    write_json(
        transitions,
        {
            **counts.to_dict(),
            "support": sorted(f"{a}->{b}" for a, b in support),
            "expected_support": expected,
            "notes": [*rmap.notes, *mismatch],
        },
    )
    mechanisms = ctx.out_dir / "mechanisms.json"
    write_json(mechanisms, _mechanisms(ctx.cfg, rmap, roles))
    result.artifacts.extend([transitions, mechanisms])
    result.summary = {"pairs": len(rmap), "support_ok": not mismatch}
    return result


def _partition(
    ctx: RunContext, comp: SectionComponent, found: dict[int, list[PeriodicOrbit]]
) -> SymbolPartition:
    part = ctx.cfg.partition
    if part.breakpoints is not None:
        return partition_symbols(comp.slot, part.breakpoints, part.symbols, component_id=comp.id)
    p1 = dominant_orbit(found.get(1, []))
    p2 = dominant_orbit(found.get(2, []))
    if p1 is None or p2 is None:
        raise SeriesError(
            "default partition needs a period-1 and a period-2 orbit; "
            "set partition.breakpoints or include periods 1 and 2"
        )
    return default_partition(p1, p2, comp.slot, symbols=part.symbols, component_id=comp.id)


def cmd_orbits(ctx: RunContext) -> StageResult:
    comps, comps_path = _map_components(ctx)
    map_path = _require(ctx.out_dir, "return_map.csv", "map")
    roles = {c.id: c.role for c in comps}
    rmap = read_map_csv(map_path, roles)
    comp = _pick_component(comps, ctx.cfg.partition.component)
    found = {
        int(k): extract_periodic_orbits(rmap, int(k), ctx.cfg.map.tol)
        for k in sorted(set(ctx.cfg.map.periods))
    }
    partition = _partition(ctx, comp, found)
    single = rmap.components() == [comp.id]
    orbits = [
        relabel_orbit(o, partition) if single else o
        for k in sorted(found)
        for o in sorted(found[k], key=lambda o: (-o.support, o.residual))
    ]
    orbits_path = ctx.out_dir / "orbits.json"
    partition_path = ctx.out_dir / "partition.json"
    write_orbits_json(orbits, orbits_path, rmap)
    write_partition_json(partition, partition_path)
    return StageResult(
        artifacts=[orbits_path, partition_path],
        inputs=[comps_path, map_path],
        summary={
            "orbits": len(orbits),
            "dominant": {
                str(o.period): o.symbol_word
                for o in (dominant_orbit([x for x in orbits if x.period == k]) for k in found)
                if o is not None
            },
        },
    )


def _uav_inputs(ctx: RunContext) -> tuple[SectionComponent, SymbolPartition, list[Path]]:
    comps, comps_path = _map_components(ctx)
    partition_path = _require(ctx.out_dir, "partition.json", "orbits")
    partition = read_partition_json(partition_path)
    comp = _pick_component(comps, partition.component_id or ctx.cfg.partition.component)
    return comp, partition, [comps_path, partition_path]


def cmd_traces(ctx: RunContext) -> StageResult:
    cfg = ctx.cfg
    m = cfg.mobility
    result = StageResult()
    if m.kind == "random_walk":
        uav_cfg = build_uav_config(cfg)

        def walk(agent_id: int) -> AgentTrace:
            return random_walk_trace(
                uav_cfg,
                cfg.seed,
                m.duration,
                moves=m.max_moves,
                agent_id=agent_id,
                metrics=ctx.telemetry,
            )

        traces = _run_agents(ctx, walk, m.agents)
    elif m.kind == "uav":
        system = _system(ctx)
        comp, partition, result.inputs = _uav_inputs(ctx)
        uav_cfg = build_uav_config(cfg)
        reference = _reference(ctx, system)

        def fly(agent_id: int) -> AgentTrace:
            return generate_uav_trace(
                system,
                comp,
                partition,
                uav_cfg,
                reference=reference,
                dt=cfg.integrator.dt,
                duration=m.duration,
                max_moves=m.max_moves,
                seed=cfg.seed,
                ic_radius=m.ic_radius,
                chunk_steps=cfg.integrator.chunk_steps,
                agent_id=agent_id,
                metrics=ctx.telemetry,
            )

        traces = _run_agents(ctx, fly, m.agents)
    else:
        system = _system(ctx)
        comps, comps_path = _map_components(ctx)
        result.inputs = [comps_path]
        traces = generate_scenario_traces(
            m.agents,
            system,
            _ordered_components(comps),
            build_geometry(cfg),
            cfg.seed,
            build_scenario_run(cfg, _reference(ctx, system)),
            jobs=cfg.jobs,
            metrics=ctx.telemetry,
        )
    csv_path = ctx.out_dir / "traces.csv"
    json_path = ctx.out_dir / "traces.json"
    ns2_path = ctx.out_dir / "traces.ns2"
    write_traces_csv(traces, csv_path)
    write_traces_json(traces, json_path)
    write_ns2(traces, ns2_path)
    result.artifacts = [csv_path, json_path, ns2_path]
    result.summary = {"kind": m.kind, "agents": len(traces)}
    if m.kind == "scenario":
        result.summary["grammar_ok"] = sum(1 for t in traces if event_grammar_ok(t))
        result.summary["truncated"] = sum(1 for t in traces if t.truncated)
    return result


def cmd_coverage(ctx: RunContext) -> StageResult:
    cfg = ctx.cfg
    cov = cfg.metrics.coverage
    system = _system(ctx)
    comp, partition, inputs = _uav_inputs(ctx)
    comparison = compare_coverage(
        system,
        comp,
        partition,
        build_uav_config(cfg),
        reference=_reference(ctx, system),
        seeds=cov.seeds,
        moves=cov.moves,
        dt=cfg.integrator.dt,
        cells=cov.cells,
        sensing_radius=cov.sensing_radius,
        ic_radius=cfg.mobility.ic_radius,
        jobs=cfg.jobs,
        metrics=ctx.telemetry,
    )
    summary = comparison.summary()
    summary["chaotic_not_worse"] = summary["chaotic"]["mean"] >= summary["random_walk"]["mean"]
    csv_path = ctx.out_dir / "coverage.csv"
    json_path = ctx.out_dir / "coverage_summary.json"
    write_coverage_csv(comparison, csv_path)
    write_json(json_path, summary)
    return StageResult(
        artifacts=[csv_path, json_path],
        inputs=inputs,
        summary={
            "chaotic": summary["chaotic"]["mean"],
            "random_walk": summary["random_walk"]["mean"],
        },
    )


def cmd_lle(ctx: RunContext) -> StageResult:
    lle = ctx.cfg.metrics.lle
    system = build_system(ctx.cfg, lle.params)
    s0 = lle.initial_state if lle.initial_state is not None else initial_state(ctx.cfg, system)
    estimate = lle_benettin(
        system,
        s0,
        ctx.cfg.integrator.dt,
        lle.span,
        lle.renorm_interval,
        lle.d0,
        transient=lle.transient,
    )
    path = ctx.out_dir / "lle.json"
    write_json(path, {"system": system.describe(), **estimate.to_dict()})
    return StageResult(artifacts=[path], summary={"lambda1": estimate.lambda1})


def cmd_bifurcation(ctx: RunContext) -> StageResult:
    bif = ctx.cfg.metrics.bifurcation
    system = _system(ctx)
    comp = _pick_component(build_components(ctx.cfg, system), bif.component)
    diagram = bifurcation_scan(
        system,
        bif.param,
        bif.grid(),
        comp,
        s0=initial_state(ctx.cfg, system),
        dt=ctx.cfg.integrator.dt,
        transient_steps=bif.transient_steps,
        steps=bif.steps,
        n_last=bif.n_last,
        jobs=ctx.cfg.jobs,
    )
    csv_path = ctx.out_dir / "bifurcation.csv"
    json_path = ctx.out_dir / "bifurcation_summary.json"
    write_bifurcation_csv(diagram, csv_path)
    write_json(
        json_path,
        {
            "param": diagram.param_name,
            "component": comp.id,
            "columns": [
                {"value": v, "crossings": int(col.shape[0]), "distinct": distinct_values(col)}
                for v, col in zip(diagram.param_values, diagram.columns)
            ],
        },
    )
    return StageResult(artifacts=[csv_path, json_path], summary={"values": len(diagram)})


COMMANDS: dict[str, Callable[[RunContext], StageResult]] = {
    "integrate": cmd_integrate,
    "section": cmd_section,
    "map": cmd_map,
    "orbits": cmd_orbits,
    "traces": cmd_traces,
    "coverage": cmd_coverage,
    "lle": cmd_lle,
    "bifurcation": cmd_bifurcation,
}


# --------------------------------------------------------------------------- runs and manifest


def _hashes(paths: Sequence[Path], out_dir: Path) -> dict[str, str]:
    return {str(p.relative_to(out_dir)): sha256_file(p) for p in paths}


def _read_manifest(path: Path) -> dict[str, Any]:
    if path.is_file():
        data = read_json(path)
        if isinstance(data, dict) and isinstance(data.get("runs"), dict):
            return data
    return {"runs": {}}


def run_command(command: str, cfg: ExperimentConfig, out_dir: Path) -> dict[str, Any]:
    """Run one stage into ``out_dir`` and record it in the directory's manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    telemetry = RunTelemetry()
    result = COMMANDS[command](RunContext(cfg=cfg, out_dir=out_dir, telemetry=telemetry))
    resolved = out_dir / RESOLVED_CONFIG
    dump_resolved(cfg, resolved)
    prom = out_dir / METRICS_FILE
    telemetry.write(prom)
    config = resolved_dict(cfg)
    config.pop("output_dir", None)
    entry = {
        "command": command,
        "config_sha256": config_hash(cfg),
        "config": config,
        "seed": cfg.seed,
        "inputs": _hashes(result.inputs, out_dir),
        "artifacts": _hashes([*result.artifacts, resolved, prom], out_dir),
        "summary": result.summary,
    }
    manifest_path = out_dir / MANIFEST
    manifest = _read_manifest(manifest_path)
    manifest.update(tool=TOOL_NAME, version=TOOL_VERSION, schema_version=SCHEMA_VERSION)
    manifest["runs"][command] = entry
    write_json(manifest_path, manifest)
    _LOG.info(
        "command_done",
        extra={"command": command, "artifacts": len(entry["artifacts"]), "out": str(out_dir)},
    )
    return entry


def replay(manifest_path: Path, target: Path, commands: Sequence[str] | None = None) -> bool:
    """Re-run recorded stages into ``target`` and compare every artifact hash."""
    if not manifest_path.is_file():
        raise MissingArtifactError(str(manifest_path), "any pipeline subcommand")
    manifest = _read_manifest(manifest_path)
    runs = manifest["runs"]
    source_dir = manifest_path.parent
    selected = [c for c in COMMANDS if c in runs and (not commands or c in commands)]
    if commands:
        unknown = sorted(set(commands) - set(runs))
        if unknown:
            raise ConfigError(f"manifest has no run for {unknown}")
    if source_dir.resolve() == target.resolve():
        raise ConfigError("replay target must differ from the manifest directory")
    target.mkdir(parents=True, exist_ok=True)
    identical = True
    for command in selected:
        recorded = runs[command]
        for name, digest in recorded.get("inputs", {}).items():
            dst = target / name
            if dst.is_file():
                continue
            src = source_dir / name
            if not src.is_file():
                raise MissingArtifactError(str(src), command)
            if sha256_file(src) != digest:
                print(f"{command}: input {name} changed since it was recorded")
                identical = False
            shutil.copyfile(src, dst)
        cfg = config_from_mapping(recorded["config"], overrides={"out": str(target)})
        entry = run_command(command, cfg, target)
        for name, digest in sorted(recorded["artifacts"].items()):
            got = entry["artifacts"].get(name)
            if got != digest:
                print(f"{command}: {name} differs")
                identical = False
        for name in sorted(set(entry["artifacts"]) - set(recorded["artifacts"])):
            print(f"{command}: unexpected artifact {name}")
            identical = False
    return identical


# --------------------------------------------------------------------------- argv


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="Experiment YAML config")
    parser.add_argument("--out", help="Output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="Override seed")
    parser.add_argument("--agents", type=int, help="Override mobility.agents")
    parser.add_argument("--jobs", type=int, help="Worker threads for agents and sweeps")
    parser.add_argument(
        "--set",
        dest="sets",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any config key, e.g. --set integrator.dt=0.005 (repeatable)",
    )


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME, description="Chaotic dynamics to mobility pipeline"
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"{TOOL_NAME} {TOOL_VERSION} (config schema {SCHEMA_VERSION})",
    )
    parser.add_argument(
        "--log-level",
        default=os.getenv(LOG_LEVEL_ENV, "WARNING"),
        help=f"Logging level (default from {LOG_LEVEL_ENV} or WARNING)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "integrate": "Integrate the flow and write the trajectory",
        "section": "Calibrate section components and extract the rho series",
        "map": "Build the (partial) return map, transitions and mechanisms",
        "orbits": "Extract periodic orbits and the symbol partition",
        "traces": "Generate mobility traces (uav, scenario or random_walk)",
        "coverage": "Compare chaotic UAV coverage against a random walk",
        "lle": "Estimate the largest Lyapunov exponent",
        "bifurcation": "Sweep a parameter and record section values",
    }
    for name, text in helps.items():
        _add_config_flags(sub.add_parser(name, help=text))
    rp = sub.add_parser("replay", help="Re-run a manifest and compare artifact hashes")
    rp.add_argument("--manifest", required=True, help="manifest.json of an earlier run")
    rp.add_argument("--out", required=True, help="Target directory for the rerun")
    rp.add_argument(
        "--command",
        dest="commands",
        action="append",
        choices=sorted(COMMANDS),
        help="Replay only this stage (repeatable); default replays every recorded stage",
    )
    return parser.parse_args(argv)


def _configure_logging(level: str) -> None:
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    logging.basicConfig(level=numeric, format="%(levelname)s %(name)s %(message)s")
    logging.getLogger().setLevel(numeric)


def _load(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {"seed": args.seed, "agents": args.agents, "jobs": args.jobs, "out": args.out}
    return load_config(Path(args.config), sets=args.sets, overrides=overrides)


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    _configure_logging(args.log_level)
    try:
        if args.command == "replay":
            same = replay(Path(args.manifest), Path(args.out), args.commands)
            print("replay identical" if same else "replay differs")
            return EXIT_OK if same else EXIT_NUMERICAL
        cfg = _load(args)
        out_dir = Path(cfg.output_dir)
        entry = run_command(args.command, cfg, out_dir)
    except NumericalError as exc:
        print(f"{TOOL_NAME} {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ChaosMobError as exc:
        print(f"{TOOL_NAME} {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"Wrote {len(entry['artifacts'])} artifacts to {out_dir} ({args.command})")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
