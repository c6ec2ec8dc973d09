"""Poincare section detection, calibration, normalization and the tangency guard."""

import numpy as np
import pytest
from conftest import lorenz_components

from chaos_mobility.dynsys import IntegratorConfig
from chaos_mobility.dynsys import Trajectory
from chaos_mobility.dynsys import derivative
from chaos_mobility.dynsys import fixed_points
from chaos_mobility.dynsys import integrate
from chaos_mobility.errors import CalibrationError
from chaos_mobility.errors import ConfigError
from chaos_mobility.errors import SeriesError
from chaos_mobility.numerics import PLANE_TOL
from chaos_mobility.section import RawCrossing
from chaos_mobility.section import SectionComponent
from chaos_mobility.section import build_rho_series
from chaos_mobility.section import calibrate_component
from chaos_mobility.section import detect_crossings
from chaos_mobility.section import detect_raw_crossings
from chaos_mobility.section import iter_crossings
from chaos_mobility.section import merge_crossings
from chaos_mobility.section import normalize_rho
from chaos_mobility.section import read_components_json
from chaos_mobility.section import read_rho_json
from chaos_mobility.section import rho_series_from_dict
from chaos_mobility.section import validate_components
from chaos_mobility.section import write_components_json
from chaos_mobility.section import write_rho_csv
from chaos_mobility.section import write_rho_json


def _line(values: list[float], dt: float = 0.1) -> Trajectory:
    return Trajectory(t0=0.0, dt=dt, samples=np.array(values, dtype=float).reshape(-1, 1))


def _raw(cid: str, t: float, value: float = 0.0) -> RawCrossing:
    return RawCrossing(component_id=cid, time=t, state=np.array([0.0, value, 0.0]))


def test_linear_interpolation_midpoint() -> None:
    comp = SectionComponent("A", 1, coord=0, level=0.0, direction=1, norm_coord=0)
    raws = detect_raw_crossings(_line([-0.1, 0.1]), comp)
    assert len(raws) == 1
    assert raws[0].time == pytest.approx(0.05)
    assert raws[0].state[0] == 0.0


def test_direction_filter() -> None:
    down = SectionComponent("A", 1, coord=0, level=0.0, direction=-1, norm_coord=0)
    assert detect_raw_crossings(_line([-0.1, 0.1]), down) == []
    assert len(detect_raw_crossings(_line([0.1, -0.1]), down)) == 1


def test_touching_sample_counts_once() -> None:
    comp = SectionComponent("A", 1, coord=0, level=0.0, direction=1, norm_coord=0)
    raws = detect_raw_crossings(_line([-1.0, 0.0, 1.0]), comp)
    assert [r.time for r in raws] == [pytest.approx(0.1)]


@pytest.mark.parametrize(
    "value, orientation, expected",
    [
        (0.0, "ascending", 1.5),
        (-20.0, "ascending", 1.0),
        (20.0, "ascending", 2.0),
        (-20.0, "descending", 2.0),
        (10.0, "descending", 1.25),
    ],
)
def test_normalize_into_slot(value, orientation, expected) -> None:
    comp = SectionComponent(
        "B", 2, 0, 10.0, -1, "transitional", 1, norm_lo=-20.0, norm_hi=20.0, orientation=orientation
    )
    assert normalize_rho(_raw("B", 1.0, value), comp) == pytest.approx(expected)


def test_out_of_calibration_clamps_and_counts(metrics) -> None:
    comp = SectionComponent("B", 2, 0, 10.0, -1, "transitional", 1, -20.0, 20.0, "ascending")
    assert normalize_rho(_raw("B", 1.0, 30.0), comp, metrics=metrics) == 2.0
    assert metrics.total("out_of_calibration", component="B") == 1.0
    # within the 5% tolerance: clamped silently
    assert normalize_rho(_raw("B", 1.0, 20.5), comp, metrics=metrics) == 2.0
    assert metrics.total("out_of_calibration") == 1.0


def test_calibration_needs_ten_crossings() -> None:
    comp = SectionComponent("A", 1, 0, 0.0)
    with pytest.raises(CalibrationError):
        calibrate_component([_raw("A", float(t), float(t)) for t in range(9)], comp)


def test_calibration_margin_and_default_orientation() -> None:
    comp = SectionComponent("A", 1, 0, 0.0)
    cal = calibrate_component([_raw("A", float(t), float(t)) for t in range(10)], comp)
    assert cal.norm_lo == pytest.approx(-0.09)
    assert cal.norm_hi == pytest.approx(9.09)
    assert cal.orientation == "ascending"
    assert cal.calibrated


def test_calibration_rejects_constant_values() -> None:
    comp = SectionComponent("A", 1, 0, 0.0)
    with pytest.raises(CalibrationError):
        calibrate_component([_raw("A", float(t), 1.0) for t in range(12)], comp)


@pytest.mark.parametrize(
    "comps",
    [
        [SectionComponent("A", 1, 0, 0.0), SectionComponent("B", 3, 0, 1.0)],
        [SectionComponent("A", 1, 0, 0.0), SectionComponent("A", 2, 0, 1.0)],
        [SectionComponent("A", 1, 0, 0.0), SectionComponent("B", 2, 0, 0.0)],
    ],
)
def test_validate_components_rejects(comps) -> None:
    with pytest.raises(ConfigError):
        validate_components(comps)


def test_component_field_validation() -> None:
    with pytest.raises(ConfigError):
        SectionComponent("A", 1, 0, 0.0, direction=0)
    with pytest.raises(ConfigError):
        SectionComponent("A", 1, 0, 0.0, role="middle")
    with pytest.raises(ConfigError):
        SectionComponent("A", 1, 0, 0.0, norm_lo=1.0)


def test_rossler_crossings_lie_on_plane(rossler, rossler_traj, rossler_component) -> None:
    assert rossler_component.orientation == "descending"
    crossings = detect_crossings(rossler_traj, rossler_component)
    assert len(crossings) > 50
    for c in crossings:
        assert abs(c.state[0]) <= PLANE_TOL
        assert derivative(rossler, c.state)[0] > 0.0
        assert 0.0 <= c.rho <= 1.0


def test_polished_crossing_stays_near_chord(rossler_traj, rossler_component) -> None:
    # no system attached: chord interpolation only
    chord_traj = Trajectory(t0=rossler_traj.t0, dt=rossler_traj.dt, samples=rossler_traj.samples)
    polished = detect_raw_crossings(rossler_traj, rossler_component)[:5]
    linear = detect_raw_crossings(chord_traj, rossler_component)[:5]
    assert len(polished) == len(linear) == 5
    for p, lin in zip(polished, linear):
        assert p.time == pytest.approx(lin.time, abs=rossler_traj.dt)
        assert abs(p.state[1] - lin.state[1]) < 1e-3


def test_lorenz_series_slots_and_order(lorenz_traj, lorenz_calibrated, metrics) -> None:
    series = build_rho_series(lorenz_traj, lorenz_calibrated, agent_id=0, metrics=metrics)
    assert len(series) > 100
    assert set(series.component_ids) == {"A", "B", "C"}
    times = series.times
    assert np.all(np.diff(times) > 0)
    slots = {c.id: c.slot for c in lorenz_calibrated}
    for c in series:
        lo, hi = slots[c.component_id]
        assert lo <= c.rho <= hi
    assert metrics.total("crossings_detected") >= len(series)


def test_lorenz_first_crossing_is_initial_component(lorenz) -> None:
    c_minus = fixed_points(lorenz)[2]
    start = c_minus + np.array([1.0, 1.0, 0.0])
    traj = integrate(lorenz, start, IntegratorConfig(dt=0.005, steps=100_000))
    firsts = {}
    for comp in lorenz_components():
        raws = detect_raw_crossings(traj, comp)
        if raws:
            firsts[comp.id] = raws[0].time
    assert min(firsts, key=firsts.get) == "A"


def test_uncalibrated_series_raises(lorenz_traj) -> None:
    with pytest.raises(CalibrationError):
        build_rho_series(lorenz_traj, lorenz_components())


def test_empty_trajectory_gives_empty_series(lorenz_calibrated) -> None:
    series = build_rho_series(Trajectory.empty(3), lorenz_calibrated)
    assert len(series) == 0


def test_tangency_guard_is_per_plane(metrics) -> None:
    a = SectionComponent("A", 1, 0, 0.0, 1, norm_lo=-1.0, norm_hi=1.0, orientation="ascending")
    c = SectionComponent("C", 2, 0, 0.0, -1, norm_lo=-1.0, norm_hi=1.0, orientation="ascending")
    b = SectionComponent("B", 3, 0, 5.0, -1, norm_lo=-1.0, norm_hi=1.0, orientation="ascending")
    raws = {
        "A": [_raw("A", 1.0)],
        "C": [_raw("C", 1.05)],
        "B": [_raw("B", 1.08)],
    }
    kept, notes = merge_crossings(raws, [a, c, b], dt=0.01, metrics=metrics)
    assert [r.component_id for r, _ in kept] == ["A", "B"]
    assert notes[0]["code"] == "W_TANGENCY_DROP"
    assert notes[0]["data"] == {"component": "C", "dropped": 1}
    assert metrics.total("tangency_drops", component="C") == 1.0


def test_equal_times_keep_lower_index() -> None:
    a = SectionComponent("A", 1, 0, 0.0, 1, norm_lo=-1.0, norm_hi=1.0, orientation="ascending")
    b = SectionComponent("B", 2, 1, 0.0, 1, norm_lo=-1.0, norm_hi=1.0, orientation="ascending")
    kept, _ = merge_crossings({"B": [_raw("B", 2.0)], "A": [_raw("A", 2.0)]}, [a, b], dt=0.01)
    assert [r.component_id for r, _ in kept] == ["A"]


def test_streaming_matches_batch(rossler, rossler_component) -> None:
    s0 = [1.0, 1.0, 0.0]
    batch_traj = integrate(
        rossler, s0, IntegratorConfig(dt=0.01, steps=30_001, transient_steps=1_000)
    )
    batch = build_rho_series(batch_traj, [rossler_component])
    streamed = list(
        iter_crossings(
            rossler,
            s0,
            0.01,
            [rossler_component],
            chunk_steps=7_000,
            max_steps=30_000,
            transient_steps=1_000,
        )
    )
    assert len(streamed) == len(batch)
    np.testing.assert_allclose([c.rho for c in streamed], batch.rhos, rtol=0, atol=1e-12)
    np.testing.assert_allclose([c.time for c in streamed], batch.times, rtol=0, atol=1e-9)


def test_series_exports(tmp_path, lorenz_traj, lorenz_calibrated) -> None:
    series = build_rho_series(lorenz_traj, lorenz_calibrated, agent_id=3)
    write_rho_csv(series, tmp_path / "rho.csv")
    header = (tmp_path / "rho.csv").read_text().splitlines()[0]
    assert header == "n,component,t,rho"

    write_rho_json(series, tmp_path / "rho.json")
    back = read_rho_json(tmp_path / "rho.json")
    assert back.agent_id == 3
    assert back.component_ids == series.component_ids
    np.testing.assert_array_equal(back.rhos, series.rhos)

    write_components_json(lorenz_calibrated, tmp_path / "components.json")
    assert read_components_json(tmp_path / "components.json") == list(lorenz_calibrated)


def test_series_from_dict_rejects_unordered_times() -> None:
    item = {"component": "A", "time": 1.0, "rho": 0.5, "state": [0.0, 0.0, 0.0]}
    with pytest.raises(SeriesError):
        rho_series_from_dict({"crossings": [item, dict(item)]})
