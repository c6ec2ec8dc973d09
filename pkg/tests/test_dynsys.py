import math
from pathlib import Path

import numpy as np
import pytest

from chaos_mobility.dynsys import IntegratorConfig
from chaos_mobility.dynsys import Trajectory
from chaos_mobility.dynsys import derivative
from chaos_mobility.dynsys import fixed_points
from chaos_mobility.dynsys import integrate
from chaos_mobility.dynsys import known_systems
from chaos_mobility.dynsys import load_trajectory_npz
from chaos_mobility.dynsys import make_system
from chaos_mobility.dynsys import nearest_fixed_point
from chaos_mobility.dynsys import rk4_step
from chaos_mobility.dynsys import save_trajectory_npz
from chaos_mobility.dynsys import separation_log_sum
from chaos_mobility.dynsys import write_trajectory_csv
from chaos_mobility.errors import ConfigError
from chaos_mobility.errors import DimensionError
from chaos_mobility.errors import DivergenceError
from chaos_mobility.errors import StageOverflowError


def test_registry_and_defaults() -> None:
    assert known_systems() == ["linear_decay", "lorenz", "rossler"]
    r = make_system("Rossler")
    assert r.params == (0.1775, 0.215, 5.995)
    assert r.coord_index("y") == 1
    assert r.coord_index(2) == 2
    lz = make_system("lorenz", {"R": 28.0})
    assert lz.param("R") == 28.0
    assert lz.param("beta") == pytest.approx(8.0 / 3.0)
    assert make_system("linear_decay", dim=4).dim == 4


@pytest.mark.parametrize(
    "name, params, exc",
    [
        ("duffing", None, ConfigError),
        ("rossler", {"d": 1.0}, ConfigError),
        ("rossler", {"a": float("nan")}, ConfigError),
    ],
)
def test_make_system_rejects(name, params, exc) -> None:
    with pytest.raises(exc):
        make_system(name, params)


def test_with_params_returns_new_system() -> None:
    r = make_system("rossler")
    swept = r.with_params(c=2.5)
    assert swept.param("c") == 2.5
    assert r.param("c") == 5.995
    with pytest.raises(ConfigError):
        r.with_params(q=1.0)


def test_derivative_examples() -> None:
    lz = make_system("lorenz")
    assert derivative(lz, [0.0, 0.0, 0.0]).tolist() == [0.0, 0.0, 0.0]
    np.testing.assert_allclose(derivative(lz, [1.0, 2.0, 3.0]), [10.0, 65.0, -6.0])
    r = make_system("rossler")
    np.testing.assert_allclose(derivative(r, [0.0, 0.0, 0.0]), [0.0, 0.0, 0.215])


def test_derivative_dimension_mismatch() -> None:
    with pytest.raises(DimensionError):
        derivative(make_system("lorenz"), [1.0, 2.0])


def test_rk4_step_linear_decay_matches_taylor_polynomial() -> None:
    sys_ = make_system("linear_decay", dim=1)
    h = 0.1
    expected = 1.0 - h + h**2 / 2.0 - h**3 / 6.0 + h**4 / 24.0
    assert rk4_step(sys_, [1.0], h)[0] == pytest.approx(expected, rel=1e-14)


def test_rk4_step_rejects_bad_dt() -> None:
    with pytest.raises(ValueError):
        rk4_step(make_system("lorenz"), [1.0, 1.0, 1.0], 0.0)
    with pytest.raises(ValueError):
        rk4_step(make_system("lorenz"), [1.0, 1.0, 1.0], -0.01)


def test_rk4_step_reports_overflowing_stage() -> None:
    with pytest.raises(StageOverflowError) as info:
        rk4_step(make_system("lorenz"), [1e200, 1e200, 1e200], 0.01)
    assert info.value.stage == 1


def test_rk4_local_error_is_fifth_order() -> None:
    lz = make_system("lorenz", {"R": 28.0})
    s = np.array([1.0, 1.0, 20.0])

    def gap(dt: float) -> float:
        full = rk4_step(lz, s, dt)
        half = rk4_step(lz, rk4_step(lz, s, dt / 2.0), dt / 2.0)
        return float(np.linalg.norm(full - half))

    ratio = gap(0.01) / gap(0.005)
    assert 24.0 <= ratio <= 40.0


def test_rk4_global_convergence_ratio() -> None:
    lz = make_system("lorenz", {"R": 28.0})
    s0 = [1.0, 1.0, 1.0]

    def final(dt: float) -> np.ndarray:
        steps = int(round(1.0 / dt))
        return integrate(lz, s0, IntegratorConfig(dt=dt, steps=steps + 1)).final_state

    # dt = 0.01 is outside the asymptotic regime for this orbit
    ref = final(0.002 / 8.0)
    err_coarse = np.linalg.norm(final(0.002) - ref)
    err_fine = np.linalg.norm(final(0.001) - ref)
    assert 12.0 <= err_coarse / err_fine <= 20.0


def test_integrate_records_after_transient() -> None:
    sys_ = make_system("linear_decay", dim=2)
    traj = integrate(sys_, [1.0, 2.0], IntegratorConfig(dt=0.01, steps=101, transient_steps=50))
    assert len(traj) == 101
    assert traj.t0 == pytest.approx(0.5)
    assert traj.t_end == pytest.approx(1.5)
    np.testing.assert_allclose(traj.samples[0], [math.exp(-0.5), 2.0 * math.exp(-0.5)], rtol=1e-9)
    np.testing.assert_allclose(traj.final_state, [math.exp(-1.5), 2.0 * math.exp(-1.5)], rtol=1e-9)


def test_integrate_without_transient_starts_at_initial_state() -> None:
    lz = make_system("lorenz")
    traj = integrate(lz, [1.0, 2.0, 3.0], IntegratorConfig(dt=0.01, steps=3))
    assert traj.samples[0].tolist() == [1.0, 2.0, 3.0]
    np.testing.assert_allclose(traj.samples[1], rk4_step(lz, [1.0, 2.0, 3.0], 0.01))


def test_trajectory_samples_are_read_only(rossler_traj) -> None:
    with pytest.raises(ValueError):
        rossler_traj.samples[0, 0] = 1.0


def test_integrate_dt_guard_for_builtin_systems() -> None:
    with pytest.raises(ConfigError):
        integrate(make_system("rossler"), [1.0, 1.0, 0.0], IntegratorConfig(dt=0.2, steps=10))


def test_integrate_raises_on_divergence() -> None:
    grow = make_system("linear_decay", {"k": -50.0}, dim=2)
    with pytest.raises(DivergenceError) as info:
        integrate(grow, [1.0, 1.0], IntegratorConfig(dt=0.01, steps=1000))
    assert info.value.step > 0


def test_integrator_config_validation() -> None:
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(steps=0)
    with pytest.raises(ConfigError):
        IntegratorConfig(transient_steps=-1)


def test_lorenz_fixed_points() -> None:
    fps = fixed_points(make_system("lorenz"))
    assert len(fps) == 3
    np.testing.assert_allclose(fps[0], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(fps[1], [13.5647, 13.5647, 69.0], atol=1e-4)
    np.testing.assert_allclose(fps[2], [-13.5647, -13.5647, 69.0], atol=1e-4)
    assert len(fixed_points(make_system("lorenz", {"R": 1.0}))) == 1


def test_rossler_fixed_points_inner_first() -> None:
    fps = fixed_points(make_system("rossler"))
    assert len(fps) == 2
    np.testing.assert_allclose(fps[0], [0.00637, -0.0359, 0.0359], atol=1e-4)
    assert abs(fps[1][2]) > abs(fps[0][2])


def test_rossler_complex_roots_are_dropped_with_note() -> None:
    fps = fixed_points(make_system("rossler", {"a": 1.0, "b": 10.0, "c": 1.0}))
    assert len(fps) == 0
    assert fps.complex_dropped
    assert fps.notes[0]["code"] == "W_COMPLEX_ROOTS"


def test_nearest_fixed_point_picks_closest_to_plane() -> None:
    lz = make_system("lorenz")
    fp = nearest_fixed_point(lz, 0, 10.0)
    assert fp is not None and fp[0] > 13.0
    assert nearest_fixed_point(lz, 0, -12.0)[0] < -13.0


def test_trajectory_exports(tmp_path: Path, rossler) -> None:
    traj = integrate(rossler, [1.0, 1.0, 0.0], IntegratorConfig(dt=0.01, steps=20))
    csv_path = tmp_path / "trajectory.csv"
    write_trajectory_csv(traj, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,x0,x1,x2"
    assert len(lines) == 21

    a = tmp_path / "a.npz"
    b = tmp_path / "b.npz"
    save_trajectory_npz(traj, a)
    save_trajectory_npz(traj, b)
    assert a.read_bytes() == b.read_bytes()
    back = load_trajectory_npz(a, rossler)
    assert back.system is rossler
    assert back.t0 == traj.t0 and back.dt == traj.dt
    assert np.array_equal(back.samples, traj.samples)


def test_empty_trajectory() -> None:
    empty = Trajectory.empty(3)
    assert len(empty) == 0
    assert empty.dim == 3


def test_separation_log_sum_contracts_linear_flow() -> None:
    decay = make_system("linear_decay", {"k": 0.5}, dim=2)
    total = separation_log_sum(
        decay,
        [1.0, -1.0],
        0.01,
        transient_steps=0,
        renormalizations=10,
        steps_per_renorm=100,
        d0=1e-6,
    )
    assert total == pytest.approx(-0.5 * 10 * 100 * 0.01, abs=1e-4)
