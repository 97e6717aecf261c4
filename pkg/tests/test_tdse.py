import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp, trapezoid

from quietlaser.constants import (
    DEFAULT_CONSTANTS,
    BoxGeometry,
    PhysicalConstants,
    dipole_element,
    energy_level,
    voltage_for_rabi,
    wavefunction,
)
from quietlaser.tdse import (
    SpatialGrid,
    WaveFunction,
    classical_trajectory,
    eigenstates_numeric,
    evolve,
    fit_rabi_frequency,
    ground_state,
    induced_current,
)

UNIT = PhysicalConstants(e=1.0, m=1.0, hbar=1.0, eps0_factor=1.0)
D = 1.0
GEOM = BoxGeometry(D)


def resonant_setup(n_points=255, ratio=0.02, consts=UNIT):
    grid = SpatialGrid(n_points, D)
    energies, vecs = eigenstates_numeric(grid, consts)
    omega = (energies[1] - energies[0]) / consts.hbar
    rabi = ratio * omega
    v = voltage_for_rabi(rabi, GEOM, consts)
    return grid, vecs, omega, rabi, v


def test_discrete_eigenvalues_exact():
    grid = SpatialGrid(200, D)
    energies, vecs = eigenstates_numeric(grid, UNIT, k=3)
    n = np.arange(1, 4)
    exact = (2 - 2 * np.cos(n * math.pi / 201)) / (2 * grid.spacing**2)
    assert np.allclose(energies, exact, rtol=1e-12)
    assert np.allclose(vecs @ vecs.T * grid.spacing, np.eye(3), atol=1e-12)


def test_eigenpairs_converge_to_box_states():
    grid = SpatialGrid(4096, D)
    energies, vecs = eigenstates_numeric(grid, UNIT)
    assert energies[0] == pytest.approx(energy_level(1, GEOM, UNIT), rel=1e-5)
    for j in range(2):
        rms = math.sqrt(np.mean((vecs[j] - wavefunction(j + 1, grid.x, GEOM)) ** 2))
        assert rms < 1e-5
    x12 = np.sum(grid.x * vecs[0] * vecs[1]) * grid.spacing
    assert x12 == pytest.approx(dipole_element(GEOM), rel=1e-5)


def test_eigenvalue_error_is_second_order():
    exact = energy_level(1, GEOM, UNIT)
    errs = [abs(eigenstates_numeric(SpatialGrid(n, D), UNIT)[0][0] - exact) for n in (127, 255, 511)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.02)


def test_stationary_without_drive():
    grid = SpatialGrid(255, D)
    psi = ground_state(grid, UNIT)
    omega = 3 * math.pi**2 / 2
    traj = evolve(psi, 0.0, omega, 50 * 2 * math.pi / omega, 2 * math.pi / omega / 100, UNIT, record_every=50)
    assert np.allclose(traj.p1, 1.0, atol=1e-12)
    assert np.allclose(traj.p2, 0.0, atol=1e-20)
    assert np.allclose(traj.energy, traj.energy[0], rtol=1e-12)


def test_resonant_rabi_flopping():
    grid, _, omega, rabi, v = resonant_setup()
    dt = 2 * math.pi / omega / 200
    traj = evolve(ground_state(grid, UNIT), v, omega, 2 * math.pi / rabi, dt, UNIT, record_every=20)
    assert np.max(np.abs(traj.p2 - np.sin(0.5 * rabi * traj.times) ** 2)) < 0.02
    assert fit_rabi_frequency(traj, rabi) == pytest.approx(rabi, rel=5e-3)
    # population stays in the two lowest levels
    assert np.max(1 - traj.p1 - traj.p2) < 1e-3
    assert np.max(np.abs(traj.norm - 1)) < 1e-10


def test_detuned_drive_barely_excites():
    grid, _, omega, rabi, v = resonant_setup()
    detune = 10 * rabi
    w = omega + detune
    dt = 2 * math.pi / w / 200
    traj = evolve(ground_state(grid, UNIT), v, w, 2 * math.pi / rabi, dt, UNIT, record_every=20)
    bound = rabi**2 / (rabi**2 + detune**2)
    assert traj.p2.max() < 1.5 * bound
    assert traj.p2.max() > 0.5 * bound


def test_time_step_convergence_order():
    grid, _, omega, rabi, v = resonant_setup(n_points=127, ratio=0.05)
    period = 2 * math.pi / omega
    t_end = 0.3 * 2 * math.pi / rabi
    finals = []
    for div in (100, 200, 400, 800):
        dt = period / div
        steps = int(round(t_end / dt))
        traj = evolve(ground_state(grid, UNIT), v, omega, steps * dt, dt, UNIT, record_every=steps)
        finals.append(traj.final.amplitudes)
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    e3 = np.max(np.abs(finals[2] - finals[3]))
    assert e1 / e2 == pytest.approx(4.0, rel=0.15)
    assert e2 / e3 == pytest.approx(4.0, rel=0.15)


def test_energy_balance_and_absorption():
    grid, _, omega, rabi, v = resonant_setup()
    dt = 2 * math.pi / omega / 400
    traj = evolve(ground_state(grid, UNIT), v, omega, math.pi / rabi, dt, UNIT, record_every=1)
    cur = induced_current(traj, GEOM, UNIT)
    work = trapezoid(traj.drive() * cur, traj.times)
    gained = traj.energy[-1] - traj.energy[0]
    # half a Rabi period from the ground state: electron absorbs about one quantum
    assert gained > 0
    assert gained == pytest.approx(omega * UNIT.hbar, rel=0.02)
    assert work == pytest.approx(gained, rel=0.01)


def test_evolve_input_checks(tmp_path):
    grid, _, omega, rabi, v = resonant_setup()
    psi = ground_state(grid, UNIT)
    with pytest.raises(ValueError):
        evolve(psi, v, omega, 1.0, 0.5 * 2 * math.pi / omega, UNIT)
    with pytest.raises(ValueError):
        evolve(WaveFunction(2 * psi.amplitudes, grid), v, omega, 1.0, 1e-3, UNIT)
    traj = evolve(psi, v, omega, 0.05, 1e-3, UNIT)
    path = tmp_path / "traj.csv"
    traj.to_csv(path, induced_current(traj, GEOM, UNIT))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (traj.times.size, 7)


def test_physical_units_resonant_drive_is_weak():
    # at the hydrogen-line box the resonant voltage for a small Rabi frequency is tiny
    geom = BoxGeometry(0.44e-6)
    v = voltage_for_rabi(1e-3 * 2 * math.pi * 1.42e9, geom, DEFAULT_CONSTANTS)
    assert 0 < v < 1e-3


# classical electron


def oracle_classical(x0, p0, v, omega, t_end, d=1.0, m=1.0, e=1.0):
    """Piecewise solve_ivp with directional terminal events at the gap edges and walls."""
    k = e * v / d

    def rhs(t, y, inside):
        return [y[1] / m, k * math.cos(omega * t) if inside else 0.0]

    def leave_gap(t, y, _):
        return d / 2 - abs(y[0])

    def hit_wall(t, y, _):
        return d - abs(y[0])

    def enter_gap(t, y, _):
        return abs(y[0]) - d / 2

    for ev in (leave_gap, hit_wall, enter_gap):
        ev.terminal, ev.direction = True, -1

    t, y = 0.0, np.array([x0, p0], dtype=float)
    inside = abs(x0) < d / 2
    while t < t_end:
        events = [leave_gap] if inside else [hit_wall, enter_gap]
        sol = solve_ivp(rhs, (t, t_end), y, args=(inside,), events=events, method="DOP853",
                        rtol=1e-13, atol=1e-15, max_step=0.01)
        t, y = sol.t[-1], sol.y[:, -1].copy()
        if sol.status != 1:
            break
        if inside:
            inside = False
        elif len(sol.t_events[0]):
            y[0], y[1] = math.copysign(d, y[0]), -y[1]
        else:
            inside = True
    return y


def test_classical_free_motion_conserves_speed():
    tr = classical_trajectory(0.1, 0.7, 0.0, 1.0, 20.0, GEOM, UNIT, dt=0.01)
    assert np.allclose(np.abs(tr.p), 0.7, rtol=1e-14)
    assert np.all(np.abs(tr.x) <= D + 1e-12)
    assert any(kind == "bounce" for _, kind in tr.events)
    assert np.allclose(tr.current, tr.p / UNIT.m * UNIT.e / D)


def test_classical_matches_ode_oracle():
    x0, p0, v, omega, t_end = -0.2, 0.9, 0.6, 2.3, 12.0
    tr = classical_trajectory(x0, p0, v, omega, t_end, GEOM, UNIT, dt=0.05)
    ref = oracle_classical(x0, p0, v, omega, t_end)
    assert tr.x[-1] == pytest.approx(ref[0], abs=1e-8)
    assert tr.p[-1] == pytest.approx(ref[1], abs=1e-8)
    # kinetic energy changes only through work done in the gap
    inside = np.abs(tr.x) < 0.5 * D
    assert len({kind for _, kind in tr.events}) == 3
    assert inside.any() and (~inside).any()


def test_classical_rejects_start_outside():
    with pytest.raises(ValueError):
        classical_trajectory(1.5, 0.0, 0.0, 1.0, 1.0, GEOM, UNIT)
