"""Grid solver for the driven electron in a box, plus the classical electron.

This module checks the two-level reduction from first principles. The
Schrodinger equation is stepped on a uniform Dirichlet grid with the Cayley
(Crank-Nicolson / implicit midpoint) propagator, which is unitary for any
time step. Amplitudes C1, C2 are read off by projecting on the numerical
eigenvectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, curve_fit

from .constants import DEFAULT_CONSTANTS, BoxGeometry, PhysicalConstants

_NORM_DRIFT_MAX = 1e-8


@dataclass(frozen=True)
class SpatialGrid:
    n_points: int
    d: float

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("need at least 3 interior points")
        if not self.d > 0:
            raise ValueError("box width must be positive")

    @property
    def spacing(self) -> float:
        return self.d / (self.n_points + 1)

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.d + self.spacing * np.arange(1, self.n_points + 1)

    @property
    def geometry(self) -> BoxGeometry:
        return BoxGeometry(self.d)


@dataclass
class WaveFunction:
    amplitudes: np.ndarray
    grid: SpatialGrid
    time: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing)


def _kinetic_scale(grid: SpatialGrid, consts: PhysicalConstants) -> float:
    return consts.hbar**2 / (2.0 * consts.m * grid.spacing**2)


def eigenstates_numeric(grid: SpatialGrid, consts: PhysicalConstants = DEFAULT_CONSTANTS, k: int = 2):
    """Lowest ``k`` eigenpairs of the discrete box Hamiltonian.

    Eigenfunctions are normalised to sum |psi|^2 dx = 1 and signed to match
    cos(pi x/d), sin(2 pi x/d), ... (positive slope or value at the centre).
    """
    n = grid.n_points
    diag = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    lam, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
    energies = lam * _kinetic_scale(grid, consts)
    vec = vec.T / math.sqrt(grid.spacing)
    x = grid.x
    for j in range(k):
        ref = np.cos((j + 1) * math.pi * x / grid.d) if j % 2 == 0 else np.sin((j + 1) * math.pi * x / grid.d)
        if np.dot(vec[j], ref) < 0:
            vec[j] = -vec[j]
    return energies, vec


@njit(cache=True)
def _cn_run(psi, x, kin, beta, field, omega, t0, dt, n_steps, record_every, phi1, phi2, h, out):
    """Cayley steps with H(t) = kin * (-1, 2, -1) - field * x cos(omega t).

    ``out`` rows get (c1 re, c1 im, c2 re, c2 im, <x>, norm, <H0>) every
    ``record_every`` steps, starting with the initial state.
    """
    n = psi.size
    rhs = np.empty(n, dtype=np.complex128)
    cp = np.empty(n, dtype=np.complex128)
    off = -1j * beta * kin
    row = 0
    for step in range(n_steps + 1):
        if step % record_every == 0:
            c1 = 0j
            c2 = 0j
            xm = 0.0
            nrm = 0.0
            en = 0.0
            for j in range(n):
                p = psi[j]
                a2 = p.real * p.real + p.imag * p.imag
                c1 += phi1[j] * p
                c2 += phi2[j] * p
                xm += x[j] * a2
                nrm += a2
                hp = 2.0 * kin * p
                if j > 0:
                    hp -= kin * psi[j - 1]
                if j < n - 1:
                    hp -= kin * psi[j + 1]
                en += (p.conjugate() * hp).real
            out[row, 0] = c1.real * h
            out[row, 1] = c1.imag * h
            out[row, 2] = c2.real * h
            out[row, 3] = c2.imag * h
            out[row, 4] = xm * h
            out[row, 5] = nrm * h
            out[row, 6] = en * h
            row += 1
        if step == n_steps:
            break
        tm = t0 + (step + 0.5) * dt
        fc = field * math.cos(omega * tm)
        # right-hand side (1 - i beta H) psi
        for j in range(n):
            hd = 2.0 * kin - fc * x[j]
            v = (1.0 - 1j * beta * hd) * psi[j]
            if j > 0:
                v -= off * psi[j - 1]
            if j < n - 1:
                v -= off * psi[j + 1]
            rhs[j] = v
        # Thomas solve of (1 + i beta H) psi_new = rhs
        b0 = 1.0 + 1j * beta * (2.0 * kin - fc * x[0])
        cp[0] = off / b0
        rhs[0] = rhs[0] / b0
        for j in range(1, n):
            bj = 1.0 + 1j * beta * (2.0 * kin - fc * x[j]) - off * cp[j - 1]
            cp[j] = off / bj
            rhs[j] = (rhs[j] - off * rhs[j - 1]) / bj
        psi[n - 1] = rhs[n - 1]
        for j in range(n - 2, -1, -1):
            psi[j] = rhs[j] - cp[j] * psi[j + 1]
    return row


@dataclass
class TdseTrajectory:
    times: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    x_mean: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    final: WaveFunction
    v: float
    omega: float

    @property
    def p1(self) -> np.ndarray:
        return np.abs(self.c1) ** 2

    @property
    def p2(self) -> np.ndarray:
        return np.abs(self.c2) ** 2

    def drive(self) -> np.ndarray:
        """Instantaneous gap voltage v cos(omega t)."""
        return self.v * np.cos(self.omega * self.times)

    def to_csv(self, path, current=None) -> None:
        if current is None:
            current = np.full(self.times.size, np.nan)
        cols = np.column_stack(
            [self.times, self.c1.real, self.c1.imag, self.c2.real, self.c2.imag, self.x_mean, current]
        )
        np.savetxt(path, cols, delimiter=",", header="t,re_c1,im_c1,re_c2,im_c2,x_mean,current",
                   comments="", fmt="%.17g")


def ground_state(grid: SpatialGrid, consts: PhysicalConstants = DEFAULT_CONSTANTS, level: int = 1) -> WaveFunction:
    _, vec = eigenstates_numeric(grid, consts, k=level)
    return WaveFunction(vec[level - 1].astype(complex), grid)


def evolve(
    psi0: WaveFunction,
    v: float,
    omega: float,
    t_end: float,
    dt: float,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    record_every: int = 1,
    check_dt: bool = True,
) -> TdseTrajectory:
    """Propagate ``psi0`` under the gap voltage v cos(omega t) from t = psi0.time.

    C1, C2 carry the interaction-picture phases exp(i E_n t / hbar) so that
    they are slowly varying near resonance.
    """
    grid = psi0.grid
    if check_dt and omega > 0 and dt > 0.01 * 2 * math.pi / omega:
        raise ValueError("dt must not exceed 1% of the drive period")
    norm0 = psi0.norm()
    if abs(norm0 - 1.0) > 1e-10:
        raise ValueError("initial wavefunction must be normalised")
    n_steps = int(round((t_end - psi0.time) / dt))
    if n_steps < 1:
        raise ValueError("t_end must exceed the initial time by at least one step")
    energies, vec = eigenstates_numeric(grid, consts, k=2)
    kin = _kinetic_scale(grid, consts)
    beta = dt / (2.0 * consts.hbar)
    field = consts.e * v / grid.d
    n_rec = n_steps // record_every + 1
    out = np.empty((n_rec, 7))
    psi = np.array(psi0.amplitudes, dtype=np.complex128)
    rows = _cn_run(psi, grid.x, kin, beta, field, float(omega), float(psi0.time), float(dt), n_steps,
                   int(record_every), vec[0], vec[1], grid.spacing, out)
    out = out[:rows]
    times = psi0.time + dt * record_every * np.arange(rows)
    drift = np.max(np.abs(out[:, 5] - norm0))
    if drift > _NORM_DRIFT_MAX:
        raise RuntimeError(f"norm drifted by {drift:.3g} during propagation")
    w1, w2 = energies / consts.hbar
    c1 = (out[:, 0] + 1j * out[:, 1]) * np.exp(1j * w1 * times)
    c2 = (out[:, 2] + 1j * out[:, 3]) * np.exp(1j * w2 * times)
    final = WaveFunction(psi, grid, psi0.time + n_steps * dt)
    return TdseTrajectory(times, c1, c2, out[:, 4], out[:, 5], out[:, 6], final, float(v), float(omega))


def induced_current(traj: TdseTrajectory, geom: BoxGeometry | SpatialGrid,
                    consts: PhysicalConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Expectation of the induced current, (e/d) d<x>/dt, by central differences."""
    return consts.e / geom.d * np.gradient(traj.x_mean, traj.times)


def fit_rabi_frequency(traj: TdseTrajectory, guess: float) -> float:
    """Least-squares fit of |C2(t)|^2 to sin^2(W t / 2); returns W."""
    t = traj.times - traj.times[0]
    (w,), _ = curve_fit(lambda tt, ww: np.sin(0.5 * ww * tt) ** 2, t, traj.p2, p0=[guess])
    return float(abs(w))


@dataclass
class ClassicalTrajectory:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    current: np.ndarray
    # (time, kind) with kind in {"enter", "exit", "bounce"}
    events: list


def classical_trajectory(
    x0: float,
    p0: float,
    v: float,
    omega: float,
    t_end: float,
    geom: BoxGeometry,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    dt: float | None = None,
) -> ClassicalTrajectory:
    """Classical electron between the anodes, reflected elastically at x = +-d.

    Inside the gap |x| < d/2 the force (e v / d) cos(omega t) depends on time
    only, so position and momentum are integrated in closed form; outside it
    the electron flies freely. Gap crossings are located by root finding and
    the output is sampled every ``dt``.
    """
    d, m = geom.d, consts.m
    k = consts.e * v / d
    if dt is None:
        dt = t_end / 10000
    n = int(math.ceil(t_end / dt))
    ts = np.minimum(dt * np.arange(n + 1), t_end)
    if abs(x0) > d:
        raise ValueError("start position must lie between the walls")

    def p_gap(t, ta, pa):
        if omega == 0:
            return pa + k * (t - ta)
        return pa + k / omega * (math.sin(omega * t) - math.sin(omega * ta))

    def x_gap(t, ta, xa, pa):
        s = t - ta
        if omega == 0:
            return xa + pa * s / m + 0.5 * k * s * s / m
        return (xa + (pa - k / omega * math.sin(omega * ta)) * s / m
                - k / (m * omega**2) * (math.cos(omega * t) - math.cos(omega * ta)))

    xs = np.empty(n + 1)
    ps = np.empty(n + 1)
    xs[0], ps[0] = x0, p0
    events = []
    t, x, p = 0.0, float(x0), float(p0)
    for i in range(1, n + 1):
        target = ts[i]
        guard = 0
        while t < target:
            guard += 1
            if guard > 10000:
                raise RuntimeError("too many region changes within one output step")
            inside = abs(x) < 0.5 * d or (abs(x) == 0.5 * d and x * p < 0)
            if inside:
                xe = x_gap(target, t, x, p)
                if abs(xe) < 0.5 * d:
                    x, p, t = xe, p_gap(target, t, p), target
                    continue
                edge = math.copysign(0.5 * d, xe)
                ta, xa, pa = t, x, p
                tc = brentq(lambda tt: x_gap(tt, ta, xa, pa) - edge, ta, target, xtol=1e-16 * target, rtol=1e-15)
                x, p, t = edge, p_gap(tc, ta, pa), tc
                events.append((tc, "exit"))
                if p * edge <= 0:
                    # turned back exactly at the edge: stays inside
                    continue
            else:
                vel = p / m
                if vel == 0:
                    t = target
                    continue
                wall = math.copysign(d, vel)
                t_wall = t + (wall - x) / vel
                t_gap = t + (math.copysign(0.5 * d, x) - x) / vel if x * vel < 0 else math.inf
                t_next = min(t_wall, t_gap)
                if t_next >= target:
                    x, t = x + vel * (target - t), target
                    continue
                if t_wall <= t_gap:
                    x, p, t = wall, -p, t_wall
                    events.append((t_wall, "bounce"))
                else:
                    x, t = math.copysign(0.5 * d, x), t_gap
                    events.append((t_gap, "enter"))
        xs[i], ps[i] = x, p
    current = consts.e / d * ps / m
    return ClassicalTrajectory(ts, xs, ps, current, events)
