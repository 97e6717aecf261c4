"""Steady state and photon-number noise of the one-electron laser.

The analytic half gives the operating point and the zero-frequency noise of
the detected photo-current. The stochastic half simulates the closed loop
microscopically: one electron, an integer photon number and a cold Poissonian
detector, with the Rabi frequency following the photon number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _jumpkernel as jk
from .constants import DEFAULT_CONSTANTS, CouplingParams, PhysicalConstants
from .dynamics import _a_of
from .renewal import CountStatistics, EventTrain, _jackknife_ratio


@dataclass(frozen=True)
class OperatingPoint:
    J: float
    tau_p: float
    volume: float
    mu: float
    rabi_sq: float
    gamma: float
    consts: PhysicalConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    @property
    def a(self) -> float:
        return 2.0 * self.gamma**2 / self.rabi_sq

    @property
    def coupling(self) -> CouplingParams:
        return CouplingParams(self.rabi_sq, self.gamma)

    def residuals(self) -> dict:
        """Relative violations of the three steady-state relations."""
        b = self.consts.coupling_b
        return {
            "mu": abs(self.mu - self.J * self.tau_p) / self.mu,
            "rate": abs(self.J - self.gamma / (1.0 + self.a)) / self.J,
            "rabi_sq": abs(self.rabi_sq - b * self.mu / self.volume) / self.rabi_sq,
        }

    def validate(self, rtol: float = 1e-10) -> "OperatingPoint":
        bad = {k: v for k, v in self.residuals().items() if v > rtol}
        if bad:
            raise ValueError(f"inconsistent operating point: {bad}")
        return self


def steady_state(
    J: float, tau_p: float, volume: float, consts: PhysicalConstants = DEFAULT_CONSTANTS
) -> list[OperatingPoint]:
    """Operating points with injection rate ``J`` (empty if the drive is too weak).

    The photon number is mu = J tau_p. With gamma unknown, J = gamma/(1+a)
    is a quadratic in gamma; its two roots have reciprocal a values, so the
    list is sorted by a ascending and holds the quiet (a < 1) root first.
    """
    if not (J > 0 and tau_p > 0 and volume > 0):
        raise ValueError("J, tau_p and volume must be positive")
    mu = J * tau_p
    rabi_sq = consts.coupling_b * mu / volume
    disc = 1.0 - 8.0 * J * J / rabi_sq
    if disc < -1e-12:
        return []
    # a threshold input can land a rounding error below zero
    disc = max(disc, 0.0)
    root = math.sqrt(disc)
    gammas = sorted({rabi_sq * (1.0 - root) / (4.0 * J), rabi_sq * (1.0 + root) / (4.0 * J)})
    return [OperatingPoint(J, tau_p, volume, mu, rabi_sq, g, consts).validate() for g in gammas]


def design_for_a(
    a: float, mu: float, tau_p: float, consts: PhysicalConstants = DEFAULT_CONSTANTS
) -> OperatingPoint:
    """Resonator volume and decay rate that put the laser at a chosen ``a``."""
    a = _a_of(a)
    if not (mu > 0 and tau_p > 0):
        raise ValueError("mu and tau_p must be positive")
    J = mu / tau_p
    gamma = (1.0 + a) * J
    rabi_sq = 2.0 * gamma**2 / a
    volume = consts.coupling_b * mu / rabi_sq
    return OperatingPoint(J, tau_p, volume, mu, rabi_sq, gamma, consts).validate()


def min_noise_design(mu: float, tau_p: float, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> OperatingPoint:
    """Operating point at a = 1/4, where the detected noise is smallest."""
    return design_for_a(0.25, mu, tau_p, consts)


def detected_noise_ratio(a) -> float:
    """Zero-frequency photo-current spectral density over shot noise."""
    a = _a_of(a)
    return 2.0 * a * a - a + 1.0


def closed_loop_transfer(a) -> tuple[float, float]:
    """Loop gain A = a/(1+a) and the zero-frequency amplification 1/(1-A)."""
    a = _a_of(a)
    gain = a / (1.0 + a)
    return gain, 1.0 + a


@dataclass
class LoopState:
    mu_int: int
    c1: complex
    c2: complex
    t: float
    detected: np.ndarray

    def __post_init__(self):
        if self.mu_int < 0:
            raise ValueError("photon number can not be negative")


@dataclass
class LoopResult:
    op: OperatingPoint
    horizon: float
    seed: int
    detections: EventTrain | None
    emissions: EventTrain | None
    n_detections: int
    n_emissions: int
    mu_mean: float
    count_window: float | None
    detection_counts: np.ndarray | None
    emission_counts: np.ndarray | None
    trace_times: np.ndarray | None
    trace_mu: np.ndarray | None
    final_state: LoopState

    @property
    def detection_rate(self) -> float:
        return self.n_detections / self.horizon

    @property
    def emission_rate(self) -> float:
        return self.n_emissions / self.horizon

    def detection_fano(self, window: float | None = None) -> CountStatistics:
        return self._fano(window, self.detection_counts, self.detections)

    def emission_fano(self, window: float | None = None) -> CountStatistics:
        return self._fano(window, self.emission_counts, self.emissions)

    def _fano(self, window, counts, train) -> CountStatistics:
        from .renewal import fano_factor

        if window is None or (self.count_window is not None and window == self.count_window):
            if counts is None:
                raise ValueError("no window counts recorded; pass a window")
            if counts.size < 10:
                raise ValueError("need at least 10 windows")
            f, se = _jackknife_ratio(counts)
            return CountStatistics(self.count_window, float(counts.mean()), float(f), float(se), counts.size)
        if train is None:
            raise ValueError("event timestamps were not kept")
        return fano_factor(train, window)

    def trace_csv(self, path) -> None:
        if self.trace_times is None:
            raise ValueError("no trajectory trace recorded")
        np.savetxt(
            path,
            np.column_stack([self.trace_times, self.trace_mu]),
            delimiter=",",
            header="t,mu_int",
            comments="",
            fmt=["%.17g", "%d"],
        )


_STATUS_MSG = {
    jk.NORM_DRIFT: "amplitude norm drifted by more than 1e-6 within a jump interval",
    jk.ROOT_FAILED: "emission-time root finder did not converge",
}


def simulate_loop(
    op: OperatingPoint,
    horizon: float,
    seed: int,
    *,
    mu0: int | None = None,
    count_window: float | None = None,
    keep_events: bool = True,
    freeze_feedback: bool = False,
    trace_stride: float | None = None,
) -> LoopResult:
    """Quantum-jump simulation of the laser with photon-number feedback.

    Emission (electron decay, rate 2 gamma |C2|^2) adds one photon and resets
    the electron to the lower level; detection (rate mu_int / tau_p) removes
    one photon and records a timestamp. ``freeze_feedback`` pins the Rabi
    frequency at its mean-field value, leaving an open-loop renewal pump.

    ``count_window`` accumulates per-window counts on the fly, which is what
    long runs should use with ``keep_events=False`` to avoid storing every
    timestamp.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    op.validate(1e-9)
    mu_start = int(round(op.mu)) if mu0 is None else int(mu0)
    if mu_start < 0:
        raise ValueError("initial photon number must be non-negative")
    rng = np.random.default_rng(seed)

    state_f = np.array([0.0, -1.0, -1.0, 0.0, 0.0])
    state_c = np.array([1.0 + 0.0j, 0.0j])
    state_i = np.array([mu_start, 0, 0, 0, 0, 0], dtype=np.int64)

    expected = int(op.J * horizon)
    buf_len = min(max(1024, int(expected * 1.1) + 1024), 1 << 22) if keep_events else 0
    det_buf = np.empty(buf_len)
    emit_buf = np.empty(buf_len)
    det_chunks, emit_chunks = [], []

    if count_window is not None:
        if not count_window > 0:
            raise ValueError("count_window must be positive")
        n_cw = int(math.floor(horizon / count_window * (1 + 1e-12)))
        det_counts = np.zeros(n_cw, dtype=np.int64)
        emit_counts = np.zeros(n_cw, dtype=np.int64)
        cw = float(count_window)
    else:
        det_counts = np.zeros(0, dtype=np.int64)
        emit_counts = np.zeros(0, dtype=np.int64)
        cw = 0.0

    if trace_stride is not None:
        n_tr = int(math.floor(horizon / trace_stride)) + 1
        trace_buf = np.zeros(n_tr, dtype=np.int64)
        stride = float(trace_stride)
    else:
        trace_buf = np.zeros(0, dtype=np.int64)
        stride = 0.0

    b = op.consts.coupling_b
    frozen = op.rabi_sq if freeze_feedback else -1.0
    chunk = int(min(max(4 * expected, 4096), 1 << 21))
    while True:
        uniforms = rng.random(chunk)
        status, _ = jk.run_loop(
            state_f, state_c, state_i, uniforms, float(horizon), op.gamma, b / op.volume,
            frozen, op.tau_p, det_buf, emit_buf, cw, det_counts, emit_counts, stride, trace_buf,
        )
        if status == jk.NEED_UNIFORMS:
            continue
        if status == jk.BUFFER_FULL:
            det_chunks.append(det_buf[: state_i[1]].copy())
            emit_chunks.append(emit_buf[: state_i[2]].copy())
            state_i[1] = state_i[2] = 0
            continue
        if status != jk.OK:
            raise RuntimeError(_STATUS_MSG[status])
        break

    det_chunks.append(det_buf[: state_i[1]].copy())
    emit_chunks.append(emit_buf[: state_i[2]].copy())
    params = {"J": op.J, "tau_p": op.tau_p, "volume": op.volume, "gamma": op.gamma, "a": op.a,
              "freeze_feedback": freeze_feedback}
    detected = np.concatenate(det_chunks)
    detections = EventTrain(detected, float(horizon), seed, dict(params, stream="detection")) if keep_events else None
    emissions = (
        EventTrain(np.concatenate(emit_chunks), float(horizon), seed, dict(params, stream="emission"))
        if keep_events else None
    )
    trace_t = stride * np.arange(state_i[3]) if stride > 0 else None
    trace_mu = trace_buf[: state_i[3]].copy() if stride > 0 else None
    final = LoopState(int(state_i[0]), complex(state_c[0]), complex(state_c[1]), float(state_f[0]), detected)
    return LoopResult(
        op=op,
        horizon=float(horizon),
        seed=seed,
        detections=detections,
        emissions=emissions,
        n_detections=int(state_i[4]),
        n_emissions=int(state_i[5]),
        mu_mean=float(state_f[3] / horizon),
        count_window=cw if cw > 0 else None,
        detection_counts=det_counts if cw > 0 else None,
        emission_counts=emit_counts if cw > 0 else None,
        trace_times=trace_t,
        trace_mu=trace_mu,
        final_state=final,
    )
