import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quietlaser.constants import DEFAULT_CONSTANTS, box_width_for_frequency
from quietlaser.dynamics import pump_noise_ratio, rate_sensitivity
from quietlaser.loop import (
    OperatingPoint,
    closed_loop_transfer,
    design_for_a,
    detected_noise_ratio,
    min_noise_design,
    simulate_loop,
    steady_state,
)

B = DEFAULT_CONSTANTS.coupling_b


def test_steady_state_roots_are_reciprocal_in_a():
    J, tau_p = 1e6, 1e-6
    volume = B * J * tau_p / (20 * J * J)
    points = steady_state(J, tau_p, volume)
    assert len(points) == 2
    lo, hi = points
    assert lo.a < 1 < hi.a
    assert lo.a * hi.a == pytest.approx(1.0, rel=1e-10)
    for op in points:
        assert max(op.residuals().values()) < 1e-12
        assert op.mu == pytest.approx(1.0)


def test_steady_state_threshold():
    J, tau_p = 1e6, 1e-6
    critical = B * J * tau_p / (8 * J * J)
    # exactly at the threshold the two roots merge at a = 1
    (op,) = steady_state(J, tau_p, critical)
    assert op.a == pytest.approx(1.0, rel=1e-10)
    assert steady_state(J, tau_p, critical * 1.01) == []
    assert len(steady_state(J, tau_p, critical * 0.99)) == 2


def test_steady_state_rejects_bad_input():
    with pytest.raises(ValueError):
        steady_state(-1.0, 1e-6, 1.0)


def test_design_round_trip():
    op = design_for_a(0.4, 12.0, 2e-6)
    roots = steady_state(op.J, op.tau_p, op.volume)
    assert any(abs(r.gamma / op.gamma - 1) < 1e-10 for r in roots)
    with pytest.raises(ValueError):
        OperatingPoint(op.J * 2, op.tau_p, op.volume, op.mu, op.rabi_sq, op.gamma).validate()


def test_min_noise_design_numbers():
    op = min_noise_design(1.0, 1e-6)
    assert op.a == pytest.approx(0.25)
    assert op.volume / op.tau_p**2 == pytest.approx(244, rel=0.02)
    geom = box_width_for_frequency(2 * math.pi * 1.42e9)
    side = math.sqrt(op.volume / geom.d)
    assert side == pytest.approx(0.023, rel=0.03)


def test_detected_noise_ratio_minimum():
    a = np.linspace(0.001, 3, 30001)
    vals = 2 * a**2 - a + 1
    assert a[np.argmin(vals)] == pytest.approx(0.25, abs=1e-3)
    assert detected_noise_ratio(0.25) == 0.875
    assert closed_loop_transfer(0.25) == (pytest.approx(0.2), pytest.approx(1.25))


def test_noise_identity_on_random_a(rng):
    for a in 10 ** rng.uniform(-2, 2, 20):
        gain, _ = closed_loop_transfer(a)
        assert gain == pytest.approx(rate_sensitivity(a), rel=1e-15)
        lhs = (pump_noise_ratio(a) + gain**2) / (1 - gain) ** 2
        assert lhs == pytest.approx(detected_noise_ratio(a), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_detected_noise_floor(a):
    assert detected_noise_ratio(a) >= 0.875 - 1e-15


@pytest.fixture(scope="module")
def run20():
    op = design_for_a(0.25, 20.0, 1.0)
    return simulate_loop(op, 2e4, seed=1, count_window=50.0, trace_stride=1.0)


def test_rates_match_injection(run20):
    op = run20.op
    rel_se = 1 / math.sqrt(op.J * run20.horizon)
    assert abs(run20.detection_rate / op.J - 1) < 0.02 + 5 * rel_se
    assert abs(run20.emission_rate / op.J - 1) < 0.02 + 5 * rel_se
    assert run20.mu_mean == pytest.approx(op.mu, rel=0.05)
    # photon bookkeeping closes exactly
    assert run20.final_state.mu_int == 20 + run20.n_emissions - run20.n_detections


def test_events_and_counts_agree(run20):
    counts = np.histogram(run20.detections.timestamps, bins=np.arange(0, 2e4 + 1, 50.0))[0]
    assert np.array_equal(counts, run20.detection_counts)
    assert run20.detection_fano(50.0).fano == pytest.approx(run20.detection_fano().fano, rel=1e-12)
    s = run20.detection_fano(200.0)
    assert s.n_windows == 100


def test_trace(run20, tmp_path):
    assert run20.trace_mu.size == 20001
    assert run20.trace_mu.min() >= 0
    assert abs(run20.trace_mu.mean() - run20.mu_mean) < 0.05 * run20.mu_mean
    path = tmp_path / "trace.csv"
    run20.trace_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (20001, 2)


def test_deterministic():
    op = design_for_a(0.25, 10.0, 1.0)
    r1 = simulate_loop(op, 500.0, seed=3)
    r2 = simulate_loop(op, 500.0, seed=3)
    assert np.array_equal(r1.detections.timestamps, r2.detections.timestamps)
    assert np.array_equal(r1.emissions.timestamps, r2.emissions.timestamps)


def test_frozen_feedback_is_renewal_pump():
    op = design_for_a(0.25, 20.0, 1.0)
    res = simulate_loop(op, 4e4, seed=2, count_window=100.0, keep_events=False, freeze_feedback=True)
    s = res.emission_fano()
    assert abs(s.fano - pump_noise_ratio(0.25)) < 3 * s.std_err + 0.02
    assert res.detections is None


def test_relaxes_back_after_kick():
    op = design_for_a(0.25, 50.0, 1.0)
    res = simulate_loop(op, 200.0, seed=4, mu0=60, trace_stride=1.0)
    late = res.trace_mu[100:].mean()
    assert abs(late - 50) < 5


def test_closed_loop_noise_near_floor():
    op = design_for_a(0.25, 50.0, 1.0)
    res = simulate_loop(op, 5e4, seed=5, count_window=100.0, keep_events=False)
    s = res.detection_fano()
    assert abs(s.fano - 0.875) < 3 * s.std_err + 0.05


def test_input_checks():
    op = design_for_a(0.25, 5.0, 1.0)
    with pytest.raises(ValueError):
        simulate_loop(op, 0.0, seed=1)
    with pytest.raises(ValueError):
        simulate_loop(op, 10.0, seed=1, mu0=-1)
    with pytest.raises(ValueError):
        design_for_a(0.0, 1.0, 1.0)
    res = simulate_loop(op, 10.0, seed=1, keep_events=False)
    with pytest.raises(ValueError):
        res.detection_fano()
