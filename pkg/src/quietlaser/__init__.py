"""Noise of a battery-driven one-electron laser, from the driven electron up."""
from .constants import (
    DEFAULT_CONSTANTS,
    BoxGeometry,
    CouplingParams,
    PhysicalConstants,
    ResonatorParams,
    box_width_for_frequency,
    dipole_element,
    energy_level,
    rabi_sq_from_energy,
)
from .dynamics import (
    RenewalSpectrum,
    WaitingTimeLaw,
    damped_c2,
    event_rate,
    g_excess,
    laplace_G_regular,
    laplace_w,
    mean_waiting_time,
    pump_noise_ratio,
    rate_sensitivity,
    undamped_upper_prob,
    waiting_cdf,
    waiting_density,
)
from .loop import (
    OperatingPoint,
    closed_loop_transfer,
    design_for_a,
    detected_noise_ratio,
    min_noise_design,
    simulate_loop,
    steady_state,
)
from .renewal import (
    CorrelationEstimate,
    CountStatistics,
    EventTrain,
    ExponentialLaw,
    correlation_estimate,
    fano_factor,
    generate_event_train,
    psd_estimate,
    sample_waiting_time,
)

__version__ = "0.1.0"
