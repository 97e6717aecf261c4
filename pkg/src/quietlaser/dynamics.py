"""Damped Rabi dynamics of the two-level electron and its renewal algebra.

The decay constants alpha = sqrt(gamma^2 - Omega_R^2) and
kappa = sqrt(gamma^2/4 - Omega_R^2) are imaginary in the oscillatory regime.
All closed forms are evaluated in complex arithmetic, which covers both
regimes with one code path; physical outputs are checked to be real and the
negligible imaginary residue is dropped.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .constants import CouplingParams

# below |z| t < _SERIES_CUT the exponential differences cancel; use Taylor series
_SERIES_CUT = 1e-4
_IMAG_RTOL = 1e-12


def _damped_pair(c: complex, z: complex, t):
    """Return ``exp(c t) cosh(z t)`` and ``exp(c t) sinh(z t) / z``.

    Requires Re(c) + |Re(z)| <= 0 so neither exponential overflows.
    """
    t = np.asarray(t, dtype=float)
    zt = z * t
    ep = np.exp((c + z) * t)
    em = np.exp((c - z) * t)
    small = np.abs(zt) < _SERIES_CUT
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = 0.5 * (ep + em)
        sh = np.where(small, 0.0, (ep - em) / (2.0 * z if z != 0 else 1.0))
    if np.any(small):
        zt2 = zt * zt
        ect = np.exp(c * t)
        ch = np.where(small, ect * (1.0 + zt2 / 2.0 + zt2 * zt2 / 24.0), ch)
        sh = np.where(small, ect * t * (1.0 + zt2 / 6.0 + zt2 * zt2 / 120.0), sh)
    return ch, sh


def _as_real(value, scale):
    value = np.asarray(value)
    bound = _IMAG_RTOL * np.maximum(np.abs(value), np.abs(scale)) + 1e-300
    if np.any(np.abs(value.imag) > bound):
        raise ArithmeticError("closed form produced a non-negligible imaginary part")
    return value.real


def _coupling(x) -> CouplingParams:
    if isinstance(x, CouplingParams):
        return x
    return x.coupling


def _a_of(x) -> float:
    a = x.a if isinstance(x, CouplingParams) else float(x)
    if not a > 0:
        raise ValueError("a must be positive")
    return a


@dataclass(frozen=True)
class WaitingTimeLaw:
    """Distribution of the delay between successive decay events.

    After each event the electron restarts in the lower level; the delay
    density is w(t) = 2 gamma |C2(t)|^2.
    """

    coupling: CouplingParams

    @property
    def alpha(self) -> complex:
        c = self.coupling
        return cmath.sqrt(c.gamma**2 - c.rabi_sq)

    @property
    def mean_waiting_time(self) -> float:
        return mean_waiting_time(self.coupling)

    def amplitudes(self, t):
        """(C1(t), C2(t)) for C1(0) = 1, C2(0) = 0, as complex arrays."""
        g = self.coupling.gamma
        ch, sh = _damped_pair(-g / 2.0, self.alpha / 2.0, t)
        c1 = ch + 0.5 * g * sh
        c2 = 0.5j * self.coupling.rabi * sh
        return c1, c2

    def density(self, t):
        return waiting_density(t, self)

    def cdf(self, t):
        return waiting_cdf(t, self)


def undamped_upper_prob(t, coupling: CouplingParams):
    """Upper-level occupation sin^2(Omega_R t / 2) without decay."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    return np.sin(0.5 * coupling.rabi * t) ** 2


def damped_c2(t, law):
    """Upper-level amplitude C2(t) with decay, valid in both alpha regimes."""
    law = law if isinstance(law, WaitingTimeLaw) else WaitingTimeLaw(law)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return law.amplitudes(t)[1]


def waiting_density(t, law):
    """First-decay probability density w(t) (1/s)."""
    law = law if isinstance(law, WaitingTimeLaw) else WaitingTimeLaw(law)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    c2 = law.amplitudes(t)[1]
    return 2.0 * law.coupling.gamma * (c2.real**2 + c2.imag**2)


def waiting_survival(t, law):
    """Probability that no decay has happened by ``t`` (the amplitude norm)."""
    law = law if isinstance(law, WaitingTimeLaw) else WaitingTimeLaw(law)
    c1, c2 = law.amplitudes(t)
    return np.abs(c1) ** 2 + np.abs(c2) ** 2


def waiting_cdf(t, law):
    """Cumulative distribution of the waiting time, W(t) = 1 - survival."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return np.clip(1.0 - waiting_survival(t, law), 0.0, 1.0)


def mean_waiting_time(coupling) -> float:
    c = _coupling(coupling)
    return (1.0 + c.a) / c.gamma


def event_rate(coupling) -> float:
    c = _coupling(coupling)
    return c.gamma / (1.0 + c.a)


def laplace_w(p, coupling):
    """Laplace transform of the waiting-time density, rational in ``p``."""
    c = _coupling(coupling)
    p = np.asarray(p, dtype=complex)
    if np.any(p.real < 0):
        raise ValueError("laplace_w is only defined here for Re(p) >= 0")
    g, w2 = c.gamma, c.rabi_sq
    den = p**3 + 3 * g * p**2 + (2 * g**2 + w2) * p + g * w2
    # all three roots of den lie in Re(p) < 0
    assert np.all(den != 0)
    return g * w2 / den


@dataclass(frozen=True)
class RenewalSpectrum:
    """Poles of the event correlation function of the renewal process."""

    coupling: CouplingParams

    @property
    def kappa(self) -> complex:
        c = self.coupling
        return cmath.sqrt(c.gamma**2 / 4.0 - c.rabi_sq)

    @property
    def lambda_plus(self) -> complex:
        return -1.5 * self.coupling.gamma + self.kappa

    @property
    def lambda_minus(self) -> complex:
        return -1.5 * self.coupling.gamma - self.kappa

    @property
    def rate(self) -> float:
        return event_rate(self.coupling)


def laplace_G_regular(p, spectrum):
    """Laplace transform of G(t) - R, i.e. with the 1/p rate pole removed.

    The two partial fractions R lambda_-/(2 kappa (p - lambda_+)) and
    -R lambda_+/(2 kappa (p - lambda_-)) are combined over a common
    denominator, which removes the 1/kappa singularity at Omega_R = gamma/2.
    """
    spectrum = spectrum if isinstance(spectrum, RenewalSpectrum) else RenewalSpectrum(_coupling(spectrum))
    c = spectrum.coupling
    p = np.asarray(p, dtype=complex)
    if np.any(p.real < 0):
        raise ValueError("laplace_G_regular is only defined here for Re(p) >= 0")
    g = c.gamma
    out = -spectrum.rate * (p + 3 * g) / (p * p + 3 * g * p + 2 * g * g + c.rabi_sq)
    return out.real if np.all(p.imag == 0) else out


def g_excess(t, spectrum):
    """Normalised event correlation minus one, g(t) - 1, for t >= 0."""
    spectrum = spectrum if isinstance(spectrum, RenewalSpectrum) else RenewalSpectrum(_coupling(spectrum))
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    c = -1.5 * spectrum.coupling.gamma
    ch, sh = _damped_pair(c, spectrum.kappa, t)
    val = c * sh - ch
    return _as_real(val, np.exp(c * t) * (1.0 + abs(c) * t))


def pump_noise_ratio(a) -> float:
    """Zero-frequency rate noise of the renewal process over shot noise."""
    a = _a_of(a)
    return 1.0 - 3.0 * a / (1.0 + a) ** 2


def rate_sensitivity(a) -> float:
    """Logarithmic derivative (mu/R) dR/dmu at fixed gamma."""
    a = _a_of(a)
    return a / (1.0 + a)
