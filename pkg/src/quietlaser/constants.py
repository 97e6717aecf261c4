"""Physical constants, particle-in-a-box eigenstructure and field coupling.

Everything here is SI. The default constants are the rounded values used
throughout the quiet-laser calculations (e = 1.60e-19 C, m = 9.10e-31 kg,
hbar = 1.05e-34 J s); use :meth:`PhysicalConstants.codata` for CODATA values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# 1/(4 pi eps0) = 1e-7 c^2 in the non-relativistic (mu0 -> 0) bookkeeping.
_COULOMB = 1e-7 * 299792458.0**2


@dataclass(frozen=True)
class PhysicalConstants:
    e: float = 1.60e-19
    m: float = 9.10e-31
    hbar: float = 1.05e-34
    eps0_factor: float = _COULOMB

    def __post_init__(self):
        for name in ("e", "m", "hbar", "eps0_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def codata(cls) -> "PhysicalConstants":
        from scipy import constants as sc

        return cls(
            e=sc.e,
            m=sc.m_e,
            hbar=sc.hbar,
            eps0_factor=1.0 / (4.0 * math.pi * sc.epsilon_0),
        )

    @property
    def coupling_b(self) -> float:
        """Proportionality constant b in Omega_R^2 = b mu / volume (m^3/s^2)."""
        return 1024.0 / (27.0 * math.pi) * self.e**2 * self.eps0_factor / self.m


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class BoxGeometry:
    """Hard-wall box of full width ``d``; wavefunctions vanish for |x| >= d/2."""

    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("box width must be positive")


@dataclass(frozen=True)
class ResonatorParams:
    volume: float
    tau_p: float
    omega: float

    def __post_init__(self):
        for name in ("volume", "tau_p", "omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class CouplingParams:
    """Rabi frequency squared and half decay rate of the upper level.

    ``a = 2 gamma**2 / rabi_sq`` is derived, never stored, so it can not drift
    out of sync with the two physical inputs.
    """

    rabi_sq: float
    gamma: float

    def __post_init__(self):
        if not self.rabi_sq > 0:
            raise ValueError("rabi_sq must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def from_a(cls, a: float, gamma: float = 1.0) -> "CouplingParams":
        if not a > 0:
            raise ValueError("a must be positive")
        return cls(rabi_sq=2.0 * gamma**2 / a, gamma=gamma)

    @classmethod
    def from_rabi(cls, rabi: float, gamma: float) -> "CouplingParams":
        return cls(rabi_sq=rabi * rabi, gamma=gamma)

    @property
    def a(self) -> float:
        return 2.0 * self.gamma**2 / self.rabi_sq

    @property
    def rabi(self) -> float:
        return math.sqrt(self.rabi_sq)


def energy_level(n: int, geom: BoxGeometry, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Energy of box level ``n`` (1 or 2) in joules."""
    if n not in (1, 2):
        raise ValueError("only levels 1 and 2 are modelled")
    return math.pi**2 * consts.hbar**2 * n**2 / (2.0 * consts.m * geom.d**2)


def transition_frequency(geom: BoxGeometry, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Angular frequency of the 1 -> 2 transition (rad/s)."""
    return (energy_level(2, geom, consts) - energy_level(1, geom, consts)) / consts.hbar


def box_width_for_frequency(omega: float, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> BoxGeometry:
    """Box whose 1 -> 2 transition sits at angular frequency ``omega``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return BoxGeometry(math.sqrt(3.0 * math.pi**2 * consts.hbar / (2.0 * consts.m * omega)))


def dipole_element(geom: BoxGeometry) -> float:
    """Transition dipole length x12 = 16 d / (9 pi^2) in metres."""
    return 16.0 * geom.d / (9.0 * math.pi**2)


def rabi_frequency(v: float, geom: BoxGeometry, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Rabi angular frequency for a peak gap voltage ``v`` (volts)."""
    return consts.e * v * dipole_element(geom) / (consts.hbar * geom.d)


def voltage_for_rabi(rabi: float, geom: BoxGeometry, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    return rabi * consts.hbar * geom.d / (consts.e * dipole_element(geom))


def rabi_sq_from_energy(
    mu: float, res: ResonatorParams | float, consts: PhysicalConstants = DEFAULT_CONSTANTS
) -> float:
    """Omega_R^2 for a resonator holding ``mu`` quanta.

    ``res`` is either a :class:`ResonatorParams` or a bare capacitance volume.
    """
    volume = res.volume if isinstance(res, ResonatorParams) else float(res)
    if mu < 0:
        raise ValueError("mu must be non-negative")
    if not volume > 0:
        raise ValueError("volume must be positive")
    return consts.coupling_b * mu / volume


def wavefunction(n: int, x, geom: BoxGeometry):
    """Stationary box eigenfunction psi_n(x), zero outside |x| < d/2."""
    if n not in (1, 2):
        raise ValueError("only levels 1 and 2 are modelled")
    x = np.asarray(x, dtype=float)
    d = geom.d
    amp = math.sqrt(2.0 / d)
    psi = amp * (np.cos(math.pi * x / d) if n == 1 else np.sin(2.0 * math.pi * x / d))
    return np.where(np.abs(x) < d / 2, psi, 0.0)
