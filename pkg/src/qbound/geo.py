"""Signal-recycled Michelson model and its strain noise spectral densities.

Frequencies at the interface are in Hz; the sideband angular frequency is
``2 pi f`` internally.  The recycling cavity is tuned to the carrier
(zero detuning) and only first-order sidebands are kept.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact
HBAR = 1.054_571_817e-34  # J s


@dataclass(frozen=True)
class InterferometerConfig:
    lambda0: float = 1064e-9
    arm_length_l: float = 1200.0
    power_p: float = 3700.0
    mirror_transmissivity_t: float = 0.019
    eta: float = 0.62
    eta_in: float = 0.73
    squeezing_r: float = 0.0
    detuning_z: float = 0.0

    def __post_init__(self):
        for name in ("lambda0", "arm_length_l", "power_p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.mirror_transmissivity_t <= 1.0:
            raise ValueError("mirror_transmissivity_t must lie in (0, 1]")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if not 0.0 < self.eta_in <= 1.0:
            raise ValueError("eta_in must lie in (0, 1]")
        if self.squeezing_r < 0:
            raise ValueError("squeezing_r must be nonnegative")
        if self.detuning_z != 0.0:
            raise ValueError("only a tuned signal-recycling cavity (detuning_z = 0) is supported")

    @property
    def omega0(self):
        return 2.0 * math.pi * SPEED_OF_LIGHT / self.lambda0

    def with_squeezing_db(self, db):
        return replace(self, squeezing_r=squeezing_db_to_r(db))


def geo600_config():
    """GEO 600 parameters: 2.7 kW measured at the beam splitter, rescaled by eta_in."""
    return InterferometerConfig(power_p=rescale_power(2700.0, 0.73), squeezing_r=squeezing_db_to_r(10.0))


@dataclass(frozen=True)
class StrainPoint:
    frequency_hz: float
    delta_h: float  # 1/sqrt(Hz)


@dataclass(frozen=True)
class TransferMatrix3:
    """Sideband transfer matrix over the mode order (a0, b+, b-)."""

    entries: np.ndarray

    def max_unitarity_defect(self):
        """``max |U^dag U - I|``, formed as ``X + X^dag + X^dag X`` with ``X = U - I``."""
        x = self.entries - np.eye(3)
        return float(np.max(np.abs(x + x.conj().T + x.conj().T @ x)))


def amplification_factor(frequency_hz, config):
    """Signal-recycling gain ``g`` at sideband frequency ``frequency_hz``."""
    t = config.mirror_transmissivity_t
    if not 0.0 < t <= 1.0:
        raise ValueError("mirror transmissivity must lie in (0, 1]")
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(f < 0):
        raise ValueError("frequency must be nonnegative")
    phase = 2.0 * (2.0 * math.pi * f) * config.arm_length_l / SPEED_OF_LIGHT
    # 2 - T - 2 s cos(x) with s = sqrt(1-T), rewritten without cancellation near x = 0
    s = math.sqrt(1.0 - t)
    denom = (t / (1.0 + s)) ** 2 + 4.0 * s * np.sin(phase / 2.0) ** 2
    assert np.all(denom > 0), "recycling denominator must stay positive for T in (0, 1]"
    g = np.sqrt(t / denom)
    return float(g) if g.ndim == 0 else g


def three_mode_transfer(epsilon, g):
    x = g * epsilon
    if abs(x) > 1e-3:
        warnings.warn(f"g*epsilon={x:.3g} is not small; first-order model is inaccurate", stacklevel=2)
    u = np.array([[1.0, x, x], [-x, 1.0, 0.0], [-x, 0.0, 1.0]], dtype=complex)
    return TransferMatrix3(u)


_SYM_BASIS = np.array(
    [[1.0, 0.0, 0.0], [0.0, 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)], [0.0, -1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)]]
)


def reduce_to_mz(u):
    """Change to (a0, b_s, b_a) and return the 2x2 (a0, b_s) block plus a decoupling flag.

    ``b_s = (b- + b+)/sqrt(2)`` and ``b_a = (b- - b+)/sqrt(2)``.
    """
    m = u.entries
    x = m[0, 1]
    expected = np.array([[1.0, x, x], [-x, 1.0, 0.0], [-x, 0.0, 1.0]])
    if np.max(np.abs(m - expected)) > 1e-14 * max(1.0, abs(x)):
        raise ValueError("matrix does not have the tuned-recycling first-order structure")
    # rows of _SYM_BASIS give new modes in terms of (a0, b+, b-)
    r = _SYM_BASIS @ m @ _SYM_BASIS.T
    mz = r[:2, :2]
    dev = max(np.max(np.abs(r[2, :2])), np.max(np.abs(r[:2, 2])), abs(r[2, 2] - 1.0))
    return mz, bool(dev < 1e-14)


def epsilon_from_strain(h, config):
    return h * config.arm_length_l * config.omega0 / (2.0 * SPEED_OF_LIGHT)


def phase_from_strain(h, frequency_hz, config):
    """Equivalent Mach-Zehnder phase ``2 sqrt(2) g epsilon`` for strain ``h``."""
    if np.any(np.asarray(h) < 0):
        raise ValueError("strain amplitude must be nonnegative")
    g = amplification_factor(frequency_hz, config)
    return math.sqrt(2.0) * g * h * config.arm_length_l * config.omega0 / SPEED_OF_LIGHT


def strain_from_phase(phi, frequency_hz, config):
    g = amplification_factor(frequency_hz, config)
    return phi * SPEED_OF_LIGHT / (math.sqrt(2.0) * g * config.arm_length_l * config.omega0)


def photon_flux(power_w, lambda0):
    """Photons per second carried by ``power_w`` at wavelength ``lambda0``."""
    if not power_w > 0 or not lambda0 > 0:
        raise ValueError("power and wavelength must be positive")
    return power_w * lambda0 / (2.0 * math.pi * HBAR * SPEED_OF_LIGHT)


def rescale_power(measured_power_w, eta_in):
    if not 0.0 < eta_in <= 1.0:
        raise ValueError(f"eta_in must lie in (0, 1], got {eta_in!r}")
    return measured_power_w / eta_in


def squeezing_db_to_r(db):
    if db < 0:
        raise ValueError("squeezing in dB must be nonnegative")
    return db * math.log(10.0) / 20.0


def squeezing_r_to_db(r):
    return 20.0 * r / math.log(10.0)


@dataclass(frozen=True)
class CsvPhase:
    delta_phi: float
    # False when the coherent beam does not dominate (|alpha|^2 <= 10 sinh^2 r)
    approximation_valid: bool


def csv_phase_uncertainty(alpha_sq, r, eta):
    """Phase uncertainty of coherent light plus squeezed vacuum with power detection."""
    if not alpha_sq > 0:
        raise ValueError("alpha_sq must be positive")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if r < 0:
        raise ValueError("r must be nonnegative")
    value = math.sqrt((1.0 - eta + eta * math.exp(-2.0 * r)) / (eta * alpha_sq))
    return CsvPhase(value, alpha_sq > 10.0 * math.sinh(r) ** 2)


def _shot_prefactor(frequency_hz, config):
    g = amplification_factor(frequency_hz, config)
    return np.sqrt(SPEED_OF_LIGHT * HBAR * config.lambda0 / (4.0 * math.pi * config.power_p)) / (
        config.arm_length_l * g
    )


def _points(frequency_hz, values):
    if np.ndim(frequency_hz) == 0:
        return StrainPoint(float(frequency_hz), float(values))
    return [StrainPoint(float(f), float(v)) for f, v in zip(frequency_hz, values)]


def csv_strain_density(frequency_hz, config):
    eta = config.eta
    factor = math.sqrt((1.0 - eta + eta * math.exp(-2.0 * config.squeezing_r)) / eta)
    return _points(frequency_hz, _shot_prefactor(frequency_hz, config) * factor)


def fundamental_strain_density(frequency_hz, config):
    eta = config.eta
    if not 0.0 < eta < 1.0:
        raise ValueError("the loss bound needs 0 < eta < 1")
    return _points(frequency_hz, _shot_prefactor(frequency_hz, config) * math.sqrt((1.0 - eta) / eta))
