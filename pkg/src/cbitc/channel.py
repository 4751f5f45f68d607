"""Air-to-ground channel between terrestrial BSs and the UAV.

The large-scale model is a parametric stand-in for the urban-macro aerial
tables: LoS is certain above ``los_altitude_threshold`` and otherwise decays
exponentially with horizontal distance, with a decay length that grows as the
receiver climbs. Path loss is log-distance anchored at the 1 m free-space
loss. BS antennas are vertical half-wave dipole ULAs steered to a downtilt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


def dbm2watt(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt2dbm(x):
    return 10.0 * np.log10(x) + 30.0


@dataclass(frozen=True)
class AntennaConfig:
    num_elements: int = 10
    element_spacing: float = 0.5  # wavelengths
    downtilt: float = 10.0  # degrees below horizon

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise InvalidArgumentError("num_elements must be a positive integer")
        if not self.element_spacing > 0:
            raise InvalidArgumentError("element_spacing must be positive")


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale channel and receiver parameters.

    ``noise_psd`` is in dBm/Hz and already includes the receiver noise figure.
    ``shadowing_std`` (dB) enables log-normal shadowing; zero disables it.
    """

    carrier_frequency: float = 2e9
    noise_psd: float = -164.0
    rb_subcarriers: int = 12
    subcarrier_spacing: float = 15e3
    los_altitude_threshold: float = 100.0
    los_decay_scale: float = 63.0
    pathloss_exponent_los: float = 2.0
    pathloss_exponent_nlos: float = 3.5
    nlos_extra_loss: float = 6.0
    shadowing_std: float = 0.0

    def __post_init__(self):
        if not (2.0 <= self.pathloss_exponent_los <= self.pathloss_exponent_nlos):
            raise InvalidArgumentError("need 2 <= LoS exponent <= NLoS exponent")
        for name in ("carrier_frequency", "subcarrier_spacing", "los_altitude_threshold",
                     "los_decay_scale"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.rb_subcarriers < 1:
            raise InvalidArgumentError("rb_subcarriers must be >= 1")
        if self.nlos_extra_loss < 0 or self.shadowing_std < 0:
            raise InvalidArgumentError("nlos_extra_loss and shadowing_std must be nonnegative")

    @property
    def bandwidth(self) -> float:
        return self.rb_subcarriers * self.subcarrier_spacing

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclass(frozen=True)
class ChannelCoefficient:
    amplitude: float
    phase: float
    los_flag: bool

    @property
    def value(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))

    @property
    def gain(self) -> float:
        return self.amplitude ** 2


def noise_power_dbm(params: ChannelParams) -> float:
    return float(params.noise_psd + lin2db(params.bandwidth))


def noise_power(params: ChannelParams) -> float:
    """Receiver noise power over one RB, in watts."""
    return float(dbm2watt(noise_power_dbm(params)))


def element_gain(elevation):
    """Half-wave dipole power pattern for a vertical element, peak 1 at the horizon."""
    el = np.asarray(elevation, dtype=float)
    c = np.cos(el)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.cos(0.5 * np.pi * np.sin(el)) ** 2 / c ** 2
    return np.where(np.abs(c) < 1e-12, 0.0, g)


def array_factor_power(config: AntennaConfig, elevation):
    """``|AF|^2`` of the vertical ULA; equals ``num_elements**2`` at the steering angle."""
    el = np.asarray(elevation, dtype=float)
    n = config.num_elements
    steer = -math.radians(config.downtilt)
    psi = 2.0 * np.pi * config.element_spacing * (np.sin(el) - math.sin(steer))
    half = 0.5 * psi
    s = np.sin(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        af = (np.sin(n * half) / s) ** 2
    # psi at multiples of 2*pi: grating/main lobe limit
    return np.where(np.abs(s) < 1e-12, float(n * n), af)


def array_gain(config: AntennaConfig, elevation):
    """Element power pattern times ``|AF|^2`` at ``elevation`` radians above the horizon."""
    out = element_gain(elevation) * array_factor_power(config, elevation)
    return float(out) if np.ndim(out) == 0 else out


def first_null_elevation(config: AntennaConfig) -> float:
    """Elevation of the first array-factor null above the steering direction."""
    s = math.sin(-math.radians(config.downtilt)) + 1.0 / (config.num_elements * config.element_spacing)
    if abs(s) > 1:
        raise InvalidArgumentError("array has no null above the steering angle")
    return math.asin(s)


def los_probability(params: ChannelParams, horizontal_distance: float, uav_altitude: float) -> float:
    """Probability of a LoS link.

    Below the altitude threshold the decay length is
    ``los_decay_scale * (h_th / (h_th - h))**2``, so the probability rises
    continuously to 1 as the altitude approaches the threshold.
    """
    if horizontal_distance < 0 or not uav_altitude > 0:
        raise InvalidArgumentError("need horizontal_distance >= 0 and altitude > 0")
    h_th = params.los_altitude_threshold
    if uav_altitude >= h_th:
        return 1.0
    decay = params.los_decay_scale * (h_th / (h_th - uav_altitude)) ** 2
    return float(math.exp(-horizontal_distance / decay))


def pathloss_db(params: ChannelParams, d3d: float, los: bool) -> float:
    """Log-distance path loss in dB, anchored at the 1 m free-space loss."""
    if not d3d > 0:
        raise InvalidArgumentError("distance must be positive")
    fspl_1m = 20.0 * math.log10(4.0 * math.pi * params.carrier_frequency / SPEED_OF_LIGHT)
    if los:
        return fspl_1m + 10.0 * params.pathloss_exponent_los * math.log10(d3d)
    return fspl_1m + 10.0 * params.pathloss_exponent_nlos * math.log10(d3d) + params.nlos_extra_loss


def elevation_angle(bs_position, uav_position) -> float:
    bs = np.asarray(bs_position, dtype=float)
    uav = np.asarray(uav_position, dtype=float)
    d2d = float(np.hypot(*(uav[:2] - bs[:2])))
    return math.atan2(uav[2] - bs[2], d2d)


def sample_channel(rng: np.random.Generator, params: ChannelParams, config: AntennaConfig,
                   bs_position, uav_position, los: bool | None = None) -> ChannelCoefficient:
    """Draw one BS-to-UAV coefficient.

    Always consumes three variates (LoS uniform, phase, shadowing normal) so
    seeded streams stay aligned across parameter changes. ``los`` forces the
    LoS state when not None.
    """
    bs = np.asarray(bs_position, dtype=float)
    uav = np.asarray(uav_position, dtype=float)
    diff = uav - bs
    d3d = float(np.linalg.norm(diff))
    if d3d == 0.0:
        raise InvalidArgumentError("BS and UAV positions coincide")
    d2d = float(np.hypot(diff[0], diff[1]))
    u_los = rng.random()
    phase = rng.uniform(0.0, 2.0 * math.pi)
    shadow = rng.standard_normal()
    if los is None:
        los = bool(u_los < los_probability(params, d2d, float(uav[2])))
    gain_db = lin2db(max(array_gain(config, math.atan2(diff[2], d2d)), 1e-300))
    loss_db = pathloss_db(params, d3d, los) + params.shadowing_std * shadow
    amplitude = math.sqrt(float(db2lin(gain_db - loss_db)))
    return ChannelCoefficient(amplitude, phase % (2.0 * math.pi), bool(los))


def sample_channels(rng: np.random.Generator, params: ChannelParams, config: AntennaConfig,
                    bs_positions, uav_position) -> list[ChannelCoefficient]:
    return [sample_channel(rng, params, config, p, uav_position) for p in np.asarray(bs_positions)]


def as_complex(coeffs) -> np.ndarray:
    """Complex array from a sequence of ChannelCoefficient (or pass-through numbers)."""
    return np.array([c.value if isinstance(c, ChannelCoefficient) else complex(c) for c in coeffs],
                    dtype=complex)
