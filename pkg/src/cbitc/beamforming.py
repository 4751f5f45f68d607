"""SINR expressions and closed-form optimal CB-ITC designs.

Conventions: ``f_avail`` holds the complex channels of the N available
(serving) BSs, ``f_occ`` those of the K occupied BSs. ``P`` is the per-BS
power budget and ``noise`` the receiver noise power, both in watts. Every
SINR is linear; dB conversion happens only at I/O boundaries.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateChannelError, InvalidArgumentError

FEASIBILITY_RTOL = 1e-9
CANCEL_RTOL = 1e-9


class Scheme(str, enum.Enum):
    NO_CB = "NoCB"
    CONV_CB = "ConvCB"
    CENTRALIZED_ITC = "CentralizedITC"
    DISTRIBUTED_ITC = "DistributedITC"

    def __str__(self):
        return self.value


def rate_from_sinr(sinr: float) -> float:
    return math.log2(1.0 + sinr)


@dataclass(frozen=True)
class SinrReport:
    scheme: Scheme
    sinr: float
    rate: float

    @classmethod
    def from_sinr(cls, scheme, sinr: float) -> "SinrReport":
        if sinr < 0:
            raise InvalidArgumentError("SINR must be nonnegative")
        return cls(Scheme(scheme), float(sinr), rate_from_sinr(float(sinr)))


@dataclass(frozen=True)
class PowerAllocation:
    """Nonnegative transmit amplitudes at the N available BSs.

    Attributes
    ----------
    v_u : ndarray, shape (N,)
        Amplitudes for the UAV's symbol.
    v_j : ndarray, shape (K, N)
        Row ``k`` holds the amplitudes for the k-th occupied BS's symbol.
    power_budget : float
        Per-BS power ``P`` in watts.
    """

    v_u: np.ndarray
    v_j: np.ndarray
    power_budget: float

    def __post_init__(self):
        v_u = np.asarray(self.v_u, dtype=float).reshape(-1)
        v_j = np.asarray(self.v_j, dtype=float)
        if not (v_j.ndim == 2 and v_j.shape[1] == v_u.size):
            v_j = v_j.reshape(-1, v_u.size) if v_u.size else v_j.reshape(v_j.shape[0] if v_j.ndim == 2 else 0, 0)
        if np.any(v_u < 0) or np.any(v_j < 0):
            raise InvalidArgumentError("power allocation amplitudes must be nonnegative")
        object.__setattr__(self, "v_u", v_u)
        object.__setattr__(self, "v_j", v_j)

    @property
    def N(self) -> int:
        return self.v_u.size

    @property
    def K(self) -> int:
        return self.v_j.shape[0]

    def per_bs_power(self) -> np.ndarray:
        return self.v_u ** 2 + np.sum(self.v_j ** 2, axis=0)

    def is_feasible(self, rtol: float = FEASIBILITY_RTOL) -> bool:
        return bool(np.all(self.per_bs_power() <= self.power_budget * (1.0 + rtol) + 1e-300))


@dataclass(frozen=True)
class Beamformer:
    """Complex weights ``w_u`` (N,) and ``w_j`` (K, N) of the serving BSs."""

    w_u: np.ndarray
    w_j: np.ndarray

    def __post_init__(self):
        w_u = np.asarray(self.w_u, dtype=complex).reshape(-1)
        object.__setattr__(self, "w_u", w_u)
        w_j = np.asarray(self.w_j, dtype=complex)
        if not (w_j.ndim == 2 and w_j.shape[1] == w_u.size):
            w_j = w_j.reshape(-1, w_u.size) if w_u.size else w_j.reshape(w_j.shape[0] if w_j.ndim == 2 else 0, 0)
        object.__setattr__(self, "w_j", w_j)

    def per_bs_power(self) -> np.ndarray:
        return np.abs(self.w_u) ** 2 + np.sum(np.abs(self.w_j) ** 2, axis=0)

    def amplitudes(self, power_budget: float) -> PowerAllocation:
        return PowerAllocation(np.abs(self.w_u), np.abs(self.w_j), power_budget)


def _check_common(P, noise):
    if P < 0:
        raise InvalidArgumentError(f"power budget must be nonnegative, got {P}")
    if not noise > 0:
        raise InvalidArgumentError(f"noise power must be positive, got {noise}")


def sinr_no_cb(serving_gain: float, occupied_gains, P: float, noise: float) -> float:
    """Single best-server SINR ``P|f_i|^2 / (noise + P sum |f_j|^2)``."""
    _check_common(P, noise)
    interference = P * float(np.sum(occupied_gains))
    return P * serving_gain / (noise + interference)


def sinr_conventional_cb(available_amps, occupied_gains, P: float, noise: float) -> float:
    """Coherent combining of all available BSs at full power, no ITC."""
    _check_common(P, noise)
    amp_sum = float(np.sum(available_amps))
    return amp_sum ** 2 * P / (noise + P * float(np.sum(occupied_gains)))


def optimal_phases(allocation: PowerAllocation, f_avail, f_occ) -> Beamformer:
    """Attach the optimal phases to an amplitude allocation.

    UAV weights co-phase every serving path; ITC weights arrive in anti-phase
    with the interference they target.
    """
    f_avail = np.asarray(f_avail, dtype=complex).reshape(-1)
    f_occ = np.asarray(f_occ, dtype=complex).reshape(-1)
    if f_avail.size != allocation.N or f_occ.size != allocation.K:
        raise InvalidArgumentError("channel dimensions do not match the allocation")
    ang_n = np.angle(f_avail)
    ang_j = np.angle(f_occ)
    w_u = allocation.v_u * np.exp(-1j * ang_n)
    w_j = allocation.v_j * np.exp(1j * (ang_j[:, None] - ang_n[None, :] + np.pi))
    return Beamformer(w_u, w_j)


def _cb_itc_terms(beamformer: Beamformer, f_avail, f_occ, P):
    f_avail = np.asarray(f_avail, dtype=complex).reshape(-1)
    f_occ = np.asarray(f_occ, dtype=complex).reshape(-1)
    signal = complex(np.dot(f_avail, beamformer.w_u))
    residual = beamformer.w_j @ f_avail + math.sqrt(P) * f_occ
    return signal, residual


def sinr_cb_itc(beamformer: Beamformer, f_avail, f_occ, P: float, noise: float,
                rtol: float = FEASIBILITY_RTOL) -> float:
    """Receive SINR of CB with interference transmission and cancellation."""
    _check_common(P, noise)
    if np.any(beamformer.per_bs_power() > P * (1.0 + rtol) + 1e-300):
        raise InvalidArgumentError("beamformer violates the per-BS power budget")
    signal, residual = _cb_itc_terms(beamformer, f_avail, f_occ, P)
    return abs(signal) ** 2 / (noise + float(np.sum(np.abs(residual) ** 2)))


def p2_sinr(allocation: PowerAllocation, available_amps, occupied_amps, noise: float) -> float:
    """SINR of an amplitude allocation under optimal phases (the reduced real problem)."""
    h = np.asarray(available_amps, dtype=float).reshape(-1)
    f = np.asarray(occupied_amps, dtype=float).reshape(-1)
    P = allocation.power_budget
    num = float(h @ allocation.v_u) ** 2
    res = math.sqrt(P) * f - allocation.v_j @ h
    return num / (noise + float(res @ res))


def fully_canceled(allocation: PowerAllocation, available_amps, occupied_amps,
                   rtol: float = CANCEL_RTOL) -> np.ndarray:
    """Per occupied BS, whether its residual interference amplitude is negligible."""
    h = np.asarray(available_amps, dtype=float).reshape(-1)
    f = np.asarray(occupied_amps, dtype=float).reshape(-1)
    scale = math.sqrt(allocation.power_budget) * f
    return np.abs(scale - allocation.v_j @ h) < rtol * scale


# ---------------------------------------------------------------- N = 1 closed forms

class SingleServerSolution(NamedTuple):
    v_j: float
    v_u: float
    eta: float


class MultiInterfererSolution(NamedTuple):
    v_j: np.ndarray
    v_u: float
    eta: float
    S_a: float


class AsymptoticLimits(NamedTuple):
    rho_j: float
    rho_u: float
    eta_star: float  # inf when the optimum grows without bound
    eta_growth: str  # "finite", "linear" or "sqrt"
    eta0: float


def _check_n1(fa, P, noise):
    _check_common(P, noise)
    if not fa > 0:
        raise DegenerateChannelError("serving channel amplitude must be positive")


def _eta_star(fa2: float, S_a: float, P: float, noise: float) -> float:
    # positive root of noise*eta^2 + (noise - P*S_a)*eta - P*fa2 = 0, cancellation-free
    Y = noise - P * S_a
    c = 4.0 * noise * P * fa2
    root = math.sqrt(Y * Y + c)
    if Y >= 0:
        return 2.0 * P * fa2 / (Y + root) if P > 0 else 0.0
    return (root - Y) / (2.0 * noise)


def closed_form_n1_k1(fa: float, fo: float, P: float, noise: float) -> SingleServerSolution:
    """Optimal ITC/UAV amplitudes for one serving and one occupied BS.

    Parameters
    ----------
    fa, fo : float
        Amplitudes ``|f_a|`` (serving) and ``|f_o|`` (occupied).
    P, noise : float
        Per-BS power and noise power.

    Returns
    -------
    SingleServerSolution
        ``v_j`` (ITC amplitude), ``v_u`` (UAV amplitude) and the maximum SINR.
    """
    fa, fo = abs(float(fa)), abs(float(fo))
    _check_n1(fa, P, noise)
    if P == 0:
        return SingleServerSolution(0.0, 0.0, 0.0)
    X = noise + (fa * fa + fo * fo) * P
    # X^2 - 4 fa^2 fo^2 P^2 factored to avoid cancellation
    disc = (noise + (fa - fo) ** 2 * P) * (noise + (fa + fo) ** 2 * P)
    v_j = 2.0 * fa * fo * P * math.sqrt(P) / (X + math.sqrt(disc))
    v_u = math.sqrt(max(P - v_j * v_j, 0.0))
    eta = _eta_star(fa * fa, fa * fa - fo * fo, P, noise)
    return SingleServerSolution(v_j, v_u, eta)


def eta_without_itc(fa: float, fo: float, P: float, noise: float) -> float:
    _check_common(P, noise)
    return P * fa * fa / (noise + P * fo * fo)


def asymptotic_limits(fa: float, fo: float) -> AsymptoticLimits:
    """High-power limits of the single-server, single-interferer optimum."""
    fa2, fo2 = float(fa) ** 2, float(fo) ** 2
    if not (fa2 > 0 and fo2 > 0):
        raise InvalidArgumentError("both channel gains must be positive")
    rho_j = fo2 / fa2 if fa2 >= fo2 else fa2 / fo2
    if fa2 > fo2:
        eta, growth = math.inf, "linear"
    elif fa2 == fo2:
        eta, growth = math.inf, "sqrt"
    else:
        eta, growth = fa2 / (fo2 - fa2), "finite"
    return AsymptoticLimits(rho_j, 1.0 - rho_j, eta, growth, fa2 / fo2)


def closed_form_n1_k_many(fa: float, occupied_amps, P: float, noise: float) -> MultiInterfererSolution:
    """Optimal allocation for one serving BS and any number of occupied BSs.

    ITC amplitudes are proportional to the interferers' channel amplitudes,
    scaled by ``eta/(eta+1)``; ``S_a = |f_a|^2 - sum |f_j|^2`` is the
    serving BS's ITC capability.
    """
    fa = abs(float(fa))
    _check_n1(fa, P, noise)
    f = np.abs(np.asarray(occupied_amps, dtype=float).reshape(-1))
    S_a = fa * fa - float(f @ f)
    eta = _eta_star(fa * fa, S_a, P, noise)
    v_j = eta / (eta + 1.0) * f * math.sqrt(P) / fa
    v_u = math.sqrt(max(P - float(v_j @ v_j), 0.0))
    return MultiInterfererSolution(v_j, v_u, eta, S_a)


def eta_sensitivity(S_a: float, fa: float, P: float, noise: float) -> float:
    """Derivative of the single-server optimum SINR with respect to ``S_a``."""
    _check_n1(abs(fa), P, noise)
    fa2 = float(fa) ** 2
    eta = _eta_star(fa2, S_a, P, noise)
    return P * eta / math.sqrt((noise - P * S_a) ** 2 + 4.0 * noise * P * fa2)


def power_ratio_curve(fa: float, fo: float, noise: float, P_list) -> list[tuple[float, float]]:
    """``(rho_j, rho_u)`` of the single-server optimum along a power sweep."""
    out = []
    for P in P_list:
        if P == 0:
            out.append((0.0, 1.0))
            continue
        sol = closed_form_n1_k1(fa, fo, P, noise)
        rho_j = min(sol.v_j ** 2 / P, 1.0)
        out.append((rho_j, 1.0 - rho_j))
    return out


# ---------------------------------------------------------------- symbol-level check

def _qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    bits = rng.integers(0, 4, size=shape)
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * bits))


def empirical_powers(rng: np.random.Generator, beamformer: Beamformer, f_avail, f_occ,
                     P: float, noise: float, num_symbols: int) -> tuple[float, float]:
    """Sample powers of the desired and interference-plus-noise parts of the received signal.

    Symbols are unit-modulus QPSK; noise is circularly-symmetric Gaussian.
    """
    if num_symbols < 1:
        raise InvalidArgumentError("num_symbols must be >= 1")
    if noise < 0:
        raise InvalidArgumentError("noise power must be nonnegative")
    signal_gain, residual = _cb_itc_terms(beamformer, f_avail, f_occ, P)
    x_u = _qpsk(rng, num_symbols)
    x_j = _qpsk(rng, (residual.size, num_symbols))
    z = math.sqrt(noise / 2.0) * (rng.standard_normal(num_symbols)
                                  + 1j * rng.standard_normal(num_symbols))
    desired = signal_gain * x_u
    other = residual @ x_j + z if residual.size else z
    return float(np.mean(np.abs(desired) ** 2)), float(np.mean(np.abs(other) ** 2))


def empirical_sinr(rng: np.random.Generator, beamformer: Beamformer, f_avail, f_occ,
                   P: float, noise: float, num_symbols: int) -> float:
    sig, other = empirical_powers(rng, beamformer, f_avail, f_occ, P, noise, num_symbols)
    if sig == 0.0:
        return 0.0
    return sig / other if other > 0 else math.inf
