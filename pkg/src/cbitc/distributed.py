"""Divide-and-conquer CB-ITC with local cooperation.

Each occupied BS ``j`` splits its interference channel ``f_j`` into portions
``f_j * theta[j, n]`` over the available BSs ``Omega_j`` in its M-tier
neighborhood. Every available BS then cancels its assigned portions on its
own, using the high-SNR best-effort allocation. The splitting ratios are
either equal (open loop) or refined over rounds of capability exchange
(closed loop).

``channels`` arguments are indexable by global BS index and yield complex
coefficients or :class:`~cbitc.channel.ChannelCoefficient` objects.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .beamforming import PowerAllocation, Scheme, SinrReport, optimal_phases, sinr_cb_itc
from .errors import CooperationSizeError, InvalidArgumentError
from .topology import HexGrid, neighbors

ROW_SUM_TOL = 1e-12


def _coef(channels, i: int) -> complex:
    c = channels[i]
    return complex(c.value) if hasattr(c, "value") else complex(c)


@dataclass(frozen=True)
class CooperationGraph:
    """Bipartite cooperation links between occupied and available BSs.

    Attributes
    ----------
    omega_j : dict
        Occupied BS ``j`` -> available BSs in its M-tier neighborhood.
    j_o_n : dict
        Available BS ``n`` -> occupied BSs that may assign it a portion.
    cooperation_size : int
        Tier radius ``M``.
    """

    omega_j: Mapping[int, frozenset]
    j_o_n: Mapping[int, frozenset]
    cooperation_size: int

    @property
    def occupied(self) -> tuple[int, ...]:
        return tuple(sorted(self.omega_j))

    @property
    def available(self) -> tuple[int, ...]:
        return tuple(sorted(self.j_o_n))


def build_cooperation_graph(grid: HexGrid, occupied, available, m: int, q: int) -> CooperationGraph:
    """Link each occupied BS to the available BSs within ``m`` tiers.

    Raises
    ------
    CooperationSizeError
        If ``m <= q``. Under q-tier ICIC no available BS lies that close to an
        occupied one, so such a graph could never carry any cancellation.
    """
    if int(m) != m or int(q) != q or q < 0:
        raise InvalidArgumentError("m and q must be nonnegative integers")
    if m <= q:
        raise CooperationSizeError(f"cooperation size M={m} must exceed ICIC tier q={q}")
    occ = sorted({int(j) for j in occupied})
    avail = sorted({int(n) for n in available})
    if set(occ) & set(avail):
        raise InvalidArgumentError("a BS cannot be both occupied and available")
    avail_set = frozenset(avail)
    omega = {j: neighbors(grid, j, m) & avail_set for j in occ}
    j_o_n = {n: frozenset(j for j in occ if n in omega[j]) for n in avail}
    return CooperationGraph(omega, j_o_n, int(m))


@dataclass(frozen=True)
class SplitState:
    """Splitting ratios and per-BS ITC capabilities at one protocol round.

    ``capabilities[n]`` is ``S_n = |f_n|^2 - sum_j |f_j theta[j, n]|^2`` and
    ``shares[n] = S_n / |J_o,n|`` is what BS ``n`` broadcasts to each of its
    occupied BSs. BSs with no assigned occupied BS carry no share.
    """

    theta: Mapping[tuple[int, int], float]
    round: int
    capabilities: Mapping[int, float] = field(default_factory=dict)
    shares: Mapping[int, float] = field(default_factory=dict)

    def row(self, j: int, graph: CooperationGraph) -> np.ndarray:
        return np.array([self.theta[(j, n)] for n in sorted(graph.omega_j[j])])


def _make_state(graph: CooperationGraph, channels, theta: dict, rnd: int) -> SplitState:
    caps, shares = {}, {}
    for n, js in graph.j_o_n.items():
        if not js:
            continue
        s = abs(_coef(channels, n)) ** 2
        s -= sum(abs(_coef(channels, j)) ** 2 * theta[(j, n)] ** 2 for j in js)
        caps[n] = s
        shares[n] = s / len(js)
    return SplitState(theta, rnd, caps, shares)


def open_loop_split(graph: CooperationGraph, channels=None) -> SplitState:
    """Equal split ``theta[j, n] = 1 / |Omega_j|`` (round 1).

    Capabilities are filled in only when ``channels`` is given.
    """
    theta = {}
    for j, om in graph.omega_j.items():
        for n in om:
            theta[(j, n)] = 1.0 / len(om)
    if channels is None:
        return SplitState(theta, 1)
    return _make_state(graph, channels, theta, 1)


def closed_loop_round(state: SplitState, graph: CooperationGraph, channels) -> SplitState:
    """One synchronous load-balancing update of every occupied BS's ratios.

    Every occupied BS uses the shares ``A_n`` broadcast at the current round.
    Deficit BSs (``A_n <= 0``) give up ratio in ascending ``A_n`` order, up to
    the quota the surplus BSs can absorb without flipping their sign. Surplus
    BSs then take up the freed ratio in descending ``A_n`` order. Ties are
    broken by BS index.
    """
    if not state.shares and any(graph.omega_j.values()):
        state = _make_state(graph, channels, dict(state.theta), state.round)
    A = state.shares
    theta = dict(state.theta)
    for j, om in graph.omega_j.items():
        if not om:
            continue
        fj2 = abs(_coef(channels, j)) ** 2
        surplus = [n for n in sorted(om) if A[n] > 0]
        deficit = [n for n in sorted(om) if A[n] <= 0]
        if not surplus or not deficit or fj2 == 0:
            continue
        delta = {n: math.sqrt(A[n] / fj2 + theta[(j, n)] ** 2) - theta[(j, n)] for n in surplus}
        quota = sum(delta.values())
        released = 0.0
        for n in sorted(deficit, key=lambda n: A[n]):
            if quota <= 0:
                break
            old = theta[(j, n)]
            new = max(0.0, old - quota)
            theta[(j, n)] = new
            quota -= old - new
            released += old - new
        for n in sorted(surplus, key=lambda n: -A[n]):
            if released <= 0:
                break
            old = theta[(j, n)]
            new = min(1.0, old + min(delta[n], released))
            theta[(j, n)] = new
            released -= new - old
        total = sum(theta[(j, n)] for n in om)
        drift = abs(total - 1.0)
        if drift > ROW_SUM_TOL:
            raise AssertionError(f"splitting ratios of BS {j} sum to {total!r}")
        if drift:
            for n in om:
                theta[(j, n)] /= total
    return _make_state(graph, channels, theta, state.round + 1)


def _portions(state: SplitState, graph: CooperationGraph, channels, n: int):
    js = sorted(graph.j_o_n[n])
    amps = np.array([abs(_coef(channels, j)) for j in js])
    th = np.array([state.theta[(j, n)] for j in js])
    return js, amps, th


def distributed_power_allocation(state: SplitState, graph: CooperationGraph, channels,
                                 P: float) -> PowerAllocation:
    """Per-BS best-effort amplitudes under the high-SNR rule.

    A BS whose capability ``S_n`` is nonnegative cancels every assigned portion
    exactly. Otherwise it scales all portions down together and spends its
    whole budget on cancellation. The UAV gets whatever power remains.
    Columns follow ``graph.available``, rows follow ``graph.occupied``.
    """
    if not P > 0:
        raise InvalidArgumentError("P must be positive")
    occ = graph.occupied
    avail = graph.available
    row_of = {j: k for k, j in enumerate(occ)}
    v_u = np.zeros(len(avail))
    v_j = np.zeros((len(occ), len(avail)))
    sp = math.sqrt(P)
    for col, n in enumerate(avail):
        js, amps, th = _portions(state, graph, channels, n)
        load = float(np.sum(amps ** 2 * th ** 2))
        if not js or load == 0:
            v_u[col] = sp
            continue
        fn = abs(_coef(channels, n))
        S = fn ** 2 - load
        if S >= 0:
            v = amps * sp * th / fn
        else:
            v = fn * amps * sp * th / load
        for j, vv in zip(js, v):
            v_j[row_of[j], col] = vv
        v_u[col] = math.sqrt(max(0.0, P - float(v @ v)))
    return PowerAllocation(v_u, v_j, P)


def residual_interference(state: SplitState, graph: CooperationGraph, channels,
                          P: float) -> dict[int, float]:
    """Residual interference amplitude ``alpha_j`` left at the UAV per occupied BS."""
    sp = math.sqrt(P)
    alpha = {}
    for j, om in graph.omega_j.items():
        fj = abs(_coef(channels, j))
        if not om:
            alpha[j] = sp * fj
            continue
        total = 0.0
        for n in om:
            _, amps, th = _portions(state, graph, channels, n)
            load = float(np.sum(amps ** 2 * th ** 2))
            S = abs(_coef(channels, n)) ** 2 - load
            if S < 0:
                total += -fj * sp * state.theta[(j, n)] * S / load
        alpha[j] = total
    return alpha


class MessageKind(str, enum.Enum):
    CHANNEL_SHARE = "ChannelShare"
    CAPACITY_BROADCAST = "CapacityBroadcast"
    SYMBOL_SHARE = "SymbolShare"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ProtocolMessage:
    """One backhaul message.

    ``payload`` is the ratio-scaled channel ``f_j * theta`` for ChannelShare,
    the share ``A_n`` for CapacityBroadcast and the ratio ``theta`` for
    SymbolShare (a bookkeeping event; no symbol is carried).
    """

    round: int
    kind: MessageKind
    sender: int
    receiver: int
    payload: complex

    def line(self) -> str:
        return f"{self.round} {self.kind} {self.sender} {self.receiver} {abs(self.payload):.9g}"


def _channel_shares(state: SplitState, graph: CooperationGraph, channels, rnd: int):
    out = []
    for j in graph.occupied:
        fj = _coef(channels, j)
        for n in sorted(graph.omega_j[j]):
            out.append(ProtocolMessage(rnd, MessageKind.CHANNEL_SHARE, j, n, fj * state.theta[(j, n)]))
    return out


def run_protocol(graph: CooperationGraph, channels, P: float, noise: float, max_rounds: int,
                 history: list | None = None):
    """Simulate the distributed protocol for ``max_rounds`` exchange rounds.

    Round 1 is the open-loop split. Each later round is one capability
    broadcast followed by one synchronous ratio update, so ``L`` rounds run
    ``L - 1`` updates. If ``history`` is a list, every round's state is
    appended to it.

    Returns
    -------
    allocation : PowerAllocation
        Columns follow ``graph.available``, rows ``graph.occupied``.
    report : SinrReport
        UAV SINR with co-phased UAV weights and anti-phase ITC weights.
    trace : list of ProtocolMessage
    """
    if int(max_rounds) != max_rounds or max_rounds < 1:
        raise InvalidArgumentError(f"max_rounds must be a positive integer, got {max_rounds!r}")
    state = open_loop_split(graph, channels)
    trace = _channel_shares(state, graph, channels, 1)
    if history is not None:
        history.append(state)
    while state.round < max_rounds:
        rnd = state.round
        for n in graph.available:
            for j in sorted(graph.j_o_n[n]):
                trace.append(ProtocolMessage(rnd, MessageKind.CAPACITY_BROADCAST, n, j, state.shares[n]))
        state = closed_loop_round(state, graph, channels)
        trace.extend(_channel_shares(state, graph, channels, state.round))
        if history is not None:
            history.append(state)
    for j in graph.occupied:
        for n in sorted(graph.omega_j[j]):
            if state.theta[(j, n)] > 0:
                trace.append(ProtocolMessage(state.round, MessageKind.SYMBOL_SHARE, j, n,
                                             state.theta[(j, n)]))
    alloc = distributed_power_allocation(state, graph, channels, P)
    f_avail = [_coef(channels, n) for n in graph.available]
    f_occ = [_coef(channels, j) for j in graph.occupied]
    if not f_avail:
        sinr = 0.0
    else:
        sinr = sinr_cb_itc(optimal_phases(alloc, f_avail, f_occ), f_avail, f_occ, P, noise)
    return alloc, SinrReport.from_sinr(Scheme.DISTRIBUTED_ITC, sinr), trace


def export_trace(trace, path) -> None:
    """Write one message per line: ``round kind sender receiver |payload|``."""
    with open(path, "w", encoding="utf-8") as fh:
        for msg in trace:
            fh.write(msg.line() + "\n")
