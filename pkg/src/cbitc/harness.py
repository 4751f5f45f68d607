"""Monte-Carlo scheme comparison over random terrestrial UE layouts.

Every realization ``i`` draws from its own streams, ``default_rng([seed, i, 0])``
for the UE layout and ``default_rng([seed, i, 1])`` for the channels, so adding
sweep points or running in parallel never changes what a realization sees.
UE layouts are nested (the first ``K`` UEs of a larger layout) and channels
are common across sweep points, which keeps sweep curves smooth.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beamforming import Scheme, sinr_conventional_cb, sinr_no_cb
from .channel import AntennaConfig, ChannelParams, as_complex, dbm2watt, noise_power, sample_channels
from .distributed import build_cooperation_graph, run_protocol
from .errors import InvalidArgumentError, PackingInfeasibleError
from .scheduler import available_bss, best_single_server, place_ues
from .solver import centralized_optimum
from .topology import build_grid

log = logging.getLogger(__name__)

SWEEPS = ("power", "ues", "rounds", "altitude")
CSV_HEADER = ["scheme", "P_dBm", "K", "M", "L", "mean_rate_bps_hz", "mean_sinr_dB", "realizations"]
# Distributed <= centralized is exact in theory; the conic solver is accurate to ~1e-8
SANDWICH_RTOL = 1e-6


class ExperimentError(RuntimeError):
    """One or more realizations could not be evaluated."""


def _channel_fields() -> set[str]:
    return {f.name for f in dataclasses.fields(ChannelParams)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's output.

    ``cooperation_size`` may be a single M or a sequence of them; each M gives
    its own distributed-scheme rows. ``channel`` holds overrides of
    :class:`~cbitc.channel.ChannelParams` fields. ``power_dbm`` is the fixed
    power of the non-power sweeps.
    """

    seed: int = 0
    realizations: int = 200
    power_sweep: tuple = tuple(range(-10, 45, 5))
    power_dbm: float = 30.0
    ue_count: int = 7
    ue_sweep: tuple = tuple(range(1, 10))
    cooperation_size: tuple = (4,)
    exchange_rounds: int = 3
    round_sweep: tuple = tuple(range(1, 11))
    icic_tier: int = 1
    uav_altitude: float = 200.0
    altitude_sweep: tuple = (50.0, 100.0, 150.0, 200.0, 250.0, 300.0)
    uav_xy: tuple = (150.0, 420.0)
    tiers: int = 3
    cell_radius: float = 800.0
    bs_height: float = 25.0
    schemes: tuple = tuple(Scheme)
    channel: dict = field(default_factory=dict)

    def __post_init__(self):
        as_tuple = lambda v: tuple(v) if isinstance(v, (list, tuple)) else (v,)
        object.__setattr__(self, "power_sweep", tuple(float(p) for p in as_tuple(self.power_sweep)))
        object.__setattr__(self, "ue_sweep", tuple(int(k) for k in as_tuple(self.ue_sweep)))
        object.__setattr__(self, "round_sweep", tuple(int(k) for k in as_tuple(self.round_sweep)))
        object.__setattr__(self, "altitude_sweep", tuple(float(h) for h in as_tuple(self.altitude_sweep)))
        object.__setattr__(self, "cooperation_size", tuple(int(m) for m in as_tuple(self.cooperation_size)))
        object.__setattr__(self, "uav_xy", tuple(float(v) for v in self.uav_xy))
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in as_tuple(self.schemes)))
        object.__setattr__(self, "channel", dict(self.channel))
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise InvalidArgumentError("realizations must be a positive integer")
        if not self.schemes:
            raise InvalidArgumentError("at least one scheme is required")
        unknown = set(self.channel) - _channel_fields()
        if unknown:
            raise InvalidArgumentError(f"unknown channel parameters: {sorted(unknown)}")
        if Scheme.DISTRIBUTED_ITC in self.schemes:
            if not self.cooperation_size:
                raise InvalidArgumentError("distributed scheme needs a cooperation size")
            if min(self.cooperation_size) < self.icic_tier + 1:
                raise InvalidArgumentError("cooperation size M must be at least icic_tier + 1")
        if len(self.uav_xy) != 2:
            raise InvalidArgumentError("uav_xy needs two coordinates")
        self.channel_params()

    def channel_params(self) -> ChannelParams:
        return ChannelParams(**self.channel)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        """Build from a flat mapping. ChannelParams fields may appear at top level."""
        own = {f.name for f in dataclasses.fields(cls)}
        chan = _channel_fields()
        kwargs, channel = {}, dict(data.get("channel", {}))
        for key, val in data.items():
            if key == "channel":
                continue
            if key in own:
                kwargs[key] = val
            elif key in chan:
                channel[key] = val
            else:
                raise InvalidArgumentError(f"unknown config key {key!r}")
        return cls(**kwargs, channel=channel)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise InvalidArgumentError("config file must hold a JSON object")
        return cls.from_mapping(data)


@dataclass(frozen=True)
class ResultRow:
    scheme: Scheme
    P_dBm: float
    K: int
    M: int
    L: int
    mean_rate: float
    mean_sinr_dB: float
    realization_count: int
    uav_altitude: float | None = None


@dataclass(frozen=True)
class _Point:
    P_dBm: float
    K: int
    L: int
    altitude: float


def _sweep_points(config: ExperimentConfig, sweep: str) -> list[_Point]:
    c = config
    if sweep == "power":
        return [_Point(p, c.ue_count, c.exchange_rounds, c.uav_altitude) for p in c.power_sweep]
    if sweep == "ues":
        return [_Point(c.power_dbm, k, c.exchange_rounds, c.uav_altitude) for k in c.ue_sweep]
    if sweep == "rounds":
        return [_Point(c.power_dbm, c.ue_count, L, c.uav_altitude) for L in c.round_sweep]
    if sweep == "altitude":
        return [_Point(c.power_dbm, c.ue_count, c.exchange_rounds, h) for h in c.altitude_sweep]
    raise InvalidArgumentError(f"unknown sweep {sweep!r}; expected one of {SWEEPS}")


def _row_keys(config: ExperimentConfig, sweep: str, points):
    """Ordered (point, scheme, M) keys; scheme order follows the config."""
    keys = []
    for idx, pt in enumerate(points):
        for scheme in config.schemes:
            if scheme == Scheme.DISTRIBUTED_ITC:
                keys.extend((pt, scheme, m) for m in config.cooperation_size)
            elif sweep != "rounds" or idx == 0:
                # the round count only affects the distributed scheme
                keys.append((pt, scheme, 0))
    return keys


def evaluate_realization(config: ExperimentConfig, sweep: str, index: int) -> dict:
    """SINR of every (sweep point, scheme, M) key for one realization."""
    points = _sweep_points(config, sweep)
    keys = _row_keys(config, sweep, points)
    grid = build_grid(config.tiers, config.cell_radius, config.bs_height)
    params = config.channel_params()
    antenna = AntennaConfig()
    noise = noise_power(params)
    q = config.icic_tier
    k_max = max(pt.K for pt in points)
    try:
        _, order = place_ues(np.random.default_rng([config.seed, index, 0]), grid, k_max, q)
    except PackingInfeasibleError as exc:
        raise PackingInfeasibleError(f"layout {index}: {exc}") from exc

    channels_at: dict[float, np.ndarray] = {}
    out: dict = {}
    cache: dict = {}
    for pt, scheme, m in keys:
        if pt.altitude not in channels_at:
            # same stream at every altitude: common random numbers across the sweep
            rng = np.random.default_rng([config.seed, index, 1])
            uav = np.array([*config.uav_xy, pt.altitude])
            channels_at[pt.altitude] = as_complex(sample_channels(rng, params, antenna, grid.bs_positions, uav))
        cc = channels_at[pt.altitude]
        occupied = sorted(order[:pt.K])
        available = sorted(available_bss(grid, occupied, q))
        P = float(dbm2watt(pt.P_dBm))
        h = np.abs(cc[available])
        f = np.abs(cc[occupied])
        if not available:
            out[(pt, scheme, m)] = 0.0
            continue
        if scheme == Scheme.NO_CB:
            best = best_single_server(available, cc)
            sinr = sinr_no_cb(abs(cc[best]) ** 2, f ** 2, P, noise)
        elif scheme == Scheme.CONV_CB:
            sinr = sinr_conventional_cb(h, f ** 2, P, noise)
        elif scheme == Scheme.CENTRALIZED_ITC:
            ck = (pt.P_dBm, pt.K, pt.altitude)
            if ck not in cache:
                cache[ck] = centralized_optimum(h, f, P, noise)[1]
            sinr = cache[ck]
        else:
            graph = build_cooperation_graph(grid, occupied, available, m, q)
            sinr = run_protocol(graph, cc, P, noise, pt.L)[1].sinr
        out[(pt, scheme, m)] = sinr

    # end-to-end sandwich check for the realization
    for (pt, scheme, m), sinr in out.items():
        if scheme != Scheme.DISTRIBUTED_ITC:
            continue
        ck = (pt.P_dBm, pt.K, pt.altitude)
        if ck in cache and sinr > cache[ck] * (1.0 + SANDWICH_RTOL):
            raise ExperimentError(f"realization {index}: distributed SINR {sinr} exceeds "
                                  f"centralized {cache[ck]} at {pt}")
    return out


def _evaluate_chunk(args):
    config, sweep, indices = args
    return [evaluate_realization(config, sweep, i) for i in indices]


def run_experiment(config: ExperimentConfig, sweep: str = "power", parallel: int = 1) -> list[ResultRow]:
    """Average every enabled scheme over the configured realizations.

    Results do not depend on ``parallel``: realizations are independent and
    the reduction runs in realization order.
    """
    points = _sweep_points(config, sweep)
    keys = _row_keys(config, sweep, points)
    n = config.realizations
    if parallel is None or parallel <= 1:
        per_real = [evaluate_realization(config, sweep, i) for i in range(n)]
    else:
        chunk = max(1, math.ceil(n / (4 * parallel)))
        jobs = [(config, sweep, range(s, min(n, s + chunk))) for s in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            per_real = [r for part in pool.map(_evaluate_chunk, jobs) for r in part]

    rows = []
    for key in keys:
        pt, scheme, m = key
        sinrs = np.array([r[key] for r in per_real])
        rates = np.log2(1.0 + sinrs)
        mean_sinr = float(np.mean(sinrs))
        rows.append(ResultRow(
            scheme=scheme, P_dBm=pt.P_dBm, K=pt.K, M=m,
            L=pt.L if scheme == Scheme.DISTRIBUTED_ITC else 0,
            mean_rate=float(np.mean(rates)),
            mean_sinr_dB=10.0 * math.log10(mean_sinr) if mean_sinr > 0 else -math.inf,
            realization_count=n,
            uav_altitude=pt.altitude if sweep == "altitude" else None,
        ))
    return rows


def _fmt(x) -> str:
    return f"{x:.6g}"


def write_rows(rows, fh) -> None:
    """Write rows to an open text stream (see :func:`emit_csv`)."""
    rows = list(rows)
    if not rows:
        raise InvalidArgumentError("no rows to write")
    with_alt = rows[0].uav_altitude is not None
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER + (["uav_altitude_m"] if with_alt else []))
    for r in rows:
        line = [str(r.scheme), _fmt(r.P_dBm), r.K, r.M, r.L, _fmt(r.mean_rate),
                _fmt(r.mean_sinr_dB), r.realization_count]
        if with_alt:
            line.append(_fmt(r.uav_altitude))
        writer.writerow(line)


def emit_csv(rows, path) -> None:
    """Write rows with a fixed header and 6 significant digits.

    An ``uav_altitude_m`` column is appended when the rows carry altitudes.
    Empty input raises before any file is created.
    """
    rows = list(rows)
    if not rows:
        raise InvalidArgumentError("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_rows(rows, fh)


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [ResultRow(
            scheme=Scheme(d["scheme"]), P_dBm=float(d["P_dBm"]), K=int(d["K"]), M=int(d["M"]),
            L=int(d["L"]), mean_rate=float(d["mean_rate_bps_hz"]),
            mean_sinr_dB=float(d["mean_sinr_dB"]), realization_count=int(d["realizations"]),
            uav_altitude=float(d["uav_altitude_m"]) if "uav_altitude_m" in d else None,
        ) for d in reader]
