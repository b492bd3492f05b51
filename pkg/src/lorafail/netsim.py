"""Seeded simulator of a Class-C device talking through gateway, network server
and application server.

Uplinks leave the device on a fixed period; downlink commands are issued by
the application side as a Poisson process.  Each transmission crosses three
hops, and each hop delay is drawn from its own distribution and quantized to
whole milliseconds, so the end-to-end latency is exactly the sum of the
recorded hop delays.  Failure labels come from a failure table indexed by
the link exceedance state at that transmission (see ``analysis.link_states``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping

from .analysis import ThresholdConfig, link_states
from .errors import InvalidConfig, InvalidNetwork
from .ingest import DOWNLINK, UPLINK, TransmissionRecord, format_timestamp, parse_timestamp, store_append
from .model import FailureCpt, table_iii_network
from .rng import ALGORITHM, Stream

UPLINK_HOPS = ("device_gateway", "gateway_network_server", "network_server_application_server")
DOWNLINK_HOPS = ("application_server_network_server", "network_server_gateway", "gateway_device")

DEFAULT_START = datetime(2020, 1, 1, tzinfo=timezone.utc)

_DIST_PARAMS = {
    "constant": ("c",),
    "uniform": ("lo", "hi"),
    "exponential": ("mean",),
    "lognormal": ("mu", "sigma"),
}


@dataclass(frozen=True)
class Dist:
    """Hop delay distribution in seconds."""

    kind: str
    params: tuple[float, ...]

    def validate(self, where: str) -> None:
        if self.kind not in _DIST_PARAMS:
            raise InvalidConfig(f"{where}.kind", f"unknown distribution {self.kind!r}")
        names = _DIST_PARAMS[self.kind]
        if len(self.params) != len(names):
            raise InvalidConfig(where, f"{self.kind} takes parameters {names}")
        for name, value in zip(names, self.params):
            if not math.isfinite(value):
                raise InvalidConfig(f"{where}.{name}", "must be finite")
        p = self.params
        if self.kind == "constant" and p[0] < 0:
            raise InvalidConfig(f"{where}.c", "must be >= 0")
        if self.kind == "uniform":
            if p[0] < 0:
                raise InvalidConfig(f"{where}.lo", "must be >= 0")
            if p[0] > p[1]:
                raise InvalidConfig(f"{where}.hi", "must be >= lo")
        if self.kind == "exponential" and not p[0] > 0:
            raise InvalidConfig(f"{where}.mean", "must be > 0")
        if self.kind == "lognormal" and p[1] < 0:
            raise InvalidConfig(f"{where}.sigma", "must be >= 0")

    def sample(self, stream: Stream) -> float:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "uniform":
            return p[0] + (p[1] - p[0]) * stream.uniform()
        if self.kind == "exponential":
            return stream.exponential(p[0])
        return math.exp(p[0] + p[1] * stream.normal())

    def sample_ms(self, stream: Stream) -> int:
        return int(round(self.sample(stream) * 1000.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dict(zip(_DIST_PARAMS[self.kind], self.params))}

    @classmethod
    def from_dict(cls, data, where: str = "dist") -> "Dist":
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            dist = cls("constant", (float(data),))
        elif isinstance(data, Mapping):
            kind = data.get("kind")
            if kind not in _DIST_PARAMS:
                raise InvalidConfig(f"{where}.kind", f"unknown distribution {kind!r}")
            try:
                params = tuple(float(data[name]) for name in _DIST_PARAMS[kind])
            except KeyError as exc:
                raise InvalidConfig(f"{where}.{exc.args[0]}", "missing") from None
            except (TypeError, ValueError):
                raise InvalidConfig(where, "parameters must be numbers") from None
            dist = cls(kind, params)
        else:
            raise InvalidConfig(where, "expected a number or a distribution object")
        dist.validate(where)
        return dist


def constant(c: float) -> Dist:
    return Dist("constant", (float(c),))


def uniform(lo: float, hi: float) -> Dist:
    return Dist("uniform", (float(lo), float(hi)))


def exponential(mean: float) -> Dist:
    return Dist("exponential", (float(mean),))


def lognormal(mu: float, sigma: float) -> Dist:
    return Dist("lognormal", (float(mu), float(sigma)))


def _default_uplink_hops() -> dict[str, Dist]:
    return {
        "device_gateway": uniform(0.5, 20.0),
        "gateway_network_server": exponential(8.0),
        "network_server_application_server": lognormal(2.0, 0.6),
    }


def _default_downlink_hops() -> dict[str, Dist]:
    return {
        "application_server_network_server": lognormal(2.0, 0.6),
        "network_server_gateway": exponential(12.0),
        "gateway_device": uniform(0.5, 30.0),
    }


@dataclass(frozen=True)
class SimulationConfig:
    seed: int = 0
    duration_seconds: float = 3600.0
    uplink_period_seconds: float = 60.0
    downlink_command_rate_per_minute: float = 1.0
    uplink_hops: Mapping[str, Dist] = field(default_factory=_default_uplink_hops)
    downlink_hops: Mapping[str, Dist] = field(default_factory=_default_downlink_hops)
    uplink_drop_probability: float = 0.0
    downlink_drop_probability: float = 0.0
    device_clock_offset_seconds: float = 0.0
    failure_model: FailureCpt = field(default_factory=lambda: table_iii_network().failure_cpt)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    device_id: str = "class-c-node-01"
    start_time: datetime = DEFAULT_START
    payload_size_bytes: int = 0
    downlink_command_limit: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not (-(2**63) <= self.seed < 2**64):
            raise InvalidConfig("seed", "must be a 64-bit integer")
        for name in ("duration_seconds", "uplink_period_seconds"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidConfig(name, "must be > 0")
        rate = self.downlink_command_rate_per_minute
        if not (math.isfinite(rate) and rate >= 0):
            raise InvalidConfig("downlink_command_rate_per_minute", "must be >= 0")
        for name in ("uplink_drop_probability", "downlink_drop_probability"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise InvalidConfig(name, "must lie in [0, 1]")
        if not math.isfinite(self.device_clock_offset_seconds):
            raise InvalidConfig("device_clock_offset_seconds", "must be finite")
        for group, names in (("uplink_hops", UPLINK_HOPS), ("downlink_hops", DOWNLINK_HOPS)):
            hops = getattr(self, group)
            if set(hops) != set(names):
                raise InvalidConfig(group, f"must define exactly the hops {names}")
            for name in names:
                hops[name].validate(f"{group}.{name}")
        if not isinstance(self.failure_model, FailureCpt):
            raise InvalidConfig("failure_model", "must be a FailureCpt")
        if self.payload_size_bytes < 0:
            raise InvalidConfig("payload_size_bytes", "must be >= 0")
        if self.downlink_command_limit is not None and self.downlink_command_limit < 0:
            raise InvalidConfig("downlink_command_limit", "must be >= 0")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "duration_seconds": self.duration_seconds,
            "uplink_period_seconds": self.uplink_period_seconds,
            "downlink_command_rate_per_minute": self.downlink_command_rate_per_minute,
            "uplink_hops": {name: self.uplink_hops[name].to_dict() for name in UPLINK_HOPS},
            "downlink_hops": {name: self.downlink_hops[name].to_dict() for name in DOWNLINK_HOPS},
            "drop_probability": {UPLINK: self.uplink_drop_probability, DOWNLINK: self.downlink_drop_probability},
            "device_clock_offset_seconds": self.device_clock_offset_seconds,
            "failure_model": self.failure_model.to_dict(),
            "thresholds": {
                "uplink_seconds": self.thresholds.uplink_threshold_seconds,
                "downlink_seconds": self.thresholds.downlink_threshold_seconds,
            },
            "device_id": self.device_id,
            "start_time": format_timestamp(self.start_time),
            "payload_size_bytes": self.payload_size_bytes,
            "downlink_command_limit": self.downlink_command_limit,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimulationConfig":
        if not isinstance(data, Mapping):
            raise InvalidConfig("config", "must be a JSON object")
        kwargs: dict = {}

        def number(name, cast=float):
            try:
                return cast(data[name])
            except (TypeError, ValueError):
                raise InvalidConfig(name, "must be a number") from None

        if "seed" in data:
            if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
                raise InvalidConfig("seed", "must be an integer")
            kwargs["seed"] = data["seed"]
        for name in ("duration_seconds", "uplink_period_seconds", "downlink_command_rate_per_minute",
                     "device_clock_offset_seconds"):
            if name in data:
                kwargs[name] = number(name)
        if "payload_size_bytes" in data:
            kwargs["payload_size_bytes"] = number("payload_size_bytes", int)
        if data.get("downlink_command_limit") is not None:
            kwargs["downlink_command_limit"] = number("downlink_command_limit", int)
        for group, names, default in (("uplink_hops", UPLINK_HOPS, _default_uplink_hops),
                                      ("downlink_hops", DOWNLINK_HOPS, _default_downlink_hops)):
            if group in data:
                given = data[group]
                if not isinstance(given, Mapping):
                    raise InvalidConfig(group, "must be an object of hop distributions")
                unknown = set(given) - set(names)
                if unknown:
                    raise InvalidConfig(f"{group}.{sorted(unknown)[0]}", "unknown hop")
                hops = default()
                hops.update({name: Dist.from_dict(given[name], f"{group}.{name}") for name in given})
                kwargs[group] = hops
        drops = data.get("drop_probability")
        if drops is not None:
            if isinstance(drops, Mapping):
                up, down = drops.get(UPLINK, 0.0), drops.get(DOWNLINK, 0.0)
            else:
                up = down = drops
            try:
                kwargs["uplink_drop_probability"] = float(up)
                kwargs["downlink_drop_probability"] = float(down)
            except (TypeError, ValueError):
                raise InvalidConfig("drop_probability", "must be numbers") from None
        if "failure_model" in data:
            try:
                kwargs["failure_model"] = FailureCpt.from_dict(data["failure_model"])
            except (InvalidNetwork, AttributeError) as exc:
                raise InvalidConfig("failure_model", str(exc)) from None
        if "thresholds" in data:
            kwargs["thresholds"] = ThresholdConfig.from_dict(data["thresholds"])
        if "device_id" in data:
            kwargs["device_id"] = str(data["device_id"])
        if "start_time" in data:
            try:
                kwargs["start_time"] = parse_timestamp(str(data["start_time"]))
            except ValueError:
                raise InvalidConfig("start_time", "must be an ISO 8601 instant") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SimulationConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig("config", f"not valid JSON: {exc}") from None
        return cls.from_dict(data)


@dataclass(frozen=True)
class SimulationOutput:
    records: list[TransmissionRecord]
    hop_delays_ms: list[tuple[int, int, int]]
    ground_truth: dict

    @property
    def true_latencies(self) -> list[float]:
        return [sum(h) / 1000.0 for h in self.hop_delays_ms]

    def truth_json(self) -> str:
        return json.dumps(self.ground_truth, indent=2, sort_keys=True) + "\n"


def _uplink_send_times(cfg: SimulationConfig) -> list[int]:
    times = []
    k = 0
    while k * cfg.uplink_period_seconds < cfg.duration_seconds:
        times.append(int(round(k * cfg.uplink_period_seconds * 1000.0)))
        k += 1
    return times


def _downlink_send_times(cfg: SimulationConfig, stream: Stream) -> list[int]:
    rate = cfg.downlink_command_rate_per_minute
    if rate == 0:
        return []
    mean_gap = 60.0 / rate
    limit = cfg.downlink_command_limit
    times = []
    t = stream.exponential(mean_gap)
    while t < cfg.duration_seconds and (limit is None or len(times) < limit):
        times.append(int(round(t * 1000.0)))
        t += stream.exponential(mean_gap)
    return times


def simulate(cfg: SimulationConfig) -> SimulationOutput:
    cfg.validate()
    up_hops = [cfg.uplink_hops[name] for name in UPLINK_HOPS]
    down_hops = [cfg.downlink_hops[name] for name in DOWNLINK_HOPS]
    up_stream = Stream(cfg.seed, Stream.UPLINK_HOPS)
    arrival_stream = Stream(cfg.seed, Stream.DOWNLINK_ARRIVALS)
    down_stream = Stream(cfg.seed, Stream.DOWNLINK_HOPS)
    drop_stream = Stream(cfg.seed, Stream.DROPS)
    fail_stream = Stream(cfg.seed, Stream.FAILURES)

    # (send_ms, direction_rank, seq, direction, hops)
    events = []
    counts = {UPLINK: [0, 0], DOWNLINK: [0, 0]}  # generated, dropped
    for seq, send in enumerate(_uplink_send_times(cfg)):
        hops = tuple(h.sample_ms(up_stream) for h in up_hops)
        counts[UPLINK][0] += 1
        if drop_stream.bernoulli(cfg.uplink_drop_probability):
            counts[UPLINK][1] += 1
            continue
        events.append((send, 0, seq, UPLINK, hops))
    for seq, send in enumerate(_downlink_send_times(cfg, arrival_stream)):
        hops = tuple(h.sample_ms(down_stream) for h in down_hops)
        counts[DOWNLINK][0] += 1
        if drop_stream.bernoulli(cfg.downlink_drop_probability):
            counts[DOWNLINK][1] += 1
            continue
        events.append((send, 1, seq, DOWNLINK, hops))
    events.sort(key=lambda e: e[:3])

    # one radio: two downlinks cannot reach the device in the same millisecond,
    # so a colliding reception waits 1 ms on the gateway->device hop
    received = set()
    for i, e in enumerate(events):
        if e[3] != DOWNLINK:
            continue
        hops = e[4]
        while e[0] + sum(hops) in received:
            hops = (hops[0], hops[1], hops[2] + 1)
        received.add(e[0] + sum(hops))
        events[i] = (*e[:4], hops)

    latency_ms = [sum(e[4]) for e in events]
    # the server sees an uplink on arrival and a downlink on issue
    server_ms = [e[0] + lat if e[3] == UPLINK else e[0] for e, lat in zip(events, latency_ms)]
    states = link_states([e[3] for e in events], [ms / 1000.0 for ms in latency_ms], server_ms, cfg.thresholds)

    offset = timedelta(milliseconds=round(cfg.device_clock_offset_seconds * 1000.0))
    start = cfg.start_time
    records = []
    for e, lat, state in zip(events, latency_ms, states):
        send = start + timedelta(milliseconds=e[0])
        recv = send + timedelta(milliseconds=lat)
        label = fail_stream.bernoulli(cfg.failure_model[state])
        if e[3] == UPLINK:
            device_ts, server_ts = send + offset, recv
        else:
            device_ts, server_ts = recv + offset, send
        records.append(TransmissionRecord(cfg.device_id, e[3], device_ts, server_ts, cfg.payload_size_bytes, label))

    truth = {
        "prng": ALGORITHM,
        "config": cfg.to_dict(),
        "counts": {
            direction: {"generated": g, "dropped": d, "emitted": g - d}
            for direction, (g, d) in counts.items()
        },
    }
    return SimulationOutput(records, [e[4] for e in events], truth)


def replay_to_store(output: SimulationOutput, store_path: str | Path) -> int:
    return store_append(store_path, output.records)
