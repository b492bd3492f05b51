"""Binary exceedance datasets, train/test splits and latency summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyDataset, InvalidConfig
from .ingest import DIRECTIONS, DOWNLINK, UPLINK, LatencySample, TransmissionRecord, compute_latencies
from .rng import Stream

CHRONOLOGICAL = "chronological"
SEEDED_SHUFFLE = "seeded_shuffle"


@dataclass(frozen=True)
class ThresholdConfig:
    uplink_threshold_seconds: float = 37.0
    downlink_threshold_seconds: float = 42.0

    def __post_init__(self):
        for name in ("uplink_threshold_seconds", "downlink_threshold_seconds"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidConfig(name, f"must be a positive number, got {value!r}")

    def for_direction(self, direction: str) -> float:
        if direction == UPLINK:
            return self.uplink_threshold_seconds
        if direction == DOWNLINK:
            return self.downlink_threshold_seconds
        raise ValueError(f"unknown direction {direction!r}")

    @classmethod
    def from_dict(cls, data: dict | None) -> "ThresholdConfig":
        data = data or {}
        return cls(
            float(data.get("uplink_seconds", 37.0)),
            float(data.get("downlink_seconds", 42.0)),
        )


@dataclass(frozen=True)
class ExceedanceDataset:
    direction: str
    indicators: tuple[int, ...]
    threshold_seconds: float

    def __len__(self):
        return len(self.indicators)

    @property
    def probability(self) -> float:
        if not self.indicators:
            raise EmptyDataset(f"no {self.direction} samples")
        return sum(self.indicators) / len(self.indicators)


def threshold_series(samples: Sequence[LatencySample], cfg: ThresholdConfig) -> dict[str, ExceedanceDataset]:
    """One dataset per direction; indicator is 1 iff latency >= that direction's threshold."""
    out = {}
    for direction in DIRECTIONS:
        t = cfg.for_direction(direction)
        bits = tuple(int(s.latency_seconds >= t) for s in samples if s.direction == direction)
        out[direction] = ExceedanceDataset(direction, bits, t)
    return out


def _train_size(n: int, fraction: float) -> int:
    # ceil, so an odd-sized dataset gives its extra element to train
    return min(n, math.ceil(n * fraction - 1e-9))


def split_indices(
    n: int,
    fraction: float = 0.5,
    policy: str = CHRONOLOGICAL,
    seed: int | None = None,
) -> tuple[list[int], list[int]]:
    if not (0.0 < fraction < 1.0):
        raise InvalidConfig("fraction", f"must lie in (0, 1), got {fraction!r}")
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    k = _train_size(n, fraction)
    if policy == CHRONOLOGICAL:
        order = list(range(n))
    elif policy == SEEDED_SHUFFLE:
        if seed is None:
            raise InvalidConfig("seed", "seeded_shuffle needs a seed")
        order = Stream(seed, Stream.SHUFFLE).permutation(n)
    else:
        raise InvalidConfig("policy", f"unknown split policy {policy!r}")
    return sorted(order[:k]), sorted(order[k:])


def split_train_test(
    dataset: ExceedanceDataset,
    fraction: float = 0.5,
    policy: str = CHRONOLOGICAL,
    seed: int | None = None,
) -> tuple[ExceedanceDataset, ExceedanceDataset]:
    """Partition into train and test halves.

    ``chronological`` takes the first ``ceil(n * fraction)`` items as train.
    ``seeded_shuffle`` draws a deterministic permutation from ``seed``; both
    halves keep their original relative order.
    """
    train_idx, test_idx = split_indices(len(dataset), fraction, policy, seed)
    bits = dataset.indicators
    return (
        ExceedanceDataset(dataset.direction, tuple(bits[i] for i in train_idx), dataset.threshold_seconds),
        ExceedanceDataset(dataset.direction, tuple(bits[i] for i in test_idx), dataset.threshold_seconds),
    )


def _nearest_rank(ordered: Sequence[float], pct: float) -> float:
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def summarize(samples: Sequence[LatencySample] | Sequence[float]) -> dict[str, float]:
    values = [s.latency_seconds if isinstance(s, LatencySample) else float(s) for s in samples]
    if not values:
        raise EmptyDataset("cannot summarize zero samples")
    ordered = sorted(values)
    return {
        "count": len(ordered),
        "min": ordered[0],
        "max": ordered[-1],
        "mean": math.fsum(ordered) / len(ordered),
        "p50": _nearest_rank(ordered, 50),
        "p95": _nearest_rank(ordered, 95),
    }


def link_states(
    directions: Sequence[str],
    latencies: Sequence[float],
    order_keys: Sequence,
    cfg: ThresholdConfig,
) -> list[tuple[int, int]]:
    """Exceedance state ``(u, d)`` of the link at each transmission.

    Transmissions are walked in ``order_keys`` order (ties by position).  Each
    one updates the indicator of its own direction; the other direction keeps
    the indicator of its most recent transmission, or 0 if none has happened
    yet.  The result is aligned with the input order.
    """
    order = sorted(range(len(directions)), key=lambda i: (order_keys[i], i))
    state = {UPLINK: 0, DOWNLINK: 0}
    out: list[tuple[int, int] | None] = [None] * len(directions)
    for i in order:
        state[directions[i]] = int(latencies[i] >= cfg.for_direction(directions[i]))
        out[i] = (state[UPLINK], state[DOWNLINK])
    return out


def labeled_triples(records: Sequence[TransmissionRecord], cfg: ThresholdConfig) -> list[tuple[int, int, int]]:
    """``(u, d, failure)`` for every labeled record, in server-time order.

    Records must be cleaned.  Unlabeled records still move the link state but
    produce no triple.
    """
    samples = compute_latencies(records)
    states = link_states(
        [r.direction for r in records],
        [s.latency_seconds for s in samples],
        [r.server_timestamp for r in records],
        cfg,
    )
    order = sorted(range(len(records)), key=lambda i: (records[i].server_timestamp, i))
    return [(*states[i], records[i].failure_label) for i in order if records[i].failure_label is not None]
