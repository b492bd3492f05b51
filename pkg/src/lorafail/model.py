"""Three-node belief network: uplink and downlink exceedance feeding a failure node.

The two parent nodes are marginally independent binary variables; the child
holds ``P(F=1 | u, d)`` for the four parent states.  Everything here is
exact enumeration, no approximation.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import EmptyDataset, InvalidNetwork, ZeroEvidence

PARENT_STATES: tuple[tuple[int, int], ...] = ((1, 1), (1, 0), (0, 1), (0, 0))


def _check_bit(name: str, value: int) -> None:
    if value not in (0, 1):
        raise InvalidNetwork(f"{name} must be 0 or 1, got {value!r}")


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise InvalidNetwork(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _bernoulli(p: float, x: int) -> float:
    return p if x == 1 else 1.0 - p


@dataclass(frozen=True)
class ExceedanceEstimate:
    probability: float
    sample_count: int
    threshold_seconds: float


@dataclass(frozen=True, eq=False)
class FailureCpt:
    """``P(F=1 | u, d)`` keyed by ``(u, d)``; ``P(F=0 | .)`` is the complement.

    ``unobserved`` lists parent states that had no training data and were
    filled with the configured prior.
    """

    p_fail_given: Mapping[tuple[int, int], float]
    unobserved: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        table = {}
        for state in PARENT_STATES:
            if state not in self.p_fail_given:
                raise InvalidNetwork(f"missing CPT entry for parent state {state}")
            table[state] = _check_prob(f"P(F=1|{state[0]},{state[1]})", self.p_fail_given[state])
        extra = set(self.p_fail_given) - set(PARENT_STATES)
        if extra:
            raise InvalidNetwork(f"unexpected CPT keys {sorted(extra)}")
        object.__setattr__(self, "p_fail_given", MappingProxyType(table))
        object.__setattr__(self, "unobserved", frozenset(self.unobserved))

    def __getitem__(self, state: tuple[int, int]) -> float:
        return self.p_fail_given[state]

    def __eq__(self, other):
        if not isinstance(other, FailureCpt):
            return NotImplemented
        return dict(self.p_fail_given) == dict(other.p_fail_given) and self.unobserved == other.unobserved

    def to_dict(self) -> dict[str, float]:
        return {f"{u},{d}": self.p_fail_given[(u, d)] for u, d in PARENT_STATES}

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "FailureCpt":
        table = {}
        for key, value in data.items():
            try:
                u, d = (int(part) for part in key.split(","))
            except ValueError:
                raise InvalidNetwork(f"bad CPT key {key!r}, expected 'u,d'") from None
            table[(u, d)] = value
        return cls(table)


@dataclass(frozen=True)
class BeliefNetwork:
    p_uplink_exceed: float
    p_downlink_exceed: float
    failure_cpt: FailureCpt

    def __post_init__(self):
        object.__setattr__(self, "p_uplink_exceed", _check_prob("p_uplink_exceed", self.p_uplink_exceed))
        object.__setattr__(self, "p_downlink_exceed", _check_prob("p_downlink_exceed", self.p_downlink_exceed))
        if not isinstance(self.failure_cpt, FailureCpt):
            raise InvalidNetwork("failure_cpt must be a FailureCpt")

    def to_dict(self) -> dict:
        out = {
            "p_uplink_exceed": self.p_uplink_exceed,
            "p_downlink_exceed": self.p_downlink_exceed,
            "failure_cpt": self.failure_cpt.to_dict(),
        }
        if self.failure_cpt.unobserved:
            out["unobserved_cells"] = [f"{u},{d}" for u, d in sorted(self.failure_cpt.unobserved, reverse=True)]
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "BeliefNetwork":
        try:
            cpt = FailureCpt.from_dict(data["failure_cpt"])
            unobserved = data.get("unobserved_cells") or []
            if unobserved:
                states = frozenset(tuple(int(x) for x in key.split(",")) for key in unobserved)
                cpt = FailureCpt(cpt.p_fail_given, states)
            return cls(data["p_uplink_exceed"], data["p_downlink_exceed"], cpt)
        except KeyError as exc:
            raise InvalidNetwork(f"missing key {exc.args[0]!r}") from None
        except (TypeError, AttributeError) as exc:
            raise InvalidNetwork(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BeliefNetwork":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidNetwork(f"not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidNetwork("network document must be a JSON object")
        return cls.from_dict(data)


def estimate_exceedance_probability(latencies: Sequence[float], threshold: float) -> ExceedanceEstimate:
    """Fraction of latencies at or above ``threshold`` (inclusive)."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold!r}")
    if len(latencies) == 0:
        raise EmptyDataset("no latencies to estimate from")
    hits = sum(1 for x in latencies if x >= threshold)
    return ExceedanceEstimate(hits / len(latencies), len(latencies), float(threshold))


def joint_probability(net: BeliefNetwork, u: int, d: int, f: int) -> float:
    _check_bit("u", u)
    _check_bit("d", d)
    _check_bit("f", f)
    return (
        _bernoulli(net.p_uplink_exceed, u)
        * _bernoulli(net.p_downlink_exceed, d)
        * _bernoulli(net.failure_cpt[(u, d)], f)
    )


def marginal_failure_probability(net: BeliefNetwork) -> float:
    return math.fsum(joint_probability(net, u, d, 1) for u, d in PARENT_STATES)


def conditional_failure_probability(net: BeliefNetwork, u: int, d: int) -> float:
    _check_bit("u", u)
    _check_bit("d", d)
    return net.failure_cpt[(u, d)]


def posterior_parents_given_failure(net: BeliefNetwork, f: int) -> dict[tuple[int, int], float]:
    """Diagnostic query ``P(u, d | F=f)`` over the four parent states."""
    _check_bit("f", f)
    joint = {state: joint_probability(net, *state, f) for state in PARENT_STATES}
    evidence = math.fsum(joint.values())
    if evidence == 0.0:
        raise ZeroEvidence(f"P(F={f}) is zero under this network")
    return {state: p / evidence for state, p in joint.items()}


def fit_failure_cpt(
    labeled: Iterable[tuple[int, int, int]],
    prior: float = 0.5,
    smoothing: bool = False,
) -> FailureCpt:
    """Per-cell failure frequencies from ``(u, d, failure)`` triples.

    Empty cells take ``prior`` and are listed in ``FailureCpt.unobserved``.
    ``smoothing`` switches to add-one estimates ``(k + 1) / (n + 2)``.
    """
    _check_prob("prior", prior)
    counts = {state: [0, 0] for state in PARENT_STATES}
    total = 0
    for u, d, f in labeled:
        _check_bit("u", u)
        _check_bit("d", d)
        _check_bit("failure", f)
        counts[(u, d)][0] += f
        counts[(u, d)][1] += 1
        total += 1
    if total == 0:
        raise EmptyDataset("no labeled records to fit the failure table")

    table = {}
    unobserved = set()
    for state, (failures, n) in counts.items():
        if smoothing:
            table[state] = (failures + 1) / (n + 2)
        elif n == 0:
            table[state] = prior
        else:
            table[state] = failures / n
        if n == 0:
            unobserved.add(state)
    return FailureCpt(table, frozenset(unobserved))


def fit_network(
    uplink_latencies: Sequence[float],
    downlink_latencies: Sequence[float],
    labeled: Iterable[tuple[int, int, int]],
    uplink_threshold: float = 37.0,
    downlink_threshold: float = 42.0,
    prior: float = 0.5,
    smoothing: bool = False,
) -> BeliefNetwork:
    up = estimate_exceedance_probability(uplink_latencies, uplink_threshold)
    down = estimate_exceedance_probability(downlink_latencies, downlink_threshold)
    return BeliefNetwork(up.probability, down.probability, fit_failure_cpt(labeled, prior, smoothing))


def table_iii_network() -> BeliefNetwork:
    """Reference network shipped as ``data/tableIII.json``."""
    text = resources.files("lorafail").joinpath("data/tableIII.json").read_text(encoding="utf-8")
    return BeliefNetwork.from_json(text)
