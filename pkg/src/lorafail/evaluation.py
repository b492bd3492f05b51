"""Confusion-matrix evaluation of a fitted network on held-out labeled data.

Positive class is failure (1).  Both a count matrix and a per-class rate
matrix are produced; ``accuracy`` applies ``(TP + TN) / (TP + TN + FP + FN)``
to whichever one it is given.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal
from typing import Sequence

from .errors import EmptyDataset, EmptyMatrix, LengthMismatch
from .model import PARENT_STATES, BeliefNetwork, conditional_failure_probability, fit_failure_cpt


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def rates(self) -> "RateMatrix":
        """Rates within each actual class; an empty class gives 0.0 rates."""
        pos = self.tp + self.fn
        neg = self.tn + self.fp
        return RateMatrix(
            tp_rate=self.tp / pos if pos else 0.0,
            tn_rate=self.tn / neg if neg else 0.0,
            fp_rate=self.fp / neg if neg else 0.0,
            fn_rate=self.fn / pos if pos else 0.0,
        )

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class RateMatrix:
    tp_rate: float
    tn_rate: float
    fp_rate: float
    fn_rate: float

    def to_dict(self) -> dict[str, float]:
        return {"tp": self.tp_rate, "tn": self.tn_rate, "fp": self.fp_rate, "fn": self.fn_rate}


def confusion_matrix(predicted: Sequence[int], actual: Sequence[int]) -> ConfusionMatrix:
    if len(predicted) != len(actual):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(actual)} labels")
    if not predicted:
        raise EmptyDataset("nothing to evaluate")
    tp = tn = fp = fn = 0
    for p, a in zip(predicted, actual):
        if p not in (0, 1) or a not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got predicted={p!r} actual={a!r}")
        if p and a:
            tp += 1
        elif p:
            fp += 1
        elif a:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, tn, fp, fn)


def accuracy(m: ConfusionMatrix | RateMatrix) -> float:
    if isinstance(m, RateMatrix):
        cells = (m.tp_rate, m.tn_rate, m.fp_rate, m.fn_rate)
    else:
        cells = (m.tp, m.tn, m.fp, m.fn)
    total = sum(cells)
    if total <= 0:
        raise EmptyMatrix("confusion matrix is empty")
    return (cells[0] + cells[1]) / total


def format_accuracy(value: float, places: int = 4) -> str:
    """Truncate rather than round, the way the reference tables print accuracy."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(value)).quantize(quantum, rounding=ROUND_DOWN))


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    rates: RateMatrix
    accuracy: float
    rate_accuracy: float
    train_priors: tuple[float, float]
    test_priors: tuple[float, float]
    cpt_comparison: dict

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.to_dict(),
            "rates": self.rates.to_dict(),
            "accuracy": self.accuracy,
            "rate_accuracy": self.rate_accuracy,
            "priors": {
                "train": {"u": self.train_priors[0], "d": self.train_priors[1]},
                "test": {"u": self.test_priors[0], "d": self.test_priors[1]},
            },
            "cpt": self.cpt_comparison,
        }


def predict(net: BeliefNetwork, states: Sequence[tuple[int, int]], decision_threshold: float = 0.5) -> list[int]:
    return [int(conditional_failure_probability(net, u, d) >= decision_threshold) for u, d in states]


def evaluate(
    net: BeliefNetwork,
    test: Sequence[tuple[int, int, int]],
    decision_threshold: float = 0.5,
    test_priors: tuple[float, float] | None = None,
) -> EvaluationReport:
    """Score ``net`` on held-out ``(u, d, failure)`` triples.

    ``test_priors`` should be the held-out exceedance probabilities per
    direction; without it they are taken from the triples' parent states.
    """
    if not test:
        raise EmptyDataset("no test records")
    predicted = predict(net, [(u, d) for u, d, _ in test], decision_threshold)
    cm = confusion_matrix(predicted, [f for _, _, f in test])
    rates = cm.rates()
    if test_priors is None:
        test_priors = (sum(t[0] for t in test) / len(test), sum(t[1] for t in test) / len(test))

    test_cpt = fit_failure_cpt(test)
    comparison = {}
    for u, d in PARENT_STATES:
        comparison[f"{u},{d}"] = {
            "train": net.failure_cpt[(u, d)],
            "test": None if (u, d) in test_cpt.unobserved else test_cpt[(u, d)],
            "test_count": sum(1 for t in test if t[0] == u and t[1] == d),
        }
    return EvaluationReport(
        confusion=cm,
        rates=rates,
        accuracy=accuracy(cm),
        rate_accuracy=accuracy(rates) if (cm.tp + cm.fn) and (cm.tn + cm.fp) else accuracy(cm),
        train_priors=(net.p_uplink_exceed, net.p_downlink_exceed),
        test_priors=tuple(test_priors),
        cpt_comparison=comparison,
    )
