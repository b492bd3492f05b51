"""Latency-driven failure analysis for LoRaWAN Class-C links."""

from .analysis import ExceedanceDataset, ThresholdConfig, split_train_test, summarize, threshold_series
from .evaluation import ConfusionMatrix, RateMatrix, accuracy, confusion_matrix, evaluate
from .ingest import (
    LatencySample,
    TransmissionRecord,
    apply_clock_offset,
    clean,
    compute_latencies,
    parse_csv,
    store_append,
    store_export_csv,
)
from .model import (
    BeliefNetwork,
    ExceedanceEstimate,
    FailureCpt,
    conditional_failure_probability,
    estimate_exceedance_probability,
    fit_failure_cpt,
    joint_probability,
    marginal_failure_probability,
    posterior_parents_given_failure,
    table_iii_network,
)
from .netsim import SimulationConfig, SimulationOutput, replay_to_store, simulate

__version__ = "0.1.0"
