"""``lfm`` command line: simulate, ingest, analyze, fit, infer, eval, report.

Exit codes: 0 success, 1 validation error, 2 I/O error.  Diagnostics go to
stderr as ``error[CODE]: message``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, evaluation, ingest, model, netsim
from .analysis import CHRONOLOGICAL, SEEDED_SHUFFLE, ThresholdConfig
from .errors import InvalidConfig, LfmError, StoreIo

log = logging.getLogger("lorafail")

STORE_ENV = "LFM_STORE"
FORMATS = ("json", "text", "csv")


@dataclass
class RunConfig:
    store: str | None = None
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    split_fraction: float = 0.5
    split_policy: str = CHRONOLOGICAL
    split_seed: int | None = None
    decision_threshold: float = 0.5
    clock_offset_seconds: float = 0.0
    cpt_prior: float = 0.5
    smoothing: bool = False
    report_path: str | None = None
    report_format: str = "json"

    def validate(self) -> None:
        if self.store is not None and not self.store:
            raise InvalidConfig("store", "path must be non-empty")
        if not (0.0 < self.split_fraction < 1.0):
            raise InvalidConfig("split.fraction", "must lie in (0, 1)")
        if self.split_policy not in (CHRONOLOGICAL, SEEDED_SHUFFLE):
            raise InvalidConfig("split.policy", f"must be {CHRONOLOGICAL} or {SEEDED_SHUFFLE}")
        if self.split_policy == SEEDED_SHUFFLE and self.split_seed is None:
            raise InvalidConfig("split.seed", "seeded_shuffle needs a seed")
        if self.report_format not in FORMATS:
            raise InvalidConfig("report.format", f"must be one of {FORMATS}")
        if self.report_path is not None and not self.report_path:
            raise InvalidConfig("report.path", "path must be non-empty")
        if not (0.0 <= self.cpt_prior <= 1.0):
            raise InvalidConfig("cpt_prior", "must lie in [0, 1]")


def _load_json(path: str, what: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreIo(f"cannot read {what} {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(what, f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidConfig(what, "must be a JSON object")
    return data


def build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(store=os.environ.get(STORE_ENV) or None)
    if getattr(args, "config", None) and args.command != "simulate":
        data = _load_json(args.config, "config")
        try:
            cfg.store = data.get("store", cfg.store)
            cfg.thresholds = ThresholdConfig.from_dict(data.get("thresholds"))
            split = data.get("split") or {}
            cfg.split_fraction = float(split.get("fraction", cfg.split_fraction))
            cfg.split_policy = split.get("policy", cfg.split_policy)
            cfg.split_seed = split.get("seed", cfg.split_seed)
            cfg.decision_threshold = float(data.get("decision_threshold", cfg.decision_threshold))
            cfg.clock_offset_seconds = float(data.get("clock_offset_seconds", cfg.clock_offset_seconds))
            cfg.cpt_prior = float(data.get("cpt_prior", cfg.cpt_prior))
            cfg.smoothing = bool(data.get("smoothing", cfg.smoothing))
            report = data.get("report") or {}
            cfg.report_path = report.get("path", cfg.report_path)
            cfg.report_format = report.get("format", cfg.report_format)
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, LfmError):
                raise
            raise InvalidConfig("config", str(exc)) from None

    overrides = {
        "store": "store",
        "uplink_threshold": None,
        "downlink_threshold": None,
        "split_fraction": "split_fraction",
        "split_policy": "split_policy",
        "split_seed": "split_seed",
        "decision_threshold": "decision_threshold",
        "clock_offset": "clock_offset_seconds",
        "out": "report_path",
        "format": "report_format",
    }
    for arg, attr in overrides.items():
        value = getattr(args, arg, None)
        if value is not None and attr is not None:
            setattr(cfg, attr, value)
    up = getattr(args, "uplink_threshold", None)
    down = getattr(args, "downlink_threshold", None)
    if up is not None or down is not None:
        cfg.thresholds = ThresholdConfig(
            up if up is not None else cfg.thresholds.uplink_threshold_seconds,
            down if down is not None else cfg.thresholds.downlink_threshold_seconds,
        )
    cfg.validate()
    return cfg


# --- report rendering ------------------------------------------------------

def _flatten(data, prefix=""):
    if isinstance(data, dict):
        for key, value in data.items():
            yield from _flatten(value, f"{prefix}.{key}" if prefix else str(key))
    elif isinstance(data, list):
        for i, value in enumerate(data):
            yield from _flatten(value, f"{prefix}[{i}]")
    else:
        yield prefix, data


def _text_value(key: str, value) -> str:
    if isinstance(value, float):
        if key.endswith("accuracy"):
            return evaluation.format_accuracy(value)
        return f"{value:.3f}"
    if value is None:
        return "-"
    return str(value)


def render(report: dict, fmt: str, text_lines=None) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in _flatten(report):
            writer.writerow([key, "" if value is None else value])
        return buf.getvalue()
    lines = list(text_lines or [])
    if lines:
        lines.append("")
    lines.extend(f"{key}: {_text_value(key, value)}" for key, value in _flatten(report))
    return "\n".join(lines) + "\n"


def emit(cfg: RunConfig, report: dict, text_lines=None) -> None:
    out = render(report, cfg.report_format, text_lines)
    if cfg.report_path:
        try:
            Path(cfg.report_path).write_text(out, encoding="utf-8")
        except OSError as exc:
            raise StoreIo(f"cannot write report {cfg.report_path}: {exc}") from exc
    else:
        sys.stdout.write(out)


# --- pipeline pieces -------------------------------------------------------

def _require_store(cfg: RunConfig) -> str:
    if not cfg.store:
        raise InvalidConfig("store", f"no store given (use --store or set {STORE_ENV})")
    return cfg.store


def load_clean_records(cfg: RunConfig):
    path = _require_store(cfg)
    records, errors = ingest.store_read(path)
    for err in errors:
        print(f"warning[{err.code}]: {err}", file=sys.stderr)
    records = ingest.apply_clock_offset(records, cfg.clock_offset_seconds)
    kept, dropped = ingest.clean(records)
    return kept, dropped, errors


@dataclass
class Prepared:
    records: list
    datasets: dict
    train: dict
    test: dict
    triples_train: list
    triples_test: list


def prepare(cfg: RunConfig, records) -> Prepared:
    samples = ingest.compute_latencies(records)
    datasets = analysis.threshold_series(samples, cfg.thresholds)
    train, test = {}, {}
    for direction, ds in datasets.items():
        train[direction], test[direction] = analysis.split_train_test(
            ds, cfg.split_fraction, cfg.split_policy, cfg.split_seed
        )
    triples = analysis.labeled_triples(records, cfg.thresholds)
    if triples:
        tr_idx, te_idx = analysis.split_indices(len(triples), cfg.split_fraction, cfg.split_policy, cfg.split_seed)
        triples_train = [triples[i] for i in tr_idx]
        triples_test = [triples[i] for i in te_idx]
    else:
        triples_train, triples_test = [], []
    return Prepared(records, datasets, train, test, triples_train, triples_test)


def fit_from_prepared(cfg: RunConfig, prep: Prepared, cpt_path: str | None = None) -> model.BeliefNetwork:
    if cpt_path:
        cpt = _load_cpt(cpt_path)
    else:
        if not prep.triples_train:
            raise InvalidConfig("failure_label", "store has no labeled records; supply --cpt")
        cpt = model.fit_failure_cpt(prep.triples_train, cfg.cpt_prior, cfg.smoothing)
    return model.BeliefNetwork(
        prep.train[ingest.UPLINK].probability,
        prep.train[ingest.DOWNLINK].probability,
        cpt,
    )


def _load_cpt(path: str) -> model.FailureCpt:
    data = _load_json(path, "cpt")
    return model.FailureCpt.from_dict(data.get("failure_cpt", data))


def _load_network(path: str) -> model.BeliefNetwork:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreIo(f"cannot read network {path}: {exc}") from exc
    return model.BeliefNetwork.from_json(text)


def priors_table(net: model.BeliefNetwork) -> list[str]:
    lines = [
        "Uplink latency node",
        f"  P(U=1)={net.p_uplink_exceed:.3f}",
        f"  P(U=0)={1 - net.p_uplink_exceed:.3f}",
        "Downlink latency node",
        f"  P(D=1)={net.p_downlink_exceed:.3f}",
        f"  P(D=0)={1 - net.p_downlink_exceed:.3f}",
        "Failure node",
        "  U D  P(F=1|U,D)  P(F=0|U,D)",
    ]
    for u, d in model.PARENT_STATES:
        p = net.failure_cpt[(u, d)]
        lines.append(f"  {u} {d}  {p:10.3f}  {1 - p:10.3f}")
    return lines


def _analysis_report(cfg: RunConfig, prep: Prepared) -> dict:
    samples = ingest.compute_latencies(prep.records)
    report = {"records": len(prep.records), "directions": {}}
    for direction in ingest.DIRECTIONS:
        values = [s.latency_seconds for s in samples if s.direction == direction]
        entry = {"threshold_seconds": cfg.thresholds.for_direction(direction)}
        if values:
            entry["summary"] = analysis.summarize(values)
            entry["exceedance"] = {
                "all": prep.datasets[direction].probability,
                "train": prep.train[direction].probability if len(prep.train[direction]) else None,
                "test": prep.test[direction].probability if len(prep.test[direction]) else None,
            }
            entry["counts"] = {"train": len(prep.train[direction]), "test": len(prep.test[direction])}
        else:
            entry["summary"] = None
        report["directions"][direction] = entry
    return report


def _eval_report(cfg: RunConfig, net: model.BeliefNetwork, prep: Prepared) -> dict:
    if not prep.triples_test:
        raise InvalidConfig("failure_label", "no labeled test records to evaluate on")
    test_priors = (
        prep.test[ingest.UPLINK].probability if len(prep.test[ingest.UPLINK]) else float("nan"),
        prep.test[ingest.DOWNLINK].probability if len(prep.test[ingest.DOWNLINK]) else float("nan"),
    )
    result = evaluation.evaluate(net, prep.triples_test, cfg.decision_threshold, test_priors)
    return result.to_dict()


# --- subcommands -----------------------------------------------------------

def cmd_simulate(args) -> int:
    if not args.config:
        raise InvalidConfig("config", "simulate needs --config")
    if not args.store and not os.environ.get(STORE_ENV):
        raise InvalidConfig("store", f"no store given (use --store or set {STORE_ENV})")
    cfg = RunConfig(report_path=args.out, report_format=args.format or "json")
    cfg.validate()
    sim_cfg = netsim.SimulationConfig.from_dict(_load_json(args.config, "config"))
    store = args.store or os.environ[STORE_ENV]
    if args.seed is not None:
        sim_cfg = netsim.SimulationConfig.from_dict({**sim_cfg.to_dict(), "seed": args.seed})
    out = netsim.simulate(sim_cfg)
    count = netsim.replay_to_store(out, store)
    truth_path = Path(str(store) + ".truth.json")
    try:
        truth_path.write_text(out.truth_json(), encoding="utf-8")
    except OSError as exc:
        raise StoreIo(f"cannot write {truth_path}: {exc}") from exc
    emit(cfg, {"appended": count, "store": str(store), "truth": str(truth_path),
               "counts": out.ground_truth["counts"]})
    return 0


def cmd_ingest(args) -> int:
    cfg = build_run_config(args)
    store = _require_store(cfg)
    try:
        data = Path(args.csv).read_bytes()
    except OSError as exc:
        raise StoreIo(f"cannot read {args.csv}: {exc}") from exc
    records = ingest.parse_csv(data)
    records = ingest.apply_clock_offset(records, cfg.clock_offset_seconds)
    kept, dropped = ingest.clean(records)
    count = ingest.store_append(store, kept)
    reasons: dict[str, int] = {}
    for d in dropped:
        reasons[d.reason] = reasons.get(d.reason, 0) + 1
    emit(cfg, {"parsed": len(records), "appended": count, "dropped": reasons})
    return 0


def cmd_analyze(args) -> int:
    cfg = build_run_config(args)
    records, dropped, _ = load_clean_records(cfg)
    prep = prepare(cfg, records)
    report = _analysis_report(cfg, prep)
    report["dropped"] = len(dropped)
    emit(cfg, report)
    return 0


def cmd_fit(args) -> int:
    cfg = build_run_config(args)
    records, _, _ = load_clean_records(cfg)
    prep = prepare(cfg, records)
    net = fit_from_prepared(cfg, prep, args.cpt)
    if args.network:
        try:
            Path(args.network).write_text(net.to_json(), encoding="utf-8")
        except OSError as exc:
            raise StoreIo(f"cannot write network {args.network}: {exc}") from exc
    report = {
        "network": net.to_dict(),
        "train_counts": {d: len(prep.train[d]) for d in ingest.DIRECTIONS},
        "labeled_train": len(prep.triples_train),
    }
    emit(cfg, report, priors_table(net))
    return 0


def cmd_infer(args) -> int:
    cfg = build_run_config(args)
    net = _load_network(args.network)
    report: dict = {"query": args.query}
    if args.query == "marginal":
        report["p_failure"] = model.marginal_failure_probability(net)
        lines = [f"P(F=1)={report['p_failure']:.4f}"]
    elif args.query == "conditional":
        if args.u is None or args.d is None:
            raise InvalidConfig("query", "conditional needs --u and --d")
        report.update(u=args.u, d=args.d, p_failure=model.conditional_failure_probability(net, args.u, args.d))
        lines = [f"P(F=1|U={args.u},D={args.d})={report['p_failure']:.3f}"]
    else:
        if args.f is None:
            raise InvalidConfig("query", "posterior needs --f")
        post = model.posterior_parents_given_failure(net, args.f)
        report.update(f=args.f, posterior={f"{u},{d}": p for (u, d), p in post.items()})
        report["p_uplink_given_f"] = post[(1, 1)] + post[(1, 0)]
        report["p_downlink_given_f"] = post[(1, 1)] + post[(0, 1)]
        lines = [f"P(U={u},D={d}|F={args.f})={p:.4f}" for (u, d), p in post.items()]
    emit(cfg, report, lines)
    return 0


def cmd_eval(args) -> int:
    cfg = build_run_config(args)
    net = _load_network(args.network)
    records, _, _ = load_clean_records(cfg)
    prep = prepare(cfg, records)
    emit(cfg, _eval_report(cfg, net, prep))
    return 0


def cmd_report(args) -> int:
    cfg = build_run_config(args)
    records, dropped, _ = load_clean_records(cfg)
    prep = prepare(cfg, records)
    net = fit_from_prepared(cfg, prep, args.cpt)
    report = {
        "analysis": _analysis_report(cfg, prep),
        "network": net.to_dict(),
        "p_failure": model.marginal_failure_probability(net),
    }
    report["analysis"]["dropped"] = len(dropped)
    if prep.triples_test:
        report["evaluation"] = _eval_report(cfg, net, prep)
    emit(cfg, report, priors_table(net))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfm", description="LoRaWAN Class-C latency failure analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, store=True, analysis_opts=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=FORMATS, help="report format (default json)")
        if store:
            p.add_argument("--store", help=f"JSON-lines store (default ${STORE_ENV})")
        if analysis_opts:
            p.add_argument("--uplink-threshold", type=float, help="seconds, default 37")
            p.add_argument("--downlink-threshold", type=float, help="seconds, default 42")
            p.add_argument("--split-fraction", type=float)
            p.add_argument("--split-policy", choices=(CHRONOLOGICAL, SEEDED_SHUFFLE))
            p.add_argument("--split-seed", type=int)
            p.add_argument("--decision-threshold", type=float)
            p.add_argument("--clock-offset", type=float, help="seconds added to device timestamps")

    p = sub.add_parser("simulate", help="run the network simulator into a store")
    common(p, analysis_opts=False)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="parse, clean and append a CSV export")
    p.add_argument("csv")
    common(p, analysis_opts=False)
    p.add_argument("--clock-offset", type=float, help="seconds added to device timestamps")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="latency summary and exceedance probabilities")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit the network on the train half")
    common(p)
    p.add_argument("--network", help="write the fitted network JSON here")
    p.add_argument("--cpt", help="take the failure table from this JSON instead of fitting")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("infer", help="query a network file")
    common(p, store=False, analysis_opts=False)
    p.add_argument("--network", required=True)
    p.add_argument("--query", choices=("marginal", "conditional", "posterior"), default="marginal")
    p.add_argument("--u", type=int, choices=(0, 1))
    p.add_argument("--d", type=int, choices=(0, 1))
    p.add_argument("--f", type=int, choices=(0, 1))
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate a network on the test half")
    common(p)
    p.add_argument("--network", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="analyze, fit and evaluate in one report")
    common(p)
    p.add_argument("--cpt", help="take the failure table from this JSON instead of fitting")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LfmError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[IO]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
