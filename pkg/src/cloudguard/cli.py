"""Command-line front end for the protection loop.

Each subcommand reads one JSON configuration document (--config) plus a few
override flags, writes its outputs under --out, and prints a one-line
summary. Exit codes map the package's error taxonomy: 2 configuration or
usage, 3 bad input data, 4 checkpoint problems, 5 filesystem problems,
1 anything else.

Config schemas (all fields optional unless noted):

  generate        {"scenario": {...}}
  train-detector  {"scenario": {...}, "arch": {...}, "epochs": int,
                   "batch_size": int, "lr": float, "threshold": float,
                   "eval_seed": int}
  train-policy    {"env": {...}, "episodes": int, "steps_per_episode": int,
                   "alpha": float, "gamma": float, "epsilon_start": float,
                   "epsilon_end": float, "anneal_fraction": float}
  simulate        {"scenario": {...}, "detector": path|"baseline"|"accept-all",
                   "policy": path, "fixed_action": int, "threshold": float,
                   "replicas": int, "deadline_ms": float, "convergence": path}
  evaluate        {"scenario": {...}, "detector": ..., "threshold": float}
  compare         {"baseline": path, "candidate": path}  (or two positionals)

The "scenario" object is the same shape ScenarioConfig.to_dict produces;
when omitted, the default desk-scale scenario is used with the given seed.
"""

import argparse
import dataclasses
import json
import os
import sys

from . import detector as det
from .baseline import RuleBasedDetector, default_rules
from .environment import DefenseEnv, EnvConfig, defense_train_config
from .errors import (CatalogError, CheckpointError, CloudguardError,
                     ConfigError, DimensionError, FilesystemError, InputError)
from .features import build_layout, extract_features
from .policy import PolicyTrainConfig, save_qtables, train_policy, \
    write_convergence_csv
from .scenario import ScenarioConfig, default_scenario, generate_stream
from .simulate import (BASELINE_DETECTOR, SimConfig, _canonical_json,
                       comparison_to_dict, compare_reports, emit_report,
                       metrics_from_events, run_simulation)
from .telemetry import write_events_jsonl, write_label_sidecar


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a single JSON object")
    return doc


def _resolve_scenario(doc: dict, seed: int | None) -> ScenarioConfig:
    scenario = doc.get("scenario")
    if scenario is None:
        return default_scenario(seed=seed if seed is not None else 0)
    if not isinstance(scenario, dict):
        raise ConfigError("scenario must be an object")
    cfg = ScenarioConfig.from_dict(scenario)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _ensure_out(out: str | None) -> str:
    if out is None:
        raise ConfigError("this subcommand requires --out")
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise FilesystemError(f"cannot create output dir {out}: {exc}") from exc
    return out


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise FilesystemError(f"cannot write {path}: {exc}") from exc


def _cmd_generate(args) -> int:
    doc = _load_config(args.config)
    scenario = _resolve_scenario(doc, args.seed)
    out = _ensure_out(args.out)
    stream = generate_stream(scenario)
    try:
        write_events_jsonl(os.path.join(out, "telemetry.jsonl"), stream.windows)
        write_label_sidecar(os.path.join(out, "labels.csv"), stream.windows)
    except OSError as exc:
        raise FilesystemError(f"cannot write telemetry: {exc}") from exc
    _write_text(os.path.join(out, "scenario.json"),
                _canonical_json(scenario.to_dict()))
    counts = {}
    for w in stream.windows:
        counts[w.label] = counts.get(w.label, 0) + 1
    print(f"generated {len(stream.windows)} windows -> {out} "
          f"({', '.join(f'{k}:{v}' for k, v in sorted(counts.items()))})")
    return 0


def _cmd_train_detector(args) -> int:
    doc = _load_config(args.config)
    scenario = _resolve_scenario(doc, args.seed)
    out = _ensure_out(args.out)
    arch = det.ArchConfig.from_dict(doc["arch"]) if "arch" in doc \
        else det.ArchConfig()
    layout = build_layout(dim=arch.feature_dim)
    train_cfg = det.TrainConfig(
        epochs=int(doc.get("epochs", 30)),
        batch_size=int(doc.get("batch_size", 32)),
        lr=float(doc.get("lr", 1e-3)),
        seed=scenario.seed,
    )
    stream = generate_stream(scenario)
    x, y, stats = det.prepare_dataset(stream, layout, arch.seq_len)
    model = det.build_model(arch, seed=train_cfg.seed)
    det.train(model, x, y, train_cfg)

    eval_seed = int(doc.get("eval_seed", scenario.seed + 1))
    eval_stream = generate_stream(dataclasses.replace(scenario, seed=eval_seed))
    xe, ye, _ = det.prepare_dataset(eval_stream, layout, arch.seq_len, stats)
    metrics = det.evaluate(model, xe, ye,
                           threshold=float(doc.get("threshold",
                                                   det.DEFAULT_THRESHOLD)))
    ckpt = os.path.join(out, "detector.npz")
    det.save_detector(ckpt, model, arch, stats, layout)
    _write_text(os.path.join(out, "evaluation.json"),
                _canonical_json(metrics.to_dict()))
    print(f"trained detector -> {ckpt} "
          f"(eval accuracy {metrics.accuracy:.4f} on seed {eval_seed})")
    return 0


def _cmd_train_policy(args) -> int:
    doc = _load_config(args.config)
    out = _ensure_out(args.out)
    seed = args.seed if args.seed is not None else 0
    env_doc = doc.get("env", {})
    if not isinstance(env_doc, dict):
        raise ConfigError("env must be an object")
    env = DefenseEnv(EnvConfig(seed=seed, **env_doc))
    base = defense_train_config(seed=seed)
    cfg = PolicyTrainConfig(
        episodes=int(doc.get("episodes", base.episodes)),
        steps_per_episode=int(doc.get("steps_per_episode",
                                      base.steps_per_episode)),
        alpha=float(doc.get("alpha", base.alpha)),
        gamma=float(doc.get("gamma", base.gamma)),
        epsilon_start=float(doc.get("epsilon_start", base.epsilon_start)),
        epsilon_end=float(doc.get("epsilon_end", base.epsilon_end)),
        anneal_fraction=float(doc.get("anneal_fraction", base.anneal_fraction)),
        seed=seed,
    )
    tables, curve = train_policy(env, cfg)
    qt = os.path.join(out, "policy.csv")
    save_qtables(qt, tables)
    write_convergence_csv(os.path.join(out, "convergence.csv"), curve)
    tail = curve.moving_avg[-1] if len(curve.moving_avg) else float("nan")
    print(f"trained policy -> {qt} ({cfg.episodes} episodes, "
          f"{len(tables.states())} states, final moving avg {tail:.3f})")
    return 0


def _cmd_simulate(args) -> int:
    doc = _load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.replicas is not None:
        doc["replicas"] = args.replicas
    config = SimConfig.from_dict(doc)
    out = _ensure_out(args.out)
    report, events = run_simulation(config)
    emit_report(report, events, out, args.format)
    d = report.to_dict()
    print(f"simulated {len(events)} windows -> {out} "
          f"(accuracy {d['detection']['accuracy']:.4f}, "
          f"unknown rate {d['detection']['unknown_rate']:.4f}, "
          f"total damage {d['damage']['total']:.1f}, "
          f"availability {d['timing']['availability']:.4f})")
    return 0


def _cmd_evaluate(args) -> int:
    doc = _load_config(args.config)
    scenario = _resolve_scenario(doc, args.seed)
    out = _ensure_out(args.out)
    name = doc.get("detector", BASELINE_DETECTOR)
    config = SimConfig(scenario=scenario, detector=name,
                       threshold=float(doc.get("threshold",
                                               det.DEFAULT_THRESHOLD)))
    # score detection only: enforce the idle action so the loop cost is nil
    report, events = run_simulation(config)
    metrics = metrics_from_events(events)
    _write_text(os.path.join(out, "evaluation.json"),
                _canonical_json(metrics.to_dict()))
    if args.format == "csv":
        rows = ["class,precision,recall,f1,support"]
        for i, cname in enumerate(metrics.classes):
            rows.append(f"{cname},{float(metrics.precision[i])!r},"
                        f"{float(metrics.recall[i])!r},{float(metrics.f1[i])!r},"
                        f"{int(metrics.support[i])}")
        _write_text(os.path.join(out, "per_class_metrics.csv"),
                    "\n".join(rows) + "\n")
    print(f"evaluated {metrics.total} windows -> {out} "
          f"(accuracy {metrics.accuracy:.4f}, "
          f"unknown rate {metrics.unknown_rate:.4f})")
    return 0


def _read_report(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read report: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"report is not valid JSON: {exc}") from exc


def _cmd_compare(args) -> int:
    doc = _load_config(args.config)
    baseline = args.baseline or doc.get("baseline")
    candidate = args.candidate or doc.get("candidate")
    if not baseline or not candidate:
        raise ConfigError("compare needs a baseline and a candidate report "
                          "(two positionals or config keys)")
    rows = compare_reports(_read_report(baseline), _read_report(candidate))
    text = _canonical_json(comparison_to_dict(rows))
    if args.out:
        out = _ensure_out(args.out)
        _write_text(os.path.join(out, "comparison.json"), text)
        print(f"compared {len(rows)} indicators -> {out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudguard",
        description="Synthetic cloud-defense loop: generate traffic, train "
                    "the detector and response policy, simulate, and score.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=False, replicas=False):
        p.add_argument("--config", help="JSON configuration document")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output directory")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"),
                           default="json", help="report format")
        if replicas:
            p.add_argument("--replicas", type=int,
                           help="concurrent scoring shards")

    common(sub.add_parser("generate", help="write a scenario's telemetry"))
    common(sub.add_parser("train-detector", help="fit the sequence classifier"))
    common(sub.add_parser("train-policy", help="fit the response Q-tables"))
    common(sub.add_parser("simulate", help="run the full protection loop"),
           fmt=True, replicas=True)
    common(sub.add_parser("evaluate", help="score detection only"), fmt=True)
    cmp_p = sub.add_parser("compare", help="diff two metrics.json reports")
    cmp_p.add_argument("baseline", nargs="?", help="baseline metrics.json")
    cmp_p.add_argument("candidate", nargs="?", help="candidate metrics.json")
    common(cmp_p)
    return parser


_HANDLERS = {
    "generate": _cmd_generate,
    "train-detector": _cmd_train_detector,
    "train-policy": _cmd_train_policy,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (InputError, DimensionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except (CheckpointError, CatalogError) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 4
    except FilesystemError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return 5
    except CloudguardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
