"""Command-line interface.

Exit codes: 0 success, 1 validation error (bad flags, files, or data),
2 runtime failure.  Set GLANCE_LOG=error|info|debug for stderr logging.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from .config import TrainConfig
from .errors import ValidationError
from .graph import graph_stats, load_dataset, load_splits, make_splits
from .logic import LogicLayerParams, harden
from .model import forward, init_glance, prepare
from .refine import audit
from .tensor import Tensor
from .train import accuracy, load_checkpoint, save_checkpoint, train

log = logging.getLogger("glance")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config(args) -> TrainConfig:
    cfg = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _splits(args, g, cfg):
    if getattr(args, "splits", None):
        return load_splits(args.splits, g.num_nodes)
    return make_splits(g, cfg.split_fractions, cfg.seed)


def cmd_train(args) -> int:
    g = load_dataset(args.data)
    cfg = _config(args)
    params, metrics = train(g, _splits(args, g, cfg), cfg, model=args.model)
    if args.timestamp:
        metrics.summary["timestamp"] = datetime.now(timezone.utc).isoformat()
    metrics.write(args.out)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, params, cfg,
                        {"best_epoch": metrics.summary["best_epoch"]})
    s = metrics.summary
    print(f"test_acc={s['test_acc']:.4f} best_epoch={s['best_epoch']} seed={s['seed']}")
    return 0


def cmd_eval(args) -> int:
    params, cfg, _ = load_checkpoint(args.checkpoint)
    g = load_dataset(args.data)
    splits = _splits(args, g, cfg)
    logits = forward(prepare(g, cfg), params, requires_grad=False).logits.values
    _emit({
        "model": params.kind,
        "seed": cfg.seed,
        "split": args.split,
        "accuracy": accuracy(logits, g.labels, getattr(splits, args.split)),
    }, args.out)
    return 0


def cmd_stats(args) -> int:
    _emit(graph_stats(load_dataset(args.data)), args.out)
    return 0


def cmd_explain(args) -> int:
    params, cfg, _ = load_checkpoint(args.checkpoint)
    if params.kind != "glance" or params.wiring is None:
        raise ValidationError(f"checkpoint holds a {params.kind!r} model with no logic layer")
    logic = LogicLayerParams(params.wiring, Tensor(params.blocks["gate_logits"]), cfg.hidden)
    _emit(harden(logic), args.out)
    return 0


def cmd_inspect_graph(args) -> int:
    g = load_dataset(args.data)
    if args.checkpoint:
        params, cfg, _ = load_checkpoint(args.checkpoint)
        if params.kind != "glance":
            raise ValidationError("inspect-graph needs a GLANCE checkpoint")
    else:
        cfg = _config(args)
        params = None
    if g.num_edges == 0:
        raise ValidationError("graph has no edges to inspect")
    ctx = prepare(g, cfg)
    if params is None:
        params = init_glance(ctx)
    result = forward(ctx, params, requires_grad=False)
    report = audit(g, result.alpha, result.refined)
    report["seed"] = cfg.seed
    _emit(report, args.out)
    return 0


def _sweep_one(job):
    data, cfg, model, metrics_dir = job
    g = load_dataset(data)
    _, metrics = train(g, make_splits(g, cfg.split_fractions, cfg.seed), cfg, model=model)
    if metrics_dir:
        metrics.write(Path(metrics_dir) / f"{model}_seed{cfg.seed}.jsonl")
    return metrics.summary


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"--seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise ValidationError("--seeds needs at least one seed")
    return seeds


def sweep_summary(model: str, config_hash: str, entries: list[dict]) -> dict:
    accs = [e["test_acc"] for e in entries if "test_acc" in e]
    return {
        "model": model,
        "config_hash": config_hash,
        "runs": entries,
        "completed": len(accs),
        "mean_test_acc": statistics.fmean(accs) if accs else None,
        "std_test_acc": statistics.pstdev(accs) if accs else None,
    }


def cmd_seed_sweep(args) -> int:
    load_dataset(args.data)  # fail fast on bad data before fanning out
    base = _config(args)
    seeds = parse_seeds(args.seeds)
    if args.metrics_dir:
        Path(args.metrics_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(args.data, base.replace(seed=s), args.model, args.metrics_dir) for s in seeds]
    entries, failed = [], False
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_sweep_one, job) for job in jobs]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - recorded per seed
                    outcomes.append(exc)
    else:
        outcomes = []
        for job in jobs:
            try:
                outcomes.append(_sweep_one(job))
            except Exception as exc:  # noqa: BLE001 - recorded per seed
                outcomes.append(exc)
    for seed, outcome in zip(seeds, outcomes):
        if isinstance(outcome, Exception):
            failed = True
            log.error("seed %d failed: %s", seed, outcome)
            entries.append({"seed": seed, "error": f"{type(outcome).__name__}: {outcome}"})
        else:
            entries.append({k: outcome[k] for k in
                            ("seed", "test_acc", "best_epoch", "best_val_acc")})
    summary = sweep_summary(args.model, base.digest(), entries)
    _emit(summary, args.out)
    if summary["mean_test_acc"] is not None:
        print(f"mean_test_acc={summary['mean_test_acc']:.4f} "
              f"std={summary['std_test_acc']:.4f} n={summary['completed']}",
              file=sys.stderr if not args.out else sys.stdout)
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glance", description="GLANCE node classification on heterophilous graphs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model and write per-epoch metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="metrics file (JSON lines)")
    p.add_argument("--splits", help="splits.json; default: stratified split from the seed")
    p.add_argument("--checkpoint", help="write best-validation parameters here")
    p.add_argument("--model", choices=("glance", "gcn"), default="glance")
    p.add_argument("--timestamp", action=argparse.BooleanOptionalAction, default=False,
                   help="add a wall-clock timestamp to the summary record")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on one split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--splits")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect-graph", help="per-edge attention scores and pruning decisions")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_inspect_graph)

    p = sub.add_parser("explain", help="hardened logic circuit of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("seed-sweep", help="train over several seeds and report mean/std accuracy")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--seeds", required=True, help='comma-separated, e.g. "0,1,2,3,4"')
    p.add_argument("--model", choices=("glance", "gcn"), default="glance")
    p.add_argument("--out")
    p.add_argument("--metrics-dir", help="also write each seed's metrics file here")
    p.add_argument("--jobs", type=int, default=1, help="seeds trained concurrently")
    p.set_defaults(func=cmd_seed_sweep)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("GLANCE_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help and on bad flags
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"glance: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        log.debug("runtime failure", exc_info=True)
        print(f"glance: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
