"""Command-line entry point: ``tablevtr {gen-data,train,eval,rollout}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .datagen import generate_corpus, read_jsonl, split_corpus, write_jsonl
from .retrieval import REPORT_HEADER, check_vocabulary, evaluate_model, load_checkpoint, reports_json
from .rollout import attention_rollout, render_attention, trace_record
from .trainer import TrainConfig, train

log = logging.getLogger("tablevtr")


def _records_for(args) -> list:
    records = read_jsonl(args.data)
    if args.split == "all":
        return records
    train_recs, test_recs = split_corpus(records, args.seed, args.train_frac)
    return test_recs if args.split == "test" else train_recs


def cmd_gen_data(args) -> int:
    records = generate_corpus(args.num, seed=args.seed, noise_sigma=args.sigma)
    write_jsonl(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epochs is not None:
        cfg.epochs = args.epochs
    result = train(read_jsonl(args.data), cfg, out_dir=args.out)
    last = result.history[-1]
    print(f"trained {cfg.epochs} epochs; held-out T2V R@1 {last.val_r1:.2f}; checkpoint in {args.out}")
    return 0


def cmd_eval(args) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    records = _records_for(args)
    check_vocabulary(vocab, records)
    reports = evaluate_model(model, records, vocab, dsl=args.dsl, dsl_temp=args.dsl_temp)
    print(f"{len(records)} records ({args.split}), dsl={'on' if args.dsl else 'off'}")
    print(REPORT_HEADER)
    for r in reports:
        print(r.row())
    text = reports_json(reports)
    print(text)
    if args.json:
        Path(args.json).write_text(text + "\n")
    return 0


def cmd_rollout(args) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    records = read_jsonl(args.data)
    match = [r for r in records if r.id == args.record_id]
    if not match:
        print(f"error: no record with id {args.record_id!r} in {args.data}", file=sys.stderr)
        return 2
    check_vocabulary(vocab, match)
    trace = trace_record(model, match[0], vocab)
    render_attention(attention_rollout(trace), trace, args.out, title=match[0].id)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tablevtr", description="Tag-anchored video-text retrieval.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic corpus as JSON Lines")
    g.add_argument("--num", type=int, default=512)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--sigma", type=float, default=0.5, help="frame noise standard deviation")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model and write checkpoint, metrics and config")
    t.add_argument("--config", help="JSON file with TrainConfig fields (defaults if omitted)")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    t.add_argument("--epochs", type=int, default=None)
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("eval", cmd_eval, "retrieval metrics for a checkpoint"),
        ("rollout", cmd_rollout, "attention rollout SVG for one record"),
    ):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--checkpoint", required=True)
        e.add_argument("--data", required=True)
        e.add_argument("--seed", type=int, default=7, help="split seed (use the training seed)")
        e.set_defaults(func=func)
        if name == "eval":
            e.add_argument("--dsl", action="store_true", help="dual-softmax revision of the similarity matrix")
            e.add_argument("--dsl-temp", type=float, default=100.0)
            e.add_argument("--split", choices=("test", "train", "all"), default="test")
            e.add_argument("--train-frac", type=float, default=0.8)
            e.add_argument("--json", help="also write the JSON report here")
        else:
            e.add_argument("--record-id", required=True)
            e.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
