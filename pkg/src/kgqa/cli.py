"""Command-line entry point: ``kgqa <command> ...``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import plots
from .audit import build_predicate_table, compute_upperbounds, interpretation_set
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig
from .data import SPLITS, DataError, ingest, read_dataset, relation_counts
from .kg import KGLoadError, load_kg_files
from .neural import NonFiniteError, read_embeddings
from .pipeline import evaluate, predict, predict_many
from .relation import ClassifierModel, build_clf_dataset, train_classifier
from .tagger import TaggerModel, build_tagging_dataset, train_tagger
from .text import tokenize

log = logging.getLogger("kgqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _write_json(path, obj):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _print(obj):
    print(json.dumps(obj, indent=2))


def _present_splits(cfg):
    return {s: read_dataset(cfg.paths.split(s), s) for s in SPLITS if os.path.exists(cfg.paths.split(s))}


def _load_kg(cfg):
    return load_kg_files(cfg.paths.triples, cfg.paths.aliases)


def _table_for(cfg, splits, kg):
    if cfg.audit.table_scope == "train":
        corpus = splits.get("train", [])
    else:
        corpus = [q for s in SPLITS if s in splits for q in splits[s]]
    return build_predicate_table(corpus, kg)


# ---------------------------------------------------------------------------


def cmd_ingest(cfg, args):
    report = ingest(cfg.paths.raw_dir, cfg.paths.data_dir,
                    cfg.paths.raw_triples or None, cfg.paths.raw_aliases or None)
    out = os.path.join(cfg.paths.report_dir, "ingest_report.json")
    _write_json(out, report.to_json())
    _print({"splits": report.splits, "kg": report.kg, "rejected_lines": len(report.rejected_lines),
            "report": out})
    return EXIT_OK


def cmd_train(cfg, args):
    kg = _load_kg(cfg)
    splits = _present_splits(cfg)
    vocab = {t for qs in splits.values() for q in qs for t in q.tokens}
    os.makedirs(cfg.paths.checkpoint_dir, exist_ok=True)
    os.makedirs(cfg.paths.report_dir, exist_ok=True)
    target = args.target
    if target == "tagger":
        train, skipped = build_tagging_dataset(splits["train"], kg)
        valid, _ = build_tagging_dataset(splits.get("valid", []), kg)
        ckpt = cfg.paths.tagger_checkpoint
        init = TaggerModel.load(ckpt) if args.resume else None
        emb = None if init else read_embeddings(cfg.paths.tagger_embeddings, keep=vocab)
        if not train:
            raise DataError("no usable tagger training examples")
        result = train_tagger(train, cfg.tagger, emb, valid or None, init)
        loss_key = "train_loss"
    else:
        train, stats = build_clf_dataset(splits["train"], kg)
        valid, _ = build_clf_dataset(splits.get("valid", []), kg)
        skipped = stats.no_alias_match + stats.gold_not_in_candidates
        ckpt = cfg.paths.classifier_checkpoint
        init = ClassifierModel.load(ckpt) if args.resume else None
        emb = None if init else read_embeddings(cfg.paths.classifier_embeddings,
                                                keep=vocab | {"$e$"})
        if not train:
            raise DataError("no usable classifier training examples")
        result = train_classifier(train, cfg.classifier, emb, valid or None, init)
        loss_key = "loss"
    result.model.save(ckpt, extra={"best_epoch": result.best_epoch, "best_val_accuracy": result.best_accuracy})
    log_path = os.path.join(cfg.paths.report_dir, f"{target}_log.jsonl")
    _write_lines(log_path, [json.dumps(h) for h in result.log])
    fig = None
    if result.log:
        fig = plots.training_curve(result.log, os.path.join(cfg.paths.report_dir, f"{target}_curve.png"),
                                   loss_key=loss_key, title=f"{target} training")
    _print({"target": target, "checkpoint": ckpt, "examples": len(train), "skipped": skipped,
            "best_epoch": result.best_epoch, "best_val_accuracy": result.best_accuracy,
            "log": log_path, "figure": fig})
    return EXIT_OK


def cmd_audit(cfg, args):
    kg = _load_kg(cfg)
    splits = _present_splits(cfg)
    table = _table_for(cfg, splits, kg)
    questions = [q for part in args.split.split("+") for q in splits[part]]
    report = compute_upperbounds(questions, kg, table, cfg.audit.guess_rule)
    base = os.path.join(cfg.paths.report_dir, f"audit_{args.split}")
    _write_json(base + ".json", report.to_json(args.split))
    _write_lines(base + ".tsv", [
        "\t".join(str(v) for v in (qa.qid, qa.verdict, len(qa.iset) if qa.iset else 0,
                                   qa.naive, qa.distribution, qa.noise_adjusted))
        for qa in report.questions])
    plots.audit_summary(report, base + ".png", args.split)
    summary = {k: v for k, v in report.to_json(args.split).items() if k != "questions"}
    summary["report"] = base + ".json"
    _print(summary)
    return EXIT_OK


def _load_models(cfg):
    return TaggerModel.load(cfg.paths.tagger_checkpoint), ClassifierModel.load(cfg.paths.classifier_checkpoint)


def cmd_eval(cfg, args):
    if args.split == "test" and not args.test:
        raise UsageError("evaluating the test split requires --test (run it once)")
    kg = _load_kg(cfg)
    splits = _present_splits(cfg)
    questions = splits[args.split]
    tagger, clf = _load_models(cfg)
    preds = predict_many(questions, tagger, clf, kg, cfg.tagger.k, jobs=args.jobs)
    table = _table_for(cfg, splits, kg)
    isets = [interpretation_set(q, kg, table) for q in questions]
    report = evaluate(questions, preds, isets, relation_counts(splits.get("train", [])),
                      cfg.eval.sample_size, cfg.eval.seed)
    base = os.path.join(cfg.paths.report_dir, f"eval_{args.split}")
    _write_json(base + ".json", report.to_json(args.split))
    _write_lines(os.path.join(cfg.paths.report_dir, f"predictions_{args.split}.tsv"), report.tsv_lines())
    plots.eval_summary(report, base + ".png", args.split)
    summary = {k: v for k, v in report.to_json(args.split).items() if k != "error_buckets"}
    summary["error_buckets"] = report.buckets
    summary["report"] = base + ".json"
    _print(summary)
    return EXIT_OK


def cmd_predict(cfg, args):
    kg = _load_kg(cfg)
    tagger, clf = _load_models(cfg)
    tokens = tokenize(args.question)
    pred = predict(tokens, tagger, clf, kg, cfg.tagger.k)
    _print({"question": args.question, "tokens": tokens, **pred.to_json()})
    return EXIT_OK


def cmd_synth(cfg, args):
    from .synthetic import make_corpus, write_corpus

    corpus = make_corpus(seed=args.seed or 0)
    out = Path(args.directory)
    emb = write_corpus(corpus, out / "raw", seed=args.seed or 0)
    cfg = RunConfig()
    cfg.paths.tagger_embeddings = os.path.relpath(emb["tagger_embeddings"], out)
    cfg.paths.classifier_embeddings = os.path.relpath(emb["classifier_embeddings"], out)
    for section in (cfg.tagger, cfg.classifier):
        section.lr, section.hidden, section.epochs, section.batch_size = 0.01, 16, 40, 8
    (out / "kgqa.ini").write_text(cfg.to_ini(), encoding="utf-8")
    _print({"directory": str(out), "config": str(out / "kgqa.ini"), "triples": corpus.n_triples,
            "train": len(corpus.train), "valid": len(corpus.valid), "test": len(corpus.test)})
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "audit": cmd_audit, "eval": cmd_eval,
            "predict": cmd_predict, "synth": cmd_synth}


def _split_list(value):
    parts = value.split("+")
    bad = [p for p in parts if p not in SPLITS]
    if bad or len(set(parts)) != len(parts):
        raise argparse.ArgumentTypeError(f"invalid split {value!r}; choose from {', '.join(SPLITS)}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override every seed")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="evaluation worker threads")
    common.add_argument("--dry-run", action="store_true", default=argparse.SUPPRESS,
                        help="validate configuration and inputs, then exit")
    common.add_argument("--set", action="append", default=argparse.SUPPRESS, metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="kgqa", parents=[common],
                                     description="Parse factoid questions into KG queries and audit datasets.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="normalize the raw distribution")
    p = sub.add_parser("train", parents=[common], help="train the tagger or the classifier")
    p.add_argument("target", choices=["tagger", "classifier"])
    p.add_argument("--resume", action="store_true", help="start from the existing checkpoint")
    p = sub.add_parser("audit", parents=[common], help="ambiguity audit and upperbounds")
    p.add_argument("split", type=_split_list, help="a split, or several joined with '+' (e.g. train+valid)")
    p = sub.add_parser("eval", parents=[common], help="evaluate the pipeline on a split")
    p.add_argument("split", choices=SPLITS)
    p.add_argument("--test", action="store_true", help="allow evaluation on the test split")
    p = sub.add_parser("predict", parents=[common], help="parse one question")
    p.add_argument("question")
    p = sub.add_parser("synth", parents=[common], help="write a toy corpus and config")
    p.add_argument("directory")
    return parser


def _validate(cfg, args):
    if args.command == "synth":
        return []
    kw = {}
    if args.command == "train":
        kw["target"] = args.target
    if args.command in ("audit", "eval"):
        kw["split"] = args.split
    errors = cfg.validate(args.command, **kw)
    if args.command == "eval" and args.split == "test" and not args.test:
        errors.append("evaluating the test split requires --test")
    if getattr(args, "resume", False):
        ckpt = cfg.paths.tagger_checkpoint if args.target == "tagger" else cfg.paths.classifier_checkpoint
        if not os.path.exists(ckpt):
            errors.append(f"--resume: checkpoint not found: {ckpt}")
    if args.jobs < 1:
        errors.append("--jobs must be >= 1")
    return errors


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    for name, default in (("config", None), ("seed", None), ("jobs", 1), ("dry_run", False),
                          ("set", []), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, args.set)
        if args.seed is not None:
            cfg.set_seed(args.seed)
        errors = _validate(cfg, args)
    except ConfigError as exc:
        errors = exc.errors
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.dry_run:
        print(f"{args.command}: configuration OK")
        return EXIT_OK
    try:
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, KGLoadError, CheckpointError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
