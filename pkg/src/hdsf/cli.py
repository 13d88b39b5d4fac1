"""Command-line entry point: ``hdsf {train,evaluate,parse,analyze,gradcheck}``.

Exit codes: 0 success, 2 usage or configuration error, 3 training
divergence, 4 failed numerical check.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import fields
from pathlib import Path
from urllib.parse import quote, unquote

from . import pipeline
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import TrainingDiverged, evaluate
from .config import Config, field_type, load_config
from .corpus import load_jsonl
from .numerics import inject_fault
from .properties import aggregate, format_document_table, format_report, tree_properties
from .structure import format_tree_table, read_tree_file

log = logging.getLogger("hdsf")

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    group = p.add_argument_group("config overrides")
    for f in fields(Config):
        flag = "--" + f.name.replace("_", "-")
        kind = field_type(f.name)
        group.add_argument(flag, dest=f.name, type=kind, default=None,
                           help=f"{f.metadata['help']} (default {f.default})")


def _config(args) -> Config:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(Config)}
    return load_config(args.config, overrides)


def _header(command: str, config: Config, **extra) -> str:
    bits = [f"hdsf {command}", f"config={config.digest()}"]
    bits += [f"{k}={v}" for k, v in extra.items()]
    return " ".join(bits)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_train(args) -> int:
    config = _config(args)
    if not config.corpus or not Path(config.corpus).is_file():
        raise UsageError(f"corpus file {config.corpus!r} not found")
    corpus = pipeline.prepare(config)
    log.info("train=%d dev=%d test=%d skipped=%d", len(corpus.train), len(corpus.dev),
             len(corpus.test), len(corpus.skipped))

    def progress(row):
        if row.dev_accuracy is not None:
            log.info("step %d loss %.4f dev %.4f", row.step, row.loss, row.dev_accuracy)

    result = pipeline.run_training(config, corpus, progress)
    out = Path(config.out)
    header = _header("train", config)
    _write(out / "history.csv", result.history.to_csv(header))
    save_checkpoint(config.checkpoint_path(), result.model, result.vocab, config, header)
    fmt = lambda a: "" if a is None else f"{a:.6f}"  # noqa: E731
    summary = (f"# {header}\nsplit,n_docs,accuracy\n"
               f"dev,{len(corpus.dev)},{fmt(result.dev_accuracy)}\n"
               f"test,{len(corpus.test)},{fmt(result.test_accuracy)}\n")
    _write(out / "summary.csv", summary)
    print(summary, end="")
    return EXIT_OK


def _load_model_and_docs(args):
    ckpt = Path(args.checkpoint) if args.checkpoint else _config(args).checkpoint_path()
    model, vocab, trained = load_checkpoint(ckpt)
    corpus_path = args.corpus or trained.corpus
    if not corpus_path or not Path(corpus_path).is_file():
        raise UsageError(f"corpus file {corpus_path!r} not found")
    raws = load_jsonl(corpus_path)
    if args.split == "all":
        docs, _ = pipeline.tokenize_with(trained, raws)
    else:
        docs = pipeline.prepare(trained, raws).split(args.split)
    return model, vocab, trained, docs


def cmd_evaluate(args) -> int:
    model, vocab, trained, docs = _load_model_and_docs(args)
    if not docs:
        raise UsageError("no documents to evaluate")
    acc = evaluate(model, [vocab.encode(d) for d in docs])
    print(f"{args.split},{len(docs)},{acc:.6f}")
    return EXIT_OK


def _safe_name(doc_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", doc_id)[:60]


def cmd_parse(args) -> int:
    model, vocab, trained, docs = _load_model_and_docs(args)
    out = Path(args.out or _config(args).out) / "trees"
    out.mkdir(parents=True, exist_ok=True)
    for i, (doc, tree, r) in enumerate(pipeline.parse_documents(model, vocab, docs)):
        header = _header("parse", trained, doc=quote(doc.id, safe=""), label=doc.label, k=tree.k)
        _write(out / f"{i:05d}_{_safe_name(doc.id)}.tsv", format_tree_table(tree, r, header))
    print(f"wrote {len(docs)} tree table(s) to {out}")
    return EXIT_OK


def read_tree_dir(path) -> list[tuple[str, str, object]]:
    """``(doc_id, label, tree)`` for every ``*.tsv`` table in ``path``."""
    items = []
    for f in sorted(Path(path).glob("*.tsv")):
        tree, meta = read_tree_file(f)
        if "label" not in meta:
            raise UsageError(f"{f}: header carries no label")
        items.append((unquote(meta.get("doc", f.stem)), meta["label"], tree))
    return items


def cmd_analyze(args) -> int:
    if args.trees:
        if not Path(args.trees).is_dir():
            raise UsageError(f"tree directory {args.trees!r} not found")
        items = read_tree_dir(args.trees)
        config = _config(args)
    else:
        model, vocab, config, docs = _load_model_and_docs(args)
        items = [(d.id, d.label, tree) for d, tree, _ in pipeline.parse_documents(model, vocab, docs)]
    summary = aggregate((tree, label) for _, label, tree in items)
    header = _header("analyze", config)
    report = format_report(summary, header)
    out = Path(args.out or _config(args).out)
    _write(out / "analysis.csv", report)
    if args.per_doc:
        rows = [(doc_id, label, tree_properties(tree)) for doc_id, label, tree in items]
        _write(out / "analysis_docs.csv", format_document_table(rows, header))
    for s in summary.values():
        if s.n_skipped:
            log.info("%s: %d single-sentence document(s) skipped", s.label, s.n_skipped)
    print(report, end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = _config(args)
    if args.inject_fault:
        with inject_fault("leaky_relu"):
            report = pipeline.gradcheck_toy(config.child_context, config.leaky_slope)
    else:
        report = pipeline.gradcheck_toy(config.child_context, config.leaky_slope)
    worst = max(report.values())
    print(f"# {_header('gradcheck', config)}")
    print("parameter,max_relative_error")
    for name, err in report.items():
        print(f"{name},{err:.3e}")
    ok = worst <= pipeline.GRADCHECK_TOLERANCE
    print(f"max relative error {worst:.3e} (tolerance {pipeline.GRADCHECK_TOLERANCE:g}): "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdsf", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoint + history")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "accuracy of a checkpoint on a corpus"),
                                 ("parse", cmd_parse, "write one dependency-tree table per document"),
                                 ("analyze", cmd_analyze, "per-class structural property means")):
        p = sub.add_parser(name, help=helptext)
        _add_config_flags(p)
        p.add_argument("--split", choices=pipeline.SPLITS, default="all",
                       help="which split of the corpus to use (re-derived from the checkpoint config)")
        if name == "analyze":
            p.add_argument("--trees", help="directory of tree tables written by `parse`")
            p.add_argument("--per-doc", action="store_true", help="also write analysis_docs.csv")
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model gradient")
    _add_config_flags(p)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"hdsf: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"hdsf {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
