"""Command-line entry point: ``twem <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric or
training error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, fixture
from .corpus import stratified_split
from .errors import ConfigurationError, DataError, NumericError, TwemError
from .evaluation import ar_test, cross_validate, DEFAULT_ROUNDS
from .model import load_model, param_count, param_count_note, save_model, train
from .pipeline import SYSTEMS, RunConfig, make_trainer, tokenize_all
from .text import PreprocessScheme, apply_scheme
from . import nn

log = logging.getLogger("twem")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3
SCHEMES = [s.value for s in PreprocessScheme]


def _write_json(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config(args) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in (
        "data", "text_column", "label_column", "embeddings", "dim", "output", "seed",
        "scheme", "lr", "batch_size", "max_len", "dropout", "epochs", "val_fraction",
        "hidden", "l2", "baseline_lr", "baseline_epochs", "name")}
    if getattr(args, "labels", None):
        overrides["labels"] = args.labels.split(",")
    return RunConfig.from_sources(args.config, overrides)


def cmd_prep(args):
    scheme = PreprocessScheme.parse(args.scheme)
    with open(args.input, newline="", encoding="utf-8") as fin, \
            open(args.output, "w", newline="", encoding="utf-8") as fout:
        reader = csv.DictReader(fin)
        writer = csv.writer(fout, lineterminator="\n")
        if reader.fieldnames is None:
            writer.writerow([args.text_column])
            return 0
        if args.text_column not in reader.fieldnames:
            raise DataError(f"{args.input}: missing column {args.text_column!r}")
        writer.writerow(reader.fieldnames)
        for row in reader:
            row[args.text_column] = " ".join(apply_scheme(row[args.text_column] or "", scheme))
            writer.writerow([row[f] for f in reader.fieldnames])
    return 0


def cmd_train(args):
    cfg = _config(args)
    seed = cfg.require_seed()
    cfg.check_embeddings()
    ds = cfg.load_dataset()
    seqs = tokenize_all(ds.examples, cfg.scheme)
    pretrained = cfg.load_embeddings(seqs)
    model, history = train(seqs, ds.labels, ds.label_names, pretrained, cfg.train_config(seed),
                           dim=cfg.dim, allow_unk=True)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.twem")
    summary = history.to_dict()
    summary.update({
        "param_count": param_count(model),
        "param_count_note": param_count_note(model.n_classes, model.dim, model.hidden),
        "vocab_size": len(model.vocab),
        "oov_tokens": len(model.vocab.oov),
    })
    _write_json(out / "history.json", summary)
    print(f"wrote {out / 'model.twem'} (selected epoch {history.selected_epoch})")
    return 0


def cmd_eval_cv(args):
    cfg = _config(args)
    seed = cfg.require_seed()
    if args.model == "twem":
        cfg.check_embeddings()
    ds = cfg.load_dataset()
    trainer = make_trainer(args.model, cfg, ds)
    result = cross_validate(trainer, ds, k=args.folds, seed=seed, max_workers=args.workers)
    report = result.to_dict()
    report.update({"model": args.model, "k": args.folds, "seed": seed, "n": len(ds)})
    out = Path(cfg.output)
    _write_json(out / f"cv_{args.model}.json", report)
    table = result.pooled.table()
    (out / f"cv_{args.model}.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_significance(args):
    cfg = _config(args)
    seed = cfg.require_seed()
    ds = cfg.load_dataset()
    train_pos, test_pos = stratified_split(ds.labels, 1.0 - args.split,
                                           nn.derive_seed(seed, "significance.split"))
    train_ex = [ds.examples[i] for i in train_pos]
    test_ex = [ds.examples[i] for i in test_pos]
    preds = {}
    for system in dict.fromkeys([args.system_a, args.system_b]):
        predictor = make_trainer(system, cfg, ds)(train_ex, seed)
        preds[system] = np.asarray(predictor(test_ex))
    golds = [ex.label for ex in test_ex]
    result = ar_test(preds[args.system_a], preds[args.system_b], golds, rounds=args.rounds,
                     seed=nn.derive_seed(seed, "significance.ar"), n_classes=len(ds.label_names))
    payload = result.to_dict()
    payload.update({"system_a": args.system_a, "system_b": args.system_b, "split": args.split,
                    "n_train": len(train_ex), "n_test": len(test_ex)})
    _write_json(Path(cfg.output) / "significance.json", payload)
    print(f"|dWF1| = {result.statistic:.4f}  p = {result.p_value:.6f}  (R={result.rounds})")
    return 0


def cmd_analyze(args):
    if not Path(args.model).exists():
        raise ConfigurationError(f"model file {args.model} does not exist")
    model = load_model(args.model)
    pretrained = None
    if args.embeddings:
        from .embed import load_pretrained
        pretrained = load_pretrained(args.embeddings, model.dim,
                                     restrict_to=[t for _, t in model.vocab.words()],
                                     strict=not args.lenient)
    report = analysis.cluster_report(model, top_k=args.top_k, pca_dim=args.pca_dim,
                                     k=args.clusters, seed=args.seed, pretrained=pretrained)
    out = Path(args.output)
    _write_json(out / "clusters.json", report.to_dict())
    (out / "clusters.md").write_text(report.markdown(), encoding="utf-8")
    print(report.markdown(), end="")
    return 0


def cmd_make_fixture(args):
    cfg = fixture.write_fixture(args.output, args.seed)
    print(f"wrote fixture to {args.output} ({len(cfg['labels'])} labels, dim {cfg['dim']})")
    return 0


def _add_run_options(p, training=True):
    p.add_argument("--config", help="flat JSON config; flags override its values")
    p.add_argument("--data", help="CSV dataset")
    p.add_argument("--text-column", dest="text_column")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--labels", help="comma-separated label names, in index order")
    p.add_argument("--name")
    p.add_argument("--embeddings", help="GloVe-format text file")
    p.add_argument("--dim", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--seed", type=int)
    if training:
        p.add_argument("--scheme", choices=SCHEMES)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--max-len", dest="max_len", type=int)
        p.add_argument("--dropout", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--val-fraction", dest="val_fraction", type=float)
        p.add_argument("--hidden", type=int)
        p.add_argument("--l2", type=float)
        p.add_argument("--baseline-lr", dest="baseline_lr", type=float)
        p.add_argument("--baseline-epochs", dest="baseline_epochs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="tokenize a CSV text column under a preprocessing scheme")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--scheme", choices=SCHEMES, default="tokenize")
    p.add_argument("--text-column", dest="text_column", default="text")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="train a model on the full dataset")
    _add_run_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-cv", help="stratified k-fold cross-validation")
    _add_run_options(p)
    p.add_argument("--model", choices=SYSTEMS, default="twem")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval_cv)

    p = sub.add_parser("significance", help="train two systems on one split and AR-test them")
    _add_run_options(p)
    p.add_argument("--system-a", dest="system_a", choices=SYSTEMS, default="twem")
    p.add_argument("--system-b", dest="system_b", choices=SYSTEMS, default="baseline")
    p.add_argument("--split", type=float, default=0.75, help="training fraction")
    p.add_argument("--rounds", "-R", type=int, default=DEFAULT_ROUNDS)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("analyze", help="cluster the projected embedding space of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", help="original pretrained vectors to project")
    p.add_argument("--lenient", action="store_true", help="skip malformed embedding lines")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--top-k", dest="top_k", type=int, default=1000)
    p.add_argument("--pca-dim", dest="pca_dim", type=int, default=75)
    p.add_argument("--clusters", type=int, default=5)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("make-fixture", help="write a synthetic separable corpus + embeddings")
    p.add_argument("output")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except TwemError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
