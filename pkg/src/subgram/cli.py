"""Command-line surface for batch use.

Exit codes: 0 success, 1 usage error, 2 data error (corpus, checkpoint,
I/O), 3 numerical failure.  Every subcommand that writes file artifacts
also writes a ``manifest.txt`` of resolved ``key=value`` settings beside
them; replaying the manifest reproduces the run byte for byte in
single-threaded mode.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import corpus as corpus_mod
from . import evaluate, trainer
from .errors import NonFiniteParameter, SubgramError
from .subword import UnitConfig
from .vocab import build_vocab

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems via exceptions."""

    def error(self, message):
        raise UsageError(message)


def _add_train_flags(p):
    p.add_argument("--units", default="char-ngrams",
                   help="comma list: word,char-ngrams,phon-word,phon-ngrams,lemma,morph")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr0", type=float, default=0.05)
    p.add_argument("--min-n", type=int, default=3)
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--subsample-t", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=1,
                   help="1 = deterministic; >1 = lock-free fast mode")
    p.add_argument("--fixed-window", action="store_true",
                   help="use the full window instead of a sampled width")
    p.add_argument("--lenient", action="store_true",
                   help="skip malformed tokens and missing annotations with warnings")
    p.add_argument("--lang", default="", help="language label stored in the checkpoint")


def build_parser() -> Parser:
    parser = Parser(prog="subgram",
                    description="subword-composed word embeddings with "
                                "bilingual transfer")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("train", help="train on one annotated corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output directory")
    _add_train_flags(p)

    p = sub.add_parser("train-joint",
                       help="train jointly on a merged bilingual corpus")
    p.add_argument("--input-hr", required=True)
    p.add_argument("--input-lr", required=True)
    p.add_argument("--upsample", type=int, default=None,
                   help="low-resource replication factor (default: token ratio)")
    p.add_argument("--output", required=True)
    _add_train_flags(p)

    p = sub.add_parser("finetune",
                       help="train a low-resource model initialized from a "
                            "high-resource checkpoint")
    p.add_argument("--input", required=True)
    p.add_argument("--init-from", required=True, help="high-resource checkpoint")
    p.add_argument("--freeze-epochs", type=int, default=0,
                   help="epochs during which transferred rows stay fixed")
    p.add_argument("--output", required=True)
    _add_train_flags(p)

    p = sub.add_parser("nn", help="nearest neighbors of a (possibly OOV) token")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True,
                   help="token in corpus format, annotations included")
    p.add_argument("-k", type=int, default=10)

    p = sub.add_parser("coverage",
                       help="unit overlap between a corpus/checkpoint and a "
                            "reference checkpoint")
    p.add_argument("--lr", required=True, help="checkpoint or corpus file")
    p.add_argument("--hr", required=True, help="reference checkpoint")

    p = sub.add_parser("pca", help="2-D PCA projection of selected words")
    p.add_argument("--model", required=True)
    p.add_argument("--labels", required=True,
                   help="file with one token per line, corpus format")
    p.add_argument("--out", required=True, help="TSV output path")

    p = sub.add_parser("loglik", help="full-softmax corpus log-likelihood")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--window", type=int, default=3)

    p = sub.add_parser("export", help="write vectors as text")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=["composed-words", "raw-units"],
                   default="composed-words")
    p.add_argument("--out", required=True)

    p = sub.add_parser("stats", help="corpus token/annotation statistics")
    p.add_argument("--input", required=True)

    return parser


def _train_config(args) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        dim=args.dim, window=args.window, negatives=args.negatives,
        epochs=args.epochs, lr0=args.lr0, min_n=args.min_n, max_n=args.max_n,
        min_count=args.min_count, subsample_t=args.subsample_t, seed=args.seed,
        thread_count=args.threads, fixed_window=args.fixed_window,
        freeze_transferred_epochs=getattr(args, "freeze_epochs", 0),
    )


def _unit_config(args) -> UnitConfig:
    return UnitConfig.from_names(args.units, min_n=args.min_n, max_n=args.max_n)


MANIFEST_SKIP = {"command"}
MANIFEST_FLAGS = {"fixed_window", "lenient"}  # boolean store_true options


def write_manifest(args, directory) -> str:
    """Resolved configuration as key=value lines; enough to replay the run."""
    path = os.path.join(directory, "manifest.txt")
    items = [("command", args.command)]
    for key, value in sorted(vars(args).items()):
        if key == "command":
            continue
        items.append((key, value))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for key, value in items:
            handle.write(f"{key}={'' if value is None else value}\n")
    return path


def manifest_argv(path) -> list:
    """Reconstruct the argv of the run that wrote the manifest."""
    settings = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            key, _, value = line.rstrip("\n").partition("=")
            settings[key] = value
    argv = [settings.pop("command")]
    for key, value in sorted(settings.items()):
        flag = "--" + key.replace("_", "-")
        if key == "k":
            flag = "-k"
        if key in MANIFEST_FLAGS:
            if value == "True":
                argv.append(flag)
            continue
        if value == "":
            if key == "lang":
                argv.extend([flag, value])
            continue
        argv.extend([flag, value])
    return argv


def _write_artifacts(model, args) -> None:
    os.makedirs(args.output, exist_ok=True)
    ckpt = os.path.join(args.output, "checkpoint.txt")
    trainer.save_checkpoint(model, ckpt)
    for mode, name in (("composed-words", "vectors.txt"),
                       ("raw-units", "units.txt")):
        with open(os.path.join(args.output, name), "w", encoding="utf-8",
                  newline="\n") as handle:
            handle.write(evaluate.export_vectors(model, mode=mode))
    write_manifest(args, args.output)
    print(f"wrote checkpoint, vectors, units and manifest to {args.output}")


def _cmd_train(args) -> int:
    unit_config = _unit_config(args)
    config = _train_config(args)
    reader = corpus_mod.FileCorpus(args.input, lenient=args.lenient)
    vocab = build_vocab(reader, min_count=args.min_count,
                        unit_config=unit_config, lenient=args.lenient)
    model = trainer.train(reader, vocab, config, lenient=args.lenient)
    model.lang = args.lang
    _write_artifacts(model, args)
    return EXIT_OK


def _cmd_train_joint(args) -> int:
    unit_config = _unit_config(args)
    config = _train_config(args)
    hr = corpus_mod.FileCorpus(args.input_hr, lenient=args.lenient)
    lr = corpus_mod.FileCorpus(args.input_lr, lenient=args.lenient)
    hr_stats = corpus_mod.corpus_stats(hr)
    lr_stats = corpus_mod.corpus_stats(lr)
    factor = corpus_mod.upsample_factor(hr_stats.token_count,
                                        lr_stats.token_count, args.upsample)
    merged = corpus_mod.merge_joint(hr, lr, factor, seed=args.seed)
    print(f"merged corpus: {hr_stats.sentence_count} HR sentences + "
          f"{factor} x {lr_stats.sentence_count} LR sentences")
    vocab = build_vocab(merged, min_count=args.min_count,
                        unit_config=unit_config, lenient=args.lenient)
    model = trainer.train(merged, vocab, config, lenient=args.lenient)
    model.lang = args.lang
    _write_artifacts(model, args)
    return EXIT_OK


def _cmd_finetune(args) -> int:
    unit_config = _unit_config(args)
    config = _train_config(args)
    hr_model = trainer.load_checkpoint(args.init_from)
    reader = corpus_mod.FileCorpus(args.input, lenient=args.lenient)
    vocab = build_vocab(reader, min_count=args.min_count,
                        unit_config=unit_config, lenient=args.lenient)
    rng = np.random.default_rng(config.seed)
    model, report = trainer.finetune_init(vocab, hr_model, config, rng,
                                          lang=args.lang)
    for kind, (copied, total) in report.items():
        print(f"transferred {kind.name}: {copied}/{total}")
    model = trainer.train(reader, vocab, config, initial=model,
                          lenient=args.lenient)
    model.lang = args.lang
    _write_artifacts(model, args)
    return EXIT_OK


def _cmd_nn(args) -> int:
    model = trainer.load_checkpoint(args.model)
    query = corpus_mod.parse_token(args.query)
    result = evaluate.nearest_neighbors(model, query, args.k)
    for surface, cos in result.neighbors:
        print(f"{surface} {cos:.6f}")
    return EXIT_OK


def _is_checkpoint(path) -> bool:
    with open(path, "rb") as handle:
        return handle.read(len(trainer.CHECKPOINT_MAGIC)) == \
            trainer.CHECKPOINT_MAGIC.encode("ascii")


def _cmd_coverage(args) -> int:
    hr_model = trainer.load_checkpoint(args.hr)
    if _is_checkpoint(args.lr):
        lr_vocab = trainer.load_checkpoint(args.lr).vocab
    else:
        # A raw corpus is measured with the reference model's unit scheme.
        lr_vocab = build_vocab(corpus_mod.FileCorpus(args.lr), min_count=1,
                               unit_config=hr_model.unit_config, lenient=True)
    report = evaluate.unit_coverage(lr_vocab, hr_model)
    for line in report.lines():
        print(line)
    return EXIT_OK


def _cmd_pca(args) -> int:
    model = trainer.load_checkpoint(args.model)
    labeled = []
    with open(args.labels, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            token = corpus_mod.parse_token(line)
            vec, _ = evaluate.word_vector(model, token)
            labeled.append((token.surface, vec))
    selection = [label for label, _ in labeled]
    projected = evaluate.pca2(labeled, selection)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        for label, x, y in projected:
            handle.write(f"{label}\t{x:.6f}\t{y:.6f}\n")
    write_manifest(args, out_dir)
    print(f"wrote {len(projected)} projected points to {args.out}")
    return EXIT_OK


def _cmd_loglik(args) -> int:
    model = trainer.load_checkpoint(args.model)
    ll = evaluate.corpus_log_likelihood(
        model, corpus_mod.read_corpus(args.corpus), window=args.window,
        fixed_window=True,
    )
    print(f"{ll:.6f}")
    return EXIT_OK


def _cmd_export(args) -> int:
    model = trainer.load_checkpoint(args.model)
    text = evaluate.export_vectors(model, mode=args.mode)
    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    write_manifest(args, os.path.dirname(os.path.abspath(args.out)))
    print(f"wrote {args.mode} vectors to {args.out}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    stats = corpus_mod.corpus_stats(corpus_mod.read_corpus(args.input))
    print(f"tokens: {stats.token_count}")
    print(f"sentences: {stats.sentence_count}")
    for field, fraction in sorted(stats.annotated_fraction_per_field.items()):
        print(f"annotated {field}: {fraction:.4f}")
    return EXIT_OK


COMMANDS = {
    "train": _cmd_train,
    "train-joint": _cmd_train_joint,
    "finetune": _cmd_finetune,
    "nn": _cmd_nn,
    "coverage": _cmd_coverage,
    "pca": _cmd_pca,
    "loglik": _cmd_loglik,
    "export": _cmd_export,
    "stats": _cmd_stats,
}


def run(argv) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help
        return int(err.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteParameter as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SubgramError, OSError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
