"""Command-line entry point: ``floordiff <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import records
from .floorplan import ComponentType

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
SAMPLE_CHUNK = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------ flag parsing

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _probability(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {v}")
    return v


def _room_range(text):
    """``6`` or ``5-8``."""
    try:
        lo, _, hi = text.partition("-")
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}")
    if not 2 <= lo <= hi <= 10:
        raise argparse.ArgumentTypeError(f"room counts must satisfy 2 <= LO <= HI <= 10, got {text!r}")
    return lo, hi


def _corner_override(text):
    kind, sep, count = text.rpartition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected TYPE=N, got {text!r}")
    try:
        ctype = ComponentType.parse(kind)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    try:
        n = int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"corner count must be an integer, got {count!r}")
    if not 3 <= n <= 32:
        raise argparse.ArgumentTypeError(f"corner count must lie in [3, 32], got {n}")
    return ctype, n


def _existing_file(text):
    if not Path(text).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floordiff", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dataset-synth", help="generate a synthetic corpus")
    p.add_argument("--plans", type=_positive_int, required=True)
    p.add_argument("--rooms", type=_room_range, default=(5, 8), help="N or LO-HI (default 5-8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("dataset-augment", help="apply the non-Manhattan wall augmentation")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--keep-prob", type=_probability, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a denoiser on a corpus")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--config", type=_existing_file, help="INI file with [train] and [model]")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--steps", type=_positive_int, help="overrides total_steps")
    p.add_argument("--resume", type=_existing_file, help="continue from a checkpoint")
    p.add_argument("--log", help="JSON-lines training log")
    p.add_argument("--out", required=True, help="checkpoint path")

    p = sub.add_parser("sample", help="sample floorplans for bubble diagrams")
    p.add_argument("--model", type=_existing_file, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--diagram", type=_existing_file, help="a single diagram")
    src.add_argument("--diagrams", type=_existing_file, help="several diagrams (JSON list or JSON lines)")
    p.add_argument("--count", type=_positive_int, default=1, help="samples per diagram")
    p.add_argument("--corners", type=_corner_override, action="append", default=[],
                   metavar="TYPE=N", help="fix the corner count of every room of TYPE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score plans against their diagrams")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--diagrams", type=_existing_file,
                   help="reference diagrams, one per plan; defaults to the diagrams stored in --input")
    p.add_argument("--tol", type=float, default=2.0)
    p.add_argument("--out", help="report path (default: stdout)")

    p = sub.add_parser("render", help="write one SVG per plan")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--style", default="default", choices=["default", "outline"])
    p.add_argument("--out", required=True, help="output directory")
    return parser


# ---------------------------------------------------------------- commands

def _read_plans(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(records.from_record(line))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise ValueError(f"{path}: no records")
    return out


def cmd_dataset_synth(args):
    from .dataset import synthesize
    corpus = synthesize(args.plans, args.rooms, np.random.default_rng(args.seed))
    corpus.write(args.out)
    return f"wrote {len(corpus)} plans to {args.out}"


def cmd_dataset_augment(args):
    from .dataset import augment_corpus, ingest
    corpus = ingest(args.input)
    for d in corpus.diagnostics:
        logging.getLogger("floordiff").warning(d)
    out = augment_corpus(corpus, args.keep_prob, np.random.default_rng(args.seed))
    out.write(args.out)
    changed = sum(a != b for (a, _), (b, _) in zip(corpus.plans, out.plans))
    return f"wrote {len(out)} plans ({changed} modified) to {args.out}"


def cmd_train(args):
    from dataclasses import replace
    from .dataset import ingest
    from .training import TrainConfig, Trainer, load_config
    corpus = ingest(args.input)
    if args.resume:
        trainer = Trainer.load(args.resume)
        if args.steps:
            trainer.config = replace(trainer.config, total_steps=args.steps)
    else:
        config = load_config(args.config) if args.config else TrainConfig()
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.steps:
            config = replace(config, total_steps=args.steps)
        trainer = Trainer.create(corpus, config)
    log_fh = open(args.log, "a" if args.resume else "w", encoding="utf-8") if args.log else None
    try:
        trainer.run(corpus, checkpoint_path=args.out, log_file=log_fh)
    finally:
        if log_fh:
            log_fh.close()
    return f"trained to step {trainer.step}; checkpoint {args.out}"


def cmd_sample(args):
    from .diffusion import sample_batch
    from .training import load_model
    model = load_model(args.model)
    diagrams = records.read_diagrams(args.diagram or args.diagrams)
    if args.diagram and len(diagrams) != 1:
        raise ValueError(f"--diagram expects one diagram, {args.diagram} holds {len(diagrams)}")
    overrides = dict(args.corners)
    jobs = [d for d in diagrams for _ in range(args.count)]
    streams = np.random.SeedSequence(args.seed).spawn(len(jobs))
    with open(args.out, "w", encoding="utf-8") as fh:
        for start in range(0, len(jobs), SAMPLE_CHUNK):
            chunk = jobs[start: start + SAMPLE_CHUNK]
            rngs = [np.random.default_rng(s) for s in streams[start: start + SAMPLE_CHUNK]]
            for plan, d in zip(sample_batch(model, chunk, rngs, overrides=overrides), chunk):
                fh.write(records.to_record(plan, d) + "\n")
    return f"wrote {len(jobs)} plans to {args.out}"


def cmd_eval(args):
    from .evaluate import dump_report, evaluation_report
    rows = _read_plans(args.input)
    plans = [p for p, _ in rows]
    if args.diagrams:
        diagrams = records.read_diagrams(args.diagrams)
    else:
        diagrams = [d for _, d in rows]
        if any(d is None for d in diagrams):
            raise ValueError(f"{args.input} lacks stored diagrams; pass --diagrams")
    text = dump_report(evaluation_report(plans, diagrams, args.tol))
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        return f"wrote report for {len(plans)} plans to {args.out}"
    sys.stdout.write(text + "\n")
    return None


def cmd_render(args):
    from .render import render_svg
    plans = [p for p, _ in _read_plans(args.input)]
    svgs = [render_svg(p, args.style) for p in plans]     # fail before writing anything
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, svg in enumerate(svgs):
        (out / f"plan-{k:04d}.svg").write_text(svg, encoding="utf-8")
    return f"wrote {len(svgs)} SVG files to {out}"


COMMANDS = {
    "dataset-synth": cmd_dataset_synth,
    "dataset-augment": cmd_dataset_augment,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "render": cmd_render,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:         # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        message = COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if message:
        print(message, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
