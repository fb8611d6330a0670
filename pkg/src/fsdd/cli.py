"""Command-line entry point: dataset generation, training, sampling, evaluation,
codec round trips, and checkpoint inspection.

Exit codes: 0 success, 1 validation error (message on stderr), 2 I/O error.
All randomness is governed by seeds, so identical invocations produce
byte-identical data artifacts (the training log's wall-clock column is the
one documented exception).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import config as cfgmod
from . import plots
from .baselines import BaselineKind, generate_baseline
from .checkpoint import describe_checkpoint, load_checkpoint
from .codec import (
    ConstraintError,
    CountVector,
    FormatError,
    counts_to_set,
    read_count_file,
    read_token_file,
    set_to_counts,
    write_count_file,
    write_token_file,
)
from .data import class_pmfs, exact_pmf, sample_dataset_arrays
from .metrics import EvalReport, empirical_pmf, evaluate_samples
from .sampler import sample_metadata
from .trainer import fit


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _read_raw_rows(path: str) -> tuple[int, int, np.ndarray]:
    """Count-format reader that checks row length but not the fixed sum.

    Needed to evaluate unconstrained-baseline outputs, whose whole point is
    that their sums may be wrong.
    """
    from .codec import _parse_header, _parse_int_row

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}:1: empty file, expected header")
    c, m = _parse_header(lines[0], path, 1)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = _parse_int_row(line, path, i)
        if len(row) != c:
            raise FormatError(f"{path}:{i}: expected {c} counts, got {len(row)}")
        rows.append(row)
    return c, m, np.array(rows, dtype=np.int64).reshape(len(rows), c)


def _write_raw_rows(path: str, rows: np.ndarray, c: int, m: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"C={c} M={m}\n")
        for row in rows:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def _merged(args, keys: dict[str, str]) -> dict:
    file_values = cfgmod.parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {cfg_key: getattr(args, attr) for attr, cfg_key in keys.items()}
    return cfgmod.merge(file_values, overrides)


def _cmd_gen_data(args) -> int:
    cfg = _merged(args, {
        "kind": "kind", "C": "C", "M": "M", "seed": "seed", "alpha": "alpha",
        "num_classes": "num_classes", "mixture_weight": "mixture_weight",
    })
    spec = cfgmod.synthetic_spec(cfg)
    arr, labels = sample_dataset_arrays(spec, args.n)
    c, m = spec.codebook_size, spec.num_tokens
    if args.format == "tokens":
        sets = [counts_to_set(CountVector.from_array(row, m)) for row in arr]
        write_token_file(args.out, sets, c, m)
    else:
        vectors = [CountVector.from_array(row, m) for row in arr]
        write_count_file(args.out, vectors, c, m)
    if labels is not None:
        with open(args.out + ".labels", "w", encoding="utf-8") as fh:
            fh.writelines(f"{int(v)}\n" for v in labels)
    print(f"wrote {arr.shape[0]} samples to {args.out}")
    return 0


def _load_dataset(path: str, dcfg) -> tuple[np.ndarray, np.ndarray | None]:
    c, m, vectors = read_count_file(path)
    if c != dcfg.codebook_size or m != dcfg.num_tokens:
        raise ConstraintError(
            f"data file has C={c}, M={m} but the model config says "
            f"C={dcfg.codebook_size}, M={dcfg.num_tokens}"
        )
    arr = np.stack([v.to_array() for v in vectors])
    labels = None
    try:
        with open(path + ".labels", "r", encoding="utf-8") as fh:
            labels = np.array([int(line) for line in fh.read().split()], dtype=np.int64)
        if labels.size != arr.shape[0]:
            raise ConstraintError(
                f"{path}.labels has {labels.size} entries for {arr.shape[0]} samples"
            )
    except FileNotFoundError:
        pass
    return arr, labels


def _cmd_train(args) -> int:
    cfg = _merged(args, {
        "steps": "steps", "seed": "seed", "out": "checkpoint_path",
        "log": "log_path", "data": "data_path",
    })
    run = cfgmod.run_config(cfg)
    if run.data_path is not None:
        dataset = _load_dataset(run.data_path, run.denoiser)
    elif run.data_spec is not None:
        dataset = sample_dataset_arrays(run.data_spec, run.n_train)
    else:
        raise ConstraintError("config must provide either data_path or a synthetic kind")
    bundle = fit(dataset, run.denoiser, run.train, resume_from=args.resume)
    print(f"trained {bundle.step} steps; checkpoint at {run.train.checkpoint_path}")
    if run.train.log_path and not args.no_figures:
        fig = plots.plot_training_log(run.train.log_path, run.train.log_path + "_loss.png")
        print(f"wrote {fig}")
    return 0


def _cmd_sample(args) -> int:
    cfg = _merged(args, {
        "n_steps": "num_steps", "seed": "seed", "top_p": "top_p",
        "guidance_scale": "guidance_scale", "schedule": "schedule_f",
        "class_label": "class_label",
    })
    scfg = cfgmod.sample_config(cfg)
    bundle = load_checkpoint(args.ckpt)
    params = bundle.build_params(use_ema=not args.live_weights)
    kind = BaselineKind(args.baseline)
    rows = generate_baseline(params, scfg, kind, n=args.n)
    c, m = bundle.config.codebook_size, bundle.config.num_tokens
    if kind is BaselineKind.DISCRETE_NO_FIXED_SUM:
        if args.format == "tokens":
            raise ConstraintError("unconstrained baseline output cannot be written as token sets")
        _write_raw_rows(args.out, rows, c, m)
    elif args.format == "tokens":
        write_token_file(args.out, [counts_to_set(CountVector.from_array(r, m)) for r in rows], c, m)
    else:
        write_count_file(args.out, [CountVector.from_array(r, m) for r in rows], c, m)
    with open(args.out + ".meta.jsonl", "w", encoding="utf-8") as fh:
        for i in range(rows.shape[0]):
            fh.write(json.dumps(sample_metadata(scfg, i), sort_keys=True) + "\n")
    print(f"wrote {rows.shape[0]} samples to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _merged(args, {"seed": "seed"})
    spec = cfgmod.synthetic_spec(cfg)
    c, m, rows = _read_raw_rows(args.samples)
    if c != spec.codebook_size or m != spec.num_tokens:
        raise ConstraintError(
            f"samples have C={c}, M={m} but the reference spec says "
            f"C={spec.codebook_size}, M={spec.num_tokens}"
        )
    if rows.shape[0] == 0:
        raise ConstraintError(f"{args.samples}: no samples to evaluate")
    reference = exact_pmf(spec)
    labels = None
    class_refs = None
    if args.labels is not None:
        with open(args.labels, "r", encoding="utf-8") as fh:
            labels = [int(line) for line in fh.read().split()]
        if len(labels) != rows.shape[0]:
            raise ConstraintError(f"{args.labels} has {len(labels)} labels for {rows.shape[0]} samples")
        if spec.kind == "class_conditional_two_point":
            class_refs = class_pmfs(spec)
    samples = [tuple(int(v) for v in row) for row in rows]
    report = evaluate_samples(samples, reference, m, labels=labels, class_references=class_refs)
    print(report.to_text())
    base = args.out
    with open(base + ".txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    with open(base + ".csv", "w", encoding="utf-8") as fh:
        fh.write(EvalReport.CSV_HEADER + "\n" + report.to_csv_row() + "\n")
    if not args.no_figures:
        plots.plot_support_comparison(empirical_pmf(samples), reference, base + "_support.png")
        plots.plot_sum_histogram(rows.sum(axis=1), m, base + "_sums.png")
        print(f"wrote {base}.txt, {base}.csv and figures")
    else:
        print(f"wrote {base}.txt and {base}.csv")
    return 0


def _cmd_roundtrip(args) -> int:
    c, m, sets = read_token_file(args.infile)
    bad = 0
    for s in sets:
        if counts_to_set(set_to_counts(s)) != s:
            bad += 1
    print(f"{len(sets)} multisets checked, {bad} round-trip failures")
    return 0 if bad == 0 else 1


def _cmd_inspect(args) -> int:
    print(json.dumps(describe_checkpoint(args.ckpt), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fsdd", description="Fixed-sum discrete diffusion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="draw a synthetic dataset with known ground truth")
    p.add_argument("--config", default=None)
    p.add_argument("--kind", default=None, choices=("two_point", "dirichlet_multinomial", "class_conditional_two_point"))
    p.add_argument("--C", dest="C", type=int, default=None)
    p.add_argument("--M", dest="M", type=int, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--num-classes", dest="num_classes", type=int, default=None)
    p.add_argument("--mixture-weight", dest="mixture_weight", type=float, default=None)
    p.add_argument("--format", choices=("counts", "tokens"), default="counts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train the denoiser on a dataset or synthetic spec")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data", default=None, help="count-vector file (else synthetic from config)")
    p.add_argument("--out", default=None, help="checkpoint path override")
    p.add_argument("--log", default=None, help="training CSV log path")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="generate count vectors from a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--steps", dest="n_steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--top-p", dest="top_p", type=float, default=None)
    p.add_argument("--guidance-scale", dest="guidance_scale", type=float, default=None)
    p.add_argument("--schedule", choices=tuple(sorted(("linear", "constant", "none"))), default=None)
    p.add_argument("--class-label", dest="class_label", type=int, default=None)
    p.add_argument("--baseline", choices=tuple(k.value for k in BaselineKind), default="fsdd")
    p.add_argument("--live-weights", action="store_true", help="sample the live weights instead of EMA")
    p.add_argument("--format", choices=("counts", "tokens"), default="counts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="score samples against the config's ground truth")
    p.add_argument("--samples", required=True)
    p.add_argument("--config", "--spec", dest="config", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="basename for .txt/.csv/figures")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("roundtrip", help="verify set -> counts -> set is the identity on a token file")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=_cmd_roundtrip)

    p = sub.add_parser("inspect-checkpoint", help="print checkpoint header and tensor summary")
    p.add_argument("--ckpt", required=True)
    p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ConstraintError, FormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
