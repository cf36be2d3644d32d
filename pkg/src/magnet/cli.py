"""Command-line entry point: ``magnet {generate,train,evaluate,explain,benchmark,report}``.

Exit status is 0 on success, 2 on invalid flags or input files, 1 on any
other failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as mio
from .benchmark import BenchmarkConfig, config_dict, read_csv, rows_to_csv, run_benchmark
from .errors import MagnetError, SchemaError, VersionMismatch
from .estimator import ActorConfig, evaluate_accuracy, train_magnet
from .interpreter import ExplanationParams, optimize_explanation, threshold_explanation
from .report import svg_bar_chart, text_table
from .synth import generate_setting1, generate_setting2


class FlagError(Exception):
    def __init__(self, flag, message):
        super().__init__(f"{flag}: {message}")


def _positive_int(name):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return value

    return parse


def _nonneg_float(name):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects a number, got {text!r}") from None
        if not value >= 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0")
        return value

    return parse


def _fraction(name):
    def parse(text):
        value = _nonneg_float(name)(text)
        if not 0 < value <= 1:
            raise argparse.ArgumentTypeError(f"{name} must lie in (0, 1]")
        return value

    return parse


def _add_data_flags(p):
    p.add_argument("--setting", type=int, choices=(1, 2), default=1)
    p.add_argument("--n", type=_positive_int("--n"), default=250)
    p.add_argument("--nodes", type=_positive_int("--nodes"), default=30)
    p.add_argument("--important", type=_positive_int("--important"), default=20)
    p.add_argument("--feat-dim", type=_positive_int("--feat-dim"), default=25)
    p.add_argument("--density", type=_fraction("--density"), default=0.2)
    p.add_argument("--noise-sd", type=_nonneg_float("--noise-sd"), default=0.1)


def _add_explain_flags(p):
    p.add_argument("--lambda-edge", type=_nonneg_float("--lambda-edge"), default=0.005)
    p.add_argument("--lambda-feature", type=_nonneg_float("--lambda-feature"), default=0.1)
    p.add_argument("--omega-start", type=_nonneg_float("--omega-start"), default=1.0)
    p.add_argument("--omega-end", type=_nonneg_float("--omega-end"), default=0.1)
    p.add_argument("--iters", type=_positive_int("--iters"), default=300)
    p.add_argument("--mc-samples", type=int, default=4)
    p.add_argument("--target-mode", choices=("fixed_full", "masked_features"), default="fixed_full")
    p.add_argument("--top-m", type=_positive_int("--top-m"), default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magnet", description="Multi-order graph classification with boosted fusion and mask-based explanations."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    _add_data_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit the estimation model")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k", type=_positive_int("--k"), default=3)
    p.add_argument("--split", type=_fraction("--split"), default=1.0)
    p.add_argument("--head", choices=("linear", "mlp"), default="linear")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="accuracy of a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=_fraction("--split"), default=1.0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("explain", help="optimize edge and feature masks")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_explain_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("benchmark", help="repeated end-to-end runs, CSV summary")
    _add_data_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k", type=_positive_int("--k"), default=3)
    p.add_argument("--split", type=_fraction("--split"), default=0.7)
    p.add_argument("--repeats", type=_positive_int("--repeats"), default=10)
    p.add_argument("--baseline", choices=("none", "gcn"), default="none")
    p.add_argument("--no-explain", action="store_true")
    _add_explain_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="render a benchmark CSV as SVG and text")
    p.add_argument("--data", required=True, help="benchmark CSV")
    p.add_argument("--out", required=True, help="SVG path; the text table goes next to it as .txt")
    return parser


def _check_data_flags(args):
    if args.important >= args.nodes:
        raise FlagError("--important", "must be smaller than --nodes")
    if args.nodes < 2:
        raise FlagError("--nodes", "must be >= 2")
    if args.setting == 2 and args.feat_dim < 3:
        raise FlagError("--feat-dim", "setting 2 needs at least 3 features")


def _check_explain_flags(args):
    if args.omega_start <= 0:
        raise FlagError("--omega-start", "must be > 0")
    if args.omega_end <= 0:
        raise FlagError("--omega-end", "must be > 0")
    if args.mc_samples < 0:
        raise FlagError("--mc-samples", "must be >= 0")


def _run_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _explain_params(args):
    return ExplanationParams(
        omega_start=args.omega_start,
        omega_end=args.omega_end,
        iters=args.iters,
        lambda_edge=args.lambda_edge,
        lambda_feature=args.lambda_feature,
        mc_samples=args.mc_samples,
        seed=args.seed,
        target_mode=args.target_mode,
    )


def cmd_generate(args):
    _check_data_flags(args)
    gen = generate_setting1 if args.setting == 1 else generate_setting2
    ds = gen(
        args.n, args.nodes, args.important, args.feat_dim, noise_sd=args.noise_sd, seed=args.seed,
        target_density=args.density,
    )
    mio.save_dataset(ds, args.out, _run_config(args))
    print(f"wrote {ds.n} instances on {ds.n_nodes} nodes ({ds.adjacency.n_edges} edges) to {args.out}")


def _load_split(args, which):
    ds = mio.load_dataset(args.data)
    if args.split >= 1.0:
        return ds
    train, test = ds.split(args.split, args.seed)
    return train if which == "train" else test


def cmd_train(args):
    train = _load_split(args, "train")
    model = train_magnet(train, ActorConfig(k_orders=args.k, head=args.head, seed=args.seed))
    mio.save_model(model, args.out, _run_config(args))
    alphas = ", ".join(f"{a:.4f}" for a in model.alphas)
    print(f"trained K={model.k_orders} on {train.n} instances; alphas [{alphas}]")


def cmd_evaluate(args):
    data = _load_split(args, "test")
    model = mio.load_model(args.model)
    acc = evaluate_accuracy(model, data)
    result = {"accuracy": acc, "n": data.n}
    print(json.dumps(result))
    if args.out:
        Path(args.out).write_text(json.dumps({"schema_version": mio.SCHEMA_VERSION, **result,
                                              "run_config": _run_config(args)}, indent=1) + "\n")


def cmd_explain(args):
    _check_explain_flags(args)
    ds = mio.load_dataset(args.data)
    model = mio.load_model(args.model)
    params, trajectory = optimize_explanation(model, ds, _explain_params(args))
    ex = threshold_explanation(params, ds.adjacency, top_m_nodes=args.top_m, loss_trajectory=trajectory)
    mio.save_explanation(ex, params, args.out, _run_config(args))
    print(f"kept {len(ex.kept_edges)} edges, {len(ex.kept_nodes)} nodes, {len(ex.kept_features)} features")


def cmd_benchmark(args):
    _check_data_flags(args)
    _check_explain_flags(args)
    cfg = BenchmarkConfig(
        setting=args.setting, n=args.n, nodes=args.nodes, important=args.important,
        feat_dim=args.feat_dim, seed=args.seed, k=args.k, split=args.split, repeats=args.repeats,
        target_density=args.density, noise_sd=args.noise_sd, baseline=args.baseline,
        explain=not args.no_explain, top_m=args.top_m, iters=args.iters,
        lambda_edge=args.lambda_edge, lambda_feature=args.lambda_feature,
        omega_start=args.omega_start, omega_end=args.omega_end, mc_samples=args.mc_samples,
        target_mode=args.target_mode,
    )
    rows, _ = run_benchmark(cfg)
    out = Path(args.out)
    out.write_text(rows_to_csv(rows), encoding="utf-8")
    out.with_suffix(".config.json").write_text(
        json.dumps({"schema_version": mio.SCHEMA_VERSION, "run_config": config_dict(cfg)}, indent=1) + "\n"
    )
    sys.stdout.write(text_table(rows))


def cmd_report(args):
    try:
        rows = read_csv(args.data)
    except ValueError as exc:
        raise FlagError("--data", str(exc)) from None
    out = Path(args.out)
    out.write_text(svg_bar_chart(rows), encoding="utf-8")
    table = text_table(rows)
    out.with_suffix(".txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "benchmark": cmd_benchmark,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        COMMANDS[args.command](args)
    except FlagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, VersionMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MagnetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
