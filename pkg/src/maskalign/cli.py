"""Command-line entry point.

Six subcommands wire the modules into reproducible experiments:

    simulate   write a synthetic dataset to disk
    train      fit mask parameters on a manifest
    gradcheck  verify analytic gradients against finite differences
    eval       score saved parameters against ground truth
    baseline   score the untrained fixed-uniform tiling
    sweep      keep-ratio and w_inter grids, one plot-ready CSV

Exit codes: 0 success, 2 validation error, 3 numerical error. Training
options resolve as defaults < --config file < explicit flags, and every
flag maps to a RunConfig key of the same (dashed) name. A gradcheck
whose error exceeds tolerance exits 1.

Passing --no-sim without an explicit --inverse/--no-inverse also turns
the inverse term off, so `--lambda-div 1 --no-sim` is diversity-only
training rather than inverse-only.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels
from .dataio import (
    Dataset,
    RunConfig,
    load_dataset,
    load_runconfig,
    read_params_json,
    save_runconfig,
    write_dataset,
    write_params_json,
    write_step_records,
)
from .errors import (
    EmptyGroundTruth,
    MaskAlignError,
    NumericalError,
    SchemaError,
)
from .evaluate import (
    LocReport,
    Segment,
    corpus_scores,
    mask_to_segment,
    report_csv,
    report_kv,
    width_stats,
)
from .gradcheck import run_gradcheck
from .masks import MaskKind, MaskParams, fixed_uniform_params
from .losses import PoolingMode
from .optim import train
from .simulate import (
    Layout,
    ScenarioSpec,
    SparsifyPolicy,
    dataset_stats,
    gen_dataset,
    sparsify,
    to_dataset,
)

KEEP_RATIO_GRID = (0.25, 0.5, 0.75, 1.0)
W_INTER_GRID = (0.2, 0.4, 0.6, 0.8)


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-videos", type=int, default=20)
    p.add_argument("--n-frames", type=int, default=64)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--events-min", type=int, default=3)
    p.add_argument("--events-max", type=int, default=3)
    p.add_argument("--layout", choices=[l.value for l in Layout], default=Layout.NON_UNIFORM.value)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--transition-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)


def _scenario_from_args(args: argparse.Namespace) -> ScenarioSpec:
    return ScenarioSpec(
        n_videos=args.n_videos,
        n_frames=args.n_frames,
        embed_dim=args.embed_dim,
        events_min=args.events_min,
        events_max=args.events_max,
        layout=Layout(args.layout),
        noise_sigma=args.noise_sigma,
        transition_fraction=args.transition_fraction,
        seed=args.seed,
    )


def _add_runconfig_flags(p: argparse.ArgumentParser, with_seed: bool = True) -> None:
    """Training flags; None defaults keep "was it passed" recoverable.

    sweep shares one --seed between the scenario and the run, so it
    registers the flag on the scenario side only.
    """
    p.add_argument("--config", type=str, default=None, help="key=value RunConfig file")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--w-inter", type=float, default=None)
    p.add_argument("--alpha-aug", type=float, default=None)
    p.add_argument("--lambda-div", type=float, default=None)
    p.add_argument("--pooling-mode", choices=[m.value for m in PoolingMode], default=None)
    p.add_argument("--mask-kind", choices=[k.value for k in MaskKind], default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    if with_seed:
        p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sim", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--inverse", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--width-max", type=float, default=None)


def _runconfig_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = load_runconfig(args.config) if args.config else RunConfig()
    overrides = {}
    for attr in (
        "temperature",
        "margin",
        "w_inter",
        "alpha_aug",
        "lambda_div",
        "lr",
        "batch_size",
        "steps",
        "seed",
        "sim",
        "inverse",
        "weight_decay",
        "width_max",
    ):
        value = getattr(args, attr)
        if value is not None:
            overrides[attr] = value
    if args.pooling_mode is not None:
        overrides["pooling_mode"] = PoolingMode(args.pooling_mode)
    if args.mask_kind is not None:
        overrides["mask_kind"] = MaskKind(args.mask_kind)
    if args.sim is False and args.inverse is None:
        overrides["inverse"] = False
    return replace(cfg, **overrides)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params_for(dataset: Dataset, path: str) -> list[list[MaskParams]]:
    """Match a params file to a manifest, strictly by video id."""
    by_id = {vid: (c, w) for vid, c, w in read_params_json(path)}
    out = []
    for v in dataset.videos:
        if v.video_id not in by_id:
            raise SchemaError(f"params file lacks video {v.video_id!r}")
        centers, widths = by_id.pop(v.video_id)
        if len(centers) != v.n_events:
            raise SchemaError(
                f"video {v.video_id}: {len(centers)} parameter pairs for {v.n_events} events"
            )
        out.append([MaskParams(center=c, width=w) for c, w in zip(centers, widths)])
    if by_id:
        raise SchemaError(f"params file has unknown videos: {sorted(by_id)}")
    return out


def _score(
    dataset: Dataset,
    params: list[list[MaskParams]],
    label: str,
    one_to_one: bool = False,
) -> tuple[LocReport, list[list[float]]]:
    pairs = []
    for v, plist in zip(dataset.videos, params):
        if v.eval_segments is None:
            raise EmptyGroundTruth(f"video {v.video_id} has no ground-truth segments")
        preds = [mask_to_segment(p, dataset.n_frames) for p in plist]
        gts = [Segment(s, e) for s, e in v.eval_segments]
        pairs.append((preds, gts))
    report = corpus_scores(pairs, one_to_one=one_to_one, label=label)
    widths = [[p.width for p in plist] for plist in params]
    return report, widths


def _write_scores(
    out: Path,
    stem: str,
    reports: list[LocReport],
    widths: list[list[float]] | None,
) -> None:
    kv = "\n".join(report_kv(r) for r in reports)
    if widths is not None:
        ws = width_stats(widths)
        prefix = f"{reports[0].label}." if reports[0].label else ""
        kv += (
            f"\n{prefix}width_std_mean={ws.mean_std:.6f}"
            f"\n{prefix}width_std_min={ws.min_std:.6f}"
            f"\n{prefix}width_std_max={ws.max_std:.6f}"
        )
    (out / f"{stem}.txt").write_text(kv + "\n")
    (out / f"{stem}.csv").write_text(report_csv(reports))
    print(kv)


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = _scenario_from_args(args)
    videos = gen_dataset(spec)
    if args.keep_ratio is not None:
        policy = SparsifyPolicy(keep_ratio=args.keep_ratio, seed=spec.seed)
        videos = [sparsify(v, policy) for v in videos]
    dataset = to_dataset(videos, spec, with_synthetic=args.synthetic)
    manifest = write_dataset(dataset, _out_dir(args))
    for key, value in dataset_stats(videos).items():
        print(f"{key}={value:g}")
    print(f"manifest={manifest}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _runconfig_from_args(args)
    dataset = load_dataset(args.manifest)
    out = _out_dir(args)
    report = train(dataset, cfg, backend=args.backend)
    save_runconfig(cfg, out / "runconfig.txt")
    write_step_records(report.history, out / "records.jsonl")
    write_params_json(report.video_ids, report.final_params, out / "params.json")
    first, last = report.history[0], report.history[-1]
    print(f"backend={report.backend}")
    print(f"steps={report.steps}")
    print(f"loss_first={first.total:.6f}")
    print(f"loss_last={last.total:.6f}")
    print(f"wall_clock={report.wall_clock:.2f}s")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    report = run_gradcheck(
        trials=args.trials,
        seed=args.seed,
        mask_kind=MaskKind(args.mask_kind),
        tolerance=args.tolerance,
        h=args.h,
        backend=args.backend,
    )
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def _cmd_eval(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.manifest)
    params = _params_for(dataset, args.params)
    report, widths = _score(dataset, params, args.label, one_to_one=args.one_to_one)
    reports = [report]
    if args.with_baseline:
        base = [fixed_uniform_params(v.n_events) for v in dataset.videos]
        reports.append(_score(dataset, base, "baseline", one_to_one=args.one_to_one)[0])
    _write_scores(_out_dir(args), "scores", reports, widths)
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.manifest)
    params = [fixed_uniform_params(v.n_events) for v in dataset.videos]
    report, widths = _score(dataset, params, args.label, one_to_one=args.one_to_one)
    _write_scores(_out_dir(args), "baseline", [report], widths)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _runconfig_from_args(args)
    out = _out_dir(args)
    reports: list[LocReport] = []

    for keep in KEEP_RATIO_GRID:
        spec = _scenario_from_args(args)
        policy = SparsifyPolicy(keep_ratio=keep, seed=spec.seed)
        videos = [sparsify(v, policy) for v in gen_dataset(spec)]
        dataset = to_dataset(videos, spec, with_synthetic=True)
        trained = train(dataset, cfg, backend=args.backend)
        report, _ = _score(dataset, trained.final_params, f"keep_{keep:g}")
        reports.append(report)

    spec = _scenario_from_args(args)
    dataset = to_dataset(gen_dataset(spec), spec, with_synthetic=True)
    for w_inter in W_INTER_GRID:
        variant = replace(cfg, w_inter=w_inter)
        trained = train(dataset, variant, backend=args.backend)
        report, _ = _score(dataset, trained.final_params, f"winter_{w_inter:g}")
        reports.append(report)

    table = report_csv(reports)
    (out / "sweep.csv").write_text(table)
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskalign",
        description="Weakly-supervised temporal event localization via mask alignment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    _add_scenario_flags(p)
    p.add_argument("--keep-ratio", type=float, default=None)
    p.add_argument("--synthetic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("train", help="fit mask parameters on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backend", choices=["auto", *kernels.backend_names()], default="auto")
    _add_runconfig_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-kind", choices=[k.value for k in MaskKind], default=MaskKind.GAUSSIAN.value)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--backend", choices=["auto", *kernels.backend_names()], default="auto")
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("eval", help="score saved parameters against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--label", default="trained")
    p.add_argument("--one-to-one", action="store_true")
    p.add_argument("--with-baseline", action="store_true")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("baseline", help="score the fixed-uniform tiling")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--label", default="baseline")
    p.add_argument("--one-to-one", action="store_true")
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("sweep", help="keep-ratio and w_inter grids, one CSV")
    _add_scenario_flags(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backend", choices=["auto", *kernels.backend_names()], default="auto")
    _add_runconfig_flags(p, with_seed=False)
    p.set_defaults(fn=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except MaskAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
