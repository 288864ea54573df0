"""Command line entry point: ``mscr <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, report
from .augmentation import AugmentationConfig, augment, export_csv, with_clean
from .config import load_config, plan_from_mapping
from .errors import MSCRError, ValidationError
from .experiment import DataSource, k_convergence_study, measure_separation, run_experiment, score_external
from .norms import Norm
from .separation import min_class_separation

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
log = logging.getLogger("mscr")


def _global_flags(suppress):
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", type=Path, default=default, help="YAML experiment plan")
    p.add_argument("--seed", type=int, default=default, help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker threads (default 1)")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)
    return p


def _data_flags(p):
    g = p.add_argument_group("dataset (overrides the config's dataset)")
    g.add_argument("--csv", type=Path, help="CSV file with features and a label column")
    g.add_argument("--label-column", help="label column name or index (default: last)")
    g.add_argument("--cifar", type=Path, help="directory with the CIFAR-10 binary batches")
    g.add_argument("--include", choices=("train", "test", "both"), default="both")
    g.add_argument("--synth", help="synthetic 2-D kind, e.g. two_moons or diagonal_band")
    g.add_argument("--n", type=int, default=4000)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--norm", help="linf or l2 (default: config, else linf)")


def build_parser():
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="mscr", parents=[_global_flags(suppress=False)],
                                     description="Minimal-separation corruption robustness toolkit")
    parser.add_argument("--version", action="version", version=f"mscr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("separation", parents=[common], help="minimal class separation and eps_min")
    _data_flags(p)

    p = sub.add_parser("augment", parents=[common], help="write an augmented dataset for external models")
    _data_flags(p)
    p.add_argument("--epsilon", type=float, help="ball radius (default: eps_min of the data)")
    p.add_argument("--k", type=int, default=10, help="samples per point")
    p.add_argument("--clip", action="store_true", help="clip corrupted points to [0, 1]")
    p.add_argument("--no-clean", action="store_true", help="omit the clean rows (ordinal 0)")

    p = sub.add_parser("run", parents=[common], help="run the eps_train x eps_test experiment grid")
    p.add_argument("--preset", help="start from a named preset instead of --config")
    p.add_argument("--runs", type=int, help="override the number of runs")

    p = sub.add_parser("kstudy", parents=[common], help="robust accuracy as a function of k")
    p.add_argument("--preset", help="start from a named preset instead of --config")
    p.add_argument("--runs", type=int, help="override the number of runs")
    p.add_argument("--k", help="comma separated k values, e.g. 1,2,5,10,20,50,100")
    p.add_argument("--eps-train", type=float, help="training radius (default eps_min)")
    p.add_argument("--eps-test", type=float, help="test radius (default eps_min)")
    p.add_argument("--model", type=int, help="index of the model in the plan (default 0)")

    p = sub.add_parser("report", parents=[common], help="re-render tables and figures from saved runs")
    p.add_argument("--from", dest="source", type=Path, required=True,
                   help="directory holding runs.json and/or kstudy.json")

    p = sub.add_parser("score", parents=[common], help="score external predictions on an augmented export")
    p.add_argument("--export", type=Path, required=True, help="CSV written by `mscr augment`")
    p.add_argument("--predictions", type=Path, required=True,
                   help="CSV with parent_index, sample_ordinal, predicted_label")
    p.add_argument("--eps-min", type=float, help="radius the export was generated with")
    return parser


def _source_from_args(args):
    if args.csv is not None:
        return DataSource(source="csv", path=str(args.csv), label_column=args.label_column)
    if args.cifar is not None:
        return DataSource(source="cifar10", path=str(args.cifar), include=args.include)
    if args.synth is not None:
        return DataSource(source="synth", kind=args.synth, n=args.n, noise=args.noise, seed=args.data_seed)
    return None


def _dataset_and_norm(args):
    source = _source_from_args(args)
    norm = Norm.LINF
    if args.config is not None:
        cfg = load_config(args.config)
        source = source or cfg.plan.data
        norm = cfg.plan.norm
    if source is None:
        raise ValidationError("no dataset: pass --csv, --cifar, --synth or --config")
    if args.norm:
        norm = Norm.parse(args.norm)
    return source, norm


def _plan(args):
    if args.config is not None and getattr(args, "preset", None):
        raise ValidationError("pass either --config or --preset, not both")
    if args.config is not None:
        cfg = load_config(args.config, seed=args.seed)
        plan, ks = cfg.plan, cfg.kstudy
    elif getattr(args, "preset", None):
        plan, ks = plan_from_mapping({"preset": args.preset}, seed=args.seed)
    else:
        raise ValidationError(f"`{args.command}` needs --config or --preset")
    if getattr(args, "runs", None) is not None:
        plan = replace(plan, runs=args.runs)
    return plan, ks


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_separation(args):
    source, norm = _dataset_and_norm(args)
    data = source.load()
    res = min_class_separation(data, norm, threads=args.threads)
    doc = res.to_json()
    _emit(doc)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "separation.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_augment(args):
    source, norm = _dataset_and_norm(args)
    data = source.load()
    eps = args.epsilon
    if eps is None:
        eps = min_class_separation(data, norm, threads=args.threads).epsilon_min
    cfg = AugmentationConfig(epsilon=eps, k=args.k, norm=norm, clip_to_unit=args.clip,
                             seed=args.seed or 0)
    aug = augment(data, cfg)
    out_set = aug if args.no_clean else with_clean(data, aug)
    out_dir = args.out or Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = export_csv(out_set, out_dir / "augmented.csv")
    _emit({"path": str(path), "epsilon": eps, "k": cfg.k, "norm": norm.label, "seed": cfg.seed,
           "rows": out_set.n, "parents": data.n})
    return EXIT_OK


def _progress(total):
    def tick(r):
        log.info("run %d/%d done", r + 1, total)
    return tick


def cmd_run(args):
    plan, _ = _plan(args)
    data = plan.data.load()
    sep = measure_separation(plan, data, args.threads)
    log.info("two_r=%r eps_min=%r", sep.two_r, sep.epsilon_min)
    result = run_experiment(plan, threads=args.threads, dataset=data, separation=sep,
                            progress=_progress(plan.runs))
    bundle = report.render(result, args.out or Path("mscr-out"))
    sys.stdout.write(report.markdown_table(result.matrix))
    for flag in bundle.flags:
        log.warning(flag)
    log.info("wrote %s", bundle.out_dir)
    return EXIT_OK


def cmd_kstudy(args):
    plan, ks = _plan(args)
    data = plan.data.load()
    sep = measure_separation(plan, data, args.threads)
    scale = sep.epsilon_min if plan.eps_units == "eps_min" else 1.0

    def pick(flag, setting):
        if flag is not None:
            return flag * scale
        if setting is not None:
            return setting * scale
        return sep.epsilon_min

    k_values = [int(v) for v in args.k.split(",")] if args.k else list(ks.k)
    study = k_convergence_study(plan, k_values, eps_train=pick(args.eps_train, ks.eps_train),
                                eps_test=pick(args.eps_test, ks.eps_test),
                                model_index=ks.model if args.model is None else args.model,
                                threads=args.threads, dataset=data, separation=sep)
    report.render(None, args.out or Path("mscr-out"), kstudy=study)
    _emit({"model_id": study.model_id, "eps_train": study.eps_train, "eps_test": study.eps_test,
           "k": {str(k): s.to_json() for k, s in study.rows()}})
    return EXIT_OK


def cmd_report(args):
    src = args.source
    result = report.load_result(src) if (src / "runs.json").exists() else None
    study = report.load_kstudy(src) if (src / "kstudy.json").exists() else None
    bundle = report.render(result, args.out or src, kstudy=study)
    _emit({"files": sorted(bundle.files), "flags": bundle.flags})
    return EXIT_OK


def cmd_score(args):
    out = score_external(args.export, args.predictions, args.eps_min)
    _emit(out)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "score.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"separation": cmd_separation, "augment": cmd_augment, "run": cmd_run, "kstudy": cmd_kstudy,
            "report": cmd_report, "score": cmd_score}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 1), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"mscr: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MSCRError, Exception) as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"mscr: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
