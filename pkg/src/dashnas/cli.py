"""Command-line interface: ``dashnas <subcommand> [flags]``.

Exit codes: 0 success, 1 invariant failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import sys
from typing import Optional, Sequence

from . import bench, pipeline, tasks, verify
from . import mixedconv as mc
from . import supernet as sn

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_range(text: str) -> list:
    """``7``, ``1..7`` or ``1,3,5``."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
        if lo_i > hi_i:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return list(range(lo_i, hi_i + 1))
    return _int_list(text)


def _space(args, default: Optional[mc.SearchSpace]) -> mc.SearchSpace:
    if args.space is not None and (args.K or args.D):
        raise UsageError("give either --space or --K/--D, not both")
    if args.space is not None:
        if len(args.space) != 1:
            raise UsageError("--space takes a single scale c here")
        return bench.space_for_scale(args.space[0])
    if args.K or args.D:
        base = default or mc.SearchSpace((3,), (1,))
        return mc.SearchSpace(tuple(args.K or base.kernel_sizes), tuple(args.D or base.dilations))
    if default is None:
        raise UsageError("a search space is required (--space or --K/--D)")
    return default


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        bench.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _add_space_flags(p, space_help="search-space scale c: K={3+2(p-1)}, D={2^q-1}, p,q <= c"):
    p.add_argument("--space", type=_int_range, help=space_help)
    p.add_argument("--K", type=_int_list, help="explicit kernel sizes, e.g. 3,5,7")
    p.add_argument("--D", type=_int_list, help="explicit dilations, e.g. 1,3,7")


def _add_common(p, formats=("json",)):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=formats, default=formats[0])


def _add_method_flags(p):
    p.add_argument("--strategy", choices=[s.value for s in mc.MixStrategy])
    p.add_argument("--dilation-impl", choices=[d.value for d in mc.DilationImpl])


def _add_bench_flags(p):
    _add_method_flags(p)
    p.add_argument("--batch", type=int, default=128, help="minibatch size (default 128)")
    p.add_argument("--batches", type=int, help="minibatches per epoch (default ceil(dataset/batch))")
    p.add_argument("--dataset", type=int, default=10_000, help="sequences per epoch (default 10000)")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--backbone", choices=("wrn", "probe"), default="wrn")
    p.add_argument("--channels", type=int, help="WRN width (default from 10 classes: 16)")
    _add_common(p, ("csv", "json"))


def _add_task_flags(p):
    p.add_argument("--task", choices=("recovery", "motifs"), default="recovery")
    p.add_argument("--data", help="load a saved task directory instead of generating one")
    p.add_argument("--save-task", help="write the generated task to this directory")
    p.add_argument("--k-star", type=int, default=5)
    p.add_argument("--d-star", type=int, default=3)
    p.add_argument("--n", type=int, default=64, help="input length")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--noise", type=float)
    p.add_argument("--backbone", choices=("probe", "wrn"))
    p.add_argument("--epochs", type=int, default=30, help="search epochs")
    p.add_argument("--batch", type=int, help="search minibatch size")
    _add_method_flags(p)
    _add_space_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dashnas", allow_abbrev=False,
                                     description="Mixed dilated-convolution search: verification, cost model, "
                                                 "benchmarks and the search pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", allow_abbrev=False, help="run the invariant suites")
    p.add_argument("--instances", type=int, default=100, help="random strategy-equivalence instances")
    p.add_argument("--n", type=int, default=256, help="largest input length in random instances")
    p.add_argument("--suite", action="append", choices=sorted(verify.SUITES), help="run only these suites")
    p.add_argument("--inject-fault", choices=("orientation",), help=argparse.SUPPRESS)
    _add_common(p)

    p = sub.add_parser("opcount", allow_abbrev=False, help="closed-form MULT/ADD counts")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c-in", type=int, default=1)
    p.add_argument("--c-out", type=int, default=1)
    _add_method_flags(p)
    _add_space_flags(p)
    _add_common(p, ("json", "csv"))

    p = sub.add_parser("bench-space", allow_abbrev=False, help="epoch time vs search-space scale c")
    _add_space_flags(p, "scales to measure: c, a..b, or a list (default 1..7)")
    p.add_argument("--n", type=int, default=1000)
    _add_bench_flags(p)

    p = sub.add_parser("bench-length", allow_abbrev=False, help="epoch time vs input length n")
    _add_space_flags(p)
    p.add_argument("--n", type=_int_list, help="powers of two (default 32,64,...,4096)")
    _add_bench_flags(p)

    p = sub.add_parser("search", allow_abbrev=False, help="search only; report alphas and selections")
    _add_task_flags(p)
    _add_common(p)

    p = sub.add_parser("pipeline", allow_abbrev=False, help="search, tune and retrain end to end")
    _add_task_flags(p)
    p.add_argument("--tune-epochs", type=int, default=10)
    p.add_argument("--retrain-epochs", type=int, default=50)
    p.add_argument("--timing-out", help="where to write phase timings (default: <out>.timing.json)")
    _add_common(p)
    return parser


# ------------------------------------------------------------- commands

def cmd_verify(args) -> int:
    guard = mc.inject_fault(args.inject_fault) if args.inject_fault else contextlib.nullcontext()
    with guard:
        report = verify.run_all(args.seed, args.instances, args.n, args.suite)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    for name in report["failed"]:
        print(f"FAILED: {name}", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAILURE


def cmd_opcount(args) -> int:
    space = _space(args, None)
    strategies = [args.strategy] if args.strategy else [s.value for s in mc.MixStrategy]
    reports = [mc.count_ops(s, args.c_in, args.c_out, args.n, space) for s in strategies]
    if args.format == "json":
        doc = {"K": list(space.kernel_sizes), "D": list(space.dilations), "k_bar": space.k_bar,
               "d_bar": space.d_bar, "n": args.n, "c_in": args.c_in, "c_out": args.c_out,
               "counts": [r.to_dict() for r in reports]}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["strategy", "k_bar", "d_bar", "n", "c_in", "c_out", "mults", "adds"])
        for r in reports:
            w.writerow([r.strategy, space.k_bar, space.d_bar, args.n, args.c_in, args.c_out, r.mults, r.adds])
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _methods(args) -> tuple:
    out = [m for m in bench.METHODS
           if (args.strategy is None or m[0] == args.strategy)
           and (args.dilation_impl is None or m[0] == "mixed-results" or m[1] == args.dilation_impl)]
    if not out:
        raise UsageError("no benchmark method matches the --strategy/--dilation-impl filter")
    return tuple(out)


def _setup(args, n: int) -> bench.BenchSetup:
    return bench.BenchSetup(n=n, batch=args.batch, batches=args.batches, dataset=args.dataset,
                            trials=args.trials, seed=args.seed, backbone=args.backbone, channels=args.channels)


def _progress(r: bench.BenchResult) -> None:
    status = r.error or f"{r.median:.4g} s"
    print(f"{r.axis}={r.value} {r.method}: {status}", file=sys.stderr)


def _write_bench(args, results, axis, setup, space_of) -> int:
    if args.out:
        bench.write_results(args.out, results, axis, setup, args.format, space_of)
    else:
        tmp = io.StringIO()
        header, rows = bench.to_table(results, axis, space_of)
        if args.format == "csv":
            csv.writer(tmp, lineterminator="\n").writerows([header] + rows)
        else:
            tmp.write(json.dumps({"axis": axis, "results": [r.to_dict() for r in results]}, indent=2) + "\n")
        sys.stdout.write(tmp.getvalue())
    return EXIT_OK


def cmd_bench_space(args) -> int:
    if args.K or args.D:
        raise UsageError("bench-space scans the scale c; use --space")
    scales = args.space or list(range(1, 8))
    setup = _setup(args, args.n)
    results = bench.bench_space(scales, setup, _methods(args), _progress)
    return _write_bench(args, results, "c", setup, bench.space_for_scale)


def cmd_bench_length(args) -> int:
    space = _space(args, bench.LENGTH_SPACE)
    lengths = args.n or [2 ** e for e in range(5, 13)]
    setup = _setup(args, lengths[0])
    results = bench.bench_length(lengths, space, setup, _methods(args), _progress)
    return _write_bench(args, results, "n", setup, lambda _n: space)


def _task(args) -> tasks.SyntheticTask:
    if args.data:
        return tasks.load_task(args.data)
    kw = {"k_star": args.k_star, "d_star": args.d_star, "n": args.n, "num_samples": args.samples, "seed": args.seed}
    if args.noise is not None:
        kw["noise"] = args.noise
    task = tasks.make_task("ground_truth_conv" if args.task == "recovery" else "sum_of_dilated_motifs", **kw)
    if args.save_task:
        tasks.save_task(task, args.save_task)
    return task


def _pipeline_config(args, task) -> pipeline.PipelineConfig:
    backbone = args.backbone or ("probe" if task.head_kind == "dense" else "wrn")
    overrides = {"epochs": args.epochs}
    if args.batch:
        overrides["batch_size"] = args.batch
    if args.strategy:
        overrides["strategy"] = args.strategy
    if args.dilation_impl:
        overrides["dilation_impl"] = args.dilation_impl
    if backbone == "probe":
        cfg = pipeline.recovery_config(args.seed, **overrides)
    else:
        cfg = pipeline.PipelineConfig(search=pipeline.SearchConfig(seed=args.seed, **overrides),
                                      backbone=backbone, seed=args.seed)
    return cfg


def cmd_search(args) -> int:
    task = _task(args)
    space = _space(args, pipeline.RECOVERY_SPACE)
    cfg = _pipeline_config(args, task)
    spec = pipeline.backbone_for_task(task, cfg.backbone)
    s = cfg.search
    model = sn.SupernetModel(spec, space, s.strategy, s.dilation_impl, args.seed, s.relaxation, s.temperature)
    result = pipeline.search(model, task, s)
    doc = {"task": task.metadata(), "search_space": space.to_dict(), "strategy": s.strategy,
           "dilation_impl": s.dilation_impl, "selected": [list(c) for c in model.selected_ops()],
           "alphas": [[round(float(v), 12) for v in a] for a in model.alphas()],
           "epoch_losses": [round(v, 12) for v in result.epoch_losses]}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    task = _task(args)
    space = _space(args, pipeline.RECOVERY_SPACE)
    cfg = _pipeline_config(args, task)
    cfg.tune_budget = pipeline.TuneBudget(epochs=args.tune_epochs)
    cfg.retrain_epochs = args.retrain_epochs
    result = pipeline.run_full_pipeline(task, space, cfg)
    _emit(result.report_json(), args.out)
    timing_text = json.dumps(result.timing, indent=2) + "\n"
    timing_path = args.timing_out or (f"{args.out}.timing.json" if args.out else None)
    if timing_path:
        bench.atomic_write(timing_path, timing_text)
    else:
        sys.stderr.write(timing_text)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "opcount": cmd_opcount, "bench-space": cmd_bench_space,
            "bench-length": cmd_bench_length, "search": cmd_search, "pipeline": cmd_pipeline}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"dashnas {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pipeline.SearchDiverged as exc:
        print(f"dashnas {args.command}: diverged: {exc}", file=sys.stderr)
        return EXIT_FAILURE
