"""Command-line entry point: ``cmbo-bench <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import csv
import io
import json
import sys
from pathlib import Path

from ..engine import cluster_index_grid, fit_meta_posteriors
from ..errors import CmboError, DataError, InsufficientData, NumericalError
from ..metacluster import (
    JOINT,
    PER_METRIC,
    inter_cluster_separation,
    intra_cluster_entropy,
    kmeans_gd,
    pairwise_w2,
    sweep_cluster_count,
)
from ..statdist import JEFFREYS, WASSERSTEIN
from .data import load_meta_dataset, make_synthetic_meta_dataset, save_meta_dataset
from .experiment import (
    DEFAULT_METHODS,
    ExperimentConfig,
    mean_curve,
    meta_data,
    read_traces,
    resolve_method,
    run_matrix,
    splits,
    sweep_runs,
    write_traces,
)
from .metrics import DEFAULT_THRESHOLD, aggregate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _experiment_flags(p, seed_required=False):
    p.add_argument("--data", required=True, help="meta-dataset JSON file")
    p.add_argument("--seed", type=int, required=seed_required, default=None,
                   help="master seed")
    p.add_argument("--split-ratio", type=float, default=0.85)
    p.add_argument("--n-split-seeds", type=int, default=5)
    p.add_argument("--runs-per-target", type=int, default=8)
    p.add_argument("--T", type=int, default=50, dest="T")
    p.add_argument("--n-init", type=int, default=5)
    p.add_argument("--meta-obs", type=int, default=50)
    p.add_argument("--n-clusters", type=int, default=2)
    p.add_argument("--cluster-grid", type=int, default=100)
    p.add_argument("--compare-grid", type=int, default=300)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--workers", type=int, default=1)


def _experiment_config(args, **over):
    kw = dict(
        split_ratio=args.split_ratio, n_split_seeds=args.n_split_seeds,
        runs_per_target=args.runs_per_target, T=args.T, n_init=args.n_init,
        meta_obs_per_task=args.meta_obs, n_clusters=args.n_clusters,
        cluster_grid_size=args.cluster_grid, compare_grid_size=args.compare_grid,
        threshold=args.threshold, seed=0 if args.seed is None else args.seed,
        workers=args.workers,
    )
    kw.update(over)
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_parser():
    parser = _Parser(prog="cmbo-bench", description="Clustering-based meta-BO benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write the synthetic two-family meta-dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--n-per-family", type=int, default=5)
    p.add_argument("--n-targets", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.01)

    p = sub.add_parser("cluster", help="fit meta-task posteriors and cluster them")
    _experiment_flags(p)
    p.add_argument("--distance", choices=(WASSERSTEIN, JEFFREYS), default=WASSERSTEIN)
    p.add_argument("--out", default=None, help="output JSON (default: stdout)")

    p = sub.add_parser("run", help="run the experiment matrix and write traces")
    _experiment_flags(p, seed_required=True)
    p.add_argument("--method", action="append", default=None,
                   help="method name or alias (cmbo, vanilla, random); repeat or "
                   "comma-separate (default: %s)" % ",".join(DEFAULT_METHODS))
    p.add_argument("--af", default="ucb", help="acquisition(s), comma-separated: ucb,ei,pi")
    p.add_argument("--out", required=True, help="traces directory")

    p = sub.add_parser("sweep-clusters", help="mean-NSR curve of cm-BO for each cluster count")
    _experiment_flags(p)
    p.add_argument("--c-min", type=int, default=2)
    p.add_argument("--c-max", type=int, default=6)
    p.add_argument("--method", default="WssClus_WssCMP")
    p.add_argument("--af", default="ucb")
    p.add_argument("--distance", choices=(WASSERSTEIN, JEFFREYS), default=WASSERSTEIN)
    p.add_argument("--scaling", choices=(JOINT, PER_METRIC), default=JOINT)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="aggregate a traces directory")
    p.add_argument("traces", help="traces directory written by 'run'")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", default=None, help="output directory (default: the traces dir)")
    return parser


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8", newline="")


def _meta_posteriors(args, config):
    dataset = load_meta_dataset(args.data)
    split, train, _ = splits(dataset, config)[0]
    meta = meta_data(dataset, train, config, split)
    posts = fit_meta_posteriors(meta)
    grid = cluster_index_grid(dataset.dim, config.cluster_grid_size, 0)
    return dataset, train, [p.on(grid) for p in posts]


def cmd_synth(args):
    ds = make_synthetic_meta_dataset(seed=args.seed, dim=args.dim,
                                     n_per_family=args.n_per_family,
                                     n_targets=args.n_targets, noise=args.noise)
    save_meta_dataset(ds, args.out)
    return EXIT_OK


def cmd_cluster(args):
    config = _experiment_config(args)
    _, train, gds = _meta_posteriors(args, config)
    cl = kmeans_gd(gds, args.n_clusters, args.distance, config.seed)
    D = pairwise_w2(gds)
    metrics = {"intraCE": intra_cluster_entropy(cl, gds, D)}
    if cl.n_clusters >= 2:
        metrics["interCS"] = inter_cluster_separation(cl, gds, D)
    doc = cl.to_json(metrics)
    doc["task_ids"] = list(train)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args):
    methods = tuple(resolve_method(m) for item in (args.method or [",".join(DEFAULT_METHODS)])
                    for m in _csv_list(item))
    config = _experiment_config(args, methods=methods, afs=_csv_list(args.af))
    dataset = load_meta_dataset(args.data)
    traces = run_matrix(dataset, config)
    out = write_traces(traces, args.out)
    _write(out / "experiment.json", json.dumps(config.as_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(traces)} traces to {out}")
    return EXIT_OK


def cmd_sweep(args):
    if args.c_min < 1 or args.c_max < args.c_min:
        raise UsageError("need 1 <= --c-min <= --c-max")
    Cs = tuple(range(args.c_min, args.c_max + 1))
    config = _experiment_config(args, C_range=Cs, methods=(resolve_method(args.method),),
                                afs=_csv_list(args.af)[:1])
    dataset, train, gds = _meta_posteriors(args, config)
    sweep = sweep_cluster_count(gds, Cs, args.distance, config.seed, args.scaling)
    curves = {C: mean_curve(trs) for C, trs in sweep_runs(dataset, config, config.methods[0],
                                                           config.afs[0]).items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["C", "tau", "mean_nsr"])
    for C, curve in curves.items():
        for tau, v in enumerate(curve):
            w.writerow([C, tau, repr(float(v))])
    out = Path(args.out)
    _write(out / "sweep_curves.csv", buf.getvalue())
    doc = sweep.to_json()
    doc["task_ids"] = list(train)
    doc["final_mean_nsr"] = {str(C): float(c[-1]) for C, c in curves.items()}
    _write(out / "sweep.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"{len(curves)} curves; recommended C = {sweep.recommended}")
    return EXIT_OK


def cmd_report(args):
    src = Path(args.traces)
    if not src.is_dir():
        raise InsufficientData(f"{src} is not a directory")
    traces = read_traces(src)
    if not traces:
        raise InsufficientData(f"no traces found in {src}")
    report = aggregate(traces, args.threshold)
    out = Path(args.out) if args.out else src
    _write(out / "report.csv", report.to_csv())
    _write(out / "report.json", report.dumps() + "\n")
    for m in report.methods:
        last = [r for r in report.rows if r.method == m][-1]
        print(f"{m}: tau={last.tau} mean_nsr={last.mean_nsr:.4f} "
              f"avg_rank={last.avg_rank:.3f} solvable={last.solvable_frac:.3f}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "cluster": cmd_cluster,
    "run": cmd_run,
    "sweep-clusters": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CmboError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
