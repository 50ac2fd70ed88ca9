"""Command-line entry point.

    qdbc tables   --data iris.csv --preprocess minmax
    qdbc walk     --scenario clustered --steps 1000 --start mid-A
    qdbc recycle  --classes A,B
    qdbc prep-check --features 4 --trials 1000
    qdbc classify --vector 5.1,3.5,1.4,0.2 --method recycle --seed 3

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, oqw
from .classifier import TrainingSet, loocv_report, sample_classify
from .data import DataError, Report, Table, load_iris, write_report
from .encoding import (DEFAULT_MODE, MODES, PreprocessError, Scaler, SynthesisError,
                       circuit_fidelity, interference_state, prep_circuit)
from .recycling import recycle_classify, scheme_comparison

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
PREP_TOL = 1e-10


class NumericalFailure(RuntimeError):
    pass


def _common(p: argparse.ArgumentParser):
    p.add_argument("--data", default=None, help="Iris-style CSV (default: bundled Iris)")
    p.add_argument("--preprocess", choices=MODES, default=DEFAULT_MODE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--config", default=None, help="JSON file of flag defaults")
    p.add_argument("--timestamp", action="store_true",
                   help="record wall-clock time in the metadata (breaks byte-identical reruns)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdbc", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("tables", help="leave-one-out post-selection and class tables")
    _common(p)

    p = sub.add_parser("walk", help="per-step class success curves of the cycle walk")
    _common(p)
    p.add_argument("--scenario", choices=("clustered", "interleaved"), default="clustered")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--start", default=None,
                   help="start node index or mid-<class> (default: mid-A clustered, 0 interleaved)")
    p.add_argument("--graph", choices=("cycle", "complete", "bipartite"), default="cycle")
    p.add_argument("--lazy", action=argparse.BooleanOptionalAction, default=True,
                   help="add self-loops so the walk is aperiodic")
    p.add_argument("--kind", choices=oqw.KINDS, default="reset")

    p = sub.add_parser("recycle", help="1-step vs 2-step recycling comparison")
    _common(p)
    p.add_argument("--classes", default=None, help="class pair, e.g. A,B (default: first two)")
    p.add_argument("--graph", choices=("uniform", "complete", "bipartite"), default="uniform")

    p = sub.add_parser("prep-check", help="preparation circuit fidelity sweep")
    _common(p)
    p.add_argument("--features", type=int, choices=(2, 4), action="append", default=None)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--template", choices=("extended", "fixed"), default="extended")

    p = sub.add_parser("classify", help="one seeded classification of a raw feature vector")
    _common(p)
    p.add_argument("--vector", required=True, help="comma-separated raw features")
    p.add_argument("--method", choices=("channel", "recycle"), default="channel")
    p.add_argument("--max-attempts", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=2)
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        # re-parse so explicit flags win over the file
        parser.commands[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
        args = parser.parse_args(argv)
    return args


def _metadata(args) -> dict:
    meta = {k: v for k, v in vars(args).items() if k not in ("out", "config", "timestamp")}
    meta["version"] = __version__
    if args.timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return {k: ("" if v is None else v) for k, v in meta.items()}


def _dataset(args):
    ds = load_iris(args.data)
    x = Scaler.fit(ds.features, args.preprocess).transform(ds.features)
    return ds, x


def cmd_tables(args) -> Report:
    ds, x = _dataset(args)
    t = loocv_report(x, ds.labels)
    cls = list(t.classes)
    return Report([
        Table("postselection", "class", cls, cls, t.postselection),
        Table("conditional", "class", cls, cls, t.conditional),
        Table("success", "class", cls, ["success_probability"], t.success),
    ], _metadata(args))


def _start_node(graph: oqw.WalkGraph, spec: str | None, scenario: str) -> int:
    if spec is None:
        spec = "mid-A" if scenario == "clustered" else "0"
    if spec.startswith("mid-"):
        label = spec[4:]
        nodes = [k for k, y in enumerate(graph.labels) if y == label]
        if not nodes:
            raise DataError(f"no nodes of class {label!r}")
        return nodes[len(nodes) // 2]
    start = int(spec)
    if not 0 <= start < graph.n:
        raise DataError(f"start node {start} out of range")
    return start


def cmd_walk(args) -> Report:
    if args.steps < 1:
        raise DataError("--steps must be >= 1")
    ds, x = _dataset(args)
    graph = oqw.build_graph(args.graph, ds.labels, args.scenario, self_loops=args.lazy)
    start = _start_node(graph, args.start, args.scenario)
    classes, curves = oqw.class_success_curves(graph, x, ds.labels, args.steps, start, args.kind)
    limit = oqw.channel_limit(graph, x, ds.labels)
    meta = _metadata(args)
    meta["start_node"] = start
    meta.update({f"limit_{c}": f"{v:.6g}" for c, v in zip(classes, limit)})
    return Report([Table("curve", "step", list(range(1, args.steps + 1)),
                         [f"p_{c}" for c in classes], curves)], meta)


def cmd_recycle(args) -> Report:
    ds, x = _dataset(args)
    pair = args.classes.split(",") if args.classes else None
    graph = None if args.graph == "uniform" else args.graph
    cmp = scheme_comparison(x, ds.labels, pair, graph)
    return Report([Table("recycling", "class", list(cmp.classes),
                         ["one_step", "two_step", "win_fraction"],
                         np.column_stack([cmp.one_step, cmp.two_step, cmp.win_fraction]))],
                  _metadata(args))


def _random_unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def cmd_prep_check(args) -> Report:
    rng = np.random.default_rng(args.seed)
    sizes = args.features or [2, 4]
    rows = []
    for d in sizes:
        worst, failures = 0.0, 0
        for _ in range(args.trials):
            t, s = _random_unit(rng, d), _random_unit(rng, d)
            try:
                fid = circuit_fidelity(prep_circuit(t, s, args.template), interference_state(t, s))
            except SynthesisError as exc:
                fid = exc.fidelity
            residual = max(0.0, 1 - fid)
            worst = max(worst, residual)
            failures += residual > PREP_TOL
        rows.append([args.trials, failures, worst])
    report = Report([Table("prep_check", "features", sizes,
                           ["trials", "failures", "max_residual"], rows)], _metadata(args))
    worst = max(r[2] for r in rows)
    ok = all(r[1] == 0 for r in rows)
    report.metadata["verified"] = ok
    report.metadata["summary"] = (f"max residual < {PREP_TOL:g}" if ok
                                  else f"max residual {worst:.3g} exceeds {PREP_TOL:g}")
    return report


def cmd_classify(args) -> Report:
    ds, x = _dataset(args)
    try:
        raw = np.array([float(v) for v in args.vector.split(",")])
    except ValueError:
        raise DataError(f"bad --vector {args.vector!r}") from None
    if raw.size != ds.features.shape[1]:
        raise DataError(f"--vector needs {ds.features.shape[1]} values")
    test = Scaler.fit(ds.features, args.preprocess).transform(raw)[0]
    train = TrainingSet(x, ds.labels)
    meta = _metadata(args)

    if args.method == "channel":
        tr = sample_classify(test, train, args.seed, args.max_attempts)
        outcomes = [1] * (tr.attempts - 1) + [0 if tr.succeeded else 1]
        rows = [[i, o] for i, o in zip(tr.sampled_indices, outcomes)]
        meta.update(final_label=tr.final_label or "", succeeded=tr.succeeded, attempts=tr.attempts)
    else:
        res = recycle_classify(test, train, args.seed, args.max_steps,
                               max_restarts=args.max_attempts)
        rows = [[st.sampled_index, st.ancilla_outcome] for st in res.steps]
        meta.update(final_label=res.label or "", succeeded=res.succeeded,
                    attempts=len(res.steps), restarts=res.restarts)
    return Report([Table("transcript", "step", list(range(1, len(rows) + 1)),
                         ["sampled_index", "ancilla_outcome"], rows)], meta)


COMMANDS = {
    "tables": cmd_tables,
    "walk": cmd_walk,
    "recycle": cmd_recycle,
    "prep-check": cmd_prep_check,
    "classify": cmd_classify,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        report = COMMANDS[args.command](args)
    except (DataError, PreprocessError, OSError, ValueError) as exc:
        print(f"qdbc {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, SynthesisError, ArithmeticError) as exc:
        print(f"qdbc {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    payload = write_report(report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()

    summary = report.metadata.get("summary")
    if summary:
        print(summary, file=sys.stderr)
    if report.metadata.get("verified") is False:
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
