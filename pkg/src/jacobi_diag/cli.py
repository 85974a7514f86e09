"""Command line entry point: ``generate``, ``run``, ``compare``, ``diagnose``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cost import load_manifest
from .diagnostics import diagnostic_report, write_report
from .driver import read_trace_csv
from .harness import GeneratorDirective, compare_and_plot, generate, generate_repetitions, load_config, run_experiment
from .tensor import read_ten


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--rule", choices=("cyclic", "gradient-max", "gradient-first-cyclic"))
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--out")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jacobi-diag", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random or planted instance")
    g.add_argument("config", nargs="?", help="JSON file with a 'generator' section")
    g.add_argument("--kind")
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--L", type=int)
    g.add_argument("--values", help="comma separated diagonal values (planted-orthogonal)")
    g.add_argument("--noncommuting", action="store_true", help="perturb planted-jade matrices")
    g.add_argument("--repetitions", type=int, default=1)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")

    r = sub.add_parser("run", help="run an experiment described by a JSON config")
    r.add_argument("config")
    _add_overrides(r)
    r.add_argument("--timing", action="store_true", help="record wall times (breaks byte determinism)")

    c = sub.add_parser("compare", help="combine trace CSVs into one table and an SVG chart")
    c.add_argument("traces", nargs="+", help="trace CSVs, optionally as label=path")
    c.add_argument("--out", required=True, help="output stem (writes <stem>.csv and <stem>.svg)")
    c.add_argument("--linear", action="store_true", help="linear scale for the gradient panel")

    dg = sub.add_parser("diagnose", help="stationarity, Hessian surrogate and rate diagnostics")
    dg.add_argument("manifest")
    dg.add_argument("--point", required=True, help=".ten file with the final matrix")
    dg.add_argument("--trace", help="trace CSV for the rate fit")
    dg.add_argument("--start", help=".ten file with the starting point of the trace (default identity)")
    dg.add_argument("--tol", type=float, default=1e-8)
    dg.add_argument("--out", help="write the JSON report here instead of stdout")
    return ap


def _cmd_generate(args) -> int:
    gen, out = {}, args.out
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        gen = dict(doc.get("generator", {}))
        out = out or doc.get("out")
    for key in ("kind", "n", "d", "L"):
        if getattr(args, key) is not None:
            gen[key] = getattr(args, key)
    if args.values:
        gen["values"] = [float(v) for v in args.values.split(",")]
    if args.noncommuting:
        gen["commuting"] = False
    if args.seed is not None:
        gen["seed"] = args.seed
    if "kind" not in gen or out is None:
        raise SystemExit("generate needs a kind and an output directory")
    kind, seed = gen.pop("kind"), int(gen.pop("seed", 0))
    directive = GeneratorDirective(kind, gen, seed)
    if args.repetitions == 1:
        paths = [generate(directive).save(out, "cost")]
    else:
        paths = [inst.save(Path(out) / f"inst{r:03d}", "cost")
                 for r, inst in enumerate(generate_repetitions(directive, args.repetitions))]
    for p in paths:
        print(p)
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config, seed=args.seed, delta=args.delta, rule=args.rule,
                      grad_tol=args.grad_tol, max_iters=args.max_iters, out=args.out,
                      timing=True if args.timing else None)
    result = run_experiment(cfg)
    print(result.summary_path.read_text(), end="")
    return 0


def _cmd_compare(args) -> int:
    traces = {}
    for item in args.traces:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).stem, item
        traces[label] = path
    csv_path, svg_path = compare_and_plot(traces, args.out, log_grad=not args.linear)
    print(csv_path)
    print(svg_path)
    return 0


def _cmd_diagnose(args) -> int:
    spec = load_manifest(args.manifest)
    X = read_ten(args.point).data
    if spec.group == "orthogonal":
        X = X.real
    trace = None
    if args.trace:
        X0 = read_ten(args.start).data if args.start else np.eye(spec.dim)
        if spec.group == "orthogonal":
            X0 = X0.real
        trace = read_trace_csv(args.trace, group=spec.group, X0=X0)
    report = diagnostic_report(spec, X, trace, args.tol)
    if args.out:
        write_report(report, args.out)
    else:
        json.dump(report, sys.stdout, indent=2)
        print()
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"generate": _cmd_generate, "run": _cmd_run,
               "compare": _cmd_compare, "diagnose": _cmd_diagnose}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
