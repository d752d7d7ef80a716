"""Command-line entry point.

    metaloop simulate --stack stack.json [--grid ...] [--angles 0,30] [--pol s]
    metaloop train --data data.csv > model.json
    metaloop solve --qubo q.json --solver annealing
    metaloop optimize --config run.json --log run.jsonl
    metaloop bench-tmm|bench-fm|bench-qaoa [--out table.csv] [--plot fig.png]

Tables go to stdout (or ``--out``); ``--plot`` additionally renders a PNG.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import bench, fm, loop, qubo, tmm
from .errors import MetaloopError, SchemaError
from .materials import IncidenceCondition, Layer, LayerStack, decode


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from None


def parse_stack(doc, base_dir=".") -> LayerStack:
    """{"ambient": m, "layers": [{"material": m, "thickness_nm": d}, ...], "substrate": m}"""
    loop._check_keys(doc, {"ambient", "layers", "substrate"}, "stack")
    layers = []
    for item in doc.get("layers", []):
        loop._check_keys(item, {"material", "thickness_nm"}, "layer")
        layers.append(Layer(loop.parse_material(item["material"], base_dir), float(item["thickness_nm"])))
    ambient = loop.parse_material(doc.get("ambient", "air"), base_dir)
    substrate = loop.parse_material(doc["substrate"], base_dir) if doc.get("substrate") is not None else None
    return LayerStack(ambient, tuple(layers), substrate)


def cmd_simulate(args):
    config = None
    if args.config:
        config = loop.RunConfig.load(args.config)
    if args.stack:
        stack = parse_stack(_load_json(args.stack), os.path.dirname(os.path.abspath(args.stack)))
    elif args.bits and config:
        stack = decode(qubo.str_to_bits(args.bits), config.encoding)
    else:
        raise SchemaError("simulate needs --stack, or --bits together with --config")
    if args.grid:
        lo, hi, num = args.grid.split(",")
        grid = loop.parse_grid({"start": float(lo), "stop": float(hi), "num": int(num)})
    else:
        grid = config.grid if config else tmm.default_trc_grid()
    if args.angles is not None:
        conds = [IncidenceCondition(a, args.pol) for a in _floats(args.angles)]
    else:
        conds = list(config.conditions) if config else [IncidenceCondition(0.0, args.pol)]
    result = tmm.sweep(stack, grid, conds, workers=args.workers)
    _emit(result.to_csv(), args.out)
    if config:
        print(f"# fom={tmm.evaluate_fom(result, config.fom):.12g}", file=sys.stderr)
    if args.plot:
        from .plotting import plot_spectra

        plot_spectra(result, args.plot)


def cmd_train(args):
    with open(args.data, encoding="utf-8") as fh:
        ds = fm.Dataset.from_csv(fh.read())
    cfg = fm.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed, workers=args.workers, k=args.k,
    )
    model = fm.train(ds, cfg)
    print(f"# final loss={fm.loss(model, ds):.6g}", file=sys.stderr)
    _emit(model.to_json() + "\n", args.out)


def cmd_solve(args):
    with open(args.qubo, encoding="utf-8") as fh:
        q = qubo.QuboMatrix.from_json(fh.read())
    settings = {"kind": args.solver}
    if args.solver == "annealing":
        settings.update(sweeps=args.sweeps, restarts=args.restarts or 10)
    elif args.solver == "qaoa":
        settings.update(p=args.p, shots=args.shots, restarts=args.restarts or 5, outer_budget=args.outer_budget)
    _, report = loop.solve(q, settings, args.seed)
    if report.get("accuracy") is None and q.n <= qubo.BRUTE_FORCE_MAX_N:
        opt = qubo.brute_force(q).energy
        report["accuracy"] = qubo.accuracy(report["energy"], opt)
        report["accuracy_mode"] = qubo.accuracy_mode(report["energy"], opt)
    _emit(json.dumps(report) + "\n", args.out)


def cmd_optimize(args):
    if not args.config:
        raise SchemaError("optimize needs --config")
    doc = _load_json(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.workers_given:
        doc["workers"] = args.workers
    config = loop.RunConfig.from_dict(doc, os.path.dirname(os.path.abspath(args.config)))
    runlog = loop.run(config, log_path=args.log)
    summary = {
        "best_bits": runlog.best_bits,
        "best_fom": runlog.best_fom,
        "seed_best_fom": runlog.seed_best_fom,
        "iterations": len(runlog.records),
        "log": args.log,
    }
    _emit(json.dumps(summary) + "\n", args.out)
    if args.plot:
        from .plotting import plot_runlog

        plot_runlog([r.to_dict() for r in runlog.records], args.plot)


def _workers_list(args):
    return _ints(args.worker_list) if args.worker_list else (1, args.workers) if args.workers > 1 else (1,)


def cmd_bench_tmm(args):
    rows = bench.bench_tmm(
        layers=args.layers, condition_counts=_ints(args.conditions), workers=_workers_list(args),
        wavelengths=args.wavelengths, seed=args.seed or 0,
    )
    _emit(bench.to_csv(rows), args.out)
    if args.plot:
        from .plotting import plot_tmm_bench

        plot_tmm_bench(rows, args.plot)


def cmd_bench_fm(args):
    rows = bench.bench_fm(
        bit_lengths=_ints(args.bits), sizes=_ints(args.sizes), workers=_workers_list(args),
        epochs=args.epochs, seed=args.seed or 0,
    )
    _emit(bench.to_csv(rows), args.out)
    if args.plot:
        from .plotting import plot_fm_bench

        plot_fm_bench(rows, args.plot)


def cmd_bench_qaoa(args):
    sizes = _ints(args.sizes)
    solvers = tuple(s for s in args.solvers.split(",") if s)
    rows = bench.bench_qaoa(
        sizes=sizes, p=args.p, shots=args.shots, restarts=args.restarts, outer_budget=args.outer_budget,
        seed=args.seed or 0, solvers=solvers,
    )
    _emit(bench.to_csv(rows), args.out)
    if args.plot:
        from .plotting import plot_qaoa_bench

        plot_qaoa_bench(rows, args.plot)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=None, help="worker processes/threads (default 1)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", help="run-config JSON")
    common.add_argument("--out", help="write the table/document here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="metaloop", description="Active-learning design of layered optical stacks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="stack -> R/T/A spectra CSV")
    p.add_argument("--stack", help="stack JSON")
    p.add_argument("--bits", help="bit string decoded with the --config encoding")
    p.add_argument("--grid", help="start,stop,num in micrometers")
    p.add_argument("--angles", help="comma separated degrees")
    p.add_argument("--pol", default="unpolarized", choices=("s", "p", "unpolarized"))
    p.add_argument("--plot", help="PNG of the spectra")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="dataset CSV -> FM model JSON")
    p.add_argument("--data", required=True, help="CSV with header bits,fom")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", parents=[common], help="QUBO JSON -> solution JSON")
    p.add_argument("--qubo", required=True)
    p.add_argument("--solver", default="annealing", choices=loop.SOLVERS)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--shots", type=int, default=1024)
    p.add_argument("--outer-budget", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("optimize", parents=[common], help="run the active-learning loop")
    p.add_argument("--log", default="runlog.jsonl", help="JSON-lines run log")
    p.add_argument("--plot", help="PNG of the FOM trace")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench-tmm", parents=[common], help="TMM sweep wall-clock vs workers")
    p.add_argument("--layers", type=int, default=1000)
    p.add_argument("--conditions", default="50,100,200,350")
    p.add_argument("--wavelengths", type=int, default=100)
    p.add_argument("--worker-list", help="comma separated worker counts (default 1 and --workers)")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_bench_tmm)

    p = sub.add_parser("bench-fm", parents=[common], help="FM training wall-clock vs workers")
    p.add_argument("--bits", default="120,240")
    p.add_argument("--sizes", default="1000,2000,3000,4000,5000,6000,7000,8000,9000,10000")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--worker-list")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_bench_fm)

    p = sub.add_parser("bench-qaoa", parents=[common], help="solver accuracy and time vs problem size")
    p.add_argument("--sizes", default="4,8,12,16,20,24")
    p.add_argument("--solvers", default="qaoa,annealing,exhaustive")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--shots", type=int, default=1024)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--outer-budget", type=int, default=None)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_bench_qaoa)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    args.workers_given = args.workers is not None
    args.workers = args.workers or 1
    if args.command != "optimize" and args.seed is None:
        args.seed = 0
    try:
        args.func(args)
    except (MetaloopError, OSError) as exc:
        print(f"metaloop: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
