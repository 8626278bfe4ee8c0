"""Command-line interface.

Five subcommands: release, fit, simulate, evaluate, epsilon.  Every run that
writes files also writes manifest.json (tool version, argv, resolved options,
input digests) so a run can be reproduced bit for bit by replaying the argv.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._util import derive_seed
from .evalharness import (
    ExperimentPlan,
    HarnessError,
    run_experiment,
    summarize,
    uniform_sweep,
)
from .inference import (
    FitConfig,
    InferenceError,
    KLConfig,
    kl_utility,
    mcmle_fit,
    missing_data_fit,
    wald_table,
)
from .mcmc import ChainConfig, init_graph, sample_ergm
from .netgraph import (
    GraphFormatError,
    load_attributes,
    load_edge_list,
    write_edge_list,
)
from .privacy import (
    MechanismError,
    epsilon_of,
    eps_for_flip,
    feasible_bounds,
    optimal_pq,
    parse_mechanism,
    release,
)
from .terms import ModelError, parse_model

OUT_DIR_ENV = "RRERGM_OUT_DIR"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args, argv)
    except (GraphFormatError, ModelError, MechanismError, HarnessError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrergm",
        description="Private network release via dyadwise randomized response, "
        "and ERGM inference that accounts for the noise.",
    )
    parser.add_argument("--version", action="version", version=f"rrergm {__version__}")
    sub = parser.add_subparsers(dest="subcommand")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    common.add_argument(
        "--out-dir",
        default=None,
        help=f"output directory (default ${OUT_DIR_ENV} or current directory)",
    )
    common.add_argument("--directed", action="store_true", help="treat graphs as directed")
    common.add_argument("--n", type=int, default=None, help="node count (else taken from --attrs)")
    common.add_argument("--attrs", default=None, help="node attribute CSV")
    common.add_argument(
        "--workers", type=int, default=1, help="parallel workers (results do not depend on this)"
    )

    chain = argparse.ArgumentParser(add_help=False)
    chain.add_argument("--draws", type=int, default=1024, help="retained draws per chain")
    chain.add_argument("--burn-in", type=int, default=None, help="burn-in steps (default 10*n^2)")
    chain.add_argument("--interval", type=int, default=None, help="thinning interval (default n^2)")
    chain.add_argument("--proposal", choices=("uniform", "tnt"), default="uniform")

    p = sub.add_parser("release", parents=[common], help="draw private synthetic graphs")
    p.add_argument("--graph", required=True, help="true graph edge list")
    p.add_argument("--mechanism", required=True, help="mechanism config file")
    p.add_argument("--copies", type=int, default=1, help="number of releases")
    p.set_defaults(func=_cmd_release)

    p = sub.add_parser("fit", parents=[common, chain], help="fit an ERGM")
    p.add_argument("--graph", required=True, help="graph edge list (released or raw)")
    p.add_argument("--model", required=True, help="model term file")
    p.add_argument(
        "--mechanism",
        default=None,
        help="mechanism config; when given, fit accounts for the release noise",
    )
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--step-bound", type=float, default=0.5)
    p.add_argument(
        "--allow-nonconverged",
        action="store_true",
        help="exit 0 even if the fit did not converge",
    )
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", parents=[common, chain], help="sample graphs from an ERGM")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True, help="comma-separated parameter vector")
    p.add_argument(
        "--init",
        default="empty",
        help="chain start: empty, observed (needs --graph), or density:<rate>",
    )
    p.add_argument("--graph", default=None, help="reference graph for --init observed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "evaluate", parents=[common, chain], help="risk-utility sweep over mechanisms"
    )
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--pi", default=None, help="comma-separated flip rates, e.g. 0.005,0.01,0.02")
    p.add_argument(
        "--mechanism", action="append", default=[], help="mechanism config file (repeatable)"
    )
    p.add_argument("--replicates", type=int, default=20, help="releases per mechanism")
    p.add_argument("--methods", default="naive,missing")
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--step-bound", type=float, default=0.5)
    p.add_argument("--kl-segments", type=int, default=8)
    p.add_argument("--kl-draws", type=int, default=2000)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("epsilon", help="privacy calculator: eps, flip rates, feasible region")
    p.add_argument("--pi", type=float, default=None, help="flip rate of the symmetric mechanism")
    p.add_argument("--eps", type=float, default=None, help="privacy level")
    p.add_argument("--p", type=float, default=None, help="keep probability")
    p.add_argument("--q", type=float, default=None, help="non-edge retention probability")
    p.set_defaults(func=_cmd_epsilon)

    return parser


# -- helpers -----------------------------------------------------------------


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _node_count(args) -> int:
    if args.attrs is not None:
        return _load_attrs(args).n
    if args.n is None:
        raise ValueError("need --n or --attrs to determine the node count")
    return args.n


_ATTR_CACHE: dict = {}


def _load_attrs(args):
    if args.attrs is None:
        return None
    key = args.attrs
    if key not in _ATTR_CACHE:
        with open(args.attrs, "r", encoding="utf-8") as fh:
            header = fh.readline()
        rows = sum(1 for line in open(args.attrs, encoding="utf-8") if line.strip()) - 1
        del header
        _ATTR_CACHE[key] = load_attributes(args.attrs, rows)
    return _ATTR_CACHE[key]


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out: Path, subcommand: str, args, argv, inputs, outputs):
    options = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        options[key] = value
    manifest = {
        "tool": "rrergm",
        "version": __version__,
        "subcommand": subcommand,
        "argv": argv,
        "options": options,
        "inputs": {str(p): _digest(p) for p in inputs if p is not None},
        "outputs": sorted(str(o) for o in outputs),
    }
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _fit_config(args) -> FitConfig:
    return FitConfig(
        draws=args.draws,
        burn_in=args.burn_in,
        interval=args.interval,
        proposal=args.proposal,
        max_iter=args.max_iter,
        step_bound=args.step_bound,
        seed=args.seed,
    )


# -- subcommands --------------------------------------------------------------


def _cmd_release(args, argv) -> int:
    out = _out_dir(args)
    attrs = _load_attrs(args)
    n = attrs.n if attrs is not None else _node_count(args)
    x = load_edge_list(args.graph, n, args.directed)
    with open(args.mechanism, "r", encoding="utf-8") as fh:
        gamma = parse_mechanism(fh.read(), n, args.directed, attrs)

    report = gamma.risk_report()
    width = max(3, len(str(args.copies)))
    outputs = []
    for b in range(args.copies):
        y = release(x, gamma, derive_seed(args.seed, "release", b))
        name = f"release_{b + 1:0{width}d}.edges"
        write_edge_list(y, out / name)
        outputs.append(name)
    risk_path = out / "risk.txt"
    with open(risk_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.render_text())
    outputs.append("risk.txt")
    _write_manifest(out, "release", args, argv, [args.graph, args.mechanism, args.attrs], outputs)
    print(f"wrote {args.copies} release(s) to {out}")
    print(report.render_text(), end="")
    return 0


def _cmd_fit(args, argv) -> int:
    out = _out_dir(args)
    attrs = _load_attrs(args)
    n = attrs.n if attrs is not None else _node_count(args)
    graph = load_edge_list(args.graph, n, args.directed)
    with open(args.model, "r", encoding="utf-8") as fh:
        model = parse_model(fh.read())
    cfg = _fit_config(args)

    gamma = None
    if args.mechanism is not None:
        with open(args.mechanism, "r", encoding="utf-8") as fh:
            gamma = parse_mechanism(fh.read(), n, args.directed, attrs)
        fit = missing_data_fit(model, graph, gamma, attrs, cfg=cfg)
    else:
        fit = mcmle_fit(model, graph, attrs, cfg=cfg)

    table = wald_table(fit)
    text = _render_fit(fit, table, gamma)
    print(text, end="")
    with open(out / "fit.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    with open(out / "fit.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("term,estimate,std_error,z,p,stars\n")
        for row in table:
            fh.write(
                f"{row['term']},{row['estimate']!r},{row['std_error']!r},"
                f"{row['z']!r},{row['p']!r},{row['stars']}\n"
            )
    _write_manifest(
        out, "fit", args, argv, [args.graph, args.model, args.mechanism, args.attrs],
        ["fit.txt", "fit.csv"],
    )
    if not fit.converged and not args.allow_nonconverged:
        print("fit did not converge (use --allow-nonconverged to accept)", file=sys.stderr)
        return 3
    return 0


def _render_fit(fit, table, gamma) -> str:
    lines = [f"method: {fit.method}   iterations: {fit.iterations}   converged: {fit.converged}"]
    if gamma is not None:
        lines.append(f"mechanism worst-case eps: {gamma.eps_worst():.6g}")
    lines.append("")
    lines.append(f"{'term':<28} {'estimate':>10} {'std.err':>10} {'z':>8} {'p':>10}")
    for row in table:
        lines.append(
            f"{row['term']:<28} {row['estimate']:>10.4f} {row['std_error']:>10.4f} "
            f"{row['z']:>8.2f} {_fmt_p(row['p']):>10} {row['stars']}"
        )
    for w in fit.warnings:
        lines.append(f"note: {w}")
    lines.append("significance: 0.05 >= * > 0.01 >= ** > 0.001 >= ***")
    return "\n".join(lines) + "\n"


def _fmt_p(p: float) -> str:
    if not np.isfinite(p):
        return "nan"
    if p < 1e-16:
        return "<1e-16"
    return f"{p:.3g}"


def _cmd_simulate(args, argv) -> int:
    out = _out_dir(args)
    attrs = _load_attrs(args)
    n = attrs.n if attrs is not None else _node_count(args)
    with open(args.model, "r", encoding="utf-8") as fh:
        model = parse_model(fh.read())
    theta = np.array([float(tok) for tok in args.theta.split(",")])

    if args.init == "observed":
        if args.graph is None:
            raise ValueError("--init observed needs --graph")
        start = load_edge_list(args.graph, n, args.directed)
    elif args.init.startswith("density:"):
        start = init_graph(
            n, args.directed, "density",
            seed=derive_seed(args.seed, "init"), density=float(args.init.split(":", 1)[1]),
        )
    elif args.init == "empty":
        start = init_graph(n, args.directed, "empty")
    else:
        raise ValueError(f"unknown --init {args.init!r}")

    cfg = ChainConfig(
        burn_in=args.burn_in,
        interval=args.interval,
        draws=args.draws,
        proposal=args.proposal,
        seed=derive_seed(args.seed, "simulate"),
    )
    ss = sample_ergm(model, theta, init=start, attrs=attrs, cfg=cfg)
    path = out / "sim_stats.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(ss.names) + "\n")
        for row in ss.stats:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    _write_manifest(
        out, "simulate", args, argv,
        [args.model, args.attrs, args.graph], ["sim_stats.csv"],
    )
    print(f"wrote {ss.draws} draws to {path} (acceptance {ss.acceptance_rate:.3f})")
    return 0


def _cmd_evaluate(args, argv) -> int:
    out = _out_dir(args)
    attrs = _load_attrs(args)
    n = attrs.n if attrs is not None else _node_count(args)
    graph = load_edge_list(args.graph, n, args.directed)
    with open(args.model, "r", encoding="utf-8") as fh:
        model = parse_model(fh.read())

    mechanisms = []
    if args.pi:
        flips = [float(tok) for tok in args.pi.split(",")]
        mechanisms.extend(uniform_sweep(n, flips, args.directed))
    for path in args.mechanism:
        with open(path, "r", encoding="utf-8") as fh:
            mechanisms.append((Path(path).name, parse_mechanism(fh.read(), n, args.directed, attrs)))
    if not mechanisms:
        raise ValueError("need --pi values and/or --mechanism files")

    methods = tuple(tok.strip() for tok in args.methods.split(",") if tok.strip())
    plan = ExperimentPlan(
        graph=graph,
        model=model,
        mechanisms=tuple(mechanisms),
        attrs=attrs,
        replicates=args.replicates,
        methods=methods,
        base_seed=args.seed,
        fit=_fit_config(args),
        kl=KLConfig(
            segments=args.kl_segments,
            draws=args.kl_draws,
            burn_in=args.burn_in,
            interval=args.interval,
            proposal=args.proposal,
        ),
        workers=args.workers,
    )
    report = run_experiment(plan)
    paths = summarize(report, out)
    _write_manifest(
        out, "evaluate", args, argv,
        [args.graph, args.model, args.attrs, *args.mechanism],
        [p.name for p in paths.values()],
    )
    print(f"{len(report.records)} fits ({report.excluded} excluded from aggregates)")
    for name in paths.values():
        print(f"wrote {name}")
    return 0


def _cmd_epsilon(args, argv) -> int:
    given = {k for k in ("pi", "eps", "p", "q") if getattr(args, k) is not None}
    if given == {"pi"}:
        eps = eps_for_flip(args.pi)
        p, _ = optimal_pq(eps)
        print(f"flip rate pi = {args.pi:g}  ->  eps = {eps:.6g}  (optimal p = q = {p:.6g})")
    elif given == {"eps"}:
        p, _ = optimal_pq(args.eps)
        print(f"eps = {args.eps:g}  ->  optimal p = q = {p:.6g}  (flip rate pi = {1 - p:.6g})")
    elif given == {"eps", "p"}:
        optimal_pq(args.eps)
        lo, hi = feasible_bounds(args.p, args.eps)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if lo > hi:
            print(f"no q satisfies eps = {args.eps:g} at p = {args.p:g}")
        else:
            print(f"feasible q at p = {args.p:g}, eps = {args.eps:g}: [{lo:.6g}, {hi:.6g}]")
    elif given == {"p", "q"}:
        eps = epsilon_of(args.p, args.q)
        shown = "inf" if math.isinf(eps) else f"{eps:.6g}"
        print(f"p = {args.p:g}, q = {args.q:g}  ->  eps = {shown}")
    else:
        raise ValueError(
            "give exactly one of: --pi, --eps, --eps with --p, or --p with --q "
            f"(got {sorted(given) or 'nothing'})"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
