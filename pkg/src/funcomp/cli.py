"""Command-line front end.

Subcommands: hypergraph, rate, region, curve, markov, verify. Reports embed
the toolkit version, the instance content hash, and all reproducibility
settings; identical argv + instance + seed give byte-identical files. Curve
and region reports also render a figure next to the CSV unless --no-plot.

Exit codes: 0 success, 1 validation error, 2 budget/cap error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from . import hypergraph as hg_mod
from . import markov as mk
from . import model, oracle, solver
from .errors import BudgetError, InstanceError, ValidationError, VerificationError

THREADS_ENV = "FUNCOMP_THREADS"


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _header_lines(args, ihash: str) -> list:
    return [
        f"# funcomp {__version__}",
        f"# instance sha256:{ihash}",
        f"# seed {args.seed} weights {getattr(args, 'weights', '-')} "
        f"format {args.format}",
    ]


def _emit(lines, args):
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plot_path(output):
    base, _ = os.path.splitext(output)
    return base + ".png"


def _parse_eps_list(spec: str) -> list:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError("epsilon sweep must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValidationError("epsilon sweep step must be positive")
        out = []
        v = start
        while v <= stop + 1e-12:
            out.append(round(v, 12))
            v += step
        return out
    return [float(p) for p in spec.split(",")]


def _load(args):
    with open(args.instance, "r", encoding="utf-8") as fh:
        text = fh.read()
    return model.load_instance(text), _hash_text(text)


def _fmt_edge(hg, i):
    return "{" + ",".join(str(s) for s in hg.members(i)) + "}"


def _cmd_hypergraph(args):
    inst, ihash = _load(args)
    lines = _header_lines(args, ihash)
    if inst.setting == "distributed":
        pair = hg_mod.maximal_pair(inst, args.eps_scalar)
        for t, edges in enumerate((pair.edges1, pair.edges2)):
            alpha = pair.alphabets[t]
            names = [
                "{" + ",".join(str(alpha.symbols[i]) for i in hg_mod._members(e, alpha.size)) + "}"
                for e in edges
            ]
            lines.append(f"terminal {t + 1} edges: " + " ".join(names))
        lines.append("admissible pairs (rows: terminal 1):")
        for i in range(len(pair.edges1)):
            row = "".join("1" if pair.admissible[i, j] else "0" for j in range(len(pair.edges2)))
            lines.append(f"  {row}")
        _emit(lines, args)
        return 0
    hg = hg_mod.maximal_edges(inst, args.eps_scalar)
    lines.append(f"edges ({len(hg.edges)}), eps={hg.eps:.6f}, fingerprint {hg.fingerprint}")
    for i in range(len(hg.edges)):
        cs = np.array2string(hg.centers[i], precision=6, suppress_small=True)
        rs = np.array2string(hg.radii[i], precision=6)
        lines.append(f"  {_fmt_edge(hg, i)} centers {cs} radii {rs}")
    lines.append(f"overlap: {'yes' if hg_mod.edges_overlap(hg) else 'no'}")
    _emit(lines, args)
    return 0


def _cmd_rate(args):
    inst, ihash = _load(args)
    if inst.setting == "side_info":
        res = solver.rate_side_info(inst, args.eps_scalar, seed=args.seed)
    elif inst.setting == "distributed":
        res = solver.sum_rate_distributed(inst, args.eps_scalar, seed=args.seed)
    else:
        res = solver.rate_p2p(inst, args.eps_scalar, seed=args.seed)
    lines = _header_lines(args, ihash)
    lines.append(f"rate {res.rate:.6f}")
    for ch in res.channels:
        lines.append("channel rows (p(w|x)):")
        for row in ch.probs:
            lines.append("  " + " ".join(f"{v:.6f}" for v in row))
    diag = {k: v for k, v in res.diagnostics.items()}
    lines.append("diagnostics " + json.dumps(diag, sort_keys=True, default=str))
    _emit(lines, args)
    return 0


def emit_region_csv(region: solver.RateRegion, path, weights, header_lines):
    """CSV rows weight,R1,R2 over the weight grid (sorted), with header."""
    if not region.points:
        raise ValidationError("empty frontier")
    lines = list(header_lines)
    lines.append("weight,R1,R2")
    for mu in sorted(float(w) for w in weights):
        p = region.support_point(mu)
        lines.append(f"{mu:.6f},{p.r1:.6f},{p.r2:.6f}")
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_region(args):
    inst, ihash = _load(args)
    weights = np.linspace(0.0, 1.0, args.weights)
    epss = args.eps_list or [None] * 3
    if inst.setting == "distributed":
        region = solver.region_distributed(
            inst, epss[0], weights, seed=args.seed, restarts=args.restarts
        )
    elif inst.setting == "mdc":
        e = list(epss) + [None] * (3 - len(epss))
        region = solver.region_mdc(inst, e[0], e[1], e[2], weights)
    elif inst.setting == "successive_refinement":
        e = list(epss) + [None] * (2 - len(epss))
        region = solver.region_successive_refinement(
            inst, e[0], e[1], weights, seed=args.seed, restarts=args.restarts
        )
    elif inst.setting == "cascade":
        e = list(epss) + [None] * (2 - len(epss))
        region = solver.region_cascade(
            inst, e[0], e[1], weights, seed=args.seed, restarts=args.restarts
        )
    else:
        raise ValidationError(f"no region solver for setting {inst.setting!r}")
    emit_region_csv(region, args.output, weights, _header_lines(args, ihash))
    if args.output and not args.no_plot:
        from . import plotting

        plotting.save_region_plot(region.points, _plot_path(args.output))
    return 0


def _cmd_curve(args):
    inst, ihash = _load(args)
    if args.eps_list is None:
        raise ValidationError("curve requires --eps start:stop:step or a list")
    points, breakpoints = solver.sweep_curve(inst, args.eps_list, seed=args.seed)
    lines = _header_lines(args, ihash)
    lines.append("# breakpoints " + ",".join(f"{b:g}" for b in breakpoints))
    lines.append("eps,rate,fingerprint")
    for p in points:
        lines.append(f"{p.eps:.6f},{p.rate:.6f},{p.fingerprint}")
    _emit(lines, args)
    if args.output and not args.no_plot:
        from . import plotting

        plotting.save_curve_plot(points, breakpoints, _plot_path(args.output))
    return 0


def _cmd_markov(args):
    if args.birth_death:
        n, lam, mu = args.birth_death
        mdl = mk.birth_death(int(n), float(lam), float(mu), eps=args.eps_scalar, k=args.k)
        ihash = _hash_text(f"birth_death({n},{lam},{mu})")
    else:
        inst, ihash = _load(args)
        mdl = mk.model_from_instance(inst)
        if args.eps_scalar is not None:
            mdl.eps = args.eps_scalar
        if args.k:
            mdl.k = args.k
    k = args.k or mdl.k
    bound = mk.ub_markov(mdl, k)
    rep = mk.sparsity(mdl)
    lines = _header_lines(args, ihash)
    lines.append(f"k {k} eps {mdl.eps:.6f}")
    lines.append(f"upper_bound {bound.value:.6f}")
    lines.append(f"tile_term {bound.tile_term:.6f} anchor_term {bound.anchor_term:.6f}")
    lines.append(f"ktile_rate {bound.ktile:.6f} cond_entropy {bound.cond_entropy:.6f}")
    lines.append(f"sparsity s {rep.s} ({rep.strategy})")
    lines.append(f"dimension reduced {rep.dim_reduced} naive {rep.dim_naive}")
    _emit(lines, args)
    return 0


def _cmd_verify(args):
    inst, ihash = _load(args)
    eps = args.eps_scalar
    checks = []

    def record(name, ok):
        checks.append((name, bool(ok)))

    if inst.setting in ("p2p", "side_info"):
        hg = hg_mod.maximal_edges(inst, eps)
        brute = oracle.brute_maximal_edges(inst, eps)
        record("maximal edges match brute force", hg.edges == brute.edges)
        if inst.setting == "p2p":
            res = solver.rate_p2p(inst, eps, seed=args.seed)
        else:
            res = solver.rate_side_info(inst, eps, seed=args.seed)
        e = inst.tolerances[0] if eps is None else eps
        record(
            "zero distortion audit",
            oracle.verify_zero_distortion(inst, e, res.channels, res.extras["decoder"]),
        )
        try:
            grid = oracle.grid_min_rate(inst, eps, oracle.GridSpec(m=24, budget=200_000))
            record(
                "grid search brackets solver rate",
                abs(grid.value - res.rate) <= grid.tolerance + 1e-6,
            )
        except BudgetError:
            record("grid search skipped (budget)", True)
    elif inst.setting == "distributed":
        pair = hg_mod.maximal_pair(inst, eps)
        res = solver.sum_rate_distributed(inst, eps, seed=args.seed, pair=pair)
        e = inst.tolerances[0] if eps is None else eps
        record(
            "zero distortion audit",
            oracle.verify_zero_distortion(inst, e, res.channels, pair.centers),
        )
        try:
            aux = oracle.general_aux_search(
                inst, eps, oracle.GridSpec(m=args.grid_m, aux_cap=3, budget=10**8)
            )
            gap = oracle.certified_sum_rate_gap(inst, e, res, aux, pair)
            record("sum-rate matches general-auxiliary search", abs(res.rate - aux.value) <= gap)
        except BudgetError:
            record("general-auxiliary search skipped (budget)", True)
    else:
        raise ValidationError(f"verify does not support setting {inst.setting!r}")

    lines = _header_lines(args, ihash)
    ok_all = True
    for name, ok in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
        ok_all &= ok
    _emit(lines, args)
    if not ok_all:
        raise VerificationError("oracle suite reported failures")
    return 0


def _build_parser():
    ap = argparse.ArgumentParser(prog="funcomp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("hypergraph", _cmd_hypergraph),
        ("rate", _cmd_rate),
        ("region", _cmd_region),
        ("curve", _cmd_curve),
        ("markov", _cmd_markov),
        ("verify", _cmd_verify),
    ):
        p = sub.add_parser(name)
        p.set_defaults(func=fn)
        p.add_argument("--instance", help="instance document path")
        p.add_argument("--eps", help="tolerance override; curve accepts start:stop:step")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--weights", type=int, default=33, help="region weight-grid size")
        p.add_argument("--restarts", type=int, default=solver.RESTARTS_MULTI)
        p.add_argument("--format", choices=("text", "csv", "structured"), default="text")
        p.add_argument("--output", "-o", help="output path (default stdout)")
        p.add_argument("--no-plot", action="store_true", help="skip the figure next to CSV output")
        p.add_argument("--grid-m", type=int, default=12, help="oracle grid resolution")
        if name == "markov":
            p.add_argument("--k", type=int, default=0, help="block length between anchors")
            p.add_argument(
                "--birth-death",
                nargs=3,
                metavar=("N", "LAMBDA", "MU"),
                help="use a birth-death chain instead of an instance file",
            )
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    os.environ.setdefault(THREADS_ENV, "1")
    # epsilon handling: scalar for solvers, list for curve/region
    args.eps_list = None
    args.eps_scalar = None
    if args.eps:
        values = _parse_eps_list(args.eps)
        args.eps_list = values
        args.eps_scalar = values[0] if len(values) >= 1 else None
    if args.command != "markov" and not args.instance:
        print("error: --instance is required", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (InstanceError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
