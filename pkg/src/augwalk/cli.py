"""Command-line interface: reproducible experiments over the toolkit.

Subcommands mirror the pipeline: ``tree build``, ``network build``,
``walk hitting|simulate``, ``kernel naim``, ``resistance curve|critical``,
``energy compare`` and ``verify all``.  Every output file starts with a
provenance header echoing the configuration; identical configurations and
seeds produce byte-identical files.  Exit codes: 0 success, 1 validation
error, 2 numerical failure.

Column layouts of the CSV outputs are frozen in docs/formats.md.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .augment import build_augmented_tree, hyperbolicity_report
from .energy import comparability_report
from .models import resolve_model
from .network import build_nrw, return_ratio
from .partition import IndexTree, build_ifs_tree, build_net_tree
from .potential import ever_visit, hitting_distribution, naim_kernel, sample_hitting_counts, simulate_walk
from .resistance import critical_lambda_sharp, critical_lambda_star, limit_resistance


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}") from None


class ValidationError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _header(config: dict) -> list[str]:
    lines = [f"# augwalk {__version__}"]
    for key in sorted(config):
        lines.append(f"# {key}={config[key]}")
    return lines


def _write_lines(path, lines):
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_tree(args) -> IndexTree:
    if getattr(args, "tree", None):
        return IndexTree.load(args.tree)
    if not getattr(args, "model", None):
        raise ValidationError("need --tree or --model")
    spec = resolve_model(args.model)
    levels = getattr(args, "levels", None) or 8
    if spec.kind == "ifs":
        return build_ifs_tree(spec, levels)
    return build_net_tree(spec, r0=args.r0, b=args.b, max_level=levels)


def _build_net(args):
    tree = _load_tree(args)
    gamma = getattr(args, "gamma", None)
    aug = build_augmented_tree(tree, gamma)
    lam = getattr(args, "lam", None)
    if lam is None:
        raise ValidationError("--lambda is required")
    return build_nrw(aug, lam)


def _parse_terminal(tree: IndexTree, token: str):
    """One closed-set descriptor: points ('+'-joined), words or fix:i."""
    token = token.strip()
    if token.startswith("w:"):
        return [token[2:]]
    if token.startswith("fix:"):
        idx = int(token[4:]) - 1
        if tree.spec is None or tree.spec.kind != "ifs":
            raise ValidationError("fix: descriptors need an IFS model")
        fx = tree.spec.fixed_points()
        if not 0 <= idx < len(fx):
            raise ValidationError(f"no map {token[4:]} in the model")
        return fx[idx:idx + 1]
    pts = [[float(x) for x in part.split()] for part in token.split("+")]
    return np.asarray(pts, dtype=float)


def _parse_level_range(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",")]


# -- subcommand bodies -----------------------------------------------------------


def _cmd_tree_build(args):
    spec = resolve_model(args.model)
    if spec.kind == "ifs":
        tree = build_ifs_tree(spec, args.levels, base_depth=args.base_depth)
    else:
        tree = build_net_tree(spec, r0=args.r0, b=args.b, max_level=args.levels)
    aug = build_augmented_tree(tree, args.gamma)
    tree.save(args.out, include_samples=not args.no_samples)
    if args.edges_csv:
        lines = _header({"model": args.model, "levels": args.levels,
                         "gamma": aug.gamma})
        lines.append("level,x_id,y_id")
        for m in range(1, tree.max_level + 1):
            for u, v in aug.horizontal[m]:
                lines.append(f"{m},{u},{v}")
        _write_lines(args.edges_csv, lines)
    print(f"tree written to {args.out}: {tree.num_vertices} vertices, "
          f"{sum(len(e) for e in aug.horizontal)} horizontal edges")
    return 0


def _cmd_network_build(args):
    net = _build_net(args)
    payload = {
        "config": {"tree": args.tree, "model": args.model, "lambda": args.lam},
        "version": __version__,
        "lambda": net.lam,
        "trunc_level": net.trunc_level,
        "log_scale": net.log_scale,
        "edges": [
            [int(u), int(v), float(c)]
            for (u, v), c in zip(net.edges.tolist(), net.conductance)
        ],
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
    if args.edges_csv:
        lines = _header(payload["config"])
        lines.append("x_id,y_id,conductance")
        for u, v, c in payload["edges"]:
            lines.append(f"{u},{v},{c!r}")
        _write_lines(args.edges_csv, lines)
    print(f"network written to {args.out}: {len(payload['edges'])} edges")
    return 0


def _cmd_walk_hitting(args):
    net = _build_net(args)
    p = hitting_distribution(net, args.level)
    tree = net.tree
    ids = tree.level_ids(args.level)
    lines = _header({"model": args.model, "lambda": args.lam,
                     "level": args.level})
    lines.append("id,word,probability,cell_measure")
    for k, v in enumerate(ids):
        lines.append(f"{v},{tree.word_string(int(v))},{float(p[k])!r},{float(tree.measure[v])!r}")
    _write_lines(args.out, lines)
    return 0


def _cmd_walk_simulate(args):
    net = _build_net(args)
    if args.trials > 1:
        counts = sample_hitting_counts(
            net, args.stop_level, args.trials, seed=args.seed, x0=args.start
        )
        tree = net.tree
        ids = tree.level_ids(args.stop_level)
        exact = hitting_distribution(net, args.stop_level)
        lines = _header({"model": args.model, "lambda": args.lam,
                         "stop_level": args.stop_level, "trials": args.trials,
                         "seed": args.seed, "start": args.start})
        lines.append("id,word,hits,frequency,exact_probability")
        for k, v in enumerate(ids):
            lines.append(
                f"{v},{tree.word_string(int(v))},{int(counts[k])},"
                f"{float(counts[k] / args.trials)!r},{float(exact[k])!r}"
            )
        _write_lines(args.out, lines)
    else:
        path = simulate_walk(net, args.start, stop_level=args.stop_level,
                             max_steps=args.steps, seed=args.seed)
        lines = _header({"model": args.model, "lambda": args.lam,
                         "seed": args.seed, "start": args.start,
                         "stopped": path.stopped_reason})
        lines.append("step,id,word")
        for k, v in enumerate(path.states):
            lines.append(f"{k},{v},{net.tree.word_string(v)}")
        _write_lines(args.out, lines)
    return 0


def _cmd_kernel_naim(args):
    net = _build_net(args)
    pairs = []
    with open(args.pairs) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x"):
                continue
            a, b = line.split(",")[:2]
            pairs.append((int(a), int(b)))
    lines = _header({"model": args.model, "lambda": args.lam,
                     "trunc": args.trunc, "pairs": args.pairs})
    lines.append("x,y,value,gap")
    for x, y in pairs:
        est = naim_kernel(net, x, y, args.trunc)
        lines.append(f"{x},{y},{est.value!r},{est.convergence_gap!r}")
    _write_lines(args.out, lines)
    return 0


def _cmd_resistance_curve(args):
    spec = resolve_model(args.model)
    if spec.kind != "ifs":
        raise ValidationError("resistance curves need an IFS model")
    tree = build_ifs_tree(spec, args.nmax)
    aug = build_augmented_tree(tree, args.gamma)
    try:
        a_tok, b_tok = args.pair.split(",")
    except ValueError:
        raise ValidationError('pair must be "A,B"') from None
    a_set = _parse_terminal(tree, a_tok)
    b_set = _parse_terminal(tree, b_tok)
    curve = limit_resistance(aug, args.lam, a_set, b_set, args.nmax,
                             tol=args.tol)
    lines = _header({"model": args.model, "lambda": args.lam,
                     "pair": args.pair, "nmax": args.nmax,
                     "classification": curve.classification,
                     "decay_ratio": curve.decay_ratio})
    lines.append("n,resistance")
    for n, r in zip(curve.n_values, curve.values):
        lines.append(f"{n},{r!r}")
    _write_lines(args.out, lines)
    if args.require_decision and curve.classification == "undecided":
        raise NumericalFailure("curve classification undecided")
    return 0


def _cmd_resistance_critical(args):
    spec = resolve_model(args.model)
    if spec.kind != "ifs":
        raise ValidationError("critical search needs an IFS model")
    tree = build_ifs_tree(spec, args.nmax)
    aug = build_augmented_tree(tree, args.gamma)
    bracket = None
    if args.bracket:
        lo, hi = (float(x) for x in args.bracket.split(","))
        bracket = (lo, hi)
    if args.mode == "sharp":
        res = critical_lambda_sharp(aug, n_max=args.nmax, iters=args.iters,
                                    bracket=bracket, tol=args.tol)
    else:
        res = critical_lambda_star(aug, n_max=args.nmax, iters=args.iters,
                                   bracket=bracket, tol=args.tol)
    payload = {
        "config": {"model": args.model, "mode": args.mode, "nmax": args.nmax,
                   "iters": args.iters},
        "version": __version__,
        "lambda_bracket": [res.lambda_low, res.lambda_high],
        "beta_bracket": [res.beta_low, res.beta_high],
        "undecided_probes": sorted(res.undecided),
        "pairs_tested": len(res.pairs_tested),
    }
    text = json.dumps(payload, indent=2)
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_energy_compare(args):
    spec = resolve_model(args.model)
    levels = _parse_level_range(args.levels)
    tree = build_ifs_tree(spec, max(levels)) if spec.kind == "ifs" else None
    if tree is None:
        raise ValidationError("energy compare needs an IFS model")
    aug = build_augmented_tree(tree, args.gamma)
    func = _resolve_function(args.function)
    reports = comparability_report(aug, args.lam, func, levels)
    lines = _header({"model": args.model, "lambda": args.lam,
                     "function": args.function, "levels": args.levels})
    lines.append("level,graph_energy,besov,ratio")
    for r in reports:
        lines.append(f"{r.level},{r.graph_energy!r},{r.besov!r},{r.ratio!r}")
    _write_lines(args.out, lines)
    return 0


def _resolve_function(token: str):
    if token == "linear":
        return lambda p: float(np.sum(p))
    if token == "indicator":
        return lambda p: 1.0 if float(p[0]) >= 0.5 else 0.0
    if token.startswith("distance:"):
        center = np.array([float(x) for x in token[len("distance:"):].split(",")])
        return lambda p: float(np.linalg.norm(np.asarray(p) - center))
    raise ValidationError(f"unknown function {token!r}")


def _cmd_verify_all(args):
    spec = resolve_model(args.model)
    if spec.kind != "ifs":
        raise ValidationError("verify all needs an IFS model")
    levels = args.levels
    tree = build_ifs_tree(spec, levels)
    aug = build_augmented_tree(tree, args.gamma)
    net = build_nrw(aug, args.lam)
    failures = 0

    hd_max = 0.0
    for m in range(1, min(levels, 6) + 1):
        p = hitting_distribution(net, m)
        hd_max = max(hd_max, float(np.abs(p - tree.measure[tree.level_ids(m)]).max()))
    ok = hd_max <= 1e-9
    failures += not ok
    print(f"{'PASS' if ok else 'FAIL'} hitting law equals cell measures "
          f"(max err {hd_max:.2e})")

    rr_max = 0.0
    for v in range(1, tree.level_end(levels - 1)):
        rr_max = max(rr_max, abs(return_ratio(net, v) - net.lam))
    ok = rr_max <= 1e-12
    failures += not ok
    print(f"{'PASS' if ok else 'FAIL'} return ratio is lambda at every "
          f"interior vertex (max err {rr_max:.2e})")

    err = 0.0
    gaps = []
    x = int(tree.level_ids(2)[0])
    for trunc in range(4, levels + 1):
        est = ever_visit(net, x, 0, trunc)
        gaps.append(est.convergence_gap)
        err = abs(est.value - net.lam ** 2)
    ok = err <= 1e-3 and all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    failures += not ok
    print(f"{'PASS' if ok else 'FAIL'} root visiting probability converges to "
          f"lambda^|x| (err {err:.2e})")

    rep = hyperbolicity_report(aug, min(levels, 6), sample_size=100)
    ok = len(set(rep.per_level[2:])) <= 1
    failures += not ok
    print(f"{'PASS' if ok else 'FAIL'} horizontal geodesic bound stable "
          f"(per level: {rep.per_level})")

    if failures:
        raise NumericalFailure(f"{failures} verification(s) failed")
    print("all verifications passed")
    return 0


# -- argument wiring ---------------------------------------------------------------


def _add_model_args(p, with_tree=False, levels_arg=True):
    p.add_argument("--model", help="model JSON path or builtin:NAME")
    if with_tree:
        p.add_argument("--tree", help="tree JSON produced by 'tree build'")
    if levels_arg:
        p.add_argument("--levels", type=int, default=8,
                       help="tree truncation level")
    p.add_argument("--gamma", type=float, default=None,
                   help="horizontal edge threshold (default 0.5*r0)")
    p.add_argument("--r0", type=float, default=0.125,
                   help="net scale ratio (point clouds)")
    p.add_argument("--b", type=float, default=0.05,
                   help="net inner-ball parameter (point clouds)")


def build_parser() -> _Parser:
    root = _Parser(prog="augwalk", description=__doc__)
    root.add_argument("--version", action="version", version=__version__)
    sub = root.add_subparsers(dest="group", required=True)

    tree = sub.add_parser("tree").add_subparsers(dest="cmd", required=True)
    tb = tree.add_parser("build", help="build an index tree and its edges")
    _add_model_args(tb)
    tb.add_argument("--base-depth", type=int, default=3)
    tb.add_argument("--out", required=True)
    tb.add_argument("--edges-csv")
    tb.add_argument("--no-samples", action="store_true")
    tb.set_defaults(func=_cmd_tree_build)

    network = sub.add_parser("network").add_subparsers(dest="cmd", required=True)
    nb = network.add_parser("build", help="assemble walk conductances")
    _add_model_args(nb, with_tree=True)
    nb.add_argument("--lambda", dest="lam", type=float, required=True)
    nb.add_argument("--out", required=True)
    nb.add_argument("--edges-csv")
    nb.set_defaults(func=_cmd_network_build)

    walk = sub.add_parser("walk").add_subparsers(dest="cmd", required=True)
    wh = walk.add_parser("hitting", help="exact first-hitting law on a level")
    _add_model_args(wh, with_tree=True)
    wh.add_argument("--lambda", dest="lam", type=float, required=True)
    wh.add_argument("--level", type=int, required=True)
    wh.add_argument("--out")
    wh.set_defaults(func=_cmd_walk_hitting)

    ws = walk.add_parser("simulate", help="sample walk paths / hitting laws")
    _add_model_args(ws, with_tree=True)
    ws.add_argument("--lambda", dest="lam", type=float, required=True)
    ws.add_argument("--start", type=int, default=0)
    ws.add_argument("--stop-level", type=int, required=True)
    ws.add_argument("--steps", type=int, default=None)
    ws.add_argument("--trials", type=int, default=1)
    ws.add_argument("--seed", type=int, default=0)
    ws.add_argument("--out")
    ws.set_defaults(func=_cmd_walk_simulate)

    kernel = sub.add_parser("kernel").add_subparsers(dest="cmd", required=True)
    kn = kernel.add_parser("naim", help="symmetric boundary kernel on pairs")
    _add_model_args(kn, with_tree=True)
    kn.add_argument("--lambda", dest="lam", type=float, required=True)
    kn.add_argument("--pairs", required=True, help="CSV with columns x,y")
    kn.add_argument("--trunc", type=int, required=True)
    kn.add_argument("--out")
    kn.set_defaults(func=_cmd_kernel_naim)

    resistance = sub.add_parser("resistance").add_subparsers(dest="cmd", required=True)
    rc = resistance.add_parser("curve", help="level-n resistance curve")
    _add_model_args(rc)
    rc.add_argument("--lambda", dest="lam", type=float, required=True)
    rc.add_argument("--pair", required=True,
                    help='terminals "A,B"; each: coords, pts joined by +, w:WORD, fix:I')
    rc.add_argument("--nmax", type=int, default=10)
    rc.add_argument("--tol", type=float, default=0.02)
    rc.add_argument("--require-decision", action="store_true")
    rc.add_argument("--out")
    rc.set_defaults(func=_cmd_resistance_curve)

    rcrit = resistance.add_parser("critical", help="bracket the critical ratio")
    _add_model_args(rcrit)
    rcrit.add_argument("--mode", choices=["star", "sharp"], required=True)
    rcrit.add_argument("--nmax", type=int, default=10)
    rcrit.add_argument("--iters", type=int, default=12)
    rcrit.add_argument("--tol", type=float, default=0.02)
    rcrit.add_argument("--bracket", help='initial "lo,hi"')
    rcrit.add_argument("--out")
    rcrit.set_defaults(func=_cmd_resistance_critical)

    energy = sub.add_parser("energy").add_subparsers(dest="cmd", required=True)
    ec = energy.add_parser("compare", help="graph energy vs nonlocal form")
    _add_model_args(ec, levels_arg=False)
    ec.add_argument("--lambda", dest="lam", type=float, required=True)
    ec.add_argument("--function", default="linear",
                    help="linear | indicator | distance:cx[,cy]")
    ec.add_argument("--levels", type=str, default="4..6",
                    help="level list: 4..8 or 4,6,8")
    ec.add_argument("--out")
    ec.set_defaults(func=_cmd_energy_compare)

    verify = sub.add_parser("verify").add_subparsers(dest="cmd", required=True)
    va = verify.add_parser("all", help="run the built-in verification suite")
    _add_model_args(va)
    va.add_argument("--lambda", dest="lam", type=float, required=True)
    va.set_defaults(func=_cmd_verify_all)

    return root


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
