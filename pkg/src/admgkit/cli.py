"""Command-line front end.

Every command reads graphs in the small text format of
:mod:`admgkit.graph`; pass ``-`` to read from stdin.  A ``latent:``
header is projected away before any command except ``project`` runs
(``project``'s output *is* that projection; ``canonical`` canonicalizes
the projected graph).

Exit status: 0 when the command (and any property it checks) succeeds,
1 when a check fails, a pair is refused, or a graph-level error occurs,
2 for usage errors and unparseable input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .coupling import ContinuousSpec, build_coupling, continuous_sample, sample
from .fixing import check_nested_markov, read_distribution_csv
from .graph import Admg, GraphError, ParseError, parse_graph, serialize_graph
from .minimality import comp_graph, minimal_set, prune, tree_reduce
from .oracle import verify_theorem
from .projection import (
    canonical_dag,
    closure,
    densely_connected,
    latent_project,
    marg_project,
    pair_subgraph,
)

PREFERENCES = ("directed_first", "bidirected_first")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _load_graph(path: str) -> Admg:
    g, latents = parse_graph(_read_text(path))
    return latent_project(g, latents) if latents else g


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------
# Graph transforms


def _cmd_project(args: argparse.Namespace) -> int:
    g, latents = parse_graph(_read_text(args.graph))
    sys.stdout.write(serialize_graph(latent_project(g, latents) if latents else g))
    return 0


def _cmd_canonical(args: argparse.Namespace) -> int:
    dag, mapping = canonical_dag(_load_graph(args.graph))
    hiddens = sorted(mapping.values(), key=lambda h: int(h[2:]))
    sys.stdout.write(serialize_graph(dag, latent=hiddens))
    return 0


def _cmd_marg(args: argparse.Namespace) -> int:
    sys.stdout.write(serialize_graph(marg_project(_load_graph(args.graph))))
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    sys.stdout.write(serialize_graph(comp_graph(args.k)))
    return 0


# ---------------------------------------------------------------------------
# Queries


def _cmd_closure(args: argparse.Namespace) -> int:
    g = _load_graph(args.graph)
    seed = [s for s in args.set.split(",") if s]
    if not seed:
        return _fail("--set needs at least one vertex")
    res = closure(g, seed)
    print("closure: " + ",".join(g.sort(res.closure)))
    print("intrinsic: " + ("yes" if res.intrinsic else "no"))
    return 0


def _cmd_dense(args: argparse.Namespace) -> int:
    g = _load_graph(args.graph)
    verdict = densely_connected(g, args.v, args.w)
    if verdict.dense:
        witness = ",".join(g.sort(verdict.witness_closure))
        print(f"dense: yes — case {verdict.case}, closure {witness}")
        return 0
    print("dense: no — a nested constraint separates the pair")
    return 1


def _cmd_minimal(args: argparse.Namespace) -> int:
    g = _load_graph(args.graph)
    ps = pair_subgraph(g, args.v, args.w, args.preference)
    reduction = tree_reduce(ps.graph, ps.b_set, ps.external)
    if ps.external is None:
        kept = minimal_set(reduction, args.v, args.w)
        ext = args.w
    else:
        kept = minimal_set(reduction, next(iter(ps.b_set)), ps.external)
        ext = ps.external
    pruned = prune(reduction, reduction.kept - kept)
    sys.stdout.write(serialize_graph(pruned.reduced))
    print(f"W: {ext}")
    return 0


# ---------------------------------------------------------------------------
# Sampling


def _samples_csv(cols: Sequence[str], data: dict[str, np.ndarray], floats: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    arrays = [data[c] for c in cols]
    for i in range(len(arrays[0])):
        if floats:
            writer.writerow(f"{a[i]:.17g}" for a in arrays)
        else:
            writer.writerow(int(a[i]) for a in arrays)
    return buf.getvalue()


def _render_plot(path: str, data: dict[str, np.ndarray], v: str, w: str, floats: bool) -> None:
    try:
        import matplotlib
    except ImportError as exc:
        raise GraphError("matplotlib is required for --plot (install the 'plot' extra)") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs, ys = data[w], data[v]
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    if floats:
        ax.scatter(xs, ys, s=5, alpha=0.35, linewidths=0)
    else:
        k = int(max(xs.max(), ys.max())) + 1
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (ys.astype(int), xs.astype(int)), 1)
        image = ax.imshow(counts, origin="lower", cmap="viridis")
        fig.colorbar(image, ax=ax, shrink=0.8)
        ax.set_xticks(range(k))
        ax.set_yticks(range(k))
    ax.set_xlabel(w)
    ax.set_ylabel(v)
    ax.set_title(f"{v} against {w}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _cmd_couple(args: argparse.Namespace) -> int:
    if (args.out or args.plot) and args.seed is None:
        return _fail("writing output files requires an explicit --seed")
    seed = 0 if args.seed is None else args.seed
    if args.continuous is not None and args.set_w is not None:
        return _fail("--set-w only applies to discrete couplings")
    g = _load_graph(args.graph)
    if args.continuous is not None:
        data = continuous_sample(
            g,
            args.v,
            args.w,
            ContinuousSpec(rho=args.continuous),
            n=args.n,
            seed=seed,
            preference=args.preference,
        )
        cols: Sequence[str] = [u for u in g.vertices if u in data]
    else:
        sem = build_coupling(g, args.v, args.w, args.k, args.preference)
        data = sample(sem, args.n, seed, set_w=args.set_w)
        cols = sem.observed
    text = _samples_csv(cols, data, floats=args.continuous is not None)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.plot:
        _render_plot(args.plot, data, args.v, args.w, args.continuous is not None)
    return 0


# ---------------------------------------------------------------------------
# Checks


def _cmd_verify(args: argparse.Namespace) -> int:
    g = _load_graph(args.graph)
    verdict = verify_theorem(g, args.v, args.w, args.k, args.preference)
    report = verdict.report
    if args.json:
        payload = {
            "refused": verdict.refused,
            "reason": verdict.reason,
            "passed": verdict.passed,
            "equality": None if report is None else report.equality_holds,
            "independence": None if report is None else report.independence_holds,
            "uniform_marginals": None if report is None else report.uniform_marginals,
            "failing_subset": None
            if report is None or report.failing_subset is None
            else list(report.failing_subset),
        }
        print(json.dumps(payload, indent=2))
        return 0 if verdict.passed else 1
    if verdict.refused:
        print(f"refused: {verdict.reason}")
        return 1
    assert report is not None
    if report.failing_subset:
        ind_detail = "joint law of " + ",".join(report.failing_subset) + " does not factor"
    else:
        ind_detail = "the law does not factor into its marginals"
    checks = (
        ("equality", report.equality_holds, f"some atom separates {args.v} and {args.w}"),
        ("independence", report.independence_holds, ind_detail),
        ("uniform-marginals", report.uniform_marginals, "some marginal is not uniform"),
    )
    for name, ok, detail in checks:
        print(f"{name}: pass" if ok else f"{name}: fail — {detail}")
    return 0 if verdict.passed else 1


def _cmd_nested_check(args: argparse.Namespace) -> int:
    g = _load_graph(args.graph)
    p = read_distribution_csv(_read_text(args.dist))
    if args.tol is None:
        tol = None
    else:
        try:
            tol = Fraction(args.tol)
        except (ValueError, ZeroDivisionError):
            return _fail(f"bad tolerance {args.tol!r}")
    report = check_nested_markov(p, g, tolerance=tol)
    if report.holds:
        print(f"nested-markov: pass — {report.reachable_sets_checked} reachable sets checked")
        return 0
    for r, d, dev in report.violations:
        rs = ",".join(g.sort(r))
        ds = ",".join(g.sort(d))
        print(f"nested-markov: fail — R={{{rs}}} D={{{ds}}} dev={dev}")
    return 1


# ---------------------------------------------------------------------------
# Wiring


def _add_pair(p: argparse.ArgumentParser) -> None:
    p.add_argument("graph", help="graph file, or - for stdin")
    p.add_argument("v", help="target vertex")
    p.add_argument("w", help="paired vertex")
    p.add_argument(
        "--preference",
        choices=PREFERENCES,
        default="directed_first",
        help="which dense case to build from when several apply",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admgkit",
        description="Couplings, projections and factorization checks for acyclic directed mixed graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("project", help="project latent vertices out of a graph")
    p.add_argument("graph", help="graph file, or - for stdin")
    p.set_defaults(handler=_cmd_project)

    p = sub.add_parser("canonical", help="rewrite bidirected edges as explicit hidden parents")
    p.add_argument("graph", help="graph file, or - for stdin")
    p.set_defaults(handler=_cmd_canonical)

    p = sub.add_parser("marg", help="print the maximal arid projection")
    p.add_argument("graph", help="graph file, or - for stdin")
    p.set_defaults(handler=_cmd_marg)

    p = sub.add_parser("closure", help="closure of a vertex set, and whether it is intrinsic")
    p.add_argument("graph", help="graph file, or - for stdin")
    p.add_argument("--set", required=True, metavar="A,B,...", help="comma-separated seed vertices")
    p.set_defaults(handler=_cmd_closure)

    p = sub.add_parser("dense", help="test whether a pair is densely connected (exit 0/1)")
    _add_pair(p)
    p.set_defaults(handler=_cmd_dense)

    p = sub.add_parser("minimal", help="print the pruned minimal coupling graph for a pair")
    _add_pair(p)
    p.set_defaults(handler=_cmd_minimal)

    p = sub.add_parser("couple", help="sample a coupling forcing the pair equal, as CSV")
    _add_pair(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("-k", type=int, default=2, help="modulus for the discrete coupling")
    mode.add_argument(
        "--continuous", type=float, metavar="RHO", help="continuous variant with this correlation"
    )
    p.add_argument("-n", type=int, default=100, help="number of samples")
    p.add_argument("--seed", type=int, help="stream seed (required when writing files)")
    p.add_argument("--set-w", dest="set_w", type=int, help="pin the input vertex to this value")
    p.add_argument("-o", "--out", metavar="CSV", help="write samples here instead of stdout")
    p.add_argument("--plot", metavar="PNG", help="also render the target pair to this file")
    p.set_defaults(handler=_cmd_couple)

    p = sub.add_parser("verify", help="build a coupling and verify its law exactly (exit 0/1)")
    _add_pair(p)
    p.add_argument("-k", type=int, default=2, help="modulus for the discrete coupling")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("nested-check", help="test a distribution against every reachable set")
    p.add_argument("graph", help="graph file, or - for stdin")
    p.add_argument("--dist", required=True, metavar="CSV", help="distribution table")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="demand exact equality (default)")
    group.add_argument("--tol", metavar="T", help="allow deviations up to this rational")
    p.set_defaults(handler=_cmd_nested_check)

    p = sub.add_parser("gen", help="generate a named example graph")
    p.add_argument("kind", choices=("comp-graph",), help="which family")
    p.add_argument("k", type=int, help="size parameter")
    p.set_defaults(handler=_cmd_gen)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.handler(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
