"""Graph projections and closures.

Three projections live here: the latent projection (marginalize chosen
vertices out of the graph), the canonical DAG expansion (replace each
bidirected edge by an explicit hidden common cause — the inverse of the
latent projection), and the maximal arid projection (the coarsest graph
with the same nested equality and inequality constraints).  The last is
built from vertex-set closures, which also decide whether a pair of
vertices is densely connected and, if so, hand back the subgraph that
the coupling construction starts from.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .fixing import _fix_one, is_fixable
from .graph import (
    Admg,
    Edge,
    GraphError,
    _as_vertex_set,
    bidirected_connected,
    induced_subgraph,
    parents,
)

_HIDDEN_RE = re.compile(r"_h\d+\Z")


class NestedConstraintError(GraphError):
    """Raised for vertex pairs separated by a nested constraint."""


@dataclass(frozen=True)
class ClosureResult:
    """Fixpoint of the district/ancestor alternation.

    ``iterations`` records every distinct stage, starting from the full
    random set, so the sequence is strictly decreasing and ends at the
    closure.  ``intrinsic`` says whether the closure is
    bidirected-connected, i.e. whether the seed set's closure is an
    intrinsic set.
    """

    closure: frozenset[str]
    intrinsic: bool
    iterations: tuple[frozenset[str], ...]


def _closure_masks(
    g: Admg, seed_ids: list[int], start: bytearray
) -> list[bytearray]:
    """District/ancestor alternation from ``start`` down to the fixpoint.

    Index-based core: stage sets are byte masks over declaration
    positions, so each grow is a flat BFS with no hashing.  From round
    two on, every stage is already ancestrally closed (it came out of an
    ancestor step, and the witness paths survive district shrinking), so
    a stable district step ends the loop without a final ancestor pass.
    """
    n = len(g.vertices)
    _, pa, sib = g._int_adjacency()

    def grow(inside: bytearray, adj: list[list[int]]) -> bytearray:
        seen = bytearray(n)
        stack = list(seed_ids)
        for i in stack:
            seen[i] = 1
        while stack:
            for j in adj[stack.pop()]:
                if inside[j] and not seen[j]:
                    seen[j] = 1
                    stack.append(j)
        return seen

    cur = start
    stages = [cur]
    while True:
        d = grow(cur, sib)
        if d != cur:
            stages.append(d)
        elif len(stages) > 1:
            return stages
        a = grow(d, pa)
        if a != d:
            stages.append(a)
        if a == cur:
            return stages
        cur = a


def _mask_of(g: Admg, s: Iterable[str]) -> bytearray:
    mask = bytearray(len(g.vertices))
    idx = g._index
    for v in s:
        mask[idx[v]] = 1
    return mask


def _names_of(g: Admg, mask: bytearray) -> frozenset[str]:
    verts = g.vertices
    return frozenset(verts[i] for i, hit in enumerate(mask) if hit)


def _closure_stages(
    g: Admg, seed: frozenset[str], start: frozenset[str]
) -> list[frozenset[str]]:
    """Name-level wrapper around :func:`_closure_masks`."""
    idx = g._index
    masks = _closure_masks(g, [idx[s] for s in seed], _mask_of(g, start))
    return [_names_of(g, m) for m in masks]


def closure(g: Admg, b: str | Iterable[str]) -> ClosureResult:
    """⟨b⟩: alternate district-of-b and ancestors-of-b until stable.

    Both steps are computed inside the current stage set directly; no
    intermediate subgraphs are materialized.  Terminates in at most |V|
    rounds because each recorded stage strictly shrinks.
    """
    seed = frozenset(_as_vertex_set(g, b))
    if not seed:
        raise GraphError("closure: empty seed set")
    for v in seed:
        if v in g.fixed:
            raise GraphError(f"closure: {v!r} is a context vertex")
    stages = _closure_stages(g, seed, frozenset(g.random))
    cur = stages[-1]
    return ClosureResult(cur, bidirected_connected(g, cur), tuple(stages))


def reachable_closure(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    """Fix everything fixable outside ``s``; return the surviving set.

    The greedy loop needs no backtracking: fixing one fixable vertex
    never spoils the fixability of another outside ``s``, so the result
    is unique and independent of pick order.  It always contains ``s``
    and is contained in the closure of ``s``.
    """
    seed = frozenset(_as_vertex_set(g, s))
    if not seed:
        raise GraphError("reachable_closure: empty seed set")
    for v in seed:
        if v in g.fixed:
            raise GraphError(f"reachable_closure: {v!r} is a context vertex")
    cur = g
    while True:
        rest = set(cur.random) - seed
        pick = next((v for v in cur.sort(rest) if is_fixable(cur, v)), None)
        if pick is None:
            return frozenset(cur.random)
        cur = _fix_one(cur, pick)


# ---------------------------------------------------------------------------
# Latent projection and canonical DAG


def latent_project(g: Admg, latents: str | Iterable[str]) -> Admg:
    """Project the random vertices ``latents`` out of the graph.

    Keeps a → b when a directed path runs from a to b through projected
    vertices only, and a ↔ b when a path joins them with arrowheads at
    both ends whose interior is projected and contains no collider.
    Both rules are evaluated by a linear walk per source vertex, so the
    whole projection costs O(|V|·|E|).
    """
    lat = frozenset(_as_vertex_set(g, latents))
    for v in lat:
        if v in g.fixed:
            raise GraphError(f"cannot project away context vertex {v!r}")
    keep = tuple(v for v in g.vertices if v not in lat)

    directed: set[Edge] = set()
    for a in keep:
        frontier = list(g._children[a])
        inner: set[str] = set()
        while frontier:
            c = frontier.pop()
            if c in lat:
                if c not in inner:
                    inner.add(c)
                    frontier.extend(g._children[c])
            else:
                directed.add((a, c))

    # Walk (latent vertex, mark of the path end touching it).  A tail
    # may turn around through a sibling or parent edge; an arrowhead may
    # only keep descending, otherwise the interior would hold a collider.
    bidirected: set[Edge] = set()
    idx = g._index
    for a in keep:
        if a in g.fixed:
            continue  # context vertices carry no arrowheads
        hits: set[str] = set()
        stack: list[tuple[str, str]] = []
        seen: set[tuple[str, str]] = set()

        def push(x: str, mark: str) -> None:
            if x in lat:
                if (x, mark) not in seen:
                    seen.add((x, mark))
                    stack.append((x, mark))
            elif mark == "h" and x != a:
                hits.add(x)

        for p in g._parents[a]:
            push(p, "t")
        for s in g._siblings[a]:
            push(s, "h")
        while stack:
            x, mark = stack.pop()
            if mark == "t":
                for p in g._parents[x]:
                    push(p, "t")
                for s in g._siblings[x]:
                    push(s, "h")
            for c in g._children[x]:
                push(c, "h")
        for b in hits:
            bidirected.add((a, b) if idx[a] < idx[b] else (b, a))

    return Admg(keep, frozenset(directed), frozenset(bidirected), g.fixed)


def canonical_dag(g: Admg) -> tuple[Admg, dict[Edge, str]]:
    """Replace each bidirected edge with a two-child hidden cause.

    Hidden vertices are named ``_h1``, ``_h2``, … in lexicographic order
    of their edge's endpoint labels and appended after the original
    vertices.  Projecting them back out recovers ``g`` exactly.  Input
    graphs already containing ``_h<digits>`` labels are rejected rather
    than silently renumbered.
    """
    for v in g.vertices:
        if _HIDDEN_RE.match(v):
            raise GraphError(f"vertex {v!r} collides with hidden-cause naming")
    directed = set(g.directed)
    mapping: dict[Edge, str] = {}
    hidden: list[str] = []
    for i, (u, w) in enumerate(sorted(tuple(sorted(e)) for e in g.bidirected), start=1):
        h = f"_h{i}"
        hidden.append(h)
        mapping[(u, w) if g.index(u) < g.index(w) else (w, u)] = h
        directed.add((h, u))
        directed.add((h, w))
    dag = Admg(g.vertices + tuple(hidden), frozenset(directed), frozenset(), g.fixed)
    return dag, mapping


# ---------------------------------------------------------------------------
# Dense connectivity and the maximal arid projection


@dataclass(frozen=True)
class DenseVerdict:
    """Why (or whether) a vertex pair is densely connected.

    ``cases`` lists every way the definition holds, in preference order
    directed_wv (w points into ⟨v⟩), directed_vw, bidirected (⟨{v,w}⟩ is
    bidirected-connected).  ``case`` is the one the pair subgraph would
    be built from: the first listed case whose attached vertex lies
    outside the closure it points into, else the bidirected case.
    ``witness_closure`` is the closure behind ``case``.
    """

    dense: bool
    case: str
    cases: tuple[str, ...]
    witness_closure: frozenset[str]


def _dense_cases(
    g: Admg, v: str, w: str
) -> tuple[frozenset[str], frozenset[str], ClosureResult, tuple[str, ...]]:
    if v == w:
        raise GraphError("dense connectivity needs two distinct vertices")
    for x in (v, w):
        if not g.is_random(x):
            raise GraphError(f"{x!r} is not a random vertex")
    cl_v = closure(g, (v,)).closure
    cl_w = closure(g, (w,)).closure
    pair = closure(g, (v, w))
    holding = []
    if w in parents(g, cl_v):
        holding.append("directed_wv")
    if v in parents(g, cl_w):
        holding.append("directed_vw")
    if pair.intrinsic:
        holding.append("bidirected")
    return cl_v, cl_w, pair, tuple(holding)


def densely_connected(g: Admg, v: str, w: str) -> DenseVerdict:
    """Decide dense connectivity of ``v`` and ``w`` and say why."""
    cl_v, cl_w, pair, holding = _dense_cases(g, v, w)
    if "directed_wv" in holding and w not in cl_v:
        case, witness = "directed_wv", cl_v
    elif "directed_vw" in holding and v not in cl_w:
        case, witness = "directed_vw", cl_w
    elif "bidirected" in holding:
        case, witness = "bidirected", pair.closure
    else:
        case, witness = "none", pair.closure
    return DenseVerdict(bool(holding), case, holding, witness)


@dataclass(frozen=True)
class PairSubgraph:
    """Induced subgraph a coupling for a dense pair is built on.

    ``b_set`` holds the vertices whose closure the subgraph is; in the
    directed cases ``external`` is the remaining vertex of the pair,
    attached as a parent from outside the closure.
    """

    graph: Admg
    case: str
    b_set: frozenset[str]
    external: str | None


def pair_subgraph(
    g: Admg, v: str, w: str, preference: str = "directed_first"
) -> PairSubgraph:
    """The subgraph on ⟨v⟩∪{w}, ⟨w⟩∪{v}, or ⟨{v,w}⟩, by preference.

    Raises :class:`NestedConstraintError` when the pair is not densely
    connected.  A directed case is only usable when the attached vertex
    lies outside the closure; whenever that fails the bidirected case is
    available, so a dense pair always yields a subgraph.  Cases are
    tried in preference order and each closure is computed only when its
    case comes up, so the usual directed hit pays for one closure.
    """
    if preference not in ("directed_first", "bidirected_first"):
        raise GraphError(f"unknown preference {preference!r}")
    if v == w:
        raise GraphError("dense connectivity needs two distinct vertices")
    for x in (v, w):
        if not g.is_random(x):
            raise GraphError(f"{x!r} is not a random vertex")
    if preference == "bidirected_first":
        order = ("bidirected", "directed_wv", "directed_vw")
    else:
        order = ("directed_wv", "directed_vw", "bidirected")
    idx = g._index
    ch, _, _ = g._int_adjacency()
    start = _mask_of(g, g.random)
    held = False  # some case held but its attachment vertex sat inside
    for case in order:
        if case == "bidirected":
            cl = _names_of(g, _closure_masks(g, [idx[v], idx[w]], start)[-1])
            if bidirected_connected(g, cl):
                return PairSubgraph(
                    induced_subgraph(g, cl), case, frozenset((v, w)), None
                )
        else:
            seed, ext = (v, w) if case == "directed_wv" else (w, v)
            m = _closure_masks(g, [idx[seed]], start)[-1]
            if any(m[j] for j in ch[idx[ext]]):
                held = True
                if not m[idx[ext]]:
                    return PairSubgraph(
                        induced_subgraph(g, _names_of(g, m) | {ext}),
                        case,
                        frozenset((seed,)),
                        ext,
                    )
    if held:
        raise GraphError("dense pair with no usable case")  # unreachable
    raise NestedConstraintError(
        f"{v} and {w} are not densely connected: "
        "a nested constraint separates them"
    )


def is_arid(g: Admg) -> bool:
    """True when every random vertex is its own closure (no hidden bows)."""
    return all(closure(g, (v,)).closure == {v} for v in g.random)


def _adjacent(g: Admg, v: str, w: str) -> bool:
    return (
        (v, w) in g.directed
        or (w, v) in g.directed
        or (v, w) in g.bidirected
        or (w, v) in g.bidirected
    )


def is_maximal(g: Admg) -> bool:
    """True when every densely connected pair is already adjacent."""
    rs = g.random
    for i, v in enumerate(rs):
        for w in rs[i + 1 :]:
            if not _adjacent(g, v, w) and densely_connected(g, v, w).dense:
                return False
    return True


def marg_project(g: Admg) -> Admg:
    """The maximal arid projection.

    Directed edge a → b whenever a is a parent of ⟨b⟩; bidirected edge
    between a non-adjacent pair whenever the pair's joint closure is
    bidirected-connected.  Each single closure is computed once per
    vertex and each pair closure once per candidate pair.  The result is
    arid, maximal, and a fixpoint of this function.
    """
    cl = {b: closure(g, (b,)).closure for b in g.random}
    directed: set[Edge] = set()
    for b in g.random:
        for a in parents(g, cl[b]):
            directed.add((a, b))
    bidirected: set[Edge] = set()
    rs = g.random
    for i, v in enumerate(rs):
        for w in rs[i + 1 :]:
            if (v, w) in directed or (w, v) in directed:
                continue
            if closure(g, (v, w)).intrinsic:
                bidirected.add((v, w))
    return Admg(g.vertices, frozenset(directed), frozenset(bidirected), g.fixed)
