"""Core graph values and genealogical queries for ADMGs and CADMGs.

An acyclic directed mixed graph (ADMG) has directed and bidirected edges
over a common vertex set; the directed part is acyclic.  A conditional
ADMG (CADMG) additionally marks some vertices as *fixed* (context)
vertices, which may have no parents and no siblings.  There is no
separate CADMG class: an :class:`Admg` with a non-empty ``fixed`` set is
a CADMG, and a DAG is simply an Admg with no bidirected edges.  Every
operation in this package treats the three uniformly.

Graphs are immutable after construction and all operations are pure
functions, so values can be shared freely between threads.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from typing import Iterable, Iterator


class GraphError(Exception):
    """Invalid graph structure or operation precondition."""


class ParseError(GraphError):
    """Malformed graph text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


_LABEL_RE = re.compile(r"[A-Za-z0-9_]+\Z")

Edge = tuple[str, str]


def _freeze_edges(edges: Iterable[Edge]) -> frozenset[Edge]:
    return edges if isinstance(edges, frozenset) else frozenset(tuple(e) for e in edges)


@dataclass(frozen=True)
class Admg:
    """An ADMG/CADMG value.

    ``vertices`` keeps declaration order, which drives every deterministic
    tie-break in the package (topological order, serialization, reported
    sets).  ``directed`` holds (tail, head) pairs; ``bidirected`` holds
    unordered pairs, normalized so the earlier-declared vertex comes
    first.  ``fixed`` lists context vertices.
    """

    vertices: tuple[str, ...]
    directed: frozenset[Edge] = frozenset()
    bidirected: frozenset[Edge] = frozenset()
    fixed: frozenset[str] = frozenset()

    def __post_init__(self):
        vertices = tuple(self.vertices)
        directed = _freeze_edges(self.directed)
        fixed = frozenset(self.fixed)
        index: dict[str, int] = {}
        for i, v in enumerate(vertices):
            if not _LABEL_RE.match(v):
                raise GraphError(f"bad vertex label {v!r}")
            if v in index:
                raise GraphError(f"duplicate vertex {v!r}")
            index[v] = i

        def check(u: str, w: str, kind: str) -> None:
            if u not in index or w not in index:
                missing = u if u not in index else w
                raise GraphError(f"unknown vertex {missing!r} in edge {u} {kind} {w}")
            if u == w:
                raise GraphError(f"self-loop on {u!r}")

        for u, w in directed:
            check(u, w, "->")
        # Normalize bidirected pairs by declaration position.
        bi = set()
        for u, w in _freeze_edges(self.bidirected):
            check(u, w, "<->")
            bi.add((u, w) if index[u] < index[w] else (w, u))
        bidirected = frozenset(bi)

        for w in fixed:
            if w not in index:
                raise GraphError(f"unknown fixed vertex {w!r}")

        children: dict[str, list[str]] = {v: [] for v in vertices}
        parents: dict[str, list[str]] = {v: [] for v in vertices}
        siblings: dict[str, list[str]] = {v: [] for v in vertices}
        for u, w in directed:
            children[u].append(w)
            parents[w].append(u)
        for u, w in bidirected:
            siblings[u].append(w)
            siblings[w].append(u)
        for w in fixed:
            if parents[w]:
                raise GraphError(f"fixed vertex {w!r} has a parent")
            if siblings[w]:
                raise GraphError(f"fixed vertex {w!r} has a sibling")

        # Kahn with a heap over declaration positions: deterministic
        # topological order, and the acyclicity check in one pass.
        indeg = {v: len(parents[v]) for v in vertices}
        ready = [index[v] for v in vertices if indeg[v] == 0]
        heapq.heapify(ready)
        topo: list[str] = []
        while ready:
            v = vertices[heapq.heappop(ready)]
            topo.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, index[c])
        if len(topo) != len(vertices):
            raise GraphError("directed part has a cycle")

        by_index = index.__getitem__
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_children", {v: tuple(sorted(c, key=by_index)) for v, c in children.items()})
        object.__setattr__(self, "_parents", {v: tuple(sorted(p, key=by_index)) for v, p in parents.items()})
        object.__setattr__(self, "_siblings", {v: tuple(sorted(s, key=by_index)) for v, s in siblings.items()})
        object.__setattr__(self, "_topo", tuple(topo))
        object.__setattr__(self, "_iadj", None)

    # -- cheap structural accessors -------------------------------------

    @property
    def random(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if v not in self.fixed)

    def is_random(self, v: str) -> bool:
        self._require(v)
        return v not in self.fixed

    def index(self, v: str) -> int:
        return self._index[v]

    def sort(self, s: Iterable[str]) -> tuple[str, ...]:
        """Vertices of ``s`` in declaration order."""
        return tuple(sorted(s, key=self._index.__getitem__))

    def _require(self, v: str) -> None:
        if v not in self._index:
            raise GraphError(f"unknown vertex {v!r}")

    def _int_adjacency(self) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
        """Adjacency over declaration indices: (children, parents, siblings).

        Built on first use and cached.  The index-based lists keep the
        graph traversals allocation-free on large inputs; neighbour order
        matches the name-level tuples (both sorted by declaration).
        """
        cached = self._iadj
        if cached is None:
            idx = self._index
            ch = [[idx[c] for c in self._children[v]] for v in self.vertices]
            pa = [[idx[p] for p in self._parents[v]] for v in self.vertices]
            sib = [[idx[s] for s in self._siblings[v]] for v in self.vertices]
            cached = (ch, pa, sib)
            object.__setattr__(self, "_iadj", cached)
        return cached

    def __contains__(self, v: str) -> bool:
        return v in self._index

    def __repr__(self) -> str:  # keep reprs short: big graphs are common
        return (f"Admg({len(self.vertices)} vertices, {len(self.directed)} directed, "
                f"{len(self.bidirected)} bidirected"
                + (f", {len(self.fixed)} fixed)" if self.fixed else ")"))


#: An Admg whose ``fixed`` set may be non-empty.  Kept as an alias: the
#: operations are uniform over both.
Cadmg = Admg


def _as_vertex_set(g: Admg, s: str | Iterable[str]) -> set[str]:
    if isinstance(s, str):
        s = (s,)
    out = set(s)
    for v in out:
        g._require(v)
    return out


def parents(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    """Union of direct parents of the vertices in ``s`` (not reflexive)."""
    out: set[str] = set()
    for v in _as_vertex_set(g, s):
        out.update(g._parents[v])
    return frozenset(out)


def children(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    out: set[str] = set()
    for v in _as_vertex_set(g, s):
        out.update(g._children[v])
    return frozenset(out)


def siblings(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    out: set[str] = set()
    for v in _as_vertex_set(g, s):
        out.update(g._siblings[v])
    return frozenset(out)


def ancestors(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    """Reflexive ancestors: ``s`` plus everything with a directed path into it."""
    seen = _as_vertex_set(g, s)
    stack = list(seen)
    while stack:
        for p in g._parents[stack.pop()]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return frozenset(seen)


def descendants(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    """Reflexive descendants of ``s``."""
    seen = _as_vertex_set(g, s)
    stack = list(seen)
    while stack:
        for c in g._children[stack.pop()]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return frozenset(seen)


def district(g: Admg, s: str | Iterable[str]) -> frozenset[str]:
    """Union of bidirected-connected components of the random members of ``s``.

    Districts are defined over random vertices only, so fixed vertices in
    ``s`` contribute nothing and never appear in the result.
    """
    start = [v for v in _as_vertex_set(g, s) if v not in g.fixed]
    seen = set(start)
    stack = list(start)
    while stack:
        for n in g._siblings[stack.pop()]:
            if n not in seen and n not in g.fixed:
                seen.add(n)
                stack.append(n)
    return frozenset(seen)


def districts(g: Admg) -> list[frozenset[str]]:
    """The partition of the random vertices into districts, in declaration order."""
    out = []
    done: set[str] = set()
    for v in g.random:
        if v not in done:
            d = district(g, v)
            done |= d
            out.append(d)
    return out


_KINDS = {
    "parents": parents,
    "children": children,
    "ancestors": ancestors,
    "descendants": descendants,
    "siblings": siblings,
    "district": district,
}


def relatives(g: Admg, s: str | Iterable[str], kind: str) -> frozenset[str]:
    """Dispatch to one of the genealogy queries by name."""
    try:
        fn = _KINDS[kind]
    except KeyError:
        raise GraphError(f"unknown relation kind {kind!r}") from None
    return fn(g, s)


def induced_subgraph(g: Admg, s: Iterable[str]) -> Admg:
    """The subgraph on ``s``: exactly the edges with both endpoints in ``s``."""
    keep = _as_vertex_set(g, s)
    if len(keep) == len(g.vertices):
        return g  # identity: avoids revalidating large graphs
    return Admg(
        vertices=tuple(v for v in g.vertices if v in keep),
        directed=frozenset(e for e in g.directed if e[0] in keep and e[1] in keep),
        bidirected=frozenset(e for e in g.bidirected if e[0] in keep and e[1] in keep),
        fixed=g.fixed & keep,
    )


def topological_order(g: Admg) -> list[str]:
    """Vertices with every directed edge pointing forward; declaration-order tie-break."""
    return list(g._topo)


def bidirected_connected(g: Admg, s: Iterable[str]) -> bool:
    """True iff the bidirected edges within ``s`` connect all of ``s``."""
    keep = _as_vertex_set(g, s)
    if not keep:
        raise GraphError("bidirected_connected: empty set")
    start = next(iter(keep))
    seen = {start}
    stack = [start]
    while stack:
        for n in g._siblings[stack.pop()]:
            if n in keep and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen == keep


def is_dag(g: Admg) -> bool:
    return not g.bidirected


def markov_blanket(g: Admg, v: str) -> frozenset[str]:
    """dis(v) ∪ pa(dis(v)), minus v itself.

    Defined for a random vertex that is childless within its own
    district; anything else raises.
    """
    g._require(v)
    if v in g.fixed:
        raise GraphError(f"markov_blanket: {v!r} is fixed")
    dis = district(g, v)
    if children(g, v) & dis:
        raise GraphError(f"markov_blanket: {v!r} has a child inside its district")
    return (dis | parents(g, dis)) - {v}


def m_separated(
    g: Admg,
    a: str | Iterable[str],
    b: str | Iterable[str],
    c: str | Iterable[str] = (),
) -> bool:
    """True iff no m-connecting path joins ``a`` and ``b`` given ``c``.

    A path m-connects given C when every collider on it has a descendant
    in C and every non-collider lies outside C.  Implemented as a
    reachability walk over (vertex, arriving-end) states, so bows and
    CADMG context vertices need no special handling.
    """
    A = _as_vertex_set(g, a)
    B = _as_vertex_set(g, b)
    C = _as_vertex_set(g, c)
    if (A & B) or (A & C) or (B & C):
        raise GraphError("m_separated: sets must be disjoint")

    an_c = ancestors(g, C) if C else frozenset()

    # state = (vertex, mark of the edge end that touched it): 'h' arrowhead, 't' tail
    def moves(v: str) -> Iterator[tuple[str, str, str]]:
        # yields (neighbor, mark at v, mark at neighbor)
        for ch in g._children[v]:
            yield ch, "t", "h"
        for p in g._parents[v]:
            yield p, "h", "t"
        for sib in g._siblings[v]:
            yield sib, "h", "h"

    seen: set[tuple[str, str]] = set()
    frontier: list[tuple[str, str]] = []
    for src in A:
        for nxt, _, mark_nxt in moves(src):
            if nxt in B:
                return False
            if (nxt, mark_nxt) not in seen:
                seen.add((nxt, mark_nxt))
                frontier.append((nxt, mark_nxt))
    while frontier:
        v, arrived = frontier.pop()
        for nxt, mark_v, mark_nxt in moves(v):
            collider = arrived == "h" and mark_v == "h"
            if collider:
                if v not in an_c:
                    continue
            elif v in C:
                continue
            if nxt in B:
                return False
            if nxt in A:
                continue
            if (nxt, mark_nxt) not in seen:
                seen.add((nxt, mark_nxt))
                frontier.append((nxt, mark_nxt))
    return True


# ---------------------------------------------------------------------------
# text format


def parse_graph(text: str) -> tuple[Admg, tuple[str, ...]]:
    """Parse the graph text format.

    Returns ``(graph, latent_vertices)``.  Latent vertices are ordinary
    random vertices until a projection removes them; they are reported
    so callers (the CLI in particular) know what to project away.

    Format: ``#`` comments and blank lines ignored; a required
    ``vertices:`` header, then optional ``latent:`` and ``fixed:``
    headers in that order, then edge lines ``a -> b`` / ``a <-> b``.
    """
    vertices: list[str] | None = None
    vset: set[str] = set()
    latent: list[str] = []
    fixed: list[str] = []
    directed: list[Edge] = []
    bidirected: list[Edge] = []
    seen_dir: set[Edge] = set()
    seen_bi: set[Edge] = set()
    headers_done = False

    def tokens(rest: str, lineno: int) -> list[str]:
        toks = rest.split()
        for t in toks:
            if not _LABEL_RE.match(t):
                raise ParseError(f"bad vertex label {t!r}", lineno)
        return toks

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vertices:"):
            if vertices is not None:
                raise ParseError("duplicate vertices: header", lineno)
            vertices = tokens(line[len("vertices:"):], lineno)
            if not vertices:
                raise ParseError("vertices: header lists no vertices", lineno)
            for v in vertices:
                if v in vset:
                    raise ParseError(f"duplicate vertex {v!r}", lineno)
                vset.add(v)
            continue
        if vertices is None:
            raise ParseError("expected vertices: header first", lineno)
        if line.startswith("latent:"):
            if headers_done or latent or fixed:
                raise ParseError("latent: header out of order", lineno)
            latent = tokens(line[len("latent:"):], lineno)
            continue
        if line.startswith("fixed:"):
            if headers_done or fixed:
                raise ParseError("fixed: header out of order", lineno)
            fixed = tokens(line[len("fixed:"):], lineno)
            continue
        headers_done = True
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("->", "<->"):
            raise ParseError(f"expected an edge line, got {line!r}", lineno)
        u, op, w = parts
        if not _LABEL_RE.match(u) or not _LABEL_RE.match(w):
            raise ParseError(f"bad vertex label in {line!r}", lineno)
        if u not in vset or w not in vset:
            missing = u if u not in vset else w
            raise ParseError(f"unknown vertex {missing!r}", lineno)
        if op == "->":
            if (u, w) in seen_dir:
                raise ParseError(f"duplicate edge {u} -> {w}", lineno)
            seen_dir.add((u, w))
            directed.append((u, w))
        else:
            key = (u, w) if u < w else (w, u)
            if key in seen_bi:
                raise ParseError(f"duplicate edge {u} <-> {w}", lineno)
            seen_bi.add(key)
            bidirected.append((u, w))

    if vertices is None:
        raise ParseError("missing vertices: header")
    for name, group in (("latent", latent), ("fixed", fixed)):
        bad = [v for v in group if v not in vset]
        if bad:
            raise ParseError(f"{name}: lists undeclared vertex {bad[0]!r}")
        if len(set(group)) != len(group):
            raise ParseError(f"{name}: lists a vertex twice")
    if set(latent) & set(fixed):
        raise ParseError("a vertex cannot be both latent and fixed")

    g = Admg(tuple(vertices), frozenset(directed), frozenset(bidirected), frozenset(fixed))
    return g, tuple(latent)


def serialize_graph(g: Admg, latent: Iterable[str] = ()) -> str:
    """Write the text format back out.

    Vertices keep declaration order; edges are sorted, directed block
    first, each block lexicographic by endpoint labels.  The output
    re-parses to an equal graph.
    """
    latent = tuple(latent)
    for v in latent:
        g._require(v)
    lines = ["vertices: " + " ".join(g.vertices)]
    if latent:
        lines.append("latent: " + " ".join(g.sort(latent)))
    if g.fixed:
        lines.append("fixed: " + " ".join(g.sort(g.fixed)))
    for u, w in sorted(g.directed):
        lines.append(f"{u} -> {w}")
    for u, w in sorted(tuple(sorted(e)) for e in g.bidirected):
        lines.append(f"{u} <-> {w}")
    return "\n".join(lines) + "\n"
