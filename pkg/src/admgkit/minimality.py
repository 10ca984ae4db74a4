"""Reduction of a dense-pair subgraph to a minimal coupling skeleton.

The pair subgraph for a densely connected pair usually carries far more
edges than a coupling needs.  :func:`tree_reduce` thins it to a directed
forest (one path from every vertex down to the seed set) plus a spanning
bidirected tree, :func:`prune` removes almost-encapsulated regions, and
:func:`minimal_set` finds the unique smallest vertex set that still has
to participate.  All three stay linear in the graph size, which is what
makes couplings over very large graphs practical; :func:`comp_graph`
generates the chain-of-components family used to exercise exactly that.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

from .graph import Admg, Edge, GraphError, _as_vertex_set, induced_subgraph
from .projection import _closure_masks


@dataclass(frozen=True)
class MinimalReduction:
    """A reduced pair subgraph plus the structures the reduction chose.

    ``reduced`` contains exactly the forest edges, the tree edges and —
    when the external vertex ``w`` sits outside the seed set — one
    retained edge from ``w`` into it.  ``b_set`` is the seed: {v} in the
    directed case, {v, w} in the bidirected case.
    """

    reduced: Admg
    b_set: frozenset[str]
    directed_forest: frozenset[Edge]
    bidirected_tree: frozenset[Edge]
    retained_w_edge: Edge | None

    @property
    def kept(self) -> frozenset[str]:
        """The spanned vertex set C (everything except an external w)."""
        drop = {self.retained_w_edge[0]} if self.retained_w_edge else set()
        return frozenset(v for v in self.reduced.random if v not in drop)


def _topo_within(g: Admg, inside: bytearray) -> list[int]:
    """Kahn's algorithm on the induced directed subgraph, declaration tie-break.

    Runs over declaration indices (``inside`` is a byte mask) so the
    heap holds plain ints; the pop order matches a name-level Kahn
    because the tie-break key *is* the declaration index.
    """
    n = len(g.vertices)
    ch, _, _ = g._int_adjacency()
    indeg = [0] * n
    for u in range(n):
        if inside[u]:
            for c in ch[u]:
                if inside[c]:
                    indeg[c] += 1
    ready = [u for u in range(n) if inside[u] and indeg[u] == 0]
    heapq.heapify(ready)
    out: list[int] = []
    while ready:
        u = heapq.heappop(ready)
        out.append(u)
        for c in ch[u]:
            if inside[c]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
    return out


def tree_reduce(h: Admg, b: Iterable[str] | str, w: str | None = None) -> MinimalReduction:
    """Thin a pair subgraph to one directed forest and one bidirected tree.

    ``h`` must be the closure of ``b`` once ``w`` (if any) is set aside:
    C = V∖{w} in the directed case, C = V in the bidirected one.  Kept
    edges: for every vertex of C outside ``b`` the directed edge to the
    child closest to ``b`` (ties to the topologically latest child); a
    breadth-first spanning tree of the bidirected part rooted at the
    earliest-declared seed vertex, neighbours visited in topological
    order; and in the directed case a single edge from ``w`` to its
    topologically earliest child.  A graph that is already its own
    reduction is returned unchanged (same object).
    """
    if h.fixed:
        raise GraphError("tree_reduce expects a fully random graph")
    seed = frozenset(_as_vertex_set(h, b))
    if not seed:
        raise GraphError("tree_reduce: empty seed set")
    verts = h.vertices
    n = len(verts)
    idx = h._index
    inside = bytearray(b"\x01") * n
    if w is not None:
        h._require(w)
        if w in seed:
            raise GraphError(f"external vertex {w!r} cannot be in the seed set")
        inside[idx[w]] = 0
    seed_ids = [idx[s] for s in seed]
    if _closure_masks(h, seed_ids, inside)[-1] != inside:
        raise GraphError("graph is not the closure of the seed set")

    ch, _, sib = h._int_adjacency()
    topo = _topo_within(h, inside)
    pos = [0] * n  # meaningful only where inside
    for i, u in enumerate(topo):
        pos[u] = i

    # Directed forest: walk against topological order so every child's
    # distance to the seed set is known before its parents need it.
    in_seed = bytearray(n)
    for s in seed_ids:
        in_seed[s] = 1
    dist = [-1] * n
    forest_i: list[tuple[int, int]] = []
    for u in reversed(topo):
        if in_seed[u]:
            dist[u] = 0
            continue
        best = -1
        for c in ch[u]:
            if not inside[c] or dist[c] < 0:
                continue
            if (
                best < 0
                or dist[c] < dist[best]
                or (dist[c] == dist[best] and pos[c] > pos[best])
            ):
                best = c
        if best < 0:
            raise GraphError(f"{verts[u]!r} has no directed path to the seed set")
        dist[u] = dist[best] + 1
        forest_i.append((u, best))

    # Spanning tree BFS.  Adjacency is assembled by one sweep over the
    # topological order, which leaves every neighbour list pre-sorted by
    # position — the same visit order as sorting per vertex.
    tadj: list[list[int]] = [[] for _ in range(n)]
    for x in topo:
        for s in sib[x]:
            tadj[s].append(x)
    root = min(seed_ids)
    tree_i: list[tuple[int, int]] = []
    visited = bytearray(n)
    visited[root] = 1
    queue = [root]
    qi = 0
    while qi < len(queue):
        x = queue[qi]
        qi += 1
        for y in tadj[x]:
            if not visited[y]:
                visited[y] = 1
                queue.append(y)
                tree_i.append((x, y) if x < y else (y, x))
    if len(queue) != n - (0 if w is None else 1):
        raise GraphError("kept vertices are not bidirected-connected")

    retained: Edge | None = None
    if w is not None:
        w_children = [c for c in ch[idx[w]] if inside[c]]
        if not w_children:
            raise GraphError(f"external vertex {w!r} has no child to retain")
        retained = (w, verts[min(w_children, key=pos.__getitem__)])

    forest = frozenset((verts[u], verts[c]) for u, c in forest_i)
    tree = frozenset((verts[x], verts[y]) for x, y in tree_i)
    # Every kept edge is drawn from h's own edge sets and the retained
    # edge (tail w) cannot coincide with a forest edge (tails inside), so
    # matching counts already mean the kept edges are exactly h's.
    n_directed = len(forest_i) + (0 if retained is None else 1)
    if n_directed == len(h.directed) and len(tree_i) == len(h.bidirected):
        reduced = h  # already minimal; keep the object (and its caches)
    else:
        keep_directed = set(forest)
        if retained is not None:
            keep_directed.add(retained)
        reduced = Admg(h.vertices, frozenset(keep_directed), tree)
    return MinimalReduction(reduced, seed, forest, tree, retained)


def almost_encapsulated(h: MinimalReduction, d: Iterable[str] | str) -> bool:
    """True when each tree component of ``d`` meets exactly one tree edge
    leaving ``d``.

    Such a region hangs off the rest of the spanning tree by single
    edges, so deleting it leaves the remainder spanned and connected.
    """
    dset = set(_as_vertex_set(h.reduced, d)) if d else set()
    if not dset <= h.kept:
        raise GraphError("set must lie inside the spanned vertices")
    if not dset:
        return True
    adj: dict[str, list[str]] = {}
    for x, y in h.bidirected_tree:
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)
    comp: dict[str, int] = {}
    boundary: dict[int, int] = {}
    n = 0
    for s in dset:
        if s in comp:
            continue
        comp[s] = n
        stack = [s]
        while stack:
            x = stack.pop()
            for y in adj.get(x, ()):
                if y in dset:
                    if y not in comp:
                        comp[y] = n
                        stack.append(y)
                else:
                    boundary[n] = boundary.get(n, 0) + 1
        n += 1
    return all(boundary.get(i, 0) == 1 for i in range(n))


def prune(h: MinimalReduction, a: Iterable[str] | str) -> MinimalReduction:
    """Remove the forest-ancestral closure of ``a`` from the reduction.

    The removed region must be disjoint from the seed set, keep the
    retained child of the external vertex (when there is one), and be
    almost encapsulated, so the surviving forest and tree still span
    what remains.  Pruning the empty set is the identity.
    """
    aset = set(_as_vertex_set(h.reduced, a)) if a else set()
    if not aset:
        return h
    if aset & h.b_set:
        raise GraphError("cannot prune seed vertices")
    if not aset <= h.kept:
        raise GraphError("prune set must lie inside the spanned vertices")

    up: dict[str, list[str]] = {}
    for u, c in h.directed_forest:
        up.setdefault(c, []).append(u)
    removal = set(aset)
    stack = list(aset)
    while stack:
        for u in up.get(stack.pop(), ()):
            if u not in removal:
                removal.add(u)
                stack.append(u)

    if removal & h.b_set:
        raise GraphError("forest closure of the prune set reaches the seed set")
    if h.retained_w_edge and h.retained_w_edge[1] in removal:
        raise GraphError("cannot prune the retained child of the external vertex")
    if not almost_encapsulated(h, removal):
        raise GraphError("forest closure of the prune set is not almost encapsulated")

    keep = [v for v in h.reduced.vertices if v not in removal]
    return MinimalReduction(
        induced_subgraph(h.reduced, keep),
        h.b_set,
        frozenset(e for e in h.directed_forest if e[0] not in removal and e[1] not in removal),
        frozenset(e for e in h.bidirected_tree if e[0] not in removal and e[1] not in removal),
        h.retained_w_edge,
    )


def minimal_set(h: MinimalReduction, v: str, w: str) -> frozenset[str]:
    """The smallest vertex set a coupling of ``v`` and ``w`` must keep.

    Seeds W with {v, w} when ``w`` is external, otherwise with the
    cheapest tree edge crossing between the forest side of ``v`` and the
    forest side of ``w`` plus its tree paths back to both.  Then
    alternates: add descendants of W in the reduced graph, connect every
    addition to W along the spanning tree, repeat to a fixpoint.  Each
    vertex and edge is handled at most once, so the walk is linear.
    """
    g = h.reduced
    g._require(v)
    g._require(w)
    if v == w:
        raise GraphError("need two distinct vertices")
    if h.retained_w_edge is not None:
        if h.b_set != {v}:
            raise GraphError(f"reduction was built for seed {set(h.b_set)}, not {v!r}")
        if h.retained_w_edge[0] != w:
            raise GraphError(f"reduction's external vertex is {h.retained_w_edge[0]!r}")
    elif h.b_set != {v, w}:
        raise GraphError(f"reduction was built for seed {set(h.b_set)}, not this pair")

    verts = g.vertices
    n = len(verts)
    idx = g._index
    # The reduced graph's bidirected part *is* the spanning tree, so its
    # sibling lists double as the tree adjacency (the external vertex,
    # if any, has none).
    ch, _, sib = g._int_adjacency()
    iv, iw = idx[v], idx[w]

    def bfs_from(src: int) -> tuple[list[int], list[int]]:
        parent = [-1] * n
        depth = [-1] * n
        depth[src] = 0
        queue = [src]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            for y in sib[x]:
                if depth[y] < 0:
                    depth[y] = depth[x] + 1
                    parent[y] = x
                    queue.append(y)
        return parent, depth

    to_v, depth_v = bfs_from(iv)
    kept = bytearray(n)
    kept_ids: list[int] = []

    def keep(x: int) -> None:
        if not kept[x]:
            kept[x] = 1
            kept_ids.append(x)

    if h.retained_w_edge is None:
        # Sides: which seed vertex each kept vertex's forest path reaches.
        child = [-1] * n
        for x, y in h.directed_forest:
            child[idx[x]] = idx[y]
        side = [-1] * n
        side[iv] = iv
        side[iw] = iw

        def side_of(u: int) -> int:
            path = []
            while side[u] < 0:
                path.append(u)
                u = child[u]
                if u < 0:
                    raise GraphError("forest path leaves the reduction")
            for p in path:
                side[p] = side[u]
            return side[u]

        to_w, depth_w = bfs_from(iw)
        seedling: tuple[tuple[int, int, int], int, int] | None = None
        for x, y in h.bidirected_tree:
            ix, iy = idx[x], idx[y]
            sx, sy = side_of(ix), side_of(iy)
            if sx == sy:
                continue
            a, bb = (ix, iy) if sx == iv else (iy, ix)
            key = (depth_v[a] + depth_w[bb], a, bb)
            if seedling is None or key < seedling[0]:
                seedling = (key, a, bb)
        if seedling is None:
            raise GraphError("no tree edge crosses between the two sides")
        _, a, bb = seedling
        keep(a)
        keep(bb)
        x = a
        while x != iv:
            x = to_v[x]
            keep(x)
        x = bb
        while x != iw:
            x = to_w[x]
            keep(x)
    else:
        keep(iv)
        keep(iw)

    # Grow: reachable descendants, then their tree paths back to v.
    frontier = kept_ids[:]
    while frontier:
        added: list[int] = []
        for x in frontier:
            for c in ch[x]:
                if not kept[c]:
                    keep(c)
                    added.append(c)
        # Newly added vertices lie in C, so each has a tree path to v;
        # climb it until the already-kept region is reached.  The climbs
        # can add further vertices, which then also need their children
        # explored: keep extending `added` in place.
        i = 0
        while i < len(added):
            p = added[i]
            i += 1
            while p != iv:
                p = to_v[p]
                if kept[p]:
                    break
                keep(p)
                added.append(p)
        frontier = added
    return frozenset(verts[i] for i in kept_ids)


def comp_graph(k: int) -> Admg:
    """The k-link chain-of-components graph on 2k+2 vertices.

    Two directed layers y_i → z_i → v plus w → v, with bidirected
    chains along each layer, a rung y_k ↔ z_k, and y_1 ↔ v.  For every
    k the minimal coupling set of (v, w) is just {v, w}, while the
    spanning structures thread through all 2k vertices — the family
    exercises linear scaling of the reduction pipeline.
    """
    if k < 1:
        raise GraphError("comp_graph needs k >= 1")
    ys = [f"y{i}" for i in range(1, k + 1)]
    zs = [f"z{i}" for i in range(1, k + 1)]
    directed = [(y, z) for y, z in zip(ys, zs)] + [(z, "v") for z in zs] + [("w", "v")]
    bidirected = (
        list(zip(ys, ys[1:]))
        + list(zip(zs, zs[1:]))
        + [(ys[-1], zs[-1]), (ys[0], "v")]
    )
    return Admg(tuple(ys + zs + ["v", "w"]), frozenset(directed), frozenset(bidirected))
