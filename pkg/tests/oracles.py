"""Definition-level reimplementations used to cross-check the package.

Everything here favours the most literal reading of a definition over
speed: union-find for districts, simple-path enumeration for
m-connection, one-vertex-at-a-time latent elimination, breadth-first
search over entire fixing orders, and subset enumeration for minimal
kept sets.  Tests compare the fast algorithms against these.
"""

from __future__ import annotations

import heapq
import itertools
import random
from collections import Counter, defaultdict
from fractions import Fraction
from typing import Iterable, Iterator

from admgkit import (
    Admg,
    DiscreteKernel,
    MinimalReduction,
    canonical_dag,
    parents,
    topological_order,
)

# ---------------------------------------------------------------- districts


def od_districts(g: Admg) -> set[frozenset[str]]:
    parent = {v: v for v in g.random}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for x, y in g.bidirected:
        parent[find(x)] = find(y)
    groups: dict[str, set[str]] = defaultdict(set)
    for v in g.random:
        groups[find(v)].add(v)
    return {frozenset(s) for s in groups.values()}


# ------------------------------------------------- ancestors / m-connection


def od_ancestors(g: Admg, seed: Iterable[str]) -> set[str]:
    out = set(seed)
    changed = True
    while changed:
        changed = False
        for t, h in g.directed:
            if h in out and t not in out:
                out.add(t)
                changed = True
    return out


def od_m_connected(g: Admg, x: str, y: str, cond: Iterable[str]) -> bool:
    """Simple-path search straight off the definition; exponential."""
    cond = set(cond)
    anc = od_ancestors(g, cond) if cond else set()
    adj: dict[str, list[tuple[str, bool, bool]]] = {v: [] for v in g.vertices}
    for t, h in g.directed:
        adj[t].append((h, False, True))  # (neighbour, head here, head there)
        adj[h].append((t, True, False))
    for a, b in g.bidirected:
        adj[a].append((b, True, True))
        adj[b].append((a, True, True))

    found = False

    def dfs(u: str, arriving_head: bool | None, used: frozenset[str]) -> None:
        nonlocal found
        for nxt, head_here, head_far in adj[u]:
            if found:
                return
            if nxt in used:
                continue
            if arriving_head is not None:
                collider = arriving_head and head_here
                if collider and u not in anc:
                    continue
                if not collider and u in cond:
                    continue
            if nxt == y:
                found = True
                return
            dfs(nxt, head_far, used | {nxt})

    dfs(x, None, frozenset({x}))
    return found


# --------------------------------------------------------- latent projection


def od_latent_project(
    g: Admg, latents: Iterable[str]
) -> tuple[set[tuple[str, str]], set[frozenset[str]]]:
    """Eliminate one latent at a time with the single-vertex rules."""
    directed = set(g.directed)
    bi = {frozenset(e) for e in g.bidirected}
    for latent in latents:
        pa = {t for t, h in directed if h == latent}
        ch = {h for t, h in directed if t == latent}
        sib = {next(iter(e - {latent})) for e in bi if latent in e}
        directed = {(t, h) for t, h in directed if latent not in (t, h)}
        bi = {e for e in bi if latent not in e}
        for p in pa:
            for c in ch:
                directed.add((p, c))
        for c1, c2 in itertools.combinations(ch, 2):
            bi.add(frozenset({c1, c2}))
        for s in sib:
            for c in ch:
                if s != c:
                    bi.add(frozenset({s, c}))
    return directed, bi


# ------------------------------------------------------------------- fixing


def _state_edges(
    g: Admg, fixed_extra: Iterable[str]
) -> tuple[set[str], set[tuple[str, str]], set[tuple[str, str]]]:
    """Edges after fixing a set; order of fixing cannot matter here."""
    blocked = set(g.fixed) | set(fixed_extra)
    directed = {(t, h) for t, h in g.directed if h not in blocked}
    bi = {e for e in g.bidirected if not (set(e) & blocked)}
    return blocked, directed, bi


def od_fixable_in_state(g: Admg, fixed_extra: Iterable[str], r: str) -> bool:
    _, directed, bi = _state_edges(g, fixed_extra)
    de = {r}
    stack = [r]
    while stack:
        u = stack.pop()
        for t, h in directed:
            if t == u and h not in de:
                de.add(h)
                stack.append(h)
    dis = {r}
    stack = [r]
    while stack:
        u = stack.pop()
        for a, b in bi:
            for p, q in ((a, b), (b, a)):
                if p == u and q not in dis:
                    dis.add(q)
                    stack.append(q)
    return len(de & dis) == 1


def od_reachable_sets(g: Admg) -> set[frozenset[str]]:
    """Survivor sets over every fixing order, by breadth-first search."""
    full = frozenset(g.random)
    seen = {full}
    visited = {frozenset()}
    queue: list[frozenset[str]] = [frozenset()]
    while queue:
        fixed = queue.pop()
        for r in full - fixed:
            if od_fixable_in_state(g, fixed, r):
                nxt = fixed | {r}
                if nxt not in visited:
                    visited.add(nxt)
                    queue.append(nxt)
                    seen.add(full - nxt)
    seen.discard(frozenset())
    return seen


# -------------------------------------------------------- minimal kept sets


def od_min_keeps(red: MinimalReduction, roles: Iterable[str]) -> set[frozenset[str]]:
    """Every minimum-size surviving set reachable by a valid removal.

    A removal is valid when it avoids the roles and the retained child,
    is closed under forest ancestry (nothing may keep draining through
    a removed vertex), and each of its connected components inside the
    bidirected tree meets the rest of the tree in exactly one edge.
    Exponential subset sweep; keep the reductions small.
    """
    roles = set(roles)
    kept = set(red.kept)
    child = {t: h for t, h in red.directed_forest}
    tree_adj: dict[str, set[str]] = defaultdict(set)
    for a, b in red.bidirected_tree:
        tree_adj[a].add(b)
        tree_adj[b].add(a)
    tree_vertices = set(tree_adj)
    retained_child = red.retained_w_edge[1] if red.retained_w_edge else None

    def valid(removal: frozenset[str]) -> bool:
        for y in kept - removal:
            c = child.get(y)
            if c is not None and c in removal:
                return False
        on_tree = removal & tree_vertices
        unseen = set(on_tree)
        while unseen:
            start = unseen.pop()
            comp = {start}
            frontier = [start]
            while frontier:
                u = frontier.pop()
                for nb in tree_adj[u]:
                    if nb in on_tree and nb not in comp:
                        comp.add(nb)
                        unseen.discard(nb)
                        frontier.append(nb)
            boundary = sum(1 for u in comp for nb in tree_adj[u] if nb not in removal)
            if boundary != 1:
                return False
        return True

    removable = sorted(kept - roles - ({retained_child} if retained_child else set()))
    for rsize in range(len(removable), -1, -1):
        hits = {
            frozenset(kept - set(combo))
            for combo in itertools.combinations(removable, rsize)
            if valid(frozenset(combo))
        }
        if hits:
            return hits
    raise AssertionError("the empty removal is always valid")


# -------------------------------------------------------------------- parity


def od_parity_counts(
    k: int, edges: list[tuple[int, int]], subset: Iterable[int]
) -> Counter[tuple[int, ...]]:
    """Literal count of subset patterns over all edge-bit assignments."""
    subset = tuple(subset)
    counts: Counter[tuple[int, ...]] = Counter()
    for bits in itertools.product((0, 1), repeat=len(edges)):
        x = [0] * k
        for bit, (a, b) in zip(bits, edges):
            x[a] ^= bit
            x[b] ^= bit
        counts[tuple(x[i] for i in subset)] += 1
    return counts


def pruefer_tree(seq: Iterable[int], k: int) -> list[tuple[int, int]]:
    """Decode a Prüfer sequence over 0..k-1 into its labelled tree."""
    seq = list(seq)
    degree = [1] * k
    for s in seq:
        degree[s] += 1
    leaves = [i for i in range(k) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for s in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, s))
        degree[s] -= 1
        if degree[s] == 1:
            heapq.heappush(leaves, s)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return edges


# --------------------------------------------------------- random instances


def random_admg(
    rng: random.Random,
    max_n: int = 10,
    p_dir: float = 0.3,
    p_bi: float = 0.25,
    allow_fixed: bool = False,
) -> Admg:
    """Seeded random graph; directed edges follow a hidden shuffle, so
    they routinely run against declaration order."""
    n = rng.randint(1, max_n)
    names = tuple("abcdefghij"[:n])
    order = list(names)
    rng.shuffle(order)
    pos = {v: i for i, v in enumerate(order)}
    directed = set()
    bidirected = set()
    for i in range(n):
        for j in range(i + 1, n):
            x, y = names[i], names[j]
            if rng.random() < p_dir:
                directed.add((x, y) if pos[x] < pos[y] else (y, x))
            if rng.random() < p_bi:
                bidirected.add((x, y))
    fixed: set[str] = set()
    if allow_fixed:
        fixed = {v for v in names if rng.random() < 0.15}
        directed = {(t, h) for t, h in directed if h not in fixed}
        bidirected = {e for e in bidirected if not (set(e) & fixed)}
    return Admg(names, directed, bidirected, fixed)


def all_admgs(n: int) -> Iterator[Admg]:
    """Every graph on n labelled vertices with declaration-aligned arrows."""
    names = tuple("abcdefgh"[:n])
    pairs = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
    m = len(pairs)
    for dmask in range(1 << m):
        directed = frozenset(p for i, p in enumerate(pairs) if dmask >> i & 1)
        for bmask in range(1 << m):
            bidirected = frozenset(p for i, p in enumerate(pairs) if bmask >> i & 1)
            yield Admg(names, directed, bidirected)


# ---------------------------------------------------- strictly positive laws


def random_positive_law(g: Admg, rng: random.Random) -> DiscreteKernel:
    """Binary law factorizing over the hidden-variable form of ``g``.

    Conditional probabilities are rationals in [1/16, 15/16], so every
    atom is strictly positive and all downstream arithmetic stays exact.
    """
    dag, _ = canonical_dag(g)
    cpt: dict[str, tuple[tuple[str, ...], dict[tuple[int, ...], Fraction]]] = {}
    for v in topological_order(dag):
        pa = dag.sort(parents(dag, v))
        table = {
            assign: Fraction(rng.randint(1, 15), 16)
            for assign in itertools.product((0, 1), repeat=len(pa))
        }
        cpt[v] = (pa, table)
    row = [Fraction(0)] * (1 << len(g.random))
    for assign in itertools.product((0, 1), repeat=len(dag.vertices)):
        a = dict(zip(dag.vertices, assign))
        pr = Fraction(1)
        for v, (pa, table) in cpt.items():
            p1 = table[tuple(a[p] for p in pa)]
            pr *= p1 if a[v] == 1 else 1 - p1
        idx = 0
        for v in g.random:
            idx = idx * 2 + a[v]
        row[idx] += pr
    return DiscreteKernel(tuple((v, 2) for v in g.random), (), {(): tuple(row)})


# ------------------------------------------------------- kernel inspection


def row_marginal(q: DiscreteKernel, row: tuple[Fraction, ...], target: str) -> tuple[Fraction, ...]:
    """Marginal law of one variable inside a single kernel row."""
    cards = [c for _, c in q.random_vars]
    ti = [n for n, _ in q.random_vars].index(target)
    out = [Fraction(0)] * cards[ti]
    for pos, pr in enumerate(row):
        rem = pos
        vals = []
        for c in reversed(cards):
            vals.append(rem % c)
            rem //= c
        vals.reverse()
        out[vals[ti]] += pr
    return tuple(out)


def od_context_independent(q: DiscreteKernel, target: str, drop: str) -> bool:
    """Does the marginal law of ``target`` ignore the ``drop`` context?"""
    di = [n for n, _ in q.fixed_vars].index(drop)
    seen: dict[tuple[int, ...], tuple[Fraction, ...]] = {}
    for ctx, row in q.table.items():
        key = ctx[:di] + ctx[di + 1 :]
        marg = row_marginal(q, row, target)
        if key in seen:
            if seen[key] != marg:
                return False
        else:
            seen[key] = marg
    return True
