"""Coupling constructions over densely connected pairs.

For a densely connected pair (v, w) the pruned tree reduction yields a
small graph whose bidirected tree edges become hidden uniform variables
and whose directed edges feed values forward.  Summing the incident
hidden variables (with signs arranged to telescope) makes X_v and X_w
equal with certainty while every proper subset of the other observed
variables stays independent and uniform — the construction behind the
pair's dependence being unavoidable.  Works for any modulus k ≥ 2, and
a continuous variant pushes 64-bit words through the same wiring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numpy.random import Generator, Philox

from .graph import Admg, GraphError
from .minimality import minimal_set, prune, tree_reduce
from .projection import canonical_dag, pair_subgraph


@dataclass
class CouplingSem:
    """A coupling: linear assignments mod k over hidden and source variables.

    ``assignments`` maps each observed vertex (except a directed-case
    input vertex) to signed terms; hidden terms come first, then parent
    values in declaration order.  ``canonical`` is the full DAG wiring
    hidden (``_h*``) and source (``_s_*``) vertices into the observed
    ones.  ``eval_order`` lists assigned vertices parents-first.
    """

    canonical: Admg
    hidden_vars: tuple[str, ...]
    source_vars: tuple[str, ...]
    assignments: dict[str, tuple[tuple[int, str], ...]]
    eval_order: tuple[str, ...]
    input_vertex: str | None
    target_pair: tuple[str, str]
    modulus: int
    kept: frozenset[str]
    observed: tuple[str, ...]
    case: str


def build_coupling(
    g: Admg, v: str, w: str, k: int = 2, preference: str = "directed_first"
) -> CouplingSem:
    """Construct a mod-k coupling forcing X_v = X_w for a dense pair.

    Pipeline: pair subgraph → tree reduction → minimal vertex set →
    prune the rest → one hidden variable per surviving tree edge.  Signs
    telescope: a tree edge within one forest side enters its
    topologically later endpoint negatively; an edge crossing between
    the v-side and the w-side enters both positively.  Observed vertices
    outside the kept set get fresh uniform sources, so the coupling is a
    distribution over all of ``g``'s vertices.
    """
    if k < 2:
        raise GraphError("modulus must be at least 2")
    if g.fixed:
        raise GraphError("couplings are built over fully random graphs")
    for name in g.vertices:
        if name.startswith("_s_"):
            raise GraphError(f"vertex {name!r} collides with source naming")

    ps = pair_subgraph(g, v, w, preference)
    reduction = tree_reduce(ps.graph, ps.b_set, ps.external)
    if ps.external is None:
        kept = minimal_set(reduction, v, w)
    else:  # seed vertex first: (v, w) and (w, v) land in the same reduction
        kept = minimal_set(reduction, next(iter(ps.b_set)), ps.external)
    pruned = prune(reduction, reduction.kept - kept)
    core = pruned.reduced

    dag, edge_to_hidden = canonical_dag(core)
    hidden_vars = tuple(f"_h{i}" for i in range(1, len(edge_to_hidden) + 1))

    # Which side of the forest each spanned vertex drains to; in the
    # directed case there is only one side and every edge is internal.
    if ps.external is None:
        child = dict(pruned.directed_forest)
        side: dict[str, str] = {v: v, w: w}

        def side_of(u: str) -> str:
            path = []
            while u not in side:
                path.append(u)
                u = child[u]
            for p in path:
                side[p] = side[u]
            return side[u]

        def crossing(x: str, y: str) -> bool:
            return side_of(x) != side_of(y)

    else:

        def crossing(x: str, y: str) -> bool:
            return False

    pos = {u: i for i, u in enumerate(core._topo)}
    incident: dict[str, list[tuple[int, str]]] = {u: [] for u in core.vertices}
    for e in sorted(edge_to_hidden, key=lambda e: tuple(sorted(e))):
        x, y = e
        h = edge_to_hidden[e]
        if crossing(x, y):
            sx = sy = 1
        else:
            late = y if pos[y] > pos[x] else x
            sx = -1 if late == x else 1
            sy = -1 if late == y else 1
        incident[x].append((sx, h))
        incident[y].append((sy, h))

    assignments: dict[str, tuple[tuple[int, str], ...]] = {}
    eval_order: list[str] = []
    observed = g.random
    source_vars: list[str] = []
    for u in observed:
        if u in kept or u == ps.external:
            continue
        s = f"_s_{u}"
        source_vars.append(s)
        assignments[u] = ((1, s),)
        eval_order.append(u)
    for u in core._topo:
        if u == ps.external:
            continue
        terms = tuple(incident[u]) + tuple((1, p) for p in core._parents[u])
        assignments[u] = terms
        eval_order.append(u)

    canonical = Admg(
        tuple(g.vertices) + tuple(dag.vertices[len(core.vertices):]) + tuple(source_vars),
        frozenset(dag.directed) | {(s, s[3:]) for s in source_vars},
        frozenset(),
    )
    return CouplingSem(
        canonical=canonical,
        hidden_vars=hidden_vars,
        source_vars=tuple(source_vars),
        assignments=assignments,
        eval_order=tuple(eval_order),
        input_vertex=ps.external,
        target_pair=(v, w),
        modulus=k,
        kept=frozenset(kept),
        observed=observed,
        case=ps.case,
    )


def evaluate(
    sem: CouplingSem,
    hidden_assignment: Mapping[str, int],
    input: int | None = None,
) -> dict[str, int]:
    """Run one assignment of the hidden and source variables.

    ``input`` supplies the external vertex's value in the directed case
    and must be omitted otherwise.  Returns every observed vertex's
    value mod k.
    """
    k = sem.modulus
    needed = sem.hidden_vars + sem.source_vars
    missing = [x for x in needed if x not in hidden_assignment]
    if missing:
        raise GraphError(f"assignment misses {missing}")
    value = {x: hidden_assignment[x] % k for x in needed}
    if sem.input_vertex is not None:
        if input is None:
            raise GraphError(f"coupling takes an input for {sem.input_vertex!r}")
        value[sem.input_vertex] = input % k
    elif input is not None:
        raise GraphError("this coupling has no input vertex")
    for u in sem.eval_order:
        acc = 0
        for sign, var in sem.assignments[u]:
            acc += sign * value[var]
        value[u] = acc % k
    return {u: value[u] for u in sem.observed}


def _stream(seed: int, index: int, n: int) -> np.ndarray:
    """The n leading 64-bit words of the Philox stream keyed (seed, index)."""
    gen = Generator(Philox(key=np.array([seed, index], dtype=np.uint64)))
    return gen.integers(0, 1 << 64, size=n, dtype=np.uint64)


def sample(
    sem: CouplingSem, n: int, seed: int, set_w: int | None = None
) -> dict[str, np.ndarray]:
    """Draw n joint samples, reproducibly.

    Each hidden/source/input variable consumes its own counter-based
    stream — key (seed, variable position) — so output is independent
    of evaluation order and stable across runs.  Values are 64-bit words
    reduced mod k; the bias against a perfectly uniform draw is at most
    2**-64 per atom.  ``set_w`` pins the input vertex instead of drawing
    it uniformly.
    """
    if n < 1:
        raise GraphError("need at least one sample")
    if seed < 0 or seed >= 1 << 64:
        raise GraphError("seed must fit in an unsigned 64-bit integer")
    k = sem.modulus
    value: dict[str, np.ndarray] = {}
    j = 0
    for var in sem.hidden_vars + sem.source_vars:
        value[var] = (_stream(seed, j, n) % k).astype(np.int64)
        j += 1
    if sem.input_vertex is not None:
        if set_w is None:
            value[sem.input_vertex] = (_stream(seed, j, n) % k).astype(np.int64)
        else:
            if not 0 <= set_w < k:
                raise GraphError(f"input value must lie in [0, {k})")
            value[sem.input_vertex] = np.full(n, set_w, dtype=np.int64)
    elif set_w is not None:
        raise GraphError("this coupling has no input vertex to set")
    for u in sem.eval_order:
        acc = np.zeros(n, dtype=np.int64)
        for sign, var in sem.assignments[u]:
            acc = (acc + sign * value[var]) % k
        value[u] = acc
    return {u: value[u] for u in sem.observed}


# ---------------------------------------------------------------------------
# Continuous variant


@dataclass
class ContinuousSpec:
    """Settings for :func:`continuous_sample`.

    ``quantiles`` maps vertices to quantile functions (vectorized,
    (0,1) → reals); unmapped vertices get the standard normal.  The
    target ``v`` is tied to ``w`` through a Gaussian copula with
    correlation ``rho``, or through ``conditional(x_w, u)`` when given.
    ``word_width`` is how many low word bits feed each uniform.
    """

    quantiles: Mapping[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    conditional: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    rho: float = 0.9
    word_width: int = 64


def continuous_sample(
    g: Admg,
    v: str,
    w: str,
    spec: ContinuousSpec | None = None,
    n: int = 1000,
    seed: int = 0,
    preference: str = "directed_first",
) -> dict[str, np.ndarray]:
    """Sample a continuous coupling of a dense pair.

    The discrete wiring carries whole 64-bit words by XOR (signs do not
    matter bitwise), which again telescopes to identical words at v and
    w.  Words map to uniforms at bin midpoints, (word + 1/2) / 2**width,
    then through each vertex's quantile function; only ``v`` swaps its
    word for the copula draw against ``w``'s uniform.
    """
    from scipy.special import ndtr, ndtri

    spec = spec if spec is not None else ContinuousSpec()
    if not 1 <= spec.word_width <= 64:
        raise GraphError("word_width must be between 1 and 64")
    if spec.conditional is None and not -1 < spec.rho < 1:
        raise GraphError("rho must lie strictly between -1 and 1")
    sem = build_coupling(g, v, w, 2, preference)

    words: dict[str, np.ndarray] = {}
    j = 0
    for var in sem.hidden_vars + sem.source_vars:
        words[var] = _stream(seed, j, n)
        j += 1
    if sem.input_vertex is not None:
        words[sem.input_vertex] = _stream(seed, j, n)
        j += 1
    fresh = _stream(seed, j, n)
    for u in sem.eval_order:
        acc = np.zeros(n, dtype=np.uint64)
        for _, var in sem.assignments[u]:
            acc = acc ^ words[var]
        words[u] = acc

    mask = np.uint64((1 << spec.word_width) - 1 if spec.word_width < 64 else (1 << 64) - 1)

    def unit(word: np.ndarray) -> np.ndarray:
        return ((word & mask).astype(np.float64) + 0.5) / float(1 << spec.word_width)

    def quant(name: str, u: np.ndarray) -> np.ndarray:
        f = spec.quantiles.get(name)
        return ndtri(u) if f is None else np.asarray(f(u), dtype=np.float64)

    out: dict[str, np.ndarray] = {}
    for name in sem.observed:
        if name != v:
            out[name] = quant(name, unit(words[name]))
    u_fresh = unit(fresh)
    if spec.conditional is not None:
        x_v = np.asarray(spec.conditional(out[w], u_fresh), dtype=np.float64)
        if x_v.shape != (n,):
            raise GraphError("conditional must return one value per sample")
        out[v] = x_v
    else:
        z = spec.rho * ndtri(unit(words[w])) + math.sqrt(1 - spec.rho**2) * ndtri(u_fresh)
        out[v] = quant(v, ndtr(z))
    return out
