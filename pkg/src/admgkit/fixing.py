"""Fixing operators for graphs and for discrete kernels.

Fixing a vertex ``r`` removes every edge with an arrowhead at ``r`` and
demotes ``r`` from random to context.  On the distribution side the same
operation divides a kernel by the conditional of ``r`` given its Markov
blanket.  Iterating graph fixing enumerates the reachable and intrinsic
vertex sets, and running both sides together yields the district
factorization test in :func:`check_nested_markov`.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .graph import (
    Admg,
    GraphError,
    bidirected_connected,
    descendants,
    district,
    districts,
    markov_blanket,
)

# Guard for the exponential set enumerations.
MAX_ENUMERATION_VERTICES = 14

Assignment = tuple[int, ...]


def is_fixable(g: Admg, r: str) -> bool:
    """True when ``r``'s district meets its descendants only at ``r`` itself."""
    if not g.is_random(r):
        raise GraphError(f"cannot fix {r!r}: not a random vertex")
    return district(g, r) & descendants(g, r) == {r}


def _fix_one(g: Admg, r: str) -> Admg:
    directed = frozenset(e for e in g.directed if e[1] != r)
    bidirected = frozenset(e for e in g.bidirected if r not in e)
    return Admg(g.vertices, directed, bidirected, g.fixed | {r})


def fix_graph(g: Admg, targets: Iterable[str] | str) -> Admg:
    """Fix ``targets``, a single vertex, an ordered sequence, or a set.

    A list or tuple is fixed in the given order and every step must be
    fixable.  For an unordered set a valid order is searched greedily;
    any greedy order works because fixability of the remaining targets
    is preserved by each fix.
    """
    if isinstance(targets, str):
        targets = [targets]
    if isinstance(targets, (set, frozenset)):
        remaining = set(targets)
        cur = g
        while remaining:
            pick = next((v for v in cur.sort(remaining) if is_fixable(cur, v)), None)
            if pick is None:
                raise GraphError(
                    f"no valid fixing order for {{{', '.join(sorted(remaining))}}}"
                )
            cur = _fix_one(cur, pick)
            remaining.discard(pick)
        return cur
    cur = g
    for r in targets:
        if not is_fixable(cur, r):
            raise GraphError(f"{r!r} is not fixable at this step")
        cur = _fix_one(cur, r)
    return cur


def reachable_sets(g: Admg) -> set[frozenset[str]]:
    """All non-empty vertex sets reachable from ``g`` by iterated fixing.

    The full random set counts as reachable (empty fixing sequence); the
    empty set does not.  Memoized on the surviving random set, which is
    sound because fixing is order-invariant on the graph side.
    """
    if len(g.random) > MAX_ENUMERATION_VERTICES:
        raise GraphError(
            f"refusing to enumerate reachable sets over {len(g.random)} vertices"
            f" (limit {MAX_ENUMERATION_VERTICES})"
        )
    stack = [g]
    seen = {frozenset(g.random)}
    out: set[frozenset[str]] = set()
    while stack:
        cur = stack.pop()
        live = frozenset(cur.random)
        if live:
            out.add(live)
        for r in live:
            if not is_fixable(cur, r):
                continue
            nxt = _fix_one(cur, r)
            key = frozenset(nxt.random)
            if key and key not in seen:
                seen.add(key)
                stack.append(nxt)
    return out


def intrinsic_sets(g: Admg) -> set[frozenset[str]]:
    """Reachable sets that are bidirected-connected (in the original graph).

    Edges inside a surviving set are never deleted by fixing vertices
    outside it, so connectivity may be read off ``g`` directly.
    """
    return {s for s in reachable_sets(g) if bidirected_connected(g, s)}


# ---------------------------------------------------------------------------
# Discrete kernels


def _mixed_radix(cards: Sequence[int]) -> Iterator[Assignment]:
    return itertools.product(*(range(c) for c in cards))


@dataclass
class DiscreteKernel:
    """A conditional probability table q(X_random | X_fixed).

    ``table`` maps each full context assignment (tuple ordered like
    ``fixed_vars``) to a row of Fractions over the joint random
    assignments, row-major in ``random_vars`` order.  Rows sum to 1, or
    to 0 for contexts carrying no mass.
    """

    random_vars: tuple[tuple[str, int], ...]
    fixed_vars: tuple[tuple[str, int], ...]
    table: dict[Assignment, tuple[Fraction, ...]]
    validate: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        names = [n for n, _ in self.random_vars] + [n for n, _ in self.fixed_vars]
        if len(set(names)) != len(names):
            raise GraphError("kernel variable names must be distinct")
        for name, card in self.random_vars + self.fixed_vars:
            if card < 1:
                raise GraphError(f"variable {name!r} has cardinality {card}")
        width = 1
        for _, card in self.random_vars:
            width *= card
        contexts = set(_mixed_radix([c for _, c in self.fixed_vars]))
        if set(self.table) != contexts:
            raise GraphError("kernel table must cover every context exactly once")
        for ctx, row in self.table.items():
            if len(row) != width:
                raise GraphError(f"row for context {ctx} has wrong width")
            if any(p < 0 for p in row):
                raise GraphError(f"negative probability in context {ctx}")
            if self.validate:
                total = sum(row)
                if total != 0 and total != 1:
                    raise GraphError(
                        f"row for context {ctx} sums to {total}, expected 0 or 1"
                    )

    # -- naming helpers ----------------------------------------------------

    @property
    def random_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.random_vars)

    @property
    def fixed_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.fixed_vars)

    def card(self, name: str) -> int:
        for n, c in self.random_vars + self.fixed_vars:
            if n == name:
                return c
        raise GraphError(f"unknown kernel variable {name!r}")

    # -- lookup ------------------------------------------------------------

    def _rank(self, values: Assignment) -> int:
        idx = 0
        for (_, card), v in zip(self.random_vars, values):
            idx = idx * card + v
        return idx

    def prob(self, assignment: Mapping[str, int]) -> Fraction:
        """Probability of a full assignment over random and fixed names."""
        ctx = tuple(assignment[n] for n in self.fixed_names)
        vals = tuple(assignment[n] for n in self.random_names)
        return self.table[ctx][self._rank(vals)]

    def atoms(self) -> Iterator[tuple[dict[str, int], Fraction]]:
        """Iterate (assignment dict, probability) over all atoms."""
        rcards = [c for _, c in self.random_vars]
        for ctx, row in self.table.items():
            base = dict(zip(self.fixed_names, ctx))
            for vals, p in zip(_mixed_radix(rcards), row):
                yield {**base, **dict(zip(self.random_names, vals))}, p


def uniform_context_kernel(
    random_vars: Sequence[tuple[str, int]],
    fixed_vars: Sequence[tuple[str, int]] = (),
) -> DiscreteKernel:
    """All-zero-width convenience: kernel with a single uniform row per context."""
    rv = tuple(random_vars)
    fv = tuple(fixed_vars)
    width = 1
    for _, c in rv:
        width *= c
    row = tuple(Fraction(1, width) for _ in range(width))
    table = {ctx: row for ctx in _mixed_radix([c for _, c in fv])}
    return DiscreteKernel(rv, fv, table)


def _marginal(
    kernel_vars: Sequence[tuple[str, int]],
    rows: Mapping[Assignment, tuple[Fraction, ...]],
    keep: Sequence[str],
) -> dict[Assignment, dict[Assignment, Fraction]]:
    """Per context: map from `keep`-assignments to their summed mass."""
    names = [n for n, _ in kernel_vars]
    cards = [c for _, c in kernel_vars]
    keep_pos = [names.index(k) for k in keep]
    out: dict[Assignment, dict[Assignment, Fraction]] = {}
    for ctx, row in rows.items():
        acc: dict[Assignment, Fraction] = {}
        for vals, p in zip(_mixed_radix(cards), row):
            if p == 0:
                continue
            key = tuple(vals[i] for i in keep_pos)
            acc[key] = acc.get(key, Fraction(0)) + p
        out[ctx] = acc
    return out


def _fix_table(
    random_vars: tuple[tuple[str, int], ...],
    fixed_vars: tuple[tuple[str, int], ...],
    rows: Mapping[Assignment, tuple[Fraction, ...]],
    g: Admg,
    r: str,
) -> tuple[
    tuple[tuple[str, int], ...],
    tuple[tuple[str, int], ...],
    dict[Assignment, tuple[Fraction, ...]],
]:
    """One fixing step on a raw table; no row-sum validation.

    The divisor is the conditional of ``r`` given its Markov blanket,
    computed from the table itself by marginalization inside each
    context.  0/0 is taken to be 0; a positive numerator over a zero
    divisor is impossible for true marginals and raises defensively.
    """
    names = [n for n, _ in random_vars]
    if r not in names:
        raise GraphError(f"{r!r} is not a random variable of the kernel")
    blanket = [v for v in markov_blanket(g, r) if g.is_random(v)]
    r_pos = names.index(r)
    r_card = random_vars[r_pos][1]
    rm = [n for n in names if n != r]

    num = _marginal(random_vars, rows, [r] + blanket)
    den = _marginal(random_vars, rows, blanket)

    new_random = tuple(v for v in random_vars if v[0] != r)
    new_fixed = fixed_vars + ((r, r_card),)
    cards = [c for _, c in random_vars]
    blanket_pos = [names.index(b) for b in blanket]
    keep_pos = [i for i, n in enumerate(names) if n != r]

    out: dict[Assignment, tuple[Fraction, ...]] = {}
    width = 1
    for _, c in new_random:
        width *= c
    for ctx, row in rows.items():
        acc: dict[int, list[Fraction]] = {v: [Fraction(0)] * width for v in range(r_card)}
        for vals, p in zip(_mixed_radix(cards), row):
            rv = vals[r_pos]
            if p == 0:
                continue
            top = num[ctx].get((rv,) + tuple(vals[i] for i in blanket_pos), Fraction(0))
            if top == 0:
                raise GraphError("positive mass over a zero conditional")
            bot = den[ctx].get(tuple(vals[i] for i in blanket_pos), Fraction(0))
            idx = 0
            for i in keep_pos:
                idx = idx * cards[i] + vals[i]
            acc[rv][idx] = p * bot / top
        for rv in range(r_card):
            out[ctx + (rv,)] = tuple(acc[rv])
    return new_random, new_fixed, out


def kernel_fix(q: DiscreteKernel, g: Admg, r: str) -> DiscreteKernel:
    """Fix ``r`` in kernel ``q`` relative to graph ``g``.

    Requires ``r`` to be graphically fixable and the kernel's variables
    to match the graph's random and fixed vertices.  The result is a
    kernel over the remaining random variables with ``r`` appended to
    the context; rows keep exact rational arithmetic throughout.
    """
    if set(q.random_names) != set(g.random):
        raise GraphError("kernel random variables do not match the graph")
    if set(q.fixed_names) != set(g.fixed):
        raise GraphError("kernel context variables do not match the graph")
    if not is_fixable(g, r):
        raise GraphError(f"{r!r} is not fixable in this graph")
    rv, fv, rows = _fix_table(q.random_vars, q.fixed_vars, q.table, g, r)
    return DiscreteKernel(rv, fv, rows)


# ---------------------------------------------------------------------------
# Nested factorization check


@dataclass(frozen=True)
class NestedReport:
    """Outcome of :func:`check_nested_markov`.

    ``violations`` holds one entry per district of each failing
    reachable set, as (reachable set, district, max deviation); the
    deviation is shared across the districts of one set because the
    comparison is between the set's kernel and the full product.
    """

    reachable_sets_checked: int
    violations: tuple[tuple[frozenset[str], frozenset[str], Fraction], ...]

    @property
    def holds(self) -> bool:
        return not self.violations


def _fix_to(
    g: Admg,
    p: DiscreteKernel,
    survivors: frozenset[str],
    memo: dict[frozenset[str], tuple[Admg, tuple, tuple, dict]],
) -> tuple[Admg, tuple, tuple, dict]:
    """Fix everything outside ``survivors``, reusing prior results.

    Walks greedily, memoizing each intermediate surviving set; kernels
    are carried as raw tables because division can subnormalize rows
    when the distribution is not in the model — exactly the situation
    the caller is trying to detect.
    """
    key = frozenset(g.random)
    state = memo.get(key)
    if state is None:
        state = (g, p.random_vars, p.fixed_vars, p.table)
        memo[key] = state
    while True:
        cur_g, rv, fv, rows = state
        live = frozenset(cur_g.random)
        if live == survivors:
            return state
        pick = next(
            (v for v in cur_g.sort(live - survivors) if is_fixable(cur_g, v)), None
        )
        if pick is None:
            raise GraphError(f"{set(survivors)} is not reachable")
        nxt_key = live - {pick}
        if nxt_key in memo:
            state = memo[nxt_key]
            continue
        nxt_g = _fix_one(cur_g, pick)
        nrv, nfv, nrows = _fix_table(rv, fv, rows, cur_g, pick)
        state = (nxt_g, nrv, nfv, nrows)
        memo[nxt_key] = state


def check_nested_markov(
    p: DiscreteKernel,
    g: Admg,
    tolerance: Fraction | float | None = None,
) -> NestedReport:
    """Test the district factorization of every reachable set of ``g``.

    For each reachable R the kernel obtained by fixing V∖R is compared
    against the product of the kernels of the districts of the
    resulting graph, pointwise over full assignments that carry mass on
    the left side.  ``tolerance`` of None demands exact equality;
    otherwise the max absolute deviation must stay within it.
    """
    if g.fixed:
        raise GraphError("nested check expects a graph without context vertices")
    if q_mismatch := (set(p.random_names) ^ set(g.random)):
        raise GraphError(f"distribution variables do not match graph: {q_mismatch}")
    if p.fixed_vars:
        raise GraphError("expected an unconditional distribution")
    tol = None if tolerance is None else Fraction(tolerance)
    order = {v: i for i, v in enumerate(g.vertices)}
    cards = {n: c for n, c in p.random_vars}

    memo: dict[frozenset[str], tuple[Admg, tuple, tuple, dict]] = {}
    violations: list[tuple[frozenset[str], frozenset[str], Fraction]] = []
    sets = sorted(reachable_sets(g), key=lambda s: sorted(order[v] for v in s))
    for reach in sets:
        sub_g, rv, fv, rows = _fix_to(g, p, reach, memo)
        parts = districts(sub_g)
        if len(parts) <= 1:
            continue
        factors = [_fix_to(g, p, frozenset(d), memo) for d in parts]
        max_dev = Fraction(0)
        names = list(g.random)
        fnames_l = [n for n, _ in fv]
        rnames_l = [n for n, _ in rv]
        for vals in _mixed_radix([cards[n] for n in names]):
            at = dict(zip(names, vals))
            ctx = tuple(at[n] for n in fnames_l)
            idx = 0
            for n in rnames_l:
                idx = idx * cards[n] + at[n]
            lhs = rows[ctx][idx]
            if lhs == 0:
                continue
            rhs = Fraction(1)
            for _, frv, ffv, frows in factors:
                fctx = tuple(at[n] for n, _ in ffv)
                fidx = 0
                for n, c in frv:
                    fidx = fidx * c + at[n]
                rhs *= frows[fctx][fidx]
            dev = abs(lhs - rhs)
            if dev > max_dev:
                max_dev = dev
        failed = max_dev > 0 if tol is None else max_dev > tol
        if failed:
            for d in parts:
                violations.append((reach, frozenset(d), max_dev))
    return NestedReport(len(sets), tuple(violations))


# ---------------------------------------------------------------------------
# Distribution CSV


def read_distribution_csv(text: str) -> DiscreteKernel:
    """Parse a distribution table: variable columns plus a final ``p``.

    Values are nonnegative integers; cardinalities are inferred as
    max+1 per column.  Probabilities are rationals (``1/8``) or decimal
    strings; omitted assignments get probability zero; the total must
    be exactly 1.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise GraphError("empty distribution table") from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[-1] != "p":
        raise GraphError("distribution header must be variable names then 'p'")
    names = header[:-1]
    if len(set(names)) != len(names):
        raise GraphError("duplicate variable column")
    entries: dict[Assignment, Fraction] = {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and not rec[0].strip()):
            continue
        if len(rec) != len(header):
            raise GraphError(f"row {lineno}: expected {len(header)} fields")
        try:
            vals = tuple(int(x) for x in rec[:-1])
        except ValueError:
            raise GraphError(f"row {lineno}: variable values must be integers") from None
        if any(v < 0 for v in vals):
            raise GraphError(f"row {lineno}: negative value")
        try:
            prob = Fraction(rec[-1].strip())
        except (ValueError, ZeroDivisionError):
            raise GraphError(f"row {lineno}: bad probability {rec[-1]!r}") from None
        if prob < 0:
            raise GraphError(f"row {lineno}: negative probability")
        if vals in entries:
            raise GraphError(f"row {lineno}: duplicate assignment")
        entries[vals] = prob
    if not entries:
        raise GraphError("distribution table has no rows")
    total = sum(entries.values())
    if total != 1:
        raise GraphError(f"probabilities sum to {total}, expected 1")
    cards = [max(v[i] for v in entries) + 1 for i in range(len(names))]
    width = 1
    for c in cards:
        width *= c
    row = [Fraction(0)] * width
    for vals, prob in entries.items():
        idx = 0
        for v, c in zip(vals, cards):
            idx = idx * c + v
        row[idx] = prob
    rv = tuple(zip(names, cards))
    return DiscreteKernel(rv, (), {(): tuple(row)})


def write_distribution_csv(p: DiscreteKernel) -> str:
    """Render an unconditional distribution in the CSV format above."""
    if p.fixed_vars:
        raise GraphError("can only serialize unconditional distributions")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(p.random_names) + ["p"])
    cards = [c for _, c in p.random_vars]
    for vals, prob in zip(_mixed_radix(cards), p.table[()]):
        if prob == 0:
            continue
        writer.writerow([*vals, f"{prob.numerator}/{prob.denominator}"])
    return buf.getvalue()
