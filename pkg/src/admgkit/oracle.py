"""Exact verification of coupling laws.

Everything here works with exact arithmetic (rationals or integers), so
a "pass" is a proof for the instance checked, not a statistical claim:

* :func:`exact_joint` tabulates the observed law of a coupling.
* :func:`verify_pair` checks the three properties the construction
  promises for a dense pair -- target equality, mutual independence,
  and uniform marginals.
* :func:`verify_parity_lemma` checks the spanning-tree parity identity
  that makes the wiring work, by brute enumeration plus an exact
  Walsh-Hadamard transform.
* :func:`verify_theorem` runs the full pipeline on one ordered pair and
  reports either a refusal (non-dense pair) or the verified law.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .coupling import CouplingSem, build_coupling, evaluate
from .fixing import DiscreteKernel
from .graph import Admg, GraphError
from .projection import NestedConstraintError

MAX_EXACT_ATOMS = 1 << 24
# Above this many vertices the mutual-independence sweep (every subset)
# is hopeless; the full-set factorization check still runs.
MAX_SUBSET_SEARCH = 16
MAX_PARITY_VERTICES = 20


def exact_joint(sem: CouplingSem) -> DiscreteKernel:
    """The exact law of the observed vertices, hidden inputs uniform.

    Enumerates every assignment of the hidden, source and input
    variables (refusing beyond 2**24 atoms), so probabilities come out
    as exact rationals.
    """
    k = sem.modulus
    free = list(sem.hidden_vars + sem.source_vars)
    m = len(free) + (1 if sem.input_vertex is not None else 0)
    if k**m > MAX_EXACT_ATOMS:
        raise GraphError("too many hidden assignments to enumerate exactly")
    width = k ** len(sem.observed)
    if width > MAX_EXACT_ATOMS:
        raise GraphError("too many observed assignments to tabulate exactly")
    atom = Fraction(1, k**m)
    row = [Fraction(0)] * width
    for combo in itertools.product(range(k), repeat=m):
        assign = dict(zip(free, combo))
        inp = combo[-1] if sem.input_vertex is not None else None
        out = evaluate(sem, assign, inp)
        idx = 0
        for u in sem.observed:
            idx = idx * k + out[u]
        row[idx] += atom
    return DiscreteKernel(tuple((u, k) for u in sem.observed), (), {(): tuple(row)})


@dataclass(frozen=True)
class IndependenceReport:
    """What :func:`verify_pair` found, plus the law it inspected."""

    equality_holds: bool
    independence_holds: bool
    uniform_marginals: bool
    failing_subset: tuple[str, ...] | None
    law: DiscreteKernel

    @property
    def all_ok(self) -> bool:
        return self.equality_holds and self.independence_holds and self.uniform_marginals


def verify_pair(p: DiscreteKernel, v: str, w: str) -> IndependenceReport:
    """Check the promised structure of a coupling law exactly.

    Three properties, each over the unconditional law ``p``:

    * every atom with positive probability has ``x_v == x_w``;
    * the variables other than ``w`` are mutually independent, i.e. the
      joint factorizes into its unary marginals everywhere;
    * each of those marginals is uniform.

    When independence fails and the search is feasible,
    ``failing_subset`` names the smallest subset (ties broken by
    variable order) whose marginal already fails to factorize.
    """
    if p.fixed_vars:
        raise GraphError("expected an unconditional law")
    names = p.random_names
    if v == w or v not in names or w not in names:
        raise GraphError(f"law does not cover the pair ({v!r}, {w!r})")
    cards = dict(p.random_vars)
    support = [(a, pr) for a, pr in p.atoms() if pr]

    equality = all(a[v] == a[w] for a, _ in support)

    others = tuple(x for x in names if x != w)

    def marginal(sub: Sequence[str]) -> dict[tuple[int, ...], Fraction]:
        out: dict[tuple[int, ...], Fraction] = {}
        for a, pr in support:
            key = tuple(a[x] for x in sub)
            out[key] = out.get(key, Fraction(0)) + pr
        return out

    singles = {x: marginal((x,)) for x in others}

    def factorizes(sub: Sequence[str]) -> bool:
        joint = marginal(sub)
        for vals in itertools.product(*(range(cards[x]) for x in sub)):
            rhs = Fraction(1)
            for x, val in zip(sub, vals):
                rhs *= singles[x].get((val,), Fraction(0))
            if joint.get(vals, Fraction(0)) != rhs:
                return False
        return True

    # Mutual independence is exactly full-set factorization: every
    # subset marginal of a product law is again a product.
    independence = factorizes(others) if len(others) >= 2 else True

    uniform = all(
        singles[x].get((val,), Fraction(0)) == Fraction(1, cards[x])
        for x in others
        for val in range(cards[x])
    )

    failing: tuple[str, ...] | None = None
    if not independence and len(others) <= MAX_SUBSET_SEARCH:
        for size in range(2, len(others) + 1):
            for sub in itertools.combinations(others, size):
                if not factorizes(sub):
                    failing = sub
                    break
            if failing is not None:
                break
    return IndependenceReport(equality, independence, uniform, failing, p)


@dataclass(frozen=True)
class ParityReport:
    """Outcome of :func:`verify_parity_lemma` for one spanning tree."""

    k: int
    full_sum_zero: bool
    proper_subsets_uniform: bool
    failing_subset: tuple[int, ...] | None

    @property
    def holds(self) -> bool:
        return self.full_sum_zero and self.proper_subsets_uniform


def verify_parity_lemma(k: int, tree: Iterable[tuple[int, int]]) -> ParityReport:
    """Brute-force the parity identity behind the hidden wiring.

    Vertices ``0..k-1`` carry the XOR of independent fair bits on their
    incident ``tree`` edges.  The identity: the vertex bits always sum
    to zero mod 2, while every proper nonempty subset of them is
    jointly uniform.  Equivalently, the (exact, integer) Walsh-Hadamard
    transform of the pattern counts is supported on the empty and the
    full index set only -- which is what this checks, after counting
    all ``2**(k-1)`` edge assignments.
    """
    if k < 2:
        raise GraphError("parity check needs at least two vertices")
    if k > MAX_PARITY_VERTICES:
        raise GraphError(f"refusing parity check beyond {MAX_PARITY_VERTICES} vertices")
    edges = [(int(x), int(y)) for x, y in tree]
    if len(edges) != k - 1:
        raise GraphError("a spanning tree on k vertices has k-1 edges")
    parent = list(range(k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for x, y in edges:
        if not (0 <= x < k and 0 <= y < k) or x == y:
            raise GraphError(f"bad tree edge ({x}, {y})")
        rx, ry = find(x), find(y)
        if rx == ry:
            raise GraphError("edges do not form a spanning tree")
        parent[rx] = ry

    m = k - 1
    assignments = np.arange(1 << m, dtype=np.uint32)
    patterns = np.zeros(1 << m, dtype=np.uint32)
    for j, (x, y) in enumerate(edges):
        bit = (assignments >> np.uint32(j)) & np.uint32(1)
        patterns ^= bit * np.uint32((1 << x) | (1 << y))
    counts = np.bincount(patterns, minlength=1 << k).astype(np.int64)

    # In-place butterfly; int64 is exact at this scale.
    n = 1 << k
    hat = counts
    half = 1
    while half < n:
        hat = hat.reshape(n // (2 * half), 2, half)
        hat = np.concatenate(
            (hat[:, 0, :] + hat[:, 1, :], hat[:, 0, :] - hat[:, 1, :]), axis=1
        ).reshape(-1)
        half *= 2

    full = n - 1
    full_ok = hat[full] == (1 << m)
    bad = [int(s) for s in np.nonzero(hat)[0] if s not in (0, full)]
    failing: tuple[int, ...] | None = None
    if bad:
        s = min(bad, key=lambda s: (bin(s).count("1"), s))
        failing = tuple(i for i in range(k) if (s >> i) & 1)
    return ParityReport(k, bool(full_ok), not bad, failing)


@dataclass(frozen=True)
class TheoremVerdict:
    """One pair, end to end: either a refusal or a verified law."""

    refused: bool
    reason: str | None
    report: IndependenceReport | None

    @property
    def passed(self) -> bool:
        return not self.refused and self.report is not None and self.report.all_ok


def verify_theorem(
    g: Admg,
    v: str,
    w: str,
    k: int = 2,
    preference: str = "directed_first",
) -> TheoremVerdict:
    """Build the coupling for ``(v, w)`` and verify its law exactly.

    A non-dense pair yields ``refused=True`` with the constructor's
    reason; any other failure propagates.
    """
    try:
        sem = build_coupling(g, v, w, k, preference)
    except NestedConstraintError as exc:
        return TheoremVerdict(True, str(exc), None)
    report = verify_pair(exact_joint(sem), v, w)
    return TheoremVerdict(False, None, report)
