"""Exact verification: joint laws, pair reports, parity lemma, full theorem runs."""

from __future__ import annotations

from fractions import Fraction

import pytest

import graphs as fx
from admgkit.coupling import CouplingSem, build_coupling
from admgkit.fixing import DiscreteKernel
from admgkit.graph import Admg, GraphError
from admgkit.oracle import (
    exact_joint,
    verify_pair,
    verify_parity_lemma,
    verify_theorem,
)
from oracles import od_parity_counts, pruefer_tree

F = Fraction


def law(names, atoms):
    """Unconditional binary law from {assignment tuple: probability}."""
    width = 2 ** len(names)
    row = [F(0)] * width
    for vals, pr in atoms.items():
        idx = 0
        for x in vals:
            idx = idx * 2 + x
        row[idx] = F(pr)
    return DiscreteKernel(tuple((u, 2) for u in names), (), {(): tuple(row)})


# ---------------------------------------------------------------------------
# exact_joint


def test_exact_joint_iv():
    sem = build_coupling(fx.iv(), "a", "c")
    p = exact_joint(sem)
    assert p.random_vars == (("a", 2), ("b", 2), ("c", 2))
    assert p.fixed_vars == ()
    # supported exactly on a == c, with b free: four atoms of 1/4
    assert p.table[()] == (F(1, 4), 0, F(1, 4), 0, 0, F(1, 4), 0, F(1, 4))


def test_exact_joint_is_a_probability_law():
    for make, v, w, k in [(fx.pair5, "v", "w", 2), (fx.gadget, "a", "d", 3)]:
        p = exact_joint(build_coupling(make(), v, w, k=k))
        total = sum(pr for _, pr in p.atoms())
        assert total == 1
        assert all(isinstance(pr, Fraction) for _, pr in p.atoms())


def test_exact_joint_refuses_huge_enumerations():
    tiny = Admg(("a",), frozenset(), frozenset())
    base = dict(
        canonical=tiny,
        source_vars=(),
        assignments={},
        eval_order=(),
        input_vertex=None,
        target_pair=("a", "a"),
        modulus=2,
        kept=frozenset(),
        case="directed_vw",
    )
    wide = CouplingSem(
        hidden_vars=tuple(f"_h{i}" for i in range(1, 26)), observed=("a",), **base
    )
    with pytest.raises(GraphError, match="too many hidden assignments"):
        exact_joint(wide)
    fat = CouplingSem(
        hidden_vars=(), observed=tuple(f"x{i}" for i in range(25)), **base
    )
    with pytest.raises(GraphError, match="too many observed assignments"):
        exact_joint(fat)


# ---------------------------------------------------------------------------
# verify_pair


@pytest.mark.parametrize(
    "make,v,w,k",
    [
        (fx.iv, "a", "c", 2),
        (fx.gadget, "a", "d", 2),
        (fx.gadget, "a", "d", 3),
        (fx.web6, "v", "w", 2),
        (fx.pair5, "v", "w", 2),
    ],
)
def test_verify_pair_passes_on_built_couplings(make, v, w, k):
    report = verify_pair(exact_joint(build_coupling(make(), v, w, k=k)), v, w)
    assert report.all_ok
    assert report.equality_holds
    assert report.independence_holds
    assert report.uniform_marginals
    assert report.failing_subset is None


def test_verify_pair_flags_unequal_targets():
    # fair coin pair: uniform and trivially independent, but never equal
    p = law(("a", "b"), {(0, 0): F(1, 4), (0, 1): F(1, 4), (1, 0): F(1, 4), (1, 1): F(1, 4)})
    report = verify_pair(p, "a", "b")
    assert not report.equality_holds
    assert report.independence_holds and report.uniform_marginals
    assert not report.all_ok


def test_verify_pair_flags_dependence_with_smallest_subset():
    p = law(("a", "b", "c"), {(0, 0, 0): F(1, 2), (1, 1, 1): F(1, 2)})
    report = verify_pair(p, "a", "c")
    assert report.equality_holds
    assert not report.independence_holds
    assert report.failing_subset == ("a", "b")
    assert report.uniform_marginals  # each marginal alone is still fair


def test_verify_pair_flags_skewed_marginals():
    p = law(("a", "b"), {(0, 0): F(3, 4), (1, 1): F(1, 4)})
    report = verify_pair(p, "a", "b")
    assert report.equality_holds
    assert not report.uniform_marginals
    assert not report.all_ok


def test_verify_pair_rejects_bad_inputs():
    p = law(("a", "b"), {(0, 0): F(1, 2), (1, 1): F(1, 2)})
    with pytest.raises(GraphError, match="does not cover the pair"):
        verify_pair(p, "a", "a")
    with pytest.raises(GraphError, match="does not cover the pair"):
        verify_pair(p, "a", "z")
    cond = DiscreteKernel(
        (("a", 2),), (("z", 2),), {(0,): (F(1), F(0)), (1,): (F(1), F(0))}
    )
    with pytest.raises(GraphError, match="unconditional law"):
        verify_pair(cond, "a", "a")


# ---------------------------------------------------------------------------
# verify_theorem


def test_verify_theorem_accepts_dense_pairs():
    for make, v, w, k in [(fx.iv, "a", "c", 2), (fx.gadget, "a", "d", 2), (fx.gadget, "a", "d", 3)]:
        verdict = verify_theorem(make(), v, w, k)
        assert verdict.passed
        assert not verdict.refused
        assert verdict.reason is None
        assert verdict.report is not None and verdict.report.all_ok


def test_verify_theorem_refuses_separated_pairs():
    verdict = verify_theorem(fx.nested5(), "a", "e")
    assert verdict.refused
    assert not verdict.passed
    assert verdict.report is None
    assert verdict.reason == (
        "a and e are not densely connected: a nested constraint separates them"
    )


# ---------------------------------------------------------------------------
# parity lemma


@pytest.mark.parametrize("k", range(2, 8))
def test_parity_lemma_on_paths_and_stars(k):
    path = [(i, i + 1) for i in range(k - 1)]
    star = [(0, i) for i in range(1, k)]
    for tree in (path, star):
        report = verify_parity_lemma(k, tree)
        assert report.holds
        assert report.k == k
        assert report.full_sum_zero and report.proper_subsets_uniform
        assert report.failing_subset is None


def test_parity_lemma_matches_direct_counting():
    k = 5
    for seq in [(0, 1, 2), (3, 3, 3), (1, 4, 2)]:
        tree = pruefer_tree(seq, k)
        assert verify_parity_lemma(k, tree).holds
        # full set: each even-parity pattern shows up exactly once
        full = od_parity_counts(k, tree, range(k))
        assert all(sum(pat) % 2 == 0 for pat in full)
        assert set(full.values()) == {1} and len(full) == 2 ** (k - 1)
        # proper subsets: jointly uniform
        for subset in [(0,), (1, 3), (0, 2, 4), (0, 1, 2, 3)]:
            counts = od_parity_counts(k, tree, subset)
            assert len(counts) == 2 ** len(subset)
            assert set(counts.values()) == {2 ** (k - 1 - len(subset))}


def test_parity_lemma_rejects_bad_trees():
    with pytest.raises(GraphError, match="at least two vertices"):
        verify_parity_lemma(1, [])
    with pytest.raises(GraphError, match="beyond 20 vertices"):
        verify_parity_lemma(21, [(i, i + 1) for i in range(20)])
    with pytest.raises(GraphError, match="k-1 edges"):
        verify_parity_lemma(3, [(0, 1)])
    with pytest.raises(GraphError, match=r"bad tree edge \(0, 3\)"):
        verify_parity_lemma(3, [(0, 3), (1, 2)])
    with pytest.raises(GraphError, match="bad tree edge"):
        verify_parity_lemma(3, [(1, 1), (0, 2)])
    with pytest.raises(GraphError, match="do not form a spanning tree"):
        verify_parity_lemma(3, [(0, 1), (0, 1)])
