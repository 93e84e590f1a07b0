import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import partial_perms, perms
from oracles import all_partial, hs_sq_matrix, pcompose
from soficlab.permcore import (
    DiagProjection,
    DimensionError,
    PartialPerm,
    Perm,
    adjoint,
    all_partial_perms,
    ball_count_bound,
    compose,
    conjugate,
    hamming_dist,
    hs_dist,
    hs_dist_sq,
    inverse_monoid_order,
    random_perm,
    rho_E,
    trace,
)


def pp(mapping, d):
    return PartialPerm.from_mapping(mapping, d)


def as_tuple(a):
    return tuple(None if y == -1 else int(y) for y in a.array)


class TestConstruction:
    def test_rejects_non_injective(self):
        with pytest.raises(ValueError):
            PartialPerm([0, 0, -1])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            pp({1: 5}, 4)

    def test_perm_must_be_total(self):
        with pytest.raises(ValueError):
            Perm([0, -1])

    def test_dimension_cap(self):
        with pytest.raises(DimensionError):
            PartialPerm.empty(0)

    def test_list_round_trip(self):
        a = pp({1: 3, 4: 1}, 4)
        assert a.to_list() == [3, None, None, 1]
        assert PartialPerm.from_list(a.to_list()) == a

    def test_cycles(self):
        p = Perm.from_cycles([(1, 3), (2, 4, 5)], 6)
        assert p.cycles() == [(1, 3), (2, 4, 5), (6,)]
        assert p.cycle_type() == (3, 2, 1)

    def test_immutable(self):
        a = Perm.identity(3)
        with pytest.raises(ValueError):
            a.array[0] = 2


class TestCompose:
    def test_identity_left(self):
        a = pp({1: 2, 3: 1}, 3)
        assert compose(Perm.identity(3), a) == a

    def test_empty(self):
        b = Perm.from_cycles([(1, 2, 3)], 3)
        assert compose(PartialPerm.empty(3), b) == PartialPerm.empty(3)

    def test_pointwise_example(self):
        a = pp({1: 2, 2: 3}, 4)
        b = pp({2: 1, 3: 4}, 4)
        assert compose(a, b) == pp({2: 2}, 4)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            compose(Perm.identity(2), Perm.identity(3))

    @given(st.integers(1, 8).flatmap(lambda d: st.tuples(partial_perms(d=d), partial_perms(d=d))))
    def test_matches_reference(self, ab):
        a, b = ab
        assert as_tuple(compose(a, b)) == pcompose(as_tuple(a), as_tuple(b))

    @given(st.integers(1, 10).flatmap(lambda d: st.tuples(partial_perms(d=d), partial_perms(d=d), partial_perms(d=d))))
    def test_associative(self, abc):
        a, b, c = abc
        assert compose(compose(a, b), c) == compose(a, compose(b, c))


class TestAdjoint:
    def test_identity(self):
        assert adjoint(Perm.identity(4)) == Perm.identity(4)

    def test_single(self):
        assert adjoint(pp({1: 3}, 3)) == pp({3: 1}, 3)

    def test_range_projection(self):
        a = pp({1: 3, 2: 1}, 4)
        assert compose(a, adjoint(a)) == pp({3: 3, 1: 1}, 4)

    @given(partial_perms())
    def test_involutive_and_regular(self, a):
        assert adjoint(adjoint(a)) == a
        assert compose(compose(a, adjoint(a)), a) == a
        assert trace(adjoint(a)) == trace(a)


class TestTraceAndDistances:
    def test_trace_examples(self):
        assert trace(Perm.identity(5)) == 1.0
        assert trace(Perm.from_cycles([(1, 2, 3, 4)], 4)) == 0.0
        assert trace(pp({1: 1, 2: 3}, 4)) == 0.25

    def test_hs_examples(self):
        t = Perm.from_cycles([(1, 2)], 4)
        assert hs_dist(t, t) == 0.0
        assert hs_dist_sq(Perm.identity(4), t) == 1.0
        assert hs_dist(Perm.identity(4), t) == 1.0
        assert hs_dist_sq(PartialPerm.empty(4), Perm.identity(4)) == 1.0

    def test_hamming_examples(self):
        assert hamming_dist(Perm.identity(6), Perm.identity(6)) == 0.0
        assert hamming_dist(Perm.identity(6), Perm.from_cycles([(1, 2, 3, 4, 5, 6)], 6)) == 1.0
        assert hamming_dist(Perm.identity(4), Perm.from_cycles([(1, 2)], 4)) == 0.5

    @given(st.integers(1, 8).flatmap(lambda d: st.tuples(partial_perms(d=d), partial_perms(d=d))))
    def test_hs_matches_matrix_trace(self, ab):
        a, b = ab
        assert math.isclose(hs_dist_sq(a, b), hs_sq_matrix(as_tuple(a), as_tuple(b)), abs_tol=1e-12)

    @given(st.integers(1, 16).flatmap(lambda d: st.tuples(partial_perms(d=d), partial_perms(d=d), partial_perms(d=d))))
    def test_metric(self, abc):
        a, b, c = abc
        assert hs_dist(a, b) == hs_dist(b, a)
        assert (hs_dist(a, b) == 0) == (a == b)
        assert hs_dist(a, c) <= hs_dist(a, b) + hs_dist(b, c) + 1e-12

    @given(st.integers(1, 16).flatmap(lambda d: st.tuples(perms(d=d), perms(d=d))))
    def test_hamming_is_half_hs_squared(self, st_):
        s, t = st_
        assert hamming_dist(s, t) == 0.5 * hs_dist_sq(s, t)

    def test_rho_E(self):
        s = {"g": Perm.identity(4), "h": Perm.identity(4)}
        t = {"g": Perm.from_cycles([(1, 2)], 4), "h": Perm.identity(4)}
        assert rho_E(s, s, ["g", "h"]) == 0.0
        assert rho_E(s, t, []) == 0.0
        assert rho_E(s, t, ["g", "h"]) == 1.0
        with pytest.raises(KeyError):
            rho_E(s, t, ["missing"])


class TestDiagProjection:
    def test_support_and_trace(self):
        p = DiagProjection(4, [1, 3])
        assert p.support == frozenset({1, 3})
        assert p.trace() == 0.5
        assert p.as_partial_perm() == pp({1: 1, 3: 3}, 4)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            DiagProjection(3, [4])


class TestCounting:
    def test_ball_bound_examples(self):
        assert ball_count_bound(10, 0.3) == 1
        assert ball_count_bound(10, 0.5) == 4500
        assert ball_count_bound(4, 1.0) == 256

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    def test_ball_bound_nonempty_centers(self, d):
        # the empty center is the only one whose open ball can exceed the bound
        P = all_partial_perms(d)
        dom = P != -1
        rank = dom.sum(axis=1)
        for eps in (0.2, 0.5, 1.0):
            bound = ball_count_bound(d, eps)
            for i in np.flatnonzero(rank > 0):
                agree = np.count_nonzero((P == P[i]) & dom, axis=1)
                size = np.count_nonzero((rank + rank[i] - 2 * agree) / d < eps * eps - 1e-12)
                assert size <= bound

    def test_ball_bound_empty_center_counterexample(self):
        # ball of radius 0.5 around the empty map at d=5: itself plus 25 rank-one maps
        assert ball_count_bound(5, 0.5) == 25
        nearby = [pp({a: b}, 5) for a in range(1, 6) for b in range(1, 6)]
        empty = PartialPerm.empty(5)
        assert all(hs_dist(t, empty) < 0.5 for t in nearby)
        assert len(nearby) + 1 == 26

    def test_inverse_monoid_order(self):
        # enumerated directly by the reference generator
        assert [inverse_monoid_order(d) for d in range(1, 5)] == [sum(1 for _ in all_partial(d)) for d in range(1, 5)]
        assert inverse_monoid_order(1) == 2
        assert inverse_monoid_order(2) == 7
        assert inverse_monoid_order(3) == 34

    def test_all_partial_perms_rows(self):
        rows = all_partial_perms(3)
        assert rows.shape == (34, 3)
        assert len({tuple(r) for r in rows}) == 34


class TestConjugateAndRandom:
    def test_identity_conjugator(self):
        a = pp({1: 2, 2: 4}, 4)
        assert conjugate(Perm.identity(4), a) == a

    @given(st.integers(1, 10).flatmap(lambda d: st.tuples(perms(d=d), perms(d=d), partial_perms(d=d))))
    def test_action_law_and_invariants(self, x):
        g, h, a = x
        assert conjugate(g, conjugate(h, a)) == conjugate(compose(g, h), a)
        assert trace(conjugate(g, a)) == trace(a)
        assert conjugate(g, a).rank() == a.rank()

    def test_conjugate_of_fpf_involution(self, rng):
        inv = Perm.from_cycles([(1, 2), (3, 4), (5, 6)], 6)
        for _ in range(20):
            c = conjugate(random_perm(6, rng), inv)
            assert c.cycle_type() == (2, 2, 2)

    def test_random_perm_determinism(self):
        a = random_perm(9, np.random.default_rng(4))
        b = random_perm(9, np.random.default_rng(4))
        assert a == b
        assert random_perm(1, np.random.default_rng(0)) == Perm.identity(1)

    def test_random_perm_uniform_chi2(self):
        from scipy.stats import chisquare

        rng = np.random.default_rng(7)
        counts: dict = {}
        for _ in range(100_000):
            key = tuple(random_perm(4, rng).array)
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 24
        assert chisquare(list(counts.values())).pvalue > 0.001
