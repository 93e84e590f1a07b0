import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soficlab.construct import (
    amplify,
    bernoulli_model,
    phi_bridge,
    regular_model,
    shift_model,
    translation_model,
    trivial_action_model,
)
from soficlab.groups import FreeGroup, IntegerGroup, builtin_group, cyclic
from soficlab.permcore import PartialPerm, Perm, adjoint, compose, hs_dist, random_perm
from soficlab.verify import (
    ActionModel,
    BernoulliAction,
    FiniteAction,
    MissingImageError,
    SoficAssignment,
    adjoint_defect,
    ga_check,
    ha_check,
    multiplicative_pairs_exact,
    partial_isometry_recovery,
    sa_check,
)


def transposition(d, a, b):
    return Perm.from_cycles([(a, b)], d)


class TestAssignment:
    def test_identity_enforced(self):
        z2 = cyclic(2)
        with pytest.raises(ValueError):
            SoficAssignment(z2, 2, {z2.identity: transposition(2, 1, 2)}, [1], 1)

    def test_from_generators_fills_ball(self):
        F2 = FreeGroup("F2", 2)
        a, b = F2.gen_element(0), F2.gen_element(1)
        pa = Perm.from_cycles([(1, 2, 3)], 4)
        pb = transposition(4, 1, 4)
        s = SoficAssignment.from_generators(F2, [a, b], [pa, pb], 2)
        assert len(s.images) == 17
        assert s.image(F2.inv(a)) == pa.inverse()
        assert s.image(F2.mul(a, b)) == compose(pa, pb)

    def test_missing_image(self):
        z3 = cyclic(3)
        s = SoficAssignment(z3, 3, {}, [1], 1)
        with pytest.raises(MissingImageError):
            s.image(1)


class TestGA:
    def test_regular_z3(self):
        rep = ga_check(regular_model(cyclic(3)), n=2, delta=1e-9)
        assert (rep.max_mult_defect, rep.max_trace_defect) == (0.0, 0.0)
        assert rep.passed

    def test_shift_z(self):
        Z = IntegerGroup("Z")
        rep = ga_check(shift_model(Z, 10, 3), n=3, delta=0.05)
        assert (rep.max_mult_defect, rep.max_trace_defect) == (0.0, 0.0)

    def test_identity_image_fails_trace(self):
        z2 = cyclic(2)
        s = SoficAssignment.from_generators(z2, [1], [Perm.identity(4)], 2)
        rep = ga_check(s, n=2, delta=0.5)
        assert rep.max_trace_defect == 1.0
        assert not rep.passed

    def test_every_tuple_counted(self):
        # one stored image disagrees with the product of its factors
        z3 = cyclic(3)
        s = regular_model(z3, 2, 2)
        bad = s.with_images({2: Perm.identity(6)})
        rep = ga_check(bad, n=2, delta=0.1)
        assert rep.max_mult_defect == pytest.approx(math.sqrt(2))
        assert rep.worst_tuple in {("g", "g"), ("g^-1", "e"), ("e", "g^-1")}

    def test_json_fields(self):
        rep = ga_check(regular_model(cyclic(2)), n=2, delta=0.1)
        js = rep.to_json()
        assert set(js) >= {"max_mult_defect", "max_trace_defect", "worst_tuple", "per_word", "passed", "delta"}
        assert js["passed"] is True

    @given(st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_monotone_in_parameters(self, d, seed):
        rng = np.random.default_rng(seed)
        F2 = FreeGroup("F2", 2)
        gens = [F2.gen_element(0), F2.gen_element(1)]
        s = SoficAssignment.from_generators(F2, gens, [random_perm(d, rng), random_perm(d, rng)], 3)
        strong = ga_check(s, gens, 3, 0.9)
        weak_n = ga_check(s, gens, 2, 0.9)
        weak_F = ga_check(s, gens[:1], 3, 0.9)
        if strong.passed:
            assert weak_n.passed and weak_F.passed and ga_check(s, gens, 3, 1.2).passed

    @given(st.integers(2, 7), st.integers(0, 2**32 - 1))
    def test_strict_regime_forces_exactness(self, d, seed):
        rng = np.random.default_rng(seed)
        z3 = cyclic(3)
        s = SoficAssignment.from_generators(z3, [1], [random_perm(d, rng)], 2)
        delta = 0.999 * math.sqrt(2 / d)
        if ga_check(s, n=2, delta=delta).passed:
            assert multiplicative_pairs_exact(s)
            assert all(s.image(x).array.tolist() != list(range(d)) or x == 0 for x in s.images)


class TestSA:
    def test_trivial_action_matches_ga(self):
        s = regular_model(cyclic(3), 2, 3)
        s = s.with_images({2: compose(s.image(2), transposition(6, 1, 2))})
        ga = ga_check(s, n=3, delta=0.5)
        sa = sa_check(trivial_action_model(s), None, 3, 0.5)
        assert sa.max_mult_defect == pytest.approx(ga.max_mult_defect)
        assert sa.max_trace_defect == pytest.approx(ga.max_trace_defect)

    def test_translation_z2_zero(self):
        rep = sa_check(translation_model(cyclic(2), 1), None, 3, 0.01)
        assert (rep.max_mult_defect, rep.max_trace_defect) == (0.0, 0.0)

    def test_translation_z3_zero(self):
        ev = phi_bridge(translation_model(cyclic(3), 1))
        rep = sa_check(ev, None, 3, 0.01)
        assert rep.max_defect == 0.0

    def test_mislabeled_cells(self):
        t = translation_model(cyclic(2), 2)
        bad = ActionModel(t.base, [0, 0, 1, 1], t.action)
        rep = sa_check(bad, None, 4, 0.1)
        assert rep.max_trace_defect >= 0.25
        assert not rep.passed


class TestHA:
    def test_exact_translation(self):
        for G in (cyclic(2), cyclic(3), builtin_group("S3")):
            rep = ha_check(translation_model(G, 2), None, 3, 1e-9)
            assert rep.max_defect == 0.0

    def test_single_cell(self):
        rep = ha_check(trivial_action_model(regular_model(cyclic(3), 3)), None, 2, 1e-9)
        assert rep.components["measure"] == 0.0
        assert rep.components["equivariance"] == 0.0

    def test_mislabeled(self):
        t = translation_model(cyclic(2), 2)
        rep = ha_check(ActionModel(t.base, [0, 0, 1, 1], t.action), None, 2, 0.1)
        assert rep.components["measure"] == pytest.approx(0.5)
        assert rep.components["equivariance"] == pytest.approx(1.0)

    def test_degenerate_bernoulli(self):
        m = bernoulli_model(amplify(regular_model(cyclic(2)), 50), [1.0, 0.0], seed=3)
        rep = ha_check(m, None, 2, 1e-9)
        assert rep.components["measure"] == 0.0

    def test_bernoulli_large_d(self):
        m = bernoulli_model(amplify(regular_model(cyclic(2)), 500), [0.5, 0.5], seed=1)
        assert ha_check(m, None, 3, 0.1).passed

    def test_finite_action_validation(self):
        z2 = cyclic(2)
        with pytest.raises(ValueError):
            FiniteAction(z2, [[1, 0], [0, 1]], [0.5, 0.5], [0, 1])
        with pytest.raises(ValueError):
            BernoulliAction(z2, [0.2, 0.2])


class TestPerturbationBounds:
    def test_adjoint_exact(self):
        assert adjoint_defect(regular_model(cyclic(3), 2, 3)) == 0.0

    def test_adjoint_refuses_small_radius(self):
        with pytest.raises(ValueError):
            adjoint_defect(regular_model(cyclic(3), 2, 2))

    def test_adjoint_one_point_perturbation(self):
        s = regular_model(cyclic(4), 25, 3)
        inv = s.group.inv(1)
        p = s.image(inv)
        bumped = compose(p, transposition(100, 1, 2))
        t = s.with_images({inv: bumped})
        assert adjoint_defect(t) <= hs_dist(p, bumped) + 1e-12
        assert adjoint_defect(t) > 0

    def test_adjoint_bound_on_ga_models(self, rng):
        z2 = cyclic(2)
        for _ in range(30):
            s = SoficAssignment.from_generators(z2, [1], [random_perm(8, rng)], 3)
            rep = ga_check(s, n=3, delta=0.1)
            if rep.passed:
                assert adjoint_defect(s) <= 0.4

    def test_partial_isometry_examples(self):
        v = PartialPerm.from_mapping({1: 2, 3: 1}, 4)
        assert partial_isometry_recovery(v, adjoint(v), 1e-9)
        e = PartialPerm.empty(4)
        assert partial_isometry_recovery(e, e, 1e-9)
        assert not partial_isometry_recovery(Perm.identity(4), PartialPerm.empty(4), 0.5)
