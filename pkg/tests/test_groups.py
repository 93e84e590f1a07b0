import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from soficlab.groups import (
    AmalgamatedProduct,
    BallOverflowError,
    FiniteTable,
    FreeGroup,
    FreeProduct,
    GroupError,
    GroupSpecParseError,
    IntegerGroup,
    ball,
    ball_elements,
    builtin_group,
    cyclic,
    inverse,
    is_identity,
    multiply,
    normal_form,
    parse_group_text,
    symmetric,
    syllables,
)


class TestFiniteTable:
    def test_rejects_non_latin(self):
        with pytest.raises(GroupError):
            FiniteTable("bad", [[0, 1], [0, 1]])

    def test_rejects_non_associative(self):
        # a loop of order 5 that is a Latin square but not a group
        table = [
            [0, 1, 2, 3, 4],
            [1, 0, 3, 4, 2],
            [2, 4, 0, 1, 3],
            [3, 2, 4, 0, 1],
            [4, 3, 1, 2, 0],
        ]
        with pytest.raises(GroupError):
            FiniteTable("loop", table)

    def test_symmetric_group(self):
        S3 = symmetric(3)
        assert S3.order() == 6
        # not abelian
        assert any(S3.mul(a, b) != S3.mul(b, a) for a in S3.elements() for b in S3.elements())

    @given(st.integers(2, 24), st.lists(st.integers(-3, 3).filter(bool), max_size=12), st.lists(st.integers(-3, 3).filter(bool), max_size=12))
    def test_normal_form_soundness(self, n, u, v):
        G = cyclic(n)
        wu = G.word([(0, 1 if k > 0 else -1) for k in u for _ in range(abs(k))])
        wv = G.word([(0, 1 if k > 0 else -1) for k in v for _ in range(abs(k))])
        direct = sum(u) % n == sum(v) % n
        assert is_identity(multiply(wu, inverse(wv))) == direct
        assert (normal_form(wu) == normal_form(wv)) == direct

    def test_s4_cancellation(self):
        S4 = symmetric(4)
        assert S4.order() == 24
        for a, b in itertools.product(S4.elements(), repeat=2):
            assert S4.mul(S4.mul(a, b), S4.inv(b)) == a


class TestFreeAndInteger:
    def test_free_reduction(self):
        F2 = FreeGroup("F2", 2)
        assert is_identity(F2.word("a b b^-1 a^-1"))

    def test_integer_arithmetic(self):
        Z = IntegerGroup("Z")
        w = multiply(Z.word("g^3"), Z.word("g^-5"))
        assert w == Z.word("g^-2")
        assert str(w) == "g^-2"

    def test_identity_and_inverse(self):
        F2 = FreeGroup("F2", 2)
        w = F2.word("a b^2 a^-1")
        assert multiply(w, F2.word("e")) == normal_form(w)
        assert is_identity(multiply(w, inverse(w)))

    def test_mixing_owners(self):
        with pytest.raises(GroupError):
            multiply(FreeGroup("F2", 2).word("a"), IntegerGroup("Z").word("g"))

    def test_normal_form_idempotent(self):
        F2 = FreeGroup("F2", 2)
        w = F2.word("a a^-1 b a b^-1 b")
        assert normal_form(normal_form(w)) == normal_form(w)


class TestProducts:
    def test_z2_free_z2(self):
        G = builtin_group("z2*z2")
        s, t = G.generator_names
        assert is_identity(G.word(f"{s} {s}"))
        assert not is_identity(G.word(f"{s} {t} {s} {t} {s} {t}"))

    def test_syllables(self):
        G = FreeProduct("P", [cyclic(2, gen_name="s"), cyclic(3, gen_name="t")])
        assert syllables(G.word("e")) == []
        syl = syllables(G.word("s t s"))
        assert [fi for fi, _ in syl] == [0, 1, 0]
        assert len(syllables(G.word("t^2"))) == 1
        with pytest.raises(GroupError):
            syllables(cyclic(3).word("g"))

    def test_product_names_unique(self):
        G = builtin_group("z2*z2")
        assert len(set(G.generator_names)) == 2

    def test_amalgam_relation(self):
        A = builtin_group("z4*_{z2}z4")
        a, b = A.generator_names
        assert is_identity(A.word(f"{a}^2 {b}^-2"))
        assert not is_identity(A.word(f"{a} {b}^-1"))

    def test_amalgam_embeddings_respected(self):
        A = builtin_group("z4*_{z2}z4")
        for h in A.sub.elements():
            x = A.mul(A.embed(0, A.embeddings[0][h]), A.inv(A.embed(1, A.embeddings[1][h])))
            assert x == A.identity

    def test_amalgam_syllables_alternate(self):
        A = builtin_group("z4*_{z2}z4")
        a, b = A.generator_names
        syl = syllables(A.word(f"{a} {b} {a}^3 {b}"))
        factors = [fi for fi, _ in syl if fi is not None]
        assert all(x != y for x, y in zip(factors, factors[1:]))
        # concatenation of syllables reduces back to the word
        letters = []
        for fi, w in syl:
            if fi is None:
                x = A.embed_sub(A.sub.evaluate(w.letters))
            else:
                x = A.embed(fi, A.factors[fi].evaluate(w.letters))
            letters.append(x)
        acc = A.identity
        for x in letters:
            acc = A.mul(acc, x)
        assert acc == A.evaluate(A.word(f"{a} {b} {a}^3 {b}").letters)

    def test_amalgam_needs_homomorphism(self):
        with pytest.raises(GroupError):
            AmalgamatedProduct("X", cyclic(4), cyclic(4), cyclic(2), [0, 1], [0, 2])

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(1, 3)), max_size=10))
    def test_amalgam_normal_form_soundness(self, syls):
        A = builtin_group("z4*_{z2}z4")
        x = A.identity
        for fi, k in syls:
            x = A.mul(x, A.embed(fi, k))
        w = A.word_of(x)
        assert A.evaluate(w.letters) == x
        assert is_identity(multiply(w, inverse(w)))


class TestBall:
    def test_examples(self):
        z2 = cyclic(2)
        assert len(ball([z2.word("g")], 2)) == 2
        F2 = FreeGroup("F2", 2)
        assert len(ball([F2.word("a"), F2.word("b")], 2)) == 17
        assert len(ball([F2.word("a")], 0)) == 1

    def test_factorizations_evaluate(self):
        F2 = FreeGroup("F2", 2)
        for w, fac in ball([F2.word("a"), F2.word("b")], 3):
            acc = F2.identity
            for letter in fac:
                acc = F2.mul(acc, F2.element_of(letter))
            assert F2.element_of(w) == acc

    @given(st.integers(0, 4))
    def test_monotone_and_bounded(self, n):
        F2 = FreeGroup("F2", 2)
        gens = [F2.gen_element(0), F2.gen_element(1)]
        size = len(ball_elements(F2, gens, n).elements)
        assert size <= 5**n
        assert size <= len(ball_elements(F2, gens, n + 1).elements)

    def test_symmetric_closure(self):
        F2 = FreeGroup("F2", 2)
        els = set(ball_elements(F2, [F2.gen_element(0), F2.gen_element(1)], 3).elements)
        assert all(F2.inv(x) in els for x in els)

    def test_overflow(self):
        F3 = FreeGroup("F3", 3)
        with pytest.raises(BallOverflowError):
            ball_elements(F3, [F3.gen_element(i) for i in range(3)], 8, cap=1000)


class TestSpecText:
    TEXT = """
    # two cyclic groups and their products
    finite c2 table = [[0,1],[1,0]] identity = 0 names = [s]
    finite c4 table = [[0,1,2,3],[1,2,3,0],[2,3,0,1],[3,0,1,2]]
        identity = 0 gens = [1] names = [a]
    integer ZZ names = [t]
    free FF rank = 2 names = [x, y]
    freeproduct P = c2 * ZZ
    amalgam Q = c4 *_{c2} c4 with embed_left = [0, 2], embed_right = [0, 2]
    """

    def test_parse(self):
        gs = parse_group_text(self.TEXT)
        assert set(gs) == {"c2", "c4", "ZZ", "FF", "P", "Q"}
        assert gs["c4"].order() == 4
        assert gs["FF"].rank == 2
        Q = gs["Q"]
        assert is_identity(Q.word(" ".join([Q.generator_names[0]] * 2 + [Q.generator_names[1] + "^-2"])))

    def test_declaration_round_trip(self):
        gs = parse_group_text(self.TEXT)
        for g in gs.values():
            again = parse_group_text(g.declaration())[g.name]
            assert again == g

    def test_parse_errors(self):
        with pytest.raises(GroupSpecParseError):
            parse_group_text("finite bad table = [[0,1],[0,1]]")
        with pytest.raises(GroupSpecParseError):
            parse_group_text("freeproduct P = nosuch * z2")
        with pytest.raises(GroupSpecParseError):
            parse_group_text("wibble X")
