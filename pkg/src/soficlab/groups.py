"""Groups with decidable word problem, their words, normal forms and balls.

Every group exposes an element-level interface (hashable canonical
elements, ``mul``, ``inv``, ``letters_of``) that the rest of the package
works with, and a word-level interface (:class:`Word`) for users.

Supported kinds: finite Cayley tables, the integers, free groups, free
products and amalgamated free products over a finite common subgroup.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

Letter = tuple[int, int]
Element = Hashable

BALL_CAP = 10**6


class GroupError(ValueError):
    pass


class GroupSpecParseError(GroupError):
    pass


class BallOverflowError(RuntimeError):
    pass


class Group:
    """Base class. Subclasses define the element operations."""

    kind = "abstract"

    def __init__(self, name: str, generator_names: Sequence[str]):
        self.name = name
        self.generator_names = tuple(generator_names)
        if len(set(self.generator_names)) != len(self.generator_names):
            raise GroupError(f"duplicate generator names in {name}: {self.generator_names}")
        self._name_index = {g: i for i, g in enumerate(self.generator_names)}

    # element interface
    @property
    def identity(self) -> Element:
        raise NotImplementedError

    def mul(self, a: Element, b: Element) -> Element:
        raise NotImplementedError

    def inv(self, a: Element) -> Element:
        raise NotImplementedError

    def gen_element(self, i: int) -> Element:
        raise NotImplementedError

    def letters_of(self, x: Element) -> tuple[Letter, ...]:
        """Canonical letter word representing the element."""
        raise NotImplementedError

    def order(self) -> int | None:
        return None

    def elements(self) -> list[Element]:
        raise GroupError(f"{self.name} is infinite")

    def _key(self) -> tuple:
        raise NotImplementedError

    def declaration(self) -> str:
        """Group-spec text defining this group (dependencies first)."""
        seen: dict[str, str] = {}
        self._collect_decls(seen)
        return "\n".join(seen.values()) + "\n"

    def _collect_decls(self, seen: dict[str, str]) -> None:
        raise NotImplementedError

    # derived helpers
    @property
    def rank(self) -> int:
        return len(self.generator_names)

    def letter_element(self, letter: Letter) -> Element:
        g = self.gen_element(letter[0])
        return g if letter[1] > 0 else self.inv(g)

    def evaluate(self, letters: Iterable[Letter]) -> Element:
        x = self.identity
        for letter in letters:
            x = self.mul(x, self.letter_element(letter))
        return x

    def is_identity_element(self, x: Element) -> bool:
        return x == self.identity

    def power(self, x: Element, k: int) -> Element:
        if k < 0:
            x, k = self.inv(x), -k
        out = self.identity
        for _ in range(k):
            out = self.mul(out, x)
        return out

    def format_element(self, x: Element) -> str:
        return format_letters(self.letters_of(x), self.generator_names)

    def parse_element(self, text: str) -> Element:
        return self.evaluate(parse_letters(text, self._name_index))

    def generator_index(self, name: str) -> int:
        try:
            return self._name_index[name]
        except KeyError:
            raise GroupError(f"unknown generator {name!r} in {self.name}") from None

    # word interface
    def word(self, spec: str | Sequence[Letter] | "Word") -> "Word":
        if isinstance(spec, Word):
            self._own(spec)
            return spec
        if isinstance(spec, str):
            letters = parse_letters(spec, self._name_index)
        else:
            letters = tuple((int(i), 1 if s > 0 else -1) for i, s in spec)
            for i, _ in letters:
                if not 0 <= i < self.rank:
                    raise GroupError(f"generator index {i} out of range for {self.name}")
        return Word(self, tuple(letters))

    def word_of(self, x: Element) -> "Word":
        return Word(self, self.letters_of(x))

    def element_of(self, w: "Word") -> Element:
        self._own(w)
        return self.evaluate(w.letters)

    def generators(self) -> list["Word"]:
        return [Word(self, ((i, 1),)) for i in range(self.rank)]

    def _own(self, w: "Word") -> None:
        if w.owner != self:
            raise GroupError(f"word belongs to {w.owner.name}, not {self.name}")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Group) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


@dataclass(frozen=True)
class Word:
    owner: Group
    letters: tuple[Letter, ...]

    def __str__(self) -> str:
        return format_letters(self.letters, self.owner.generator_names)

    def __mul__(self, other: "Word") -> "Word":
        return multiply(self, other)


def format_letters(letters: Sequence[Letter], names: Sequence[str]) -> str:
    if not letters:
        return "e"
    out = []
    i = 0
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        g, s = letters[i]
        k = (j - i) * s
        out.append(names[g] if k == 1 else f"{names[g]}^{k}")
        i = j
    return " ".join(out)


_TOKEN = re.compile(r"([^\s^*·()]+)(?:\^\(?(-?\d+)\)?)?")


def parse_letters(text: str, name_index: dict[str, int]) -> tuple[Letter, ...]:
    letters: list[Letter] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        if text[pos] in " \t*·":
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise GroupError(f"cannot parse word {text!r} at position {pos}")
        name, exp = m.group(1), m.group(2)
        pos = m.end()
        if name in ("e", "1") and name not in name_index:
            continue
        if name not in name_index:
            raise GroupError(f"unknown generator {name!r}")
        k = int(exp) if exp is not None else 1
        letters.extend([(name_index[name], 1 if k > 0 else -1)] * abs(k))
    return tuple(letters)


# word-level operations


def normal_form(w: Word) -> Word:
    g = w.owner
    return g.word_of(g.evaluate(w.letters))


def _same_owner(u: Word, v: Word) -> Group:
    if u.owner != v.owner:
        raise GroupError(f"cannot mix words of {u.owner.name} and {v.owner.name}")
    return u.owner


def multiply(u: Word, v: Word) -> Word:
    g = _same_owner(u, v)
    return g.word_of(g.mul(g.evaluate(u.letters), g.evaluate(v.letters)))


def inverse(w: Word) -> Word:
    g = w.owner
    return g.word_of(g.inv(g.evaluate(w.letters)))


def is_identity(w: Word) -> bool:
    g = w.owner
    return g.evaluate(w.letters) == g.identity


def syllables(w: Word) -> list[tuple[int | None, Word]]:
    """Alternating factor syllables of a free or amalgamated product word.

    For amalgamated products a leading subgroup element, if present, is
    reported with factor index None and a word in the subgroup.
    """
    g = w.owner
    if not isinstance(g, (FreeProduct, AmalgamatedProduct)):
        raise GroupError(f"syllables need a product group, got {g.kind}")
    return g.syllables_of(g.evaluate(w.letters))


# finite groups


class FiniteTable(Group):
    kind = "finite"

    def __init__(
        self,
        name: str,
        table: Sequence[Sequence[int]],
        identity: int | None = None,
        gens: Sequence[int] | None = None,
        names: Sequence[str] | None = None,
    ):
        T = np.array(table, dtype=np.int64)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
            raise GroupError(f"{name}: Cayley table must be a non-empty square")
        n = T.shape[0]
        if T.min() < 0 or T.max() >= n:
            raise GroupError(f"{name}: table entries out of range")
        ar = np.arange(n)
        for axis in (0, 1):
            if not np.all(np.sort(T, axis=axis) == (ar[:, None] if axis == 0 else ar[None, :])):
                raise GroupError(f"{name}: table is not a Latin square")
        if identity is None:
            cands = [e for e in range(n) if np.array_equal(T[e], ar) and np.array_equal(T[:, e], ar)]
            if not cands:
                raise GroupError(f"{name}: no identity element")
            identity = cands[0]
        elif not (np.array_equal(T[identity], ar) and np.array_equal(T[:, identity], ar)):
            raise GroupError(f"{name}: element {identity} is not an identity")
        if n <= 64:
            ok = np.array_equal(T[T], T[:, T])
        else:
            rng = np.random.default_rng(0)
            a, b, c = rng.integers(0, n, size=(3, 100_000))
            ok = np.array_equal(T[T[a, b], c], T[a, T[b, c]])
        if not ok:
            raise GroupError(f"{name}: table is not associative")
        self.table = T
        self.table.setflags(write=False)
        self._identity = int(identity)
        self._inv = [int(np.flatnonzero(T[a] == identity)[0]) for a in range(n)]
        if gens is None:
            gens = self._greedy_generators()
        self.gens = tuple(int(x) for x in gens)
        if any(not 0 <= x < n for x in self.gens):
            raise GroupError(f"{name}: generator index out of range")
        if names is None:
            names = ["g"] if len(self.gens) == 1 else [f"g{x}" for x in self.gens]
        if len(names) != len(self.gens):
            raise GroupError(f"{name}: {len(names)} names for {len(self.gens)} generators")
        super().__init__(name, names)
        self._words = self._canonical_words()
        if len(self._words) != n:
            raise GroupError(f"{name}: generators do not generate the group")

    def _greedy_generators(self) -> list[int]:
        n = self.table.shape[0]
        gens: list[int] = []
        reached = {self._identity}
        for x in range(n):
            if len(reached) == n:
                break
            if x in reached:
                continue
            gens.append(x)
            frontier = list(reached)
            while frontier:
                nxt = []
                for y in frontier:
                    for g in gens:
                        z = int(self.table[y, g])
                        if z not in reached:
                            reached.add(z)
                            nxt.append(z)
                frontier = nxt
        return gens

    def _canonical_words(self) -> dict[int, tuple[Letter, ...]]:
        words = {self._identity: ()}
        queue = deque([self._identity])
        letters = [(i, s) for i in range(len(self.gens)) for s in (1, -1)]
        while queue:
            x = queue.popleft()
            for letter in letters:
                y = self.mul(x, self.letter_element(letter))
                if y not in words:
                    words[y] = words[x] + (letter,)
                    queue.append(y)
        return words

    @property
    def identity(self) -> int:
        return self._identity

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return self._inv[a]

    def gen_element(self, i: int) -> int:
        return self.gens[i]

    def letters_of(self, x: int) -> tuple[Letter, ...]:
        return self._words[x]

    def order(self) -> int:
        return int(self.table.shape[0])

    def elements(self) -> list[int]:
        return list(range(self.order()))

    def _key(self) -> tuple:
        return ("finite", self.name, self.table.tobytes(), self._identity, self.gens, self.generator_names)

    def _collect_decls(self, seen: dict[str, str]) -> None:
        if self.name in seen:
            return
        tbl = json.dumps(self.table.tolist(), separators=(",", ":"))
        seen[self.name] = (
            f"finite {self.name} table = {tbl} identity = {self._identity} "
            f"gens = [{', '.join(map(str, self.gens))}] names = [{', '.join(self.generator_names)}]"
        )


def cyclic(n: int, name: str | None = None, gen_name: str = "g") -> FiniteTable:
    table = [[(a + b) % n for b in range(n)] for a in range(n)]
    gens = [1 % n] if n > 1 else []
    names = [gen_name] if n > 1 else []
    return FiniteTable(name or f"z{n}", table, identity=0, gens=gens, names=names)


def symmetric(k: int, name: str | None = None) -> FiniteTable:
    """S_k as a Cayley table on permutations in lexicographic order."""
    import itertools

    perms = list(itertools.permutations(range(k)))
    index = {p: i for i, p in enumerate(perms)}
    table = [[index[tuple(p[q[c]] for c in range(k))] for q in perms] for p in perms]
    gens = []
    if k >= 2:
        gens.append(index[tuple([1, 0] + list(range(2, k)))])
    if k >= 3:
        gens.append(index[tuple(list(range(1, k)) + [0])])
    names = ["s", "r"][: len(gens)]
    return FiniteTable(name or f"S{k}", table, identity=0, gens=gens, names=names)


# infinite groups


class IntegerGroup(Group):
    kind = "integer"

    def __init__(self, name: str = "Z", gen_name: str = "g"):
        super().__init__(name, [gen_name])

    @property
    def identity(self) -> int:
        return 0

    def mul(self, a: int, b: int) -> int:
        return a + b

    def inv(self, a: int) -> int:
        return -a

    def gen_element(self, i: int) -> int:
        if i != 0:
            raise GroupError("the integers have one generator")
        return 1

    def letters_of(self, x: int) -> tuple[Letter, ...]:
        return ((0, 1 if x > 0 else -1),) * abs(x)

    def _key(self) -> tuple:
        return ("integer", self.name, self.generator_names)

    def _collect_decls(self, seen: dict[str, str]) -> None:
        seen.setdefault(self.name, f"integer {self.name} names = [{self.generator_names[0]}]")


class FreeGroup(Group):
    kind = "free"

    def __init__(self, name: str, rank: int, names: Sequence[str] | None = None):
        if rank < 0:
            raise GroupError("rank must be non-negative")
        if names is None:
            names = [chr(ord("a") + i) for i in range(rank)] if rank <= 26 else [f"x{i + 1}" for i in range(rank)]
        if len(names) != rank:
            raise GroupError(f"{name}: {len(names)} names for rank {rank}")
        super().__init__(name, names)
        self.free_rank = rank

    @property
    def identity(self) -> tuple:
        return ()

    def mul(self, a: tuple, b: tuple) -> tuple:
        out = list(a)
        for letter in b:
            if out and out[-1] == (letter[0], -letter[1]):
                out.pop()
            else:
                out.append(letter)
        return tuple(out)

    def inv(self, a: tuple) -> tuple:
        return tuple((g, -s) for g, s in reversed(a))

    def gen_element(self, i: int) -> tuple:
        return ((i, 1),)

    def letters_of(self, x: tuple) -> tuple[Letter, ...]:
        return x

    def _key(self) -> tuple:
        return ("free", self.name, self.free_rank, self.generator_names)

    def _collect_decls(self, seen: dict[str, str]) -> None:
        seen.setdefault(
            self.name, f"free {self.name} rank = {self.free_rank} names = [{', '.join(self.generator_names)}]"
        )


def _product_names(factors: Sequence[Group]) -> tuple[list[str], list[tuple[int, int]]]:
    flat = [(fi, j, nm) for fi, f in enumerate(factors) for j, nm in enumerate(f.generator_names)]
    counts: dict[str, int] = {}
    for _, _, nm in flat:
        counts[nm] = counts.get(nm, 0) + 1
    names = [nm if counts[nm] == 1 else f"{nm}_{fi + 1}" for fi, _, nm in flat]
    return names, [(fi, j) for fi, j, _ in flat]


class FreeProduct(Group):
    """Elements are tuples of (factor index, non-identity factor element)."""

    kind = "freeproduct"

    def __init__(self, name: str, factors: Sequence[Group]):
        if len(factors) < 1:
            raise GroupError("a free product needs at least one factor")
        self.factors = tuple(factors)
        names, self._gen_map = _product_names(self.factors)
        self._offsets = np.cumsum([0] + [f.rank for f in self.factors]).tolist()
        super().__init__(name, names)

    @property
    def identity(self) -> tuple:
        return ()

    def _push(self, out: list, fi: int, x) -> None:
        f = self.factors[fi]
        if out and out[-1][0] == fi:
            y = f.mul(out[-1][1], x)
            if y == f.identity:
                out.pop()
            else:
                out[-1] = (fi, y)
        elif x != f.identity:
            out.append((fi, x))

    def mul(self, a: tuple, b: tuple) -> tuple:
        out = list(a)
        for fi, x in b:
            self._push(out, fi, x)
        return tuple(out)

    def inv(self, a: tuple) -> tuple:
        return tuple((fi, self.factors[fi].inv(x)) for fi, x in reversed(a))

    def gen_element(self, i: int) -> tuple:
        fi, j = self._gen_map[i]
        x = self.factors[fi].gen_element(j)
        return () if x == self.factors[fi].identity else ((fi, x),)

    def embed(self, fi: int, x) -> tuple:
        return () if x == self.factors[fi].identity else ((fi, x),)

    def letters_of(self, x: tuple) -> tuple[Letter, ...]:
        out: list[Letter] = []
        for fi, y in x:
            off = self._offsets[fi]
            out.extend((off + g, s) for g, s in self.factors[fi].letters_of(y))
        return tuple(out)

    def syllables_of(self, x: tuple) -> list[tuple[int, Word]]:
        return [(fi, self.factors[fi].word_of(y)) for fi, y in x]

    def factor_syllables(self, x: tuple) -> list[tuple[int, Element]]:
        return list(x)

    def _key(self) -> tuple:
        return ("freeproduct", self.name, tuple(f._key() for f in self.factors))

    def _collect_decls(self, seen: dict[str, str]) -> None:
        for f in self.factors:
            f._collect_decls(seen)
        seen.setdefault(self.name, f"freeproduct {self.name} = {' * '.join(f.name for f in self.factors)}")


class AmalgamatedProduct(Group):
    """G1 *_H G2 over a finite common subgroup H.

    Elements are (h, syllables) meaning iota(h) r_1 ... r_k, where the r_i
    are non-trivial representatives of right cosets H r, alternating
    between factors.
    """

    kind = "amalgam"

    def __init__(
        self,
        name: str,
        left: Group,
        right: Group,
        sub: FiniteTable,
        embed_left: Sequence,
        embed_right: Sequence,
    ):
        self.factors = (left, right)
        self.sub = sub
        nh = sub.order()
        self.embeddings = []
        for f, emb in ((left, embed_left), (right, embed_right)):
            if nh == 1:
                emb = [f.identity]
            elif not isinstance(f, FiniteTable):
                raise GroupError("a non-trivial amalgamating subgroup needs finite factors")
            else:
                emb = [int(x) for x in emb]
            if len(emb) != nh:
                raise GroupError(f"embedding into {f.name} must list {nh} elements")
            if len(set(emb)) != nh:
                raise GroupError(f"embedding into {f.name} is not injective")
            for a in range(nh):
                for b in range(nh):
                    if f.mul(emb[a], emb[b]) != emb[sub.mul(a, b)]:
                        raise GroupError(f"embedding into {f.name} is not a homomorphism")
            self.embeddings.append(tuple(emb))
        self._pull = [{x: h for h, x in enumerate(emb)} for emb in self.embeddings]
        self._split = [self._split_table(fi) for fi in range(2)]
        names, self._gen_map = _product_names(self.factors)
        self._offsets = [0, left.rank]
        super().__init__(name, names)

    def _split_table(self, fi: int) -> dict | None:
        f = self.factors[fi]
        if not isinstance(f, FiniteTable):
            return None
        emb = self.embeddings[fi]
        out = {}
        for g in f.elements():
            if g in out:
                continue
            coset = [f.mul(x, g) for x in emb]
            rep = f.identity if f.identity in coset else min(coset)
            rep_inv = f.inv(rep)
            for x in coset:
                out[x] = (self._pull[fi][f.mul(x, rep_inv)], rep)
        return out

    def split(self, fi: int, g) -> tuple[int, Element]:
        """Write g = iota_fi(h) * r with r the chosen right-coset representative."""
        table = self._split[fi]
        if table is None:
            return self.sub.identity, g
        return table[g]

    def transversal(self, fi: int) -> list[Element]:
        table = self._split[fi]
        if table is None:
            raise GroupError("transversal of an infinite factor")
        return sorted({r for _, r in table.values()})

    @property
    def identity(self) -> tuple:
        return (self.sub.identity, ())

    def lmul_factor(self, fi: int, g, x: tuple) -> tuple:
        f = self.factors[fi]
        h, syl = x
        c = f.mul(g, self.embeddings[fi][h])
        if syl and syl[0][0] == fi:
            c = f.mul(c, syl[0][1])
            syl = syl[1:]
        h2, r = self.split(fi, c)
        if r == f.identity:
            return (h2, syl)
        return (h2, ((fi, r),) + syl)

    def lmul_sub(self, h, x: tuple) -> tuple:
        return (self.sub.mul(h, x[0]), x[1])

    def mul(self, a: tuple, b: tuple) -> tuple:
        out = b
        for fi, r in reversed(a[1]):
            out = self.lmul_factor(fi, r, out)
        return self.lmul_sub(a[0], out)

    def inv(self, a: tuple) -> tuple:
        h, syl = a
        out = (self.sub.inv(h), ())
        for fi, r in syl:
            out = self.lmul_factor(fi, self.factors[fi].inv(r), out)
        return out

    def gen_element(self, i: int) -> tuple:
        fi, j = self._gen_map[i]
        return self.lmul_factor(fi, self.factors[fi].gen_element(j), self.identity)

    def embed(self, fi: int, g) -> tuple:
        return self.lmul_factor(fi, g, self.identity)

    def embed_sub(self, h) -> tuple:
        return (h, ())

    def letters_of(self, x: tuple) -> tuple[Letter, ...]:
        h, syl = x
        out: list[Letter] = []
        if h != self.sub.identity:
            out.extend(self.factors[0].letters_of(self.embeddings[0][h]))
        for fi, r in syl:
            off = self._offsets[fi]
            out.extend((off + g, s) for g, s in self.factors[fi].letters_of(r))
        return tuple(out)

    def syllables_of(self, x: tuple) -> list[tuple[int | None, Word]]:
        h, syl = x
        out: list[tuple[int | None, Word]] = []
        if h != self.sub.identity:
            out.append((None, self.sub.word_of(h)))
        out.extend((fi, self.factors[fi].word_of(r)) for fi, r in syl)
        return out

    def _key(self) -> tuple:
        return (
            "amalgam",
            self.name,
            self.factors[0]._key(),
            self.factors[1]._key(),
            self.sub._key(),
            tuple(self.embeddings),
        )

    def _collect_decls(self, seen: dict[str, str]) -> None:
        for f in (*self.factors, self.sub):
            f._collect_decls(seen)
        el = ", ".join(map(str, self.embeddings[0])) if self.sub.order() > 1 else "0"
        er = ", ".join(map(str, self.embeddings[1])) if self.sub.order() > 1 else "0"
        seen.setdefault(
            self.name,
            f"amalgam {self.name} = {self.factors[0].name} *_{{{self.sub.name}}} {self.factors[1].name} "
            f"with embed_left = [{el}], embed_right = [{er}]",
        )


# balls


@dataclass
class Ball:
    """Elements of (F ∪ F* ∪ {e})^{<=n} in breadth-first order."""

    group: Group
    letters: list[Element]
    letter_labels: list[tuple[int, int]]
    elements: list[Element]
    factorization: dict
    length: dict

    def __contains__(self, x: Element) -> bool:
        return x in self.length

    def __len__(self) -> int:
        return len(self.elements)


def symmetric_letters(group: Group, F: Sequence[Element]) -> tuple[list[Element], list[tuple[int, int]]]:
    """Distinct non-identity elements of F ∪ F^{-1}, with (F index, sign) labels."""
    letters: list[Element] = []
    labels: list[tuple[int, int]] = []
    seen = set()
    for i, f in enumerate(F):
        for s, x in ((1, f), (-1, group.inv(f))):
            if x == group.identity or x in seen:
                continue
            seen.add(x)
            letters.append(x)
            labels.append((i, s))
    return letters, labels


def ball_elements(group: Group, F: Sequence[Element], n: int, cap: int = BALL_CAP) -> Ball:
    if n < 0:
        raise ValueError("radius must be non-negative")
    letters, labels = symmetric_letters(group, F)
    e = group.identity
    elements = [e]
    fact = {e: ()}
    length = {e: 0}
    frontier = [e]
    for k in range(1, n + 1):
        nxt = []
        for x in frontier:
            for li, l in enumerate(letters):
                y = group.mul(x, l)
                if y not in length:
                    if len(elements) >= cap:
                        raise BallOverflowError(f"ball exceeds cap of {cap} elements")
                    length[y] = k
                    fact[y] = fact[x] + (li,)
                    elements.append(y)
                    nxt.append(y)
        frontier = nxt
        if not frontier:
            break
    return Ball(group, letters, labels, elements, fact, length)


def ball(F: Sequence[Word], n: int, group: Group | None = None, cap: int = BALL_CAP) -> list[tuple[Word, tuple[Word, ...]]]:
    """Deduplicated ball with one factorization of each element into F-letters."""
    if group is None:
        if not F:
            raise GroupError("an empty generator list needs an explicit group")
        group = F[0].owner
    elems = [group.element_of(w) for w in F]
    b = ball_elements(group, elems, n, cap)
    letter_words = [group.word_of(x) for x in b.letters]
    return [(group.word_of(x), tuple(letter_words[i] for i in b.factorization[x])) for x in b.elements]


# group-spec text format

_KEYWORDS = ("finite", "integer", "free", "freeproduct", "amalgam")


def _split_stanzas(text: str) -> list[str]:
    stanzas: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split(None, 1)[0]
        if head in _KEYWORDS:
            stanzas.append(line)
        elif stanzas:
            stanzas[-1] += " " + line
        else:
            raise GroupSpecParseError(f"line outside any stanza: {raw!r}")
    return stanzas


def _bracket_span(s: str, start: int) -> int:
    depth = 0
    for i in range(start, len(s)):
        if s[i] == "[":
            depth += 1
        elif s[i] == "]":
            depth -= 1
            if depth == 0:
                return i + 1
    raise GroupSpecParseError(f"unbalanced brackets in {s!r}")


def _options(s: str) -> dict[str, str]:
    out = {}
    pos = 0
    opt = re.compile(r"\s*,?\s*(\w+)\s*=\s*")
    while pos < len(s):
        if not s[pos:].strip(" ,"):
            break
        m = opt.match(s, pos)
        if not m:
            raise GroupSpecParseError(f"cannot parse options {s[pos:]!r}")
        key = m.group(1)
        pos = m.end()
        if pos < len(s) and s[pos] == "[":
            end = _bracket_span(s, pos)
        else:
            end = pos
            while end < len(s) and not s[end].isspace() and s[end] != ",":
                end += 1
        out[key] = s[pos:end]
        pos = end
    return out


def _name_list(v: str) -> list[str]:
    inner = v.strip()
    if not (inner.startswith("[") and inner.endswith("]")):
        raise GroupSpecParseError(f"expected a bracketed list, got {v!r}")
    return [x.strip() for x in inner[1:-1].split(",") if x.strip()]


def _int_list(v: str) -> list[int]:
    try:
        return [int(x) for x in _name_list(v)]
    except ValueError as exc:
        raise GroupSpecParseError(f"expected integers in {v!r}") from exc


def parse_group_text(text: str) -> dict[str, Group]:
    """Parse group declarations; later stanzas may reference earlier ones or builtins."""
    groups: dict[str, Group] = {}
    for st in _split_stanzas(text):
        head, rest = st.split(None, 1) if " " in st else (st, "")
        try:
            g = _parse_stanza(head, rest, groups)
        except GroupSpecParseError:
            raise
        except (GroupError, ValueError) as exc:
            raise GroupSpecParseError(f"{head} stanza: {exc}") from exc
        groups[g.name] = g
    return groups


def _parse_stanza(head: str, rest: str, groups: dict[str, Group]) -> Group:
    if head == "finite":
        m = re.match(r"(\S+)\s+table\s*=\s*", rest)
        if not m:
            raise GroupSpecParseError(f"bad finite stanza: {rest!r}")
        end = _bracket_span(rest, m.end())
        try:
            table = json.loads(rest[m.end() : end])
        except json.JSONDecodeError as exc:
            raise GroupSpecParseError(f"bad table: {exc}") from exc
        opts = _options(rest[end:])
        return FiniteTable(
            m.group(1),
            table,
            identity=int(opts["identity"]) if "identity" in opts else None,
            gens=_int_list(opts["gens"]) if "gens" in opts else None,
            names=_name_list(opts["names"]) if "names" in opts else None,
        )
    if head == "integer":
        parts = rest.split(None, 1)
        if not parts:
            raise GroupSpecParseError("integer stanza needs a name")
        opts = _options(parts[1]) if len(parts) > 1 else {}
        names = _name_list(opts["names"]) if "names" in opts else ["g"]
        if len(names) != 1:
            raise GroupSpecParseError("the integers have exactly one generator")
        return IntegerGroup(parts[0], names[0])
    if head == "free":
        m = re.match(r"(\S+)\s+rank\s*=\s*(\d+)(.*)$", rest)
        if not m:
            raise GroupSpecParseError(f"bad free stanza: {rest!r}")
        opts = _options(m.group(3))
        names = _name_list(opts["names"]) if "names" in opts else None
        return FreeGroup(m.group(1), int(m.group(2)), names)
    if head == "freeproduct":
        m = re.match(r"(\S+)\s*=\s*(.+)$", rest)
        if not m:
            raise GroupSpecParseError(f"bad freeproduct stanza: {rest!r}")
        factors = [resolve_group(x.strip(), groups) for x in re.split(r"\s+\*\s+", m.group(2).strip())]
        return FreeProduct(m.group(1), factors)
    if head == "amalgam":
        m = re.match(
            r"(\S+)\s*=\s*(\S+)\s+\*_\{(\S+?)\}\s+(\S+)\s+with\s+embed_left\s*=\s*(\[[^\]]*\])\s*,?\s*"
            r"embed_right\s*=\s*(\[[^\]]*\])\s*$",
            rest,
        )
        if not m:
            raise GroupSpecParseError(f"bad amalgam stanza: {rest!r}")
        left = resolve_group(m.group(2), groups)
        sub = resolve_group(m.group(3), groups)
        right = resolve_group(m.group(4), groups)
        if not isinstance(sub, FiniteTable):
            raise GroupSpecParseError("the amalgamating subgroup must be finite")
        return AmalgamatedProduct(m.group(1), left, right, sub, _int_list(m.group(5)), _int_list(m.group(6)))
    raise GroupSpecParseError(f"unknown stanza keyword {head!r}")


def parse_group_file(path) -> dict[str, Group]:
    with open(path, encoding="utf-8") as fh:
        return parse_group_text(fh.read())


_CYCLIC = re.compile(r"z(\d+)$")
_FREE = re.compile(r"F(\d+)$")
_AMALGAM = re.compile(r"z(\d+)\*_\{z(\d+)\}z(\d+)$")


def builtin_group(name: str) -> Group:
    """Named builtins: zN, Z, Fr, products A*B*..., and cyclic amalgams zM*_{zK}zN."""
    m = _CYCLIC.match(name)
    if m:
        return cyclic(int(m.group(1)))
    if name == "Z":
        return IntegerGroup("Z")
    m = _FREE.match(name)
    if m:
        return FreeGroup(name, int(m.group(1)))
    m = re.match(r"S(\d+)$", name)
    if m:
        return symmetric(int(m.group(1)))
    m = _AMALGAM.match(name)
    if m:
        a, k, b = (int(x) for x in m.groups())
        if k < 1 or a % k or b % k:
            raise GroupError(f"z{k} does not embed in z{a} and z{b}")
        sub = cyclic(k)
        return AmalgamatedProduct(
            name, cyclic(a), cyclic(b), sub, [h * (a // k) for h in range(k)], [h * (b // k) for h in range(k)]
        )
    if "*" in name and "*_" not in name:
        return FreeProduct(name, [builtin_group(x) for x in name.split("*")])
    raise GroupError(f"unknown group {name!r}")


def resolve_group(name: str, registry: dict[str, Group] | None = None) -> Group:
    if registry and name in registry:
        return registry[name]
    return builtin_group(name)
