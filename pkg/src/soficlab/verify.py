"""Membership checks for approximate models and the perturbation bounds.

A :class:`SoficAssignment` maps the elements of a word ball to
permutations. :class:`ActionModel` adds a labeling of the points by the
cells of a finite partition, weighted against a formal measure-preserving
action that supplies the target measures of translated cells.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

import numpy as np

from .groups import BALL_CAP, Ball, Element, FiniteTable, Group, ball_elements, symmetric_letters
from .permcore import (
    PartialPerm,
    Perm,
    adjoint,
    compose,
    fixed_points,
    hs_dist,
    hs_dist_sq,
    trace,
)


class MissingImageError(KeyError):
    pass


class PatternOverflowError(RuntimeError):
    pass


PATTERN_CAP = 10**6


class SoficAssignment:
    """Identity-preserving map from stored group elements to permutations."""

    def __init__(
        self,
        group: Group,
        d: int,
        images: dict[Element, Perm],
        generators: Sequence[Element],
        n: int,
        provenance: dict | None = None,
    ):
        self.group = group
        self.d = int(d)
        self.generators = tuple(generators)
        self.n = int(n)
        self.provenance = dict(provenance or {})
        e = group.identity
        images = dict(images)
        if e not in images:
            images[e] = Perm.identity(self.d)
        elif images[e] != Perm.identity(self.d):
            raise ValueError("the identity must map to the identity permutation")
        for x, p in images.items():
            if p.d != self.d or not isinstance(p, Perm):
                raise ValueError(f"image of {group.format_element(x)} is not a permutation of {self.d} points")
        self.images = images

    @classmethod
    def from_generators(
        cls,
        group: Group,
        F: Sequence[Element],
        gen_images: Sequence[Perm],
        n: int,
        provenance: dict | None = None,
        cap: int = BALL_CAP,
    ) -> "SoficAssignment":
        """Fill the ball of radius n by composing letter images along BFS factorizations.

        An inverse letter that is not itself in F gets the inverse permutation.
        """
        if len(F) != len(gen_images):
            raise ValueError("one image per generator")
        if not gen_images:
            raise ValueError("need at least one generator image to fix the dimension")
        d = gen_images[0].d
        given = {}
        for f, p in zip(F, gen_images):
            if f in given and given[f] != p:
                raise ValueError(f"conflicting images for {group.format_element(f)}")
            given[f] = p
        b = ball_elements(group, F, n, cap)
        letter_img = []
        for x in b.letters:
            if x in given:
                letter_img.append(given[x])
            else:
                letter_img.append(given[group.inv(x)].inverse())
        images = {group.identity: Perm.identity(d)}
        for x in b.elements[1:]:
            fac = b.factorization[x]
            if len(fac) == 1 and x in given:
                images[x] = given[x]
                continue
            prev = images[_prefix_element(group, b, fac)]
            images[x] = compose(prev, letter_img[fac[-1]])
        for f, p in given.items():
            images[f] = p
        return cls(group, d, images, F, n, provenance)

    def image(self, x: Element) -> Perm:
        """Stored image, or a composition of generator images along the canonical word."""
        p = self.images.get(x)
        if p is not None:
            return p
        g = self.group
        out = Perm.identity(self.d)
        for gi, s in g.letters_of(x):
            ge = g.gen_element(gi)
            img = self.images.get(ge if s > 0 else g.inv(ge))
            if img is None:
                base = self.images.get(ge)
                if base is None:
                    raise MissingImageError(f"no image for {g.format_element(x)}")
                img = base.inverse() if s < 0 else base
            out = compose(out, img)
        return out

    def has_image(self, x: Element) -> bool:
        try:
            self.image(x)
        except MissingImageError:
            return False
        return True

    def word_images(self) -> dict[str, Perm]:
        return {self.group.format_element(x): p for x, p in self.images.items()}

    def with_images(self, updates: dict[Element, Perm], **prov) -> "SoficAssignment":
        images = dict(self.images)
        images.update(updates)
        provenance = dict(self.provenance)
        provenance.update(prov)
        return SoficAssignment(self.group, self.d, images, self.generators, self.n, provenance)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SoficAssignment):
            return NotImplemented
        return self.d == other.d and self.images == other.images

    def __repr__(self) -> str:
        return f"SoficAssignment({self.group.name}, d={self.d}, n={self.n}, {len(self.images)} images)"


def _prefix_element(group: Group, b: Ball, fac: tuple[int, ...]) -> Element:
    x = group.identity
    for li in fac[:-1]:
        x = group.mul(x, b.letters[li])
    return x


# formal actions


class FormalAction:
    """Measure-preserving action of a group on a probability space, seen through a finite partition.

    Labels 0..k-1 name the cells p_y. Subclasses report the measure of
    intersections of translates alpha_s(p_y) = {x : s^{-1} x in p_y}.
    """

    labels: tuple[Hashable, ...]

    def cell_measure(self) -> np.ndarray:
        raise NotImplementedError

    def pattern_measures(self, coords: Sequence[Element]) -> dict[tuple[int, ...], float]:
        """Measures of all non-null label patterns on the given distinct coordinates."""
        raise NotImplementedError

    def measure(self, constraints: dict[Element, int]) -> float:
        coords = list(constraints)
        key = tuple(constraints[s] for s in coords)
        return self.pattern_measures(coords).get(key, 0.0)

    def translate_as_cells(self, s: Element, y: int) -> frozenset[int] | None:
        """Labels whose union equals alpha_s(p_y), if it is a union of cells."""
        return frozenset([y]) if s == self.group.identity else None

    def describe(self) -> dict:
        raise NotImplementedError


class BernoulliAction(FormalAction):
    """Shift action on Y^G with product measure nu: translates of cells are independent."""

    def __init__(self, group: Group, nu: Sequence[float]):
        nu = np.asarray(nu, dtype=float)
        if nu.ndim != 1 or nu.size == 0 or np.any(nu < 0) or not math.isclose(nu.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("nu must be a probability vector")
        self.group = group
        self.nu = nu
        self.labels = tuple(range(nu.size))

    def cell_measure(self) -> np.ndarray:
        return self.nu.copy()

    def pattern_measures(self, coords):
        support = [y for y in self.labels if self.nu[y] > 0]
        k = len(coords)
        if len(support) ** k > PATTERN_CAP:
            raise PatternOverflowError(f"{len(support)}^{k} patterns exceed cap")
        out = {}
        for pat in itertools.product(support, repeat=k):
            out[pat] = float(np.prod([self.nu[y] for y in pat])) if k else 1.0
        return out

    def measure(self, constraints):
        return float(np.prod([self.nu[y] for y in constraints.values()])) if constraints else 1.0

    def describe(self) -> dict:
        return {"kind": "bernoulli", "nu": self.nu.tolist()}


class FiniteAction(FormalAction):
    """A finite group acting on a finite weighted set, with a labeling of the set."""

    def __init__(self, group: FiniteTable, action: Sequence[Sequence[int]], weights: Sequence[float], point_labels: Sequence[int]):
        self.group = group
        self.action = np.asarray(action, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=float)
        self.point_labels = np.asarray(point_labels, dtype=np.int64)
        m = self.weights.size
        if self.action.shape != (group.order(), m):
            raise ValueError("action table must be |G| x |X|")
        if not math.isclose(self.weights.sum(), 1.0, abs_tol=1e-9) or np.any(self.weights < 0):
            raise ValueError("weights must be a probability vector")
        for g in group.elements():
            for h in group.elements():
                if not np.array_equal(self.action[group.mul(g, h)], self.action[g][self.action[h]]):
                    raise ValueError("action table is not a left action")
        for g in group.elements():
            if not np.allclose(np.bincount(self.action[g], weights=self.weights, minlength=m), self.weights):
                raise ValueError("action does not preserve the measure")
        self.labels = tuple(range(int(self.point_labels.max()) + 1))

    @classmethod
    def translation(cls, group: FiniteTable) -> "FiniteAction":
        """Left translation of G on itself, uniform measure, singleton cells labeled by element."""
        n = group.order()
        action = [[group.mul(g, x) for x in range(n)] for g in range(n)]
        return cls(group, action, [1.0 / n] * n, list(range(n)))

    def cell_measure(self) -> np.ndarray:
        return np.bincount(self.point_labels, weights=self.weights, minlength=len(self.labels))

    def _pattern(self, x: int, coords) -> tuple[int, ...]:
        g = self.group
        return tuple(int(self.point_labels[self.action[g.inv(s), x]]) for s in coords)

    def pattern_measures(self, coords):
        out: dict[tuple[int, ...], float] = {}
        for x in range(self.weights.size):
            if self.weights[x] > 0:
                pat = self._pattern(x, coords)
                out[pat] = out.get(pat, 0.0) + float(self.weights[x])
        return out

    def translate_as_cells(self, s, y):
        moved = np.zeros(self.weights.size, dtype=bool)
        moved[self.action[s][self.point_labels == y]] = True
        labs = set()
        for x in np.flatnonzero(moved):
            labs.add(int(self.point_labels[x]))
        for lab in labs:
            cell = (self.point_labels == lab) & (self.weights > 0)
            if np.any(cell & ~moved):
                return None
        return frozenset(labs)

    def describe(self) -> dict:
        return {
            "kind": "finite",
            "action": self.action.tolist(),
            "weights": self.weights.tolist(),
            "point_labels": self.point_labels.tolist(),
        }


class ActionModel:
    """A sofic assignment together with a cell labeling of {1..d}."""

    def __init__(self, base: SoficAssignment, labels: Sequence[int], action: FormalAction, provenance: dict | None = None):
        self.base = base
        self.labels = np.asarray(labels, dtype=np.int64)
        self.labels.setflags(write=False)
        if self.labels.shape != (base.d,):
            raise ValueError("one label per point")
        k = len(action.labels)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= k):
            raise ValueError("labels must index the action's cells")
        self.action = action
        self.provenance = dict(provenance or {})

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def target_measure(self) -> dict[int, float]:
        return {y: float(m) for y, m in enumerate(self.action.cell_measure())}

    @property
    def cells(self) -> dict[int, frozenset[int]]:
        return {y: frozenset(int(c) + 1 for c in np.flatnonzero(self.labels == y)) for y in self.action.labels}

    def cell_mask(self, y: int) -> np.ndarray:
        return self.labels == y

    def translated_labels(self, s: Element) -> np.ndarray:
        """Label of sigma_s^{-1}(c) for every point c: c lies in sigma_s(cell) iff this equals the cell."""
        p = self.base.image(s)
        inv = np.empty(self.d, dtype=np.int64)
        inv[p.array] = np.arange(self.d)
        return self.labels[inv]


# reports


@dataclass
class DefectReport:
    max_mult_defect: float
    max_trace_defect: float
    worst_tuple: tuple[str, ...]
    per_word: dict[str, tuple[float, float]]
    delta: float
    components: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return max(self.max_mult_defect, self.max_trace_defect) < self.delta

    @property
    def max_defect(self) -> float:
        return max(self.max_mult_defect, self.max_trace_defect)

    def to_json(self) -> dict[str, Any]:
        return {
            "max_mult_defect": self.max_mult_defect,
            "max_trace_defect": self.max_trace_defect,
            "worst_tuple": list(self.worst_tuple),
            "per_word": {w: list(v) for w, v in self.per_word.items()},
            "delta": self.delta,
            "passed": self.passed,
            "components": dict(self.components),
        }

    def table(self) -> str:
        width = max([len(w) for w in self.per_word] + [4])
        lines = [f"{'word':<{width}}  {'mult':>10}  {'trace':>10}"]
        for w, (m, t) in self.per_word.items():
            lines.append(f"{w:<{width}}  {m:>10.6f}  {t:>10.6f}")
        lines.append(f"max mult defect  {self.max_mult_defect:.6f}")
        lines.append(f"max trace defect {self.max_trace_defect:.6f}")
        lines.append(f"worst tuple      {' , '.join(self.worst_tuple) or '-'}")
        lines.append(f"delta            {self.delta}")
        lines.append(f"passed           {self.passed}")
        return "\n".join(lines)


class _Table:
    def __init__(self):
        self.per_word: dict[str, list[float]] = {}
        self.mult = 0.0
        self.trace = 0.0
        self.worst: tuple[str, ...] = ()
        self._worst_val = -1.0

    def mult_entry(self, word: str, val: float, tup: tuple[str, ...]) -> None:
        row = self.per_word.setdefault(word, [0.0, 0.0])
        row[0] = max(row[0], val)
        self.mult = max(self.mult, val)
        if val > self._worst_val:
            self._worst_val = val
            self.worst = tup

    def trace_entry(self, word: str, val: float, tup: tuple[str, ...] | None = None) -> None:
        row = self.per_word.setdefault(word, [0.0, 0.0])
        row[1] = max(row[1], val)
        self.trace = max(self.trace, val)
        if tup is not None and val > self._worst_val:
            self._worst_val = val
            self.worst = tup

    def report(self, delta: float, components: dict | None = None) -> DefectReport:
        return DefectReport(
            self.mult,
            self.trace,
            self.worst,
            {w: (v[0], v[1]) for w, v in self.per_word.items()},
            delta,
            dict(components or {}),
        )


def _resolve_F(sigma: SoficAssignment, F) -> list[Element]:
    if F is None:
        return list(sigma.generators)
    g = sigma.group
    out = []
    for f in F:
        if isinstance(f, str):
            out.append(g.parse_element(f))
        elif hasattr(f, "letters") and hasattr(f, "owner"):
            out.append(g.element_of(f))
        else:
            out.append(f)
    return out


def ga_check(sigma: SoficAssignment, F=None, n: int | None = None, delta: float = 0.0, cap: int = BALL_CAP) -> DefectReport:
    """Exact check of GA(F, n, delta, d) over all tuples in (F ∪ F* ∪ {e})^n."""
    g = sigma.group
    Fe = _resolve_F(sigma, F)
    n = sigma.n if n is None else n
    letters, _ = symmetric_letters(g, Fe)
    alphabet = [g.identity] + letters
    b = ball_elements(g, Fe, n, cap)
    imgs = {x: sigma.image(x) for x in b.elements}
    names = {x: g.format_element(x) for x in b.elements}
    tab = _Table()
    d = sigma.d

    # DFS over tuples, carrying the product element and the product of images
    ident = Perm.identity(d)
    stack = [(0, g.identity, ident.array, ())]
    while stack:
        depth, x, prod, tup = stack.pop()
        if depth == n:
            word = names[x]
            diff = int(np.count_nonzero(imgs[x].array != prod))
            tab.mult_entry(word, math.sqrt(2 * diff / d), tup)
            continue
        for a in reversed(alphabet):
            stack.append((depth + 1, g.mul(x, a), prod[imgs[a].array], tup + (names[a],)))
    if n == 0:
        tab.per_word.setdefault(names[g.identity], [0.0, 0.0])
    for x in b.elements:
        if x == g.identity:
            continue
        tab.trace_entry(names[x], trace(imgs[x]), (names[x],))
    return tab.report(delta)


def _model_patterns(model: ActionModel, coords: Sequence[Element]) -> np.ndarray:
    """Matrix P[c, j] = label of sigma_{coords[j]}^{-1}(c)."""
    if not coords:
        return np.zeros((model.d, 0), dtype=np.int64)
    return np.stack([model.translated_labels(s) for s in coords], axis=1)


def ha_check(model: ActionModel, F=None, n: int | None = None, delta: float = 0.0, cap: int = BALL_CAP) -> DefectReport:
    """Check of the action-pair conditions on (F, partition, n, delta).

    Measure condition: for every product of translates alpha_s(p_s) with s in
    the ball and p_s a cell or 1, |tr phi(p) - mu(p)|, where phi of a translate
    is the sigma-translate of the cell. Equivariance: for cells p and ball
    elements s whose formal translate is itself a union of cells, the
    distance between phi(alpha_s(p)) and Ad sigma_s(phi(p)). The GA defects of
    the underlying assignment are folded in.
    """
    sigma = model.base
    g = sigma.group
    Fe = _resolve_F(sigma, F)
    n = sigma.n if n is None else n
    ga = ga_check(sigma, Fe, n, delta, cap)
    b = ball_elements(g, Fe, n, cap)
    coords = list(b.elements)
    names = [g.format_element(s) for s in coords]
    d = model.d
    P = _model_patterns(model, coords)
    act = model.action
    full = act.pattern_measures(coords)
    k = len(coords)
    if 2**k > PATTERN_CAP:
        raise PatternOverflowError(f"2^{k} coordinate subsets exceed cap")

    measure_defect = 0.0
    worst_measure: tuple[str, ...] = ()
    per_subset_rows = []
    for r in range(1, k + 1):
        for S in itertools.combinations(range(k), r):
            formal: dict[tuple[int, ...], float] = {}
            for pat, m in full.items():
                key = tuple(pat[j] for j in S)
                formal[key] = formal.get(key, 0.0) + m
            sub = P[:, S]
            keys, counts = np.unique(sub, axis=0, return_counts=True)
            realized = {tuple(int(v) for v in key): int(c) for key, c in zip(keys, counts)}
            worst = 0.0
            worst_key = None
            for key, c in realized.items():
                dev = abs(c / d - formal.get(key, 0.0))
                if dev > worst:
                    worst, worst_key = dev, key
            for key, m in formal.items():
                if key not in realized and m > worst:
                    worst, worst_key = m, key
            per_subset_rows.append((S, worst))
            if worst > measure_defect:
                measure_defect = worst
                worst_measure = tuple(f"{names[j]}:{worst_key[i]}" for i, j in enumerate(S))

    equiv = 0.0
    worst_equiv: tuple[str, ...] = ()
    equiv_rows: dict[str, float] = {}
    for j, s in enumerate(coords):
        for y in act.labels:
            labs = act.translate_as_cells(s, y)
            if labs is None:
                continue
            lhs = np.isin(model.labels, list(labs))
            rhs = P[:, j] == y
            val = math.sqrt(int(np.count_nonzero(lhs != rhs)) / d)
            equiv_rows[names[j]] = max(equiv_rows.get(names[j], 0.0), val)
            if val > equiv:
                equiv = val
                worst_equiv = (names[j], f"cell {y}")

    per_word = {w: (m, t) for w, (m, t) in ga.per_word.items()}
    for w, v in equiv_rows.items():
        m, t = per_word.get(w, (0.0, 0.0))
        per_word[w] = (max(m, v), t)
    for S, worst in per_subset_rows:
        if len(S) == 1:
            w = names[S[0]]
            m, t = per_word.get(w, (0.0, 0.0))
            per_word[w] = (m, max(t, worst))
    mult = max(ga.max_mult_defect, equiv)
    tr = max(ga.max_trace_defect, measure_defect)
    cand = [(ga.max_mult_defect, ga.worst_tuple), (equiv, worst_equiv), (measure_defect, worst_measure)]
    if ga.max_trace_defect > max(c[0] for c in cand):
        worst_tuple = ga.worst_tuple
    else:
        worst_tuple = max(cand, key=lambda c: c[0])[1]
    return DefectReport(
        mult,
        tr,
        worst_tuple,
        per_word,
        delta,
        {
            "ga_mult": ga.max_mult_defect,
            "ga_trace": ga.max_trace_defect,
            "measure": measure_defect,
            "equivariance": equiv,
        },
    )


def sa_check(evaluator, F=None, n: int | None = None, delta: float = 0.0) -> DefectReport:
    """Check of the inverse-semigroup model conditions through a bridge evaluator.

    Tests every formal product of at most n letters from F (cell projections,
    the unit, and group elements with their inverses): multiplicativity of
    Phi and |tr Phi(a) - tau(a)|.
    """
    from .construct import BridgeEvaluator, phi_bridge

    if isinstance(evaluator, SoficAssignment):
        evaluator = phi_bridge(evaluator)
    if isinstance(evaluator, ActionModel):
        evaluator = phi_bridge(evaluator)
    if not isinstance(evaluator, BridgeEvaluator):
        raise TypeError("sa_check needs a bridge evaluator, an action model or an assignment")
    n = evaluator.model.base.n if n is None else n
    alphabet = evaluator.alphabet(F)
    tab = _Table()
    ident = evaluator.identity_value()
    stack = [((), evaluator.formal_unit(), ident)]
    while stack:
        tup, formal, prod = stack.pop()
        if tup:
            name = evaluator.format_formal(formal)
            value = evaluator.value(formal)
            tab.mult_entry(name, hs_dist(value, prod), tuple(str(a) for a in tup))
            tr_val = abs(trace(value) - evaluator.tau(formal))
            tab.trace_entry(name, tr_val, tuple(str(a) for a in tup))
        if len(tup) == n:
            continue
        for a in reversed(alphabet):
            nf = evaluator.formal_mul(formal, a)
            stack.append((tup + (a,), nf, compose(prod, evaluator.letter_value(a))))
    return tab.report(delta)


# perturbation bounds


def adjoint_defect(sigma: SoficAssignment, F=None, delta: float | None = None, n: int | None = None) -> float:
    """max over s in F of hs_dist(sigma_{s^-1}, sigma_s^*); needs radius >= 3."""
    n = sigma.n if n is None else n
    if n < 3:
        raise ValueError(f"adjoint bound needs n >= 3, got {n}")
    g = sigma.group
    Fe = _resolve_F(sigma, F)
    return max((hs_dist(sigma.image(g.inv(s)), adjoint(sigma.image(s))) for s in Fe), default=0.0)


def partial_isometry_recovery(v: PartialPerm, w: PartialPerm, delta: float) -> bool:
    """Whether ||vwv - v|| < delta and ||wvw - w|| < delta."""
    if v.d != w.d:
        raise ValueError("dimension mismatch")
    vwv = compose(compose(v, w), v)
    wvw = compose(compose(w, v), w)
    return hs_dist(vwv, v) < delta and hs_dist(wvw, w) < delta


def multiplicative_pairs_exact(sigma: SoficAssignment, F=None) -> bool:
    """Whether sigma_{uv} == sigma_u sigma_v for all u, v in the letters plus e."""
    g = sigma.group
    Fe = _resolve_F(sigma, F)
    letters, _ = symmetric_letters(g, Fe)
    alpha = [g.identity] + letters
    for u in alpha:
        for v in alpha:
            if sigma.image(g.mul(u, v)) != compose(sigma.image(u), sigma.image(v)):
                return False
    return True


__all__ = [
    "ActionModel",
    "BernoulliAction",
    "DefectReport",
    "FiniteAction",
    "FormalAction",
    "MissingImageError",
    "PatternOverflowError",
    "SoficAssignment",
    "adjoint_defect",
    "fixed_points",
    "ga_check",
    "ha_check",
    "hs_dist_sq",
    "multiplicative_pairs_exact",
    "partial_isometry_recovery",
    "sa_check",
]
