"""Model constructions: exact models, amplification, induction, tilings,
free and amalgamated joins, conjugators, labelings and the action bridge."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .groups import (
    AmalgamatedProduct,
    Element,
    FiniteTable,
    FreeProduct,
    Group,
    IntegerGroup,
    ball_elements,
    symmetric_letters,
)
from .permcore import UNDEF, PartialPerm, Perm, compose, conjugate, random_perm
from .seeding import stream
from .verify import (
    ActionModel,
    BernoulliAction,
    FiniteAction,
    MissingImageError,
    SoficAssignment,
)


class ConstructionError(ValueError):
    pass


class InsufficientOrbitsError(ConstructionError):
    pass


# exact models


def regular_model(G: FiniteTable, m: int = 1, n: int = 3) -> SoficAssignment:
    """m disjoint copies of G acting on itself by left translation."""
    if m < 1:
        raise ConstructionError("need at least one copy")
    k = G.order()
    d = k * m
    offsets = (np.arange(m) * k)[:, None]
    images = {}
    for s in G.elements():
        row = np.array([G.mul(s, x) for x in range(k)], dtype=np.int64)
        images[s] = Perm((offsets + row[None, :]).reshape(-1), _trusted=True)
    gens = [G.gen_element(i) for i in range(G.rank)]
    return SoficAssignment(G, d, images, gens, n, {"construction": "regular", "copies": m})


def shift_model(Z: IntegerGroup, d: int, n: int = 3) -> SoficAssignment:
    """The cyclic shift c -> c+1 mod d as a model of the integers."""
    base = np.arange(d, dtype=np.int64)
    images = {k: Perm((base + k) % d, _trusted=True) for k in range(-n, n + 1)}
    return SoficAssignment(Z, d, images, [1], n, {"construction": "shift"})


def amplify(sigma: SoficAssignment, copies: int) -> SoficAssignment:
    """Block-diagonal repetition: psi(s)(j*l + c) = j*l + sigma_s(c)."""
    if copies < 1:
        raise ConstructionError("need at least one copy")
    if copies == 1:
        return sigma
    ell = sigma.d
    offsets = (np.arange(copies) * ell)[:, None]
    images = {x: Perm((offsets + p.array[None, :]).reshape(-1), _trusted=True) for x, p in sigma.images.items()}
    prov = {"construction": "amplify", "copies": copies, "input": sigma.provenance}
    return SoficAssignment(sigma.group, ell * copies, images, sigma.generators, sigma.n, prov)


def relabel(sigma: SoficAssignment, gamma: Perm) -> SoficAssignment:
    """gamma . sigma: every image conjugated by gamma."""
    images = {x: conjugate(gamma, p) for x, p in sigma.images.items()}
    return SoficAssignment(sigma.group, sigma.d, images, sigma.generators, sigma.n, dict(sigma.provenance))


@dataclass
class SubgroupData:
    """A finite-index subgroup H of G through H -> G and a partial inverse G -> H."""

    G: Group
    H: Group
    to_G: Callable[[Element], Element]
    to_H: Callable[[Element], Element | None]
    index: int
    default_transversal: list

    @classmethod
    def finite(cls, G: FiniteTable, H: FiniteTable, embedding: Sequence[int]) -> "SubgroupData":
        emb = [int(x) for x in embedding]
        if len(emb) != H.order() or len(set(emb)) != len(emb):
            raise ConstructionError("embedding must be injective on H")
        for a in H.elements():
            for b in H.elements():
                if G.mul(emb[a], emb[b]) != emb[H.mul(a, b)]:
                    raise ConstructionError("embedding is not a homomorphism")
        if G.order() % H.order():
            raise ConstructionError("|H| must divide |G|")
        pull = {x: h for h, x in enumerate(emb)}
        reps = []
        covered = set()
        for g in [G.identity] + [x for x in G.elements() if x != G.identity]:
            if g in covered:
                continue
            reps.append(g)
            covered.update(G.mul(g, x) for x in emb)
        return cls(G, H, lambda h: emb[h], pull.get, G.order() // H.order(), reps)

    @classmethod
    def multiples(cls, Z: IntegerGroup, m: int, H: IntegerGroup | None = None) -> "SubgroupData":
        """mZ inside Z, with H = Z via k -> m k."""
        if m < 1:
            raise ConstructionError("index must be positive")
        H = H or IntegerGroup("Z")
        return cls(Z, H, lambda k: m * k, lambda k: k // m if k % m == 0 else None, m, list(range(m)))


def induce_from_subgroup(
    sigma: SoficAssignment,
    sub: SubgroupData,
    R: Sequence[Element] | None = None,
    F: Sequence[Element] | None = None,
    n: int | None = None,
) -> SoficAssignment:
    """omega_s(c, t) = (sigma_{beta(st)^{-1} s t}(c), beta(st)) on d*[G:H] points.

    Point (c, t) is stored at index pos(t)*d + c, with pos the order of R.
    """
    G = sub.G
    R = list(sub.default_transversal if R is None else R)
    if len(R) != sub.index:
        raise ConstructionError(f"transversal needs {sub.index} elements, got {len(R)}")
    if G.identity not in R:
        raise ConstructionError("the transversal must contain the identity")
    for a, b in itertools.combinations(R, 2):
        if sub.to_H(G.mul(G.inv(a), b)) is not None:
            raise ConstructionError("R is not a transversal: two representatives share a coset")
    pos = {r: i for i, r in enumerate(R)}

    def beta(x):
        for r in R:
            h = sub.to_H(G.mul(G.inv(r), x))
            if h is not None:
                return r, h
        raise ConstructionError("R is not a transversal: element outside every coset")

    F = list(F) if F is not None else [G.gen_element(i) for i in range(G.rank)]
    n = sigma.n if n is None else n
    d = sigma.d
    m = len(R)
    b = ball_elements(G, F, n)
    images = {}
    cidx = np.arange(d)
    for s in b.elements:
        arr = np.empty(d * m, dtype=np.int64)
        for t in R:
            r, h = beta(G.mul(s, t))
            arr[pos[t] * d + cidx] = pos[r] * d + sigma.image(h).array
        images[s] = Perm(arr, _trusted=True)
    prov = {"construction": "induce", "index": m, "input": sigma.provenance}
    return SoficAssignment(G, d * m, images, F, n, prov)


# quasitiling


@dataclass
class TilingResult:
    tiles_used: list[tuple[int, list[int]]]
    coverage: float
    lambda_hat: list[float]
    disjoint: bool
    eps: float
    translates: list[tuple[int, int, list[int]]] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "tiles_used": [[j, list(c)] for j, c in self.tiles_used],
            "coverage": self.coverage,
            "lambda_hat": list(self.lambda_hat),
            "disjoint": self.disjoint,
            "eps": self.eps,
        }

    def certificate_holds(self) -> bool:
        """Each translate keeps at least (1-eps) of its points outside the earlier ones."""
        seen: set[int] = set()
        for _, _, pts in self.translates:
            fresh = [p for p in pts if p not in seen]
            if len(fresh) < (1 - self.eps) * len(pts) - 1e-12:
                return False
            seen.update(pts)
        return True


def quasitile(sigma: SoficAssignment, tiles: Sequence[Sequence[Element]], eps: float) -> TilingResult:
    """Greedy tiling by translates sigma(T_j)c, largest tile first, centers in increasing order."""
    g = sigma.group
    d = sigma.d
    if not tiles:
        raise ConstructionError("need at least one tile")
    mats = []
    for j, T in enumerate(tiles):
        if g.identity not in T:
            raise ConstructionError(f"tile {j} does not contain the identity")
        try:
            mats.append(np.stack([sigma.image(s).array for s in T]))
        except MissingImageError as exc:
            raise ConstructionError(f"tile {j} is not covered by the model: {exc}") from exc
    order = sorted(range(len(tiles)), key=lambda j: (-len(set(tiles[j])), -j))
    covered = np.zeros(d, dtype=bool)
    centers: dict[int, list[int]] = {j: [] for j in range(len(tiles))}
    translates = []
    disjoint = True
    for j in order:
        M = mats[j]
        size = M.shape[0]
        for c in range(d):
            pts = M[:, c]
            if np.unique(pts).size != size:
                continue
            overlap = int(np.count_nonzero(covered[pts]))
            if overlap > eps * size + 1e-12:
                continue
            if overlap:
                disjoint = False
            covered[pts] = True
            centers[j].append(c + 1)
            translates.append((j, c + 1, [int(p) + 1 for p in pts]))
    lam = [len(tiles[j]) * len(centers[j]) / d for j in range(len(tiles))]
    used = [(j, centers[j]) for j in order if centers[j]]
    return TilingResult(used, float(np.count_nonzero(covered)) / d, lam, disjoint, eps, translates)


def interval_tile(Z: IntegerGroup, start: int, stop: int) -> list[int]:
    return list(range(start, stop))


# joins


def _factor_image(model: SoficAssignment, x) -> Perm:
    return model.image(x)


def free_join(
    sigma: SoficAssignment,
    omega: SoficAssignment,
    group: FreeProduct | None = None,
    seed: int | None = None,
    U: Perm | None = None,
    n: int | None = None,
) -> SoficAssignment:
    """Omega on reduced words: sigma on G1-syllables, U omega U^{-1} on G2-syllables."""
    if sigma.d != omega.d:
        raise ConstructionError(f"dimension mismatch: {sigma.d} vs {omega.d}")
    d = sigma.d
    if group is None:
        group = FreeProduct(f"{sigma.group.name}*{omega.group.name}", [sigma.group, omega.group])
    if U is None:
        if seed is None:
            raise ConstructionError("free_join needs a seed or an explicit U")
        U = random_perm(d, stream(seed, "join", "U"))
    n = max(sigma.n, omega.n) if n is None else n
    F = [group.gen_element(i) for i in range(group.rank)]
    b = ball_elements(group, F, n)
    cache: dict = {}

    def rho(fi, y):
        key = (fi, y)
        if key not in cache:
            cache[key] = sigma.image(y) if fi == 0 else conjugate(U, omega.image(y))
        return cache[key]

    images = {}
    for x in b.elements:
        p = Perm.identity(d)
        for fi, y in group.factor_syllables(x):
            p = compose(p, rho(fi, y))
        images[x] = p
    prov = {"construction": "free_join", "seed": seed, "explicit_U": seed is None}
    return SoficAssignment(group, d, images, F, n, prov)


def free_orbits(h_images: Sequence[Perm], sub: FiniteTable) -> tuple[list[int], np.ndarray]:
    """Greedy decomposition into free orbits of a (possibly approximate) H-action.

    A base point c is accepted when its orbit has |H| points, avoids earlier
    orbits, and the action is exact on it. Returns base points and a mask of
    the orbit part.
    """
    d = h_images[0].d
    k = sub.order()
    A = np.stack([p.array for p in h_images])
    used = np.zeros(d, dtype=bool)
    bases = []
    for c in range(d):
        if used[c]:
            continue
        orbit = A[:, c]
        if np.unique(orbit).size != k or np.any(used[orbit]):
            continue
        ok = True
        for h in range(k):
            for kk in range(k):
                if A[h, orbit[kk]] != orbit[sub.mul(h, kk)]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            bases.append(c)
            used[orbit] = True
    return bases, used


@dataclass
class JoinResult:
    model: SoficAssignment
    U: Perm
    W: Perm
    orbits: tuple[int, int]
    aligned_mask: np.ndarray = field(repr=False)
    h_agreement_defect: float
    h_total_defect: float

    def to_json(self) -> dict:
        return {
            "orbits": list(self.orbits),
            "aligned_points": int(np.count_nonzero(self.aligned_mask)),
            "h_agreement_defect": self.h_agreement_defect,
            "h_total_defect": self.h_total_defect,
        }


def amalgamated_join(
    sigma: SoficAssignment,
    omega: SoficAssignment,
    group: AmalgamatedProduct,
    seed: int,
    n: int | None = None,
    eps: float = 0.05,
    align: bool = True,
) -> JoinResult:
    """Join two models along a finite common subgroup H.

    Both H-actions are split into free orbits, omega is conjugated so its
    orbits line up with sigma's, and then conjugated again by a random
    permutation commuting with the aligned H-action: a uniform shuffle of
    orbit blocks combined with uniform H-equivariant maps inside blocks.
    Points outside the aligned orbits are fixed by the randomizer.
    """
    if sigma.d != omega.d:
        raise ConstructionError(f"dimension mismatch: {sigma.d} vs {omega.d}")
    d = sigma.d
    H = group.sub
    k = H.order()
    emb_l, emb_r = group.embeddings
    sig_h = [sigma.image(emb_l[h]) for h in H.elements()]
    om_h = [omega.image(emb_r[h]) for h in H.elements()]
    need = math.ceil((1 - eps) * d / k - 1e-9)
    bs, mask_s = free_orbits(sig_h, H)
    bo, mask_o = free_orbits(om_h, H)
    if len(bs) < need or len(bo) < need:
        raise InsufficientOrbitsError(f"found {len(bs)} and {len(bo)} free H-orbits, need {need}")
    q = min(len(bs), len(bo))

    if align:
        W = np.full(d, UNDEF, dtype=np.int64)
        for i in range(q):
            for h in range(k):
                W[om_h[h].array[bo[i]]] = sig_h[h].array[bs[i]]
        src = np.flatnonzero(W == UNDEF)
        dst = np.setdiff1d(np.arange(d), W[W != UNDEF])
        W[src] = dst
        Wp = Perm(W, _trusted=True)
    else:
        Wp = Perm.identity(d)

    rng = stream(seed, "join", "U")
    pi = rng.permutation(q)
    shifts = rng.integers(0, k, size=q)
    Uarr = np.arange(d, dtype=np.int64)
    aligned = np.zeros(d, dtype=bool)
    for i in range(q):
        target = bs[pi[i]]
        start = sig_h[shifts[i]].array[target]
        for h in range(k):
            Uarr[sig_h[h].array[bs[i]]] = sig_h[h].array[start]
            aligned[sig_h[h].array[bs[i]]] = True
    Up = Perm(Uarr, _trusted=True)
    UW = compose(Up, Wp)

    n = max(sigma.n, omega.n) if n is None else n
    F = [group.gen_element(i) for i in range(group.rank)]
    b = ball_elements(group, F, n)
    cache: dict = {}

    def rho(fi, y):
        key = (fi, y)
        if key not in cache:
            cache[key] = sigma.image(y) if fi == 0 else conjugate(UW, omega.image(y))
        return cache[key]

    images = {}
    for x in b.elements:
        h, syl = x
        p = sig_h[h]
        for fi, r in syl:
            p = compose(p, rho(fi, r))
        images[x] = p
    model = SoficAssignment(group, d, images, F, n, {"construction": "amalgamated_join", "seed": seed, "aligned": align})

    worst_aligned = 0
    worst_total = 0
    for h in H.elements():
        a = sig_h[h].array
        bimg = conjugate(UW, om_h[h]).array
        diff = a != bimg
        worst_aligned = max(worst_aligned, int(np.count_nonzero(diff & aligned)))
        worst_total = max(worst_total, int(np.count_nonzero(diff)))
    return JoinResult(
        model,
        Up,
        Wp,
        (len(bs), len(bo)),
        aligned,
        math.sqrt(2 * worst_aligned / d),
        math.sqrt(2 * worst_total / d),
    )


# conjugators


def _residual_counts(gamma: np.ndarray, sig: list[np.ndarray], om: list[np.ndarray]) -> list[int]:
    out = []
    for a, w in zip(sig, om):
        # (gamma a gamma^{-1})(gamma x) = gamma a x
        out.append(int(np.count_nonzero(w[gamma] != gamma[a])))
    return out


def approx_conjugator(
    sigma: SoficAssignment,
    omega: SoficAssignment,
    F: Sequence[Element] | None = None,
    budget: int = 20000,
) -> tuple[Perm, float]:
    """A permutation gamma making gamma.sigma close to omega on F, with the residual rho_F."""
    if sigma.d != omega.d:
        raise ConstructionError("dimension mismatch")
    d = sigma.d
    F = list(sigma.generators if F is None else F)
    sig = [sigma.image(s).array for s in F]
    om = [omega.image(s).array for s in F]

    def residual(counts: list[int]) -> float:
        return math.sqrt(2 * max(counts, default=0) / d)

    ident = np.arange(d, dtype=np.int64)
    if d <= 8:
        P = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
        worst = np.zeros(P.shape[0], dtype=np.int64)
        for a, w in zip(sig, om):
            worst = np.maximum(worst, np.count_nonzero(w[P] != P[:, a], axis=1))
        best = int(np.argmin(worst))
        gamma = P[best]
        return Perm(gamma, _trusted=True), residual(_residual_counts(gamma, sig, om))

    gamma = _cycle_match(Perm(sig[0], _trusted=True), Perm(om[0], _trusted=True)) if F else ident.copy()
    counts = _residual_counts(gamma, sig, om)
    score = (max(counts, default=0), sum(counts))
    evals = 0
    improved = True
    while improved and evals < budget and score[1] > 0:
        improved = False
        for i in range(d):
            for j in range(i + 1, d):
                if evals >= budget:
                    break
                evals += 1
                gamma[i], gamma[j] = gamma[j], gamma[i]
                c2 = _residual_counts(gamma, sig, om)
                s2 = (max(c2), sum(c2))
                if s2 < score:
                    score, counts = s2, c2
                    improved = True
                else:
                    gamma[i], gamma[j] = gamma[j], gamma[i]
            if evals >= budget:
                break
    id_counts = _residual_counts(ident, sig, om)
    if max(id_counts, default=0) < max(counts, default=0):
        gamma, counts = ident, id_counts
    return Perm(gamma, _trusted=True), residual(counts)


def _cycle_match(a: Perm, b: Perm) -> np.ndarray:
    """A gamma with gamma a gamma^{-1} = b when cycle types agree, else a partial match."""
    d = a.d
    by_len: dict[int, list[tuple[int, ...]]] = {}
    for cyc in b.cycles():
        by_len.setdefault(len(cyc), []).append(cyc)
    gamma = np.full(d, UNDEF, dtype=np.int64)
    for cyc in a.cycles():
        pool = by_len.get(len(cyc))
        if pool:
            target = pool.pop(0)
            for x, y in zip(cyc, target):
                gamma[x - 1] = y - 1
    src = np.flatnonzero(gamma == UNDEF)
    dst = np.setdiff1d(np.arange(d), gamma[gamma != UNDEF])
    gamma[src] = dst
    return gamma


# action models


def bernoulli_model(sigma: SoficAssignment, nu: Sequence[float], seed: int) -> ActionModel:
    """i.i.d. nu labels on the points, against the Bernoulli shift with base nu."""
    action = BernoulliAction(sigma.group, nu)
    rng = stream(seed, "bernoulli", "labels")
    labels = rng.choice(len(action.labels), size=sigma.d, p=action.nu)
    return ActionModel(sigma, labels, action, {"construction": "bernoulli", "seed": seed, "nu": list(map(float, nu))})


def translation_model(G: FiniteTable, m: int = 1, n: int = 3) -> ActionModel:
    """Regular model with point j|G|+x labeled x, against G acting on itself."""
    sigma = regular_model(G, m, n)
    labels = np.tile(np.arange(G.order()), m)
    return ActionModel(sigma, labels, FiniteAction.translation(G), {"construction": "translation", "copies": m})


def trivial_action_model(sigma: SoficAssignment) -> ActionModel:
    return ActionModel(sigma, np.zeros(sigma.d, dtype=np.int64), BernoulliAction(sigma.group, [1.0]), {"construction": "trivial"})


@dataclass(frozen=True)
class Proj:
    """Cell projection p_y; label None is the unit."""

    label: int | None

    def __str__(self) -> str:
        return "1" if self.label is None else f"p{self.label}"


@dataclass(frozen=True)
class Unit:
    """Partial isometry u_s of a group element."""

    element: object
    name: str

    def __str__(self) -> str:
        return f"u[{self.name}]"


class BridgeEvaluator:
    """Phi(p u_w) = phi(p) sigma_w on formal products of cells and group elements.

    A formal product normalizes to (q, w) where q is a set of constraints
    (t, y) meaning the translate alpha_t(p_y), and w is a group element.
    """

    def __init__(self, model: ActionModel):
        self.model = model
        self.group = model.base.group
        self.d = model.d
        self._tl: dict = {}

    def _translated(self, t) -> np.ndarray:
        if t not in self._tl:
            self._tl[t] = self.model.translated_labels(t)
        return self._tl[t]

    def alphabet(self, F=None) -> list:
        g = self.group
        out: list = [Proj(None)]
        elems = []
        if F is None:
            out.extend(Proj(y) for y in self.model.action.labels)
            elems = list(self.model.base.generators)
        else:
            for a in F:
                if isinstance(a, Proj):
                    if a not in out:
                        out.append(a)
                elif isinstance(a, Unit):
                    elems.append(a.element)
                elif isinstance(a, str):
                    elems.append(g.parse_element(a))
                else:
                    elems.append(a)
        letters, _ = symmetric_letters(g, elems)
        out.extend(Unit(x, g.format_element(x)) for x in letters)
        return out

    def formal_unit(self):
        return (frozenset(), self.group.identity)

    def formal_mul(self, formal, letter):
        q, w = formal
        if isinstance(letter, Proj):
            if letter.label is None:
                return formal
            return (q | {(w, letter.label)}, w)
        return (q, self.group.mul(w, letter.element))

    def _constraints(self, q) -> dict | None:
        out: dict = {}
        for t, y in q:
            if out.get(t, y) != y:
                return None
            out[t] = y
        return out

    def projection_mask(self, q) -> np.ndarray:
        cons = self._constraints(q)
        mask = np.ones(self.d, dtype=bool)
        if cons is None:
            return np.zeros(self.d, dtype=bool)
        for t, y in cons.items():
            mask &= self._translated(t) == y
        return mask

    def value(self, formal) -> PartialPerm:
        q, w = formal
        s = self.model.base.image(w).array
        mask = self.projection_mask(q)
        return PartialPerm(np.where(mask[s], s, UNDEF), _trusted=True)

    def letter_value(self, letter) -> PartialPerm:
        return self.value(self.formal_mul(self.formal_unit(), letter))

    def identity_value(self) -> PartialPerm:
        return Perm.identity(self.d)

    def tau(self, formal) -> float:
        q, w = formal
        if w != self.group.identity:
            return 0.0
        cons = self._constraints(q)
        if cons is None:
            return 0.0
        return self.model.action.measure(cons)

    def format_formal(self, formal) -> str:
        q, w = formal
        g = self.group
        parts = sorted(f"{g.format_element(t)}:{y}" for t, y in q)
        proj = "p[" + ",".join(parts) + "]" if parts else "1"
        return f"{proj} u[{g.format_element(w)}]"


def phi_bridge(model: ActionModel | SoficAssignment) -> BridgeEvaluator:
    if isinstance(model, SoficAssignment):
        model = trivial_action_model(model)
    return BridgeEvaluator(model)
