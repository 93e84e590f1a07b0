"""Exact counts of strict-regime models at small d, packing numbers and rate profiles.

In the strict regime delta < sqrt(2/d) every multiplicativity condition is an
exact relation between the generator permutations, so counting reduces to a
constraint search. Two engines are provided:

* exhaustive: point-by-point backtracking over the generator tables with
  relator-scan deduction and fixed-point pruning; supports restriction
  counting to E ⊆ F and witnesses.
* orbit: enumerates transitive components up to relabeling (breadth-first
  standardized tables) and assembles labeled counts by an exponential-formula
  recursion that tracks fixed-point counts of the trace-constrained words.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .groups import BALL_CAP, Element, Group, ball_elements, symmetric_letters
from .permcore import Perm, hs_dist, inverse_monoid_order
from .seeding import max_workers
from .verify import SoficAssignment

DEFAULT_NODE_CAP = 50_000_000


class UnsupportedRegimeError(ValueError):
    pass


class WorkCapExceeded(RuntimeError):
    pass


class RestrictionError(ValueError):
    pass


def rate(count: int, d: int) -> float:
    """ln(count) / (d ln d); 0 for count <= 1 and -inf for count == 0."""
    if d < 2:
        raise ValueError("rate needs d >= 2")
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return -math.inf
    if count == 1:
        return 0.0
    return math.log(count) / (d * math.log(d))


def upper_bound_count(d: int, k: int, coarse: bool = False) -> int:
    """|I_d|^k, or the coarser (C(2d, d) d!)^k."""
    if d < 1:
        raise ValueError("d must be positive")
    if coarse:
        return (math.comb(2 * d, d) * math.factorial(d)) ** k
    return inverse_monoid_order(d) ** k


@dataclass
class CountRecord:
    group: str
    F: list[str]
    E: list[str]
    n: int
    delta: float
    d: int
    count: int
    mode: str
    seconds: float = 0.0

    @property
    def rate(self) -> float:
        if self.d < 2:
            return -math.inf if self.count == 0 else 0.0
        return rate(self.count, self.d)

    @property
    def rate_flag(self) -> str:
        return "-inf" if self.count == 0 else ""

    def row(self) -> dict[str, str]:
        r = self.rate
        return {
            "group": self.group,
            "F": ";".join(self.F),
            "E": ";".join(self.E),
            "n": str(self.n),
            "delta": repr(self.delta),
            "d": str(self.d),
            "count": str(self.count),
            "rate": "-inf" if r == -math.inf else repr(r),
            "mode": self.mode,
            "seconds": f"{self.seconds:.6f}",
        }

    def to_json(self) -> dict:
        out = self.row()
        out["F"] = list(self.F)
        out["E"] = list(self.E)
        return out


CSV_COLUMNS = ["group", "F", "E", "n", "delta", "d", "count", "rate", "mode", "seconds"]


def records_to_csv(records: Iterable[CountRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


# problem compilation


@dataclass
class _Problem:
    group: Group
    variables: list[Element]
    relators: list[tuple[tuple[int, int], ...]]
    targets: list[tuple[tuple[int, int], ...]]
    maxfp: int
    d: int
    e_vars: list[int] = field(default_factory=list)


def _free_reduce(word: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for v, s in word:
        if out and out[-1] == (v, -s):
            out.pop()
        else:
            out.append((v, s))
    while len(out) >= 2 and out[0] == (out[-1][0], -out[-1][1]):
        out = out[1:-1]
    return out


def _canonical_relator(word: list[tuple[int, int]], involutive: set[int]) -> tuple[tuple[int, int], ...]:
    inv = [(v, -s if v not in involutive else s) for v, s in reversed(word)]
    cands = []
    for w in (word, inv):
        for i in range(len(w)):
            cands.append(tuple(w[i:] + w[:i]))
    return min(cands)


def max_fixed_points(delta: float, d: int) -> int:
    """Largest f with f/d < delta."""
    f = max(math.ceil(delta * d) - 1, 0)
    while (f + 1) / d < delta:
        f += 1
    while f >= 0 and not (f / d < delta):
        f -= 1
    return f


def _compile(group: Group, F: Sequence[Element], n: int, delta: float, d: int, cap: int = BALL_CAP) -> _Problem:
    e = group.identity
    variables: list[Element] = []
    for f in F:
        if f == e or f in variables or group.inv(f) in variables:
            continue
        variables.append(f)
    involutive = {i for i, v in enumerate(variables) if group.mul(v, v) == e}
    var_letter = {}
    for i, v in enumerate(variables):
        var_letter[v] = (i, 1)
        var_letter.setdefault(group.inv(v), (i, -1) if i not in involutive else (i, 1))
    letters, _ = symmetric_letters(group, variables)
    lw = [var_letter[x] for x in letters]
    b = ball_elements(group, variables, n, cap)
    fact = {x: [lw[i] for i in b.factorization[x]] for x in b.elements}

    def normalize(word):
        out = []
        for v, s in word:
            if v in involutive:
                s = 1
            out.append((v, s))
        red: list[tuple[int, int]] = []
        for v, s in out:
            if red and red[-1][0] == v and (red[-1][1] == -s or (v in involutive)):
                red.pop()
            else:
                red.append((v, s))
        while len(red) >= 2 and red[0][0] == red[-1][0] and (red[0][1] == -red[-1][1] or red[0][0] in involutive):
            red = red[1:-1]
        return red

    rels = set()
    frontier = [((), e)]
    for _ in range(n):
        nxt = []
        for word, x in frontier:
            for li, l in enumerate(letters):
                w2 = word + (li,)
                y = group.mul(x, l)
                nxt.append((w2, y))
                lhs = [lw[i] for i in w2]
                rhs_inv = [(v, -s) for v, s in reversed(fact[y])]
                r = normalize(lhs + rhs_inv)
                if r:
                    rels.add(_canonical_relator(r, involutive))
        frontier = nxt
    # an involution as a letter of its own inverse is encoded by the relator v v
    for i in involutive:
        rels.add(((i, 1), (i, 1)))
    targets = [tuple(fact[x]) for x in b.elements if x != e]
    return _Problem(group, variables, sorted(rels), targets, max_fixed_points(delta, d), d)


# exhaustive engine


class _Search:
    def __init__(self, prob: _Problem, size: int, node_cap: int):
        self.p = prob
        self.k = len(prob.variables)
        self.size = size
        self.fwd = [[-1] * size for _ in range(self.k)]
        self.bwd = [[-1] * size for _ in range(self.k)]
        self.trail: list[tuple[int, int, int]] = []
        self.nodes = 0
        self.node_cap = node_cap

    def define(self, v: int, x: int, y: int) -> None:
        self.fwd[v][x] = y
        self.bwd[v][y] = x
        self.trail.append((v, x, y))

    def undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            v, x, y = self.trail.pop()
            self.fwd[v][x] = -1
            self.bwd[v][y] = -1

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.node_cap:
            raise WorkCapExceeded(f"search exceeded {self.node_cap} nodes")

    def propagate(self, points: int) -> bool:
        fwd, bwd = self.fwd, self.bwd
        changed = True
        while changed:
            changed = False
            for r in self.p.relators:
                L = len(r)
                for c in range(points):
                    x = c
                    i = 0
                    while i < L:
                        v, s = r[i]
                        y = fwd[v][x] if s > 0 else bwd[v][x]
                        if y < 0:
                            break
                        x = y
                        i += 1
                    if i == L:
                        if x != c:
                            return False
                        continue
                    y = c
                    j = L
                    while j > i:
                        v, s = r[j - 1]
                        z = bwd[v][y] if s > 0 else fwd[v][y]
                        if z < 0:
                            break
                        y = z
                        j -= 1
                    if j == i:
                        return False
                    if j == i + 1:
                        v, s = r[i]
                        if s > 0:
                            self.define(v, x, y)
                        else:
                            self.define(v, y, x)
                        changed = True
        return True

    def fixed_counts(self, points: int) -> list[int] | None:
        """Fixed points of each target on fully defined paths; None if a bound is broken."""
        fwd, bwd = self.fwd, self.bwd
        out = []
        maxfp = self.p.maxfp
        for t in self.p.targets:
            cnt = 0
            for c in range(points):
                x = c
                ok = True
                for v, s in t:
                    x = fwd[v][x] if s > 0 else bwd[v][x]
                    if x < 0:
                        ok = False
                        break
                if ok and x == c:
                    cnt += 1
                    if cnt > maxfp:
                        return None
            out.append(cnt)
        return out


def _exhaustive(prob: _Problem, e_vars: list[int], want_witnesses: bool, node_cap: int):
    d = prob.d
    k = len(prob.variables)
    full = sorted(set(e_vars)) == list(range(k))
    if k == 0:
        return 1, ([()] if want_witnesses else [])

    def first_choices():
        return list(range(d))

    def run(first: int | None):
        S = _Search(prob, d, node_cap)
        count = 0
        keys: dict = {}
        wit = []

        def rec():
            nonlocal count
            S.tick()
            if not S.propagate(d) or S.fixed_counts(d) is None:
                return
            for v in range(k):
                row = S.fwd[v]
                for x in range(d):
                    if row[x] < 0:
                        break
                else:
                    continue
                break
            else:
                tables = tuple(tuple(S.fwd[v]) for v in range(k))
                if full:
                    count += 1
                    if want_witnesses:
                        wit.append(tables)
                else:
                    key = tuple(tables[v] for v in e_vars)
                    if key not in keys:
                        keys[key] = tables
                return
            bw = S.bwd[v]
            for y in range(d):
                if bw[y] >= 0:
                    continue
                mark = len(S.trail)
                S.define(v, x, y)
                rec()
                S.undo(mark)

        if first is None:
            rec()
        else:
            S.define(0, 0, first)
            rec()
        if full:
            return count, wit, None
        return None, None, keys

    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, first_choices()))
    else:
        parts = [run(None)]
    if full:
        total = sum(p[0] for p in parts)
        wit = [w for p in parts for w in p[1]]
        return total, wit
    merged: dict = {}
    for p in parts:
        for key, tables in p[2].items():
            merged.setdefault(key, tables)
    return len(merged), list(merged.values()) if want_witnesses else []


# orbit engine


def _components(prob: _Problem, size: int, node_cap: int) -> dict[tuple[int, ...], int]:
    """Standardized transitive tables on `size` points, grouped by fixed-point vector."""
    k = len(prob.variables)
    out: dict[tuple[int, ...], int] = {}
    if k == 0:
        if size == 1:
            out[tuple(0 if not t else 1 for t in prob.targets)] = 1
        return out
    S = _Search(prob, size, node_cap)
    columns = [(v, s) for v in range(k) for s in (1, -1)]

    def rec(m: int):
        S.tick()
        if not S.propagate(m):
            return
        fc = S.fixed_counts(m)
        if fc is None:
            return
        entry = None
        for c in range(m):
            for v, s in columns:
                if (S.fwd[v][c] if s > 0 else S.bwd[v][c]) < 0:
                    entry = (c, v, s)
                    break
            if entry:
                break
        if entry is None:
            if m == size:
                key = tuple(fc)
                out[key] = out.get(key, 0) + 1
            return
        c, v, s = entry
        free_slot = S.bwd[v] if s > 0 else S.fwd[v]
        cands = [y for y in range(m) if free_slot[y] < 0]
        if m < size:
            cands.append(m)
        for y in cands:
            mark = len(S.trail)
            if s > 0:
                S.define(v, c, y)
            else:
                S.define(v, y, c)
            rec(m + 1 if y == m else m)
            S.undo(mark)

    rec(1)
    return out


def _orbit_count(prob: _Problem, node_cap: int) -> int:
    d = prob.d
    maxfp = prob.maxfp
    nt = len(prob.targets)
    conn: dict[int, dict[tuple[int, ...], int]] = {}
    for size in range(1, d + 1):
        std = _components(prob, size, node_cap)
        fac = math.factorial(size - 1)
        conn[size] = {key: c * fac for key, c in std.items()}
    A: list[dict[tuple[int, ...], int]] = [{(0,) * nt: 1}]
    for m in range(1, d + 1):
        acc: dict[tuple[int, ...], int] = {}
        for size in range(1, m + 1):
            if not conn[size]:
                continue
            mult = math.comb(m - 1, size - 1)
            for u, cu in conn[size].items():
                for v, cv in A[m - size].items():
                    w = tuple(a + b for a, b in zip(u, v))
                    if any(x > maxfp for x in w):
                        continue
                    acc[w] = acc.get(w, 0) + mult * cu * cv
        A.append(acc)
    return sum(A[d].values())


# public API


def _elements(group: Group, words) -> list[Element]:
    out = []
    for w in words:
        if isinstance(w, str):
            out.append(group.parse_element(w))
        elif hasattr(w, "letters") and hasattr(w, "owner"):
            out.append(group.element_of(w))
        else:
            out.append(w)
    return out


def enumerate_ga(
    group: Group,
    F,
    E,
    n: int,
    delta: float,
    d: int,
    mode: str = "exhaustive",
    witnesses: bool = False,
    node_cap: int = DEFAULT_NODE_CAP,
) -> tuple[CountRecord, list[SoficAssignment] | None]:
    """Count distinct restrictions to E of exact models on F at dimension d."""
    if d < 1:
        raise ValueError("d must be positive")
    if not 0 < delta:
        raise UnsupportedRegimeError("delta must be positive")
    if not delta < math.sqrt(2 / d):
        raise UnsupportedRegimeError(f"delta={delta} is outside the strict regime delta < sqrt(2/d) = {math.sqrt(2 / d):.6f}")
    Fe = _elements(group, F)
    Ee = _elements(group, E)
    e = group.identity
    Fset = set(Fe)
    for x in Ee:
        if x != e and x not in Fset:
            raise RestrictionError(f"E element {group.format_element(x)} is not in F")
    t0 = time.perf_counter()
    prob = _compile(group, Fe, n, delta, d)
    idx = {v: i for i, v in enumerate(prob.variables)}
    e_vars = []
    for x in Ee:
        if x == e:
            continue
        v = idx.get(x, idx.get(group.inv(x)))
        if v is not None and v not in e_vars:
            e_vars.append(v)
    e_vars.sort()
    wit_tables = None
    if mode == "orbit":
        if e_vars != list(range(len(prob.variables))):
            raise RestrictionError("orbit mode counts full assignments; use E = F")
        count = _orbit_count(prob, node_cap)
        mode_name = "orbit-decomposed"
    elif mode == "exhaustive":
        count, wit_tables = _exhaustive(prob, e_vars, witnesses, node_cap)
        mode_name = "exhaustive"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    seconds = time.perf_counter() - t0
    rec = CountRecord(
        group.name,
        [group.format_element(x) for x in Fe],
        [group.format_element(x) for x in Ee],
        n,
        delta,
        d,
        count,
        mode_name,
        seconds,
    )
    wit = None
    if witnesses and mode == "exhaustive":
        wit = []
        for tables in wit_tables:
            if not prob.variables:
                continue
            imgs = [Perm(np.array(t, dtype=np.int64), _trusted=True) for t in tables]
            wit.append(
                SoficAssignment.from_generators(
                    group, prob.variables, imgs, n, {"construction": "census-witness", "d": d}
                )
            )
    return rec, wit


def dimension_profile(group: Group, F, E, n: int, delta: float, d_list: Sequence[int], mode: str = "exhaustive") -> list[CountRecord]:
    """One record per d. The delta is used as given at every d and must be strict for each."""
    return [enumerate_ga(group, F, E, n, delta, d, mode=mode)[0] for d in d_list]


def split_parity(records: Sequence[CountRecord]) -> dict[str, list[CountRecord]]:
    return {
        "even": [r for r in records if r.d % 2 == 0],
        "odd": [r for r in records if r.d % 2 == 1],
    }


def packing_number(maps: Sequence[SoficAssignment], E, eps: float) -> int:
    """Size of a greedy maximal eps-separated set of restrictions to E (pairwise rho_E >= eps)."""
    if not maps:
        return 0
    group = maps[0].group
    Ee = _elements(group, E)
    seen = set()
    distinct = []
    for m in maps:
        imgs = [m.image(s) for s in Ee]
        key = tuple(p.array.tobytes() for p in imgs)
        if key in seen:
            continue
        seen.add(key)
        distinct.append(imgs)
    chosen: list[list[Perm]] = []
    for imgs in distinct:
        if all(max((hs_dist(a, b) for a, b in zip(imgs, ch)), default=0.0) >= eps for ch in chosen):
            chosen.append(imgs)
    return len(chosen)


def brute_force_count(group: Group, F, E, n: int, delta: float, d: int) -> int:
    """Reference count with no pruning.

    Every assignment of permutations to F is checked against every tuple in
    (F ∪ F* ∪ {e})^n and every trace condition, vectorized over the image of
    the last generator.
    """
    Fe = _elements(group, F)
    Ee = _elements(group, E)
    e = group.identity
    variables: list[Element] = []
    for f in Fe:
        if f != e and f not in variables and group.inv(f) not in variables:
            variables.append(f)
    if not variables:
        return 1
    perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
    inv_perms = np.argsort(perms, axis=1)
    B = perms.shape[0]
    letters, _ = symmetric_letters(group, variables)
    b = ball_elements(group, variables, n)
    maxfp = max_fixed_points(delta, d)
    ident = np.broadcast_to(np.arange(d), (B, d))

    def comp(x, y):
        return np.take_along_axis(x, y, axis=1)

    keys = set()
    k = len(variables)
    for head in itertools.product(range(B), repeat=k - 1):
        var_img = [np.broadcast_to(perms[i], (B, d)) for i in head] + [perms]
        var_inv = [np.broadcast_to(inv_perms[i], (B, d)) for i in head] + [inv_perms]
        letter_img = []
        for x in letters:
            if x in variables:
                letter_img.append(var_img[variables.index(x)])
            else:
                letter_img.append(var_inv[variables.index(group.inv(x))])
        img = {}
        for x in b.elements:
            p = ident
            for li in b.factorization[x]:
                p = comp(p, letter_img[li])
            img[x] = p
        ok = np.ones(B, dtype=bool)
        alphabet = [(e, ident)] + list(zip(letters, letter_img))
        for tup in itertools.product(range(len(alphabet)), repeat=n):
            x = e
            p = ident
            for i in tup:
                x = group.mul(x, alphabet[i][0])
                p = comp(p, alphabet[i][1])
            ok &= np.all(p == img[x], axis=1)
        for x in b.elements:
            if x != e:
                ok &= np.count_nonzero(img[x] == np.arange(d), axis=1) <= maxfp
        for row in np.flatnonzero(ok):
            keys.add(tuple(img[x][row].tobytes() for x in Ee))
    return len(keys)
