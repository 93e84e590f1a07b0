"""Partial permutations of {1..d}, the inverse monoid I_d.

Images are stored as 0-based numpy arrays with -1 marking "undefined";
every public constructor, accessor and serializer speaks 1-based points.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

UNDEF = -1
MAX_DIM = 1 << 20


class DimensionError(ValueError):
    pass


def _check_dim(d: int) -> None:
    if d < 1:
        raise DimensionError(f"dimension must be positive, got {d}")
    if d > MAX_DIM:
        raise DimensionError(f"dimension {d} exceeds cap {MAX_DIM}")


class PartialPerm:
    """Injective partial map on {1..d}."""

    __slots__ = ("_img", "_hash")

    def __init__(self, images: Sequence[int] | np.ndarray, _trusted: bool = False):
        arr = np.array(images, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("images must be one-dimensional")
        d = arr.shape[0]
        _check_dim(d)
        if not _trusted:
            defined = arr[arr != UNDEF]
            if np.any((defined < 0) | (defined >= d)):
                raise ValueError("image point out of range")
            if np.unique(defined).size != defined.size:
                raise ValueError("partial permutation must be injective")
        arr.setflags(write=False)
        self._img = arr
        self._hash = None

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int], d: int) -> "PartialPerm":
        """Build from a 1-based mapping {point: image}."""
        _check_dim(d)
        arr = np.full(d, UNDEF, dtype=np.int64)
        for c, y in mapping.items():
            if not (1 <= c <= d and 1 <= y <= d):
                raise ValueError(f"point outside 1..{d}: {c}->{y}")
            arr[c - 1] = y - 1
        return cls(arr)

    @classmethod
    def from_list(cls, entries: Sequence[int | None]) -> "PartialPerm":
        """Inverse of to_list: 1-based images with None for undefined."""
        if any(y is not None and int(y) < 1 for y in entries):
            raise ValueError("image points must be in 1..d")
        return cls([UNDEF if y is None else int(y) - 1 for y in entries])

    @classmethod
    def identity(cls, d: int) -> "PartialPerm":
        _check_dim(d)
        return cls(np.arange(d, dtype=np.int64), _trusted=True)

    @classmethod
    def empty(cls, d: int) -> "PartialPerm":
        _check_dim(d)
        return cls(np.full(d, UNDEF, dtype=np.int64), _trusted=True)

    @property
    def d(self) -> int:
        return int(self._img.shape[0])

    @property
    def array(self) -> np.ndarray:
        """Read-only 0-based image array (-1 = undefined)."""
        return self._img

    @property
    def domain_mask(self) -> np.ndarray:
        return self._img != UNDEF

    def domain(self) -> frozenset[int]:
        return frozenset(int(c) + 1 for c in np.flatnonzero(self.domain_mask))

    def range(self) -> frozenset[int]:
        return frozenset(int(y) + 1 for y in self._img[self.domain_mask])

    def rank(self) -> int:
        return int(np.count_nonzero(self.domain_mask))

    def image(self, c: int) -> int | None:
        y = int(self._img[c - 1])
        return None if y == UNDEF else y + 1

    def is_total(self) -> bool:
        return bool(np.all(self.domain_mask))

    def to_list(self) -> list[int | None]:
        return [None if y == UNDEF else int(y) + 1 for y in self._img]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartialPerm):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self._img, other._img))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._img.tobytes())
        return self._hash

    def __matmul__(self, other: "PartialPerm") -> "PartialPerm":
        return compose(self, other)

    def __repr__(self) -> str:
        pairs = ", ".join(f"{c}->{y}" for c, y in enumerate(self.to_list(), 1) if y is not None)
        return f"{type(self).__name__}(d={self.d}, {{{pairs}}})"


class Perm(PartialPerm):
    """Total bijection of {1..d}."""

    __slots__ = ()

    def __init__(self, images: Sequence[int] | np.ndarray, _trusted: bool = False):
        super().__init__(images, _trusted=_trusted)
        if not _trusted and not self.is_total():
            raise ValueError("a Perm must be total")

    @classmethod
    def from_images(cls, images: Sequence[int]) -> "Perm":
        """Build from 1-based images [σ(1), ..., σ(d)]."""
        return cls([int(y) - 1 for y in images])

    @classmethod
    def from_cycles(cls, cycles: Iterable[Sequence[int]], d: int) -> "Perm":
        _check_dim(d)
        arr = np.arange(d, dtype=np.int64)
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                arr[a - 1] = b - 1
        return cls(arr)

    @classmethod
    def identity(cls, d: int) -> "Perm":
        _check_dim(d)
        return cls(np.arange(d, dtype=np.int64), _trusted=True)

    def inverse(self) -> "Perm":
        inv = np.empty_like(self._img)
        inv[self._img] = np.arange(self.d)
        return Perm(inv, _trusted=True)

    def cycles(self) -> list[tuple[int, ...]]:
        """Cycles as 1-based tuples, each starting at its least point, sorted."""
        seen = np.zeros(self.d, dtype=bool)
        out = []
        for start in range(self.d):
            if seen[start]:
                continue
            cyc = []
            c = start
            while not seen[c]:
                seen[c] = True
                cyc.append(c + 1)
                c = int(self._img[c])
            out.append(tuple(cyc))
        return out

    def cycle_type(self) -> tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))


class DiagProjection:
    """Diagonal 0/1 projection onto a subset of {1..d}."""

    __slots__ = ("d", "mask")

    def __init__(self, d: int, support: Iterable[int] | np.ndarray):
        _check_dim(d)
        self.d = d
        if isinstance(support, np.ndarray) and support.dtype == bool:
            mask = support.copy()
        else:
            mask = np.zeros(d, dtype=bool)
            for c in support:
                if not 1 <= c <= d:
                    raise ValueError(f"point {c} outside 1..{d}")
                mask[c - 1] = True
        mask.setflags(write=False)
        self.mask = mask

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(c) + 1 for c in np.flatnonzero(self.mask))

    def as_partial_perm(self) -> PartialPerm:
        arr = np.where(self.mask, np.arange(self.d), UNDEF)
        return PartialPerm(arr, _trusted=True)

    def trace(self) -> float:
        return float(np.count_nonzero(self.mask)) / self.d

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiagProjection):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self) -> int:
        return hash((self.d, self.mask.tobytes()))


def _same_dim(a: PartialPerm, b: PartialPerm) -> int:
    if a.d != b.d:
        raise DimensionError(f"dimension mismatch: {a.d} vs {b.d}")
    return a.d


def compose(a: PartialPerm, b: PartialPerm) -> PartialPerm:
    """(a∘b)(c) = a(b(c)); defined where b(c) is defined and lies in dom a."""
    _same_dim(a, b)
    bi = b.array
    if isinstance(a, Perm) and isinstance(b, Perm):
        return Perm(a.array[bi], _trusted=True)
    safe = np.where(bi == UNDEF, 0, bi)
    out = np.where(bi == UNDEF, UNDEF, a.array[safe])
    return PartialPerm(out, _trusted=True)


def compose_all(perms: Sequence[PartialPerm], d: int | None = None) -> PartialPerm:
    """Left-to-right product p1∘p2∘...∘pk (identity for an empty list)."""
    if not perms:
        if d is None:
            raise ValueError("empty product needs a dimension")
        return Perm.identity(d)
    out = perms[0]
    for p in perms[1:]:
        out = compose(out, p)
    return out


def adjoint(a: PartialPerm) -> PartialPerm:
    """Relational inverse a*."""
    if isinstance(a, Perm):
        return a.inverse()
    out = np.full(a.d, UNDEF, dtype=np.int64)
    dom = np.flatnonzero(a.domain_mask)
    out[a.array[dom]] = dom
    return PartialPerm(out, _trusted=True)


def fixed_points(a: PartialPerm) -> int:
    return int(np.count_nonzero(a.array == np.arange(a.d)))


def trace(a: PartialPerm) -> float:
    """Normalized trace: fixed points in the domain divided by d."""
    return fixed_points(a) / a.d


def _agreements(a: PartialPerm, b: PartialPerm) -> int:
    return int(np.count_nonzero((a.array == b.array) & a.domain_mask))


def hs_dist_sq(a: PartialPerm, b: PartialPerm) -> float:
    d = _same_dim(a, b)
    agree = _agreements(a, b)
    return (a.rank() + b.rank() - 2 * agree) / d


def hs_dist(a: PartialPerm, b: PartialPerm) -> float:
    """Normalized Hilbert-Schmidt distance sqrt(tr((a-b)*(a-b)))."""
    return math.sqrt(hs_dist_sq(a, b))


def hamming_dist(s: Perm, t: Perm) -> float:
    """Fraction of points where two permutations disagree."""
    d = _same_dim(s, t)
    if not (s.is_total() and t.is_total()):
        raise ValueError("hamming_dist needs total permutations")
    return int(np.count_nonzero(s.array != t.array)) / d


def rho_E(sigma: Mapping, omega: Mapping, E: Iterable) -> float:
    """max over s in E of hs_dist(sigma[s], omega[s]); 0 for empty E."""
    return max((hs_dist(sigma[s], omega[s]) for s in E), default=0.0)


def ball_count_bound(d: int, eps: float) -> int:
    """C(d, m) * d^m with m = floor(eps^2 d), evaluated exactly."""
    _check_dim(d)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    m = math.floor(Fraction(eps) ** 2 * d)
    m = min(m, d)
    return math.comb(d, m) * d**m


def conjugate(g: Perm, a: PartialPerm) -> PartialPerm:
    """g a g^{-1}."""
    _same_dim(g, a)
    gi = g.array
    out = np.full(a.d, UNDEF, dtype=np.int64)
    dom = np.flatnonzero(a.domain_mask)
    out[gi[dom]] = gi[a.array[dom]]
    if isinstance(a, Perm):
        return Perm(out, _trusted=True)
    return PartialPerm(out, _trusted=True)


def random_perm(d: int, rng: np.random.Generator) -> Perm:
    """Uniform element of S_d."""
    _check_dim(d)
    return Perm(rng.permutation(d).astype(np.int64), _trusted=True)


def inverse_monoid_order(d: int) -> int:
    """|I_d| = sum_k C(d,k)^2 k!."""
    return sum(math.comb(d, k) ** 2 * math.factorial(k) for k in range(d + 1))


def all_partial_perms(d: int) -> np.ndarray:
    """Every element of I_d as rows of a (|I_d|, d) array of 0-based images."""
    import itertools

    rows = []
    for k in range(d + 1):
        for dom in itertools.combinations(range(d), k):
            for rng_pts in itertools.permutations(range(d), k):
                row = [UNDEF] * d
                for c, y in zip(dom, rng_pts):
                    row[c] = y
                rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(rows), d)
