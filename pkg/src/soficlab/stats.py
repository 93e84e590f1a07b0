"""Monte Carlo surveys over uniformly random permutations.

Every survey draws its randomness from streams keyed by (master seed, survey
name, d, block), so results do not depend on the number of worker threads.
Confidence halfwidths use the normal approximation at 99%:
z * sqrt(f (1 - f) / trials) for fractions and z * s / sqrt(trials) for means,
with z = 2.5758.
"""

from __future__ import annotations

import io
import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .permcore import PartialPerm, UNDEF, trace
from .seeding import child_seed, max_workers, stream
from .verify import SoficAssignment, ga_check

Z99 = 2.5758
BLOCK = 1024
RELIABLE_MIN = 10


@dataclass
class SurveyResult:
    survey: str
    d: int
    trials: int
    count: int
    fraction: float
    mean: float
    confidence_halfwidth: float
    seed: int | None
    reliable: bool = True
    params: dict = field(default_factory=dict)

    def row(self) -> dict[str, str]:
        return {
            "survey": self.survey,
            "d": str(self.d),
            "trials": str(self.trials),
            "count": str(self.count),
            "fraction": repr(self.fraction),
            "mean": repr(self.mean),
            "halfwidth": repr(self.confidence_halfwidth),
            "reliable": "1" if self.reliable else "0",
            "seed": "" if self.seed is None else str(self.seed),
        }

    def to_json(self) -> dict:
        out = {
            "survey": self.survey,
            "d": self.d,
            "trials": self.trials,
            "count": self.count,
            "fraction": self.fraction,
            "mean": self.mean,
            "confidence_halfwidth": self.confidence_halfwidth,
            "reliable": self.reliable,
            "seed": None if self.seed is None else str(self.seed),
            "params": self.params,
        }
        return out


SURVEY_COLUMNS = ["survey", "d", "trials", "count", "fraction", "mean", "halfwidth", "reliable", "seed"]


def results_to_csv(results: Sequence[SurveyResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SURVEY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def _fraction_result(survey, d, trials, count, seed, mean=None, params=None) -> SurveyResult:
    f = count / trials
    hw = Z99 * math.sqrt(f * (1 - f) / trials)
    reliable = min(count, trials - count) >= RELIABLE_MIN
    return SurveyResult(survey, d, trials, count, f, f if mean is None else mean, hw, seed, reliable, params or {})


def _check_trials(trials: int) -> None:
    if int(trials) < 1:
        raise ValueError("trials must be at least 1")


def _blocks(trials: int):
    for b, start in enumerate(range(0, trials, BLOCK)):
        yield b, min(BLOCK, trials - start)


def _map_blocks(fn, trials: int) -> list:
    jobs = list(_blocks(trials))
    workers = max_workers()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def _batch_perms(rng: np.random.Generator, size: int, d: int) -> np.ndarray:
    base = np.broadcast_to(np.arange(d, dtype=np.int64), (size, d))
    return rng.permuted(base, axis=1)


# trace survey


def trace_survey(A: PartialPerm, eps: float, trials: int, seed: int, exhaustive: bool = False) -> SurveyResult:
    """Fraction of uniform pairs (U, V) with tr(U A V*) < eps.

    tr(U A V*) counts the points x of dom A with U(A(x)) = V(x). With
    exhaustive=True every pair in S_d x S_d is visited (d <= 7).
    """
    d = A.d
    dom = np.flatnonzero(A.domain_mask)
    img = A.array[dom]
    limit = eps * d
    if exhaustive:
        if d > 7:
            raise ValueError("exhaustive trace survey is limited to d <= 7")
        perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
        # tr(U A V*) depends on V^{-1}U only up to the d!-to-1 map; count directly anyway
        Ui = perms[:, img]
        Vd = perms[:, dom]
        fp = (Ui[:, None, :] == Vd[None, :, :]).sum(axis=2)
        count = int(np.count_nonzero(fp < limit))
        total = perms.shape[0] ** 2
        return _fraction_result("trace", d, total, count, None, params={"eps": eps, "exhaustive": True})
    _check_trials(trials)

    def block(b, size):
        rng = stream(seed, "trace", d, b)
        U = _batch_perms(rng, size, d)
        V = _batch_perms(rng, size, d)
        fp = np.count_nonzero(U[:, img] == V[:, dom], axis=1)
        return int(np.count_nonzero(fp < limit))

    count = sum(_map_blocks(block, trials))
    return _fraction_result("trace", d, trials, count, seed, params={"eps": eps})


def derangement_fraction(d: int, max_fixed: int) -> float:
    """Exact share of S_d with at most max_fixed fixed points."""
    D = [1, 0]
    for m in range(2, d + 1):
        D.append((m - 1) * (D[-1] + D[-2]))
    good = sum(math.comb(d, k) * D[d - k] for k in range(0, min(max_fixed, d) + 1))
    return good / math.factorial(d)


# alternating products


def _ext(p: PartialPerm) -> np.ndarray:
    """Image array with undefined points sent to a sink at index d."""
    a = p.array
    d = p.d
    out = np.empty(d + 1, dtype=np.int64)
    out[:d] = np.where(a == UNDEF, d, a)
    out[d] = d
    return out


def _check_alternating(As: Sequence[PartialPerm], rho: Sequence[int]) -> tuple[int, int]:
    if len(As) == 0 or len(As) % 2:
        raise ValueError("need an even, non-empty list of partial permutations")
    if len(rho) != len(As):
        raise ValueError(f"rho has {len(rho)} entries for {len(As)} factors")
    d = As[0].d
    if any(a.d != d for a in As):
        raise ValueError("all factors must share d")
    ell = max(rho)
    if sorted(set(rho)) != list(range(1, ell + 1)):
        raise ValueError("rho must be a surjection onto 1..l")
    return d, ell


def _alternating_traces(As, rho, rng, size: int) -> np.ndarray:
    """tr(A1 (U_r1 A2 U_r2*) A3 (U_r3 A4 U_r4*) ...) for a batch of tuples."""
    d = As[0].d
    ell = max(rho)
    sink = np.full((size, 1), d, dtype=np.int64)
    Us, Uinvs = [], []
    rows = np.arange(size)[:, None]
    for _ in range(ell):
        U = _batch_perms(rng, size, d)
        Ui = np.empty_like(U)
        Ui[rows, U] = np.arange(d)
        Us.append(np.hstack([U, sink]))
        Uinvs.append(np.hstack([Ui, sink]))
    P = np.broadcast_to(np.arange(d + 1, dtype=np.int64), (size, d + 1))
    for k in range(0, len(As), 2):
        a_odd = _ext(As[k])
        a_even = _ext(As[k + 1])
        U = Us[rho[k] - 1]
        Vi = Uinvs[rho[k + 1] - 1]
        # factor (U A_even V*)(c) = U[A_even[V^{-1}[c]]]
        mid = np.take_along_axis(U, a_even[Vi], axis=1)
        factor = a_odd[mid]
        P = np.take_along_axis(P, factor, axis=1)
    fixed = np.count_nonzero(P[:, :d] == np.arange(d), axis=1)
    return fixed / d


def alternating_trace_mean(As: Sequence[PartialPerm], rho: Sequence[int], trials: int, seed: int) -> SurveyResult:
    """Sample mean and 99% halfwidth of the alternating trace; `fraction` is the share of zero traces."""
    d, ell = _check_alternating(As, rho)
    _check_trials(trials)

    def block(b, size):
        rng = stream(seed, "alt", d, b)
        t = _alternating_traces(As, rho, rng, size)
        return float(t.sum()), float((t * t).sum()), int(np.count_nonzero(t == 0))

    parts = _map_blocks(block, trials)
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    zeros = sum(p[2] for p in parts)
    mean = s / trials
    var = max(s2 / trials - mean * mean, 0.0)
    hw = Z99 * math.sqrt(var / trials) if trials > 1 else 0.0
    f = zeros / trials
    return SurveyResult(
        "alt",
        d,
        trials,
        zeros,
        f,
        mean,
        hw,
        seed,
        trials >= RELIABLE_MIN,
        {"rho": list(rho), "max_trace": max(trace(a) for a in As)},
    )


def concentration_profile(
    As_for_d: Callable[[int], Sequence[PartialPerm]] | Sequence[PartialPerm],
    rho: Sequence[int],
    eps: float,
    d_list: Sequence[int],
    trials: int,
    seed: int,
    c_n: float = 1.0,
) -> list[SurveyResult]:
    """Per-d fraction of tuples whose alternating trace is below c_n * max tr(A_k) + eps."""
    _check_trials(trials)
    out = []
    for d in d_list:
        As = As_for_d(d) if callable(As_for_d) else As_for_d
        dd, _ = _check_alternating(As, rho)
        if dd != d:
            raise ValueError(f"factors for d={d} have dimension {dd}")
        thresh = c_n * max(trace(a) for a in As) + eps

        def block(b, size, As=As, d=d, thresh=thresh):
            rng = stream(seed, "conc", d, b)
            t = _alternating_traces(As, rho, rng, size)
            return int(np.count_nonzero(t < thresh)), float(t.sum())

        parts = _map_blocks(block, trials)
        count = sum(p[0] for p in parts)
        mean = sum(p[1] for p in parts) / trials
        out.append(_fraction_result("conc", d, trials, count, seed, mean, {"eps": eps, "threshold": thresh, "c_n": c_n}))
    return out


# joins


def join_success_survey(
    build: Callable[[int, int], SoficAssignment],
    n: int,
    delta: float,
    d_list: Sequence[int],
    trials: int,
    seed: int,
    F=None,
) -> list[SurveyResult]:
    """Per-d share of seeds whose joined model passes ga_check at (n, delta).

    build(d, trial_seed) returns the joined model; trial seeds are derived
    from the master seed, d and the trial index.
    """
    _check_trials(trials)
    out = []
    workers = max_workers()
    for d in d_list:
        seeds = [child_seed(seed, "join", d, t) for t in range(trials)]

        def one(s, d=d):
            model = build(d, s)
            return ga_check(model, F, n, delta).passed

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                ok = list(ex.map(one, seeds))
        else:
            ok = [one(s) for s in seeds]
        out.append(_fraction_result("join", d, trials, sum(ok), seed, params={"n": n, "delta": delta}))
    return out


def free_join_builder(G1, G2, U_identity: bool = False, n: int | None = None):
    """Builder joining amplified regular models of two finite groups."""
    from .construct import free_join, regular_model
    from .groups import FreeProduct
    from .permcore import Perm

    group = FreeProduct(f"{G1.name}*{G2.name}", [G1, G2])

    def build(d: int, s: int) -> SoficAssignment:
        if d % G1.order() or d % G2.order():
            raise ValueError(f"d={d} is not a multiple of both group orders")
        a = regular_model(G1, d // G1.order(), n or 3)
        b = regular_model(G2, d // G2.order(), n or 3)
        if U_identity:
            return free_join(a, b, group, U=Perm.identity(d), n=n)
        return free_join(a, b, group, seed=s, n=n)

    return build


def amalgam_join_builder(group, n: int | None = None, eps: float = 0.05):
    """Builder joining amplified regular models of the two finite factors of an amalgam."""
    from .construct import amalgamated_join, regular_model

    G1, G2 = group.factors

    def build(d: int, s: int) -> SoficAssignment:
        a = regular_model(G1, d // G1.order(), n or 3)
        b = regular_model(G2, d // G2.order(), n or 3)
        return amalgamated_join(a, b, group, s, n=n, eps=eps).model

    return build
