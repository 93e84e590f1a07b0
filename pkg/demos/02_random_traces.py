"""
Traces of random permutations
=============================

For uniform U, V the normalized trace of U V^-1 counts fixed points of a
uniform permutation. The share with at most one fixed point at d=10 has an
exact value from derangement numbers.
"""

from soficlab.permcore import PartialPerm, Perm
from soficlab.stats import alternating_trace_mean, derangement_fraction, trace_survey

exact = derangement_fraction(10, 1)
r = trace_survey(PartialPerm.identity(10), 0.15, 10_000, seed=7)
print(f"Monte Carlo {r.fraction:.4f} +- {r.confidence_halfwidth:.4f}, exact {exact:.5f}")

# the share of small traces grows with d
for d in (6, 12, 24, 48):
    print(d, trace_survey(PartialPerm.identity(d), 0.15, 10_000, seed=7).fraction)

# exhaustive enumeration at tiny d matches the closed form
print(trace_survey(PartialPerm.identity(5), 0.3, 0, seed=0, exhaustive=True).fraction, derangement_fraction(5, 1))

# alternating products of a fixed-point-free involution conjugated by random
# permutations have small expected trace
d = 30
A = Perm.from_cycles([(i, i + 1) for i in range(1, d, 2)], d)
alt = alternating_trace_mean([A] * 4, [1, 2, 1, 2], 10_000, seed=11)
print(f"alternating mean {alt.mean:.4f} +- {alt.confidence_halfwidth:.4f}")
