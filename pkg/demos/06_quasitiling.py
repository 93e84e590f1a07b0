"""
Tiling a model of the integers
==============================

Greedy tiling covers most points of a cyclic shift model by translates of
intervals. On d=60 the interval [0, 10) tiles exactly; on d=64 a few points
are left over.
"""

from soficlab.construct import interval_tile, quasitile, shift_model
from soficlab.groups import IntegerGroup

Z = IntegerGroup("Z")
for d in (60, 64):
    res = quasitile(shift_model(Z, d, 10), [interval_tile(Z, 0, 10)], 0.05)
    print(d, "centers", res.tiles_used[0][1], "coverage", res.coverage, "certificate", res.certificate_holds())

# two tile sizes: the large tile goes first, the small one fills gaps
res = quasitile(shift_model(Z, 56, 10), [interval_tile(Z, 0, 3), interval_tile(Z, 0, 10)], 0.0)
print(res.tiles_used, "coverage", res.coverage, "lambda", [round(x, 3) for x in res.lambda_hat])
