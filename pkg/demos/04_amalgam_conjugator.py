"""
Amalgamated joins and approximate conjugators
=============================================

Joining over a shared subgroup first needs the two models to agree on it.
The conjugator search finds a relabeling that matches one model to the
other; the amalgamated join uses it on the free orbits of the subgroup
and randomizes only in ways that commute with the aligned action.
"""

import numpy as np

from soficlab.construct import amalgamated_join, approx_conjugator, regular_model, relabel
from soficlab.groups import builtin_group, cyclic
from soficlab.permcore import random_perm
from soficlab.verify import ga_check

z4 = cyclic(4)
A = builtin_group("z4*_{z2}z4")
a = regular_model(z4, 12, 3)
b = relabel(regular_model(z4, 12, 3), random_perm(48, np.random.default_rng(0)))

gamma, resid = approx_conjugator(a, b)
print("conjugator residual:", resid)

res = amalgamated_join(a, b, A, seed=5, n=3)
print("free orbits used:", res.orbits, "subgroup agreement defect:", res.h_agreement_defect)
print("passes at 0.35:", ga_check(res.model, n=3, delta=0.35).passed)

skipped = amalgamated_join(a, b, A, seed=5, n=3, align=False)
print("without alignment the subgroup defect is", round(skipped.h_total_defect, 4))
