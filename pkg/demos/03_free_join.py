"""
Joining two models into a model of a free product
=================================================

Two exact regular models of z2 are combined on the same points, one of them
conjugated by a random permutation U. Words that alternate between the two
factors then have small trace, and the join passes the check for most seeds
once d is large enough. With U fixed to the identity it never does.
"""

from soficlab.construct import free_join, regular_model
from soficlab.groups import builtin_group, cyclic
from soficlab.permcore import Perm
from soficlab.stats import free_join_builder, join_success_survey, results_to_csv
from soficlab.verify import ga_check

z2 = cyclic(2)
P = builtin_group("z2*z2")
a = regular_model(z2, 25, 4)
J = free_join(a, a, P, seed=3, n=4)
print(ga_check(J, n=4, delta=0.3).table())

bad = free_join(a, a, P, U=Perm.identity(50), n=4)
print("identity conjugator passes:", ga_check(bad, n=4, delta=0.3).passed)

rows = join_success_survey(free_join_builder(z2, z2, n=4), 4, 0.3, [20, 50, 100], 100, seed=1)
print(results_to_csv(rows))
