"""
Labeled models of a Bernoulli action
====================================

Labeling points i.i.d. from a base distribution turns a group model into a
model of the Bernoulli action. The bridge evaluator reads the same data as a
model of the inverse semigroup of cell projections times group elements.
"""

from soficlab.construct import amplify, bernoulli_model, phi_bridge, regular_model
from soficlab.groups import cyclic
from soficlab.verify import ha_check, sa_check

sigma = amplify(regular_model(cyclic(2), 1, 3), 500)
passed = 0
for seed in range(20):
    m = bernoulli_model(sigma, [0.5, 0.5], seed=seed)
    passed += ha_check(m, None, 3, 0.1).passed
print(f"{passed}/20 labelings pass at d={sigma.d}")

# small d so the table stays readable
m = bernoulli_model(regular_model(cyclic(3), 4, 2), [0.5, 0.5], seed=1)
h = ha_check(m, None, 2, 1.0)
s = sa_check(phi_bridge(m), None, 2, 1.0)
print("action defect", round(h.max_defect, 4), "bridged defect", round(s.max_defect, 4))
print("bound 3 n delta:", round(3 * 2 * h.max_defect, 4))
