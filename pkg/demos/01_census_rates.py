"""
Counting models of a finite group
=================================

Every model of z2 in the strict regime is a fixed-point-free involution,
so the exact counts are the odd double factorials. The normalized rate
log(count) / (d log d) climbs slowly with d.
"""

from soficlab.census import dimension_profile, enumerate_ga, records_to_csv
from soficlab.groups import cyclic

z2 = cyclic(2)

# the orbit engine handles d = 12 instantly; the exhaustive one agrees on small d
orbit = dimension_profile(z2, [1], [1], 3, 0.05, [2, 4, 6, 8, 10, 12], mode="orbit")
exhaustive = dimension_profile(z2, [1], [1], 3, 0.05, [2, 4, 6, 8])
print(records_to_csv(orbit))
assert [r.count for r in exhaustive] == [r.count for r in orbit[:4]]

# odd d has no fixed-point-free involution
rec, _ = enumerate_ga(z2, [1], [1], 3, 0.05, 7)
print("d=7 count:", rec.count, "rate:", rec.rate)

# witnesses are full models; here are the three at d=4
_, wit = enumerate_ga(z2, [1], [1], 3, 0.05, 4, witnesses=True)
for w in wit:
    print(w.image(1).cycles())
