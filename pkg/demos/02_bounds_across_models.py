"""How assumptions shrink the identified set in a binary instrument design.

The same data are read through a ladder of response-type restrictions:
none, monotone treatment response, no defiers, and both.  Under no defiers
the complier mass is point identified and the complier effect has the
familiar Wald form.
"""

import numpy as np

from strata_bounds.empirics import ObservedDistribution
from strata_bounds.idset import identified_set
from strata_bounds.model import Support, catalog, standard_parameters

s = Support.from_sizes(2, 2, 2)
# p[y,d|z] for z = 0 then z = 1, ordered (y,d) = 00, 10, 01, 11
cells = np.array([0.40, 0.35, 0.05, 0.20,
                  0.20, 0.15, 0.15, 0.50])
p = ObservedDistribution.from_probabilities(s, cells)

treated = lambda z: cells[4 * z + 2] + cells[4 * z + 3]
outcome = lambda z: cells[4 * z + 1] + cells[4 * z + 3]
wald = (outcome(1) - outcome(0)) / (treated(1) - treated(0))

unres = catalog("unrestricted", s)
ladder = {
    "unrestricted": unres,
    "mtr": catalog("mtr", s),
    "no defiers": catalog("no_defier_generalized", s),
    "no defiers + mtr": catalog("no_defier_generalized", s).intersect(catalog("mtr", s)),
}

print("population ATE bounds")
for name, m in ladder.items():
    r = identified_set(m, standard_parameters("ate_contrast", m, 1, 0), p)
    print(f"  {name:18s} [{r.lower:+.3f}, {r.upper:+.3f}]  width {r.upper - r.lower:.3f}")

print("\ncomplier effect")
for name, m in ladder.items():
    par = standard_parameters("ate_contrast", m, 1, 0, conditioning=["01"])
    r = identified_set(m, par, p)
    if not r.nonempty:
        print(f"  {name:18s} {r.status}")
        continue
    print(f"  {name:18s} [{r.lower:+.3f}, {r.upper:+.3f}]  via {r.method}")
print(f"  Wald ratio         {wald:+.3f}")
