"""Which observed distributions can a model produce?

The image of the admissible simplex under the cell map is a polytope; its
facets are the model's sharp testable implications.  With no restriction
they are the classical instrument inequalities.  Allowing a small share of
defiers weakens the no-defier inequalities by exactly that share.
"""

import numpy as np

from strata_bounds.lp.polyhedra import format_hrep
from strata_bounds.idset import testable_implications
from strata_bounds.model import Support, catalog

s = Support.from_sizes(2, 2, 2)

for name, kw in (("unrestricted", {}), ("no_defier_generalized", {}),
                 ("no_defier_generalized", {"relax_eps": 0.05})):
    imp = testable_implications(catalog(name, s, **kw))
    label = name + (f" (defiers <= {kw['relax_eps']})" if kw else "")
    print(f"{label}: {imp.nontrivial} nontrivial inequalities")
    lines = format_hrep(imp.hrep, imp.names).splitlines()
    n_eq = len(imp.hrep.exact_E)
    for line, trivial in zip(lines[n_eq:], imp.trivial):
        if not trivial:
            print("   ", line)
    print()

# treated share drops from 0.45 to 0.42 when the instrument switches on
# (y,d) = 00, 10, 01, 11 within each instrument block
cells = np.array([0.30, 0.25, 0.25, 0.20, 0.33, 0.25, 0.22, 0.20])
for kw in ({}, {"relax_eps": 0.05}):
    imp = testable_implications(catalog("no_defier_generalized", s, **kw))
    print(f"cells consistent with no defiers {kw or ''}: {imp.hrep.contains(cells)}")
