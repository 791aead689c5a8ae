"""Testing the restrictions themselves.

The specification test asks whether any admissible latent distribution
reproduces the observed cells up to sampling noise.  Data drawn from a
no-defier population pass; data with a visible defier share do not.
"""

import numpy as np

from strata_bounds.empirics import ObservedDistribution
from strata_bounds.inference import TestConfig, specification_test
from strata_bounds.model import Support, catalog

s = Support.from_sizes(2, 2, 2)
model = catalog("no_defier_generalized", s)
rng = np.random.default_rng(5)
designs = {
    "no defiers": np.array([0.40, 0.35, 0.05, 0.20, 0.20, 0.15, 0.15, 0.50]),
    "defiers": np.array([0.20, 0.10, 0.30, 0.40, 0.35, 0.30, 0.15, 0.20]),
}

for label, cells in designs.items():
    counts = np.concatenate([rng.multinomial(1500, cells[:4]), rng.multinomial(1500, cells[4:])])
    out = specification_test(model, ObservedDistribution.from_counts(s, counts), TestConfig(bootstrap_B=300, seed=2))
    verdict = "reject" if out.reject else "do not reject"
    print(f"{label:11s} T = {out.statistic:7.3f}  c = {out.critical_value:6.3f}  -> {verdict}")
