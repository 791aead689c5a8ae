"""Worked three-treatment example with one-sided noncompliance.

``Y`` is binary, ``D`` and ``Z`` take values ``0, 1, 2`` and the admissible
treatment types are ``d(j) in {0, j}``.  The target is the average effect of
treatment 1 versus 0 among subjects with treatment type ``(0, 1, 2)``.

This module holds the example's data tables and closed-form expressions for
the stratum mass and the inner bounds, both the sharp ones and the older
step-by-step ones whose mass interval is wider.  It doubles as an oracle for
the generic LP machinery in :mod:`strata_bounds.idset`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .empirics import ObservedDistribution
from .linsys import build_A, latent_to_observed
from .model import LatentDistribution, ResponseType, StrataModel, Support, catalog, standard_parameters

# p[y,d|z] keyed by (y, d, z); unlisted cells are zero
EXAMPLE_CELLS = {
    (0, 0, 0): 0.764, (1, 0, 0): 0.236,
    (0, 0, 1): 0.412, (1, 0, 1): 0.107, (0, 1, 1): 0.301, (1, 1, 1): 0.180,
    (0, 0, 2): 0.117, (1, 0, 2): 0.169, (0, 2, 2): 0.475, (1, 2, 2): 0.239,
}

# q keyed by (y(0)y(1)y(2), d(0)d(1)d(2)); printed to three decimals
EXAMPLE_LATENT = {
    ("000", "000"): 0.002, ("000", "010"): 0.002, ("000", "002"): 0.017, ("000", "012"): 0.025,
    ("001", "000"): 0.002, ("001", "010"): 0.002, ("001", "002"): 0.002, ("001", "012"): 0.195,
    ("010", "000"): 0.101, ("010", "010"): 0.002, ("010", "002"): 0.272, ("010", "012"): 0.120,
    ("011", "000"): 0.002, ("011", "010"): 0.004, ("011", "002"): 0.014, ("011", "012"): 0.002,
    ("100", "000"): 0.002, ("100", "010"): 0.002, ("100", "002"): 0.022, ("100", "012"): 0.011,
    ("101", "000"): 0.034, ("101", "010"): 0.062, ("101", "002"): 0.015, ("101", "012"): 0.002,
    ("110", "000"): 0.002, ("110", "010"): 0.002, ("110", "002"): 0.006, ("110", "012"): 0.002,
    ("111", "000"): 0.024, ("111", "010"): 0.041, ("111", "002"): 0.002, ("111", "012"): 0.007,
}

EXPECTED = {
    "pi_tilde": (0.195, 0.481),
    "pi_sharp": (0.235, 0.419),
    "cs_bounds": (-0.219, 0.923),
    "sharp_bounds": (-0.219, 0.766),
}
TOLERANCE = {"pi_tilde": 1e-9, "pi_sharp": 1e-9, "cs_bounds": 2e-3, "sharp_bounds": 2e-3}
TABLE_ROUNDING = 5e-3
GOLDEN_GRID = 2001


def cs_support() -> Support:
    return Support.from_sizes(2, 3, 3)


def cs_model() -> StrataModel:
    return catalog("cheng_small_mono1", cs_support())


def cs_parameter(model: StrataModel | None = None):
    """``E[Y(1) - Y(0) | D(z) = (0, 1, 2)]``."""
    model = cs_model() if model is None else model
    return standard_parameters("ate_contrast", model, 1, 0, conditioning=["012"])


def example_cells() -> np.ndarray:
    s = cs_support()
    cells = np.zeros(s.n_cells)
    for (y, d, z), v in EXAMPLE_CELLS.items():
        cells[s.cell_index(y, d, z)] = v
    return cells


def example_distribution(n_per_z: int | None = None) -> ObservedDistribution:
    """The example distribution as a population, or as counts ``n_per_z * p`` in every instrument stratum."""
    s = cs_support()
    cells = example_cells()
    if n_per_z is None:
        return ObservedDistribution.from_probabilities(s, cells)
    counts = np.round(cells * n_per_z).astype(np.int64)
    return ObservedDistribution.from_counts(s, counts)


def example_latent() -> LatentDistribution:
    types = []
    for (ys, ds), v in EXAMPLE_LATENT.items():
        types.append((ResponseType(tuple(map(int, ys)), tuple(map(int, ds))), v))
    return LatentDistribution(tuple(t for t, _ in types), np.array([v for _, v in types]),
                              atol=TABLE_ROUNDING)


def example_pushforward() -> np.ndarray:
    """Cells implied by the rounded latent table (row order of the linear system)."""
    system = build_A(cs_model())
    return latent_to_observed(example_latent(), system)


def _getter(p) -> Callable[[int, int, int], float]:
    cells = np.asarray(getattr(p, "cells", p), dtype=float).ravel()
    s = cs_support()
    if cells.size != s.n_cells:
        raise ValueError(f"expected {s.n_cells} cells, got {cells.size}")
    return lambda y, d, z: float(cells[s.cell_index(y, d, z)])


def cs_pi_tilde(p) -> tuple[float, float]:
    """Mass interval for the ``(0, 1, 2)`` stratum from the step-by-step argument (not sharp)."""
    c = _getter(p)
    p1_1 = c(0, 1, 1) + c(1, 1, 1)
    p0_2 = c(0, 0, 2) + c(1, 0, 2)
    p2_2 = c(0, 2, 2) + c(1, 2, 2)
    return max(0.0, p1_1 - p0_2), min(p1_1, p2_2)


def cs_pi_terms(p) -> tuple[list[float], list[float]]:
    """The four lower and four upper linear terms of the sharp mass interval."""
    c = _getter(p)
    lower = [
        0.0,
        c(0, 1, 1) + c(1, 1, 1) - (c(0, 0, 2) + c(1, 0, 2)),
        c(1, 0, 0) - c(1, 0, 1) - c(1, 0, 2),
        1.0 - c(0, 0, 1) - c(0, 0, 2) - c(1, 0, 0),
    ]
    upper = [
        c(0, 1, 1) + c(1, 1, 1),
        c(0, 2, 2) + c(1, 2, 2),
        1.0 - c(0, 0, 1) - c(1, 0, 2),
        1.0 - c(1, 0, 1) - c(0, 0, 2),
    ]
    return lower, upper


def cs_pi_sharp_closed_form(p) -> tuple[float, float]:
    lower, upper = cs_pi_terms(p)
    return max(lower), min(upper)


@dataclass(frozen=True)
class InnerInterval:
    scaled: tuple[float, float]
    conditional: tuple[float, float]
    stepwise: tuple[float, float]


def cs_inner_interval(p, pi: float) -> InnerInterval:
    """Bounds on ``E[Y(1) 1{stratum}]`` given the stratum mass ``pi``.

    ``scaled`` is the interval for the product with the indicator,
    ``conditional`` divides it by ``pi`` and ``stepwise`` evaluates the
    conditional bound through success rates ``P(Y=1 | D=1, Z=1)`` and
    ``P(D=1 | Z=1)``.  The last two agree whenever ``P(D=1 | Z=1) > 0``.
    """
    if not 0.0 < pi <= 1.0:
        raise ValueError(f"pi must lie in (0, 1], got {pi}")
    c = _getter(p)
    p01, p11 = c(0, 1, 1), c(1, 1, 1)
    lo, hi = max(0.0, pi - p01), min(pi, p11)
    p_d = p01 + p11
    if p_d > 0:
        rate = p11 / p_d
        share = pi / p_d
        step = (max(0.0, 1.0 - (1.0 - rate) / share), min(1.0, rate / share))
    else:
        step = (np.nan, np.nan)
    return InnerInterval((lo, hi), (lo / pi, hi / pi), step)


def cs_inner_y0(p, pi: float) -> tuple[float, float]:
    """Bounds on ``E[Y(0) 1{stratum}]`` given the stratum mass ``pi``.

    Untreated outcomes are observed under ``z = 0`` for everybody and under
    ``z = 1, 2`` for the types that stay untreated there; the remaining
    strata masses follow from ``pi`` and the treatment shares.
    """
    c = _getter(p)
    p1_1 = c(0, 1, 1) + c(1, 1, 1)
    p2_2 = c(0, 2, 2) + c(1, 2, 2)
    c0 = c(1, 0, 0) - c(1, 0, 1) - c(1, 0, 2)
    pi010 = p1_1 - pi
    pi002 = p2_2 - pi
    pi000 = pi - (p1_1 + p2_2 - 1.0)
    x_lo = max(0.0, c(1, 0, 1) - pi002, c(1, 0, 2) - pi010)
    x_hi = min(pi000, c(1, 0, 1), c(1, 0, 2))
    return max(0.0, c0 + x_lo), min(pi, c0 + x_hi)


def cs_difference_bounds(p, pi: float) -> tuple[float, float]:
    """Lower and upper curves for the conditional effect at stratum mass ``pi``."""
    L1, U1 = cs_inner_interval(p, pi).scaled
    L0, U0 = cs_inner_y0(p, pi)
    return (L1 - U0) / pi, (U1 - L0) / pi


@dataclass
class FinalBounds:
    lower: float
    upper: float
    pi_interval: tuple[float, float]
    argmin_pi: float
    argmax_pi: float
    crossing: list = field(default_factory=list)

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lower, self.upper)


def cs_final_bounds(p, pi_interval: tuple[float, float] | None = None, grid_n: int = GOLDEN_GRID,
                    refine: int = 5, pi_floor: float = 1e-6) -> FinalBounds:
    """Outer search of the difference curves over ``pi_interval`` (default: the wide interval).

    ``crossing`` lists grid points where the upper curve falls below the lower one.
    """
    lo, hi = cs_pi_tilde(p) if pi_interval is None else pi_interval
    lo = max(lo, pi_floor)
    grid = np.linspace(lo, hi, grid_n)
    curves = np.array([cs_difference_bounds(p, t) for t in grid])
    step = (hi - lo) / max(grid_n - 1, 1)

    def polish(k: int, sgn: float) -> tuple[float, float]:
        i = int(np.argmin(sgn * curves[:, k]))
        best_v, best_t = sgn * curves[i, k], grid[i]
        h = step / 2
        for _ in range(refine):
            centre = best_t
            for t in (centre - h, centre + h):
                if lo <= t <= hi:
                    v = sgn * cs_difference_bounds(p, t)[k]
                    if v < best_v:
                        best_v, best_t = v, t
            h /= 2
        return sgn * best_v, best_t

    L, tL = polish(0, 1.0)
    U, tU = polish(1, -1.0)
    crossing = [float(t) for t, (a, b) in zip(grid, curves) if b < a - 1e-12]
    return FinalBounds(L, U, (lo, hi), tL, tU, crossing)


FIGURE_COLUMNS = ["pi", "lower", "upper", "pi_tilde_lo", "pi_tilde_hi", "pi_sharp_lo", "pi_sharp_hi"]


def emit_figure_data(p, grid_n: int = 101, path=None) -> list[dict]:
    """Curves over the wide mass interval with both intervals' endpoints as constant columns."""
    t_lo, t_hi = cs_pi_tilde(p)
    s_lo, s_hi = cs_pi_sharp_closed_form(p)
    rows = []
    for t in np.linspace(max(t_lo, 1e-12), t_hi, grid_n):
        a, b = cs_difference_bounds(p, t)
        rows.append(dict(zip(FIGURE_COLUMNS, map(float, (t, a, b, t_lo, t_hi, s_lo, s_hi)))))
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(figure_csv(rows))
    return rows


def figure_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, FIGURE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) for k, v in r.items()})
    return buf.getvalue()


def random_consistent_p(rng: np.random.Generator, concentration: float = 1.0) -> np.ndarray:
    """Cells of a random latent distribution over the admissible types."""
    system = build_A(cs_model())
    q = rng.dirichlet(np.full(system.n_types, concentration))
    return latent_to_observed(q, system)


def replicate_example(grid_n: int = GOLDEN_GRID, threads: int | None = None) -> dict:
    """Run the whole example and compare each interval with its reference value."""
    from .idset import bounds_partial_mass, check_consistency, stratum_mass_interval

    p = example_distribution()
    model = cs_model()
    param = cs_parameter(model)
    system = build_A(model, param, 0.0)
    cons = check_consistency(system.A0, system.beta0(p), system)
    push = example_pushforward()
    pi_t = cs_pi_tilde(p)
    pi_s = cs_pi_sharp_closed_form(p)
    pi_lp = stratum_mass_interval(system, param.conditioning, p).interval
    cs = cs_final_bounds(p, pi_t, grid_n)
    sharp = cs_final_bounds(p, pi_s, grid_n)
    lp_sharp = bounds_partial_mass(system, p, grid_n=grid_n, threads=threads)
    lp_wide = bounds_partial_mass(system, p, grid_n=grid_n, pi_interval=pi_t, threads=threads)
    results = {
        "pi_tilde": pi_t,
        "pi_sharp": pi_s,
        "cs_bounds": cs.interval,
        "sharp_bounds": sharp.interval,
    }
    checks = {}
    for k, v in results.items():
        err = max(abs(a - b) for a, b in zip(v, EXPECTED[k]))
        checks[k] = {"value": [float(x) for x in v], "expected": list(EXPECTED[k]),
                     "tolerance": TOLERANCE[k], "error": err, "pass": bool(err <= TOLERANCE[k])}
    extra = {
        "pi_sharp_lp": [float(x) for x in pi_lp],
        "sharp_bounds_lp": [lp_sharp.lower, lp_sharp.upper],
        "cs_bounds_lp": [lp_wide.lower, lp_wide.upper],
        "latent_table_max_error": float(np.abs(push - example_cells()).max()),
        "consistent": bool(cons.feasible),
        "crossing_pi": cs.crossing[:1] + cs.crossing[-1:],
        "n_crossing": len(cs.crossing),
    }
    return {"checks": checks, "extra": extra, "all_pass": all(c["pass"] for c in checks.values())}
