"""Independent reference computations used across the test suite.

Everything here goes through scipy (HiGHS, Qhull) or plain enumeration so
that it shares no code path with the package's own solvers.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from strata_bounds.linsys import build_A, latent_to_observed
from strata_bounds.model import (
    LatentDistribution,
    Support,
    catalog,
    enumerate_response_types,
    explicit_model,
    standard_parameters,
)


def highs(c, A_eq, b_eq, sense="min", A_ub=None, b_ub=None):
    sgn = 1.0 if sense == "min" else -1.0
    r = linprog(sgn * np.asarray(c, float), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                bounds=(0, None), method="highs")
    return r.status, (sgn * r.fun if r.status == 0 else None)


def fractional_bounds(system, p):
    """Sharp bounds on E[g 1{R'}] / Q(R') by the Charnes-Cooper transformation.

    Variables (y, t) with y = q / Q(R'), t = 1 / Q(R'):
    min/max g'y  s.t.  A0 y = beta0 t,  1{R'}'y = 1,  y, t >= 0.
    """
    A0 = np.asarray(system.A0)
    beta0 = system.beta0(p)
    c = system.g_vector()
    ind = system.conditioning_indicator()
    m, k = A0.shape
    A = np.zeros((m + 1, k + 1))
    A[:m, :k] = A0
    A[:m, k] = -beta0
    A[m, :k] = ind
    b = np.zeros(m + 1)
    b[m] = 1.0
    cc = np.concatenate([c, [0.0]])
    s1, lo = highs(cc, A, b, "min")
    s2, hi = highs(cc, A, b, "max")
    return (lo, hi) if s1 == 0 and s2 == 0 else None


def mass_bounds(system, p):
    A0 = np.asarray(system.A0)
    beta0 = system.beta0(p)
    ind = system.conditioning_indicator()
    _, lo = highs(ind, A0, beta0, "min")
    _, hi = highs(ind, A0, beta0, "max")
    return lo, hi


def wald(cells) -> float:
    """(E[Y|Z=1]-E[Y|Z=0]) / (E[D|Z=1]-E[D|Z=0]) for binary cells in (z, d, y) order."""
    c = np.asarray(cells).reshape(2, 2, 2)
    ey = c[:, :, 1].sum(axis=1)
    ed = c[:, 1, :].sum(axis=1)
    return float((ey[1] - ey[0]) / (ed[1] - ed[0]))


def pearl_inequalities(support: Support):
    """Rows ``a`` with ``a . cells <= 1``: for each d, sum_y P(y, d | z_y) over any choice z_y."""
    rows = []
    for d in range(support.n_d):
        for choice in itertools.product(range(support.n_z), repeat=support.n_y):
            if len(set(choice)) < 2:
                continue
            a = np.zeros(support.n_cells)
            for y, z in enumerate(choice):
                a[support.cell_index(y, d, z)] = 1.0
            rows.append(a)
    return rows


def fiber_points(A1: np.ndarray, m_star: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    """All nonnegative integer m with A1 m = A1 m_star, one per row.

    Columns split into a pivot set (independent columns of A1) and free
    columns.  Every nonnegative integer assignment of the free columns with
    total at most sum(m_star) is tried; the pivot part is then determined and
    kept when it is integral and nonnegative.
    """
    A1 = np.asarray(A1, dtype=float)
    total = int(m_star.sum())
    target = A1 @ m_star
    k = A1.shape[1]
    piv = []
    for j in range(k):
        if np.linalg.matrix_rank(A1[:, piv + [j]]) > len(piv):
            piv.append(j)
    free = [j for j in range(k) if j not in piv]
    B = A1[:, piv]
    Bpinv = np.linalg.pinv(B)
    Af = A1[:, free]
    inner = min(len(free), 2)
    combos = list(itertools.product(range(total + 1), repeat=inner))
    tail = np.array(combos, dtype=float).reshape(len(combos), inner)
    out = []
    for head in itertools.product(range(total + 1), repeat=len(free) - inner):
        left = total - sum(head)
        if left < 0:
            continue
        mf = np.hstack([np.tile(np.array(head, dtype=float), (len(tail), 1)), tail])
        mf = mf[tail.sum(axis=1) <= left]
        rhs = target[None, :] - mf @ Af.T
        mb = np.round(rhs @ Bpinv.T)
        ok = np.all(mb >= 0, axis=1) & np.all(np.abs(mb @ B.T - rhs) < 1e-7, axis=1)
        m = np.zeros((int(ok.sum()), k))
        m[:, piv] = mb[ok]
        m[:, free] = mf[ok]
        out.append(m)
    return np.vstack(out)


def binary_no_defier_dgp(seed: int = 7):
    """Fixed DGP: 25% never takers, 50% compliers, 25% always takers, Dirichlet outcomes."""
    s = Support.from_sizes(2, 2, 2)
    m = catalog("no_defier_generalized", s)
    par = standard_parameters("ate_contrast", m, 1, 0, conditioning=["01"])
    system = build_A(m, par, 0.0)
    types = list(m.admissible)
    share = {(0, 0): 0.25, (0, 1): 0.5, (1, 1): 0.25}
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(4) * 2, size=3)
    q = np.zeros(len(types))
    for j, r in enumerate(types):
        q[j] = share[r.treatments] * w[list(share).index(r.treatments)][r.outcomes[0] * 2 + r.outcomes[1]]
    late = par.value(LatentDistribution(types, q))
    return s, m, par, latent_to_observed(q, system), late


def draw_counts(cells, support: Support, n: int, rng: np.random.Generator, z_probs=None):
    k = support.n_y * support.n_d
    z_probs = np.full(support.n_z, 1.0 / support.n_z) if z_probs is None else z_probs
    nz = rng.multinomial(n, z_probs)
    blocks = np.asarray(cells).reshape(support.n_z, k)
    return np.concatenate([rng.multinomial(int(nz[z]), blocks[z] / blocks[z].sum()) for z in range(support.n_z)])


def random_small_model(rng: np.random.Generator, max_types: int = 6):
    """Random support with at most three values per variable and a random admissible set."""
    s = Support.from_sizes(2, int(rng.integers(2, 4)), int(rng.integers(2, 4)))
    all_types = enumerate_response_types(s, cap=10_000)
    k = int(rng.integers(3, max_types + 1))
    pick = rng.choice(len(all_types), size=k, replace=False)
    return explicit_model(s, [all_types[i] for i in sorted(pick)])
