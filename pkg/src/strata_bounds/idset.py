"""Sharp identified sets for ``E[g(R) | R in R']``.

When the stratum mass ``Q{R in R'}`` is pinned down by the data the bounds
are a pair of LPs.  Otherwise the mass ``pi`` ranges over an interval and
the bounds come from an outer search over ``pi`` of inner LPs that fix the
stratum mass, each divided by ``pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _parallel
from .linsys import SystemMatrix, build_A
from .lp.simplex import LPResult, StandardLP, solve
from .model import ModelError, ParameterSpec, StrataModel

DEFAULT_GRID = 1001
DEFAULT_PI_FLOOR = 1e-6
DEFAULT_REFINE = 5
SINGLETON_TOL = 1e-9


@dataclass
class ConsistencyResult:
    feasible: bool
    q: np.ndarray | None
    certificate: np.ndarray | None
    inequality: str | None = None
    violation: float = 0.0


@dataclass
class BoundResult:
    lower: float
    upper: float
    lower_attained: bool
    upper_attained: bool
    status: str
    pi_interval: tuple | None
    method: str = ""
    diagnostics: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    certificate: str | None = None

    @property
    def nonempty(self) -> bool:
        return self.status == "nonempty"

    def to_dict(self, columns=None) -> dict:
        def wit(w):
            out = {k: v for k, v in w.items() if k != "q"}
            q = w.get("q")
            if q is not None:
                labels = [c.label() if hasattr(c, "label") else str(c) for c in columns] if columns else None
                out["q"] = {(labels[i] if labels else str(i)): float(q[i])
                            for i in np.flatnonzero(q > 1e-12)}
            return out

        return {
            "status": self.status,
            "lower": None if not self.nonempty else float(self.lower),
            "upper": None if not self.nonempty else float(self.upper),
            "lower_attained": self.lower_attained,
            "upper_attained": self.upper_attained,
            "pi_interval": None if self.pi_interval is None else [float(v) for v in self.pi_interval],
            "method": self.method,
            "diagnostics": self.diagnostics,
            "witnesses": {k: wit(v) for k, v in self.witnesses.items()},
            "certificate": self.certificate,
        }


def _farkas_text(y: np.ndarray, system: SystemMatrix | None, n_rows: int, beta0: np.ndarray) -> tuple[str, float]:
    """Render ``y' beta <= 0`` (valid for every rationalizable beta) over the cells."""
    if system is not None:
        names = system.row_names()[:n_rows]
        ncell = system.n_cells
    else:
        names = [f"b[{i}]" for i in range(n_rows)]
        ncell = n_rows
    coef = y[:ncell]
    const = -float(y[ncell:] @ beta0[ncell:])
    scale = np.abs(coef).max() if np.abs(coef).max() > 0 else 1.0
    coef, const = coef / scale, const / scale
    terms = [f"{v:+.6g} {names[i]}" for i, v in enumerate(coef) if abs(v) > 1e-10]
    lhs = " ".join(terms) if terms else "0"
    violation = float(coef @ beta0[:ncell] - const)
    return f"{lhs} <= {const:.6g}", violation


def check_consistency(A0, beta0, system: SystemMatrix | None = None) -> ConsistencyResult:
    """Is ``A0 q = beta0`` solvable with ``q >= 0``?  Infeasibility comes with a violated inequality."""
    A0 = np.asarray(A0, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    res = solve(StandardLP(np.zeros(A0.shape[1]), A0, beta0))
    if res.optimal:
        return ConsistencyResult(True, res.x, None)
    y = np.asarray(res.certificate, dtype=float)
    text, viol = _farkas_text(y, system, A0.shape[0], beta0)
    return ConsistencyResult(False, None, y, text, viol)


def _empty_model(cons: ConsistencyResult, method: str) -> BoundResult:
    return BoundResult(np.nan, np.nan, False, False, "empty_model", None, method,
                       {"violation": cons.violation}, {}, cons.inequality)


def _empty_stratum(pi, method: str, diag=None) -> BoundResult:
    return BoundResult(np.nan, np.nan, False, False, "empty_stratum", pi, method, diag or {})


def _minmax(c, M, b, basis_lo=None, basis_hi=None) -> tuple[LPResult, LPResult]:
    lo = solve(StandardLP(c, M, b, "min"), basis=basis_lo)
    hi = solve(StandardLP(c, M, b, "max"), basis=basis_hi)
    return lo, hi


def _observed_beta0(system: SystemMatrix, p) -> np.ndarray:
    return system.beta(p)[:-1]


@dataclass
class MassInterval:
    lower: float
    upper: float
    feasible: bool
    lp_lower: LPResult | None = None
    lp_upper: LPResult | None = None
    consistency: ConsistencyResult | None = None

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lower, self.upper)


def stratum_mass_interval(system: SystemMatrix, stratum, p) -> MassInterval:
    """Range of ``Q{R in stratum}`` over latent distributions rationalizing ``p``."""
    beta0 = _observed_beta0(system, p)
    cons = check_consistency(system.A0, beta0, system)
    if not cons.feasible:
        return MassInterval(np.nan, np.nan, False, consistency=cons)
    c = system.stratum_indicator(stratum)
    lo, hi = _minmax(c, system.A0, beta0)
    if not (lo.optimal and hi.optimal):
        raise ModelError("stratum mass LP failed on a consistent system")
    clip = lambda v: float(min(max(v, 0.0), 1.0))
    return MassInterval(clip(lo.value), clip(hi.value), True, lo, hi, cons)


def bounds_identified_mass(system: SystemMatrix, p, mass: float, pi=None) -> BoundResult:
    """Bounds when the stratum mass equals ``mass`` for every rationalizing ``Q``."""
    pi_iv = (mass, mass) if pi is None else pi
    if mass <= SINGLETON_TOL:
        return _empty_stratum(pi_iv, "identified_mass")
    beta0 = _observed_beta0(system, p)
    c = system.g_vector() / mass
    lo, hi = _minmax(c, system.A0, beta0)
    if lo.status == "infeasible":
        return _empty_model(check_consistency(system.A0, beta0, system), "identified_mass")
    if not (lo.optimal and hi.optimal):
        raise ModelError(f"identified-mass LP ended with status {lo.status}/{hi.status}")
    wit = {"lower": {"pi": mass, "q": lo.x, "value": lo.value},
           "upper": {"pi": mass, "q": hi.x, "value": hi.value}}
    return BoundResult(lo.value, hi.value, True, True, "nonempty", pi_iv, "identified_mass",
                       {"lp_solves": 2, "lp_iterations": lo.iterations + hi.iterations}, wit)


class _Inner:
    """Inner LPs over ``A(R') q = beta(P, pi)`` for a fixed ``pi``."""

    def __init__(self, system: SystemMatrix, p):
        self.M = system.with_stratum_row()
        self.b0 = system.beta(p, tail_pi=0.0)
        self.c = system.g_vector()

    def b(self, pi: float) -> np.ndarray:
        b = self.b0.copy()
        b[-1] = pi
        return b

    def solve(self, pi: float, sense: str, basis=None) -> LPResult:
        return solve(StandardLP(self.c, self.M, self.b(pi), sense), basis=basis)

    def piece(self, pi: float, res: LPResult, lo: float, hi: float) -> list[tuple[float, np.ndarray]]:
        """Endpoints of the ``pi`` range over which ``res``'s basis stays optimal.

        On that range the inner value is linear in ``pi``, so the value over ``pi``
        is monotone there and its extremes sit at the range ends.
        """
        if res.basis is None:
            return []
        rows, cols = (np.asarray(v, dtype=int) for v in res.basis)
        if rows.size == 0:
            return []
        B = self.M[np.ix_(rows, cols)]
        try:
            u = np.linalg.solve(B, self.b0[rows])
            e = np.zeros(self.M.shape[0])
            e[-1] = 1.0
            v = np.linalg.solve(B, e[rows])
        except np.linalg.LinAlgError:
            return []
        a, z = lo, hi
        for ui, vi in zip(u, v):
            if vi > 1e-12:
                a = max(a, -ui / vi)
            elif vi < -1e-12:
                z = min(z, -ui / vi)
        out = []
        for t in {a, z}:
            if not lo <= t <= hi:
                continue
            x = np.zeros(self.M.shape[1])
            x[cols] = np.maximum(u + t * v, 0.0)
            if np.abs(self.M @ x - self.b(t)).max() <= 1e-9:
                out.append((t, x))
        return out


def _scan(inner: _Inner, grid: np.ndarray, threads) -> list[tuple]:
    def work(idx: range):
        out = []
        blo = bhi = None
        for i in idx:
            pi = float(grid[i])
            lo = inner.solve(pi, "min", blo)
            hi = inner.solve(pi, "max", bhi)
            blo = lo.basis if lo.optimal else None
            bhi = hi.basis if hi.optimal else None
            out.append((pi, lo, hi))
        return out

    return _parallel.chunked_map(work, len(grid), threads)


def bounds_partial_mass(system: SystemMatrix, p, grid_n: int = DEFAULT_GRID,
                        pi_floor: float = DEFAULT_PI_FLOOR, refine: int = DEFAULT_REFINE,
                        pi_interval: tuple | None = None, threads: int | None = None) -> BoundResult:
    """Outer search over ``pi`` of ``min/max E[g 1{R'}] / pi`` subject to ``Q{R'} = pi``.

    ``pi_interval`` overrides the sharp mass interval (used to reproduce
    procedures that search over a wider, non-sharp range).
    """
    beta0 = _observed_beta0(system, p)
    cons = check_consistency(system.A0, beta0, system)
    if not cons.feasible:
        return _empty_model(cons, "partial_mass")
    if pi_interval is None:
        mi = stratum_mass_interval(system, system.param.conditioning, p)
        pi_lo, pi_hi = mi.interval
    else:
        pi_lo, pi_hi = map(float, pi_interval)
    if pi_hi <= SINGLETON_TOL or pi_hi < pi_floor:
        return _empty_stratum((pi_lo, pi_hi), "partial_mass")
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    start = max(pi_lo, pi_floor)
    grid = np.linspace(start, pi_hi, grid_n)
    inner = _Inner(system, p)
    scanned = _scan(inner, grid, threads)
    skipped = [pi for pi, lo, hi in scanned if not (lo.optimal and hi.optimal)]
    good = [(pi, lo, hi) for pi, lo, hi in scanned if lo.optimal and hi.optimal]
    if not good:
        return _empty_stratum((pi_lo, pi_hi), "partial_mass", {"skipped": len(skipped)})
    n_lp = 2 * len(scanned)
    step = (pi_hi - start) / (grid_n - 1) if grid_n > 1 else 0.0

    def search(sense: str):
        sgn = 1.0 if sense == "min" else -1.0
        k = 1 if sense == "min" else 2
        vals = [sgn * r[k].value / r[0] for r in good]
        i = int(np.argmin(vals))
        best = (vals[i], good[i][0], good[i][k].x)
        cands = [(good[j][0], good[j][k]) for j in (i - 1, i, i + 1) if 0 <= j < len(good)]
        count = 0
        # bisection around the best grid point
        h = step / 2.0
        centre = best[1]
        for _ in range(refine):
            for t in (centre - h, centre + h):
                if not start <= t <= pi_hi:
                    continue
                r = inner.solve(t, sense)
                count += 1
                if r.optimal:
                    cands.append((t, r))
                    v = sgn * r.value / t
                    if v < best[0]:
                        best = (v, t, r.x)
            centre = best[1]
            h /= 2.0
        # exact ends of the linear pieces through the best candidates
        for t0, res in cands:
            for t, x in inner.piece(t0, res, start, pi_hi):
                if t <= 0:
                    continue
                v = sgn * float(inner.c @ x) / t
                if v < best[0] - 1e-15:
                    best = (v, t, x)
        return sgn * best[0], best[1], best[2], count

    L, pi_L, q_L, c1 = search("min")
    U, pi_U, q_U, c2 = search("max")
    n_lp += c1 + c2
    open_lo = pi_lo < pi_floor
    lower_att = not (open_lo and abs(pi_L - start) <= 1e-12)
    upper_att = not (open_lo and abs(pi_U - start) <= 1e-12)
    diag = {
        "grid_n": int(grid_n), "pi_floor": pi_floor, "refine": refine, "lp_solves": n_lp,
        "skipped": len(skipped), "pi_search": [float(start), float(pi_hi)],
    }
    if skipped:
        diag["skipped_pi"] = [float(v) for v in skipped[:20]]
    wit = {"lower": {"pi": float(pi_L), "q": q_L, "value": float(inner.c @ q_L)},
           "upper": {"pi": float(pi_U), "q": q_U, "value": float(inner.c @ q_U)}}
    return BoundResult(float(L), float(U), lower_att, upper_att, "nonempty", (pi_lo, pi_hi),
                       "partial_mass", diag, wit)


def identified_set(model: StrataModel, param: ParameterSpec, p, grid_n: int = DEFAULT_GRID,
                   pi_floor: float = DEFAULT_PI_FLOOR, refine: int = DEFAULT_REFINE,
                   threads: int | None = None, system: SystemMatrix | None = None) -> BoundResult:
    """Sharp bounds on ``param`` under ``model`` given the observed distribution ``p``."""
    system = build_A(model, param, 0.0) if system is None else system
    beta0 = _observed_beta0(system, p)
    cons = check_consistency(system.A0, beta0, system)
    if not cons.feasible:
        return _empty_model(cons, "consistency")
    mi = stratum_mass_interval(system, param.conditioning, p)
    if mi.upper <= SINGLETON_TOL:
        return _empty_stratum(mi.interval, "consistency")
    if mi.upper - mi.lower <= SINGLETON_TOL:
        res = bounds_identified_mass(system, p, 0.5 * (mi.lower + mi.upper), pi=mi.interval)
    else:
        res = bounds_partial_mass(system, p, grid_n, pi_floor, refine, mi.interval, threads)
    return res


@dataclass
class DualExpression:
    """``value(P) = coef . cells + const`` for one vertex of the dual feasible set."""

    coef: np.ndarray
    const: float
    text: str

    def __call__(self, p) -> float:
        cells = np.asarray(getattr(p, "cells", p), dtype=float)
        return float(self.coef @ cells + self.const)


def _vertex_expressions(system: SystemMatrix, c: np.ndarray) -> list[DualExpression]:
    from fractions import Fraction

    from .lp.polyhedra import enumerate_dual

    V = enumerate_dual(system.A0, c)
    tail_beta = np.concatenate([[1.0], np.asarray(system.relax_targets, dtype=float)])
    names = system.support.cell_names()
    ncell = system.n_cells
    out, seen = [], set()
    for r in V.exact_vertices:
        coef = [Fraction(v) for v in r[:ncell]]
        const = sum((Fraction(t) * Fraction(v) for t, v in zip(tail_beta.tolist(), r[ncell:])), Fraction(0))
        key = (tuple(coef), const)
        if key in seen:
            continue
        seen.add(key)
        terms = [f"{'+' if v > 0 else '-'}{abs(v)} {names[i]}" for i, v in enumerate(coef) if v != 0]
        if const != 0 or not terms:
            terms.append(f"{'+' if const >= 0 else '-'}{abs(const)}")
        out.append(DualExpression(np.array([float(v) for v in coef]), float(const), " ".join(terms)))
    return out


def closed_form_bounds(system: SystemMatrix) -> dict:
    """Bounds as envelopes of linear functions of the cells, from dual vertex enumeration.

    The stratum mass is ``max`` of ``mass_lower`` (equivalently ``min`` of
    ``mass_upper``); the numerator ``E[g 1{R'}]`` is bounded below by the
    ``max`` of ``lower`` and above by the ``min`` of ``upper``.  Dividing by
    the mass gives the parameter bounds when the mass is identified.
    """
    c = system.g_vector()
    ind = system.conditioning_indicator()
    return {
        "lower": _vertex_expressions(system, c),
        "upper": [DualExpression(-e.coef, -e.const, _negate(e.text)) for e in _vertex_expressions(system, -c)],
        "mass_lower": _vertex_expressions(system, ind),
        "mass_upper": [DualExpression(-e.coef, -e.const, _negate(e.text))
                       for e in _vertex_expressions(system, -ind)],
    }


def _negate(text: str) -> str:
    return " ".join(("-" + t[1:]) if t.startswith("+") else ("+" + t[1:]) if t.startswith("-") else t
                    for t in text.split(" "))


def evaluate_closed_form(forms: dict, p) -> dict:
    mass_lo = max(e(p) for e in forms["mass_lower"])
    mass_hi = min(e(p) for e in forms["mass_upper"])
    num_lo = max(e(p) for e in forms["lower"])
    num_hi = min(e(p) for e in forms["upper"])
    out = {"mass": [mass_lo, mass_hi], "numerator": [num_lo, num_hi]}
    if mass_hi - mass_lo <= 1e-9 and mass_hi > SINGLETON_TOL:
        out["bounds"] = [num_lo / mass_hi, num_hi / mass_hi]
    return out


@dataclass
class Implications:
    hrep: "object"
    names: list
    trivial: np.ndarray

    @property
    def nontrivial(self) -> int:
        return int((~self.trivial).sum())


def testable_implications(model: StrataModel, max_dim: int = 40) -> Implications:
    """Sharp H-representation of the set of cell vectors the model can generate.

    An inequality is marked trivial when every product of per-instrument
    probability simplices satisfies it.
    """
    from .lp.polyhedra import hrep_to_vrep, image_polytope_hrep, vrep_to_hrep

    system = build_A(model)
    k = system.n_types
    A1 = np.asarray(system.A1[:, :k])
    if model.relaxations:
        # vertices of {q >= 0, 1'q = 1, relaxation caps} before mapping through A1
        G = [-np.eye(k)]
        h = [np.zeros(k)]
        for rel in model.relaxations:
            ind = system.stratum_indicator(rel.types)[:k]
            sgn = 1.0 if rel.direction == "at_most" else -1.0
            G.append(sgn * ind[None, :])
            h.append(np.array([sgn * rel.eps]))
        V = hrep_to_vrep(np.vstack(G), np.concatenate(h), np.ones((1, k)), np.ones(1))
        H = vrep_to_hrep((A1 @ V.vertices.T).T, max_dim=max_dim)
    else:
        H = image_polytope_hrep(A1, max_dim=max_dim)
    s = model.support
    block = s.n_y * s.n_d
    triv = []
    for g, hv in zip(H.G, H.h):
        top = sum(g[z * block:(z + 1) * block].max() for z in range(s.n_z))
        triv.append(top <= hv + 1e-12)
    return Implications(H, s.cell_names(), np.array(triv, dtype=bool))


testable_implications.__test__ = False
