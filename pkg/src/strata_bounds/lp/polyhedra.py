"""Exact polyhedral conversions by the double description method.

Everything here runs in rational arithmetic: inputs are converted to
``Fraction`` (floats through their shortest decimal repr), rays are kept as
primitive integer vectors, and adjacency is decided combinatorially from
zero sets.  Constraints are inserted in index order, so output ordering is
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


class PolyhedronError(ValueError):
    """Size guard tripped or degenerate input to a conversion."""


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    xf = float(x)
    if xf.is_integer():
        return Fraction(int(xf))
    return Fraction(repr(xf))


def fraction_matrix(A) -> list[list[Fraction]]:
    if isinstance(A, np.ndarray):
        A = A.tolist()
    return [[to_fraction(v) for v in row] for row in A]


def rref(rows: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns nonzero rows and pivot columns."""
    R = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(R)) if R[i][col] != 0), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        pv = R[r][col]
        if pv != 1:
            R[r] = [v / pv for v in R[r]]
        for i in range(len(R)):
            if i != r and R[i][col] != 0:
                f = R[i][col]
                Ri, Rr = R[i], R[r]
                R[i] = [a - f * b for a, b in zip(Ri, Rr)]
        pivots.append(col)
        r += 1
        if r == len(R):
            break
    return R[:r], pivots


def nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    R, piv = rref(rows, ncols)
    free = [j for j in range(ncols) if j not in set(piv)]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(piv):
            v[p] = -R[i][f]
        basis.append(v)
    return basis


def primitive(v: Sequence[Fraction]) -> tuple[int, ...]:
    """Smallest positive integer multiple of a rational vector."""
    den = 1
    for x in v:
        den = den * x.denominator // math.gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    if g == 0:
        return tuple(ints)
    return tuple(x // g for x in ints)


def _dot(a, b) -> int:
    return sum(x * y for x, y in zip(a, b))


def _invert(K: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(K)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(K)]
    R, piv = rref(aug, 2 * n)
    if piv[:n] != list(range(n)):
        raise PolyhedronError("initial constraint block is singular")
    return [row[n:] for row in R]


def extreme_rays(rows: Sequence[Sequence[int]], dim: int, max_rays: int = 200_000) -> list[tuple[tuple[int, ...], int]]:
    """Extreme rays of the pointed cone ``{y : row . y <= 0 for every row}``.

    ``rows`` are integer vectors of length ``dim`` spanning ``R^dim``.  Returns
    ``(ray, zero_mask)`` pairs where bit ``i`` of the mask is set when ray ``i``
    is tight at constraint ``i``.
    """
    rows = [tuple(int(v) for v in r) for r in rows]
    # greedy choice of an initial nonsingular block, in index order
    chosen: list[int] = []
    echelon: list[list[Fraction]] = []
    for i, r in enumerate(rows):
        cand = echelon + [[Fraction(v) for v in r]]
        _, piv = rref(cand, dim)
        if len(piv) > len(echelon):
            echelon, _ = rref(cand, dim)
            chosen.append(i)
            if len(chosen) == dim:
                break
    if len(chosen) < dim:
        raise PolyhedronError(f"constraints have rank {len(chosen)} < {dim}; cone is not pointed")
    Kinv = _invert([[Fraction(v) for v in rows[i]] for i in chosen])
    rays: list[tuple[tuple[int, ...], int]] = []
    for j in range(dim):
        col = [-Kinv[i][j] for i in range(dim)]
        v = primitive(col)
        mask = 0
        for i in chosen:
            if _dot(rows[i], v) == 0:
                mask |= 1 << i
        rays.append((v, mask))
    in_basis = set(chosen)
    for idx, a in enumerate(rows):
        if idx in in_basis:
            continue
        bit = 1 << idx
        vals = [_dot(a, v) for v, _ in rays]
        plus = [k for k, s in enumerate(vals) if s > 0]
        if not plus:
            rays = [(v, m | bit) if s == 0 else (v, m) for (v, m), s in zip(rays, vals)]
            continue
        minus = [k for k, s in enumerate(vals) if s < 0]
        masks = [m for _, m in rays]
        new: list[tuple[tuple[int, ...], int]] = []
        for p in plus:
            vp, mp = rays[p]
            sp = vals[p]
            for q in minus:
                common = mp & masks[q]
                if common.bit_count() < dim - 2:
                    continue
                hits = 0
                for m in masks:
                    if m & common == common:
                        hits += 1
                        if hits > 2:
                            break
                if hits > 2:
                    continue
                vq = rays[q][0]
                sq = vals[q]
                comb = [sp * y - sq * x for x, y in zip(vp, vq)]
                g = 0
                for x in comb:
                    g = math.gcd(g, x)
                comb = tuple(x // g for x in comb)
                new.append((comb, common | bit))
        rays = [(v, m | bit) if s == 0 else (v, m) for (v, m), s in zip(rays, vals) if s <= 0] + new
        if len(rays) > max_rays:
            raise PolyhedronError(f"double description exceeded {max_rays} intermediate rays")
    return rays


@dataclass
class PolyhedronV:
    """Vertices, extreme rays and a lineality basis, exact and as floats."""

    vertices: np.ndarray
    rays: np.ndarray
    lineality: np.ndarray
    exact_vertices: list = field(default_factory=list, repr=False)
    exact_rays: list = field(default_factory=list, repr=False)

    @property
    def empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def max_over_vertices(self, b) -> float:
        return float(np.max(self.vertices @ np.asarray(b, dtype=float)))


@dataclass
class PolyhedronH:
    """``{x : G x <= h, E x = e}``; ``E`` pins the affine hull."""

    G: np.ndarray
    h: np.ndarray
    E: np.ndarray
    e: np.ndarray
    exact_G: list = field(default_factory=list, repr=False)
    exact_h: list = field(default_factory=list, repr=False)
    exact_E: list = field(default_factory=list, repr=False)
    exact_e: list = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.G.shape[1] if self.G.size else self.E.shape[1]

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        ok_ineq = self.G.shape[0] == 0 or np.all(self.G @ x <= self.h + tol)
        ok_eq = self.E.shape[0] == 0 or np.all(np.abs(self.E @ x - self.e) <= tol)
        return bool(ok_ineq and ok_eq)

    def violations(self, x) -> np.ndarray:
        """Slack ``G x - h`` of every inequality (positive means violated)."""
        return self.G @ np.asarray(x, dtype=float) - self.h


def _as_float(rows, ncols) -> np.ndarray:
    if not rows:
        return np.zeros((0, ncols))
    return np.array([[float(v) for v in r] for r in rows])


def _matvec(A, x):
    return [sum(a * b for a, b in zip(row, x)) for row in A]


def hrep_to_vrep(G, h, E=None, e=None, max_rays: int = 200_000) -> PolyhedronV:
    """V-representation of ``{x : G x <= h, E x = e}``.

    Lineality is split off first; vertices are reported in the orthogonal
    complement of the lineality space, so a polyhedron such as
    ``{r : A' r <= c}`` with rank-deficient ``A`` yields vertices in the
    column space of ``A``.
    """
    Gq = fraction_matrix(G)
    n = len(Gq[0]) if Gq else (len(E[0]) if E is not None and len(E) else 0)
    hq = [to_fraction(v) for v in np.asarray(h).ravel()] if Gq else []
    if E is not None and len(E):
        Eq = fraction_matrix(E)
        eq = [to_fraction(v) for v in np.asarray(e).ravel()]
        R, piv = rref([row + [rhs] for row, rhs in zip(Eq, eq)], n + 1)
        if n in piv:
            return PolyhedronV(np.zeros((0, n)), np.zeros((0, n)), np.zeros((0, n)))
        x0 = [Fraction(0)] * n
        for i, p in enumerate(piv):
            x0[p] = R[i][n]
        N = nullspace([r[:n] for r in R], n)
    else:
        x0 = [Fraction(0)] * n
        N = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    f = len(N)
    # G' = G N, h' = h - G x0  (N stored as a list of basis vectors)
    Gp = [[sum(g * nv for g, nv in zip(row, vec)) for vec in N] for row in Gq]
    hp = [hv - sum(g * xv for g, xv in zip(row, x0)) for row, hv in zip(Gq, hq)]
    W, _ = rref(Gp, f) if Gp else ([], [])
    lin_u = nullspace(Gp, f) if Gp else [[Fraction(int(i == j)) for j in range(f)] for i in range(f)]
    lineality = [[sum(u[k] * N[k][j] for k in range(f)) for j in range(n)] for u in lin_u]
    r = len(W)

    def lift(u):
        return [x0[j] + sum(u[k] * N[k][j] for k in range(f)) for j in range(n)]

    if r == 0:
        if any(v < 0 for v in hp):
            return PolyhedronV(np.zeros((0, n)), np.zeros((0, n)), _as_float(lineality, n))
        return PolyhedronV(_as_float([x0], n), np.zeros((0, n)), _as_float(lineality, n), [x0], [])
    Gpp = [[sum(g * w for g, w in zip(row, wv)) for wv in W] for row in Gp]
    cone = [primitive(row + [-hv]) for row, hv in zip(Gpp, hp)]
    cone.append(tuple([0] * r + [-1]))
    rays = extreme_rays(cone, r + 1, max_rays=max_rays)
    verts, dirs = [], []
    for v, _ in rays:
        t = v[-1]
        coords = [Fraction(x) for x in v[:-1]]
        u = [sum(coords[i] * W[i][k] for i in range(r)) for k in range(f)]
        if t > 0:
            verts.append(lift([x / t for x in u]))
        else:
            d = [sum(u[k] * N[k][j] for k in range(f)) for j in range(n)]
            dirs.append(d)
    verts.sort()
    dirs = [list(primitive(d)) for d in dirs]
    dirs.sort()
    ray_f = _as_float(dirs, n)
    if ray_f.size:
        ray_f = ray_f / np.abs(ray_f).max(axis=1, keepdims=True)
    return PolyhedronV(_as_float(verts, n), ray_f, _as_float(lineality, n), verts, dirs)


def vrep_to_hrep(points, max_dim: int = 40, max_rays: int = 200_000) -> PolyhedronH:
    """H-representation of the convex hull of ``points`` (one per row).

    The affine hull is returned as integer equations ``E x = e`` and the facets
    as primitive integer inequalities over the pivot coordinates of that hull.
    """
    P = fraction_matrix(points)
    if not P:
        raise PolyhedronError("need at least one point")
    d = len(P[0])
    uniq = sorted({tuple(p) for p in P})
    P = [list(p) for p in uniq]
    v0 = P[0]
    D = [[a - b for a, b in zip(p, v0)] for p in P[1:]]
    R, S = rref(D, d) if D else ([], [])
    k = len(S)
    if k > max_dim:
        raise PolyhedronError(f"hull dimension {k} exceeds the guard of {max_dim}")
    Srow = {s: i for i, s in enumerate(S)}
    E_rows, e_rows = [], []
    for j in range(d):
        if j in Srow:
            continue
        row = [Fraction(0)] * d
        row[j] = Fraction(1)
        for i, s in enumerate(S):
            row[s] -= R[i][j]
        rhs = sum(a * b for a, b in zip(row, v0))
        ints = primitive(row + [rhs])
        E_rows.append(list(ints[:-1]))
        e_rows.append(ints[-1])
    G_rows, h_rows = [], []
    if k > 0:
        cone = [primitive([p[s] for s in S] + [Fraction(-1)]) for p in P]
        for v, _ in extreme_rays(cone, k + 1, max_rays=max_rays):
            a, b = v[:-1], v[-1]
            if not any(a):
                continue
            row = [0] * d
            for s, av in zip(S, a):
                row[s] = av
            G_rows.append(row)
            h_rows.append(b)
        order = sorted(range(len(G_rows)), key=lambda i: (G_rows[i], h_rows[i]))
        G_rows = [G_rows[i] for i in order]
        h_rows = [h_rows[i] for i in order]
    return PolyhedronH(
        _as_float(G_rows, d), np.array(h_rows, dtype=float),
        _as_float(E_rows, d), np.array(e_rows, dtype=float),
        G_rows, h_rows, E_rows, e_rows,
    )


def enumerate_dual(A0, c, max_rows: int = 5000) -> PolyhedronV:
    """Vertices and rays of the dual feasible set ``{r : A0' r <= c}``."""
    A0 = np.atleast_2d(np.asarray(A0))
    if A0.shape[1] > max_rows:
        raise PolyhedronError(f"dual has {A0.shape[1]} constraints, above the guard of {max_rows}")
    return hrep_to_vrep(A0.T, np.asarray(c).ravel())


def image_polytope_hrep(A1, columns=None, max_dim: int = 40) -> PolyhedronH:
    """H-representation of ``co{A1 e_r : r in columns}``, the image of the model's simplex."""
    A1 = np.atleast_2d(np.asarray(A1))
    cols = range(A1.shape[1]) if columns is None else list(columns)
    if len(cols) == 0:
        raise PolyhedronError("admissible set is empty")
    return vrep_to_hrep(A1[:, cols].T, max_dim=max_dim)


def vrep_of_simplex(admissible) -> PolyhedronV:
    """Vertices ``e_r`` of ``{q : 1'q = 1, q >= 0}`` over the admissible set."""
    n = len(list(admissible))
    if n == 0:
        raise PolyhedronError("admissible set is empty")
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    return PolyhedronV(np.eye(n), np.zeros((0, n)), np.zeros((0, n)), eye, [])


def _fmt_coef(v) -> str:
    f = Fraction(v)
    s = str(abs(f))
    return ("-" if f < 0 else "+") + s


def format_hrep(H: PolyhedronH, names: Sequence[str]) -> str:
    """One inequality (``<=``) or equation (``==``) per line over named coordinates."""
    lines = []
    for rows, rhs, op in ((H.exact_E, H.exact_e, "=="), (H.exact_G, H.exact_h, "<=")):
        for row, b in zip(rows, rhs):
            terms = [f"{_fmt_coef(v)} {names[j]}" for j, v in enumerate(row) if v != 0]
            lines.append(" ".join(terms) + f" {op} {Fraction(b)}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_hrep(text: str, names: Sequence[str]) -> PolyhedronH:
    """Inverse of :func:`format_hrep`."""
    pos = {n: i for i, n in enumerate(names)}
    d = len(names)
    G, h, E, e = [], [], [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        op = "==" if "==" in line else "<="
        lhs, rhs = line.split(op)
        toks = lhs.split()
        row = [Fraction(0)] * d
        for coef, name in zip(toks[::2], toks[1::2]):
            row[pos[name]] += Fraction(coef)
        (E if op == "==" else G).append(row)
        (e if op == "==" else h).append(Fraction(rhs.strip()))
    return PolyhedronH(_as_float(G, d), np.array([float(v) for v in h]),
                       _as_float(E, d), np.array([float(v) for v in e]), G, h, E, e)
