"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems are in standard form ``min/max c'x  s.t.  Mx = b, x >= 0``.  The
solver reports a dual vector with every optimum and a Farkas certificate
``y`` (``y'M <= 0``, ``y'b > 0``) when the constraints are infeasible.
A previous optimal basis may be passed back in to warm start a problem with
the same ``M`` and ``c`` but a new right-hand side (or the same feasible
region with a new objective).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-11
REL_PIVOT_TOL = 1e-9
COST_TOL = 1e-10
REINVERT_EVERY = 25


class LPError(RuntimeError):
    """Dimension mismatch or numerical breakdown inside the solver."""


@dataclass
class StandardLP:
    c: np.ndarray
    M: np.ndarray
    b: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.sense not in ("min", "max"):
            raise LPError(f"sense must be 'min' or 'max', not {self.sense!r}")
        m, n = self.M.shape
        if self.c.size != n or self.b.size != m:
            raise LPError(f"shape mismatch: c {self.c.size}, M {self.M.shape}, b {self.b.size}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.b))):
            raise LPError("LP data must be finite")


@dataclass
class LPResult:
    status: str
    value: float
    x: np.ndarray | None
    dual: np.ndarray | None
    basis: tuple | None = None
    iterations: int = 0
    warm: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def certificate(self):
        return self.dual


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])


def _tableau(Mfull: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list) -> np.ndarray | None:
    """Fresh tableau ``[B^-1 M | B^-1 b]`` with reduced costs, or None if ``B`` is singular."""
    m = Mfull.shape[0]
    B = Mfull[:, basis]
    try:
        sol = np.linalg.solve(B, np.column_stack([Mfull, b]))
    except np.linalg.LinAlgError:
        return None
    T = np.zeros((m + 1, Mfull.shape[1] + 1))
    T[:m] = sol
    cb = cost[basis]
    T[m, :-1] = cost - cb @ sol[:, :-1]
    T[m, -1] = -cb @ sol[:, -1]
    return T


def _bland(T: np.ndarray, basis: list, n_allowed: int, max_iter: int, refresh=None) -> tuple[str, int]:
    """Run simplex pivots on tableau ``T`` (last row = reduced costs, last col = rhs).

    Only columns ``< n_allowed`` may enter.  ``refresh(basis)`` rebuilds the
    tableau from the original data; it is called every few pivots so rounding
    drift cannot accumulate.  Returns the status and pivot count.
    """
    m = T.shape[0] - 1
    it = 0
    while True:
        if refresh is not None and it and it % REINVERT_EVERY == 0:
            fresh = refresh(basis)
            if fresh is not None:
                T[:] = fresh
        red = T[m, :n_allowed]
        cand = np.flatnonzero(red < -COST_TOL)
        if cand.size == 0:
            return "optimal", it
        col = int(cand[0])
        colv = T[:m, col]
        if m == 0:
            return "unbounded", it
        tol = max(PIVOT_TOL, REL_PIVOT_TOL * np.abs(colv).max())
        pos = np.flatnonzero(colv > tol)
        if pos.size == 0:
            return "unbounded", it
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise LPError(f"simplex exceeded {max_iter} pivots")


def _finish(lp: StandardLP, c: np.ndarray, M: np.ndarray, b: np.ndarray, rows: np.ndarray,
            basis: list, it: int, warm: bool, sign: float) -> LPResult:
    m, n = M.shape
    B = M[np.ix_(rows, basis)]
    try:
        xb = np.linalg.solve(B, b[rows])
        y_rows = np.linalg.solve(B.T, c[basis])
    except np.linalg.LinAlgError as exc:
        raise LPError("singular basis at optimum") from exc
    x = np.zeros(n)
    x[basis] = np.maximum(xb, 0.0)
    y = np.zeros(m)
    y[rows] = y_rows
    value = float(c @ x)
    return LPResult("optimal", sign * value, x, sign * y, (tuple(int(r) for r in rows), tuple(basis)),
                    it, warm)


def _warm_start(lp, c, M, b, basis, max_iter, sign):
    rows, cols = basis
    rows = np.asarray(rows, dtype=int)
    cols = list(cols)
    if len(rows) != len(cols) or max(cols, default=-1) >= M.shape[1]:
        return None
    B = M[np.ix_(rows, cols)]
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return None
    xb = Binv @ b[rows]
    scale = 1.0 + np.abs(b).max()
    if np.any(xb < -1e-9 * scale):
        return None
    x = np.zeros(M.shape[1])
    x[cols] = xb
    if np.abs(M @ x - b).max() > 1e-9 * scale:
        return None
    m = len(rows)
    T = np.zeros((m + 1, M.shape[1] + 1))
    T[:m, :-1] = Binv @ M[rows]
    T[:m, -1] = np.maximum(xb, 0.0)
    T[m, :-1] = c - c[cols] @ T[:m, :-1]
    T[m, -1] = -c[cols] @ xb
    Mr, br = M[rows], b[rows]
    status, it = _bland(T, cols, M.shape[1], max_iter, lambda bs: _tableau(Mr, br, c, bs))
    if status == "unbounded":
        return LPResult("unbounded", sign * -np.inf, None, None, None, it, True)
    return _finish(lp, c, M, b, rows, cols, it, True, sign)


def solve(lp: StandardLP, basis=None, max_iter: int = 50_000, feas_tol: float = 1e-9) -> LPResult:
    """Solve ``lp``; ``basis`` is an optional ``LPResult.basis`` to warm start from."""
    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * lp.c
    M, b = lp.M, lp.b
    m, n = M.shape
    if m == 0:
        if np.any(c < -COST_TOL):
            return LPResult("unbounded", sign * -np.inf, None, None)
        return LPResult("optimal", 0.0, np.zeros(n), np.zeros(0), ((), ()))

    if basis is not None:
        res = _warm_start(lp, c, M, b, basis, max_iter, sign)
        if res is not None:
            return res

    flip = np.where(b < 0, -1.0, 1.0)
    Mf = M * flip[:, None]
    bf = b * flip
    # phase 1 tableau over [original | artificial] columns; rows that already
    # own a unit column start with it in the basis instead of an artificial
    cols = list(range(n, n + m))
    single = np.flatnonzero((Mf != 0).sum(axis=0) == 1)
    for j in single:
        i = int(np.flatnonzero(Mf[:, j])[0])
        if Mf[i, j] == 1.0 and cols[i] >= n:
            cols[i] = int(j)
    need = np.array([cols[i] >= n for i in range(m)])
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = Mf
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = bf
    T[m, :n] = -Mf[need].sum(axis=0)
    T[m, n:n + m] = np.where(need, 0.0, 1.0)
    T[m, -1] = -bf[need].sum()
    M1 = np.hstack([Mf, np.eye(m)])
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    _, it1 = _bland(T, cols, n, max_iter, lambda bs: _tableau(M1, bf, cost1, bs))
    infeas = -T[m, -1]
    if infeas > feas_tol * (1.0 + np.abs(b).max()):
        cb = np.array([1.0 if j >= n else 0.0 for j in cols])
        Bf = np.column_stack([Mf, np.eye(m)])[:, cols]
        try:
            y = np.linalg.solve(Bf.T, cb)
        except np.linalg.LinAlgError:
            y = np.zeros(m)
        y = y * flip
        return LPResult("infeasible", np.nan, None, y, None, it1, extra={"infeasibility": float(infeas)})

    # drive artificial variables out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if cols[i] < n:
            continue
        row = T[i, :n]
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-9:
            _pivot(T, i, j)
            cols[i] = j
        else:
            keep[i] = False
    trows = np.flatnonzero(keep)
    # an artificial stuck in a zero row marks its own original row as redundant
    dropped = {cols[i] - n for i in np.flatnonzero(~keep)}
    rows = np.array([i for i in range(m) if i not in dropped], dtype=int)
    T2 = np.zeros((trows.size + 1, n + 1))
    T2[:-1, :n] = T[trows, :n]
    T2[:-1, -1] = T[trows, -1]
    basis2 = [cols[i] for i in trows]
    T2[-1, :n] = c - c[basis2] @ T2[:-1, :n]
    T2[-1, -1] = -c[basis2] @ T2[:-1, -1]
    M2, b2 = M[rows], b[rows]
    status, it2 = _bland(T2, basis2, n, max_iter, lambda bs: _tableau(M2, b2, c, bs))
    if status == "unbounded":
        return LPResult("unbounded", sign * -np.inf, None, None, None, it1 + it2)
    return _finish(lp, c, M, b, rows, basis2, it1 + it2, False, sign)


def feasible(M, b) -> LPResult:
    """Phase-one feasibility of ``{x >= 0 : Mx = b}``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return solve(StandardLP(np.zeros(M.shape[1]), M, b))


@dataclass
class GeneralLP:
    """Bookkeeping for :func:`solve_general`: how the standard form maps back."""

    n_free: int
    n_nonneg: int
    n_ub: int
    lp: StandardLP
    order: np.ndarray


def to_standard(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, free=None, sense="min") -> GeneralLP:
    """Standard form of ``c'x`` over ``A_ub x <= b_ub, A_eq x = b_eq``.

    ``free`` is a boolean mask of unrestricted variables; the rest are ``>= 0``.
    Free variables are split into positive and negative parts and each
    inequality gets a slack column.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    free = np.zeros(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    order = np.concatenate([np.flatnonzero(free), np.flatnonzero(~free)])
    nf = int(free.sum())
    A = np.vstack([A_ub, A_eq])[:, order]
    cc = c[order]
    k = A_ub.shape[0]
    # columns: [free+ | free- | nonneg | slacks]
    M = np.hstack([A[:, :nf], -A[:, :nf], A[:, nf:],
                   np.vstack([np.eye(k), np.zeros((A_eq.shape[0], k))])])
    cs = np.concatenate([cc[:nf], -cc[:nf], cc[nf:], np.zeros(k)])
    lp = StandardLP(cs, M, np.concatenate([b_ub, b_eq]), sense)
    return GeneralLP(nf, n - nf, k, lp, order)


def recover(glp: GeneralLP, res: LPResult) -> np.ndarray | None:
    if res.x is None:
        return None
    nf = glp.n_free
    z = res.x
    v = np.concatenate([z[:nf] - z[nf:2 * nf], z[2 * nf:2 * nf + glp.n_nonneg]])
    out = np.empty_like(v)
    out[glp.order] = v
    return out


def solve_general(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, free=None, sense="min",
                  basis=None) -> tuple[LPResult, np.ndarray | None]:
    """Solve an LP in inequality/equality form; returns the result and the original-variable solution."""
    glp = to_standard(c, A_ub, b_ub, A_eq, b_eq, free, sense)
    res = solve(glp.lp, basis=basis)
    return res, recover(glp, res)
