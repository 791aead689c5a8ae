"""Bootstrap test of ``theta(Q) = theta0``, test inversion and the specification test.

The null ``A x = beta(P)`` for some ``x >= 0`` is tested with the statistic

    T_n = max{ sup_{s in Ve} sqrt(n) <s, (I - A A^+) beta_hat>,
               sup_{s in Vi} sqrt(n) <A^+ s, A^+ beta_hat> }

where ``Ve = {s : |Omega_e s|_1 <= 1}`` and
``Vi = {s : A^+ s <= 0, |Omega_i A A^+ s|_1 <= 1}``.  The critical value is a
bootstrap quantile with the inequality part shifted by
``lambda_n sqrt(n) <A^+ s, A^+ beta_r>`` for a restricted estimator
``beta_r`` that satisfies the null exactly.

Only the component of ``s`` in the column space of ``A`` matters for the
inequality part, so it is parametrized as ``s = U z`` with ``U`` an
orthonormal basis of that space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _parallel
from .empirics import DataError, ObservedDistribution, StudentizerPair, cell_covariance, psd_sqrt
from .linsys import SystemMatrix, build_A, pseudo_inverse
from .lp.simplex import StandardLP, recover, solve, solve_general, to_standard
from .model import ParameterSpec, StrataModel

BOOT_CHUNK = 25
# statistics within this of the critical value count as ties (both can be ~1e-14 on exact data)
REJECT_TOL = 1e-9


class InferenceError(RuntimeError):
    """Invalid configuration or a failed optimization inside the test."""


@dataclass
class TestConfig:
    __test__ = False

    alpha: float = 0.05
    bootstrap_B: int = 200
    lambda_n: float | str = "auto"
    seed: int = 0
    theta_grid: tuple | None = None
    threads: int | None = None
    null_scale: float | str = "auto"
    restricted_method: str = "lp"
    quantile_method: str = "inverted_cdf"
    keep_draws: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InferenceError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.bootstrap_B < 2:
            raise InferenceError(f"bootstrap_B must be at least 2, got {self.bootstrap_B}")
        if self.bootstrap_B < 100:
            warnings.warn(f"bootstrap_B = {self.bootstrap_B} is small; 100 or more is recommended",
                          stacklevel=2)
        if self.lambda_n != "auto" and not float(self.lambda_n) <= 1.0:
            raise InferenceError(f"lambda_n must be at most 1, got {self.lambda_n}")
        if self.restricted_method not in ("lp", "cutting_plane"):
            raise InferenceError(f"unknown restricted_method {self.restricted_method!r}")

    def resolved_lambda(self, n: int) -> float:
        if self.lambda_n == "auto":
            return min(1.0, 1.0 / math.sqrt(math.log(n))) if n > 1 else 1.0
        return float(self.lambda_n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_grid"] = None if self.theta_grid is None else list(self.theta_grid)
        return d


@dataclass
class TestOutcome:
    __test__ = False

    statistic: float
    critical_value: float
    reject: bool
    components: tuple
    lambda_n: float = 0.0
    theta0: float | None = None
    restricted: np.ndarray | None = None
    draws: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "theta0": self.theta0,
            "statistic": _num(self.statistic),
            "critical_value": _num(self.critical_value),
            "reject": bool(self.reject),
            "components": {"equality": _num(self.components[0]), "inequality": _num(self.components[1])},
            "lambda_n": self.lambda_n,
            "meta": self.meta,
        }
        if self.draws is not None:
            out["draws"] = [float(v) for v in self.draws]
        return out


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def regularized_root(S: np.ndarray, null_scale: float | str = "auto", rel_tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """PSD root of ``S`` with null directions given standard deviation ``null_scale``.

    ``"auto"`` uses the largest standard deviation in ``S`` (1 if ``S = 0``).
    The exact root is singular whenever a coordinate is known without error,
    which would make the l1 balls unbounded along those directions.
    """
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    wmax = w.max() if w.size else 0.0
    small = w <= rel_tol * max(wmax, 1e-300) if wmax > 0 else np.ones_like(w, dtype=bool)
    rho = (math.sqrt(wmax) if wmax > 0 else 1.0) if null_scale == "auto" else float(null_scale)
    if rho <= 0:
        raise InferenceError("null_scale must be positive")
    d = np.where(small, rho, np.sqrt(w))
    return (V * d) @ V.T, rho


class _Engine:
    """Precomputed pieces shared by the statistic, the restricted estimator and the bootstrap."""

    def __init__(self, M: np.ndarray, n_fixed: int, sigma: np.ndarray, n: int,
                 null_scale="auto", rank_tol: float = 1e-10):
        self.M = np.asarray(M, dtype=float)
        K, m = self.M.shape
        self.K, self.m = K, m
        self.n_fixed = n_fixed  # trailing rows of beta that are constants
        self.n = n
        pi = pseudo_inverse(self.M, rank_tol)
        self.pinv, self.P, self.r = pi.pinv, pi.projector, pi.rank
        U, s, Vt = np.linalg.svd(self.M, full_matrices=False)
        r = self.r
        self.U = U[:, :r]
        self.s = s[:r]
        self.V = Vt[:r].T
        self.omega_e, rho_e = regularized_root(sigma, null_scale)
        self.omega_i, rho_i = regularized_root(self.P @ sigma @ self.P.T, null_scale)
        self.omega_e_inv = np.linalg.inv(self.omega_e)
        self.null_scale = (rho_e, rho_i)
        self.exact = StudentizerPair(psd_sqrt(sigma), psd_sqrt(self.P @ sigma @ self.P.T), sigma)
        # inequality LP over y = (w, t), both free, where s = U S w so that
        # A^+ s = V w:   V w <= 0,  +-Omega_i U S w - t <= 0,  1't <= 1
        OU = self.omega_i @ (self.U * self.s)
        self.H = np.vstack([
            np.hstack([self.V, np.zeros((m, K))]),
            np.hstack([OU, -np.eye(K)]),
            np.hstack([-OU, -np.eye(K)]),
            np.hstack([np.zeros((1, r)), np.ones((1, K))]),
        ])
        self.h = np.zeros(self.H.shape[0])
        self.h[-1] = 1.0
        self.glp = to_standard(np.zeros(r + K), self.H, self.h, free=np.ones(r + K, dtype=bool), sense="max")
        # objective map: <A^+ s, A^+ v> = w' S^-1 U' v
        self.C = np.vstack([(self.U / self.s).T, np.zeros((K, K))])

    def eq_part(self, v: np.ndarray) -> float:
        w = v - self.P @ v
        return math.sqrt(self.n) * float(np.abs(self.omega_e_inv @ w).max())

    def _ineq_objective(self, v: np.ndarray) -> np.ndarray:
        c = self.C @ v
        nf = self.glp.n_free
        cc = c[self.glp.order]
        return np.concatenate([cc[:nf], -cc[:nf], cc[nf:], np.zeros(self.glp.n_ub)])

    def ineq_part(self, v: np.ndarray, basis=None) -> tuple[float, tuple | None]:
        lp = StandardLP(self._ineq_objective(v), self.glp.lp.M, self.glp.lp.b, "max")
        res = solve(lp, basis=basis)
        if not res.optimal:
            raise InferenceError(f"inequality LP ended with status {res.status}")
        return math.sqrt(self.n) * max(res.value, 0.0), res.basis

    def ineq_argmax(self, v: np.ndarray) -> np.ndarray:
        lp = StandardLP(self._ineq_objective(v), self.glp.lp.M, self.glp.lp.b, "max")
        res = solve(lp)
        if not res.optimal:
            raise InferenceError(f"inequality LP ended with status {res.status}")
        return recover(self.glp, res)

    def criterion(self, w: np.ndarray) -> float:
        """``sup_{s in Vi} |<A^+ s, A^+ w>|`` (without the sqrt(n) factor)."""
        a, _ = self.ineq_part(w)
        b, _ = self.ineq_part(-w)
        return max(a, b) / math.sqrt(self.n)


def _restricted_lp(eng: _Engine, beta: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact restricted estimator as one LP, dualizing both inner suprema."""
    K, m = eng.K, eng.m
    nH = eng.H.shape[0]
    Ht = eng.H.T
    CA = eng.C @ eng.M
    Cb = eng.C @ beta
    nf = eng.n_fixed
    tail = eng.M[K - nf:]
    # variables: x (m) | lam1 (nH) | lam2 (nH) | tau (1), all >= 0
    ncol = m + 2 * nH + 1
    q = Ht.shape[0]
    A_eq = np.zeros((2 * q + nf, ncol))
    A_eq[:q, :m] = CA
    A_eq[:q, m:m + nH] = Ht
    A_eq[q:2 * q, :m] = -CA
    A_eq[q:2 * q, m + nH:m + 2 * nH] = Ht
    A_eq[2 * q:, :m] = tail
    b_eq = np.concatenate([Cb, -Cb, beta[K - nf:]])
    A_ub = np.zeros((2, ncol))
    A_ub[0, m + nH - 1] = 1.0
    A_ub[1, m + 2 * nH - 1] = 1.0
    A_ub[:, -1] = -1.0
    c = np.zeros(ncol)
    c[-1] = 1.0
    res, sol = solve_general(c, A_ub, np.zeros(2), A_eq, b_eq)
    if res.status == "infeasible":
        raise _NullEmpty()
    if not res.optimal:
        raise InferenceError(f"restricted-estimator LP ended with status {res.status}")
    x = sol[:m]
    return eng.M @ x, float(res.value)


def _restricted_cutting_plane(eng: _Engine, beta: np.ndarray, tol: float = 1e-7,
                              max_cuts: int = 200) -> tuple[np.ndarray, float]:
    """Kelley's cutting planes on the convex piecewise-linear criterion."""
    K, m = eng.K, eng.m
    nf = eng.n_fixed
    tail = eng.M[K - nf:]
    CA = eng.C @ eng.M
    Cb = eng.C @ beta
    cuts_g, cuts_h = [], []
    best_val, best_b = math.inf, None
    # variables: x (m) | tau (1)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_eq = np.hstack([tail, np.zeros((nf, 1))])
    b_eq = beta[K - nf:]
    res0, sol = solve_general(c, None, None, A_eq, b_eq)
    if res0.status == "infeasible":
        raise _NullEmpty()
    x = sol[:m]
    lower = 0.0
    for _ in range(max_cuts):
        b = eng.M @ x
        w = beta - b
        val = eng.criterion(w)
        if val < best_val:
            best_val, best_b = val, b
        if best_val - lower <= tol:
            break
        for sign in (1.0, -1.0):
            y = eng.ineq_argmax(sign * w)
            # value(sign * w) = y' C sign (beta - A x): a linear function of x
            g = -sign * (y @ CA)
            h0 = sign * (y @ Cb)
            cuts_g.append(np.concatenate([g, [-1.0]]))
            cuts_h.append(-h0)
        res, sol = solve_general(c, np.array(cuts_g), np.array(cuts_h), A_eq, b_eq)
        if not res.optimal:
            raise InferenceError(f"cutting-plane master LP ended with status {res.status}")
        x, lower = sol[:m], max(lower, float(res.value))
    else:
        if best_val - lower > tol:
            raise InferenceError(
                f"cutting planes did not converge in {max_cuts} cuts (gap {best_val - lower:.3g})")
    return best_b, best_val


class _NullEmpty(Exception):
    pass


def restricted_estimator(A, beta_hat, sigma: np.ndarray, n: int, n_fixed: int = 2,
                         method: str = "lp", null_scale="auto") -> tuple[np.ndarray, float]:
    """``beta_r = A x`` (``x >= 0``, fixed tail) closest to ``beta_hat`` in the inequality-part norm.

    Returns the estimator and its criterion value.
    """
    M = A.matrix if isinstance(A, SystemMatrix) else np.asarray(A, dtype=float)
    eng = _Engine(M, n_fixed, sigma, n, null_scale)
    return _restricted(eng, np.asarray(beta_hat, dtype=float), method)


def _restricted(eng: _Engine, beta: np.ndarray, method: str) -> tuple[np.ndarray, float]:
    feas = solve(StandardLP(np.zeros(eng.m), eng.M, beta))
    if feas.optimal:
        return beta.copy(), 0.0
    if method == "lp":
        return _restricted_lp(eng, beta)
    return _restricted_cutting_plane(eng, beta)


def test_statistic(A, beta_hat, sigma: np.ndarray, n: int, null_scale="auto") -> tuple[float, float, float]:
    """``(T_n, equality part, inequality part)``."""
    M = A.matrix if isinstance(A, SystemMatrix) else np.asarray(A, dtype=float)
    eng = _Engine(M, 0, sigma, n, null_scale)
    beta_hat = np.asarray(beta_hat, dtype=float)
    e = eng.eq_part(beta_hat)
    i, _ = eng.ineq_part(beta_hat)
    return max(e, i), e, i


test_statistic.__test__ = False


def _resample_cells(p: ObservedDistribution, rng: np.random.Generator) -> np.ndarray:
    s = p.support
    k = s.n_y * s.n_d
    nz = p.z_counts
    out = np.empty(s.n_cells)
    for z in range(s.n_z):
        draw = rng.multinomial(int(nz[z]), p.block(z))
        out[z * k:(z + 1) * k] = draw / nz[z]
    return out


def bootstrap_draws(eng: _Engine, p: ObservedDistribution, beta_hat: np.ndarray, shift: np.ndarray,
                    B: int, seed: int, threads=None) -> np.ndarray:
    """``max`` of the recentred equality part and the shifted inequality part, one per resample."""
    seeds = np.random.SeedSequence(seed).spawn(B)
    tail = beta_hat[p.support.n_cells:]

    def work(idx: range):
        out = []
        basis = None
        for b in idx:
            rng = np.random.default_rng(seeds[b])
            star = np.concatenate([_resample_cells(p, rng), tail])
            d = star - beta_hat
            e = eng.eq_part(d)
            i, basis = eng.ineq_part(d + shift, basis)
            out.append(max(e, i))
        return out

    return np.array(_parallel.chunked_map(work, B, threads, size=BOOT_CHUNK))


def critical_value(draws: np.ndarray, alpha: float, method: str = "inverted_cdf") -> float:
    """``inf{x : F(x) >= 1 - alpha}`` for the empirical law of ``draws``."""
    return float(np.quantile(draws, 1.0 - alpha, method=method))


def _run(M: np.ndarray, beta_hat: np.ndarray, n_fixed: int, p: ObservedDistribution,
         config: TestConfig, theta0=None) -> TestOutcome:
    if p.n <= 0 or p.counts is None:
        raise DataError("inference needs sample counts")
    n = p.n
    sigma = cell_covariance(p, M.shape[0])
    eng = _Engine(M, n_fixed, sigma, n, config.null_scale)
    lam = config.resolved_lambda(n)
    e = eng.eq_part(beta_hat)
    i, _ = eng.ineq_part(beta_hat)
    T = max(e, i)
    meta = {
        "n": n, "rank": eng.r, "studentizer": "symmetric_psd_root",
        "null_scale": list(eng.null_scale), "equality_centering": "beta_star - beta_hat",
        "sqrt_n_in_bootstrap": True, "quantile": config.quantile_method,
        "restricted_method": config.restricted_method,
    }
    try:
        beta_r, crit = _restricted(eng, beta_hat, config.restricted_method)
    except _NullEmpty:
        meta["null_empty"] = True
        return TestOutcome(math.inf, math.nan, True, (e, i), lam, theta0, None, None, meta)
    meta["restricted_criterion"] = crit
    shift = lam * beta_r
    draws = bootstrap_draws(eng, p, beta_hat, shift, config.bootstrap_B, config.seed, config.threads)
    c = critical_value(draws, config.alpha, config.quantile_method)
    return TestOutcome(T, c, bool(T > c + REJECT_TOL), (e, i), lam, theta0, beta_r,
                       draws if config.keep_draws else None, meta)


def test(theta0: float, model: StrataModel, param: ParameterSpec, data: ObservedDistribution,
         config: TestConfig | None = None) -> TestOutcome:
    """Bootstrap test of ``theta(Q) = theta0``."""
    config = TestConfig() if config is None else config
    system = build_A(model, param, float(theta0))
    beta_hat = system.beta(data)
    n_fixed = system.shape[0] - system.n_cells
    return _run(np.array(system.matrix), beta_hat, n_fixed, data, config, float(theta0))


test.__test__ = False  # keep pytest from collecting it when imported into test modules


def specification_test(model: StrataModel, data: ObservedDistribution,
                       config: TestConfig | None = None) -> TestOutcome:
    """Test that some admissible latent distribution rationalizes the data."""
    config = TestConfig() if config is None else config
    system = build_A(model, None, 0.0)
    beta0 = system.beta0(data)
    n_fixed = system.A0.shape[0] - system.n_cells
    return _run(np.array(system.A0), beta0, n_fixed, data, config)


@dataclass
class ConfidenceRegion:
    grid: np.ndarray
    accepted: np.ndarray
    intervals: list
    outcomes: list = field(default_factory=list, repr=False)
    grid_source: str = ""
    # "open" means an accepted grid end point with no rejection beyond it
    edges: tuple = ("closed", "closed")

    @property
    def empty(self) -> bool:
        return not bool(self.accepted.any())

    def to_dict(self) -> dict:
        return {
            "grid": [float(v) for v in self.grid],
            "accepted": [bool(v) for v in self.accepted],
            "intervals": [[float(a), float(b)] for a, b in self.intervals],
            "empty": self.empty,
            "grid_source": self.grid_source,
            "edges": list(self.edges),
            "tests": [o.to_dict() for o in self.outcomes],
        }


def accepted_intervals(grid: np.ndarray, accepted: np.ndarray) -> list[tuple[float, float]]:
    out, start = [], None
    for t, ok in zip(grid, accepted):
        if ok and start is None:
            start = t
        if ok:
            last = t
        if not ok and start is not None:
            out.append((float(start), float(last)))
            start = None
    if start is not None:
        out.append((float(start), float(last)))
    return out


def default_theta_grid(model: StrataModel, param: ParameterSpec, data: ObservedDistribution,
                       n_points: int = 41) -> tuple[np.ndarray, str]:
    """Identified bounds at the plug-in distribution, widened by four grid steps each side."""
    from .idset import identified_set

    g = param.g_values(sorted(param.conditioning))
    res = identified_set(model, param, data, grid_n=201)
    if res.nonempty and np.isfinite(res.lower) and np.isfinite(res.upper):
        lo, hi = res.lower, res.upper
        width = hi - lo
        if width <= 1e-12:
            width = max(float(g.max() - g.min()), 1.0) / 10.0
        step = width / max(n_points - 9, 1)
        return np.linspace(lo - 4 * step, hi + 4 * step, n_points), "plug_in_bounds"
    return np.linspace(float(g.min()), float(g.max()), n_points), "range_of_g"


def confidence_region(model: StrataModel, param: ParameterSpec, data: ObservedDistribution,
                      config: TestConfig | None = None) -> ConfidenceRegion:
    """Invert the test over a grid of hypothesized values."""
    config = TestConfig() if config is None else config
    if config.theta_grid is not None:
        lo, hi, k = config.theta_grid
        grid = np.linspace(float(lo), float(hi), int(k))
        source = "config"
    else:
        grid, source = default_theta_grid(model, param, data)
    tested = {float(t): test(t, model, param, data, config) for t in grid}
    edges = ["closed", "closed"]
    if source != "config" and len(grid) > 1:
        g = param.g_values(sorted(param.conditioning))
        step = float(grid[1] - grid[0])
        for k, (end, limit, sgn) in enumerate(((grid[0], float(g.min()), -1.0), (grid[-1], float(g.max()), 1.0))):
            if not tested[float(end)].reject:
                edges[k] = _extend_edge(tested, float(end), limit, sgn * step,
                                        lambda t: test(t, model, param, data, config))
    grid = np.array(sorted(tested))
    outcomes = [tested[float(t)] for t in grid]
    accepted = np.array([not o.reject for o in outcomes])
    return ConfidenceRegion(grid, accepted, accepted_intervals(grid, accepted), outcomes, source, tuple(edges))


def _extend_edge(tested: dict, end: float, limit: float, step: float, run) -> str:
    """Push an accepted default-grid end outward until a rejection, then bisect back to ``|step|``.

    Probes double their distance from ``end`` and stop at ``limit`` (the range of g).
    """
    inside, dist = end, abs(step)
    while True:
        t = end + math.copysign(dist, step)
        if (t - limit) * step >= 0:
            t = limit
        if t == inside:
            return "open"
        tested[t] = run(t)
        if tested[t].reject:
            outside = t
            break
        if t == limit:
            return "open"
        inside, dist = t, 2 * dist
    while abs(outside - inside) > abs(step):
        mid = 0.5 * (inside + outside)
        tested[mid] = run(mid)
        if tested[mid].reject:
            outside = mid
        else:
            inside = mid
    return "closed"
