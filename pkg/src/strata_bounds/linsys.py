"""The linear system linking latent response-type masses to observables.

Row layout of :class:`SystemMatrix`:

* one row per cell ``(y, d, z)``; ``z`` outermost, then ``d``, then ``y``
* the mass row ``1{r in R}``
* one row per relaxation (``+1`` on the capped types plus a slack column)
* the parameter row ``(g(r) - theta0) 1{r in R'}``

so that ``A q = beta`` with ``q >= 0`` holds exactly when ``q`` is an
admissible latent distribution that rationalizes the cells and has
``theta(q) = theta0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    DEFAULT_TYPE_CAP,
    LatentDistribution,
    ModelError,
    ParameterSpec,
    ResponseType,
    StrataModel,
    Support,
    enumerate_response_types,
)

DEFAULT_RANK_TOL = 1e-10


def cell_matrix(support: Support, columns: Sequence[ResponseType]) -> np.ndarray:
    """``A1``: entry ``((y, d, z), r) = 1{y(d) = y, d(z) = d}``."""
    A1 = np.zeros((support.n_cells, len(columns)))
    for j, r in enumerate(columns):
        for z in range(support.n_z):
            d = r.treatments[z]
            A1[support.cell_index(r.outcomes[d], d, z), j] = 1.0
    return A1


@dataclass(frozen=True)
class SystemMatrix:
    matrix: np.ndarray
    support: Support
    columns: tuple
    model: StrataModel
    param: ParameterSpec | None
    theta0: float
    reduced: bool
    relax_targets: tuple = ()

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def n_cells(self) -> int:
        return self.support.n_cells

    @property
    def cell_rows(self) -> np.ndarray:
        return np.arange(self.n_cells)

    @property
    def mass_row(self) -> int:
        return self.n_cells

    @property
    def relax_rows(self) -> np.ndarray:
        return np.arange(self.n_cells + 1, self.n_cells + 1 + len(self.relax_targets))

    @property
    def param_row(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def n_types(self) -> int:
        """Number of response-type columns (slack columns come after them)."""
        return sum(1 for c in self.columns if isinstance(c, ResponseType))

    @property
    def A0(self) -> np.ndarray:
        return self.matrix[:-1]

    @property
    def A1(self) -> np.ndarray:
        return self.matrix[:self.n_cells]

    @property
    def a0(self) -> np.ndarray:
        return self.matrix[self.mass_row]

    def row_names(self) -> list[str]:
        names = self.support.cell_names() + ["mass"]
        names += [f"relax[{i}]" for i in range(len(self.relax_targets))]
        return names + ["param"]

    def column_labels(self) -> list[str]:
        return [c.label() if isinstance(c, ResponseType) else str(c) for c in self.columns]

    def stratum_indicator(self, stratum) -> np.ndarray:
        """Indicator over the columns; ``stratum`` holds response types or treatment-type labels."""
        items = list(stratum)
        if not all(isinstance(r, ResponseType) for r in items):
            items = self.model.stratum(*items)
        stratum = frozenset(items)
        return np.array([1.0 if c in stratum else 0.0 for c in self.columns])

    def conditioning_indicator(self) -> np.ndarray:
        if self.param is None:
            raise ModelError("system has no parameter attached")
        return self.stratum_indicator(self.param.conditioning)

    def g_vector(self) -> np.ndarray:
        """``g(r) 1{r in R'}`` over the columns, zero on slack columns."""
        if self.param is None:
            raise ModelError("system has no parameter attached")
        cond = self.param.conditioning
        return np.array([float(self.param.g(c)) if c in cond else 0.0 for c in self.columns])

    def with_stratum_row(self, stratum=None) -> np.ndarray:
        """``A(R')``: ``A0`` stacked on the indicator of the stratum."""
        row = self.conditioning_indicator() if stratum is None else self.stratum_indicator(stratum)
        return np.vstack([self.A0, row])

    def with_theta(self, theta0: float) -> "SystemMatrix":
        return build_A(self.model, self.param, theta0, reduced=self.reduced)

    def beta(self, p, tail_pi: float | None = None) -> np.ndarray:
        return beta_from_observed(p, tail_pi, system=self).vector

    def beta0(self, p) -> np.ndarray:
        return self.beta(p)[:-1]

    def to_csv(self, path) -> None:
        """Dense dump with a header of column labels and a leading row-name column."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row"] + self.column_labels())
            for name, row in zip(self.row_names(), self.matrix):
                w.writerow([name] + [repr(float(v)) for v in row])


def build_A(model: StrataModel, param: ParameterSpec | None = None, theta0: float = 0.0,
            reduced: bool = True, cap: int = DEFAULT_TYPE_CAP) -> SystemMatrix:
    """Assemble the system for ``model`` and ``param`` at the hypothesized ``theta0``."""
    support = model.support
    if param is not None and param.model is not model and param.model != model:
        raise ModelError("parameter is attached to a different model")
    columns = list(model.admissible) if reduced else enumerate_response_types(support, cap)
    adm = model.admissible_set
    n_rel = len(model.relaxations)
    n_rows = support.n_cells + 2 + n_rel
    A = np.zeros((n_rows, len(columns) + n_rel))
    A[:support.n_cells, :len(columns)] = cell_matrix(support, columns)
    m = support.n_cells
    A[m, :len(columns)] = [1.0 if r in adm else 0.0 for r in columns]
    targets = []
    for i, rel in enumerate(model.relaxations):
        sign = 1.0 if rel.direction == "at_most" else -1.0
        A[m + 1 + i, :len(columns)] = [sign if r in rel.types else 0.0 for r in columns]
        A[m + 1 + i, len(columns) + i] = 1.0
        targets.append(sign * rel.eps)
    if param is not None:
        cond = param.conditioning
        A[-1, :len(columns)] = [(float(param.g(r)) - theta0) if r in cond else 0.0 for r in columns]
    all_cols = tuple(columns) + tuple(f"slack[{i}]" for i in range(n_rel))
    return SystemMatrix(A, support, all_cols, model, param, float(theta0), reduced, tuple(targets))


@dataclass(frozen=True)
class BetaVector:
    cells: np.ndarray
    tail: tuple

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.cells, np.asarray(self.tail, dtype=float)])


def _cells_of(p) -> np.ndarray:
    return np.asarray(getattr(p, "cells", p), dtype=float).ravel()


def check_cells(cells: np.ndarray, support: Support, atol: float = 1e-10) -> None:
    if cells.size != support.n_cells:
        raise ModelError(f"expected {support.n_cells} cell probabilities, got {cells.size}")
    if np.any(cells < -atol):
        raise ModelError("cell probabilities must be nonnegative")
    sums = cells.reshape(support.n_z, -1).sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > atol)
    if bad.size:
        z = support.z_values[bad[0]]
        raise ModelError(f"cells for z={z!r} sum to {sums[bad[0]]:.12g}, not 1")


def beta_from_observed(p, tail_pi: float | None = None, system: SystemMatrix | None = None,
                       atol: float = 1e-10) -> BetaVector:
    """``beta(P) = (cells, 1, [relaxation targets], 0)``, or ``pi`` in the last slot."""
    cells = _cells_of(p)
    support = system.support if system is not None else getattr(p, "support", None)
    if support is not None:
        check_cells(cells, support, atol)
    relax = system.relax_targets if system is not None else ()
    last = 0.0 if tail_pi is None else float(tail_pi)
    return BetaVector(cells, (1.0, *relax, last))


@dataclass(frozen=True)
class PseudoInverse:
    pinv: np.ndarray
    projector: np.ndarray
    rank: int
    singular_values: np.ndarray


def pseudo_inverse(A, rank_tol: float = DEFAULT_RANK_TOL) -> PseudoInverse:
    """Moore-Penrose inverse by SVD; singular values ``<= rank_tol * s_max`` count as zero."""
    A = np.asarray(getattr(A, "matrix", A), dtype=float)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cut = rank_tol * (s[0] if s.size else 0.0)
    keep = s > cut
    r = int(keep.sum())
    Ur, sr, Vr = U[:, :r], s[:r], Vt[:r]
    pinv = (Vr.T / sr) @ Ur.T
    proj = Ur @ Ur.T
    return PseudoInverse(pinv, proj, r, s)


def latent_to_observed(q, system_or_A1, columns: Sequence[ResponseType] | None = None) -> np.ndarray:
    """Cells ``A1 q`` implied by a latent distribution."""
    if isinstance(system_or_A1, SystemMatrix):
        A1 = system_or_A1.A1[:, :system_or_A1.n_types]
        columns = system_or_A1.columns[:system_or_A1.n_types]
    else:
        A1 = np.asarray(system_or_A1, dtype=float)
    if isinstance(q, LatentDistribution):
        if columns is None:
            raise ModelError("columns are needed to align a LatentDistribution")
        qv = q.vector(columns)
    else:
        qv = np.asarray(q, dtype=float)[:A1.shape[1]]
    return A1 @ qv
