"""Observed distributions, data ingestion and studentizing matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .linsys import SystemMatrix, check_cells, pseudo_inverse
from .model import ModelError, Support


class DataError(ValueError):
    """Malformed or incomplete observational data."""


@dataclass(frozen=True)
class ObservedDistribution:
    """Cell probabilities ``p[y,d|z]`` in system row order, plus sampling information."""

    support: Support
    cells: np.ndarray
    z_marginal: np.ndarray
    n: int = 0
    counts: np.ndarray | None = None

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float).ravel().copy()
        zm = np.asarray(self.z_marginal, dtype=float).ravel().copy()
        try:
            check_cells(cells, self.support)
        except ModelError as exc:
            raise DataError(str(exc)) from None
        if zm.size != self.support.n_z or abs(zm.sum() - 1.0) > 1e-10 or np.any(zm < 0):
            raise DataError("z marginal must be a probability vector over the instrument support")
        cells.setflags(write=False)
        zm.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "z_marginal", zm)
        if self.counts is not None:
            c = np.asarray(self.counts, dtype=np.int64).ravel().copy()
            c.setflags(write=False)
            object.__setattr__(self, "counts", c)

    @classmethod
    def from_probabilities(cls, support: Support, cells, z_marginal=None) -> "ObservedDistribution":
        """Population distribution; the instrument marginal defaults to uniform."""
        if z_marginal is None:
            z_marginal = np.full(support.n_z, 1.0 / support.n_z)
        return cls(support, cells, z_marginal, 0, None)

    @classmethod
    def from_counts(cls, support: Support, counts) -> "ObservedDistribution":
        counts = np.asarray(counts)
        if counts.size != support.n_cells:
            raise DataError(f"expected {support.n_cells} counts, got {counts.size}")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise DataError("counts must be nonnegative integers")
        counts = counts.astype(np.int64).ravel()
        per_z = counts.reshape(support.n_z, -1)
        nz = per_z.sum(axis=1)
        empty = np.flatnonzero(nz == 0)
        if empty.size:
            raise DataError(f"instrument value z={support.z_values[empty[0]]!r} has no observations")
        cells = (per_z / nz[:, None]).ravel()
        n = int(nz.sum())
        return cls(support, cells, nz / n, n, counts)

    @property
    def z_counts(self) -> np.ndarray:
        if self.counts is None:
            raise DataError("distribution carries no counts")
        return self.counts.reshape(self.support.n_z, -1).sum(axis=1)

    def block(self, z: int) -> np.ndarray:
        k = self.support.n_y * self.support.n_d
        return self.cells[z * k:(z + 1) * k]

    def prob(self, y, d, z) -> float:
        s = self.support
        return float(self.cells[s.cell_index(s.y_code(y), s.d_code(d), s.z_code(z))])

    def as_dict(self) -> dict:
        return dict(zip(self.support.cell_names(), map(float, self.cells)))

    def scaled(self, factor: int) -> "ObservedDistribution":
        if self.counts is None:
            raise DataError("distribution carries no counts")
        return ObservedDistribution.from_counts(self.support, self.counts * int(factor))


def ingest(support: Support, records: Iterable, counts: Iterable | None = None) -> ObservedDistribution:
    """Tabulate ``(y, d, z)`` label triples, optionally weighted by integer counts."""
    tab = np.zeros(support.n_cells, dtype=np.int64)
    weights = counts if counts is not None else None
    for i, rec in enumerate(records):
        y, d, z = rec
        try:
            idx = support.cell_index(support.y_code(y), support.d_code(d), support.z_code(z))
        except ModelError as exc:
            raise DataError(f"record {i}: {exc}") from None
        tab[idx] += 1 if weights is None else int(weights[i])
    return ObservedDistribution.from_counts(support, tab)


def _infer_values(labels: list[str]) -> tuple:
    uniq = set(labels)
    try:
        return tuple(sorted(int(v) for v in uniq))
    except ValueError:
        pass
    try:
        return tuple(sorted(uniq, key=float))
    except ValueError:
        return tuple(sorted(uniq))


def read_csv(path, support: Support | None = None) -> ObservedDistribution:
    """Read micro data (``y,d,z``) or aggregated counts (``y,d,z,count``).

    Without ``support`` the label sets are inferred from the file (numeric
    labels sorted numerically).
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    if header[:3] != ["y", "d", "z"] or len(header) not in (3, 4) or (len(header) == 4 and header[3] != "count"):
        raise DataError(f"{path}:1: header must be 'y,d,z' or 'y,d,z,count', got {','.join(rows[0])!r}")
    recs, weights = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        recs.append(tuple(c.strip() for c in row[:3]))
        if len(header) == 4:
            try:
                w = int(row[3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: count {row[3]!r} is not an integer") from None
            if w < 0:
                raise DataError(f"{path}:{lineno}: negative count")
            weights.append(w)
    if support is None:
        support = Support(*(_infer_values([r[k] for r in recs]) for k in range(3)))
    for lineno, r in enumerate(recs, start=2):
        for lab, vals, nm in zip(r, (support.y_values, support.d_values, support.z_values), "ydz"):
            if lab not in map(str, vals):
                raise DataError(f"{path}:{lineno}: {nm}={lab!r} is outside the support {vals!r}")
    return ingest(support, recs, weights if len(header) == 4 else None)


def write_counts_csv(p: ObservedDistribution, path) -> None:
    if p.counts is None:
        raise DataError("distribution carries no counts")
    s = p.support
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "d", "z", "count"])
        for (y, d, z), c in zip(s.cells(), p.counts):
            w.writerow([s.y_values[y], s.d_values[d], s.z_values[z], int(c)])


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root (negative eigenvalues from rounding are clipped)."""
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def cell_covariance(p: ObservedDistribution, size: int | None = None) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n)(beta_hat - beta)``; zero on the tail coordinates."""
    s = p.support
    size = s.n_cells if size is None else size
    if np.any(p.z_marginal <= 0):
        raise DataError("every instrument value needs positive probability")
    Sigma = np.zeros((size, size))
    k = s.n_y * s.n_d
    for z in range(s.n_z):
        pz = p.block(z)
        Sigma[z * k:(z + 1) * k, z * k:(z + 1) * k] = (np.diag(pz) - np.outer(pz, pz)) / p.z_marginal[z]
    return Sigma


@dataclass(frozen=True)
class StudentizerPair:
    omega_e: np.ndarray
    omega_i: np.ndarray
    sigma: np.ndarray
    meta: dict = field(default_factory=dict)


def estimate_studentizers(p: ObservedDistribution, A, rank_tol: float = 1e-10) -> StudentizerPair:
    """``omega_e = Sigma^(1/2)`` and ``omega_i = (P Sigma P')^(1/2)`` with ``P = A A^+``."""
    M = A.matrix if isinstance(A, SystemMatrix) else np.asarray(A, dtype=float)
    if p.n <= 0:
        raise DataError("studentizers need a sample (n > 0)")
    Sigma = cell_covariance(p, M.shape[0])
    P = pseudo_inverse(M, rank_tol).projector
    return StudentizerPair(
        psd_sqrt(Sigma), psd_sqrt(P @ Sigma @ P.T), Sigma,
        {"factorization": "symmetric_psd_root", "covariance": "stratified_multinomial"},
    )
