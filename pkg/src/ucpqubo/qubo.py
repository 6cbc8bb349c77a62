"""Sparse upper-triangular QUBO matrices with a constant offset."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Coefficients ``q_ij`` with ``i <= j`` in coalesced, sorted COO form.

    Energy of a binary vector is ``sum_{i<=j} q_ij x_i x_j + offset``.
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    offset: float = 0.0

    @classmethod
    def from_coo(cls, dim: int, rows, cols, values, offset: float = 0.0) -> "QuboMatrix":
        """Fold lower-triangle entries onto the upper triangle, sum duplicates, drop zeros."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= dim):
            raise IndexError("coefficient index outside [0, dim)")
        lo = np.minimum(rows, cols)
        hi = np.maximum(rows, cols)
        key = lo * dim + hi
        order = np.argsort(key, kind="stable")
        key = key[order]
        values = values[order]
        if key.size:
            first = np.concatenate(([True], key[1:] != key[:-1]))
            starts = np.flatnonzero(first)
            summed = np.add.reduceat(values, starts)
            key = key[starts]
            keep = summed != 0.0
            key, summed = key[keep], summed[keep]
        else:
            summed = values
        return cls(int(dim), key // dim, key % dim, summed, float(offset))

    @classmethod
    def from_dict(cls, dim: int, coefficients: dict, offset: float = 0.0) -> "QuboMatrix":
        if not coefficients:
            return cls.from_coo(dim, [], [], [], offset)
        (rows, cols), values = zip(*coefficients.keys()), list(coefficients.values())
        return cls.from_coo(dim, rows, cols, values, offset)

    @classmethod
    def from_dense(cls, matrix, offset: float = 0.0) -> "QuboMatrix":
        matrix = np.asarray(matrix, dtype=float)
        rows, cols = np.nonzero(matrix)
        return cls.from_coo(matrix.shape[0], rows, cols, matrix[rows, cols], offset)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def to_dict(self) -> dict:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.values)}

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        out[self.rows, self.cols] = self.values
        return out

    def get(self, i: int, j: int) -> float:
        i, j = min(i, j), max(i, j)
        pos = np.searchsorted(self.rows * self.dim + self.cols, i * self.dim + j)
        if pos < self.nnz and self.rows[pos] == i and self.cols[pos] == j:
            return float(self.values[pos])
        return 0.0

    @cached_property
    def diagonal(self) -> np.ndarray:
        diag = np.zeros(self.dim)
        mask = self.rows == self.cols
        diag[self.rows[mask]] = self.values[mask]
        return diag

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric off-diagonal couplings as CSR ``(indptr, indices, data)``."""
        mask = self.rows != self.cols
        r, c, v = self.rows[mask], self.cols[mask], self.values[mask]
        src = np.concatenate([r, c])
        dst = np.concatenate([c, r])
        data = np.concatenate([v, v])
        order = np.lexsort((dst, src))
        src, dst, data = src[order], dst[order], data[order]
        indptr = np.zeros(self.dim + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.dim), out=indptr[1:])
        return indptr, dst.astype(np.int64), data

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"vector length {x.size} differs from dim {self.dim}")
        return float(np.dot(self.values, x[self.rows] * x[self.cols]) + self.offset)

    def energies(self, X) -> np.ndarray:
        """Energies of the rows of a ``(m, dim)`` 0/1 array."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError("expected an array of shape (m, dim)")
        return (X[:, self.rows] * X[:, self.cols]) @ self.values + self.offset

    def scaled(self, factor: float) -> "QuboMatrix":
        return QuboMatrix(self.dim, self.rows, self.cols, self.values * factor, self.offset * factor)

    def permuted(self, perm) -> "QuboMatrix":
        """Relabel variable ``i`` as ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return QuboMatrix.from_coo(self.dim, perm[self.rows], perm[self.cols], self.values, self.offset)

    def coefficient_range(self) -> tuple[float, float]:
        mags = np.abs(self.values)
        if mags.size == 0:
            return 0.0, 0.0
        return float(mags.min()), float(mags.max())

    # -- text exchange format ----------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.dim} {self.offset:.16e}"]
        lines.extend(f"{i} {j} {v:.16e}" for i, j, v in zip(self.rows, self.cols, self.values))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QuboMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        dim, offset = int(head[0]), float(head[1])
        if len(lines) == 1:
            return cls.from_coo(dim, [], [], [], offset)
        body = np.array([ln.split() for ln in lines[1:]], dtype=object)
        rows = body[:, 0].astype(np.int64)
        cols = body[:, 1].astype(np.int64)
        values = body[:, 2].astype(float)
        if np.any(rows > cols):
            raise ValueError("entries must satisfy i <= j")
        return cls.from_coo(dim, rows, cols, values, offset)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "QuboMatrix":
        return cls.from_text(Path(path).read_text(encoding="ascii"))


class QuboAccumulator:
    """Collects quadratic and linear contributions before coalescing into a matrix."""

    def __init__(self, dim: int):
        self.dim = dim
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self.offset = 0.0

    def add_linear(self, weight: float, idx, coef) -> None:
        idx = np.asarray(idx, dtype=np.int64).ravel()
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape).ravel()
        self._rows.append(idx)
        self._cols.append(idx)
        self._vals.append(weight * coef)

    def add_product(self, weight: float, idx_a, coef_a, idx_b, coef_b) -> None:
        """Add ``weight * (sum_a coef_a x_a) * (sum_b coef_b x_b)``."""
        idx_a = np.asarray(idx_a, dtype=np.int64).ravel()
        idx_b = np.asarray(idx_b, dtype=np.int64).ravel()
        coef_a = np.broadcast_to(np.asarray(coef_a, dtype=float), idx_a.shape).ravel()
        coef_b = np.broadcast_to(np.asarray(coef_b, dtype=float), idx_b.shape).ravel()
        self._rows.append(np.repeat(idx_a, idx_b.size))
        self._cols.append(np.tile(idx_b, idx_a.size))
        self._vals.append(weight * np.outer(coef_a, coef_b).ravel())

    def add_squared_affine(self, weight: float, idx, coef, constant: float = 0.0) -> None:
        """Add ``weight * (sum_i coef_i x_i + constant)**2``."""
        self.add_product(weight, idx, coef, idx, coef)
        self.add_linear(2.0 * weight * constant, idx, coef)
        self.offset += weight * constant * constant

    def add_constant(self, value: float) -> None:
        self.offset += value

    def build(self) -> QuboMatrix:
        if not self._rows:
            return QuboMatrix.from_coo(self.dim, [], [], [], self.offset)
        return QuboMatrix.from_coo(
            self.dim,
            np.concatenate(self._rows),
            np.concatenate(self._cols),
            np.concatenate(self._vals),
            self.offset,
        )
