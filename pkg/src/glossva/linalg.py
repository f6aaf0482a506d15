"""Small dense linear algebra kernels.

Everything here is generic over the scalar type: entries may be plain
floats or autodiff variables, as long as they support arithmetic
operators.  Packed triangular storage is column-major half-vectorization
throughout, so the j-th diagonal entry of a LowerTriangular of dimension
d sits at offset sum_{c<j}(d-c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LinalgError(ValueError):
    pass


def _as_value(x):
    """Numeric value of a scalar that may be an autodiff Var."""
    return x.val if hasattr(x, "val") else x


def _zero_const(x):
    """True for a plain zero constant (safe to skip in accumulations)."""
    return not hasattr(x, "val") and x == 0.0


@dataclass
class Matrix:
    """Dense matrix, row-major entry list."""

    rows: int
    cols: int
    data: list

    def __post_init__(self):
        if len(self.data) != self.rows * self.cols:
            raise LinalgError(
                f"matrix data length {len(self.data)} != {self.rows}x{self.cols}"
            )

    @classmethod
    def zeros(cls, rows, cols):
        return cls(rows, cols, [0.0] * (rows * cols))

    @classmethod
    def identity(cls, dim):
        m = cls.zeros(dim, dim)
        for j in range(dim):
            m[j, j] = 1.0
        return m

    @classmethod
    def from_rows(cls, rows):
        nr = len(rows)
        nc = len(rows[0]) if nr else 0
        flat = []
        for r in rows:
            if len(r) != nc:
                raise LinalgError("ragged row lengths")
            flat.extend(r)
        return cls(nr, nc, flat)

    def __getitem__(self, idx):
        i, j = idx
        return self.data[i * self.cols + j]

    def __setitem__(self, idx, value):
        i, j = idx
        self.data[i * self.cols + j] = value

    def row(self, i):
        return self.data[i * self.cols : (i + 1) * self.cols]

    def matvec(self, v):
        if len(v) != self.cols:
            raise LinalgError("matvec dimension mismatch")
        out = []
        for i in range(self.rows):
            acc = 0.0
            base = i * self.cols
            for j in range(self.cols):
                a = self.data[base + j]
                if _zero_const(a) or _zero_const(v[j]):
                    continue
                acc = acc + a * v[j]
            out.append(acc)
        return out

    def transpose_matvec(self, v):
        if len(v) != self.rows:
            raise LinalgError("matvec dimension mismatch")
        out = [0.0] * self.cols
        for i in range(self.rows):
            base = i * self.cols
            vi = v[i]
            if _zero_const(vi):
                continue
            for j in range(self.cols):
                a = self.data[base + j]
                if _zero_const(a):
                    continue
                out[j] = out[j] + a * vi
        return out

    def matmul(self, other: "Matrix") -> "Matrix":
        if self.cols != other.rows:
            raise LinalgError("matmul dimension mismatch")
        out = Matrix.zeros(self.rows, other.cols)
        for i in range(self.rows):
            for k in range(self.cols):
                a = self[i, k]
                if _as_value(a) == 0.0 and not hasattr(a, "val"):
                    continue
                for j in range(other.cols):
                    b = other[k, j]
                    if _as_value(b) == 0.0 and not hasattr(b, "val"):
                        continue
                    out[i, j] = out[i, j] + a * b
        return out

    def to_numpy(self):
        return np.array(
            [[_as_value(self[i, j]) for j in range(self.cols)] for i in range(self.rows)],
            dtype=float,
        )


def packed_length(dim):
    return dim * (dim + 1) // 2


def packed_index(dim, i, j):
    """Offset of entry (i, j), i >= j, in column-major packed storage."""
    if i < j:
        raise LinalgError("above-diagonal entry in packed storage")
    return sum(dim - c for c in range(j)) + (i - j)


def diag_indices_packed(dim):
    """Offsets of the diagonal entries in packed column-major storage."""
    out = []
    off = 0
    for j in range(dim):
        out.append(off)
        off += dim - j
    return out


@dataclass
class LowerTriangular:
    """Lower-triangular matrix in packed column-major storage."""

    dim: int
    packed: list

    def __post_init__(self):
        if len(self.packed) != packed_length(self.dim):
            raise LinalgError(
                f"packed length {len(self.packed)} != {packed_length(self.dim)}"
            )

    @classmethod
    def identity(cls, dim):
        packed = [0.0] * packed_length(dim)
        for k in diag_indices_packed(dim):
            packed[k] = 1.0
        return cls(dim, packed)

    def __getitem__(self, idx):
        i, j = idx
        if i < j:
            return 0.0
        return self.packed[packed_index(self.dim, i, j)]

    def diagonal(self):
        return [self.packed[k] for k in diag_indices_packed(self.dim)]

    def to_matrix(self):
        m = Matrix.zeros(self.dim, self.dim)
        for j in range(self.dim):
            for i in range(j, self.dim):
                m[i, j] = self[i, j]
        return m

    def to_numpy(self):
        return self.to_matrix().to_numpy()


def vech(a: Matrix):
    """Column-stacked entries on or below the diagonal."""
    if a.rows != a.cols:
        raise LinalgError("vech requires a square matrix")
    out = []
    for j in range(a.cols):
        for i in range(j, a.rows):
            out.append(a[i, j])
    return out


def unvech(v, dim) -> LowerTriangular:
    if len(v) != packed_length(dim):
        raise LinalgError("unvech length mismatch")
    return LowerTriangular(dim, list(v))


def vec(a: Matrix):
    """Column-major vectorization."""
    out = []
    for j in range(a.cols):
        for i in range(a.rows):
            out.append(a[i, j])
    return out


def star(t: LowerTriangular) -> LowerTriangular:
    """Log-transform the diagonal, leave off-diagonals unchanged."""
    from . import adiff

    packed = list(t.packed)
    for k in diag_indices_packed(t.dim):
        if _as_value(packed[k]) <= 0.0:
            raise LinalgError("star requires a positive diagonal")
        packed[k] = adiff.log(packed[k])
    return LowerTriangular(t.dim, packed)


def star_inverse(t: LowerTriangular) -> LowerTriangular:
    """Exponentiate the diagonal; inverse of star."""
    from . import adiff

    packed = list(t.packed)
    for k in diag_indices_packed(t.dim):
        packed[k] = adiff.exp(packed[k])
    return LowerTriangular(t.dim, packed)


def tri_solve(t: LowerTriangular, v, transpose=False):
    """Solve T x = v (or T^T x = v) by substitution."""
    d = t.dim
    if len(v) != d:
        raise LinalgError("tri_solve dimension mismatch")
    for dk in t.diagonal():
        if _as_value(dk) == 0.0:
            raise LinalgError("singular triangular matrix")
    x = [0.0] * d
    if not transpose:
        for i in range(d):
            acc = v[i]
            for j in range(i):
                tij = t[i, j]
                if _as_value(tij) == 0.0 and not hasattr(tij, "val"):
                    continue
                acc = acc - tij * x[j]
            x[i] = acc / t[i, i]
    else:
        for i in reversed(range(d)):
            acc = v[i]
            for j in range(i + 1, d):
                tji = t[j, i]
                if _as_value(tji) == 0.0 and not hasattr(tji, "val"):
                    continue
                acc = acc - tji * x[j]
            x[i] = acc / t[i, i]
    return x


def elimination(d):
    """L with L vec(A) = vech(A) for all square A of dimension d."""
    if d < 1:
        raise LinalgError("dimension must be >= 1")
    nh = packed_length(d)
    L = np.zeros((nh, d * d))
    k = 0
    for j in range(d):
        for i in range(j, d):
            L[k, j * d + i] = 1.0
            k += 1
    return L


def commutation(d):
    """K with K vec(A^T) = vec(A) for all square A of dimension d."""
    if d < 1:
        raise LinalgError("dimension must be >= 1")
    K = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            K[j * d + i, i * d + j] = 1.0
    return K


def det_generic(m: Matrix):
    """Determinant by Gaussian elimination with partial pivoting.

    Pivot selection compares numeric values, so the result is
    differentiable away from pivot ties.
    """
    if m.rows != m.cols:
        raise LinalgError("determinant of a non-square matrix")
    d = m.rows
    work = [list(m.row(i)) for i in range(d)]
    det = 1.0
    sign = 1.0
    for col in range(d):
        piv = max(range(col, d), key=lambda r: abs(_as_value(work[r][col])))
        if _as_value(work[piv][col]) == 0.0:
            return 0.0
        if piv != col:
            work[col], work[piv] = work[piv], work[col]
            sign = -sign
        pivot = work[col][col]
        det = det * pivot
        for r in range(col + 1, d):
            factor = work[r][col] / pivot
            if _as_value(factor) == 0.0 and not hasattr(factor, "val"):
                continue
            for c in range(col + 1, d):
                work[r][c] = work[r][c] - factor * work[col][c]
    return sign * det


def dot(a, b):
    if len(a) != len(b):
        raise LinalgError("dot dimension mismatch")
    acc = 0.0
    for x, y in zip(a, b):
        acc = acc + x * y
    return acc


def sq_norm(a):
    acc = 0.0
    for x in a:
        acc = acc + x * x
    return acc


def kron_identity_right(c: Matrix, d: int) -> Matrix:
    """C (x) I_d as an explicit matrix."""
    out = Matrix.zeros(c.rows * d, c.cols * d)
    for i in range(c.rows):
        for j in range(c.cols):
            cij = c[i, j]
            if _as_value(cij) == 0.0 and not hasattr(cij, "val"):
                continue
            for k in range(d):
                out[i * d + k, j * d + k] = cij
    return out


def lgamma_multivariate(p, a):
    """Multivariate log-gamma of order p."""
    from . import adiff

    acc = p * (p - 1) / 4.0 * math.log(math.pi)
    for j in range(p):
        acc = acc + adiff.lgamma(a - 0.5 * j)
    return acc
