"""Sparse and dense kernels shared by all solvers.

Sparse SPD matrices are stored in CSR layout with both triangles so the
matrix-vector product is a single row sweep.  Dense factorizations delegate
to LAPACK (via numpy/scipy) since every reduced matrix in this library is at
most a few hundred rows.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import (
    DimensionMismatch,
    IterationLimit,
    NotPositiveDefinite,
    NotSymmetric,
    RankDeficient,
)

_SYMMETRY_RTOL = 1e-12


class InstrumentationSink:
    """Shared counters for operation costs.

    One sink is attached per solve (or per benchmark run); increments are
    lock-protected so concurrent solves may share a sink.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.matvecs = 0
        self.precond_applies = 0
        self.gram_assemblies = 0

    def add_matvec(self, count: int = 1) -> None:
        with self._lock:
            self.matvecs += count

    def add_precond(self, count: int = 1) -> None:
        with self._lock:
            self.precond_applies += count

    def add_gram(self) -> None:
        with self._lock:
            self.gram_assemblies += 1

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "matvecs": self.matvecs,
                "precond_applies": self.precond_applies,
                "gram_assemblies": self.gram_assemblies,
            }


class SparseSpdMatrix:
    """Symmetric positive-definite sparse matrix in CSR layout.

    Both triangles are stored explicitly (2x memory, single-sweep matvec).
    Construction validates squareness, numerical symmetry to 1e-12 relative,
    and strictly positive diagonal entries.  Instances are immutable and safe
    to share across threads.
    """

    def __init__(self, n, row_offsets, col_indices, values):
        self.n = int(n)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.row_offsets.shape != (self.n + 1,):
            raise DimensionMismatch(
                f"row_offsets must have length n+1={self.n + 1}, got {self.row_offsets.shape}"
            )
        self._csr = scipy.sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=(self.n, self.n)
        )
        self._validate()

    @classmethod
    def from_dense(cls, mat) -> "SparseSpdMatrix":
        csr = scipy.sparse.csr_matrix(np.asarray(mat, dtype=np.float64))
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_scipy(cls, mat) -> "SparseSpdMatrix":
        csr = scipy.sparse.csr_matrix(mat).astype(np.float64)
        csr.sum_duplicates()
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data)

    @classmethod
    def identity(cls, n: int) -> "SparseSpdMatrix":
        return cls.from_scipy(scipy.sparse.identity(n, format="csr"))

    @classmethod
    def from_diagonal(cls, diag) -> "SparseSpdMatrix":
        return cls.from_scipy(scipy.sparse.diags(np.asarray(diag, dtype=np.float64), format="csr"))

    def _validate(self) -> None:
        scale = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        asym = self._csr - self._csr.T
        if asym.nnz and scale > 0:
            worst = float(np.max(np.abs(asym.data)))
            if worst > _SYMMETRY_RTOL * scale:
                raise NotSymmetric(
                    f"matrix asymmetry {worst:.3e} exceeds {_SYMMETRY_RTOL:.0e} * {scale:.3e}"
                )
        diag = self._csr.diagonal()
        bad = np.where(diag <= 0.0)[0]
        if bad.size:
            raise NotPositiveDefinite(
                f"diagonal entry {bad[0]} is {diag[bad[0]]!r}, must be > 0", pivot=int(bad[0])
            )

    @property
    def shape(self):
        return (self.n, self.n)

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_scipy(self) -> scipy.sparse.csr_matrix:
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def matvec(self, x: np.ndarray, sink: InstrumentationSink | None = None) -> np.ndarray:
        return spmv(self, x, sink)


def spmv(A: SparseSpdMatrix, x, sink: InstrumentationSink | None = None) -> np.ndarray:
    """Sparse matrix-vector product A @ x.

    Counts one matvec on ``sink`` when provided.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.n:
        raise DimensionMismatch(f"matvec: matrix is {A.n}x{A.n}, vector has length {x.shape[0]}")
    if sink is not None:
        sink.add_matvec()
    return A.to_scipy() @ x


def weighted_inner(A: SparseSpdMatrix, x, y) -> float:
    """A-weighted inner product x'Ay."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != A.n or y.shape[0] != A.n:
        raise DimensionMismatch("weighted_inner: dimension mismatch")
    return float(x @ (A.to_scipy() @ y))


def assemble_gram(A: SparseSpdMatrix, B: np.ndarray, sink: InstrumentationSink | None = None):
    """Densely assemble the reduced matrix B'AB and the product AB.

    This is the expensive materialization the staged solver avoids during
    stage 2; every call is audited on the sink (one gram assembly plus one
    matvec per column of B).
    """
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if B.shape[0] != A.n:
        raise DimensionMismatch("assemble_gram: basis rows must match matrix dimension")
    if sink is not None:
        sink.add_gram()
        sink.add_matvec(B.shape[1])
    AB = A.to_scipy() @ B
    return B.T @ AB, AB


@dataclass
class DenseBasis:
    """Dense block of length-n column vectors with optional Gram metadata.

    ``gram_diag`` records the diagonal of the (A-weighted) Gram matrix the
    columns were normalized against, when such a normalization exists.
    """

    columns: np.ndarray
    gram_diag: np.ndarray | None = None

    def __post_init__(self):
        self.columns = np.atleast_2d(np.asarray(self.columns, dtype=np.float64))
        if self.gram_diag is not None:
            self.gram_diag = np.asarray(self.gram_diag, dtype=np.float64)
            if self.gram_diag.shape != (self.columns.shape[1],):
                raise DimensionMismatch("gram_diag length must equal column count")

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def empty(cls, n: int) -> "DenseBasis":
        return cls(np.zeros((n, 0)))


def as_columns(basis) -> np.ndarray:
    """Accept a DenseBasis or a 2-D array and return the column block."""
    if basis is None:
        raise DimensionMismatch("expected a basis, got None")
    if isinstance(basis, DenseBasis):
        return basis.columns
    return np.atleast_2d(np.asarray(basis, dtype=np.float64))


class DenseLowerTriangular:
    """Packed lower-triangular Cholesky factor L with G = L L'."""

    def __init__(self, entries_packed: np.ndarray, m: int):
        self.m = int(m)
        self.entries = np.asarray(entries_packed, dtype=np.float64)
        if self.entries.shape != (self.m * (self.m + 1) // 2,):
            raise DimensionMismatch("packed entry count must be m(m+1)/2")
        self._full = np.zeros((self.m, self.m))
        idx = np.tril_indices(self.m)
        self._full[idx] = self.entries
        if self.m and np.any(np.diag(self._full) <= 0.0):
            raise NotPositiveDefinite("lower-triangular factor must have positive diagonal")

    @classmethod
    def from_full(cls, L: np.ndarray) -> "DenseLowerTriangular":
        L = np.asarray(L, dtype=np.float64)
        return cls(L[np.tril_indices(L.shape[0])], L.shape[0])

    def full(self) -> np.ndarray:
        return self._full.copy()

    def solve_lower(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.solve_triangular(self._full, rhs, lower=True)

    def solve_upper(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.solve_triangular(self._full, rhs, lower=True, trans="T")

    def solve_spd(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (L L') x = rhs by one forward and one back substitution."""
        return self.solve_upper(self.solve_lower(rhs))


def dense_cholesky(G: np.ndarray) -> DenseLowerTriangular:
    """Cholesky factorization G = L L' of a dense SPD matrix.

    Raises NotPositiveDefinite carrying the index of the first failing pivot.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch("dense_cholesky: matrix must be square")
    if G.shape[0] == 0:
        return DenseLowerTriangular(np.zeros(0), 0)
    L, info = scipy.linalg.lapack.dpotrf(G, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(
            f"leading minor of order {info} is not positive definite", pivot=int(info - 1)
        )
    if info < 0:
        raise DimensionMismatch(f"dpotrf: illegal argument {-info}")
    return DenseLowerTriangular.from_full(L)


def symmetric_evd(G: np.ndarray):
    """Eigendecomposition of a dense symmetric matrix, eigenvalues descending.

    Returns (eigenvalues, eigenvectors) with G V = V diag(w) and V'V = I.
    """
    G = np.asarray(G, dtype=np.float64)
    try:
        w, V = np.linalg.eigh(G)
    except np.linalg.LinAlgError as exc:
        raise IterationLimit(f"symmetric EVD did not converge: {exc}") from exc
    return w[::-1].copy(), V[:, ::-1].copy()


def thin_svd(B: np.ndarray):
    """Thin SVD B = U diag(s) V' with singular values descending."""
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    try:
        U, s, Vt = np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise IterationLimit(f"SVD did not converge: {exc}") from exc
    return U, s, Vt.T


def generalized_symmetric_evd(K: np.ndarray, Mmat: np.ndarray):
    """Solve K G = Mmat G diag(w) for symmetric K and SPD Mmat.

    Eigenvalues are returned in descending order; eigenvectors are
    Mmat-orthonormal.
    """
    K = np.asarray(K, dtype=np.float64)
    Mmat = np.asarray(Mmat, dtype=np.float64)
    if K.shape != Mmat.shape:
        raise DimensionMismatch("generalized EVD: operand shapes differ")
    try:
        w, G = scipy.linalg.eigh(K, Mmat)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NotPositiveDefinite(f"mass matrix is not SPD: {exc}") from exc
    return w[::-1].copy(), G[:, ::-1].copy()


def _orthonormal_basis(B: np.ndarray, label: str) -> np.ndarray:
    if B.shape[1] == 0:
        return B
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= max(B.shape) * np.finfo(float).eps * s[0]:
        raise RankDeficient(f"{label} basis is rank deficient")
    return U


def principal_angle_distance(U, V) -> float:
    """sin of the largest principal angle between range(U) and range(V).

    Equals max over unit u in range(U) of the distance from u to range(V);
    symmetric whenever the two subspaces have equal dimension.  Computed from
    the singular values of the residual (I - P_V) Q_U, which stays accurate
    for nearly coincident subspaces.
    """
    Qu = _orthonormal_basis(as_columns(U), "first")
    Qv = _orthonormal_basis(as_columns(V), "second")
    if Qu.shape[0] != Qv.shape[0]:
        raise DimensionMismatch("principal_angle_distance: ambient dimensions differ")
    if Qu.shape[1] == 0:
        return 0.0
    if Qv.shape[1] == 0:
        return 1.0
    resid = Qu - Qv @ (Qv.T @ Qu)
    d = float(np.linalg.norm(resid, 2))
    return min(max(d, 0.0), 1.0)
