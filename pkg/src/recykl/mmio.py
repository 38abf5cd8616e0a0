"""Matrix Market exchange files for system sequences.

Two flavors are read and written: ``coordinate real symmetric`` for the
sparse matrices (lower triangle stored) and ``array real general`` for
right-hand sides and output matrices.  Values are written with shortest
round-tripping decimal representation, so write/read cycles are bit exact
for float64.  Parse failures report the offending file and line number.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from .errors import ManifestError, NotSymmetric
from .linalg import SparseSpdMatrix

_HEADER_PREFIX = "%%matrixmarket"


def _fmt(v: float) -> str:
    return repr(float(v))


def write_symmetric_matrix(path, A: SparseSpdMatrix) -> None:
    """Write the lower triangle of a symmetric sparse matrix."""
    coo = scipy.sparse.tril(A.to_scipy(), k=0).tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{A.n} {A.n} {coo.nnz}\n")
        order = np.lexsort((coo.col, coo.row))
        for idx in order:
            fh.write(f"{coo.row[idx] + 1} {coo.col[idx] + 1} {_fmt(coo.data[idx])}\n")


def write_array(path, values: np.ndarray) -> None:
    """Write a dense vector or matrix in array format (column major)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for j in range(arr.shape[1]):
            for i in range(arr.shape[0]):
                fh.write(f"{_fmt(arr[i, j])}\n")


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if lineno == 1:
                yield lineno, line
                continue
            if not line or line.startswith("%"):
                continue
            yield lineno, line


def _parse_header(path, line):
    parts = line.lower().split()
    if len(parts) != 5 or parts[0] != _HEADER_PREFIX or parts[1] != "matrix":
        raise ManifestError(f"{path}:1: malformed Matrix Market header {line!r}")
    fmt, dtype, symmetry = parts[2], parts[3], parts[4]
    if dtype != "real":
        raise ManifestError(f"{path}:1: unsupported value type {dtype!r}")
    return fmt, symmetry


def read_matrix(path) -> SparseSpdMatrix:
    """Read a sparse symmetric matrix in coordinate format."""
    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise ManifestError(f"{path}: empty file") from None
    fmt, symmetry = _parse_header(path, header)
    if fmt != "coordinate":
        raise ManifestError(f"{path}:1: expected coordinate format, got {fmt!r}")
    try:
        lineno, size_line = next(lines)
    except StopIteration:
        raise ManifestError(f"{path}: missing size line") from None
    try:
        rows, cols, nnz = (int(tok) for tok in size_line.split())
    except ValueError:
        raise ManifestError(f"{path}:{lineno}: malformed size line {size_line!r}") from None
    if rows != cols:
        raise ManifestError(f"{path}:{lineno}: matrix must be square, got {rows}x{cols}")
    ii = np.empty(nnz, dtype=np.int64)
    jj = np.empty(nnz, dtype=np.int64)
    vv = np.empty(nnz, dtype=np.float64)
    count = 0
    for lineno, line in lines:
        if count >= nnz:
            raise ManifestError(f"{path}:{lineno}: more entries than declared ({nnz})")
        toks = line.split()
        try:
            i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
        except (ValueError, IndexError):
            raise ManifestError(f"{path}:{lineno}: malformed entry {line!r}") from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise ManifestError(f"{path}:{lineno}: index ({i},{j}) out of range")
        ii[count], jj[count], vv[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise ManifestError(f"{path}: expected {nnz} entries, found {count}")
    mat = scipy.sparse.coo_matrix((vv, (ii, jj)), shape=(rows, cols)).tocsr()
    if symmetry == "symmetric":
        strict = scipy.sparse.tril(mat, k=-1) + scipy.sparse.triu(mat, k=1)
        full = mat + strict.T
    elif symmetry == "general":
        full = mat
        gap = full - full.T
        scale = np.max(np.abs(full.data)) if full.nnz else 0.0
        if gap.nnz and scale > 0 and np.max(np.abs(gap.data)) > 1e-12 * scale:
            raise NotSymmetric(f"{path}: general matrix is not numerically symmetric")
    else:
        raise ManifestError(f"{path}:1: unsupported symmetry {symmetry!r}")
    return SparseSpdMatrix.from_scipy(full)


def read_array(path) -> np.ndarray:
    """Read a dense vector or matrix in array format."""
    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise ManifestError(f"{path}: empty file") from None
    fmt, symmetry = _parse_header(path, header)
    if fmt != "array" or symmetry != "general":
        raise ManifestError(f"{path}:1: expected 'array real general'")
    try:
        lineno, size_line = next(lines)
    except StopIteration:
        raise ManifestError(f"{path}: missing size line") from None
    try:
        rows, cols = (int(tok) for tok in size_line.split())
    except ValueError:
        raise ManifestError(f"{path}:{lineno}: malformed size line {size_line!r}") from None
    values = np.empty(rows * cols, dtype=np.float64)
    count = 0
    for lineno, line in lines:
        if count >= values.size:
            raise ManifestError(f"{path}:{lineno}: more values than declared")
        try:
            values[count] = float(line.split()[0])
        except (ValueError, IndexError):
            raise ManifestError(f"{path}:{lineno}: malformed value {line!r}") from None
        count += 1
    if count != values.size:
        raise ManifestError(f"{path}: expected {values.size} values, found {count}")
    out = values.reshape((cols, rows)).T  # column-major storage
    return out[:, 0] if cols == 1 else out
