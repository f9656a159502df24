"""Minimal Matrix Market reader for real matrices.

Handles ``coordinate`` and ``array`` formats with ``general`` or ``symmetric``
symmetry. Errors carry the 1-based line number where parsing failed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import MatrixMarketError

_FIELDS = {"real", "double", "integer"}
_SYMMETRIES = {"general", "symmetric"}


@dataclass(frozen=True)
class SparseMatrix:
    """COO entries (0-based) of a real matrix; symmetric files are expanded."""

    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    symmetric: bool = False
    header_nnz: int = 0

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def toarray(self) -> np.ndarray:
        return self.tocsr().toarray()


def _parse_header(line: str, lineno: int) -> tuple[str, str]:
    tokens = line.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket":
        raise MatrixMarketError(f"bad banner {line.strip()!r}", lineno)
    _, obj, fmt, fld, symm = tokens
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", lineno)
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}", lineno)
    if fld not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {fld!r} (only real matrices)", lineno)
    if symm not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {symm!r}", lineno)
    return fmt, symm


def _ints(tokens, count, lineno, what):
    if len(tokens) != count:
        raise MatrixMarketError(f"expected {count} integers in {what}, got {len(tokens)}", lineno)
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MatrixMarketError(f"non-integer value in {what}", lineno) from None


def _float(tok, lineno) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise MatrixMarketError(f"bad numeric value {tok!r}", lineno) from None
    if not np.isfinite(v):
        raise MatrixMarketError(f"non-finite value {tok!r}", lineno)
    return v


def parse_matrix_market(text: str) -> SparseMatrix:
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    fmt, symm = _parse_header(lines[0], 1)
    symmetric = symm == "symmetric"

    body = [(i + 1, ln) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError("missing size line", len(lines))
    size_lineno, size_line = body[0]
    entries = body[1:]

    if fmt == "coordinate":
        m, n, nnz = _ints(size_line.split(), 3, size_lineno, "size line")
    else:
        m, n = _ints(size_line.split(), 2, size_lineno, "size line")
        nnz = n * (n + 1) // 2 if symmetric else m * n
    if m < 1 or n < 1 or nnz < 0:
        raise MatrixMarketError(f"invalid dimensions {m} x {n}, nnz={nnz}", size_lineno)
    if symmetric and m != n:
        raise MatrixMarketError(f"symmetric matrix must be square, got {m} x {n}", size_lineno)
    if len(entries) != nnz:
        where = entries[nnz][0] if len(entries) > nnz else (entries[-1][0] if entries else size_lineno)
        raise MatrixMarketError(f"header declares {nnz} entries, found {len(entries)}", where)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    if fmt == "coordinate":
        for k, (lineno, ln) in enumerate(entries):
            tok = ln.split()
            if len(tok) != 3:
                raise MatrixMarketError(f"expected 'row col value', got {ln.strip()!r}", lineno)
            i, j = _ints(tok[:2], 2, lineno, "entry indices")
            if not (1 <= i <= m and 1 <= j <= n):
                raise MatrixMarketError(f"index ({i}, {j}) out of range for {m} x {n}", lineno)
            if symmetric and j > i:
                raise MatrixMarketError(f"symmetric entry ({i}, {j}) above the diagonal", lineno)
            rows[k], cols[k], vals[k] = i - 1, j - 1, _float(tok[2], lineno)
    else:
        # column-major; symmetric stores the lower triangle only
        if symmetric:
            idx = [(i, j) for j in range(n) for i in range(j, n)]
        else:
            idx = [(i, j) for j in range(n) for i in range(m)]
        for k, ((lineno, ln), (i, j)) in enumerate(zip(entries, idx)):
            tok = ln.split()
            if len(tok) != 1:
                raise MatrixMarketError(f"expected a single value, got {ln.strip()!r}", lineno)
            rows[k], cols[k], vals[k] = i, j, _float(tok[0], lineno)

    if symmetric:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return SparseMatrix((m, n), rows, cols, vals, symmetric=symmetric, header_nnz=nnz)


def load_matrix_market(path) -> SparseMatrix:
    return parse_matrix_market(Path(path).read_text())


def write_matrix_market(path, A, symmetric: bool = False) -> None:
    """Write a dense or scipy matrix in coordinate format (used by tests and fixtures)."""
    C = sp.coo_matrix(A)
    if symmetric:
        keep = C.row >= C.col
        rows, cols, vals = C.row[keep], C.col[keep], C.data[keep]
    else:
        rows, cols, vals = C.row, C.col, C.data
    lines = [f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}",
             f"{C.shape[0]} {C.shape[1]} {len(vals)}"]
    lines += [f"{i + 1} {j + 1} {float(v)!r}" for i, j, v in zip(rows, cols, vals)]
    Path(path).write_text("\n".join(lines) + "\n")
