"""Parity-check matrices and the alist exchange format.

An alist file describes a sparse binary M x N parity-check matrix:

    line 1: N M                 (columns / variables, then rows / checks)
    line 2: max_col_deg max_row_deg
    line 3: the N column degrees
    line 4: the M row degrees
    next N lines: per-column neighbor lists (1-based check indices)
    next M lines: per-row neighbor lists (1-based variable indices)

Both common dialects are accepted: neighbor lists may be exact-length or
zero-padded to the maximum degree (padding zeros are skipped).  Indices are
1-based on disk and 0-based everywhere inside this package.
"""

from __future__ import annotations

import numpy as np


class AlistParseError(ValueError):
    """Malformed alist input; ``line`` is the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParityCheckMatrix:
    """Binary M x N check structure, stored as per-check variable index lists.

    Rows are sorted ascending and deduplication is rejected at parse time, so
    instances are immutable by convention and safe to share across workers.
    """

    def __init__(self, n_vars: int, rows: list[np.ndarray]):
        self.n_vars = int(n_vars)
        self.n_checks = len(rows)
        self.rows = [np.asarray(r, dtype=np.int64) for r in rows]
        for j, row in enumerate(self.rows):
            if row.size < 3:
                raise ValueError(f"check {j} has degree {row.size} < 3")
            if np.any(row < 0) or np.any(row >= self.n_vars):
                raise ValueError(f"check {j} has a variable index outside [0, {self.n_vars})")
            if np.unique(row).size != row.size:
                raise ValueError(f"check {j} lists a variable more than once")
            row.sort()

    @property
    def row_degrees(self) -> np.ndarray:
        return np.array([r.size for r in self.rows], dtype=np.int64)

    def column_lists(self) -> list[list[int]]:
        cols: list[list[int]] = [[] for _ in range(self.n_vars)]
        for j, row in enumerate(self.rows):
            for i in row:
                cols[int(i)].append(j)
        return cols

    def dense(self) -> np.ndarray:
        """Dense {0,1} matrix, shape (n_checks, n_vars). Test/inspection aid."""
        H = np.zeros((self.n_checks, self.n_vars), dtype=np.uint8)
        for j, row in enumerate(self.rows):
            H[j, row] = 1
        return H

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return (
            self.n_vars == other.n_vars
            and self.n_checks == other.n_checks
            and all(np.array_equal(a, b) for a, b in zip(self.rows, other.rows))
        )

    def __repr__(self) -> str:
        return f"ParityCheckMatrix(n_vars={self.n_vars}, n_checks={self.n_checks})"


def _ints(token_line: str, lineno: int) -> list[int]:
    try:
        return [int(t) for t in token_line.split()]
    except ValueError as e:
        raise AlistParseError(f"non-integer token ({e})", lineno) from None


def parse_alist(text: str) -> ParityCheckMatrix:
    """Parse alist text into a :class:`ParityCheckMatrix`.

    Raises :class:`AlistParseError` naming the offending line on dimension
    mismatches, out-of-range indices, row/column inconsistency, or any check
    of degree < 3.
    """
    raw_lines = text.splitlines()
    # map physical line numbers of non-blank lines for error reporting
    lines: list[tuple[int, str]] = [
        (i + 1, ln) for i, ln in enumerate(raw_lines) if ln.strip()
    ]
    if len(lines) < 4:
        raise AlistParseError("truncated file: header incomplete", len(raw_lines))

    lineno, header = lines[0]
    head = _ints(header, lineno)
    if len(head) != 2:
        raise AlistParseError("expected 'N M'", lineno)
    n_vars, n_checks = head
    if n_vars <= 0 or n_checks <= 0:
        raise AlistParseError("N and M must be positive", lineno)

    lineno, maxdeg_line = lines[1]
    maxdeg = _ints(maxdeg_line, lineno)
    if len(maxdeg) != 2:
        raise AlistParseError("expected 'max_col_deg max_row_deg'", lineno)
    max_col_deg, max_row_deg = maxdeg

    lineno, col_deg_line = lines[2]
    col_degs = _ints(col_deg_line, lineno)
    if len(col_degs) != n_vars:
        raise AlistParseError(f"expected {n_vars} column degrees, got {len(col_degs)}", lineno)

    lineno, row_deg_line = lines[3]
    row_degs = _ints(row_deg_line, lineno)
    if len(row_degs) != n_checks:
        raise AlistParseError(f"expected {n_checks} row degrees, got {len(row_degs)}", lineno)

    body = lines[4:]
    if len(body) < n_vars + n_checks:
        raise AlistParseError(
            f"expected {n_vars + n_checks} neighbor lists, found {len(body)}",
            body[-1][0] if body else lineno,
        )

    def read_list(entry: tuple[int, str], expected_deg: int, limit: int, what: str) -> list[int]:
        ln, textline = entry
        values = _ints(textline, ln)
        neighbors = [v for v in values if v != 0]  # padded dialect: zeros ignored
        if len(neighbors) != expected_deg:
            raise AlistParseError(
                f"{what} lists {len(neighbors)} neighbors, degree says {expected_deg}", ln
            )
        for v in neighbors:
            if v < 1 or v > limit:
                raise AlistParseError(f"{what} neighbor index {v} outside [1, {limit}]", ln)
        if len(set(neighbors)) != len(neighbors):
            raise AlistParseError(f"{what} lists a duplicate neighbor", ln)
        return [v - 1 for v in neighbors]

    col_lists = []
    for i in range(n_vars):
        col_lists.append(read_list(body[i], col_degs[i], n_checks, f"column {i + 1}"))

    row_lists = []
    for j in range(n_checks):
        entry = body[n_vars + j]
        if row_degs[j] < 3:
            raise AlistParseError(
                f"row {j + 1} has degree {row_degs[j]}; degrees below 3 are not supported",
                lines[3][0],
            )
        row_lists.append(read_list(entry, row_degs[j], n_vars, f"row {j + 1}"))

    # cross-check: column lists must be the transpose of the row lists
    derived_cols: list[set[int]] = [set() for _ in range(n_vars)]
    for j, row in enumerate(row_lists):
        for i in row:
            derived_cols[i].add(j)
    for i in range(n_vars):
        if set(col_lists[i]) != derived_cols[i]:
            raise AlistParseError(
                f"column {i + 1} neighbor list disagrees with the row lists", body[i][0]
            )

    return ParityCheckMatrix(n_vars, [np.array(sorted(r), dtype=np.int64) for r in row_lists])


def parse_alist_file(path) -> ParityCheckMatrix:
    with open(path, "r", encoding="ascii") as f:
        return parse_alist(f.read())


def serialize_alist(H: ParityCheckMatrix) -> str:
    """Render a ParityCheckMatrix back to alist text (unpadded dialect)."""
    cols = H.column_lists()
    col_degs = [len(c) for c in cols]
    row_degs = [int(r.size) for r in H.rows]
    out = [
        f"{H.n_vars} {H.n_checks}",
        f"{max(col_degs)} {max(row_degs)}",
        " ".join(str(d) for d in col_degs),
        " ".join(str(d) for d in row_degs),
    ]
    for c in cols:
        out.append(" ".join(str(j + 1) for j in c))
    for r in H.rows:
        out.append(" ".join(str(int(i) + 1) for i in r))
    return "\n".join(out) + "\n"


def check_codeword(H: ParityCheckMatrix, x) -> bool:
    """True iff every check of ``H`` sees an even number of ones in ``x``."""
    x = np.asarray(x)
    if x.shape != (H.n_vars,):
        raise ValueError(f"x has shape {x.shape}, expected ({H.n_vars},)")
    x = x.astype(np.int64)
    return all(int(x[row].sum()) % 2 == 0 for row in H.rows)


def check_codewords(H: ParityCheckMatrix, X: np.ndarray) -> np.ndarray:
    """Vectorized parity check over a (frames, n_vars) bit matrix."""
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != H.n_vars:
        raise ValueError(f"X has shape {X.shape}, expected (*, {H.n_vars})")
    ok = np.ones(X.shape[0], dtype=bool)
    for row in H.rows:
        ok &= (X[:, row].sum(axis=1) % 2) == 0
    return ok
