"""Minimum-cost bipartite assignment with gated (forbidden) pairs.

The solver maximizes the number of allowed pairs first and minimizes their
total cost second. Among assignments of equal cardinality and cost the
lexicographically smallest sorted pair list is returned, so results are
reproducible regardless of floating-point path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

__all__ = ["FORBIDDEN", "CostMatrix", "Assignment", "solve_assignment", "gated_costs"]


class _Forbidden:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "FORBIDDEN"

    def __reduce__(self):
        return (_Forbidden, ())


FORBIDDEN = _Forbidden()


class CostMatrix:
    """Rectangular cost matrix whose entries are finite floats or ``FORBIDDEN``."""

    __slots__ = ("values", "allowed")

    def __init__(self, values, allowed=None):
        values = np.array(values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            if values.size == 0:
                values = values.reshape(0, 0)
            else:
                raise ValueError("cost matrix must be two-dimensional")
        if allowed is None:
            allowed = np.ones(values.shape, dtype=bool)
        allowed = np.array(allowed, dtype=bool, copy=True)
        if allowed.shape != values.shape:
            raise ValueError("allowed mask shape differs from values")
        if not np.all(np.isfinite(values[allowed])):
            raise ValueError("allowed entries must be finite; use FORBIDDEN instead")
        values[~allowed] = 0.0
        self.values = values
        self.allowed = allowed

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Union[float, _Forbidden]]], n_cols: int | None = None):
        rows = [list(r) for r in rows]
        if not rows:
            return cls(np.zeros((0, n_cols or 0)))
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged cost matrix")
        allowed = [[e is not FORBIDDEN for e in r] for r in rows]
        values = [[0.0 if e is FORBIDDEN else float(e) for e in r] for r in rows]
        return cls(np.array(values, dtype=np.float64).reshape(len(rows), width), allowed)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __getitem__(self, idx):
        i, j = idx
        return float(self.values[i, j]) if self.allowed[i, j] else FORBIDDEN

    def tolist(self) -> list[list[Union[float, _Forbidden]]]:
        return [[self[i, j] for j in range(self.shape[1])] for i in range(self.shape[0])]

    def __repr__(self) -> str:
        return f"CostMatrix({self.tolist()!r})"


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total: float

    def __len__(self) -> int:
        return len(self.pairs)

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)


def _as_cost_matrix(c) -> CostMatrix:
    if isinstance(c, CostMatrix):
        return c
    if isinstance(c, np.ndarray):
        return CostMatrix(c)
    return CostMatrix.from_rows(c)


def _hungarian(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Square minimum-cost perfect matching by successive shortest paths.

    Returns ``(col_of_row, u, v)`` where ``u``/``v`` are optimal dual
    potentials (``a[i, j] - u[i] - v[j] >= 0``, zero on matched pairs).
    """
    n = a.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row (1-based) holding column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[p[1:] - 1] = np.arange(n)
    return col_of_row, u[1:], v[1:]


class _Problem:
    """Padded square problem derived from a gated rectangular matrix."""

    def __init__(self, cm: CostMatrix):
        self.rows, self.cols = cm.shape
        self.n = max(self.rows, self.cols)
        self.allowed = cm.allowed
        finite = cm.values[cm.allowed]
        self.offset = float(finite.min()) if finite.size else 0.0
        shifted = cm.values - self.offset
        span = float(shifted[cm.allowed].sum()) if finite.size else 0.0
        # strictly larger than any sum of finite entries
        self.big = span + 1.0
        self.tol = 1e-9 * max(1.0, float(shifted[cm.allowed].max()) if finite.size else 1.0) * max(1, self.n)
        square = np.full((self.n, self.n), self.big)
        square[: self.rows, : self.cols] = np.where(cm.allowed, shifted, self.big)
        self.base = square

    def solve(self, work: np.ndarray):
        col_of_row, u, v = _hungarian(work)
        pairs = [
            (r, int(col_of_row[r]))
            for r in range(self.rows)
            if col_of_row[r] < self.cols and self.allowed[r, col_of_row[r]] and work[r, col_of_row[r]] < self.big
        ]
        cost = float(sum(self.base[r, c] for r, c in pairs))
        return pairs, cost, col_of_row, u, v


def solve_assignment(c) -> Assignment:
    """Solve the gated rectangular assignment problem.

    Args:
        c: A :class:`CostMatrix`, an ndarray (all entries allowed), or a nested
            sequence whose entries are floats or ``FORBIDDEN``.

    Returns:
        The maximum-cardinality, minimum-cost assignment. Ties are broken
        towards the lexicographically smallest sorted pair list.
    """
    cm = _as_cost_matrix(c)
    if cm.shape[0] == 0 or cm.shape[1] == 0 or not cm.allowed.any():
        return Assignment((), 0.0)

    prob = _Problem(cm)
    work = prob.base.copy()
    pairs, cost, col_of_row, u, v = prob.solve(work)
    card = len(pairs)

    for r in range(prob.rows):
        current = int(col_of_row[r])
        matched = current < prob.cols and work[r, current] < prob.big
        reduced = work[r, : prob.cols] - u[r] - v[: prob.cols]
        candidates = [
            j
            for j in np.flatnonzero((reduced <= prob.tol) & (work[r, : prob.cols] < prob.big))
            if not matched or j < current
        ]
        for j in candidates:
            trial = work.copy()
            _force(trial, r, int(j), prob.big)
            t_pairs, t_cost, t_col, t_u, t_v = prob.solve(trial)
            if len(t_pairs) == card and abs(t_cost - cost) <= prob.tol and (r, int(j)) in t_pairs:
                pairs, cost, col_of_row, u, v = t_pairs, t_cost, t_col, t_u, t_v
                current, matched = int(j), True
                break
        if matched:
            _force(work, r, current, prob.big)
        else:
            work[r, : prob.cols] = prob.big

    pairs = sorted(pairs)
    total = float(sum(cm.values[r, c] for r, c in pairs))
    return Assignment(tuple(pairs), total)


def _force(work: np.ndarray, r: int, c: int, big: float) -> None:
    keep = work[r, c]
    work[r, :] = big
    work[:, c] = big
    work[r, c] = keep


GatePredicate = Callable[[int, int], bool]


def gated_costs(raw, gates: Iterable[Union[GatePredicate, np.ndarray]]) -> CostMatrix:
    """Replace entries failing any gate by ``FORBIDDEN``.

    Each gate is either a boolean array of the matrix shape (``True`` = pass)
    or a callable ``gate(i, j) -> bool``.
    """
    cm = _as_cost_matrix(raw)
    allowed = cm.allowed.copy()
    rows, cols = cm.shape
    for gate in gates:
        if callable(gate):
            mask = np.array(
                [[bool(gate(i, j)) for j in range(cols)] for i in range(rows)], dtype=bool
            ).reshape(rows, cols)
        else:
            mask = np.asarray(gate, dtype=bool)
            if mask.shape != cm.shape:
                raise ValueError("gate mask shape differs from cost matrix")
        allowed &= mask
    return CostMatrix(cm.values, allowed)
