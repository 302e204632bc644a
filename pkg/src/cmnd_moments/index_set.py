"""The index set I(alpha): nonnegative integer p x p matrices with row sums n
and column sums m, enumerated through nested per-cell bounds.

Cells are visited in row-major order.  For cell ``(i, j)`` the admissible
range is ``[lower, upper]`` with::

    lower = max(0, sum(n[:i+1]) - sum(m[j+1:]) - (sum of a[h][k], h <= i, k <= j, (h, k) != (i, j)))
    upper = min(n[i] - sum(a[i][:j]), m[j] - sum(a[h][j] for h < i))

Only the leading ``(p-1) x (p-1)`` block is free; the last column, the last
row and the corner are then forced by the margins.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Iterator, Sequence

from .core import MomentError, MultiIndex, UnbalancedDegrees

CoefficientMatrix = tuple[tuple[int, ...], ...]
BoundsHook = Callable[[int, int, int, int], None]


class OutOfRangePrefix(MomentError):
    pass


class NotInIndexSet(MomentError):
    pass


def _require_balanced(alpha: MultiIndex) -> None:
    n_total, m_total = alpha.total_degrees()
    if n_total != m_total:
        raise UnbalancedDegrees(f"sum n = {n_total} differs from sum m = {m_total} for alpha = {alpha}")


def bounds(alpha: MultiIndex, prefix: Sequence[int], i: int, j: int, *, validate: bool = True) -> tuple[int, int]:
    """Lower and upper bound for ``a[i][j]`` given earlier entries.

    ``prefix`` lists entries in row-major order and must cover at least every
    cell before ``(i, j)``.  With ``validate`` each earlier entry is checked
    against its own bounds first.
    """
    p = alpha.p
    pos = i * p + j
    if len(prefix) < pos:
        raise OutOfRangePrefix(f"prefix of length {len(prefix)} does not reach cell ({i},{j})")
    if validate:
        for q in range(pos):
            lo, hi = bounds(alpha, prefix, q // p, q % p, validate=False)
            if not lo <= prefix[q] <= hi:
                raise OutOfRangePrefix(
                    f"entry ({q // p},{q % p}) = {prefix[q]} is outside [{lo}, {hi}]"
                )
    n, m = alpha.n, alpha.m
    block = sum(prefix[h * p + k] for h in range(i + 1) for k in range(j + 1) if (h, k) != (i, j))
    lower = max(0, sum(n[: i + 1]) - sum(m[j + 1 :]) - block)
    row_left = n[i] - sum(prefix[i * p + k] for k in range(j))
    col_left = m[j] - sum(prefix[h * p + j] for h in range(i))
    return lower, min(row_left, col_left)


def _walk(
    alpha: MultiIndex,
    zero_cells: frozenset[tuple[int, int]],
    on_bounds: BoundsHook | None,
    first: int | None,
) -> Iterator[CoefficientMatrix]:
    p = alpha.p
    n, m = alpha.n, alpha.m
    q = p - 1
    if q == 0:
        if (0, 0) not in zero_cells or n[0] == 0:
            yield ((n[0],),)
        return

    free = [(i, j) for i in range(q) for j in range(q)]
    n_prefix = list(itertools.accumulate(n))
    m_suffix = [sum(m[j + 1 :]) for j in range(p)]
    a = [[0] * p for _ in range(p)]
    # cum[i][j] = sum of a[h][k] for h <= i, k <= j over the free block
    cum = [[0] * q for _ in range(q)]
    row_used = [0] * p
    col_used = [0] * p

    def fill() -> CoefficientMatrix | None:
        corner = n[q] - sum(m[:q]) + cum[q - 1][q - 1]
        if corner < 0 or (corner and (q, q) in zero_cells):
            return None
        for i in range(q):
            v = n[i] - row_used[i]
            if v < 0 or (v and (i, q) in zero_cells):
                return None
            a[i][q] = v
        for j in range(q):
            v = m[j] - col_used[j]
            if v < 0 or (v and (q, j) in zero_cells):
                return None
            a[q][j] = v
        a[q][q] = corner
        return tuple(tuple(r) for r in a)

    def rec(pos: int) -> Iterator[CoefficientMatrix]:
        if pos == len(free):
            out = fill()
            if out is not None:
                yield out
            return
        i, j = free[pos]
        up = cum[i - 1][j] if i else 0
        left = cum[i][j - 1] if j else 0
        diag = cum[i - 1][j - 1] if i and j else 0
        lower = max(0, n_prefix[i] - m_suffix[j] - (up + left - diag))
        upper = min(n[i] - row_used[i], m[j] - col_used[j])
        if on_bounds is not None:
            on_bounds(i, j, lower, upper)
        if pos == 0 and first is not None:
            values: Iterable[int] = (first,) if lower <= first <= upper else ()
        elif (i, j) in zero_cells:
            values = (0,) if lower == 0 and upper >= 0 else ()
        else:
            values = range(lower, upper + 1)
        for v in values:
            a[i][j] = v
            cum[i][j] = v + up + left - diag
            row_used[i] += v
            col_used[j] += v
            yield from rec(pos + 1)
            row_used[i] -= v
            col_used[j] -= v
        a[i][j] = 0

    yield from rec(0)


def enumerate_index_set(
    alpha: MultiIndex,
    *,
    zero_cells: Iterable[tuple[int, int]] = (),
    on_bounds: BoundsHook | None = None,
) -> Iterator[CoefficientMatrix]:
    """Lazily yield every matrix of I(alpha) exactly once.

    ``zero_cells`` restricts the stream to matrices vanishing on those
    cells, which is how covariance sparsity prunes the enumeration.
    ``on_bounds(i, j, lower, upper)`` is called for each bound evaluated
    on the free block.
    """
    _require_balanced(alpha)
    return _walk(alpha, frozenset(zero_cells), on_bounds, None)


def split_index_set(
    alpha: MultiIndex, *, zero_cells: Iterable[tuple[int, int]] = ()
) -> list[Callable[[], Iterator[CoefficientMatrix]]]:
    """Disjoint sub-enumerators, one per admissible value of ``a[0][0]``.

    Each element is a zero-argument factory so chunks can be started on
    separate workers.
    """
    _require_balanced(alpha)
    zero_cells = frozenset(zero_cells)
    if alpha.p == 1:
        return [lambda: _walk(alpha, zero_cells, None, None)]
    lower, upper = bounds(alpha, (), 0, 0, validate=False)
    if (0, 0) in zero_cells:
        upper = min(upper, 0)
    return [
        (lambda v=v: _walk(alpha, zero_cells, None, v)) for v in range(lower, upper + 1)
    ]


def brute_force_margin_matrices(alpha: MultiIndex) -> Iterator[CoefficientMatrix]:
    """All matrices with the margins of ``alpha`` by unconstrained nested loops.

    Reference enumerator for tests; it knows nothing about the nested bounds.
    """
    _require_balanced(alpha)
    p = alpha.p
    n, m = alpha.n, alpha.m
    cells = [(i, j) for i in range(p) for j in range(p)]
    a = [[0] * p for _ in range(p)]
    row_left = list(n)
    col_left = list(m)

    def rec(pos):
        if pos == len(cells):
            if not any(row_left) and not any(col_left):
                yield tuple(tuple(r) for r in a)
            return
        i, j = cells[pos]
        for v in range(min(row_left[i], col_left[j]) + 1):
            a[i][j] = v
            row_left[i] -= v
            col_left[j] -= v
            yield from rec(pos + 1)
            row_left[i] += v
            col_left[j] += v
        a[i][j] = 0

    yield from rec(0)


def check_margins(alpha: MultiIndex, a: Sequence[Sequence[int]]) -> None:
    """Raise :class:`NotInIndexSet` unless ``a`` decomposes ``alpha``."""
    p = alpha.p
    if len(a) != p or any(len(row) != p for row in a):
        raise NotInIndexSet(f"coefficient matrix is not {p}x{p}")
    if any(v < 0 for row in a for v in row):
        raise NotInIndexSet("coefficient matrix has a negative entry")
    rows = tuple(sum(row) for row in a)
    cols = tuple(sum(a[h][k] for h in range(p)) for k in range(p))
    if rows != alpha.n or cols != alpha.m:
        raise NotInIndexSet(f"margins {rows}/{cols} do not match alpha = {alpha}")


def compose(a: Sequence[Sequence[int]]) -> MultiIndex:
    """The multi-index ``sum a[h][k] * beta_hk``."""
    p = len(a)
    n = tuple(sum(a[h]) for h in range(p))
    m = tuple(sum(a[h][k] for h in range(p)) for k in range(p))
    return MultiIndex(n, m)
