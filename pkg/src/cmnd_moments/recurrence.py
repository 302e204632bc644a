"""Moments from the lowering recurrences.

For ``h`` in N::

    nu(alpha) = sum_{k in S_N[h]} m_k * sigma_hk * nu(alpha - beta_hk)

and symmetrically for ``k`` in M with ``n_h`` weights.  The base case is
``nu(0) = 1``; unbalanced multi-indices are zero.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .core import (
    HermitianCovariance,
    MomentError,
    Mode,
    MomentValue,
    MultiIndex,
    check_dimensions,
    is_zero,
    resolve_mode,
    ring_one,
    ring_zero,
    sigma_table,
)
from .sparsity import build_sparsity


class UnknownBlock(MomentError):
    pass


class RecurrenceCache:
    """Memo shared across calls for one fixed covariance and mode.

    Insertions are serialized by a lock so the cache can back concurrent
    evaluations.
    """

    def __init__(self, sigma: HermitianCovariance | None, mode: Mode | str):
        self.sigma = sigma
        self.mode = Mode(mode)
        self._values: dict[MultiIndex, Any] = {}
        self._lock = threading.Lock()

    def get(self, alpha):
        return self._values.get(alpha)

    def __contains__(self, alpha):
        return alpha in self._values

    def __len__(self):
        return len(self._values)

    def update(self, values: dict):
        with self._lock:
            for k, v in values.items():
                self._values.setdefault(k, v)


def _default_pivot(alpha: MultiIndex, nonzero) -> tuple[str, int]:
    best = None
    for h in alpha.support_n:
        size = sum(1 for k in alpha.support_m if nonzero[h][k])
        if best is None or size < best[0]:
            best = (size, h)
    return ("n", best[1])


def recurrence_terms(alpha: MultiIndex, nonzero, pivot: tuple[str, int] | None = None):
    """``[(weight, h, k)]`` such that ``nu(alpha) = sum weight * sigma_hk * nu(alpha - beta_hk)``.

    ``pivot`` is ``("n", h)`` with ``h`` in N or ``("m", k)`` with ``k`` in M;
    by default the ``h`` with the fewest nonzero neighbors is used, ties to
    the smallest index.
    """
    if pivot is None:
        pivot = _default_pivot(alpha, nonzero)
    side, idx = pivot
    if side == "n":
        if alpha.n[idx] == 0:
            raise ValueError(f"pivot h={idx} is not in the support of n")
        return [(alpha.m[k], idx, k) for k in alpha.support_m if nonzero[idx][k]]
    if side == "m":
        if alpha.m[idx] == 0:
            raise ValueError(f"pivot k={idx} is not in the support of m")
        return [(alpha.n[h], h, idx) for h in alpha.support_n if nonzero[h][idx]]
    raise ValueError(f"unknown pivot side {side!r}")


class _Evaluator:
    def __init__(self, sigma, mode: Mode, p: int):
        self.mode = mode
        self.p = p
        self.table = sigma_table(sigma, mode, p)
        self.nonzero = [[not is_zero(x) for x in row] for row in self.table]
        self.zero = ring_zero(mode, p)
        self.one = ring_one(mode, p)

    def leaf(self, alpha: MultiIndex):
        """Value if no lowering is needed, else ``None``."""
        if alpha.is_zero():
            return self.one
        if not alpha.is_balanced():
            return self.zero
        return None

    def combine(self, terms, values):
        total = self.zero
        for (w, h, k), v in zip(terms, values):
            total = total + self.table[h][k] * v * w
        return total

    def run(self, alpha: MultiIndex, memo: dict, pivot=None):
        """Explicit work-list evaluation; ``pivot`` applies to the root only."""
        children: dict[MultiIndex, list] = {}
        stack = [alpha]
        while stack:
            node = stack[-1]
            if node in memo:
                stack.pop()
                continue
            value = self.leaf(node)
            if value is not None:
                memo[node] = value
                stack.pop()
                continue
            terms = children.get(node)
            if terms is None:
                terms = recurrence_terms(node, self.nonzero, pivot if node is alpha else None)
                children[node] = terms
            missing = [node.minus(h, k) for _, h, k in terms]
            missing = [c for c in missing if c not in memo]
            if missing:
                stack.extend(missing)
                continue
            memo[node] = self.combine(terms, [memo[node.minus(h, k)] for _, h, k in terms])
            del children[node]
            stack.pop()
        return memo[alpha]

    def run_plain(self, alpha: MultiIndex, pivot=None):
        value = self.leaf(alpha)
        if value is not None:
            return value
        terms = recurrence_terms(alpha, self.nonzero, pivot)
        return self.combine(terms, [self.run_plain(alpha.minus(h, k)) for _, h, k in terms])


def moment_recurrence(
    alpha: MultiIndex,
    sigma: HermitianCovariance | None = None,
    mode: Mode | str | None = None,
    *,
    memoize: bool = True,
    cache: RecurrenceCache | None = None,
    pivot: tuple[str, int] | None = None,
) -> MomentValue:
    """Evaluate by repeated lowering.

    ``memoize=False`` recomputes shared sub-moments by plain recursion and
    exists only to check that memoization is transparent.
    """
    mode = resolve_mode(sigma, mode)
    check_dimensions(alpha, sigma)
    ev = _Evaluator(sigma, mode, alpha.p)
    if not memoize:
        return MomentValue(ev.run_plain(alpha, pivot), mode)
    if cache is not None:
        if cache.sigma is not sigma or cache.mode is not mode:
            raise ValueError("cache was built for a different covariance or mode")
        if pivot is None and alpha in cache:
            return MomentValue(cache.get(alpha), mode, extra={"memo_size": len(cache)})
        memo = dict(cache._values)
        value = ev.run(alpha, memo, pivot)
        cache.update(memo)
    else:
        memo = {}
        value = ev.run(alpha, memo, pivot)
    return MomentValue(value, mode, extra={"memo_size": len(memo)})


@dataclass
class RecurrenceSystem:
    """Matrix form ``A t = nu * b`` of the lowering relations.

    Rows ``0..p-1`` correspond to the ``h`` relations and rows ``p..2p-1``
    to the ``k`` relations.  ``columns[c] = (h, k)`` labels column ``c``.
    """

    A: list[list[Any]]
    t: list[Any]
    b: list[int]
    columns: list[tuple[int, int]]
    nu: Any
    zero: Any

    def lhs(self) -> list:
        out = []
        for row in self.A:
            acc = self.zero
            for x, y in zip(row, self.t):
                acc = acc + x * y
            out.append(acc)
        return out

    def residual(self) -> list:
        """``A t - nu b`` entrywise."""
        return [v - self.nu * bi for v, bi in zip(self.lhs(), self.b)]


def build_recurrence_system(
    alpha: MultiIndex,
    sigma: HermitianCovariance | None = None,
    nu_lookup: Callable[[MultiIndex], Any] | None = None,
    mode: Mode | str | None = None,
) -> RecurrenceSystem:
    """Assemble ``A``, ``t`` and ``b``.

    ``nu_lookup`` maps a multi-index to its moment value in ``mode``; it
    defaults to a memoized recurrence evaluation.
    """
    mode = resolve_mode(sigma, mode)
    check_dimensions(alpha, sigma)
    p = alpha.p
    s = build_sparsity(alpha, sigma)
    table = sigma_table(sigma, mode, p)
    zero = ring_zero(mode, p)
    if nu_lookup is None:
        ev = _Evaluator(sigma, mode, p)
        memo: dict = {}

        def nu_lookup(beta):
            return ev.run(beta, memo)

    columns = [(h, k) for h in s.N for k in sorted(s.S_N[h])]
    A = [[zero for _ in columns] for _ in range(2 * p)]
    t = []
    for c, (h, k) in enumerate(columns):
        A[h][c] = table[h][k] * alpha.m[k]
        A[p + k][c] = table[h][k] * alpha.n[h]
        t.append(nu_lookup(alpha.minus(h, k)))
    b = [0] * (2 * p)
    for h in s.N:
        b[h] = 1
    for k in s.M:
        b[p + k] = 1
    return RecurrenceSystem(A, t, b, columns, nu_lookup(alpha), zero)


def check_linear_combination_annihilation(
    alpha: MultiIndex,
    sigma: HermitianCovariance | None,
    block: int | Iterable[int],
    mode: Mode | str | None = None,
    system: RecurrenceSystem | None = None,
):
    """``c^T A t - nu c^T b`` for the block weight vector ``c``.

    ``c`` weights the ``h`` rows whose neighborhood lies in the block by
    ``n_h`` and the block's ``k`` rows by ``-m_k``.  ``block`` is a position
    in the induced partition of M or the block's member indices.
    """
    s = build_sparsity(alpha, sigma)
    if isinstance(block, int):
        if not 0 <= block < len(s.partition_M):
            raise UnknownBlock(f"block {block} out of range (partition has {len(s.partition_M)})")
        members = s.partition_M[block]
    else:
        members = tuple(sorted(block))
        if members not in s.partition_M:
            raise UnknownBlock(f"{members} is not a block of the induced partition {s.partition_M}")
    if system is None:
        system = build_recurrence_system(alpha, sigma, mode=mode)
    p = alpha.p
    c = [0] * (2 * p)
    for h in s.block_n_indices(members):
        c[h] = alpha.n[h]
    for k in members:
        c[p + k] = -alpha.m[k]
    lhs = system.lhs()
    total = system.zero
    for ci, v, bi in zip(c, lhs, system.b):
        if ci:
            total = total + v * ci - system.nu * (ci * bi)
    return total
