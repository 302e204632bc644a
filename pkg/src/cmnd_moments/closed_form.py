"""Moments as a finite sum over the index set.

Each matrix ``a`` in I(alpha) contributes

    prod_h n_h! m_h!  *  prod_{h,k} sigma_hk**a_hk / a_hk!

with ``sigma**0 == 1`` even for a structural zero.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .core import (
    GaussianRational,
    HermitianCovariance,
    Mode,
    MomentValue,
    MultiIndex,
    SigmaPolynomial,
    check_dimensions,
    factorial,
    monomial_from_matrix,
    resolve_mode,
    ring_zero,
    sigma_table,
)
from .index_set import check_margins, enumerate_index_set, split_index_set
from .sparsity import null_verdict


def term_coefficient(alpha: MultiIndex, a: Sequence[Sequence[int]]) -> int:
    """``prod n_h! m_h! / prod a_hk!``, always an integer for ``a`` in I(alpha)."""
    num = 1
    for x in alpha.n + alpha.m:
        num *= factorial(x)
    den = 1
    for row in a:
        for v in row:
            den *= factorial(v)
    c, r = divmod(num, den)
    if r:
        raise ArithmeticError(f"non-integer coefficient {num}/{den} for a = {a}")
    return c


class _TermEvaluator:
    """Evaluates terms for one (alpha, sigma, mode), caching powers."""

    def __init__(self, alpha: MultiIndex, sigma: HermitianCovariance | None, mode: Mode):
        self.alpha = alpha
        self.mode = mode
        self.p = alpha.p
        self.table = None if mode is Mode.SYMBOLIC else sigma_table(sigma, mode, alpha.p)
        self.zero = {} if sigma is None else {cell: True for cell in sigma.zero_cells()}
        self.margin_factor = 1
        for x in alpha.n + alpha.m:
            self.margin_factor *= factorial(x)
        self._powers: dict[tuple[int, int, int], object] = {}

    def power(self, h: int, k: int, e: int):
        key = (h, k, e)
        val = self._powers.get(key)
        if val is None:
            val = self.table[h][k] ** e
            self._powers[key] = val
        return val

    def coefficient(self, a) -> int:
        den = 1
        for row in a:
            for v in row:
                if v > 1:
                    den *= factorial(v)
        c, r = divmod(self.margin_factor, den)
        if r:
            raise ArithmeticError(f"non-integer coefficient for a = {a}")
        return c

    def is_null(self, a) -> bool:
        zero = self.zero
        if not zero:
            return False
        for h, row in enumerate(a):
            for k, v in enumerate(row):
                if v and (h, k) in zero:
                    return True
        return False

    def numeric(self, a):
        """Scalar value of the term, or ``None`` for a short-circuited zero."""
        if self.is_null(a):
            return None
        prod = None
        for h, row in enumerate(a):
            for k, v in enumerate(row):
                if v:
                    f = self.power(h, k, v)
                    prod = f if prod is None else prod * f
        c = self.coefficient(a)
        if prod is None:
            return ring_zero(self.mode, self.p) + c
        if self.mode is Mode.FLOAT:
            return prod * float(c)
        return prod * c

    def symbolic(self, a):
        if self.is_null(a):
            return None
        return monomial_from_matrix(a), self.coefficient(a)


def term_value(
    alpha: MultiIndex,
    a: Sequence[Sequence[int]],
    sigma: HermitianCovariance | None,
    mode: Mode | str | None = None,
):
    """Single addend of the closed form as a scalar (or polynomial in symbolic mode)."""
    mode = resolve_mode(sigma, mode)
    check_dimensions(alpha, sigma)
    check_margins(alpha, a)
    ev = _TermEvaluator(alpha, sigma, mode)
    if mode is Mode.SYMBOLIC:
        out = ev.symbolic(a)
        if out is None:
            return SigmaPolynomial.zero(alpha.p)
        return SigmaPolynomial(alpha.p, {out[0]: out[1]})
    out = ev.numeric(a)
    return ring_zero(mode, alpha.p) if out is None else out


def _sum_chunk(ev: _TermEvaluator, matrices):
    """Partial sum of one stream; returns ``(partial, count)``."""
    count = 0
    if ev.mode is Mode.SYMBOLIC:
        acc: dict = {}
        for a in matrices:
            count += 1
            out = ev.symbolic(a)
            if out is not None:
                mono, c = out
                acc[mono] = acc.get(mono, 0) + c
        return acc, count
    if ev.mode is Mode.FLOAT:
        re: list[float] = []
        im: list[float] = []
        for a in matrices:
            count += 1
            v = ev.numeric(a)
            if v is not None:
                re.append(v.real)
                im.append(v.imag)
        return complex(math.fsum(re), math.fsum(im)), count
    total = GaussianRational(0)
    for a in matrices:
        count += 1
        v = ev.numeric(a)
        if v is not None:
            total = total + v
    return total, count


def _combine(mode: Mode, p: int, partials):
    if mode is Mode.SYMBOLIC:
        acc: dict = {}
        for part in partials:
            for mono, c in part.items():
                acc[mono] = acc.get(mono, 0) + c
        return SigmaPolynomial(p, acc)
    if mode is Mode.FLOAT:
        parts = list(partials)
        return complex(math.fsum(v.real for v in parts), math.fsum(v.imag for v in parts))
    total = GaussianRational(0)
    for v in partials:
        total = total + v
    return total


def default_workers() -> int:
    env = os.environ.get("CMND_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def moment_closed_form(
    alpha: MultiIndex,
    sigma: HermitianCovariance | None = None,
    mode: Mode | str | None = None,
    *,
    prune: bool = False,
    workers: int = 1,
    gate: bool = True,
) -> MomentValue:
    """Sum of the closed-form terms over I(alpha).

    The null detector runs first and returns an exact zero (with the verdict
    attached) when it fires.  ``gate=False`` skips it and sums the raw
    terms; the moment must then be balanced.  ``prune`` restricts the
    enumeration to matrices avoiding the structural zeros of ``sigma``.
    ``workers > 1`` sums the chunks of :func:`split_index_set` on a thread
    pool; in float mode the partial sums are then combined chunk-wise, which
    may change the last bits.
    """
    mode = resolve_mode(sigma, mode)
    check_dimensions(alpha, sigma)
    p = alpha.p
    if gate:
        verdict = null_verdict(alpha, sigma)
        if verdict.is_provably_null:
            return MomentValue(ring_zero(mode, p), mode, verdict=verdict, terms=0)
    else:
        verdict = None

    ev = _TermEvaluator(alpha, sigma, mode)
    zero_cells = sigma.zero_cells() if (prune and sigma is not None) else frozenset()
    if workers <= 1:
        partial, count = _sum_chunk(ev, enumerate_index_set(alpha, zero_cells=zero_cells))
        value = _combine(mode, p, [partial])
    else:
        chunks = split_index_set(alpha, zero_cells=zero_cells)
        with ThreadPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            results = list(pool.map(lambda make: _sum_chunk(ev, make()), chunks))
        value = _combine(mode, p, [r[0] for r in results])
        count = sum(r[1] for r in results)
    return MomentValue(value, mode, verdict=verdict, terms=count, extra={"pruned": bool(zero_cells)})
