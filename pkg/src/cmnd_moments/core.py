"""Domain types and scalar arithmetic shared by every evaluator.

Three evaluation modes are supported:

* ``exact``: entries of the covariance are Gaussian rationals (real and
  imaginary parts are :class:`fractions.Fraction`), arithmetic never rounds.
* ``float``: entries are Python ``complex`` numbers.
* ``symbolic``: covariance entries are indeterminates ``s{h}{k}`` and moments
  are :class:`SigmaPolynomial` instances with integer coefficients.

Indices are 0-based throughout the library.  Human-facing renderings (the
polynomial text form and the CLI report) use 1-based labels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Any, Iterable, Iterator, Mapping, Sequence, Union


class MomentError(ValueError):
    """Base class for all errors raised by the library."""


class NotHermitian(MomentError):
    pass


class NonPositiveDiagonal(MomentError):
    pass


class DimensionMismatch(MomentError):
    pass


class UnbalancedDegrees(MomentError):
    pass


class Mode(str, enum.Enum):
    EXACT = "exact"
    FLOAT = "float"
    SYMBOLIC = "symbolic"


# --------------------------------------------------------------------------
# Scalars
# --------------------------------------------------------------------------


def _as_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not covariance values")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot represent {value!r} exactly")


class GaussianRational:
    """A complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Any = 0, im: Any = 0):
        self.re = _as_fraction(re)
        self.im = _as_fraction(im)

    @classmethod
    def coerce(cls, value: Any) -> "GaussianRational":
        """Convert ints, Fractions, rational strings and ``(re, im)`` pairs.

        Floats are rejected: exact mode must never inherit binary rounding.
        """
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, float):
            raise TypeError(f"float {value!r} given where an exact value is required")
        if isinstance(value, complex):
            raise TypeError(f"complex {value!r} given where an exact value is required")
        if isinstance(value, (tuple, list)) and len(value) == 2:
            re, im = value
            if isinstance(re, float) or isinstance(im, float):
                raise TypeError("float parts given where an exact value is required")
            return cls(re, im)
        return cls(value, 0)

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __add__(self, other):
        if isinstance(other, GaussianRational):
            return GaussianRational(self.re + other.re, self.im + other.im)
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re + other, self.im)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        if isinstance(other, GaussianRational):
            return GaussianRational(self.re - other.re, self.im - other.im)
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re - other, self.im)
        return NotImplemented

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, GaussianRational):
            a, b, c, d = self.re, self.im, other.re, other.im
            return GaussianRational(a * c - b * d, a * d + b * c)
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re * other, self.im * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return GaussianRational(self.re / other, self.im / other)
        if isinstance(other, GaussianRational):
            den = other.re * other.re + other.im * other.im
            if den == 0:
                raise ZeroDivisionError("division by zero")
            num = self * other.conjugate()
            return GaussianRational(num.re / den, num.im / den)
        return NotImplemented

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = GaussianRational(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        if isinstance(other, complex):
            return complex(self) == other
        return NotImplemented

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({str(self.re)!r}, {str(self.im)!r})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "-" if self.im < 0 else "+"
        return f"{self.re}{sign}{abs(self.im)}i"


Scalar = Union[GaussianRational, complex]


def is_zero(value) -> bool:
    """Structural zero test. Float values count only if exactly zero."""
    if isinstance(value, GaussianRational):
        return value.is_zero()
    if isinstance(value, SigmaPolynomial):
        return value.is_zero()
    return value == 0


@lru_cache(maxsize=None)
def factorial(n: int) -> int:
    return math.factorial(n)


# --------------------------------------------------------------------------
# Multi-indices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiIndex:
    """Exponents of the monomial ``prod z_h**n[h] * conj(z_h)**m[h]``."""

    n: tuple[int, ...]
    m: tuple[int, ...]

    def __post_init__(self):
        n = tuple(int(x) for x in self.n)
        m = tuple(int(x) for x in self.m)
        if len(n) != len(m):
            raise DimensionMismatch(f"len(n)={len(n)} differs from len(m)={len(m)}")
        if not n:
            raise DimensionMismatch("a multi-index needs p >= 1")
        if any(x < 0 for x in n + m):
            raise ValueError(f"negative exponent in n={n}, m={m}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)

    @classmethod
    def from_interleaved(cls, values: Sequence[int]) -> "MultiIndex":
        """Build from ``(n1, m1, n2, m2, ...)``."""
        values = list(values)
        if len(values) % 2:
            raise DimensionMismatch(f"odd length {len(values)} for an interleaved multi-index")
        return cls(tuple(values[0::2]), tuple(values[1::2]))

    @classmethod
    def beta(cls, h: int, k: int, p: int, times: int = 1) -> "MultiIndex":
        """``times * beta_hk``: the exponent of ``(z_h * conj(z_k))**times``."""
        n = [0] * p
        m = [0] * p
        n[h] = times
        m[k] = times
        return cls(tuple(n), tuple(m))

    @classmethod
    def zeros(cls, p: int) -> "MultiIndex":
        return cls((0,) * p, (0,) * p)

    @property
    def p(self) -> int:
        return len(self.n)

    def interleaved(self) -> tuple[int, ...]:
        return tuple(x for pair in zip(self.n, self.m) for x in pair)

    def total_degrees(self) -> tuple[int, int]:
        return sum(self.n), sum(self.m)

    def is_balanced(self) -> bool:
        return sum(self.n) == sum(self.m)

    def is_zero(self) -> bool:
        return not any(self.n) and not any(self.m)

    @property
    def support_n(self) -> tuple[int, ...]:
        return tuple(h for h, x in enumerate(self.n) if x)

    @property
    def support_m(self) -> tuple[int, ...]:
        return tuple(k for k, x in enumerate(self.m) if x)

    def minus(self, h: int, k: int) -> "MultiIndex":
        """Remove one ``z_h`` and one ``conj(z_k)`` from the monomial."""
        if self.n[h] < 1 or self.m[k] < 1:
            raise ValueError(f"cannot lower {self} at ({h}, {k})")
        n = list(self.n)
        m = list(self.m)
        n[h] -= 1
        m[k] -= 1
        return MultiIndex(tuple(n), tuple(m))

    def swapped(self) -> "MultiIndex":
        """Exchange holomorphic and antiholomorphic exponents."""
        return MultiIndex(self.m, self.n)

    def permuted(self, perm: Sequence[int]) -> "MultiIndex":
        """Relabel coordinates so that new index ``perm[h]`` carries old ``h``."""
        n = [0] * self.p
        m = [0] * self.p
        for old, new in enumerate(perm):
            n[new] = self.n[old]
            m[new] = self.m[old]
        return MultiIndex(tuple(n), tuple(m))

    def __str__(self):
        return "(" + ",".join(str(x) for x in self.interleaved()) + ")"


def total_degrees(alpha: MultiIndex) -> tuple[int, int]:
    return alpha.total_degrees()


# --------------------------------------------------------------------------
# Covariance
# --------------------------------------------------------------------------

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class HermitianCovariance:
    entries: tuple[tuple[Scalar, ...], ...]
    mode: Mode

    @property
    def p(self) -> int:
        return len(self.entries)

    def __getitem__(self, hk: tuple[int, int]) -> Scalar:
        h, k = hk
        return self.entries[h][k]

    def is_structural_zero(self, h: int, k: int) -> bool:
        return is_zero(self.entries[h][k])

    def zero_cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (h, k) for h in range(self.p) for k in range(self.p) if self.is_structural_zero(h, k)
        )

    def as_float(self) -> "HermitianCovariance":
        if self.mode is Mode.FLOAT:
            return self
        rows = tuple(tuple(complex(x) for x in row) for row in self.entries)
        return HermitianCovariance(rows, Mode.FLOAT)

    def to_numpy(self):
        import numpy as np

        return np.array([[complex(x) for x in row] for row in self.entries], dtype=complex)

    def scaled(self, factor) -> "HermitianCovariance":
        rows = tuple(tuple(x * factor for x in row) for row in self.entries)
        return HermitianCovariance(rows, self.mode)

    def permuted(self, perm: Sequence[int]) -> "HermitianCovariance":
        """Relabel so that new index ``perm[h]`` carries old ``h``."""
        p = self.p
        inv = [0] * p
        for old, new in enumerate(perm):
            inv[new] = old
        rows = tuple(tuple(self.entries[inv[h]][inv[k]] for k in range(p)) for h in range(p))
        return HermitianCovariance(rows, self.mode)


def validate_covariance(raw: Sequence[Sequence[Any]], mode: Mode | str = Mode.EXACT) -> HermitianCovariance:
    """Check conjugate symmetry and the diagonal, converting entries to ``mode``.

    Exact mode accepts ints, Fractions, ``"a/b"`` strings, ``(re, im)`` pairs
    and :class:`GaussianRational`.  Float mode accepts anything ``complex()``
    understands plus Gaussian rationals.
    """
    mode = Mode(mode)
    if mode is Mode.SYMBOLIC:
        raise ValueError("symbolic evaluation takes sigma=None or an exact/float covariance")
    rows = [list(r) for r in raw]
    p = len(rows)
    if p == 0 or any(len(r) != p for r in rows):
        raise DimensionMismatch(f"covariance must be a non-empty square matrix, got row lengths {[len(r) for r in rows]}")

    if mode is Mode.EXACT:
        conv = [[GaussianRational.coerce(x) for x in r] for r in rows]
        for h in range(p):
            d = conv[h][h]
            if d.im != 0 or d.re <= 0:
                raise NonPositiveDiagonal(f"diagonal entry ({h + 1},{h + 1}) = {d} is not a positive real")
            for k in range(h + 1, p):
                if conv[k][h] != conv[h][k].conjugate():
                    raise NotHermitian(
                        f"entry ({k + 1},{h + 1}) = {conv[k][h]} is not the conjugate of ({h + 1},{k + 1}) = {conv[h][k]}"
                    )
    else:
        conv = [[complex(x) for x in r] for r in rows]
        scale = max(abs(x) for r in conv for x in r)
        tol = HERMITIAN_RTOL * scale
        for h in range(p):
            d = conv[h][h]
            if abs(d.imag) > tol or d.real <= 0:
                raise NonPositiveDiagonal(f"diagonal entry ({h + 1},{h + 1}) = {d} is not a positive real")
            for k in range(h + 1, p):
                if abs(conv[k][h] - conv[h][k].conjugate()) > tol:
                    raise NotHermitian(
                        f"entry ({k + 1},{h + 1}) = {conv[k][h]} is not the conjugate of ({h + 1},{k + 1}) = {conv[h][k]}"
                    )
    return HermitianCovariance(tuple(tuple(r) for r in conv), mode)


def check_dimensions(alpha: MultiIndex, sigma: HermitianCovariance | None) -> None:
    if sigma is not None and sigma.p != alpha.p:
        raise DimensionMismatch(f"multi-index has p={alpha.p} but covariance is {sigma.p}x{sigma.p}")


# --------------------------------------------------------------------------
# Polynomials in the covariance entries
# --------------------------------------------------------------------------

# Sparse exponent matrix: sorted tuple of ((h, k), exponent) with exponent > 0.
Monomial = tuple[tuple[tuple[int, int], int], ...]


def monomial_from_matrix(a: Sequence[Sequence[int]]) -> Monomial:
    return tuple(((h, k), e) for h, row in enumerate(a) for k, e in enumerate(row) if e)


def _mono_mul(x: Monomial, y: Monomial) -> Monomial:
    acc = dict(x)
    for cell, e in y:
        acc[cell] = acc.get(cell, 0) + e
    return tuple(sorted(acc.items()))


def variable_name(h: int, k: int, p: int) -> str:
    """1-based label of ``sigma[h][k]``; an underscore separates indices past 9."""
    if p <= 9:
        return f"s{h + 1}{k + 1}"
    return f"s{h + 1}_{k + 1}"


class SigmaPolynomial:
    """Polynomial with integer coefficients in the entries ``sigma_hk``.

    ``s12`` and ``s21`` are independent indeterminates; conjugate symmetry
    only matters once values are substituted.
    """

    __slots__ = ("p", "_terms")

    def __init__(self, p: int, terms: Mapping[Monomial, int] | Iterable[tuple[Monomial, int]] = ()):
        self.p = p
        acc: dict[Monomial, int] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for mono, c in items:
            if not isinstance(c, int):
                raise TypeError(f"coefficients must be integers, got {c!r}")
            mono = tuple(sorted((tuple(cell), e) for cell, e in mono if e))
            acc[mono] = acc.get(mono, 0) + c
        self._terms = {mono: c for mono, c in acc.items() if c}

    @classmethod
    def zero(cls, p: int) -> "SigmaPolynomial":
        return cls(p)

    @classmethod
    def one(cls, p: int) -> "SigmaPolynomial":
        return cls(p, {(): 1})

    @classmethod
    def variable(cls, h: int, k: int, p: int) -> "SigmaPolynomial":
        return cls(p, {(((h, k), 1),): 1})

    @property
    def terms(self) -> Mapping[Monomial, int]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[Monomial, int]]:
        return iter(self.sorted_terms())

    def _check(self, other: "SigmaPolynomial"):
        if other.p != self.p:
            raise DimensionMismatch(f"polynomials over p={self.p} and p={other.p}")

    def __add__(self, other):
        if isinstance(other, int):
            other = SigmaPolynomial(self.p, {(): other})
        if not isinstance(other, SigmaPolynomial):
            return NotImplemented
        self._check(other)
        acc = dict(self._terms)
        for mono, c in other._terms.items():
            acc[mono] = acc.get(mono, 0) + c
        return SigmaPolynomial(self.p, acc)

    __radd__ = __add__

    def __neg__(self):
        return SigmaPolynomial(self.p, {mono: -c for mono, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, int):
            other = SigmaPolynomial(self.p, {(): other})
        if not isinstance(other, SigmaPolynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return SigmaPolynomial(self.p, {mono: c * other for mono, c in self._terms.items()})
        if not isinstance(other, SigmaPolynomial):
            return NotImplemented
        self._check(other)
        acc: dict[Monomial, int] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = _mono_mul(m1, m2)
                acc[mono] = acc.get(mono, 0) + c1 * c2
        return SigmaPolynomial(self.p, acc)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int):
            other = SigmaPolynomial(self.p, {(): other})
        if not isinstance(other, SigmaPolynomial):
            return NotImplemented
        return self.p == other.p and self._terms == other._terms

    def __hash__(self):
        return hash((self.p, frozenset(self._terms.items())))

    def degree(self) -> int:
        return max((sum(e for _, e in mono) for mono in self._terms), default=0)

    def exponent_matrix(self, mono: Monomial) -> tuple[tuple[int, ...], ...]:
        a = [[0] * self.p for _ in range(self.p)]
        for (h, k), e in mono:
            a[h][k] = e
        return tuple(tuple(r) for r in a)

    def _order_key(self, mono: Monomial):
        flat = [0] * (self.p * self.p)
        for (h, k), e in mono:
            flat[h * self.p + k] = e
        return (sum(flat), tuple(flat))

    def sorted_terms(self) -> list[tuple[Monomial, int]]:
        """Terms in ascending graded-lexicographic order of the row-major exponent matrix."""
        return sorted(self._terms.items(), key=lambda t: self._order_key(t[0]))

    def evaluate(self, sigma: HermitianCovariance | Sequence[Sequence[Any]]):
        """Substitute covariance values; returns a scalar of the covariance's type."""
        rows = sigma.entries if isinstance(sigma, HermitianCovariance) else sigma
        total = None
        for mono, c in self._terms.items():
            term = c
            for (h, k), e in mono:
                term = term * rows[h][k] ** e
            total = term if total is None else total + term
        if total is None:
            return 0
        return total

    def to_text(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for mono, c in self.sorted_terms():
            factors = []
            for (h, k), e in mono:
                name = variable_name(h, k, self.p)
                factors.append(name if e == 1 else f"{name}^{e}")
            if not factors:
                body = str(abs(c))
            elif abs(c) == 1:
                body = "*".join(factors)
            else:
                body = f"{abs(c)}*" + "*".join(factors)
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(("+ " if c > 0 else "- ") + body)
        return " ".join(parts)

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"SigmaPolynomial(p={self.p}, {self.to_text()!r})"


# --------------------------------------------------------------------------
# Mode-generic helpers
# --------------------------------------------------------------------------


def sigma_table(sigma: HermitianCovariance | None, mode: Mode, p: int):
    """Covariance entries as ring elements of ``mode``.

    In symbolic mode each nonzero entry becomes its indeterminate and
    structural zeros stay zero; ``sigma=None`` means no structural zeros.
    """
    mode = Mode(mode)
    if mode is Mode.SYMBOLIC:
        return [
            [
                SigmaPolynomial.zero(p)
                if sigma is not None and sigma.is_structural_zero(h, k)
                else SigmaPolynomial.variable(h, k, p)
                for k in range(p)
            ]
            for h in range(p)
        ]
    if sigma is None:
        raise ValueError(f"{mode.value} mode needs covariance values")
    if mode is Mode.EXACT:
        if sigma.mode is not Mode.EXACT:
            raise ValueError("exact mode needs an exact covariance")
        return [list(row) for row in sigma.entries]
    return [list(row) for row in sigma.as_float().entries]


def ring_zero(mode: Mode, p: int):
    mode = Mode(mode)
    if mode is Mode.EXACT:
        return GaussianRational(0)
    if mode is Mode.FLOAT:
        return 0j
    return SigmaPolynomial.zero(p)


def ring_one(mode: Mode, p: int):
    mode = Mode(mode)
    if mode is Mode.EXACT:
        return GaussianRational(1)
    if mode is Mode.FLOAT:
        return 1 + 0j
    return SigmaPolynomial.one(p)


def resolve_mode(sigma: HermitianCovariance | None, mode: Mode | str | None) -> Mode:
    """Default to the covariance's own mode, or symbolic when there is none."""
    if mode is not None:
        return Mode(mode)
    if sigma is None:
        return Mode.SYMBOLIC
    return sigma.mode


@dataclass(frozen=True)
class MomentValue:
    """Value of a moment in one evaluation mode.

    ``verdict`` is set when a null detector short-circuited the computation;
    ``terms`` counts the index-set elements that were summed, if any.
    """

    value: Any
    mode: Mode
    verdict: Any = None
    terms: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __eq__(self, other):
        if isinstance(other, MomentValue):
            return self.mode == other.mode and self.value == other.value
        return self.value == other

    def __hash__(self):
        return hash((self.mode, self.value))

    def is_zero(self) -> bool:
        return is_zero(self.value)

    def __str__(self):
        return str(self.value)
