"""Independent checks: permanent (Wick) expansion and Monte Carlo.

The moment of a balanced multi-index equals the permanent of the d x d
matrix whose rows repeat ``h`` ``n_h`` times and whose columns repeat ``k``
``m_k`` times, entry ``sigma[row][col]``.

Random numbers come from numpy's Philox-4x64 counter-based generator keyed
by the seed.  Samples are produced in fixed chunks of ``CHUNK_SIZE``; chunk
``c`` uses counter ``[0, 0, 0, c]``, so each chunk is an independent stream
and results do not depend on how chunks are scheduled.  Each complex
coordinate uses two uniforms through Box-Muller: ``sqrt(-log(u1)) *
exp(2*pi*i*u2)`` has independent real and imaginary parts of variance 1/2.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    GaussianRational,
    HermitianCovariance,
    MomentError,
    Mode,
    MomentValue,
    MultiIndex,
    SigmaPolynomial,
    check_dimensions,
    is_zero,
    resolve_mode,
    ring_one,
    ring_zero,
    sigma_table,
)

DEFAULT_MAX_DEGREE = 14
SYMBOLIC_MAX_DEGREE = 8
CHUNK_SIZE = 1 << 16


class DegreeTooLarge(MomentError):
    pass


class NotPositiveDefinite(MomentError):
    pass


class InsufficientSamples(MomentError):
    pass


@dataclass(frozen=True)
class ExpandedMatrix:
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    B: list

    @property
    def d(self) -> int:
        return len(self.rows)


def expanded_matrix(alpha: MultiIndex, table) -> ExpandedMatrix:
    if not alpha.is_balanced():
        raise ValueError(f"expanded matrix needs a balanced multi-index, got {alpha}")
    rows = tuple(h for h, c in enumerate(alpha.n) for _ in range(c))
    cols = tuple(k for k, c in enumerate(alpha.m) for _ in range(c))
    B = [[table[r][c] for c in cols] for r in rows]
    return ExpandedMatrix(rows, cols, B)


def permanent_ryser(B, zero, one):
    """Ryser's formula with Gray-code column updates; exact for exact scalars."""
    n = len(B)
    if n == 0:
        return one
    column_nonzeros = [[(i, B[i][j]) for i in range(n) if not is_zero(B[i][j])] for j in range(n)]
    row_sums = [zero] * n
    total = zero
    subset = 0
    for step in range(1, 1 << n):
        j = (step & -step).bit_length() - 1
        subset ^= 1 << j
        if subset >> j & 1:
            for i, x in column_nonzeros[j]:
                row_sums[i] = row_sums[i] + x
        else:
            for i, x in column_nonzeros[j]:
                row_sums[i] = row_sums[i] - x
        if any(is_zero(s) for s in row_sums):
            continue
        prod = row_sums[0]
        for s in row_sums[1:]:
            prod = prod * s
        if bin(subset).count("1") % 2:
            total = total - prod
        else:
            total = total + prod
    return total if n % 2 == 0 else -total


def _permanent_exact(B) -> GaussianRational:
    """Ryser on Gaussian integers after clearing denominators."""
    n = len(B)
    if n == 0:
        return GaussianRational(1)
    den = math.lcm(*(x.re.denominator * x.im.denominator for row in B for x in row))
    re = [[int(x.re * den) for x in row] for row in B]
    im = [[int(x.im * den) for x in row] for row in B]
    cols = [[(i, re[i][j], im[i][j]) for i in range(n) if re[i][j] or im[i][j]] for j in range(n)]
    sr = [0] * n
    si = [0] * n
    tr = ti = 0
    subset = 0
    for step in range(1, 1 << n):
        j = (step & -step).bit_length() - 1
        subset ^= 1 << j
        sign = 1 if subset >> j & 1 else -1
        for i, a, b in cols[j]:
            sr[i] += sign * a
            si[i] += sign * b
        pr, pi = 1, 0
        for a, b in zip(sr, si):
            if not (a or b):
                pr = pi = 0
                break
            pr, pi = pr * a - pi * b, pr * b + pi * a
        if subset.bit_count() % 2:
            tr -= pr
            ti -= pi
        else:
            tr += pr
            ti += pi
    if n % 2:
        tr, ti = -tr, -ti
    scale = den**n
    return GaussianRational(Fraction(tr, scale), Fraction(ti, scale))


def _symbolic_permanent(em: ExpandedMatrix, table, p: int) -> SigmaPolynomial:
    nonzero = [[not t.is_zero() for t in row] for row in table]
    counts: Counter = Counter()
    d = em.d
    for perm in itertools.permutations(range(d)):
        cells = []
        for r, c in enumerate(perm):
            h, k = em.rows[r], em.cols[c]
            if not nonzero[h][k]:
                break
            cells.append((h, k))
        else:
            counts[tuple(sorted(Counter(cells).items()))] += 1
    return SigmaPolynomial(p, counts)


def moment_permanent(
    alpha: MultiIndex,
    sigma: HermitianCovariance | None = None,
    mode: Mode | str | None = None,
    *,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> MomentValue:
    """Moment as a permanent.  Symbolic mode enumerates permutations (d <= 8)."""
    mode = resolve_mode(sigma, mode)
    check_dimensions(alpha, sigma)
    p = alpha.p
    if not alpha.is_balanced():
        return MomentValue(ring_zero(mode, p), mode)
    d = sum(alpha.n)
    cap = min(max_degree, SYMBOLIC_MAX_DEGREE) if mode is Mode.SYMBOLIC else max_degree
    if d > cap:
        raise DegreeTooLarge(f"degree {d} exceeds the permanent cap {cap}")
    table = sigma_table(sigma, mode, p)
    em = expanded_matrix(alpha, table)
    if mode is Mode.SYMBOLIC:
        return MomentValue(_symbolic_permanent(em, table, p), mode)
    if mode is Mode.EXACT:
        return MomentValue(_permanent_exact(em.B), mode)
    return MomentValue(permanent_ryser(em.B, ring_zero(mode, p), ring_one(mode, p)), mode)


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


def cholesky_factor(sigma: HermitianCovariance) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma.to_numpy())
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"covariance is not positive definite: {exc}") from None


def _chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, chunk]))


def _standard_chunk(p: int, size: int, seed: int, chunk: int) -> np.ndarray:
    u = _chunk_generator(seed, chunk).random((size, p, 2))
    radius = np.sqrt(-np.log1p(-u[..., 0]))
    angle = 2.0 * np.pi * u[..., 1]
    return radius * np.exp(1j * angle)


def _chunk_sizes(count: int):
    full, rest = divmod(count, CHUNK_SIZE)
    sizes = [CHUNK_SIZE] * full
    if rest:
        sizes.append(rest)
    return sizes


def sample_cmnd(sigma: HermitianCovariance, count: int, seed: int) -> np.ndarray:
    """``count`` draws of ``Z = C U`` with ``C C^* = sigma``; shape ``(count, p)``."""
    chol = cholesky_factor(sigma)
    p = sigma.p
    parts = [
        _standard_chunk(p, size, seed, c) @ chol.T for c, size in enumerate(_chunk_sizes(count))
    ]
    if not parts:
        return np.empty((0, p), dtype=complex)
    return np.concatenate(parts)


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    std_error_re: float
    std_error_im: float
    samples: int
    seed: int

    def within(self, value, k: float = 5.0) -> bool:
        """Whether ``value`` lies within ``k`` standard errors in each component.

        A rounding allowance of ``1e-12`` times the magnitudes involved keeps
        components that are zero up to roundoff (standard error ~1e-19) from
        failing by chance.
        """
        value = complex(value)
        slack = 1e-12 * (abs(value) + abs(self.mean))
        return (
            abs(self.mean.real - value.real) <= k * self.std_error_re + slack
            and abs(self.mean.imag - value.imag) <= k * self.std_error_im + slack
        )


def _monomial(z: np.ndarray, alpha: MultiIndex) -> np.ndarray:
    out = np.ones(z.shape[0], dtype=complex)
    zc = np.conj(z)
    for h in range(alpha.p):
        if alpha.n[h]:
            out *= z[:, h] ** alpha.n[h]
        if alpha.m[h]:
            out *= zc[:, h] ** alpha.m[h]
    return out


def _chunk_stats(values: np.ndarray):
    n = values.size
    mean = values.mean()
    d_re = values.real - mean.real
    d_im = values.imag - mean.imag
    return n, mean, float(d_re @ d_re), float(d_im @ d_im)


def _merge(a, b):
    # Chan et al. pairwise update of count, mean and sums of squared deviations
    n_a, mean_a, m2r_a, m2i_a = a
    n_b, mean_b, m2r_b, m2i_b = b
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / n)
    w = n_a * n_b / n
    return n, mean, m2r_a + m2r_b + delta.real**2 * w, m2i_a + m2i_b + delta.imag**2 * w


def _tree_reduce(stats):
    while len(stats) > 1:
        nxt = [_merge(stats[i], stats[i + 1]) for i in range(0, len(stats) - 1, 2)]
        if len(stats) % 2:
            nxt.append(stats[-1])
        stats = nxt
    return stats[0]


def moment_monte_carlo(
    alpha: MultiIndex,
    sigma: HermitianCovariance,
    samples: int,
    seed: int,
    *,
    workers: int = 1,
) -> McEstimate:
    """Sample mean of the monomial with componentwise standard errors.

    The result is bit-identical for a given ``(alpha, sigma, samples, seed)``
    whatever ``workers`` is.
    """
    check_dimensions(alpha, sigma)
    if samples < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {samples}")
    chol = cholesky_factor(sigma)
    p = sigma.p

    def run(job):
        c, size = job
        z = _standard_chunk(p, size, seed, c) @ chol.T
        return _chunk_stats(_monomial(z, alpha))

    jobs = list(enumerate(_chunk_sizes(samples)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(run, jobs))
    else:
        stats = [run(j) for j in jobs]
    n, mean, m2_re, m2_im = _tree_reduce(stats)
    se_re = math.sqrt(m2_re / (n - 1) / n)
    se_im = math.sqrt(m2_im / (n - 1) / n)
    return McEstimate(complex(mean), se_re, se_im, samples, seed)
