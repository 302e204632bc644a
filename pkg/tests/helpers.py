"""Random instances shared by the test modules."""

import itertools
import random
from fractions import Fraction

from cmnd_moments.core import GaussianRational, MultiIndex, validate_covariance


def random_rational(rng, max_num=5, max_den=4):
    return Fraction(rng.randint(-max_num, max_num), rng.randint(1, max_den))


def random_exact_sigma(rng, p, zero_fraction=0.0, zeros=()):
    """Gaussian-rational Hermitian matrix with a positive diagonal.

    Off-diagonal pairs are zeroed with probability ``zero_fraction`` and at
    the 0-based pairs listed in ``zeros``.  Not necessarily positive definite.
    """
    forced = {tuple(sorted(c)) for c in zeros}
    rows = [[GaussianRational(0)] * p for _ in range(p)]
    for h in range(p):
        rows[h][h] = GaussianRational(Fraction(rng.randint(1, 6), rng.randint(1, 3)))
        for k in range(h + 1, p):
            if (h, k) in forced or rng.random() < zero_fraction:
                v = GaussianRational(0)
            else:
                v = GaussianRational(random_rational(rng), random_rational(rng))
                if v.is_zero():
                    v = GaussianRational(1, 1)
            rows[h][k] = v
            rows[k][h] = v.conjugate()
    return validate_covariance(rows, "exact")


def random_pd_float_sigma(rng, p):
    import numpy as np

    g = np.random.default_rng(rng.randrange(2**32))
    a = g.normal(size=(p, p)) + 1j * g.normal(size=(p, p))
    s = a @ a.conj().T / p + 0.5 * np.eye(p)
    s = (s + s.conj().T) / 2
    return validate_covariance(s.tolist(), "float")


def compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def random_composition(rng, total, parts):
    cuts = sorted(rng.randint(0, total) for _ in range(parts - 1))
    bounds = [0] + cuts + [total]
    return tuple(bounds[i + 1] - bounds[i] for i in range(parts))


def random_balanced_alpha(rng, p, degree):
    return MultiIndex(random_composition(rng, degree, p), random_composition(rng, degree, p))


def balanced_grid(max_p, max_degree):
    for p in range(1, max_p + 1):
        for d in range(max_degree + 1):
            comps = list(compositions(d, p))
            for n, m in itertools.product(comps, comps):
                yield MultiIndex(n, m)


# 0-based pairs of the five-variable example with six vanishing covariances
EXAMPLE_ZEROS = [(0, 2), (0, 3), (1, 3), (1, 4), (2, 4), (3, 4)]


def example_sigma(seed=7):
    """p = 5 covariance vanishing exactly at ``EXAMPLE_ZEROS`` (and their mirrors)."""
    rng = random.Random(seed)
    return random_exact_sigma(rng, 5, zeros=EXAMPLE_ZEROS)
