import math
import random
from fractions import Fraction

import pytest

from cmnd_moments.closed_form import moment_closed_form
from cmnd_moments.core import GaussianRational, MultiIndex, SigmaPolynomial, validate_covariance
from cmnd_moments.recurrence import (
    RecurrenceCache,
    UnknownBlock,
    build_recurrence_system,
    check_linear_combination_annihilation,
    moment_recurrence,
)
from cmnd_moments.sparsity import build_sparsity

from helpers import example_sigma, random_balanced_alpha, random_exact_sigma


def test_elementary_moment():
    sigma = random_exact_sigma(random.Random(0), 3)
    for h in range(3):
        for k in range(3):
            assert moment_recurrence(MultiIndex.beta(h, k, 3), sigma).value == sigma[h, k]


def test_four_relations_for_two_variables():
    rng = random.Random(1)
    sigma = random_exact_sigma(rng, 2)
    for _ in range(20):
        alpha = random_balanced_alpha(rng, 2, rng.randint(1, 6))
        values = set()
        for h in alpha.support_n:
            values.add(moment_recurrence(alpha, sigma, pivot=("n", h)).value)
        for k in alpha.support_m:
            values.add(moment_recurrence(alpha, sigma, pivot=("m", k)).value)
        assert len(values) == 1


def test_one_dimensional_value():
    sigma = validate_covariance([[2]], "exact")
    assert moment_recurrence(MultiIndex((3,), (3,)), sigma).value == 48


def test_pivot_independence():
    rng = random.Random(2)
    for _ in range(80):
        p = rng.randint(1, 3)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.4)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 6))
        ref = moment_recurrence(alpha, sigma).value
        for h in alpha.support_n:
            assert moment_recurrence(alpha, sigma, pivot=("n", h)).value == ref
        for k in alpha.support_m:
            assert moment_recurrence(alpha, sigma, pivot=("m", k)).value == ref
        assert ref == moment_closed_form(alpha, sigma).value


def test_memoization_is_transparent():
    rng = random.Random(3)
    for _ in range(40):
        p = rng.randint(1, 3)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.3)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 5))
        assert moment_recurrence(alpha, sigma).value == moment_recurrence(alpha, sigma, memoize=False).value


def test_shared_cache():
    rng = random.Random(4)
    sigma = random_exact_sigma(rng, 3)
    cache = RecurrenceCache(sigma, "exact")
    for _ in range(20):
        alpha = random_balanced_alpha(rng, 3, rng.randint(0, 5))
        assert moment_recurrence(alpha, sigma, cache=cache).value == moment_recurrence(alpha, sigma).value
    assert len(cache) > 20
    with pytest.raises(ValueError):
        moment_recurrence(alpha, random_exact_sigma(rng, 3), cache=cache)


def test_deep_recursion_uses_a_work_list():
    sigma = validate_covariance([[1]], "exact")
    alpha = MultiIndex((3000,), (3000,))
    assert moment_recurrence(alpha, sigma).value == math.factorial(3000)


def test_symbolic_recurrence():
    alpha = MultiIndex.from_interleaved((2, 1, 2, 3))
    assert moment_recurrence(alpha, None, "symbolic").value.to_text() == "12*s12^2*s21*s22 + 12*s11*s12*s22^2"


def test_smallest_system():
    gamma = GaussianRational(Fraction(7, 2))
    sigma = validate_covariance([[gamma]], "exact")
    sys_ = build_recurrence_system(MultiIndex((1,), (1,)), sigma)
    assert sys_.A == [[gamma], [gamma]]
    assert sys_.t == [1]
    assert sys_.b == [1, 1]
    assert sys_.nu == gamma
    assert sys_.residual() == [0, 0]


def test_dense_system_block_structure():
    p = 3
    alpha = MultiIndex((1, 2, 1), (2, 1, 1))
    sys_ = build_recurrence_system(alpha, None, mode="symbolic")
    assert len(sys_.A) == 2 * p and len(sys_.columns) == p * p
    for c, (h, k) in enumerate(sys_.columns):
        var = SigmaPolynomial.variable(h, k, p)
        for row in range(2 * p):
            entry = sys_.A[row][c]
            if row == h:
                assert entry == var * alpha.m[k]
            elif row == p + k:
                assert entry == var * alpha.n[h]
            else:
                assert entry.is_zero()
    assert all(r.is_zero() for r in sys_.residual())


def test_rows_outside_support_are_null():
    sigma = random_exact_sigma(random.Random(5), 3)
    alpha = MultiIndex((2, 0, 1), (0, 3, 0))
    sys_ = build_recurrence_system(alpha, sigma)
    assert sys_.b == [1, 0, 1, 0, 1, 0]
    for row in (1, 3, 5):
        assert all(x == 0 for x in sys_.A[row])
    assert all(r == 0 for r in sys_.residual())


def test_system_residual_random():
    rng = random.Random(6)
    for _ in range(60):
        p = rng.randint(1, 4)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.4)
        n = tuple(rng.randint(0, 3) for _ in range(p))
        m = tuple(rng.randint(0, 3) for _ in range(p))
        sys_ = build_recurrence_system(MultiIndex(n, m), sigma)
        assert all(r == 0 for r in sys_.residual())


def test_annihilation_dense_single_block():
    rng = random.Random(7)
    sigma = random_exact_sigma(rng, 3)
    alpha = random_balanced_alpha(rng, 3, 4)
    assert check_linear_combination_annihilation(alpha, sigma, 0) == 0


def test_annihilation_on_two_block_pattern():
    sigma = example_sigma()
    for m in ([2, 0, 0, 2, 1], [2, 0, 0, 1, 2]):
        alpha = MultiIndex((1, 1, 1, 1, 1), tuple(m))
        assert build_sparsity(alpha, sigma).partition_M == ((0, 4), (3,))
        assert check_linear_combination_annihilation(alpha, sigma, (0, 4)) == 0
        assert check_linear_combination_annihilation(alpha, sigma, (3,)) == 0


def test_annihilation_small():
    sigma = random_exact_sigma(random.Random(8), 2)
    alpha = MultiIndex.from_interleaved((1, 1, 0, 0))
    assert check_linear_combination_annihilation(alpha, sigma, 0) == 0


def test_unknown_block():
    sigma = random_exact_sigma(random.Random(9), 2)
    alpha = MultiIndex.from_interleaved((1, 1, 0, 0))
    with pytest.raises(UnknownBlock):
        check_linear_combination_annihilation(alpha, sigma, 3)
    with pytest.raises(UnknownBlock):
        check_linear_combination_annihilation(alpha, sigma, (1,))
