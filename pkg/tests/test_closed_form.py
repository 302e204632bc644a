import math
import random
from fractions import Fraction

import pytest

from cmnd_moments.closed_form import moment_closed_form, term_coefficient, term_value
from cmnd_moments.core import GaussianRational, Mode, MultiIndex, SigmaPolynomial, validate_covariance
from cmnd_moments.index_set import NotInIndexSet, enumerate_index_set
from cmnd_moments.oracles import moment_permanent
from cmnd_moments.sparsity import NullReason

from helpers import example_sigma, random_balanced_alpha, random_exact_sigma

A2123 = MultiIndex.from_interleaved((2, 1, 2, 3))


def _var(h, k, p=2):
    return SigmaPolynomial.variable(h, k, p)


def test_term_of_elementary_moment():
    sigma = random_exact_sigma(random.Random(1), 3)
    for h in range(3):
        for k in range(3):
            a = [[0] * 3 for _ in range(3)]
            a[h][k] = 1
            assert term_value(MultiIndex.beta(h, k, 3), a, sigma) == sigma[h, k]


def test_term_2123_symbolic():
    got = term_value(A2123, ((1, 1), (0, 2)), None, "symbolic")
    assert got == 12 * _var(0, 0) * _var(0, 1) * _var(1, 1) * _var(1, 1)


@pytest.mark.parametrize("c", range(7))
def test_term_power_of_elementary(c):
    sigma = random_exact_sigma(random.Random(c), 2)
    a = ((0, c), (0, 0))
    assert term_value(MultiIndex.beta(0, 1, 2, times=c), a, sigma) == math.factorial(c) * sigma[0, 1] ** c


def test_term_rejects_foreign_matrix():
    with pytest.raises(NotInIndexSet):
        term_value(A2123, ((2, 0), (0, 2)), None, "symbolic")


def test_closed_form_2123_symbolic():
    got = moment_closed_form(A2123, None, "symbolic").value
    expected = 12 * _var(0, 1) * _var(0, 1) * _var(1, 0) * _var(1, 1) + 12 * _var(0, 0) * _var(0, 1) * _var(1, 1) * _var(1, 1)
    assert got == expected
    assert got.to_text() == "12*s12^2*s21*s22 + 12*s11*s12*s22^2"


@pytest.mark.parametrize("n", range(8))
def test_closed_form_one_dimensional(n):
    gamma = Fraction(5, 3)
    sigma = validate_covariance([[gamma]], "exact")
    assert moment_closed_form(MultiIndex((n,), (n,)), sigma).value == math.factorial(n) * gamma**n


def test_example_with_five_variables_vanishes():
    alpha = MultiIndex.from_interleaved((2, 0, 1, 2, 1, 2, 2, 3, 1, 0))
    sigma = example_sigma()
    gated = moment_closed_form(alpha, sigma)
    assert gated.is_zero() and gated.verdict.reason is NullReason.EMPTY_NEIGHBORHOOD
    raw = moment_closed_form(alpha, sigma, gate=False)
    assert raw.is_zero() and raw.terms > 0
    # terms avoiding every other zero covariance still carry sigma_54 once
    zeros = sigma.zero_cells() - {(4, 3)}
    for a in enumerate_index_set(alpha, zero_cells=zeros):
        assert a[4][3] == 1


def test_unbalanced_is_exact_zero():
    sigma = random_exact_sigma(random.Random(2), 2)
    v = moment_closed_form(MultiIndex.from_interleaved((2, 0, 0, 1)), sigma)
    assert v.value == GaussianRational(0) and v.verdict.reason is NullReason.DEGREE_IMBALANCE


def test_zero_multi_index_is_one():
    sigma = random_exact_sigma(random.Random(3), 3)
    assert moment_closed_form(MultiIndex.zeros(3), sigma).value == 1


def test_hermitian_symmetry():
    rng = random.Random(4)
    for _ in range(60):
        p = rng.randint(1, 3)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.3)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 5))
        direct = moment_closed_form(alpha, sigma).value
        swapped = moment_closed_form(alpha.swapped(), sigma).value
        assert swapped == direct.conjugate()


def test_symbolic_coefficients_are_nonnegative_integers():
    rng = random.Random(5)
    for _ in range(40):
        p = rng.randint(1, 3)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 6))
        poly = moment_closed_form(alpha, None, "symbolic").value
        assert all(isinstance(c, int) and c > 0 for c in poly.terms.values())
        for a in enumerate_index_set(alpha):
            assert term_coefficient(alpha, a) > 0
        for mono in poly.terms:
            e = poly.exponent_matrix(mono)
            assert tuple(sum(r) for r in e) == alpha.n
            assert tuple(sum(e[h][k] for h in range(p)) for k in range(p)) == alpha.m


def test_identity_covariance():
    rng = random.Random(6)
    for p in range(1, 5):
        ident = validate_covariance([[int(h == k) for k in range(p)] for h in range(p)], "exact")
        for _ in range(15):
            alpha = random_balanced_alpha(rng, p, rng.randint(0, 6))
            expected = math.prod(math.factorial(x) for x in alpha.n) if alpha.n == alpha.m else 0
            assert moment_closed_form(alpha, ident).value == expected


def test_scaling_homogeneity():
    rng = random.Random(7)
    c = Fraction(3, 2)
    for _ in range(30):
        p = rng.randint(1, 3)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.2)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 5))
        base = moment_closed_form(alpha, sigma).value
        scaled = moment_closed_form(alpha, sigma.scaled(c)).value
        assert scaled == base * c ** sum(alpha.n)


def test_pruning_and_chunking_do_not_change_values():
    rng = random.Random(8)
    for _ in range(40):
        p = rng.randint(1, 4)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.5)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 6))
        plain = moment_closed_form(alpha, sigma, gate=False)
        pruned = moment_closed_form(alpha, sigma, gate=False, prune=True)
        chunked = moment_closed_form(alpha, sigma, gate=False, workers=4)
        assert plain.value == pruned.value == chunked.value
        assert pruned.terms <= plain.terms
        assert chunked.terms == plain.terms


def test_symbolic_respects_structural_zeros():
    sigma = random_exact_sigma(random.Random(9), 2, zeros=[(0, 1)])
    alpha = MultiIndex.from_interleaved((1, 1, 1, 1))
    poly = moment_closed_form(alpha, sigma, "symbolic").value
    assert poly == _var(0, 0) * _var(1, 1)
    assert poly.evaluate(sigma) == moment_closed_form(alpha, sigma).value


def test_float_mode_tracks_exact_mode():
    rng = random.Random(10)
    for _ in range(40):
        p = rng.randint(1, 4)
        sigma = random_exact_sigma(rng, p, zero_fraction=0.3)
        alpha = random_balanced_alpha(rng, p, rng.randint(0, 7))
        exact = complex(moment_closed_form(alpha, sigma).value)
        approx = moment_closed_form(alpha, sigma.as_float(), "float").value
        assert isinstance(approx, complex)
        assert abs(approx - exact) <= 1e-12 * max(1.0, abs(exact)) + 1e-9


def test_float_agrees_with_permanent():
    rng = random.Random(11)
    sigma = random_exact_sigma(rng, 3).as_float()
    for _ in range(20):
        alpha = random_balanced_alpha(rng, 3, rng.randint(1, 6))
        a = moment_closed_form(alpha, sigma, Mode.FLOAT).value
        b = moment_permanent(alpha, sigma, Mode.FLOAT).value
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)
