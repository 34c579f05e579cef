import pytest

from binomid.arith import binomial, exact_div, factorial, falling_factorial, run_invariant_suite

from conftest import comb_oracle


@pytest.mark.parametrize(
    "n,k,expected",
    [
        (4, 2, 6),
        (5, -1, 0),
        (-3, 2, 6),
        (-1, 2, 1),
        (0, 0, 1),
        (3, 5, 0),
        (-2, 3, -4),
    ],
)
def test_binomial_examples(n, k, expected):
    assert binomial(n, k) == expected


def test_binomial_matches_independent_oracle():
    for n in range(-20, 21):
        for k in range(-3, 21):
            assert binomial(n, k) == comb_oracle(n, k), (n, k)


@pytest.mark.parametrize("n,k,expected", [(5, 2, 20), (-2, 3, -24), (7, 0, 1), (-9, 0, 1), (0, 0, 1)])
def test_falling_factorial(n, k, expected):
    assert falling_factorial(n, k) == expected


def test_falling_factorial_rejects_negative_k():
    with pytest.raises(ValueError):
        falling_factorial(5, -1)


def test_factorial():
    assert [factorial(k) for k in range(6)] == [1, 1, 2, 6, 24, 120]
    with pytest.raises(ValueError):
        factorial(-1)


def test_exact_div():
    assert exact_div(84, 12) == 7
    assert exact_div(-84, 12) == -7
    with pytest.raises(ArithmeticError):
        exact_div(7, 2)


def test_pascal_exhaustive():
    for n in range(-30, 31):
        for k in range(-30, 31):
            assert binomial(n, k) == binomial(n - 1, k - 1) + binomial(n - 1, k)


def test_upper_negation_exhaustive():
    # both sides vanish for k < 0
    for n in range(-30, 31):
        for k in range(-30, 31):
            lhs = binomial(n, k)
            rhs = (-1) ** max(k, 0) * binomial(k - n - 1, k)
            assert lhs == rhs, (n, k)


def test_second_symmetry_under_side_condition():
    for n in range(0, 31):
        for k in range(0, n + 1):
            assert binomial(n, k) == (-1) ** (n - k) * binomial(-k - 1, n - k)


def test_second_symmetry_counterexample_outside_condition():
    # documented: the rule is not universal; n = k = -1 breaks it
    n = k = -1
    assert binomial(n, k) == 0
    assert (-1) ** (n - k) * binomial(-k - 1, n - k) == 1


def test_symmetry_nonnegative_upper():
    for n in range(0, 31):
        for k in range(0, n + 1):
            assert binomial(n, k) == binomial(n, n - k)


def test_zero_and_one_edges():
    for n in range(-30, 31):
        assert binomial(n, 0) == 1
    for k in range(1, 31):
        for n in range(0, k):
            assert binomial(n, k) == 0


def test_invariant_suite_is_clean():
    for name, cases, violations in run_invariant_suite(30):
        assert cases > 0
        assert not violations, (name, violations[:3])


def test_binomial_large_values_exact():
    # no overflow: values beyond machine words stay exact
    assert binomial(100, 50) % 10 == binomial(100, 50) - (binomial(100, 50) // 10) * 10
    assert binomial(200, 100) == comb_oracle(200, 100)
    assert binomial(-150, 70) == comb_oracle(-150, 70)
