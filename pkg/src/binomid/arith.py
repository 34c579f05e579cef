"""Exact integer arithmetic kernel: generalized binomial coefficients.

All functions work on plain Python integers (arbitrary precision) and are
pure, so they are safe to call from any number of concurrent workers.
"""
from __future__ import annotations

_factorials: list[int] = [1]


def factorial(k: int) -> int:
    """k! for k >= 0, memoized."""
    if k < 0:
        raise ValueError(f"factorial of negative argument {k}")
    while len(_factorials) <= k:
        _factorials.append(_factorials[-1] * len(_factorials))
    return _factorials[k]


def exact_div(a: int, b: int) -> int:
    """Divide a by b, requiring zero remainder.

    A non-exact division signals an arithmetic bug upstream, so it raises
    instead of rounding.
    """
    q, r = divmod(a, b)
    if r != 0:
        raise ArithmeticError(f"non-exact division: {a} / {b} leaves remainder {r}")
    return q


def falling_factorial(n: int, k: int) -> int:
    """n(n-1)...(n-k+1) for k >= 0; the empty product 1 for k = 0."""
    if k < 0:
        raise ValueError(f"falling factorial needs k >= 0, got {k}")
    result = 1
    for i in range(k):
        result *= n - i
    return result


def binomial(n: int, k: int) -> int:
    """Generalized binomial coefficient for arbitrary integers n, k.

    Returns 0 for k < 0, otherwise n(n-1)...(n-k+1) / k!, which is exact for
    every integer n. For 0 <= n < k this yields 0; for negative n it follows
    the product formula, e.g. binomial(-3, 2) = 6.
    """
    if k < 0:
        return 0
    if k == 0:
        return 1
    if 0 <= n < k:
        return 0
    return exact_div(falling_factorial(n, k), factorial(k))


def run_invariant_suite(bound: int = 30) -> list[tuple[str, int, list[tuple[int, int]]]]:
    """Exhaustively check the kernel invariants for |n|, |k| <= bound.

    Returns (name, cases, violations) triples; an empty violation list means
    the invariant held everywhere. The second symmetry is checked under its
    side condition n >= k >= 0 (it fails outside, e.g. at n = k = -1).
    """
    span = range(-bound, bound + 1)
    suite = []

    def check(name, pairs, law):
        cases = 0
        bad = []
        for n, k in pairs:
            cases += 1
            if not law(n, k):
                bad.append((n, k))
        suite.append((name, cases, bad))

    check(
        "pascal",
        ((n, k) for n in span for k in span),
        lambda n, k: binomial(n, k) == binomial(n - 1, k - 1) + binomial(n - 1, k),
    )
    check(
        "upper-negation",
        ((n, k) for n in span for k in span),
        lambda n, k: binomial(n, k) == (-1) ** max(k, 0) * binomial(k - n - 1, k),
    )
    check(
        "second-symmetry",
        ((n, k) for n in range(0, bound + 1) for k in range(0, n + 1)),
        lambda n, k: binomial(n, k) == (-1) ** (n - k) * binomial(-k - 1, n - k),
    )
    check(
        "lower-symmetry",
        ((n, k) for n in range(0, bound + 1) for k in range(0, n + 1)),
        lambda n, k: binomial(n, k) == binomial(n, n - k),
    )
    check(
        "edge-cases",
        ((n, k) for n in span for k in span),
        lambda n, k: (binomial(n, 0) == 1) and (k <= n or n < 0 or binomial(n, k) == 0),
    )
    return suite
