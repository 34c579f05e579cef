import math

import pytest

from binomid.catalog import load_builtin


@pytest.fixture(scope="session")
def catalog():
    return load_builtin()


def comb_oracle(n: int, k: int) -> int:
    """Independent generalized binomial: math.comb plus upper negation.

    Deliberately a different algorithm from the kernel's product formula.
    """
    if k < 0:
        return 0
    if n >= 0:
        return math.comb(n, k) if k <= n else 0
    return (-1) ** k * math.comb(k - n - 1, k)
