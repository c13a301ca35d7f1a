from __future__ import annotations

from fractions import Fraction

import pytest

from alphasched.adversary import gen_random_instance
from alphasched.model import Instance, Job

CORPUS_ALPHAS = (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4))
CORPUS_SIZE = 500


def corpus_instance(seed: int) -> Instance:
    """Frozen fuzz corpus: small integer instances cycling through the three
    benchmark alphas."""
    alpha = CORPUS_ALPHAS[seed % 3]
    n = 2 + seed % 5
    return gen_random_instance(n, max_p=8, density=0.8, seed=seed, alpha=alpha)


def small_instance(seed: int, alpha=Fraction(1, 2)) -> Instance:
    """Instances matching the brute-force oracle regime: n <= 6, integer
    releases <= 10, processing times <= 8."""
    n = 1 + seed % 6
    return gen_random_instance(n, max_p=8, density=0.8, seed=seed, alpha=alpha)


@pytest.fixture
def pair_instance() -> Instance:
    """Two equal jobs; the standing example throughout the suite."""
    return Instance((Job(1, 0, 2), Job(2, 0, 2)), Fraction(1, 2))


@pytest.fixture
def worked_example() -> Instance:
    """p=4 and p=2 released together at alpha=1/2: share, run the signalled
    short job, then finish the long one."""
    return Instance((Job(1, 0, 4), Job(2, 0, 2)), Fraction(1, 2))
