"""Shared fixtures: three desk-scale toy systems and the stock plan.

The toys are small enough for exhaustive brute-force oracles (alphabet
4, three levels, a few hundred cells in the deepest box) and cover one
shifted d=1 chain, one unshifted d=2 chain and a d=1 chain with a
different level-3 block count.
"""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_forge import (
    BlockSystem,
    DiagonalScale,
    FullSymmetricFamily,
    HybridFamily,
    ToeplitzArray,
    array_from_plan,
    entropy_pipeline,
    make_plan,
    shifted_domains,
)


def _system(rows, sigmas):
    return BlockSystem(shifted_domains(DiagonalScale(rows)), sigmas)


@pytest.fixture(scope="session")
def toy_a() -> ToeplitzArray:
    """d=1, rows (4),(6),(10); shifted boxes from level 2 on."""
    return ToeplitzArray(
        _system(
            ((4,), (6,), (10,)),
            (
                FullSymmetricFamily(1, 3),
                HybridFamily(2, 5, size=10),
                HybridFamily(3, 9, size=None),
            ),
        )
    )


@pytest.fixture(scope="session")
def toy_b() -> ToeplitzArray:
    """d=2, rows (2,2),(3,2),(5,2); increments too small to shift."""
    return ToeplitzArray(
        _system(
            ((2, 2), (3, 2), (5, 2)),
            (
                FullSymmetricFamily(1, 3),
                HybridFamily(2, 5, size=10),
                HybridFamily(3, 9, size=None),
            ),
        )
    )


@pytest.fixture(scope="session")
def toy_c() -> ToeplitzArray:
    """d=1, rows (4),(6),(14); a fatter level-3 census than toy A."""
    return ToeplitzArray(
        _system(
            ((4,), (6,), (14,)),
            (
                FullSymmetricFamily(1, 3),
                HybridFamily(2, 5, size=14),
                HybridFamily(3, 13, size=None),
            ),
        )
    )


@pytest.fixture(scope="session")
def toys(toy_a, toy_b, toy_c) -> tuple:
    return (toy_a, toy_b, toy_c)


@pytest.fixture(scope="session")
def k5_plan():
    """The stock plan: alphabet 5, dimension 2, entropy 3/10."""
    return make_plan(5, 2, Fraction(3, 10))


@pytest.fixture(scope="session")
def k5_array(k5_plan):
    return array_from_plan(k5_plan)


@pytest.fixture(scope="session")
def binary_pipeline():
    """Two letters, two dimensions, entropy 1/10 (blown up through 512)."""
    return entropy_pipeline(2, 2, Fraction(1, 10))
