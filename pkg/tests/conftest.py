import numpy as np
import pytest

from canonical_gbdt import ExplicitFamilyParams, HamiltonianField


@pytest.fixture
def rng():
    return np.random.default_rng(20070325)


@pytest.fixture
def base_H():
    return HamiltonianField.base(1.0)


@pytest.fixture
def example1():
    """b = i, g = 1, h = 0, U = I on [0, 1]."""
    return ExplicitFamilyParams([1j], [1.0], l=1.0)
