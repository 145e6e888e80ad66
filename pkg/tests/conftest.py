import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core.hitchin import ADAPTED_PHI, TypeIIAStructure  # noqa: E402
from core.symbol import point_frame  # noqa: E402
from presets import preset_registry  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def standard_frame():
    return point_frame()


@pytest.fixture(scope="session")
def adapted_structure(standard_frame):
    return TypeIIAStructure.build(ADAPTED_PHI, standard_frame, check_closed=False)


@pytest.fixture(scope="session")
def nil():
    return preset_registry.get("nilmanifold")


@pytest.fixture(scope="session")
def solv():
    return preset_registry.get("solvmanifold")


@pytest.fixture(scope="session")
def torus():
    return preset_registry.get("torus")


def random_form(rng, degree, density=0.5, indices=None):
    """稀疏随机形式；indices 限定可出现的余标架编号。"""
    from core.exterior import Form
    from common.indices import basis_tuples

    allowed = set(indices) if indices is not None else None
    terms = {}
    for index in basis_tuples(degree):
        if allowed is not None and not set(index) <= allowed:
            continue
        if rng.random() < density:
            terms[index] = float(rng.standard_normal())
    return Form(degree, terms)
