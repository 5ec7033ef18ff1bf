import json

import pytest

from ringlaw.linalg import make_rng
from ringlaw.measure import DiscreteMeasure, reference_measure


@pytest.fixture()
def two_point():
    """1/2 delta_1 + 1/2 delta_2, the reference singular value profile"""
    return DiscreteMeasure([1.0, 2.0], [0.5, 0.5])


@pytest.fixture()
def bernoulli():
    """symmetric Bernoulli measure 1/2 delta_-1 + 1/2 delta_1"""
    return DiscreteMeasure([-1.0, 1.0], [0.5, 0.5])


@pytest.fixture(scope="session")
def quarter_circle():
    """quarter circle law with 2000 atoms; its single ring law is the circular law"""
    return reference_measure("quarter_circle", 2000)


@pytest.fixture()
def rng():
    return make_rng(20240611)


@pytest.fixture()
def write_config(tmp_path):
    def _write_config(cfg, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return str(path)

    return _write_config
