import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bevdet.boxes import Box3D, wrap_angle
from bevdet.errors import InvalidParameterError


@given(st.floats(-100, 100))
def test_wrap_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9) and math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_pi_boundary():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


@pytest.mark.parametrize(
    "kw",
    [dict(dims=(0, 1, 1)), dict(score=1.5), dict(center=(math.nan, 0, 0)), dict(center=(0, 0))],
)
def test_invalid(kw):
    base = dict(center=(0, 0, 0), dims=(1, 1, 1))
    base.update(kw)
    with pytest.raises(InvalidParameterError):
        Box3D(**base)


def test_footprint_and_corners():
    b = Box3D(center=(1, 2, 0), dims=(2, 4, 2), yaw=math.pi / 2)
    fp = b.footprint()
    np.testing.assert_allclose(sorted(map(tuple, np.round(fp, 12))), sorted([(0, 0), (2, 0), (0, 4), (2, 4)]), atol=1e-12)
    c = b.corners()
    assert c.shape == (8, 3) and c[:, 2].min() == -1 and c[:, 2].max() == 1


def test_dict_roundtrip():
    b = Box3D(center=(1, 2, 3), dims=(1, 2, 3), yaw=0.1, velocity=(1, 2), class_id=2, attribute_id=1, score=0.3)
    assert Box3D.from_dict(b.to_dict()) == b
