import numpy as np
import pytest

from ensemble_reduction.contingency import NOISE, build_contingency


def test_table_shape():
    t = build_contingency(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1]))
    arr = t.as_array()
    assert arr.shape == (2, 2)
    assert arr[0, 0] == 1
    assert arr.sum() == 4
    assert t.n == 4


def test_pair_counts_by_hand():
    pc = build_contingency(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1])).pair_counts()
    assert pc.total == 6
    assert pc.same_a == 2
    assert pc.same_b == 3
    assert pc.same_both == 1
    assert pc.agreeing == 3


def test_noise_points_become_singletons():
    t = build_contingency(np.array([NOISE, NOISE, 0]), np.array([0, 0, 0]))
    assert t.as_array().shape == (3, 1)
    assert t.pair_counts().same_a == 0


def test_misaligned_labelings_raise():
    with pytest.raises(ValueError):
        build_contingency(np.array([0, 1]), np.array([0, 1, 2]))
