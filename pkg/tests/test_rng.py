import numpy as np

from dmdfusion.rng import child_rng


def test_streams_are_stable_and_distinct():
    a = child_rng(7, "noise", 0).standard_normal(4)
    assert np.array_equal(a, child_rng(7, "noise", 0).standard_normal(4))
    assert not np.array_equal(a, child_rng(7, "noise", 1).standard_normal(4))
    assert not np.array_equal(a, child_rng(7, "other", 0).standard_normal(4))
    assert not np.array_equal(a, child_rng(8, "noise", 0).standard_normal(4))
