import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import enumerated_dtw, recursive_dtw
from wristsig.dtw import dtw_batch, dtw_distance
from wristsig.errors import EmptySequence, NonFiniteInput

seqs = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12)


def test_examples():
    assert dtw_distance([1, 2, 3], [1, 3]).distance == 1.0
    assert enumerated_dtw([1, 2, 3], [1, 3]) == 1.0
    assert dtw_distance([4.5], [1.0]).distance == 3.5
    assert dtw_distance([3, 1, 4, 1, 5], [3, 1, 4, 1, 5]).distance == 0.0


def test_errors():
    with pytest.raises(EmptySequence):
        dtw_distance([], [1.0])
    with pytest.raises(NonFiniteInput):
        dtw_distance([1.0, math.nan], [1.0])
    with pytest.raises(NonFiniteInput):
        dtw_batch(np.array([[np.inf]]), np.array([[0.0]]))


def test_matches_path_enumeration_small():
    values = (0, 1, 2)
    all_seqs = [s for n in range(1, 5) for s in itertools.product(values, repeat=n)]
    rng = np.random.default_rng(0)
    for i in rng.choice(len(all_seqs) ** 2, size=400, replace=False):
        a, b = all_seqs[i // len(all_seqs)], all_seqs[i % len(all_seqs)]
        assert dtw_distance(a, b).distance == enumerated_dtw(a, b)


@given(seqs, seqs)
def test_symmetry_and_recursion_oracle(a, b):
    d = dtw_distance(a, b).distance
    assert d == dtw_distance(b, a).distance
    assert d >= 0
    assert d == recursive_dtw(tuple(a), tuple(b))


@given(seqs, seqs, st.floats(-100, 100, allow_nan=False))
def test_identical_suffix_never_increases(a, b, v):
    assert dtw_distance(a + [v], b + [v]).distance <= dtw_distance(a, b).distance


@given(seqs)
def test_zero_iff_zero_cost_alignment(a):
    # repeating elements keeps a zero-cost alignment available
    stretched = [x for x in a for _ in range(2)]
    assert dtw_distance(a, stretched).distance == 0.0
    shifted = [x + 1.0 for x in a]
    assert dtw_distance(a, shifted).distance > 0.0


def test_path_diagnostic():
    res = dtw_distance([1, 2, 3], [1, 3], return_path=True)
    assert res.distance == 1.0
    assert res.path[0] == (0, 0) and res.path[-1] == (2, 1)
    assert res.path_length == len(res.path) >= 3
    assert sum(abs([1, 2, 3][i] - [1, 3][j]) for i, j in res.path) == 1.0


@given(seqs, seqs)
def test_path_cost_equals_distance(a, b):
    res = dtw_distance(a, b, return_path=True)
    assert res.path_length >= max(len(a), len(b))
    assert res.distance == dtw_distance(a, b).distance
    assert math.isclose(sum(abs(a[i] - b[j]) for i, j in res.path), res.distance, rel_tol=1e-12, abs_tol=1e-12)


def test_batch_equals_scalar_exactly(rng):
    a = rng.normal(size=(5000, 20))
    b = rng.normal(size=(5000, 17))
    out = dtw_batch(a, b)
    for i in range(0, 5000, 97):
        assert out[i] == dtw_distance(a[i], b[i]).distance


def test_unit_impulse_against_zeros():
    a = np.zeros(20)
    a[0] = 1.0
    assert dtw_distance(a, np.zeros(20)).distance == 1.0
