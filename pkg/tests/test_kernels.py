import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from permclass.kernels import (Kernel, gram, kernel_column, kernel_eval,
                               kernel_self)


def test_gaussian_zero_distance_is_one():
    k = Kernel.gaussian(1.0)
    assert kernel_eval(k, [0.3, 0.7], [0.3, 0.7]) == 1.0


def test_exponential_unit_distance():
    k = Kernel.exponential(1.0)
    v = kernel_eval(k, [0.0], [1.0])
    assert v == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_diagonal_indicator_values():
    k = Kernel.diagonal_indicator(default=2.0)
    assert kernel_eval(k, [0.0], [1.0]) == 0.0
    assert kernel_eval(k, [1.0], [1.0]) == 2.0


def test_diagonal_indicator_table_lookup():
    k = Kernel.diagonal_indicator(default=1.0, table={(2.0,): 5.0})
    assert kernel_eval(k, [2.0], [2.0]) == 5.0
    assert kernel_eval(k, [3.0], [3.0]) == 1.0


def test_dimension_mismatch_raises():
    k = Kernel.gaussian(1.0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        kernel_eval(k, [0.0, 1.0], [0.0])
    with pytest.raises(ValueError, match="dimension mismatch"):
        kernel_column(k, [0.0], np.zeros((3, 2)))


def test_nonpositive_tau_raises():
    with pytest.raises(ValueError, match="tau"):
        Kernel.gaussian(0.0)
    with pytest.raises(ValueError, match="tau"):
        Kernel.exponential(-1.0)


def test_gram_constant_all_ones():
    g = gram(Kernel.constant(1.0), np.zeros((3, 1)))
    assert np.array_equal(g.entries, np.ones((3, 3)))


def test_gram_gaussian_two_points():
    g = gram(Kernel.gaussian(1.0), np.array([[0.0], [1.0]]))
    e = math.exp(-1.0)
    assert np.allclose(g.entries, [[1.0, e], [e, 1.0]], rtol=1e-15)
    assert g.entries[0, 0] == 1.0 and g.entries[1, 1] == 1.0


def test_gram_empty_point_list():
    g = gram(Kernel.gaussian(1.0), np.zeros((0, 2)))
    assert g.entries.shape == (0, 0)
    from permclass.exact import per_alpha_exact
    assert per_alpha_exact(g.entries, 1.0) == 1.0


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_gram_symmetric_nonneg(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3)) * 2.0
    for k in (Kernel.gaussian(0.7), Kernel.exponential(1.3)):
        g = gram(k, pts)
        assert np.array_equal(g.entries, g.entries.T)
        assert (g.entries >= 0).all()
        assert np.array_equal(g.diagonal, np.ones(n))


def test_gram_matches_eval_and_column(rng):
    pts = rng.normal(size=(5, 2))
    k = Kernel.exponential(0.8)
    g = gram(k, pts)
    for i in range(5):
        col = kernel_column(k, pts[i], pts)
        assert np.allclose(col, g.entries[:, i], rtol=1e-15)
        for j in range(5):
            assert g.entries[i, j] == pytest.approx(
                kernel_eval(k, pts[i], pts[j]), rel=1e-15)


def test_block_constant_structure():
    pts = [(0.0,), (1.0,), (2.0,), (3.0,)]
    k = Kernel.block_constant(
        assignment={pts[0]: "a", pts[1]: "a", pts[2]: "b", pts[3]: "b"},
        levels={"a": 0.5, "b": 2.0})
    g = gram(k, np.array(pts))
    expect = np.array([[0.5, 0.5, 0.0, 0.0],
                       [0.5, 0.5, 0.0, 0.0],
                       [0.0, 0.0, 2.0, 2.0],
                       [0.0, 0.0, 2.0, 2.0]])
    assert np.array_equal(g.entries, expect)


def test_projection_kernel_requires_nonneg():
    with pytest.raises(ValueError, match="nonnegative"):
        Kernel.projection([[0.5, -0.5], [-0.5, 0.5]], [(0.0,), (1.0,)])


def test_projection_kernel_lookup():
    m = [[0.5, 0.5], [0.5, 0.5]]
    k = Kernel.projection(m, [(0.0,), (1.0,)])
    assert kernel_eval(k, [0.0], [1.0]) == 0.5
    with pytest.raises(ValueError, match="ground set"):
        kernel_eval(k, [9.0], [1.0])


def test_kernel_self_matches_eval(rng):
    t = rng.normal(size=2)
    for k in (Kernel.gaussian(1.1), Kernel.exponential(0.4), Kernel.constant(2.5)):
        assert kernel_self(k, t) == kernel_eval(k, t, t)


def test_serialization_round_trip():
    kernels = [
        Kernel.gaussian(0.7),
        Kernel.exponential(2.0),
        Kernel.constant(1.5),
        Kernel.diagonal_indicator(default=2.0, table={(1.0, 2.0): 3.0}),
        Kernel.block_constant({(0.0,): 0, (1.0,): 1}, levels={0: 1.0, 1: 2.0}),
        Kernel.projection([[1.0, 0.0], [0.0, 1.0]], [(0.0,), (1.0,)]),
    ]
    import json
    for k in kernels:
        blob = json.dumps(k.to_dict())
        back = Kernel.from_dict(json.loads(blob))
        assert back.to_dict() == k.to_dict()
        assert back.family is k.family
