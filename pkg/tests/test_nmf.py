import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from ghostspec.analysis import dominant_component, nmf


def test_rank_one_is_exact():
    rng = np.random.default_rng(0)
    w, h = rng.uniform(0.1, 2, 12), rng.uniform(0.1, 2, 40)
    V = np.outer(w, h)
    res = nmf(V, 1, seed=3, max_iter=20000, tol=0.0)
    assert res.residue_norm < 1e-6 * np.linalg.norm(V)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_basis_rows_factor_exactly(n):
    V = np.eye(n)
    res = nmf(V, n, seed=1, max_iter=20000, tol=0.0)
    assert res.residue_norm < 1e-6
    assert np.all(res.W >= 0) and np.all(res.H >= 0)


def assert_monotone(history, scale):
    # rounding slack: 1e-10 relative, plus a floor for residues already at eps * ||V||
    for a, b in zip(history, history[1:]):
        assert b <= a * (1 + 1e-10) + 1e-12 * scale


@settings(max_examples=60)
@given(hnp.arrays(float, st.tuples(st.integers(2, 10), st.integers(2, 15)), elements=st.floats(0, 1e3)),
       st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_monotone_and_nonnegative(V, r, seed):
    r = min(r, *V.shape)
    res = nmf(V, r, seed=seed, max_iter=200, tol=0.0)
    assert_monotone(res.history, np.linalg.norm(V))
    assert np.all(res.W >= 0) and np.all(res.H >= 0)
    assert res.residue_norm == pytest.approx(np.linalg.norm(V - res.W @ res.H), rel=1e-12, abs=1e-12)
    assert len(res.history) == res.iterations + 1


def test_stopping_rule():
    V = np.random.default_rng(2).random((8, 20))
    res = nmf(V, 2, seed=0, max_iter=100000, tol=1e-6)
    h = res.history
    assert res.iterations < 100000
    assert h[-2] - h[-1] <= 1e-6 * h[-2]
    assert all(a - b > 1e-6 * a for a, b in zip(h[:-2], h[1:-1]))


def test_deterministic():
    V = np.random.default_rng(2).random((8, 20))
    a, b = nmf(V, 3, seed=5, max_iter=50), nmf(V, 3, seed=5, max_iter=50)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.H, b.H)


@pytest.mark.parametrize("V,r", [
    (-np.ones((2, 2)), 1),
    (np.ones((2, 3)), 0),
    (np.ones((2, 3)), 3),
    (np.ones(4), 1),
    (np.array([[1.0, np.nan]]), 1),
])
def test_errors(V, r):
    with pytest.raises(ValueError):
        nmf(V, r, seed=0)


def test_dominant_component():
    W = np.array([[0.9, 0.05, 0.05], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0]])
    assert dominant_component(W, 0) == 0
    assert dominant_component(W, 1) == 2
    assert dominant_component(W, 2) == 0
