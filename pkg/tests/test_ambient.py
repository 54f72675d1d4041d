import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagflow.ambient import AmbientStructure, ambient_symplectic, apply_J

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def vectors(n):
    return arrays(np.float64, (2 * n,), elements=finite)


@pytest.mark.parametrize(
    "v, expected",
    [((1, 0), (0, 1)), ((0, 1), (-1, 0)), ((1, 2, 3, 4), (-3, -4, 1, 2))],
)
def test_apply_J_examples(v, expected):
    np.testing.assert_array_equal(apply_J(np.array(v, float)), expected)


def test_symplectic_examples():
    assert ambient_symplectic([1.0, 0.0], [0.0, 1.0]) == 1.0
    # u = dx2 + dy1, v = dx1 in (x1, x2, y1, y2)
    assert ambient_symplectic([0.0, 1.0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0]) == -1.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_J(np.ones(3))
    with pytest.raises(ValueError):
        ambient_symplectic(np.ones(2), np.ones(4))
    with pytest.raises(ValueError):
        AmbientStructure(2).apply_J(np.ones(2))
    with pytest.raises(ValueError):
        AmbientStructure(3)


def test_matrices_agree_with_action(rng):
    amb = AmbientStructure(2)
    v = rng.normal(size=4)
    u = rng.normal(size=4)
    np.testing.assert_allclose(amb.j_matrix @ v, amb.apply_J(v), atol=0)
    np.testing.assert_allclose(u @ amb.kahler_matrix @ v, amb.symplectic(u, v), rtol=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_kahler_axioms_bulk(n, rng):
    amb = AmbientStructure(n)
    u = rng.normal(size=(1000, 2 * n)) * 10.0 ** rng.integers(-5, 5, size=(1000, 1))
    v = rng.normal(size=(1000, 2 * n))
    Ju, Jv = amb.apply_J(u), amb.apply_J(v)
    assert np.array_equal(amb.apply_J(Ju), -u)
    assert np.array_equal(amb.inner(Ju, Jv), amb.inner(u, v))
    assert np.array_equal(amb.symplectic(u, v), -amb.symplectic(v, u))


@settings(max_examples=200)
@given(st.data())
def test_kahler_axioms_property(data):
    n = data.draw(st.sampled_from([1, 2]))
    amb = AmbientStructure(n)
    u, v = data.draw(vectors(n)), data.draw(vectors(n))
    assert amb.inner(amb.apply_J(u), amb.apply_J(v)) == amb.inner(u, v)
    assert amb.symplectic(u, v) == -amb.symplectic(v, u)
    assert amb.symplectic(u, u) == 0.0


def test_lattice_validation():
    assert AmbientStructure(1, lattice=(1, None)).lattice == (1.0, None)
    with pytest.raises(ValueError):
        AmbientStructure(1, lattice=(1.0,))
