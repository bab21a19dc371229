import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basilica import decimation as dec
from basilica.cells import vertex_count
from basilica.decimation import DecimationParams
from basilica.errors import ExceptionalCollisionError, InputError, NoRealPreimageError

QUARTER = DecimationParams(0.25, 0.25)
R7 = math.sqrt(7)


def as_dict(spec):
    return {round(z, 12): k for z, k in spec.merged(1e-9)}


def test_rmap_quarter():
    for z in (0.0, 0.3, 1.1):
        assert dec.rmap(z) == pytest.approx(6 * z - 4 * z * z)


def test_preimages_examples():
    assert dec.preimages(0.0) == pytest.approx((0.0, 1.5))
    assert dec.preimages(0.5) == pytest.approx(((3 - R7) / 4, (3 + R7) / 4))
    with pytest.raises(NoRealPreimageError):
        dec.preimages(10.0)


@given(st.floats(0.01, 0.49), st.floats(-1.0, 2.0))
def test_preimages_invert_rmap(p, w):
    b = 2 * p + 1
    if b * b < 4 * p * w:
        return
    for z in dec.preimages(w, p):
        assert dec.rmap(z, p) == pytest.approx(w, abs=1e-9)


def test_params_validated():
    with pytest.raises(InputError):
        DecimationParams(0.5, 0.25)
    with pytest.raises(InputError):
        DecimationParams(0.25, 1.0)


def test_level_zero_spectrum():
    assert as_dict(dec.graph_spectrum(0, QUARTER)) == {0.0: 1, 0.5: 1}


def test_level_one_spectrum():
    got = as_dict(dec.graph_spectrum(1, QUARTER))
    want = {0.5: 2, 0.0: 1, 1.5: 1, round((3 - R7) / 4, 12): 1, round((3 + R7) / 4, 12): 1}
    assert got == want


def test_level_three_half_multiplicity():
    assert as_dict(dec.graph_spectrum(3, QUARTER))[0.5] == 18


@pytest.mark.parametrize("p, q", [(0.25, 0.25), (0.1, 0.7), (0.3, 0.2), (0.45, 0.9)])
def test_formula_matches_oracle(p, q):
    params = DecimationParams(p, q)
    for n in range(0, 5):
        spec = dec.graph_spectrum(n, params)
        assert spec.total_multiplicity() == 2 * 3**n
        assert np.abs(spec.values() - dec.walk_matrix(n, params).eigenvalues()).max() < 1e-8


def test_walk_examples():
    assert np.allclose(dec.walk_matrix(0, QUARTER).eigenvalues(), [0, 0.5])
    u, v, wu, wv = dec.arc_weights(1, DecimationParams(0.25, 0.5))
    from_a = np.concatenate([wu[u == 0], wv[v == 0]])
    assert from_a.size == 4 and np.all(from_a == 0.25)
    for n in range(0, 6):
        assert np.allclose(dec.walk_matrix(n, QUARTER).matrix.sum(axis=1), 0)


def test_walk_is_reversible():
    W = dec.walk_matrix(3, DecimationParams(0.15, 0.6))
    flux = W.pi[:, None] * W.matrix
    assert np.allclose(flux, flux.T)


def test_eigenfunction_examples():
    spec = dec.graph_spectrum(1, QUARTER)
    zero = next(a for a in spec if a.z == 0.0)
    f = dec.eigenfunction(zero, 1, QUARTER)
    assert np.allclose(f, f[0, 0])
    half = next(a for a in spec if a.z == 0.5)
    F = dec.eigenfunction(half, 1, QUARTER)
    assert F.shape[1] == 2 and np.linalg.matrix_rank(F) == 2
    assert np.abs(F[:2]).max() < 1e-12
    spec2 = dec.graph_spectrum(2, QUARTER)
    atom = next(a for a in spec2 if abs(a.z - (3 - R7) / 4) < 1e-12)
    G = dec.eigenfunction(atom, 2, QUARTER)
    M = dec.walk_matrix(2, QUARTER).matrix
    assert np.abs(M @ G - atom.z * G).max() <= 1e-8


def test_every_atom_has_an_eigenbasis():
    spec = dec.graph_spectrum(3, QUARTER)
    cols = np.hstack([dec.eigenfunction(a, 3, QUARTER) for a in spec])
    assert cols.shape == (vertex_count(3), vertex_count(3))
    assert np.linalg.matrix_rank(cols) == vertex_count(3)


def test_extend_rejects_exceptional_value():
    with pytest.raises(ExceptionalCollisionError):
        dec.extend(np.ones(2), 1, 0.5, QUARTER)


def test_ids_examples():
    atoms, _ = dec.ids(3)
    assert [a.weight for a in atoms if a.m == 0] == [Fraction(2, 3)]
    level3 = [a for a in atoms if a.m == 3]
    assert len(level3) == 8 and all(a.weight == Fraction(2, 81) for a in level3)


def test_empirical_ids_matches_vertex_fractions():
    # multiplicity / |V_n| of an atom born m levels back is exactly 3^(-m-1)
    predicted = {round(a.z, 9): a.weight for a in dec.ids(5, normalized=True)[0]}
    for atom, frac in dec.empirical_ids(6, QUARTER):
        assert frac == predicted[round(atom.z, 9)]


@given(st.floats(-0.4, 1.9).filter(lambda z: abs(z - 0.5) > 1e-3))
def test_spectral_similarity(z):
    assert dec.spectral_similarity_defect(2, z, QUARTER) < 1e-8
