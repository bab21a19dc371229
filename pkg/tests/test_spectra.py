import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from basilica import decimation, numerics, spectra
from basilica.errors import DomainError, RangeError


def test_linearizer_basics():
    assert spectra.linearizer(0.0) == 0.0
    h = 1e-6
    assert spectra.linearizer(h) / h == pytest.approx(1.0, abs=1e-4)
    assert abs(spectra.linearizer_iterates(0.5, 30) - spectra.linearizer_iterates(0.5, 40)) < 1e-12
    with pytest.raises(DomainError):
        spectra.psi(3.0)


@given(st.floats(0.0, 2.25))
def test_functional_equation(x):
    assert spectra.linearizer(spectra.psi(x)) == pytest.approx(spectra.linearizer(x) / 6, abs=1e-10)


def test_psi_is_inverse_branch():
    for x in (0.0, 0.4, 1.7, 2.25):
        y = spectra.psi(x)
        assert decimation.rmap(y) == pytest.approx(x, abs=1e-14)
        assert y <= 0.75


def test_first_dirichlet_atom():
    first = spectra.dirichlet_spectrum(1)
    assert len(first) == 1
    atom = first[0]
    assert atom.mult == 2 and atom.n0 == 1 and atom.m == 0
    assert atom.lam == pytest.approx(-48 * spectra.linearizer(0.5), rel=1e-14)


def test_multiplicity_bookkeeping():
    atoms = spectra.dirichlet_spectrum(6)
    assert all(a.mult == 2 * 3 ** (a.n0 - a.m - 1) for a in atoms)
    assert all(a.branch == "" or a.branch.endswith(decimation.PLUS) for a in atoms)
    assert spectra.dirichlet_total_multiplicity(6) == 2 * 3**6 - 2 * 2**6


def test_growth_along_n0():
    atoms = spectra.dirichlet_spectrum(6)
    by_key = {}
    for a in atoms:
        by_key.setdefault((a.m, a.branch), []).append((a.n0, abs(a.lam)))
    for series in by_key.values():
        lams = [lam for _, lam in sorted(series)]
        assert all(b > a for a, b in zip(lams, lams[1:]))


def test_atoms_match_renormalized_iteration():
    for a in spectra.dirichlet_spectrum(4):
        w = decimation.apply_word(0.5, a.branch, 0.25)
        assert spectra.renormalized_iteration(a.n0, w) == pytest.approx(a.lam, rel=1e-9)


def test_neumann_candidates_are_tagged():
    cands = spectra.neumann_candidates(3)
    assert all(c.kind == spectra.NEUMANN for c in cands)
    assert cands[0].lam == 0.0


def test_weyl_fit_scale_invariance():
    vals = decimation.graph_spectrum(6).values() * 6.0**6
    window = spectra.weyl_window(vals, spectra.SCALE)
    fit = spectra.weyl_fit(vals, *window)
    doubled = spectra.weyl_fit(2 * vals, 2 * window[0], 2 * window[1])
    assert doubled.slope == pytest.approx(fit.slope, abs=1e-12)
    assert doubled.intercept != pytest.approx(fit.intercept)
    with pytest.raises(RangeError):
        spectra.weyl_fit(vals[:10], 0, np.inf)


def test_counting_function():
    lam, N = spectra.counting_function([1.0, 2.0, 2.0, 5.0])
    assert lam.tolist() == [1.0, 2.0, 5.0] and N.tolist() == [1, 3, 4]


def test_graphdirected_ground_state():
    L, M = spectra.graphdirected_problem(6)
    decomp = numerics.gen_eig(L, M)
    assert abs(decomp.values[0]) < 1e-9
    v = decomp.vectors[:, 0]
    assert np.allclose(v, v[0])


def test_graphdirected_normalizations_agree_up_to_scale():
    phys = spectra.graphdirected_spectrum(7)
    graph = spectra.graphdirected_spectrum(7, normalization=spectra.GRAPH)
    factor = graph[1] / phys[1]
    assert np.allclose(graph[1:], factor * phys[1:], rtol=1e-9)


def test_symbolic_dimension():
    s, ds = spectra.symbolic_ds()
    assert (s, ds) == (sp.Rational(2, 3), sp.Rational(4, 3))
    s3, ds3 = spectra.symbolic_ds([[3]], 6)
    assert sp.simplify(ds3 - sp.log(9) / sp.log(6)) == 0
    assert float(s3) == pytest.approx(math.log(3) / math.log(6))
