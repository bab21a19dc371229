from fractions import Fraction

import numpy as np
import pytest

from basilica import cells, forms, graphdir
from basilica.errors import CapacityError
from basilica.graphdir import A, B


def test_seed():
    G = graphdir.seed_graph()
    assert G.counts() == (1, 1)
    assert G.n_vertices == 1
    masses = {e.label: e.mass for e in G.edges}
    assert masses == {A: Fraction(1, 3), B: Fraction(2, 3)}


def test_first_substitution():
    G = graphdir.substitute(graphdir.seed_graph())
    assert G.n_vertices == 2
    assert G.counts() == (2, 2)
    a_edges = [e for e in G.edges if e.label == A]
    b_edges = [e for e in G.edges if e.label == B]
    assert all(not e.is_loop and {e.u, e.v} == {0, 1} for e in a_edges)
    assert sorted(e.u for e in b_edges if e.is_loop) == [0, 1]


def test_second_substitution():
    G = graphdir.build_labeled(2)
    assert G.n_vertices == 4
    assert G.counts() == (4, 4)
    central_b = [e for e in G.edges if e.label == B and not e.is_loop]
    assert len(central_b) == 2 and all({e.u, e.v} == {0, 1} for e in central_b)
    outer = {2, 3}
    a_edges = [e for e in G.edges if e.label == A]
    for w in outer:
        assert sum(1 for e in a_edges if w in (e.u, e.v)) == 2
        assert any(e.is_loop and e.u == w and e.label == B for e in G.edges)


def test_counting_matrix():
    M, rho = graphdir.counting_matrix()
    assert rho == 2
    assert np.array_equal(M, [[0, 2], [1, 1]])


@pytest.mark.parametrize("n", range(0, 13))
def test_predicted_counts(n):
    assert graphdir.build_labeled(n).counts() == graphdir.predicted_counts(n)


def test_masses_match_balanced_measure():
    for G in graphdir.graphdir_sequence(8):
        assert G.total_mass() == 1
        for e in G.edges:
            if e.address is not None:
                assert e.mass == forms.balanced(e.address)


def test_a_edges_follow_conformal_scheme():
    conf = forms.Conformal(0.5)
    G = graphdir.build_labeled(7)
    for e in G.edges:
        if not e.is_loop:
            assert e.resistance == pytest.approx(conf.resistance(e.address), rel=1e-12)
        if e.label == A and not e.is_loop:
            assert e.resistance == pytest.approx(graphdir.a_resistance(e.generation))


def test_vertex_ids_are_global():
    G = graphdir.build_labeled(6)
    assert len(set(G.global_ids)) == G.n_vertices
    assert max(G.global_ids) < cells.vertex_count(6)


def test_capacity():
    with pytest.raises(CapacityError):
        graphdir.graphdir_sequence(12, max_level=11)


def test_json_document():
    doc = graphdir.build_labeled(1).to_dict()
    assert {e["label"] for e in doc["edges"]} == {A, B}
    assert all("/" in e["mass"] for e in doc["edges"])
