import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basilica import forms, geometry
from basilica.cells import CellAddress, vertex_count
from basilica.errors import DomainError, SchemeValidationError

A = CellAddress.of
DYADIC = forms.Dyadic()
CONF = forms.Conformal(0.5)


def test_dyadic_validates():
    report = forms.validate(DYADIC, 6)
    assert report.ok and report.summable
    assert report.max_resistance == [2.0**-k for k in range(1, 7)]


def test_conformal_validates():
    report = forms.validate(CONF, 6)
    assert report.ok and report.summable
    assert CONF.resistance(A(1, 1)) == 0.25


def test_additivity_violation_names_address():
    base = forms.Dyadic()
    scheme = forms.CustomScheme(lambda a: base.resistance(a.parent) if a == A(1, 1) else base.resistance(a))
    report = forms.validate(scheme, 4)
    assert not report.ok
    assert str(report.failure.address) == "1.2"
    with pytest.raises(SchemeValidationError):
        forms.validate(scheme, 4, raise_on_failure=True)


def test_non_summable_flagged():
    report = forms.validate(forms.non_summable_scheme(), 8)
    assert report.ok and not report.summable


def test_from_splits_defaults_reproduce_dyadic():
    custom = forms.CustomScheme.from_splits()
    for k in range(1, 6):
        assert np.allclose(custom.resistances(k), DYADIC.resistances(k), equal_nan=True)


@pytest.mark.parametrize("scheme", [DYADIC, CONF])
def test_level_zero_laplacian(scheme):
    assert np.array_equal(forms.laplacian(scheme, 0), [[4, -4], [-4, 4]])


def test_kernel_dimension_one():
    for n in range(0, 7):
        vals = np.linalg.eigvalsh(forms.laplacian(CONF, n))
        assert np.sum(np.abs(vals) < 1e-9) == 1


def test_trace_form():
    assert np.allclose(forms.trace_form(DYADIC, 3, 2), forms.laplacian(DYADIC, 2), atol=1e-9)
    assert np.array_equal(forms.trace_form(CONF, 3, 3), forms.laplacian(CONF, 3))
    assert np.allclose(forms.trace_form(CONF, 4, 0), [[4, -4], [-4, 4]], atol=1e-9)


def test_effective_resistance_examples():
    assert forms.effective_resistance(DYADIC, 3, 0, 1) == pytest.approx(0.25, abs=1e-14)
    assert forms.effective_resistance(DYADIC, 3, 5, 5) == 0.0
    for n in range(1, 6):
        assert abs(forms.effective_resistance(CONF, n, 0, 1) - 0.25) < 1e-9


def test_local_metric_examples():
    assert forms.local_metric(DYADIC, 4, 0, 1) == 0.5
    assert forms.local_metric(DYADIC, 4, 7, 7) == 0.0
    assert forms.local_metric(DYADIC, 4, 0, 1) / 2 == pytest.approx(forms.effective_resistance(DYADIC, 4, 0, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 53), st.integers(0, 53))
def test_local_metric_level_independent(x, y):
    assert forms.local_metric(CONF, 3, x, y) == pytest.approx(forms.local_metric(CONF, 5, x, y))


def test_constants_extend_to_constants():
    assert np.allclose(forms.harmonic_extension(CONF, np.full(6, 2.5), 1, 4), 2.5)


def test_dyadic_midpoints():
    f = forms.harmonic_extension(DYADIC, [0.0, 1.0], 0, 1)
    assert f[2] == f[3] == 0.5
    assert f[4] == 0.0 and f[5] == 1.0


def test_extension_matches_minimizer():
    rng = np.random.default_rng(11)
    for m in (0, 1, 2):
        b = rng.standard_normal(vertex_count(m))
        h = forms.harmonic_extension(CONF, b, m, 5)
        assert np.abs(h - forms.minimizer(CONF, 5, b, m)).max() < 1e-10


def test_energy_and_normal_derivative():
    f = forms.harmonic_extension(DYADIC, [0.0, 1.0], 0, 3)
    assert forms.energy(DYADIC, 3, f) == pytest.approx(4.0)
    assert forms.normal_derivative(DYADIC, 3, f, 0) == pytest.approx(-4.0)
    assert forms.normal_derivative(DYADIC, 3, f, 1) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        forms.normal_derivative(DYADIC, 3, f, 2)


def test_measures():
    for h in (1, 2, 3, 4):
        assert forms.bernoulli(A(h)) == Fraction(1, 4)
    assert forms.balanced(A(1)) == Fraction(1, 6)
    assert forms.balanced(A(3)) == Fraction(1, 3)
    assert forms.measure(A(3), forms.LOCAL_RESISTANCE, CONF, "circle") == 2**-0.5
    assert forms.measure(A(3), forms.LOCAL_RESISTANCE, DYADIC, "circle") == 0.5
    assert forms.central_circle_length(CONF) == 1.0
    with pytest.raises(DomainError):
        forms.measure(A(3), forms.LOCAL_RESISTANCE, CONF)


def test_measures_are_additive():
    for k in range(1, 5):
        for kind in (forms.BERNOULLI, forms.BALANCED):
            rows = forms.measure_table(k, kind)
            assert sum(v for _, _, v in rows) == 1


def test_spine_lengths_add_up():
    for addr in (A(1), A(3, 2), A(4, 1, 1)):
        kids = addr.children()
        total = sum(forms.spine_length(c, CONF) for c in kids[:2])
        assert math.isclose(total, forms.spine_length(addr, CONF), rel_tol=1e-12)


def test_energy_of_constant_is_zero():
    assert forms.energy(CONF, 4, np.full(vertex_count(4), 3.0)) == 0.0


@pytest.mark.parametrize("scheme", [DYADIC, CONF])
def test_energy_nondecreasing_in_level(scheme):
    pos = geometry.vertex_positions(6)
    g = np.sin(2 * pos.real) + np.cos(3 * pos.imag)
    energies = [forms.energy(scheme, n, g[: vertex_count(n)]) for n in range(0, 6)]
    assert all(a <= b + 1e-12 for a, b in zip(energies, energies[1:]))
