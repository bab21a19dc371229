"""Acceptance suite: ten end-to-end criteria at fixed tolerances.

Each criterion is a function returning ``(ok, detail)``; the pytest wrapper
records a PASS/FAIL line that ``conftest.py`` prints in the terminal summary.
Run this file directly to get the same lines without pytest.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from basilica import decimation, forms, geometry, numerics, spectra
from basilica.cells import CellAddress, vertex_count
from basilica.decimation import DecimationParams

QUARTER = DecimationParams(0.25, 0.25)
SCHEMES = (forms.Dyadic(), forms.Conformal(0.5))

RESULTS: dict[int, tuple[str, bool, str]] = {}


def _clusters(values: np.ndarray, tol: float) -> list[tuple[float, int]]:
    out: list[list] = []
    for x in np.sort(values):
        if out and abs(x - out[-1][0]) <= tol:
            out[-1][1] += 1
        else:
            out.append([x, 1])
    return [(z, k) for z, k in out]


def decimation_oracle() -> tuple[bool, str]:
    start = time.perf_counter()
    worst, ok = 0.0, True
    for n in range(1, 6):
        spec = decimation.graph_spectrum(n, QUARTER)
        oracle = decimation.walk_matrix(n, QUARTER).eigenvalues()
        worst = max(worst, float(np.abs(spec.values() - oracle).max()))
        formula_mults = [k for _, k in spec.merged(1e-9)]
        oracle_mults = [k for _, k in _clusters(oracle, 1e-8)]
        ok &= formula_mults == oracle_mults
        ok &= spec.total_multiplicity() == 2 * 3**n == oracle.size
    elapsed = time.perf_counter() - start
    ok &= worst < 1e-8 and elapsed < 60
    return ok, f"max diff {worst:.2e}, multiplicities {'exact' if ok else 'mismatch'}, {elapsed:.1f}s"


def level_one_closed_form() -> tuple[bool, str]:
    r7 = math.sqrt(7)
    expected = np.sort([0, (3 - r7) / 4, 0.5, 0.5, (3 + r7) / 4, 1.5])
    formula = decimation.graph_spectrum(1, QUARTER).values()
    oracle = decimation.walk_matrix(1, QUARTER).eigenvalues()
    err = max(np.abs(formula - expected).max(), np.abs(oracle - expected).max())
    return err < 1e-10, f"max error {err:.2e}"


def trace_compatibility() -> tuple[bool, str]:
    worst = 0.0
    for scheme in SCHEMES:
        for n in range(1, 7):
            reduced = numerics.schur(forms.laplacian(scheme, n), np.arange(vertex_count(n - 1)))
            worst = max(worst, float(np.abs(reduced - forms.laplacian(scheme, n - 1)).max()))
    return worst < 1e-9, f"max entry defect {worst:.2e}"


def _exact_resistance(n: int, x: int, y: int) -> sp.Rational:
    net = forms.network(forms.Dyadic(), n)
    L = sp.zeros(net.n_vertices, net.n_vertices)
    _, u, v, r = net.arcs()
    for a, b, res in zip(u.tolist(), v.tolist(), r.tolist()):
        c = 1 / sp.Rational(res)
        L[a, a] += c
        L[b, b] += c
        L[a, b] -= c
        L[b, a] -= c
    keep = [i for i in range(net.n_vertices) if i != x]
    rhs = sp.zeros(len(keep), 1)
    rhs[keep.index(y)] = 1
    sol = L.extract(keep, keep).LUsolve(rhs)
    return sol[keep.index(y)]


def metric_inequality() -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    ok = True
    for scheme in SCHEMES:
        net = forms.network(scheme, 6)
        pairs = rng.integers(0, net.n_vertices, size=(200, 2))
        R = net.resistance_table(pairs)
        sources = sorted(set(pairs[:, 0].tolist()))
        table = net.local_metric_table(sources)
        row = {x: i for i, x in enumerate(sources)}
        S = np.array([table[row[x], y] for x, y in pairs])
        ok &= bool(np.all(0.5 * S <= R) and np.all(R <= S + 1e-9))
    dyadic = forms.network(forms.Dyadic(), 6)
    S01 = dyadic.local_metric(0, 1)
    R01 = dyadic.effective_resistance(0, 1)
    exact = _exact_resistance(3, 0, 1)
    ok &= S01 == 0.5 and exact == sp.Rational(1, 4) and abs(R01 - 0.25) < 1e-12
    return ok, f"S/2 <= R <= S on 400 pairs; R(a,-a) = {exact} in rational arithmetic at n = 3, float {R01!r} at n = 6, S(a,-a) = {S01}"


def harmonic_extension() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    ext_err = energy_err = gg_err = 0.0
    for scheme in SCHEMES:
        for m in range(0, 4):
            boundary = rng.standard_normal(vertex_count(m))
            h = forms.harmonic_extension(scheme, boundary, m, 5)
            ext_err = max(ext_err, float(np.abs(h - forms.minimizer(scheme, 5, boundary, m)).max()))
            energies = [
                forms.energy(scheme, k, forms.harmonic_extension(scheme, boundary, m, k)) for k in range(m, 7)
            ]
            energy_err = max(energy_err, max(abs(e - energies[0]) for e in energies))
            net = forms.network(scheme, 5)
            g = rng.standard_normal(net.n_vertices)
            Lf = forms.laplacian(scheme, m) @ h[: vertex_count(m)]
            rhs = sum(g[x] * net.normal_derivative(h, x) for x in (0, 1)) + float(
                g[2 : vertex_count(m)] @ Lf[2:]
            )
            gg_err = max(gg_err, abs(net.energy_pairing(h, g) - rhs))
    ok = ext_err < 1e-10 and energy_err < 1e-9 and gg_err < 1e-9
    return ok, f"extension {ext_err:.2e}, energy drift {energy_err:.2e}, Gauss-Green {gg_err:.2e}"


def self_similar_dimension() -> tuple[bool, str]:
    start = time.perf_counter()
    n = 6
    vals = decimation.graph_spectrum(n, QUARTER).values() * spectra.SCALE**n
    fit = spectra.weyl_fit(vals, *spectra.weyl_window(vals, spectra.SCALE))
    expected = math.log(3) / math.log(6)
    elapsed = time.perf_counter() - start
    ok = abs(fit.slope - expected) <= 0.03 and abs(2 * fit.slope - 2 * expected) <= 0.06 and elapsed < 120
    return ok, f"slope {fit.slope:.4f} vs {expected:.4f} ({fit.points} atoms), {elapsed:.1f}s"


def conformal_dimension() -> tuple[bool, str]:
    start = time.perf_counter()
    s, ds = spectra.symbolic_ds()
    ok = s == sp.Rational(2, 3) and ds == sp.Rational(4, 3)
    spectra_by_n = {n: spectra.graphdirected_spectrum(n, normalization=spectra.GRAPH) for n in range(8, 12)}
    ev = spectra_by_n[11]
    fit = spectra.weyl_fit(ev, *spectra.weyl_window(ev, spectra.graphdirected_scale()))
    ok &= abs(fit.slope - 2 / 3) <= 0.05
    target = 1 / spectra.graphdirected_scale()
    worst = 0.0
    for n in range(8, 11):
        ratios = spectra_by_n[n + 1][1:6] / spectra_by_n[n][1:6]
        worst = max(worst, float(np.abs(ratios / target - 1).max()))
    elapsed = time.perf_counter() - start
    ok &= worst <= 0.05 and elapsed < 600
    return ok, f"(s, d_s) = ({s}, {ds}); slope {fit.slope:.4f}; ratio deviation {worst:.2e}; {elapsed:.1f}s"


def measures() -> tuple[bool, str]:
    ok = all(forms.bernoulli(CellAddress(h)) == Fraction(1, 4) for h in (1, 2, 3, 4))
    frac = geometry.left_fraction(geometry.backward_orbit(14))
    ok &= abs(frac - 1 / 3) <= 0.02 / 3
    conf = forms.Conformal(0.5)
    central = forms.central_circle_length(conf)
    circle3 = forms.measure(CellAddress(3), forms.LOCAL_RESISTANCE, conf, "circle")
    ok &= central == 1.0 and circle3 == 2**-0.5
    return ok, f"mu_B = 1/4 on 1-cells; mu_P(J_L) ~ {frac:.5f}; nu central {central}, nu circle(3) {circle3!r}"


def integrated_density() -> tuple[bool, str]:
    n = 6
    predicted = {round(a.z, 9): a.weight for a in decimation.ids(n - 1)[0]}
    worst = 0.0
    for atom, frac in decimation.empirical_ids(n, QUARTER):
        want = predicted[round(atom.z, 9)]
        worst = max(worst, abs(float(frac - want)))
    tol = 3.0**-n
    return worst <= tol, f"max atom deviation {worst:.4g} vs tolerance {tol:.4g}"


def fractal_dirichlet() -> tuple[bool, str]:
    xs = np.linspace(0.0, 2.25, 20)
    fe = max(abs(spectra.linearizer(spectra.psi(x)) - spectra.linearizer(x) / 6) for x in xs)
    atoms = spectra.dirichlet_spectrum(6)
    lim = max(
        abs(a.lam - spectra.renormalized_iteration(a.n0, decimation.apply_word(0.5, a.branch, 0.25)))
        / abs(a.lam)
        for a in atoms
    )
    books = all(a.mult == 2 * 3 ** (a.n0 - a.m - 1) for a in atoms)
    for n0 in range(1, 7):
        level = [a for a in atoms if a.n0 == n0]
        books &= len(level) == sum(2 ** max(m - 1, 0) for m in range(n0))
    total = sum(a.mult for a in atoms)
    books &= total == 2 * 3**6 - 2 * 2**6
    ok = fe < 1e-10 and lim < 1e-9 and books
    return ok, f"functional equation {fe:.2e}; limit agreement {lim:.2e}; {len(atoms)} atoms, total mult {total}"


CRITERIA = {
    1: ("decimation matches the dense oracle", decimation_oracle),
    2: ("level-1 closed form", level_one_closed_form),
    3: ("trace compatibility", trace_compatibility),
    4: ("metric inequality", metric_inequality),
    5: ("harmonic extension", harmonic_extension),
    6: ("self-similar spectral dimension", self_similar_dimension),
    7: ("conformal spectral dimension", conformal_dimension),
    8: ("measures", measures),
    9: ("integrated density of states", integrated_density),
    10: ("fractal Dirichlet spectrum", fractal_dirichlet),
}


def _report(number: int) -> tuple[bool, str]:
    title, func = CRITERIA[number]
    ok, detail = func()
    RESULTS[number] = (title, ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
    return ok, detail


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number: int) -> None:
    ok, detail = _report(number)
    assert ok, detail


if __name__ == "__main__":
    for k in sorted(CRITERIA):
        _report(k)
