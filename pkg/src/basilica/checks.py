"""Registry of structural invariants, run by ``basilica check`` and by the
test suite.

Every check takes a ``numpy.random.Generator`` and returns a short detail
string; it raises :class:`InvariantFailure` when the property does not hold.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import cells, decimation, forms, geometry, graphdir, numerics, spectra
from .cells import CellAddress

WORKERS_ENV = "BASILICA_WORKERS"


class InvariantFailure(AssertionError):
    pass


@dataclass(frozen=True)
class Invariant:
    module: str
    name: str
    func: Callable[[np.random.Generator], str]


REGISTRY: list[Invariant] = []

EXPECTED_COUNTS = {
    "cells": 5,
    "graphdir": 4,
    "numerics": 3,
    "forms": 5,
    "decimation": 5,
    "spectra": 4,
    "geometry": 3,
}


def invariant(module: str, name: str):
    def register(func):
        REGISTRY.append(Invariant(module, name, func))
        return func

    return register


def ensure(cond: bool, message: str) -> None:
    if not cond:
        raise InvariantFailure(message)


# --------------------------------------------------------------------------
# cells


@invariant("cells", "cell and vertex counts")
def _counts(rng) -> str:
    F = cells.build_filtration(8)
    for k in range(1, 10):
        ensure(F.endpoints[k - 1][0].size == 4 * 3 ** (k - 1), f"cell count at level {k}")
    for n in range(9):
        G = F.graph_at(n)
        ensure(G.n_vertices == 2 * 3**n, f"|V_{n}|")
        used = np.union1d(G.u, G.v)
        ensure(used.size == G.n_vertices and used[-1] == G.n_vertices - 1, f"vertex ids of G_{n}")
    return "levels 0..8"


@invariant("cells", "degree regularity")
def _degrees(rng) -> str:
    for n in range(1, 9):
        deg = cells.build_graph(n).degrees()
        ensure(np.all(deg == 4), f"degree of G_{n}")
    return "degree 4 for n = 1..8"


def _arc_addresses(level: int):
    for i in range(cells.cell_count(level)):
        a = CellAddress.from_index(level, i)
        if not a.is_loop:
            yield a


@invariant("cells", "m-exponent grows by 2 on arc children")
def _m_split(rng) -> str:
    count = 0
    for level in range(1, 7):
        for a in _arc_addresses(level):
            m = cells.m_exponent(a)
            ensure(cells.m_exponent(a.child(1)) == m + 2 and cells.m_exponent(a.child(2)) == m + 2, f"at {a}")
            count += 1
    return f"{count} arc cells"


@invariant("cells", "dynamics preserves arc kind")
def _dyn_kind(rng) -> str:
    for level in range(2, 8):
        for a in _arc_addresses(level):
            ensure(not cells.address_dynamics(a).is_loop, f"at {a}")
    for h in (1, 2):
        ensure(cells.address_dynamics(CellAddress(h)) == CellAddress(3), f"image of ({h})")
    return "levels 2..7"


@invariant("cells", "vertex ids persist under refinement")
def _id_stability(rng) -> str:
    for n in range(8):
        small = cells.build_filtration(n)
        big = cells.build_filtration(n + 1)
        for k in range(n + 1):
            for x, y in zip(small.endpoints[k], big.endpoints[k]):
                ensure(np.array_equal(x, y), f"cells of level {k + 1} moved between G_{n} and G_{n + 1}")
        for v in range(2, small.vertex_count, max(1, small.vertex_count // 50)):
            birth = cells.vertex_birth_cell(v)
            ensure(birth.birth_vertex == v, f"birth cell of vertex {v}")
    return "n = 0..7"


# --------------------------------------------------------------------------
# graphdir


@invariant("graphdir", "trace compatibility across substitution")
def _gd_trace(rng) -> str:
    seq = graphdir.graphdir_sequence(9)
    worst = 0.0
    for n in range(1, 9):
        L_small = seq[n].laplacian()
        L_big = seq[n + 1].laplacian()
        T = numerics.schur(L_big, np.arange(seq[n].n_vertices))
        worst = max(worst, float(np.abs(T - L_small).max()))
    ensure(worst < 1e-9, f"trace defect {worst:.3e}")
    return f"max defect {worst:.2e}"


@invariant("graphdir", "A-edge resistance scaling")
def _gd_resistance(rng) -> str:
    seq = graphdir.graphdir_sequence(10)
    conf = forms.Conformal(0.5)
    for G in seq:
        for e in G.edges:
            if e.label == graphdir.A and not e.is_loop:
                want = 0.5 * math.sqrt(2.0) ** (1 - e.generation)
                ensure(abs(e.resistance - want) <= 1e-15 * want, f"A-edge at generation {e.generation}")
            if not e.is_loop:
                r = conf.resistance(e.address)
                ensure(abs(e.resistance - r) <= 1e-12 * r, f"edge {e.address} disagrees with the conformal scheme")
    return "generations 0..10"


@invariant("graphdir", "mass conservation")
def _gd_mass(rng) -> str:
    for G in graphdir.graphdir_sequence(12):
        ensure(G.total_mass() == 1, f"total mass at generation {G.generation}")
        for e in G.edges:
            if e.address is not None:
                ensure(e.mass == forms.balanced(e.address), f"mass of {e.address}")
    return "generations 0..12, exact"


@invariant("graphdir", "vertex and edge counts")
def _gd_counts(rng) -> str:
    seq = graphdir.graphdir_sequence(12)
    for n, G in enumerate(seq):
        ensure(G.counts() == graphdir.predicted_counts(n), f"counts at {n}")
        if n >= 1:
            ensure(G.counts() == (2**n, 2**n), f"a_n = b_n = 2^n at {n}")
            ensure(np.all(G.degrees() == 4), f"degree at {n}")
            ensure(G.n_vertices == 2 * seq[n - 1].n_vertices, f"doubling at {n}")
        ensure(G.n_vertices == 2**n, f"|V'_{n}|")
    return "generations 0..12"


# --------------------------------------------------------------------------
# numerics


def _random_symmetric(rng, n: int) -> np.ndarray:
    X = rng.standard_normal((n, n))
    return (X + X.T) / 2


@invariant("numerics", "orthonormal eigenvectors")
def _orthonormal(rng) -> str:
    for n in (1, 5, 40, 200):
        dec = numerics.sym_eig(_random_symmetric(rng, n))
        err = np.abs(dec.vectors.T @ dec.vectors - np.eye(n)).max()
        ensure(err <= 1e-10 * n, f"orthonormality defect {err:.2e} at order {n}")
    return "orders 1..200"


@invariant("numerics", "trace preservation")
def _trace(rng) -> str:
    for n in (3, 50, 300):
        M = _random_symmetric(rng, n)
        dec = numerics.sym_eig(M)
        err = abs(dec.values.sum() - np.trace(M))
        ensure(err <= 1e-9 * n * np.linalg.norm(M, 2), f"trace defect {err:.2e}")
    return "orders 3..300"


@invariant("numerics", "schur transitivity")
def _schur_transitive(rng) -> str:
    L = forms.laplacian(forms.Conformal(), 4)
    two = numerics.schur(numerics.schur(L, np.arange(54)), np.arange(18))
    one = numerics.schur(L, np.arange(18))
    err = np.abs(two - one).max()
    ensure(err < 1e-9, f"defect {err:.2e}")
    return f"defect {err:.2e}"


# --------------------------------------------------------------------------
# forms


def _schemes():
    return (forms.Dyadic(), forms.Conformal(0.5))


@invariant("forms", "metric comparison")
def _metric_comparison(rng) -> str:
    for scheme in _schemes():
        net = forms.network(scheme, 6)
        pairs = rng.integers(0, net.n_vertices, size=(200, 2))
        R = net.resistance_table(pairs)
        S = net.local_metric_table(sorted(set(pairs[:, 0].tolist())))
        row = {x: i for i, x in enumerate(sorted(set(pairs[:, 0].tolist())))}
        s = np.array([S[row[x], y] for x, y in pairs])
        ensure(np.all(0.5 * s <= R + 1e-12) and np.all(R <= s + 1e-9), f"{scheme.name}: S/2 <= R <= S fails")
    return "200 pairs at n = 6, both schemes"


@invariant("forms", "effective resistance is level independent")
def _resistance_levels(rng) -> str:
    worst = 0.0
    for scheme in _schemes():
        for n in range(1, 5):
            small, big = forms.network(scheme, n), forms.network(scheme, n + 1)
            pairs = rng.integers(0, small.n_vertices, size=(30, 2))
            worst = max(worst, float(np.abs(small.resistance_table(pairs) - big.resistance_table(pairs)).max()))
    ensure(worst < 1e-9, f"defect {worst:.2e}")
    return f"max defect {worst:.2e}"


@invariant("forms", "harmonic extension minimizes energy")
def _harmonic_min(rng) -> str:
    scheme = forms.Conformal()
    m, n = 1, 4
    h = forms.harmonic_extension(scheme, rng.standard_normal(6), m, n)
    net = forms.network(scheme, n)
    E = net.energy(h)
    for _ in range(50):
        g = rng.standard_normal(h.size)
        g[: cells.vertex_count(m)] = 0.0
        ensure(E <= net.energy(h + g) + 1e-12, "a perturbation lowered the energy")
    return f"E(h) = {E:.6g}"


@invariant("forms", "Gauss-Green identity")
def _gauss_green(rng) -> str:
    worst = 0.0
    for scheme in _schemes():
        for m in (0, 1, 2):
            n = 5
            f = forms.harmonic_extension(scheme, rng.standard_normal(cells.vertex_count(m)), m, n)
            g = rng.standard_normal(cells.vertex_count(n))
            net = forms.network(scheme, n)
            Lf_m = forms.laplacian(scheme, m) @ f[: cells.vertex_count(m)]
            boundary = sum(g[x] * net.normal_derivative(f, x) for x in (0, 1))
            interior = float(g[2 : cells.vertex_count(m)] @ Lf_m[2:])
            worst = max(worst, abs(net.energy_pairing(f, g) - boundary - interior))
    ensure(worst < 1e-9, f"residual {worst:.2e}")
    return f"max residual {worst:.2e}"


@invariant("forms", "geodesic length equals local resistance measure")
def _nu_geodesic(rng) -> str:
    for scheme in _schemes():
        net = forms.network(scheme, 5)
        for _ in range(20):
            x, y = (int(t) for t in rng.integers(0, net.n_vertices, 2))
            path = net.geodesic(x, y)
            nu = sum(
                forms.measure(net.graph.address(e), forms.LOCAL_RESISTANCE, scheme) for e in path
            )
            S = net.local_metric(x, y)
            ensure(abs(nu - S) < 1e-9, f"{scheme.name}: nu-length {nu} vs S {S}")
        with_loops = net.local_metric_table([0, 1], include_loops=True)
        without = net.local_metric_table([0, 1])
        ensure(np.allclose(with_loops, without, rtol=0, atol=1e-12), "loops shortened a path")
    return "20 pairs per scheme at n = 5"


# --------------------------------------------------------------------------
# decimation

Q = decimation.DecimationParams(0.25, 0.25)


@invariant("decimation", "oracle equivalence")
def _oracle(rng) -> str:
    worst = 0.0
    for n in range(1, 6):
        formula = decimation.graph_spectrum(n, Q).values()
        oracle = decimation.walk_matrix(n, Q).eigenvalues()
        worst = max(worst, float(np.abs(formula - oracle).max()))
    ensure(worst < 1e-8, f"difference {worst:.2e}")
    return f"max difference {worst:.2e}"


@invariant("decimation", "multiplicity conservation")
def _mult(rng) -> str:
    for p, q in ((0.25, 0.25), (0.1, 0.7), (0.4, 0.05)):
        for n in range(0, 8):
            spec = decimation.graph_spectrum(n, decimation.DecimationParams(p, q))
            ensure(spec.total_multiplicity() == 2 * 3**n, f"(p, q, n) = ({p}, {q}, {n})")
    return "3 parameter pairs, n = 0..7"


@invariant("decimation", "spectral similarity")
def _similarity(rng) -> str:
    worst = 0.0
    for params in (Q, decimation.DecimationParams(0.15, 0.6)):
        for n in range(1, 5):
            for z in rng.uniform(-0.5, 2.0, 20):
                if abs(z - 2 * params.p) < 1e-3:
                    continue
                worst = max(worst, decimation.spectral_similarity_defect(n, float(z), params))
    ensure(worst < 1e-8, f"defect {worst:.2e}")
    return f"max defect {worst:.2e}"


@invariant("decimation", "eigenspace mapping")
def _eigenspace(rng) -> str:
    for n in range(1, 5):
        prev = decimation.walk_matrix(n - 1, Q)
        M = decimation.walk_matrix(n, Q).matrix
        dec = numerics.sym_eig(prev.symmetrized())
        vals = np.unique(np.round(dec.values, 9))
        for w in vals:
            cols = np.abs(dec.values - w) < 1e-8
            basis = dec.vectors[:, cols] / np.sqrt(prev.pi)[:, None]
            for z in decimation.preimages(float(w), Q.p):
                if abs(z - 2 * Q.p) < 1e-9:
                    continue
                ext = decimation.extend(basis, n, z, Q)
                res = np.abs(M @ ext - z * ext).max()
                ensure(res < 1e-8, f"level {n}, z = {z}: residual {res:.2e}")
                ensure(np.linalg.matrix_rank(ext, tol=1e-8) == basis.shape[1], f"rank drop at level {n}")
    return "levels 1..4"


@invariant("decimation", "eigenfunctions restrict to cells")
def _cell_restriction(rng) -> str:
    n = 4
    spec = decimation.graph_spectrum(n, Q)
    M_cache: dict[int, np.ndarray] = {}
    checked = 0
    for atom in spec:
        if atom.birth != decimation.EXCEPTIONAL:
            continue
        b = atom.birth_level
        F = decimation.eigenfunction(atom, n, Q)
        for col in range(min(F.shape[1], 3)):
            f = F[:, col]
            target = n - b + 1
            M = M_cache.setdefault(target, decimation.walk_matrix(target, Q).matrix)
            for i in range(cells.cell_count(b)):
                alpha = CellAddress.from_index(b, i)
                g, interior = _reindex(f, alpha, n, target)
                if np.abs(g).max() < 1e-12:
                    continue
                res = np.abs((M @ g - atom.z * g)[interior]).max()
                ensure(res < 1e-8, f"cell {alpha}, z = {atom.z}: residual {res:.2e}")
                checked += 1
    return f"{checked} cell restrictions"


def _reindex(f: np.ndarray, alpha: CellAddress, n: int, target: int):
    """Copy the values of ``f`` inside ``alpha`` onto the matching vertices
    inside (1) (arc) or (3) (loop) of G_target."""
    image_head = 3 if alpha.is_loop else 1
    g = np.zeros(cells.vertex_count(target))
    interior = []
    frontier = [()]
    while frontier:
        word = frontier.pop()
        src = CellAddress(alpha.head, alpha.tail + word)
        if src.level > n:
            continue
        dst = CellAddress(image_head, word)
        g[dst.birth_vertex] = f[src.birth_vertex]
        interior.append(dst.birth_vertex)
        frontier.extend(word + (j,) for j in (1, 2, 3))
    return g, np.array(sorted(interior))


# --------------------------------------------------------------------------
# spectra


@invariant("spectra", "linearizer functional equation")
def _psi_eq(rng) -> str:
    xs = np.concatenate([[0.0, 1.5], rng.uniform(0, 1.5, 18)])
    worst = max(abs(spectra.linearizer(spectra.psi(x)) - spectra.linearizer(x) / 6) for x in xs)
    ensure(worst < 1e-10, f"defect {worst:.2e}")
    return f"max defect {worst:.2e}"


@invariant("spectra", "Dirichlet atoms come from graph eigenfunctions")
def _dirichlet_graph(rng) -> str:
    count = 0
    for atom in spectra.dirichlet_spectrum(3):
        w = decimation.apply_word(0.5, atom.branch, 0.25)
        graph_atom = decimation.SpectrumAtom(
            w, atom.mult, decimation.EXCEPTIONAL, atom.m, atom.branch, atom.n0, 0.5
        )
        F = decimation.eigenfunction(graph_atom, atom.n0, Q)
        ensure(F.shape[1] == atom.mult, f"multiplicity of {atom}")
        ensure(np.abs(F[:2]).max() < 1e-12, f"{atom} does not vanish on V_0")
        lam = spectra.renormalized_iteration(atom.n0, w)
        ensure(abs(lam - atom.lam) <= 1e-9 * abs(atom.lam), f"renormalized limit of {atom}")
        count += 1
    return f"{count} atoms with n0 <= 3"


@invariant("spectra", "lumped masses sum to one")
def _lumped(rng) -> str:
    for G in graphdir.graphdir_sequence(11):
        ensure(sum(G.vertex_masses(), Fraction(0)) == 1, f"generation {G.generation}")
    return "generations 0..11, exact"


@invariant("spectra", "resistance and walk Laplacians differ by a constant")
def _renorm_constant(rng) -> str:
    srw = decimation.DecimationParams(0.25, 0.5)
    for n in range(0, 6):
        L = forms.laplacian(forms.Dyadic(), n)
        W = decimation.walk_matrix(n, srw).matrix
        ensure(np.array_equal(L, 4 * 2 ** (n + 1) * W), f"level {n}")
    return "n = 0..5, exact"


# --------------------------------------------------------------------------
# geometry


@invariant("geometry", "backward orbits map forward")
def _orbit_forward(rng) -> str:
    for n in range(1, 15):
        img = geometry.forward(geometry.backward_orbit(n))
        prev = np.tile(geometry.backward_orbit(n - 1), 2)
        err = np.abs(img - prev).max()
        ensure(err < 1e-12, f"depth {n}: forward defect {err:.2e}")
        ensure(np.abs(geometry.forward(img, n - 1) - geometry.A_POINT).max() < 1e-9, f"depth {n}")
    return "depths 1..14"


@invariant("geometry", "counting oracle for the left piece")
def _left_piece(rng) -> str:
    frac = geometry.left_fraction(geometry.backward_orbit(14))
    ensure(abs(frac - 1 / 3) <= 0.02 / 3, f"fraction {frac}")
    return f"fraction {frac:.5f}"


@invariant("geometry", "orbit symmetries")
def _orbit_sym(rng) -> str:
    for n in range(1, 13):
        pts = geometry.backward_orbit(n)
        xy = np.column_stack([pts.real, pts.imag])
        tree = cKDTree(xy)
        for img in (-pts, np.conj(pts)):
            d, _ = tree.query(np.column_stack([img.real, img.imag]))
            ensure(d.max() < 1e-9, f"depth {n}")
    return "depths 1..12"


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    ok: bool
    detail: str


def _run_one(inv: Invariant, seed: int) -> CheckResult:
    rng = np.random.default_rng([seed, REGISTRY.index(inv)])
    try:
        detail = inv.func(rng)
        return CheckResult(inv.module, inv.name, True, detail)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a report row
        return CheckResult(inv.module, inv.name, False, f"{type(exc).__name__}: {exc}")


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_all(seed: int = 0, workers: int | None = None, modules: set[str] | None = None) -> list[CheckResult]:
    """Run the registry; results come back in registration order."""
    selected = [inv for inv in REGISTRY if modules is None or inv.module in modules]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [_run_one(inv, seed) for inv in selected]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda inv: _run_one(inv, seed), selected))
