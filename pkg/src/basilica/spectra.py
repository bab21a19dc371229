"""Fractal Laplacian spectra: the linearizing map of the contracting inverse
branch, the Dirichlet spectrum of the self-similar Laplacian, Weyl-law fits,
and the lumped-mass eigenproblem on the graph-directed sequence G'_n.

The fractal spectrum uses ``p = 1/4``, where the inverse branch through 0 is
``psi(x) = (3 - sqrt(9 - 4x))/4`` with ``psi'(0) = 1/6``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import sympy as sp

from . import numerics
from .decimation import MINUS, PLUS, apply_word
from .errors import CapacityError, DomainError, RangeError
from .graphdir import DENSE_LIMIT, a_resistance, build_labeled, counting_matrix

SCALE = 6.0
RENORMALIZATION = 8.0
DIRICHLET = "dirichlet"
NEUMANN = "neumann-candidate"
PHYSICAL = "physical"
GRAPH = "graph"
ZERO_TOL = 1e-9


def psi(x: float) -> float:
    """Inverse branch of ``R(z) = 6z - 4z**2`` through 0."""
    if not 0 <= x <= 9 / 4:
        raise DomainError(f"psi is defined on [0, 9/4], got {x}")
    # rationalized form avoids cancellation near 0
    return x / (3 + math.sqrt(9 - 4 * x))


@dataclass(frozen=True)
class LinearizerState:
    x: float
    iterations: int
    value: float
    converged: bool
    tol: float


def linearizer_state(x: float, tol: float = 1e-12, max_iter: int = 60) -> LinearizerState:
    """Iterate ``Psi_k = 6**k psi^k(x)`` until successive values agree."""
    if not 0 <= x <= 9 / 4:
        raise DomainError(f"the linearizer is defined on [0, 9/4], got {x}")
    y, scale, cur = x, 1.0, x
    for k in range(1, max_iter + 1):
        y = psi(y)
        scale *= SCALE
        nxt = scale * y
        if abs(nxt - cur) < tol * max(1.0, abs(cur)):
            return LinearizerState(x, k, nxt, True, tol)
        cur = nxt
    return LinearizerState(x, max_iter, cur, False, tol)


def linearizer(x: float, tol: float = 1e-12, max_iter: int = 60) -> float:
    """``Psi(x) = lim 6**k psi^k(x)``; ``Psi(0) = 0``, ``Psi'(0) = 1`` and
    ``Psi(psi(x)) = Psi(x)/6``."""
    state = linearizer_state(x, tol, max_iter)
    if not state.converged:
        raise ArithmeticError(f"linearizer did not converge at x = {x}")
    return state.value


def linearizer_iterates(x: float, count: int) -> float:
    """``6**count psi^count(x)`` without a stopping rule."""
    y = x
    for _ in range(count):
        y = psi(y)
    return SCALE**count * y


@dataclass(frozen=True)
class FractalAtom:
    lam: float
    mult: int
    n0: int
    m: int
    branch: str
    kind: str = DIRICHLET

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mult": self.mult,
            "n0": self.n0,
            "m": self.m,
            "branch": self.branch,
            "kind": self.kind,
        }


def fractal_eigenvalue(n0: int, value: float) -> float:
    return -RENORMALIZATION * SCALE**n0 * linearizer(value)


def _branch_words(m: int) -> Iterable[str]:
    # a word ending in the psi-branch repeats the atom one level up
    if m == 0:
        yield ""
        return
    for k in range(2 ** (m - 1)):
        bits = format(k, f"0{m - 1}b") if m > 1 else ""
        yield "".join(MINUS if b == "0" else PLUS for b in bits) + PLUS


def dirichlet_spectrum(max_n0: int) -> list[FractalAtom]:
    """Dirichlet eigenvalues ``-8 6**n0 Psi(w)`` for ``n0 <= max_n0``.

    ``w`` runs over the points of ``R^-m(1/2)``, ``0 <= m <= n0 - 1``, whose
    branch word ends in the expanding branch, so that every eigenvalue is
    listed exactly once.
    """
    if max_n0 < 1:
        raise DomainError("max_n0 must be at least 1")
    atoms = []
    for n0 in range(1, max_n0 + 1):
        for m in range(n0):
            mult = 2 * 3 ** (n0 - m - 1)
            for word in _branch_words(m):
                w = apply_word(0.5, word, 0.25)
                atoms.append(FractalAtom(fractal_eigenvalue(n0, w), mult, n0, m, word))
    atoms.sort(key=lambda a: (abs(a.lam), a.n0, a.m, a.branch))
    return atoms


def neumann_candidates(max_n: int) -> list[FractalAtom]:
    """Renormalized limits of the lineages starting at the level-0 values
    ``0`` and ``1/2``; the branch is prefixed by the seed (``0`` or ``h``)."""
    atoms = []
    for seed, tag in ((0.0, "0"), (0.5, "h")):
        for n in range(0, max_n + 1):
            words = _branch_words(n)
            for word in words:
                if seed == 0.0 and word == "":
                    lam = 0.0
                else:
                    lam = fractal_eigenvalue(n, apply_word(seed, word, 0.25))
                atoms.append(FractalAtom(lam, 1, n, n, tag + word, NEUMANN))
    atoms.sort(key=lambda a: (abs(a.lam), a.n0, a.branch))
    return atoms


def renormalized_iteration(n0: int, value: float, steps: int = 40) -> float:
    """``-8 6**k z_k`` with ``z_(n0) = value`` and ``z_(k+1) = psi(z_k)``."""
    z = value
    for _ in range(steps):
        z = psi(z)
    return -RENORMALIZATION * SCALE ** (n0 + steps) * z


def dirichlet_total_multiplicity(max_n0: int) -> int:
    return sum(a.mult for a in dirichlet_spectrum(max_n0))


# --------------------------------------------------------------------------
# counting functions and Weyl fits


@dataclass(frozen=True)
class WeylFit:
    slope: float
    intercept: float
    points: int
    window: tuple[float, float]
    expected: float | None = None


def _as_atoms(values, mults=None) -> tuple[np.ndarray, np.ndarray]:
    vals = np.asarray(values, dtype=float)
    if mults is None:
        uniq, counts = np.unique(vals, return_counts=True)
        return uniq, counts.astype(float)
    m = np.asarray(mults, dtype=float)
    order = np.argsort(vals, kind="stable")
    vals, m = vals[order], m[order]
    uniq, inv = np.unique(vals, return_inverse=True)
    return uniq, np.bincount(inv, weights=m)


def counting_function(values, mults=None) -> tuple[np.ndarray, np.ndarray]:
    """Distinct eigenvalues and ``N(lambda)`` (number of eigenvalues
    ``<= lambda``, with multiplicity) at each of them."""
    uniq, m = _as_atoms(values, mults)
    return uniq, np.cumsum(m)


def weyl_window(values, scale: float) -> tuple[float, float]:
    """Fitting window from the smallest positive eigenvalue to the largest
    one divided by the spectral scaling factor, which drops the top period
    where the finite graph departs most from the limit.  Values below
    ``1e-9`` times the largest magnitude count as numerical zeros."""
    vals = np.asarray(values, dtype=float)
    pos = vals[vals > ZERO_TOL * np.abs(vals).max(initial=0.0)]
    if pos.size == 0:
        raise RangeError("no positive eigenvalues")
    return float(pos.min()), float(pos.max() / scale)


def weyl_fit(values, lam_min: float, lam_max: float, mults=None, expected: float | None = None, min_atoms: int = 30) -> WeylFit:
    """Least-squares slope of ``log N`` against ``log lambda``.

    ``N`` is sampled at every distinct eigenvalue in ``[lam_min, lam_max]``
    at the middle of its jump, ``N(lambda-) + mult/2``, which removes the
    one-sided bias of sampling a staircase at its corners.
    """
    uniq, m = _as_atoms(np.abs(np.asarray(values, dtype=float)), mults)
    N = np.cumsum(m) - m / 2
    sel = (uniq >= lam_min) & (uniq <= lam_max) & (uniq > 0)
    if sel.sum() < min_atoms:
        raise RangeError(f"only {int(sel.sum())} atoms in [{lam_min}, {lam_max}], need {min_atoms}")
    slope, intercept = np.polyfit(np.log(uniq[sel]), np.log(N[sel]), 1)
    return WeylFit(float(slope), float(intercept), int(sel.sum()), (lam_min, lam_max), expected)


def self_similar_weyl_exponent() -> float:
    return math.log(3) / math.log(6)


# --------------------------------------------------------------------------
# graph-directed sequence


def graphdirected_problem(n: int, r1: float = 0.5, normalization: str = PHYSICAL, max_level: int = DENSE_LIMIT):
    """Stiffness matrix and lumped mass vector on G'_n.

    ``physical`` uses the resistances and masses as they are.  ``graph``
    rescales both so that the A-edges created last have unit resistance and
    unit mass; eigenvalues then differ by the factor ``r_A(n) m_A(n)``.
    """
    if n > max_level:
        raise CapacityError(f"G'_{n} exceeds the dense limit (generation {max_level})")
    G = build_labeled(n, r1)
    L = G.laplacian()
    M = np.array([float(x) for x in G.vertex_masses()])
    if normalization == GRAPH:
        L = L * a_resistance(n, r1)
        M = M * (3 * 2**n)
    elif normalization != PHYSICAL:
        raise DomainError(f"unknown normalization {normalization!r}")
    return L, M


def graphdirected_spectrum(n: int, r1: float = 0.5, normalization: str = PHYSICAL, max_level: int = DENSE_LIMIT) -> np.ndarray:
    """Ascending eigenvalues of ``L u = lambda M u`` on G'_n."""
    L, M = graphdirected_problem(n, r1, normalization, max_level)
    if L.shape[0] == 1:
        return np.zeros(1)
    return numerics.gen_eigvals(L, M)


def graphdirected_scale() -> float:
    """Eigenvalue scaling factor per generation, ``2 sqrt 2``."""
    return 2 * math.sqrt(2)


def symbolic_ds(matrix: Sequence[Sequence[int]] | None = None, scale=None) -> tuple[sp.Expr, sp.Expr]:
    """Exact ``(s, d_s)`` with ``rho(matrix) * scale**-s = 1``.

    Defaults to the A/B counting matrix and the factor ``2 sqrt 2``.
    """
    if matrix is None:
        matrix = counting_matrix()[0].tolist()
    if scale is None:
        scale = 2 * sp.sqrt(2)
    Msym = sp.Matrix(matrix)
    rho = max(Msym.eigenvals(), key=lambda ev: abs(sp.N(ev)))
    s = sp.simplify(sp.expand_log(sp.log(rho), force=True) / sp.expand_log(sp.log(sp.sympify(scale)), force=True))
    return s, sp.simplify(2 * s)
