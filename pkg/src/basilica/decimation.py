"""Spectral decimation for the self-similar random walks on G_n.

The walk on G_n is described by per-arc transition weights.  Seen from a
vertex ``x`` born in cell ``beta``, an arc descending from ``beta.1`` or
``beta.2`` carries weight ``p`` and an arc descending from the loop
``beta.3`` carries ``(1 - 2p)/2``.  Seen from ``a`` or ``-a``, an arc
descending from the central circle carries ``q/2`` and one descending from
the side loop carries ``(1 - q)/2``.  Whatever is left over is the holding
probability (nonzero only at level 0 and at freshly born vertices).

With these weights the walks at consecutive levels are spectrally similar
through ``R(z) = ((2p+1)/p) z - z**2/p`` for every admissible ``(p, q)``;
``p = 1/4, q = 1/2`` is the simple random walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import numerics
from .cells import build_graph, vertex_birth_level, vertex_count
from .errors import DomainError, ExceptionalCollisionError, InputError, NoRealPreimageError

MINUS = "-"
PLUS = "+"
EXCEPTIONAL = "exceptional"
INITIAL = "initial"


@dataclass(frozen=True)
class DecimationParams:
    p: float = 0.25
    q: float = 0.25

    def __post_init__(self) -> None:
        if not 0 < self.p < 0.5:
            raise InputError(f"p must lie in (0, 1/2), got {self.p}")
        if not 0 < self.q < 1:
            raise InputError(f"q must lie in (0, 1), got {self.q}")

    @property
    def exceptional(self) -> float:
        return 2 * self.p


def rmap(z, p: float = 0.25):
    """``R(z) = ((2p+1)/p) z - z**2/p``."""
    return ((2 * p + 1) / p) * z - z * z / p


def preimages(w: float, p: float = 0.25) -> tuple[float, float]:
    """Both real roots of ``R(z) = w``, ordered (minus-branch, plus-branch)."""
    b = 2 * p + 1
    disc = b * b - 4 * p * w
    if disc < 0:
        raise NoRealPreimageError(f"R(z) = {w} has no real solution for p = {p}")
    root = math.sqrt(disc)
    # the minus root is computed stably from the product of the roots
    plus = (b + root) / 2
    minus = p * w / plus
    return minus, plus


def branch(w: float, sign: str, p: float = 0.25) -> float:
    lo, hi = preimages(w, p)
    return lo if sign == MINUS else hi


def apply_word(w: float, word: str, p: float = 0.25) -> float:
    """Follow the inverse branches of ``R`` named by ``word``, left to right."""
    for s in word:
        w = branch(w, s, p)
    return w


@dataclass(frozen=True)
class SpectrumAtom:
    """One eigenvalue of the walk on G_n.

    ``seed`` is the value the lineage starts from (``2p`` for exceptional
    atoms, ``0`` or ``2q`` for initial ones); ``birth_level`` is the level at
    which the seed value appears; ``lineage`` lists the inverse branches taken
    on the way down to ``level``.
    """

    z: float
    mult: int
    birth: str
    m: int
    lineage: str
    level: int
    seed: float

    @property
    def birth_level(self) -> int:
        return self.level - self.m

    def trajectory(self, p: float) -> list[float]:
        """Eigenvalues along the lineage from the birth level to ``level``."""
        out = [self.seed]
        for s in self.lineage:
            out.append(branch(out[-1], s, p))
        return out

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "mult": self.mult,
            "birth": self.birth,
            "m": self.m,
            "lineage": self.lineage,
        }


@dataclass(frozen=True)
class Spectrum:
    level: int
    params: DecimationParams
    atoms: tuple[SpectrumAtom, ...]
    pruned: tuple[str, ...] = field(default=())

    def __iter__(self) -> Iterator[SpectrumAtom]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def total_multiplicity(self) -> int:
        return sum(a.mult for a in self.atoms)

    def values(self) -> np.ndarray:
        """All eigenvalues with multiplicity, sorted."""
        return np.sort(np.repeat([a.z for a in self.atoms], [a.mult for a in self.atoms]))

    def merged(self, tol: float = 1e-12) -> list[tuple[float, int]]:
        """Distinct values with summed multiplicities (for reports only)."""
        out: list[list] = []
        for a in sorted(self.atoms, key=lambda a: a.z):
            if out and abs(a.z - out[-1][0]) <= tol * max(1.0, abs(a.z)):
                out[-1][1] += a.mult
            else:
                out.append([a.z, a.mult])
        return [(z, k) for z, k in out]


def _lineages(seed: float, length: int, p: float, pruned: list[str]) -> Iterator[tuple[str, float]]:
    """All branch words of ``length`` with their end values, depth first."""
    if length == 0:
        yield "", seed
        return
    try:
        roots = preimages(seed, p)
    except NoRealPreimageError:
        pruned.append(f"no real preimage of {seed!r}")
        return
    for sign, root in zip((MINUS, PLUS), roots):
        for word, value in _lineages(root, length - 1, p, pruned):
            yield sign + word, value


def graph_spectrum(n: int, params: DecimationParams = DecimationParams()) -> Spectrum:
    """Every eigenvalue of the walk on G_n with multiplicity and lineage."""
    if n < 0:
        raise DomainError("level must be nonnegative")
    p, q = params.p, params.q
    pruned: list[str] = []
    atoms: list[SpectrumAtom] = []
    for m in range(n):
        mult = 2 * 3 ** (n - m - 1)
        for word, z in _lineages(2 * p, m, p, pruned):
            atoms.append(SpectrumAtom(z, mult, EXCEPTIONAL, m, word, n, 2 * p))
    for seed in (0.0, 2 * q):
        for word, z in _lineages(seed, n, p, pruned):
            atoms.append(SpectrumAtom(z, 1, INITIAL, n, word, n, seed))
    spec = Spectrum(n, params, tuple(atoms), tuple(pruned))
    if not pruned and spec.total_multiplicity() != vertex_count(n):
        raise ArithmeticError("multiplicities do not add up to the vertex count")
    return spec


# --------------------------------------------------------------------------
# walk matrices


@dataclass(frozen=True)
class WalkMatrix:
    """``I - P`` on V_n with its reversing measure ``pi``."""

    level: int
    params: DecimationParams
    matrix: np.ndarray
    pi: np.ndarray

    @property
    def n_old(self) -> int:
        return vertex_count(self.level - 1) if self.level > 0 else 0

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(A, B, C, D)`` over old vertices V_(n-1) and new ones."""
        k = self.n_old
        M = self.matrix
        return M[:k, :k], M[:k, k:], M[k:, :k], M[k:, k:]

    def symmetrized(self) -> np.ndarray:
        """``Pi^(1/2) M Pi^(-1/2)``, symmetric because the walk is reversible."""
        s = np.sqrt(self.pi)
        S = s[:, None] * self.matrix / s[None, :]
        return (S + S.T) / 2

    def eigenvalues(self) -> np.ndarray:
        return numerics.sym_eig(self.symmetrized()).values


def arc_weights(n: int, params: DecimationParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """For every arc of G_n: endpoints and the transition weights seen from
    each endpoint."""
    G = build_graph(n)
    idx = G.arc_indices()
    u, v = G.u[idx], G.v[idx]
    L = n + 1  # level of the cells forming the edges

    def weight(x: np.ndarray) -> np.ndarray:
        k = np.array([vertex_birth_level(int(t)) for t in x])
        out = np.empty(x.size)
        side = k == 0
        head = idx // 3 ** (L - 1)
        out[side] = np.where(head[side] >= 2, (1 - params.q) / 2, params.q / 2)
        inner = ~side
        digit = (idx[inner] // 3 ** (L - k[inner] - 1)) % 3
        out[inner] = np.where(digit == 2, (1 - 2 * params.p) / 2, params.p)
        return out

    return u, v, weight(u), weight(v)


def walk_matrix(n: int, params: DecimationParams = DecimationParams()) -> WalkMatrix:
    """The walk Laplacian ``I - P`` on V_n."""
    N = vertex_count(n)
    u, v, wu, wv = arc_weights(n, params)
    M = np.zeros((N, N))
    np.add.at(M, (u, v), -wu)
    np.add.at(M, (v, u), -wv)
    np.add.at(M, (u, u), wu)
    np.add.at(M, (v, v), wv)
    pi = _reversing_measure(N, u, v, wu, wv)
    return WalkMatrix(n, params, M, pi)


def _reversing_measure(N: int, u, v, wu, wv) -> np.ndarray:
    # detailed balance propagated along a spanning tree from vertex 0
    pi = np.full(N, np.nan)
    pi[0] = 1.0
    adj: list[list[tuple[int, float]]] = [[] for _ in range(N)]
    for a, b, wa, wb in zip(u.tolist(), v.tolist(), wu.tolist(), wv.tolist()):
        adj[a].append((b, wa / wb))
        adj[b].append((a, wb / wa))
    stack = [0]
    while stack:
        x = stack.pop()
        for y, ratio in adj[x]:
            if math.isnan(pi[y]):
                pi[y] = pi[x] * ratio
                stack.append(y)
    ok = np.allclose(pi[u] * wu, pi[v] * wv, rtol=1e-12)
    if not ok or np.isnan(pi).any():
        raise ArithmeticError("walk is not reversible")
    return pi / pi.sum()


def extend(values: np.ndarray, n: int, z: float, params: DecimationParams) -> np.ndarray:
    """Extend an eigenfunction on V_(n-1) to V_n at eigenvalue ``z``.

    New vertices get ``p/(2p - z)`` times the sum of their two arc neighbours
    (twice the base value for a vertex born in a loop).
    """
    p = params.p
    if abs(z - 2 * p) < 1e-12:
        raise ExceptionalCollisionError(f"eigenvalue {z} hits the exceptional value 2p")
    G = build_graph(n - 1)
    old = vertex_count(n - 1)
    vals = np.asarray(values, dtype=float)
    out = np.empty((vertex_count(n),) + vals.shape[1:])
    out[:old] = vals
    out[old:] = p * (vals[G.u] + vals[G.v]) / (2 * p - z)
    return out


def born_eigenspace(level: int, params: DecimationParams, tol: float = 1e-8) -> np.ndarray:
    """Eigenvectors of the walk on G_level at ``2p`` that vanish on V_(level-1).

    These are the null vectors of the old-by-new block ``B``.
    """
    if level < 1:
        raise DomainError("eigenvalues are born at levels >= 1")
    W = walk_matrix(level, params)
    _, B, _, _ = W.blocks()
    dec = numerics.sym_eig(B.T @ B)
    basis = dec.vectors[:, dec.values <= tol * max(1.0, dec.values[-1])]
    expected = 2 * 3 ** (level - 1)
    if basis.shape[1] != expected:
        raise ArithmeticError(f"born eigenspace has dimension {basis.shape[1]}, expected {expected}")
    out = np.zeros((vertex_count(level), expected))
    out[W.n_old :] = basis
    return out


def eigenfunction(atom: SpectrumAtom, n: int | None = None, params: DecimationParams = DecimationParams()) -> np.ndarray:
    """Basis (columns) of the eigenfunctions on V_n belonging to ``atom``."""
    n = atom.level if n is None else n
    if n != atom.level:
        raise DomainError(f"atom belongs to level {atom.level}, not {n}")
    p = params.p
    traj = atom.trajectory(p)
    if atom.birth == INITIAL:
        if atom.seed == 0.0:
            vec = np.ones((2, 1))
        else:
            vec = np.array([[1.0], [-1.0]])
        start = 0
    else:
        vec = born_eigenspace(atom.birth_level, params)
        start = atom.birth_level
    for step, z in enumerate(traj[1:], start=start + 1):
        vec = extend(vec, step, z, params)
    vec = vec / np.abs(vec).max(axis=0)
    M = walk_matrix(n, params).matrix
    res = np.abs(M @ vec - atom.z * vec).max()
    if res > 1e-8:
        raise ArithmeticError(f"eigenfunction residual {res:.3e} too large")
    return vec


# --------------------------------------------------------------------------
# integrated density of states


@dataclass(frozen=True)
class IDSAtom:
    z: float
    weight: Fraction
    m: int
    lineage: str


def ids(max_m: int, p: float = 0.25, normalized: bool = False) -> tuple[list[IDSAtom], Fraction]:
    """Atoms of the limiting eigenvalue distribution and their partial total.

    With ``normalized=False`` the weights are ``2 * 3**(-m-1)``, which add up
    to 2 over all m.  ``normalized=True`` gives the probability weights
    ``3**(-m-1)`` (the fraction of vertices carrying each eigenvalue).
    """
    if max_m < 0:
        raise DomainError("max_m must be nonnegative")
    num = 1 if normalized else 2
    atoms: list[IDSAtom] = []
    pruned: list[str] = []
    for m in range(max_m + 1):
        w = Fraction(num, 3 ** (m + 1))
        for word, z in _lineages(2 * p, m, p, pruned):
            atoms.append(IDSAtom(z, w, m, word))
    return atoms, sum((a.weight for a in atoms), Fraction(0))


def empirical_ids(n: int, params: DecimationParams = DecimationParams()) -> list[tuple[SpectrumAtom, Fraction]]:
    """Exceptional atoms of G_n with multiplicity divided by |V_n|."""
    spec = graph_spectrum(n, params)
    N = vertex_count(n)
    return [(a, Fraction(a.mult, N)) for a in spec if a.birth == EXCEPTIONAL]


def spectral_similarity_defect(n: int, z: float, params: DecimationParams) -> float:
    """``max |S_n(z) - phi(z) (M_(n-1) - R(z))|`` where ``S_n(z)`` is the
    Schur complement of ``M_n - z`` onto V_(n-1)."""
    A, B, C, D = walk_matrix(n, params).blocks()
    k = A.shape[0]
    S = A - z * np.eye(k) - B @ np.linalg.solve(D - z * np.eye(D.shape[0]), C)
    p = params.p
    target = p / (2 * p - z) * (walk_matrix(n - 1, params).matrix - rmap(z, p) * np.eye(k))
    return float(np.abs(S - target).max())
