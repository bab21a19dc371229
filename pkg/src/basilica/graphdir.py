"""The two-label (A/B) substitution sequence G'_n carrying the conformally
invariant resistances and the balanced invariant measure.

An A-edge is a copy of the left piece J_L, a B-edge a copy of J_R.  One
substitution step relabels every A-edge as B and splits every B-edge into two
A-edges through a fresh vertex with a B-loop attached there.  Every edge
corresponds to a cell of the basilica (the seed B-loop is J_R itself, which is
not a single cell), which lets resistances and masses be cross-checked against
:mod:`basilica.cells` and :mod:`basilica.forms`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cells import CellAddress
from .errors import CapacityError, DomainError

A = "A"
B = "B"

DENSE_LIMIT = 11


@dataclass(frozen=True)
class LabeledEdge:
    u: int
    v: int
    label: str
    generation: int
    resistance: float | None
    mass: Fraction
    address: CellAddress | None

    @property
    def is_loop(self) -> bool:
        return self.u == self.v


@dataclass(frozen=True)
class LabeledGraph:
    """One member of the sequence; ``global_ids[k]`` is the id of vertex ``k``
    in the vertex registry of :mod:`basilica.cells`."""

    generation: int
    r1: float
    edges: tuple[LabeledEdge, ...]
    global_ids: tuple[int, ...]

    @property
    def n_vertices(self) -> int:
        return len(self.global_ids)

    def counts(self) -> tuple[int, int]:
        a = sum(1 for e in self.edges if e.label == A)
        return a, len(self.edges) - a

    def total_mass(self) -> Fraction:
        return sum((e.mass for e in self.edges), Fraction(0))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def vertex_masses(self) -> list[Fraction]:
        """Lumped masses: half of each incident arc plus every incident loop."""
        out = [Fraction(0)] * self.n_vertices
        for e in self.edges:
            if e.is_loop:
                out[e.u] += e.mass
            else:
                out[e.u] += e.mass / 2
                out[e.v] += e.mass / 2
        return out

    def laplacian(self) -> np.ndarray:
        """Conductance Laplacian over the arcs (loops carry no conductance)."""
        L = np.zeros((self.n_vertices, self.n_vertices))
        for e in self.edges:
            if e.is_loop:
                continue
            c = 1.0 / e.resistance
            L[e.u, e.u] += c
            L[e.v, e.v] += c
            L[e.u, e.v] -= c
            L[e.v, e.u] -= c
        return L

    def to_dict(self) -> dict:
        return {
            "level": self.generation,
            "vertices": list(range(self.n_vertices)),
            "edges": [
                {
                    "u": e.u,
                    "v": e.v,
                    "address": str(e.address) if e.address is not None else "R",
                    "kind": "loop" if e.is_loop else "arc",
                    "label": e.label,
                    "mass": f"{e.mass.numerator}/{e.mass.denominator}",
                    "resistance": e.resistance,
                }
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def a_resistance(generation: int, r1: float = 0.5) -> float:
    """Resistance of an A-edge created at ``generation``."""
    return r1 * math.sqrt(2.0) ** (1 - generation)


def seed_graph(r1: float = 0.5) -> LabeledGraph:
    """G'_0: the vertex ``a`` carrying an A-loop (J_L) and a B-loop (J_R)."""
    if not r1 > 0:
        raise DomainError(f"r1 must be positive, got {r1}")
    edges = (
        LabeledEdge(0, 0, A, 0, None, Fraction(1, 3), CellAddress.of(3)),
        LabeledEdge(0, 0, B, 0, None, Fraction(2, 3), None),
    )
    return LabeledGraph(0, r1, edges, (0,))


def substitute(G: LabeledGraph) -> LabeledGraph:
    """Apply one substitution step."""
    gen = G.generation + 1
    r_new = a_resistance(gen, G.r1)
    edges: list[LabeledEdge] = []
    global_ids = list(G.global_ids)
    for e in G.edges:
        if e.label == A:
            edges.append(LabeledEdge(e.u, e.v, B, e.generation, e.resistance, e.mass, e.address))
            continue
        if e.address is None:
            # J_R splits into the two central arcs and the loop at -a
            kids = (CellAddress.of(1), CellAddress.of(2), CellAddress.of(4))
            gid = 1
        else:
            kids = e.address.children()
            gid = e.address.birth_vertex
        w = len(global_ids)
        global_ids.append(gid)
        quarter = e.mass / 4
        edges.append(LabeledEdge(e.u, w, A, gen, r_new, quarter, kids[0]))
        edges.append(LabeledEdge(w, e.v, A, gen, r_new, quarter, kids[1]))
        edges.append(LabeledEdge(w, w, B, gen, None, e.mass / 2, kids[2]))
    return LabeledGraph(gen, G.r1, tuple(edges), tuple(global_ids))


def graphdir_sequence(n: int, r1: float = 0.5, max_level: int | None = None) -> list[LabeledGraph]:
    """``[G'_0, ..., G'_n]``."""
    if n < 0:
        raise DomainError(f"generation must be nonnegative, got {n}")
    if max_level is not None and n > max_level:
        raise CapacityError(f"generation {n} exceeds the limit {max_level}")
    out = [seed_graph(r1)]
    for _ in range(n):
        out.append(substitute(out[-1]))
    return out


def build_labeled(n: int, r1: float = 0.5, max_level: int | None = None) -> LabeledGraph:
    return graphdir_sequence(n, r1, max_level)[-1]


COUNTING_MATRIX = ((0, 2), (1, 1))


def counting_matrix() -> tuple[np.ndarray, int]:
    """Edge-count transition matrix and its spectral radius.

    ``(a', b') = M @ (a, b)``.  The characteristic polynomial is
    ``x**2 - x - 2 = (x - 2)(x + 1)``, so the spectral radius is exactly 2.
    """
    M = np.array(COUNTING_MATRIX, dtype=np.int64)
    tr = int(M.trace())
    det = int(round(np.linalg.det(M)))
    disc = tr * tr - 4 * det
    root = math.isqrt(disc)
    if root * root != disc:
        raise ArithmeticError("counting matrix has irrational eigenvalues")
    rho = max(abs(tr + root), abs(tr - root)) // 2
    return M, rho


def predicted_counts(n: int) -> tuple[int, int]:
    a, b = 1, 1
    M, _ = counting_matrix()
    for _ in range(n):
        a, b = int(M[0, 0] * a + M[0, 1] * b), int(M[1, 0] * a + M[1, 1] * b)
    return a, b
