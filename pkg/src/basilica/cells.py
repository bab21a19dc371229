"""Symbolic cell structure of the basilica: addresses, subdivision, vertex ids
and the graph sequence G_n.

Conventions
-----------
* Level-1 cells are ``(1)`` and ``(2)`` (the two halves of the central circle,
  both arcs from ``a`` to ``-a``), ``(3)`` (the loop attached at ``a``) and
  ``(4)`` (the loop attached at ``-a``).
* A cell ``alpha`` with endpoints ``(u, v)`` (``u == v`` for loops) and birth
  vertex ``w`` has children ``alpha.1 = (u, w)``, ``alpha.2 = (w, v)`` and the
  loop ``alpha.3`` based at ``w``.
* Vertex 0 is ``a`` and vertex 1 is ``-a``.  The vertex born inside the level-k
  cell with lexicographic index ``i`` gets id ``2*3**(k-1) + i``, so ids are
  assigned in breadth-first order and never change when refining.
* ``G_n`` has vertex set ``V_n`` and one edge per level-(n+1) cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np

from .errors import CapacityError, DomainError

MAX_LEVEL = 10

ARC = "arc"
LOOP = "loop"

# relabelling of the first tail symbol under z -> z**2 - 1 on the side loops
_TAU = {1: 1, 2: 2, 3: 4}


def cell_count(level: int) -> int:
    """Number of cells at ``level`` (>= 1)."""
    return 4 * 3 ** (level - 1)


def vertex_count(n: int) -> int:
    """Number of vertices of G_n."""
    return 2 * 3**n


@dataclass(frozen=True, order=True)
class CellAddress:
    """Address ``(head, tail...)`` of a cell; level is ``1 + len(tail)``."""

    head: int
    tail: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.head not in (1, 2, 3, 4):
            raise DomainError(f"head symbol must be in 1..4, got {self.head!r}")
        if not isinstance(self.tail, tuple):
            object.__setattr__(self, "tail", tuple(self.tail))
        if any(s not in (1, 2, 3) for s in self.tail):
            raise DomainError(f"tail symbols must be in 1..3, got {self.tail!r}")

    @classmethod
    def of(cls, *symbols: int) -> "CellAddress":
        if not symbols:
            raise DomainError("an address needs at least one symbol")
        return cls(symbols[0], tuple(symbols[1:]))

    @classmethod
    def parse(cls, text: str) -> "CellAddress":
        """Parse a dot-separated address such as ``"1.3.2"``."""
        try:
            symbols = [int(s) for s in text.strip().split(".")]
        except ValueError as exc:
            raise DomainError(f"malformed address {text!r}") from exc
        return cls.of(*symbols)

    @classmethod
    def from_index(cls, level: int, index: int) -> "CellAddress":
        """Inverse of :attr:`index`."""
        if level < 1 or not 0 <= index < cell_count(level):
            raise DomainError(f"index {index} out of range at level {level}")
        tail = []
        for _ in range(level - 1):
            index, digit = divmod(index, 3)
            tail.append(digit + 1)
        return cls(index + 1, tuple(reversed(tail)))

    @property
    def symbols(self) -> tuple[int, ...]:
        return (self.head,) + self.tail

    @property
    def level(self) -> int:
        return 1 + len(self.tail)

    @property
    def kind(self) -> str:
        last = self.tail[-1] if self.tail else None
        if (last is None and self.head in (3, 4)) or last == 3:
            return LOOP
        return ARC

    @property
    def is_loop(self) -> bool:
        return self.kind == LOOP

    @property
    def index(self) -> int:
        """Lexicographic position among the cells of the same level."""
        idx = self.head - 1
        for s in self.tail:
            idx = 3 * idx + (s - 1)
        return idx

    @property
    def parent(self) -> "CellAddress | None":
        if not self.tail:
            return None
        return CellAddress(self.head, self.tail[:-1])

    def child(self, j: int) -> "CellAddress":
        return CellAddress(self.head, self.tail + (j,))

    def children(self) -> tuple["CellAddress", "CellAddress", "CellAddress"]:
        return (self.child(1), self.child(2), self.child(3))

    def is_prefix_of(self, other: "CellAddress") -> bool:
        return other.symbols[: self.level] == self.symbols

    @property
    def birth_vertex(self) -> int:
        """Id of the vertex created when this cell is subdivided."""
        return 2 * 3 ** (self.level - 1) + self.index

    def __str__(self) -> str:
        return ".".join(str(s) for s in self.symbols)


def children(addr: CellAddress) -> tuple[tuple[CellAddress, str], ...]:
    """The three children of ``addr`` together with their kinds."""
    return tuple((c, c.kind) for c in addr.children())


def address_dynamics(addr: CellAddress) -> CellAddress:
    """Symbolic action of ``P(z) = z**2 - 1`` on cells."""
    if addr.head in (1, 2):
        return CellAddress(3, addr.tail)
    if not addr.tail:
        raise DomainError(f"the image of cell ({addr}) is not a single cell")
    return CellAddress(_TAU[addr.tail[0]], addr.tail[1:])


def m_exponent(addr: CellAddress) -> int:
    """Number of dynamics steps taking the arc cell ``addr`` to (1) or (2)."""
    if addr.is_loop:
        raise DomainError(f"m-exponent is defined for arc cells only, got loop {addr}")
    steps = 0
    while addr.tail or addr.head not in (1, 2):
        addr = address_dynamics(addr)
        steps += 1
    return steps


def dynamics_steps(addr: CellAddress) -> int:
    """Number of dynamics steps taking ``addr`` (arc or loop) to a level-1 cell."""
    steps = 0
    while addr.tail:
        addr = address_dynamics(addr)
        steps += 1
    return steps


def vertex_birth_level(v: int) -> int:
    """Level of the cell whose subdivision created vertex ``v`` (0 for ``±a``)."""
    if v < 0:
        raise DomainError(f"negative vertex id {v}")
    k = 0
    while v >= 2 * 3**k:
        k += 1
    return k


def vertex_birth_cell(v: int) -> CellAddress | None:
    """Cell whose subdivision created vertex ``v``; ``None`` for ``±a``."""
    k = vertex_birth_level(v)
    if k == 0:
        return None
    return CellAddress.from_index(k, v - 2 * 3 ** (k - 1))


@dataclass(frozen=True)
class Cell:
    """A cell with its kind and boundary vertex ids."""

    address: CellAddress
    kind: str
    boundary: tuple[int, ...]

    @property
    def midpoint(self) -> int:
        return self.address.birth_vertex


def _level_endpoints(max_level: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Endpoint arrays ``(u, v)`` for cells at levels 1..max_level."""
    u = np.array([0, 0, 0, 1], dtype=np.int64)
    v = np.array([1, 1, 0, 1], dtype=np.int64)
    out = [(u, v)]
    for k in range(1, max_level):
        w = 2 * 3 ** (k - 1) + np.arange(u.size, dtype=np.int64)
        u, v = np.stack([u, w, w], axis=1).ravel(), np.stack([w, v, w], axis=1).ravel()
        out.append((u, v))
    return out


def loop_mask(level: int) -> np.ndarray:
    """Boolean mask over the cells of ``level`` marking loop cells."""
    if level == 1:
        return np.array([False, False, True, True])
    return (np.arange(cell_count(level)) % 3) == 2


@dataclass(frozen=True)
class Multigraph:
    """Graph whose edges are the cells of one level.

    ``u[i], v[i]`` are the endpoints of the cell with lexicographic index ``i``
    at level ``cell_level``; loops have ``u[i] == v[i]``.
    """

    n_vertices: int
    cell_level: int
    u: np.ndarray
    v: np.ndarray

    @cached_property
    def is_loop(self) -> np.ndarray:
        return self.u == self.v

    @property
    def n_edges(self) -> int:
        return int(self.u.size)

    def address(self, i: int) -> CellAddress:
        return CellAddress.from_index(self.cell_level, i)

    def arc_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.is_loop)

    def loop_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_loop)

    def degrees(self) -> np.ndarray:
        """Total degree per vertex, loops counted twice."""
        deg = np.bincount(self.u, minlength=self.n_vertices)
        deg += np.bincount(self.v, minlength=self.n_vertices)
        return deg

    def edges(self) -> Iterator[tuple[int, int, CellAddress, str]]:
        for i in range(self.n_edges):
            addr = self.address(i)
            yield int(self.u[i]), int(self.v[i]), addr, addr.kind

    def to_dict(self, level: int) -> dict:
        return {
            "level": level,
            "vertices": list(range(self.n_vertices)),
            "edges": [
                {"u": u, "v": v, "address": str(a), "kind": k}
                for u, v, a, k in self.edges()
            ],
        }


@dataclass(frozen=True)
class Filtration:
    """Cells at levels 1..n+1 and the vertex registry V_n."""

    level: int
    endpoints: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def vertex_count(self) -> int:
        return vertex_count(self.level)

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    def cell(self, addr: CellAddress) -> Cell:
        if addr.level > len(self.endpoints):
            raise DomainError(f"cell {addr} is finer than this filtration")
        u, v = self.endpoints[addr.level - 1]
        i = addr.index
        boundary = (int(u[i]),) if addr.is_loop else (int(u[i]), int(v[i]))
        return Cell(addr, addr.kind, boundary)

    def cells_at(self, k: int) -> list[Cell]:
        return [self.cell(CellAddress.from_index(k, i)) for i in range(cell_count(k))]

    @property
    def cells(self) -> list[Cell]:
        """The cells forming the edges of G_n."""
        return self.cells_at(self.level + 1)

    def graph_at(self, k: int) -> Multigraph:
        """G_k for any ``k <= level``."""
        if not 0 <= k <= self.level:
            raise DomainError(f"level {k} outside 0..{self.level}")
        u, v = self.endpoints[k]
        return Multigraph(vertex_count(k), k + 1, u, v)

    @property
    def graph(self) -> Multigraph:
        return self.graph_at(self.level)

    def to_json(self) -> str:
        return json.dumps(self.graph.to_dict(self.level))


def build_filtration(n: int, max_level: int = MAX_LEVEL) -> Filtration:
    """Build the cell structure down to level ``n + 1`` and the graph G_n."""
    if n < 0:
        raise DomainError(f"level must be nonnegative, got {n}")
    if n > max_level:
        raise CapacityError(f"level {n} exceeds the memory budget (max {max_level})")
    return Filtration(n, tuple(_level_endpoints(n + 1)))


def build_graph(n: int, max_level: int = MAX_LEVEL) -> Multigraph:
    return build_filtration(n, max_level).graph
