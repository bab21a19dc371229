"""Resistance forms on the graphs G_n.

A resistance scheme assigns a positive resistance ``r_alpha`` to every arc
cell with ``r_alpha = r_alpha.1 + r_alpha.2``; loop cells carry no resistance.
At level n the edges of G_n are the level-(n+1) cells, and the energy is
``E_n(f) = sum_alpha (f(u_alpha) - f(v_alpha))**2 / r_alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import numerics
from .cells import (
    ARC,
    CellAddress,
    Multigraph,
    address_dynamics,
    build_graph,
    cell_count,
    dynamics_steps,
    loop_mask,
    m_exponent,
    vertex_count,
)
from .errors import DomainError, InputError, SchemeValidationError

BERNOULLI = "bernoulli"
BALANCED = "balanced"
LOCAL_RESISTANCE = "local-resistance"
MEASURE_KINDS = (BERNOULLI, BALANCED, LOCAL_RESISTANCE)


# --------------------------------------------------------------------------
# schemes


class ResistanceScheme:
    """Base class; subclasses provide ``resistance(addr)`` for arc cells."""

    name = "abstract"

    def resistance(self, addr: CellAddress) -> float:
        raise NotImplementedError

    def resistances(self, level: int) -> np.ndarray:
        """Resistances of all cells at ``level`` in index order (NaN on loops)."""
        loops = loop_mask(level)
        out = np.full(loops.size, np.nan)
        for i in np.flatnonzero(~loops):
            out[i] = self.resistance(CellAddress.from_index(level, int(i)))
        return out


@dataclass(frozen=True)
class Dyadic(ResistanceScheme):
    """``r_alpha = 2**-|alpha|``."""

    name = "dyadic"

    def resistance(self, addr: CellAddress) -> float:
        if addr.is_loop:
            raise DomainError(f"loop cell {addr} has no resistance")
        return 2.0 ** (-addr.level)

    def resistances(self, level: int) -> np.ndarray:
        out = np.full(cell_count(level), 2.0 ** (-level))
        out[loop_mask(level)] = np.nan
        return out


@dataclass(frozen=True)
class Conformal(ResistanceScheme):
    """``r_alpha = 2**(-m(alpha)/2) * r1``, invariant under the dynamics."""

    r1: float = 0.5
    name = "conformal"

    def __post_init__(self) -> None:
        if not self.r1 > 0:
            raise DomainError(f"r1 must be positive, got {self.r1}")

    def resistance(self, addr: CellAddress) -> float:
        return 2.0 ** (-m_exponent(addr) / 2) * self.r1

    def resistances(self, level: int) -> np.ndarray:
        return 2.0 ** (-m_exponents(level) / 2) * self.r1


def m_exponents(level: int) -> np.ndarray:
    """m-exponents of every cell at ``level`` (NaN on loops).

    Uses ``m(alpha.j) = m(alpha) + 2`` for arc cells ``alpha``.  Arc children
    of a loop cell ``beta`` are evaluated directly through the dynamics, which
    maps them to arc cells one level up.
    """
    out = np.array([0.0, 0.0, np.nan, np.nan])
    for k in range(2, level + 1):
        nxt = np.full(cell_count(k), np.nan)
        for i, parent_m in enumerate(out):
            base = 3 * i
            if not math.isnan(parent_m):
                nxt[base] = nxt[base + 1] = parent_m + 2
            else:
                parent = CellAddress.from_index(k - 1, i)
                nxt[base] = m_exponent(parent.child(1))
                nxt[base + 1] = m_exponent(parent.child(2))
        out = nxt
    return out


class CustomScheme(ResistanceScheme):
    """User-defined resistances.

    With ``forced=True`` (the default) ``rule`` is consulted only for the free
    values: the level-1 arcs, the first child of every arc cell, and both arc
    children of every loop cell.  The second child of an arc cell is forced to
    ``r_alpha - r_alpha.1``.  With ``forced=False`` the rule defines every
    arc resistance and additivity becomes a checked property.
    """

    name = "custom"

    def __init__(self, rule: Callable[[CellAddress], float], forced: bool = True):
        self.rule = rule
        self.forced = forced

    def resistance(self, addr: CellAddress) -> float:
        if addr.is_loop:
            raise DomainError(f"loop cell {addr} has no resistance")
        parent = addr.parent
        if not self.forced or parent is None or parent.is_loop or addr.tail[-1] == 1:
            return float(self.rule(addr))
        return self.resistance(parent) - self.resistance(parent.child(1))

    def resistances(self, level: int) -> np.ndarray:
        if not self.forced:
            return super().resistances(level)
        prev = None
        for k in range(1, level + 1):
            loops = loop_mask(k)
            cur = np.full(loops.size, np.nan)
            for i in np.flatnonzero(~loops):
                i = int(i)
                if k == 1:
                    cur[i] = float(self.rule(CellAddress.from_index(1, i)))
                    continue
                p, j = divmod(i, 3)
                if j == 1 and not math.isnan(prev[p]):
                    cur[i] = prev[p] - cur[i - 1]
                else:
                    cur[i] = float(self.rule(CellAddress.from_index(k, i)))
            prev = cur
        return prev

    @classmethod
    def from_splits(
        cls,
        top: Sequence[float] = (0.5, 0.5),
        side_loops: Sequence[Sequence[float]] = ((0.25, 0.25), (0.25, 0.25)),
        split: float | Mapping[str, float] = 0.5,
        loop_fraction: Sequence[float] = (0.5, 0.5),
    ) -> "CustomScheme":
        """Scheme built from split fractions.

        * ``top``: resistances of (1) and (2);
        * ``side_loops``: the pairs (r_31, r_32) and (r_41, r_42);
        * ``split``: fraction of ``r_alpha`` given to ``alpha.1`` (a constant or
          a mapping from address strings, missing entries default to 1/2);
        * ``loop_fraction``: the arc children of a loop ``beta.3`` (level >= 2)
          get ``loop_fraction[i] * r_beta.1``.

        The defaults reproduce the dyadic scheme.
        """
        top = tuple(float(x) for x in top)
        side = tuple(tuple(float(x) for x in pair) for pair in side_loops)
        lf = tuple(float(x) for x in loop_fraction)
        if len(top) != 2 or len(side) != 2 or any(len(p) != 2 for p in side) or len(lf) != 2:
            raise InputError("top, side_loops and loop_fraction must be pairs")

        def split_of(parent: CellAddress) -> float:
            if isinstance(split, Mapping):
                return float(split.get(str(parent), 0.5))
            return float(split)

        def free_value(addr: CellAddress) -> float:
            if addr.level == 1:
                return top[addr.head - 1]
            parent = addr.parent
            j = addr.tail[-1]
            if parent.is_loop:
                if parent.level == 1:
                    return side[parent.head - 3][j - 1]
                return lf[j - 1] * scheme.resistance(parent.parent.child(1))
            return split_of(parent) * scheme.resistance(parent)

        scheme = cls(free_value)
        return scheme


def non_summable_scheme() -> CustomScheme:
    """Positive, additive scheme whose maximal resistance decays only like
    ``1/level``.

    The loops (3), (1,3), (1,1,3), ... form a chain; the arc children of the
    chain loop at level l get resistance ``1/(l + 1)``.  All other free
    values follow the dyadic pattern (arc cells split in half, other loop
    children get ``2**-level``).
    """

    def free_value(addr: CellAddress) -> float:
        parent = addr.parent
        if parent is None:
            return 0.5
        if parent.is_loop:
            syms = parent.symbols
            if all(s == 1 for s in syms[:-1]) and syms[0] in (1, 3):
                return 1.0 / (parent.level + 1)
            return 2.0 ** (-addr.level)
        return scheme.resistance(parent) / 2

    scheme = CustomScheme(free_value)
    return scheme


def scheme_from_name(name: str, r1: float = 0.5) -> ResistanceScheme:
    if name == "dyadic":
        return Dyadic()
    if name == "conformal":
        return Conformal(r1)
    raise InputError(f"unknown scheme {name!r}")


SUMMABLE_RATIO = 0.75


@dataclass
class ValidationReport:
    ok: bool
    levels: int
    max_resistance: list[float] = field(default_factory=list)
    partial_sums: list[float] = field(default_factory=list)
    decay_ratio: float = math.nan
    summable: bool = True
    failure: SchemeValidationError | None = None


def validate(scheme: ResistanceScheme, up_to_level: int, raise_on_failure: bool = False) -> ValidationReport:
    """Check positivity, additivity and decay of the maximal resistance.

    Levels 1..up_to_level+1 are inspected (the last one being the edges of
    G_n).  Summability of the maximal resistances cannot be decided from
    finitely many levels; it is reported as plausible when the last
    level-to-level ratio of maximal resistances is at most
    ``SUMMABLE_RATIO``.
    """
    if up_to_level < 1:
        raise DomainError("validation needs at least one level")
    report = ValidationReport(True, up_to_level)
    prev = None
    try:
        for k in range(1, up_to_level + 2):
            r = scheme.resistances(k)
            arcs = np.flatnonzero(~loop_mask(k))
            bad = [i for i in arcs if not (r[i] > 0 and math.isfinite(r[i]))]
            if bad:
                raise SchemeValidationError(CellAddress.from_index(k, int(bad[0])), "nonpositive resistance")
            if prev is not None:
                parents = np.flatnonzero(~np.isnan(prev))
                split = r[3 * parents] + r[3 * parents + 1]
                err = np.abs(split - prev[parents])
                tol = 1e-12 * np.maximum(prev[parents], 1.0)
                if np.any(err > tol):
                    i = int(parents[np.argmax(err > tol)])
                    raise SchemeValidationError(CellAddress.from_index(k - 1, i), "additivity violated")
            if k <= up_to_level:
                report.max_resistance.append(float(np.nanmax(r)))
            prev = r
        for k in range(1, len(report.max_resistance)):
            if report.max_resistance[k] > report.max_resistance[k - 1] * (1 + 1e-12):
                raise SchemeValidationError(f"level {k + 1}", "maximal resistance increased")
    except SchemeValidationError as exc:
        report.ok = False
        report.failure = exc
        if raise_on_failure:
            raise
    report.partial_sums = np.cumsum(report.max_resistance).tolist()
    if len(report.max_resistance) >= 2:
        report.decay_ratio = report.max_resistance[-1] / report.max_resistance[-2]
        report.summable = report.decay_ratio <= SUMMABLE_RATIO
    return report


# --------------------------------------------------------------------------
# networks


@dataclass(frozen=True)
class Network:
    """G_n together with its arc resistances under one scheme."""

    scheme: ResistanceScheme
    level: int
    graph: Multigraph
    resistance: np.ndarray  # per edge, NaN on loops

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices

    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(edge index, u, v, r) for every arc edge."""
        idx = self.graph.arc_indices()
        return idx, self.graph.u[idx], self.graph.v[idx], self.resistance[idx]

    def laplacian(self) -> np.ndarray:
        _, u, v, r = self.arcs()
        c = 1.0 / r
        N = self.n_vertices
        L = np.zeros((N, N))
        np.add.at(L, (u, v), -c)
        np.add.at(L, (v, u), -c)
        np.add.at(L, (u, u), c)
        np.add.at(L, (v, v), c)
        return L

    def energy(self, f) -> float:
        f = _values(f, self.n_vertices)
        _, u, v, r = self.arcs()
        return float(np.sum((f[u] - f[v]) ** 2 / r))

    def energy_pairing(self, f, g) -> float:
        f = _values(f, self.n_vertices)
        g = _values(g, self.n_vertices)
        _, u, v, r = self.arcs()
        return float(np.sum((f[u] - f[v]) * (g[u] - g[v]) / r))

    def normal_derivative(self, f, x: int) -> float:
        if x not in (0, 1):
            raise DomainError("normal derivatives are taken at the boundary vertices 0 and 1")
        return float((self.laplacian() @ _values(f, self.n_vertices))[x])

    def _grounded_solver(self, ground: int):
        """Solver for the Laplacian with ``ground`` removed; one step of
        iterative refinement recovers the digits lost to conditioning."""
        L = self.laplacian()
        keep = np.delete(np.arange(self.n_vertices), ground)
        A = L[np.ix_(keep, keep)]
        fac = scipy.linalg.cho_factor(A)

        def solve(rhs: np.ndarray) -> np.ndarray:
            x = scipy.linalg.cho_solve(fac, rhs)
            return x + scipy.linalg.cho_solve(fac, rhs - A @ x)

        return keep, solve

    def effective_resistance(self, x: int, y: int) -> float:
        """Grounded solve: ``f(y) = 0``, unit current injected at ``x``."""
        self._check_vertex(x)
        self._check_vertex(y)
        if x == y:
            return 0.0
        keep, solve = self._grounded_solver(y)
        f = solve((keep == x).astype(float))
        return float(f[np.searchsorted(keep, x)])

    def resistance_table(self, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
        """Effective resistances for many pairs from one factorization."""
        pairs = [(int(x), int(y)) for x, y in pairs]
        for x, y in pairs:
            self._check_vertex(x)
            self._check_vertex(y)
        keep, solve = self._grounded_solver(0)
        verts = sorted({v for p in pairs for v in p if v != 0})
        pos = {v: i for i, v in enumerate(verts)}
        cols = np.zeros((keep.size, len(verts)))
        for v, i in pos.items():
            cols[v - 1, i] = 1.0
        G = solve(cols) if verts else cols
        sub = G[[v - 1 for v in verts], :] if verts else np.zeros((0, 0))

        def g(a: int, b: int) -> float:
            if a == 0 or b == 0:
                return 0.0
            return sub[pos[a], pos[b]]

        return np.array([g(x, x) + g(y, y) - 2 * g(x, y) for x, y in pairs])

    def _arc_csgraph(self, include_loops: bool = False):
        idx, u, v, r = self.arcs()
        best: dict[tuple[int, int], float] = {}
        for a, b, w in zip(u.tolist(), v.tolist(), r.tolist()):
            key = (min(a, b), max(a, b))
            if w < best.get(key, math.inf):
                best[key] = w
        rows, cols, data = [], [], []
        for (a, b), w in best.items():
            rows += [a, b]
            cols += [b, a]
            data += [w, w]
        N = self.n_vertices
        if include_loops:
            # each loop becomes a detour to an auxiliary vertex across its circle
            loops = self.graph.loop_indices()
            kids = self.scheme.resistances(self.level + 2)
            for k, i in enumerate(loops.tolist()):
                b = int(self.graph.u[i])
                half = (kids[3 * i] + kids[3 * i + 1]) / 2
                rows += [b, N + k]
                cols += [N + k, b]
                data += [half, half]
            N += loops.size
        return coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()

    def local_metric(self, x: int, y: int) -> float:
        self._check_vertex(x)
        self._check_vertex(y)
        d = dijkstra(self._arc_csgraph(), directed=False, indices=x)
        return float(d[y])

    def local_metric_table(self, sources: Sequence[int], include_loops: bool = False) -> np.ndarray:
        """Rows of S from each source to every vertex of V_n."""
        d = dijkstra(self._arc_csgraph(include_loops), directed=False, indices=list(sources))
        return d[:, : self.n_vertices]

    def geodesic(self, x: int, y: int) -> list[int]:
        """Edge indices of a shortest arc path from ``x`` to ``y``."""
        G = self._arc_csgraph()
        _, pred = dijkstra(G, directed=False, indices=x, return_predecessors=True)
        idx, u, v, r = self.arcs()
        best: dict[tuple[int, int], int] = {}
        for e, a, b, w in zip(idx.tolist(), u.tolist(), v.tolist(), r.tolist()):
            key = (min(a, b), max(a, b))
            if key not in best or w < self.resistance[best[key]]:
                best[key] = e
        path = []
        cur = y
        while cur != x:
            prev = int(pred[cur])
            if prev < 0:
                raise DomainError(f"vertex {y} is unreachable from {x}")
            path.append(best[(min(prev, cur), max(prev, cur))])
            cur = prev
        return path[::-1]

    def _check_vertex(self, x: int) -> None:
        if not 0 <= x < self.n_vertices:
            raise DomainError(f"vertex {x} not in V_{self.level}")


def _values(f, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise InputError(f"expected {n} vertex values, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InputError("vertex values must be finite")
    return f


def network(scheme: ResistanceScheme, n: int) -> Network:
    graph = build_graph(n)
    return Network(scheme, n, graph, scheme.resistances(n + 1))


def laplacian(scheme: ResistanceScheme, n: int) -> np.ndarray:
    return network(scheme, n).laplacian()


def trace_form(scheme: ResistanceScheme, from_level: int, to_level: int) -> np.ndarray:
    """Trace of the level-``from_level`` energy onto ``V_to_level``."""
    if to_level > from_level:
        raise DomainError("the trace goes from a finer to a coarser level")
    L = laplacian(scheme, from_level)
    return numerics.schur(L, np.arange(vertex_count(to_level)))


def effective_resistance(scheme: ResistanceScheme, n: int, x: int, y: int) -> float:
    return network(scheme, n).effective_resistance(x, y)


def local_metric(scheme: ResistanceScheme, n: int, x: int, y: int) -> float:
    return network(scheme, n).local_metric(x, y)


def harmonic_extension(scheme: ResistanceScheme, values, m: int, n: int) -> np.ndarray:
    """Extend values on V_m to the energy minimizer on V_n.

    For an arc cell ``alpha = (u, v)`` born vertex ``w`` satisfies
    ``r_alpha f(w) = r_alpha.2 f(u) + r_alpha.1 f(v)``; on a loop cell the
    new vertex copies its base value.
    """
    if m > n:
        raise DomainError("target level must not be coarser than the source level")
    f = np.empty(vertex_count(n))
    f[: vertex_count(m)] = _values(values, vertex_count(m))
    graph = build_graph(n)
    for k in range(m + 1, n + 1):
        # the cells of level k are the edges of G_(k-1)
        r_parent = scheme.resistances(k)
        r_kids = scheme.resistances(k + 1)
        G = build_graph(k - 1) if k - 1 < n else graph
        u, v = G.u, G.v
        w = vertex_count(k - 1) + np.arange(cell_count(k))
        loops = loop_mask(k)
        r1 = r_kids[0::3]
        r2 = r_kids[1::3]
        arc_val = (r2 * f[u] + r1 * f[v]) / r_parent
        f[w] = np.where(loops, f[u], arc_val)
    return f


def energy(scheme: ResistanceScheme, n: int, f) -> float:
    return network(scheme, n).energy(f)


def normal_derivative(scheme: ResistanceScheme, n: int, f, x: int) -> float:
    return network(scheme, n).normal_derivative(f, x)


def minimizer(scheme: ResistanceScheme, n: int, values, m: int) -> np.ndarray:
    """Energy minimizer with prescribed values on V_m by a direct linear solve."""
    L = laplacian(scheme, n)
    nb = vertex_count(m)
    f = np.zeros(L.shape[0])
    f[:nb] = _values(values, nb)
    if nb < L.shape[0]:
        Lii = L[nb:, nb:]
        f[nb:] = scipy.linalg.solve(Lii, -L[nb:, :nb] @ f[:nb], assume_a="pos")
    return f


# --------------------------------------------------------------------------
# measures


def bernoulli(addr: CellAddress) -> Fraction:
    return Fraction(1, cell_count(addr.level))


def balanced(addr: CellAddress) -> Fraction:
    """Balanced invariant measure: halves at each dynamics step."""
    k = dynamics_steps(addr)
    cur = addr
    for _ in range(k):
        cur = address_dynamics(cur)
    base = Fraction(1, 6) if cur.head in (1, 2) else Fraction(1, 3)
    return base / 2**k


def spine_length(addr: CellAddress, scheme: ResistanceScheme) -> float:
    """Local resistance measure of the spine of an arc cell."""
    if addr.is_loop:
        raise DomainError(f"{addr} is a loop cell; ask for its circle instead")
    return scheme.resistance(addr)


def circle_length(addr: CellAddress, scheme: ResistanceScheme) -> float:
    """Local resistance measure of the circle of a loop cell."""
    if not addr.is_loop:
        raise DomainError(f"{addr} is an arc cell; ask for its spine instead")
    return scheme.resistance(addr.child(1)) + scheme.resistance(addr.child(2))


def central_circle_length(scheme: ResistanceScheme) -> float:
    return scheme.resistance(CellAddress.of(1)) + scheme.resistance(CellAddress.of(2))


def measure(cell: CellAddress, kind: str, scheme: ResistanceScheme | None = None, part: str | None = None):
    """Evaluate a measure on a cell.

    ``bernoulli`` and ``balanced`` return exact fractions.  The local resistance
    measure is infinite on whole loop cells, so ``part`` must select the spine
    of an arc cell or the circle of a loop cell.
    """
    if kind == BERNOULLI:
        return bernoulli(cell)
    if kind == BALANCED:
        return balanced(cell)
    if kind == LOCAL_RESISTANCE:
        if scheme is None:
            raise DomainError("the local resistance measure needs a scheme")
        if cell.is_loop:
            if part != "circle":
                raise DomainError(f"local resistance measure of loop cell {cell} is not finite")
            return circle_length(cell, scheme)
        if part not in (None, "spine"):
            raise DomainError(f"arc cell {cell} has no circle")
        return spine_length(cell, scheme)
    raise InputError(f"unknown measure kind {kind!r}")


def measure_table(level: int, kind: str, scheme: ResistanceScheme | None = None) -> list[tuple[str, str, object]]:
    """Rows ``(address, part, value)`` over every cell of ``level``."""
    rows = []
    for i in range(cell_count(level)):
        addr = CellAddress.from_index(level, i)
        if kind == LOCAL_RESISTANCE:
            part = "circle" if addr.is_loop else "spine"
            rows.append((str(addr), part, measure(addr, kind, scheme, part)))
        else:
            rows.append((str(addr), addr.kind, measure(addr, kind, scheme)))
    return rows


__all__ = [
    "ARC",
    "BALANCED",
    "BERNOULLI",
    "LOCAL_RESISTANCE",
    "Conformal",
    "CustomScheme",
    "Dyadic",
    "Network",
    "ResistanceScheme",
    "ValidationReport",
    "balanced",
    "bernoulli",
    "circle_length",
    "effective_resistance",
    "energy",
    "harmonic_extension",
    "laplacian",
    "local_metric",
    "m_exponents",
    "measure",
    "measure_table",
    "minimizer",
    "network",
    "non_summable_scheme",
    "normal_derivative",
    "scheme_from_name",
    "spine_length",
    "trace_form",
    "validate",
]
