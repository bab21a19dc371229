"""Dynamical-plane geometry of ``P(z) = z**2 - 1``: fixed points, backward
orbits of ``a``, cell membership of Julia-set points, and a schematic planar
layout of the graphs G_n and G'_n."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cells import CellAddress, Multigraph, build_graph, cell_count, vertex_count
from .errors import CapacityError, DomainError
from .graphdir import LabeledGraph

MAX_ORBIT_DEPTH = 24


def fixed_points() -> tuple[float, float]:
    """The two fixed points ``a = (1 - sqrt 5)/2`` and ``b = (1 + sqrt 5)/2``."""
    r5 = math.sqrt(5.0)
    return (1 - r5) / 2, (1 + r5) / 2


A_POINT = fixed_points()[0]


def forward(z, steps: int = 1):
    for _ in range(steps):
        z = z * z - 1
    return z


def backward_orbit(n: int) -> np.ndarray:
    """All ``2**n`` points of ``P^-n{a}`` (complex array).

    Level ``k+1`` lists ``+sqrt(z+1)`` for every level-``k`` point, followed
    by the negatives, using the principal square root.
    """
    if not 0 <= n <= MAX_ORBIT_DEPTH:
        raise CapacityError(f"backward orbit depth must lie in 0..{MAX_ORBIT_DEPTH}")
    pts = np.array([complex(A_POINT)])
    for _ in range(n):
        r = np.sqrt(pts + 1)
        pts = np.concatenate([r, -r])
    return pts


def min_separation(points: np.ndarray) -> float:
    """Smallest distance between two distinct entries (collision scan)."""
    if points.size < 2:
        return math.inf
    xy = np.column_stack([points.real, points.imag])
    d, _ = cKDTree(xy).query(xy, k=2)
    return float(d[:, 1].min())


def level_one_cell(z: complex) -> int:
    """Level-1 cell containing a Julia-set point: 3 left of ``a``, 4 right of
    ``-a``, otherwise 1 in the upper and 2 in the lower half plane."""
    if z.real <= A_POINT:
        return 3
    if z.real >= -A_POINT:
        return 4
    return 1 if z.imag >= 0 else 2


_TAU_INV = {1: 1, 2: 2, 4: 3}


def locate(z: complex, level: int) -> CellAddress:
    """Address of the level-``level`` cell containing ``z`` (ties on cell
    boundaries are broken by the half-plane rule of :func:`level_one_cell`)."""
    if level < 1:
        raise DomainError("level must be at least 1")
    head = level_one_cell(z)
    if level == 1:
        return CellAddress(head)
    if head in (1, 2):
        image = locate(forward(z), level)
        if image.head != 3:
            # z sits on a cell boundary; the forward image landed across it
            return CellAddress(head, (1,) + image.tail[: level - 2])
        return CellAddress(head, image.tail)
    image = locate(forward(z), level - 1)
    if image.head == 3:
        return CellAddress(head, (3,) * (level - 1))
    return CellAddress(head, (_TAU_INV[image.head],) + image.tail)


def cell_fractions(points: np.ndarray, level: int) -> dict[CellAddress, float]:
    """Fraction of ``points`` falling in each cell of ``level``."""
    counts: dict[CellAddress, int] = {}
    for z in points:
        addr = locate(complex(z), level)
        counts[addr] = counts.get(addr, 0) + 1
    total = points.size
    return {a: c / total for a, c in sorted(counts.items())}


def left_fraction(points: np.ndarray) -> float:
    """Fraction of points with real part below ``Re a`` (the piece J_L)."""
    return float(np.mean(points.real < A_POINT))


# --------------------------------------------------------------------------
# schematic layout


@dataclass(frozen=True)
class Frames:
    """Each cell is an arc of a circle from angle ``t0`` to ``t1``; loop
    cells go once around their circle starting at the base point."""

    center: np.ndarray
    radius: np.ndarray
    t0: np.ndarray
    t1: np.ndarray


LOOP_RATIO = 1.0 / 3.0


def _level_one_frames() -> Frames:
    rho = LOOP_RATIO
    return Frames(
        center=np.array([0, 0, -(1 + rho), 1 + rho], dtype=complex),
        radius=np.array([1.0, 1.0, rho, rho]),
        t0=np.array([math.pi, math.pi, 0.0, math.pi]),
        t1=np.array([0.0, 2 * math.pi, 2 * math.pi, 3 * math.pi]),
    )


def _refine(fr: Frames) -> Frames:
    tm = (fr.t0 + fr.t1) / 2
    direction = np.exp(1j * tm)
    loop_r = fr.radius * LOOP_RATIO
    loop_c = fr.center + (fr.radius + loop_r) * direction
    loop_t0 = tm + math.pi
    center = np.stack([fr.center, fr.center, loop_c], axis=1).ravel()
    radius = np.stack([fr.radius, fr.radius, loop_r], axis=1).ravel()
    t0 = np.stack([fr.t0, tm, loop_t0], axis=1).ravel()
    t1 = np.stack([tm, fr.t1, loop_t0 + 2 * math.pi], axis=1).ravel()
    return Frames(center, radius, t0, t1)


def vertex_positions(n: int) -> np.ndarray:
    """Planar positions (complex) of V_n: ``a`` at (-1, 0), ``-a`` at (1, 0),
    each birth vertex at the angular midpoint of its cell."""
    if n < 0:
        raise DomainError("level must be nonnegative")
    if n > 10:
        raise CapacityError("layout level exceeds the memory budget")
    pos = np.empty(vertex_count(n), dtype=complex)
    pos[0], pos[1] = -1.0, 1.0
    fr = _level_one_frames()
    for k in range(1, n + 1):
        tm = (fr.t0 + fr.t1) / 2
        start = 2 * 3 ** (k - 1)
        pos[start : start + cell_count(k)] = fr.center + fr.radius * np.exp(1j * tm)
        if k < n:
            fr = _refine(fr)
    return pos


def layout(graph: Multigraph | LabeledGraph, style: str = "circles") -> np.ndarray:
    """``(N, 2)`` array of planar coordinates for the vertices of ``graph``."""
    if style != "circles":
        raise DomainError(f"unknown layout style {style!r}")
    if isinstance(graph, LabeledGraph):
        ids = np.asarray(graph.global_ids)
        level = 0
        while vertex_count(level) <= ids.max():
            level += 1
        pos = vertex_positions(level)[ids]
    else:
        pos = vertex_positions(graph.cell_level - 1)
    return np.column_stack([pos.real, pos.imag])


def graph_layout(n: int) -> np.ndarray:
    return layout(build_graph(n))
