"""Structured crossed-triangle meshes of unions of axis-aligned squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

INLET, OUTLET, WALL = "inlet", "outlet", "wall"


@dataclass(frozen=True)
class TriangularMesh:
    vertices: np.ndarray        # (nv, 2)
    triangles: np.ndarray       # (nt, 3), counterclockwise
    boundary_facets: np.ndarray  # (nb, 2) vertex pairs
    facet_tags: np.ndarray      # (nb,) tag strings

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def facet_lengths(self, tag: str | None = None) -> np.ndarray:
        f = self.boundary_facets if tag is None else self.boundary_facets[self.facet_tags == tag]
        return np.linalg.norm(self.vertices[f[:, 1]] - self.vertices[f[:, 0]], axis=1)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges (ne, 2) and the per-triangle edge index (nt, 3).

        Local edge j of a triangle joins local vertices (j, j+1 mod 3).
        """
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)  # (nt, 3, 2)
        flat = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)


def _boundary_facets(triangles: np.ndarray) -> np.ndarray:
    local = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(local, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inverse.ravel()] == 1
    # keep the orientation of the owning triangle (domain on the left)
    return local[once]


def crossed_mesh(x0: float, y0: float, h: float, nx: int, ny: int,
                 active: Callable[[float, float], bool],
                 tagger: Callable[[float, float], str]) -> TriangularMesh:
    """Mesh the active cells of an ``nx`` by ``ny`` grid of squares of side ``h``.

    Each square gets a centre vertex and four triangles. ``active`` is
    evaluated at cell centres, ``tagger`` at boundary-facet midpoints.
    """
    ic, jc = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    xc = x0 + (ic + 0.5) * h
    yc = y0 + (jc + 0.5) * h
    mask = np.vectorize(active)(xc, yc).astype(bool)
    cells = np.argwhere(mask)
    if cells.size == 0:
        raise ValueError("no active cells")

    used = np.zeros((nx + 1, ny + 1), dtype=bool)
    for di in (0, 1):
        for dj in (0, 1):
            used[cells[:, 0] + di, cells[:, 1] + dj] = True
    grid_id = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    gi, gj = np.nonzero(used)
    grid_id[gi, gj] = np.arange(gi.size)
    grid_xy = np.column_stack([x0 + gi * h, y0 + gj * h])
    centres = np.column_stack([x0 + (cells[:, 0] + 0.5) * h, y0 + (cells[:, 1] + 0.5) * h])
    vertices = np.vstack([grid_xy, centres])

    i, j = cells[:, 0], cells[:, 1]
    a = grid_id[i, j]
    b = grid_id[i + 1, j]
    c = grid_id[i + 1, j + 1]
    d = grid_id[i, j + 1]
    m = gi.size + np.arange(len(cells))
    triangles = np.stack([np.column_stack([a, b, m]), np.column_stack([b, c, m]),
                          np.column_stack([c, d, m]), np.column_stack([d, a, m])], axis=1).reshape(-1, 3)

    facets = _boundary_facets(triangles)
    mid = 0.5 * (vertices[facets[:, 0]] + vertices[facets[:, 1]])
    tags = np.array([tagger(x, y) for x, y in mid], dtype=object)
    return TriangularMesh(vertices, triangles, facets, tags)


def build_step_mesh(refine: int = 0) -> TriangularMesh:
    """Backward-facing step ``([0,18]x[2,5]) U ([4,18]x[0,2])`` in cm, cell size ``2**-refine``."""
    if refine < 0:
        raise ValueError("refine must be >= 0")
    h = 1.0 / 2**refine
    tol = 1e-9

    def tagger(x, y):
        if abs(x) < tol and y > 2.0 - tol:
            return INLET
        if abs(x - 18.0) < tol:
            return OUTLET
        return WALL

    return crossed_mesh(0.0, 0.0, h, int(round(18 / h)), int(round(5 / h)),
                        active=lambda x, y: y > 2.0 or x > 4.0, tagger=tagger)


def build_channel_mesh(refine: int = 0, length: float = 10.0, height: float = 2.5,
                       h0: float = 0.5) -> TriangularMesh:
    """Straight channel ``[0,length]x[0,height]``, inlet at x=0, outlet at x=length."""
    if refine < 0:
        raise ValueError("refine must be >= 0")
    h = h0 / 2**refine
    nx, ny = int(round(length / h)), int(round(height / h))
    if not (np.isclose(nx * h, length) and np.isclose(ny * h, height)):
        raise ValueError("channel dimensions must be multiples of the cell size")
    tol = 1e-9

    def tagger(x, y):
        if abs(x) < tol:
            return INLET
        if abs(x - length) < tol:
            return OUTLET
        return WALL

    return crossed_mesh(0.0, 0.0, h, nx, ny, active=lambda x, y: True, tagger=tagger)


def build_rectangle_mesh(x0, x1, y0, y1, n: int,
                         tagger: Callable[[float, float], str]) -> TriangularMesh:
    """Square-celled mesh of a rectangle with ``n`` cells along x."""
    h = (x1 - x0) / n
    ny = int(round((y1 - y0) / h))
    return crossed_mesh(x0, y0, h, n, ny, active=lambda x, y: True, tagger=tagger)
