"""Plain-text mesh and solution tables for external plotting.

Files (whitespace separated, one header line starting with ``#``):

* ``nodes.txt``     ``id x y``            mesh vertices
* ``elements.txt``  ``id v0 v1 v2``       triangles, counterclockwise
* ``boundary.txt``  ``v0 v1 tag``         boundary facets
* snapshot files    ``id x y ux uy p``    values at mesh vertices
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import TriangularMesh
from .navier_stokes import NavierStokesProblem


def write_mesh(mesh: TriangularMesh, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ids = np.arange(mesh.n_vertices)
    np.savetxt(d / "nodes.txt", np.column_stack([ids, mesh.vertices]),
               fmt=["%d", "%.17g", "%.17g"], header="id x y")
    np.savetxt(d / "elements.txt", np.column_stack([np.arange(mesh.n_triangles), mesh.triangles]),
               fmt="%d", header="id v0 v1 v2")
    with open(d / "boundary.txt", "w") as fh:
        fh.write("# v0 v1 tag\n")
        for (a, b), tag in zip(mesh.boundary_facets, mesh.facet_tags):
            fh.write(f"{a} {b} {tag}\n")


def write_snapshot(problem: NavierStokesProblem, u: np.ndarray, path, t: float | None = None) -> None:
    mesh = problem.mesh
    ux, uy, p = problem.split(u)
    nv = mesh.n_vertices
    table = np.column_stack([np.arange(nv), mesh.vertices, ux[:nv], uy[:nv], p])
    header = "id x y ux uy p" if t is None else f"t={t:.17g}\nid x y ux uy p"
    np.savetxt(path, table, fmt=["%d"] + ["%.17g"] * 5, header=header)


def read_snapshot(path) -> np.ndarray:
    return np.loadtxt(path, comments="#")
