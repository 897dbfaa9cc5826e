"""P2-P1 (Taylor-Hood) spaces on triangle meshes."""

from __future__ import annotations

import numpy as np

from .mesh import TriangularMesh

# Symmetric 6-point rule, exact for degree 4; weights sum to 1 (scale by area).
_A, _WA = 0.445948490915965, 0.223381589678011
_B, _WB = 0.091576213509771, 0.109951743655322
QUAD_POINTS = np.array([
    [_A, _A], [1 - 2 * _A, _A], [_A, 1 - 2 * _A],
    [_B, _B], [1 - 2 * _B, _B], [_B, 1 - 2 * _B],
])
QUAD_WEIGHTS = np.array([_WA] * 3 + [_WB] * 3)

# 3-point Gauss-Legendre on [0, 1], exact for degree 5.
GAUSS_1D = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
GAUSS_1D_W = np.array([5.0, 8.0, 5.0]) / 18.0


def barycentric(points: np.ndarray) -> np.ndarray:
    """(nq, 3) barycentric coordinates of reference points (xi, eta)."""
    xi, eta = points[:, 0], points[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


def p2_values(lam: np.ndarray) -> np.ndarray:
    """P2 basis at barycentric points: vertices 0..2, then edges (0,1), (1,2), (2,0)."""
    l0, l1, l2 = lam.T
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def p2_dlambda(lam: np.ndarray) -> np.ndarray:
    """(nq, 6, 3) derivatives of the P2 basis with respect to each barycentric coordinate."""
    nq = lam.shape[0]
    D = np.zeros((nq, 6, 3))
    for i in range(3):
        D[:, i, i] = 4 * lam[:, i] - 1
    for e, (i, j) in enumerate([(0, 1), (1, 2), (2, 0)]):
        D[:, 3 + e, i] = 4 * lam[:, j]
        D[:, 3 + e, j] = 4 * lam[:, i]
    return D


def edge_p2_values(s: np.ndarray) -> np.ndarray:
    """P2 trace on an edge parametrised by s in [0, 1]: (start, end, midpoint)."""
    return np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])


class TaylorHoodSpace:
    """Degree-of-freedom maps and element geometry for the P2-P1 pair.

    Velocity nodes are the mesh vertices followed by edge midpoints; the
    velocity vector is ordered ``[u_x at all nodes, u_y at all nodes]``.
    Pressure lives on the vertices.
    """

    def __init__(self, mesh: TriangularMesh):
        self.mesh = mesh
        nv = mesh.n_vertices
        edges, tri_edges = mesh.edges()
        self.edges = edges
        self.n_nodes = nv + len(edges)
        self.nodes = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
        self.cell_nodes = np.column_stack([mesh.triangles, nv + tri_edges])  # (nt, 6)
        self.cell_pressure = mesh.triangles.copy()

        # boundary facets -> (start, end, midpoint) nodes
        key = {tuple(e): nv + i for i, e in enumerate(edges)}
        f = mesh.boundary_facets
        mids = np.array([key[tuple(sorted(e))] for e in f], dtype=np.int64)
        self.facet_nodes = np.column_stack([f[:, 0], f[:, 1], mids])

        # geometry
        p = mesh.vertices[mesh.triangles]
        self.areas = mesh.signed_areas()
        if np.any(self.areas <= 0):
            raise ValueError("mesh has non-positive triangle areas")
        x, y = p[..., 0], p[..., 1]
        twoA = 2 * self.areas
        grad_lam = np.empty((mesh.n_triangles, 3, 2))
        grad_lam[:, 0] = np.column_stack([y[:, 1] - y[:, 2], x[:, 2] - x[:, 1]]) / twoA[:, None]
        grad_lam[:, 1] = np.column_stack([y[:, 2] - y[:, 0], x[:, 0] - x[:, 2]]) / twoA[:, None]
        grad_lam[:, 2] = np.column_stack([y[:, 0] - y[:, 1], x[:, 1] - x[:, 0]]) / twoA[:, None]
        self.grad_lambda = grad_lam

        lam = barycentric(QUAD_POINTS)
        self.quad_lambda = lam                      # (nq, 3) = P1 basis values
        self.phi = p2_values(lam)                   # (nq, 6)
        self.grad_phi = np.einsum("qil,eld->eqid", p2_dlambda(lam), grad_lam)  # (nt, nq, 6, 2)
        self.wdet = self.areas[:, None] * QUAD_WEIGHTS[None, :]  # (nt, nq)
        self.quad_xy = np.einsum("ql,eld->eqd", lam, p)         # (nt, nq, 2)

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_pressure(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_dofs(self) -> int:
        return self.n_velocity + self.n_pressure

    def cell_velocity_dofs(self) -> np.ndarray:
        """(nt, 12) global velocity dofs, local index ``c*6 + i``."""
        return np.concatenate([self.cell_nodes, self.cell_nodes + self.n_nodes], axis=1)

    def cell_pressure_dofs(self) -> np.ndarray:
        return self.n_velocity + self.cell_pressure

    def boundary_nodes(self, tags) -> np.ndarray:
        """Sorted unique velocity nodes on facets carrying any of ``tags``."""
        sel = np.isin(self.mesh.facet_tags, list(tags))
        return np.unique(self.facet_nodes[sel])
