"""Taylor-Hood semi-discretization of the incompressible Navier-Stokes equations.

Residual, with ``u`` the velocity and ``p`` the pressure coefficients::

    R_u = M du/dt + nu A u + C(u) u + B^T p - F(t)
    R_p = B u

where ``m(w,v) = (w,v)``, ``a(u,v) = nu (grad u, grad v)``,
``b(p,v) = -(p, div v)`` and ``c(u,w,v) = ((u.grad) w, v)``. Dirichlet
velocity rows are replaced by ``u_i - g_i(t)``. Boundaries without a
Dirichlet condition are natural (do-nothing) boundaries, optionally
loaded with a prescribed traction.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from ..problem import ComponentPartition, DAEProblem
from .mesh import TriangularMesh
from .space import GAUSS_1D, GAUSS_1D_W, TaylorHoodSpace, edge_p2_values

VectorField = Callable[[np.ndarray, np.ndarray, float], tuple]


class NavierStokesProblem(DAEProblem):
    """Incompressible flow on a fixed mesh.

    Parameters
    ----------
    mesh : TriangularMesh
    nu : float
        Kinematic viscosity.
    dirichlet : mapping tag -> f(x, y, t) returning ``(ux, uy)``
        Later entries win on shared nodes.
    traction : mapping tag -> f(x, y, t) returning ``(gx, gy)``
        Neumann load ``(g, v)`` on the tagged facets.
    forcing : f(x, y, t) returning ``(fx, fy)``, optional
    advection : bool
        ``False`` gives the (unsteady) Stokes problem.
    """

    def __init__(self, mesh: TriangularMesh, nu: float,
                 dirichlet: Mapping[str, VectorField] | None = None,
                 traction: Mapping[str, VectorField] | None = None,
                 forcing: VectorField | None = None, advection: bool = True,
                 name: str = "navier-stokes"):
        self.mesh = mesh
        self.nu = float(nu)
        self.advection = advection
        self.forcing = forcing
        self.name = name
        self.space = V = TaylorHoodSpace(mesh)
        self._partition = ComponentPartition.from_sizes([("velocity", V.n_velocity),
                                                         ("pressure", V.n_pressure)])
        self._assemble_linear()
        self._setup_dirichlet(dict(dirichlet or {}))
        self._setup_traction(dict(traction or {}))

    # -- assembly ----------------------------------------------------------------------

    def _assemble_linear(self):
        V = self.space
        nt = self.mesh.n_triangles
        w, phi, gphi, lam = V.wdet, V.phi, V.grad_phi, V.quad_lambda

        ms = np.einsum("eq,qi,qj->eij", w, phi, phi)
        ks = np.einsum("eq,eqid,eqjd->eij", w, gphi, gphi)
        bl = -np.einsum("eq,qk,eqic->ekci", w, lam, gphi).reshape(nt, 3, 12)
        mp = np.einsum("eq,qk,ql->ekl", w, lam, lam)

        m12 = np.zeros((nt, 12, 12))
        m12[:, :6, :6] = ms
        m12[:, 6:, 6:] = ms
        a12 = np.zeros((nt, 12, 12))
        a12[:, :6, :6] = self.nu * ks
        a12[:, 6:, 6:] = self.nu * ks

        vdofs = V.cell_velocity_dofs()
        pdofs = V.cell_pressure_dofs()
        self._vdofs = vdofs
        N = V.n_dofs
        self._N = N

        # sparsity: velocity-velocity, pressure-velocity, velocity-pressure
        rows = np.concatenate([np.repeat(vdofs, 12, axis=1).ravel(),
                               np.repeat(pdofs, 12, axis=1).ravel(),
                               np.repeat(vdofs, 3, axis=1).ravel()])
        cols = np.concatenate([np.tile(vdofs, 12).ravel(),
                               np.tile(vdofs, 3).ravel(),
                               np.tile(pdofs, 12).ravel()])
        keys = rows.astype(np.int64) * N + cols
        ukeys, pos = np.unique(keys, return_inverse=True)
        urows = ukeys // N
        self._indices = (ukeys % N).astype(np.int32)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(urows, minlength=N))]).astype(np.int32)
        self._nnz = ukeys.size
        n_vv = nt * 144
        self._pos = pos
        self._pos_vv = pos[:n_vv]
        self._rows_of_data = urows

        lin_vals = np.concatenate([a12.ravel(), bl.ravel(), np.transpose(bl, (0, 2, 1)).ravel()])
        mass_vals = np.concatenate([m12.ravel(), np.zeros(2 * nt * 36)])
        self._data_linear = np.bincount(pos, lin_vals, minlength=self._nnz)
        self._data_mass = np.bincount(pos, mass_vals, minlength=self._nnz)

        self._wphi = w[:, :, None] * phi[None, :, :]                      # (nt, nq, 6)
        self._wphiphi = self._wphi[:, :, :, None] * phi[None, :, None, :]  # (nt, nq, 6, 6)

        self.linear_matrix = self._csr(self._data_linear)
        self.mass_matrix = self._csr(self._data_mass)
        nv = V.n_velocity
        self.velocity_mass = self.mass_matrix[:nv, :nv].tocsr()
        self.stiffness = self.linear_matrix[:nv, :nv].tocsr()
        self.divergence = self.linear_matrix[nv:, :nv].tocsr()
        self.pressure_mass = sp.coo_matrix(
            (mp.ravel(), (np.repeat(V.cell_pressure, 3, axis=1).ravel(),
                          np.tile(V.cell_pressure, 3).ravel())),
            shape=(V.n_pressure, V.n_pressure)).tocsr()

    def _csr(self, data) -> sp.csr_matrix:
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()), shape=(self._N, self._N))

    def _setup_dirichlet(self, dirichlet):
        V = self.space
        node_fn = {}
        for tag, fn in dirichlet.items():
            for n in V.boundary_nodes([tag]):
                node_fn[int(n)] = fn
        nodes = np.array(sorted(node_fn), dtype=np.int64)
        self._dir_nodes = nodes
        self._dir_groups = []
        for fn in dict.fromkeys(node_fn.values()):
            sel = np.array([node_fn[int(n)] is fn for n in nodes], dtype=bool)
            self._dir_groups.append((fn, np.flatnonzero(sel)))
        self._dir_dofs = np.concatenate([nodes, nodes + V.n_nodes]) if nodes.size else np.empty(0, np.int64)
        is_dir = np.zeros(self._N, dtype=bool)
        is_dir[self._dir_dofs] = True
        self._dir_row_pos = np.flatnonzero(is_dir[self._rows_of_data])
        cols = self._indices
        self._dir_diag_pos = self._dir_row_pos[cols[self._dir_row_pos] == self._rows_of_data[self._dir_row_pos]]
        if self._dir_diag_pos.size != self._dir_dofs.size:
            raise RuntimeError("Dirichlet rows are missing diagonal entries")

    def _setup_traction(self, traction):
        V = self.space
        self._traction = []
        for tag, fn in traction.items():
            sel = V.mesh.facet_tags == tag
            fnodes = V.facet_nodes[sel]
            xa = V.nodes[fnodes[:, 0]]
            xb = V.nodes[fnodes[:, 1]]
            length = np.linalg.norm(xb - xa, axis=1)
            pts = xa[:, None, :] + GAUSS_1D[None, :, None] * (xb - xa)[:, None, :]
            basis = edge_p2_values(GAUSS_1D)  # (ng, 3)
            weights = length[:, None] * GAUSS_1D_W[None, :]  # (nf, ng)
            self._traction.append((fn, fnodes, pts, basis, weights))

    # -- boundary data -----------------------------------------------------------------

    def dirichlet_values(self, t: float) -> np.ndarray:
        """Prescribed values on :meth:`constrained_dofs`, same ordering."""
        V = self.space
        nodes = self._dir_nodes
        vals = np.zeros((2, nodes.size))
        for fn, idx in self._dir_groups:
            xy = V.nodes[nodes[idx]]
            ux, uy = fn(xy[:, 0], xy[:, 1], t)
            vals[0, idx] = ux
            vals[1, idx] = uy
        return vals.ravel()

    def constrained_dofs(self) -> np.ndarray:
        return self._dir_dofs

    def apply_constraints(self, t, u):
        u = np.array(u, dtype=float)
        u[self._dir_dofs] = self.dirichlet_values(t)
        return u

    def load(self, t: float) -> np.ndarray:
        """Right-hand side ``(f, v) + (g, v)_boundary`` for every velocity test function."""
        V = self.space
        F = np.zeros(self._N)
        nn = V.n_nodes
        for fn, fnodes, pts, basis, weights in self._traction:
            gx, gy = fn(pts[..., 0], pts[..., 1], t)
            gx = np.broadcast_to(gx, weights.shape)
            gy = np.broadcast_to(gy, weights.shape)
            lx = np.einsum("fg,gk->fk", weights * gx, basis)
            ly = np.einsum("fg,gk->fk", weights * gy, basis)
            F[:nn] += np.bincount(fnodes.ravel(), lx.ravel(), minlength=nn)
            F[nn:2 * nn] += np.bincount(fnodes.ravel(), ly.ravel(), minlength=nn)
        if self.forcing is not None:
            fx, fy = self.forcing(V.quad_xy[..., 0], V.quad_xy[..., 1], t)
            f = np.stack([np.broadcast_to(fx, V.wdet.shape), np.broadcast_to(fy, V.wdet.shape)], axis=-1)
            loc = np.einsum("eq,qi,eqc->eci", V.wdet, V.phi, f).reshape(-1, 12)
            F[:2 * nn] += np.bincount(self._vdofs.ravel(), loc.ravel(), minlength=2 * nn)
        return F

    # -- advection ---------------------------------------------------------------------

    def _velocity_at_quadrature(self, u):
        V = self.space
        ue = u[self._vdofs].reshape(-1, 2, 6)  # (nt, c, i)
        uq = np.einsum("qi,eci->eqc", V.phi, ue)
        gu = np.einsum("eqid,eci->eqcd", V.grad_phi, ue)  # d u_c / d x_d
        return uq, gu

    def advection_vector(self, u: np.ndarray) -> np.ndarray:
        """``c(u, u, v)`` for every velocity test function, length N."""
        V = self.space
        uq, gu = self._velocity_at_quadrature(u)
        conv = np.einsum("eqd,eqcd->eqc", uq, gu)
        loc = np.einsum("eqi,eqc->eci", self._wphi, conv).reshape(-1, 12)
        return np.bincount(self._vdofs.ravel(), loc.ravel(), minlength=self._N)

    def _advection_jacobian_local(self, u):
        V = self.space
        uq, gu = self._velocity_at_quadrature(u)
        nt = self.mesh.n_triangles
        # c(du, u, v): phi_j d_d u_c phi_i
        t1 = np.einsum("eqij,eqcd->ecidj", self._wphiphi, gu, optimize=True)
        # c(u, du, v): delta_cd (u . grad phi_j) phi_i
        transport = np.einsum("eqd,eqjd->eqj", uq, V.grad_phi)
        t2 = np.einsum("eqi,eqj->eij", self._wphi, transport, optimize=True)
        t1[:, 0, :, 0, :] += t2
        t1[:, 1, :, 1, :] += t2
        return t1.reshape(nt, 12, 12)

    def trilinear(self, u: np.ndarray, w: np.ndarray, v: np.ndarray) -> float:
        """``c(u, w, v)`` for three velocity coefficient vectors (length n_velocity or N)."""
        V = self.space
        vals = []
        for x in (u, w, v):
            xe = np.asarray(x)[self._vdofs].reshape(-1, 2, 6)
            vals.append((np.einsum("qi,eci->eqc", V.phi, xe), np.einsum("eqid,eci->eqcd", V.grad_phi, xe)))
        (uq, _), (_, gw), (vq, _) = vals
        return float(np.einsum("eq,eqd,eqcd,eqc->", V.wdet, uq, gw, vq))

    # -- DAEProblem --------------------------------------------------------------------

    def partition(self):
        return self._partition

    def initial_state(self, t0):
        return self.apply_constraints(t0, np.zeros(self._N))

    def residual(self, t, udot, u):
        self._partition.check(u)
        self._partition.check(udot)
        r = self.mass_matrix @ udot + self.linear_matrix @ u - self.load(t)
        if self.advection:
            r += self.advection_vector(u)
        r[self._dir_dofs] = u[self._dir_dofs] - self.dirichlet_values(t)
        return r

    def jacobian(self, t, udot, u, shift):
        self._partition.check(u)
        data = shift * self._data_mass + self._data_linear
        if self.advection:
            data = data + np.bincount(self._pos_vv, self._advection_jacobian_local(u).ravel(),
                                      minlength=self._nnz)
        data[self._dir_row_pos] = 0.0
        data[self._dir_diag_pos] = 1.0
        return self._csr(data)

    def l2_norm(self, name, values):
        if name == "velocity":
            q = values @ (self.velocity_mass @ values)
        elif name == "pressure":
            q = values @ (self.pressure_mass @ values)
        else:
            raise KeyError(name)
        return float(np.sqrt(max(q, 0.0)))

    def split(self, u):
        """``(ux, uy, p)`` nodal arrays."""
        nn = self.space.n_nodes
        return u[:nn], u[nn:2 * nn], u[2 * nn:]
