"""Mixed Q8/P0 discretization of the constrained stress eigenproblem.

Unknown layout ``c = [sxx (n), syy (n), sxy (n), mux (e), muy (e)]``: nodal
stress values and elementwise-constant multipliers. Rows are the weak forms
of the three component equations ``-lap(sigma) + sym grad(mu) = lam sigma``
tested with each nodal shape function (boundary line integrals from the
integration by parts kept), followed by the two equilibrium equations tested
with each element indicator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyError, InvalidGeometryError
from .mesh import EDGE_NODES, Mesh

# Tensor inner product counts the shear component twice.
SHEAR_WEIGHT = 2.0


@dataclass(frozen=True)
class DofLayout:
    n_nodes: int
    n_elements: int

    @property
    def n_stress(self) -> int:
        return 3 * self.n_nodes

    @property
    def size(self) -> int:
        return 3 * self.n_nodes + 2 * self.n_elements

    def sxx(self):
        return slice(0, self.n_nodes)

    def syy(self):
        return slice(self.n_nodes, 2 * self.n_nodes)

    def sxy(self):
        return slice(2 * self.n_nodes, 3 * self.n_nodes)

    def mux(self):
        return slice(3 * self.n_nodes, 3 * self.n_nodes + self.n_elements)

    def muy(self):
        return slice(3 * self.n_nodes + self.n_elements, self.size)

    def split(self, c):
        """Return ``(stress (n, 3), multipliers (e, 2))`` from a dof vector."""
        c = np.asarray(c)
        n, e = self.n_nodes, self.n_elements
        stress = c[: 3 * n].reshape(3, n).T
        mult = c[3 * n :].reshape(2, e).T
        return stress, mult

    def join(self, stress, mult=None):
        stress = np.asarray(stress, dtype=float)
        if mult is None:
            mult = np.zeros((self.n_elements, 2))
        return np.concatenate([stress.T.ravel(), np.asarray(mult, dtype=float).T.ravel()])


@dataclass(frozen=True)
class DiscreteSystem:
    """Operators of the pencil ``A1 c = lam A2 c`` plus constraints ``B c = 0``."""

    A1: sp.csr_matrix
    A2: sp.csr_matrix
    B: sp.csr_matrix
    layout: DofLayout
    boundary_nodes: np.ndarray
    boundary_terms: bool = True


def _coo_blocks(elements, values):
    """Scatter per-element (8 x 8) blocks into COO triplets."""
    rows = np.repeat(elements, 8, axis=1).ravel()
    cols = np.tile(elements, (1, 8)).ravel()
    return rows, cols, values.ravel()


def element_matrices(mesh: Mesh):
    """Stiffness, mass and divergence blocks for every element.

    Returns ``(Ke, Me, Dx, Dy)`` with ``Ke, Me`` of shape ``(e, 8, 8)`` and
    ``Dx[q, p] = int_{e_q} dN_p/dx dA`` of shape ``(e, 8)``.
    """
    try:
        N, dNdx, wdet = mesh.element_geometry()
    except InvalidGeometryError as exc:
        raise AssemblyError(str(exc)) from exc
    Ke = np.einsum("eq,eqpi,eqri->epr", wdet, dNdx, dNdx)
    Me = np.einsum("eq,qp,qr->epr", wdet, N, N)
    Dx = np.einsum("eq,eqp->ep", wdet, dNdx[..., 0])
    Dy = np.einsum("eq,eqp->ep", wdet, dNdx[..., 1])
    return Ke, Me, Dx, Dy


def _boundary_blocks(mesh: Mesh):
    """Boundary integrals from integration by parts.

    ``F[p, r] = oint N_p dN_r/dn ds`` (nodal, n x n) and
    ``Bx[p, q] = oint_{e_q} N_p n_x ds`` (n x e), likewise ``By``.
    """
    n, e = mesh.n_nodes, mesh.n_elements
    fr, fc, fv = [], [], []
    br, bc, bxv, byv = [], [], [], []
    for edge in mesh.boundary_edges:
        N, dNdx, ds, normals, _ = mesh.edge_geometry(edge)
        conn = mesh.elements[edge.element]
        dNdn = np.einsum("gri,gi->gr", dNdx, normals)
        F = np.einsum("g,gp,gr->pr", ds, N, dNdn)
        fr.append(np.repeat(conn, 8))
        fc.append(np.tile(conn, 8))
        fv.append(F.ravel())
        br.append(conn)
        bc.append(np.full(8, edge.element))
        bxv.append(np.einsum("g,gp->p", ds * normals[:, 0], N))
        byv.append(np.einsum("g,gp->p", ds * normals[:, 1], N))
    if not fr:
        raise AssemblyError("mesh has no boundary edges")
    F = sp.coo_matrix((np.concatenate(fv), (np.concatenate(fr), np.concatenate(fc))), shape=(n, n))
    rows, cols = np.concatenate(br), np.concatenate(bc)
    Bx = sp.coo_matrix((np.concatenate(bxv), (rows, cols)), shape=(n, e))
    By = sp.coo_matrix((np.concatenate(byv), (rows, cols)), shape=(n, e))
    return F.tocsr(), Bx.tocsr(), By.tocsr()


def nodal_operators(mesh: Mesh):
    """Global stiffness ``K``, mass ``M`` and divergence ``Dx, Dy`` (e x n)."""
    Ke, Me, Dxe, Dye = element_matrices(mesh)
    n, e = mesh.n_nodes, mesh.n_elements
    r, c, v = _coo_blocks(mesh.elements, Ke)
    K = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    r, c, v = _coo_blocks(mesh.elements, Me)
    M = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    er = np.repeat(np.arange(e), 8)
    ec = mesh.elements.ravel()
    Dx = sp.coo_matrix((Dxe.ravel(), (er, ec)), shape=(e, n)).tocsr()
    Dy = sp.coo_matrix((Dye.ravel(), (er, ec)), shape=(e, n)).tocsr()
    return K, M, Dx, Dy


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Scalar nodal mass matrix ``int N_p N_r dA``."""
    _, Me, _, _ = element_matrices(mesh)
    r, c, v = _coo_blocks(mesh.elements, Me)
    return sp.coo_matrix((v, (r, c)), shape=(mesh.n_nodes,) * 2).tocsr()


def assemble_system(mesh: Mesh, boundary_terms: bool = True) -> DiscreteSystem:
    """Assemble ``A1``, ``A2`` and the boundary constraint operator ``B``.

    With ``boundary_terms=False`` the line integrals produced by integration
    by parts are dropped; that variant is symmetric and is kept for
    comparison only.
    """
    layout = DofLayout(mesh.n_nodes, mesh.n_elements)
    K, M, Dx, Dy = nodal_operators(mesh)
    if boundary_terms:
        F, Bx, By = _boundary_blocks(mesh)
        Kb = K - F
        Gx = Bx - Dx.T
        Gy = By - Dy.T
    else:
        Kb = K
        Gx = -Dx.T
        Gy = -Dy.T
    w = SHEAR_WEIGHT
    Z = None
    A1 = sp.bmat(
        [
            [Kb, Z, Z, Gx, Z],
            [Z, Kb, Z, Z, Gy],
            [Z, Z, w * Kb, 0.5 * w * Gy, 0.5 * w * Gx],
            [Dx, Z, Dy, None, None],
            [Z, Dy, Dx, None, None],
        ],
        format="csr",
    )
    zero_e = sp.csr_matrix((mesh.n_elements, mesh.n_elements))
    A2 = sp.block_diag([M, M, w * M, zero_e, zero_e], format="csr")
    if A1.shape != (layout.size, layout.size):  # pragma: no cover - bmat guard
        raise AssemblyError("operator dimensions do not match the dof layout")
    B = assemble_constraints(mesh)
    for name, mat in (("A1", A1), ("A2", A2), ("B", B)):
        if not np.all(np.isfinite(mat.data)):
            raise AssemblyError(f"{name} has non-finite entries")
    return DiscreteSystem(A1, A2, B, layout, mesh.boundary_nodes, boundary_terms)


def assemble_constraints(mesh: Mesh) -> sp.csr_matrix:
    """Weak traction-free and natural boundary conditions, three rows per boundary node.

    Row ``3 k`` : oint (sxx nx + sxy ny) N_j ds
    Row ``3 k + 1`` : oint (sxy nx + syy ny) N_j ds
    Row ``3 k + 2`` : oint (d_n sigma : t x t) N_j ds
    for the ``k``-th boundary node ``j``; contributions from both edges meeting
    at a node are summed into the same row.
    """
    if not mesh.boundary_edges:
        raise AssemblyError("mesh has no boundary edges")
    n, e = mesh.n_nodes, mesh.n_elements
    bnodes = mesh.boundary_nodes
    row_of = -np.ones(n, dtype=np.int64)
    row_of[bnodes] = np.arange(len(bnodes))
    rows, cols, vals = [], [], []
    for edge in mesh.boundary_edges:
        N, dNdx, ds, normals, _ = mesh.edge_geometry(edge)
        conn = mesh.elements[edge.element]
        nx, ny = normals[:, 0], normals[:, 1]
        # only the three edge nodes have a nonzero trace
        local = EDGE_NODES[edge.local_edge]
        test = N[:, local] * ds[:, None]  # (g, 3)
        # traction rows
        tx_xx = np.einsum("gj,g,gr->jr", test, nx, N)
        tx_xy = np.einsum("gj,g,gr->jr", test, ny, N)
        ty_xy = np.einsum("gj,g,gr->jr", test, nx, N)
        ty_yy = np.einsum("gj,g,gr->jr", test, ny, N)
        # natural condition: d_n sigma : (t x t)
        gx, gy = dNdx[..., 0], dNdx[..., 1]
        c_xx = (nx * ny**2)[:, None] * gx + (ny**3)[:, None] * gy
        c_yy = (nx**3)[:, None] * gx + (nx**2 * ny)[:, None] * gy
        c_xy = -2 * (nx**2 * ny)[:, None] * gx - 2 * (nx * ny**2)[:, None] * gy
        nat_xx = np.einsum("gj,gr->jr", test, c_xx)
        nat_yy = np.einsum("gj,gr->jr", test, c_yy)
        nat_xy = np.einsum("gj,gr->jr", test, c_xy)
        for jj, node in enumerate(conn[local]):
            base = 3 * row_of[node]
            for row, offset, block in (
                (base, 0, tx_xx),
                (base, 2 * n, tx_xy),
                (base + 1, 2 * n, ty_xy),
                (base + 1, n, ty_yy),
                (base + 2, 0, nat_xx),
                (base + 2, n, nat_yy),
                (base + 2, 2 * n, nat_xy),
            ):
                rows.append(np.full(8, row))
                cols.append(conn + offset)
                vals.append(block[jj])
    B = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * len(bnodes), 3 * n + 2 * e),
    )
    B = B.tocsr()
    B.sum_duplicates()
    B.eliminate_zeros()
    return B
