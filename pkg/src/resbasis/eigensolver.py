"""Constrained eigen-solve for the discrete stress basis.

The pencil ``A1 c = lam A2 c`` is restricted to the null space of the
boundary constraints ``B c = 0``. Multipliers are only defined up to a
constant, so two extra coordinate rows pin ``mux`` and ``muy`` of element 0;
the constant is removed again afterwards.

Two routes are provided. Small problems project onto an explicit orthonormal
null-space basis ``Q`` and solve the reduced pencil densely. Large problems
keep the constraints as a bordered saddle-point system and run shift-invert
Arnoldi on it, which avoids the fill that ``Q^T A Q`` produces.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SHEAR_WEIGHT, DiscreteSystem, nodal_operators
from .exceptions import MismatchError, PartialSpectrumError, ResidualBasisError
from .fields import StressFieldNodal, read_id_table, write_field_csv
from .mesh import Mesh

log = logging.getLogger(__name__)

RANK_RTOL = 1e-10
DENSE_LIMIT = 800
CLUSTER_RTOL = 1e-6
# 1/lam below this fraction of the largest is an infinite eigenvalue
INFINITE_RTOL = 1e-7
# complex eigenvalues are a bug in the operators
IMAG_RTOL = 1e-6


def nullspace(B, rtol: float = RANK_RTOL) -> sp.csr_matrix:
    """Orthonormal basis of ``{c : B c = 0}``.

    Columns of ``B`` that are identically zero carry no constraint and get
    identity columns; the remaining block is handled with a dense SVD. The
    result is exactly as sparse as the constraint pattern allows.

    Parameters
    ----------
    B : (m, n) sparse or dense matrix
    rtol : float
        Singular values below ``rtol * s_max`` count as zero.

    Returns
    -------
    Q : (n, n - rank) sparse matrix with orthonormal columns.
    """
    B = sp.csc_matrix(B)
    B.eliminate_zeros()
    n = B.shape[1]
    active = np.nonzero(np.diff(B.indptr))[0]
    inactive = np.setdiff1d(np.arange(n), active)
    Q_free = sp.csr_matrix(
        (np.ones(len(inactive)), (inactive, np.arange(len(inactive)))),
        shape=(n, len(inactive)),
    )
    if active.size == 0:
        return Q_free
    Bd = B[:, active].toarray()
    _, s, Vt = la.svd(Bd, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    V0 = Vt[rank:].T  # (len(active), len(active) - rank)
    k = V0.shape[1]
    Q_act = sp.csr_matrix(
        (V0.ravel(), (np.repeat(active, k), np.tile(np.arange(k), len(active)))),
        shape=(n, k),
    )
    return sp.hstack([Q_free, Q_act], format="csr")


def gauge_rows(system: DiscreteSystem) -> sp.csr_matrix:
    """Coordinate rows fixing ``mux`` and ``muy`` of element 0."""
    L = system.layout
    cols = [L.mux().start, L.muy().start]
    return sp.csr_matrix(([1.0, 1.0], ([0, 1], cols)), shape=(2, L.size))


def constraint_matrix(system: DiscreteSystem) -> sp.csr_matrix:
    """Boundary constraints stacked with the multiplier gauge."""
    return sp.vstack([system.B, gauge_rows(system)], format="csr")


@dataclass(frozen=True, eq=False)
class SpectralBasisFEM:
    """Ordered eigenpairs on a mesh.

    Attributes
    ----------
    eigenvalues : (K,) ascending
    stress : (K, n_nodes, 3) nodal ``(sxx, syy, sxy)``, unit L2 norm
    multipliers : (K, n_elements, 2) elementwise ``(mux, muy)``
    mesh : Mesh
    """

    eigenvalues: np.ndarray
    stress: np.ndarray
    multipliers: np.ndarray
    mesh: Mesh

    def __len__(self):
        return len(self.eigenvalues)

    def eigenfield(self, k: int) -> StressFieldNodal:
        _check_index(self, k)
        return StressFieldNodal(self.mesh, self.stress[k], name=f"mode_{k}")

    def gram(self, M=None) -> np.ndarray:
        """L2 Gram matrix of the eigenfields (shear counted twice)."""
        M = _mass(self.mesh) if M is None else M
        return _weighted_products(self.stress, self.stress, M)

    def gradient_gram(self) -> np.ndarray:
        """Matrix of ``int grad phi_p : grad phi_q dA``."""
        K, _, _, _ = nodal_operators(self.mesh)
        return _weighted_products(self.stress, self.stress, K)

    def save(self, directory) -> None:
        """Write the CSV bundle: ``eigenvalues.csv``, ``mode_<k>.csv``, ``multipliers_<k>.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "eigenvalues.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "lambda"])
            for k, lam in enumerate(self.eigenvalues):
                w.writerow([k, f"{lam:.16e}"])
        for k in range(len(self)):
            write_field_csv(d / f"mode_{k}.csv", self.stress[k])
            write_field_csv(
                d / f"multipliers_{k}.csv",
                self.multipliers[k],
                header=("element_id", "mux", "muy"),
            )

    @classmethod
    def load(cls, directory, mesh: Mesh) -> "SpectralBasisFEM":
        d = Path(directory)
        path = d / "eigenvalues.csv"
        if not path.is_file():
            raise FileNotFoundError(f"no such file: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        lam = np.array([float(r[1]) for r in rows if r])
        stress = np.stack(
            [read_id_table(d / f"mode_{k}.csv", mesh.n_nodes, 3) for k in range(len(lam))]
        )
        mult = np.stack(
            [
                read_id_table(d / f"multipliers_{k}.csv", mesh.n_elements, 2, what="element")
                for k in range(len(lam))
            ]
        )
        return cls(lam, stress, mult, mesh)

    def write_vtk(self, path, k: int) -> None:
        """Legacy ASCII unstructured grid with quadratic quads (VTK cell type 23)."""
        _check_index(self, k)
        write_vtk(path, self.mesh, self.stress[k], self.multipliers[k], title=f"mode {k}")


def write_vtk(path, mesh: Mesh, stress, multipliers=None, title="stress field") -> None:
    """Write nodal stress (and optional elementwise multipliers) as legacy VTK."""
    stress = np.asarray(stress, dtype=float)
    n, e = mesh.n_nodes, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {n} double")
    lines += [f"{x:.16e} {y:.16e} 0.0" for x, y in mesh.nodes]
    lines.append(f"CELLS {e} {9 * e}")
    lines += ["8 " + " ".join(map(str, conn)) for conn in mesh.elements]
    lines.append(f"CELL_TYPES {e}")
    lines += ["23"] * e
    lines.append(f"POINT_DATA {n}")
    for j, name in enumerate(("sxx", "syy", "sxy")):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.16e}" for v in stress[:, j]]
    if multipliers is not None:
        mult = np.asarray(multipliers, dtype=float)
        lines.append(f"CELL_DATA {e}")
        lines.append("VECTORS mu double")
        lines += [f"{a:.16e} {b:.16e} 0.0" for a, b in mult]
    Path(path).write_text("\n".join(lines) + "\n")


def _check_index(basis, k):
    if not 0 <= k < len(basis):
        raise IndexError(f"mode index {k} out of range for a basis of {len(basis)} modes")


def _mass(mesh):
    _, M, _, _ = nodal_operators(mesh)
    return M


def _weighted_products(U, V, M):
    """``sum_j w_j U[:, :, j] M V[:, :, j]^T`` with weights (1, 1, 2)."""
    U = np.asarray(U)
    V = np.asarray(V)
    out = np.zeros((U.shape[0], V.shape[0]))
    for j, w in enumerate((1.0, 1.0, SHEAR_WEIGHT)):
        out += w * (U[:, :, j] @ (M @ V[:, :, j].T))
    return out


def rayleigh_energy(basis: SpectralBasisFEM, k: int) -> float:
    """``int grad phi_k : grad phi_k dA`` by element quadrature of the nodal interpolant."""
    _check_index(basis, k)
    return float(stress_energy(basis.mesh, basis.stress[k]))


def stress_energy(mesh: Mesh, stress) -> float:
    """Gradient energy of a nodal stress field, shear counted twice."""
    K, _, _, _ = nodal_operators(mesh)
    s = np.asarray(stress, dtype=float)[None]
    return float(_weighted_products(s, s, K)[0, 0])


# -- eigen-solve ------------------------------------------------------------------


def _dense_projected(A1, A2, Q):
    Q = sp.csr_matrix(Q)
    R1 = (Q.T @ A1 @ Q).toarray()
    R2 = (Q.T @ A2 @ Q).toarray()
    # largest 1/lam of R2 x = (1/lam) R1 x
    nu, W = la.eig(R2, R1)
    return nu, Q @ W


def _sparse_projected(A1, A2, Q, k, sigma):
    Q = sp.csr_matrix(Q)
    R1 = (Q.T @ A1 @ Q).tocsc()
    R2 = (Q.T @ A2 @ Q).tocsr()
    lu = spla.splu((R1 - sigma * R2).tocsc())
    op = spla.LinearOperator(R1.shape, matvec=lambda x: lu.solve(R2 @ x), dtype=float)
    w, W = _arpack(op, k)
    return w, Q @ W, sigma


def _bordered(A1, A2, C, k, sigma):
    N = A1.shape[0]
    m = C.shape[0]
    K = sp.bmat([[A1 - sigma * A2, C.T], [C, None]], format="csc")
    lu = spla.splu(K)
    pad = np.zeros(m)

    def matvec(x):
        return lu.solve(np.concatenate([A2 @ x, pad]))[:N]

    op = spla.LinearOperator((N, N), matvec=matvec, dtype=float)
    w, W = _arpack(op, k)
    return w, W, sigma


def _arpack(op, k):
    n = op.shape[0]
    # ask for a few spare vectors so clusters at the cut-off are complete
    nev = min(k + 4, n - 2)
    v0 = np.ones(n) / np.sqrt(n)
    try:
        return spla.eigs(op, k=nev, which="LM", v0=v0, tol=1e-13, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        log.warning("ARPACK converged %d of %d eigenpairs", len(exc.eigenvalues), nev)
        return exc.eigenvalues, exc.eigenvectors


def solve_eigen(
    system: DiscreteSystem,
    Q=None,
    k_requested: int = 10,
    *,
    mesh: Mesh | None = None,
    method: str = "auto",
    sigma: float = 0.0,
) -> SpectralBasisFEM:
    """Smallest-``lam`` eigenpairs of the constrained pencil.

    Parameters
    ----------
    system : DiscreteSystem
    Q : sparse matrix, optional
        Orthonormal null-space basis of the constraints. If it does not
        already fix the multiplier gauge it is restricted further.
    k_requested : int
    mesh : Mesh
        Needed to normalise the eigenfields; required.
    method : {"auto", "dense", "sparse"}
        ``auto`` goes dense when the unknown count is at most ``DENSE_LIMIT``.
    sigma : float
        Shift for the sparse route; eigenvalues closest to it are found first.

    Returns
    -------
    SpectralBasisFEM

    Raises
    ------
    PartialSpectrumError
        Fewer than ``k_requested`` finite positive eigenvalues exist or
        converged. The modes that were found are attached.
    """
    if mesh is None:
        raise ValueError("solve_eigen needs the mesh the system was assembled on")
    if mesh.n_nodes != system.layout.n_nodes or mesh.n_elements != system.layout.n_elements:
        raise MismatchError("mesh does not match the system's dof layout")
    k_requested = int(k_requested)
    if k_requested < 1:
        raise ValueError("k_requested must be at least 1")
    if method not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown method {method!r}")
    A1, A2 = system.A1.tocsr(), system.A2.tocsr()
    N = system.layout.size
    if method == "auto":
        method = "dense" if N <= DENSE_LIMIT else "sparse"

    if Q is not None:
        Q = sp.csr_matrix(Q)
        G = gauge_rows(system) @ Q
        if abs(G).sum() > 0:
            Q = (Q @ nullspace(G)).tocsr()
    if method == "dense":
        if Q is None:
            Q = nullspace(constraint_matrix(system))
        nu, V = _dense_projected(A1, A2, Q)
        shift = 0.0
    elif Q is not None:
        nu, V, shift = _sparse_projected(A1, A2, Q, k_requested, sigma)
    else:
        nu, V, shift = _bordered(A1, A2, constraint_matrix(system), k_requested, sigma)
    basis = _finalize(system, mesh, nu, np.asarray(V), shift, k_requested + 4)
    if len(basis) < k_requested:
        raise PartialSpectrumError(
            f"only {len(basis)} finite positive eigenvalues found, {k_requested} requested",
            result=basis,
        )
    if len(basis) > k_requested:
        basis = SpectralBasisFEM(
            basis.eigenvalues[:k_requested],
            basis.stress[:k_requested],
            basis.multipliers[:k_requested],
            mesh,
        )
    return basis


def _finalize(system, mesh, nu, V, shift, n_keep):
    """Turn raw ``1/(lam - shift)`` values into a normalised, ordered basis."""
    nu = np.asarray(nu)
    finite = np.isfinite(nu)
    nu, V = nu[finite], V[:, finite]
    scale = np.abs(nu).max() if nu.size else 0.0
    keep = np.abs(nu) > INFINITE_RTOL * scale
    nu, V = nu[keep], V[:, keep]
    lam = shift + 1.0 / nu
    pos = lam.real > 0
    lam, V = lam[pos], V[:, pos]
    order = np.argsort(lam.real, kind="stable")[:n_keep]
    lam, V = lam[order], V[:, order]
    bad = np.abs(lam.imag) > IMAG_RTOL * np.abs(lam)
    if bad.any():
        raise ResidualBasisError(
            f"complex eigenvalue {lam[bad][0]} encountered; the discrete operators are inconsistent"
        )
    lam = lam.real

    L = system.layout
    stress_dofs = slice(0, L.n_stress)
    M2 = system.A2[stress_dofs, stress_dofs]
    # Within each cluster of numerically equal eigenvalues, the real and
    # imaginary parts of the returned vectors all lie in the (real) eigenspace.
    # Pick an L2-orthonormal real basis of their span.
    V_real = np.empty(V.shape)
    start = 0
    for end in range(1, len(lam) + 1):
        if end < len(lam) and lam[end] - lam[end - 1] <= CLUSTER_RTOL * abs(lam[end]):
            continue
        W = np.hstack([V[:, start:end].real, V[:, start:end].imag])
        Ws = W[stress_dofs]
        G = Ws.T @ (M2 @ Ws)
        s, U = la.eigh(G)
        s, U = s[::-1][: end - start], U[:, ::-1][:, : end - start]
        V_real[:, start:end] = (W @ U) / np.sqrt(s)
        start = end
    V = V_real

    areas = mesh.element_areas()
    stress = np.empty((len(lam), L.n_nodes, 3))
    mult = np.empty((len(lam), L.n_elements, 2))
    for j in range(len(lam)):
        s, mu = L.split(V[:, j])
        s = s.copy()
        mu = mu.copy()
        flat = s.ravel()
        if flat[np.argmax(np.abs(flat))] < 0:
            s, mu = -s, -mu
        if system.boundary_terms:
            mu -= (areas @ mu) / areas.sum()
        stress[j], mult[j] = s, mu
    return SpectralBasisFEM(lam, stress, mult, mesh)


def compute_basis(mesh: Mesh, k: int = 10, **kwargs) -> SpectralBasisFEM:
    """Assemble and solve in one call."""
    from .assembly import assemble_system

    return solve_eigen(assemble_system(mesh), k_requested=k, mesh=mesh, **kwargs)


def angular_wavenumber(mesh: Mesh, stress, center=(0.0, 0.0), m_max: int | None = None):
    """Dominant circumferential wavenumber of a nodal field on a polar mesh.

    Nodes are grouped into rings of equal radius; each ring must be uniformly
    spaced in angle. The discrete Fourier power of all three polar components
    is summed over rings and the wavenumber with the largest share is
    returned together with that share.
    """
    field = StressFieldNodal(mesh, stress)
    polar = field.polar(center)
    d = mesh.nodes - np.asarray(center, dtype=float)
    r = np.round(np.hypot(d[:, 0], d[:, 1]), 9)
    t = np.arctan2(d[:, 1], d[:, 0])
    power = None
    for radius in np.unique(r):
        ring = np.nonzero(r == radius)[0]
        ring = ring[np.argsort(t[ring])]
        n_ring = len(ring)
        top = n_ring // 2 if m_max is None else min(m_max, n_ring // 2)
        coeffs = np.fft.rfft(polar[ring], axis=0)[: top + 1]
        p = (np.abs(coeffs) ** 2).sum(axis=1)
        if power is None:
            power = p
        else:
            n = min(len(power), len(p))
            power = power[:n] + p[:n]
    m = int(np.argmax(power))
    return m, float(power[m] / power.sum())
