"""Projection of stress fields onto a basis and convergence of the truncation error.

For a basis ``phi_i`` the coefficients are ``a_i = (s, phi_i) / (phi_i, phi_i)``
with the L2 tensor inner product, and the truncation error is
``E_N = |s - s_N|^2 / |s|^2`` where ``s_N`` keeps the first ``N`` terms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .assembly import SHEAR_WEIGHT, mass_matrix
from .exceptions import MismatchError
from .fields import RadialStressField, StressFieldNodal, angular_factors, radial_quadrature

# E_N below this is treated as exact zero in slope estimates
E_FLOOR = 1e-12


def _check_radial(f, g):
    if f.m != g.m:
        raise MismatchError(f"wavenumber mismatch: m={f.m} vs m={g.m}")
    if not (np.isclose(f.r_i, g.r_i) and np.isclose(f.r_o, g.r_o)):
        raise MismatchError("fields live on different annuli")


def _radial_samples(fields, **kwargs):
    """Shared quadrature for a list of radial fields: ``(r, w, values (k, 3, q))``."""
    first = fields[0]
    for f in fields[1:]:
        _check_radial(first, f)
    brk = sorted({b for f in fields for b in f.breakpoints})
    r, w = radial_quadrature(first.r_i, first.r_o, brk, **kwargs)
    return r, w, np.stack([f(r) for f in fields])


def _radial_weights(m, r, w):
    fn, fs = angular_factors(m)
    return w * r * np.array([[fn], [SHEAR_WEIGHT * fs], [fn]])


def _parity_mask(fields):
    par = np.array([f.parity for f in fields])
    return (par[:, None] == par[None, :]).astype(float)


def gram_matrix(fields, **kwargs) -> np.ndarray:
    """Matrix of L2 inner products between radial fields of one wavenumber."""
    r, w, vals = _radial_samples(list(fields), **kwargs)
    W = _radial_weights(fields[0].m, r, w)
    G = np.einsum("pjq,jq,sjq->ps", vals, W, vals)
    return G * _parity_mask(fields)


def _mesh_of(a, b):
    if a.mesh is not b.mesh and a.mesh != b.mesh:
        raise MismatchError("fields are defined on different meshes")
    return a.mesh


def nodal_inner(U, V, M) -> float:
    """Mass-weighted tensor product of nodal arrays of shape ``(n, 3)``."""
    return float(sum(w * U[:, j] @ (M @ V[:, j]) for j, w in enumerate((1.0, 1.0, SHEAR_WEIGHT))))


def inner_product(s1, s2, M=None) -> float:
    """L2 inner product ``int s1 : s2 dA`` with the shear component counted twice.

    Radial fields are integrated with composite Gauss quadrature in ``r``
    (weight ``r``) times the angular factors; nodal fields with element
    quadrature of their interpolants (``M`` may pass a precomputed mass matrix).
    """
    if isinstance(s1, RadialStressField) and isinstance(s2, RadialStressField):
        return float(gram_matrix([s1, s2])[0, 1])
    if isinstance(s1, StressFieldNodal) and isinstance(s2, StressFieldNodal):
        mesh = _mesh_of(s1, s2)
        M = mass_matrix(mesh) if M is None else M
        return nodal_inner(s1.values, s2.values, M)
    raise MismatchError("inner product needs two radial or two nodal fields")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Coefficients and truncation errors of a fit.

    Attributes
    ----------
    coefficients : (N,) array
    errors : (N,) array, ``errors[k]`` is ``E_{k+1}``
    norm2 : float, ``|s|^2`` of the target
    basis_id, field_id : str
    """

    coefficients: np.ndarray
    errors: np.ndarray
    norm2: float
    basis_id: str
    field_id: str
    basis: list = field(repr=False, default_factory=list)
    target: object = field(repr=False, default=None)

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    def error(self, N: int) -> float:
        """``E_N`` (1-based)."""
        if not 1 <= N <= self.n_terms:
            raise IndexError(f"N must be in [1, {self.n_terms}]")
        return float(self.errors[N - 1])

    def reconstruct(self, N: int):
        """Partial sum ``s_N`` as a field of the same kind as the target."""
        if not 0 <= N <= self.n_terms:
            raise IndexError(f"N must be in [0, {self.n_terms}]")
        a = self.coefficients[:N]
        if isinstance(self.target, StressFieldNodal):
            vals = np.tensordot(a, np.stack([b.values for b in self.basis[:N]]), axes=1) if N else 0 * self.target.values
            return StressFieldNodal(self.target.mesh, vals, name=f"{self.field_id}_N{N}")
        fields = self.basis[:N]
        t = self.target

        def combine(evaluate):
            def g(r):
                r = np.asarray(r, dtype=float)
                out = np.zeros((3,) + r.shape)
                for ai, f in zip(a, fields):
                    out += ai * evaluate(f, r)
                return out

            return g

        exact = all(f.gradient is not None for f in fields)
        return RadialStressField(
            t.m, t.r_i, t.r_o, combine(lambda f, r: f(r)), (), t.parity, f"{self.field_id}_N{N}",
            gradient=combine(lambda f, r: f.derivative(r)) if exact else None,
        )

    def write_convergence_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "E_N"])
            for k, e in enumerate(self.errors, start=1):
                w.writerow([k, f"{e:.16e}"])

    def write_reconstruction_csv(self, path, N: int, samples: int = 401) -> None:
        """Radial: ``r,srr,srt,stt`` on a uniform grid. Nodal: the field CSV schema."""
        rec = self.reconstruct(N)
        if isinstance(rec, StressFieldNodal):
            rec.to_csv(path)
            return
        r = np.linspace(rec.r_i, rec.r_o, samples)
        vals = rec(r)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "srr", "srt", "stt"])
            for j in range(samples):
                w.writerow([f"{r[j]:.16e}"] + [f"{v:.16e}" for v in vals[:, j]])


def _basis_fields(basis):
    if hasattr(basis, "fields"):
        return list(basis.fields()), f"annulus_m{basis.m}"
    return list(basis), "radial_list"


def fit(target, basis, N: int | None = None) -> FitResult:
    """Project ``target`` onto the first ``N`` basis functions.

    Parameters
    ----------
    target : RadialStressField or StressFieldNodal
    basis : AnnulusBasis, sequence of RadialStressField, or SpectralBasisFEM
    N : int, optional
        Number of terms; all basis functions by default.
    """
    if isinstance(target, StressFieldNodal):
        return fit_nodal(target, basis, N)
    fields, basis_id = _basis_fields(basis)
    N = len(fields) if N is None else int(N)
    if not 1 <= N <= len(fields):
        raise ValueError(f"N must be in [1, {len(fields)}]")
    fields = fields[:N]
    for f in fields:
        _check_radial(target, f)
    r, w, vals = _radial_samples([target] + fields)
    W = _radial_weights(target.m, r, w)
    s, phi = vals[0], vals[1:]
    same = np.array([f.parity == target.parity for f in fields], dtype=float)
    proj = np.einsum("jq,jq,pjq->p", s, W, phi) * same
    norms = np.einsum("pjq,jq,pjq->p", phi, W, phi)
    a = proj / norms
    norm2 = float(np.einsum("jq,jq,jq->", s, W, s))
    partial = np.cumsum(a[:, None, None] * phi * same[:, None, None], axis=0)
    resid = s[None] - partial
    errors = np.einsum("pjq,jq,pjq->p", resid, W, resid) / norm2
    return FitResult(a, errors, norm2, basis_id, target.name, fields, target)


def fit_nodal(target: StressFieldNodal, basis, N: int | None = None, M=None) -> FitResult:
    """Projection of a nodal field onto an FEM basis on the same mesh."""
    if target.mesh is not basis.mesh and target.mesh != basis.mesh:
        raise MismatchError("field and basis are defined on different meshes")
    N = len(basis) if N is None else int(N)
    if not 1 <= N <= len(basis):
        raise ValueError(f"N must be in [1, {len(basis)}]")
    M = mass_matrix(target.mesh) if M is None else M
    phi = np.asarray(basis.stress[:N])
    s = target.values
    wts = (1.0, 1.0, SHEAR_WEIGHT)

    def products(U, V):
        return sum(w * (U[..., j] @ (M @ V[..., j].T)) for j, w in enumerate(wts))

    proj = products(s[None], phi)[0]
    norms = np.einsum("pp->p", products(phi, phi))
    a = proj / norms
    norm2 = float(products(s[None], s[None])[0, 0])
    errors = np.empty(N)
    partial = np.zeros_like(s)
    for k in range(N):
        partial = partial + a[k] * phi[k]
        d = s - partial
        errors[k] = products(d[None], d[None])[0, 0] / norm2
    fields = [basis.eigenfield(k) for k in range(N)]
    return FitResult(a, errors, norm2, "fem", target.name, fields, target)


def convergence_report(result: FitResult, window: tuple[int, int] | None = None):
    """``(N, E_N)`` table and the log-log slope of ``E_N``.

    The slope is a least-squares fit of ``log E_N`` against ``log N`` over
    ``window`` (inclusive), by default the upper half of the range. Values
    below ``E_FLOOR`` are left out.

    Returns
    -------
    table : (N, 2) array
    slope : float (nan when fewer than two usable points)
    """
    n = result.n_terms
    Ns = np.arange(1, n + 1)
    table = np.column_stack([Ns, result.errors])
    lo, hi = window if window is not None else ((n + 1) // 2, n)
    sel = (Ns >= lo) & (Ns <= hi) & (result.errors > E_FLOOR)
    if sel.sum() < 2:
        return table, float("nan")
    slope = np.polyfit(np.log(Ns[sel]), np.log(result.errors[sel]), 1)[0]
    return table, float(slope)


def gibbs_overshoot(result: FitResult, N: int, r_jump: float, half_width: float | None = None,
                    samples: int = 4001) -> float:
    """Overshoot of the ``stt`` reconstruction around a jump, relative to the jump size.

    Inside ``[r_jump - h, r_jump + h]`` this is the amount by which ``s_N``
    exceeds the target's maximum plus the amount it falls below the target's
    minimum, divided by the absolute jump of the target at ``r_jump``.
    """
    t = result.target
    h = half_width if half_width is not None else 0.25 * (t.r_o - t.r_i)
    lo, hi = max(t.r_i, r_jump - h), min(t.r_o, r_jump + h)
    r = np.linspace(lo, hi, samples)
    target = t(r)[2]
    rec = result.reconstruct(N)(r)[2]
    eps = 1e-9 * (t.r_o - t.r_i)
    jump = abs(t(np.array([r_jump + eps]))[2, 0] - t(np.array([r_jump - eps]))[2, 0])
    over = max(rec.max() - target.max(), 0.0) + max(target.min() - rec.min(), 0.0)
    return float(over / jump)
