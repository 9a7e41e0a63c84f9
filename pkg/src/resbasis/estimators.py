"""scikit-learn style wrappers: a stress basis as a fitted transformer.

``fit`` computes the basis, ``transform`` maps stress fields to expansion
coefficients, ``inverse_transform`` rebuilds fields from coefficients and
``score`` returns ``1 - mean(E_N)`` over the samples.

Samples are flattened field values. For :class:`FEMStressBasis` a sample is
the nodal array ``(n_nodes, 3)`` raveled row-major. For
:class:`AnnulusStressBasis` a sample is ``(srr, srt, stt)`` at the radii in
``radii_``, raveled component-major; :meth:`AnnulusStressBasis.sample`
builds it from a :class:`RadialStressField`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .annulus import scan_modes
from .assembly import SHEAR_WEIGHT, assemble_system, mass_matrix
from .eigensolver import solve_eigen
from .fields import R_INNER, R_OUTER, RadialStressField, angular_factors, radial_quadrature
from .mesh import Mesh


class _ProjectionMixin(TransformerMixin):
    """Orthogonal projection under the weighted L2 product ``_inner``."""

    def _inner(self, X, Y):
        raise NotImplementedError

    def transform(self, X):
        """Expansion coefficients ``a_i = (x, phi_i) / (phi_i, phi_i)``."""
        check_is_fitted(self, "components_")
        X = self._validate(X)
        return self._inner(X, self.components_) / self.component_norms_

    def inverse_transform(self, A):
        check_is_fitted(self, "components_")
        A = check_array(A, ensure_2d=True)
        if A.shape[1] > len(self.components_):
            raise ValueError(f"got {A.shape[1]} coefficients for {len(self.components_)} modes")
        return A @ self.components_[: A.shape[1]]

    def error_curve(self, X):
        """``E_N`` for ``N = 1..n_modes``, one row per sample."""
        check_is_fitted(self, "components_")
        X = self._validate(X)
        A = self.transform(X)
        norm2 = np.einsum("ii->i", np.atleast_2d(self._inner(X, X)))
        out = np.empty_like(A)
        partial = np.zeros_like(X)
        for k in range(A.shape[1]):
            partial = partial + A[:, k : k + 1] * self.components_[k]
            d = X - partial
            out[:, k] = np.einsum("ii->i", np.atleast_2d(self._inner(d, d))) / norm2
        return out

    def score(self, X, y=None):
        """``1 - mean E_N`` with all fitted modes."""
        return float(1.0 - self.error_curve(X)[:, -1].mean())

    def _validate(self, X):
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != self.components_.shape[1]:
            raise ValueError(
                f"X has {X.shape[1]} features, the fitted basis expects {self.components_.shape[1]}"
            )
        return X


class FEMStressBasis(_ProjectionMixin, BaseEstimator):
    """Discrete stress basis on a Q8 mesh.

    Parameters
    ----------
    mesh : Mesh
    n_modes : int
    method : {"auto", "dense", "sparse"}
        Passed to :func:`solve_eigen`.

    Attributes
    ----------
    eigenvalues_ : (n_modes,)
    components_ : (n_modes, 3 n_nodes) flattened nodal eigenfields
    basis_ : SpectralBasisFEM
    """

    def __init__(self, mesh: Mesh | None = None, n_modes: int = 10, method: str = "auto"):
        self.mesh = mesh
        self.n_modes = n_modes
        self.method = method

    def fit(self, X=None, y=None):
        """Compute the basis; ``X`` is accepted for API symmetry and ignored."""
        if not isinstance(self.mesh, Mesh):
            raise TypeError("FEMStressBasis needs a Mesh")
        if int(self.n_modes) < 1:
            raise ValueError("n_modes must be at least 1")
        system = assemble_system(self.mesh)
        self.basis_ = solve_eigen(system, k_requested=int(self.n_modes), mesh=self.mesh, method=self.method)
        self.eigenvalues_ = self.basis_.eigenvalues
        self.components_ = self.basis_.stress.reshape(len(self.basis_), -1)
        self._M = mass_matrix(self.mesh)
        self.component_norms_ = np.einsum("ii->i", self._inner(self.components_, self.components_))
        return self

    def _inner(self, X, Y):
        n = self.mesh.n_nodes
        Xr = np.asarray(X).reshape(len(X), n, 3)
        Yr = np.asarray(Y).reshape(len(Y), n, 3)
        return sum(w * Xr[:, :, j] @ (self._M @ Yr[:, :, j].T) for j, w in enumerate((1.0, 1.0, SHEAR_WEIGHT)))


class AnnulusStressBasis(_ProjectionMixin, BaseEstimator):
    """Semi-analytical basis of one wavenumber on an annulus.

    Parameters
    ----------
    m : int
    n_modes : int
    r_i, r_o : float

    Attributes
    ----------
    eigenvalues_ : (n_modes,)
    radii_ : quadrature radii used to sample fields
    components_ : (n_modes, 3 len(radii_)) sampled normalized modes
    basis_ : AnnulusBasis
    """

    def __init__(self, m: int = 3, n_modes: int = 50, r_i: float = R_INNER, r_o: float = R_OUTER):
        self.m = m
        self.n_modes = n_modes
        self.r_i = r_i
        self.r_o = r_o

    def fit(self, X=None, y=None):
        """Scan the modes; ``X`` is ignored."""
        self.basis_ = scan_modes(self.m, int(self.n_modes), r_i=self.r_i, r_o=self.r_o)
        self.eigenvalues_ = self.basis_.eigenvalues
        self.radii_, w = radial_quadrature(self.r_i, self.r_o)
        fn, fs = angular_factors(self.m)
        self._weights = np.concatenate([fn * w * self.radii_, SHEAR_WEIGHT * fs * w * self.radii_, fn * w * self.radii_])
        self.components_ = np.stack([f(self.radii_).ravel() for f in self.basis_.fields()])
        self.component_norms_ = np.einsum("ii->i", self._inner(self.components_, self.components_))
        return self

    def sample(self, fields) -> np.ndarray:
        """Rows for ``transform`` from one or more radial fields (no breakpoints)."""
        check_is_fitted(self, "components_")
        if isinstance(fields, RadialStressField):
            fields = [fields]
        for f in fields:
            if f.m != self.m:
                raise ValueError(f"field has m={f.m}, basis has m={self.m}")
        return np.stack([f(self.radii_).ravel() for f in fields])

    def _inner(self, X, Y):
        return (np.asarray(X) * self._weights) @ np.asarray(Y).T
