"""Orthonormal bases for planar residual stress fields and fits against them.

Two bases are provided: a mixed finite element basis on arbitrary 2-D meshes
and a semi-analytical basis on annuli, one circumferential wavenumber at a
time. Both are eigenfunctions of the gradient energy restricted to
self-equilibrating, traction-free stress fields.
"""

from .annulus import AnnulusBasis, AnnulusMode, airy_galerkin_spectrum, gradient_energy, scan_modes, solve_mode
from .assembly import DiscreteSystem, assemble_system
from .eigensolver import SpectralBasisFEM, compute_basis, solve_eigen
from .estimators import AnnulusStressBasis, FEMStressBasis
from .exceptions import (
    AssemblyError,
    ConstructionError,
    FieldFormatError,
    IncompleteSpectrumError,
    InvalidGeometryError,
    MeshFormatError,
    MismatchError,
    NoConvergenceError,
    NoPartnerError,
    PartialSpectrumError,
    ResidualBasisError,
)
from .fields import (
    RadialStressField,
    StressFieldNodal,
    construct_hypothetical,
    example1,
    example2,
    import_field,
    mean_stress,
    membership_diagnostics,
    shrink_fit,
    thermoelastic,
)
from .fitting import FitResult, convergence_report, fit, fit_nodal, gibbs_overshoot, inner_product
from .mesh import Mesh, generate_annulus_mesh, generate_rect_mesh, load_mesh

__version__ = "0.1.0"

__all__ = [
    "AnnulusBasis", "AnnulusMode", "AnnulusStressBasis", "AssemblyError", "ConstructionError",
    "DiscreteSystem", "FEMStressBasis", "FieldFormatError", "FitResult", "IncompleteSpectrumError",
    "InvalidGeometryError", "Mesh", "MeshFormatError", "MismatchError", "NoConvergenceError",
    "NoPartnerError", "PartialSpectrumError", "RadialStressField", "ResidualBasisError",
    "SpectralBasisFEM", "StressFieldNodal", "airy_galerkin_spectrum", "assemble_system",
    "compute_basis", "construct_hypothetical", "convergence_report", "example1", "example2", "fit",
    "fit_nodal", "generate_annulus_mesh", "generate_rect_mesh", "gibbs_overshoot", "gradient_energy",
    "import_field", "inner_product", "load_mesh", "mean_stress", "membership_diagnostics", "scan_modes",
    "shrink_fit", "solve_eigen", "solve_mode", "thermoelastic",
]
