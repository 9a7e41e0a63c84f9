"""Command-line front end.

Subcommands
-----------
basis-fem      FEM basis on a generated or imported mesh
basis-annulus  semi-analytical modes of one wavenumber on an annulus
fit            fit one of the reference fields (or an imported nodal field)
verify         re-check a basis bundle written by one of the basis commands

Exit status: 0 success, 1 verification failure, 2 usage or input error,
3 numerical non-convergence. The output directory defaults to
``$RESBASIS_OUTPUT_DIR`` and then ``./resbasis-output``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fields as F
from .annulus import AnnulusBasis, gradient_energy, scan_modes
from .assembly import assemble_system, mass_matrix
from .eigensolver import SpectralBasisFEM, rayleigh_energy, solve_eigen
from .exceptions import (
    IncompleteSpectrumError,
    NoConvergenceError,
    PartialSpectrumError,
    ResidualBasisError,
)
from .fitting import convergence_report, fit, fit_nodal, gibbs_overshoot
from .mesh import generate_annulus_mesh, generate_rect_mesh, load_mesh

log = logging.getLogger("resbasis")

OUTPUT_ENV = "RESBASIS_OUTPUT_DIR"
EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# reconstruction checkpoints per target, capped at the fitted N
CHECKPOINTS = {
    "example1": (5, 13, 50),
    "example2": (5, 13, 50),
    "thermo": (5, 13, 50),
    "shrink": (5, 13, 50, 100),
    "imported": (10, 60, 102, 1000),
}
DEFAULT_N = {"example1": 50, "example2": 50, "thermo": 50, "shrink": 100, "imported": 1000}
TARGET_M = {"example1": 3, "example2": 3, "thermo": 3, "shrink": 0}


class UsageError(Exception):
    """Bad arguments that argparse cannot catch on its own."""


@dataclass
class RunConfig:
    """Resolved command line."""

    command: str
    out: Path
    options: dict = field(default_factory=dict)


def _output_dir(value) -> Path:
    return Path(value or os.environ.get(OUTPUT_ENV) or "resbasis-output")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resbasis", description="Residual stress bases and fits.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    fem = sub.add_parser("basis-fem", help="FEM basis on a mesh")
    src = fem.add_mutually_exclusive_group(required=True)
    src.add_argument("--square", type=float, metavar="SIDE")
    src.add_argument("--rect", type=float, nargs=2, metavar=("WIDTH", "HEIGHT"))
    src.add_argument("--annulus", type=float, nargs=2, metavar=("R_I", "R_O"))
    src.add_argument("--mesh", type=Path, metavar="PATH", help="native JSON or Abaqus .inp subset")
    fem.add_argument("--mesh-format", choices=("native-json", "abaqus-inp-subset"))
    fem.add_argument("--nx", type=_positive_int, default=20)
    fem.add_argument("--ny", type=_positive_int, default=20)
    fem.add_argument("--nr", type=_positive_int, default=12, help="radial elements (annulus)")
    fem.add_argument("--nt", type=_positive_int, default=72, help="circumferential elements (annulus)")
    fem.add_argument("-k", type=_positive_int, default=10, dest="k", help="number of modes")
    fem.add_argument("--method", choices=("auto", "dense", "sparse"), default="auto")
    fem.add_argument("--no-vtk", action="store_true", help="skip the VTK files")
    fem.add_argument("--out", type=Path)

    ann = sub.add_parser("basis-annulus", help="semi-analytical annulus modes")
    ann.add_argument("-m", type=_nonneg_int, required=True, dest="m")
    ann.add_argument("-k", type=_positive_int, default=50, dest="k")
    ann.add_argument("--ri", type=float, default=F.R_INNER)
    ann.add_argument("--ro", type=float, default=F.R_OUTER)
    ann.add_argument("--out", type=Path)

    ft = sub.add_parser("fit", help="fit a reference or imported field")
    ft.add_argument("--target", required=True, help="example1 | example2 | shrink | thermo | imported:<path>")
    ft.add_argument("-m", type=_nonneg_int, dest="m", help="wavenumber (defaults to the target's)")
    ft.add_argument("-N", type=_positive_int, dest="N", help="number of basis functions")
    ft.add_argument("--mesh", type=Path, help="mesh of an imported field")
    ft.add_argument("--mesh-format", choices=("native-json", "abaqus-inp-subset"))
    ft.add_argument("--field-format", choices=("csv", "abaqus-report-subset"), default="csv")
    ft.add_argument("--basis", type=Path, help="reuse a basis bundle instead of computing one")
    ft.add_argument("--out", type=Path)

    ver = sub.add_parser("verify", help="check a basis bundle")
    ver.add_argument("bundle", type=Path)
    ver.add_argument("--compare", type=Path, help="second FEM bundle; report eigenvalue drift")
    ver.add_argument("--gram-tol", type=float, default=1e-8)
    ver.add_argument("--residual-tol", type=float, default=1e-8)
    ver.add_argument("--rayleigh-tol", type=float, default=1e-2)
    ver.add_argument("--mean-tol", type=float, default=1e-6)
    return p


# -- commands ----------------------------------------------------------------------


def _fem_mesh(args):
    if args.mesh is not None:
        return load_mesh(args.mesh, args.mesh_format)
    if args.square is not None:
        return generate_rect_mesh(args.square, args.square, args.nx, args.ny)
    if args.rect is not None:
        return generate_rect_mesh(args.rect[0], args.rect[1], args.nx, args.ny)
    return generate_annulus_mesh(args.annulus[0], args.annulus[1], args.nr, args.nt)


def _print_eigenvalues(lam, limit=10):
    for k, v in enumerate(lam[:limit], start=1):
        print(f"lambda_{k} = {v:.6f}")


def cmd_basis_fem(cfg: RunConfig) -> int:
    args = cfg.options["args"]
    mesh = _fem_mesh(args)
    log.info("mesh: %d nodes, %d elements", mesh.n_nodes, mesh.n_elements)
    basis = solve_eigen(assemble_system(mesh), k_requested=args.k, mesh=mesh, method=args.method)
    cfg.out.mkdir(parents=True, exist_ok=True)
    basis.save(cfg.out)
    mesh.to_json(cfg.out / "mesh.json")
    if not args.no_vtk:
        for k in range(len(basis)):
            basis.write_vtk(cfg.out / f"mode_{k}.vtk", k)
    _print_eigenvalues(basis.eigenvalues)
    print(f"wrote {len(basis)} modes to {cfg.out}")
    return EXIT_OK


def cmd_basis_annulus(cfg: RunConfig) -> int:
    args = cfg.options["args"]
    basis = scan_modes(args.m, args.k, r_i=args.ri, r_o=args.ro)
    basis.save(cfg.out)
    for k, (lam, zc) in enumerate(zip(basis.eigenvalues, basis.zero_crossings()), start=1):
        print(f"lambda_{k} = {lam:.6f}  zero_crossings = {zc}")
    print(f"wrote {len(basis)} modes to {cfg.out}")
    return EXIT_OK


def _reference_target(name):
    if name == "example1":
        return F.construct_hypothetical(F.family_example1, name="example1")
    if name == "example2":
        return F.construct_hypothetical(F.family_example2, name="example2")
    if name == "shrink":
        return F.shrink_fit()
    return F.thermoelastic()


def _fit_imported(cfg, path, N):
    args = cfg.options["args"]
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    if args.mesh is None:
        raise UsageError("an imported target needs --mesh")
    mesh = load_mesh(args.mesh, args.mesh_format)
    target = F.import_field(mesh, path, format=args.field_format)
    if args.basis is not None:
        basis = SpectralBasisFEM.load(args.basis, mesh)
    else:
        try:
            basis = solve_eigen(assemble_system(mesh), k_requested=N, mesh=mesh)
        except PartialSpectrumError as exc:
            # the mode count is capped by the mesh
            if exc.result is None:
                raise
            basis = exc.result
            log.warning("mesh supports %d modes; fitting with those", len(basis))
    return fit_nodal(target, basis, min(N, len(basis)), M=mass_matrix(mesh))


def cmd_fit(cfg: RunConfig) -> int:
    args = cfg.options["args"]
    name, _, path = args.target.partition(":")
    if name not in DEFAULT_N or (name == "imported") != bool(path):
        raise UsageError(f"unknown target {args.target!r}")
    N = args.N or DEFAULT_N[name]
    if name == "imported":
        result = _fit_imported(cfg, Path(path), N)
    else:
        m = TARGET_M[name] if args.m is None else args.m
        if m != TARGET_M[name]:
            raise UsageError(f"target {name} has wavenumber {TARGET_M[name]}, got -m {m}")
        target = _reference_target(name)
        if args.basis is not None:
            basis = AnnulusBasis.load(args.basis)
            if len(basis) < N:
                raise UsageError(f"basis bundle has {len(basis)} modes, need {N}")
        else:
            basis = scan_modes(m, N)
        result = fit(target, basis, N)

    cfg.out.mkdir(parents=True, exist_ok=True)
    result.write_convergence_csv(cfg.out / "convergence.csv")
    for n in CHECKPOINTS[name]:
        if n <= result.n_terms:
            result.write_reconstruction_csv(cfg.out / f"reconstruction_N{n}.csv", n)
    for n in sorted({1, *CHECKPOINTS[name], 7, 12, 17, 43, result.n_terms}):
        if n <= result.n_terms:
            print(f"E_{n} = {result.error(n):.6e}")
    if result.n_terms >= 10:
        _, slope = convergence_report(result)
        print(f"log-log slope (upper half) = {slope:.3f}")
    if name == "shrink":
        rc = result.target.metadata["r_c"]
        for n in (50, 100):
            if n <= result.n_terms:
                print(f"Gibbs overshoot N={n} = {gibbs_overshoot(result, n, rc):.4f}")
    print(f"wrote convergence and reconstructions to {cfg.out}")
    return EXIT_OK


@dataclass
class _Check:
    name: str
    value: float
    limit: float
    worst: str

    @property
    def ok(self):
        return bool(np.isfinite(self.value) and self.value <= self.limit)


def _gram_check(G, tol):
    E = np.abs(G - np.eye(len(G)))
    i, j = np.unravel_index(np.argmax(E), E.shape)
    return _Check("gram", float(E[i, j]), tol, f"entry ({i}, {j}) = {G[i, j]:.6g}")


def _positivity_check(lam):
    k = int(np.argmin(lam))
    bad = float(max(0.0, -lam[k])) if lam[k] <= 0 else 0.0
    order = float(max(0.0, -np.diff(lam).min())) if len(lam) > 1 else 0.0
    return _Check("eigenvalues positive and ascending", bad + order, 0.0, f"mode {k} (lambda = {lam[k]:.6g})")


def _worst(name, values, limit, label="mode"):
    values = np.asarray(values, dtype=float)
    k = int(np.argmax(values))
    return _Check(name, float(values[k]), limit, f"{label} {k}")


def _verify_annulus(bundle, args):
    basis = AnnulusBasis.load(bundle)
    fields_ = [md.as_field(normalize=False, name=f"mode_{k}") for k, md in enumerate(basis.modes)]
    from .fitting import gram_matrix

    checks = [_gram_check(gram_matrix(fields_), args.gram_tol), _positivity_check(basis.eigenvalues)]
    memb = [F.membership_diagnostics(f) for f in fields_]
    checks.append(_worst("traction residual", [d["traction"] for d in memb], args.residual_tol))
    checks.append(_worst("equilibrium residual", [d["equilibrium"] for d in memb], args.residual_tol))
    ray = [abs(gradient_energy(md) / md.norm() ** 2 / md.eigenvalue - 1) for md in basis.modes]
    checks.append(_worst("rayleigh identity", ray, args.rayleigh_tol))
    area = np.pi * (basis.r_o**2 - basis.r_i**2)
    means = [np.abs(F.mean_stress(f)).max() / (np.sqrt(area) * md.norm()) for f, md in zip(fields_, basis.modes)]
    checks.append(_worst("mean-zero integrals", means, args.mean_tol))
    return checks


def _verify_fem(bundle, args):
    mesh = load_mesh(bundle / "mesh.json")
    basis = SpectralBasisFEM.load(bundle, mesh)
    M = mass_matrix(mesh)
    checks = [_gram_check(basis.gram(M), args.gram_tol), _positivity_check(basis.eigenvalues)]
    memb = [F.nodal_membership(basis.eigenfield(k)) for k in range(len(basis))]
    checks.append(_worst("traction residual", [d["traction"] for d in memb], args.residual_tol))
    checks.append(_worst("equilibrium residual", [d["equilibrium"] for d in memb], args.residual_tol))
    ray = [abs(rayleigh_energy(basis, k) / basis.eigenvalues[k] - 1) for k in range(len(basis))]
    checks.append(_worst("rayleigh identity", ray, args.rayleigh_tol))
    norms = np.sqrt(np.abs(np.diag(basis.gram(M))))
    means = [np.abs(F.mean_stress(basis.eigenfield(k))).max() / (np.sqrt(mesh.area()) * norms[k]) for k in range(len(basis))]
    checks.append(_worst("mean-zero integrals", means, args.mean_tol))
    if args.compare is not None:
        other_mesh = load_mesh(args.compare / "mesh.json")
        other = SpectralBasisFEM.load(args.compare, other_mesh)
        n = min(len(basis), len(other))
        drift = (other.eigenvalues[:n] - basis.eigenvalues[:n]) / basis.eigenvalues[:n]
        print("eigenvalue drift relative to the compared bundle:")
        for k in range(n):
            print(f"  lambda_{k + 1}: {basis.eigenvalues[k]:.6f} -> {other.eigenvalues[k]:.6f}  ({drift[k]:+.4%})")
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    args = cfg.options["args"]
    bundle = args.bundle
    if (bundle / "manifest.json").is_file():
        checks = _verify_annulus(bundle, args)
    elif (bundle / "eigenvalues.csv").is_file():
        if not (bundle / "mesh.json").is_file():
            raise FileNotFoundError(f"no such file: {bundle / 'mesh.json'}")
        checks = _verify_fem(bundle, args)
    else:
        raise FileNotFoundError(f"{bundle} is not a basis bundle (no manifest.json or eigenvalues.csv)")
    for c in checks:
        status = "PASS" if c.ok else "FAIL"
        print(f"{status}  {c.name}: {c.value:.3e} (limit {c.limit:.1e}); worst {c.worst}")
    failed = [c for c in checks if not c.ok]
    if failed:
        worst = max(failed, key=lambda c: c.value / c.limit if c.limit > 0 else np.inf)
        print(f"verification failed: {worst.name} at {worst.worst}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "basis-fem": cmd_basis_fem,
    "basis-annulus": cmd_basis_annulus,
    "fit": cmd_fit,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = RunConfig(args.command, _output_dir(getattr(args, "out", None)), {"args": args})
    try:
        return COMMANDS[args.command](cfg)
    except (NoConvergenceError, IncompleteSpectrumError, PartialSpectrumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, FileNotFoundError, ValueError, ResidualBasisError) as exc:
        msg = str(exc)
        if isinstance(exc, FileNotFoundError) and exc.filename and str(exc.filename) not in msg:
            msg = f"{msg}: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
