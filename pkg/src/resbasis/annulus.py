"""Semi-analytical stress basis on an annulus for one circumferential wavenumber.

For fields ``sigma_rr(r) cos(m t)``, ``sigma_rt(r) sin(m t)``,
``sigma_tt(r) cos(m t)`` with multipliers ``mu_r(r) cos(m t)``,
``mu_t(r) sin(m t)`` the eigenproblem reduces to six first-order ODEs in
``y = (srr, srt, stt, theta, mur, mut)`` with ``theta = stt'``. Boundary
data: ``srr = srt = theta = 0`` at both radii, plus ``stt(r_i) = 1`` to fix
the scale, which leaves ``lam`` as the seventh unknown.

The ODEs are collocated on Chebyshev-Lobatto nodes and the eigenpair is found
by Newton iteration on ``(y, lam)``. Starting values come from a separate
Galerkin discretization of an Airy stress function, which builds in
equilibrium and the traction conditions and gives a symmetric definite
eigenproblem whose spectrum has no gaps.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
from numpy.polynomial import legendre as leg

from .chebyshev import ChebSeries, lobatto_grid
from .exceptions import (
    IncompleteSpectrumError,
    InvalidGeometryError,
    NoConvergenceError,
    NoPartnerError,
)
from .fields import R_INNER, R_OUTER, RadialStressField, angular_factors, radial_quadrature

log = logging.getLogger(__name__)

STATE_NAMES = ("srr", "srt", "stt", "theta_aux", "mur", "mut")
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


def _check_radii(r_i, r_o):
    if not 0 < r_i < r_o:
        raise InvalidGeometryError(f"need 0 < r_i < r_o, got {r_i}, {r_o}")


def _check_m(m):
    if int(m) != m or m < 0:
        raise ValueError(f"wavenumber must be a whole number, got {m}")
    return int(m)


def ode_rhs(r, state, m, lam):
    """Right-hand sides of the six first-order ODEs.

    Parameters
    ----------
    r : float
        Radius, must be positive.
    state : array_like, shape (6,) or (6, n)
        ``(srr, srt, stt, theta, mur, mut)``.
    m : int
    lam : float

    Returns
    -------
    ndarray of the same shape as ``state``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    srr, srt, stt, th, mur, mut = np.asarray(state, dtype=float)
    r2 = r * r
    return np.array(
        [
            -srr / r - m * srt / r + stt / r,
            -2 * srt / r + m * stt / r,
            th,
            m * m * stt / r2
            - th / r
            - 4 * m * srt / r2
            - 2 * srr / r2
            + 2 * stt / r2
            + mur / r
            + m * mut / r
            - lam * stt,
            -(m * m - 1) * stt / r2 - m * srt / r2 + th / r - (m * m + 1) * srr / r2 + lam * srr,
            2 * m * th / r
            - 2 * m * m * srt / r2
            - 4 * m * srr / r2
            + m * mur / r
            + mut / r
            + 2 * lam * srt,
        ]
    )


def _coefficient_blocks(r, m):
    """``A(r)`` and ``E`` with ``y' = A(r) y + lam E y``, as nodal diagonals."""
    inv, inv2 = 1.0 / r, 1.0 / r**2
    one = np.ones_like(r)
    A = {
        (0, 0): -inv, (0, 1): -m * inv, (0, 2): inv,
        (1, 1): -2 * inv, (1, 2): m * inv,
        (2, 3): one,
        (3, 0): -2 * inv2, (3, 1): -4 * m * inv2, (3, 2): (m * m + 2) * inv2,
        (3, 3): -inv, (3, 4): inv, (3, 5): m * inv,
        (4, 0): -(m * m + 1) * inv2, (4, 1): -m * inv2, (4, 2): -(m * m - 1) * inv2,
        (4, 3): inv,
        (5, 0): -4 * m * inv2, (5, 1): -2 * m * m * inv2, (5, 3): 2 * m * inv,
        (5, 4): m * inv, (5, 5): inv,
    }  # fmt: skip
    E = {(3, 2): -one, (4, 0): one, (5, 1): 2 * one}
    return A, E


def collocation_system(m: int, N: int, r_i: float = R_INNER, r_o: float = R_OUTER):
    """Collocated operators ``L0 + lam L1`` acting on the stacked nodal state.

    Rows for ``srr``, ``srt`` and ``theta`` at both end nodes are replaced by
    the homogeneous boundary conditions. For ``m = 0`` the ``srt`` condition
    at ``r_o`` is implied by the one at ``r_i`` and is replaced by the gauge
    ``mut(r_i) = 0``; for ``m = 1`` the net-force balance makes it redundant
    and the gauge ``mur(r_i) = mut(r_i)`` is used instead.

    Returns
    -------
    L0, L1 : (6(N+1), 6(N+1)) arrays
    r : (N+1,) collocation radii
    """
    r, D = lobatto_grid(r_i, r_o, N)
    n = N + 1
    A, E = _coefficient_blocks(r, m)
    L0 = np.kron(np.eye(6), D)
    L1 = np.zeros_like(L0)
    idx = np.arange(n)
    for (k, l), diag in A.items():
        L0[k * n + idx, l * n + idx] -= diag
    for (k, l), diag in E.items():
        L1[k * n + idx, l * n + idx] -= diag
    for k in (0, 1, 3):
        for j in (0, N):
            row = k * n + j
            L0[row] = 0.0
            L1[row] = 0.0
            L0[row, row] = 1.0
    if m in (0, 1):
        row = 1 * n + N
        L0[row] = 0.0
        if m == 0:
            L0[row, 5 * n] = 1.0
        else:
            L0[row, 4 * n] = 1.0
            L0[row, 5 * n] = -1.0
    return L0, L1, r


def default_points(lam: float, r_i: float, r_o: float) -> int:
    """Collocation intervals needed to resolve a mode of eigenvalue ``lam``."""
    waves = math.sqrt(max(lam, 0.0)) * (r_o - r_i) / math.pi
    return 2 * math.ceil(waves) + 60


@dataclass(frozen=True, eq=False)
class AnnulusMode:
    """One eigenpair of the radial problem.

    Attributes
    ----------
    m : int
    eigenvalue : float
    r_i, r_o : float
    grid : (N+1,) Chebyshev-Lobatto radii
    profiles : (6, N+1) nodal ``(srr, srt, stt, theta, mur, mut)``
    parity : {"cos", "sin"}
        ``cos``: normal stresses and ``mu_r`` carry ``cos(m t)``.
        ``sin``: they carry ``sin(m t)`` and the shear family ``cos(m t)``.
    iterations : int
    residual : float
        Final scaled Newton residual.
    """

    m: int
    eigenvalue: float
    r_i: float
    r_o: float
    grid: np.ndarray
    profiles: np.ndarray
    parity: str = "cos"
    iterations: int = 0
    residual: float = 0.0
    _series: ChebSeries = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_series", ChebSeries(self.r_i, self.r_o, self.profiles))

    def evaluate(self, r, derivative: int = 0) -> np.ndarray:
        """Profiles (or their r-derivatives) at arbitrary radii, shape ``(6, len(r))``."""
        return self._series(r, derivative)

    def zero_crossings(self, samples: int | None = None) -> int:
        """Sign changes of ``stt`` on ``(r_i, r_o)``."""
        samples = samples or 20 * len(self.grid) + 200
        r = np.linspace(self.r_i, self.r_o, samples)
        v = self.evaluate(r)[2]
        v = v[np.abs(v) > 1e-12 * np.abs(v).max()]
        return int(np.count_nonzero(np.signbit(v[1:]) != np.signbit(v[:-1])))

    def boundary_residual(self) -> float:
        """Largest imposed boundary value relative to the largest stress value."""
        p = self.profiles
        scale = np.abs(p[:3]).max()
        ends = p[[0, 1, 3]][:, [0, -1]]
        return float(np.abs(ends).max() / scale)

    def norm(self) -> float:
        """L2 norm of the 2-D field over the annulus."""
        r, w = radial_quadrature(self.r_i, self.r_o)
        a, b, c = self.evaluate(r)[:3]
        fn, fs = angular_factors(self.m)
        return float(np.sqrt(np.sum(w * r * (fn * (a * a + c * c) + fs * 2 * b * b))))

    def as_field(self, normalize: bool = True, name: str | None = None) -> RadialStressField:
        """Stress part as a :class:`RadialStressField`, by default with unit L2 norm."""
        scale = 1.0 / self.norm() if normalize else 1.0
        series = self._series
        return RadialStressField(
            self.m,
            self.r_i,
            self.r_o,
            lambda r: scale * series(r)[:3],
            parity=self.parity,
            name=name or f"annulus_m{self.m}_lam{self.eigenvalue:.6g}",
            gradient=lambda r: scale * series(r, 1)[:3],
        )

    def normalized(self) -> "AnnulusMode":
        """Copy rescaled to unit L2 norm (multipliers scaled alike)."""
        return self._with(profiles=self.profiles / self.norm())

    def _with(self, **changes) -> "AnnulusMode":
        kw = dict(
            m=self.m,
            eigenvalue=self.eigenvalue,
            r_i=self.r_i,
            r_o=self.r_o,
            grid=self.grid,
            profiles=self.profiles,
            parity=self.parity,
            iterations=self.iterations,
            residual=self.residual,
        )
        kw.update(changes)
        return AnnulusMode(**kw)

    def to_csv(self, path) -> None:
        """Columns ``r, srr, srt, stt, theta_aux, mur, mut`` on the collocation grid."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("r",) + STATE_NAMES)
            for j, r in enumerate(self.grid):
                w.writerow([f"{r:.16e}"] + [f"{v:.16e}" for v in self.profiles[:, j]])


def gradient_energy(mode: AnnulusMode | RadialStressField, n_points: int = 64) -> float:
    """``int grad sigma : grad sigma dA`` of the stress part.

    Uses the polar form of the gradient of a symmetric tensor; connection
    terms mix the components through ``m`` and ``1/r``.
    """
    if isinstance(mode, AnnulusMode):
        r, w = radial_quadrature(mode.r_i, mode.r_o, n_points=n_points)
        a, b, c = mode.evaluate(r)[:3]
        da, db, dc = mode.evaluate(r, derivative=1)[:3]
    else:
        r, w = mode.quadrature(n_points=n_points)
        a, b, c = mode(r)
        da, db, dc = mode.derivative(r)
    if mode.parity == "sin":
        # a sin-family field is a rotated cos-family field with the shear negated
        b, db = -b, -db
    m = mode.m
    fn, fs = angular_factors(m)
    normal = da**2 + dc**2 + 2 * (m * b + a - c) ** 2 / r**2
    shear = 2 * db**2 + ((m * a + 2 * b) ** 2 + (2 * b - m * c) ** 2) / r**2
    return float(np.sum(w * r * (fn * normal + fs * shear)))


def solve_mode(
    m: int,
    lam_guess: float,
    *,
    r_i: float = R_INNER,
    r_o: float = R_OUTER,
    n_points: int | None = None,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> AnnulusMode:
    """Newton iteration for the eigenpair nearest ``lam_guess``.

    The initial state is one inverse-iteration solve at ``lam_guess``. Each
    step solves the bordered system for the correction of ``(y, lam)``; the
    normalization ``stt(r_i) = 1`` closes it.

    Parameters
    ----------
    m : int
    lam_guess : float
        Positive starting value.
    n_points : int, optional
        Collocation intervals; chosen from ``lam_guess`` when omitted.
    tol : float
        Convergence threshold on the scaled residual and on the relative step.

    Raises
    ------
    NoConvergenceError
        No convergence within ``max_iter`` steps; the last residual is attached.
    """
    m = _check_m(m)
    _check_radii(r_i, r_o)
    if not lam_guess > 0:
        raise ValueError("lam_guess must be positive")
    N = int(n_points) if n_points else default_points(lam_guess, r_i, r_o)
    L0, L1, r = collocation_system(m, N, r_i, r_o)
    n = N + 1
    size = 6 * n
    e = np.zeros(size)
    e[2 * n] = 1.0
    J = np.zeros((size + 1, size + 1))
    J[size, :size] = e
    rhs = np.zeros(size + 1)
    rhs[size] = 1.0

    lam = float(lam_guess)
    J[:size, :size] = L0 + lam * L1
    J[:size, size] = L1 @ np.random.default_rng(0).standard_normal(size)
    y = la.solve(J, rhs)[:size]
    absL = np.abs(L0) + np.abs(L1) * abs(lam)
    residual = np.inf
    for it in range(1, max_iter + 1):
        F = np.concatenate([(L0 + lam * L1) @ y, [e @ y - 1.0]])
        J[:size, :size] = L0 + lam * L1
        J[:size, size] = L1 @ y
        step = la.solve(J, -F)
        y += step[:size]
        lam += step[size]
        if not np.isfinite(lam) or lam <= 0:
            raise NoConvergenceError(f"Newton iteration left the positive axis (lam={lam})", residual)
        absL = np.abs(L0) + np.abs(L1) * abs(lam)
        F = (L0 + lam * L1) @ y
        residual = float(np.abs(F).max() / max((absL @ np.abs(y)).max(), 1e-300))
        small_step = abs(step[size]) <= tol * 1e-3 * abs(lam) and np.abs(step[:size]).max() <= tol * np.abs(y).max()
        if residual <= tol * 1e-3 or small_step:
            break
    else:
        raise NoConvergenceError(
            f"Newton did not converge in {max_iter} iterations for m={m} near lam={lam_guess}",
            residual,
        )
    mode = AnnulusMode(m, lam, r_i, r_o, r, y.reshape(6, n), "cos", it, residual)
    bres = mode.boundary_residual()
    if bres > tol:
        raise NoConvergenceError(f"boundary residual {bres:.3e} exceeds {tol}", bres)
    return mode


def partner_mode(mode: AnnulusMode) -> AnnulusMode:
    """The degenerate partner obtained by differentiating in ``t`` and dividing by ``m``.

    For the ``cos`` family this maps ``(srr, stt, theta, mur)`` to their negatives
    with ``sin`` dependence and keeps ``(srt, mut)`` with ``cos`` dependence;
    applying it twice returns the original mode with flipped sign.
    """
    if mode.m == 0:
        raise NoPartnerError("m = 0 modes are axisymmetric and have no partner")
    p = mode.profiles.copy()
    if mode.parity == "cos":
        p[[0, 2, 3, 4]] *= -1.0
        parity = "sin"
    else:
        p[[1, 5]] *= -1.0
        parity = "cos"
    return mode._with(profiles=p, parity=parity)


# -- independent Galerkin seeding ------------------------------------------------


def airy_galerkin_spectrum(
    m: int, count: int, r_i: float = R_INNER, r_o: float = R_OUTER, n_basis: int | None = None
) -> np.ndarray:
    """Lowest ``count`` eigenvalues from an Airy stress-function Galerkin method.

    For ``m >= 2`` the stress function ``phi(r) cos(m t)`` with
    ``phi = phi' = 0`` at both radii gives every equilibrated, traction-free
    field of this wavenumber. ``m = 0`` uses ``psi = phi'`` with
    ``psi = 0`` at both radii; ``m = 1`` uses ``h = (phi / r)'`` with
    ``h = 0`` at both radii. Trial functions are Legendre polynomials times
    the boundary factor; the pencil is symmetric positive definite.
    """
    m = _check_m(m)
    _check_radii(r_i, r_o)
    K = n_basis or int(1.5 * count) + 50
    mid, half = 0.5 * (r_i + r_o), 0.5 * (r_o - r_i)
    xq, wq = leg.leggauss(2 * K + 60)
    r = mid + half * xq
    w = wq * half * r
    wall = leg.legfromroots([-1, 1]) if m in (0, 1) else leg.legfromroots([-1, -1, 1, 1])

    comps = np.empty((6, K, len(r)))  # a, b, c, a', b', c'
    for k in range(K):
        p = leg.legmul(wall, np.eye(k + 1)[k])
        d = [leg.legval(xq, leg.legder(p, j)) / half**j if j else leg.legval(xq, p) for j in range(4)]
        if m == 0:
            psi, psi1, psi2 = d[0], d[1], d[2]
            a, da = psi / r, psi1 / r - psi / r**2
            b = db = np.zeros_like(r)
            c, dc = psi1, psi2
        elif m == 1:
            h, h1, h2 = d[0], d[1], d[2]
            a, da, b, db = h, h1, h, h1
            c, dc = 2 * h + r * h1, 3 * h1 + r * h2
        else:
            f, f1, f2, f3 = d
            a = f1 / r - m * m * f / r**2
            da = f2 / r - f1 / r**2 - m * m * (f1 / r**2 - 2 * f / r**3)
            b = m * (f1 / r - f / r**2)
            db = m * (f2 / r - 2 * f1 / r**2 + 2 * f / r**3)
            c, dc = f2, f3
        comps[:, k] = a, b, c, da, db, dc
    a, b, c, da, db, dc = comps
    fn, fs = angular_factors(m)
    sw = np.sqrt(w)
    mass_rows = np.hstack([np.sqrt(fn) * a, np.sqrt(2 * fs) * b, np.sqrt(fn) * c]) * np.tile(sw, 3)
    stiff_rows = np.hstack(
        [
            np.sqrt(fn) * da,
            np.sqrt(fn) * dc,
            np.sqrt(2 * fn) * (m * b + a - c) / r,
            np.sqrt(2 * fs) * db,
            np.sqrt(fs) * (m * a + 2 * b) / r,
            np.sqrt(fs) * (2 * b - m * c) / r,
        ]
    ) * np.tile(sw, 6)
    # orthonormalize the trial space in L2 to keep the pencil well conditioned
    _, R = la.qr(mass_rows.T, mode="economic")
    S = la.solve_triangular(R, stiff_rows, trans="T")
    lam = la.eigvalsh(S @ S.T)
    return lam[:count]


# -- scanning --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AnnulusBasis:
    """Ordered modes of one wavenumber and their L2-normalized fields."""

    m: int
    r_i: float
    r_o: float
    modes: tuple

    def __len__(self):
        return len(self.modes)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([md.eigenvalue for md in self.modes])

    def fields(self) -> list[RadialStressField]:
        return [md.as_field(normalize=True, name=f"mode_{k}") for k, md in enumerate(self.modes)]

    def zero_crossings(self) -> list[int]:
        return [md.zero_crossings() for md in self.modes]

    def gram(self) -> np.ndarray:
        from .fitting import gram_matrix

        return gram_matrix(self.fields())

    def save(self, directory) -> None:
        """Write ``mode_<k>.csv`` (L2-normalized) and ``manifest.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for k, md in enumerate(self.modes):
            md.normalized().to_csv(d / f"mode_{k}.csv")
        manifest = {
            "m": self.m,
            "count": len(self),
            "r_i": self.r_i,
            "r_o": self.r_o,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "zero_crossings": self.zero_crossings(),
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "AnnulusBasis":
        d = Path(directory)
        path = d / "manifest.json"
        if not path.is_file():
            raise FileNotFoundError(f"no such file: {path}")
        man = json.loads(path.read_text())
        modes = []
        for k, lam in enumerate(man["eigenvalues"]):
            data = np.loadtxt(d / f"mode_{k}.csv", delimiter=",", skiprows=1, ndmin=2)
            grid, prof = data[:, 0], data[:, 1:].T
            expected, _ = lobatto_grid(man["r_i"], man["r_o"], len(grid) - 1)
            if not np.allclose(grid, expected, rtol=0, atol=1e-12):
                raise ValueError(f"mode_{k}.csv is not on a Chebyshev-Lobatto grid")
            modes.append(AnnulusMode(man["m"], float(lam), man["r_i"], man["r_o"], expected, prof))
        return cls(man["m"], man["r_i"], man["r_o"], tuple(modes))


def _solve_quiet(m, guess, r_i, r_o):
    try:
        return solve_mode(m, guess, r_i=r_i, r_o=r_o)
    except NoConvergenceError as exc:
        log.debug("no convergence from %g: %s", guess, exc)
        return None


def _rescan(m, lo, hi, r_i, r_o, n_probe=8):
    """Newton from evenly spaced guesses inside ``(lo, hi)``; distinct roots found."""
    found = []
    for t in np.linspace(0, 1, n_probe + 1)[1:-1]:
        md = _solve_quiet(m, lo + t * (hi - lo), r_i, r_o)
        if md is None or not lo * (1 + 1e-9) < md.eigenvalue < hi * (1 - 1e-9):
            continue
        if all(abs(md.eigenvalue - f.eigenvalue) > 1e-8 * md.eigenvalue for f in found):
            found.append(md)
    return found


def _suspects(modes, gap_factor):
    """Indices ``p`` whose interval ``(lam_p, lam_{p+1})`` looks wrong."""
    lam = np.array([md.eigenvalue for md in modes])
    zc = np.array([md.zero_crossings() for md in modes])
    bad = set()
    if len(lam) < 2:
        return bad
    gaps = np.diff(np.sqrt(lam))
    med = np.median(gaps)
    for p in range(len(lam) - 1):
        if gaps[p] <= 1e-8 * np.sqrt(lam[p]):
            bad.add(p)  # two seeds converged to one root
        elif gaps[p] > gap_factor * med:
            bad.add(p)
        elif zc[p + 1] - zc[p] != 1:
            bad.add(p)
    return bad


def scan_modes(
    m: int,
    count: int,
    *,
    r_i: float = R_INNER,
    r_o: float = R_OUTER,
    gap_factor: float = 1.5,
) -> AnnulusBasis:
    """The ``count`` lowest modes of wavenumber ``m`` with no gaps.

    Each Galerkin seed is refined by :func:`solve_mode`. Two checks then run
    over consecutive modes: the zero-crossing count of ``stt`` must grow by
    exactly one, and the spacing of ``sqrt(lam)`` (nearly uniform for this
    operator) must stay below ``gap_factor`` times its median. A failing
    interval is probed again from evenly spaced guesses.

    Raises
    ------
    IncompleteSpectrumError
        A suspect interval could not be resolved.
    """
    m = _check_m(m)
    _check_radii(r_i, r_o)
    if count < 1:
        raise ValueError("count must be at least 1")
    seeds = airy_galerkin_spectrum(m, count + 2, r_i, r_o)
    modes = []
    for s in seeds:
        md = _solve_quiet(m, s, r_i, r_o)
        if md is not None and abs(md.eigenvalue - s) > 1e-6 * s:
            log.warning("seed %.10g converged to %.10g", s, md.eigenvalue)
        if md is not None:
            modes.append(md)
    modes.sort(key=lambda md: md.eigenvalue)

    for _ in range(3):
        bad = _suspects(modes, gap_factor)
        bad = {p for p in bad if p < count}
        if not bad:
            break
        for p in sorted(bad, reverse=True):
            lo, hi = modes[p].eigenvalue, modes[p + 1].eigenvalue
            extra = _rescan(m, lo, hi, r_i, r_o)
            if abs(hi - lo) <= 1e-8 * hi:
                del modes[p + 1]
            modes[p + 1 : p + 1] = extra
        modes.sort(key=lambda md: md.eigenvalue)
    else:
        p = min(_suspects(modes, gap_factor))
        raise IncompleteSpectrumError(
            f"could not resolve the spectrum of m={m} between modes {p} and {p + 1}",
            interval=(modes[p].eigenvalue, modes[p + 1].eigenvalue),
        )
    if len(modes) < count:
        raise IncompleteSpectrumError(
            f"found {len(modes)} of {count} modes for m={m}",
            interval=(modes[-1].eigenvalue if modes else 0.0, np.inf),
        )
    return AnnulusBasis(m, r_i, r_o, tuple(modes[:count]))
