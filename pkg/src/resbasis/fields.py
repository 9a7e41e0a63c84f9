"""Candidate residual stress fields and nodal field import/export.

Radial fields follow the single-wavenumber convention
``sigma_rr(r) cos(m t)``, ``sigma_rt(r) sin(m t)``, ``sigma_tt(r) cos(m t)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import Chebyshev

from .chebyshev import ChebSeries, lobatto_grid

from .exceptions import (
    ConstructionError,
    FieldFormatError,
    InvalidGeometryError,
    MismatchError,
    NoConvergenceError,
)
from .mesh import Mesh

R_INNER = 0.1
R_OUTER = 0.3
GAUSS_POINTS = 64
GAUSS_PANELS = 8


def angular_factors(m: int) -> tuple[float, float]:
    """``(int cos^2(m t) dt, int sin^2(m t) dt)`` over a full turn."""
    return (2 * np.pi, 0.0) if m == 0 else (np.pi, np.pi)


def radial_quadrature(r_i, r_o, breakpoints=(), n_points=GAUSS_POINTS, panels=GAUSS_PANELS):
    """Composite Gauss-Legendre nodes and ``dr`` weights on ``[r_i, r_o]``.

    Each smooth piece between breakpoints is split into ``panels`` equal
    panels with ``n_points`` nodes each, so no panel straddles a breakpoint.
    """
    edges = [r_i] + sorted(b for b in breakpoints if r_i < b < r_o) + [r_o]
    x, w = np.polynomial.legendre.leggauss(n_points)
    rs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(a, b, panels + 1)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (hi - lo)
            rs.append(lo + half * (x + 1.0))
            ws.append(half * w)
    return np.concatenate(rs), np.concatenate(ws)


@dataclass(frozen=True, eq=False)
class RadialStressField:
    """Single-wavenumber field on an annulus.

    ``profile(r)`` returns an array of shape ``(3, len(r))`` holding
    ``(srr, srt, stt)``. With ``parity="cos"`` the angular factors are
    ``(cos, sin, cos)``; with ``"sin"`` they are ``(sin, cos, sin)``.

    Parameters
    ----------
    m : int
    r_i, r_o : float
    profile : callable
    breakpoints : tuple of float
        Radii where the field may be discontinuous.
    parity : {"cos", "sin"}
    name : str
    gradient : callable, optional
        Exact ``d/dr`` of ``profile`` with the same signature. When absent,
        :meth:`derivative` interpolates.
    """

    m: int
    r_i: float
    r_o: float
    profile: Callable
    breakpoints: tuple = ()
    parity: str = "cos"
    name: str = "radial"
    metadata: dict = field(default_factory=dict, compare=False)
    gradient: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.r_i < self.r_o:
            raise InvalidGeometryError(f"need 0 < r_i < r_o, got {self.r_i}, {self.r_o}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"wavenumber must be a whole number, got {self.m}")
        if self.parity not in ("cos", "sin"):
            raise ValueError("parity must be 'cos' or 'sin'")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "breakpoints", tuple(sorted(self.breakpoints)))

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.asarray(self.profile(r), dtype=float).reshape(3, *r.shape)

    def srr(self, r):
        return self(r)[0]

    def srt(self, r):
        return self(r)[1]

    def stt(self, r):
        return self(r)[2]

    def pieces(self):
        edges = [self.r_i] + [b for b in self.breakpoints if self.r_i < b < self.r_o] + [self.r_o]
        return list(zip(edges[:-1], edges[1:]))

    def quadrature(self, **kwargs):
        return radial_quadrature(self.r_i, self.r_o, self.breakpoints, **kwargs)

    def derivative(self, r, degree: int = 160):
        """First r-derivative of ``(srr, srt, stt)`` by Chebyshev interpolation per piece.

        Interpolation uses first-kind nodes, which stay strictly inside each
        piece, so the field is never sampled on a breakpoint.
        """
        r = np.asarray(r, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(r), dtype=float).reshape(3, *r.shape)
        out = np.empty((3,) + r.shape)
        pieces = self.pieces()
        for k, (a, b) in enumerate(pieces):
            sel = (r >= a) & ((r <= b) if k == len(pieces) - 1 else (r < b))
            for j in range(3):
                series = Chebyshev.interpolate(
                    lambda x, j=j: self(x)[j], degree, domain=[a, b]
                )
                out[j, sel] = series.deriv()(r[sel])
        return out

    def scaled(self, factor: float, name: str | None = None) -> "RadialStressField":
        f = float(factor)
        g = self.gradient
        return RadialStressField(
            self.m,
            self.r_i,
            self.r_o,
            lambda r, p=self.profile: f * np.asarray(p(r)),
            self.breakpoints,
            self.parity,
            name or self.name,
            dict(self.metadata),
            None if g is None else (lambda r: f * np.asarray(g(r))),
        )

    def cartesian(self, x, y):
        """``(sxx, syy, sxy)`` at points ``(x, y)``, centred at the origin."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        t = np.arctan2(y, x)
        a, b, c = self(r)
        ct, st = np.cos(self.m * t), np.sin(self.m * t)
        if self.parity == "cos":
            srr, srt, stt = a * ct, b * st, c * ct
        else:
            srr, srt, stt = a * st, b * ct, c * st
        co, si = np.cos(t), np.sin(t)
        sxx = co * co * srr + si * si * stt - 2 * co * si * srt
        syy = si * si * srr + co * co * stt + 2 * co * si * srt
        sxy = co * si * (srr - stt) + (co * co - si * si) * srt
        return np.stack([sxx, syy, sxy], axis=-1)

    def sample_nodal(self, mesh: Mesh) -> "StressFieldNodal":
        """Interpolate the field at mesh nodes (centred at the origin)."""
        vals = self.cartesian(mesh.nodes[:, 0], mesh.nodes[:, 1])
        return StressFieldNodal(mesh, vals, name=self.name)


@dataclass(frozen=True, eq=False)
class StressFieldNodal:
    """Nodal values of ``(sxx, syy, sxy)`` on a mesh.

    Parameters
    ----------
    mesh : Mesh
    values : array of shape (n_nodes, 3)
    name : str, optional
        Free-form identifier carried into fit results.
    """

    mesh: Mesh
    values: np.ndarray
    name: str = field(default="nodal")

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes, 3):
            raise MismatchError(
                f"expected values of shape ({self.mesh.n_nodes}, 3), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise FieldFormatError("stress values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def sxx(self):
        return self.values[:, 0]

    @property
    def syy(self):
        return self.values[:, 1]

    @property
    def sxy(self):
        return self.values[:, 2]

    def polar(self, center=(0.0, 0.0)):
        """Nodal ``(srr, stt, srt)`` about ``center``."""
        d = self.mesh.nodes - np.asarray(center, dtype=float)
        t = np.arctan2(d[:, 1], d[:, 0])
        c, s = np.cos(t), np.sin(t)
        sxx, syy, sxy = self.values.T
        srr = c * c * sxx + s * s * syy + 2 * c * s * sxy
        stt = s * s * sxx + c * c * syy - 2 * c * s * sxy
        srt = (syy - sxx) * c * s + (c * c - s * s) * sxy
        return np.column_stack([srr, stt, srt])

    def to_csv(self, path) -> None:
        write_field_csv(path, self.values)

    def __mul__(self, scalar):
        return StressFieldNodal(self.mesh, self.values * float(scalar), self.name)

    __rmul__ = __mul__


def write_field_csv(path, values, ids=None, header=("node_id", "sxx", "syy", "sxy")) -> None:
    """Write rows ``id, a, b, c`` with 17 significant digits."""
    values = np.asarray(values, dtype=float)
    ids = np.arange(len(values)) if ids is None else ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in zip(ids, values):
            w.writerow([int(i)] + [f"{v:.16e}" for v in row])


def read_id_table(path, n_rows: int, n_cols: int, what: str = "node"):
    """Read an ``id, v1..vk`` CSV into an ``(n_rows, k)`` array indexed by id."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    out = np.full((n_rows, n_cols), np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            next(reader)
        except StopIteration:
            raise FieldFormatError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != n_cols + 1:
                raise FieldFormatError(f"{path}:{lineno}: expected {n_cols + 1} columns")
            try:
                idx = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise FieldFormatError(f"{path}:{lineno}: unparseable row {row!r}") from None
            if not 0 <= idx < n_rows:
                raise MismatchError(f"{path}:{lineno}: {what} {idx} is not in the mesh")
            out[idx] = vals
    missing = np.nonzero(np.isnan(out).any(axis=1))[0]
    if missing.size:
        raise MismatchError(
            f"{path}: {what} count mismatch, {what} {int(missing[0])} missing "
            f"({missing.size} of {n_rows} absent)"
        )
    return out


# -- closed-form and constructed fields ------------------------------------------


def example1() -> RadialStressField:
    """Hypothetical ``m = 3`` field with polynomial hoop stress (printed coefficients)."""

    def profile(r):
        srr = -0.067 / r**2 + 1.6 / r - 12.833 + 40 * r - 41.667 * r**2
        srt = -0.022 / r**2 + 5.5 - 40 * r + 75 * r**2
        stt = 3.667 - 40 * r + 100 * r**2
        return np.stack([srr, srt, stt])

    return RadialStressField(3, R_INNER, R_OUTER, profile, name="example1")


def example2() -> RadialStressField:
    """Hypothetical ``m = 3`` field with oscillating hoop stress (printed coefficients)."""

    def profile(r):
        s, c = np.sin(200 * r), np.cos(200 * r)
        srr = (
            -0.321 / r
            - (-4 * r**3 + 8.563e-4 * s + 0.411 * np.log(200 * r) * r) / r**2
            - (9.408e-3 + 7.611e-2 * r * c) / r**2
        )
        srt = (r**3 - 2.854e-4 * s + 5.708e-2 * r * c - 3.853e-2 * r + 7.840e-4) / r**2
        stt = -3.805 * s - 1.284e-2 / r + r
        return np.stack([srr, srt, stt])

    return RadialStressField(3, R_INNER, R_OUTER, profile, name="example2")


def family_example1(r, c0, c1):
    """Hoop stress family ``c0 + c1 r + 100 r^2``."""
    return c0 + c1 * r + 100 * r**2


def family_example2(r, c0, c1):
    """Hoop stress family ``c0 sin(200 r) + c1 / r + r``."""
    return c0 * np.sin(200 * r) + c1 / r + r


def construct_hypothetical(
    family: Callable,
    m: int = 3,
    r_i: float = R_INNER,
    r_o: float = R_OUTER,
    degree: int = 256,
    name: str = "constructed",
) -> RadialStressField:
    """Equilibrated, traction-free field with ``stt = family(r, c0, c1)``.

    The second equilibrium relation gives ``r^2 srt = m int s A ds + K1``, the
    first ``r srr = int (A - m srt) ds + K2``. The four traction conditions
    form a 4 x 4 linear system in ``(K1, K2, c0, c1)``. ``family`` must be
    affine in its two parameters. Integrals are antiderivatives of
    Chebyshev interpolants of degree ``degree``.

    The fitted parameters are stored in ``metadata["parameters"]``.

    Raises
    ------
    ConstructionError
        The family is not affine in its parameters or the system is singular.
    """
    if not 0 < r_i < r_o:
        raise InvalidGeometryError(f"need 0 < r_i < r_o, got {r_i}, {r_o}")
    dom = [r_i, r_o]
    probe = np.linspace(r_i, r_o, 7)
    A0 = lambda r: np.asarray(family(r, 0.0, 0.0), dtype=float)  # noqa: E731
    parts = [
        A0,
        lambda r: np.asarray(family(r, 1.0, 0.0), dtype=float) - A0(r),
        lambda r: np.asarray(family(r, 0.0, 1.0), dtype=float) - A0(r),
    ]
    c_test = (0.37, -1.9)
    direct = np.asarray(family(probe, *c_test), dtype=float)
    affine = parts[0](probe) + c_test[0] * parts[1](probe) + c_test[1] * parts[2](probe)
    if not np.allclose(direct, affine, rtol=1e-10, atol=1e-12 * np.abs(direct).max()):
        raise ConstructionError("the hoop-stress family must be affine in its two parameters")

    # columns: base, c0, c1, K1, K2 ; each gives (srr, srt, stt) as callables
    comps = []
    for A in parts:
        I = Chebyshev.interpolate(lambda x, A=A: x * A(x), degree, domain=dom).integ(lbnd=r_i)
        srt_r2 = m * I  # r^2 srt

        def g(x, A=A, srt_r2=srt_r2):
            return A(x) - m * srt_r2(x) / x**2

        J = Chebyshev.interpolate(g, degree, domain=dom).integ(lbnd=r_i)
        comps.append((A, srt_r2, J))
    # K1: srt = K1 / r^2, r srr = int -m K1 / s^2 ds = m K1 (1/r - 1/r_i)
    comps.append(
        (
            lambda x: 0 * x,
            lambda x: 1.0 + 0 * x,
            lambda x: m * (1.0 / x - 1.0 / r_i),
        )
    )
    # K2: r srr = K2
    comps.append((lambda x: 0 * x, lambda x: 0 * x, lambda x: 1.0 + 0 * x))

    def evaluate(k, r):
        A, srt_r2, rsrr = comps[k]
        return np.stack([rsrr(r) / r, srt_r2(r) / r**2, A(r)])

    ends = np.array([r_i, r_o])
    cols = [evaluate(k, ends)[:2].ravel() for k in range(5)]
    M = np.column_stack(cols[1:])  # unknowns c0, c1, K1, K2
    rhs = -cols[0]
    if np.linalg.cond(M) > 1e12:
        raise ConstructionError("singular boundary system; the family cannot meet the traction conditions")
    c0, c1, K1, K2 = np.linalg.solve(M, rhs)
    weights = np.array([1.0, c0, c1, K1, K2])

    def profile(r):
        r = np.asarray(r, dtype=float)
        return sum(w * evaluate(k, r) for k, w in enumerate(weights))

    meta = {"parameters": (float(c0), float(c1)), "constants": (float(K1), float(K2))}
    return RadialStressField(m, r_i, r_o, profile, name=name, metadata=meta)


def contact_pressure(r_i, r_c, r_o, nu, E_delta):
    """Interface pressure of the shrink fit, evaluated as printed in the source."""
    a = (r_c**2 + r_i**2) / (r_c**2 - r_i**2)
    b = (r_o**2 + r_c**2) / (r_o**2 - r_c**2)
    return E_delta / r_c * (1.0 / (a - nu) + 1.0 / (b + nu))


def shrink_fit(r_i=0.1, r_c=0.2, r_o=0.3, nu=0.3, E_delta=1e6) -> RadialStressField:
    """Axisymmetric residual stress of two shrink-fitted cylinders.

    Lame solutions for the inner cylinder under external pressure ``p_c`` and
    the outer cylinder under internal pressure ``p_c``. The hoop stress jumps
    at ``r_c``; exactly at ``r_c`` the outer branch is returned.
    """
    if not 0 < r_i < r_c < r_o:
        raise InvalidGeometryError(f"need 0 < r_i < r_c < r_o, got {r_i}, {r_c}, {r_o}")
    if not E_delta > 0:
        raise ValueError("E_delta must be positive")
    pc = contact_pressure(r_i, r_c, r_o, nu, E_delta)
    k_in = r_c**2 / r_i**2 - 1.0
    k_out = r_o**2 / r_c**2 - 1.0

    def profile(r):
        r = np.asarray(r, dtype=float)
        inner = r < r_c
        srr = np.where(
            inner,
            -pc / k_in * (r_c**2 / r_i**2 - r_c**2 / r**2),
            -pc / k_out * (r_o**2 / r**2 - 1.0),
        )
        stt = np.where(
            inner,
            -pc / k_in * (r_c**2 / r_i**2 + r_c**2 / r**2),
            pc / k_out * (r_o**2 / r**2 + 1.0),
        )
        return np.stack([srr, np.zeros_like(r), stt])

    meta = {"p_c": float(pc), "r_c": float(r_c)}
    return RadialStressField(0, r_i, r_o, profile, (float(r_c),), name="shrink", metadata=meta)


def thermoelastic(
    m: int = 3, beta: float = 1.0, r_i: float = R_INNER, r_o: float = R_OUTER, n_points: int = 96
) -> RadialStressField:
    """Thermal residual stress for a temperature rise ``r cos(m t)``.

    Solves, by Chebyshev collocation, the coupled pair

    ``S'' + S'/r - m^2 S / r^2 = -(m^2 - 1) beta / r`` with ``S = srr + stt``,
    ``srr'' + 4 srr'/r - stt'/r + 2 srr / r^2 + (m^2 - 2) stt / r^2 = 0``,

    with ``srr = 0`` and ``srr' + (srr - stt) / r = 0`` at both radii, then
    recovers ``srt`` from radial equilibrium. ``beta`` is
    ``-alpha E / (1 - nu)``.

    Raises
    ------
    NoConvergenceError
        The collocation system is singular or its residual is not small.
    """
    if int(m) != m or m < 1:
        raise ValueError("thermoelastic fields are defined here for m >= 1")
    if not 0 < r_i < r_o:
        raise InvalidGeometryError(f"need 0 < r_i < r_o, got {r_i}, {r_o}")
    m = int(m)
    N = int(n_points)
    r, D = lobatto_grid(r_i, r_o, N)
    n = N + 1
    D2 = D @ D
    R1, R2 = np.diag(1 / r), np.diag(1 / r**2)
    Z = np.zeros((n, n))
    # unknowns [srr, S]; stt = S - srr
    trace = np.hstack([Z, D2 + R1 @ D - m * m * R2])
    stt_op = np.hstack([-np.eye(n), np.eye(n)])
    srr_op = np.hstack([np.eye(n), Z])
    ode2 = (
        np.hstack([D2 + 4 * R1 @ D, Z])
        - R1 @ np.hstack([-D, D])
        + 2 * R2 @ srr_op
        + (m * m - 2) * R2 @ stt_op
    )
    rhs_trace = -(m * m - 1) * beta / r
    rows = [trace[1:-1], ode2[1:-1]]
    rhs = [rhs_trace[1:-1], np.zeros(n - 2)]
    nat = np.hstack([D, Z]) + R1 @ (srr_op - stt_op)
    for j in (0, N):
        rows.append(srr_op[j : j + 1])
        rows.append(nat[j : j + 1])
        rhs += [np.zeros(1), np.zeros(1)]
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"thermoelastic collocation system is singular: {exc}") from exc
    res = float(np.abs(A @ sol - b).max() / max(np.abs(b).max(), 1e-300))
    if not np.isfinite(res) or res > 1e-8:
        raise NoConvergenceError("thermoelastic collocation solve is inaccurate", res)
    srr, S = sol[:n], sol[n:]
    stt = S - srr
    srt = (stt - srr - r * (D @ srr)) / m
    series = ChebSeries(r_i, r_o, np.stack([srr, srt, stt]))
    meta = {"beta": float(beta), "trace": ChebSeries(r_i, r_o, S)}
    return RadialStressField(m, r_i, r_o, series, name="thermo", metadata=meta)


# -- membership diagnostics ------------------------------------------------------


def equilibrium_residuals(field: RadialStressField, r=None):
    """Pointwise relative residuals of the two polar equilibrium relations.

    Both residuals are divided by one common scale, the largest sum of term
    magnitudes of either relation over ``r``. A shared scale keeps a relation
    whose terms all vanish (``srt = 0`` when ``m = 0``) from dividing
    round-off by round-off.
    """
    if r is None:
        pieces = field.pieces()
        r = np.concatenate([np.linspace(a, b, 202)[1:-1] for a, b in pieces])
    r = np.asarray(r, dtype=float)
    a, b, c = field(r)
    da, db, _ = field.derivative(r)
    m = field.m
    t1 = np.stack([da, m * b / r, a / r, -c / r])
    t2 = np.stack([db, -m * c / r, 2 * b / r])
    scale = max(np.abs(t1).sum(axis=0).max(), np.abs(t2).sum(axis=0).max())
    if scale == 0:
        return np.zeros_like(r), np.zeros_like(r)
    return np.abs(t1.sum(axis=0)) / scale, np.abs(t2.sum(axis=0)) / scale


def traction_residual(field: RadialStressField) -> float:
    """Largest ``|srr|, |srt|`` at either radius relative to the largest stress."""
    r = np.linspace(field.r_i, field.r_o, 401)
    scale = np.abs(field(r)).max()
    ends = field(np.array([field.r_i, field.r_o]))[:2]
    return float(np.abs(ends).max() / scale) if scale > 0 else 0.0


def mean_stress(field) -> np.ndarray:
    """``(int sxx dA, int syy dA, int sxy dA)`` over the annulus or mesh.

    Zero for every self-equilibrating, traction-free field. Radial fields
    use the radial quadrature times a uniform angular rule that is exact for
    the trigonometric degree involved.
    """
    if isinstance(field, StressFieldNodal):
        from .assembly import mass_matrix

        ones = np.asarray(mass_matrix(field.mesh).sum(axis=0)).ravel()
        return ones @ field.values
    r, w = field.quadrature()
    n_theta = 2 * field.m + 8
    t = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(r, t, indexing="ij")
    vals = field.cartesian(R * np.cos(T), R * np.sin(T))  # (q, n_theta, 3)
    return np.einsum("q,qtj->j", w * r, vals) * (2 * np.pi / n_theta)


def membership_diagnostics(field) -> dict:
    """Equilibrium and traction residuals, relative, for radial or nodal fields."""
    if isinstance(field, StressFieldNodal):
        return nodal_membership(field)
    e1, e2 = equilibrium_residuals(field)
    return {"equilibrium": float(max(e1.max(), e2.max())), "traction": traction_residual(field)}


def nodal_membership(field: "StressFieldNodal") -> dict:
    """Weak residuals of equilibrium and traction for a nodal field.

    Equilibrium: the element integrals ``int div sigma dA``. Traction: the
    traction rows of the boundary constraint operator. Both are reported
    relative to the same operators, taken entrywise in absolute value,
    applied to a constant field of magnitude ``max |sigma|``. A traction-free
    field is near zero on the boundary, so scaling by its own boundary
    values would be meaningless.
    """
    from .assembly import assemble_constraints, nodal_operators

    mesh = field.mesh
    _, _, Dx, Dy = nodal_operators(mesh)
    sxx, syy, sxy = field.values.T
    eq = np.concatenate([Dx @ sxx + Dy @ sxy, Dx @ sxy + Dy @ syy])
    peak = np.abs(field.values).max() * np.ones(mesh.n_nodes)
    aDx, aDy = abs(Dx), abs(Dy)
    eq_scale = np.concatenate([aDx @ peak + aDy @ peak] * 2)
    B = assemble_constraints(mesh)
    c = np.concatenate([sxx, syy, sxy, np.zeros(2 * mesh.n_elements)])
    ca = np.concatenate([peak] * 3 + [np.zeros(2 * mesh.n_elements)])
    rows = np.sort(np.concatenate([np.arange(0, B.shape[0], 3), np.arange(1, B.shape[0], 3)]))
    Bt = B[rows]
    tr = Bt @ c
    tr_scale = abs(Bt) @ ca
    return {
        "equilibrium": float(np.linalg.norm(eq) / max(np.linalg.norm(eq_scale), 1e-300)),
        "traction": float(np.linalg.norm(tr) / max(np.linalg.norm(tr_scale), 1e-300)),
    }


# -- import ----------------------------------------------------------------------


def import_field(mesh: Mesh, path, format: str = "csv", name: str | None = None) -> "StressFieldNodal":
    """Read nodal stresses for ``mesh``.

    Formats
    -------
    csv
        Header ``node_id,sxx,syy,sxy``; 0-based ids; one row per node.
    abaqus-report-subset
        Plain-text field report: a header line naming ``S11``, ``S22`` and
        ``S12`` columns, a dashed separator, then rows starting with a 1-based
        node label. Other lines are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    if format == "csv":
        values = read_id_table(path, mesh.n_nodes, 3)
    elif format == "abaqus-report-subset":
        values = _read_report(path, mesh.n_nodes)
    else:
        raise ValueError(f"unknown field format {format!r}")
    return StressFieldNodal(mesh, values, name=name or path.stem)


def _read_report(path: Path, n_nodes: int) -> np.ndarray:
    cols = None
    values = np.full((n_nodes, 3), np.nan)
    in_table = False
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if cols is None and {"S11", "S22", "S12"} <= {t.split(".")[-1] for t in tokens}:
            names = [t.split(".")[-1] for t in tokens]
            # the first header tokens describe the label column ("Node Label")
            data_names = names[len(names) - sum(n.startswith("S") for n in names) :]
            cols = [data_names.index(k) for k in ("S11", "S22", "S12")]
            continue
        if cols is not None and set(line.strip()) <= set("-"):
            in_table = True
            continue
        if not in_table:
            continue
        try:
            label = int(tokens[0])
            row = [float(t) for t in tokens[1:]]
        except ValueError:
            in_table = False
            continue
        if not 1 <= label <= n_nodes:
            raise MismatchError(f"{path}:{lineno}: node label {label} is not in the mesh")
        try:
            values[label - 1] = [row[c] for c in cols]
        except IndexError:
            raise FieldFormatError(f"{path}:{lineno}: too few stress columns") from None
    if cols is None:
        raise FieldFormatError(f"{path}: no header naming S11, S22 and S12")
    missing = np.nonzero(np.isnan(values).any(axis=1))[0]
    if missing.size:
        raise MismatchError(
            f"{path}: node count mismatch, node label {int(missing[0]) + 1} missing "
            f"({missing.size} of {n_nodes} absent)"
        )
    return values
