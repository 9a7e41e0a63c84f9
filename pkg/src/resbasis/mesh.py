"""Q8 serendipity meshes: generation, import, quadrature and boundary geometry.

Local node numbering follows the usual convention: corners 0-3 counterclockwise,
midside ``4 + k`` sitting on the edge between corners ``k`` and ``(k + 1) % 4``.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidGeometryError, MeshFormatError

logger = logging.getLogger(__name__)

# Reference coordinates of the eight nodes.
NODE_XI = np.array(
    [[-1, -1], [1, -1], [1, 1], [-1, 1], [0, -1], [1, 0], [0, 1], [-1, 0]],
    dtype=float,
)

# (start corner, midside, end corner) for each local edge, counterclockwise.
EDGE_NODES = np.array([[0, 4, 1], [1, 5, 2], [2, 6, 3], [3, 7, 0]])


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on [-1, 1]^2 plus a matching edge rule."""

    points: np.ndarray
    weights: np.ndarray
    edge_points: np.ndarray
    edge_weights: np.ndarray

    @classmethod
    def gauss(cls, n_area: int = 3, n_edge: int = 3) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(n_area)
        xi, eta = np.meshgrid(x, x, indexing="ij")
        pts = np.column_stack([xi.ravel(), eta.ravel()])
        wts = np.outer(w, w).ravel()
        ex, ew = np.polynomial.legendre.leggauss(n_edge)
        return cls(pts, wts, ex, ew)


DEFAULT_RULE = QuadratureRule.gauss()


def shape_functions(xi, eta):
    """Serendipity Q8 shape functions and their reference gradients.

    Accepts scalars or equally shaped arrays. Returns ``(N, dN)`` with
    ``N.shape == shape + (8,)`` and ``dN.shape == shape + (8, 2)`` where the
    last axis of ``dN`` holds (d/dxi, d/deta).
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    shape = np.broadcast(xi, eta).shape
    xi = np.broadcast_to(xi, shape)
    eta = np.broadcast_to(eta, shape)
    N = np.empty(shape + (8,))
    dN = np.empty(shape + (8, 2))
    for p in range(4):
        a, b = NODE_XI[p]
        s = 1 + a * xi
        t = 1 + b * eta
        q = a * xi + b * eta - 1
        N[..., p] = 0.25 * s * t * q
        dN[..., p, 0] = 0.25 * a * t * (q + s)
        dN[..., p, 1] = 0.25 * b * s * (q + t)
    for p in (4, 6):
        b = NODE_XI[p, 1]
        N[..., p] = 0.5 * (1 - xi**2) * (1 + b * eta)
        dN[..., p, 0] = -xi * (1 + b * eta)
        dN[..., p, 1] = 0.5 * b * (1 - xi**2)
    for p in (5, 7):
        a = NODE_XI[p, 0]
        N[..., p] = 0.5 * (1 + a * xi) * (1 - eta**2)
        dN[..., p, 0] = 0.5 * a * (1 - eta**2)
        dN[..., p, 1] = -eta * (1 + a * xi)
    return N, dN


def edge_reference_points(local_edge: int, s):
    """Map an edge parameter ``s`` in [-1, 1] to reference (xi, eta).

    Edges are traversed counterclockwise, so the outward normal is the
    tangent rotated clockwise.
    """
    s = np.asarray(s, dtype=float)
    one = np.ones_like(s)
    if local_edge == 0:
        return s, -one
    if local_edge == 1:
        return one, s
    if local_edge == 2:
        return -s, one
    if local_edge == 3:
        return -one, -s
    raise ValueError(f"local edge must be 0..3, got {local_edge}")


@dataclass(frozen=True)
class BoundaryEdge:
    element: int
    local_edge: int
    nodes: tuple[int, int, int]
    normals: np.ndarray  # (n_edge_points, 2) outward unit normals


@dataclass(frozen=True)
class Mesh:
    """Immutable Q8 mesh.

    Parameters
    ----------
    nodes : (n, 2) array of coordinates.
    elements : (e, 8) integer array of node indices.
    rule : quadrature used for all element and edge integrals.
    """

    nodes: np.ndarray
    elements: np.ndarray
    rule: QuadratureRule = field(default=DEFAULT_RULE, repr=False, compare=False)
    boundary_edges: tuple[BoundaryEdge, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise InvalidGeometryError(f"nodes must have shape (n, 2), got {nodes.shape}")
        if elements.ndim != 2 or elements.shape[1] != 8:
            raise InvalidGeometryError(f"elements must have shape (e, 8), got {elements.shape}")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise InvalidGeometryError("element connectivity references a missing node")
        nodes.flags.writeable = False
        elements.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary_edges", self._find_boundary())

    # -- basic sizes -------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def boundary_nodes(self) -> np.ndarray:
        """Sorted indices of all nodes lying on boundary edges."""
        if not self.boundary_edges:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([e.nodes for e in self.boundary_edges]))

    # -- geometry ------------------------------------------------------------
    def element_geometry(self):
        """Shape data at area quadrature points for every element.

        Returns ``(N, dNdx, wdet)`` with shapes ``(q, 8)``, ``(e, q, 8, 2)``
        and ``(e, q)``; ``wdet`` is quadrature weight times Jacobian
        determinant.
        """
        N, dN = shape_functions(self.rule.points[:, 0], self.rule.points[:, 1])
        X = self.nodes[self.elements]  # (e, 8, 2)
        # J[e, q, i, j] = d x_j / d xi_i
        J = np.einsum("qpi,epj->eqij", dN, X)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        bad = np.nonzero((det <= 0).any(axis=1))[0]
        if bad.size:
            raise InvalidGeometryError(
                f"element {int(bad[0])} has a nonpositive Jacobian determinant"
            )
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1] / det
        inv[..., 1, 1] = J[..., 0, 0] / det
        inv[..., 0, 1] = -J[..., 0, 1] / det
        inv[..., 1, 0] = -J[..., 1, 0] / det
        # dN/dx_j = sum_i (J^-1)[j, i] dN/dxi_i
        dNdx = np.einsum("eqji,qpi->eqpj", inv, dN)
        wdet = det * self.rule.weights
        return N, dNdx, wdet

    def element_areas(self) -> np.ndarray:
        return self.element_geometry()[2].sum(axis=1)

    def area(self) -> float:
        return float(self.element_areas().sum())

    def centroids(self) -> np.ndarray:
        N, _, wdet = self.element_geometry()
        X = self.nodes[self.elements]
        xq = np.einsum("qp,epj->eqj", N, X)
        return np.einsum("eq,eqj->ej", wdet, xq) / wdet.sum(axis=1)[:, None]

    def edge_geometry(self, edge: BoundaryEdge):
        """Edge quadrature data for one boundary edge.

        Returns ``(N, dNdx, ds, normals, xy)``: shape values ``(g, 8)``,
        physical gradients ``(g, 8, 2)``, arc-length weights ``(g,)``,
        outward normals ``(g, 2)`` and physical points ``(g, 2)``.
        """
        s = self.rule.edge_points
        xi, eta = edge_reference_points(edge.local_edge, s)
        N, dN = shape_functions(xi, eta)
        X = self.nodes[self.elements[edge.element]]
        J = np.einsum("gpi,pj->gij", dN, X)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.stack(
            [
                np.stack([J[:, 1, 1], -J[:, 0, 1]], axis=-1),
                np.stack([-J[:, 1, 0], J[:, 0, 0]], axis=-1),
            ],
            axis=-2,
        ) / det[:, None, None]
        dNdx = np.einsum("gji,gpi->gpj", inv, dN)
        # tangent along increasing s
        dxi_ds, deta_ds = _edge_direction(edge.local_edge)
        tangent = dxi_ds * J[:, 0, :] + deta_ds * J[:, 1, :]
        jac = np.linalg.norm(tangent, axis=1)
        normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / jac[:, None]
        xy = N @ X
        return N, dNdx, jac * self.rule.edge_weights, normals, xy

    # -- topology ------------------------------------------------------------
    def _find_boundary(self) -> tuple[BoundaryEdge, ...]:
        owners: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for e, conn in enumerate(self.elements):
            for k in range(4):
                a, b = int(conn[EDGE_NODES[k, 0]]), int(conn[EDGE_NODES[k, 2]])
                owners.setdefault((min(a, b), max(a, b)), []).append((e, k))
        edges = []
        for key, own in owners.items():
            if len(own) > 2:
                raise MeshFormatError(
                    f"non-manifold edge between nodes {key[0]} and {key[1]} "
                    f"shared by elements {[o[0] for o in own]}"
                )
            if len(own) == 1:
                e, k = own[0]
                conn = self.elements[e]
                nodes = tuple(int(conn[i]) for i in EDGE_NODES[k])
                edges.append(BoundaryEdge(e, k, nodes, np.empty((0, 2))))
        edges.sort(key=lambda be: (be.element, be.local_edge))
        out = []
        for be in edges:
            normals = self.edge_geometry(be)[3]
            normals.flags.writeable = False
            out.append(BoundaryEdge(be.element, be.local_edge, be.nodes, normals))
        return tuple(out)

    # -- persistence ---------------------------------------------------------
    def to_json(self, path) -> None:
        """Write the native format: ``{"nodes": [[x, y], ...], "elements": [[...], ...]}``."""
        payload = {"nodes": self.nodes.tolist(), "elements": self.elements.tolist()}
        Path(path).write_text(json.dumps(payload))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return np.array_equal(self.nodes, other.nodes) and np.array_equal(
            self.elements, other.elements
        )

    __hash__ = None


def _edge_direction(local_edge: int):
    return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][local_edge]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _check_count(name, value, minimum):
    if int(value) != value or value < minimum:
        raise InvalidGeometryError(f"{name} must be an integer >= {minimum}, got {value}")


def _structured_q8(nx: int, ny: int, position) -> Mesh:
    """Build a structured Q8 mesh on an (nx, ny) grid of a logical rectangle.

    ``position(u, v)`` maps logical coordinates ``u`` in [0, 2 nx] and ``v``
    in [0, 2 ny] (half-element steps) to physical points.
    """
    index = -np.ones((2 * nx + 1, 2 * ny + 1), dtype=np.int64)
    coords = []
    for j in range(2 * ny + 1):
        for i in range(2 * nx + 1):
            if i % 2 == 1 and j % 2 == 1:
                continue
            index[i, j] = len(coords)
            coords.append(position(i, j))
    elements = []
    for ej in range(ny):
        for ei in range(nx):
            i, j = 2 * ei, 2 * ej
            elements.append(
                [
                    index[i, j],
                    index[i + 2, j],
                    index[i + 2, j + 2],
                    index[i, j + 2],
                    index[i + 1, j],
                    index[i + 2, j + 1],
                    index[i + 1, j + 2],
                    index[i, j + 1],
                ]
            )
    return np.array(coords, dtype=float), np.array(elements, dtype=np.int64), index


def generate_rect_mesh(width: float, height: float, nx: int, ny: int) -> Mesh:
    """Uniform Q8 mesh of ``[0, width] x [0, height]``."""
    if not (width > 0 and height > 0):
        raise InvalidGeometryError(f"rectangle dimensions must be positive, got {width} x {height}")
    _check_count("nx", nx, 1)
    _check_count("ny", ny, 1)
    hx, hy = width / (2 * nx), height / (2 * ny)
    nodes, elements, _ = _structured_q8(nx, ny, lambda i, j: (i * hx, j * hy))
    return Mesh(nodes, elements)


def generate_annulus_mesh(r_i: float, r_o: float, n_radial: int, n_circumferential: int) -> Mesh:
    """Structured polar Q8 mesh of the annulus ``r_i <= r <= r_o``.

    Every node, midside nodes included, sits on its exact polar location, so
    circumferential edges follow the true circular arcs.
    """
    if not (r_i > 0 and r_o > 0) or not r_i < r_o:
        raise InvalidGeometryError(f"need 0 < r_i < r_o, got r_i={r_i}, r_o={r_o}")
    _check_count("n_radial", n_radial, 1)
    _check_count("n_circumferential", n_circumferential, 3)
    nr, nt = int(n_radial), int(n_circumferential)
    dr = (r_o - r_i) / (2 * nr)
    dt = 2 * math.pi / (2 * nt)

    # logical u runs outward, v around the circle; the seam is closed by
    # folding v = 2 nt back onto v = 0.
    def position(i, j):
        r = r_i + i * dr
        t = j * dt
        return (r * math.cos(t), r * math.sin(t))

    nodes, elements, index = _structured_q8(nr, nt, position)
    seam, start = index[:, 2 * nt], index[:, 0]
    remap = np.arange(len(nodes))
    remap[seam[seam >= 0]] = start[seam >= 0]
    keep = np.ones(len(nodes), dtype=bool)
    keep[seam[seam >= 0]] = False
    new_id = -np.ones(len(nodes), dtype=np.int64)
    new_id[keep] = np.arange(keep.sum())
    elements = new_id[remap[elements]]
    return Mesh(nodes[keep], elements)


# ---------------------------------------------------------------------------
# import
# ---------------------------------------------------------------------------


def load_mesh(path, format: str | None = None) -> Mesh:
    """Read a mesh from the native JSON format or an Abaqus ``.inp`` subset.

    ``format`` is ``"native-json"`` or ``"abaqus-inp-subset"``; when omitted
    it is inferred from the file extension.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mesh file not found: {path}")
    if format is None:
        format = "abaqus-inp-subset" if path.suffix.lower() == ".inp" else "native-json"
    if format == "native-json":
        try:
            data = json.loads(path.read_text())
            nodes = np.asarray(data["nodes"], dtype=float)
            elements = np.asarray(data["elements"], dtype=np.int64)
        except (KeyError, ValueError, TypeError) as exc:
            raise MeshFormatError(f"{path}: not a native mesh file ({exc})") from exc
        if elements.ndim != 2 or elements.shape[1] != 8:
            raise MeshFormatError(f"{path}: elements must be 8-tuples")
        bad = np.nonzero((elements < 0) | (elements >= len(nodes)))
        if bad[0].size:
            raise MeshFormatError(
                f"{path}: element {int(bad[0][0])} references missing node {int(elements[bad][0])}"
            )
        return Mesh(nodes, elements)
    if format == "abaqus-inp-subset":
        return _read_inp(path)
    raise MeshFormatError(f"unknown mesh format {format!r}")


def _read_inp(path: Path) -> Mesh:
    node_ids: list[int] = []
    coords: list[tuple[float, float]] = []
    raw_elements: list[tuple[int, list[int]]] = []
    section = None
    n_corner = 0
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("**"):
            continue
        if stripped.startswith("*"):
            keyword = stripped.split(",")[0].strip().upper()
            if keyword == "*NODE":
                section = "node"
            elif keyword == "*ELEMENT":
                m = re.search(r"TYPE\s*=\s*([A-Za-z0-9]+)", stripped, flags=re.IGNORECASE)
                etype = m.group(1).upper() if m else ""
                if "CPE8" in etype or "CPS8" in etype:
                    n_corner = 8
                elif "CPE4" in etype or "CPS4" in etype:
                    n_corner = 4
                else:
                    raise MeshFormatError(f"{path}:{lineno}: unsupported element type {etype!r}")
                section = "element"
            else:
                logger.warning("%s:%d: skipping keyword %s", path, lineno, keyword)
                section = None
            continue
        fields = [f for f in (s.strip() for s in stripped.split(",")) if f]
        try:
            if section == "node":
                node_ids.append(int(fields[0]))
                coords.append((float(fields[1]), float(fields[2])))
            elif section == "element":
                conn = [int(f) for f in fields[1:]]
                if len(conn) != n_corner:
                    raise MeshFormatError(
                        f"{path}:{lineno}: element {fields[0]} has {len(conn)} nodes, expected {n_corner}"
                    )
                raw_elements.append((int(fields[0]), conn))
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"{path}:{lineno}: cannot parse record {stripped!r}") from exc

    lookup = {nid: k for k, nid in enumerate(node_ids)}
    nodes = list(coords)
    midside: dict[tuple[int, int], int] = {}
    elements = []
    for eid, conn in raw_elements:
        try:
            idx = [lookup[n] for n in conn]
        except KeyError as exc:
            raise MeshFormatError(f"{path}: element {eid} references missing node {exc.args[0]}") from exc
        corners = idx[:4]
        # orient counterclockwise
        p = np.array([nodes[i] for i in corners])
        signed = 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
        if len(idx) == 8:
            mids = idx[4:]
            if signed < 0:
                corners = [corners[0], corners[3], corners[2], corners[1]]
                mids = [mids[3], mids[2], mids[1], mids[0]]
        else:
            if signed < 0:
                corners = [corners[0], corners[3], corners[2], corners[1]]
            mids = []
            for k in range(4):
                a, b = corners[k], corners[(k + 1) % 4]
                key = (min(a, b), max(a, b))
                if key not in midside:
                    midside[key] = len(nodes)
                    pa, pb = nodes[a], nodes[b]
                    nodes.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
                mids.append(midside[key])
        elements.append(corners + mids)
    if not elements:
        raise MeshFormatError(f"{path}: no *ELEMENT records found")
    return Mesh(np.array(nodes, dtype=float), np.array(elements, dtype=np.int64))
