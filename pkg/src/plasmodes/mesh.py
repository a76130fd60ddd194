"""Closed triangulated surfaces: file IO, generation, validation, panel geometry.

A :class:`SurfaceMesh` is a plain container (vertices + oriented triangles).
Topological and geometric validity is established by :func:`validate_mesh`,
which every loader and generator routes through.  :func:`panelize` derives the
per-triangle collocation geometry (centroid, outward unit normal, area) that
the operator assembly consumes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshError",
    "MeshFormatError",
    "MeshTopologyError",
    "DegenerateTriangleError",
    "SurfaceMesh",
    "ValidationReport",
    "PanelSet",
    "load_mesh",
    "load_mesh_path",
    "serialize_off",
    "gen_icosphere",
    "gen_ellipsoid",
    "panelize",
    "validate_mesh",
]

# Relative tolerances (all scale-free, against the bounding-box diagonal or
# total area of the surface).
DEGENERATE_AREA_REL = 1e-12
WELD_TOL_REL = 1e-9
CLOSURE_TOL_REL = 1e-8

MAX_SUBDIVISION_LEVEL = 7


class MeshError(Exception):
    """Base class for mesh loading and validation failures."""


class MeshFormatError(MeshError):
    """Malformed mesh file; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshTopologyError(MeshError):
    """Open boundary, non-manifold edge, or inconsistent winding."""


class DegenerateTriangleError(MeshError):
    """Triangle area below the degeneracy threshold."""


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangulated surface: vertex coordinates and CCW-from-outside triangles.

    Construction performs only shape/index checks; call :func:`validate_mesh`
    to establish closedness, orientation, and non-degeneracy.
    """

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (F, 3) int64, vertex indices

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {verts.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError(f"triangles must be (F, 3), got {tris.shape}")
        if not np.all(np.isfinite(verts)):
            raise MeshError("non-finite vertex coordinates")
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise MeshError("triangle vertex index out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def bbox_diagonal(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive iff winding is outward."""
        v0, v1, v2 = (self.vertices[self.triangles[:, i]] for i in range(3))
        return float(np.einsum("ij,ij->", v0, np.cross(v1, v2)) / 6.0)

    def flipped(self) -> "SurfaceMesh":
        """Mesh with all triangle windings reversed."""
        return SurfaceMesh(self.vertices.copy(), self.triangles[:, ::-1].copy())


@dataclass(frozen=True)
class ValidationReport:
    n_vertices: int
    n_triangles: int
    n_edges: int
    euler_characteristic: int
    signed_volume: float
    orientation_flipped: bool
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PanelSet:
    """Per-triangle collocation geometry of a closed surface.

    Attributes
    ----------
    centroids : (N, 3) ndarray
        Triangle centroids (vertex averages).
    normals : (N, 3) ndarray
        Outward unit normals (CCW winding convention).
    areas : (N,) ndarray
        Positive triangle areas.
    corners : (N, 3, 3) ndarray
        Triangle vertex coordinates, kept for near-field subdivision.
    diameters : (N,) ndarray
        Longest edge per triangle, used for near/far panel classification.
    """

    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    corners: np.ndarray
    diameters: np.ndarray

    @property
    def count(self) -> int:
        return len(self.areas)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def closure_defect(self) -> float:
        """Norm of the vector area sum; zero for an exactly closed surface."""
        return float(np.linalg.norm((self.areas[:, None] * self.normals).sum(axis=0)))


def _edge_table(triangles: np.ndarray) -> dict[tuple[int, int], list[int]]:
    """Map each undirected edge to the winding signs it appears with."""
    edges: dict[tuple[int, int], list[int]] = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            a, b = int(a), int(b)
            if a == b:
                raise MeshTopologyError(f"triangle repeats vertex {a}")
            key, direction = ((a, b), 1) if a < b else ((b, a), -1)
            edges.setdefault(key, []).append(direction)
    return edges


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    v0, v1, v2 = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)


def validate_mesh(mesh: SurfaceMesh) -> tuple[SurfaceMesh, ValidationReport]:
    """Check closedness, manifoldness, orientation, and non-degeneracy.

    Returns the (possibly globally flipped) mesh together with a report.
    Inward global winding is auto-corrected with a warning; genus > 0 is
    accepted with a warning.  Everything else raises a :class:`MeshError`
    subclass.
    """
    if mesh.n_triangles < 4:
        raise MeshTopologyError(
            f"a closed surface needs at least 4 triangles, got {mesh.n_triangles}")

    diag = mesh.bbox_diagonal()
    if diag == 0.0:
        raise MeshError("mesh bounding box is a point")
    areas = _triangle_areas(mesh.vertices, mesh.triangles)
    bad = np.nonzero(areas <= DEGENERATE_AREA_REL * diag * diag)[0]
    if bad.size:
        raise DegenerateTriangleError(
            f"degenerate triangle {int(bad[0])} (area {areas[bad[0]]:.3e})")

    edges = _edge_table(mesh.triangles)
    report_warnings: list[str] = []
    for (a, b), dirs in edges.items():
        if len(dirs) == 1:
            raise MeshTopologyError(f"open boundary at edge ({a}, {b})")
        if len(dirs) > 2:
            raise MeshTopologyError(
                f"non-manifold edge ({a}, {b}) shared by {len(dirs)} triangles")
        if dirs[0] == dirs[1]:
            raise MeshTopologyError(
                f"inconsistent winding at edge ({a}, {b}); "
                "neighbouring triangles disagree on orientation")

    chi = mesh.n_vertices - len(edges) + mesh.n_triangles
    if chi != 2:
        msg = f"Euler characteristic {chi} != 2 (genus > 0 or disconnected surface)"
        report_warnings.append(msg)
        warnings.warn(msg, stacklevel=2)

    flipped = False
    volume = mesh.signed_volume()
    if volume == 0.0:
        raise MeshTopologyError("signed volume is zero; cannot orient surface")
    if volume < 0.0:
        mesh = mesh.flipped()
        volume = -volume
        flipped = True
        msg = "inward orientation detected; winding flipped globally"
        report_warnings.append(msg)
        warnings.warn(msg, stacklevel=2)

    report = ValidationReport(
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        n_edges=len(edges),
        euler_characteristic=chi,
        signed_volume=volume,
        orientation_flipped=flipped,
        warnings=tuple(report_warnings),
    )
    return mesh, report


# ---------------------------------------------------------------------------
# File formats


def _strip_comment(line: str) -> str:
    cut = line.find("#")
    return line if cut < 0 else line[:cut]


def _parse_off(text: str) -> SurfaceMesh:
    # (line_number, tokens) for every non-empty line after comment stripping
    rows = [(no, _strip_comment(raw).split())
            for no, raw in enumerate(text.splitlines(), start=1)]
    rows = [(no, toks) for no, toks in rows if toks]
    if not rows:
        raise MeshFormatError("empty OFF file")

    no, toks = rows[0]
    if toks[0] != "OFF":
        raise MeshFormatError(f"expected 'OFF' header, got {toks[0]!r}", no)
    toks = toks[1:]
    pos = 1
    if not toks:  # counts may share the header line
        if len(rows) < 2:
            raise MeshFormatError("missing vertex/face counts", no)
        no, toks = rows[1]
        pos = 2
    if len(toks) != 3:
        raise MeshFormatError("expected 'V F E' counts", no)
    try:
        n_verts, n_faces, _ = (int(t) for t in toks)
    except ValueError:
        raise MeshFormatError(f"bad counts {' '.join(toks)!r}", no) from None
    if n_verts < 0 or n_faces < 0:
        raise MeshFormatError("negative counts", no)
    if len(rows) - pos < n_verts + n_faces:
        raise MeshFormatError(
            f"expected {n_verts} vertex and {n_faces} face lines, "
            f"found {len(rows) - pos}")

    verts = np.empty((n_verts, 3))
    for i in range(n_verts):
        no, toks = rows[pos + i]
        if len(toks) != 3:
            raise MeshFormatError("expected 3 coordinates", no)
        try:
            verts[i] = [float(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"bad coordinate in {' '.join(toks)!r}", no) from None

    tris = np.empty((n_faces, 3), dtype=np.int64)
    for i in range(n_faces):
        no, toks = rows[pos + n_verts + i]
        try:
            counts = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"bad face line {' '.join(toks)!r}", no) from None
        if not counts or counts[0] != 3 or len(counts) != 4:
            raise MeshFormatError("only triangular faces ('3 i j k') supported", no)
        if min(counts[1:]) < 0 or max(counts[1:]) >= n_verts:
            raise MeshFormatError("vertex index out of range", no)
        tris[i] = counts[1:]

    return SurfaceMesh(verts, tris)


def _parse_stl(text: str) -> SurfaceMesh:
    # Triangle soup; stored facet normals are ignored and connectivity is
    # recovered by welding coincident vertices.
    soup: list[list[float]] = []
    in_loop = False
    loop: list[list[float]] = []
    seen_solid = False
    for no, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split()
        if not toks:
            continue
        head = toks[0].lower()
        if head == "solid":
            seen_solid = True
        elif head == "facet":
            loop = []
        elif head == "outer":
            in_loop = True
        elif head == "vertex":
            if not in_loop:
                raise MeshFormatError("vertex outside 'outer loop'", no)
            if len(toks) != 4:
                raise MeshFormatError("vertex needs 3 coordinates", no)
            try:
                loop.append([float(t) for t in toks[1:]])
            except ValueError:
                raise MeshFormatError(f"bad coordinate in {raw.strip()!r}", no) from None
        elif head == "endloop":
            in_loop = False
        elif head == "endfacet":
            if len(loop) != 3:
                raise MeshFormatError(
                    f"facet has {len(loop)} vertices, expected 3", no)
            soup.extend(loop)
            loop = []
        elif head == "endsolid":
            break
        else:
            raise MeshFormatError(f"unexpected token {toks[0]!r}", no)
    if not seen_solid:
        raise MeshFormatError("missing 'solid' header", 1)
    if not soup:
        raise MeshFormatError("no facets found")
    return _weld(np.asarray(soup, dtype=np.float64))


def _weld(points: np.ndarray) -> SurfaceMesh:
    """Merge soup vertices within WELD_TOL_REL x bbox diagonal."""
    diag = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    tol = WELD_TOL_REL * diag if diag > 0 else WELD_TOL_REL
    grid: dict[tuple[int, int, int], list[int]] = {}
    verts: list[np.ndarray] = []
    index = np.empty(len(points), dtype=np.int64)
    inv = 1.0 / tol
    for i, p in enumerate(points):
        cell = tuple(int(q) for q in np.floor(p * inv))
        found = -1
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for j in grid.get((cell[0] + dx, cell[1] + dy, cell[2] + dz), ()):
                        if np.max(np.abs(verts[j] - p)) <= tol:
                            found = j
                            break
                    if found >= 0:
                        break
                if found >= 0:
                    break
            if found >= 0:
                break
        if found < 0:
            found = len(verts)
            verts.append(p)
            grid.setdefault(cell, []).append(found)
        index[i] = found
    triangles = index.reshape(-1, 3)
    return SurfaceMesh(np.asarray(verts), triangles)


def load_mesh(text: str, fmt: str) -> SurfaceMesh:
    """Parse and validate mesh-file content.

    Parameters
    ----------
    text : str
        File content.
    fmt : {"off", "stl"}
        Declared format (case-insensitive).

    Returns
    -------
    SurfaceMesh
        Validated, outward-oriented mesh.  Inward winding is flipped with a
        warning; structural defects raise :class:`MeshError` subclasses.
    """
    fmt = fmt.lower()
    if fmt == "off":
        mesh = _parse_off(text)
    elif fmt == "stl":
        mesh = _parse_stl(text)
    else:
        raise ValueError(f"unknown mesh format {fmt!r} (expected 'off' or 'stl')")
    mesh, _ = validate_mesh(mesh)
    return mesh


def load_mesh_path(path) -> SurfaceMesh:
    """Load a mesh file, inferring the format from suffix or content."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    name = str(path).lower()
    if name.endswith(".off"):
        fmt = "off"
    elif name.endswith(".stl"):
        fmt = "stl"
    else:
        head = text.lstrip()[:5].lower()
        fmt = "off" if head.startswith("off") else "stl"
    return load_mesh(text, fmt)


def serialize_off(mesh: SurfaceMesh) -> str:
    """Serialize to ASCII OFF with 17-significant-digit coordinates."""
    edges = {tuple(sorted((int(t[i]), int(t[(i + 1) % 3])))) for t in mesh.triangles
             for i in range(3)}
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} {len(edges)}"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for t in mesh.triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Generators

# Unit icosahedron with outward CCW winding (verified by signed volume).
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array([
    [-1.0, _PHI, 0.0], [1.0, _PHI, 0.0], [-1.0, -_PHI, 0.0], [1.0, -_PHI, 0.0],
    [0.0, -1.0, _PHI], [0.0, 1.0, _PHI], [0.0, -1.0, -_PHI], [0.0, 1.0, -_PHI],
    [_PHI, 0.0, -1.0], [_PHI, 0.0, 1.0], [-_PHI, 0.0, -1.0], [-_PHI, 0.0, 1.0],
])
_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def _normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def gen_icosphere(level: int, radius: float = 1.0) -> SurfaceMesh:
    """Icosahedron subdivided `level` times, vertices projected to `radius`.

    Produces 20 * 4**level triangles and 10 * 4**level + 2 vertices.  The
    subdivision splits each triangle at its edge midpoints and lifts the new
    vertices radially, so every vertex lies exactly on the sphere.
    """
    if not 0 <= level <= MAX_SUBDIVISION_LEVEL:
        raise ValueError(
            f"level out of range: {level} (allowed 0..{MAX_SUBDIVISION_LEVEL})")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")

    verts = [v for v in _normalized(_ICO_VERTS)]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = midpoint.get(key)
            if idx is None:
                idx = len(verts)
                verts.append(_normalized(0.5 * (verts[a] + verts[b])))
                midpoint[key] = idx
            return idx

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            next_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = next_faces

    vertices = np.asarray(verts) * radius
    return SurfaceMesh(vertices, np.asarray(faces, dtype=np.int64))


def gen_ellipsoid(a: float, b: float, c: float, level: int) -> SurfaceMesh:
    """Icosphere scaled to semi-axes (a, b, c); degenerate axes are rejected."""
    if min(a, b, c) <= 0:
        raise ValueError(f"semi-axes must be positive, got ({a}, {b}, {c})")
    sphere = gen_icosphere(level, 1.0)
    mesh = SurfaceMesh(sphere.vertices * np.array([a, b, c]), sphere.triangles)
    mesh, _ = validate_mesh(mesh)  # catches triangles flattened by tiny axes
    return mesh


def panelize(mesh: SurfaceMesh) -> PanelSet:
    """Derive collocation geometry: centroids, outward normals, areas.

    Triangle order is preserved (panel i corresponds to triangle i).
    """
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    v1 = mesh.vertices[mesh.triangles[:, 1]]
    v2 = mesh.vertices[mesh.triangles[:, 2]]
    cross = np.cross(v1 - v0, v2 - v0)
    two_area = np.linalg.norm(cross, axis=1)

    diag = mesh.bbox_diagonal()
    bad = np.nonzero(two_area <= 2.0 * DEGENERATE_AREA_REL * diag * diag)[0]
    if bad.size:
        raise DegenerateTriangleError(
            f"degenerate triangle {int(bad[0])} (area {two_area[bad[0]] / 2:.3e})")

    corners = np.stack([v0, v1, v2], axis=1)
    edge_lengths = np.stack([
        np.linalg.norm(v1 - v0, axis=1),
        np.linalg.norm(v2 - v1, axis=1),
        np.linalg.norm(v0 - v2, axis=1),
    ], axis=1)
    return PanelSet(
        centroids=(v0 + v1 + v2) / 3.0,
        normals=cross / two_area[:, None],
        areas=0.5 * two_area,
        corners=corners,
        diameters=edge_lengths.max(axis=1),
    )
