"""Dense collocation discretization of the electrostatic double-layer operator.

The surface eigenproblem solved here is

    integral_S F(r, r') sigma(r') dS(r') = lambda sigma(r),

with the Neumann-Poincare kernel

    F(r, r') = -(1 / 2 pi) * n(r) . (r - r') / |r - r'|^3,

n(r) the outward unit normal.  Collocation at panel centroids against
piecewise-constant densities yields a dense nonsymmetric matrix K with

    K[i, j] ~= integral_{panel j} F(c_i, n_i, y) dS(y).

Off-diagonal entries use a single-point rule for well-separated panels and a
subdivided midpoint rule for near panels.  The diagonal is never quadratured:
it is deflated against the exact closed-surface identity

    integral_S F(r, r') dS(r) = -1   for r' on a smooth closed surface,

which plants the net-charge (monopole) eigenvalue at exactly -1 and removes
the ill-defined flat-panel self term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import PanelSet

__all__ = [
    "AssemblyError",
    "AssemblyOptions",
    "NPOperator",
    "kernel_eval",
    "assemble",
    "gauss_check",
]

_INV_2PI = 1.0 / (2.0 * np.pi)

# Rows per vectorized far-field block; bounds peak temporaries to ~100 MB.
_BLOCK_ENTRIES = 4_000_000
# Near pairs processed per chunk during the subdivided quadrature pass.
_PAIR_CHUNK = 65_536


class AssemblyError(Exception):
    """Operator assembly failed (size guard, degenerate geometry, overflow)."""


@dataclass(frozen=True)
class AssemblyOptions:
    """Quadrature and size settings for :func:`assemble`.

    eta : separation factor; panels closer than eta * (diam_i + diam_j) get
        the subdivided near-field rule instead of the single-point rule.
    subdiv_depth : recursive 4-way subdivision depth for near panels
        (4**depth midpoint samples per panel).
    max_panels : memory guard for the dense N x N matrix.
    """

    eta: float = 2.0
    subdiv_depth: int = 2
    max_panels: int = 20_000

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.subdiv_depth < 0:
            raise ValueError(f"subdiv_depth must be nonnegative, got {self.subdiv_depth}")
        if self.max_panels < 4:
            raise ValueError(f"max_panels must be at least 4, got {self.max_panels}")


@dataclass(frozen=True)
class NPOperator:
    """Assembled dense operator together with its panel geometry."""

    matrix: np.ndarray  # (N, N) float64
    panels: PanelSet
    options: AssemblyOptions

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, "fro"))

    def column_identity_defect(self) -> float:
        """Max over columns of |sum_i (K_ij / a_j) a_i + 1|; ~round-off by construction."""
        a = self.panels.areas
        colsums = (self.matrix * a[:, None]).sum(axis=0) / a
        return float(np.max(np.abs(colsums + 1.0)))

    def dump(self) -> str:
        """Textual matrix dump: '# N=<N>' header, one row per line, 17 digits."""
        rows = [f"# N={self.n}"]
        for row in self.matrix:
            rows.append(" ".join(f"{x:.17g}" for x in row))
        return "\n".join(rows) + "\n"


def kernel_eval(r, n_r, r_prime) -> float:
    """Evaluate F(r, r') = -(1/2pi) n(r).(r - r') / |r - r'|^3.

    Raises ValueError on coincident points; the self-interaction entry is
    owned by the diagonal deflation rule, never by quadrature.
    """
    r = np.asarray(r, dtype=np.float64)
    n_r = np.asarray(n_r, dtype=np.float64)
    diff = r - np.asarray(r_prime, dtype=np.float64)
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        raise ValueError("kernel is singular at coincident points")
    return float(-_INV_2PI * np.dot(n_r, diff) / dist**3)


def _subdivided_centroids(corners: np.ndarray, depth: int) -> np.ndarray:
    """Midpoint-subdivision sample points for every panel.

    Returns (N, 4**depth, 3) centroids of the flat 4-way subdivision; the
    sub-triangles of a flat panel all share the same area a / 4**depth.
    """
    v0 = corners[:, None, 0, :]
    v1 = corners[:, None, 1, :]
    v2 = corners[:, None, 2, :]
    for _ in range(depth):
        m01 = 0.5 * (v0 + v1)
        m12 = 0.5 * (v1 + v2)
        m20 = 0.5 * (v2 + v0)
        v0 = np.concatenate([v0, m01, m20, m01], axis=1)
        v1 = np.concatenate([m01, v1, m12, m12], axis=1)
        v2 = np.concatenate([m20, m12, v2, m20], axis=1)
    return (v0 + v1 + v2) / 3.0


def _near_pairs(centroids: np.ndarray, diameters: np.ndarray, eta: float) -> np.ndarray:
    """Ordered (i, j) pairs, i != j, with |c_i - c_j| < eta (d_i + d_j)."""
    if eta == 0.0:
        return np.empty((0, 2), dtype=np.int64)
    rmax = eta * 2.0 * float(diameters.max())
    tree = cKDTree(centroids)
    cand = tree.query_pairs(rmax, output_type="ndarray")
    if cand.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    i, j = cand[:, 0], cand[:, 1]
    dist = np.linalg.norm(centroids[i] - centroids[j], axis=1)
    keep = dist < eta * (diameters[i] + diameters[j])
    i, j = i[keep], j[keep]
    both = np.concatenate([cand[keep], np.stack([j, i], axis=1)], axis=0)
    order = np.lexsort((both[:, 1], both[:, 0]))
    return both[order]


def _kernel_block(targets: np.ndarray, normals: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Kernel samples F(targets[i], normals[i], sources[...]) broadcast over sources."""
    diff = targets[:, None, :] - sources
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    num = np.einsum("ik,ijk->ij", normals, diff)
    return -_INV_2PI * num / (r2 * np.sqrt(r2))


def assemble(panels: PanelSet, options: AssemblyOptions | None = None) -> NPOperator:
    """Assemble the dense N x N collocation matrix.

    Deterministic: fixed blocking, fixed (ascending) summation order, no
    data-dependent scheduling; identical inputs produce bit-identical
    matrices.
    """
    opts = options if options is not None else AssemblyOptions()
    n = panels.count
    if n < 4:
        raise AssemblyError(f"need at least 4 panels, got {n}")
    if n > opts.max_panels:
        raise AssemblyError(
            f"{n} panels exceed max_panels={opts.max_panels}; "
            "raise the guard if a dense matrix this size is intended")

    c = panels.centroids
    nrm = panels.normals
    a = panels.areas

    matrix = np.empty((n, n))
    block = max(1, _BLOCK_ENTRIES // n)
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        # i == j produces 0/0 here; those entries are overwritten below
        with np.errstate(invalid="ignore", divide="ignore"):
            sub = _kernel_block(c[i0:i1], nrm[i0:i1], c)
        np.nan_to_num(sub, copy=False, nan=0.0, posinf=0.0, neginf=0.0)
        matrix[i0:i1] = sub * a[None, :]

    pairs = _near_pairs(c, panels.diameters, opts.eta)
    if pairs.size and opts.subdiv_depth > 0:
        sub_c = _subdivided_centroids(panels.corners, opts.subdiv_depth)
        for p0 in range(0, len(pairs), _PAIR_CHUNK):
            chunk = pairs[p0:p0 + _PAIR_CHUNK]
            ti, sj = chunk[:, 0], chunk[:, 1]
            vals = _kernel_block(c[ti], nrm[ti], sub_c[sj])
            matrix[ti, sj] = vals.mean(axis=1) * a[sj]

    np.fill_diagonal(matrix, 0.0)
    colsums = (matrix * a[:, None]).sum(axis=0)
    np.fill_diagonal(matrix, -1.0 - colsums / a)

    if not np.all(np.isfinite(matrix)):
        raise AssemblyError("assembled matrix contains non-finite entries")
    return NPOperator(matrix=matrix, panels=panels, options=opts)


def gauss_check(panels: PanelSet, x) -> float:
    """Discrete Gauss solid-angle probe, independent of the diagonal rule.

    Returns sum_i n_i . (c_i - x) / |c_i - x|^3 * a_i, which equals 4 pi for
    x strictly inside the exact surface and 0 for x outside; the deviation
    measures pure quadrature error of the panelization.
    """
    x = np.asarray(x, dtype=np.float64)
    diff = panels.centroids - x
    r2 = np.einsum("ij,ij->i", diff, diff)
    num = np.einsum("ij,ij->i", panels.normals, diff)
    return float(np.sum(num / (r2 * np.sqrt(r2)) * panels.areas))
