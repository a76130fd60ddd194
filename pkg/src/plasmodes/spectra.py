"""Eigenmodes of the assembled operator: permittivity map, filtering, clustering.

Eigenvalues lambda of the surface operator map to resonance permittivities
through the Moebius transform eps = (lambda - 1) / (lambda + 1).  The
net-charge equilibrium mode sits at lambda = -1 (planted exactly by the
diagonal deflation) and corresponds to the pole of the map; it is flagged and
excluded from the physical spectrum rather than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .operator import NPOperator

__all__ = [
    "EigenSolveError",
    "FilterTolerances",
    "Mode",
    "Cluster",
    "ModeSet",
    "eps_from_lambda",
    "lambda_from_eps",
    "eigendecompose",
    "filter_modes",
    "cluster_modes",
]

IMAG_TOL_FACTOR = 1e-6
DEFAULT_MONOPOLE_TOL = 0.05
DEFAULT_CLUSTER_TOL = 0.02
MONOPOLE_CHARGE_FRACTION = 0.5


class EigenSolveError(Exception):
    """Eigendecomposition failed or produced no usable modes."""


def eps_from_lambda(lam: float) -> float:
    """Permittivity of the mode with operator eigenvalue `lam`.

    eps = (lam - 1) / (lam + 1); the pole at lam = -1 is the net-charge
    monopole, which carries no resonance permittivity.
    """
    if lam == -1.0:
        raise ValueError("lambda = -1 is the monopole pole of the permittivity map")
    return (lam - 1.0) / (lam + 1.0)


def lambda_from_eps(eps: float) -> float:
    """Inverse permittivity map: lam = (1 + eps) / (1 - eps).

    Round-trips with :func:`eps_from_lambda` to machine precision; the pole
    sits at eps = 1 (vacuum contrast, no surface mode).
    """
    if eps == 1.0:
        raise ValueError("eps = 1 is the pole of the inverse permittivity map")
    return (1.0 + eps) / (1.0 - eps)


@dataclass(frozen=True)
class FilterTolerances:
    """Thresholds used by :func:`filter_modes`.

    imag : discard eigenvalues with |Im lambda| above this; default
        IMAG_TOL_FACTOR * max|lambda|.
    monopole : half-width of the lambda window around -1 eligible for the
        monopole flag.
    """

    imag: float | None = None
    monopole: float = DEFAULT_MONOPOLE_TOL


@dataclass(frozen=True)
class Mode:
    """Retained eigenmode: eigenvalue, permittivity, panel charge density."""

    lam: float
    eps: float | None  # None for the monopole (pole of the map)
    sigma: np.ndarray  # (N,) real, max-abs entry normalized to +1
    residual: float  # |K sigma - lam sigma|_2 with |sigma|_inf = 1
    charge_fraction: float  # |sum sigma a| / sum |sigma| a
    monopole: bool = False
    complex_partner_discarded: bool = False


@dataclass(frozen=True)
class Cluster:
    """Group of numerically degenerate permittivities."""

    mean_eps: float
    member_indices: tuple[int, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True)
class ModeSet:
    """Filtered spectrum, sorted by descending |lambda|."""

    modes: tuple[Mode, ...]
    clusters: tuple[Cluster, ...] = ()
    discarded_complex: int = 0

    def with_clusters(self, clusters: tuple[Cluster, ...]) -> "ModeSet":
        return replace(self, clusters=clusters)

    def nonmonopole(self) -> tuple[Mode, ...]:
        return tuple(m for m in self.modes if not m.monopole)

    def eps_values(self) -> np.ndarray:
        """Permittivities of non-monopole modes, in mode order."""
        return np.array([m.eps for m in self.modes if not m.monopole])


def eigendecompose(op: NPOperator) -> tuple[np.ndarray, np.ndarray]:
    """Full dense nonsymmetric eigendecomposition (LAPACK shifted-QR).

    Returns all N eigenvalues and right eigenvectors (columns), possibly
    complex.
    """
    try:
        return np.linalg.eig(op.matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(f"eigendecomposition failed for N={op.n}: {exc}") from exc


def _normalize_sign(vec: np.ndarray) -> np.ndarray:
    """Scale so the entry of largest magnitude is exactly +1."""
    peak = int(np.argmax(np.abs(vec)))
    return vec / vec[peak]


def filter_modes(
    eigenvalues: np.ndarray,
    eigenvectors: np.ndarray,
    op: NPOperator,
    tols: FilterTolerances | None = None,
) -> ModeSet:
    """Physicality filter: drop complex pairs, flag the monopole, map to eps.

    Complex-conjugate pairs with |Im lambda| above the tolerance are
    discarded (both members counted).  Pairs inside the tolerance collapse to
    a single real mode flagged `complex_partner_discarded`, with the partner
    counted as discarded.  The monopole flag requires lambda within
    `tols.monopole` of -1 and a net charge above half the total.

    Modes are sorted by descending |lambda|; residuals |K sigma - lam sigma|
    are attached.
    """
    tols = tols if tols is not None else FilterTolerances()
    w = np.asarray(eigenvalues)
    max_abs = float(np.max(np.abs(w))) if len(w) else 0.0
    imag_tol = tols.imag if tols.imag is not None else IMAG_TOL_FACTOR * max_abs

    areas = op.panels.areas
    matrix = op.matrix

    discarded = int(np.count_nonzero(np.abs(w.imag) > imag_tol))
    records = []
    for idx in range(len(w)):
        im = w.imag[idx]
        if abs(im) > imag_tol:
            continue
        flagged_pair = False
        if im != 0.0:
            # keep the +Im member of a within-tolerance conjugate pair
            if im < 0.0:
                discarded += 1
                continue
            flagged_pair = True
        lam = float(w.real[idx])
        sigma = _normalize_sign(np.real(eigenvectors[:, idx]))
        residual = float(np.linalg.norm(matrix @ sigma - lam * sigma))
        net = float(np.dot(sigma, areas))
        total = float(np.dot(np.abs(sigma), areas))
        charge_fraction = abs(net) / total if total > 0 else 0.0
        monopole = (
            abs(lam + 1.0) < tols.monopole
            and charge_fraction > MONOPOLE_CHARGE_FRACTION
        )
        eps = None if monopole else eps_from_lambda(lam)
        records.append(Mode(
            lam=lam,
            eps=eps,
            sigma=sigma,
            residual=residual,
            charge_fraction=charge_fraction,
            monopole=monopole,
            complex_partner_discarded=flagged_pair,
        ))

    if not records:
        raise EigenSolveError("no real modes retained after filtering")

    records.sort(key=lambda m: (-abs(m.lam), m.lam))
    return ModeSet(modes=tuple(records), discarded_complex=discarded)


def cluster_modes(modeset: ModeSet, rel_tol: float = DEFAULT_CLUSTER_TOL) -> tuple[Cluster, ...]:
    """Greedy clustering of consecutive permittivities into degenerate groups.

    Walking the modes in order (descending |lambda|, monopole skipped), a
    mode joins the open cluster while |eps - mean| <= rel_tol * |mean|.
    Cluster rank reproduces the multiplet index of symmetric shapes.
    """
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    clusters: list[Cluster] = []
    members: list[int] = []
    total = 0.0
    for idx, mode in enumerate(modeset.modes):
        if mode.monopole:
            continue
        eps = mode.eps
        if members:
            mean = total / len(members)
            if abs(eps - mean) > rel_tol * abs(mean):
                clusters.append(Cluster(mean_eps=mean, member_indices=tuple(members)))
                members, total = [], 0.0
        members.append(idx)
        total += eps
    if members:
        clusters.append(Cluster(mean_eps=total / len(members), member_indices=tuple(members)))
    return tuple(clusters)
