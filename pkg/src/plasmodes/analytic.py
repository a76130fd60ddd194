"""Closed-form references: sphere multiplets, half-space limit, DtN eigenvalues.

These are the oracles the boundary-element results are validated against.
Everything here is exact arithmetic on classical separation-of-variables
solutions; no discretization enters.

Sphere (radius R, degree k >= 1 surface harmonics):
    eps_k    = -(k + 1) / k          resonance permittivities
    lambda_k = -1 / (2k + 1)         operator eigenvalues, eps_from_lambda
                                     maps one to the other exactly
    multiplicity 2k + 1 per degree.

Half-space: the interior and exterior Dirichlet-to-Neumann symbols are
|xi| and -|xi|, so their ratio is -1 for every tangential frequency and the
single resonance sits at eps = -1.  The high-order modes of any bounded
smooth surface approach this value, which is why eps -> -1 appears in every
tail of the computed spectra.

Dirichlet-to-Neumann eigenvalues on the sphere follow from the radial
solutions r^k (interior) and r^(-k-1) (exterior):
    d_minus = k / R,   d_plus = -(k + 1) / R,
and the resonance condition eps * d_minus = d_plus recovers eps_k as the
reciprocal of the ratio d_minus / d_plus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import eps_from_lambda

__all__ = [
    "SphereSpectrumEntry",
    "HalfSpaceSymbols",
    "DtnEigenvalues",
    "sphere_eps",
    "sphere_lambda",
    "sphere_spectrum",
    "cumulative_multiplicity",
    "dtn_sphere",
    "halfspace_eps",
    "halfspace_symbols",
    "asymptote_reference",
]


@dataclass(frozen=True)
class SphereSpectrumEntry:
    k: int
    eps: float
    lam: float
    multiplicity: int


@dataclass(frozen=True)
class HalfSpaceSymbols:
    """Leading DtN symbols of the planar interface at tangential frequency xi."""

    xi: tuple[float, float]
    d_minus: float  # |xi|
    d_plus: float  # -|xi|


@dataclass(frozen=True)
class DtnEigenvalues:
    """Interior/exterior DtN eigenvalues on the degree-k sphere harmonic."""

    d_minus: float
    d_plus: float


def _check_degree(k: int) -> int:
    if k < 1:
        raise ValueError(
            f"degree k must be >= 1, got {k} (k = 0 is the excluded monopole)")
    return int(k)


def sphere_eps(k: int) -> float:
    """Resonance permittivity of the degree-k sphere multiplet: -(k+1)/k."""
    k = _check_degree(k)
    return -(k + 1) / k


def sphere_lambda(k: int) -> float:
    """Operator eigenvalue of the degree-k sphere multiplet: -1/(2k+1)."""
    k = _check_degree(k)
    return -1.0 / (2 * k + 1)


def sphere_spectrum(kmax: int) -> tuple[SphereSpectrumEntry, ...]:
    """Analytic sphere table for k = 1..kmax with 2k+1 multiplicities."""
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    return tuple(
        SphereSpectrumEntry(k=k, eps=sphere_eps(k), lam=sphere_lambda(k),
                            multiplicity=2 * k + 1)
        for k in range(1, kmax + 1)
    )


def cumulative_multiplicity(kmax: int) -> int:
    """Number of sphere modes with degree <= kmax: sum of 2k+1 = kmax(kmax+2)."""
    if kmax < 0:
        raise ValueError(f"kmax must be nonnegative, got {kmax}")
    return kmax * (kmax + 2)


def dtn_sphere(k: int, radius: float) -> DtnEigenvalues:
    """DtN eigenvalues on the radius-R sphere for the degree-k harmonic.

    The interior harmonic extension is r^k Y_k and the decaying exterior one
    is r^(-k-1) Y_k, hence normal derivatives k/R and -(k+1)/R on the
    boundary.  Their ratio is -k/(k+1), whose reciprocal is eps_k.
    """
    if k < 0:
        raise ValueError(f"degree k must be nonnegative, got {k}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return DtnEigenvalues(d_minus=k / radius, d_plus=-(k + 1) / radius)


def halfspace_eps() -> float:
    """The planar-interface resonance permittivity: exactly -1."""
    return -1.0


def halfspace_symbols(xi) -> HalfSpaceSymbols:
    """DtN symbol pair (|xi|, -|xi|) of the planar interface; xi != 0."""
    xi_arr = np.asarray(xi, dtype=np.float64)
    if xi_arr.shape != (2,):
        raise ValueError(f"xi must be a 2-vector, got shape {xi_arr.shape}")
    mag = float(np.linalg.norm(xi_arr))
    if mag == 0.0:
        raise ValueError("symbols are homogeneous of degree 1; xi must be nonzero")
    return HalfSpaceSymbols(xi=(float(xi_arr[0]), float(xi_arr[1])),
                            d_minus=mag, d_plus=-mag)


def asymptote_reference(kmax: int) -> list[tuple[int, float]]:
    """Sphere tail (k, -1 - 1/k) for k = 1..kmax; coincides with sphere_eps."""
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    return [(k, -1.0 - 1.0 / k) for k in range(1, kmax + 1)]


def _consistency_check() -> None:
    # eps_from_lambda(sphere_lambda(k)) == sphere_eps(k); kept as a module
    # self-test hook for interactive use.
    for k in (1, 2, 3, 10):
        assert abs(eps_from_lambda(sphere_lambda(k)) - sphere_eps(k)) < 1e-14
