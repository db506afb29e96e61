"""Diagonal operator calculus on the spectral Galerkin state space.

The state space is the span of the first ``N`` eigenfunctions of a positive
self-adjoint operator with discrete spectrum.  Every state is represented by
its coefficient vector against that eigenbasis, so the semigroup, resolvent
and fractional powers all act componentwise through the eigenvalues.  The
functions in this module accept coefficient arrays of shape ``(..., N)`` and
broadcast over leading axes; :class:`SpectralVector` is the thin value type
used at API boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SpectralError(ValueError):
    """Raised for ill-formed spectra, parameters, or operator arguments."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise SpectralError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class OperatorSpectrum:
    """Leading eigenvalues of the (negated) linear operator, plus the tail.

    ``lambdas`` holds the retained eigenvalues in ascending order, all
    strictly positive.  ``tail`` is the smallest eigenvalue *not* retained;
    it is what truncation-error bounds see, so it must not fall below the
    largest retained eigenvalue.
    """

    lambdas: np.ndarray
    tail: float

    def __post_init__(self):
        lam = _as_float_array(self.lambdas, "lambdas")
        if lam.size == 0:
            raise SpectralError("spectrum must retain at least one eigenvalue")
        if not np.all(lam > 0.0):
            raise SpectralError("eigenvalues must be strictly positive")
        if np.any(np.diff(lam) < 0.0):
            raise SpectralError("eigenvalues must be ascending")
        if not (self.tail >= lam[-1]):
            raise SpectralError(
                f"tail eigenvalue {self.tail} below largest retained {lam[-1]}"
            )
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @property
    def dim(self) -> int:
        return int(self.lambdas.size)


@dataclass(frozen=True)
class RegularityParams:
    """Smoothness/decay exponents steering error bounds and allocations.

    ``gamma`` is the spatial regularity of the solution, ``beta`` the drift's
    domain exponent, ``alpha`` the noise-smoothing exponent, ``delta`` and
    ``theta`` the diffusion range/domain exponents, and ``rho_a``/``rho_q``
    the polynomial decay rates of the operator and noise spectra.  The
    temporal exponent ``q = min(2(gamma-beta), gamma)`` is derived and
    validated to lie in (0, 1].
    """

    gamma: float = 0.5
    beta: float = 0.0
    alpha: float = 0.5
    delta: float = 0.25
    theta: float = 0.25
    rho_a: float = 2.0
    rho_q: float = 2.0

    def __post_init__(self):
        if not (0.0 <= self.beta <= self.gamma):
            raise SpectralError(f"need 0 <= beta <= gamma, got beta={self.beta}, gamma={self.gamma}")
        if not (0.0 < self.delta < 0.5):
            raise SpectralError(f"delta must lie in (0, 1/2), got {self.delta}")
        if not (0.0 < self.theta < 0.5):
            raise SpectralError(f"theta must lie in (0, 1/2), got {self.theta}")
        if not (self.gamma >= max(self.beta, self.delta)):
            raise SpectralError("gamma must dominate beta and delta")
        if not (self.gamma < self.delta + 0.5):
            raise SpectralError(f"gamma must stay below delta + 1/2, got gamma={self.gamma}")
        if self.alpha <= 0.0:
            raise SpectralError(f"alpha must be positive, got {self.alpha}")
        if self.rho_a <= 0.0 or self.rho_q <= 0.0:
            raise SpectralError("spectral decay rates must be positive")
        if not (0.0 < self.q <= 1.0):
            raise SpectralError(f"temporal exponent q={self.q} outside (0, 1]")

    @property
    def q(self) -> float:
        """Temporal strong-order exponent min(2(gamma-beta), gamma)."""
        return min(2.0 * (self.gamma - self.beta), self.gamma)


@dataclass(frozen=True)
class SpectralVector:
    """Coefficient vector of a state against the operator eigenbasis."""

    coeffs: np.ndarray = field()

    def __post_init__(self):
        arr = _as_float_array(self.coeffs, "coeffs")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return int(self.coeffs.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


# ---------------------------------------------------------------------------
# Array-level kernels.  These are what the time steppers use in hot loops.
# ---------------------------------------------------------------------------

def project_coeffs(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Zero all components beyond the first ``n`` (coefficient truncation)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    dim = coeffs.shape[-1]
    if n > dim:
        raise SpectralError(f"cannot project onto {n} modes, only {dim} available")
    if n < 0:
        raise SpectralError("mode count must be nonnegative")
    out = coeffs.copy()
    out[..., n:] = 0.0
    return out


def semigroup_factors(spectrum: OperatorSpectrum, t: float) -> np.ndarray:
    """Componentwise semigroup multipliers exp(-lambda_i * t) for t >= 0."""
    if t < 0.0:
        raise SpectralError(f"semigroup time must be nonnegative, got {t}")
    return np.exp(-spectrum.lambdas * t)


def resolvent_factors(spectrum: OperatorSpectrum, t: float) -> np.ndarray:
    """Componentwise implicit-Euler multipliers 1/(1 + lambda_i * t)."""
    if t < 0.0:
        raise SpectralError(f"resolvent time must be nonnegative, got {t}")
    return 1.0 / (1.0 + spectrum.lambdas * t)


def fractional_factors(spectrum: OperatorSpectrum, rho: float) -> np.ndarray:
    """Componentwise fractional-power multipliers lambda_i**rho."""
    return spectrum.lambdas ** rho


# ---------------------------------------------------------------------------
# Vector-level operations.
# ---------------------------------------------------------------------------

def _check_dims(v: SpectralVector, spectrum: OperatorSpectrum, op: str) -> None:
    if v.dim != spectrum.dim:
        raise SpectralError(
            f"{op}: vector dimension {v.dim} does not match spectrum dimension {spectrum.dim}"
        )


def project(v: SpectralVector, n: int) -> SpectralVector:
    """Orthogonal projection onto the first ``n`` modes.

    Components beyond ``n`` are zeroed; the result keeps the ambient
    dimension so projected and unprojected states remain comparable.
    """
    return SpectralVector(project_coeffs(v.coeffs, n))


def apply_semigroup(v: SpectralVector, t: float, spectrum: OperatorSpectrum) -> SpectralVector:
    """Apply the analytic semigroup at time ``t >= 0``: coeffs * exp(-lambda t)."""
    _check_dims(v, spectrum, "apply_semigroup")
    return SpectralVector(v.coeffs * semigroup_factors(spectrum, t))


def apply_resolvent(v: SpectralVector, t: float, spectrum: OperatorSpectrum) -> SpectralVector:
    """Apply the resolvent-type smoother (I + t*Lambda)^{-1} used by the
    linear-implicit Euler step."""
    _check_dims(v, spectrum, "apply_resolvent")
    return SpectralVector(v.coeffs * resolvent_factors(spectrum, t))


def apply_fractional_power(v: SpectralVector, rho: float, spectrum: OperatorSpectrum) -> SpectralVector:
    """Apply the fractional power Lambda^rho componentwise (rho may be negative)."""
    _check_dims(v, spectrum, "apply_fractional_power")
    return SpectralVector(v.coeffs * fractional_factors(spectrum, rho))


def sobolev_norm(v: SpectralVector, rho: float, spectrum: OperatorSpectrum) -> float:
    """Graph norm of order ``rho``: the plain norm of Lambda^rho v."""
    _check_dims(v, spectrum, "sobolev_norm")
    return float(np.linalg.norm(v.coeffs * fractional_factors(spectrum, rho)))


def sobolev_norm_coeffs(coeffs: np.ndarray, rho: float, spectrum: OperatorSpectrum) -> np.ndarray:
    """Batched graph norm over the trailing axis of ``coeffs``."""
    scaled = np.asarray(coeffs, dtype=np.float64) * fractional_factors(spectrum, rho)
    return np.linalg.norm(scaled, axis=-1)


# ---------------------------------------------------------------------------
# Sharp smoothing envelopes.
#
# For a positive diagonal operator the two parabolic smoothing inequalities
#   sup_lambda lambda^theta exp(-lambda t)     <= (theta/(e t))^theta
#   sup_lambda lambda^(-theta) (1-exp(-lambda t)) <= t^theta
# hold for theta in [0, 1] and t > 0.  The first is attained at
# lambda = theta/t; the second follows from 1-e^{-x} <= min(1, x) <= x^theta
# and is approached at the theta -> 0 and theta -> 1 edges.  They are exposed
# as plain functions so tests and diagnostics can assert the inequalities.
# ---------------------------------------------------------------------------

def smoothing_envelope(theta: float, t: float) -> float:
    """Upper bound for lambda^theta * exp(-lambda*t) over all lambda > 0."""
    if not (0.0 <= theta <= 1.0):
        raise SpectralError(f"theta must lie in [0, 1], got {theta}")
    if t <= 0.0:
        raise SpectralError(f"time must be positive, got {t}")
    if theta == 0.0:
        return 1.0
    return (theta / (math.e * t)) ** theta


def hoelder_envelope(theta: float, t: float) -> float:
    """Upper bound for lambda^(-theta) * (1 - exp(-lambda*t)) over lambda > 0."""
    if not (0.0 <= theta <= 1.0):
        raise SpectralError(f"theta must lie in [0, 1], got {theta}")
    if t <= 0.0:
        raise SpectralError(f"time must be positive, got {t}")
    return t ** theta
