"""Trace-class Wiener increments: sampling, coupling, and second-order weights.

The driving noise lives on a separable space with orthonormal directions
``e~_j`` and covariance eigenvalues ``eta_j >= 0``.  An increment over a step
of length ``h`` is represented by its coefficient vector
``coeffs[j] = sqrt(eta_j) * sqrt(h) * xi_j`` with ``xi_j`` i.i.d. standard
normal; directions with ``eta_j == 0`` are dead and consume no randomness.

Multilevel experiments couple resolutions by *summation*: increments are
always generated at the finest level and coarser levels are exact sums of
fine ones, so a coarse increment is bitwise reproducible from the fine path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostLedger


class NoiseError(ValueError):
    """Raised for ill-formed covariance spectra or increment arguments."""


@dataclass(frozen=True)
class QSpectrum:
    """Covariance eigenvalues of the driving noise, plus the tail supremum.

    ``etas[j]`` may be zero (dead direction).  ``tail`` is the supremum of
    the eigenvalues that were *not* retained; truncation-error bounds read it.
    """

    etas: np.ndarray
    tail: float

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=np.float64)
        if etas.ndim != 1 or etas.size == 0:
            raise NoiseError("etas must be a nonempty one-dimensional array")
        if np.any(etas < 0.0):
            raise NoiseError("covariance eigenvalues must be nonnegative")
        if self.tail < 0.0:
            raise NoiseError("tail supremum must be nonnegative")
        etas = etas.copy()
        etas.setflags(write=False)
        object.__setattr__(self, "etas", etas)

    @property
    def dim(self) -> int:
        return int(self.etas.size)

    @property
    def active(self) -> np.ndarray:
        """Boolean mask of directions carrying noise."""
        return self.etas > 0.0

    @property
    def k_active(self) -> int:
        return int(np.count_nonzero(self.etas))

    @property
    def trace(self) -> float:
        return float(self.etas.sum())


@dataclass(frozen=True)
class NoiseIncrement:
    """One increment of the driving noise over a step of length ``h``."""

    coeffs: np.ndarray
    h: float

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise NoiseError(f"increment coefficients must be 1-d, got shape {arr.shape}")
        if not (self.h > 0.0):
            raise NoiseError(f"step length must be positive, got {self.h}")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return int(self.coeffs.size)


class RngStream:
    """Counter-based per-path randomness keyed by ``(seed, path_id)``.

    Two streams with the same key replay the same sequence bitwise; distinct
    path ids give statistically independent streams, so paths can be
    generated in any order or in parallel without coordination.  The stream
    counts how many standard normals it has handed out.
    """

    def __init__(self, seed: int, path_id: int = 0):
        self.seed = int(seed)
        self.path_id = int(path_id)
        self.draws = 0
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([self.seed, self.path_id]))
        )

    def standard_normals(self, shape) -> np.ndarray:
        out = np.atleast_1d(self._gen.standard_normal(shape))
        self.draws += int(out.size)
        return out

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"RngStream(seed={self.seed}, path_id={self.path_id}, draws={self.draws})"


def sample_increment(
    q: QSpectrum,
    h: float,
    stream: RngStream,
    ledger: CostLedger | None = None,
) -> NoiseIncrement:
    """Draw one increment; dead directions are skipped entirely.

    Exactly ``q.k_active`` standard normals are consumed from ``stream`` and,
    when a ledger is supplied, recorded as Gaussian draws.
    """
    if not (h > 0.0):
        raise NoiseError(f"step length must be positive, got {h}")
    active = q.active
    coeffs = np.zeros(q.dim)
    n_active = int(active.sum())
    if n_active:
        xi = stream.standard_normals(n_active)
        coeffs[active] = np.sqrt(q.etas[active]) * np.sqrt(h) * xi
    if ledger is not None:
        ledger.add(draws=n_active)
    return NoiseIncrement(coeffs=coeffs, h=h)


def sample_increment_array(
    q: QSpectrum,
    h: float,
    stream: RngStream,
    m: int,
    ledger: CostLedger | None = None,
) -> np.ndarray:
    """Coefficients of ``m`` consecutive increments, shape ``(m, K)``.

    Equivalent to ``m`` calls of :func:`sample_increment` on the same stream
    (draw order is step-major, direction-minor), returned as one array for
    vectorized stepping.
    """
    if not (h > 0.0):
        raise NoiseError(f"step length must be positive, got {h}")
    if m < 1:
        raise NoiseError(f"need at least one step, got {m}")
    active = q.active
    n_active = int(active.sum())
    coeffs = np.zeros((m, q.dim))
    if n_active:
        xi = stream.standard_normals((m, n_active))
        coeffs[:, active] = np.sqrt(q.etas[active]) * np.sqrt(h) * xi
    if ledger is not None:
        ledger.add(draws=m * n_active)
    return coeffs


def aggregate_increments(increments) -> NoiseIncrement:
    """Exact sum of consecutive increments (coarse step = sum of fine steps)."""
    increments = list(increments)
    if not increments:
        raise NoiseError("cannot aggregate an empty sequence of increments")
    dim = increments[0].dim
    if any(inc.dim != dim for inc in increments):
        raise NoiseError("increments must share the same number of directions")
    coeffs = np.zeros(dim)
    h = 0.0
    for inc in increments:
        coeffs += inc.coeffs
        h += inc.h
    return NoiseIncrement(coeffs=coeffs, h=h)


def aggregate_increment_array(fine: np.ndarray, factor: int) -> np.ndarray:
    """Sum groups of ``factor`` consecutive fine increments, shape-preserving
    in the direction axis: ``(m_fine, K) -> (m_fine/factor, K)``."""
    fine = np.asarray(fine)
    m_fine = fine.shape[-2]
    if factor < 1 or m_fine % factor:
        raise NoiseError(f"{m_fine} fine steps cannot be grouped by {factor}")
    shape = fine.shape[:-2] + (m_fine // factor, factor, fine.shape[-1])
    return fine.reshape(shape).sum(axis=-2)


def truncate_noise(inc: NoiseIncrement, k: int) -> NoiseIncrement:
    """Restrict an increment to its first ``k`` directions (rest zeroed)."""
    if k < 0 or k > inc.dim:
        raise NoiseError(f"cannot keep {k} of {inc.dim} noise directions")
    coeffs = inc.coeffs.copy()
    coeffs[k:] = 0.0
    return NoiseIncrement(coeffs=coeffs, h=inc.h)


def second_order_weights(inc: NoiseIncrement, q: QSpectrum) -> np.ndarray:
    """Pairwise iterated-integral weights of a commutative-noise increment.

    For commutative diffusion the double stochastic integrals collapse to
    ``w[i, j] = (coeffs[i]*coeffs[j] - h*eta_i*delta_ij) / 2``; the diagonal
    is mean-zero and the matrix is symmetric.  For a single direction this
    is the classic ``((dW)^2 - eta*h)/2``.
    """
    if inc.dim != q.dim:
        raise NoiseError(
            f"increment carries {inc.dim} directions but spectrum has {q.dim}"
        )
    c = inc.coeffs
    w = 0.5 * np.outer(c, c)
    w[np.diag_indices_from(w)] -= 0.5 * inc.h * q.etas
    return w


def second_order_weight_grid(coeffs: np.ndarray, h: float, q: QSpectrum) -> np.ndarray:
    """Batched second-order weights for increment coefficients ``(..., K)``.

    Returns ``(..., K, K)`` with the same convention as
    :func:`second_order_weights`.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    w = 0.5 * (c[..., :, None] * c[..., None, :])
    idx = np.arange(q.dim)
    w[..., idx, idx] -= 0.5 * h * q.etas
    return w
