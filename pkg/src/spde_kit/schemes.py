"""One-step integrators and path drivers.

Every scheme advances coefficient states through the same skeleton

    Y_{m+1} = Phi_h ( Y_m + h * drift + noise terms ),

where ``Phi_h`` is the exact semigroup factor ``exp(-lambda h)`` for EES,
MIL, DFM and DFMM, and the resolvent factor ``1/(1 + lambda h)`` for LIE.
The noise terms distinguish the schemes:

* EES / LIE: the increment applied through the diffusion operator only.
* MIL: adds the commutative second-order correction, contracting the
  derivative against the projected diffusion columns with the pairwise
  increment weights.
* DFM: reproduces the Milstein correction derivative-free via three kinds
  of stage evaluations (one full application, one shifted full application,
  and one shifted per-direction column sweep).
* DFMM: the multiplicative fast path — only projected scalar multipliers
  are ever evaluated, so a step costs O(N + K) functional units instead of
  O(KN).  Requires a pointwise-multiplicative (Nemytskij) diffusion.

Steppers are exposed in two layers: typed single-step functions
(:func:`step_ees` … :func:`step_dfmm`) returning a :class:`StepRecord`, and
array drivers (:func:`run_increments`, :func:`simulate_path`,
:func:`simulate_batch`) that iterate a whole uniform grid with batched
states of shape ``(paths, N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .costs import CostLedger, SchemeId
from .noise import (
    NoiseIncrement,
    RngStream,
    sample_increment_array,
    second_order_weight_grid,
)
from .problems import ProblemSpec, drift_coeffs
from .spectral import SpectralVector, resolvent_factors, semigroup_factors

BLOWUP_NORM = 1e12


class SchemeError(ValueError):
    """A scheme cannot be applied to the given problem or arguments."""


class BlowUpError(RuntimeError):
    """A path left the finite range; carries the offending step index."""

    def __init__(self, step: int, norm: float):
        self.step = step
        self.norm = norm
        super().__init__(
            f"state blew up at step {step} (norm {norm:.3e} exceeds {BLOWUP_NORM:.0e} "
            "or is non-finite); check parameters and step size"
        )


@dataclass(frozen=True)
class StepRecord:
    """Result of one step: new state, the cost charged, and time advanced."""

    state: SpectralVector
    ledger: CostLedger
    time: float


DFMM_CONVENTIONS = ("paper", "aligned")


class _Kernel:
    """Per-(problem, scheme, h) stepping context with precomputed factors."""

    def __init__(self, p: ProblemSpec, scheme, h: float, dfmm_convention: str = "paper"):
        scheme = SchemeId.parse(scheme)
        if not (h > 0.0) or not math.isfinite(h):
            raise SchemeError(f"step size must be a positive finite number, got {h}")
        self.p = p
        self.scheme = scheme
        self.h = float(h)
        self.sqrt_h = math.sqrt(h)
        if scheme is SchemeId.LIE:
            self.prop = resolvent_factors(p.a_spec, h)
        else:
            self.prop = semigroup_factors(p.a_spec, h)
        self.sqrt_etas = np.sqrt(p.q_spec.etas)
        if scheme in (SchemeId.EES, SchemeId.LIE):
            self.step = self._step_euler
        elif scheme is SchemeId.MIL:
            if not hasattr(p.diffusion, "second_order"):
                raise SchemeError(
                    "mil requires a diffusion with a second-order derivative "
                    f"evaluator; {type(p.diffusion).__name__} has none"
                )
            self.step = self._step_mil
        elif scheme is SchemeId.DFM:
            self.step = self._step_dfm
        else:
            if dfmm_convention not in DFMM_CONVENTIONS:
                raise SchemeError(
                    f"unknown dfmm_bbar_convention {dfmm_convention!r}; "
                    f"choose one of {DFMM_CONVENTIONS}"
                )
            if not p.is_nemytskij:
                raise SchemeError(
                    f"dfmm requires Nemytskij problem (pointwise multiplicative "
                    f"diffusion); {p.name!r} is not"
                )
            if dfmm_convention == "aligned":
                # The general-form stage normalization collapses back to the
                # per-direction sweep, i.e. the DFM kernel (and its cost).
                self.step = self._step_dfm
            else:
                self.eta_grid = p.grid.basis[:, : p.k] @ p.q_spec.etas
                self.step = self._step_dfmm

    # -- kernels (states (..., N), increments (..., K)) ---------------------

    def _step_euler(self, y: np.ndarray, dw: np.ndarray,
                    ledger: Optional[CostLedger]) -> np.ndarray:
        p = self.p
        fd = drift_coeffs(p, y, ledger)
        bd = p.diffusion.apply(p, y, dw, ledger)
        return self.prop * (y + self.h * fd + bd)

    def _step_mil(self, y: np.ndarray, dw: np.ndarray,
                  ledger: Optional[CostLedger]) -> np.ndarray:
        p = self.p
        fd = drift_coeffs(p, y, ledger)
        cols = p.diffusion.columns(p, y, ledger)            # (..., N, K)
        g = np.einsum("...nk,...k->...n", cols, dw)
        weights = second_order_weight_grid(dw, self.h, p.q_spec)
        so = p.diffusion.second_order(p, y, weights, cols, ledger)
        return self.prop * (y + self.h * fd + g + so)

    def _step_dfm(self, y: np.ndarray, dw: np.ndarray,
                  ledger: Optional[CostLedger]) -> np.ndarray:
        p = self.p
        fd = drift_coeffs(p, y, ledger)
        cols = p.diffusion.columns(p, y, ledger)            # (..., N, K)
        g = np.einsum("...nk,...k->...n", cols, dw)
        b_shift = p.diffusion.apply(p, y + (0.5 * self.sqrt_h) * g, dw, ledger)
        m = (b_shift - g) / self.sqrt_h
        cols_t = np.swapaxes(cols, -1, -2)                  # (..., K, N)
        stages = y[..., None, :] - (0.5 * self.h) * self.sqrt_etas[:, None] * cols_t
        cols_s = p.diffusion.columns_at(p, stages, ledger)  # (..., K, N)
        c = np.einsum("k,...kn->...n", self.sqrt_etas, cols_s - cols_t)
        return self.prop * (y + self.h * fd + g + m + c)

    def _step_dfmm(self, y: np.ndarray, dw: np.ndarray,
                   ledger: Optional[CostLedger]) -> np.ndarray:
        p = self.p
        grid = p.grid
        fd = drift_coeffs(p, y, ledger)
        y_grid = grid.synth(y)
        bbar = p.diffusion.multiplier_coeffs(p, y_grid, ledger)
        bmul = grid.synth(bbar)
        w_grid = grid.synth(dw)
        g = grid.analyze(bmul * w_grid, p.n)
        stage_plus = y_grid + (0.5 * self.sqrt_h) * bmul * w_grid
        b_plus = p.diffusion.multiplier_coeffs(p, stage_plus, ledger)
        m = (grid.analyze(grid.synth(b_plus) * w_grid, p.n) - g) / self.sqrt_h
        stage_minus = y_grid - (0.5 * self.h) * bmul
        b_minus = p.diffusion.multiplier_coeffs(p, stage_minus, ledger)
        c = grid.analyze((grid.synth(b_minus) - bmul) * self.eta_grid, p.n)
        return self.prop * (y + self.h * fd + g + m + c)


def _check_finite(y: np.ndarray, step: int) -> None:
    sq = np.sum(y * y, axis=-1)
    worst = float(np.max(sq)) if sq.size else 0.0
    if not math.isfinite(worst) or worst > BLOWUP_NORM**2:
        raise BlowUpError(step, math.sqrt(worst) if math.isfinite(worst) else math.inf)


def _mask_blowups(y: np.ndarray, blown: np.ndarray) -> None:
    sq = np.sum(y * y, axis=-1)
    blown |= ~np.isfinite(sq) | (sq > BLOWUP_NORM**2)
    if np.any(blown):
        y[blown] = 0.0  # pin dead paths at zero so they cannot poison the batch


def _step_fn(p: ProblemSpec, scheme, h: float, dfmm_convention: str) -> Callable:
    return _Kernel(p, scheme, h, dfmm_convention).step


def _single_step(p: ProblemSpec, scheme, y: SpectralVector, h: float,
                 dw: NoiseIncrement, dfmm_convention: str = "paper") -> StepRecord:
    if y.dim != p.n:
        raise SchemeError(f"state has {y.dim} modes, problem has {p.n}")
    if dw.dim != p.k:
        raise SchemeError(f"increment has {dw.dim} directions, problem has {p.k}")
    ledger = CostLedger()
    kernel = _Kernel(p, scheme, h, dfmm_convention)
    out = kernel.step(y.coeffs, dw.coeffs, ledger)
    _check_finite(out, 0)
    return StepRecord(state=SpectralVector(out), ledger=ledger, time=h)


def step_ees(p: ProblemSpec, y: SpectralVector, h: float, dw: NoiseIncrement) -> StepRecord:
    """Exponential Euler: semigroup applied to state + drift + diffusion."""
    return _single_step(p, SchemeId.EES, y, h, dw)


def step_lie(p: ProblemSpec, y: SpectralVector, h: float, dw: NoiseIncrement) -> StepRecord:
    """Linear implicit Euler: resolvent in place of the exact semigroup."""
    return _single_step(p, SchemeId.LIE, y, h, dw)


def step_mil(p: ProblemSpec, y: SpectralVector, h: float, dw: NoiseIncrement) -> StepRecord:
    """Milstein step with the commutative second-order correction.

    The correction is the weight array of the increment contracted against
    the derivative, with the inner argument projected onto the N retained
    modes — the only realization a Galerkin stepper can see, and the one the
    derivative-free stages reproduce exactly for affine diffusion.
    """
    return _single_step(p, SchemeId.MIL, y, h, dw)


def step_dfm(p: ProblemSpec, y: SpectralVector, h: float, dw: NoiseIncrement) -> StepRecord:
    """Derivative-free Milstein step (general commutative diffusion)."""
    return _single_step(p, SchemeId.DFM, y, h, dw)


def step_dfmm(p: ProblemSpec, y: SpectralVector, h: float, dw: NoiseIncrement,
              *, convention: str = "paper") -> StepRecord:
    """Multiplicative derivative-free Milstein step, O(N + K) per step.

    ``convention`` selects the stage normalization of the per-direction
    term: ``"paper"`` applies the eta-weighted single-stage difference
    exactly as displayed for the multiplicative specialization, while
    ``"aligned"`` uses the general-form sqrt(eta) stages, which reduces to
    the plain derivative-free step (and its cost).
    """
    return _single_step(p, SchemeId.DFMM, y, h, dw, dfmm_convention=convention)


def run_increments(
    p: ProblemSpec,
    scheme,
    y0: np.ndarray,
    increments: np.ndarray,
    h: float,
    *,
    ledger: Optional[CostLedger] = None,
    dfmm_convention: str = "paper",
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
    on_blowup: str = "raise",
) -> tuple[np.ndarray, np.ndarray]:
    """Drive states through precomputed increment coefficients.

    ``y0`` has shape ``(..., N)`` and ``increments`` ``(..., M, K)`` with
    matching batch axes (broadcastable).  Returns ``(states, blown)`` where
    ``blown`` flags paths that left the finite range.  With
    ``on_blowup="raise"`` the first such path aborts the whole batch with a
    :class:`BlowUpError`; with ``"mask"`` dead paths are zeroed and skipped
    so the survivors keep their trajectories (the caller decides what an
    acceptable casualty rate is).
    """
    if on_blowup not in ("raise", "mask"):
        raise SchemeError(f"on_blowup must be 'raise' or 'mask', got {on_blowup!r}")
    increments = np.asarray(increments, dtype=np.float64)
    if increments.ndim < 2:
        raise SchemeError("increments must have shape (..., M, K)")
    m = increments.shape[-2]
    if increments.shape[-1] != p.k:
        raise SchemeError(
            f"increments carry {increments.shape[-1]} directions, problem has {p.k}"
        )
    step = _step_fn(p, scheme, h, dfmm_convention)
    y = np.array(np.broadcast_to(y0, increments.shape[:-2] + (p.n,)), dtype=np.float64)
    blown = np.zeros(y.shape[:-1], dtype=bool)
    for idx in range(m):
        y = step(y, increments[..., idx, :], ledger)
        if on_blowup == "raise":
            _check_finite(y, idx)
        else:
            _mask_blowups(y, blown)
        if observer is not None:
            observer(idx, y)
    return y, blown


def simulate_path(
    p: ProblemSpec,
    scheme,
    m: int,
    rng: Optional[RngStream] = None,
    increments: Optional[Sequence[NoiseIncrement]] = None,
    *,
    dfmm_convention: str = "paper",
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
) -> tuple[SpectralVector, CostLedger]:
    """Integrate one path from the initial state over M uniform steps.

    Increments are either drawn from ``rng`` (charging their Gaussian draws
    to the returned ledger) or injected as a precomputed list — the coupling
    hook used by the convergence laboratory.  Injected increments must form
    a uniform partition of the problem horizon.
    """
    if m < 1:
        raise SchemeError(f"need at least one time step, got {m}")
    h = p.horizon / m
    ledger = CostLedger()
    if increments is not None:
        if len(increments) != m:
            raise SchemeError(f"expected {m} increments, got {len(increments)}")
        spans = np.array([inc.h for inc in increments])
        if not np.allclose(spans, h, rtol=1e-9, atol=0.0):
            raise SchemeError(
                "injected increments must form a uniform partition of the horizon "
                f"(expected span {h}, got spans in [{spans.min()}, {spans.max()}])"
            )
        coeffs = np.stack([inc.coeffs for inc in increments])
        if coeffs.shape[1] != p.k:
            raise SchemeError(
                f"increments carry {coeffs.shape[1]} directions, problem has {p.k}"
            )
    elif rng is not None:
        coeffs = sample_increment_array(p.q_spec, h, rng, m, ledger)
    else:
        raise SchemeError("either an RngStream or precomputed increments are required")
    final, _ = run_increments(
        p, scheme, p.initial, coeffs, h,
        ledger=ledger, dfmm_convention=dfmm_convention, observer=observer,
    )
    return SpectralVector(final), ledger


def simulate_batch(
    p: ProblemSpec,
    scheme,
    m: int,
    paths: int,
    *,
    seed: int = 0,
    first_path_id: int = 0,
    dfmm_convention: str = "paper",
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
) -> tuple[np.ndarray, CostLedger]:
    """Simulate ``paths`` independent paths, vectorized over a batch axis.

    Path ``i`` consumes the stream keyed ``(seed, first_path_id + i)``, so
    results are independent of batching and identical to ``paths`` separate
    :func:`simulate_path` calls.
    """
    if paths < 1:
        raise SchemeError(f"need at least one path, got {paths}")
    if m < 1:
        raise SchemeError(f"need at least one time step, got {m}")
    h = p.horizon / m
    ledger = CostLedger()
    coeffs = np.empty((paths, m, p.k))
    for i in range(paths):
        stream = RngStream(seed, first_path_id + i)
        coeffs[i] = sample_increment_array(p.q_spec, h, stream, m, ledger)
    finals, _ = run_increments(
        p, scheme, p.initial, coeffs, h,
        ledger=ledger, dfmm_convention=dfmm_convention, observer=observer,
    )
    return finals, ledger
