"""Information-cost accounting and budget-optimal discretization choices.

Cost is measured in functional evaluations: projecting the drift onto ``N``
modes costs ``N`` scalar evaluations, a full diffusion-operator evaluation
restricted to ``K`` noise directions costs ``K*N``, one bilinear
diffusion-derivative evaluation costs ``K*N**2``, and every Gaussian draw
costs one unit.  ``per_step_cost`` encodes what each scheme consumes per time
step; ``optimal_allocation`` inverts the resulting total-cost model to pick
``(N, K, M)`` for a scalar budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar

from .spectral import RegularityParams


class CostModelError(ValueError):
    """Raised for unknown schemes or unusable budgets/parameters."""


class SchemeId(str, Enum):
    """The five time-stepping schemes the kit implements."""

    EES = "ees"    # exponential Euler
    LIE = "lie"    # linear-implicit Euler
    MIL = "mil"    # Milstein with explicit second-order operator
    DFM = "dfm"    # derivative-free Milstein-type Runge-Kutta
    DFMM = "dfmm"  # derivative-free Milstein, multiplicative-noise fast path

    @classmethod
    def parse(cls, value: "SchemeId | str") -> "SchemeId":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise CostModelError(f"unknown scheme {value!r}; expected one of: {names}") from None


@dataclass
class CostLedger:
    """Running tally of functional evaluations and Gaussian draws."""

    f_evals: int = 0
    b_evals: int = 0
    bprime_evals: int = 0
    gauss_draws: int = 0

    def add(self, *, f: int = 0, b: int = 0, bprime: int = 0, draws: int = 0) -> None:
        self.f_evals += f
        self.b_evals += b
        self.bprime_evals += bprime
        self.gauss_draws += draws

    def merge(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(
            self.f_evals + other.f_evals,
            self.b_evals + other.b_evals,
            self.bprime_evals + other.bprime_evals,
            self.gauss_draws + other.gauss_draws,
        )

    __add__ = merge

    def scalar(self, unit_cost: float = 1.0) -> float:
        """Scalar cost: unit_cost * (all functional evaluations) + draws."""
        return unit_cost * (self.f_evals + self.b_evals + self.bprime_evals) + self.gauss_draws

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.f_evals, self.b_evals, self.bprime_evals, self.gauss_draws)


def per_step_cost(scheme: SchemeId | str, n: int, k: int) -> CostLedger:
    """Evaluation counts one time step consumes at resolution ``(n, k)``.

    The Euler-type schemes need one drift projection and one diffusion
    operator; the Milstein scheme adds the full bilinear derivative block;
    the derivative-free variant replaces it with two further diffusion
    blocks; the multiplicative fast path needs only four scalar-function
    projections in total.  Every scheme consumes ``k`` draws per step.
    """
    scheme = SchemeId.parse(scheme)
    if n < 1 or k < 1:
        raise CostModelError(f"resolutions must be >= 1, got N={n}, K={k}")
    if scheme in (SchemeId.EES, SchemeId.LIE):
        return CostLedger(f_evals=n, b_evals=k * n, bprime_evals=0, gauss_draws=k)
    if scheme is SchemeId.MIL:
        return CostLedger(f_evals=n, b_evals=k * n, bprime_evals=k * n * n, gauss_draws=k)
    if scheme is SchemeId.DFM:
        return CostLedger(f_evals=n, b_evals=3 * k * n, bprime_evals=0, gauss_draws=k)
    # DFMM: one drift projection plus three diffusion-multiplier projections.
    return CostLedger(f_evals=n, b_evals=3 * n, bprime_evals=0, gauss_draws=k)


def total_cost(scheme: SchemeId | str, n: int, k: int, m: int) -> CostLedger:
    """Ledger for a full path of ``m`` steps at resolution ``(n, k)``."""
    if m < 1:
        raise CostModelError(f"step count must be >= 1, got M={m}")
    step = per_step_cost(scheme, n, k)
    return CostLedger(
        step.f_evals * m, step.b_evals * m, step.bprime_evals * m, step.gauss_draws * m
    )


def _euler_q(params: RegularityParams, q_euler: float | None) -> float:
    q = min(params.gamma, 0.5) if q_euler is None else float(q_euler)
    if not (0.0 < q <= 1.0):
        raise CostModelError(f"Euler temporal exponent must lie in (0, 1], got {q}")
    return q


def effective_order(
    scheme: SchemeId | str,
    params: RegularityParams,
    *,
    q_euler: float | None = None,
) -> float:
    """Strong RMS error decay exponent against scalar cost.

    With a = gamma*rho_a, b = alpha*rho_q, p = a*b and temporal exponent q,
    the error at the budget-optimal allocation decays like budget^(-order)
    where order is p*q/((2b+a)q + p) for the Milstein scheme,
    p*q/((b+a)q + p) for the derivative-free and Euler-type schemes (the
    latter with their own q), and max(a,b)*q/(max(a,b)+q) for the
    multiplicative fast path.
    """
    scheme = SchemeId.parse(scheme)
    a = params.gamma * params.rho_a
    b = params.alpha * params.rho_q
    p = a * b
    if scheme is SchemeId.MIL:
        q = params.q
        return p * q / ((2.0 * b + a) * q + p)
    if scheme is SchemeId.DFM:
        q = params.q
        return p * q / ((b + a) * q + p)
    if scheme in (SchemeId.LIE, SchemeId.EES):
        q = _euler_q(params, q_euler)
        return p * q / ((b + a) * q + p)
    q = params.q
    m = max(a, b)
    return m * q / (m + q)


@dataclass(frozen=True)
class AllocationResult:
    """Budget-optimal resolutions with their exponents and balance report."""

    scheme: SchemeId
    budget: float
    n: int
    k: int
    m: int
    exponent_n: float
    exponent_k: float
    exponent_m: float
    predicted_error_exponent: float
    balance_terms: tuple[float, float, float]  # N^-a, K^-b, M^-q
    balance_ratio: float
    within_slack: bool

    SLACK: ClassVar[float] = 4.0


def allocation_exponents(
    scheme: SchemeId | str,
    params: RegularityParams,
    *,
    q_euler: float | None = None,
) -> tuple[float, float, float]:
    """Budget exponents (e_N, e_K, e_M) so that N ~ budget^e_N etc."""
    scheme = SchemeId.parse(scheme)
    a = params.gamma * params.rho_a
    b = params.alpha * params.rho_q
    p = a * b
    if scheme is SchemeId.MIL:
        q = params.q
        d = (2.0 * b + a) * q + p
        return (b * q / d, a * q / d, p / d)
    if scheme is SchemeId.DFMM:
        q = params.q
        m = max(a, b)
        d = m + q
        return (m * q / (a * d), m * q / (b * d), m / d)
    q = _euler_q(params, q_euler) if scheme in (SchemeId.LIE, SchemeId.EES) else params.q
    d = (b + a) * q + p
    return (b * q / d, a * q / d, p / d)


def optimal_allocation(
    scheme: SchemeId | str,
    budget: float,
    params: RegularityParams,
    *,
    q_euler: float | None = None,
) -> AllocationResult:
    """Pick integer ``(N, K, M)`` for a scalar budget.

    The continuous optimum balances the three error summands
    ``N^-(gamma rho_a)``, ``K^-(alpha rho_q)`` and ``M^-q``; each resolution
    is ceiling-rounded, never below 1, and the realized summands are
    reported together with their max/min ratio (discreteness slack 4).
    """
    scheme = SchemeId.parse(scheme)
    if not (budget >= 1.0) or not math.isfinite(budget):
        raise CostModelError(f"budget must be a finite number >= 1, got {budget}")
    e_n, e_k, e_m = allocation_exponents(scheme, params, q_euler=q_euler)
    n = max(1, math.ceil(budget ** e_n))
    k = max(1, math.ceil(budget ** e_k))
    m = max(1, math.ceil(budget ** e_m))
    a = params.gamma * params.rho_a
    b = params.alpha * params.rho_q
    q = _euler_q(params, q_euler) if scheme in (SchemeId.LIE, SchemeId.EES) else params.q
    terms = (n ** (-a), k ** (-b), m ** (-q))
    ratio = max(terms) / min(terms)
    return AllocationResult(
        scheme=scheme,
        budget=float(budget),
        n=n,
        k=k,
        m=m,
        exponent_n=e_n,
        exponent_k=e_k,
        exponent_m=e_m,
        predicted_error_exponent=effective_order(scheme, params, q_euler=q_euler),
        balance_terms=terms,
        balance_ratio=float(ratio),
        within_slack=bool(ratio <= AllocationResult.SLACK),
    )
