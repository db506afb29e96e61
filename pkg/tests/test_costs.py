import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spde_kit.costs import (
    CostLedger,
    CostModelError,
    SchemeId,
    allocation_exponents,
    effective_order,
    optimal_allocation,
    per_step_cost,
    total_cost,
)
from spde_kit.spectral import RegularityParams

DEFAULTS = RegularityParams()  # (gamma, beta, alpha, rho_a, rho_q) = (0.5, 0, 0.5, 2, 2)


def test_scheme_parse():
    assert SchemeId.parse("dfm") is SchemeId.DFM
    assert SchemeId.parse("MIL") is SchemeId.MIL
    assert SchemeId.parse(SchemeId.EES) is SchemeId.EES
    with pytest.raises(CostModelError):
        SchemeId.parse("euler")


@given(n=st.integers(1, 50), k=st.integers(1, 50))
@settings(max_examples=40, deadline=None)
def test_per_step_tuples(n, k):
    assert per_step_cost("ees", n, k).as_tuple() == (n, k * n, 0, k)
    assert per_step_cost("lie", n, k).as_tuple() == (n, k * n, 0, k)
    assert per_step_cost("mil", n, k).as_tuple() == (n, k * n, k * n * n, k)
    assert per_step_cost("dfm", n, k).as_tuple() == (n, 3 * k * n, 0, k)
    assert per_step_cost("dfmm", n, k).as_tuple() == (n, 3 * n, 0, k)


def test_dfmm_step_total_is_4n_plus_k():
    for n, k in [(1, 1), (5, 3), (16, 16)]:
        step = per_step_cost("dfmm", n, k)
        assert step.f_evals + step.b_evals + step.bprime_evals == 4 * n
        assert step.scalar() == 4 * n + k


def test_total_cost_scales_with_m():
    step = per_step_cost("mil", 4, 3)
    total = total_cost("mil", 4, 3, 10)
    assert total.as_tuple() == tuple(10 * x for x in step.as_tuple())
    with pytest.raises(CostModelError):
        total_cost("mil", 4, 3, 0)
    with pytest.raises(CostModelError):
        per_step_cost("mil", 0, 3)


def test_ledger_add_and_scalar():
    ledger = CostLedger()
    ledger.add(f=2, b=6)
    ledger.add(bprime=8, draws=3)
    assert ledger.as_tuple() == (2, 6, 8, 3)
    assert ledger.scalar() == 19.0
    assert ledger.scalar(unit_cost=2.0) == 2 * 16 + 3


ledgers = st.builds(
    CostLedger,
    st.integers(0, 10**6),
    st.integers(0, 10**6),
    st.integers(0, 10**6),
    st.integers(0, 10**6),
)


@given(a=ledgers, b=ledgers, c=ledgers)
@settings(max_examples=40, deadline=None)
def test_ledger_merge_is_monoid(a, b, c):
    assert (a + b).as_tuple() == (b + a).as_tuple()
    assert ((a + b) + c).as_tuple() == (a + (b + c)).as_tuple()
    assert (a + CostLedger()).as_tuple() == a.as_tuple()
    assert (a + b).scalar() == a.scalar() + b.scalar()


def test_effective_order_worked_example():
    # (gamma, beta, alpha, rho_a, rho_q) = (0.5, 0, 0.5, 2, 2):
    # a = b = 1, p = 1, q = 1/2 -> mil 0.2, dfm 0.25, dfmm 1/3
    assert effective_order("mil", DEFAULTS) == pytest.approx(0.2, abs=1e-15)
    assert effective_order("dfm", DEFAULTS) == pytest.approx(0.25, abs=1e-15)
    assert effective_order("dfmm", DEFAULTS) == pytest.approx(1.0 / 3.0, abs=1e-15)
    # Euler-type schemes use their own q (default min(gamma, 1/2) = 1/2 here)
    assert effective_order("ees", DEFAULTS) == pytest.approx(0.25, abs=1e-15)
    assert effective_order("lie", DEFAULTS) == pytest.approx(0.25, abs=1e-15)


def test_effective_order_q_euler_override():
    slower = effective_order("ees", DEFAULTS, q_euler=0.25)
    assert slower < effective_order("ees", DEFAULTS)
    with pytest.raises(CostModelError):
        effective_order("ees", DEFAULTS, q_euler=0.0)


def test_allocation_exponents_worked_example():
    assert allocation_exponents("mil", DEFAULTS) == pytest.approx((0.2, 0.2, 0.4))
    assert allocation_exponents("dfm", DEFAULTS) == pytest.approx((0.25, 0.25, 0.5))
    assert allocation_exponents("dfmm", DEFAULTS) == pytest.approx(
        (1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0)
    )


def test_optimal_allocation_budget_1e6():
    alloc = optimal_allocation("mil", 1e6, DEFAULTS)
    assert (alloc.n, alloc.k, alloc.m) == (16, 16, 252)
    assert alloc.within_slack
    assert alloc.predicted_error_exponent == pytest.approx(0.2)


def test_optimal_allocation_monotone_in_budget():
    small = optimal_allocation("dfm", 1e3, DEFAULTS)
    large = optimal_allocation("dfm", 1e6, DEFAULTS)
    assert large.n >= small.n and large.k >= small.k and large.m >= small.m


def test_optimal_allocation_bad_budget():
    with pytest.raises(CostModelError):
        optimal_allocation("dfm", 0.5, DEFAULTS)
    with pytest.raises(CostModelError):
        optimal_allocation("dfm", math.inf, DEFAULTS)


def _random_params(draw_float):
    delta = draw_float(0.05, 0.45)
    theta = draw_float(0.05, 0.45)
    gamma = draw_float(max(delta, 1e-3) + 1e-3, min(delta + 0.5, 1.0) - 1e-3)
    beta = draw_float(0.0, gamma * 0.98)
    alpha = draw_float(0.05, 2.0)
    rho_a = draw_float(0.5, 4.0)
    rho_q = draw_float(0.5, 4.0)
    return RegularityParams(
        gamma=gamma, beta=beta, alpha=alpha, delta=delta, theta=theta,
        rho_a=rho_a, rho_q=rho_q,
    )


@given(data=st.data())
@settings(max_examples=120, deadline=None)
def test_order_hierarchy_property(data):
    """DFM strictly beats MIL and DFMM is at least as good as DFM,
    for every admissible parameter combination."""

    def draw_float(lo, hi):
        return data.draw(st.floats(lo, hi))

    try:
        params = _random_params(draw_float)
    except Exception:
        return  # a rejected corner of the constraint polytope; not the point here
    mil = effective_order("mil", params)
    dfm = effective_order("dfm", params)
    dfmm = effective_order("dfmm", params)
    assert dfm > mil
    assert dfmm >= dfm - 1e-12
