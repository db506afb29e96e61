"""Command-line front end: bind configs to experiments, print or export results.

Exit codes are a stable contract: 0 success, 1 usage/config error, 2
numerical failure (trajectory blow-up).  Every subcommand is deterministic
given (config, seed).
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, RunConfig, apply_flags, load_config, resolve_threads
from .convergence import (
    ConvergenceError,
    ExperimentConfig,
    emit_csv,
    fitted_orders,
    strong_error,
    table_to_csv,
    theoretical_bound,
)
from .costs import (
    CostModelError,
    SchemeId,
    effective_order,
    optimal_allocation,
    per_step_cost,
)
from .noise import NoiseError, RngStream
from .problems import ProblemError, build_problem, check_commutativity, drift_coeffs
from .schemes import BlowUpError, SchemeError, simulate_path
from .spectral import RegularityParams, SpectralError, SpectralVector, sobolev_norm

_USAGE_ERRORS = (
    ConfigError,
    ConvergenceError,
    CostModelError,
    NoiseError,
    ProblemError,
    SchemeError,
    SpectralError,
    OSError,
)

_PARAM_KEYS = ("gamma", "beta", "alpha", "delta", "theta", "rho_a", "rho_q")


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 (not argparse's 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Assumption validators.  These are plain functions so tests can drive them
# with raw arrays (including deliberately broken ones a constructor would
# reject).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str


def check_positive_spectrum(lambdas) -> ValidationCheck:
    """(A1): the operator spectrum is strictly positive and ascending."""
    arr = np.asarray(lambdas, dtype=np.float64)
    name = "(A1) positive operator spectrum"
    if arr.size == 0:
        return ValidationCheck(name, False, "empty spectrum")
    low = float(arr.min())
    if low <= 0.0:
        return ValidationCheck(name, False, f"inf lambda = {low:.6g}, need inf lambda > 0")
    if np.any(np.diff(arr) < 0.0):
        return ValidationCheck(name, False, "eigenvalues not ascending")
    return ValidationCheck(name, True, f"inf lambda = {low:.6g} > 0")


def check_trace_class(etas) -> ValidationCheck:
    """(A2): the noise covariance is nonnegative with finite trace."""
    arr = np.asarray(etas, dtype=np.float64)
    name = "(A2) trace-class noise"
    if arr.size == 0:
        return ValidationCheck(name, False, "empty covariance spectrum")
    if float(arr.min()) < 0.0:
        return ValidationCheck(name, False, f"negative eigenvalue {arr.min():.6g}")
    trace = float(arr.sum())
    if not np.isfinite(trace):
        return ValidationCheck(name, False, "trace diverges")
    return ValidationCheck(name, True, f"trace(Q) = {trace:.6g} < inf")


def check_initial_regularity(p) -> ValidationCheck:
    """(A3): the initial state has a finite H_gamma norm."""
    name = "(A3) initial-state regularity"
    norm = sobolev_norm(SpectralVector(p.initial), p.params.gamma, p.a_spec)
    if not np.isfinite(norm):
        return ValidationCheck(name, False, "H_gamma norm of the initial state diverges")
    return ValidationCheck(name, True, f"|xi|_H_gamma = {norm:.6g} < inf")


def check_drift_lipschitz(p, seed: int = 0, pairs: int = 32) -> ValidationCheck:
    """(A4): probe the drift's Lipschitz quotient against the declared bound."""
    name = "(A4) drift Lipschitz bound"
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        u = rng.standard_normal(p.n)
        v = rng.standard_normal(p.n)
        gap = float(np.linalg.norm(u - v))
        if gap == 0.0:
            continue
        fu = drift_coeffs(p, u)
        fv = drift_coeffs(p, v)
        worst = max(worst, float(np.linalg.norm(fu - fv)) / gap)
    declared = p.drift_lipschitz
    if declared is None:
        passed = np.isfinite(worst)
        return ValidationCheck(name, passed, f"measured quotient {worst:.6g} (no declared bound)")
    passed = worst <= declared * (1.0 + 1e-9)
    rel = "<=" if passed else ">"
    return ValidationCheck(name, passed, f"measured quotient {worst:.6g} {rel} declared {declared:.6g}")


def check_commutativity_sweep(
    p, seed: int = 0, states: int = 8, tol: float = 1e-6
) -> ValidationCheck:
    """Commutativity residual over the initial state, unit modes, and random states."""
    name = "commutativity"
    rng = np.random.default_rng(seed)
    probes = [np.asarray(p.initial, dtype=np.float64)]
    for i in range(min(4, p.n)):
        e = np.zeros(p.n)
        e[i] = 1.0
        probes.append(e)
    probes.extend(rng.standard_normal(p.n) for _ in range(states))
    max_mode = min(p.k, 6)
    worst = max(
        check_commutativity(p, SpectralVector(v), max_mode=max_mode) for v in probes
    )
    passed = worst < tol
    rel = "<" if passed else ">="
    return ValidationCheck(
        name, passed,
        f"max residual {worst:.6g} {rel} {tol:g} over {len(probes)} states, "
        f"first {max_mode} modes",
    )


def assumption_checks(p, seed: int = 0) -> list:
    return [
        check_positive_spectrum(p.a_spec.lambdas),
        check_trace_class(p.q_spec.etas),
        check_initial_regularity(p),
        check_drift_lipschitz(p, seed=seed),
        check_commutativity_sweep(p, seed=seed),
    ]


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def _load(args) -> RunConfig:
    return apply_flags(load_config(args.config), args)


def _build(cfg: RunConfig):
    return build_problem(cfg.problem, cfg.n, cfg.k, overrides=dict(cfg.overrides))


def _params_from(cfg: RunConfig) -> RegularityParams:
    kw = {key: cfg.overrides[key] for key in _PARAM_KEYS if key in cfg.overrides}
    return RegularityParams(**kw)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    problem = _build(cfg)
    out_rows = []
    for scheme in cfg.schemes:
        t0 = time.perf_counter()
        final, ledger = simulate_path(
            problem, scheme, cfg.m, RngStream(cfg.seed),
            dfmm_convention=cfg.dfmm_convention,
        )
        wall_ms = (time.perf_counter() - t0) * 1e3
        head = ", ".join(format(c, ".12g") for c in final.coeffs[:5])
        print(f"scheme={scheme} problem={cfg.problem} N={cfg.n} K={cfg.k} "
              f"M={cfg.m} seed={cfg.seed}")
        print(f"  terminal H-norm : {final.norm():.12g}")
        print(f"  coeffs[0:5]     : [{head}]")
        print(f"  ledger          : f={ledger.f_evals} b={ledger.b_evals} "
              f"bprime={ledger.bprime_evals} draws={ledger.gauss_draws} "
              f"scalar={ledger.scalar(cfg.unit_cost):.6g}")
        print(f"  wall            : {wall_ms:.3f} ms")
        out_rows.extend(
            (scheme, i, c) for i, c in enumerate(final.coeffs)
        )
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write("scheme,index,coeff\n")
            for scheme, i, c in out_rows:
                fh.write(f"{scheme},{i},{format(c, '.17g')}\n")
        print(f"wrote {cfg.output}")
    return 0


def cmd_convergence(args) -> int:
    cfg = _load(args)
    exp = ExperimentConfig(
        schemes=cfg.schemes,
        m_values=cfg.m_values,
        m_ref=cfg.m_ref,
        problem=cfg.problem,
        n=cfg.n,
        k=cfg.k,
        n_ref=cfg.n_ref,
        k_ref=cfg.k_ref,
        paths=cfg.paths,
        seed=cfg.seed,
        ref_scheme=cfg.ref_scheme,
        dfmm_convention=cfg.dfmm_convention,
        chunk=cfg.chunk,
        threads=resolve_threads(args.threads),
        overrides=dict(cfg.overrides),
        output=cfg.output,
    )
    table = strong_error(exp)
    if exp.output:
        emit_csv(table, exp.output)
        print(f"wrote {exp.output}")
    else:
        sys.stdout.write(table_to_csv(table))
    print(f"# {table.note}")
    problem = _build(cfg)
    bound = theoretical_bound(
        problem.params, problem.a_spec, problem.q_spec, max(exp.m_values)
    )
    print(f"# a-priori bound shape (C=1): spatial={bound.spatial_term:.6g} "
          f"noise={bound.noise_term:.6g} "
          f"temporal(M={max(exp.m_values)})={bound.temporal_term:.6g}")
    fits = fitted_orders(table)
    if fits:
        print("# fitted temporal orders, rmse ~ h^slope:")
        for scheme, fit in fits.items():
            print(f"#   {scheme:5s} slope={fit.slope:.4f} "
                  f"stderr={fit.slope_stderr:.4f} r2={fit.r_squared:.4f} "
                  f"({fit.n_points} points)")
    else:
        print("# fitted temporal orders: not enough usable rows (need 3 per scheme)")
    return 0


def cmd_cost(args) -> int:
    cfg = _load(args)
    params = _params_from(cfg)
    q_euler = cfg.q_euler
    print(f"per-step evaluation counts at N={cfg.n}, K={cfg.k} "
          f"(unit cost c={cfg.unit_cost:g}):")
    print(f"  {'scheme':6s} {'f':>8s} {'b':>8s} {'bprime':>8s} {'draws':>8s} {'scalar':>12s}")
    for scheme in SchemeId:
        step = per_step_cost(scheme, cfg.n, cfg.k)
        print(f"  {scheme.value:6s} {step.f_evals:8d} {step.b_evals:8d} "
              f"{step.bprime_evals:8d} {step.gauss_draws:8d} "
              f"{step.scalar(cfg.unit_cost):12.6g}")
    print("effective orders (rms error ~ cost^-order):")
    for scheme in SchemeId:
        order = effective_order(scheme, params, q_euler=q_euler)
        print(f"  {scheme.value:6s} {order:.6g}")
    for budget in cfg.budgets:
        print(f"budget {budget:g}:")
        for scheme in SchemeId:
            alloc = optimal_allocation(scheme, budget, params, q_euler=q_euler)
            flag = "" if alloc.within_slack else "  [unbalanced]"
            print(f"  {scheme.value:6s} N={alloc.n:<6d} K={alloc.k:<6d} "
                  f"M={alloc.m:<8d} error~budget^-{alloc.predicted_error_exponent:.6g}"
                  f"{flag}")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    try:
        problem = _build(cfg)
    except (ProblemError, SpectralError, NoiseError) as exc:
        print(f"FAIL construction: {exc}")
        return 1
    checks = assumption_checks(problem, seed=cfg.seed)
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status}  {check.name:34s} {check.detail}")
    ok = all(c.passed for c in checks)
    print(f"{'all checks passed' if ok else 'some checks FAILED'} "
          f"({cfg.problem}, N={cfg.n}, K={cfg.k})")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Parser and entry point.
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--scheme", metavar="IDS",
                        help="comma-separated scheme ids (ees,lie,mil,dfm,dfmm)")
    common.add_argument("--problem", metavar="ID",
                        help="problem id (heatmul, rankone, noncomm)")
    common.add_argument("--N", dest="n", type=int, help="state modes")
    common.add_argument("--K", dest="k", type=int, help="noise modes")
    common.add_argument("--M", dest="m", type=int,
                        help="time steps (for convergence: run this single level)")
    common.add_argument("--paths", type=int, help="Monte-Carlo sample paths")
    common.add_argument("--seed", type=int, help="base RNG seed")
    common.add_argument("--threads", type=int,
                        help="worker threads for convergence (env: SPDE_KIT_THREADS)")
    common.add_argument("--out", metavar="PATH", help="output file")

    parser = _Parser(
        prog="spde-kit",
        description="Simulate semilinear parabolic SPDEs with commutative "
                    "trace-class noise and measure strong convergence "
                    "against information cost.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sim = sub.add_parser("simulate", parents=[common],
                         help="integrate one path per scheme, print terminal summary")
    sim.set_defaults(func=cmd_simulate)
    conv = sub.add_parser("convergence", parents=[common],
                          help="coupled strong-error experiment, CSV + fitted orders")
    conv.set_defaults(func=cmd_convergence)
    cost = sub.add_parser("cost", parents=[common],
                          help="per-step costs, effective orders, budget allocations")
    cost.set_defaults(func=cmd_cost)
    val = sub.add_parser("validate", parents=[common],
                         help="check structural assumptions and commutativity")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return 2
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
