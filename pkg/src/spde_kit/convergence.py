"""Monte-Carlo strong-error estimation with coupled noise refinement.

The estimator follows the classic coupled design: every path draws its
Brownian increments once, at the finest resolution ``(M_ref, K_ref)``, and
each coarser run re-uses exact sums of those fine increments (and the first
K of their directions).  Coarse and reference trajectories therefore live on
the same underlying noise path, and the root-mean-square terminal distance
estimates the strong error without any inter-path variance inflation.

There is no closed-form solution for the built-in problems, so the
"reference" is itself a scheme run at fine resolution; reported errors are
scheme-relative Cauchy errors, which is standard practice for strong-order
studies.  Emitted tables say so in their metadata note.

Cost columns report the information-cost model (unit cost c = 1), not wall
time; the two are deliberately kept side by side so the effective-order
claims can be checked against measured errors.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .costs import CostLedger, SchemeId, total_cost
from .noise import QSpectrum, RngStream, aggregate_increment_array, sample_increment_array
from .problems import ProblemSpec, build_problem, default_nx
from .schemes import run_increments
from .spectral import OperatorSpectrum, RegularityParams

CSV_HEADER = (
    "scheme,N,K,M,paths,rmse,mc_stderr,cost_scalar,"
    "f_evals,b_evals,bprime_evals,gauss_draws,wall_ms"
)

MAX_BLOWUP_FRACTION = 0.01


class ConvergenceError(ValueError):
    """Invalid experiment configuration or a failed experiment invariant."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a strong-error experiment needs, validated up front."""

    schemes: tuple
    m_values: tuple
    m_ref: int
    problem: str = "heatmul"
    n: int = 16
    k: int = 16
    n_ref: Optional[int] = None
    k_ref: Optional[int] = None
    paths: int = 100
    seed: int = 0
    ref_scheme: str = "dfm"
    dfmm_convention: str = "paper"
    chunk: int = 250
    threads: int = 1
    overrides: dict = field(default_factory=dict)
    output: Optional[str] = None

    def __post_init__(self):
        schemes = tuple(SchemeId.parse(s).value for s in self.schemes)
        if not schemes:
            raise ConvergenceError("at least one scheme is required")
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "ref_scheme", SchemeId.parse(self.ref_scheme).value)
        m_values = tuple(sorted({int(m) for m in self.m_values}))
        if not m_values or m_values[0] < 1:
            raise ConvergenceError(f"M values must be positive, got {self.m_values}")
        object.__setattr__(self, "m_values", m_values)
        if self.m_ref < max(m_values):
            raise ConvergenceError(
                f"reference M_ref={self.m_ref} must be at least max(M)={max(m_values)}"
            )
        for m in m_values:
            if self.m_ref % m:
                raise ConvergenceError(
                    f"M_ref={self.m_ref} is not divisible by M={m}; coupling impossible"
                )
        if self.n_ref is None:
            object.__setattr__(self, "n_ref", self.n)
        if self.k_ref is None:
            object.__setattr__(self, "k_ref", self.k)
        if not (1 <= self.n <= self.n_ref):
            raise ConvergenceError(f"need 1 <= N={self.n} <= N_ref={self.n_ref}")
        if not (1 <= self.k <= self.k_ref):
            raise ConvergenceError(f"need 1 <= K={self.k} <= K_ref={self.k_ref}")
        if self.paths < 2:
            raise ConvergenceError(f"paths must be >= 2, got {self.paths}")
        if self.chunk < 1 or self.threads < 1:
            raise ConvergenceError("chunk and threads must be >= 1")


@dataclass(frozen=True)
class ErrorRow:
    scheme: str
    n: int
    k: int
    m: int
    paths: int
    rmse: float
    mc_stderr: float
    cost_scalar: float
    f_evals: int
    b_evals: int
    bprime_evals: int
    gauss_draws: int
    wall_ms: float
    blowups: int = 0


@dataclass
class ErrorTable:
    rows: list
    note: str = ""

    def for_scheme(self, scheme: str) -> list:
        scheme = SchemeId.parse(scheme).value
        return [r for r in self.rows if r.scheme == scheme]


@dataclass(frozen=True)
class FitResult:
    """Least-squares power-law fit of error against a resolution parameter."""

    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    n_points: int


def fit_order(points: Iterable) -> FitResult:
    """Fit ``log(err) = slope*log(x) + intercept`` through (x, err) pairs."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ConvergenceError(f"order fit needs at least 3 points, got {len(pts)}")
    if any(x <= 0.0 or y <= 0.0 for x, y in pts):
        raise ConvergenceError("order fit requires positive abscissae and errors")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    n = len(pts)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0.0:
        raise ConvergenceError("order fit requires at least two distinct abscissae")
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (slope * lx + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else float("nan")
    return FitResult(slope=slope, intercept=intercept, r_squared=r_squared,
                     slope_stderr=stderr, n_points=n)


@dataclass(frozen=True)
class BoundReport:
    """The three-term a-priori error bound, split for balance diagnostics."""

    total: float
    spatial_term: float
    noise_term: float
    temporal_term: float
    temporal_exponent: float


def theoretical_bound(
    params: RegularityParams,
    a_spec: OperatorSpectrum,
    q_spec: QSpectrum,
    m: int,
    c: float = 1.0,
) -> BoundReport:
    """Evaluate C*(lambda_tail^(-gamma) + eta_tail^alpha + M^(-q)).

    The constant is unknowable from theory alone, so this is a diagnostic
    overlay (shape and balance of the three terms), never an assertion
    target.
    """
    if m < 1:
        raise ConvergenceError(f"M must be >= 1, got {m}")
    if not (c > 0.0):
        raise ConvergenceError(f"bound constant must be positive, got {c}")
    spatial = c * a_spec.tail ** (-params.gamma)
    noise = c * q_spec.tail**params.alpha
    temporal = c * float(m) ** (-params.q)
    return BoundReport(
        total=spatial + noise + temporal,
        spatial_term=spatial,
        noise_term=noise,
        temporal_term=temporal,
        temporal_exponent=params.q,
    )


# ---------------------------------------------------------------------------
# Strong-error experiment.
# ---------------------------------------------------------------------------

def _chunk_bounds(paths: int, chunk: int):
    return [(start, min(chunk, paths - start)) for start in range(0, paths, chunk)]


def _sq_errors(ref_states: np.ndarray, level_states: np.ndarray) -> np.ndarray:
    """Squared H-distance with the coarse state zero-padded to N_ref."""
    n = level_states.shape[-1]
    diff_head = ref_states[..., :n] - level_states
    out = np.sum(diff_head**2, axis=-1)
    if ref_states.shape[-1] > n:
        out = out + np.sum(ref_states[..., n:] ** 2, axis=-1)
    return out


def strong_error(cfg: ExperimentConfig) -> ErrorTable:
    """Estimate strong terminal errors for every (scheme, M) against a
    coupled fine-resolution reference run.

    Paths are processed in chunks; each chunk samples its fine increments
    from per-path keyed streams, so results are bitwise independent of chunk
    size and thread count.  Blown-up paths are dropped from the affected row
    (reference blow-ups drop the path everywhere); more than 1% casualties
    fail the experiment.
    """
    nx = max(default_nx(cfg.n_ref, cfg.k_ref), default_nx(cfg.n, cfg.k))
    prob_ref = build_problem(cfg.problem, cfg.n_ref, cfg.k_ref, nx=nx,
                             overrides=dict(cfg.overrides))
    prob_lvl = build_problem(cfg.problem, cfg.n, cfg.k, nx=nx,
                             overrides=dict(cfg.overrides))
    h_ref = prob_ref.horizon / cfg.m_ref
    keys = [(s, m) for s in cfg.schemes for m in cfg.m_values]

    def run_chunk(start: int, count: int):
        fine = np.empty((count, cfg.m_ref, cfg.k_ref))
        for i in range(count):
            stream = RngStream(cfg.seed, start + i)
            fine[i] = sample_increment_array(prob_ref.q_spec, h_ref, stream, cfg.m_ref)
        ref_states, ref_blown = run_increments(
            prob_ref, cfg.ref_scheme, prob_ref.initial, fine, h_ref,
            dfmm_convention=cfg.dfmm_convention, on_blowup="mask",
        )
        out = {}
        for scheme, m in keys:
            coarse = aggregate_increment_array(fine, cfg.m_ref // m)[..., : cfg.k]
            t0 = time.perf_counter()
            states, blown = run_increments(
                prob_lvl, scheme, prob_lvl.initial, coarse, prob_lvl.horizon / m,
                dfmm_convention=cfg.dfmm_convention, on_blowup="mask",
            )
            wall = time.perf_counter() - t0
            sq = _sq_errors(ref_states, states)
            out[(scheme, m)] = (sq, ref_blown | blown, wall)
        return out

    bounds = _chunk_bounds(cfg.paths, cfg.chunk)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunk_results = list(pool.map(lambda b: run_chunk(*b), bounds))
    else:
        chunk_results = [run_chunk(*b) for b in bounds]

    rows = []
    for scheme, m in keys:
        sq = np.concatenate([r[(scheme, m)][0] for r in chunk_results])
        blown = np.concatenate([r[(scheme, m)][1] for r in chunk_results])
        wall = sum(r[(scheme, m)][2] for r in chunk_results)
        n_blown = int(blown.sum())
        if n_blown > MAX_BLOWUP_FRACTION * cfg.paths:
            raise ConvergenceError(
                f"{n_blown}/{cfg.paths} paths blew up for {scheme} at M={m} "
                f"(> {MAX_BLOWUP_FRACTION:.0%}); experiment aborted"
            )
        good = sq[~blown]
        mean_sq = float(np.mean(good))
        rmse = math.sqrt(mean_sq)
        if rmse > 0.0 and good.size > 1:
            stderr = float(np.std(good, ddof=1)) / (2.0 * rmse * math.sqrt(good.size))
        else:
            stderr = 0.0
        model = total_cost(scheme, cfg.n, cfg.k, m)
        rows.append(ErrorRow(
            scheme=scheme, n=cfg.n, k=cfg.k, m=m, paths=int(good.size),
            rmse=rmse, mc_stderr=stderr,
            cost_scalar=model.scalar(), f_evals=model.f_evals,
            b_evals=model.b_evals, bprime_evals=model.bprime_evals,
            gauss_draws=model.gauss_draws, wall_ms=wall * 1e3,
            blowups=n_blown,
        ))
    note = (
        f"reference: {cfg.ref_scheme} at (N,K,M)=({cfg.n_ref},{cfg.k_ref},{cfg.m_ref}) "
        f"on {cfg.problem!r}, {cfg.paths} coupled paths, seed {cfg.seed}; "
        "errors are scheme-relative (no closed-form solution exists); "
        "cost columns are information-model counts with c=1"
    )
    return ErrorTable(rows=rows, note=note)


def fitted_orders(table: ErrorTable, horizon: float = 1.0) -> dict:
    """Per-scheme temporal-order fits of rmse against h = horizon/M.

    Rows with rmse == 0 (typically the self-reference row) are skipped;
    schemes with fewer than 3 usable rows are omitted.
    """
    out = {}
    schemes = []
    for row in table.rows:
        if row.scheme not in schemes:
            schemes.append(row.scheme)
    for scheme in schemes:
        pts = [(horizon / r.m, r.rmse) for r in table.for_scheme(scheme) if r.rmse > 0]
        if len(pts) >= 3:
            out[scheme] = fit_order(pts)
    return out


# ---------------------------------------------------------------------------
# CSV emission.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def table_to_csv(table: ErrorTable) -> str:
    """Render rows (sorted by scheme name, then M, N, K) under the fixed header."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in sorted(table.rows, key=lambda r: (r.scheme, r.m, r.n, r.k)):
        buf.write(",".join([
            r.scheme, str(r.n), str(r.k), str(r.m), str(r.paths),
            _fmt(r.rmse), _fmt(r.mc_stderr), _fmt(r.cost_scalar),
            str(r.f_evals), str(r.b_evals), str(r.bprime_evals),
            str(r.gauss_draws), _fmt(r.wall_ms),
        ]) + "\n")
    return buf.getvalue()


def emit_csv(table: ErrorTable, path) -> None:
    """Write the table to ``path`` (parent directory must exist)."""
    text = table_to_csv(table)
    with open(os.fspath(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_csv(path) -> ErrorTable:
    """Parse a file previously written by :func:`emit_csv`."""
    with open(os.fspath(path), "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER.split(","):
            raise ConvergenceError(f"unexpected CSV header in {path}: {header}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            rows.append(ErrorRow(
                scheme=rec[0], n=int(rec[1]), k=int(rec[2]), m=int(rec[3]),
                paths=int(rec[4]), rmse=float(rec[5]), mc_stderr=float(rec[6]),
                cost_scalar=float(rec[7]), f_evals=int(rec[8]),
                b_evals=int(rec[9]), bprime_evals=int(rec[10]),
                gauss_draws=int(rec[11]), wall_ms=float(rec[12]),
            ))
    return ErrorTable(rows=rows)
