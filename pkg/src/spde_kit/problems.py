"""Problem definitions: drift/diffusion evaluators over a sine collocation grid.

States are coefficient vectors against the Dirichlet sine basis
``e_i(x) = sqrt(2) sin(i pi x)`` on (0, 1).  Pointwise nonlinearities are
realized by synthesis onto a midpoint collocation grid, pointwise
evaluation, and midpoint-quadrature analysis back to coefficients.  The grid
always carries at least twice as many points as retained modes, so
analyze(synthesize(v)) is exact to rounding for every representable state.

Three problems are built in:

``heatmul``
    Heat equation with a bounded saturating drift and multiplicative
    pointwise diffusion ``b(x, v) = sigma * sqrt(1 + v^2)``.  Pointwise
    multipliers commute, so the noise is commutative and the multiplicative
    fast-path scheme applies.

``rankone``
    Same linear part, but the diffusion maps every noise direction onto a
    single state-dependent profile: ``B(v)u = <u, psi> * sin(v)``.  Rank-one
    diffusions are commutative without being pointwise multipliers.

``noncomm``
    A deliberately non-commutative two-direction operator used to exercise
    the commutativity diagnostics; it must *fail* the residual check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .costs import CostLedger
from .noise import NoiseIncrement, QSpectrum
from .spectral import OperatorSpectrum, RegularityParams, SpectralVector, project_coeffs


class ProblemError(ValueError):
    """Raised for unknown problems, bad grids, or inapplicable operations."""


def _stacked(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matmul with all leading axes of ``a`` flattened into one BLAS call."""
    lead = a.shape[:-1]
    flat = np.ascontiguousarray(a).reshape(-1, a.shape[-1])
    return (flat @ b).reshape(lead + (b.shape[-1],))


# ---------------------------------------------------------------------------
# Collocation grid.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SineGrid:
    """Midpoint collocation grid with the sine basis sampled on it.

    ``basis[k, i] = sqrt(2) sin((i+1) pi x_k)`` at ``x_k = (k + 1/2)/nx``.
    Midpoint sampling keeps the discrete modes orthonormal, so analysis is
    the plain scaled transpose of synthesis.
    """

    nx: int
    modes: int
    points: np.ndarray
    basis: np.ndarray
    basis_t: np.ndarray  # (modes, nx), contiguous rows for synthesis
    basis_q: np.ndarray  # basis / nx, the midpoint quadrature analysis matrix

    @classmethod
    def build(cls, modes: int, nx: int) -> "SineGrid":
        if modes < 1:
            raise ProblemError(f"need at least one mode, got {modes}")
        if nx < 2 * modes:
            raise ProblemError(
                f"grid must oversample the modes: nx={nx} < 2*modes={2 * modes}"
            )
        x = (np.arange(nx) + 0.5) / nx
        i = np.arange(1, modes + 1)
        basis = math.sqrt(2.0) * np.sin(np.pi * np.outer(x, i))
        basis_t = np.ascontiguousarray(basis.T)
        basis_q = basis / nx
        for arr in (x, basis, basis_t, basis_q):
            arr.setflags(write=False)
        return cls(nx=nx, modes=modes, points=x, basis=basis,
                   basis_t=basis_t, basis_q=basis_q)

    def synth(self, coeffs: np.ndarray) -> np.ndarray:
        """Values on the grid of a coefficient array ``(..., n)``, n <= modes."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        n = coeffs.shape[-1]
        if n > self.modes:
            raise ProblemError(f"cannot synthesize {n} modes on a {self.modes}-mode grid")
        return _stacked(coeffs, self.basis_t[:n])

    def analyze(self, values: np.ndarray, n: int) -> np.ndarray:
        """First ``n`` coefficients of grid values ``(..., nx)`` by midpoint quadrature."""
        if n > self.modes:
            raise ProblemError(f"cannot analyze {n} modes on a {self.modes}-mode grid")
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.nx:
            raise ProblemError(
                f"grid function has {values.shape[-1]} points, grid has {self.nx}"
            )
        return _stacked(values, self.basis_q[:, :n])


@dataclass(frozen=True)
class GridFunction:
    """Values of a state on the collocation grid, paired with the grid."""

    values: np.ndarray
    grid: SineGrid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape[-1] != self.grid.nx:
            raise ProblemError(
                f"values have {vals.shape[-1]} points but grid has {self.grid.nx}"
            )
        object.__setattr__(self, "values", vals)


def synthesize(v: SpectralVector, grid: SineGrid) -> GridFunction:
    """Evaluate a coefficient vector on the collocation grid."""
    return GridFunction(values=grid.synth(v.coeffs), grid=grid)


def analyze(gf: GridFunction, n: int) -> SpectralVector:
    """Project a grid function onto its first ``n`` sine coefficients."""
    return SpectralVector(gf.grid.analyze(gf.values, n))


# ---------------------------------------------------------------------------
# Diffusion evaluators.
#
# All methods take and return plain coefficient arrays with shape (..., N)
# (states) and (..., K) (noise coefficients); leading axes are batch axes.
# Ledger charges are per batch element and use the number of *active* noise
# directions.
# ---------------------------------------------------------------------------

def _batch_size(arr: np.ndarray) -> int:
    return int(np.prod(arr.shape[:-1], dtype=np.int64))


class NemytskijDiffusion:
    """Pointwise multiplicative diffusion ``(B(v)u)(x) = b(x, v(x)) * u(x)``."""

    is_nemytskij = True

    def __init__(self, b: Callable, db: Optional[Callable] = None):
        self.b = b
        self.db = db
        self._pair_cache: dict = {}

    def _pair_matrix(self, grid: SineGrid, n: int, k: int) -> np.ndarray:
        """Quadrature matrix for all basis-pair products at once.

        Column ``i*k + j`` holds ``e_i(x_l) e~_j(x_l) / nx``, so a single GEMM
        ``values @ matrix`` yields every projected product ``<v * e~_j, e_i>``.
        """
        key = (id(grid), n, k)
        mat = self._pair_cache.get(key)
        if mat is None:
            mat = (grid.basis_q[:, :n, None] * grid.basis[:, None, :k]).reshape(
                grid.nx, n * k
            )
            self._pair_cache[key] = mat
        return mat

    def _b_grid(self, grid: SineGrid, v_grid: np.ndarray) -> np.ndarray:
        return self.b(grid.points, v_grid)

    def _db_grid(self, grid: SineGrid, v_grid: np.ndarray) -> np.ndarray:
        if self.db is not None:
            return self.db(grid.points, v_grid)
        # Pointwise forward difference in the state argument.
        eps = 1e-6 * (1.0 + np.sqrt(np.mean(v_grid**2, axis=-1, keepdims=True)))
        return (self.b(grid.points, v_grid + eps) - self.b(grid.points, v_grid)) / eps

    def columns(self, p: "ProblemSpec", v: np.ndarray, ledger: Optional[CostLedger]) -> np.ndarray:
        grid = p.grid
        v_grid = grid.synth(v)
        bg = self._b_grid(grid, v_grid)
        # One GEMM against the pair-product matrix gives all K projected
        # columns <b(v) e~_j, e_i> simultaneously.
        cols = _stacked(bg, self._pair_matrix(grid, p.n, p.k))
        cols = cols.reshape(v.shape[:-1] + (p.n, p.k))
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(v))
        return cols

    def apply(self, p: "ProblemSpec", v: np.ndarray, u: np.ndarray,
              ledger: Optional[CostLedger]) -> np.ndarray:
        grid = p.grid
        v_grid = grid.synth(v)
        w_grid = grid.synth(u)
        out = grid.analyze(self._b_grid(grid, v_grid) * w_grid, p.n)
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(v))
        return out

    def columns_at(self, p: "ProblemSpec", states: np.ndarray,
                   ledger: Optional[CostLedger]) -> np.ndarray:
        """Column ``j`` of the operator evaluated at ``states[..., j, :]``."""
        grid = p.grid
        s_grid = grid.synth(states)                       # (..., K, nx)
        bg = self._b_grid(grid, s_grid)
        prods = bg * grid.basis_t[: p.k]                  # row j multiplies e~_j
        out = grid.analyze(prods, p.n)                    # (..., K, N)
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(states[..., 0]))
        return out

    def second_order(self, p: "ProblemSpec", v: np.ndarray, weights: np.ndarray,
                     cols: Optional[np.ndarray], ledger: Optional[CostLedger]) -> np.ndarray:
        """Weighted contraction of the derivative against projected columns.

        Computes sum_ij weights[..., i, j] * B'(v)(P_N B(v) e~_i) e~_j.  The
        mixing over directions happens on the grid, so the whole contraction
        costs a single derivative evaluation regardless of K.
        """
        grid = p.grid
        v_grid = grid.synth(v)
        if cols is None:
            cols = self.columns(p, v, None)
        col_grid = grid.synth(np.swapaxes(cols, -1, -2))        # (..., K, nx)
        we = _stacked(weights, grid.basis_t[: p.k])             # (..., K, nx)
        mix = np.einsum("...kx,...kx->...x", col_grid, we)
        out = grid.analyze(self._db_grid(grid, v_grid) * mix, p.n)
        if ledger is not None:
            ledger.add(bprime=p.q_spec.k_active * p.n * p.n * _batch_size(v))
        return out

    def bilinear_pair(self, p: "ProblemSpec", v: np.ndarray, i: int, j: int,
                      project_inner: bool, ledger: Optional[CostLedger]) -> np.ndarray:
        grid = p.grid
        v_grid = grid.synth(v)
        bg = self._b_grid(grid, v_grid)
        inner = bg * grid.basis[:, i]
        if project_inner:
            inner = grid.synth(grid.analyze(inner, p.n))
        if self.db is not None:
            out = grid.analyze(self._db_grid(grid, v_grid) * inner * grid.basis[:, j], p.n)
        else:
            eps = 1e-6 * (1.0 + np.sqrt(np.mean(v_grid**2, axis=-1, keepdims=True)))
            b_pert = self.b(grid.points, v_grid + eps * inner)
            out = grid.analyze((b_pert - bg) / eps * grid.basis[:, j], p.n)
        if ledger is not None:
            ledger.add(bprime=p.n * p.n * _batch_size(v))
        return out

    def multiplier_coeffs(self, p: "ProblemSpec", v_grid: np.ndarray,
                          ledger: Optional[CostLedger]) -> np.ndarray:
        """Projected diffusion multiplier: first N coefficients of b(., v)."""
        out = p.grid.analyze(self._b_grid(p.grid, v_grid), p.n)
        if ledger is not None:
            ledger.add(b=p.n * _batch_size(out))
        return out


class RankOneDiffusion:
    """Rank-one diffusion ``B(v)u = <u, psi> * G(v)`` with pointwise G."""

    is_nemytskij = False

    def __init__(self, psi: np.ndarray, g: Callable, dg: Optional[Callable] = None):
        self.psi = np.asarray(psi, dtype=np.float64)
        self.g = g
        self.dg = dg

    def _profile(self, p: "ProblemSpec", v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v_grid = p.grid.synth(v)
        return v_grid, p.grid.analyze(self.g(v_grid), p.n)

    def columns(self, p, v, ledger):
        _, gv = self._profile(p, v)
        cols = gv[..., :, None] * self.psi[: p.k]
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(v))
        return cols

    def apply(self, p, v, u, ledger):
        _, gv = self._profile(p, v)
        s = u @ self.psi[: p.k]
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(v))
        return s[..., None] * gv

    def columns_at(self, p, states, ledger):
        s_grid = p.grid.synth(states)                       # (..., K, nx)
        gv = p.grid.analyze(self.g(s_grid), p.n)            # (..., K, N)
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(states[..., 0]))
        return gv * self.psi[: p.k, None]

    def _dg_grid(self, p: "ProblemSpec", v_grid: np.ndarray) -> np.ndarray:
        if self.dg is not None:
            return self.dg(v_grid)
        eps = 1e-6 * (1.0 + np.sqrt(np.mean(v_grid**2, axis=-1, keepdims=True)))
        return (self.g(v_grid + eps) - self.g(v_grid)) / eps

    def second_order(self, p, v, weights, cols, ledger):
        v_grid, gv = self._profile(p, v)
        psi = self.psi[: p.k]
        scale = np.einsum("...ij,i,j->...", weights, psi, psi)
        mix = p.grid.synth(gv)
        out = p.grid.analyze(self._dg_grid(p, v_grid) * mix, p.n) * scale[..., None]
        if ledger is not None:
            ledger.add(bprime=p.q_spec.k_active * p.n * p.n * _batch_size(v))
        return out

    def bilinear_pair(self, p, v, i, j, project_inner, ledger):
        v_grid, gv = self._profile(p, v)
        inner = p.grid.synth(gv) if project_inner else self.g(v_grid)
        out = p.grid.analyze(self._dg_grid(p, v_grid) * inner, p.n)
        out = out * (self.psi[i] * self.psi[j])
        if ledger is not None:
            ledger.add(bprime=p.n * p.n * _batch_size(v))
        return out


class SkewDiffusion:
    """Two-direction operator whose mixed derivatives do not commute.

    Column 1 is ``<v, e_1> e_1`` and column 2 is ``<v, e_2> e_1``; swapping
    the roles of the two noise directions in the second-order term produces
    genuinely different vectors, which is exactly what the commutativity
    diagnostics must detect.
    """

    is_nemytskij = False

    def columns(self, p, v, ledger):
        cols = np.zeros(v.shape[:-1] + (p.n, p.k))
        cols[..., 0, 0] = v[..., 0]
        if p.k > 1:
            cols[..., 0, 1] = v[..., 1]
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(v))
        return cols

    def apply(self, p, v, u, ledger):
        out = np.zeros_like(v)
        out[..., 0] = u[..., 0] * v[..., 0]
        if p.k > 1:
            out[..., 0] += u[..., 1] * v[..., 1]
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(v))
        return out

    def columns_at(self, p, states, ledger):
        out = np.zeros(states.shape[:-2] + (p.k, p.n))
        out[..., 0, 0] = states[..., 0, 0]
        if p.k > 1:
            out[..., 1, 0] = states[..., 1, 1]
        if ledger is not None:
            ledger.add(b=p.q_spec.k_active * p.n * _batch_size(states[..., 0]))
        return out

    def bilinear_pair(self, p, v, i, j, project_inner, ledger):
        out = np.zeros_like(v)
        if j == 0 and i in (0, 1) and i < p.k:
            out[..., 0] = v[..., i]
        if ledger is not None:
            ledger.add(bprime=p.n * p.n * _batch_size(v))
        return out

    def second_order(self, p, v, weights, cols, ledger):
        out = np.zeros_like(v)
        out[..., 0] = weights[..., 0, 0] * v[..., 0]
        if p.k > 1:
            out[..., 0] += weights[..., 1, 0] * v[..., 1]
        if ledger is not None:
            ledger.add(bprime=p.q_spec.k_active * p.n * p.n * _batch_size(v))
        return out


# ---------------------------------------------------------------------------
# Problem container and public operator API.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Everything a time stepper needs: spectra, parameters, and evaluators."""

    name: str
    a_spec: OperatorSpectrum
    q_spec: QSpectrum
    params: RegularityParams
    horizon: float
    initial: np.ndarray
    grid: SineGrid
    drift: Callable
    diffusion: object
    drift_lipschitz: Optional[float] = None

    def __post_init__(self):
        init = np.asarray(self.initial, dtype=np.float64).copy()
        if init.shape != (self.a_spec.dim,):
            raise ProblemError(
                f"initial state must have shape ({self.a_spec.dim},), got {init.shape}"
            )
        if self.grid.nx < 2 * max(self.a_spec.dim, self.q_spec.dim):
            raise ProblemError("collocation grid undersamples the retained modes")
        if not (self.horizon > 0.0):
            raise ProblemError(f"time horizon must be positive, got {self.horizon}")
        init.setflags(write=False)
        object.__setattr__(self, "initial", init)

    @property
    def n(self) -> int:
        return self.a_spec.dim

    @property
    def k(self) -> int:
        return self.q_spec.dim

    @property
    def is_nemytskij(self) -> bool:
        return bool(getattr(self.diffusion, "is_nemytskij", False))


def drift_coeffs(p: ProblemSpec, v: np.ndarray, ledger: Optional[CostLedger] = None) -> np.ndarray:
    """Projected drift: first N coefficients of f(x, v(x))."""
    v_grid = p.grid.synth(v)
    out = p.grid.analyze(p.drift(p.grid.points, v_grid), p.n)
    if ledger is not None:
        ledger.add(f=p.n * _batch_size(v))
    return out


def apply_F(p: ProblemSpec, v: SpectralVector, ledger: Optional[CostLedger] = None) -> SpectralVector:
    """Drift of a single state, as a spectral vector."""
    return SpectralVector(drift_coeffs(p, v.coeffs, ledger))


def apply_B(p: ProblemSpec, v: SpectralVector, u: NoiseIncrement,
            ledger: Optional[CostLedger] = None) -> SpectralVector:
    """Diffusion operator applied to a noise increment, projected to N modes."""
    if u.dim != p.k:
        raise ProblemError(f"increment has {u.dim} directions, problem has {p.k}")
    return SpectralVector(p.diffusion.apply(p, v.coeffs, u.coeffs, ledger))


def apply_BprimeB(p: ProblemSpec, v: SpectralVector, i: int, j: int,
                  ledger: Optional[CostLedger] = None, *,
                  project_inner: bool = False) -> SpectralVector:
    """Second-order directional term B'(v)(B(v) e~_i) e~_j, projected.

    By default the inner argument ``B(v) e~_i`` is used in its pointwise
    (unprojected) realization — the faithful operator probe used by the
    commutativity diagnostics.  With ``project_inner=True`` the inner
    argument is first projected onto the N-mode state space, which is the
    convention the Milstein stepper contracts with (its virtual stages can
    only see projected states).
    """
    if not (0 <= i < p.k and 0 <= j < p.k):
        raise ProblemError(f"direction pair ({i}, {j}) outside the {p.k} noise modes")
    return SpectralVector(p.diffusion.bilinear_pair(p, v.coeffs, i, j, project_inner, ledger))


def check_commutativity(p: ProblemSpec, v: SpectralVector,
                        max_mode: Optional[int] = None) -> float:
    """Largest normalized asymmetry of the second-order term over mode pairs.

    Returns ``max_{i<j} ||T_ij - T_ji|| / (1 + ||T_ij||)`` with
    ``T_ij = apply_BprimeB(v, i, j)``.  Commutative diffusions give values at
    rounding level; non-commutative ones give O(1).
    """
    kmax = p.k if max_mode is None else min(max_mode, p.k)
    worst = 0.0
    for i in range(kmax):
        for j in range(i + 1, kmax):
            tij = p.diffusion.bilinear_pair(p, v.coeffs, i, j, False, None)
            tji = p.diffusion.bilinear_pair(p, v.coeffs, j, i, False, None)
            num = float(np.linalg.norm(tij - tji))
            den = 1.0 + float(np.linalg.norm(tij))
            worst = max(worst, num / den)
    return worst


# ---------------------------------------------------------------------------
# Built-in problems.
# ---------------------------------------------------------------------------

def _dirichlet_laplacian(n: int) -> OperatorSpectrum:
    i = np.arange(1, n + 1, dtype=np.float64)
    lam = np.pi**2 * i**2
    return OperatorSpectrum(lambdas=lam, tail=float(np.pi**2 * (n + 1) ** 2))

def _power_law_noise(k: int, rho_q: float) -> QSpectrum:
    j = np.arange(1, k + 1, dtype=np.float64)
    return QSpectrum(etas=j ** (-rho_q), tail=float((k + 1) ** (-rho_q)))

def _default_initial(n: int) -> np.ndarray:
    init = np.zeros(n)
    init[0] = 0.5 / math.sqrt(2.0)  # 0.5 * sin(pi x) against the orthonormal basis
    return init

def _saturating_drift(x, v):
    return 1.0 - v / (1.0 + v**2)


def default_nx(n: int, k: int) -> int:
    return max(2 * max(n, k), 128)


def _build_heatmul(n: int, k: int, nx: Optional[int], ov: dict) -> ProblemSpec:
    sigma = float(ov.pop("sigma", 0.1))
    params = RegularityParams(
        gamma=float(ov.pop("gamma", 0.5)),
        beta=float(ov.pop("beta", 0.0)),
        alpha=float(ov.pop("alpha", 0.5)),
        delta=float(ov.pop("delta", 0.25)),
        theta=float(ov.pop("theta", 0.25)),
        rho_a=float(ov.pop("rho_a", 2.0)),
        rho_q=float(ov.pop("rho_q", 2.0)),
    )
    horizon = float(ov.pop("T", 1.0))
    grid = SineGrid.build(max(n, k), nx or default_nx(n, k))

    def b(x, v):
        return sigma * np.sqrt(1.0 + v**2)

    def db(x, v):
        return sigma * v / np.sqrt(1.0 + v**2)

    return ProblemSpec(
        name="heatmul",
        a_spec=_dirichlet_laplacian(n),
        q_spec=_power_law_noise(k, params.rho_q),
        params=params,
        horizon=horizon,
        initial=_default_initial(n),
        grid=grid,
        drift=_saturating_drift,
        diffusion=NemytskijDiffusion(b=b, db=db),
        drift_lipschitz=1.0,
    )


def _build_rankone(n: int, k: int, nx: Optional[int], ov: dict) -> ProblemSpec:
    params = RegularityParams(
        gamma=float(ov.pop("gamma", 0.5)),
        beta=float(ov.pop("beta", 0.0)),
        alpha=float(ov.pop("alpha", 0.5)),
        delta=float(ov.pop("delta", 0.25)),
        theta=float(ov.pop("theta", 0.25)),
        rho_a=float(ov.pop("rho_a", 2.0)),
        rho_q=float(ov.pop("rho_q", 2.0)),
    )
    horizon = float(ov.pop("T", 1.0))
    grid = SineGrid.build(max(n, k), nx or default_nx(n, k))
    psi = 2.0 ** (-np.arange(1, k + 1, dtype=np.float64))
    return ProblemSpec(
        name="rankone",
        a_spec=_dirichlet_laplacian(n),
        q_spec=_power_law_noise(k, params.rho_q),
        params=params,
        horizon=horizon,
        initial=_default_initial(n),
        grid=grid,
        drift=_saturating_drift,
        diffusion=RankOneDiffusion(psi=psi, g=np.sin, dg=np.cos),
        drift_lipschitz=1.0,
    )


def _build_noncomm(n: int, k: int, nx: Optional[int], ov: dict) -> ProblemSpec:
    params = RegularityParams()
    horizon = float(ov.pop("T", 1.0))
    grid = SineGrid.build(max(n, k), nx or default_nx(n, k))
    return ProblemSpec(
        name="noncomm",
        a_spec=_dirichlet_laplacian(n),
        q_spec=_power_law_noise(k, params.rho_q),
        params=params,
        horizon=horizon,
        initial=_default_initial(n),
        grid=grid,
        drift=_saturating_drift,
        diffusion=SkewDiffusion(),
        drift_lipschitz=1.0,
    )


_BUILDERS = {
    "heatmul": _build_heatmul,
    "rankone": _build_rankone,
    "noncomm": _build_noncomm,
}


def problem_ids() -> tuple[str, ...]:
    return tuple(sorted(_BUILDERS))


def build_problem(name: str, n: int, k: int, *, nx: Optional[int] = None,
                  overrides: Optional[dict] = None) -> ProblemSpec:
    """Instantiate a built-in problem at resolution ``(n, k)``.

    ``overrides`` may adjust scalar knobs (sigma, T, gamma, beta, alpha,
    delta, theta, rho_a, rho_q); unknown keys raise.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ProblemError(
            f"unknown problem {name!r}; built-ins: {', '.join(problem_ids())}"
        ) from None
    if n < 1 or k < 1:
        raise ProblemError(f"resolutions must be >= 1, got N={n}, K={k}")
    ov = dict(overrides or {})
    spec = builder(n, k, nx, ov)
    if ov:
        raise ProblemError(f"unknown overrides for {name!r}: {sorted(ov)}")
    return spec
