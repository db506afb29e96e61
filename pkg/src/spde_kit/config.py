"""Run configuration: TOML files merged with command-line overrides.

A config file has up to four sections, all optional::

    [problem]
    id = "heatmul"          # heatmul | rankone | noncomm
    N = 16
    K = 16
    sigma = 0.1             # any builder knob: sigma, T, gamma, beta, alpha,
    T = 1.0                 # delta, theta, rho_a, rho_q

    [schemes]
    ids = ["dfm", "mil"]
    dfmm_bbar_convention = "paper"   # or "aligned"
    q_euler = 0.5                    # temporal exponent assumed for LIE/EES

    [experiment]
    M = 256                 # single-run step count (simulate)
    M_values = [8, 16, 32, 64, 128, 256]
    M_ref = 4096
    N_ref = 16
    K_ref = 16
    ref_scheme = "dfm"
    paths = 100
    seed = 0
    chunk = 250
    output = "errors.csv"

    [cost]
    budgets = [1e3, 1e6]
    unit_cost = 1.0

Command-line flags override keys of the same name; unknown sections or keys
are rejected rather than silently ignored.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

from .costs import SchemeId
from .schemes import DFMM_CONVENTIONS

DEFAULT_M_VALUES = (8, 16, 32, 64, 128, 256)
DEFAULT_BUDGETS = (1e3, 1e6)


class ConfigError(ValueError):
    """Unreadable, unparseable, or ill-typed run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Fully-resolved settings shared by all subcommands."""

    problem: str = "heatmul"
    n: int = 16
    k: int = 16
    overrides: dict = field(default_factory=dict)
    schemes: tuple = ("dfm",)
    dfmm_convention: str = "paper"
    q_euler: Optional[float] = None
    m: int = 256
    m_values: tuple = DEFAULT_M_VALUES
    m_ref: int = 4096
    n_ref: Optional[int] = None
    k_ref: Optional[int] = None
    ref_scheme: str = "dfm"
    paths: int = 100
    seed: int = 0
    chunk: int = 250
    output: Optional[str] = None
    budgets: tuple = DEFAULT_BUDGETS
    unit_cost: float = 1.0

    def __post_init__(self):
        if not self.schemes:
            raise ConfigError("scheme list must not be empty")
        schemes = tuple(_parse_scheme(s) for s in self.schemes)
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "ref_scheme", _parse_scheme(self.ref_scheme))
        if self.dfmm_convention not in DFMM_CONVENTIONS:
            raise ConfigError(
                f"dfmm_bbar_convention must be one of {DFMM_CONVENTIONS}, "
                f"got {self.dfmm_convention!r}"
            )
        for name in ("n", "k", "m", "m_ref", "chunk"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.paths < 1:
            raise ConfigError(f"paths must be >= 1, got {self.paths}")
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _parse_scheme(s) -> str:
    try:
        return SchemeId.parse(s).value
    except Exception as exc:
        raise ConfigError(str(exc)) from None


def _typed(section: str, key: str, value, kind):
    try:
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind is list:
            if not isinstance(value, list):
                raise TypeError
            return list(value)
    except TypeError:
        pass
    raise ConfigError(
        f"[{section}] {key} must be a {kind.__name__}, got {value!r}"
    )


def _take(section_name: str, section: dict, key: str, kind, default):
    if key not in section:
        return default
    return _typed(section_name, key, section.pop(key), kind)


def load_config(path: Optional[str]) -> RunConfig:
    """Load a TOML run configuration; ``None`` yields pure defaults."""
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None

    unknown_sections = set(doc) - {"problem", "schemes", "experiment", "cost"}
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
    for name, section in doc.items():
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a section, got {section!r}")

    kw: dict = {}

    sec = dict(doc.get("problem", {}))
    kw["problem"] = _take("problem", sec, "id", str, RunConfig.problem)
    kw["n"] = _take("problem", sec, "N", int, RunConfig.n)
    kw["k"] = _take("problem", sec, "K", int, RunConfig.k)
    overrides = {}
    for key in list(sec):
        overrides[key] = _typed("problem", key, sec.pop(key), float)
    kw["overrides"] = overrides

    sec = dict(doc.get("schemes", {}))
    ids = _take("schemes", sec, "ids", list, None)
    if ids is not None:
        kw["schemes"] = tuple(_typed("schemes", "ids", s, str) for s in ids)
    kw["dfmm_convention"] = _take(
        "schemes", sec, "dfmm_bbar_convention", str, RunConfig.dfmm_convention
    )
    if "q_euler" in sec:
        kw["q_euler"] = _typed("schemes", "q_euler", sec.pop("q_euler"), float)
    if sec:
        raise ConfigError(f"unknown keys in [schemes]: {sorted(sec)}")

    sec = dict(doc.get("experiment", {}))
    kw["m"] = _take("experiment", sec, "M", int, RunConfig.m)
    mv = _take("experiment", sec, "M_values", list, None)
    if mv is not None:
        kw["m_values"] = tuple(_typed("experiment", "M_values", m, int) for m in mv)
    kw["m_ref"] = _take("experiment", sec, "M_ref", int, RunConfig.m_ref)
    kw["n_ref"] = _take("experiment", sec, "N_ref", int, None)
    kw["k_ref"] = _take("experiment", sec, "K_ref", int, None)
    kw["ref_scheme"] = _take("experiment", sec, "ref_scheme", str, RunConfig.ref_scheme)
    kw["paths"] = _take("experiment", sec, "paths", int, RunConfig.paths)
    kw["seed"] = _take("experiment", sec, "seed", int, RunConfig.seed)
    kw["chunk"] = _take("experiment", sec, "chunk", int, RunConfig.chunk)
    kw["output"] = _take("experiment", sec, "output", str, None)
    if sec:
        raise ConfigError(f"unknown keys in [experiment]: {sorted(sec)}")

    sec = dict(doc.get("cost", {}))
    budgets = _take("cost", sec, "budgets", list, None)
    if budgets is not None:
        kw["budgets"] = tuple(
            _typed("cost", "budgets", b, float) for b in budgets
        )
    kw["unit_cost"] = _take("cost", sec, "unit_cost", float, RunConfig.unit_cost)
    if sec:
        raise ConfigError(f"unknown keys in [cost]: {sorted(sec)}")

    return RunConfig(**kw)


def apply_flags(cfg: RunConfig, args) -> RunConfig:
    """Overlay parsed command-line flags (``None`` means "not given")."""
    changes: dict = {}
    if getattr(args, "problem", None) is not None:
        changes["problem"] = args.problem
    if getattr(args, "scheme", None) is not None:
        changes["schemes"] = tuple(s for s in args.scheme.split(",") if s)
    if getattr(args, "n", None) is not None:
        changes["n"] = args.n
    if getattr(args, "k", None) is not None:
        changes["k"] = args.k
    if getattr(args, "m", None) is not None:
        changes["m"] = args.m
        changes["m_values"] = (args.m,)
    if getattr(args, "paths", None) is not None:
        changes["paths"] = args.paths
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        changes["output"] = args.out
    try:
        return cfg.replace(**changes) if changes else cfg
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_threads(flag_value: Optional[int]) -> int:
    """Worker threads: the --threads flag, else SPDE_KIT_THREADS, else 1."""
    if flag_value is not None:
        value = flag_value
    else:
        raw = os.environ.get("SPDE_KIT_THREADS", "").strip()
        if not raw:
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(
                f"SPDE_KIT_THREADS must be an integer, got {raw!r}"
            ) from None
    if value < 1:
        raise ConfigError(f"thread count must be >= 1, got {value}")
    return value
