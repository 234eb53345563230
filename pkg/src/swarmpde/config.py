"""Run configuration: JSON schema, validation, and pipeline assembly.

A configuration round-trips losslessly through ``to_dict``/``from_dict``;
``config_hash`` is the sha256 of the canonical JSON.  Validation collects
every violation before failing so a bad file reports all problems at
once.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace
from typing import Optional

import numpy as np

from .age_discretization import AgeGrid, age_average_initial, build_age_grid, regularize
from .errors import ConfigInvalid
from .model_spec import (
    ModelSpec,
    Zeta1Evaluator,
    exponential_family,
    tabulated_function,
    validate_hypotheses,
    zeta1_prime,
)
from .solver_core import RunSetup
from .spatial_grid import SpatialGrid

__all__ = [
    "ModelConfig",
    "DomainConfig",
    "InitialConfig",
    "TimeConfig",
    "DiagnosticsConfig",
    "OutputConfig",
    "RunConfig",
    "SweepPlan",
    "parse_config",
    "config_hash",
    "build_model_spec",
    "build_spatial_grid",
    "build_initial_data",
    "build_run_setup",
    "build_sweep_plan",
]


@dataclass(frozen=True)
class ModelConfig:
    family: str = "exponential"
    m0: float = 1.0
    tau: float = 2.0
    mu: float = 0.3
    D0: float = 0.1
    theta: float = 2.0
    drift: str = "dprime"          # "dprime" or "none"
    xi0: float = 0.4
    xi_support: tuple = (0.2, 2.0)
    g0: Optional[float] = None     # default 1/tau
    a_max_hint: float = 4.0
    tables: dict = field(default_factory=dict)  # name -> CSV path (tables family)


@dataclass(frozen=True)
class DomainConfig:
    dim: int = 1
    extents: tuple = (1.0,)
    cells: tuple = (128,)


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "cosine_bump"      # or "zero"
    u_amp: float = 0.8
    u_age_scale: float = 0.5
    u_age_cut: tuple = (0.6, 1.0)
    u_cos_eps: float = 0.4
    u_cos_k: int = 1
    v_amp: float = 0.3
    v_cos_eps: float = 0.5
    v_cos_k: int = 1


@dataclass(frozen=True)
class TimeConfig:
    T: float = 2.0
    sample_dt: float = 0.02
    fixed_dt: Optional[float] = None


@dataclass(frozen=True)
class DiagnosticsConfig:
    tail_A: tuple = (2.0,)
    test_k_max: int = 2
    weak_residual: bool = False
    store_u: bool = True


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    write_snapshots: bool = False
    snapshot_stride: int = 10      # in units of sample_dt


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    alpha: float = 0.125
    a_max: float = 4.0
    domain: DomainConfig = field(default_factory=DomainConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    crossval_tolerance: float = 0.05

    def to_dict(self) -> dict:
        return _asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        return _from_dict(data)


_SECTIONS = {
    "model": ModelConfig,
    "domain": DomainConfig,
    "initial": InitialConfig,
    "time": TimeConfig,
    "diagnostics": DiagnosticsConfig,
    "output": OutputConfig,
}

_TUPLE_FIELDS = {"xi_support", "extents", "cells", "u_age_cut", "tail_A"}


def _asdict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = _asdict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def _coerce_section(cls, data: dict, prefix: str, problems: list):
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            problems.append(f"{prefix}{key}: unknown field")
            continue
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{prefix[:-1] or 'config'}: {exc}")
        return cls()


def _from_dict(data: dict) -> RunConfig:
    problems: list = []
    if not isinstance(data, dict):
        raise ConfigInvalid(["configuration root must be a JSON object"])
    top_known = {f.name for f in dataclasses.fields(RunConfig)}
    kwargs = {}
    for key, value in data.items():
        if key not in top_known:
            problems.append(f"{key}: unknown field")
            continue
        if key in _SECTIONS:
            if not isinstance(value, dict):
                problems.append(f"{key}: must be an object")
                continue
            kwargs[key] = _coerce_section(_SECTIONS[key], value, f"{key}.", problems)
        else:
            kwargs[key] = value
    try:
        cfg = RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(str(exc))
        cfg = None
    if cfg is not None:
        problems.extend(_validate(cfg))
    if problems:
        raise ConfigInvalid(problems)
    return cfg


def _validate(cfg: RunConfig) -> list:
    p = []
    m = cfg.model
    if m.family not in ("exponential", "tables"):
        p.append(f"model.family: unknown model family {m.family!r}")
    if not 0.0 < cfg.alpha < 1.0:
        p.append("alpha: must be in (0, 1)")
    if cfg.a_max < cfg.alpha:
        p.append("a_max: must be at least alpha")
    if cfg.domain.dim not in (1, 2):
        p.append("domain.dim: must be 1 or 2")
    if len(cfg.domain.extents) != cfg.domain.dim or len(cfg.domain.cells) != cfg.domain.dim:
        p.append("domain: extents/cells length must equal dim")
    if any(c < 8 for c in cfg.domain.cells):
        p.append("domain.cells: need at least 8 cells per axis")
    if any(e <= 0 for e in cfg.domain.extents):
        p.append("domain.extents: must be positive")
    if cfg.time.T <= 0.0:
        p.append("time.T: must be positive")
    if cfg.time.sample_dt <= 0.0 or cfg.time.sample_dt > cfg.time.T:
        p.append("time.sample_dt: must be in (0, T]")
    if cfg.time.fixed_dt is not None and cfg.time.fixed_dt <= 0.0:
        p.append("time.fixed_dt: must be positive when set")
    if m.family == "exponential":
        if m.m0 <= 0.0 or m.tau <= 0.0:
            p.append("model: m0 and tau must be positive")
        if m.mu < 0.0:
            p.append("model.mu: must be nonnegative")
        if m.D0 <= 0.0:
            p.append("model.D0: must be positive (degenerate-everywhere "
                     "diffusion is not supported)")
        if m.theta != 0.0 and m.theta < 1.0:
            p.append("model.theta: must be 0 or >= 1")
        if m.drift not in ("dprime", "none"):
            p.append("model.drift: must be 'dprime' or 'none'")
        g0 = m.g0 if m.g0 is not None else 1.0 / m.tau if m.tau > 0 else math.inf
        if m.xi0 < 0.0 or m.xi0 > g0 + 1e-12:
            p.append("model.xi0: must lie in [0, g0]")
        if not (len(m.xi_support) == 2 and m.xi_support[0] < m.xi_support[1]):
            p.append("model.xi_support: must be an increasing pair")
    if m.family == "tables":
        for name in ("lam", "b", "mu", "D"):
            if name not in m.tables:
                p.append(f"model.tables.{name}: required for the tables family")
    if cfg.initial.kind not in ("cosine_bump", "zero"):
        p.append("initial.kind: must be 'cosine_bump' or 'zero'")
    if abs(cfg.initial.u_cos_eps) > 1.0 or abs(cfg.initial.v_cos_eps) > 1.0:
        p.append("initial: cosine amplitudes must lie in [-1, 1]")
    for A in cfg.diagnostics.tail_A:
        if A < 4.0 * cfg.alpha:
            p.append(f"diagnostics.tail_A: {A:g} is below 4*alpha")
    if cfg.diagnostics.test_k_max < 0:
        p.append("diagnostics.test_k_max: must be >= 0")
    if cfg.output.snapshot_stride < 1:
        p.append("output.snapshot_stride: must be >= 1")
    return p


def parse_config(path) -> RunConfig:
    """Load and validate a JSON configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid([f"config file {path} does not exist"])
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([f"invalid JSON: {exc}"]) from exc
    return RunConfig.from_dict(data)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# pipeline assembly

def build_model_spec(cfg: RunConfig) -> ModelSpec:
    m = cfg.model
    if m.family == "exponential":
        return exponential_family(
            m0=m.m0, tau=m.tau, mu_const=m.mu, D0=m.D0, theta=m.theta,
            xi0=m.xi0, xi_support=tuple(m.xi_support),
            g0=m.g0, drift=m.drift, a_max_hint=m.a_max_hint,
        )
    # tables family: 1D piecewise-linear coefficient tables from CSV
    funcs = {}
    for name, path in m.tables.items():
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        funcs[name] = tabulated_function(data[:, 0], data[:, 1])
    Dfun = funcs["D"]
    if "E" in funcs:
        Etab = funcs["E"]

        def Efun(r, s):
            return np.asarray(Etab(r), dtype=float) * np.ones_like(np.asarray(s, dtype=float))
    else:
        def Efun(r, s):
            return np.zeros(np.broadcast(np.asarray(r), np.asarray(s)).shape)

    if "xi" in funcs:
        xitab = funcs["xi"]

        def xifun(s):
            s = np.asarray(s, dtype=float)
            return np.where(s > 0.0, np.asarray(xitab(s), dtype=float), 0.0)
    else:
        def xifun(s):
            return np.zeros_like(np.asarray(s, dtype=float))

    if "g" in funcs:
        gfun = funcs["g"]
    else:
        def gfun(s):
            return np.full_like(np.asarray(s, dtype=float), 1.0 / m.tau)

    # the induced transform of D serves as the drift transform
    z2_eval = Zeta1Evaluator(SimpleNamespace(D=Dfun), max(8.0, 2.0 / cfg.alpha))
    proxy = SimpleNamespace(D=Dfun)

    def z2p(r):
        return zeta1_prime(proxy, r)

    return ModelSpec(
        lam=funcs["lam"], b=funcs["b"], mu=funcs["mu"], D=Dfun, E=Efun,
        g=gfun, xi=xifun, zeta2=z2_eval, zeta2_prime=z2p,
        tau=m.tau, a_max_hint=m.a_max_hint,
    )


def build_spatial_grid(cfg: RunConfig) -> SpatialGrid:
    return SpatialGrid(extents=cfg.domain.extents, cells=cfg.domain.cells)


def _space_profile(coords: np.ndarray, extents, eps: float, k: int) -> np.ndarray:
    out = np.ones(coords.shape[0])
    if eps != 0.0 and k != 0:
        for ax in range(coords.shape[1]):
            out = out * (1.0 + eps * np.cos(k * math.pi * coords[:, ax] / extents[ax]))
    return out


def build_initial_data(cfg: RunConfig, sgrid: SpatialGrid):
    """Initial swarmer profile (age x space callable) and swimmer field."""
    ic = cfg.initial
    if ic.kind == "zero":
        def u0(a, coords):
            return np.zeros(coords.shape[0])

        v0 = np.zeros(sgrid.shape)
        return u0, v0

    from .model_spec import smoothstep

    lo, hi = ic.u_age_cut

    def age_profile(a):
        a = np.asarray(a, dtype=float)
        return np.exp(-a / ic.u_age_scale) * (1.0 - smoothstep((a - lo) / (hi - lo)))

    def u0(a, coords):
        return ic.u_amp * float(age_profile(a)) \
            * _space_profile(coords, sgrid.extents, ic.u_cos_eps, ic.u_cos_k)

    coords = sgrid.centers()
    v0 = ic.v_amp * _space_profile(coords, sgrid.extents, ic.v_cos_eps, ic.v_cos_k)
    return u0, v0.reshape(sgrid.shape)


def build_run_setup(cfg: RunConfig, check_hypotheses: bool = True):
    """Assemble every pipeline object for a run.

    Returns (RunSetup, HypothesisReport or None).  Hypothesis validation
    runs over the regularization box [0, 1/alpha] and the configured age
    range and rejects fully degenerate diffusion.
    """
    spec = build_model_spec(cfg)
    report = None
    if check_hypotheses:
        report = validate_hypotheses(
            spec, R_max=1.0 / cfg.alpha, A_max=cfg.a_max, n_samples=128
        )
    sgrid = build_spatial_grid(cfg)
    agegrid = build_age_grid(spec, cfg.alpha, cfg.a_max)
    reg = regularize(spec, cfg.alpha)
    u0_fun, v0 = build_initial_data(cfg, sgrid)
    u0 = age_average_initial(u0_fun, agegrid, sgrid)
    setup = RunSetup(
        spec=spec, agegrid=agegrid, reg=reg, sgrid=sgrid,
        u0=u0, v0=v0, T=cfg.time.T, sample_dt=cfg.time.sample_dt,
        tail_A=tuple(cfg.diagnostics.tail_A), fixed_dt=cfg.time.fixed_dt,
        store_u=cfg.diagnostics.store_u,
    )
    return setup, report


@dataclass(frozen=True)
class SweepPlan:
    """Refinement ladder: decreasing bin widths with mesh linked to them."""

    alphas: tuple
    base_cells: tuple
    base_alpha: float

    def __post_init__(self):
        if len(self.alphas) < 3:
            raise ConfigInvalid(["sweep: need at least 3 alpha levels"])
        if any(a2 >= a1 for a1, a2 in zip(self.alphas, self.alphas[1:])):
            raise ConfigInvalid(["sweep: alpha levels must be strictly decreasing"])

    def cells_for(self, alpha: float) -> tuple:
        factor = self.base_alpha / alpha
        cells = tuple(int(round(c * factor)) for c in self.base_cells)
        return cells


def build_sweep_plan(cfg: RunConfig, levels: int = 3) -> SweepPlan:
    alphas = tuple(cfg.alpha / 2.0**k for k in range(levels))
    return SweepPlan(alphas=alphas, base_cells=cfg.domain.cells, base_alpha=cfg.alpha)


def config_for_level(cfg: RunConfig, plan: SweepPlan, alpha: float) -> RunConfig:
    return dataclasses.replace(
        cfg,
        alpha=alpha,
        domain=dataclasses.replace(cfg.domain, cells=plan.cells_for(alpha)),
    )
