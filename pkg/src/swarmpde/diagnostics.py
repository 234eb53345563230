"""Runtime diagnostics: every a-priori bound of the analysis, measured.

Each sampled quantity (b-weighted mass, lam-weighted entropy, dissipation
integrals, sup norms, age tails, the biomass identity gap) comes with a
Gronwall envelope rebuilt from the constants measured on the actual
coefficient arrays, so each estimate becomes an assertable per-run
inequality: envelope minus observation is the margin, and a negative
margin is a bug somewhere.

The weak-formulation residual evaluates the defining integral identity of
the continuous problem on the discrete trajectory against a catalogue of
tensor test functions (time bump x age bump x Neumann cosine); it must
shrink under simultaneous refinement of bin width, mesh and step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .age_discretization import AgeGrid, RegularizedModel, entropy_phi
from .errors import InadmissibleTestFunction, NegativeField
from .model_spec import (
    ModelSpec,
    Zeta1Evaluator,
    estimate_kappas,
    smoothstep,
    smoothstep_prime,
    zeta1_prime,
)
from .spatial_grid import SpatialGrid, grad_cell, grad_sq, grad_sq_root, laplacian

__all__ = [
    "DiagnosticsRecord",
    "DiagnosticsRecorder",
    "EnvelopeMargin",
    "TestFunction",
    "WeakResidualResult",
    "mass_b",
    "entropy",
    "dissipation",
    "tail_mass",
    "comparison_bound",
    "envelope_check",
    "envelope_report",
    "ENVELOPE_NAMES",
    "make_test_functions",
    "weak_residual",
]

ENVELOPE_NAMES = (
    "mass", "linf", "entropy", "dissipation",
    "grad_zeta1", "grad_zeta2", "kbound", "tail", "delta_v",
)


# --------------------------------------------------------------------------
# instantaneous quantities

def mass_b_integrand(state, grid: AgeGrid) -> np.ndarray:
    """Cellwise alpha * sum_i b_i u_i + v."""
    I = grid.I
    return grid.alpha * np.tensordot(grid.b[:I], state.u, axes=(0, 0)) + state.v


def mass_b(state, grid: AgeGrid, sgrid: SpatialGrid) -> float:
    return float(np.sum(mass_b_integrand(state, grid))) * sgrid.cell_volume


def entropy_integrand(state, grid: AgeGrid) -> np.ndarray:
    """Cellwise alpha * sum_i lam_i phi(u_i)."""
    I = grid.I
    phi = entropy_phi(np.maximum(state.u, 0.0))
    return grid.alpha * np.tensordot(grid.lam[:I], phi, axes=(0, 0))


def entropy(state, grid: AgeGrid, sgrid: SpatialGrid) -> float:
    """lam-weighted entropy sum_i alpha lam_i integral phi(u_i)."""
    if float(state.u.min()) < -1e-12:
        raise NegativeField("entropy needs nonnegative bin densities")
    return float(np.sum(entropy_integrand(state, grid))) * sgrid.cell_volume


def dissipation(state, grid: AgeGrid, reg: RegularizedModel, sgrid: SpatialGrid,
                zeta1_eval: Callable, spec: ModelSpec) -> tuple:
    """Instantaneous dissipation integrands.

    Returns (d_u, d_E, gz1, gz2): the lam-weighted sqrt-gradient term with
    the regularized diffusivity, the drift term E |grad biomass|^2, and the
    squared gradients of both transforms of the biomass.  Transform
    gradients difference the transformed cell values, matching how the
    limit objects are defined.
    """
    if float(state.u.min()) < -1e-12:
        raise NegativeField("dissipation needs nonnegative bin densities")
    I, vol = grid.I, sgrid.cell_volume
    lam = state.lambda_rec
    Da = reg.D_alpha(lam)
    gsq = grad_sq_root(np.maximum(state.u, 0.0), sgrid)  # (I, *cells)
    weights = grid.alpha * grid.lam[:I]
    d_u = float(np.sum(np.tensordot(weights, gsq, axes=(0, 0)) * Da)) * vol
    d_E = float(np.sum(reg.E_alpha(lam, state.v) * grad_sq(lam, sgrid))) * vol
    gz1 = float(np.sum(grad_sq(zeta1_eval(lam), sgrid))) * vol
    gz2 = float(np.sum(grad_sq(np.asarray(spec.zeta2(lam), dtype=float), sgrid))) * vol
    return d_u, d_E, gz1, gz2


def tail_integrand(state, A: float, grid: AgeGrid) -> np.ndarray:
    """Cellwise b-weighted density in bins entirely above age A."""
    if A < 4.0 * grid.alpha:
        raise ValueError("tail age A must be at least 4*alpha")
    I = grid.I
    sel = np.arange(1, I + 1) * grid.alpha > A
    if not np.any(sel):
        return np.zeros(state.u.shape[1:])
    return grid.alpha * np.tensordot(grid.b[:I][sel], state.u[sel], axes=(0, 0))


def tail_mass(state, A: float, grid: AgeGrid, sgrid: SpatialGrid) -> float:
    """b-weighted mass in bins entirely above age A."""
    return float(np.sum(tail_integrand(state, A, grid))) * sgrid.cell_volume


def _eta_weights(grid: AgeGrid, A: float) -> tuple:
    # non-decreasing weights, zero on the first bin, one above age A
    ks = np.arange(1, grid.I + 2)
    eta = smoothstep((ks * grid.alpha / A - 0.5) / 0.5)
    eta_star = (eta[1:] - eta[:-1]) / grid.alpha
    return eta, float(np.max(np.abs(eta_star), initial=0.0))


def eta_tail(state, A: float, grid: AgeGrid, sgrid: SpatialGrid) -> float:
    """Smooth-weighted tail used by the tail envelope (dominates tail_mass)."""
    eta, _ = _eta_weights(grid, A)
    I = grid.I
    u_sums = state.u.reshape(I, -1).sum(axis=1) * sgrid.cell_volume
    return grid.alpha * float((eta[:I] * grid.b[:I]) @ u_sums)


def comparison_bound(t, alpha: float, Xi: float):
    """Cellwise upper bound for every bin density: 1/alpha^2 + Xi*t/alpha."""
    return 1.0 / alpha**2 + Xi * np.asarray(t, dtype=float) / alpha


# --------------------------------------------------------------------------
# record + recorder

_SERIES = (
    "t", "mass_b", "entropy", "dissipation_u", "dissipation_E",
    "grad_zeta1_sq", "grad_zeta2_sq", "linf_Lambda", "linf_v",
    "l2_Lambda", "l2_v", "delta_v_sq", "identity_residual",
    "max_u", "min_u", "min_v", "min_Lambda", "kbound_margin",
    "theta_activations", "conservation_residual",
)


@dataclass
class DiagnosticsRecord:
    """Time series of every instrumented estimate plus measured constants."""

    series: dict                     # name -> ndarray over sample times
    tail: dict                       # A -> ndarray
    eta_tail_series: dict            # A -> ndarray
    eta_star_inf: dict               # A -> float
    constants: dict                  # measured constants for the envelopes
    K0: float
    min_u_run: float
    min_v_run: float
    theta_activations: int
    conservation_max: float
    courant_max: float
    grad_v0_sq: float

    @property
    def t(self) -> np.ndarray:
        return self.series["t"]

    def to_csv(self, path) -> None:
        names = list(_SERIES) + ["delta_v_accum"]
        cols = [self.series[n] for n in names]
        for A in sorted(self.tail):
            names.append(f"tail_{A:g}")
            cols.append(self.tail[A])
        for A in sorted(self.eta_tail_series):
            names.append(f"eta_tail_{A:g}")
            cols.append(self.eta_tail_series[A])
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(names) + "\n")
            for k in range(self.t.size):
                fh.write(",".join(f"{c[k]:.17g}" for c in cols) + "\n")

    def summary_dict(self) -> dict:
        margins = envelope_report(self)
        return {
            "K0": self.K0,
            "constants": {k: self.constants[k] for k in sorted(self.constants)},
            "margins": {
                name: (None if m.skipped else m.margin) for name, m in margins.items()
            },
            "min_u": self.min_u_run,
            "min_v": self.min_v_run,
            "theta_activations": self.theta_activations,
            "conservation_max": self.conservation_max,
            "final_identity_residual": float(self.series["identity_residual"][-1]),
        }


class DiagnosticsRecorder:
    """Accumulates per-sample diagnostics during a run."""

    def __init__(self, spec: ModelSpec, grid: AgeGrid, reg: RegularizedModel,
                 sgrid: SpatialGrid, tail_A: Sequence[float] = ()):
        self.spec, self.grid, self.reg, self.sgrid = spec, grid, reg, sgrid
        self.tail_A = tuple(float(A) for A in tail_A)
        for A in self.tail_A:
            if A < 4.0 * grid.alpha:
                raise ValueError("every tail age must be at least 4*alpha")
        self._rows = {name: [] for name in _SERIES}
        self._tail = {A: [] for A in self.tail_A}
        self._eta = {A: [] for A in self.tail_A}
        self._eta_star = {A: _eta_weights(grid, A)[1] for A in self.tail_A}
        self._K0 = math.nan
        self._min_u = math.inf
        self._min_v = math.inf
        self._theta = 0
        self._cons = 0.0
        self._courant = 0.0
        self._grad_v0 = math.nan
        self._zeta1_rmax = 2.0
        self._zeta1 = Zeta1Evaluator(spec, self._zeta1_rmax)
        # sup of g over the regularization box stands in for its global sup
        s = reg.clamp * np.arange(0, 1025) / 1024.0
        g_inf = float(np.max(np.abs(np.asarray(spec.g(s), dtype=float))))
        I = grid.I
        self.constants = {
            "alpha": grid.alpha,
            "ell": grid.ell,
            "B": grid.B,
            "L": grid.L,
            "M": grid.M,
            "beta": grid.beta,
            "beta_v": float(np.max(grid.mu[:I] * grid.b[:I] / grid.lam[:I])),
            "beta_lam": float(np.max(grid.lam / grid.b)),
            "lam1": float(grid.lam[0]),
            "b1": float(grid.b[0]),
            "Xi": reg.Xi,
            "g_inf": g_inf,
            "volume": sgrid.cell_volume * sgrid.ncells,
        }

    def set_K0(self, value: float) -> None:
        self._K0 = float(value)

    def _zeta1_for(self, lam_max: float) -> Callable:
        if lam_max > 0.9 * self._zeta1_rmax:
            while lam_max > 0.9 * self._zeta1_rmax:
                self._zeta1_rmax *= 2.0
            self._zeta1 = Zeta1Evaluator(self.spec, self._zeta1_rmax)
        return self._zeta1

    def on_step(self, sres) -> None:
        self._min_u = min(self._min_u, sres.min_cell)
        self._min_v = min(self._min_v, sres.min_cell)
        self._cons = max(self._cons, sres.conservation_residual)
        self._courant = max(self._courant, sres.courant)

    def sample(self, state) -> None:
        grid, reg, sgrid = self.grid, self.reg, self.sgrid
        vol = sgrid.cell_volume
        lam = state.lambda_rec
        z1 = self._zeta1_for(float(lam.max(initial=0.0)))
        d_u, d_E, gz1, gz2 = dissipation(state, grid, reg, sgrid, z1, self.spec)
        lap_v = laplacian(state.v, sgrid)
        max_u = float(state.u.max(initial=0.0))
        rows = self._rows
        rows["t"].append(state.t)
        rows["mass_b"].append(mass_b(state, grid, sgrid))
        rows["entropy"].append(entropy(state, grid, sgrid))
        rows["dissipation_u"].append(d_u)
        rows["dissipation_E"].append(d_E)
        rows["grad_zeta1_sq"].append(gz1)
        rows["grad_zeta2_sq"].append(gz2)
        rows["linf_Lambda"].append(float(np.max(np.abs(lam))))
        rows["linf_v"].append(float(np.max(np.abs(state.v))))
        rows["l2_Lambda"].append(math.sqrt(float(np.sum(lam * lam)) * vol))
        rows["l2_v"].append(math.sqrt(float(np.sum(state.v * state.v)) * vol))
        rows["delta_v_sq"].append(float(np.sum(lap_v * lap_v)) * vol)
        rows["identity_residual"].append(
            float(np.max(np.abs(state.lambda_rec - state.lambda_ev)))
        )
        rows["max_u"].append(max_u)
        rows["min_u"].append(float(state.u.min(initial=0.0)))
        rows["min_v"].append(float(state.v.min()))
        rows["min_Lambda"].append(float(lam.min()))
        rows["kbound_margin"].append(
            float(comparison_bound(state.t, grid.alpha, reg.Xi)) + 1e-10 - max_u
        )
        rows["theta_activations"].append(float(state.theta_activations))
        rows["conservation_residual"].append(self._cons)
        for A in self.tail_A:
            self._tail[A].append(tail_mass(state, A, grid, sgrid))
            self._eta[A].append(eta_tail(state, A, grid, sgrid))
        if state.t == 0.0 and math.isnan(self._grad_v0):
            self._grad_v0 = float(np.sum(grad_sq(state.v, sgrid))) * vol
        self._theta = state.theta_activations

    def finalize(self) -> DiagnosticsRecord:
        series = {k: np.asarray(v, dtype=float) for k, v in self._rows.items()}
        series["delta_v_accum"] = self.grid.alpha**2 * cumulative_trapezoid(
            series["delta_v_sq"], series["t"], initial=0.0
        )
        R_obs = max(
            float(np.max(series["linf_Lambda"], initial=0.0)),
            float(np.max(series["linf_v"], initial=0.0)),
            1e-6,
        )
        kap = estimate_kappas(self.spec, R_obs, 256)
        constants = dict(self.constants)
        constants["R_obs"] = R_obs
        constants["kappa2_Robs"] = kap.kappa2
        return DiagnosticsRecord(
            series=series,
            tail={A: np.asarray(v, dtype=float) for A, v in self._tail.items()},
            eta_tail_series={A: np.asarray(v, dtype=float) for A, v in self._eta.items()},
            eta_star_inf=dict(self._eta_star),
            constants=constants,
            K0=self._K0,
            min_u_run=self._min_u if math.isfinite(self._min_u) else 0.0,
            min_v_run=self._min_v if math.isfinite(self._min_v) else 0.0,
            theta_activations=self._theta,
            conservation_max=self._cons,
            courant_max=self._courant,
            grad_v0_sq=self._grad_v0 if math.isfinite(self._grad_v0) else 0.0,
        )


# --------------------------------------------------------------------------
# envelopes

@dataclass(frozen=True)
class EnvelopeMargin:
    name: str
    margin: float
    t_at_min: float
    skipped: bool = False
    note: str = ""
    envelope: Optional[np.ndarray] = None
    observed: Optional[np.ndarray] = None


def _expm1_over(x):
    # expm1(x)/x with the x -> 0 limit
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-12
    return np.where(small, 1.0, np.expm1(np.where(small, 1.0, x)) / np.where(small, 1.0, x))


def _margin(name, t, envelope, observed, skipped=False, note="") -> EnvelopeMargin:
    gap = envelope - observed
    k = int(np.argmin(gap))
    return EnvelopeMargin(
        name=name, margin=float(gap[k]), t_at_min=float(t[k]),
        skipped=skipped, note=note, envelope=envelope, observed=observed,
    )


def envelope_check(record: DiagnosticsRecord, which: str) -> EnvelopeMargin:
    """Margin (envelope - observed, minimum over the run) for one estimate.

    Envelopes follow the first differential inequality of the matching
    proof, instantiated with the constants measured on the coefficient
    arrays and with observed trajectories inside the time integrals.
    Violations are reported, never raised.
    """
    c = record.constants
    s = record.series
    t = s["t"]
    alpha = c["alpha"]
    Lp = max(c["L"], 0.0)
    Bp = max(c["B"], 0.0)

    if which == "mass":
        gamma = c["b1"] * c["g_inf"] + Bp
        env = s["mass_b"][0] * np.exp(gamma * t)
        return _margin("mass", t, env, s["mass_b"])

    if which == "linf":
        int_lam = cumulative_trapezoid(s["linf_Lambda"], t, initial=0.0)
        int_v = cumulative_trapezoid(s["linf_v"], t, initial=0.0)
        env_v = (s["linf_v"][0] + c["beta_v"] * int_lam) * np.exp(c["g_inf"] * t)
        env_l = (s["linf_Lambda"][0] + c["lam1"] * c["g_inf"] * int_v) * np.exp(Lp * t)
        m_v = _margin("linf", t, env_v, s["linf_v"])
        m_l = _margin("linf", t, env_l, s["linf_Lambda"])
        return m_v if m_v.margin <= m_l.margin else m_l

    # entropy-family envelopes share the source constant
    H0 = s["entropy"][0]
    gamma2 = Lp + c["M"]
    phi_Xi = float(entropy_phi(np.asarray(c["Xi"])))
    mass_env_max = float(np.max(
        s["mass_b"][0] * np.exp((c["b1"] * c["g_inf"] + Bp) * t)
    ))
    C_H = c["lam1"] * max(1.0, phi_Xi) * c["volume"] + c["M"] * c["beta_lam"] * mass_env_max

    if which == "entropy":
        env = np.exp(gamma2 * t) * H0 + C_H * t * _expm1_over(gamma2 * t)
        return _margin("entropy", t, env, s["entropy"])

    if which in ("dissipation", "grad_zeta1", "grad_zeta2"):
        int_H = cumulative_trapezoid(s["entropy"], t, initial=0.0)
        d_env = H0 + C_H * t + gamma2 * int_H
        if which == "dissipation":
            obs = cumulative_trapezoid(
                4.0 * s["dissipation_u"] + s["dissipation_E"], t, initial=0.0
            )
            return _margin("dissipation", t, d_env, obs)
        if which == "grad_zeta1":
            obs = cumulative_trapezoid(s["grad_zeta1_sq"], t, initial=0.0)
            return _margin("grad_zeta1", t, d_env, obs)
        kappa2 = c.get("kappa2_Robs", math.nan)
        obs = cumulative_trapezoid(s["grad_zeta2_sq"], t, initial=0.0)
        if not math.isfinite(kappa2) or kappa2 <= 0.0:
            return EnvelopeMargin(
                name="grad_zeta2", margin=math.nan, t_at_min=float(t[0]),
                skipped=True, note="drift lower bound degenerate (kappa2 <= 0)",
            )
        return _margin("grad_zeta2", t, d_env / kappa2, obs)

    if which == "kbound":
        env = comparison_bound(t, alpha, c["Xi"]) + 1e-10
        return _margin("kbound", t, env, s["max_u"])

    if which == "tail":
        if not record.tail:
            return EnvelopeMargin("tail", math.nan, float(t[0]), skipped=True,
                                  note="no tail ages configured")
        c1_run = float(np.max(s["mass_b"]))
        best = None
        for A, Y in sorted(record.eta_tail_series.items()):
            growth = np.exp(Bp * t)
            env = growth * Y[0] + record.eta_star_inf[A] * (1.0 + Bp) * c1_run \
                * t * _expm1_over(Bp * t)
            m = _margin(f"tail_{A:g}", t, env, Y)
            if best is None or m.margin < best.margin:
                best = m
        return EnvelopeMargin("tail", best.margin, best.t_at_min,
                              envelope=best.envelope, observed=best.observed)

    if which == "delta_v":
        rhs = (c["g_inf"] * s["l2_v"] + c["beta_v"] * s["l2_Lambda"]) ** 2
        env = alpha * record.grad_v0_sq + cumulative_trapezoid(rhs, t, initial=0.0)
        obs = alpha**2 * cumulative_trapezoid(s["delta_v_sq"], t, initial=0.0)
        return _margin("delta_v", t, env, obs)

    raise ValueError(f"unknown estimate id {which!r}")


def envelope_report(record: DiagnosticsRecord) -> dict:
    return {name: envelope_check(record, name) for name in ENVELOPE_NAMES}


# --------------------------------------------------------------------------
# weak-formulation residual

@dataclass(frozen=True)
class TestFunction:
    """Tensor test function psi(t) * chi(a) * omega(x).

    psi and chi are compactly supported smooth bumps; omega is a product
    of axis cosines (mode 0 meaning the constant 1), which satisfies the
    zero-normal-derivative requirement exactly on box boundaries.
    """

    psi: Callable
    psi_prime: Callable
    t_support: float
    chi: Callable
    chi_prime: Callable
    a_support: float
    modes: tuple
    label: str = ""

    __test__ = False  # not a pytest item

    def omega(self, sgrid: SpatialGrid) -> np.ndarray:
        out = np.ones(sgrid.shape)
        for ax, k in enumerate(self.modes):
            if k == 0:
                continue
            x = sgrid.axis_centers(ax)
            shape = [1] * sgrid.dim
            shape[ax] = -1
            out = out * np.cos(k * math.pi * x / sgrid.extents[ax]).reshape(shape)
        return out

    def grad_omega(self, sgrid: SpatialGrid) -> list:
        comps = []
        for ax in range(sgrid.dim):
            k = self.modes[ax]
            if k == 0:
                comps.append(np.zeros(sgrid.shape))
                continue
            factor = np.ones(sgrid.shape)
            for ax2, k2 in enumerate(self.modes):
                x = sgrid.axis_centers(ax2)
                shape = [1] * sgrid.dim
                shape[ax2] = -1
                kk = k2 * math.pi / sgrid.extents[ax2]
                if ax2 == ax:
                    part = -kk * np.sin(kk * x)
                elif k2 != 0:
                    part = np.cos(kk * x)
                else:
                    continue
                factor = factor * part.reshape(shape)
            comps.append(factor)
        return comps

    def lap_omega(self, sgrid: SpatialGrid) -> np.ndarray:
        total = 0.0
        for ax, k in enumerate(self.modes):
            total += (k * math.pi / sgrid.extents[ax]) ** 2
        return -total * self.omega(sgrid)


def _falling_bump(hi: float) -> tuple:
    # 1 on [0, hi/2], quintic fall to 0 at hi, identically 0 beyond
    lo = 0.5 * hi

    def f(x):
        return 1.0 - smoothstep((np.asarray(x, dtype=float) - lo) / (hi - lo))

    def fp(x):
        return -smoothstep_prime((np.asarray(x, dtype=float) - lo) / (hi - lo)) / (hi - lo)

    return f, fp


def make_test_functions(T: float, age_cap: float, sgrid: SpatialGrid,
                            k_max: int = 4) -> list:
    """Fixed catalogue: time bump on [0, 0.9T], age bump on [0, 0.8*age_cap],
    cosine modes up to k_max per axis (tensor cosines in 2D)."""
    psi, psi_p = _falling_bump(0.9 * T)
    chi, chi_p = _falling_bump(0.8 * age_cap)
    out = []
    if sgrid.dim == 1:
        mode_list = [(k,) for k in range(0, k_max + 1)]
    else:
        mode_list = [(k, m) for k in range(0, k_max + 1) for m in range(0, k_max + 1)
                     if k + m <= k_max]
    for modes in mode_list:
        out.append(TestFunction(
            psi=psi, psi_prime=psi_p, t_support=0.9 * T,
            chi=chi, chi_prime=chi_p, a_support=0.8 * age_cap,
            modes=modes, label="x".join(f"k{m}" for m in modes),
        ))
    return out


@dataclass(frozen=True)
class WeakResidualResult:
    residual: float      # absolute value of the identity sum
    signed: float
    terms: dict


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _bin_integrals(f: Callable, alpha: float, I: int) -> np.ndarray:
    edges = alpha * np.arange(I + 1)
    a = edges[:-1, None] + (_GAUSS_NODES[None, :] + 1.0) * 0.5 * alpha
    vals = np.asarray(f(a), dtype=float)
    return (vals * _GAUSS_WEIGHTS[None, :]).sum(axis=1) * 0.5 * alpha


def _safe_ratios(spec: ModelSpec, lam: np.ndarray, v: np.ndarray, R_scale: float):
    # continuous-ratio evaluation with a relative floor where the transforms
    # degenerate; continuity of both ratios is part of the data assumptions
    floor = 1e-12 * max(R_scale, 1.0)
    rf = np.maximum(lam, floor)
    h = 1e-6 * max(R_scale, 1.0)
    Dp = (np.asarray(spec.D(rf + h), dtype=float)
          - np.asarray(spec.D(np.maximum(rf - h, 0.0)), dtype=float)) \
        / (rf + h - np.maximum(rf - h, 0.0))
    z1p = zeta1_prime(spec, rf)
    z2p = np.asarray(spec.zeta2_prime(rf), dtype=float)
    with np.errstate(all="ignore"):
        r1 = np.where(z1p > 1e-300, Dp / z1p, 0.0)
        r2 = np.where(z2p > 1e-300, np.asarray(spec.E(rf, v), dtype=float) / z2p, 0.0)
    return r1, r2


def weak_residual(samples: Sequence, phi, spec: ModelSpec, grid: AgeGrid,
                  sgrid: SpatialGrid, zeta1_eval: Optional[Callable] = None
                  ) -> WeakResidualResult:
    """Evaluate the weak-form identity of the continuous problem on a
    sampled trajectory.

    Composite trapezoid in time, exact bin sums in age, cell sums in
    space.  ``phi`` is a TestFunction or a list of (coefficient,
    TestFunction) pairs, evaluated jointly (the identity is linear in the
    test function).  Terms: transport, age-zero inflow, initial data,
    diffusion against the Laplacian of the test function, and the
    drift/diffusion gradient pairing under the two-transform splitting.
    """
    if isinstance(phi, TestFunction):
        parts = [(1.0, phi)]
    else:
        parts = [(float(cf), p) for cf, p in phi]

    T_run = float(samples[-1].t)
    a_cap = grid.I * grid.alpha
    for _, p in parts:
        if p.t_support > T_run + 1e-12:
            raise InadmissibleTestFunction(
                f"time support {p.t_support:g} exceeds the horizon {T_run:g}"
            )
        if p.a_support > a_cap + 1e-12:
            raise InadmissibleTestFunction(
                f"age support {p.a_support:g} exceeds the covered ages {a_cap:g}"
            )
        probe = np.linspace(p.t_support, max(T_run, p.t_support + 1.0), 7)
        if np.any(np.abs(np.asarray(p.psi(probe), dtype=float)) > 0.0):
            raise InadmissibleTestFunction("psi does not vanish beyond its support")
        if len(p.modes) != sgrid.dim:
            raise InadmissibleTestFunction("omega mode count does not match dim")
    if any(s.u is None for s in samples):
        raise ValueError("trajectory was stored without bin fields")

    I, alpha, vol = grid.I, grid.alpha, sgrid.cell_volume
    edges = alpha * np.arange(I + 1)
    times = np.asarray([s.t for s in samples], dtype=float)
    R_scale = max(float(np.max([np.max(s.lambda_rec) for s in samples])), 1e-6)
    if zeta1_eval is None:
        zeta1_eval = Zeta1Evaluator(spec, 1.5 * R_scale + 1.0)

    pre = []
    for cf, p in parts:
        Ci = _bin_integrals(p.chi, alpha, I)
        Cpi = np.asarray(p.chi(edges[1:]), dtype=float) \
            - np.asarray(p.chi(edges[:-1]), dtype=float)
        Cmui = _bin_integrals(lambda a: np.asarray(p.chi(a)) * np.asarray(spec.mu(a)),
                              alpha, I)
        omega = p.omega(sgrid).reshape(-1) * vol
        gomega = [g.reshape(-1) * vol for g in p.grad_omega(sgrid)]
        lomega = p.lap_omega(sgrid).reshape(-1) * vol
        chi0 = float(p.chi(0.0))
        pre.append((cf, p, Ci, Cpi, Cmui, omega, gomega, lomega, chi0))

    n = times.size
    f_transport = np.zeros(n)
    f_inflow = np.zeros(n)
    f_diffusion = np.zeros(n)
    f_drift = np.zeros(n)
    term_initial = 0.0

    for k, s in enumerate(samples):
        u_flat = s.u.reshape(I, -1)
        lam_flat = s.lambda_rec.reshape(-1)
        v_flat = s.v.reshape(-1)
        D_lam = np.asarray(spec.D(lam_flat), dtype=float)
        r1, r2 = _safe_ratios(spec, lam_flat, v_flat, R_scale)
        gz1 = [g.reshape(-1) for g in grad_cell(zeta1_eval(s.lambda_rec), sgrid)]
        gz2 = [g.reshape(-1)
               for g in grad_cell(np.asarray(spec.zeta2(s.lambda_rec), dtype=float), sgrid)]
        inflow = np.where(v_flat > 0.0,
                          np.asarray(spec.xi(v_flat), dtype=float) * v_flat, 0.0)
        for cf, p, Ci, Cpi, Cmui, omega, gomega, lomega, chi0 in pre:
            psi_k = float(p.psi(s.t))
            psip_k = float(p.psi_prime(s.t))
            proj = u_flat @ omega                       # <omega, u_i>
            f_transport[k] += cf * float(
                (psip_k * Ci + psi_k * (Cpi - Cmui)) @ proj
            )
            f_inflow[k] += cf * psi_k * chi0 * float(inflow @ omega)
            f_diffusion[k] += cf * psi_k * float(Ci @ (u_flat @ (lomega * D_lam)))
            W_dot = np.zeros_like(lam_flat)
            for ax in range(sgrid.dim):
                W_dot += (r2 * gz2[ax] - r1 * gz1[ax]) * gomega[ax]
            f_drift[k] -= cf * psi_k * float(Ci @ (u_flat @ W_dot))
            if k == 0:
                term_initial += cf * float(p.psi(0.0)) * float(Ci @ proj)

    terms = {
        "transport": float(np.trapezoid(f_transport, times)),
        "inflow": float(np.trapezoid(f_inflow, times)),
        "initial": term_initial,
        "diffusion": float(np.trapezoid(f_diffusion, times)),
        "drift_split": float(np.trapezoid(f_drift, times)),
    }
    signed = sum(terms.values())
    return WeakResidualResult(residual=abs(signed), signed=signed, terms=terms)
