"""Closed biomass/swimmer system for exponential weights, used as an oracle.

When the mass weight and the dedifferentiation weight are exponentials
with a common time scale and the dedifferentiation modulus is constant,
the age structure integrates out exactly: the biomass obeys a single
nonlinear diffusion equation with effective diffusivity D + biomass*E and
linear growth 1/tau - m2, and the swimmer equation keeps only its local
terms plus a biomass source (m1*m2/m0).  Running this two-field system on
the same mesh as the full solver cross-validates the age binning: the gap
between the two must shrink linearly in the bin width.

The weight normalization at age zero pins m1 = 1; the remaining factor
only rescales the swimmer source and is absorbed into the coefficients.

The full and reduced runs of a cross-validation are independent and may
execute concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigMismatch, UnstableStep
from .model_spec import ModelSpec
from .solver_core import RunSetup, _sample_times, run
from .spatial_grid import (
    SpatialGrid,
    apply_face_flux,
    face_diff,
    face_mean,
    _sl,
)
from . import diagnostics as diag

__all__ = [
    "ReducedSpec",
    "ReducedSample",
    "ReducedResult",
    "CrossValResult",
    "medvedev_diffusivity",
    "reduced_from_model",
    "run_reduced",
    "cross_validate_setups",
]


@dataclass(frozen=True)
class ReducedSpec:
    m0: float
    m1: float
    m2: float
    tau: float
    D: Callable
    E: Callable
    g: Callable
    xi: Callable

    def __post_init__(self):
        for name in ("m0", "m1", "tau"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.m2 < 0.0:
            raise ValueError("m2 must be nonnegative")

    def effective_diffusivity(self, r, s):
        r = np.asarray(r, dtype=float)
        return np.asarray(self.D(r), dtype=float) + r * np.asarray(self.E(r, s), dtype=float)


def medvedev_diffusivity(D0: float, k: float) -> Callable:
    """Saturating effective diffusivity D0*r/(r + k*s); D0 at s=0 for r>0."""

    def eff(r, s):
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        denom = r + k * s
        with np.errstate(all="ignore"):
            return np.where(denom > 0.0, D0 * r / np.where(denom > 0.0, denom, 1.0), 0.0)

    return eff


def reduced_from_model(spec: ModelSpec, mu_const: float, m0: float,
                       tau: float) -> ReducedSpec:
    return ReducedSpec(
        m0=m0, m1=1.0, m2=mu_const, tau=tau,
        D=spec.D, E=spec.E, g=spec.g, xi=spec.xi,
    )


@dataclass(frozen=True)
class ReducedSample:
    t: float
    lam: np.ndarray
    v: np.ndarray


@dataclass
class ReducedResult:
    samples: list


def _reduced_div(lam, v, rspec: ReducedSpec, sgrid: SpatialGrid) -> np.ndarray:
    # same face treatment as the full solver's bin fluxes: arithmetic mean
    # of D, upwind donor biomass against the drift face velocity
    D_cell = np.asarray(rspec.D(lam), dtype=float)
    E_cell = np.asarray(rspec.E(lam, v), dtype=float)
    out = np.zeros_like(lam)
    for ax in range(sgrid.dim):
        axis = ax - sgrid.dim
        g = face_diff(lam, sgrid, ax)
        w = face_mean(E_cell, sgrid, ax) * g
        q = np.where(w > 0.0, _sl(lam, axis, slice(1, None)), _sl(lam, axis, slice(None, -1)))
        apply_face_flux(out, face_mean(D_cell, sgrid, ax) * g + q * w, sgrid, ax)
    return out


def _reduced_dt(lam, v, rspec: ReducedSpec, sgrid: SpatialGrid) -> float:
    # the drift acts on the biomass as nonlinear diffusion with coefficient
    # biomass*E, so the stability limit uses the effective diffusivity
    eff = np.asarray(rspec.effective_diffusivity(lam, v), dtype=float)
    sink = max(0.0, rspec.m2 - 1.0 / rspec.tau)
    rate = sink
    for ax in range(sgrid.dim):
        dx = sgrid.dx[ax]
        k_max = float(np.max(face_mean(eff, sgrid, ax)))
        rate += 2.0 * k_max / (dx * dx)
    return 0.9 / max(rate, 1e-300)


def run_reduced(rspec: ReducedSpec, sgrid: SpatialGrid, lam0, v0, T: float,
                sample_dt: float, fixed_dt: Optional[float] = None) -> ReducedResult:
    """Explicit finite-volume integration of the closed two-field system."""
    lam = sgrid.check_field(np.asarray(lam0, dtype=float).copy(), "biomass")
    v = sgrid.check_field(np.asarray(v0, dtype=float).copy(), "v")
    if float(lam.min()) < -1e-12 or float(v.min()) < -1e-12:
        raise ValueError("initial data must be nonnegative")
    growth = 1.0 / rspec.tau - rspec.m2
    v_coef = rspec.m1 * rspec.m2 / rspec.m0
    t = 0.0
    samples = [ReducedSample(t=0.0, lam=lam.copy(), v=v.copy())]
    for t_target in _sample_times(T, sample_dt):
        while t < t_target - 1e-12 * max(T, 1.0):
            dt = _reduced_dt(lam, v, rspec, sgrid)
            if fixed_dt is not None:
                dt = min(dt, fixed_dt)
            dt = min(dt, t_target - t)
            new_lam = lam + dt * (_reduced_div(lam, v, rspec, sgrid) + growth * lam)
            gv = np.asarray(rspec.g(v), dtype=float)
            xv = np.where(v > 0.0, np.asarray(rspec.xi(v), dtype=float), 0.0)
            new_v = v + dt * ((gv - xv) * v + v_coef * lam)
            if not (np.all(np.isfinite(new_lam)) and np.all(np.isfinite(new_v))):
                raise UnstableStep(f"non-finite reduced state at t={t + dt:.6g}")
            if min(float(new_lam.min()), float(new_v.min())) < -1e-12:
                raise UnstableStep(
                    f"reduced state fell below tolerance at t={t + dt:.6g}"
                )
            lam = np.maximum(new_lam, 0.0)
            v = np.maximum(new_v, 0.0)
            t += dt
        t = t_target
        samples.append(ReducedSample(t=t, lam=lam.copy(), v=v.copy()))
    return ReducedResult(samples=samples)


# --------------------------------------------------------------------------
# cross validation against the full solver

@dataclass(frozen=True)
class CrossValResult:
    rel_l2_Lambda: float
    rel_l2_v: float
    linf_l1_Lambda: float
    linf_l1_v: float
    alpha_levels: tuple
    errors_by_level: tuple       # rel L2 of the biomass per alpha level
    errors_v_by_level: tuple
    order_Lambda: float
    order_v: float

    def to_dict(self) -> dict:
        return {
            "rel_l2_Lambda": self.rel_l2_Lambda,
            "rel_l2_v": self.rel_l2_v,
            "linf_l1_Lambda": self.linf_l1_Lambda,
            "linf_l1_v": self.linf_l1_v,
            "alpha_levels": list(self.alpha_levels),
            "errors_by_level": list(self.errors_by_level),
            "errors_v_by_level": list(self.errors_v_by_level),
            "order_Lambda": self.order_Lambda,
            "order_v": self.order_v,
        }


def _rel_l2(a: np.ndarray, b: np.ndarray, vol: float) -> float:
    num = math.sqrt(float(np.sum((a - b) ** 2)) * vol)
    den = math.sqrt(float(np.sum(a * a)) * vol)
    return num / den if den > 0.0 else (0.0 if num == 0.0 else math.inf)


def _one_level(setup: RunSetup, rspec: ReducedSpec) -> tuple:
    full = run(setup)
    lam0 = full.samples[0].lambda_rec
    red = run_reduced(rspec, setup.sgrid, lam0, setup.v0, setup.T, setup.sample_dt,
                      fixed_dt=setup.fixed_dt)
    vol = setup.sgrid.cell_volume
    fs, rs = full.samples, red.samples
    if len(fs) != len(rs):
        raise RuntimeError("sample grids of the two solvers diverged")
    e_lam = _rel_l2(fs[-1].lambda_rec, rs[-1].lam, vol)
    e_v = _rel_l2(fs[-1].v, rs[-1].v, vol)
    l1_diff_lam = max(
        float(np.sum(np.abs(f.lambda_rec - r.lam))) * vol for f, r in zip(fs, rs)
    )
    l1_diff_v = max(float(np.sum(np.abs(f.v - r.v))) * vol for f, r in zip(fs, rs))
    l1_lam = max((float(np.sum(np.abs(f.lambda_rec))) * vol for f in fs), default=0.0)
    l1_v = max((float(np.sum(np.abs(f.v))) * vol for f in fs), default=0.0)
    linf_lam = l1_diff_lam / l1_lam if l1_lam > 0.0 else (0.0 if l1_diff_lam == 0.0 else math.inf)
    linf_v = l1_diff_v / l1_v if l1_v > 0.0 else (0.0 if l1_diff_v == 0.0 else math.inf)
    return e_lam, e_v, linf_lam, linf_v


def cross_validate_setups(setups, rspec: ReducedSpec) -> CrossValResult:
    """Compare full and reduced runs on matched grids over alpha levels.

    ``setups`` maps strictly decreasing alpha values to ready RunSetup
    objects on a common mesh; the first level provides the headline
    errors, the refinement gives the measured order.
    """
    alphas = [s.agegrid.alpha for s in setups]
    if any(a2 >= a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise ConfigMismatch("alpha levels must be strictly decreasing")
    for s in setups:
        # the closed system carries no age-zero inflow, so differentiation
        # must be inactive for the comparison to be meaningful
        probe = np.linspace(0.0, s.reg.clamp, 257)
        if float(np.max(np.asarray(s.spec.xi(probe), dtype=float))) > 0.0:
            raise ConfigMismatch(
                "cross-validation requires xi = 0: the closed biomass "
                "equation has no age-zero inflow term"
            )
        bound = 0.8 * s.agegrid.a_max
        if bound < 4.0 * s.agegrid.alpha:
            raise ConfigMismatch("age range too short for the tail precondition")
        state0 = type("S", (), {})()
        state0.u = s.u0
        state0.v = s.v0
        total = diag.mass_b(state0, s.agegrid, s.sgrid)
        tail0 = diag.tail_mass(state0, bound, s.agegrid, s.sgrid)
        if total > 0.0 and tail0 > 1e-8 * total:
            raise ConfigMismatch(
                f"initial age tail beyond {bound:g} carries {tail0:.3e} "
                f"(> 1e-8 of total {total:.3e}); truncate the initial ages"
            )
    results = [_one_level(s, rspec) for s in setups]
    errs = tuple(r[0] for r in results)
    errs_v = tuple(r[1] for r in results)
    if len(errs) >= 2 and errs[0] > 0.0 and errs[1] > 0.0:
        order_lam = math.log2(errs[0] / errs[1]) / math.log2(alphas[0] / alphas[1])
        order_v = math.log2(errs_v[0] / errs_v[1]) / math.log2(alphas[0] / alphas[1]) \
            if errs_v[0] > 0.0 and errs_v[1] > 0.0 else math.nan
    else:
        order_lam = math.nan
        order_v = math.nan
    return CrossValResult(
        rel_l2_Lambda=errs[0], rel_l2_v=errs_v[0],
        linf_l1_Lambda=results[0][2], linf_l1_v=results[0][3],
        alpha_levels=tuple(alphas),
        errors_by_level=errs, errors_v_by_level=errs_v,
        order_Lambda=order_lam, order_v=order_v,
    )
