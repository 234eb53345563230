"""Age binning of the model and construction of the regularized data.

The age axis is cut into I uniform bins of width alpha; the continuous
weights lam, b, mu are replaced by their cell averages and the age
derivative by an upwind difference quotient.  The number of bins defaults
to floor(1/alpha^2), capped so the covered age range does not exceed the
configured maximum (the tail diagnostic quantifies the truncation).

Regularization adds alpha to the diffusivity, clamps the arguments of E
and xi to the box [0, 1/alpha], and supplies the smooth cutoff that
disables the drift for bin densities above the cap 1/alpha^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import HypothesisViolation, NegativeInitialData
from .model_spec import ModelSpec, smoothstep, smoothstep_prime

logger = logging.getLogger(__name__)

__all__ = [
    "AgeGrid",
    "RegularizedModel",
    "DiscreteHypothesesReport",
    "theta_cutoff",
    "theta_cutoff_prime",
    "build_age_grid",
    "check_discrete_hypotheses",
    "regularize",
    "age_average_initial",
    "compute_K0",
    "entropy_phi",
]

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def theta_cutoff(r):
    """C^2 cutoff: exactly 1 for r <= 1/2, exactly 0 for r >= 1, non-increasing."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - 0.5) / 0.5)


def theta_cutoff_prime(r):
    return -smoothstep_prime((np.asarray(r, dtype=float) - 0.5) / 0.5) / 0.5


def entropy_phi(r):
    """Convex entropy r*(ln r - 1) + 1 with the continuous value 1 at r = 0."""
    r = np.asarray(r, dtype=float)
    from scipy.special import xlogy  # xlogy(0,0) = 0 gives phi(0) = 1 exactly

    return xlogy(r, r) - r + 1.0


@dataclass(frozen=True)
class AgeGrid:
    """Cell-averaged age coefficients and the constants measured on them.

    Array index k holds bin i = k+1; ``lam``/``b``/``mu`` carry I+1 entries
    (the extra one closes the biomass equation), the difference quotients
    ``lam_star``/``b_star`` carry I.  Immutable after construction and
    shareable without synchronization.
    """

    alpha: float
    I: int
    lam: np.ndarray
    b: np.ndarray
    mu: np.ndarray
    lam_star: np.ndarray
    b_star: np.ndarray
    ell: float   # min lam_i
    B: float     # max b_i*/b_i
    L: float     # max lam_i*/lam_i (signed)
    M: float     # max mu_i
    beta: float  # max(mu_i b_i / lam_i, lam_i / b_i)

    @property
    def a_max(self) -> float:
        return self.I * self.alpha


@dataclass(frozen=True)
class DiscreteHypothesesReport:
    """Line-by-line verification of the discrete coefficient inequalities."""

    checks: dict
    ell: float
    B: float
    L: float
    M: float
    beta: float

    @property
    def all_passed(self) -> bool:
        return all(self.checks.values())


def _cell_averages(f: Callable, alpha: float, count: int) -> np.ndarray:
    edges = alpha * np.arange(count + 1)
    h = edges[1:] - edges[:-1]
    a = edges[:-1, None] + (_GAUSS_NODES[None, :] + 1.0) * 0.5 * h[:, None]
    vals = np.asarray(f(a), dtype=float)
    return (vals * _GAUSS_WEIGHTS[None, :]).sum(axis=1) * 0.5


def build_age_grid(spec: ModelSpec, alpha: float, a_max: float) -> AgeGrid:
    """Cell-average the age weights over I bins and measure the constants."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if a_max < alpha:
        raise ValueError("a_max must be at least alpha")
    I = min(int(math.floor(1.0 / alpha**2 + 1e-12)), int(math.ceil(a_max / alpha - 1e-12)))
    if I < 1:
        raise ValueError("no age bins; increase a_max or decrease alpha")

    lam = _cell_averages(spec.lam, alpha, I + 1)
    b = _cell_averages(spec.b, alpha, I + 1)
    mu = _cell_averages(spec.mu, alpha, I + 1)
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(b)) and np.all(np.isfinite(mu))):
        raise HypothesisViolation("non-finite cell average in the age weights")
    lam_star = (lam[1:] - lam[:-1])[:I] / alpha
    b_star = (b[1:] - b[:-1])[:I] / alpha

    scale_b = max(1.0, float(np.max(b)))
    if np.any(lam <= 0.0):
        raise HypothesisViolation("lam_i = 0 on the built grid")
    if np.any(b < 1.0 - 1e-12 * scale_b):
        raise HypothesisViolation("b_i < 1 on the built grid")
    if np.any(b_star < -1e-12 * scale_b / alpha):
        raise HypothesisViolation("b_i* < 0 on the built grid")
    if np.any(mu < -1e-12):
        raise HypothesisViolation("mu_i < 0 on the built grid")

    b_star = np.maximum(b_star, 0.0)
    mu = np.maximum(mu, 0.0)
    ell = float(np.min(lam))
    B = float(np.max(b_star / b[:I], initial=0.0))
    L = float(np.max(lam_star / lam[:I]))
    M = float(np.max(mu[:I], initial=0.0))
    beta = float(max(np.max(mu * b / lam), np.max(lam / b)))

    for arr in (lam, b, mu, lam_star, b_star):
        arr.setflags(write=False)
    return AgeGrid(
        alpha=alpha, I=I, lam=lam, b=b, mu=mu,
        lam_star=lam_star, b_star=b_star,
        ell=ell, B=B, L=L, M=M, beta=beta,
    )


def check_discrete_hypotheses(grid: AgeGrid) -> DiscreteHypothesesReport:
    """Report each discrete coefficient inequality with the measured constants.

    Pure report: failures are flags, never raises.
    """
    I = grid.I
    lam, b, mu = grid.lam, grid.b, grid.mu
    tol = 1e-12
    checks = {
        "b_i >= 1": bool(np.all(b >= 1.0 - tol * max(1.0, float(np.max(b))))),
        "lam_i >= ell > 0": bool(np.all(lam > 0.0)) and grid.ell > 0.0,
        "0 <= b_i* <= B b_i": bool(
            np.all(grid.b_star >= -tol) and np.all(grid.b_star <= grid.B * b[:I] + tol)
        ),
        "lam_i* <= L lam_i": bool(np.all(grid.lam_star <= grid.L * lam[:I] + tol)),
        "mu_i <= M": bool(np.all(mu[:I] <= grid.M + tol)),
        "mu_i b_i <= beta lam_i": bool(np.all(mu * b <= grid.beta * lam + tol)),
        "beta lam_i <= beta^2 b_i": bool(
            np.all(grid.beta * lam <= grid.beta**2 * b + tol)
        ),
    }
    return DiscreteHypothesesReport(
        checks=checks, ell=grid.ell, B=grid.B, L=grid.L, M=grid.M, beta=grid.beta
    )


class RegularizedModel:
    """Uniformly parabolic stand-in for the model at bin width alpha.

    ``D_alpha = D + alpha`` has positive lower bound alpha; E and xi keep
    their values on the box [0, 1/alpha] and are argument-clamped outside
    it (trajectories are certified in-box by the sup-norm diagnostic, so
    the clamp kink is never active in valid runs).  ``Xi`` is a sampled
    upper bound for (1+s)*xi(s) + E(r,s) over the box.

    Treat instances as immutable once built.
    """

    def __init__(self, spec: ModelSpec, alpha: float):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        self.spec = spec
        self.alpha = alpha
        self.clamp = 1.0 / alpha
        self.theta = theta_cutoff
        self.theta_prime = theta_cutoff_prime
        s = np.unique(np.concatenate([
            [0.0],
            self.clamp * 2.0 ** (-np.arange(1, 40, dtype=float)),
            self.clamp * np.arange(1, 513) / 512.0,
        ]))
        xi_term = float(np.max((1.0 + s) * np.asarray(spec.xi(s), dtype=float)))
        RR, SS = np.meshgrid(s[:: max(1, s.size // 128)], s[:: max(1, s.size // 128)],
                             indexing="ij")
        E_term = float(np.max(np.asarray(spec.E(RR, SS), dtype=float), initial=0.0))
        self.Xi = xi_term + E_term

    def D_alpha(self, r):
        return np.asarray(self.spec.D(r), dtype=float) + self.alpha

    def E_alpha(self, r, s):
        r = np.clip(np.asarray(r, dtype=float), 0.0, self.clamp)
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.clamp)
        return np.asarray(self.spec.E(r, s), dtype=float)

    def xi_alpha(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.clamp)
        return np.asarray(self.spec.xi(s), dtype=float)


def regularize(spec: ModelSpec, alpha: float) -> RegularizedModel:
    """Build the regularized model data for bin width alpha."""
    return RegularizedModel(spec, alpha)


def age_average_initial(u0: Callable, grid: AgeGrid, sgrid) -> np.ndarray:
    """Bin-average initial swarmer data over age, per spatial cell.

    ``u0(a, coords)`` must accept a scalar age and the (ncells, dim)
    coordinate array.  Values above the cap 1/(4 alpha^2) are clamped with
    a logged warning; negative values raise.
    """
    coords = sgrid.centers()
    alpha, I = grid.alpha, grid.I
    out = np.zeros((I,) + sgrid.shape)
    for k in range(I):
        acc = np.zeros(sgrid.shape)
        for node, weight in zip(_GAUSS_NODES, _GAUSS_WEIGHTS):
            a = (k + (node + 1.0) * 0.5) * alpha
            acc += weight * np.asarray(u0(a, coords), dtype=float).reshape(sgrid.shape)
        out[k] = acc * 0.5
    if np.any(out < -1e-12):
        raise NegativeInitialData(
            f"initial swarmer data negative (min {float(out.min()):.3e})"
        )
    out = np.maximum(out, 0.0)
    cap = 1.0 / (4.0 * alpha**2)
    n_over = int(np.count_nonzero(out > cap))
    if n_over:
        logger.warning(
            "initial swarmer data exceeds the cap 1/(4 alpha^2)=%.4g in %d "
            "bin-cells; clamping", cap, n_over,
        )
        out = np.minimum(out, cap)
    return out


def compute_K0(u0_fields: np.ndarray, v0: np.ndarray, grid: AgeGrid, sgrid) -> float:
    """Initial-data size constant entering every Gronwall envelope.

    Sum of the b-weighted mass, the swimmer mass, the lam-weighted entropy
    of the initial bins, the first-bin weights, and the sup norms of the
    initial biomass and swimmer fields.
    """
    I, alpha = grid.I, grid.alpha
    vol = sgrid.cell_volume
    lam_i = grid.lam[:I]
    b_i = grid.b[:I]
    u_sums = u0_fields.reshape(I, -1).sum(axis=1) * vol
    phi_sums = entropy_phi(u0_fields).reshape(I, -1).sum(axis=1) * vol
    lam0 = alpha * np.tensordot(lam_i, u0_fields, axes=(0, 0))
    return float(
        alpha * (b_i @ u_sums)
        + float(np.sum(v0)) * vol
        + alpha * (lam_i @ phi_sums)
        + grid.b[0]
        + grid.lam[0]
        + float(np.max(lam0))
        + float(np.max(v0))
    )
