"""Continuous model data and numerical verification of the assumptions on it.

The colony model couples a swimmer density v(t,x) to an age-structured
swarmer density u(t,a,x).  Its data are scalar functions:

* ``lam(a)``  -- mass weight; the total motile biomass is the lam-weighted
  age integral of u,
* ``b(a)``    -- dedifferentiation weight in the swimmer source (b(0)=1,
  non-decreasing),
* ``mu(a)``   -- dedifferentiation modulus,
* ``D(r)``    -- biomass-dependent diffusivity, allowed to vanish at r=0
  only (degenerate diffusion),
* ``E(r,s)``  -- drift coefficient in front of the biomass gradient,
* ``g(s)``, ``xi(s)`` -- swimmer growth and differentiation rates,
* ``zeta2(r)`` -- user-supplied transform whose derivative squeezes E
  from both sides (the transform is not unique; built-in families pick
  the one induced by D).

All assumptions on this data (positivity, growth-ratio bounds, the
two-sided drift bounds) are verified here by dense sampling, never
symbolically: the model functions are opaque callables.  A "pass" is a
certificate over the sampled set only and the measured constants are
empirical by construction.  Downstream modules treat them as such.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateDiffusion,
    NonFiniteEvaluation,
    QuadratureDivergence,
    RatioUndefined,
)

__all__ = [
    "ModelSpec",
    "HypothesisReport",
    "Kappas",
    "validate_hypotheses",
    "zeta1",
    "zeta1_prime",
    "Zeta1Evaluator",
    "estimate_kappas",
    "smoothstep",
    "smoothstep_prime",
    "bump",
    "exponential_family",
    "tabulated_function",
]


# --------------------------------------------------------------------------
# smooth switch helpers (C^2 quintic; used by built-in rate functions and by
# the cutoff / tail weights downstream)

def smoothstep(x):
    """Quintic smoothstep: 0 for x<=0, 1 for x>=1, C^2 across the knots."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def smoothstep_prime(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    d = 30.0 * xc * xc * (1.0 - xc) ** 2
    return np.where(inside, d, 0.0)


def bump(s, lo, hi, ramp_frac=0.25):
    """C^2 bump equal to 1 on the middle of [lo, hi] and 0 outside it."""
    w = (hi - lo) * ramp_frac
    return smoothstep((np.asarray(s, dtype=float) - lo) / w) * smoothstep((hi - s) / w)


# --------------------------------------------------------------------------
# model data container

@dataclass(frozen=True)
class ModelSpec:
    """Continuous model functions; the single source of truth for the PDE.

    All callables must accept NumPy arrays.  Instances are immutable and
    safe to share across concurrent evaluation contexts.
    """

    lam: Callable          # mass weight, age -> R>=0
    b: Callable            # dedifferentiation weight, age -> R>=1
    mu: Callable           # dedifferentiation modulus, age -> R>=0
    D: Callable            # diffusivity, biomass -> R>=0
    E: Callable            # drift coefficient, (biomass, swimmer) -> R>=0
    g: Callable            # swimmer growth rate
    xi: Callable           # differentiation rate, 0 for s <= 0
    zeta2: Callable        # drift transform of the data assumptions
    zeta2_prime: Callable  # its derivative (user-supplied)
    tau: float = 1.0       # time scale of the canonical exponential family
    a_max_hint: float = 4.0  # age beyond which initial data is negligible


@dataclass(frozen=True)
class HypothesisReport:
    """Sampled certificate for the six assumptions on the model data.

    Constants are estimated over the recorded sampling set; suprema only
    grow and infima only shrink under refinement, so a fail can never
    flip to a pass when ``n_samples`` increases.
    """

    ell0: float            # inf lam over the age samples
    B0: float              # growth constant of b
    L0: float              # two-sided growth constant of lam
    beta0: float           # constant coupling mu*b, lam and b
    kappa1: Callable       # R -> sup of D'/zeta1' on [0, R]
    kappa2: Callable       # R -> inf of E/zeta2'^2 on [0, R]^2
    kappa3: Callable       # R -> sup of E/zeta2' on [0, R]^2
    passed: dict = field(default_factory=dict)     # name -> bool
    witnesses: dict = field(default_factory=dict)  # name -> (point, message)
    n_samples: int = 0
    R_max: float = 0.0
    A_max: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {
            "ell0": self.ell0,
            "B0": self.B0,
            "L0": self.L0,
            "beta0": self.beta0,
            "kappa1_Rmax": self.kappa1(self.R_max),
            "kappa2_Rmax": self.kappa2(self.R_max),
            "kappa3_Rmax": self.kappa3(self.R_max),
            "passed": dict(sorted(self.passed.items())),
            "witnesses": {k: str(v) for k, v in sorted(self.witnesses.items())},
            "n_samples": self.n_samples,
            "R_max": self.R_max,
            "A_max": self.A_max,
        }


class Kappas:
    """Drift/diffusion ratio constants at a given radius R.

    Ratios that blow up are reported as NaN with the offending name in
    ``failed`` rather than as infinities.
    """

    def __init__(self, kappa1, kappa2, kappa3, failed=()):
        self.kappa1 = kappa1
        self.kappa2 = kappa2
        self.kappa3 = kappa3
        self.failed = tuple(failed)

    def __iter__(self):
        return iter((self.kappa1, self.kappa2, self.kappa3))

    @property
    def ok(self) -> bool:
        return not self.failed


# --------------------------------------------------------------------------
# nested sampling grids
#
# Grids are built from powers of two so that doubling n_samples refines the
# previous grid.  This makes the estimated suprema/infima monotone in n.

def _next_pow2(n: int) -> int:
    return 1 << (max(int(n), 1) - 1).bit_length()


def _nested_uniform(hi: float, n: int) -> np.ndarray:
    m = _next_pow2(n)
    return hi * np.arange(m + 1) / m


def _nested_geometric(hi: float, n: int, decades: int = 30) -> np.ndarray:
    j_max = min(decades, int(math.log2(_next_pow2(n))) + decades)
    return hi * 2.0 ** (-np.arange(1, j_max + 1, dtype=float))


def _nested_alphas(n: int) -> np.ndarray:
    # open interval (0,1): powers of two from both ends
    j_max = int(math.log2(_next_pow2(n)))
    lo = 2.0 ** (-np.arange(1, j_max + 1, dtype=float))
    hi = 1.0 - lo
    return np.unique(np.concatenate([lo, hi]))


def _check_finite(name, values, where):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = np.asarray(where)[~np.isfinite(values).reshape(-1)][:1]
        raise NonFiniteEvaluation(f"{name} evaluated non-finite near {bad}")
    return values


# --------------------------------------------------------------------------
# operations

def zeta1(spec: ModelSpec, r: float) -> float:
    """Diffusivity transform: integral of sqrt(D(s)/s) from 0 to r.

    The substitution s = q*q removes the 1/sqrt(s) factor, so the
    integrand is continuous for any admissible D; adaptive quadrature
    then resolves the remaining degeneracy near 0.  Absolute tolerance
    1e-10.
    """
    r = float(r)
    if r < 0.0:
        raise ValueError("zeta1 requires r >= 0")
    if r == 0.0:
        return 0.0

    def integrand(q):
        d = float(spec.D(q * q))
        if not math.isfinite(d) or d < 0.0:
            raise QuadratureDivergence(f"D({q * q!r}) = {d!r} not admissible")
        return 2.0 * math.sqrt(d)

    qr = math.sqrt(r)
    pts = [qr * 2.0 ** (-j) for j in range(1, 24)]
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(
                integrand, 0.0, qr, points=pts, limit=400, epsabs=1e-12, epsrel=1e-12
            )
        except Exception as exc:  # scipy signals non-integrable behaviour
            raise QuadratureDivergence(str(exc)) from exc
    if not math.isfinite(value) or err > 1e-10:
        raise QuadratureDivergence(
            f"quadrature error {err:.2e} above tolerance for r={r!r}"
        )
    return value


def zeta1_prime(spec: ModelSpec, r):
    """sqrt(D(r)/r), with the r=0 value taken as the limit from the right."""
    r = np.asarray(r, dtype=float)
    r_floor = np.maximum(r, 1e-300)
    with np.errstate(all="ignore"):
        out = np.sqrt(np.maximum(np.asarray(spec.D(r_floor), dtype=float), 0.0) / r_floor)
    return out


class Zeta1Evaluator:
    """Vectorized zeta1 on [0, r_max] via a cumulative fine-grid table.

    Panel-wise Gauss quadrature of the substituted integrand; linear
    interpolation between panel edges.  Accuracy is far below the
    diagnostic tolerances that consume it; the scalar ``zeta1`` entry
    point keeps the strict 1e-10 contract.
    """

    def __init__(self, spec: ModelSpec, r_max: float, panels: int = 4096):
        q_edges = math.sqrt(max(r_max, 1e-12)) * np.arange(panels + 1) / panels
        nodes, weights = np.polynomial.legendre.leggauss(8)
        h = q_edges[1:] - q_edges[:-1]
        q = q_edges[:-1, None] + (nodes[None, :] + 1.0) * 0.5 * h[:, None]
        vals = 2.0 * np.sqrt(np.maximum(np.asarray(spec.D(q * q), dtype=float), 0.0))
        panel_ints = (vals * weights[None, :]).sum(axis=1) * 0.5 * h
        self._q = q_edges
        self._cum = np.concatenate([[0.0], np.cumsum(panel_ints)])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.interp(np.sqrt(np.maximum(r, 0.0)), self._q, self._cum)


def _kappa_samples(spec: ModelSpec, R: float, n_samples: int):
    r = np.unique(np.concatenate([
        _nested_geometric(R, n_samples),
        _nested_uniform(R, n_samples)[1:],
    ]))
    return r[r > 0.0]


def estimate_kappas(spec: ModelSpec, R: float, n_samples: int = 256) -> Kappas:
    """Sampled ratio constants kappa1..kappa3 on [0, R] resp. [0, R]^2.

    D' is a central finite difference with step R*1e-6; no derivative is
    required from the caller.
    """
    if R <= 0.0:
        raise ValueError("R must be positive")
    r = _kappa_samples(spec, R, n_samples)
    h = R * 1e-6
    Dp = (np.asarray(spec.D(r + h), dtype=float)
          - np.asarray(spec.D(np.maximum(r - h, 0.0)), dtype=float)) / (
        r + h - np.maximum(r - h, 0.0))
    z1p = zeta1_prime(spec, r)
    failed = []
    with np.errstate(all="ignore"):
        ratio1 = np.where(z1p > 0.0, Dp / z1p, 0.0)
        bad1 = (z1p <= 0.0) & (np.abs(Dp) > 0.0)
    if np.any(bad1) or not np.all(np.isfinite(ratio1)):
        failed.append("kappa1")
        kappa1 = math.nan
    else:
        kappa1 = float(np.max(ratio1, initial=0.0))

    # box sampling for E against zeta2'
    s_ax = np.unique(np.concatenate([[0.0], _kappa_samples(spec, R, min(n_samples, 128))]))
    r_ax = _kappa_samples(spec, R, min(n_samples, 128))
    RR, SS = np.meshgrid(r_ax, s_ax, indexing="ij")
    Ev = np.asarray(spec.E(RR, SS), dtype=float)
    z2p = np.asarray(spec.zeta2_prime(r_ax), dtype=float)[:, None]
    if np.any((z2p <= 0.0) & (np.abs(Ev) > 0.0)):
        i, j = np.argwhere((z2p <= 0.0) & (np.abs(Ev) > 0.0))[0]
        raise RatioUndefined(
            f"zeta2' vanishes at r={r_ax[i]!r} while E(r,s)={Ev[i, j]!r} != 0"
        )
    with np.errstate(all="ignore"):
        ratio2 = np.where(z2p > 0.0, Ev / z2p**2, 0.0)
        ratio3 = np.where(z2p > 0.0, Ev / z2p, 0.0)
    if not np.all(np.isfinite(ratio2)):
        failed.append("kappa2")
        kappa2 = math.nan
    else:
        kappa2 = float(np.min(ratio2))
    if not np.all(np.isfinite(ratio3)):
        failed.append("kappa3")
        kappa3 = math.nan
    else:
        kappa3 = float(np.max(ratio3, initial=0.0))
    return Kappas(kappa1, kappa2, kappa3, failed)


def validate_hypotheses(
    spec: ModelSpec, R_max: float, A_max: float, n_samples: int = 256
) -> HypothesisReport:
    """Verify the data assumptions by dense sampling and measure constants.

    The sampling grid is geometric near 0 (to probe the degeneracy of D)
    and uniform elsewhere, and is nested under doubling of ``n_samples``.
    Any violated inequality sets a fail flag with the witnessing sample
    point; the report is deterministic for fixed resolution.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be >= 64")
    if R_max <= 0.0 or A_max <= 0.0:
        raise ValueError("R_max and A_max must be positive")

    passed: dict = {}
    witnesses: dict = {}

    def fail(name, point, msg):
        passed[name] = False
        witnesses.setdefault(name, (point, msg))

    ages = _nested_uniform(A_max, n_samples)
    alphas = _nested_alphas(n_samples)
    rs = np.unique(np.concatenate([
        [0.0], _nested_geometric(R_max, n_samples), _nested_uniform(R_max, n_samples)[1:]
    ]))

    lam_v = _check_finite("lam", spec.lam(ages), ages)
    b_v = _check_finite("b", spec.b(ages), ages)
    mu_v = _check_finite("mu", spec.mu(ages), ages)
    D_v = _check_finite("D", spec.D(rs), rs)
    g_v = _check_finite("g", spec.g(rs), rs)
    xi_v = _check_finite("xi", spec.xi(rs), rs)

    pos = rs > 0.0
    if np.any(D_v[pos] <= 0.0):
        r_bad = rs[pos][np.asarray(D_v[pos] <= 0.0)][0]
        raise DegenerateDiffusion(
            f"D({r_bad!r}) = 0 with r > 0; fully/interval-degenerate diffusion "
            "is not supported"
        )

    # rate functions: xi vanishes on s <= 0 and is squeezed by g on s >= 0
    passed["rates"] = True
    s_neg = -_nested_uniform(R_max, n_samples)[1:]
    xi_neg = _check_finite("xi", spec.xi(s_neg), s_neg)
    if np.any(np.abs(xi_neg) > 0.0):
        fail("rates", s_neg[np.abs(xi_neg) > 0.0][0], "xi(s) != 0 for s <= 0")
    if np.any(xi_v < -1e-14):
        fail("rates", rs[xi_v < -1e-14][0], "xi(s) < 0")
    if np.any(xi_v > g_v + 1e-12):
        fail("rates", rs[xi_v > g_v + 1e-12][0], "xi(s) > g(s)")

    # dedifferentiation weight: non-decreasing, b(0)=1, growing, bounded ratio
    passed["weight_b"] = True
    b0 = float(spec.b(0.0))
    if abs(b0 - 1.0) > 1e-9:
        fail("weight_b", 0.0, f"b(0) = {b0!r} != 1")
    if np.any(np.diff(b_v) < -1e-12):
        fail("weight_b", ages[np.argmin(np.diff(b_v))], "b not non-decreasing")
    # growth to infinity is unverifiable by sampling; certify strict growth
    # over the window instead
    if b_v[-1] <= b0 * (1.0 + 1e-6):
        fail("weight_b", A_max, "b shows no growth over the sampled window")
    a_pos = ages[ages > 0.0]
    b_a = np.asarray(spec.b(a_pos), dtype=float)[:, None]
    b_shift = np.asarray(spec.b(a_pos[:, None] + alphas[None, :]), dtype=float)
    with np.errstate(all="ignore"):
        ratio_b = (b_shift / b_a - 1.0) / alphas[None, :]
    if not np.all(np.isfinite(ratio_b)):
        fail("weight_b", None, "b growth ratio non-finite")
        B0 = math.nan
    else:
        B0 = float(np.max(ratio_b))
        if B0 < 0.0:
            B0 = 0.0

    # mass weight: bounded below away from 0, two-sided growth ratio
    passed["weight_mass"] = True
    ell0 = float(np.min(lam_v))
    if ell0 <= 0.0:
        fail("weight_mass", ages[int(np.argmin(lam_v))], "inf lam = 0")
        L0 = math.inf
    else:
        lam_a = np.asarray(spec.lam(a_pos), dtype=float)[:, None]
        lam_up = np.asarray(spec.lam(a_pos[:, None] + alphas[None, :]), dtype=float)
        back = a_pos[:, None] - alphas[None, :]
        lam_dn = np.asarray(spec.lam(np.maximum(back, 0.0)), dtype=float)
        with np.errstate(all="ignore"):
            up = (lam_up / lam_a - 1.0) / alphas[None, :]
            dn = np.where(back > 0.0, (lam_dn / lam_a - 1.0) / alphas[None, :], 0.0)
        L0 = float(max(np.max(up), np.max(dn), 0.0))
        if not math.isfinite(L0):
            fail("weight_mass", None, "lam growth ratio non-finite")

    # modulus: mu*b <= beta0*lam <= beta0^2*b on the samples
    passed["modulus"] = True
    if ell0 <= 0.0:
        fail("modulus", None, "lam vanishes; mu*b/lam undefined")
        beta0 = math.nan
    else:
        r1 = mu_v * b_v / lam_v
        r2 = lam_v / b_v
        beta0 = float(max(np.max(r1), np.max(r2), 1.0))
        if not math.isfinite(beta0):
            fail("modulus", None, "mu*b/lam non-finite")
        if np.any(mu_v < -1e-14):
            fail("modulus", ages[mu_v < -1e-14][0], "mu < 0")

    # diffusivity: non-decreasing, positive for r>0, transform integrable,
    # D'/zeta1' bounded on [0, R_max]
    passed["diffusivity"] = True
    if np.any(np.diff(D_v) < -1e-12 * max(1.0, float(np.max(np.abs(D_v))))):
        fail("diffusivity", rs[np.argmin(np.diff(D_v))], "D not non-decreasing")
    try:
        zeta1(spec, R_max)
    except QuadratureDivergence as exc:
        fail("diffusivity", R_max, f"sqrt(D(r)/r) not integrable near 0: {exc}")

    # drift: E nonnegative and squeezed by zeta2'
    passed["drift"] = True
    try:
        kap = estimate_kappas(spec, R_max, n_samples)
    except RatioUndefined as exc:
        fail("drift", None, str(exc))
        kap = Kappas(math.nan, math.nan, math.nan, ("kappa2", "kappa3"))
    else:
        if "kappa1" in kap.failed:
            fail("diffusivity", None, "D'/zeta1' blows up on [0, R_max]")
        if "kappa2" in kap.failed or "kappa3" in kap.failed:
            fail("drift", None, "E/zeta2' ratios blow up on the sampled box")
    s_box = np.unique(np.concatenate([[0.0], _nested_uniform(R_max, min(n_samples, 128))]))
    RR, SS = np.meshgrid(s_box, s_box, indexing="ij")
    E_box = _check_finite("E", spec.E(RR, SS), RR)
    if np.any(E_box < -1e-14):
        i, j = np.argwhere(E_box < -1e-14)[0]
        fail("drift", (s_box[i], s_box[j]), "E < 0")
    z2_0 = float(spec.zeta2(0.0))
    if abs(z2_0) > 1e-12:
        fail("drift", 0.0, f"zeta2(0) = {z2_0!r} != 0")
    z2p_pos = np.asarray(spec.zeta2_prime(rs[pos]), dtype=float)
    has_drift = bool(np.any(E_box > 0.0))
    if has_drift and np.any(z2p_pos <= 0.0):
        fail("drift", rs[pos][z2p_pos <= 0.0][0], "zeta2'(r) <= 0 for r > 0")

    def kappa1_fn(R, _spec=spec, _n=n_samples):
        return estimate_kappas(_spec, R, _n).kappa1

    def kappa2_fn(R, _spec=spec, _n=n_samples):
        return estimate_kappas(_spec, R, _n).kappa2

    def kappa3_fn(R, _spec=spec, _n=n_samples):
        return estimate_kappas(_spec, R, _n).kappa3

    return HypothesisReport(
        ell0=ell0,
        B0=B0,
        L0=L0,
        beta0=beta0,
        kappa1=kappa1_fn,
        kappa2=kappa2_fn,
        kappa3=kappa3_fn,
        passed=passed,
        witnesses=witnesses,
        n_samples=_next_pow2(n_samples),
        R_max=R_max,
        A_max=A_max,
    )


# --------------------------------------------------------------------------
# built-in families

def exponential_family(
    m0: float = 1.0,
    tau: float = 1.0,
    mu_const: float = 0.3,
    D0: float = 0.1,
    theta: float = 2.0,
    xi0: float = 0.4,
    xi_support: tuple = (0.2, 2.0),
    g0: float | None = None,
    drift: str = "dprime",
    a_max_hint: float = 4.0,
) -> ModelSpec:
    """Reference family used throughout the simulation literature.

    lam(a) = m0*exp(a/tau), b(a) = exp(a/tau), mu constant, D(r) = D0*r^theta
    with the drift coefficient E = D' (or zero), g constant, and a smooth
    compactly supported differentiation-rate bump.  zeta2 is taken equal to
    the transform induced by D, for which the two-sided drift bounds hold
    with constants theta and theta*sqrt(D0)*R^((theta-1)/2).
    """
    if g0 is None:
        g0 = 1.0 / tau
    if xi0 > g0 + 1e-12:
        raise ValueError("xi0 must not exceed g0 (differentiation <= growth)")
    if D0 <= 0.0:
        raise ValueError("D0 must be positive")
    if theta != 0.0 and theta < 1.0:
        raise ValueError("theta must be 0 or >= 1")
    if drift not in ("dprime", "none"):
        raise ValueError("drift must be 'dprime' or 'none'")
    s1, s2 = xi_support

    def lam(a):
        return m0 * np.exp(np.asarray(a, dtype=float) / tau)

    def bfun(a):
        return np.exp(np.asarray(a, dtype=float) / tau)

    def mufun(a):
        return np.full_like(np.asarray(a, dtype=float), mu_const)

    def Dfun(r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return D0 * r**theta

    if drift == "dprime" and theta != 0.0:
        def Efun(r, s):
            r = np.maximum(np.asarray(r, dtype=float), 0.0)
            return theta * D0 * r ** (theta - 1.0) * np.ones_like(np.asarray(s, dtype=float))
    else:
        def Efun(r, s):
            return np.zeros(np.broadcast(np.asarray(r), np.asarray(s)).shape)

    def gfun(s):
        return np.full_like(np.asarray(s, dtype=float), g0)

    def xifun(s):
        if xi0 == 0.0:
            return np.zeros_like(np.asarray(s, dtype=float))
        return xi0 * bump(s, s1, s2)

    half = (theta + 1.0) / 2.0
    sqrtD0 = math.sqrt(D0)

    def z2(r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return 2.0 * sqrtD0 / (theta + 1.0) * r**half

    def z2p(r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return sqrtD0 * r ** ((theta - 1.0) / 2.0)

    return ModelSpec(
        lam=lam, b=bfun, mu=mufun, D=Dfun, E=Efun, g=gfun, xi=xifun,
        zeta2=z2, zeta2_prime=z2p, tau=tau, a_max_hint=a_max_hint,
    )


def tabulated_function(abscissae, values) -> Callable:
    """Piecewise-linear function from a (abscissa, value) table.

    Values are held constant beyond the table range.
    """
    xs = np.asarray(abscissae, dtype=float)
    ys = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("table needs two same-length columns with >= 2 rows")
    if np.any(np.diff(xs) <= 0.0):
        raise ValueError("table abscissae must be strictly increasing")

    def f(x):
        return np.interp(np.asarray(x, dtype=float), xs, ys)

    return f
