"""Empirical and localized Rademacher complexity estimation, sub-root
fixed-point solving, and the theoretical rate-exponent calculator."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .relunet import ArchitectureSpec, ReluNetwork, TrainConfig, fit_least_squares


@dataclass
class RademacherEstimate:
    """Average over sign draws of the supremum correlation with the class.

    For finite classes the per-draw supremum is exact; for network classes it
    comes from gradient ascent and is a lower estimate of the true supremum,
    flagged through bias_note.
    """

    value: float
    n: int
    sigma_draws: int
    sup_method: str                 # "exhaustive" | "trained"
    stderr: float
    bias_note: str | None = None
    per_draw: np.ndarray | None = None


class FiniteFunctionClass:
    """Function class given by its value matrix at the sample points."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("expected a (n_functions, n_points) matrix")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite function values")

    @classmethod
    def from_callables(cls, fns, xs):
        return cls(np.stack([np.asarray(fn(xs), dtype=float) for fn in fns]))

    @classmethod
    def all_sign_patterns(cls, n_points: int):
        """Every +-1 labeling of the points; 2^n functions."""
        if n_points > 20:
            raise ValueError("sign-pattern enumeration is exponential; keep n <= 20")
        codes = np.arange(2 ** n_points)[:, None]
        bits = (codes >> np.arange(n_points)) & 1
        return cls(2.0 * bits - 1.0)

    def sup_correlation(self, sigma: np.ndarray) -> float:
        return float(np.max(self.values @ sigma) / len(sigma))


class NetworkFunctionClass:
    """Constrained ReLU class; the supremum is approximated by training."""

    def __init__(self, spec: ArchitectureSpec, train: TrainConfig, input_dim: int):
        self.spec = spec
        self.train = train
        self.input_dim = input_dim

    def sup_correlation(self, sigma: np.ndarray, xs: np.ndarray, seed: int) -> float:
        # least-squares fit of the +-1 targets maximizes alignment within [0,1]
        cfg = replace(self.train, seed=seed)
        net = ReluNetwork.zeros(self.input_dim, self.spec)
        fitted = fit_least_squares(net, xs, 0.5 * (sigma + 1.0), cfg)
        out = fitted.forward(xs)
        base = float(sigma @ out / len(sigma))
        # the zero function is always in the class; never report below it
        return max(base, 0.0)


def empirical_rademacher(function_class, xs, sigma_draws: int, seed: int) -> RademacherEstimate:
    """Monte-Carlo Rademacher average: mean over sign draws of the supremum of
    (1/n) sum_i sigma_i f(x_i)."""
    if sigma_draws < 1:
        raise ValueError("need at least one sign draw")
    if isinstance(function_class, FiniteFunctionClass):
        n = function_class.values.shape[1]
    else:
        xs = np.asarray(xs, dtype=float)
        n = len(xs)
    if n < 1:
        raise ValueError("need a nonempty point set")
    rng = np.random.default_rng(seed)
    sups = np.empty(sigma_draws)
    for i in range(sigma_draws):
        sigma = rng.choice([-1.0, 1.0], size=n)
        if isinstance(function_class, FiniteFunctionClass):
            sups[i] = function_class.sup_correlation(sigma)
        else:
            sups[i] = function_class.sup_correlation(sigma, xs, seed=int(seed) * 1000003 + i)
    exhaustive = isinstance(function_class, FiniteFunctionClass)
    return RademacherEstimate(
        value=float(sups.mean()), n=n, sigma_draws=sigma_draws,
        sup_method="exhaustive" if exhaustive else "trained",
        stderr=float(sups.std(ddof=1) / math.sqrt(sigma_draws)) if sigma_draws > 1 else 0.0,
        bias_note=None if exhaustive else "trained supremum: lower estimate of the true sup",
        per_draw=sups,
    )


def localized_rademacher(spec: ArchitectureSpec, anchor: ReluNetwork, radius: float,
                         xs, mu_samples, sigma_draws: int, seed: int,
                         ascent_steps: int = 120, ascent_lr: float = 0.1,
                         penalty: float = 10.0, restarts: int = 2) -> RademacherEstimate:
    """Rademacher average of {f - anchor : f feasible, ||f - anchor||^2 <= radius}.

    The squared norm is Monte-Carlo estimated on mu_samples.  Ascent maximizes
    the signed correlation with a hinge penalty outside the ball; candidates
    are accepted only if the evaluated norm is inside the ball, and the zero
    difference (f = anchor) is always feasible, so the estimate is >= 0.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    xs = np.asarray(xs, dtype=float)
    mu_samples = np.asarray(mu_samples, dtype=float)
    n, m = len(xs), len(mu_samples)
    anchor_xs = anchor.forward(xs)
    anchor_mu = anchor.forward(mu_samples)
    rng = np.random.default_rng(seed)
    sups = np.empty(sigma_draws)
    rejected_all = True
    for i in range(sigma_draws):
        sigma = rng.choice([-1.0, 1.0], size=n)
        best = 0.0  # the anchor itself: zero difference, always inside the ball
        for _ in range(restarts):
            cand = anchor.copy()
            for l in range(cand.height):
                cand.weights[l] = cand.weights[l] + 0.01 * rng.standard_normal(cand.weights[l].shape)
            cand._project_inplace()
            for step in range(ascent_steps):
                out_xs = cand.forward(xs, clamp=False)
                out_mu = cand.forward(mu_samples, clamp=False)
                sq = float(np.mean((out_mu - anchor_mu) ** 2))
                w_xs = sigma / n
                gw, gb = cand.weighted_output_gradient(xs, w_xs)
                if sq > radius:
                    pw, pb = cand.weighted_output_gradient(
                        mu_samples, -penalty * 2.0 * (out_mu - anchor_mu) / m)
                    gw = [a + b for a, b in zip(gw, pw)]
                    gb = [a + b for a, b in zip(gb, pb)]
                for l in range(cand.height):
                    cand.weights[l] += ascent_lr * gw[l]
                    cand.biases[l] += ascent_lr * gb[l]
                if (step + 1) % 20 == 0 or step + 1 == ascent_steps:
                    cand._project_inplace()
                    f_xs = cand.forward(xs)
                    f_mu = cand.forward(mu_samples)
                    if float(np.mean((f_mu - anchor_mu) ** 2)) <= radius:
                        rejected_all = False
                        corr = float(sigma @ (f_xs - anchor_xs) / n)
                        best = max(best, corr)
        sups[i] = best
    note = "trained supremum: lower estimate of the true sup"
    if rejected_all:
        note += "; no ascent candidate stayed inside the radius (estimate is the anchor's 0)"
    return RademacherEstimate(
        value=float(sups.mean()), n=n, sigma_draws=sigma_draws, sup_method="trained",
        stderr=float(sups.std(ddof=1) / math.sqrt(sigma_draws)) if sigma_draws > 1 else 0.0,
        bias_note=note, per_draw=sups,
    )


# ---------------------------------------------------------------------------
# sub-root functions and fixed points


@dataclass
class SubRootSpec:
    """Nonnegative, nondecreasing psi with psi(r)/sqrt(r) nonincreasing.

    forms: "affine" gives psi(r) = a*sqrt(r) + b; "tabulated" interpolates
    monotone samples; "theoretical" evaluates the statistical-error envelope
    with unit constants (see theoretical_psi).
    """

    form: str
    a: float | None = None
    b: float | None = None
    r_values: np.ndarray | None = None
    psi_values: np.ndarray | None = None
    resolution: int | None = None
    n: int | None = None
    alpha: float | None = None
    d: int | None = None
    beta: float | None = None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.form == "affine":
            return self.a * np.sqrt(r) + self.b
        if self.form == "tabulated":
            return np.interp(r, self.r_values, self.psi_values)
        if self.form == "theoretical":
            return theoretical_psi(self.resolution, self.n, self.alpha, self.d, self.beta, r)
        raise ValueError(f"unknown form {self.form!r}")

    def closed_form_fixed_point(self) -> float:
        """Quadratic-formula fixed point, affine form only: sqrt(r*) = (a + sqrt(a^2+4b))/2."""
        if self.form != "affine":
            raise ValueError("closed form available for the affine form only")
        s = 0.5 * (self.a + math.sqrt(self.a * self.a + 4.0 * self.b))
        return s * s

    def check_sub_root(self, r_lo, r_hi, points=64):
        grid = np.geomspace(max(r_lo, 1e-300), r_hi, points)
        vals = self(grid)
        if np.any(vals < -1e-12):
            raise ValueError("psi must be nonnegative")
        if np.any(np.diff(vals) < -1e-9 * max(1.0, np.abs(vals).max())):
            raise ValueError("psi must be nondecreasing")
        ratio = vals / np.sqrt(grid)
        if np.any(np.diff(ratio) > 1e-9 * max(1.0, ratio.max())):
            raise ValueError("psi(r)/sqrt(r) must be nonincreasing")


def sub_root_fixed_point(psi, r_max: float, tol: float) -> float:
    """Bisection for the positive fixed point r* = psi(r*).

    The bracket starts at tol^2 rather than 0 because psi(0) may vanish and
    make 0 a spurious fixed point; sub-rootness makes psi(r) - r cross from
    positive to negative exactly once on the bracket.
    """
    if tol <= 0 or r_max <= tol * tol:
        raise ValueError("need tol > 0 and r_max > tol^2")
    if isinstance(psi, SubRootSpec):
        psi.check_sub_root(tol * tol, r_max)
    lo, hi = tol * tol, float(r_max)
    g_lo = float(psi(lo)) - lo
    g_hi = float(psi(hi)) - hi
    if g_lo <= 0.0:
        raise ValueError("psi(tol^2) <= tol^2: no positive crossing above the bracket floor")
    if g_hi >= 0.0:
        raise ValueError("psi(r_max) >= r_max: enlarge r_max")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(psi(mid)) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def theoretical_psi(resolution: int, n: int, alpha: float, d: int, beta: float, r) -> np.ndarray:
    """Statistical-error envelope with unit constants.

    psi(r) = n^(-beta-1/2) sqrt(N (log^2 N + log n)) + n^(-beta(1-d/(2 alpha))-1/2)
           + sqrt(r/n) sqrt(N (log^2 N + log n)) + sqrt(r) n^(-(1-beta d/alpha)/2)
           + 1/n,  with N the network resolution parameter.
    """
    if resolution < 1 or n < 2 or alpha <= 0 or d < 1:
        raise ValueError("domain violation")
    if not (0.0 < beta < alpha / d):
        raise ValueError("need beta in (0, alpha/d)")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    log_n = math.log(n)
    cap = math.sqrt(resolution * (math.log(resolution) ** 2 + log_n))
    term1 = n ** (-beta - 0.5) * cap
    term2 = n ** (-beta * (1.0 - d / (2.0 * alpha)) - 0.5)
    term3 = np.sqrt(r / n) * cap
    term4 = np.sqrt(r) * n ** (-0.5 * (1.0 - beta * d / alpha))
    return term1 + term2 + term3 + term4 + 1.0 / n


@dataclass(frozen=True)
class RateExponents:
    """Closed-form exponents of the convergence-rate analysis."""

    beta: float
    n_exponent: float          # network resolution grows like n^n_exponent
    stat_exponent: float       # statistical error decays like n^-stat_exponent
    sample_exponent: float     # samples scale like (1/eps^2)^sample_exponent


def rate_exponent(alpha: float, d: int) -> RateExponents:
    if alpha <= 0 or d < 1:
        raise ValueError("need alpha > 0 and d >= 1")
    beta = 1.0 / (2.0 + d * d / (alpha * (alpha + d)))
    n_exp = (beta + 0.5) * d / (2.0 * alpha + d)
    stat = 0.5 / (2.0 * alpha / (2.0 * alpha + d) + d / alpha)
    sample = 1.0 + d / alpha
    return RateExponents(beta=beta, n_exponent=n_exp, stat_exponent=stat, sample_exponent=sample)
