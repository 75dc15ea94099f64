"""Numerical smoothness machinery: finite differences, moduli of smoothness,
Besov seminorms, exponent estimation, and synthetic test functions."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

_MAGIC = b"FQLGRD01"


@dataclass
class FunctionOnGrid:
    """Real values tabulated on a uniform tensor grid over [0,1]^d."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        self.axes = tuple(np.asarray(ax, dtype=float) for ax in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(len(ax) for ax in self.axes):
            raise ValueError("value shape must match the axes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        for ax in self.axes:
            if len(ax) < 4:
                raise ValueError("need at least 4 nodes per axis")
            steps = np.diff(ax)
            if not np.allclose(steps, steps[0], rtol=0, atol=1e-12 * max(1.0, abs(steps[0]))):
                raise ValueError("axes must be uniformly spaced")

    @property
    def ndim(self):
        return len(self.axes)

    def step(self, axis=0):
        ax = self.axes[axis]
        return float(ax[1] - ax[0])

    @classmethod
    def from_callable(cls, fn, resolution=1025, d=1):
        axes = tuple(np.linspace(0.0, 1.0, resolution) for _ in range(d))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = np.asarray(fn(pts), dtype=float).reshape(tuple(len(a) for a in axes))
        return cls(axes, vals)

    def save_csv(self, path):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        header = ",".join([f"x{i}" for i in range(self.ndim)] + ["value"])
        np.savetxt(path, np.stack(cols, axis=-1), delimiter=",", header=header,
                   comments="", fmt="%.17g")

    @classmethod
    def load_csv(cls, path):
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        d = table.shape[1] - 1
        axes = tuple(np.unique(table[:, k]) for k in range(d))
        shape = tuple(len(a) for a in axes)
        return cls(axes, table[:, -1].reshape(shape))

    def save_binary(self, path):
        header = _MAGIC + struct.pack("<BB6x", 1, self.ndim)
        sizes = np.array([len(ax) for ax in self.axes], dtype="<f8")
        payload = np.concatenate([sizes] + [ax.astype("<f8") for ax in self.axes]
                                 + [self.values.astype("<f8").ravel()])
        Path(path).write_bytes(header + payload.tobytes())

    @classmethod
    def load_binary(cls, path):
        raw = Path(path).read_bytes()
        if raw[:8] != _MAGIC:
            raise ValueError("not a grid record")
        _, ndim = struct.unpack("<BB6x", raw[8:16])
        flat = np.frombuffer(raw[16:], dtype="<f8")
        sizes = flat[:ndim].astype(int)
        pos = ndim
        axes = []
        for g in sizes:
            axes.append(flat[pos:pos + g].copy())
            pos += g
        vals = flat[pos:].reshape(tuple(sizes)).copy()
        return cls(tuple(axes), vals)


@dataclass(frozen=True)
class BesovParams:
    alpha: float
    p: float = np.inf
    q: float = np.inf

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be >= 1")

    @property
    def order(self):
        """Difference order used by the seminorm: floor(alpha) + 1."""
        return int(np.floor(self.alpha)) + 1


@dataclass
class ModulusCurve:
    """Modulus of smoothness sampled on a decreasing-to-zero step grid."""

    t_values: np.ndarray        # descending
    omega_values: np.ndarray
    order: int
    p: float

    def __post_init__(self):
        self.t_values = np.asarray(self.t_values, dtype=float)
        self.omega_values = np.asarray(self.omega_values, dtype=float)
        if np.any(np.diff(self.t_values) >= 0):
            raise ValueError("t grid must be strictly decreasing")
        if np.any(self.omega_values < 0):
            raise ValueError("modulus values must be nonnegative")
        # omega is a sup over a growing step set, hence nondecreasing in t
        if np.any(np.diff(self.omega_values) > 1e-12):
            raise ValueError("modulus must be nonincreasing along the descending t grid")


def translation_difference(f: FunctionOnGrid, h_steps: int, order: int, axis: int = 0) -> FunctionOnGrid:
    """Order-r binomial difference with step h_steps grid cells along one axis.

    Evaluated only where the shifted argument stays inside the grid; raises if
    the valid subgrid is empty.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if h_steps < 1:
        raise ValueError("step must be a positive number of grid cells")
    g = f.values.shape[axis]
    valid = g - order * h_steps
    if valid < 1:
        raise ValueError("step too large: empty valid subgrid")
    out = np.zeros_like(np.take(f.values, np.arange(valid), axis=axis))
    for k in range(order + 1):
        sl = np.take(f.values, np.arange(k * h_steps, k * h_steps + valid), axis=axis)
        out = out + comb(order, k) * (-1.0) ** (order - k) * sl
    new_axes = list(f.axes)
    new_axes[axis] = f.axes[axis][:valid]
    if valid < 4:
        # below FunctionOnGrid's resolution floor; hand back raw values
        return out
    return FunctionOnGrid(tuple(new_axes), out)


def _pnorm(values: np.ndarray, p: float) -> float:
    a = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return float(a.max())
    return float(np.mean(a ** p) ** (1.0 / p))


def _axis_step_norms(f: FunctionOnGrid, order: int, p: float):
    """All (h, ||difference||_p) pairs for axis-aligned grid-multiple steps."""
    pairs = []
    for axis in range(f.ndim):
        step = f.step(axis)
        g = f.values.shape[axis]
        max_j = (g - 1) // order
        for j in range(1, max_j + 1):
            d = translation_difference(f, j, order, axis)
            vals = d.values if isinstance(d, FunctionOnGrid) else d
            pairs.append((j * step, _pnorm(vals, p)))
    pairs.sort(key=lambda hv: hv[0])
    return pairs


def modulus_of_smoothness(f: FunctionOnGrid, order: int, p: float,
                          t_grid=None) -> ModulusCurve:
    """sup over axis-aligned steps h <= t of the discrete p-norm of the
    r-th difference, for each t in a decreasing log-spaced grid.

    The p-norm is taken against the uniform probability measure on the valid
    subgrid.  Restricting the sup to axis directions makes the curve a lower
    estimate of the isotropic modulus.
    """
    min_step = min(f.step(axis) for axis in range(f.ndim))
    if t_grid is None:
        t_grid = np.geomspace(1.0, min_step, 25)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < min_step * (1 - 1e-12)):
        raise ValueError("t values below the grid step are unresolvable")
    pairs = _axis_step_norms(f, order, p)
    hs = np.array([h for h, _ in pairs])
    cummax = np.maximum.accumulate([v for _, v in pairs])
    omega = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        k = np.searchsorted(hs, t * (1 + 1e-12), side="right") - 1
        omega[i] = cummax[k] if k >= 0 else 0.0
    order_desc = np.argsort(-t_grid, kind="stable")
    return ModulusCurve(t_grid[order_desc], omega[order_desc], order, p)


def besov_seminorm(f: FunctionOnGrid, params: BesovParams, t_points: int = 41) -> float:
    """Scale-aggregated modulus: the q-integral of omega_r(t)/t^alpha over
    log-spaced t from the grid step up to 1 (max over t when q is infinite)."""
    r = params.order
    if params.alpha >= r:
        raise ValueError("difference order too small for alpha")
    min_step = min(f.step(axis) for axis in range(f.ndim))
    t_grid = np.geomspace(min_step, 1.0, t_points)
    curve = modulus_of_smoothness(f, r, params.p, t_grid)
    t = curve.t_values[::-1]
    ratio = curve.omega_values[::-1] / t ** params.alpha
    if np.isinf(params.q):
        return float(ratio.max())
    integrand = ratio ** params.q
    val = np.trapezoid(integrand, np.log(t))
    return float(val ** (1.0 / params.q))


def besov_norm(f: FunctionOnGrid, params: BesovParams) -> float:
    return _pnorm(f.values, params.p) + besov_seminorm(f, params)


@dataclass
class SmoothnessEstimate:
    """Log-log slope of the modulus curve, clipped to [0, order].

    exponent is None when the curve is flat at zero; then the only honest
    statement is that the smoothness is at least the difference order, and
    saturated is set.
    """

    exponent: float | None
    order: int
    saturated: bool
    curve: ModulusCurve | None = None

    def __str__(self):
        if self.saturated:
            return f"exponent >= {self.order}"
        return f"exponent ~= {self.exponent:.3f}"


def estimate_smoothness_exponent(f: FunctionOnGrid, order: int, p: float,
                                 t_points: int = 25) -> SmoothnessEstimate:
    """Fit log omega against log t over the interior of the step range.

    The two largest and two smallest t values are dropped: the small end
    suffers discretization bias and the large end saturates.
    """
    min_step = min(f.step(axis) for axis in range(f.ndim))
    t_grid = np.geomspace(min_step, 1.0, t_points)
    curve = modulus_of_smoothness(f, order, p, t_grid)
    t = curve.t_values[::-1]
    om = curve.omega_values[::-1]
    keep = slice(2, len(t) - 2)
    t, om = t[keep], om[keep]
    usable = om > 1e-12
    if usable.sum() < 5:
        return SmoothnessEstimate(None, order, True, curve)
    lt, lo = np.log(t[usable]), np.log(om[usable])
    slope = np.polyfit(lt, lo, 1)[0]
    return SmoothnessEstimate(float(np.clip(slope, 0.0, order)), order, False, curve)


# ---------------------------------------------------------------------------
# synthetic functions of prescribed smoothness


def _weierstrass_axis(xs, alpha, terms=26, base=4.0):
    a = base ** (-alpha)
    k = np.arange(terms)
    vals = ((a ** k)[None, :] * np.cos(np.pi * (base ** k)[None, :] * xs[:, None])).sum(axis=1)
    return vals


def _normalize_unit(vals):
    lo, hi = vals.min(), vals.max()
    return (vals - lo) / (hi - lo)


def _hat(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


def synth_function(kind: str, target_alpha: float, d: int = 1, seed: int = 0,
                   resolution: int | None = None, p: float = 2.0) -> FunctionOnGrid:
    """Deterministic-by-seed test functions with a prescribed smoothness profile.

    kinds: "weierstrass" (lacunar cosine series, exponent target_alpha),
    "spline_series" (random hat-function series with dyadic coefficient decay
    2^(-j (alpha + 1/2 - 1/p))), and "piecewise_spiky" (smooth bump plus one
    localized cusp of lower exponent, for inhomogeneity experiments).
    """
    if d not in (1, 2):
        raise ValueError("synthetic functions support d in {1, 2}")
    if kind == "weierstrass" and not (0.0 < target_alpha <= 2.0):
        raise ValueError("weierstrass alpha must lie in (0, 2]")
    g = resolution or (4097 if d == 1 else 257)
    axes = tuple(np.linspace(0.0, 1.0, g) for _ in range(d))
    rng = np.random.default_rng(seed)

    if kind == "weierstrass":
        per_axis = [_normalize_unit(_weierstrass_axis(ax, target_alpha)) for ax in axes]
        vals = per_axis[0] if d == 1 else np.multiply.outer(per_axis[0], per_axis[1])
    elif kind == "spline_series":
        levels = max(2, int(np.log2(g - 1)) - 2)
        decay = target_alpha + 0.5 - 1.0 / p
        axis_vals = []
        for ax in axes:
            v = np.zeros(len(ax))
            for j in range(levels):
                centers = (np.arange(2 ** j) + 0.5) / 2 ** j
                coef = rng.standard_normal(len(centers)) * 2.0 ** (-j * decay)
                for c, ck in zip(centers, coef):
                    v += ck * _hat((ax - c) * 2 ** j * 2)
            axis_vals.append(v)
        vals = axis_vals[0] if d == 1 else axis_vals[0][:, None] + axis_vals[1][None, :]
        vals = _normalize_unit(vals)
    elif kind == "piecewise_spiky":
        cusp_alpha = 0.5 * target_alpha
        x0 = rng.uniform(0.3, 0.7)
        c0 = rng.uniform(0.2, 0.8)

        def spiky(ax):
            bump = np.exp(-((ax - c0) / 0.25) ** 2)
            window = _hat((ax - x0) / 0.2)
            return bump + window * np.abs(ax - x0) ** cusp_alpha
        axis_vals = [spiky(ax) for ax in axes]
        vals = axis_vals[0] if d == 1 else axis_vals[0][:, None] + axis_vals[1][None, :]
        vals = _normalize_unit(vals)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return FunctionOnGrid(axes, vals)


# ---------------------------------------------------------------------------
# dynamic-closure diagnostic


@dataclass
class ClosureEntry:
    net_index: int
    policy_index: int
    estimate: SmoothnessEstimate
    seminorm: float


@dataclass
class ClosureReport:
    """Smoothness of Bellman images of a batch of networks.

    A finite batch cannot verify the closure property over the whole class;
    the report states the batch size and only summarizes what was measured.
    """

    entries: list
    min_exponent: float | None
    max_seminorm: float
    batch_size: int
    params: BesovParams
    note: str = ("finite diagnostic batch: consistency evidence only, not a "
                 "verification of closure over the whole class")


def diagnose_dynamic_closure(mdp, oracle, nets, policies, params: BesovParams,
                             order: int = 1) -> ClosureReport:
    """Apply each policy's Bellman operator to each network and measure the
    image's smoothness exponent and Besov seminorm on the oracle grid."""
    from .oracle import apply_bellman

    entries = []
    exponents = []
    seminorms = []
    axes = oracle.state_axes + (oracle.action_grid,)
    shape = tuple(len(a) for a in axes)
    for ni, net in enumerate(nets):
        fn = (lambda pts, _net=net: _net.forward(pts)) if callable(net) else net
        for pi, policy in enumerate(policies):
            image = apply_bellman(oracle, mdp, fn, policy)
            fog = FunctionOnGrid(axes, image.reshape(shape))
            est = estimate_smoothness_exponent(fog, order, params.p)
            semi = besov_seminorm(fog, params)
            entries.append(ClosureEntry(ni, pi, est, semi))
            seminorms.append(semi)
            if not est.saturated:
                exponents.append(est.exponent)
    min_exp = min(exponents) if exponents else None
    return ClosureReport(entries=entries, min_exponent=min_exp,
                         max_seminorm=max(seminorms), batch_size=len(entries),
                         params=params)
