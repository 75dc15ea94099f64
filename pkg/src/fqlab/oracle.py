"""Grid-based ground truth: Bellman quadrature, value iteration, sub-optimality,
and concentration-coefficient estimation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .mdp import Policy, SyntheticMdp

DEFAULT_RESOLUTION = {1: 201, 2: 51}
F_VALUE_CAP = 10.0  # reject candidate functions outside [-10, 10] before quadrature


class OracleError(RuntimeError):
    pass


def _state_axes(mdp: SyntheticMdp, resolution):
    kernel = mdp.kernel
    if getattr(kernel, "is_finite", False):
        if mdp.state_dim == 0:
            return ()
        return (kernel.nodes.copy(),)
    if mdp.state_dim == 0:
        return ()
    if mdp.state_dim not in DEFAULT_RESOLUTION:
        raise OracleError("grid oracles support state_dim <= 2 only")
    g = resolution or DEFAULT_RESOLUTION[mdp.state_dim]
    if g < 2:
        raise ValueError("need at least 2 grid nodes per axis")
    return tuple(np.linspace(0.0, 1.0, g) for _ in range(mdp.state_dim))


def _axis_weights(axis):
    # trapezoid node weights: half cells at the ends
    w = np.empty(len(axis))
    w[1:-1] = 0.5 * (axis[2:] - axis[:-2])
    w[0] = 0.5 * (axis[1] - axis[0])
    w[-1] = 0.5 * (axis[-1] - axis[-2])
    return w


@dataclass
class GridOracle:
    """Tensor-product grid over the state-action space with tabulation machinery.

    Populated by value iteration (see ground_truth); immutable afterwards and
    safe to share read-only.
    """

    mdp: SyntheticMdp
    state_axes: tuple
    nodes: np.ndarray           # (S, state_dim) state grid nodes
    node_weights: np.ndarray    # (S,) quadrature weights (counting measure if finite)
    action_grid: np.ndarray
    next_op: object
    rewards: np.ndarray         # (S, A) mean rewards on the grid
    tol: float = 1e-8
    q: np.ndarray | None = None             # (S, A) once populated
    target: str | Policy | None = None      # "optimal" or the evaluated policy
    sweep_deltas: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def populated(self):
        return self.q is not None

    def init_mass(self):
        return self.mdp.init_dist.mass_on_nodes(self.nodes, self.node_weights)

    def policy_probs(self, policy: Policy):
        return policy.probs(self.nodes)

    def x_grid(self):
        """All (state, action) grid points as network inputs, row-major in (node, action)."""
        s_rep = np.repeat(self.nodes, len(self.action_grid), axis=0)
        a_rep = np.tile(self.action_grid, self.n_nodes)
        return np.concatenate([s_rep, a_rep[:, None]], axis=1)

    def tabulate(self, f) -> np.ndarray:
        """Evaluate a callable on the grid, or pass a (S, A) table through."""
        if callable(f):
            vals = np.asarray(f(self.x_grid()), dtype=float).reshape(self.n_nodes, len(self.action_grid))
        else:
            vals = np.asarray(f, dtype=float)
            if vals.shape != (self.n_nodes, len(self.action_grid)):
                raise ValueError("tabulated values have the wrong grid shape")
        if not np.all(np.isfinite(vals)):
            raise ValueError("function values must be finite on the grid")
        if np.abs(vals).max() > F_VALUE_CAP:
            raise ValueError(f"function values escape [-{F_VALUE_CAP}, {F_VALUE_CAP}]")
        return vals

    def value_of(self, q_table, policy: Policy | None):
        """Initial-state value by quadrature: E_rho[ aggregated q ]."""
        rho = self.init_mass()
        if policy is None:
            return float(rho @ q_table.max(axis=1))
        return float(rho @ np.sum(self.policy_probs(policy) * q_table, axis=1))

    def interpolator(self, table):
        """Multilinear interpolant of a (S, A) table over the full input cube."""
        shape = tuple(len(ax) for ax in self.state_axes) + (len(self.action_grid),)
        vals = np.asarray(table, dtype=float).reshape(shape)
        if not self.state_axes:
            return lambda pts: np.interp(np.asarray(pts)[:, -1], self.action_grid, vals)
        axes = self.state_axes + (self.action_grid,)
        rgi = RegularGridInterpolator(axes, vals, method="linear", bounds_error=False, fill_value=None)
        return lambda pts: rgi(np.asarray(pts, dtype=float))


def build_oracle(mdp: SyntheticMdp, resolution: int | None = None, tol: float = 1e-8) -> GridOracle:
    """Assemble the grid, quadrature weights, transition table, and rewards."""
    axes = _state_axes(mdp, resolution)
    if not axes:
        nodes = np.zeros((1, 0))
        weights = np.ones(1)
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        if getattr(mdp.kernel, "is_finite", False):
            weights = np.ones(len(nodes))
        else:
            weights = np.ones(len(nodes))
            for k, ax in enumerate(axes):
                wk = _axis_weights(ax)
                shape = [1] * len(axes)
                shape[k] = len(ax)
                weights = weights * np.broadcast_to(wk.reshape(shape), tuple(len(a) for a in axes)).ravel()

    next_op = mdp.kernel.node_transition(axes, mdp.action_grid)
    s_rep = np.repeat(nodes, len(mdp.action_grid), axis=0)
    a_rep = np.tile(mdp.action_grid, len(nodes))
    rewards = np.asarray(mdp.reward_mean(s_rep, a_rep), dtype=float).reshape(len(nodes), len(mdp.action_grid))
    return GridOracle(mdp=mdp, state_axes=axes, nodes=nodes, node_weights=weights,
                      action_grid=mdp.action_grid.copy(), next_op=next_op, rewards=rewards, tol=tol)


def apply_bellman(oracle: GridOracle, mdp: SyntheticMdp, f, policy: Policy | None = None) -> np.ndarray:
    """One Bellman sweep on the grid: expected reward plus discounted continuation.

    policy=None applies the optimality backup (max over the action grid);
    otherwise the continuation integrates f(s', .) against the policy on the
    action grid.  The next-state integral uses the tabulated kernel masses.
    """
    table = oracle.tabulate(f)
    if policy is None:
        g = table.max(axis=1)
    else:
        g = np.sum(oracle.policy_probs(policy) * table, axis=1)
    return oracle.rewards + mdp.gamma * oracle.next_op.expect(g)


def max_sweeps(gamma: float, tol: float, margin: int = 50) -> int:
    if gamma == 0.0:
        return 2 + margin
    target = tol * (1.0 - gamma)
    if target >= 1.0:
        return 1 + margin
    return int(np.ceil(np.log(target) / np.log(gamma))) + margin


def ground_truth(oracle: GridOracle, mdp: SyntheticMdp, policy: Policy | None = None,
                 tol: float | None = None) -> GridOracle:
    """Populate the oracle with the Bellman fixed point by value iteration.

    Raises OracleError if the sweep count exceeds the contraction bound plus a
    safety margin, which signals a mis-specified kernel.
    """
    tol = oracle.tol if tol is None else tol
    q = np.zeros_like(oracle.rewards)
    cap = max_sweeps(mdp.gamma, tol)
    deltas = []
    for _ in range(cap):
        q_new = apply_bellman(oracle, mdp, q, policy)
        delta = float(np.abs(q_new - q).max())
        deltas.append(delta)
        q = q_new
        if delta <= tol:
            break
    else:
        raise OracleError("value iteration failed to contract within the sweep budget")
    vmax = 1.0 / (1.0 - mdp.gamma)
    if q.min() < -1e-9 or q.max() > vmax + 1e-9:
        raise OracleError("tabulated values escaped [0, 1/(1-gamma)]")
    oracle.q = q
    oracle.target = "optimal" if policy is None else policy
    oracle.sweep_deltas = deltas
    oracle.tol = tol
    return oracle


def oracle_value(oracle: GridOracle) -> float:
    """V under the populated target: E_rho,pi[Q^pi] or E_rho[max_a Q*]."""
    if not oracle.populated:
        raise OracleError("oracle not populated")
    policy = None if oracle.target == "optimal" else oracle.target
    return oracle.value_of(oracle.q, policy)


def subopt(oracle: GridOracle, estimate) -> float:
    """Sub-optimality of a value estimate (float) or a learned policy.

    Value estimates compare against the populated fixed point's initial value;
    policies are scored as E_rho[ V*(s) - Q*(s, policy(s)) ] on the grid.
    """
    if not oracle.populated:
        raise OracleError("oracle not populated")
    if isinstance(estimate, Policy):
        if oracle.target != "optimal":
            raise OracleError("policy sub-optimality needs the optimal-target oracle")
        rho = oracle.init_mass()
        v_star = oracle.q.max(axis=1)
        picked = oracle.q[np.arange(oracle.n_nodes), estimate.act(oracle.nodes)]
        return float(rho @ (v_star - picked))
    return abs(oracle_value(oracle) - float(estimate))


# ---------------------------------------------------------------------------
# concentration coefficient


@dataclass
class ConcentrationReport:
    """Probe-based lower estimate of the worst-case occupancy density ratio.

    kappa_hat maximizes nu/mu over finitely many probe policies, horizons, and
    grid cells, so it under-estimates the supremum over all realizable
    occupancy distributions; it is reported as a lower estimate, never as
    exact.
    """

    kappa_hat: float
    argmax_probe: int
    argmax_horizon: int
    argmax_cell: tuple
    mu: np.ndarray                     # (S, A) tabulated visitation mass
    nu_tables: dict                    # (probe_idx, t) -> (S, A) occupancy mass
    probe_policies: list
    undefined_cells: list              # cells where mu < 1e-12 but some nu has mass
    note: str = ("kappa_hat is a lower estimate: only finitely many probe "
                 "policies and horizons were tabulated")


def tabulate_visitation(oracle: GridOracle, eta: Policy, tail_tol: float = 1e-14) -> np.ndarray:
    """Discounted visitation mass on the grid by explicit geometric-series summation."""
    mdp = oracle.mdp
    rho = oracle.init_mass()
    eta_probs = oracle.policy_probs(eta)
    occ = rho[:, None] * eta_probs
    mu = (1.0 - mdp.gamma) * occ.copy()
    if mdp.gamma > 0.0:
        t_max = int(np.ceil(np.log(tail_tol) / np.log(mdp.gamma)))
        coef = 1.0 - mdp.gamma
        for _ in range(t_max):
            coef *= mdp.gamma
            nxt = oracle.next_op.push(occ)
            occ = nxt[:, None] * eta_probs
            mu += coef * occ
    return mu


def occupancy_at(oracle: GridOracle, policy: Policy, t: int) -> np.ndarray:
    """Joint (state, action) occupancy after t steps from the initial distribution."""
    probs = oracle.policy_probs(policy)
    occ = oracle.init_mass()[:, None] * probs
    for _ in range(t):
        occ = oracle.next_op.push(occ)[:, None] * probs
    return occ


def estimate_concentration(mdp: SyntheticMdp, eta: Policy, probes: list, horizon_set,
                           resolution: int | None = None) -> ConcentrationReport:
    """Estimate the concentration coefficient by tabulating probe occupancies.

    Cells where the visitation mass is below 1e-12 while a probe assigns mass
    are reported as undefined (infinite ratio) rather than silently clipped.
    """
    if not probes:
        raise ValueError("need at least one probe policy")
    oracle = build_oracle(mdp, resolution)
    mu = tabulate_visitation(oracle, eta)
    best = (-np.inf, -1, -1, (0, 0))
    nu_tables = {}
    undefined = []
    defined = mu >= 1e-12
    for pi_idx, probe in enumerate(probes):
        occ = oracle.init_mass()[:, None] * oracle.policy_probs(probe)
        t_prev = 0
        for t in sorted(set(int(t) for t in horizon_set)):
            for _ in range(t - t_prev):
                occ = oracle.next_op.push(occ)[:, None] * oracle.policy_probs(probe)
            t_prev = t
            nu_tables[(pi_idx, t)] = occ.copy()
            bad = (~defined) & (occ > 1e-12)
            for cell in zip(*np.nonzero(bad)):
                undefined.append((pi_idx, t, cell))
            ratio = np.where(defined, occ / np.where(defined, mu, 1.0), 0.0)
            cell_flat = int(np.argmax(ratio))
            val = float(ratio.ravel()[cell_flat])
            if val > best[0]:
                best = (val, pi_idx, t, np.unravel_index(cell_flat, ratio.shape))
    if undefined:
        kappa_hat = float("inf")
    else:
        # two probability measures on the same cells: the max ratio is >= 1,
        # shaved at most by float summation noise
        kappa_hat = max(best[0], 1.0)
    return ConcentrationReport(
        kappa_hat=kappa_hat, argmax_probe=best[1], argmax_horizon=best[2],
        argmax_cell=tuple(int(c) for c in best[3]), mu=mu, nu_tables=nu_tables,
        probe_policies=list(probes), undefined_cells=undefined,
    )
