"""Batch experiment orchestration: seeded sweeps, rate fitting,
decomposition-bound auditing, and report emission."""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .fqi import FqiConfig, decomposition_bound, measure_bellman_residuals, run_lsvi
from .mdp import FixedActionPolicy, Policy, UniformPolicy, sample_visitation
from .oracle import build_oracle, estimate_concentration, ground_truth, subopt
from .rademacher import rate_exponent
from .relunet import ArchitectureSpec, TrainConfig, TrainingDiverged, architecture_for

RETRY_SEED_OFFSET = 777_000_003

CSV_COLUMNS = [
    "n", "K", "seed", "mode", "data_mode", "subopt", "max_residual",
    "kappa_hat", "bound_rhs", "bound_slack", "final_train_loss", "failed",
]

CSV_SCHEMA = {
    "n": "offline sample count of the cell",
    "K": "value-iteration count of the cell",
    "seed": "data/training seed of the cell (post-retry seed when retried)",
    "mode": "ope (policy evaluation) or opl (policy learning)",
    "data_mode": "reuse (full data every iterate) or split (one fold per iterate)",
    "subopt": "measured sub-optimality against the grid oracle",
    "max_residual": "max over k of the visitation-RMS distance of Q_{k+1} from the Bellman image of Q_k",
    "kappa_hat": "probe-based lower estimate of the concentration coefficient (sweep-wide)",
    "bound_rhs": "decomposition bound evaluated with kappa_hat and max_residual",
    "bound_slack": "bound_rhs - subopt (negative values flag a violation)",
    "final_train_loss": "training MSE of the last fitted iterate",
    "failed": "1 when the cell failed after one retry, else 0",
}


@dataclass
class ExperimentConfig:
    """Sweep axes and shared settings for a batch of value-iteration runs.

    When arch is None, each cell picks its architecture from the rate-driven
    selector using (alpha, p) and the cell's sample count.  epsilon/delta feed
    the reported sample-size hint only; nothing is gated on it.
    """

    mdp: dict = field(default_factory=lambda: {"kind": "chain5"})
    n_values: tuple = (1024, 2048, 4096)
    k_values: tuple = (10,)
    seeds: tuple = (0, 1, 2)
    modes: tuple = ("ope",)
    data_modes: tuple = ("reuse",)
    arch: ArchitectureSpec | None = None
    alpha: float = 2.0
    p: float = float("inf")
    train: TrainConfig = field(default_factory=TrainConfig)
    ope_return: str = "mean"
    epsilon: float = 0.1
    delta: float = 0.05
    residual_samples: int = 4096
    probe_horizons: tuple = tuple(range(0, 21))
    jobs: int = 1
    # when set, each cell's epoch count is chosen so every fit takes about
    # this many gradient steps regardless of n (isolates the statistical
    # effect of the sample size from the optimization effort)
    train_steps_target: int | None = None

    def __post_init__(self):
        for axis, name in ((self.n_values, "n_values"), (self.k_values, "k_values"),
                           (self.seeds, "seeds"), (self.modes, "modes"),
                           (self.data_modes, "data_modes")):
            if len(axis) == 0:
                raise ValueError(f"sweep axis {name} must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")

    def cells(self):
        for mode in self.modes:
            for data_mode in self.data_modes:
                for k in self.k_values:
                    for n in self.n_values:
                        for seed in self.seeds:
                            yield (int(n), int(k), int(seed), mode, data_mode)


@dataclass
class CellRecord:
    n: int
    K: int
    seed: int
    mode: str
    data_mode: str
    subopt: float = float("nan")
    max_residual: float = float("nan")
    kappa_hat: float = float("nan")
    bound_rhs: float = float("nan")
    bound_slack: float = float("nan")
    final_train_loss: float = float("nan")
    failed: bool = False
    fail_reason: str = ""
    wallclock: float = 0.0


@dataclass
class RateFit:
    mode: str
    data_mode: str
    K: int
    slope: float
    slope_stderr: float
    n_values: list
    mean_subopt: list


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    kappa_hat: float
    rate_fits: list
    theory: dict
    sizing_hint: dict


def sample_size_hint(epsilon: float, delta: float, alpha: float, d: int) -> dict:
    """Constant-free fixed point of n = (1/eps^2)^(1+d/alpha) log^6 n + ...

    Reported as a hint only; the analysis leaves the absolute constants
    unspecified, so the value fixes them at 1.
    """
    expo = 1.0 + d / alpha
    n = float(np.e ** 2)
    for _ in range(60):
        n = ((1.0 / epsilon ** 2) ** expo * np.log(n) ** 6
             + (1.0 / epsilon ** 2) * (np.log(1.0 / delta) + np.log(np.log(n))))
    return {"epsilon": epsilon, "delta": delta, "exponent": expo, "n_hint": float(n)}


def _ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(xc @ y / (xc @ xc))
    resid = y - (y.mean() + slope * xc)
    dof = max(len(x) - 2, 1)
    se = float(np.sqrt(resid @ resid / dof / (xc @ xc)))
    return slope, se


def default_probes(n_actions: int):
    return [UniformPolicy(n_actions), FixedActionPolicy(0, n_actions),
            FixedActionPolicy(n_actions - 1, n_actions)]


def run_sweep(cfg: ExperimentConfig, eta: Policy | None = None,
              target_policy: Policy | None = None) -> ExperimentReport:
    """Execute every sweep cell, audit the decomposition bound per cell, and
    fit the empirical error-vs-n rate per (mode, data_mode, K) group.

    Cell failures are retried once with a shifted seed and then recorded, never
    aborting the sweep.  Cells run in parallel when cfg.jobs > 1; aggregation
    is order-independent.
    """
    from .mdp import mdp_from_config

    mdp = mdp_from_config(cfg.mdp)
    eta = eta or UniformPolicy(mdp.n_actions)
    target_policy = target_policy or UniformPolicy(mdp.n_actions)
    d = mdp.dim

    oracle_pi = ground_truth(build_oracle(mdp), mdp, target_policy)
    oracle_star = ground_truth(build_oracle(mdp), mdp, None)
    conc = estimate_concentration(mdp, eta, default_probes(mdp.n_actions),
                                  cfg.probe_horizons)
    kappa = conc.kappa_hat
    mu_data = sample_visitation(mdp, eta, cfg.residual_samples, seed=940_001)
    mu_samples = (mu_data.states, mu_data.actions)

    def cell_train(n, per_fit, use_seed):
        train = replace(cfg.train, seed=use_seed)
        if cfg.train_steps_target is not None:
            batch = min(train.batch_size or per_fit, per_fit)
            steps_per_epoch = (per_fit + batch - 1) // batch
            epochs = max(1, int(np.ceil(cfg.train_steps_target / steps_per_epoch)))
            train = replace(train, epochs=epochs)
        return train

    def run_cell(cell):
        n, k_iter, seed, mode, data_mode = cell
        arch = cfg.arch or architecture_for(n, cfg.alpha, cfg.p, d)
        rec = CellRecord(n=n, K=k_iter, seed=seed, mode=mode, data_mode=data_mode,
                         kappa_hat=kappa)
        t0 = time.perf_counter()
        per_fit = n // k_iter if data_mode == "split" else n
        for attempt, use_seed in enumerate((seed, seed + RETRY_SEED_OFFSET)):
            try:
                data = sample_visitation(mdp, eta, n, use_seed)
                fqi_cfg = FqiConfig(
                    iterations=k_iter, mode=mode, arch=arch,
                    train=cell_train(n, per_fit, use_seed),
                    target_policy=target_policy if mode == "ope" else None,
                    data_mode=data_mode, ope_return=cfg.ope_return)
                oracle = oracle_pi if mode == "ope" else oracle_star
                result, trace = run_lsvi(data, fqi_cfg, mdp, oracle)
                resid = measure_bellman_residuals(
                    trace, oracle, mdp, mu_samples,
                    policy=target_policy if mode == "ope" else None)
                rec.seed = use_seed
                rec.subopt = subopt(oracle, result.value if mode == "ope" else result.policy)
                rec.max_residual = float(resid.max())
                rec.bound_rhs = decomposition_bound(mode, kappa, mdp.gamma, k_iter, rec.max_residual)
                rec.bound_slack = rec.bound_rhs - rec.subopt
                rec.final_train_loss = float(trace.train_losses[-1])
                rec.failed = False
                rec.fail_reason = ""
                break
            except TrainingDiverged as exc:
                rec.failed = True
                rec.fail_reason = f"attempt {attempt}: {exc}"
        rec.wallclock = time.perf_counter() - t0
        return rec

    cells = list(cfg.cells())
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            records = dict(zip(cells, pool.map(run_cell, cells)))
    else:
        records = {cell: run_cell(cell) for cell in cells}
    ordered = [records[c] for c in cells]

    rate_fits = []
    for mode in cfg.modes:
        for data_mode in cfg.data_modes:
            for k_iter in cfg.k_values:
                group = [r for r in ordered
                         if (r.mode, r.data_mode, r.K) == (mode, data_mode, k_iter)
                         and not r.failed]
                by_n = {}
                for r in group:
                    by_n.setdefault(r.n, []).append(r.subopt)
                ns = sorted(by_n)
                if len(ns) < 4:
                    continue
                means = [float(np.mean(by_n[n])) for n in ns]
                slope, se = _ols_slope(np.log(ns), np.log(means))
                rate_fits.append(RateFit(mode=mode, data_mode=data_mode, K=int(k_iter),
                                         slope=slope, slope_stderr=se,
                                         n_values=ns, mean_subopt=means))

    theory = asdict(rate_exponent(cfg.alpha, d))
    return ExperimentReport(
        config=cfg, records=ordered, kappa_hat=kappa, rate_fits=rate_fits,
        theory=theory, sizing_hint=sample_size_hint(cfg.epsilon, cfg.delta, cfg.alpha, d),
    )


@dataclass
class AuditSummary:
    """Decomposition-bound audit over a finished sweep.

    kappa_hat under-estimates the true shift coefficient, so a negative slack
    can mean either a bug or an insufficient probe set; the audit reports the
    violations and leaves the triage (enlarging the probe set) to the caller.
    """

    cells_checked: int
    violations: list
    min_slack: float
    note: str = ("violations can stem from kappa_hat under-estimation; retry "
                 "with an enlarged probe set before treating them as failures")


def audit_decomposition(report: ExperimentReport) -> AuditSummary:
    checked = 0
    violations = []
    min_slack = float("inf")
    for rec in report.records:
        if rec.failed or not np.isfinite(rec.bound_slack):
            continue
        checked += 1
        min_slack = min(min_slack, rec.bound_slack)
        if rec.bound_slack < 0:
            violations.append(rec)
    return AuditSummary(cells_checked=checked, violations=violations,
                        min_slack=min_slack if checked else float("nan"))


# ---------------------------------------------------------------------------
# report emission


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(report: ExperimentReport, out_dir) -> None:
    """Emit report.csv (one deterministic row per cell), report.json
    (aggregates, exponents, audit, timing), and the CSV schema file.

    Wallclock lives only in report.json: the CSV must reproduce bit-exactly
    across reruns of the same config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [",".join(CSV_COLUMNS)]
    for rec in report.records:
        row = [_fmt(getattr(rec, col)) for col in CSV_COLUMNS]
        lines.append(",".join(row))
    (out / "report.csv").write_text("\n".join(lines) + "\n")
    (out / "report_schema.json").write_text(json.dumps(CSV_SCHEMA, indent=2) + "\n")

    audit = audit_decomposition(report)
    payload = {
        "kappa_hat": report.kappa_hat,
        "rate_fits": [asdict(f) for f in report.rate_fits],
        "theory_exponents": report.theory,
        "sizing_hint": report.sizing_hint,
        "audit": {
            "cells_checked": audit.cells_checked,
            "violation_count": len(audit.violations),
            "min_slack": audit.min_slack,
            "note": audit.note,
        },
        "timing_seconds_nondeterministic": {
            f"{r.mode}/{r.data_mode}/n{r.n}/K{r.K}/s{r.seed}": r.wallclock
            for r in report.records
        },
        "failures": [
            {"n": r.n, "K": r.K, "seed": r.seed, "reason": r.fail_reason}
            for r in report.records if r.failed
        ],
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
