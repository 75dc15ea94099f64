"""Command-line entry points: data generation, single runs, rate sweeps,
smoothness analysis, Rademacher estimation, and full reports."""
from __future__ import annotations

import argparse
import json
from dataclasses import replace
from pathlib import Path

import numpy as np


def _load_json(path):
    return json.loads(Path(path).read_text())


def _float(text):
    return float("inf") if text in ("inf", "infinity") else float(text)


def _train_config(args):
    from .relunet import TrainConfig

    kw = {}
    if getattr(args, "epochs", None) is not None:
        kw["epochs"] = args.epochs
    if getattr(args, "restarts", None) is not None:
        kw["restarts"] = args.restarts
    if getattr(args, "learning_rate", None) is not None:
        kw["learning_rate"] = args.learning_rate
    return TrainConfig(**kw)


def cmd_gen_data(args):
    from .mdp import UniformPolicy, mdp_from_config, sample_visitation

    mdp = mdp_from_config(args.mdp)
    data = sample_visitation(mdp, UniformPolicy(mdp.n_actions), args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        data.save_csv(out)
    else:
        data.save_binary(out)
    print(f"wrote {data.n} transitions to {out}")


def cmd_run_fqi(args):
    from .fqi import FqiConfig, decomposition_bound, measure_bellman_residuals, run_lsvi
    from .harness import default_probes
    from .mdp import UniformPolicy, mdp_from_config, sample_visitation
    from .oracle import build_oracle, estimate_concentration, ground_truth, subopt
    from .relunet import architecture_for

    mdp = mdp_from_config(args.mdp)
    eta = UniformPolicy(mdp.n_actions)
    target = UniformPolicy(mdp.n_actions)
    data = sample_visitation(mdp, eta, args.n, args.seed)
    arch = architecture_for(args.n, args.alpha, _float(args.p), mdp.dim)
    train = replace(_train_config(args), seed=args.seed)
    cfg = FqiConfig(iterations=args.K, mode=args.mode, arch=arch, train=train,
                    target_policy=target if args.mode == "ope" else None,
                    data_mode={"reuse": "reuse", "split": "split"}[args.data_mode],
                    ope_return=args.ope_return)
    oracle = ground_truth(build_oracle(mdp), mdp,
                          target if args.mode == "ope" else None)
    result, trace = run_lsvi(data, cfg, mdp, oracle)
    mu_data = sample_visitation(mdp, eta, 4096, seed=940_001)
    residuals = measure_bellman_residuals(
        trace, oracle, mdp, (mu_data.states, mu_data.actions),
        policy=target if args.mode == "ope" else None)
    conc = estimate_concentration(mdp, eta, default_probes(mdp.n_actions), range(21))
    gap = subopt(oracle, result.value if args.mode == "ope" else result.policy)
    rhs = decomposition_bound(args.mode, conc.kappa_hat, mdp.gamma, args.K, float(residuals.max()))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["k,train_loss,residual"]
    for k in range(args.K):
        rows.append(f"{k + 1},{trace.train_losses[k]!r},{residuals[k]!r}")
    (out / "trace.csv").write_text("\n".join(rows) + "\n")
    payload = {
        "mode": args.mode,
        "subopt": gap,
        "kappa_hat": conc.kappa_hat,
        "bound_rhs": rhs,
        "bound_slack": rhs - gap,
        "max_residual": float(residuals.max()),
    }
    if args.mode == "ope":
        payload["value"] = result.value
        payload["value_mean"] = result.v_mean
        payload["value_norm"] = result.v_norm
    else:
        payload["greedy_action_by_state_node"] = (
            result.policy.act(oracle.nodes).tolist())
    (out / "result.json").write_text(json.dumps(payload, indent=2) + "\n")
    result.q_final.save(out / "q_final.net")
    print(f"subopt={gap:.6f} bound_rhs={rhs:.6f} -> {out}")


def cmd_measure_rates(args):
    from .harness import ExperimentConfig, run_sweep, write_report
    from .relunet import ArchitectureSpec

    arch = None
    if args.arch is not None:
        raw = _load_json(args.arch)
        arch = ArchitectureSpec(**raw)
    cfg = ExperimentConfig(
        mdp={"kind": args.mdp} if not args.mdp.endswith(".json") else _load_json(args.mdp),
        n_values=tuple(args.n_values), k_values=(args.K,),
        seeds=tuple(range(args.seeds)), modes=(args.mode,),
        data_modes=("reuse",), arch=arch, alpha=args.alpha, p=_float(args.p),
        train=_train_config(args), jobs=args.jobs)
    report = run_sweep(cfg)
    write_report(report, args.out)
    for fit in report.rate_fits:
        print(f"{fit.mode}/{fit.data_mode}/K={fit.K}: slope={fit.slope:.3f} "
              f"(se {fit.slope_stderr:.3f}); theory stat exponent "
              f"{report.theory['stat_exponent']:.3f}")
    print(f"report written to {args.out}")


def cmd_analyze_smoothness(args):
    from .besov import (BesovParams, FunctionOnGrid, besov_seminorm,
                        estimate_smoothness_exponent, synth_function)

    if args.input:
        f = FunctionOnGrid.load_csv(args.input)
    else:
        f = synth_function(args.kind, args.alpha, d=args.d, seed=args.seed)
    est = estimate_smoothness_exponent(f, args.r, _float(args.p))
    params = BesovParams(alpha=args.alpha, p=_float(args.p), q=_float(args.q))
    semi = besov_seminorm(f, params)
    payload = {
        "kind": args.kind if not args.input else "file",
        "alpha": args.alpha,
        "difference_order": args.r,
        "estimated_exponent": est.exponent,
        "exponent_saturated": est.saturated,
        "seminorm": semi,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_rademacher(args):
    from .rademacher import (FiniteFunctionClass, NetworkFunctionClass,
                             empirical_rademacher, localized_rademacher)
    from .relunet import ArchitectureSpec, ReluNetwork, TrainConfig

    rng = np.random.default_rng(args.seed)
    kind, _, spec_arg = args.cls.partition(":")
    if kind == "finite":
        values = np.loadtxt(spec_arg, delimiter=",", ndmin=2)
        est = empirical_rademacher(FiniteFunctionClass(values), None,
                                   args.draws, args.seed)
    elif kind == "net":
        raw = _load_json(spec_arg)
        spec = ArchitectureSpec(**raw)
        xs = rng.random((args.n_points, args.input_dim))
        train = TrainConfig(epochs=60, restarts=1, learning_rate=0.3)
        if args.radius is not None:
            anchor = ReluNetwork.random(args.input_dim, spec,
                                        np.random.default_rng(args.seed + 1))
            mu = rng.random((args.n_points, args.input_dim))
            est = localized_rademacher(spec, anchor, args.radius, xs, mu,
                                       args.draws, args.seed)
        else:
            cls = NetworkFunctionClass(spec, train, args.input_dim)
            est = empirical_rademacher(cls, xs, args.draws, args.seed)
    else:
        raise SystemExit("--class must look like finite:<csv> or net:<spec.json>")
    payload = {"value": est.value, "stderr": est.stderr, "method": est.sup_method,
               "bias_note": est.bias_note, "n": est.n, "draws": est.sigma_draws}
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_report(args):
    from .harness import ExperimentConfig, run_sweep, write_report
    from .relunet import ArchitectureSpec, TrainConfig

    raw = _load_json(args.config)
    if "arch" in raw and raw["arch"] is not None:
        raw["arch"] = ArchitectureSpec(**raw["arch"])
    if "train" in raw:
        raw["train"] = TrainConfig(**raw["train"])
    for key in ("n_values", "k_values", "seeds", "modes", "data_modes"):
        if key in raw:
            raw[key] = tuple(raw[key])
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    cfg = ExperimentConfig(**raw)
    report = run_sweep(cfg)
    write_report(report, args.out)
    print(f"{len(report.records)} cells -> {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="fqlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample offline transitions from an MDP")
    p.add_argument("--mdp", default="chain5", help="preset name or JSON config path")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run-fqi", help="one value-iteration run with diagnostics")
    p.add_argument("--mdp", default="chain5")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--mode", choices=("ope", "opl"), default="ope")
    p.add_argument("--data-mode", choices=("reuse", "split"), default="reuse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--p", default="inf")
    p.add_argument("--ope-return", choices=("mean", "norm"), default="mean")
    p.add_argument("--epochs", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--learning-rate", type=float)
    p.set_defaults(func=cmd_run_fqi)

    p = sub.add_parser("measure-rates", help="error-vs-n sweep with rate fit")
    p.add_argument("--mdp", default="chain5")
    p.add_argument("--n-values", type=int, nargs="+", required=True)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..seeds-1)")
    p.add_argument("--mode", choices=("ope", "opl"), default="ope")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--p", default="inf")
    p.add_argument("--arch", help="JSON file with explicit architecture fields")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--epochs", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--learning-rate", type=float)
    p.set_defaults(func=cmd_measure_rates)

    p = sub.add_parser("analyze-smoothness", help="exponent estimate and seminorm")
    p.add_argument("--input", help="CSV grid function (overrides --kind)")
    p.add_argument("--kind", default="weierstrass",
                   choices=("weierstrass", "spline_series", "piecewise_spiky"))
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--p", default="inf")
    p.add_argument("--q", default="inf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze_smoothness)

    p = sub.add_parser("rademacher", help="empirical Rademacher complexity")
    p.add_argument("--class", dest="cls", required=True,
                   help="finite:<values.csv> or net:<spec.json>")
    p.add_argument("--draws", type=int, default=200)
    p.add_argument("--radius", type=float, help="localization radius (net classes)")
    p.add_argument("--n-points", type=int, default=128)
    p.add_argument("--input-dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rademacher)

    p = sub.add_parser("report", help="full sweep from a JSON experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
