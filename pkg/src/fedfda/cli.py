"""Command line interface.

Subcommands:
    rates     <config>             print the rate table for the config
    simulate  <config>             run the sweep, write the risk CSV
    estimate  <data.csv> <config>  run the estimator on ingested data
    audit     <config>             sensitivity and calibration checks

Exit codes: 0 success, 1 runtime failure, 2 config or usage error.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import common, harness, independent, privacy, rates
from . import rng as rngmod
from .configio import ConfigError, load_config
from .datagen import Design, load_datasets_csv
from .wavelet import default_coarsest_level, overlap_constant, quadrature_grid


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedfda",
        description="Differentially private mean curve estimation for "
                    "federated functional data")
    sub = parser.add_subparsers(dest="command", required=True)

    p_rates = sub.add_parser("rates", help="print effective dimension, risk, "
                                           "regimes, delta-condition verdicts")
    p_rates.add_argument("config")
    p_rates.add_argument("--out", default=None, help="also write the table here")

    p_sim = sub.add_parser("simulate", help="run the configured sweep")
    p_sim.add_argument("config")
    p_sim.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_sim.add_argument("--reps", type=int, default=None, help="override replications")
    p_sim.add_argument("--out", default="risk.csv", help="risk CSV path")
    p_sim.add_argument("--plot", default=None, help="log-scale series data path")
    p_sim.add_argument("--plot-image", default=None, help="vector image path")
    p_sim.add_argument("--timing", action="store_true",
                       help="record wall time in the CSV (breaks byte "
                            "reproducibility across runs)")

    p_est = sub.add_parser("estimate", help="estimate from a dataset CSV")
    p_est.add_argument("data")
    p_est.add_argument("config")
    p_est.add_argument("--seed", type=int, default=None)
    p_est.add_argument("--out", default="evaluations.csv")

    p_aud = sub.add_parser("audit", help="sensitivity audit and noise calibration")
    p_aud.add_argument("config")
    p_aud.add_argument("--seed", type=int, default=None)
    p_aud.add_argument("--trials", type=int, default=200)
    return parser


def _cmd_rates(args) -> int:
    spec = load_config(args.config)
    fed = spec.base_federation
    if spec.design is Design.COMMON:
        sol = rates.solve_common(fed.servers, fed.servers[0].m, spec.alpha)
    else:
        sol = rates.solve_independent(fed.servers, spec.alpha)
    report = rates.check_delta_condition(fed.servers)
    lines = [f"design        {spec.design.value}",
             f"effective dim {sol.d_star:.6g}",
             f"risk          {sol.risk:.6g}",
             f"residual      {sol.residual:.3g}",
             "server  n        m      epsilon   regime               delta_ok"]
    for i, (s, reg, ok) in enumerate(zip(fed.servers, sol.regimes, report.passed)):
        eps = "inf" if not math.isfinite(s.epsilon) else f"{s.epsilon:g}"
        lines.append(f"{i:<7d} {s.n:<8d} {s.m:<6d} {eps:<9s} {reg.value:<20s} {ok}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_simulate(args) -> int:
    spec = load_config(args.config)
    if args.seed is not None:
        spec = _replace(spec, base_seed=args.seed)
    if args.reps is not None:
        spec = _replace(spec, replications=args.reps)
    rows = harness.run_sweep(spec, timing=args.timing)
    harness.emit_csv(rows, args.out)
    if args.plot:
        harness.emit_plot(rows, args.plot, image_path=args.plot_image)
    for r in rows:
        print(f"{spec.sweep}={r.sweep_value:g}  mean IMSE {r.mean_imse:.6g} "
              f"(se {r.stderr:.3g}, reps {r.reps}, D* {r.d_star:.4g})")
    return 0


def _cmd_estimate(args) -> int:
    spec = load_config(args.config)
    seed = args.seed if args.seed is not None else spec.base_seed
    fed = spec.base_federation
    datasets = load_datasets_csv(args.data, list(fed.servers), spec.design)
    table = harness.shared_table(spec.curve)
    if spec.design is Design.INDEPENDENT:
        est = independent.estimate(datasets, fed, table, seed=seed)
    else:
        est = common.estimate(datasets, fed, seed=seed,
                              psi_sup=table.sup_norm, L_star=spec.curve.L_star)
    x, _ = quadrature_grid(harness.IMSE_DEPTH)
    common.evaluations_to_csv(x, est(x), args.out)
    print(f"wrote {len(x)} evaluations to {args.out} "
          f"(effective dim {est.d_star:.4g})")
    return 0


def _cmd_audit(args) -> int:
    spec = load_config(args.config)
    seed = args.seed if args.seed is not None else spec.base_seed
    fed = spec.base_federation
    table = harness.shared_table(spec.curve)
    failures = 0

    if spec.design is Design.INDEPENDENT:
        ds = harness.base_datasets(spec)[0]
        l0 = default_coarsest_level(table.family)
        L = max(l0, 4)
        params = independent.default_clip_params(fed, table)
        c_a = overlap_constant(table.family)
        bound = privacy.sensitivity_bound_independent(L, ds.config.n, c_a)

        def stat(d):
            return independent.rescaled_clipped_vector(d, table, l0, L, params)

        def resample(d, i, rng):
            import copy
            from .datagen import evaluate_curves, sample_curve_batch
            new = copy.deepcopy(d)
            pts = rng.random(size=(1, d.config.m))
            batch = sample_curve_batch(spec.curve, 1, rng)
            y = evaluate_curves(table, batch, pts) + rng.standard_normal((1, d.config.m))
            new.points[i] = pts[0]
            new.y[i] = y[0]
            return new

        worst = privacy.audit_sensitivity(
            stat, ds, resample, args.trials,
            rngmod.make_rng(seed, rngmod.AUDIT, 0, 0))
        ok = worst <= bound
        failures += 0 if ok else 1
        print(f"sensitivity audit: worst {worst:.4g} vs bound {bound:.4g} "
              f"-> {'PASS' if ok else 'FAIL'}")
    else:
        cfg = fed.servers[0]
        tau = privacy.tau_common(
            fed.total_individuals,
            privacy.sup_norm_bound(table.sup_norm, fed.alpha, fed.R,
                                   spec.curve.L_star))
        bound = 2.0 * tau * math.sqrt(cfg.m) / cfg.n
        ds = harness.base_datasets(spec)[0]

        def stat(d):
            return privacy.clip(d.y, tau).mean(axis=0)

        def resample(d, i, rng):
            import copy
            new = copy.deepcopy(d)
            new.y[i] = rng.standard_normal(d.config.m) * tau
            return new

        worst = privacy.audit_sensitivity(
            stat, ds, resample, args.trials,
            rngmod.make_rng(seed, rngmod.AUDIT, 0, 0))
        ok = worst <= bound
        failures += 0 if ok else 1
        print(f"sensitivity audit: worst {worst:.4g} vs bound {bound:.4g} "
              f"-> {'PASS' if ok else 'FAIL'}")

    # noise calibration, 10^4 draws per mechanism
    rng = rngmod.make_rng(seed, rngmod.AUDIT, 1, 0)
    cfg = fed.servers[0]
    if cfg.private:
        sigma = privacy.sigma_common(3.0, cfg.m, cfg.n, cfg.epsilon, cfg.delta)
        draws = sigma * rng.standard_normal(10_000)
        rel = abs(draws.var() - sigma**2) / sigma**2
        ok = rel < 0.05
        failures += 0 if ok else 1
        print(f"mechanism calibration: relative variance error {rel:.4f} "
              f"-> {'PASS' if ok else 'FAIL'}")
    else:
        print("mechanism calibration: skipped (epsilon = inf)")
    return 1 if failures else 0


def _replace(spec, **kw):
    from dataclasses import replace
    return replace(spec, **kw)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rates":
            return _cmd_rates(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "audit":
            return _cmd_audit(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
