"""Command-line client.

Thin wrapper over the pipeline functions: every subcommand is reproducible
through documented library calls, and outputs are byte-identical for
identical inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .budget import mc_phase_fluctuations, mc_power_fluctuations, residual_light_sweep
from .config import read_config
from .core import InterferenceTerms
from .errors import ToolkitError
from .fitting import fit_contrast, fit_thermalization
from .logio import read_log, write_log
from .pipeline import analyze_log, budget_run, corrected_point_dict, simulate_run
from .reconstruct import correct_phase_point
from .reference import BENCHMARKS


def _dump_json(data: dict, path: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_simulate(args) -> int:
    cfg = read_config(args.config)
    log = simulate_run(cfg, args.seed)
    write_log(log, args.out)
    print(f"wrote {len(log.records)} records ({len(log.cycle_indices)} cycles) to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    log = read_log(args.log)
    report = analyze_log(log, args.filter_threshold)
    data = report.to_dict()
    _dump_json(data, args.report)
    if args.per_cycle:
        with open(args.per_cycle, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cycle", "f", "epsilon_w", "alpha", "beta", "gamma"])
            for row in data["per_cycle"]:
                writer.writerow(
                    [
                        row["cycle"],
                        format(row["f"], ".17g"),
                        format(row["epsilon_w"], ".17g"),
                        format(row["alpha"], ".17g"),
                        format(row["beta"], ".17g"),
                        format(row["gamma"], ".17g"),
                    ]
                )
    return 0


def _cmd_reconstruct(args) -> int:
    terms = InterferenceTerms(alpha=args.alpha, beta=args.beta, gamma=args.gamma)
    corrected = correct_phase_point(terms)
    _dump_json(corrected_point_dict(corrected), args.report)
    return 0


def _cmd_budget(args) -> int:
    cfg = read_config(args.config)
    log = read_log(args.log)
    report = budget_run(log, cfg, args.reference, args.seed)
    if args.report:
        _dump_json(report.to_dict(), args.report)
    print(report.to_text())
    return 0


def _cmd_sweep_residual(args) -> int:
    cfg = read_config(args.config)
    source, phases, imperfections = cfg.domain_specs()
    tau = args.tau if args.tau is not None else imperfections.residual.tau
    n_points = args.points if args.points is not None else cfg.analysis.sweep_points
    curve = residual_light_sweep(
        phases, source, tau, n_points=n_points, phase_sign=args.phase_sign
    )
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phi_sh_rad", "delta_f"])
        for x, y in zip(curve.phi_sh, curve.delta_f):
            writer.writerow([format(x, ".17g"), format(y, ".17g")])
    print(
        f"tau={curve.tau:.4e}: delta_F in [{curve.min_delta_f:+.4e} @ {curve.min_phi_sh:+.3f}, "
        f"{curve.max_delta_f:+.4e} @ {curve.max_phi_sh:+.3f}] -> {args.out}"
    )
    return 0


def _read_series_csv(path: str, column: str) -> list[float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ToolkitError(f"{path}: missing column {column!r}")
        return [float(row[column]) for row in reader]


def _cmd_fit_contrast(args) -> int:
    alphas = _read_series_csv(args.data, args.alpha_column)
    out: dict = {}
    delta_t = args.delta_t
    if args.temp_column:
        temps = _read_series_csv(args.data, args.temp_column)
        thermal = fit_thermalization(temps)
        out["thermalization"] = {
            "t0": thermal.t0,
            "delta_t": thermal.delta_t,
            "kappa_th": thermal.kappa_th,
            "residual_norm": thermal.residual_norm,
            "parameter_uncertainties": list(thermal.parameter_uncertainties),
        }
        if delta_t is None:
            delta_t = thermal.delta_t
    if delta_t is None:
        raise ToolkitError("provide --delta-t or --temp-column to fix the temperature range")
    fit = fit_contrast(alphas, delta_t)
    out["contrast"] = {
        "c_alpha": fit.c_alpha,
        "dphi0": fit.dphi0,
        "eta": fit.eta,
        "kappa_th": fit.kappa_th,
        "delta_t": fit.delta_t,
        "residual_norm": fit.residual_norm,
        "parameter_uncertainties": list(fit.parameter_uncertainties),
    }
    _dump_json(out, args.report)
    return 0


def _cmd_mc_fluct(args) -> int:
    cfg = read_config(args.config)
    source, phases, imperfections = cfg.domain_specs()
    n = args.samples if args.samples is not None else cfg.analysis.mc_samples
    seed = args.seed if args.seed is not None else cfg.seed
    if args.mode == "power":
        sigma = args.sigma if args.sigma is not None else imperfections.fluctuations.sigma_pin_rel
        result = mc_power_fluctuations(phases, source, sigma, n, seed)
    else:
        sigma = args.sigma if args.sigma is not None else imperfections.fluctuations.sigma_phase
        result = mc_phase_fluctuations(phases, source, sigma, n, seed)
    _dump_json(
        {
            "mode": args.mode,
            "sigma": sigma,
            "delta_f": result.delta_f,
            "sigma_f": result.sigma_f,
            "n_samples": result.n_samples,
            "n_resampled": result.n_resampled,
            "mc_error": result.mc_error,
        },
        args.report,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peresim",
        description="Simulate and analyze three-path shutter-cycle interferometer runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic measurement log")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="per-cycle F, epsilon, kappa and aggregates")
    p.add_argument("--log", required=True)
    p.add_argument("--report", default=None, help="write JSON report here (default stdout)")
    p.add_argument("--per-cycle", default=None, help="write per-cycle CSV here")
    p.add_argument("--filter-threshold", type=float, default=None,
                   help="drop cycles with records beyond this many MADs")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("reconstruct", help="project measured terms onto the physical plane")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("budget", help="assemble the systematic error budget of a log")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--reference", choices=sorted(BENCHMARKS), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("sweep-residual", help="deviation of F versus the leak phase shift")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=None, help="override the config leakage")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--phase-sign", choices=("symmetric", "plus", "minus"),
                   default="symmetric")
    p.set_defaults(func=_cmd_sweep_residual)

    p = sub.add_parser("fit-contrast", help="fit thermalization and contrast models")
    p.add_argument("--data", required=True, help="CSV with the cycle series")
    p.add_argument("--alpha-column", default="alpha")
    p.add_argument("--temp-column", default=None)
    p.add_argument("--delta-t", type=float, default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_fit_contrast)

    p = sub.add_parser("mc-fluct", help="Monte Carlo fluctuation propagation")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("power", "phase"), required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_mc_fluct)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
