from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from steamnet.config import Config, config_from_preset, dump_config, load_config
from steamnet.errors import ConfigError, NumericalError, SteamNetError, ValidityError
from steamnet.inner_limit import build_inner, check_heat_balance, equilibrium_state, solve_equilibrium
from steamnet.lumped_model import VALIDITY_MULTIPLE, SystemParams, SystemState, fast_residual, scaled_anchor_checks
from steamnet.pde_oracle import compare_models, integrate_oracle
from steamnet.plots import emit_plots, plot_oracle
from steamnet.reports import render, write_report
from steamnet.simulate import CSV_FLOAT_FORMAT, MODELS, integrate
from steamnet.spectral import TOL_ZERO, linearize, manifold_distance, nhim_certificate, relax_to_manifold, trace_manifold
from steamnet.thermo import ANCHOR_PRESSURE, anchor_checks, default_curve, e_terms, export_table_csv

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "equilibrium", "spectrum", "manifold", "oracle-compare", "thermo-check")
DEFAULT_PRESETS = {
    "simulate": "step",
    "equilibrium": "step",
    "spectrum": "step",
    "manifold": "periodic",
    "oracle-compare": "oracle",
    "thermo-check": "step",
}


def _tolerances(text: str) -> tuple[float, float]:
    try:
        rel, abs_ = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected REL,ABS, got '{text}'") from None
    if rel <= 0 or abs_ <= 0:
        raise argparse.ArgumentTypeError("tolerances must be positive")
    return rel, abs_


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steamnet", description="Slow-fast analysis of steam supply networks")
    parser.add_argument("command", choices=COMMANDS)
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="JSON run configuration")
    source.add_argument("--preset", help="built-in configuration (step, periodic, oracle; also step-5.1, periodic-5.2, oracle-5.3)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--samples", type=float, metavar="DT", help="sample spacing in seconds")
    parser.add_argument("--no-plots", action="store_true")
    parser.add_argument("--tol", type=_tolerances, metavar="REL,ABS", help="integrator tolerances")
    parser.add_argument("--model", choices=MODELS, help="lumped model to integrate")
    parser.add_argument("--t-end", type=float, metavar="SECONDS", help="override the scenario end time")
    parser.add_argument("--tol-zero", type=float, default=TOL_ZERO, help="zero-eigenvalue threshold")
    parser.add_argument("--strict", action="store_true", help="treat validity warnings as errors")
    parser.add_argument("--verbose", "-v", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    cfg = load_config(args.config) if args.config else config_from_preset(args.preset or DEFAULT_PRESETS[args.command])
    output, solver, scenario = cfg.output, cfg.solver, cfg.scenario
    if args.out is not None:
        output = replace(output, directory=str(args.out))
    if args.samples is not None:
        if not args.samples > 0:
            raise ConfigError("sample spacing must be positive", field="--samples")
        output = replace(output, sample_dt=args.samples)
        solver = replace(solver, sample_dt=args.samples)
    if args.no_plots:
        output = replace(output, plots=False)
    if args.tol is not None:
        solver = replace(solver, rtol=args.tol[0], atol=args.tol[1])
    if args.t_end is not None:
        if args.t_end < scenario.t_span[0]:
            raise ConfigError("end time precedes the scenario start", field="--t-end")
        scenario = replace(scenario, t_span=(scenario.t_span[0], args.t_end))
    return replace(cfg, output=output, solver=solver, scenario=scenario, model=args.model or cfg.model)


def _out_dir(cfg: Config) -> Path:
    return Path(cfg.output.directory)


def _check_validity(ts, args) -> None:
    worst = ts.stats["validity_max"]
    if args.strict and worst > VALIDITY_MULTIPLE:
        raise ValidityError(f"pressure differences reached {worst:.3g} eps, above {VALIDITY_MULTIPLE:.0f} eps")


def cmd_simulate(cfg: Config, args) -> dict:
    params = cfg.system_params()
    ts = integrate(cfg.model, cfg.scenario, params, cfg.solver)
    out = _out_dir(cfg)
    csv_path = ts.to_csv(out / f"{cfg.name}_{cfg.model}.csv")
    plots = emit_plots(ts, out, f"{cfg.name}_{cfg.model}") if cfg.output.plots else []
    dump_config(cfg, out / f"{cfg.name}_config.json")
    _check_validity(ts, args)
    return {"csv": str(csv_path), "plots": [str(p) for p in plots], "samples": len(ts), **ts.stats}


def _equilibrium_inputs(cfg: Config) -> tuple[SystemParams, float, float]:
    params = cfg.system_params()
    p0 = float(np.mean(cfg.scenario.initial_p_Pa)) / params.refs.p_r
    return params, p0, cfg.scenario.t_span[1]


def cmd_equilibrium(cfg: Config, args) -> dict:
    params, p0, t_eq = _equilibrium_inputs(cfg)
    sys_ = build_inner(params, p0, t_eq)
    balance = check_heat_balance(sys_)
    data = {"p0_Pa": p0 * params.refs.p_r, "t_inputs_s": t_eq, "balance": balance._asdict()}
    eq = None
    links, vertices = [], []
    if balance.balanced:
        eq = solve_equilibrium(sys_)
        state = equilibrium_state(sys_, eq)
        relaxed = relax_to_manifold(params, state, t_eq)
        p_Pa, u_mps = relaxed.state.to_dimensional(params.refs)
        links = [
            {"name": name, "q": float(eq.q_star[j]), "u_mps": float(u_mps[j])}
            for j, name in enumerate(params.network.link_names)
        ]
        vertices = [
            {"name": name, "psi": float(eq.psi_0[i]), "p_Pa": float(p_Pa[i])}
            for i, name in enumerate(params.network.vertex_names)
        ]
        du, dp = fast_residual(relaxed.state, 0.0, params, params.source_at(t_eq))
        data.update(
            equilibrium=eq.to_dict(),
            links=links,
            vertices=vertices,
            full_model={"converged": relaxed.converged, "du_residual": du, "dp_residual": dp, "drift_rate": relaxed.drift_rate},
        )
    text = render("equilibrium", name=cfg.name, p0_Pa=data["p0_Pa"], balance=balance, equilibrium=eq, links=links, vertices=vertices)
    paths = write_report(_out_dir(cfg), f"{cfg.name}_equilibrium", text, data)
    sys.stdout.write(text)
    return {"report": str(paths[0]), "balanced": balance.balanced}


def cmd_spectrum(cfg: Config, args) -> dict:
    params, p0, t_eq = _equilibrium_inputs(cfg)
    sys_ = build_inner(params, p0, t_eq)
    eq = solve_equilibrium(sys_)
    report = nhim_certificate(linearize(sys_, eq), eq, args.tol_zero)
    text = render("spectrum", name=cfg.name, report=report)
    paths = write_report(_out_dir(cfg), f"{cfg.name}_spectrum", text, report.to_dict())
    sys.stdout.write(text)
    return {"report": str(paths[0]), "certified": report.certified, "zero_count": report.zero_count}


def cmd_manifold(cfg: Config, args) -> dict:
    params = cfg.system_params()
    refs = params.refs
    opts = cfg.manifold
    t_s = cfg.scenario.t_span[0] if opts.t_s is None else opts.t_s
    trace = trace_manifold(params, (opts.p_min_Pa / refs.p_r, opts.p_max_Pa / refs.p_r), opts.samples, t_s)
    out = _out_dir(cfg)
    csv_path = out / f"{cfg.name}_manifold.csv"
    out.mkdir(parents=True, exist_ok=True)
    trace.to_frame(params).to_csv(csv_path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    ts = integrate(cfg.model, cfg.scenario, params, cfg.solver)
    final = ts.p[-1] / refs.p_r, ts.u[-1] / refs.u_r
    distance = manifold_distance(trace, SystemState(p=final[0], u=final[1]))
    plots = emit_plots(trace, out, f"{cfg.name}_manifold", params=params, trajectory=ts) if cfg.output.plots else []
    _check_validity(ts, args)
    return {
        "csv": str(csv_path),
        "plots": [str(p) for p in plots],
        "samples": len(trace.samples),
        "converged": int(sum(trace.converged)),
        "final_distance": distance,
    }


def cmd_oracle_compare(cfg: Config, args) -> dict:
    params = cfg.system_params()
    lumped = integrate("full", cfg.scenario, params, cfg.solver)
    out = _out_dir(cfg)
    lumped.to_csv(out / f"{cfg.name}_lumped.csv")
    _check_validity(lumped, args)
    runs, oracle_series = [], {}
    for loss in cfg.oracle.linear_loss_W_per_m:
        ts = integrate_oracle(cfg.scenario, params, cfg.oracle.cells, loss, cfg.output.sample_dt)
        ts.to_csv(out / f"{cfg.name}_oracle_loss{loss:g}.csv")
        report = compare_models(lumped, ts, cfg.oracle.window, cfg.oracle.tol_velocity, cfg.oracle.tol_pressure)
        runs.append({"loss": loss, "report": report, "final_mean_Pa": float(ts.p[-1].mean())})
        oracle_series[f"oracle {loss:g} W/m"] = ts
    reference = [r for r in runs if r["loss"] == 0.0] or runs
    passed = all(r["report"].passed for r in reference)
    finals = [r["final_mean_Pa"] for r in sorted(runs, key=lambda r: r["loss"])]
    ordered = all(a > b for a, b in zip(finals, finals[1:]))
    text = render("oracle_compare", name=cfg.name, runs=runs, passed=passed)
    data = {
        "passed": passed,
        "loss_ordering_monotone": ordered,
        "runs": [{"loss_W_per_m": r["loss"], "final_mean_Pa": r["final_mean_Pa"], **r["report"].to_dict()} for r in runs],
    }
    paths = write_report(out, f"{cfg.name}_oracle_compare", text, data)
    if cfg.output.plots:
        plot_oracle(oracle_series, lumped, out / f"{cfg.name}_oracle.png")
    sys.stdout.write(text)
    if not passed:
        raise NumericalError("lumped model and finite-volume reference disagree beyond tolerance")
    return {"report": str(paths[0]), "passed": passed, "loss_ordering_monotone": ordered}


def cmd_thermo_check(cfg: Config, args) -> dict:
    curve = default_curve()
    boiler = cfg.network.vertices[0].boiler
    anchors = anchor_checks(curve, boiler)
    scaled = scaled_anchor_checks(cfg.references, curve, boiler)
    passed = all(row["passed"] for row in anchors + scaled)
    terms = e_terms(ANCHOR_PRESSURE, boiler, curve)
    text = render(
        "thermo_check", pressure=ANCHOR_PRESSURE, source=curve.source, anchors=anchors, scaled=scaled, terms=terms, passed=passed
    )
    out = _out_dir(cfg)
    paths = write_report(out, "thermo_check", text, {"anchors": anchors, "scaled": scaled, "e_terms": terms, "passed": passed})
    export_table_csv(out / "saturation_table.csv", curve)
    sys.stdout.write(text)
    if not passed:
        raise NumericalError("steam-table anchors out of tolerance")
    return {"report": str(paths[0]), "passed": passed}


HANDLERS = {
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "spectrum": cmd_spectrum,
    "manifold": cmd_manifold,
    "oracle-compare": cmd_oracle_compare,
    "thermo-check": cmd_thermo_check,
}


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        summary = HANDLERS[args.command](cfg, args)
    except SteamNetError as exc:
        report = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        if isinstance(exc, ConfigError):
            report.update(field=exc.field, line=exc.line)
        sys.stderr.write(json.dumps(report) + "\n")
        return exc.exit_code
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": ConfigError.exit_code}) + "\n")
        return ConfigError.exit_code
    logger.info("%s finished: %s", args.command, summary)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
