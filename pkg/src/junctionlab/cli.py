"""``junctionlab`` command line: simulations, fits and loss budgets with JSON reports."""

from __future__ import annotations

import argparse
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import circuit, fits, loss, tunneling
from .exceptions import JunctionLabError, ParseError
from .io import Report, RunConfig, file_digest, load_trace_csv, write_csv, write_trace_csv

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE = 0, 1, 2

CIRCUIT_FLAGS = ("C_S", "C_J1", "C_J2", "E_J1", "E_J2", "C_g1", "C_g2")
PRESETS = {"reference": 1.0, "reduced": 0.55}


class AnalysisFailure(Exception):
    """A command ran but its analysis did not succeed (e.g. a fit did not converge)."""


def fixture_path(name):
    """Path of a bundled synthetic CSV (``t1_36us.csv``, ``prober_ra.csv``, ...)."""
    return resources.files("junctionlab") / "data" / name


# -- circuit commands -------------------------------------------------------


def _circuit_params(args, parser):
    base = {}
    if args.preset:
        base = vars(circuit.DoubleJunctionParams.reference(PRESETS[args.preset])).copy()
    for name in CIRCUIT_FLAGS:
        value = getattr(args, name)
        if value is not None:
            base[name] = value
    missing = [n for n in CIRCUIT_FLAGS[:5] if n not in base]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        parser.error(f"missing circuit parameters {flags} (or use --preset)")
    return circuit.DoubleJunctionParams(**base)


def _truncation(args, cfg):
    n_max = args.n_max if args.n_max is not None else cfg.n_max
    return circuit.TruncationSpec(n_max=n_max, convergence_tol=cfg.convergence_tol_hz)


def cmd_simulate_spectrum(args, cfg, parser):
    params = _circuit_params(args, parser)
    gate = circuit.GateCharge(args.ng_minus, args.ng_plus)
    trunc = _truncation(args, cfg)
    spec, record = circuit.converged_spectrum(params, gate, trunc, k=args.levels)
    levels = [float(v) for v in spec.levels]
    out = Path(args.output_dir or cfg.output_dir)
    write_csv(out / "levels.csv", ("level", "energy_GHz"), list(enumerate(levels)))
    results = {
        "levels_GHz": levels,
        "f_ge_GHz": spec.f_ge,
        "f_ef_GHz": spec.f_ef,
        "f_gf_GHz": spec.f_gf,
        "anharmonicity_MHz": spec.anharmonicity * 1e3,
        "convergence": record,
    }
    if args.sweep == "n_g":
        rows, floor = circuit.f_ge_over_gate(params, trunc, cfg.grid_resolution)
        results["charge_dispersion_Hz"] = circuit.charge_dispersion(
            params, trunc, cfg.grid_resolution
        )
        results["precision_floor_Hz"] = floor
        write_csv(out / "dispersion.csv", ("n_g1", "n_g2", "f_ge_GHz"), rows)
    parameters = {"circuit": vars(params), "gate": vars(gate), "n_max": trunc.n_max}
    return parameters, results, []


def cmd_sweep_dispersion(args, cfg, parser):
    params = _circuit_params(args, parser)
    trunc = _truncation(args, cfg)
    resolution = args.grid_resolution or cfg.grid_resolution
    rows, floor = circuit.f_ge_over_gate(params, trunc, resolution, args.full_grid)
    dispersion = circuit.charge_dispersion(params, trunc, resolution, args.full_grid)
    out = Path(args.output_dir or cfg.output_dir)
    write_csv(out / "dispersion.csv", ("n_g1", "n_g2", "f_ge_GHz"), rows)
    results = {
        "charge_dispersion_Hz": dispersion,
        "precision_floor_Hz": floor,
        "gate_points": len(rows),
    }
    parameters = {
        "circuit": vars(params),
        "n_max": trunc.n_max,
        "grid_resolution": resolution,
        "full_grid": args.full_grid,
    }
    return parameters, results, []


# -- tunneling commands -----------------------------------------------------


def cmd_simulate_iv(args, cfg, parser):
    left = tunneling.SuperconductorModel(args.delta_left, args.gamma_left, args.tc_left)
    right = tunneling.SuperconductorModel(args.delta_right, args.gamma_right, args.tc_right)
    T = args.temperature
    if args.thermal_gap:
        left, right = left.at_temperature(T), right.at_temperature(T)
    j = tunneling.JunctionDC(args.R_N, left, right)
    v = np.arange(-args.v_max, args.v_max + args.v_step / 2, args.v_step)
    iv = tunneling.iv_curve(j, T, v, method=args.method)
    didv = tunneling.numerical_didv(iv)
    out = Path(args.output_dir or cfg.output_dir)
    write_trace_csv(out / "iv.csv", iv, "iv")
    write_trace_csv(out / "didv.csv", didv, "didv")
    results = {
        "onset_voltage_mV": tunneling.onset_voltage(iv, args.R_N),
        "gaps_meV": {"left": left.delta0, "right": right.delta0},
    }
    window = (-args.subgap_window, args.subgap_window)
    if left.delta0 > 0 and np.sum((v >= window[0]) & (v <= window[1])) >= 3:
        R_sub, R_err = tunneling.subgap_linear_fit(iv, window)
        results["subgap_resistance_MOhm"] = R_sub
        results["subgap_resistance_stderr_MOhm"] = R_err
        results["gamma_estimate"] = tunneling.dynes_gamma_estimate(args.R_N, R_sub)
    parameters = {
        "R_N_kohm": args.R_N,
        "temperature_K": T,
        "left": {"delta0_meV": args.delta_left, "gamma": args.gamma_left, "Tc_K": left.Tc},
        "right": {"delta0_meV": args.delta_right, "gamma": args.gamma_right, "Tc_K": right.Tc},
        "v_max_mV": args.v_max,
        "v_step_mV": args.v_step,
        "method": args.method,
        "thermal_gap": args.thermal_gap,
    }
    return parameters, results, []


def _expand_inputs(paths):
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv")))
        else:
            files.append(p)
    if not files:
        raise ParseError("no CSV inputs found")
    return files


def cmd_extract_gaps(args, cfg, parser):
    files = _expand_inputs(args.inputs)
    kind = args.kind
    traces = [load_trace_csv(f, kind) for f in files]
    if kind == "didv":
        if args.temperatures is None or len(args.temperatures) != len(traces):
            parser.error("dI/dV inputs need --temperatures, one per file")
        for t, T in zip(traces, args.temperatures):
            t.temperature = T
    result = tunneling.extract_gaps_vs_temperature(
        traces,
        sum_window=(args.sum_window[0], args.sum_window[1]),
        diff_window=(args.diff_window[0], args.diff_window[1]),
        min_prominence=args.min_prominence,
    )
    rows = list(result.rows())
    out = Path(args.output_dir or cfg.output_dir)
    write_csv(
        out / "gaps.csv",
        ("temperature_K", "delta_Nb_meV", "delta_Al_meV", "v_sum_mV", "v_diff_mV"),
        [
            (r["temperature_K"], r["delta_Nb_meV"], r["delta_Al_meV"], r["v_sum_mV"],
             "" if r["v_diff_mV"] is None else r["v_diff_mV"])
            for r in rows
        ],
    )
    parameters = {
        "inputs": [f.name for f in files],
        "kind": kind,
        "sum_window_mV": args.sum_window,
        "diff_window_mV": args.diff_window,
        "min_prominence": args.min_prominence,
    }
    # subgap structure inside |V| < Delta_Al/e is outside the quasiparticle model
    blind = rows[0]["delta_Al_meV"]
    results = {"gaps": rows, "not_characterizable_mV": [-blind, blind]}
    return parameters, results, files


# -- fits -------------------------------------------------------------------


def _fit_report(report, name):
    if not report.converged:
        raise AnalysisFailure(f"{name} fit did not converge: {report.message}")
    return report.to_dict()


def _decay_command(fit_fn, label):
    def run(args, cfg, parser):
        trace = load_trace_csv(args.input, "decay")
        report = fit_fn(trace)
        results = {"fit": _fit_report(report, label)}
        value = report[label]
        if label == "T1" and args.frequency is not None:
            results["Q"] = fits.quality_factor(args.frequency, value)
        if label == "T2_star":
            model = fits.RAMSEY.func
            p = [report["amplitude"], value, report["detuning"], report["phase"], report["offset"]]
        else:
            model = fits.EXP_DECAY.func
            p = [report["amplitude"], value, report["offset"]]
        fitted = model(trace.x, p)
        out = Path(args.output_dir or cfg.output_dir)
        write_csv(out / "decay_fit.csv", ("delay_us", "population", "fit"),
                  list(zip(trace.x, trace.y, fitted)))
        parameters = {"input": Path(args.input).name}
        if label == "T1":
            parameters["frequency_GHz"] = args.frequency
        return parameters, results, [args.input]

    return run


cmd_fit_decay = _decay_command(fits.fit_t1, "T1")
cmd_fit_echo = _decay_command(fits.fit_echo, "T2_echo")
cmd_fit_ramsey = _decay_command(fits.fit_ramsey, "T2_star")


def cmd_fit_ra(args, cfg, parser):
    points = load_trace_csv(args.input, "prober")
    est = fits.ResistanceAreaFit(max_iter=cfg.fit_max_iter, residuals=args.residuals)
    est.fit([p.d for p in points], [p.R for p in points])
    results = {"fit": _fit_report(est.report_, "resistance-area")}
    d = np.array([p.d for p in points])
    out = Path(args.output_dir or cfg.output_dir)
    write_csv(out / "ra_fit.csv", ("d_nm", "resistance_ohm", "fit_ohm"),
              list(zip(d, (p.R for p in points), est.predict(d))))
    return {"input": Path(args.input).name, "residuals": args.residuals}, results, [args.input]


def cmd_freq_trend(args, cfg, parser):
    d, f, chips = load_trace_csv(args.input, "trend")
    report = fits.frequency_size_trend(d, f, chips, band=args.band)
    out = Path(args.output_dir or cfg.output_dir)
    write_csv(out / "trend.csv", ("d_nm", "frequency_GHz", "residual_GHz"),
              list(zip(d, f, report.residuals)))
    return {"input": Path(args.input).name, "band_GHz": args.band}, report.to_dict(), [args.input]


# -- loss -------------------------------------------------------------------


def _parse_term(text):
    try:
        name, p, tan = text.split(":")
        return loss.LossContribution(name, float(p), float(tan))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected NAME:PARTICIPATION:TAN_DELTA, got {text!r}") from exc


def cmd_loss_budget(args, cfg, parser):
    terms = list(args.term or [])
    if args.swaps:
        terms.append(loss.LossContribution("passivation", 1e-4, 1e-2))
    if not terms:
        parser.error("give at least one --term or --swaps")
    budget = loss.loss_budget(terms, args.target)
    results = {"budget": budget.to_dict()}
    if args.C_J is not None:
        p_J = loss.junction_participation(args.C_J, args.C_S)
        results["junction_participation"] = p_J
        if p_J > 0:
            results["junction_tan_delta_bound"] = loss.effective_loss_tangent_bound(
                args.measured_inv_Q or args.target, p_J
            )
    if args.R_subgap is not None:
        results["subgap_Q_bound"] = loss.subgap_q_limit(args.R_subgap, args.Z_c).to_dict()
    out = Path(args.output_dir or cfg.output_dir)
    write_csv(out / "loss_terms.csv", ("name", "participation", "tan_delta", "inv_Q"),
              [(t.name, t.participation, t.tan_delta, t.inverse_q) for t in terms])
    parameters = {
        "terms": [vars(t) for t in terms],
        "target_inv_Q": args.target,
        "C_J_fF": args.C_J,
        "C_S_fF": args.C_S,
        "measured_inv_Q": args.measured_inv_Q,
        "R_subgap_MOhm": args.R_subgap,
        "Z_c_ohm": args.Z_c,
    }
    return parameters, results, []


# -- parser -----------------------------------------------------------------


def _add_circuit_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a reference device")
    for name in CIRCUIT_FLAGS:
        unit = "fF" if name.startswith("C") else "GHz"
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float, help=unit)
    p.add_argument("--n-max", type=int, help="charge cutoff per node")


def build_parser():
    parser = argparse.ArgumentParser(prog="junctionlab", description=__doc__)
    parser.add_argument("--config", help="JSON run configuration (else $JUNCTIONLAB_CONFIG)")
    parser.add_argument("-o", "--output-dir", help="where report.json and CSVs are written")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-spectrum", help="double-junction qubit levels")
    _add_circuit_flags(p)
    p.add_argument("--ng-minus", type=float, default=0.0)
    p.add_argument("--ng-plus", type=float, default=0.0)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--sweep", choices=["n_g"], help="also sweep gate charge for the dispersion")
    p.set_defaults(func=cmd_simulate_spectrum)

    p = sub.add_parser("sweep-dispersion", help="f_ge over gate charge")
    _add_circuit_flags(p)
    p.add_argument("--grid-resolution", type=int)
    p.add_argument("--full-grid", action="store_true")
    p.set_defaults(func=cmd_sweep_dispersion)

    p = sub.add_parser("simulate-iv", help="quasiparticle IV of a tunnel junction")
    p.add_argument("--R-N", dest="R_N", type=float, required=True, help="kOhm")
    p.add_argument("--delta-left", type=float, required=True, help="meV")
    p.add_argument("--delta-right", type=float, default=0.0, help="meV (0: normal metal)")
    p.add_argument("--gamma-left", type=float, default=0.0)
    p.add_argument("--gamma-right", type=float, default=0.0)
    p.add_argument("--tc-left", type=float)
    p.add_argument("--tc-right", type=float)
    p.add_argument("--thermal-gap", action="store_true", help="apply the BCS gap at --temperature")
    p.add_argument("--temperature", type=float, required=True, help="K")
    p.add_argument("--v-max", type=float, default=3.0, help="mV")
    p.add_argument("--v-step", type=float, default=0.005, help="mV")
    p.add_argument("--method", choices=["fft", "quad"], default="fft")
    p.add_argument("--subgap-window", type=float, default=0.2, help="half width, mV")
    p.set_defaults(func=cmd_simulate_iv)

    p = sub.add_parser("extract-gaps", help="gap pair versus temperature from IV traces")
    p.add_argument("inputs", nargs="+", help="CSV files or directories of CSV files")
    p.add_argument("--kind", choices=["iv", "didv"], default="iv")
    p.add_argument("--temperatures", type=float, nargs="+", help="K, for dI/dV inputs")
    p.add_argument("--sum-window", type=float, nargs=2, default=[1.4, float("inf")])
    p.add_argument("--diff-window", type=float, nargs=2, default=[1.0, 1.4])
    p.add_argument("--min-prominence", type=float, default=0.02)
    p.set_defaults(func=cmd_extract_gaps)

    for name, func, helptext in (
        ("fit-decay", cmd_fit_decay, "energy relaxation T1"),
        ("fit-echo", cmd_fit_echo, "Hahn echo T2"),
        ("fit-ramsey", cmd_fit_ramsey, "Ramsey T2*"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input", help="decay CSV (delay_us,population)")
        if name == "fit-decay":
            p.add_argument("--frequency", type=float, help="qubit frequency in GHz, adds Q")
        p.set_defaults(func=func)

    p = sub.add_parser("fit-ra", help="resistance-area product and size shrink")
    p.add_argument("input", help="prober CSV (die_x,die_y,d_nm,resistance_ohm)")
    p.add_argument("--residuals", choices=["relative", "absolute"], default="relative")
    p.set_defaults(func=cmd_fit_ra)

    p = sub.add_parser("freq-trend", help="qubit frequency versus junction size")
    p.add_argument("input", help="CSV (d_nm,frequency_GHz[,chip])")
    p.add_argument("--band", type=float, default=0.1, help="expected scatter, GHz")
    p.set_defaults(func=cmd_freq_trend)

    p = sub.add_parser("loss-budget", help="p * tan(delta) budget against a target 1/Q")
    p.add_argument("--term", action="append", type=_parse_term,
                   metavar="NAME:P:TAN_DELTA")
    p.add_argument("--swaps", action="store_true",
                   help="add the reference passivation term (p=1e-4, tan_delta=1e-2)")
    p.add_argument("--target", type=float, required=True, help="target 1/Q")
    p.add_argument("--C-J", dest="C_J", type=float, help="fF; adds the junction participation")
    p.add_argument("--C-S", dest="C_S", type=float, default=100.0, help="fF")
    p.add_argument("--measured-inv-Q", type=float,
                   help="observed 1/Q used for the junction tan_delta bound (default: target)")
    p.add_argument("--R-subgap", type=float, help="MOhm; adds the subgap Q bound")
    p.add_argument("--Z-c", type=float, default=320.0, help="Ohm")
    p.set_defaults(func=cmd_loss_budget)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = RunConfig.load(args.config)
    except ParseError as exc:
        print(f"junctionlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.output_dir or cfg.output_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            parameters, results, inputs = args.func(args, cfg, parser)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        except ParseError as exc:
            print(f"junctionlab: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except (AnalysisFailure, JunctionLabError) as exc:
            print(f"junctionlab: {args.command} failed: {exc}", file=sys.stderr)
            return EXIT_ANALYSIS
    messages = []
    for w in caught:
        text = f"{w.category.__name__}: {w.message}"
        if text not in messages:
            messages.append(text)
    parameters = dict(parameters, config=cfg.to_dict())
    parameters["config"]["output_dir"] = None  # location is not part of the result
    report = Report(
        command=args.command,
        parameters=parameters,
        results=results,
        warnings=messages,
        input_digest=file_digest(inputs) if inputs else None,
    )
    report.write(out / "report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
