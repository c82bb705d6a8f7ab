"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 runtime or levitation
failure, 3 file I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, plots
from .config import RunConfig, defaults_text, load_config
from .controllers import ConfigError
from .model import SINGLE_MASS, TWO_MASS, InfeasibleParametersError, magnet_force, solve_equilibrium
from .simulation import RideLog, read_ride_log_csv, run_closed_loop, run_comparison, write_ride_log_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


class RuntimeFailure(RuntimeError):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config file (defaults when omitted)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="override the guideway irregularity seed")
    p.add_argument("--controllers", help="comma separated controller names, e.g. C1M,C2M")
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maglev-nmpc", description="Maglev levitation NMPC simulation suite")
    parser.add_argument("--print-defaults", action="store_true",
                        help="print every config key with its default and exit")
    sub = parser.add_subparsers(dest="verb")
    p = sub.add_parser("equilibrium", help="solve the nominal operating point")
    _common(p)
    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    _common(p)
    p = sub.add_parser("compare", help="run several controllers on the same guideway")
    _common(p)
    p = sub.add_parser("spectrum", help="recompute metrics and spectra from a log CSV")
    p.add_argument("log", help="ride log CSV written by simulate or compare")
    _common(p)
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    names = None if args.controllers is None else [n.strip() for n in args.controllers.split(",") if n.strip()]
    return cfg.with_overrides(seed=args.seed, controllers=names)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_equilibrium(args) -> int:
    cfg = _load(args)
    result = {}
    for model in (TWO_MASS, SINGLE_MASS):
        eq = solve_equilibrium(cfg.mech, cfg.magnet, model)
        load = (cfg.mech.m1 + cfg.mech.m2) * cfg.mech.g if model == TWO_MASS else \
            cfg.mech.m1 * cfg.mech.g + cfg.mech.fL
        residual = float(magnet_force(eq.sNom, eq.iNom, cfg.magnet)) - load
        result[model] = {"iNom": eq.iNom, "uNom": eq.uNom, "dz2Nom": eq.dz2Nom, "sNom": eq.sNom,
                         "forceResidual": residual}
    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        print(f"{'model':<11} {'iNom [A]':>14} {'uNom [V]':>14} {'dz2Nom [m]':>14} {'residual [N]':>13}")
        for model, r in result.items():
            print(f"{model:<11} {r['iNom']:14.8g} {r['uNom']:14.8g} {r['dz2Nom']:14.8g} {r['forceResidual']:13.3e}")
    return EXIT_OK


def _metrics(log: RideLog, cfg: RunConfig) -> analysis.RideMetrics:
    a = cfg.analysis
    return analysis.ride_metrics(log, a.band, a.lowBand, a.segmentLen, a.overlap)


def _spectrum(log: RideLog, cfg: RunConfig):
    if len(log.a2) < 2:
        return None
    seg = min(cfg.analysis.segmentLen, analysis.pow2_floor(len(log.a2)))
    return analysis.welch_spectrum(log.a2, log.sampleRate, seg, cfg.analysis.overlap)


def _summary(m: analysis.RideMetrics) -> dict:
    return {"controller": m.name, "status": m.status, "rmse_ds_m": m.rmseGap, "max_abs_a2": m.maxAbsA2,
            "band_rms_a2": m.bandRmsA2, "mean_solve_ms": m.meanSolveMs,
            "saturated_fraction": m.saturatedFraction}


def _symmetric_range(values) -> tuple:
    peak = max((float(np.max(np.abs(v))) for v in values if len(v)), default=0.0)
    peak = peak if peak > 0 else 1.0
    return -peak, peak


def _histogram_panels(logs: list, cfg: RunConfig) -> list:
    bins = cfg.analysis.histBins
    panels = []
    for label, attr, scale, unit in (("car body acceleration", "a2", 1.0, "m/s^2"),
                                     ("air gap deviation", "ds", 1e3, "mm")):
        data = [getattr(log, attr) * scale for log in logs]
        rng = _symmetric_range(data)
        series = []
        for log, d in zip(logs, data):
            h = analysis.histogram(d, bins, rng)
            centres = 0.5 * (h.edges[:-1] + h.edges[1:])
            series.append((log.name, centres, h.counts.astype(float)))
        panels.append(plots.Panel(f"Histogram: {label}", f"{label} [{unit}]", "samples", series, kind="bar"))
    return panels


def _spectrum_panel(named_spectra: list, cfg: RunConfig) -> plots.Panel:
    series = [(name, s.frequencies, s.amplitude) for name, s in named_spectra if s is not None]
    return plots.Panel("Car body acceleration spectrum", "frequency [Hz]", "amplitude [m/s^2]", series,
                       logy=True, xlim=(0.0, cfg.analysis.plotFmax))


def _write_log_outputs(log: RideLog, cfg: RunConfig, out: Path) -> tuple:
    write_ride_log_csv(log, out / f"log_{log.name}.csv")
    spec = _spectrum(log, cfg)
    if spec is not None:
        analysis.write_spectrum_csv(spec, out / f"spectrum_{log.name}.csv")
    return spec


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if len(cfg.selected) != 1 and args.controllers is not None:
        raise ConfigError("simulate runs exactly one controller")
    name = cfg.selected[0]
    out = _out_dir(args)
    log = run_closed_loop(cfg.scenario(name), record_timing=cfg.recordTiming)
    spec = _write_log_outputs(log, cfg, out)
    metrics = _metrics(log, cfg) if len(log) else None
    if metrics is not None:
        analysis.write_metrics_csv([metrics], out / "metrics.csv", include_timing=cfg.recordTiming)
        trace = plots.Panel(f"Air gap deviation ({name})", "time [s]", "air gap deviation [mm]",
                            [(name, log.t, log.ds * 1e3)])
        plots.write_svg([trace], out / f"gap_{name}.svg")
        plots.write_svg([_spectrum_panel([(name, spec)], cfg)], out / f"spectrum_{name}.svg")
        plots.write_svg(_histogram_panels([log], cfg), out / f"histogram_{name}.svg", columns=2)
    _write_timing(out, [log])
    summary = _summary(metrics) if metrics is not None else {"controller": name, "status": log.status}
    if log.failed:
        summary["message"] = log.message
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()))
    if log.failed:
        print(log.message, file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _write_timing(out: Path, logs: list) -> None:
    timing = {log.name: {"mean_solve_ms": log.mean_solve_ms(), "status": log.status,
                         "samples": int(len(log.inputs))} for log in logs}
    with open(out / "timing.json", "w") as fh:
        json.dump(timing, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    guideway = cfg.guideway()
    scenarios = [cfg.scenario(name, guideway) for name in cfg.selected]
    logs = run_comparison(scenarios, record_timing=cfg.recordTiming)
    spectra, metrics = [], []
    for log in logs:
        spectra.append((log.name, _write_log_outputs(log, cfg, out)))
        if len(log):
            metrics.append(_metrics(log, cfg))
    analysis.write_metrics_csv(metrics, out / "metrics.csv", include_timing=cfg.recordTiming)
    ratios = analysis.ratio_table(metrics)
    if ratios:
        analysis.write_ratio_csv(ratios, out / "ratios.csv")
    shown = [log for log in logs if len(log)]
    if shown:
        plots.write_svg([_spectrum_panel(spectra, cfg)], out / "spectra.svg")
        plots.write_svg(_histogram_panels(shown, cfg), out / "histograms.svg", columns=2)
    _write_timing(out, logs)
    report = {"metrics": [_summary(m) for m in metrics],
              "ratios": [{"ratio": r[0], "band_rms_a2": r[1], "rmse_ds": r[2]} for r in ratios],
              "failures": {log.name: log.message for log in logs if log.failed}}
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(f"{'controller':<10} {'status':<19} {'rmse ds [mm]':>12} {'band a2':>10} {'max|a2|':>10} "
              f"{'solve [ms]':>10}")
        for m in metrics:
            print(f"{m.name:<10} {m.status:<19} {m.rmseGap * 1e3:12.5g} {m.bandRmsA2:10.4g} {m.maxAbsA2:10.4g} "
                  f"{m.meanSolveMs:10.3g}")
        for name, band, gap in ratios:
            print(f"{name}: band RMS a2 ratio {band:.4g}, RMSE ds ratio {gap:.4g}")
    for log in logs:
        if log.failed:
            print(f"{log.name}: {log.message}", file=sys.stderr)
    return EXIT_RUNTIME if any(log.failed for log in logs) else EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    name = Path(args.log).stem
    if name.startswith("log_"):
        name = name[4:]
    log = read_ride_log_csv(args.log, name=name)
    if len(log) < 2:
        raise RuntimeFailure(f"{args.log}: log holds fewer than two samples")
    out = _out_dir(args)
    spec = _spectrum(log, cfg)
    analysis.write_spectrum_csv(spec, out / f"spectrum_{name}.csv")
    plots.write_svg([_spectrum_panel([(name, spec)], cfg)], out / f"spectrum_{name}.svg")
    comfort = analysis.comfort_from_spectrum(spec, cfg.analysis.band)
    result = {"controller": name, "rmse_ds_m": analysis.rmse(log.ds), "band_rms_a2": comfort.bandRms,
              "low_band_rms_a2": spec.band_rms(*cfg.analysis.lowBand), "peak_freq_hz": comfort.peakFrequency,
              "peak_amp": comfort.peakAmplitude, "resolution_hz": spec.resolution}
    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in result.items()))
    return EXIT_OK


COMMANDS = {"equilibrium": cmd_equilibrium, "simulate": cmd_simulate, "compare": cmd_compare,
            "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        print(defaults_text(), end="")
        return EXIT_OK
    if args.verb is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, InfeasibleParametersError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeFailure, ArithmeticError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_RUNTIME", "EXIT_IO"]
