"""Scenario configuration files.

A config is an INI document with the sections ``[plant]``, ``[magnet]``,
``[guideway]``, ``[scenario]``, ``[analysis]`` and one ``[controller.<name>]``
section per controller. Keys may contain dots (``mismatch.km``). Every key
has a default; unknown sections or keys are rejected so a typo cannot pass
silently. :func:`defaults_text` renders the full table as a config file.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .controllers import ConfigError, ControllerConfig, preset_configs
from .guideway import GuidewayProfile, IrregularityParams, build_profile
from .model import (SINGLE_MASS, TWO_MASS, MagnetParams, MechanicalParams, equilibrium_plant_state,
                    load_magnet_table, solve_equilibrium)
from .ocp import CONVERGE, REAL_TIME
from .simulation import PlantMismatch, Scenario

AUTO = "auto"


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _names(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _optional(parse: Callable) -> Callable:
    def inner(text: str):
        return None if text.strip().lower() in (AUTO, "none", "") else parse(text)
    return inner


def _choice(*allowed: str) -> Callable:
    def inner(text: str):
        if text.strip() not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}")
        return text.strip()
    return inner


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable
    default: str
    help: str


_SECTIONS = {
    "plant": (
        Key("m1", _float, "500", "magnet and chassis mass [kg]"),
        Key("m2", _float, "3000", "car body mass [kg]"),
        Key("f0", _float, "1.0", "car body suspension frequency [Hz], used when ck is auto"),
        Key("damping_ratio", _float, "0.2", "suspension damping ratio, used when cd is auto"),
        Key("ck", _optional(_float), AUTO, "suspension stiffness [N/m]"),
        Key("cd", _optional(_float), AUTO, "suspension damping [N s/m]"),
        Key("g", _float, "9.81", "gravity [m/s^2]"),
        Key("fL", _optional(_float), AUTO, "static load on the single-mass model [N], auto = m2 g"),
        Key("mismatch.m1", _float, "1", "plant-only scale factor on m1"),
        Key("mismatch.m2", _float, "1", "plant-only scale factor on m2"),
        Key("mismatch.ck", _float, "1", "plant-only scale factor on ck"),
        Key("mismatch.cd", _float, "1", "plant-only scale factor on cd"),
        Key("mismatch.km", _float, "1", "plant-only scale factor on km"),
    ),
    "magnet": (
        Key("km", _float, repr(MagnetParams().km), "force constant in F = km (I/s)^2 [N m^2/A^2]"),
        Key("rc", _float, "1.0", "coil resistance [Ohm]"),
        Key("s_nom", _float, "0.01", "nominal air gap [m]"),
        Key("u_max", _float, "300", "bound on the voltage deviation [V]"),
        Key("backend", _choice("analytic", "table"), "analytic", "magnet model: analytic or table"),
        Key("table", _optional(str), "none", "magnet table file for the table backend"),
    ),
    "guideway": (
        Key("girder_length", _float, "31", "girder span [m]"),
        Key("sag_amplitude", _float, "0.002", "peak girder sag [m]"),
        Key("stochastic", _bool, "true", "add seeded random irregularity"),
        Key("seed", _int, "1", "irregularity seed"),
        Key("irregularity.rms", _float, "0.0005", "irregularity RMS [m]"),
        Key("irregularity.cutoff_wavelength", _float, "10", "irregularity low-pass wavelength [m]"),
        Key("irregularity.spacing", _float, "0.25", "irregularity sample spacing [m]"),
    ),
    "scenario": (
        Key("speed", _float, repr(600 / 3.6), "vehicle speed [m/s]"),
        Key("duration", _float, "30", "simulated time [s]"),
        Key("plant_step", _float, "1e-4", "plant integration step [s]"),
        Key("initial_gap_offset", _float, "0", "initial air gap offset from equilibrium [m]"),
        Key("controllers", _names, "C1M, C2M, C2ML", "controllers run by compare"),
        Key("record_timing", _bool, "false", "write wall-clock solve times into the log CSV"),
    ),
    "analysis": (
        Key("band", _floats, "0.5, 5.0", "comfort band for the body acceleration RMS [Hz]"),
        Key("low_band", _floats, "0.2, 1.0", "band below the suspension frequency [Hz]"),
        Key("segment_len", _int, "65536", "Welch segment length (power of two)"),
        Key("overlap", _float, "0.5", "Welch segment overlap fraction"),
        Key("hist_bins", _int, "41", "histogram bin count"),
        Key("plot_fmax", _float, "20", "upper frequency of spectrum plots [Hz]"),
    ),
}

_CONTROLLER_KEYS = (
    Key("model", _choice(TWO_MASS, SINGLE_MASS), "", "prediction model"),
    Key("horizon", _float, "", "prediction horizon [s]"),
    Key("intervals", _int, "", "shooting intervals"),
    Key("weights", _floats, "", "output weights (5 for twoMass, 3 for singleMass)"),
    Key("r_weight", _float, "1", "input weight"),
    Key("sampling_time", _float, "0.001", "control period [s]"),
    Key("mode", _choice(CONVERGE, REAL_TIME), CONVERGE, "converge or realTimeIteration"),
    Key("substeps", _int, "1", "RK4 steps per shooting interval"),
    Key("output_scale", _optional(_floats), "none", "unit factors applied to outputs before weighting"),
    Key("kkt_tol", _float, "1e-6", "SQP stationarity tolerance"),
    Key("defect_tol", _float, "1e-8", "SQP continuity tolerance"),
    Key("max_iter", _int, "30", "SQP iteration limit"),
)


def _controller_defaults() -> dict:
    out = {}
    for name, cfg in preset_configs().items():
        out[name] = {"model": cfg.model, "horizon": repr(cfg.horizon), "intervals": str(cfg.nIntervals),
                     "weights": ", ".join(f"{w:g}" for w in cfg.qWeights)}
    return out


CONTROLLER_NAMES = tuple(preset_configs().keys())


@dataclass(frozen=True)
class AnalysisSettings:
    band: tuple = (0.5, 5.0)
    lowBand: tuple = (0.2, 1.0)
    segmentLen: int = 65536
    overlap: float = 0.5
    histBins: int = 41
    plotFmax: float = 20.0


@dataclass(frozen=True)
class RunConfig:
    mech: MechanicalParams
    magnet: MagnetParams
    mismatch: PlantMismatch
    girderLength: float
    sagAmplitude: float
    stochastic: bool
    seed: int
    irregularity: IrregularityParams
    speed: float
    duration: float
    plantStep: float
    initialGapOffset: float
    controllers: dict
    selected: tuple
    recordTiming: bool
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)

    def guideway(self) -> GuidewayProfile:
        length = self.speed * self.duration + self.girderLength
        return build_profile(length, self.girderLength, self.sagAmplitude, self.irregularity,
                             self.seed, self.stochastic)

    def scenario(self, name: str, guideway: Optional[GuidewayProfile] = None) -> Scenario:
        if name not in self.controllers:
            raise ConfigError(f"unknown controller '{name}'; valid names: {', '.join(self.controllers)}")
        initial = "equilibrium"
        if self.initialGapOffset:
            mech_p, magnet_p = self.mismatch.apply(self.mech, self.magnet)
            eq = solve_equilibrium(mech_p, magnet_p, TWO_MASS)
            st = equilibrium_plant_state(eq, 0.0)
            initial = replace(st, z1=st.z1 + self.initialGapOffset)
        return Scenario(speed=self.speed, duration=self.duration,
                        guideway=self.guideway() if guideway is None else guideway,
                        controller=self.controllers[name], mech=self.mech, magnet=self.magnet,
                        plantStep=self.plantStep, initialState=initial, mismatch=self.mismatch)

    def with_overrides(self, seed: Optional[int] = None, controllers=None) -> "RunConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if controllers is not None:
            names = tuple(controllers)
            unknown = [n for n in names if n not in out.controllers]
            if unknown or not names:
                raise ConfigError(f"unknown controller(s) {', '.join(unknown) or '(none)'}; "
                                  f"valid names: {', '.join(out.controllers)}")
            out = replace(out, selected=names)
        return out


def defaults_text() -> str:
    """The defaults table, written as a complete config file."""
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for k in keys:
            lines.append(f"# {k.help}")
            lines.append(f"{k.name} = {k.default}")
        lines.append("")
    for name, values in _controller_defaults().items():
        lines.append(f"[controller.{name}]")
        for k in _CONTROLLER_KEYS:
            lines.append(f"# {k.help}")
            lines.append(f"{k.name} = {values.get(k.name, k.default)}")
        lines.append("")
    return "\n".join(lines)


def _parse_section(label: str, keys, given: dict, defaults: dict) -> dict:
    known = {k.name: k for k in keys}
    unknown = sorted(set(given) - set(known))
    if unknown:
        raise ConfigError(f"[{label}] unknown key(s): {', '.join(unknown)}")
    out = {}
    for name, k in known.items():
        text = given.get(name, defaults.get(name, k.default))
        try:
            out[name] = k.parse(text)
        except ValueError as exc:
            raise ConfigError(f"[{label}] {name} = {text!r}: {exc}") from None
    return out


def parse_config(text: str = "", source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    ctrl_defaults = _controller_defaults()
    given_ctrl = {}
    for section in parser.sections():
        if section.startswith("controller."):
            name = section.split(".", 1)[1]
            if name not in ctrl_defaults:
                raise ConfigError(f"unknown controller section [{section}]; valid names: "
                                  f"{', '.join(ctrl_defaults)}")
            given_ctrl[name] = dict(parser[section])
        elif section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    values = {s: _parse_section(s, keys, dict(parser[s]) if parser.has_section(s) else {}, {})
              for s, keys in _SECTIONS.items()}
    ctrl_values = {name: _parse_section(f"controller.{name}", _CONTROLLER_KEYS, given_ctrl.get(name, {}), d)
                   for name, d in ctrl_defaults.items()}
    try:
        return _build(values, ctrl_values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None) -> RunConfig:
    """Read a config file; ``None`` gives the defaults. Missing files raise OSError."""
    if path is None:
        return parse_config()
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, str(path))


def _build(v: dict, ctrl: dict) -> RunConfig:
    p = v["plant"]
    mech = MechanicalParams.from_modal(p["m1"], p["m2"], p["f0"], p["damping_ratio"], p["g"], p["fL"])
    mech = replace(mech, ck=mech.ck if p["ck"] is None else p["ck"], cd=mech.cd if p["cd"] is None else p["cd"])
    mismatch = PlantMismatch(m1=p["mismatch.m1"], m2=p["mismatch.m2"], ck=p["mismatch.ck"],
                             cd=p["mismatch.cd"], km=p["mismatch.km"])
    if min(mismatch.m1, mismatch.m2, mismatch.ck, mismatch.km) <= 0 or mismatch.cd < 0:
        raise ConfigError("mismatch factors must be positive")

    m = v["magnet"]
    table = None
    if m["backend"] == "table":
        if m["table"] is None:
            raise ConfigError("[magnet] backend = table needs a table file")
        table = load_magnet_table(m["table"])
    magnet = MagnetParams(km=m["km"], rc=m["rc"], sNom=m["s_nom"], uMax=m["u_max"],
                          backend=m["backend"], table=table)

    gw = v["guideway"]
    irr = IrregularityParams(rms=gw["irregularity.rms"], cutoff_wavelength=gw["irregularity.cutoff_wavelength"],
                             spacing=gw["irregularity.spacing"])

    a = v["analysis"]
    for label in ("band", "low_band"):
        lo_hi = a[label]
        if len(lo_hi) != 2 or not 0 <= lo_hi[0] < lo_hi[1]:
            raise ConfigError(f"[analysis] {label} must be two increasing frequencies")
    seg = a["segment_len"]
    if seg < 2 or seg & (seg - 1):
        raise ConfigError("[analysis] segment_len must be a power of two")
    if not 0 <= a["overlap"] < 1:
        raise ConfigError("[analysis] overlap must be in [0, 1)")
    if a["hist_bins"] < 1 or not a["plot_fmax"] > 0:
        raise ConfigError("[analysis] hist_bins and plot_fmax must be positive")
    analysis = AnalysisSettings(band=a["band"], lowBand=a["low_band"], segmentLen=seg, overlap=a["overlap"],
                                histBins=a["hist_bins"], plotFmax=a["plot_fmax"])

    controllers = {}
    for name, c in ctrl.items():
        cfg = ControllerConfig(name=name, model=c["model"], horizon=c["horizon"], nIntervals=c["intervals"],
                               qWeights=c["weights"], rWeight=c["r_weight"], samplingTime=c["sampling_time"],
                               mode=c["mode"], substeps=c["substeps"], outputScale=c["output_scale"],
                               kktTol=c["kkt_tol"], defectTol=c["defect_tol"], maxIter=c["max_iter"])
        if cfg.substeps < 1 or cfg.maxIter < 1:
            raise ConfigError(f"[controller.{name}] substeps and max_iter must be >= 1")
        if not math.isclose(cfg.stepLen, cfg.samplingTime, rel_tol=1e-9):
            # shifting the warm start by one interval assumes one interval per sample
            raise ConfigError(f"[controller.{name}] horizon / intervals must equal sampling_time")
        controllers[name] = cfg

    s = v["scenario"]
    selected = s["controllers"]
    unknown = [n for n in selected if n not in controllers]
    if unknown or not selected:
        raise ConfigError(f"[scenario] unknown controller(s) {', '.join(unknown) or '(none)'}; "
                          f"valid names: {', '.join(controllers)}")
    if not s["speed"] >= 0 or not s["duration"] > 0 or not s["plant_step"] > 0:
        raise ConfigError("[scenario] speed must be >= 0, duration and plant_step > 0")
    for cfg in controllers.values():
        ratio = cfg.samplingTime / s["plant_step"]
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(f"[scenario] plant_step must divide the sampling time of {cfg.name}")
    return RunConfig(mech=mech, magnet=magnet, mismatch=mismatch, girderLength=gw["girder_length"],
                     sagAmplitude=gw["sag_amplitude"], stochastic=gw["stochastic"], seed=gw["seed"],
                     irregularity=irr, speed=s["speed"], duration=s["duration"], plantStep=s["plant_step"],
                     initialGapOffset=s["initial_gap_offset"], controllers=controllers, selected=selected,
                     recordTiming=s["record_timing"], analysis=analysis)


__all__ = ["AnalysisSettings", "CONTROLLER_NAMES", "RunConfig", "defaults_text",
           "load_config", "parse_config"]
