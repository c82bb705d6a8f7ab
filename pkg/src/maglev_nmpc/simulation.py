"""Closed-loop simulation: NMPC at the sampling rate, plant integrated at a finer step."""
from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .controllers import ControllerConfig, build_controller, control_step
from .guideway import GuidewayProfile, breakpoints, deflection_at, segment_slope
from .model import (TWO_MASS, MagnetParams, MechanicalParams, ModelDomainError, PlantState,
                    current_derivative, equilibrium_plant_state, magnet_force, measure_state,
                    solve_equilibrium)
from .odeint import IntegrationError

LOG_COLUMNS = ("t", "s", "ds", "z2", "v1", "v2", "a1", "a2", "I", "U", "dgw", "sqp_iters", "kkt", "solve_ms")

OK = "ok"
LEVITATION_FAILURE = "levitation_failure"
ERROR = "error"


@dataclass(frozen=True)
class PlantMismatch:
    """Scale factors applied to the plant only (controller keeps nominal values)."""
    m1: float = 1.0
    m2: float = 1.0
    ck: float = 1.0
    cd: float = 1.0
    km: float = 1.0

    def apply(self, mech: MechanicalParams, magnet: MagnetParams):
        mech = replace(mech, m1=mech.m1 * self.m1, m2=mech.m2 * self.m2,
                       ck=mech.ck * self.ck, cd=mech.cd * self.cd)
        return mech, replace(magnet, km=magnet.km * self.km)


@dataclass(frozen=True)
class Scenario:
    speed: float
    duration: float
    guideway: GuidewayProfile
    controller: ControllerConfig
    mech: MechanicalParams = MechanicalParams()
    magnet: MagnetParams = MagnetParams()
    plantStep: float = 1e-4
    initialState: Union[str, PlantState] = "equilibrium"
    mismatch: PlantMismatch = PlantMismatch()
    plantModel: str = TWO_MASS

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.speed >= 0:
            raise ValueError("speed must be non-negative")
        if self.plantModel != TWO_MASS:
            raise ValueError("only the two-mass plant is simulated")
        ratio = self.controller.samplingTime / self.plantStep
        if not self.plantStep > 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("plant step must divide the sampling time exactly")

    @property
    def substeps(self) -> int:
        return int(round(self.controller.samplingTime / self.plantStep))

    @property
    def samples(self) -> int:
        return int(round(self.duration / self.controller.samplingTime))


@dataclass
class RideLog:
    name: str
    t: np.ndarray
    s: np.ndarray
    ds: np.ndarray
    z2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    I: np.ndarray
    U: np.ndarray
    dgw: np.ndarray
    sqp_iters: np.ndarray
    kkt: np.ndarray
    solve_ms: np.ndarray
    status: str = OK
    message: str = ""
    uNom: float = 0.0
    uMax: float = float("inf")
    sampleRate: float = 1e4
    sample_stats: dict = field(default_factory=dict)  # per control sample arrays

    def __len__(self):
        return len(self.t)

    @property
    def failed(self) -> bool:
        return self.status != OK

    @property
    def inputs(self) -> np.ndarray:
        """Applied voltage deviation at each control sample."""
        return self.sample_stats.get("u", np.zeros(0))

    def mean_solve_ms(self) -> float:
        times = self.sample_stats.get("solve_ms")
        return float(np.mean(times)) if times is not None and len(times) else float("nan")


def _truncate(arrays: dict, count: int) -> dict:
    return {k: v[:count] for k, v in arrays.items()}


def run_closed_loop(scenario: Scenario, record_timing: bool = True) -> RideLog:
    """Simulate one scenario; a levitation failure ends the run with a partial log."""
    cfg = scenario.controller
    mech_plant, magnet_plant = scenario.mismatch.apply(scenario.mech, scenario.magnet)
    eq_ctrl = solve_equilibrium(scenario.mech, scenario.magnet, TWO_MASS)
    eq_plant = solve_equilibrium(mech_plant, magnet_plant, TWO_MASS)
    ctrl = build_controller(cfg, eq_ctrl, scenario.mech, scenario.magnet)

    sub = scenario.substeps
    hp = scenario.plantStep
    n_samples = scenario.samples
    rows = n_samples * sub
    # guideway at the nodes and midpoints of each plant step; slopes are taken
    # on the smooth piece around the midpoint so kinks never sit inside a step
    speed = scenario.speed
    gw = scenario.guideway
    node_pos = speed * np.arange(rows + 1) * hp
    mid_pos = speed * (np.arange(rows) + 0.5) * hp
    dgw_node = np.asarray(deflection_at(gw, node_pos), dtype=float)
    dgw_mid = np.asarray(deflection_at(gw, mid_pos), dtype=float)
    rate_start = speed * np.asarray(segment_slope(gw, node_pos[:-1], mid_pos), dtype=float)
    rate_mid = speed * np.asarray(segment_slope(gw, mid_pos, mid_pos), dtype=float)
    rate_end = speed * np.asarray(segment_slope(gw, node_pos[1:], mid_pos), dtype=float)
    # steps that straddle a slope jump are split there
    kinks = breakpoints(gw, float(node_pos[-1])) if speed > 0 else np.zeros(0)
    first_kink = np.searchsorted(kinks, node_pos[:-1], side="right")
    last_kink = np.searchsorted(kinks, node_pos[1:], side="left")

    if scenario.initialState == "equilibrium":
        plant = equilibrium_plant_state(eq_plant, float(dgw_node[0])).as_array()
    else:
        plant = scenario.initialState.as_array().astype(float)

    m1, m2, ck, cd, g = mech_plant.m1, mech_plant.m2, mech_plant.ck, mech_plant.cd, mech_plant.g
    analytic = magnet_plant.backend == "analytic"
    km, rc = magnet_plant.km, magnet_plant.rc
    s_nom = scenario.magnet.sNom

    def deriv(z1, z2, v1, v2, cur, volt, d, dr):
        s = z1 - d
        if not s > 0:
            raise ModelDomainError("air gap closed")
        if analytic:
            f_mag = km * (cur / s) ** 2
            i_dot = s / (2 * km) * (volt - rc * cur) + cur * (v1 - dr) / s
        else:
            f_mag = magnet_force(s, cur, magnet_plant)
            i_dot = current_derivative(s, v1 - dr, cur, volt, magnet_plant)
        coupling = ck * (z1 - z2) + cd * (v1 - v2)
        return v1, v2, g - (coupling + f_mag) / m1, g + coupling / m2, i_dot

    def rk4(y, volt, tau, d0, d1, d2, r0, r1, r2):
        k1 = deriv(*y, volt, d0, r0)
        k2 = deriv(*(a + 0.5 * tau * b for a, b in zip(y, k1)), volt, d1, r1)
        k3 = deriv(*(a + 0.5 * tau * b for a, b in zip(y, k2)), volt, d1, r1)
        k4 = deriv(*(a + tau * b for a, b in zip(y, k3)), volt, d2, r2)
        y = tuple(a + tau / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
        return y, k1

    def split_step(y, volt, j):
        t0 = j * hp
        cuts = [t0] + [p / speed for p in kinks[first_kink[j]:last_kink[j]]] + [t0 + hp]
        k_first = None
        for a, b in zip(cuts, cuts[1:]):
            pa, pm, pb = speed * a, speed * 0.5 * (a + b), speed * b
            d = deflection_at(gw, np.array([pa, pm, pb]))
            r = speed * segment_slope(gw, np.array([pa, pm, pb]), pm)
            y, k1 = rk4(y, volt, b - a, *d, *r)
            k_first = k1 if k_first is None else k_first
        return y, k_first

    log = {name: np.zeros(rows) for name in LOG_COLUMNS}
    log["sqp_iters"] = np.zeros(rows, dtype=np.int64)
    per_sample = {"u": np.zeros(n_samples), "solve_ms": np.zeros(n_samples),
                  "sqp_iters": np.zeros(n_samples, dtype=np.int64), "kkt": np.zeros(n_samples),
                  "converged": np.zeros(n_samples, dtype=bool)}
    status, message, done_rows, done_samples = OK, "", 0, 0
    z1, z2, v1, v2, cur = (float(v) for v in plant)
    try:
        for k in range(n_samples):
            j0 = k * sub
            x_meas = measure_state((z1, z2, v1, v2, cur), float(dgw_node[j0]), ctrl.eq, cfg.model)
            u, stats = control_step(ctrl, x_meas)
            volt = ctrl.eq.uNom + u
            solve_ms = stats.solveTime * 1e3 if record_timing else 0.0
            per_sample["u"][k] = u
            per_sample["solve_ms"][k] = stats.solveTime * 1e3
            per_sample["sqp_iters"][k] = stats.sqpIterations
            per_sample["kkt"][k] = stats.kktResidual
            per_sample["converged"][k] = stats.converged
            done_samples = k + 1
            for j in range(j0, j0 + sub):
                y = (z1, z2, v1, v2, cur)
                if last_kink[j] > first_kink[j]:
                    y, k1 = split_step(y, volt, j)
                else:
                    y, k1 = rk4(y, volt, hp, dgw_node[j], dgw_mid[j], dgw_node[j + 1],
                                rate_start[j], rate_mid[j], rate_end[j])
                log["t"][j] = j * hp
                log["s"][j] = z1 - dgw_node[j]
                log["ds"][j] = z1 - dgw_node[j] - s_nom
                log["z2"][j] = z2
                log["v1"][j] = v1
                log["v2"][j] = v2
                log["a1"][j] = k1[2]
                log["a2"][j] = k1[3]
                log["I"][j] = cur
                log["U"][j] = volt
                log["dgw"][j] = dgw_node[j]
                log["sqp_iters"][j] = stats.sqpIterations
                log["kkt"][j] = stats.kktResidual
                log["solve_ms"][j] = solve_ms
                done_rows = j + 1
                z1, z2, v1, v2, cur = y
                gap = z1 - dgw_node[j + 1]
                if not (0.0 < gap < 2.0 * s_nom) or not math.isfinite(gap):
                    raise ModelDomainError(f"air gap {gap:.6g} m left (0, {2 * s_nom:g}) m at t = {(j + 1) * hp:.6g} s")
    except (ModelDomainError, IntegrationError) as exc:
        status, message = LEVITATION_FAILURE, f"levitation failure: {exc}"
    log = _truncate(log, done_rows)
    per_sample = _truncate(per_sample, done_samples)
    return RideLog(name=cfg.name, status=status, message=message, uNom=ctrl.eq.uNom,
                   uMax=scenario.magnet.uMax, sampleRate=1.0 / hp, sample_stats=per_sample, **log)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("MAGLEV_NMPC_THREADS")
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def _run_safe(args):
    scenario, record_timing = args
    try:
        return run_closed_loop(scenario, record_timing)
    except Exception as exc:  # reported per scenario, others proceed
        empty = {name: np.zeros(0) for name in LOG_COLUMNS}
        return RideLog(name=scenario.controller.name, status=ERROR, message=f"{type(exc).__name__}: {exc}",
                       **empty)


def run_comparison(scenarios: list, workers: Optional[int] = None, record_timing: bool = True) -> list:
    """Run independent scenarios, in worker processes when more than one is allowed."""
    workers = worker_count() if workers is None else workers
    jobs = [(sc, record_timing) for sc in scenarios]
    if workers <= 1 or len(scenarios) <= 1:
        return [_run_safe(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(scenarios))) as pool:
        return list(pool.map(_run_safe, jobs))


def write_ride_log_csv(log: RideLog, path) -> None:
    cols = [log.t, log.s, log.ds, log.z2, log.v1, log.v2, log.a1, log.a2, log.I, log.U, log.dgw,
            log.sqp_iters, log.kkt, log.solve_ms]
    lists = [c.tolist() for c in cols]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for row in zip(*lists):
            fh.write(",".join(map(repr, row)) + "\n")


def read_ride_log_csv(path, name: str = "") -> RideLog:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != LOG_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        body = fh.read()
    if body.strip():
        data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    else:
        data = np.zeros((0, len(LOG_COLUMNS)))
    arrays = {c: data[:, i].copy() for i, c in enumerate(LOG_COLUMNS)}
    arrays["sqp_iters"] = arrays["sqp_iters"].astype(np.int64)
    t = arrays["t"]
    rate = 1.0 / (t[1] - t[0]) if len(t) > 1 else 1e4
    return RideLog(name=name, sampleRate=rate, **arrays)
