"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints ``criterion N: PASS|FAIL`` with the measured numbers; the
summary is repeated at the end of the pytest run. The 30 s ride comparisons
are computed once per session and shared.
"""
import functools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import record
from maglev_nmpc.analysis import ride_metrics
from maglev_nmpc.cli import main
from maglev_nmpc.config import load_config
from maglev_nmpc.controllers import build_controller, control_step, reset, preset_configs
from maglev_nmpc.model import (SINGLE_MASS, TWO_MASS, LevitationModel, LinearizedModel, MagnetParams,
                               MechanicalParams, solve_equilibrium, state_derivative)
from maglev_nmpc.odeint import discretize_with_sensitivities, integrate, rk4_step
from maglev_nmpc.ocp import solve_qp_riccati
from maglev_nmpc.simulation import run_closed_loop, run_comparison
from oracles import central_jacobian, dense_kkt, finite_horizon_lqr_gain, random_stage, rk4_transition

pytestmark = pytest.mark.slow

MECH = MechanicalParams()
MAGNET = MagnetParams()
EQ = solve_equilibrium(MECH, MAGNET)
RETUNED = (1e3, 1e4, 1.0, 1.0, 1e2)
MARGIN = 0.9  # band-RMS ratios must sit at least 10% below one


@functools.lru_cache(maxsize=None)
def ride_comparison():
    """The three default controllers over the default 30 s stochastic ride."""
    cfg = load_config()
    gw = cfg.guideway()
    logs = run_comparison([cfg.scenario(name, gw) for name in cfg.selected], record_timing=True)
    return {log.name: ride_metrics(log, cfg.analysis.band, cfg.analysis.lowBand) for log in logs}


@functools.lru_cache(maxsize=None)
def retuning_comparison():
    """Sag-only ride: two-mass controller with both weight sets, single-mass with the retuned subset."""
    cfg = replace(load_config(), stochastic=False)
    gw = cfg.guideway()
    retuned = preset_configs(RETUNED)
    variants = {"C2M_default": replace(cfg.controllers["C2M"], name="C2M_default"),
                "C2M_retuned": replace(retuned["C2M"], name="C2M_retuned"),
                "C1M_retuned": replace(retuned["C1M"], name="C1M_retuned")}
    scenarios = [replace(cfg.scenario("C2M", gw), controller=ctl) for ctl in variants.values()]
    logs = run_comparison(scenarios, record_timing=False)
    return {log.name: ride_metrics(log, cfg.analysis.band, cfg.analysis.lowBand) for log in logs}


def test_criterion_01_equilibrium_hold():
    cfg = replace(load_config(), stochastic=False, sagAmplitude=0.0, duration=5.0)
    start = time.perf_counter()
    log = run_closed_loop(cfg.scenario("C1M"), record_timing=False)
    elapsed = time.perf_counter() - start
    max_ds = float(np.max(np.abs(log.ds)))
    max_u = float(np.max(np.abs(log.U - log.uNom)))
    passed = log.status == "ok" and max_ds < 1e-9 and max_u < 1e-9 and elapsed < 30.0
    record(1, passed, f"max|ds|={max_ds:.3g} m, max|u|={max_u:.3g} V, runtime {elapsed:.1f} s")
    assert passed


def test_criterion_02_lqr_oracle():
    start = time.perf_counter()
    lin = LinearizedModel(LevitationModel(TWO_MASS, MECH, MAGNET, EQ))
    cfg = preset_configs()["C2M"]
    ctrl = build_controller(cfg, EQ, MECH, MAGNET, model=lin)
    Ad, Bd = rk4_transition(lin.A, lin.B, cfg.stepLen)
    Q = lin.C.T @ np.diag(cfg.qWeights) @ lin.C * cfg.stepLen
    K = finite_horizon_lqr_gain(Ad, Bd, Q, np.array([[cfg.rWeight * cfg.stepLen]]), cfg.nIntervals)
    rng = np.random.default_rng(2024)
    worst, max_bounds = 0.0, 0
    for _ in range(100):
        x = rng.normal(size=5) * np.array([1e-5, 1e-5, 1e-4, 1e-4, 1e-3])
        reset(ctrl)
        u, stats = control_step(ctrl, x)
        u_lqr = -(K @ x)[0]
        worst = max(worst, abs(u - u_lqr) / abs(u_lqr))
        max_bounds = max(max_bounds, stats.activeBounds)
    elapsed = time.perf_counter() - start
    passed = worst < 1e-6 and max_bounds == 0 and elapsed < 60.0
    record(2, passed, f"worst relative input error {worst:.2e} over 100 states, runtime {elapsed:.1f} s")
    assert passed


def test_criterion_03_riccati_vs_dense_kkt():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        N, n, m = rng.integers(1, 6), rng.integers(1, 4), rng.integers(1, 3)
        stage = random_stage(rng, N, n, m)
        dx0 = rng.normal(size=n)
        lo, up = -np.abs(rng.normal(size=(N, m))), np.abs(rng.normal(size=(N, m)))
        active = rng.integers(-1, 2, size=(N, m))
        sol = solve_qp_riccati(stage, dx0, lo, up, active, reg=0.0)
        X, U, lam, nu = dense_kkt(stage, dx0, active, lo, up)
        worst = max(worst, np.max(np.abs(sol.dX - X)), np.max(np.abs(sol.dU - U)),
                    np.max(np.abs(sol.lam - lam)), np.max(np.abs(sol.nu - nu)))
    passed = worst < 1e-9
    record(3, passed, f"max abs deviation {worst:.2e} over 200 instances")
    assert passed


def _rel(J, J_ref):
    return float(np.linalg.norm(J - J_ref) / np.linalg.norm(J_ref))


def test_criterion_04_jacobians():
    rng = np.random.default_rng(4)
    worst_f = worst_d = 0.0
    for kind in (TWO_MASS, SINGLE_MASS):
        eq = solve_equilibrium(MECH, MAGNET, kind)
        model = LevitationModel(kind, MECH, MAGNET, eq)
        scale = np.array([1e-3, 1e-3, 0.05, 0.05, 2.0]) if kind == TWO_MASS else np.array([1e-3, 0.05, 2.0])
        for _ in range(50):
            x = rng.normal(size=model.n) * scale
            u = np.array([rng.normal() * 20.0])
            A, B = model.jacobian_f(x, u)
            f = lambda z, w: state_derivative(z, w[0], eq, MECH, MAGNET, kind)
            worst_f = max(worst_f, _rel(A, central_jacobian(lambda z: f(z, u), x)),
                          _rel(B, central_jacobian(lambda w: f(x, w), u)))
            res = discretize_with_sensitivities(model.f, x, u, 1e-3)
            Ad = central_jacobian(lambda z: integrate(model.f, z, u, 1e-3), x)
            Bd = central_jacobian(lambda w: integrate(model.f, x, w, 1e-3), u)
            worst_d = max(worst_d, _rel(np.hstack([res.aMat, res.bMat]), np.hstack([Ad, Bd])))
    passed = worst_f < 1e-5 and worst_d < 1e-5
    record(4, passed, f"state derivative {worst_f:.2e}, discretization {worst_d:.2e} (100 points)")
    assert passed


def test_criterion_05_integrator_order():
    def global_error(h):
        x = np.array([1.0])
        for _ in range(int(round(1.0 / h))):
            x = rk4_step(lambda z, u: -z, x, None, h)
        return abs(x[0] - math.exp(-1.0))

    errors = [global_error(h) for h in (1e-2, 5e-3, 2.5e-3)]
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    passed = all(3.8 <= p <= 4.2 for p in orders)
    record(5, passed, "observed orders " + ", ".join(f"{p:.3f}" for p in orders))
    assert passed


def test_criterion_06_comfort_ordering():
    m = ride_comparison()
    c1, c2, c2l = m["C1M"], m["C2M"], m["C2ML"]
    r2, r2l = c2.bandRmsA2 / c1.bandRmsA2, c2l.bandRmsA2 / c1.bandRmsA2
    low = c2l.lowBandRmsA2 < c2.lowBandRmsA2
    passed = r2 <= MARGIN and r2l <= MARGIN and low
    record(6, passed, f"band RMS a2 C1M {c1.bandRmsA2:.5g}, C2M {c2.bandRmsA2:.5g}, C2ML {c2l.bandRmsA2:.5g}; "
                      f"ratios C2M/C1M {r2:.3f}, C2ML/C1M {r2l:.3f} (need <= {MARGIN}); "
                      f"below-f0 RMS C2ML {c2l.lowBandRmsA2:.4g} vs C2M {c2.lowBandRmsA2:.4g}")
    assert passed


def test_criterion_07_tracking_tradeoff():
    m = ride_comparison()
    a, b = m["C1M"].rmseGap, m["C2M"].rmseGap
    passed = a <= b
    record(7, passed, f"RMSE ds C1M {a * 1e3:.5f} mm, C2M {b * 1e3:.5f} mm")
    assert passed


def test_criterion_08_weight_retuning():
    m = retuning_comparison()
    base, tuned, single = m["C2M_default"], m["C2M_retuned"], m["C1M_retuned"]
    better = tuned.rmseGap < base.rmseGap
    calmer = tuned.bandRmsA2 < single.bandRmsA2
    passed = better and calmer
    record(8, passed, f"C2M RMSE ds {base.rmseGap * 1e3:.4f} -> {tuned.rmseGap * 1e3:.4f} mm; "
                      f"band RMS a2 C2M {tuned.bandRmsA2:.4g} vs C1M {single.bandRmsA2:.4g}")
    assert passed


def test_criterion_09_input_constraint():
    cfg = load_config()
    cfg = replace(cfg, duration=1.0, magnet=replace(cfg.magnet, uMax=60.0))
    log = run_closed_loop(cfg.scenario("C2M"), record_timing=False)
    u_max = cfg.magnet.uMax
    inside = bool(np.all(np.abs(log.inputs) <= u_max)
                  and np.all(log.U <= log.uNom + u_max) and np.all(log.U >= log.uNom - u_max))
    saturated = int(np.sum(np.abs(log.inputs) == u_max))
    passed = inside and saturated > 0 and log.status == "ok"
    record(9, passed, f"uMax {u_max:g} V: {saturated}/{len(log.inputs)} samples saturated, "
                      f"all within bounds: {inside}, status {log.status}")
    assert passed


def test_criterion_10_timing_report():
    m = ride_comparison()
    t = [m[name].meanSolveMs for name in ("C1M", "C2M", "C2ML")]
    passed = t[0] < t[1] < t[2]
    record(10, passed, "mean solve ms C1M {:.3f}, C2M {:.3f}, C2ML {:.3f}".format(*t))
    assert passed


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "ride.ini"
    cfg.write_text("[scenario]\nduration = 1.0\n[analysis]\nsegment_len = 4096\n")
    for tag in ("first", "second"):
        assert main(["compare", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / tag)]) == 0
    names = sorted(p.name for p in (tmp_path / "first").glob("*.csv"))
    same = [(tmp_path / "first" / n).read_bytes() == (tmp_path / "second" / n).read_bytes() for n in names]
    passed = len(names) >= 8 and all(same)
    record(11, passed, f"{sum(same)}/{len(names)} CSV files byte-identical")
    assert passed


def test_peak_body_acceleration_ordering():
    # companion check from the simulation examples: the two-mass controller keeps peaks lower
    m = ride_comparison()
    a, b = m["C1M"].maxAbsA2, m["C2M"].maxAbsA2
    print(f"supplementary: max|a2| C1M {a:.4g}, C2M {b:.4g}")
    assert b < a
