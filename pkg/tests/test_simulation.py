from dataclasses import replace

import numpy as np
import pytest

from maglev_nmpc.controllers import preset_configs
from maglev_nmpc.guideway import IrregularityParams, build_profile
from maglev_nmpc.model import MagnetParams, MechanicalParams, equilibrium_plant_state, solve_equilibrium
from maglev_nmpc.simulation import (LEVITATION_FAILURE, LOG_COLUMNS, OK, PlantMismatch, Scenario,
                                    read_ride_log_csv, run_closed_loop, run_comparison, worker_count,
                                    write_ride_log_csv)

CFG = preset_configs()
MECH = MechanicalParams()
MAGNET = MagnetParams()
SPEED = 600 / 3.6
FLAT = build_profile(400.0, sag_amplitude=0.0, stochastic=False)
ROUGH = build_profile(400.0, seed=3)


def scenario(name="C2M", guideway=ROUGH, duration=0.2, **kw):
    return Scenario(speed=kw.pop("speed", SPEED), duration=duration, guideway=guideway,
                    controller=CFG[name], **kw)


def perturbed_start(offset):
    st = equilibrium_plant_state(solve_equilibrium(MECH, MAGNET))
    return replace(st, z1=st.z1 + offset)


def test_equilibrium_hold():
    log = run_closed_loop(scenario("C1M", FLAT, duration=0.5), record_timing=False)
    assert log.status == OK
    assert np.max(np.abs(log.ds)) < 1e-9
    assert np.max(np.abs(log.U - log.uNom)) < 1e-9


def test_log_shapes_and_time_base():
    log = run_closed_loop(scenario(duration=0.05), record_timing=False)
    assert len(log) == 500
    for col in LOG_COLUMNS:
        assert len(getattr(log, col)) == 500
    np.testing.assert_allclose(np.diff(log.t), 1e-4, rtol=1e-9)
    assert len(log.inputs) == 50
    assert np.all(log.solve_ms == 0.0)


def test_zero_order_hold_breakpoints():
    log = run_closed_loop(scenario(duration=0.1), record_timing=False)
    changes = np.flatnonzero(np.diff(log.U) != 0.0) + 1
    assert changes.size > 0
    assert np.all(changes % 10 == 0)
    np.testing.assert_array_equal(log.U[::10], log.uNom + log.inputs)


def test_guideway_rms_passes_through():
    params = IrregularityParams(rms=0.5e-3)
    gw = build_profile(SPEED * 2.0 + 31.0, sag_amplitude=0.0, irregularity=params, seed=1)
    log = run_closed_loop(scenario("C1M", gw, duration=2.0), record_timing=False)
    assert log.status == OK
    assert abs(np.sqrt(np.mean(log.dgw ** 2)) / 0.5e-3 - 1) < 0.10


def test_energy_balance_from_perturbed_start():
    log = run_closed_loop(scenario(guideway=FLAT, duration=1.0, speed=0.0,
                                   initialState=perturbed_start(5e-4)), record_timing=False)
    assert log.status == OK
    z1, z2, v1, v2 = log.s, log.z2, log.v1, log.v2
    energy = (0.5 * MECH.m1 * v1 ** 2 + 0.5 * MECH.m2 * v2 ** 2 + 0.5 * MECH.ck * (z1 - z2) ** 2
              - MECH.g * (MECH.m1 * z1 + MECH.m2 * z2))
    power = -MAGNET.km * (log.I / log.s) ** 2 * v1 - MECH.cd * (v1 - v2) ** 2
    h = log.t[1] - log.t[0]
    work = np.concatenate([[0.0], np.cumsum(0.5 * h * (power[1:] + power[:-1]))])
    residual = np.max(np.abs(energy - energy[0] - work))
    assert residual < 1e-6 * abs(energy[0]) * log.t[-1]


def test_csv_round_trip(tmp_path):
    log = run_closed_loop(scenario(duration=0.05))
    write_ride_log_csv(log, tmp_path / "log.csv")
    back = read_ride_log_csv(tmp_path / "log.csv", log.name)
    for col in LOG_COLUMNS:
        np.testing.assert_array_equal(getattr(back, col), getattr(log, col))
    assert back.sampleRate == pytest.approx(1e4)
    assert (tmp_path / "log.csv").read_text().splitlines()[0] == ",".join(LOG_COLUMNS)


def test_csv_rejects_foreign_columns(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_ride_log_csv(tmp_path / "x.csv")


def test_runs_are_deterministic_and_order_independent():
    a, b = scenario("C1M", duration=0.1), scenario("C2M", duration=0.1)
    first = run_comparison([a, b], workers=1, record_timing=False)
    second = run_comparison([b, a], workers=2, record_timing=False)
    for log, other in ((first[0], second[1]), (first[1], second[0])):
        assert log.name == other.name
        for col in LOG_COLUMNS:
            np.testing.assert_array_equal(getattr(log, col), getattr(other, col))
    # the controllers share one guideway
    np.testing.assert_array_equal(first[0].dgw, first[1].dgw)


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("MAGLEV_NMPC_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("MAGLEV_NMPC_THREADS", "zero")
    assert worker_count(2) == 2


def test_plant_mismatch_shifts_operating_point():
    nominal = run_closed_loop(scenario(guideway=FLAT, duration=0.3), record_timing=False)
    heavy = run_closed_loop(scenario(guideway=FLAT, duration=0.3, mismatch=PlantMismatch(m1=1.05)),
                            record_timing=False)
    assert heavy.status == OK
    # no integral action, so a heavier magnet settles with a gap offset
    assert abs(heavy.ds[-1]) > 1e-6 and abs(nominal.ds[-1]) < 1e-9


def test_levitation_failure_keeps_partial_log():
    weak = replace(MAGNET, uMax=0.5)
    log = run_closed_loop(scenario(guideway=FLAT, duration=1.0, speed=0.0, magnet=weak,
                                   initialState=perturbed_start(2e-3)), record_timing=False)
    assert log.status == LEVITATION_FAILURE
    assert "levitation failure" in log.message
    assert 0 < len(log) < 10000
    assert all(len(getattr(log, c)) == len(log) for c in LOG_COLUMNS)
    assert np.all(np.abs(log.U - log.uNom) <= 0.5)


def test_failed_scenario_does_not_stop_the_batch():
    bad = scenario(guideway=FLAT, duration=1.0, speed=0.0, magnet=replace(MAGNET, uMax=0.5),
                   initialState=perturbed_start(2e-3))
    logs = run_comparison([bad, scenario("C1M", duration=0.05)], workers=1, record_timing=False)
    assert [log.status for log in logs] == [LEVITATION_FAILURE, OK]


def test_halving_plant_step_barely_changes_accelerations():
    coarse = run_closed_loop(scenario(duration=0.5), record_timing=False)
    fine = run_closed_loop(scenario(duration=0.5, plantStep=5e-5), record_timing=False)
    for col in ("a1", "a2"):
        a, b = getattr(coarse, col), getattr(fine, col)[::2]
        assert np.max(np.abs(a - b)) < 1e-3 * np.max(np.abs(a))


@pytest.mark.parametrize("kw", [dict(duration=0.0), dict(speed=-1.0), dict(plantStep=3e-4),
                                dict(plantModel="singleMass")])
def test_invalid_scenarios(kw):
    with pytest.raises(ValueError):
        scenario(**kw)
