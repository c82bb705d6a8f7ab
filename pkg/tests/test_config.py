import pytest

from maglev_nmpc.config import CONTROLLER_NAMES, defaults_text, load_config, parse_config
from maglev_nmpc.controllers import ConfigError
from maglev_nmpc.model import SINGLE_MASS


def test_defaults_round_trip():
    assert parse_config(defaults_text()) == load_config()


def test_defaults_values():
    cfg = load_config()
    assert cfg.magnet.uMax == 300.0 and cfg.magnet.sNom == 0.01
    assert cfg.speed == pytest.approx(600 / 3.6)
    assert cfg.duration == 30.0 and cfg.plantStep == 1e-4
    assert cfg.selected == CONTROLLER_NAMES == ("C1M", "C2M", "C2ML")
    assert cfg.controllers["C1M"].model == SINGLE_MASS
    assert cfg.analysis.band == (0.5, 5.0)


def test_overrides_apply():
    cfg = parse_config("""
[magnet]
u_max = 40
[scenario]
duration = 0.5
[controller.C2M]
weights = 1e3, 1e4, 1, 1, 1e2
mode = realTimeIteration
[guideway]
stochastic = off
irregularity.rms = 1e-3
""")
    assert cfg.magnet.uMax == 40.0 and cfg.duration == 0.5
    assert cfg.controllers["C2M"].qWeights == (1e3, 1e4, 1.0, 1.0, 1e2)
    assert cfg.controllers["C2M"].mode == "realTimeIteration"
    assert cfg.controllers["C1M"].qWeights == (1e2, 1.0, 1e5)
    assert not cfg.stochastic and cfg.irregularity.rms == 1e-3


def test_guideway_covers_the_ride():
    cfg = parse_config("[scenario]\nduration = 2\n")
    gw = cfg.guideway()
    assert gw.covered_length >= cfg.speed * 2
    sc = cfg.scenario("C1M", gw)
    assert sc.guideway is gw and sc.samples == 2000


@pytest.mark.parametrize("text, match", [
    ("[plant]\nmass = 3\n", "mass"),
    ("[plants]\nm1 = 3\n", "plants"),
    ("[controller.C9]\nhorizon = 1\n", "C1M"),
    ("[controller.C1M]\nweights = 1, 1, 1, 1, 1\n", "3 output weights"),
    ("[magnet]\nkm = 0\n", "km"),
    ("[scenario]\nplant_step = 3e-4\n", "divide"),
    ("[controller.C2M]\nhorizon = 0.05\nintervals = 10\n", "sampling"),
    ("[guideway]\nstochastic = maybe\n", "boolean"),
    ("not an ini file", "section header"),
])
def test_bad_configs_rejected(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_unknown_controller_override():
    with pytest.raises(ConfigError, match="valid names"):
        load_config().with_overrides(controllers=["C3M"])
    assert load_config().with_overrides(seed=9, controllers=["C2M"]).selected == ("C2M",)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "nope.ini")
