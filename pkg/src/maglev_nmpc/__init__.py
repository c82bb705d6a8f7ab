"""Two-mass NMPC levitation control for electromagnetic suspension vehicles."""
from .config import RunConfig, defaults_text, load_config, parse_config
from .controllers import ControllerConfig, build_controller, control_step, preset_configs
from .guideway import GuidewayProfile, build_profile, deflection_at
from .model import (SINGLE_MASS, TWO_MASS, Equilibrium, LevitationModel, MagnetParams, MechanicalParams,
                    solve_equilibrium, state_derivative)
from .ocp import OcpProblem, SolverOptions, solve_sqp
from .simulation import RideLog, Scenario, run_closed_loop, run_comparison

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "defaults_text", "load_config", "parse_config",
    "ControllerConfig", "build_controller", "control_step", "preset_configs",
    "GuidewayProfile", "build_profile", "deflection_at",
    "SINGLE_MASS", "TWO_MASS", "Equilibrium", "LevitationModel", "MagnetParams", "MechanicalParams",
    "solve_equilibrium", "state_derivative",
    "OcpProblem", "SolverOptions", "solve_sqp",
    "RideLog", "Scenario", "run_closed_loop", "run_comparison",
]
