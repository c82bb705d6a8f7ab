"""Receding-horizon NMPC policies for one levitation unit."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .model import (SINGLE_MASS, TWO_MASS, Equilibrium, LevitationModel, MagnetParams,
                    MechanicalParams)
from .ocp import (CONVERGE, OcpProblem, OutputMap, ShootingTrajectory, SolveStats, SolverOptions,
                  solve_sqp, zero_trajectory)
from .kernels import CompiledOutputs, CompiledShootingDynamics
from .odeint import ShootingDynamics

# weights of the comfort-oriented two-mass scenario: gap, body offset, a1, a2, current
BASE_WEIGHTS = (1e2, 1.0, 1.0, 1.0, 1e5)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    name: str
    model: str
    horizon: float
    nIntervals: int
    qWeights: tuple
    rWeight: float = 1.0
    samplingTime: float = 1e-3
    mode: str = CONVERGE
    substeps: int = 1
    outputScale: Optional[tuple] = None  # unit factors applied to outputs before weighting
    kktTol: float = 1e-6
    defectTol: float = 1e-8
    maxIter: int = 30

    def __post_init__(self):
        if self.model not in (TWO_MASS, SINGLE_MASS):
            raise ConfigError(f"controller {self.name}: unknown model '{self.model}'")
        ny = 5 if self.model == TWO_MASS else 3
        if len(self.qWeights) != ny:
            raise ConfigError(f"controller {self.name}: {self.model} needs {ny} output weights, "
                              f"got {len(self.qWeights)}")
        if self.outputScale is not None and len(self.outputScale) != ny:
            raise ConfigError(f"controller {self.name}: output scale needs {ny} entries")
        if any(q < 0 for q in self.qWeights) or not any(q > 0 for q in self.qWeights):
            raise ConfigError(f"controller {self.name}: weights must be non-negative, one positive")
        if not self.rWeight > 0:
            raise ConfigError(f"controller {self.name}: input weight must be positive")
        if not self.horizon > 0 or self.nIntervals < 1 or not self.samplingTime > 0:
            raise ConfigError(f"controller {self.name}: horizon, intervals and sampling time must be positive")

    @property
    def stepLen(self) -> float:
        return self.horizon / self.nIntervals


def preset_configs(weights=BASE_WEIGHTS, single_mass_weights=None, output_scale=None, **common) -> dict:
    """The single-mass and two-mass short/long horizon controllers.

    ``output_scale`` lists five unit factors (gap, body offset, a1, a2,
    current); the single-mass controller uses the gap, a1 and current entries.
    """
    single = tuple(single_mass_weights) if single_mass_weights is not None else (
        weights[0], weights[2], weights[4])
    scale2 = None if output_scale is None else tuple(output_scale)
    scale1 = None if output_scale is None else (output_scale[0], output_scale[2], output_scale[4])
    return {
        "C1M": ControllerConfig("C1M", SINGLE_MASS, 0.05, 50, single, outputScale=scale1, **common),
        "C2M": ControllerConfig("C2M", TWO_MASS, 0.05, 50, tuple(weights), outputScale=scale2, **common),
        "C2ML": ControllerConfig("C2ML", TWO_MASS, 0.5, 500, tuple(weights), outputScale=scale2, **common),
    }


@dataclass
class ControllerInstance:
    config: ControllerConfig
    problem: OcpProblem
    warmStart: ShootingTrajectory
    model: object
    eq: Equilibrium
    lastStats: SolveStats = field(default_factory=SolveStats)
    active: Optional[np.ndarray] = None


def build_controller(cfg: ControllerConfig, eq: Equilibrium, mech: MechanicalParams,
                     magnet: MagnetParams, model=None) -> ControllerInstance:
    """Assemble the OCP for ``cfg``; ``model`` overrides the prediction model."""
    if model is None:
        model = LevitationModel(cfg.model, mech, magnet, eq)
    if model.kind != cfg.model:
        raise ConfigError(f"controller {cfg.name}: prediction model is {model.kind}, config says {cfg.model}")
    scale = None if cfg.outputScale is None else np.asarray(cfg.outputScale, float)
    if isinstance(model, LevitationModel) and model.has_analytic_jacobians:
        outputs = CompiledOutputs(model)
        dynamics = CompiledShootingDynamics(model, cfg.stepLen, cfg.substeps)
        output_map = OutputMap(outputs.value, outputs.jacobian, scale)
    else:
        jac = model.jacobian_h if getattr(model, "has_analytic_jacobians", True) else None
        dynamics = ShootingDynamics(model.f, cfg.stepLen, cfg.substeps)
        output_map = OutputMap(model.h, jac, scale)
    if cfg.model == TWO_MASS:
        y_ref = np.array([eq.sNom, 0.0, 0.0, 0.0, eq.iNom])
    else:
        y_ref = np.array([eq.sNom, 0.0, eq.iNom])
    if scale is not None:
        y_ref = y_ref * scale
    problem = OcpProblem(
        n=model.n, m=1, nIntervals=cfg.nIntervals, stepLen=cfg.stepLen,
        qWeights=np.asarray(cfg.qWeights, float), rWeight=np.array([cfg.rWeight]),
        yRef=y_ref, uRef=np.zeros(1), uLower=np.array([-magnet.uMax]), uUpper=np.array([magnet.uMax]),
        dynamics=dynamics, outputMap=output_map,
        options=SolverOptions(kktTol=cfg.kktTol, defectTol=cfg.defectTol, maxIter=cfg.maxIter, mode=cfg.mode))
    return ControllerInstance(config=cfg, problem=problem, warmStart=zero_trajectory(problem),
                              model=model, eq=eq)


def shift_warm_start(traj: ShootingTrajectory) -> ShootingTrajectory:
    """Drop the first interval and duplicate the last node and input."""
    states = np.concatenate([traj.states[1:], traj.states[-1:]])
    inputs = np.concatenate([traj.inputs[1:], traj.inputs[-1:]])
    return ShootingTrajectory(states, inputs)


def control_step(ctrl: ControllerInstance, x) -> tuple[float, SolveStats]:
    """Solve the OCP from measured state ``x`` and return the first input."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ctrl.problem.n,):
        raise ValueError(f"measurement has shape {x.shape}, expected ({ctrl.problem.n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite measurement")
    if not ctrl.eq.sNom + x[0] > 0:
        raise ValueError("measured air gap is not positive")
    problem = ctrl.problem.with_initial_state(x)
    traj, stats, _, active = solve_sqp(problem, ctrl.warmStart, ctrl.active)
    u = float(np.clip(traj.inputs[0, 0], problem.uLower[0], problem.uUpper[0]))
    ctrl.warmStart = shift_warm_start(traj)
    ctrl.active = np.concatenate([active[1:], active[-1:]])
    ctrl.lastStats = stats
    return u, stats


def reset(ctrl: ControllerInstance) -> None:
    ctrl.warmStart = zero_trajectory(ctrl.problem)
    ctrl.active = None
    ctrl.lastStats = SolveStats()


def with_weights(cfg: ControllerConfig, weights) -> ControllerConfig:
    return replace(cfg, qWeights=tuple(weights))
