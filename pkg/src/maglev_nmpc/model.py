"""Physical model of one electromagnetic levitation unit.

Sign convention (used everywhere in the package): the vertical axis points
from the guideway toward the vehicle, i.e. positive z is downward. Gravity
therefore enters with a positive sign, the magnet force pulls the magnet
toward the guideway (negative direction), and the air gap is
``s = z1 - d_gw``. Accelerations ``a1``, ``a2`` are second derivatives of
``z1``, ``z2`` in this frame.

Controller-frame state (two-mass): ``[ds, dz2, v1, v2, di]`` where ``ds`` is
the gap deviation from ``s_nom``, ``dz2`` the car-body deviation from its
static position relative to the guideway, ``v1``, ``v2`` absolute vertical
velocities and ``di`` the current deviation. Single-mass controllers use
``[ds, v1, di]``. The input ``u`` is the voltage deviation from ``u_nom``.

All array functions accept a trailing state axis and broadcast over any
leading batch axes, so a whole horizon can be evaluated in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class ModelDomainError(ValueError):
    """Raised when the model is evaluated outside its physical domain."""


class InfeasibleParametersError(ValueError):
    """Raised when no equilibrium exists for the given parameters."""


TWO_MASS = "twoMass"
SINGLE_MASS = "singleMass"


@dataclass(frozen=True)
class MechanicalParams:
    m1: float = 500.0  # magnet + chassis share [kg]
    m2: float = 3000.0  # car body share [kg]
    ck: float = 3000.0 * (2 * math.pi) ** 2  # suspension stiffness [N/m]
    cd: float = 2 * 0.2 * math.sqrt(3000.0 * 3000.0 * (2 * math.pi) ** 2)  # [N s/m]
    g: float = 9.81
    fL: float = 3000.0 * 9.81  # static load on the single-mass variant [N]

    def __post_init__(self):
        if not self.m1 > 0 or not self.m2 > 0:
            raise ValueError("masses must be positive")
        if not self.ck > 0:
            raise ValueError("ck must be positive")
        if not self.cd >= 0:
            raise ValueError("cd must be non-negative")
        if not self.g > 0:
            raise ValueError("g must be positive")
        if not self.fL >= 0:
            raise ValueError("fL must be non-negative")

    @classmethod
    def from_modal(cls, m1: float, m2: float, f0: float, damping_ratio: float,
                   g: float = 9.81, fL: Optional[float] = None) -> "MechanicalParams":
        """Suspension constants from the body-mode frequency [Hz] and damping ratio."""
        ck = m2 * (2 * math.pi * f0) ** 2
        cd = 2 * damping_ratio * math.sqrt(ck * m2)
        return cls(m1=m1, m2=m2, ck=ck, cd=cd, g=g, fL=m2 * g if fL is None else fL)

    @property
    def body_frequency(self) -> float:
        return math.sqrt(self.ck / self.m2) / (2 * math.pi)


@dataclass(frozen=True)
class MagnetTable:
    """Gridded magnet characteristics on an (s, I) grid.

    ``alpha = alpha0 + s_dot * alpha_sdot`` and ``I_dot = alpha + beta * U``.
    """
    s_grid: np.ndarray
    i_grid: np.ndarray
    force: np.ndarray
    alpha0: np.ndarray
    alpha_sdot: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        shape = (len(self.s_grid), len(self.i_grid))
        for name in ("force", "alpha0", "alpha_sdot", "beta"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"table '{name}' has shape {getattr(self, name).shape}, expected {shape}")
        if len(self.s_grid) < 2 or len(self.i_grid) < 2:
            raise ValueError("table grids need at least two points")
        if np.any(np.diff(self.s_grid) <= 0) or np.any(np.diff(self.i_grid) <= 0):
            raise ValueError("table grids must be strictly increasing")
        if self.s_grid[0] <= 0:
            raise ValueError("table air-gap grid must be positive")

    def interpolate(self, name: str, s, i):
        return bilinear(self.s_grid, self.i_grid, getattr(self, name), s, i)


def bilinear(xg: np.ndarray, yg: np.ndarray, values: np.ndarray, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < xg[0]) or np.any(x > xg[-1]) or np.any(y < yg[0]) or np.any(y > yg[-1]):
        raise ModelDomainError(
            f"table lookup outside grid: s in [{xg[0]}, {xg[-1]}], I in [{yg[0]}, {yg[-1]}]")
    ix = np.clip(np.searchsorted(xg, x, side="right") - 1, 0, len(xg) - 2)
    iy = np.clip(np.searchsorted(yg, y, side="right") - 1, 0, len(yg) - 2)
    tx = (x - xg[ix]) / (xg[ix + 1] - xg[ix])
    ty = (y - yg[iy]) / (yg[iy + 1] - yg[iy])
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    out = (1 - tx) * ((1 - ty) * v00 + ty * v01) + tx * ((1 - ty) * v10 + ty * v11)
    return out if out.ndim else float(out)


def load_magnet_table(path) -> MagnetTable:
    """Read a whitespace-separated grid file.

    Layout: ``s_count i_count``, the s grid, the I grid, then five
    row-major ``s_count x i_count`` blocks: force, alpha at zero gap rate,
    gap-rate coefficient of alpha, beta. Lines starting with ``#`` are ignored.
    """
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing header")
    ns, ni = int(tokens[0]), int(tokens[1])
    vals = np.array(tokens[2:], dtype=float)
    expected = ns + ni + 4 * ns * ni
    if vals.size != expected:
        raise ValueError(f"{path}: expected {expected} values after header, found {vals.size}")
    s_grid, i_grid = vals[:ns], vals[ns:ns + ni]
    blocks = vals[ns + ni:].reshape(4, ns, ni)
    return MagnetTable(s_grid, i_grid, blocks[0], blocks[1], blocks[2], blocks[3])


def save_magnet_table(table: MagnetTable, path) -> None:
    lines = ["# magnet table: s_count i_count / s grid / I grid / force / alpha0 / alpha_sdot / beta",
             f"{len(table.s_grid)} {len(table.i_grid)}",
             " ".join(repr(float(v)) for v in table.s_grid),
             " ".join(repr(float(v)) for v in table.i_grid)]
    for block in (table.force, table.alpha0, table.alpha_sdot, table.beta):
        for row in block:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class MagnetParams:
    km: float = (3500.0 * 9.81) * 0.01 ** 2 / 25.0 ** 2  # force constant [N m^2/A^2]
    rc: float = 1.0  # coil resistance [Ohm]
    sNom: float = 0.010  # nominal air gap [m]
    uMax: float = 300.0  # voltage deviation bound [V]
    backend: str = "analytic"
    table: Optional[MagnetTable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.km > 0:
            raise ValueError("km must be positive")
        if not self.rc > 0:
            raise ValueError("rc must be positive")
        if not self.sNom > 0:
            raise ValueError("sNom must be positive")
        if not self.uMax > 0:
            raise ValueError("uMax must be positive")
        if self.backend not in ("analytic", "table"):
            raise ValueError(f"unknown magnet backend '{self.backend}'")
        if self.backend == "table" and self.table is None:
            raise ValueError("table backend requires a loaded table")


def tabulate_analytic(p: MagnetParams, s_grid, i_grid) -> MagnetTable:
    """Sample the analytic magnet model on a grid (used for cross-checks)."""
    S, I = np.meshgrid(np.asarray(s_grid, float), np.asarray(i_grid, float), indexing="ij")
    return MagnetTable(np.asarray(s_grid, float), np.asarray(i_grid, float),
                       p.km * (I / S) ** 2, -p.rc * S * I / (2 * p.km), I / S, S / (2 * p.km))


def _check_gap(s):
    if np.any(s <= 0):
        raise ModelDomainError("air gap must be positive")


def magnet_force(s, i, p: MagnetParams):
    """Attractive magnet force [N] for air gap ``s`` [m] and current ``i`` [A]."""
    _check_gap(s)
    if p.backend == "table":
        return p.table.interpolate("force", s, i)
    return p.km * (i / s) ** 2


def current_derivative(s, s_dot, i, u, p: MagnetParams):
    """Coil current rate [A/s] for applied voltage ``u`` [V]."""
    _check_gap(s)
    if p.backend == "table":
        alpha = p.table.interpolate("alpha0", s, i) + s_dot * p.table.interpolate("alpha_sdot", s, i)
        return alpha + p.table.interpolate("beta", s, i) * u
    return s / (2 * p.km) * (u - p.rc * i) + i * s_dot / s


def input_gain(s, i, p: MagnetParams):
    """Sensitivity of the current rate to voltage, s/(2 km) for the analytic model."""
    _check_gap(s)
    if p.backend == "table":
        return p.table.interpolate("beta", s, i)
    return s / (2 * p.km)


@dataclass(frozen=True)
class PlantState:
    z1: float
    z2: float
    v1: float
    v2: float
    current: float

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.v1, self.v2, self.current])

    @classmethod
    def from_array(cls, a) -> "PlantState":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class ControllerState:
    ds: float
    dz2: float
    v1: float
    v2: float
    di: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ds, self.dz2, self.v1, self.v2, self.di])


def two_mass_accelerations(st: PlantState, f_mag, p: MechanicalParams):
    """Vertical accelerations (a1, a2) of magnet and car body, positive down."""
    coupling = p.ck * (st.z1 - st.z2) + p.cd * (st.v1 - st.v2)
    return p.g - (coupling + f_mag) / p.m1, p.g + coupling / p.m2


def single_mass_acceleration(st: PlantState, f_mag, p: MechanicalParams):
    return p.g + p.fL / p.m1 - f_mag / p.m1


@dataclass(frozen=True)
class Equilibrium:
    iNom: float
    uNom: float
    dz2Nom: float  # static value of z1 - z2 (spring compression), -m2 g / ck
    sNom: float


def _bisect_current(p: MagnetParams, target: float, i_upper: float) -> float:
    def resid(i):
        return float(magnet_force(p.sNom, i, p)) - target

    lo, hi = 0.0, i_upper
    r_lo, r_hi = resid(lo), resid(hi)
    if r_lo > 0 or r_hi < 0:
        raise InfeasibleParametersError(
            f"no current in [0, {i_upper}] A balances {target:.6g} N at s = {p.sNom} m")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if resid(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    i = 0.5 * (lo + hi)
    # Newton polish with a numerical slope (works for either backend)
    for _ in range(5):
        h = 1e-6 * max(1.0, abs(i))
        slope = (resid(i + h) - resid(i - h)) / (2 * h)
        if slope <= 0:
            break
        step = resid(i) / slope
        i -= step
        if abs(step) <= 4e-16 * abs(i):
            break
    return i


def solve_equilibrium(mech: MechanicalParams, magnet: MagnetParams, model: str = TWO_MASS,
                      i_upper: Optional[float] = None) -> Equilibrium:
    """Nominal current, voltage and spring offset for levitation at ``sNom``."""
    if model == TWO_MASS:
        target = (mech.m1 + mech.m2) * mech.g
    elif model == SINGLE_MASS:
        target = mech.m1 * mech.g + mech.fL
    else:
        raise ValueError(f"unknown model '{model}'")
    if i_upper is None:
        if magnet.backend == "table":
            i_upper = float(magnet.table.i_grid[-1])
        else:
            i_upper = 10.0 * magnet.sNom * math.sqrt(target / magnet.km) + 1.0
    if magnet.backend == "table" and magnet.table.i_grid[0] > 0:
        raise InfeasibleParametersError("table current grid must start at zero")
    i_nom = _bisect_current(magnet, target, i_upper)
    # voltage that zeroes the current rate at rest
    u_nom = -float(current_derivative(magnet.sNom, 0.0, i_nom, 0.0, magnet)) / float(
        input_gain(magnet.sNom, i_nom, magnet))
    return Equilibrium(iNom=i_nom, uNom=u_nom, dz2Nom=-mech.m2 * mech.g / mech.ck, sNom=magnet.sNom)


@dataclass(frozen=True)
class LevitationModel:
    """Controller-frame dynamics ``x_dot = f(x, u)`` and outputs ``y = h(x)``.

    The guideway is assumed frozen over the prediction, so the gap rate equals
    the magnet velocity and the guideway deflection drops out entirely.
    """
    kind: str
    mech: MechanicalParams
    magnet: MagnetParams
    eq: Equilibrium

    def __post_init__(self):
        if self.kind not in (TWO_MASS, SINGLE_MASS):
            raise ValueError(f"unknown model '{self.kind}'")

    @property
    def n(self) -> int:
        return 5 if self.kind == TWO_MASS else 3

    @property
    def ny(self) -> int:
        return 5 if self.kind == TWO_MASS else 3

    def _unpack(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == TWO_MASS:
            ds, dz2, v1, v2, di = (x[..., k] for k in range(5))
        else:
            ds, v1, di = (x[..., k] for k in range(3))
            dz2 = v2 = None
        return ds, dz2, v1, v2, di

    def _accelerations(self, ds, dz2, v1, v2, f_mag):
        p = self.mech
        if self.kind == SINGLE_MASS:
            return p.g + p.fL / p.m1 - f_mag / p.m1, None
        coupling = p.ck * (ds - dz2 + self.eq.dz2Nom) + p.cd * (v1 - v2)
        return p.g - (coupling + f_mag) / p.m1, p.g + coupling / p.m2

    def f(self, x, u):
        ds, dz2, v1, v2, di = self._unpack(x)
        u = np.asarray(u, dtype=float)[..., 0]
        s = self.eq.sNom + ds
        cur = self.eq.iNom + di
        f_mag = magnet_force(s, cur, self.magnet)
        a1, a2 = self._accelerations(ds, dz2, v1, v2, f_mag)
        i_dot = current_derivative(s, v1, cur, self.eq.uNom + u, self.magnet)
        if self.kind == TWO_MASS:
            return np.stack(np.broadcast_arrays(v1, v2, a1, a2, i_dot), axis=-1)
        return np.stack(np.broadcast_arrays(v1, a1, i_dot), axis=-1)

    def h(self, x):
        ds, dz2, v1, v2, di = self._unpack(x)
        s = self.eq.sNom + ds
        cur = self.eq.iNom + di
        a1, a2 = self._accelerations(ds, dz2, v1, v2, magnet_force(s, cur, self.magnet))
        if self.kind == TWO_MASS:
            return np.stack(np.broadcast_arrays(s, dz2, a1, a2, cur), axis=-1)
        return np.stack(np.broadcast_arrays(s, a1, cur), axis=-1)

    @property
    def has_analytic_jacobians(self) -> bool:
        return self.magnet.backend == "analytic"

    def _force_partials(self, s, cur):
        f_mag = self.magnet.km * (cur / s) ** 2
        return -2 * f_mag / s, 2 * self.magnet.km * cur / s ** 2

    def jacobian_f(self, x, u):
        """Analytic (df/dx, df/du) for the analytic magnet backend."""
        if not self.has_analytic_jacobians:
            raise NotImplementedError("analytic Jacobians need the analytic magnet backend")
        ds, dz2, v1, v2, di = self._unpack(x)
        u = np.asarray(u, dtype=float)[..., 0]
        p, km, rc = self.mech, self.magnet.km, self.magnet.rc
        s = self.eq.sNom + ds
        _check_gap(s)
        cur = self.eq.iNom + di
        volt = self.eq.uNom + u
        dF_ds, dF_di = self._force_partials(s, cur)
        shape = np.shape(ds)
        n = self.n
        A = np.zeros(shape + (n, n))
        B = np.zeros(shape + (n, 1))
        dIdot_ds = (volt - rc * cur) / (2 * km) - cur * v1 / s ** 2
        dIdot_dv1 = cur / s
        dIdot_di = -rc * s / (2 * km) + v1 / s
        if self.kind == TWO_MASS:
            A[..., 0, 2] = 1.0
            A[..., 1, 3] = 1.0
            A[..., 2, 0] = -(p.ck + dF_ds) / p.m1
            A[..., 2, 1] = p.ck / p.m1
            A[..., 2, 2] = -p.cd / p.m1
            A[..., 2, 3] = p.cd / p.m1
            A[..., 2, 4] = -dF_di / p.m1
            A[..., 3, 0] = p.ck / p.m2
            A[..., 3, 1] = -p.ck / p.m2
            A[..., 3, 2] = p.cd / p.m2
            A[..., 3, 3] = -p.cd / p.m2
            A[..., 4, 0] = dIdot_ds
            A[..., 4, 2] = dIdot_dv1
            A[..., 4, 4] = dIdot_di
            B[..., 4, 0] = s / (2 * km)
        else:
            A[..., 0, 1] = 1.0
            A[..., 1, 0] = -dF_ds / p.m1
            A[..., 1, 2] = -dF_di / p.m1
            A[..., 2, 0] = dIdot_ds
            A[..., 2, 1] = dIdot_dv1
            A[..., 2, 2] = dIdot_di
            B[..., 2, 0] = s / (2 * km)
        return A, B

    def jacobian_h(self, x):
        """Analytic output Jacobian dh/dx for the analytic magnet backend."""
        if not self.has_analytic_jacobians:
            raise NotImplementedError("analytic Jacobians need the analytic magnet backend")
        A, _ = self.jacobian_f(x, np.zeros(np.shape(x)[:-1] + (1,)))
        C = np.zeros(A.shape)
        if self.kind == TWO_MASS:
            C[..., 0, 0] = 1.0
            C[..., 1, 1] = 1.0
            C[..., 2, :] = A[..., 2, :]
            C[..., 3, :] = A[..., 3, :]
            C[..., 4, 4] = 1.0
        else:
            C[..., 0, 0] = 1.0
            C[..., 1, :] = A[..., 1, :]
            C[..., 2, 2] = 1.0
        return C


def state_derivative(x, u, eq: Equilibrium, mech: MechanicalParams, magnet: MagnetParams,
                     model: str = TWO_MASS):
    """Controller-frame dynamics; ``x`` may be a ControllerState or an array."""
    if isinstance(x, ControllerState):
        x = x.as_array()
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == x.ndim - 1:
        u = u[..., None]
    return LevitationModel(model, mech, magnet, eq).f(x, u)


def output_map(x, eq: Equilibrium, mech: MechanicalParams, magnet: MagnetParams,
               model: str = TWO_MASS):
    if isinstance(x, ControllerState):
        x = x.as_array()
    return LevitationModel(model, mech, magnet, eq).h(x)


def plant_derivative(state, voltage: float, dgw: float, dgw_rate: float,
                     mech: MechanicalParams, magnet: MagnetParams) -> np.ndarray:
    """Absolute-coordinate two-mass plant with a moving guideway."""
    z1, z2, v1, v2, cur = state
    s = z1 - dgw
    f_mag = magnet_force(s, cur, magnet)
    coupling = mech.ck * (z1 - z2) + mech.cd * (v1 - v2)
    a1 = mech.g - (coupling + f_mag) / mech.m1
    a2 = mech.g + coupling / mech.m2
    i_dot = current_derivative(s, v1 - dgw_rate, cur, voltage, magnet)
    return np.array([v1, v2, a1, a2, i_dot], dtype=float)


def equilibrium_plant_state(eq: Equilibrium, dgw: float = 0.0) -> PlantState:
    z1 = eq.sNom + dgw
    return PlantState(z1=z1, z2=z1 - eq.dz2Nom, v1=0.0, v2=0.0, current=eq.iNom)


def measure_state(plant, dgw: float, eq: Equilibrium, model: str = TWO_MASS) -> np.ndarray:
    """Controller-frame deviation state from absolute plant truth."""
    z1, z2, v1, v2, cur = plant
    ds = z1 - dgw - eq.sNom
    if model == SINGLE_MASS:
        return np.array([ds, v1, cur - eq.iNom])
    dz2 = (z2 - dgw) - (eq.sNom - eq.dz2Nom)
    return np.array([ds, dz2, v1, v2, cur - eq.iNom])


class LinearizedModel:
    """First-order expansion of a :class:`LevitationModel` about x = 0, u = 0."""

    def __init__(self, model: LevitationModel):
        self.kind = model.kind
        self.eq = model.eq
        self.n, self.ny = model.n, model.ny
        zero_x, zero_u = np.zeros(model.n), np.zeros(1)
        self.A, self.B = model.jacobian_f(zero_x, zero_u)
        self.C = model.jacobian_h(zero_x)
        self.f0 = model.f(zero_x, zero_u)
        self.y0 = model.h(zero_x)

    def f(self, x, u):
        return np.asarray(x) @ self.A.T + np.asarray(u) @ self.B.T + self.f0

    def h(self, x):
        return np.asarray(x) @ self.C.T + self.y0

    def jacobian_h(self, x):
        return np.broadcast_to(self.C, np.shape(x)[:-1] + self.C.shape)
