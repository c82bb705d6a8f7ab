"""Multiple-shooting optimal control: Gauss-Newton SQP with a Riccati QP.

The horizon has ``N`` intervals of length ``stepLen``. Node states
``x_0..x_N`` and interval inputs ``u_0..u_{N-1}`` are decision variables tied
together by continuity constraints ``x_{k+1} = F(x_k, u_k)``. The cost is

    stepLen * sum_k (h(x_k) - yRef)' Q (h(x_k) - yRef) + (u_k - uRef)' R (u_k - uRef)

with no terminal term. Inputs are box constrained.

Multiplier conventions: ``lam[k]`` belongs to the constraint defining ``x_k``
(``lam[0]`` to the initial condition) and the Lagrangian gradient with
respect to ``u_k`` is ``gu_k + B_k' lam[k+1] + nu_k`` where ``nu_k`` is
positive on an active upper bound and negative on an active lower bound.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numba import njit

from .model import ModelDomainError
from .odeint import IntegrationError, fd_steps

CONVERGE = "converge"
REAL_TIME = "realTimeIteration"


class QpError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    kktTol: float = 1e-6
    defectTol: float = 1e-8
    maxIter: int = 30
    mode: str = CONVERGE
    regularization: float = 1e-8
    armijo: float = 1e-4
    maxBacktracks: int = 30
    trace: bool = False

    def __post_init__(self):
        if self.mode not in (CONVERGE, REAL_TIME):
            raise ValueError(f"unknown iteration mode '{self.mode}'")
        if self.maxIter < 1:
            raise ValueError("maxIter must be >= 1")


class OutputMap:
    """Output function ``y = h(x)`` with an optional analytic Jacobian."""

    def __init__(self, h, jacobian=None, scale=None):
        self.h = h
        self._jac = jacobian
        self.scale = None if scale is None else np.asarray(scale, dtype=float)

    def value(self, xs):
        y = self.h(xs)
        return y if self.scale is None else y * self.scale

    def jacobian(self, xs):
        xs = np.asarray(xs, dtype=float)
        if self._jac is not None:
            J = self._jac(xs)
        else:
            n = xs.shape[-1]
            dx = fd_steps(xs)
            X = np.repeat(xs[..., None, :], n + 1, axis=-2)
            idx = np.arange(n)
            X[..., 1 + idx, idx] += dx
            Y = self.h(X)
            J = np.swapaxes((Y[..., 1:, :] - Y[..., :1, :]) / dx[..., :, None], -1, -2)
        return J if self.scale is None else J * self.scale[:, None]


@dataclass(frozen=True)
class OcpProblem:
    n: int
    m: int
    nIntervals: int
    stepLen: float
    qWeights: np.ndarray
    rWeight: np.ndarray
    yRef: np.ndarray
    uRef: np.ndarray
    uLower: np.ndarray
    uUpper: np.ndarray
    dynamics: object  # provides propagate(xs, us) and linearize(xs, us)
    outputMap: OutputMap
    x0: Optional[np.ndarray] = None
    options: SolverOptions = SolverOptions()

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.qWeights, float))
        r = np.atleast_1d(np.asarray(self.rWeight, float))
        object.__setattr__(self, "qWeights", q)
        object.__setattr__(self, "rWeight", r)
        for name in ("yRef", "uRef", "uLower", "uUpper"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        if self.nIntervals < 1:
            raise ValueError("nIntervals must be >= 1")
        if not self.stepLen > 0:
            raise ValueError("stepLen must be positive")
        if np.any(q < 0) or not np.any(q > 0):
            raise ValueError("output weights must be non-negative with at least one positive")
        if r.shape != (self.m,) or np.any(r <= 0):
            raise ValueError("input weight must be positive with one entry per input")
        if q.shape != self.yRef.shape:
            raise ValueError("qWeights and yRef lengths differ")
        if self.uLower.shape != (self.m,) or self.uUpper.shape != (self.m,) or self.uRef.shape != (self.m,):
            raise ValueError("input bound/reference dimension mismatch")
        if np.any(self.uLower > self.uUpper):
            raise ValueError("uLower must not exceed uUpper")

    def with_initial_state(self, x0) -> "OcpProblem":
        return replace(self, x0=np.asarray(x0, dtype=float))


@dataclass
class ShootingTrajectory:
    states: np.ndarray  # (N+1, n)
    inputs: np.ndarray  # (N, m)

    def copy(self) -> "ShootingTrajectory":
        return ShootingTrajectory(self.states.copy(), self.inputs.copy())

    def check(self, problem: OcpProblem):
        N = problem.nIntervals
        if self.states.shape != (N + 1, problem.n) or self.inputs.shape != (N, problem.m):
            raise ValueError(
                f"trajectory shapes {self.states.shape}/{self.inputs.shape} do not match "
                f"N={N}, n={problem.n}, m={problem.m}")


@dataclass
class Multipliers:
    lam: np.ndarray  # (N+1, n)
    nu: np.ndarray  # (N, m)


@dataclass
class SolveStats:
    sqpIterations: int = 0
    kktResidual: float = float("inf")
    maxDefect: float = float("inf")
    solveTime: float = 0.0
    converged: bool = False
    qpIterations: int = 0
    regularized: bool = False
    activeBounds: int = 0
    trace: list = field(default_factory=list)


@dataclass
class StageData:
    """Per-interval quadratic model of the NLP around a trajectory."""
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray  # cross Hessian d2/du dx, (N, m, n)
    Hx: np.ndarray
    Hu: np.ndarray
    gx: np.ndarray
    gu: np.ndarray
    d: np.ndarray  # continuity defects F(x_k, u_k) - x_{k+1}
    J: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None


def zero_trajectory(problem: OcpProblem, x=None, u=None) -> ShootingTrajectory:
    N = problem.nIntervals
    x = np.zeros(problem.n) if x is None else np.asarray(x, float)
    u = problem.uRef if u is None else np.asarray(u, float)
    return ShootingTrajectory(np.tile(x, (N + 1, 1)), np.tile(u, (N, 1)))


def evaluate_cost(problem: OcpProblem, traj: ShootingTrajectory) -> float:
    N = problem.nIntervals
    r = problem.outputMap.value(traj.states[:N]) - problem.yRef
    e = traj.inputs - problem.uRef
    return float(problem.stepLen * (np.sum(problem.qWeights * r * r) + np.sum(problem.rWeight * e * e)))


def linearize(problem: OcpProblem, traj: ShootingTrajectory) -> StageData:
    N, n, m = problem.nIntervals, problem.n, problem.m
    xs = traj.states[:N]
    x_next, A, B = problem.dynamics.linearize(xs, traj.inputs)
    J = problem.outputMap.jacobian(xs)
    r = problem.outputMap.value(xs) - problem.yRef
    w = 2.0 * problem.stepLen
    qJ = problem.qWeights[None, :, None] * J
    Hx = w * np.einsum("kyi,kyj->kij", J, qJ)
    gx = w * np.einsum("kyi,ky->ki", qJ, r)
    Hu = np.broadcast_to(w * np.diag(problem.rWeight), (N, m, m)).copy()
    gu = w * problem.rWeight * (traj.inputs - problem.uRef)
    return StageData(A=A, B=B, S=np.zeros((N, m, n)), Hx=Hx, Hu=Hu, gx=gx, gu=gu,
                     d=x_next - traj.states[1:], J=J, residuals=r)


@njit(cache=True)
def _riccati_kernel(A, B, S, Hx, Hu, gx, gu, d, dx0, fixed, fixval, reg, dX, dU, lam, nu):
    N, n, m = B.shape
    P = np.zeros((N + 1, n, n))
    p = np.zeros((N + 1, n))
    K = np.zeros((N, m, n))
    kf = np.zeros((N, m))
    PA = np.zeros((n, n))
    PB = np.zeros((n, m))
    w = np.zeros(n)
    Qxx = np.zeros((n, n))
    Quu = np.zeros((m, m))
    Qux = np.zeros((m, n))
    qx = np.zeros(n)
    qu = np.zeros(m)
    L = np.zeros((m, m))
    free = np.zeros(m, dtype=np.int64)
    for k in range(N - 1, -1, -1):
        Pn = P[k + 1]
        Ak = A[k]
        Bk = B[k]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Pn[i, j] * d[k, j]
            w[i] = acc + p[k + 1, i]
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += Pn[i, l] * Ak[l, j]
                PA[i, j] = acc
            for j in range(m):
                acc = 0.0
                for l in range(n):
                    acc += Pn[i, l] * Bk[l, j]
                PB[i, j] = acc
        for i in range(n):
            acc = gx[k, i]
            for l in range(n):
                acc += Ak[l, i] * w[l]
            qx[i] = acc
            for j in range(n):
                acc = Hx[k, i, j]
                for l in range(n):
                    acc += Ak[l, i] * PA[l, j]
                Qxx[i, j] = acc
        for i in range(m):
            acc = gu[k, i]
            for l in range(n):
                acc += Bk[l, i] * w[l]
            qu[i] = acc
            for j in range(m):
                acc = Hu[k, i, j]
                for l in range(n):
                    acc += Bk[l, i] * PB[l, j]
                Quu[i, j] = acc
            Quu[i, i] += reg
            for j in range(n):
                acc = S[k, i, j]
                for l in range(n):
                    acc += Bk[l, i] * PA[l, j]
                Qux[i, j] = acc
        # eliminate inputs fixed at a bound
        nf = 0
        for i in range(m):
            if fixed[k, i]:
                kf[k, i] = fixval[k, i]
                for j in range(n):
                    K[k, i, j] = 0.0
            else:
                free[nf] = i
                nf += 1
        if nf > 0:
            # Cholesky of the free block
            for a in range(nf):
                for b in range(a + 1):
                    acc = Quu[free[a], free[b]]
                    for c in range(b):
                        acc -= L[a, c] * L[b, c]
                    if a == b:
                        if acc <= 0.0:
                            return k + 1
                        L[a, a] = np.sqrt(acc)
                    else:
                        L[a, b] = acc / L[b, b]
            # right-hand sides: -Qux_F and -(qu_F + Quu_FC c)
            rhs = np.zeros((nf, n + 1))
            for a in range(nf):
                i = free[a]
                for j in range(n):
                    rhs[a, j] = -Qux[i, j]
                acc = qu[i]
                for c in range(m):
                    if fixed[k, c]:
                        acc += Quu[i, c] * fixval[k, c]
                rhs[a, n] = -acc
            for col in range(n + 1):
                for a in range(nf):
                    acc = rhs[a, col]
                    for c in range(a):
                        acc -= L[a, c] * rhs[c, col]
                    rhs[a, col] = acc / L[a, a]
                for a in range(nf - 1, -1, -1):
                    acc = rhs[a, col]
                    for c in range(a + 1, nf):
                        acc -= L[c, a] * rhs[c, col]
                    rhs[a, col] = acc / L[a, a]
            for a in range(nf):
                i = free[a]
                for j in range(n):
                    K[k, i, j] = rhs[a, j]
                kf[k, i] = rhs[a, n]
        # value function update
        Kk = K[k]
        for i in range(n):
            for j in range(n):
                acc = Qxx[i, j]
                for a in range(m):
                    acc += Kk[a, i] * Qux[a, j] + Qux[a, i] * Kk[a, j]
                    for b in range(m):
                        acc += Kk[a, i] * Quu[a, b] * Kk[b, j]
                P[k, i, j] = acc
            acc = qx[i]
            for a in range(m):
                acc += Kk[a, i] * qu[a] + Qux[a, i] * kf[k, a]
                for b in range(m):
                    acc += Kk[a, i] * Quu[a, b] * kf[k, b]
            p[k, i] = acc
        for i in range(n):
            for j in range(i):
                avg = 0.5 * (P[k, i, j] + P[k, j, i])
                P[k, i, j] = avg
                P[k, j, i] = avg
    # forward rollout
    for i in range(n):
        dX[0, i] = dx0[i]
    for k in range(N):
        for a in range(m):
            acc = kf[k, a]
            for j in range(n):
                acc += K[k, a, j] * dX[k, j]
            dU[k, a] = acc
        for i in range(n):
            acc = d[k, i]
            for j in range(n):
                acc += A[k, i, j] * dX[k, j]
            for a in range(m):
                acc += B[k, i, a] * dU[k, a]
            dX[k + 1, i] = acc
    for k in range(N + 1):
        for i in range(n):
            acc = p[k, i]
            for j in range(n):
                acc += P[k, i, j] * dX[k, j]
            lam[k, i] = acc
    for k in range(N):
        for a in range(m):
            if fixed[k, a]:
                acc = gu[k, a]
                for b in range(m):
                    acc += Hu[k, a, b] * dU[k, b]
                for j in range(n):
                    acc += S[k, a, j] * dX[k, j]
                for i in range(n):
                    acc += B[k, i, a] * lam[k + 1, i]
                nu[k, a] = -acc
            else:
                nu[k, a] = 0.0
    return 0


@dataclass
class QpSolution:
    dX: np.ndarray
    dU: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    regularization: float = 0.0


def solve_qp_riccati(stage: StageData, dx0, lower, upper, active, reg: float = 1e-8,
                     max_reg: float = 1e6) -> QpSolution:
    """Equality-constrained LQ step with inputs in ``active`` pinned to a bound.

    ``lower``/``upper`` are bounds on the input step (N, m); ``active`` holds
    -1 (lower), +1 (upper) or 0 (free) per input component. If the recursion
    meets a non-positive-definite input block a Levenberg term starting at
    ``reg`` is added and raised tenfold until the sweep succeeds.
    """
    N, n, m = stage.B.shape
    active = np.asarray(active)
    fixed = (active != 0).astype(np.int8)
    fixval = np.where(active > 0, upper, np.where(active < 0, lower, 0.0)).astype(float)
    dX = np.empty((N + 1, n))
    dU = np.empty((N, m))
    lam = np.empty((N + 1, n))
    nu = np.empty((N, m))
    args = [np.ascontiguousarray(a, dtype=float) for a in
            (stage.A, stage.B, stage.S, stage.Hx, stage.Hu, stage.gx, stage.gu, stage.d)]
    dx0 = np.ascontiguousarray(dx0, dtype=float)
    level = 0.0
    while True:
        status = _riccati_kernel(*args, dx0, fixed, fixval, level, dX, dU, lam, nu)
        if status == 0:
            return QpSolution(dX, dU, lam, nu, level)
        level = reg if level == 0.0 else 10.0 * level
        if level > max_reg:
            raise QpError(f"input Hessian not positive definite at stage {status - 1}")


def solve_qp_box(stage: StageData, dx0, lower, upper, active=None, reg: float = 1e-8,
                 max_iter: Optional[int] = None):
    """Primal active-set loop over input boxes around :func:`solve_qp_riccati`.

    Starts from the feasible point with every working-set input on its bound
    and all others unchanged. Blocking bounds are added one at a time (lowest
    stage first on ties) and the most negative multiplier is dropped only after
    a full step, so the QP objective decreases monotonically.
    Returns ``(solution, active, iterations)``.
    """
    N, n, m = stage.B.shape
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    if np.any(lower > 0) or np.any(upper < 0):
        raise QpError("current inputs violate the bounds")
    active = np.zeros((N, m), dtype=np.int64) if active is None else np.array(active, dtype=np.int64)
    pinned = lower == upper
    active[pinned & (active == 0)] = 1
    point = np.where(active > 0, upper, np.where(active < 0, lower, 0.0))
    max_iter = 4 * N * m + 50 if max_iter is None else max_iter
    for it in range(1, max_iter + 1):
        sol = solve_qp_riccati(stage, dx0, lower, upper, active, reg)
        step = sol.dU - point
        free = active == 0
        ratio = np.full((N, m), np.inf)
        up = free & (step > 0)
        dn = free & (step < 0)
        with np.errstate(over="ignore"):  # a far bound overflows to inf, i.e. never blocks
            ratio[up] = (upper[up] - point[up]) / step[up]
            ratio[dn] = (lower[dn] - point[dn]) / step[dn]
        flat = int(np.argmin(ratio))
        alpha = ratio.flat[flat]
        if alpha < 1.0:
            point = point + max(alpha, 0.0) * step
            k, j = divmod(flat, m)
            active[k, j] = 1 if step[k, j] > 0 else -1
            point[k, j] = upper[k, j] if active[k, j] > 0 else lower[k, j]
            continue
        point = sol.dU
        # bound multiplier in the sign convention of its own bound
        mult = np.where(active > 0, sol.nu, -sol.nu)
        wrong = (active != 0) & ~pinned & (mult < 0)
        if np.any(wrong):
            masked = np.where(wrong, mult, np.inf)
            k, j = divmod(int(np.argmin(masked)), m)
            active[k, j] = 0
            continue
        # a bound whose multiplier is exactly zero is reported as inactive
        active[(active != 0) & ~pinned & (sol.nu == 0.0)] = 0
        return sol, active, it
    raise QpError(f"active-set loop did not terminate in {max_iter} iterations")


def _kkt_from_stage(problem: OcpProblem, stage: StageData, traj: ShootingTrajectory,
                    mult: Multipliers) -> tuple[float, float]:
    N = problem.nIntervals
    lam, nu = mult.lam, mult.nu
    stat_x = stage.gx + np.einsum("kij,ki->kj", stage.A, lam[1:]) - lam[:N]
    stat_u = stage.gu + np.einsum("kim,ki->km", stage.B, lam[1:]) + nu
    stat = max(float(np.max(np.abs(stat_x))), float(np.max(np.abs(stat_u))), float(np.max(np.abs(lam[N]))))
    # scale by the size of the gradient terms so the test is unit independent
    scale = max(1.0, float(np.max(np.abs(lam))), float(np.max(np.abs(stage.gx))),
                float(np.max(np.abs(stage.gu))), float(np.max(np.abs(nu))))
    stat /= scale
    defect = float(np.max(np.abs(stage.d)))
    if problem.x0 is not None:
        defect = max(defect, float(np.max(np.abs(problem.x0 - traj.states[0]))))
    slack_up = problem.uUpper - traj.inputs
    slack_lo = traj.inputs - problem.uLower
    comp = np.where(nu > 0, nu * slack_up, -nu * slack_lo) / scale
    bound_violation = float(np.max(np.maximum(0.0, np.maximum(-slack_up, -slack_lo))))
    resid = max(stat, defect, float(np.max(comp)), bound_violation)
    return resid, defect


def kkt_residual(problem: OcpProblem, traj: ShootingTrajectory, multipliers: Multipliers) -> float:
    """Infinity norm of stationarity, continuity and complementarity residuals."""
    return _kkt_from_stage(problem, linearize(problem, traj), traj, multipliers)[0]


def _merit(problem: OcpProblem, traj: ShootingTrajectory, rho):
    """Cost plus weighted l1 defect penalty; ``rho`` holds one weight per state component."""
    infeas = _defects(problem, traj)
    return evaluate_cost(problem, traj) + float(np.dot(rho, infeas)), infeas


def _trial_merit(problem: OcpProblem, traj: ShootingTrajectory, rho) -> float:
    """Merit of a trial point; points outside the model domain are rejected."""
    try:
        return _merit(problem, traj, rho)[0]
    except (ModelDomainError, IntegrationError):
        return float("inf")


def _defects(problem: OcpProblem, traj: ShootingTrajectory) -> np.ndarray:
    """Sum of absolute continuity defects per state component."""
    N = problem.nIntervals
    x_next = problem.dynamics.propagate(traj.states[:N], traj.inputs)
    infeas = np.sum(np.abs(x_next - traj.states[1:]), axis=0)
    if problem.x0 is not None:
        infeas = infeas + np.abs(problem.x0 - traj.states[0])
    return infeas


def _bounds_step(problem: OcpProblem, traj: ShootingTrajectory):
    lower = problem.uLower - traj.inputs
    upper = problem.uUpper - traj.inputs
    return np.minimum(lower, 0.0), np.maximum(upper, 0.0)


def _clamp(problem: OcpProblem, inputs):
    return np.minimum(np.maximum(inputs, problem.uLower), problem.uUpper)


def solve_sqp(problem: OcpProblem, warmStart: ShootingTrajectory, active=None):
    """Gauss-Newton SQP from ``warmStart``.

    Returns ``(trajectory, stats, multipliers, active)``. In real-time
    iteration mode exactly one QP step is taken.
    """
    t_start = time.perf_counter()
    opts = problem.options
    warmStart.check(problem)
    traj = ShootingTrajectory(warmStart.states.copy(), _clamp(problem, warmStart.inputs))
    stats = SolveStats()
    x0 = traj.states[0] if problem.x0 is None else problem.x0
    rho = np.zeros(problem.n)
    best = None
    mult = None
    iterations = 0
    for _ in range(opts.maxIter + 1):
        stage = linearize(problem, traj)
        lower, upper = _bounds_step(problem, traj)
        sol, active, qp_it = solve_qp_box(stage, x0 - traj.states[0], lower, upper, active,
                                          opts.regularization)
        stats.qpIterations += qp_it
        stats.regularized |= sol.regularization > 0.0
        mult = Multipliers(sol.lam, sol.nu)
        resid, defect = _kkt_from_stage(problem, stage, traj, mult)
        step_norm = max(float(np.max(np.abs(sol.dX))), float(np.max(np.abs(sol.dU))))
        if opts.trace:
            stats.trace.append((iterations, resid, defect, step_norm, int(np.count_nonzero(active))))
        if best is None or resid < best[0]:
            best = (resid, defect, traj, mult, active.copy())
        if resid <= opts.kktTol and defect <= opts.defectTol:
            best = (resid, defect, traj, mult, active.copy())
            stats.converged = True
            break
        if iterations >= opts.maxIter:
            break
        if opts.mode == REAL_TIME:
            alpha = 1.0
        else:
            rho = np.maximum(rho, 1.1 * np.max(np.abs(sol.lam), axis=0) + 1e-12)
            phi0, infeas0 = _merit(problem, traj, rho)
            slope = float(np.sum(stage.gx * sol.dX[:-1]) + np.sum(stage.gu * sol.dU) - np.dot(rho, infeas0))
            full = ShootingTrajectory(traj.states + sol.dX, _clamp(problem, traj.inputs + sol.dU))
            full_merit = _trial_merit(problem, full, rho)
            accepted = full_merit <= phi0 + opts.armijo * min(slope, 0.0)
            if not accepted and np.isfinite(full_merit):
                # second-order correction: re-solve with the defects seen at the trial point
                x_next = problem.dynamics.propagate(full.states[:-1], full.inputs)
                corrected = replace(stage, d=stage.d + x_next - full.states[1:])
                soc, _, soc_it = solve_qp_box(corrected, x0 - traj.states[0], lower, upper, active.copy(),
                                              opts.regularization)
                stats.qpIterations += soc_it
                trial = ShootingTrajectory(traj.states + soc.dX, _clamp(problem, traj.inputs + soc.dU))
                if _trial_merit(problem, trial, rho) <= phi0 + opts.armijo * min(slope, 0.0):
                    sol, accepted = soc, True
            alpha = 1.0
            if not accepted:
                alpha = 0.5
                for _ in range(opts.maxBacktracks):
                    trial = ShootingTrajectory(traj.states + alpha * sol.dX,
                                               _clamp(problem, traj.inputs + alpha * sol.dU))
                    if _trial_merit(problem, trial, rho) <= phi0 + opts.armijo * alpha * min(slope, 0.0):
                        break
                    alpha *= 0.5
                else:
                    break
        traj = ShootingTrajectory(traj.states + alpha * sol.dX,
                                  _clamp(problem, traj.inputs + alpha * sol.dU))
        iterations += 1
        if opts.mode == REAL_TIME:
            stats.converged = False
            best = (resid, defect, traj, mult, active.copy())
            break
    resid, defect, traj, mult, active = best
    stats.sqpIterations = iterations
    stats.kktResidual = resid
    stats.maxDefect = defect
    stats.activeBounds = int(np.count_nonzero(active))
    stats.solveTime = time.perf_counter() - t_start
    return traj, stats, mult, active


def write_trace_csv(stats: SolveStats, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "kkt", "defect", "step_norm", "active_bounds"])
        for row in stats.trace:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), row[4]])
