"""Fixed-step RK4 integration and finite-difference shooting sensitivities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


class IntegrationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DiscreteDynamicsResult:
    xNext: np.ndarray
    aMat: np.ndarray
    bMat: np.ndarray


def _checked(k, stage):
    if not np.all(np.isfinite(k)):
        bad = np.argwhere(~np.isfinite(np.atleast_1d(k)))[0]
        raise IntegrationError(f"non-finite derivative in component {int(bad[-1])} at RK stage {stage}")
    return k


def rk4_step(f, x, u, h: float):
    """One classical Runge-Kutta step with ``u`` held constant.

    ``f(x, u)`` may operate on batches; leading axes are passed through.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    k1 = _checked(f(x, u), 1)
    k2 = _checked(f(x + 0.5 * h * k1, u), 2)
    k3 = _checked(f(x + 0.5 * h * k2, u), 3)
    k4 = _checked(f(x + h * k3, u), 4)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(f, x, u, h: float, substeps: int = 1):
    """Chain ``substeps`` RK4 steps of size h/substeps over one interval."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    dt = h / substeps
    for _ in range(substeps):
        x = rk4_step(f, x, u, dt)
    return x


def fd_steps(v: np.ndarray) -> np.ndarray:
    return _SQRT_EPS * np.maximum(1.0, np.abs(v))


def discretize_batch(f, xs: np.ndarray, us: np.ndarray, h: float, substeps: int = 1):
    """Endpoints and forward-difference sensitivities for many intervals at once.

    ``xs`` has shape (N, n) and ``us`` (N, m). Returns ``(xNext, A, B)`` with
    shapes (N, n), (N, n, n), (N, n, m). All perturbed initial value problems
    are stacked into one batch so the integrator runs once.
    """
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    N, n = xs.shape
    m = us.shape[1]
    dx = fd_steps(xs)
    du = fd_steps(us)
    X = np.repeat(xs[:, None, :], 1 + n + m, axis=1)
    U = np.repeat(us[:, None, :], 1 + n + m, axis=1)
    idx = np.arange(n)
    X[:, 1 + idx, idx] += dx
    jdx = np.arange(m)
    U[:, 1 + n + jdx, jdx] += du
    Y = integrate(f, X.reshape(-1, n), U.reshape(-1, m), h, substeps).reshape(N, 1 + n + m, n)
    base = Y[:, 0, :]
    A = np.swapaxes((Y[:, 1:1 + n, :] - base[:, None, :]) / dx[:, :, None], 1, 2)
    B = np.swapaxes((Y[:, 1 + n:, :] - base[:, None, :]) / du[:, :, None], 1, 2)
    return base, A, B


def discretize_with_sensitivities(f, x, u, h: float, substeps: int = 1) -> DiscreteDynamicsResult:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    xn, A, B = discretize_batch(f, x[None, :], u[None, :], h, substeps)
    return DiscreteDynamicsResult(xn[0], A[0], B[0])


class ShootingDynamics:
    """Discrete dynamics of one shooting interval built from a continuous model."""

    def __init__(self, f, step: float, substeps: int = 1):
        self.f = f
        self.step = step
        self.substeps = substeps

    def propagate(self, xs, us):
        return integrate(self.f, np.asarray(xs, float), np.asarray(us, float), self.step, self.substeps)

    def linearize(self, xs, us):
        return discretize_batch(self.f, xs, us, self.step, self.substeps)
