"""Compiled evaluation of the analytic levitation model over a whole horizon.

These kernels compute exactly what :class:`~maglev_nmpc.model.LevitationModel`
and :func:`~maglev_nmpc.odeint.discretize_batch` compute with numpy, but
without per-call interpreter overhead. The numpy path remains the reference
and the two are cross-checked in the tests.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .model import TWO_MASS, LevitationModel, ModelDomainError
from .odeint import IntegrationError

_KIND_TWO, _KIND_SINGLE = 2, 1
_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


def pack_parameters(model: LevitationModel) -> tuple[int, np.ndarray]:
    p, mg, eq = model.mech, model.magnet, model.eq
    kind = _KIND_TWO if model.kind == TWO_MASS else _KIND_SINGLE
    return kind, np.array([p.m1, p.m2, p.ck, p.cd, p.g, p.fL, mg.km, mg.rc,
                           eq.sNom, eq.iNom, eq.uNom, eq.dz2Nom])


@njit(cache=True)
def _rhs(kind, p, x, u, out):
    m1, m2, ck, cd, g, fL, km, rc, s_nom, i_nom, u_nom, dz2_nom = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11])
    if kind == 2:
        ds, dz2, v1, v2, di = x[0], x[1], x[2], x[3], x[4]
    else:
        ds, v1, di = x[0], x[1], x[2]
        dz2 = 0.0
        v2 = 0.0
    s = s_nom + ds
    if not s > 0.0:
        return 1
    cur = i_nom + di
    f_mag = km * (cur / s) ** 2
    i_dot = s / (2 * km) * (u_nom + u - rc * cur) + cur * v1 / s
    if kind == 2:
        coupling = ck * (ds - dz2 + dz2_nom) + cd * (v1 - v2)
        out[0] = v1
        out[1] = v2
        out[2] = g - (coupling + f_mag) / m1
        out[3] = g + coupling / m2
        out[4] = i_dot
    else:
        out[0] = v1
        out[1] = g + fL / m1 - f_mag / m1
        out[2] = i_dot
    for i in range(out.shape[0]):
        if not np.isfinite(out[i]):
            return 2
    return 0


@njit(cache=True)
def _integrate(kind, p, x, u, h, substeps, out):
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for i in range(n):
        out[i] = x[i]
    dt = h / substeps
    for _ in range(substeps):
        err = _rhs(kind, p, out, u, k1)
        if err:
            return err
        for i in range(n):
            tmp[i] = out[i] + 0.5 * dt * k1[i]
        err = _rhs(kind, p, tmp, u, k2)
        if err:
            return err
        for i in range(n):
            tmp[i] = out[i] + 0.5 * dt * k2[i]
        err = _rhs(kind, p, tmp, u, k3)
        if err:
            return err
        for i in range(n):
            tmp[i] = out[i] + dt * k3[i]
        err = _rhs(kind, p, tmp, u, k4)
        if err:
            return err
        for i in range(n):
            out[i] = out[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


@njit(cache=True)
def _propagate(kind, p, xs, us, h, substeps, out):
    for k in range(xs.shape[0]):
        err = _integrate(kind, p, xs[k], us[k, 0], h, substeps, out[k])
        if err:
            return err * 100000 + k
    return 0


@njit(cache=True)
def _discretize(kind, p, xs, us, h, substeps, sqrt_eps, xnext, A, B):
    N, n = xs.shape
    xp = np.empty(n)
    yp = np.empty(n)
    for k in range(N):
        err = _integrate(kind, p, xs[k], us[k, 0], h, substeps, xnext[k])
        if err:
            return err * 100000 + k
        for j in range(n):
            for i in range(n):
                xp[i] = xs[k, i]
            step = sqrt_eps * max(1.0, abs(xs[k, j]))
            xp[j] += step
            err = _integrate(kind, p, xp, us[k, 0], h, substeps, yp)
            if err:
                return err * 100000 + k
            for i in range(n):
                A[k, i, j] = (yp[i] - xnext[k, i]) / step
        step = sqrt_eps * max(1.0, abs(us[k, 0]))
        err = _integrate(kind, p, xs[k], us[k, 0] + step, h, substeps, yp)
        if err:
            return err * 100000 + k
        for i in range(n):
            B[k, i, 0] = (yp[i] - xnext[k, i]) / step
    return 0


@njit(cache=True)
def _outputs(kind, p, xs, Y, J):
    m1, m2, ck, cd, g, fL, km = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    s_nom, i_nom, dz2_nom = p[8], p[9], p[11]
    for k in range(xs.shape[0]):
        x = xs[k]
        ds = x[0]
        s = s_nom + ds
        if not s > 0.0:
            return k + 1
        if kind == 2:
            dz2, v1, v2, di = x[1], x[2], x[3], x[4]
        else:
            v1, di = x[1], x[2]
        cur = i_nom + di
        f_mag = km * (cur / s) ** 2
        dF_ds = -2.0 * f_mag / s
        dF_di = 2.0 * km * cur / (s * s)
        for i in range(J.shape[1]):
            for j in range(J.shape[2]):
                J[k, i, j] = 0.0
        if kind == 2:
            coupling = ck * (ds - dz2 + dz2_nom) + cd * (v1 - v2)
            Y[k, 0] = s
            Y[k, 1] = dz2
            Y[k, 2] = g - (coupling + f_mag) / m1
            Y[k, 3] = g + coupling / m2
            Y[k, 4] = cur
            J[k, 0, 0] = 1.0
            J[k, 1, 1] = 1.0
            J[k, 2, 0] = -(ck + dF_ds) / m1
            J[k, 2, 1] = ck / m1
            J[k, 2, 2] = -cd / m1
            J[k, 2, 3] = cd / m1
            J[k, 2, 4] = -dF_di / m1
            J[k, 3, 0] = ck / m2
            J[k, 3, 1] = -ck / m2
            J[k, 3, 2] = cd / m2
            J[k, 3, 3] = -cd / m2
            J[k, 4, 4] = 1.0
        else:
            Y[k, 0] = s
            Y[k, 1] = g + fL / m1 - f_mag / m1
            Y[k, 2] = cur
            J[k, 0, 0] = 1.0
            J[k, 1, 0] = -dF_ds / m1
            J[k, 1, 2] = -dF_di / m1
            J[k, 2, 2] = 1.0
    return 0


def _raise(code: int, what: str):
    err, stage = divmod(code, 100000)
    if err == 1:
        raise ModelDomainError(f"{what}: non-positive air gap at stage {stage}")
    raise IntegrationError(f"{what}: non-finite derivative at stage {stage}")


class CompiledShootingDynamics:
    """Drop-in replacement for :class:`~maglev_nmpc.odeint.ShootingDynamics`."""

    def __init__(self, model: LevitationModel, step: float, substeps: int = 1):
        if not model.has_analytic_jacobians:
            raise ValueError("compiled kernels cover the analytic magnet backend only")
        self.kind, self.params = pack_parameters(model)
        self.n = model.n
        self.step = step
        self.substeps = substeps

    def propagate(self, xs, us):
        xs = np.ascontiguousarray(xs, dtype=float)
        us = np.ascontiguousarray(us, dtype=float)
        out = np.empty_like(xs)
        code = _propagate(self.kind, self.params, xs, us, self.step, self.substeps, out)
        if code:
            _raise(code, "propagate")
        return out

    def linearize(self, xs, us):
        xs = np.ascontiguousarray(xs, dtype=float)
        us = np.ascontiguousarray(us, dtype=float)
        N, n = xs.shape
        xnext = np.empty((N, n))
        A = np.empty((N, n, n))
        B = np.empty((N, n, 1))
        code = _discretize(self.kind, self.params, xs, us, self.step, self.substeps, _SQRT_EPS, xnext, A, B)
        if code:
            _raise(code, "linearize")
        return xnext, A, B


class CompiledOutputs:
    """Output values and analytic Jacobians for a batch of states."""

    def __init__(self, model: LevitationModel):
        self.kind, self.params = pack_parameters(model)
        self.ny = model.ny

    def _eval(self, xs):
        xs = np.ascontiguousarray(xs, dtype=float)
        flat = xs.reshape(-1, xs.shape[-1])
        Y = np.empty((flat.shape[0], self.ny))
        J = np.empty((flat.shape[0], self.ny, flat.shape[1]))
        code = _outputs(self.kind, self.params, flat, Y, J)
        if code:
            raise ModelDomainError(f"outputs: non-positive air gap at stage {code - 1}")
        lead = xs.shape[:-1]
        return Y.reshape(lead + (self.ny,)), J.reshape(lead + J.shape[1:])

    def value(self, xs):
        return self._eval(xs)[0]

    def jacobian(self, xs):
        return self._eval(xs)[1]
