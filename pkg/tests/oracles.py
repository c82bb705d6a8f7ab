"""Reference computations that share no code with the package solvers."""
import numpy as np

from maglev_nmpc.ocp import StageData


def random_stage(rng, N, n, m, hessian_shift=0.1):
    A = rng.normal(size=(N, n, n))
    B = rng.normal(size=(N, n, m))
    Hx = np.zeros((N, n, n))
    Hu = np.zeros((N, m, m))
    S = np.zeros((N, m, n))
    for k in range(N):
        M = rng.normal(size=(n + m, n + m))
        H = M @ M.T + hessian_shift * np.eye(n + m)
        Hx[k], Hu[k], S[k] = H[:n, :n], H[n:, n:], H[n:, :n]
    return StageData(A, B, S, Hx, Hu, rng.normal(size=(N, n)), rng.normal(size=(N, m)),
                     rng.normal(size=(N, n)))


def dense_kkt(stage, dx0, active, lower, upper):
    """Stack the whole LQ problem and solve its KKT system with one dense solve.

    Returns states, inputs, dynamics multipliers (sign convention of the
    package: lam[k] belongs to the constraint that defines x_k) and bound
    multipliers.
    """
    N, n, m = stage.B.shape
    nx = (N + 1) * n
    nv = nx + N * m
    H = np.zeros((nv, nv))
    g = np.zeros(nv)

    def xs(k):
        return slice(k * n, (k + 1) * n)

    def us(k):
        return slice(nx + k * m, nx + (k + 1) * m)

    for k in range(N):
        H[xs(k), xs(k)] = stage.Hx[k]
        H[us(k), us(k)] = stage.Hu[k]
        H[us(k), xs(k)] = stage.S[k]
        H[xs(k), us(k)] = stage.S[k].T
        g[xs(k)] = stage.gx[k]
        g[us(k)] = stage.gu[k]
    rows, rhs, pinned = [], [], []
    G = np.zeros((n, nv))
    G[:, xs(0)] = np.eye(n)
    rows.append(G)
    rhs.append(dx0)
    for k in range(N):
        G = np.zeros((n, nv))
        G[:, xs(k + 1)] = np.eye(n)
        G[:, xs(k)] = -stage.A[k]
        G[:, us(k)] = -stage.B[k]
        rows.append(G)
        rhs.append(stage.d[k])
    for k in range(N):
        for j in range(m):
            if active[k, j] != 0:
                G = np.zeros((1, nv))
                G[0, nx + k * m + j] = 1.0
                rows.append(G)
                rhs.append([upper[k, j] if active[k, j] > 0 else lower[k, j]])
                pinned.append((k, j))
    G = np.vstack(rows)
    b = np.concatenate([np.atleast_1d(r) for r in rhs])
    K = np.block([[H, G.T], [G, np.zeros((len(b), len(b)))]])
    sol = np.linalg.solve(K, np.concatenate([-g, b]))
    w, y = sol[:nv], sol[nv:]
    lam = -y[:nx].reshape(N + 1, n)
    nu = np.zeros((N, m))
    for i, (k, j) in enumerate(pinned):
        nu[k, j] = y[nx + i]
    return w[:nx].reshape(N + 1, n), w[nx:].reshape(N, m), lam, nu


def rk4_transition(A, B, h):
    """Exact one-step RK4 map of x' = A x + B u: a degree-4 Taylor polynomial."""
    n = A.shape[0]
    M = h * A
    M2 = M @ M
    M3 = M2 @ M
    Ad = np.eye(n) + M + M2 / 2 + M3 / 6 + M3 @ M / 24
    Bd = h * (np.eye(n) + M / 2 + M2 / 6 + M3 / 24) @ B
    return Ad, Bd


def finite_horizon_lqr_gain(Ad, Bd, Q, R, steps):
    """First-stage gain of the finite-horizon LQR with zero terminal weight."""
    P = np.zeros_like(Ad)
    K = None
    for _ in range(steps):
        K = np.linalg.solve(R + Bd.T @ P @ Bd, Bd.T @ P @ Ad)
        P = Q + Ad.T @ P @ (Ad - Bd @ K)
    return K


def central_jacobian(fun, x, rel=1e-6):
    x = np.asarray(x, float)
    f0 = np.asarray(fun(x))
    J = np.zeros((f0.size, x.size))
    for j in range(x.size):
        step = rel * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        J[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))).ravel() / (2 * step)
    return J
