"""Stepping loops for the first-order system u' = phi_q(v), v' = -lam phi_p(u).

State vectors pack ``y = (u, v)`` with ``u = y[:n]`` and ``v = y[n:]``.
"""

import math

import numpy as np

from ._accel import jit

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

# accepted defect between one full step and two half steps, as a fraction of tol
CROSS_FRACTION = 0.1


@jit
def phi(x, e):
    """|x|^{e-2} x, zero at the origin."""
    r = 0.0
    for i in range(x.shape[0]):
        r += x[i] * x[i]
    out = np.zeros_like(x)
    if r > 0.0:
        s = r ** (0.5 * (e - 2.0))
        for i in range(x.shape[0]):
            out[i] = s * x[i]
    return out


@jit
def rhs(y, n, p, q, lam):
    out = np.empty_like(y)
    du = phi(y[n:], q)
    dv = phi(y[:n], p)
    for i in range(n):
        out[i] = du[i]
        out[n + i] = -lam * dv[i]
    return out


@jit
def _dp_step(y, k, h, n, p, q, lam):
    """One Dormand-Prince step; ``k[0]`` must hold f(y). Fills ``k[1:]``."""
    dim = y.shape[0]
    for s in range(1, 7):
        ys_ = y.copy()
        for j in range(s):
            a = _A[s, j]
            if a != 0.0:
                for i in range(dim):
                    ys_[i] += h * a * k[j, i]
        k[s] = rhs(ys_, n, p, q, lam)
    ynew = y.copy()
    err = 0.0
    for i in range(dim):
        acc = 0.0
        ea = 0.0
        for j in range(7):
            acc += _B5[j] * k[j, i]
            ea += _E[j] * k[j, i]
        ynew[i] += h * acc
        e = abs(h * ea)
        if e > err:
            err = e
    if not math.isfinite(err):
        err = 1e300
    return ynew, err


@jit
def _crosses(y, ynew):
    for i in range(y.shape[0]):
        if y[i] * ynew[i] <= 0.0:
            return True
    return False


@jit
def dopri_run(y0, n, p, lam, t_end, tol, h0, stop_after, max_steps):
    """Adaptive Dormand-Prince integration on [0, t_end].

    Local error control is absolute: max-norm of the embedded difference
    <= tol. A step on which a component of u or v touches or changes sign
    crosses a point where the right-hand side is not smooth and the
    embedded estimate is unreliable; such steps are re-done as two half
    steps and accepted only if both agree to ``CROSS_FRACTION * tol``.

    Stops early after ``stop_after`` sign changes of ``u[0]``
    (``stop_after <= 0`` disables this). Returns accepted times, states,
    the rejected-step count and a status code.
    """
    q = p / (p - 1.0)
    dim = y0.shape[0]
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, dim))
    ts[0] = 0.0
    ys[0] = y0
    count = 1
    t = 0.0
    y = y0.copy()
    h = min(h0, t_end)
    hmin = 1e-14 * t_end
    k = np.empty((7, dim))
    kh = np.empty((7, dim))
    f0 = rhs(y, n, p, q, lam)
    rejected = 0
    changes = 0
    status = STATUS_OK
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        steps += 1
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        k[0] = f0
        ynew, err = _dp_step(y, k, h, n, p, q, lam)
        fac = 0.0
        mid = np.empty(0)
        if err <= tol and _crosses(y, ynew):
            kh[0] = f0
            ymid, e1 = _dp_step(y, kh, 0.5 * h, n, p, q, lam)
            kh[0] = kh[6]
            yend, e2 = _dp_step(ymid, kh, 0.5 * h, n, p, q, lam)
            diff = 0.0
            for i in range(dim):
                d = abs(yend[i] - ynew[i])
                if d > diff:
                    diff = d
            if diff <= CROSS_FRACTION * tol and e1 <= tol and e2 <= tol:
                ynew = yend
                k[6] = kh[6]
                mid = ymid
            else:
                fac = max(0.1, min(0.5, 0.9 * (CROSS_FRACTION * tol / max(diff, 1e-300)) ** 0.5))
                err = 2.0 * tol
        if err <= tol:
            if count + 2 > cap:
                cap *= 2
                ts2 = np.empty(cap)
                ys2 = np.empty((cap, dim))
                ts2[:count] = ts[:count]
                ys2[:count] = ys[:count]
                ts = ts2
                ys = ys2
            if mid.shape[0] == dim:
                ts[count] = t + 0.5 * h
                ys[count] = mid
                count += 1
            t = t_end if last else t + h
            ts[count] = t
            ys[count] = ynew
            count += 1
            if stop_after > 0:
                prev = y[0]
                cur = ynew[0]
                if (prev > 0.0 and cur <= 0.0) or (prev < 0.0 and cur >= 0.0):
                    changes += 1
            y = ynew
            f0 = k[6].copy()
            if stop_after > 0 and changes >= stop_after:
                break
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * (tol / err) ** 0.2))
            h = h * fac
        else:
            rejected += 1
            if fac == 0.0:
                fac = max(0.1, 0.9 * (tol / err) ** 0.2)
            h = h * fac
            if h < hmin:
                status = STATUS_UNDERFLOW
                break
    return ts[:count].copy(), ys[:count].copy(), rejected, status


@jit
def _midpoint_step(y, n, p, q, lam, h, iters, ftol):
    yn = y + h * rhs(y, n, p, q, lam)
    for _ in range(iters):
        mid = 0.5 * (y + yn)
        nxt = y + h * rhs(mid, n, p, q, lam)
        diff = 0.0
        for i in range(y.shape[0]):
            d = abs(nxt[i] - yn[i])
            if d > diff:
                diff = d
        yn = nxt
        if diff <= ftol:
            break
    return yn


@jit
def implicit_midpoint_run(y0, n, p, lam, h, nsteps, iters, ftol):
    """Fixed-step implicit midpoint rule solved by fixed-point iteration."""
    q = p / (p - 1.0)
    ys = np.empty((nsteps + 1, y0.shape[0]))
    ys[0] = y0
    y = y0.copy()
    for k in range(nsteps):
        y = _midpoint_step(y, n, p, q, lam, h, iters, ftol)
        ys[k + 1] = y
    return ys
