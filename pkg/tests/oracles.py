"""Independent reference computations used by the tests."""

import numpy as np
from scipy import integrate


def gagliardo_bruteforce(xn, U, s, p, inner_rtol=1e-11, outer_rtol=1e-9):
    """Nested adaptive quadrature of the Gagliardo energy of the piecewise-linear
    interpolant of scalar nodal values ``U`` (zero outside [xn[0], xn[-1]]).

    Inner integrals are split at the kink x = y, at the nodes and at the
    points where U(y) = U(x); the exterior part uses the exact kernel moment.
    """
    xn = np.asarray(xn, dtype=float)
    U = np.asarray(U, dtype=float)
    a, b = xn[0], xn[-1]
    sp = s * p

    def f(x):
        return np.interp(x, xn, U)

    def inner(x):
        fx = f(x)
        pts = [x] + list(xn[1:-1])
        for e in range(len(xn) - 1):
            u0, u1 = U[e], U[e + 1]
            if (u0 - fx) * (u1 - fx) < 0:
                pts.append(xn[e] + (fx - u0) / (u1 - u0) * (xn[e + 1] - xn[e]))
        pts = sorted({q for q in pts if a < q < b})
        g = lambda y: abs(fx - f(y)) ** p / abs(x - y) ** (1 + sp) if y != x else 0.0
        brk = [a] + pts + [b]
        r = sum(integrate.quad(g, lo, hi, epsabs=0, epsrel=inner_rtol, limit=200)[0]
                for lo, hi in zip(brk[:-1], brk[1:]))
        ext = abs(fx) ** p * ((x - a) ** (-sp) + (b - x) ** (-sp)) / sp if a < x < b else 0.0
        return r + 2 * ext

    return sum(integrate.quad(inner, lo, hi, epsabs=0, epsrel=outer_rtol, limit=200)[0]
               for lo, hi in zip(xn[:-1], xn[1:]))


# gagliardo_bruteforce on uniform grids over [0, 1], computed once and frozen
U7 = [0.0, 0.8, -0.3, 1.1, 0.4, -0.6, 0.0]
U5 = [0.0, 0.5, 1.0, -0.25, 0.0]
U4 = [0.0, 1.0, 0.5, 0.0]

GAGLIARDO_FROZEN = [
    (U7, 0.3, 1.5, 8.959039158577026),
    (U7, 0.3, 2.0, 7.587121448223902),
    (U7, 0.3, 3.0, 7.496249678079684),
    (U7, 0.5, 1.5, 13.577061817212973),
    (U7, 0.5, 2.0, 14.260598170241792),
    (U7, 0.5, 3.0, 20.97514193636812),
    (U7, 0.7, 1.5, 30.41176986871158),
    (U7, 0.7, 2.0, 39.63129027883665),
    (U7, 0.7, 3.0, 86.6962896795862),
    (U5, 0.5, 2.0, 6.860073320580108),
    (U4, 0.4, 2.5, 4.109159724348933),
]
