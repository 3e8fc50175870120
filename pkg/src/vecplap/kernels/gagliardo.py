"""Gagliardo energy of a piecewise-linear field on a uniform 1D grid.

    E(U) = int_R int_R |U(x) - U(y)|^p / |x - y|^{1+sp} dx dy,   U = 0 off [a, b].

The double integral is split over element pairs:

* same element: U(x) - U(y) = B (x - y) / h, integrated in closed form;
* adjacent elements: Duffy coordinates reduce the pair to a 1D integral
  in the mixing parameter, split at 1/2 and at the closest approach of
  the integrand's vector to the origin;
* separated elements: Gauss rule in the outer variable, and for each
  outer node the inner element is split at the point where
  |U(x) - U(y)| is smallest;
* interior-exterior pairs: the exterior integral of the kernel is exact,
  leaving a 1D integral of |U|^p against it; the boundary elements use a
  Gauss-Jacobi rule for their t^p behaviour.

Split points follow the field, so gradients are those of the quadrature
with the split points held fixed.

Two implementations with identical arithmetic: ``energy_grad_numpy``
(vectorized) and ``energy_grad_loops`` (explicit loops, compiled by numba).
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit_always


def _closest(A, B):
    """argmin over tau in [0, 1] of |A + tau B| along the last axis."""
    bb = np.sum(B * B, axis=-1)
    ab = np.sum(A * B, axis=-1)
    safe = np.where(bb > 0, bb, 1.0)
    return np.clip(np.where(bb > 0, -ab / safe, 0.0), 0.0, 1.0)


def _pow_and_phi(z, p):
    """|z|^p and |z|^{p-2} z for stacked vectors."""
    r2 = np.sum(z * z, axis=-1)
    r = np.sqrt(r2)
    mag = r**p
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 0, r ** (p - 2), 0.0)
    return mag, scale[..., None] * z


def energy_grad_numpy(U, h, s, p, xi, w, xj, wj, length, want_grad=True):
    """Energy and nodal gradient for nodal values ``U`` of shape (m, N)."""
    m, N = U.shape
    E = m - 1
    sp = s * p
    ex = p - sp + 1.0
    B = U[1:] - U[:-1]
    grad = np.zeros_like(U)
    G = xi.size

    # same element
    cs = 2.0 * h ** (1 - sp) / ((p - sp) * ex)
    mag, ph = _pow_and_phi(B, p)
    total = cs * float(np.sum(mag))
    if want_grad:
        gB = cs * p * ph
        grad[1:] += gB
        grad[:-1] -= gB

    # adjacent elements: z(xi) = xi*B1 + (1 - xi)*B2
    if E >= 2:
        ca = 2.0 * h ** (1 - sp) / ex
        B1, B2 = B[:-1], B[1:]
        gB1 = np.zeros_like(B1)
        gB2 = np.zeros_like(B2)
        acc = 0.0
        for lo, hi in ((0.0, 0.5), (0.5, 1.0)):
            A0 = lo * B1 + (1 - lo) * B2
            D = (hi - lo) * (B1 - B2)
            r = _closest(A0, D)
            for r0, r1 in ((np.zeros_like(r), r), (r, np.ones_like(r))):
                L = r1 - r0
                rr = r0[:, None] + L[:, None] * xi[None, :]         # (E-1, G)
                zz = lo + (hi - lo) * rr
                wt = (hi - lo) * L[:, None] * w[None, :] * np.maximum(zz, 1 - zz) ** (-ex)
                z = A0[:, None, :] + rr[..., None] * D[:, None, :]
                mag, ph = _pow_and_phi(z, p)
                acc += float(np.sum(wt * mag))
                if want_grad:
                    c = (ca * p * wt)[..., None] * ph
                    gB1 += np.sum(c * zz[..., None], axis=1)
                    gB2 += np.sum(c * (1 - zz)[..., None], axis=1)
        total += ca * acc
        if want_grad:
            # B1 = U[e+1]-U[e], B2 = U[e+2]-U[e+1]
            grad[1:-1] += gB1 - gB2
            grad[:-2] -= gB1
            grad[2:] += gB2

    # separated elements
    Ug = U[:-1, None, :] * (1 - xi)[None, :, None] + U[1:, None, :] * xi[None, :, None]  # (E, G, N)
    for d in range(2, E):
        Xe = Ug[:-d]                     # (P, G, N) outer values
        Uf = U[d:-1]                     # (P, N) inner element start
        Bf = B[d:]                       # (P, N)
        A = Xe - Uf[:, None, :]          # diff = A - tau * Bf
        r = _closest(A, -Bf[:, None, :])
        for r0, r1 in ((np.zeros_like(r), r), (r, np.ones_like(r))):
            L = r1 - r0                                              # (P, G)
            tau = r0[..., None] + L[..., None] * xi[None, None, :]   # (P, G, G')
            diff = A[:, :, None, :] - tau[..., None] * Bf[:, None, None, :]
            dist = (d + tau - xi[None, :, None]) * h
            wt = (h * h) * w[None, :, None] * L[..., None] * w[None, None, :] * dist ** (-1.0 - sp)
            mag, ph = _pow_and_phi(diff, p)
            total += 2.0 * float(np.sum(wt * mag))
            if want_grad:
                c = (2.0 * p * wt)[..., None] * ph                   # (P, G, G', N)
                cs_ = np.sum(c, axis=2)                              # (P, G, N)
                grad[:E - d] += np.sum(cs_ * (1 - xi)[None, :, None], axis=1)
                grad[1:E - d + 1] += np.sum(cs_ * xi[None, :, None], axis=1)
                ct = np.sum(c, axis=(1, 2))
                ctt = np.sum(c * tau[..., None], axis=(1, 2))
                grad[d:E] -= ct - ctt
                grad[d + 1:] -= ctt

    # interior-exterior pairs, counted twice
    ext = 0.0
    inv = 1.0 / sp
    far = np.sum(wj * (length - xj * h) ** (-sp))
    cb = inv * (h ** (1 - sp) / ex + h * far)
    for node in (1, m - 2):
        mag, ph = _pow_and_phi(U[node], p)
        ext += cb * float(mag)
        if want_grad:
            grad[node] += 2.0 * cb * p * ph
    if E > 2:
        A = U[1:-2]
        D = B[1:-1]
        r = _closest(A, D)
        x0 = (np.arange(1, E - 1) * h)[:, None]
        for r0, r1 in ((np.zeros_like(r), r), (r, np.ones_like(r))):
            L = r1 - r0
            rr = r0[:, None] + L[:, None] * xi[None, :]
            x = x0 + rr * h
            kap = inv * (x ** (-sp) + (length - x) ** (-sp))
            wt = h * L[:, None] * w[None, :] * kap
            z = A[:, None, :] + rr[..., None] * D[:, None, :]
            mag, ph = _pow_and_phi(z, p)
            ext += float(np.sum(wt * mag))
            if want_grad:
                c = (2.0 * p * wt)[..., None] * ph
                grad[1:-2] += np.sum(c * (1 - rr)[..., None], axis=1)
                grad[2:-1] += np.sum(c * rr[..., None], axis=1)
    total += 2.0 * ext
    if want_grad:
        grad[0] = 0.0
        grad[-1] = 0.0
    return total, grad


def energy_grad_loops(U, h, s, p, xi, w, xj, wj, length, want_grad=True):
    m, N = U.shape
    E = m - 1
    G = xi.shape[0]
    sp = s * p
    ex = p - sp + 1.0
    B = np.empty((E, N))
    for e in range(E):
        for k in range(N):
            B[e, k] = U[e + 1, k] - U[e, k]
    grad = np.zeros((m, N))
    z = np.empty(N)
    total = 0.0

    cs = 2.0 * h ** (1 - sp) / ((p - sp) * ex)
    for e in range(E):
        r2 = 0.0
        for k in range(N):
            r2 += B[e, k] * B[e, k]
        rad = math.sqrt(r2)
        total += cs * rad**p
        if want_grad and rad > 0.0:
            sc = cs * p * rad ** (p - 2)
            for k in range(N):
                grad[e + 1, k] += sc * B[e, k]
                grad[e, k] -= sc * B[e, k]

    if E >= 2:
        ca = 2.0 * h ** (1 - sp) / ex
        A0 = np.empty(N)
        D = np.empty(N)
        for e in range(E - 1):
            for half in range(2):
                lo = 0.5 * half
                hi = lo + 0.5
                ab = 0.0
                bb = 0.0
                for k in range(N):
                    A0[k] = lo * B[e, k] + (1 - lo) * B[e + 1, k]
                    D[k] = (hi - lo) * (B[e, k] - B[e + 1, k])
                    ab += A0[k] * D[k]
                    bb += D[k] * D[k]
                rs = min(1.0, max(0.0, -ab / bb)) if bb > 0 else 0.0
                for piece in range(2):
                    r0 = 0.0 if piece == 0 else rs
                    L = rs if piece == 0 else 1.0 - rs
                    for g in range(G):
                        rr = r0 + L * xi[g]
                        zz = lo + (hi - lo) * rr
                        wt = (hi - lo) * L * w[g] * max(zz, 1 - zz) ** (-ex)
                        r2 = 0.0
                        for k in range(N):
                            z[k] = A0[k] + rr * D[k]
                            r2 += z[k] * z[k]
                        rad = math.sqrt(r2)
                        total += ca * wt * rad**p
                        if want_grad and rad > 0.0:
                            sc = ca * p * wt * rad ** (p - 2)
                            for k in range(N):
                                g1 = sc * z[k] * zz
                                g2 = sc * z[k] * (1 - zz)
                                grad[e + 1, k] += g1 - g2
                                grad[e, k] -= g1
                                grad[e + 2, k] += g2

    A = np.empty(N)
    for e in range(E):
        for g in range(G):
            sg = xi[g]
            for f in range(e + 2, E):
                d = f - e
                ab = 0.0
                bb = 0.0
                for k in range(N):
                    A[k] = (1 - sg) * U[e, k] + sg * U[e + 1, k] - U[f, k]
                    ab += A[k] * B[f, k]
                    bb += B[f, k] * B[f, k]
                rs = min(1.0, max(0.0, ab / bb)) if bb > 0 else 0.0
                for piece in range(2):
                    r0 = 0.0 if piece == 0 else rs
                    L = rs if piece == 0 else 1.0 - rs
                    for g2 in range(G):
                        tau = r0 + L * xi[g2]
                        dist = (d + tau - sg) * h
                        wt = h * h * w[g] * L * w[g2] * dist ** (-1.0 - sp)
                        r2 = 0.0
                        for k in range(N):
                            z[k] = A[k] - tau * B[f, k]
                            r2 += z[k] * z[k]
                        rad = math.sqrt(r2)
                        total += 2.0 * wt * rad**p
                        if want_grad and rad > 0.0:
                            sc = 2.0 * p * wt * rad ** (p - 2)
                            for k in range(N):
                                c = sc * z[k]
                                grad[e, k] += c * (1 - sg)
                                grad[e + 1, k] += c * sg
                                grad[f, k] -= c * (1 - tau)
                                grad[f + 1, k] -= c * tau

    ext = 0.0
    inv = 1.0 / sp
    far = 0.0
    for j in range(xj.shape[0]):
        far += wj[j] * (length - xj[j] * h) ** (-sp)
    cb = inv * (h ** (1 - sp) / ex + h * far)
    for node in (1, m - 2):
        r2 = 0.0
        for k in range(N):
            r2 += U[node, k] * U[node, k]
        rad = math.sqrt(r2)
        ext += cb * rad**p
        if want_grad and rad > 0.0:
            sc = 2.0 * cb * p * rad ** (p - 2)
            for k in range(N):
                grad[node, k] += sc * U[node, k]
    for e in range(1, E - 1):
        ab = 0.0
        bb = 0.0
        for k in range(N):
            ab += U[e, k] * B[e, k]
            bb += B[e, k] * B[e, k]
        rs = min(1.0, max(0.0, -ab / bb)) if bb > 0 else 0.0
        for piece in range(2):
            r0 = 0.0 if piece == 0 else rs
            L = rs if piece == 0 else 1.0 - rs
            for g in range(G):
                rr = r0 + L * xi[g]
                x = (e + rr) * h
                kap = inv * (x ** (-sp) + (length - x) ** (-sp))
                wt = h * L * w[g] * kap
                r2 = 0.0
                for k in range(N):
                    z[k] = U[e, k] + rr * B[e, k]
                    r2 += z[k] * z[k]
                rad = math.sqrt(r2)
                ext += wt * rad**p
                if want_grad and rad > 0.0:
                    sc = 2.0 * p * wt * rad ** (p - 2)
                    for k in range(N):
                        grad[e, k] += sc * z[k] * (1 - rr)
                        grad[e + 1, k] += sc * z[k] * rr
    total += 2.0 * ext
    if want_grad:
        for k in range(N):
            grad[0, k] = 0.0
            grad[m - 1, k] = 0.0
    return total, grad


energy_grad_numba = njit_always(energy_grad_loops)

energy_grad = energy_grad_numba if USE_NUMBA else energy_grad_numpy
