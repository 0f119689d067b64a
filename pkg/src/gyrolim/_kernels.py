"""Compiled per-node kernels for the gyrocenter fields.

These fuse B, its Jacobian, b, grad|B|, curl b, S(y) and grad H(y) into one
loop over nodes. The numpy implementations in ``gyrocenter`` are the
reference; tests check both agree.

Status codes: 0 ok, 1 outside field domain, 2 singular |b.a|.
"""

import math

import numpy as np
from numba import njit

DIPOLE = 0
TOKAMAK = 1

OK = 0
DOMAIN = 1
SINGULAR = 2


@njit(cache=True)
def _field(kind, p, x1, x2, x3, B, J):
    if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)):
        return DOMAIN
    if kind == DIPOLE:
        M = p[0]
        rho2 = x1 * x1 + x2 * x2 + x3 * x3
        if not rho2 > 0.0:
            return DOMAIN
        rho5 = rho2 * rho2 * math.sqrt(rho2)
        v0 = 3.0 * x1 * x3
        v1 = 3.0 * x2 * x3
        v2 = 2.0 * x3 * x3 - x1 * x1 - x2 * x2
        c = -M / rho5
        B[0] = c * v0
        B[1] = c * v1
        B[2] = c * v2
        d = 5.0 / rho2
        J[0, 0] = c * (3.0 * x3 - d * v0 * x1)
        J[0, 1] = c * (-d * v0 * x2)
        J[0, 2] = c * (3.0 * x1 - d * v0 * x3)
        J[1, 0] = c * (-d * v1 * x1)
        J[1, 1] = c * (3.0 * x3 - d * v1 * x2)
        J[1, 2] = c * (3.0 * x2 - d * v1 * x3)
        J[2, 0] = c * (-2.0 * x1 - d * v2 * x1)
        J[2, 1] = c * (-2.0 * x2 - d * v2 * x2)
        J[2, 2] = c * (4.0 * x3 - d * v2 * x3)
    else:
        B0 = p[0]
        R0 = p[1]
        q = p[2]
        R2 = x1 * x1 + x2 * x2
        if not R2 > 0.0:
            return DOMAIN
        R = math.sqrt(R2)
        qR0 = q * R0
        w0 = -x1 * x3 - qR0 * x2
        w1 = -x2 * x3 + qR0 * x1
        w2 = R * (R - R0)
        c = B0 / (q * R2)
        B[0] = c * w0
        B[1] = c * w1
        B[2] = c * w2
        e = 2.0 / R2
        g = 2.0 - R0 / R
        J[0, 0] = c * (-x3 - e * w0 * x1)
        J[0, 1] = c * (-qR0 - e * w0 * x2)
        J[0, 2] = c * (-x1)
        J[1, 0] = c * (qR0 - e * w1 * x1)
        J[1, 1] = c * (-x3 - e * w1 * x2)
        J[1, 2] = c * (-x2)
        J[2, 0] = c * (g * x1 - e * w2 * x1)
        J[2, 1] = c * (g * x2 - e * w2 * x2)
        J[2, 2] = 0.0
    return OK


@njit(cache=True)
def gyro_S(kind, p, mu, Y, out):
    """Fill out[m] = S(Y[m]); return the index of the first failing node and its status."""
    B = np.empty(3)
    J = np.empty((3, 3))
    for m in range(Y.shape[0]):
        x1 = Y[m, 0]
        x2 = Y[m, 1]
        x3 = Y[m, 2]
        u = Y[m, 3]
        st = _field(kind, p, x1, x2, x3, B, J)
        if st != OK:
            return m, st
        nB = math.sqrt(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])
        b0 = B[0] / nB
        b1 = B[1] / nB
        b2 = B[2] / nB
        # grad|B| = J^T b
        g0 = J[0, 0] * b0 + J[1, 0] * b1 + J[2, 0] * b2
        g1 = J[0, 1] * b0 + J[1, 1] * b1 + J[2, 1] * b2
        g2 = J[0, 2] * b0 + J[1, 2] * b1 + J[2, 2] * b2
        cB0 = J[2, 1] - J[1, 2]
        cB1 = J[0, 2] - J[2, 0]
        cB2 = J[1, 0] - J[0, 1]
        n2 = nB * nB
        cb0 = cB0 / nB - (g1 * B[2] - g2 * B[1]) / n2
        cb1 = cB1 / nB - (g2 * B[0] - g0 * B[2]) / n2
        cb2 = cB2 / nB - (g0 * B[1] - g1 * B[0]) / n2
        a0 = B[0] + u * cb0
        a1 = B[1] + u * cb1
        a2 = B[2] + u * cb2
        ba = abs(b0 * a0 + b1 * a1 + b2 * a2)
        if not ba >= 1e-300:
            return m, SINGULAR
        inv = 1.0 / ba
        out[m, 0, 0] = 0.0
        out[m, 0, 1] = -b2 * inv
        out[m, 0, 2] = b1 * inv
        out[m, 0, 3] = a0 * inv
        out[m, 1, 0] = b2 * inv
        out[m, 1, 1] = 0.0
        out[m, 1, 2] = -b0 * inv
        out[m, 1, 3] = a1 * inv
        out[m, 2, 0] = -b1 * inv
        out[m, 2, 1] = b0 * inv
        out[m, 2, 2] = 0.0
        out[m, 2, 3] = a2 * inv
        out[m, 3, 0] = -a0 * inv
        out[m, 3, 1] = -a1 * inv
        out[m, 3, 2] = -a2 * inv
        out[m, 3, 3] = 0.0
    return -1, OK


@njit(cache=True)
def gyro_grad_H(kind, p, mu, G, Y, out):
    """Fill out[m] = grad H(Y[m]) for phi = x^T diag(G) x / 2."""
    B = np.empty(3)
    J = np.empty((3, 3))
    for m in range(Y.shape[0]):
        x1 = Y[m, 0]
        x2 = Y[m, 1]
        x3 = Y[m, 2]
        st = _field(kind, p, x1, x2, x3, B, J)
        if st != OK:
            return m, st
        nB = math.sqrt(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])
        b0 = B[0] / nB
        b1 = B[1] / nB
        b2 = B[2] / nB
        out[m, 0] = mu * (J[0, 0] * b0 + J[1, 0] * b1 + J[2, 0] * b2) + G[0] * x1
        out[m, 1] = mu * (J[0, 1] * b0 + J[1, 1] * b1 + J[2, 1] * b2) + G[1] * x2
        out[m, 2] = mu * (J[0, 2] * b0 + J[1, 2] * b1 + J[2, 2] * b2) + G[2] * x3
        out[m, 3] = Y[m, 3]
    return -1, OK
