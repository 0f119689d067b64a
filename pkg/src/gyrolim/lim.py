"""One step of the line integral method LIM(k1, k2, s).

The unknowns are the s Legendre coefficients Gamma_0..Gamma_{s-1} of the
derivative of the local polynomial u, stored as an (s, n) array. The
polynomial is

    u(c h) = y0 + h * sum_i (int_0^c P_i) Gamma_i,

so y1 = u(h) = y0 + h Gamma_0.
"""

from dataclasses import dataclass

import numpy as np

from .legendre import legendre_integral_table
from .poisson import ModelDomainError, matvec


@dataclass
class StepResult:
    y1: np.ndarray
    stages: np.ndarray
    iterations: int
    residual_norm: float
    energy_drift: float


def stage_states(tableau, y0, h, gammas):
    """Polynomial values at the k1 nodes c_hat*h and at the k2 nodes c*h."""
    y0 = np.asarray(y0, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    return y0 + h * (tableau.I_hat @ gammas), y0 + h * (tableau.I @ gammas)


def _node_eval(fn, states, kind):
    try:
        return fn(states)
    except ModelDomainError as exc:
        if exc.index is not None or exc.state is None:
            raise
        matches = np.flatnonzero(np.all(np.atleast_2d(states) == exc.state, axis=-1))
        idx = int(matches[0]) if len(matches) else None
        raise type(exc)(f"{kind} evaluation failed", state=exc.state, index=idx) from exc


def fixed_point_map(tableau, sys, y0, h, gammas):
    """The right-hand side rho_hat(Gamma) gamma_hat(Gamma) of the discrete problem.

    S is evaluated at the k1 nodes and grad H at the k2 nodes; grad H is
    projected on P_0..P_{s-1}, interpolated back to the k1 nodes, multiplied by
    S there, and projected again. The (s n) x (s n) matrix is never formed.
    """
    states_hat, states = stage_states(tableau, y0, h, gammas)
    S_nodes = _node_eval(sys.S_batch, states_hat, "S")            # (k1, n, n)
    g_nodes = _node_eval(sys.grad_H_batch, states, "grad H")     # (k2, n)
    gamma_hat = tableau.PtOmega @ g_nodes                         # (s, n)
    g_interp = tableau.P_hat @ gamma_hat                          # (k1, n)
    return tableau.PtOmega_hat @ matvec(S_nodes, g_interp)        # (s, n)


def residual(tableau, sys, y0, h, gammas):
    """G(Gamma) = Gamma - rho_hat(Gamma) gamma_hat(Gamma), shape (s, n)."""
    gammas = np.asarray(gammas, dtype=float)
    return gammas - fixed_point_map(tableau, sys, y0, h, gammas)


def advance(tableau, sys, y0, h, gammas, iterations=0, residual_norm=0.0):
    y0 = np.asarray(y0, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    y1 = y0 + h * gammas[0]
    drift = sys.energy(y1) - sys.energy(y0)
    return StepResult(y1=y1, stages=gammas, iterations=iterations,
                      residual_norm=residual_norm, energy_drift=drift)


def dense_output(tableau, y0, h, gammas, c):
    """u(c h) for c in [0, 1] (scalar or array of c values)."""
    gammas = np.asarray(gammas, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.ndim == 0 and c == 1.0:
        # int_0^1 P_i = delta_i0 exactly
        return np.asarray(y0, dtype=float) + h * gammas[0]
    weights = legendre_integral_table(tableau.s - 1, c)
    return np.asarray(y0, dtype=float) + h * (weights @ gammas)
