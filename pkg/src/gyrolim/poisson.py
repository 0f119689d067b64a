"""Poisson systems y' = S(y) grad H(y) with S skew-symmetric."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class ModelDomainError(ValueError):
    """A field was evaluated outside the model's valid domain.

    ``state`` holds the offending state; ``index`` is set when the failure
    happened inside a batch (e.g. the quadrature node index within a step).
    """

    def __init__(self, message, state=None, index=None):
        self.state = None if state is None else np.array(state, dtype=float)
        self.index = index
        detail = message
        if index is not None:
            detail += f" (batch index {index})"
        if state is not None:
            detail += f" at state {np.array2string(self.state, precision=17)}"
        super().__init__(detail)


def matvec(A, v):
    """Batched A @ v with a fixed summation order (bitwise reproducible).

    A: (..., n, n), v: (..., n).
    """
    out = A[..., 0] * v[..., 0:1]
    for j in range(1, A.shape[-1]):
        out = out + A[..., j] * v[..., j:j + 1]
    return out


@dataclass(frozen=True)
class PoissonSystem:
    """Evaluable fields of y' = S(y) grad H(y).

    When ``vectorized`` is true, ``S``, ``grad_H`` and ``H`` accept stacks of
    states of shape (m, n) and return (m, n, n), (m, n) and (m,). Otherwise
    they are called one state at a time.
    """

    dim: int
    S: Callable
    grad_H: Callable
    H: Callable
    jacobian: Optional[Callable] = None
    vectorized: bool = False
    name: str = "custom"

    def S_batch(self, ys):
        ys = np.asarray(ys, dtype=float)
        if self.vectorized:
            return self.S(ys)
        return np.array([self.S(y) for y in ys]).reshape(len(ys), self.dim, self.dim)

    def grad_H_batch(self, ys):
        ys = np.asarray(ys, dtype=float)
        if self.vectorized:
            return self.grad_H(ys)
        return np.array([self.grad_H(y) for y in ys]).reshape(len(ys), self.dim)

    def H_batch(self, ys):
        ys = np.asarray(ys, dtype=float)
        if self.vectorized:
            return self.H(ys)
        return np.array([self.H(y) for y in ys], dtype=float)

    def energy(self, y):
        return float(self.H_batch(np.asarray(y, dtype=float)[None])[0])


def _check_dim(sys, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != sys.dim:
        raise ValueError(f"state dimension {y.shape[-1]} does not match system dimension {sys.dim}")
    return y


def eval_f_batch(sys, ys):
    """f(y) = S(y) grad H(y) for each row of ``ys``."""
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        return np.zeros((0, sys.dim))
    ys = _check_dim(sys, ys.reshape(-1, sys.dim))
    return matvec(sys.S_batch(ys), sys.grad_H_batch(ys))


def eval_f(sys, y):
    y = _check_dim(sys, y)
    return eval_f_batch(sys, y[None])[0]


def jacobian_f(sys, y):
    """Jacobian of f at y: the analytic one if supplied, else central differences."""
    y = _check_dim(sys, y)
    if sys.jacobian is not None:
        return np.asarray(sys.jacobian(y), dtype=float)
    n = sys.dim
    steps = np.sqrt(np.finfo(float).eps) * (1.0 + np.abs(y))
    probes = np.empty((2 * n, n))
    for j in range(n):
        probes[2 * j] = y
        probes[2 * j + 1] = y
        probes[2 * j, j] += steps[j]
        probes[2 * j + 1, j] -= steps[j]
    fs = eval_f_batch(sys, probes)
    # divide by the actually represented step
    dy = probes[0::2, :][np.arange(n), np.arange(n)] - probes[1::2, :][np.arange(n), np.arange(n)]
    return ((fs[0::2] - fs[1::2]) / dy[:, None]).T


def linear_system(M):
    """y' = M y written as a (degenerate) vectorised system; H is unused.

    Only ``f`` matters for solver tests, so S = M and grad H = y.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    return PoissonSystem(
        dim=n,
        S=lambda ys: np.broadcast_to(M, ys.shape[:-1] + (n, n)),
        grad_H=lambda ys: np.array(ys, dtype=float),
        H=lambda ys: 0.5 * np.sum(ys * ys, axis=-1),
        jacobian=lambda y: M,
        vectorized=True,
        name="linear",
    )
