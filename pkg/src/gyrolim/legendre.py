"""Shifted orthonormal Legendre polynomials on [0, 1] and Gauss-Legendre tableaux.

All polynomials here are normalised so that ``int_0^1 P_i P_j = delta_ij``;
``P_j(1) = sqrt(2j + 1)``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class ParameterError(ValueError):
    """Invalid method parameters (e.g. k1 < s)."""


def _standard_legendre(n_max, x):
    """Standard Legendre values L_0..L_{n_max} at x in [-1, 1], shape (..., n_max + 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max >= 1:
        out[..., 1] = x
    for n in range(1, n_max):
        out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
    return out


def legendre_table(n_max, c):
    """Values P_0(c)..P_{n_max}(c), shape ``c.shape + (n_max + 1,)``."""
    L = _standard_legendre(n_max, 2.0 * np.asarray(c, dtype=float) - 1.0)
    return L * np.sqrt(2.0 * np.arange(n_max + 1) + 1.0)


def legendre_integral_table(n_max, c):
    """Primitives int_0^c P_j(x) dx for j = 0..n_max, shape ``c.shape + (n_max + 1,)``.

    Uses (2j+1) L_j = L'_{j+1} - L'_{j-1}, so that for j >= 1 the primitive is
    (L_{j+1} - L_{j-1}) / (2 sqrt(2j+1)) in the shifted variable.
    """
    c = np.asarray(c, dtype=float)
    L = _standard_legendre(n_max + 1, 2.0 * c - 1.0)
    out = np.empty(c.shape + (n_max + 1,))
    out[..., 0] = c
    j = np.arange(1, n_max + 1)
    out[..., 1:] = (L[..., 2:] - L[..., :-2]) / (2.0 * np.sqrt(2.0 * j + 1.0))
    return out


def legendre_eval(degree, c):
    """P_degree(c) for the orthonormal shifted Legendre basis."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    return legendre_table(degree, c)[..., degree]


def legendre_integral(degree, c):
    """int_0^c P_degree(x) dx, exact up to round-off."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    return legendre_integral_table(degree, c)[..., degree]


@dataclass(frozen=True)
class Quadrature:
    """k-point Gauss-Legendre rule on [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order_k(self):
        return len(self.nodes)

    def integrate(self, func):
        """Apply the rule to a vectorised callable of one variable."""
        return np.dot(self.weights, func(self.nodes))


def _gauss_legendre_standard(k):
    """Nodes/weights on [-1, 1] by Newton iteration on L_k."""
    i = np.arange(1, k + 1)
    # Chebyshev-type initial guesses; descending order in x
    x = np.cos(np.pi * (i - 0.25) / (k + 0.5))
    for _ in range(100):
        L = _standard_legendre(k, x)
        Lk, Lkm1 = L[..., k], L[..., k - 1]
        dL = k * (x * Lk - Lkm1) / (x * x - 1.0)
        dx = Lk / dL
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    L = _standard_legendre(k, x)
    Lk, Lkm1 = L[..., k], L[..., k - 1]
    if np.max(np.abs(Lk)) > 1e-14 * max(1.0, k):
        raise RuntimeError(f"Gauss-Legendre node iteration failed to converge for k={k}")
    dL = k * (x * Lk - Lkm1) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dL * dL)
    return x[::-1], w[::-1]


@lru_cache(maxsize=None)
def _gauss_legendre_cached(k):
    x, w = _gauss_legendre_standard(k)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    # enforce the exact symmetry of the rule about 1/2
    nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
    weights = 0.5 * (weights + weights[::-1])
    if k % 2 == 1:
        nodes[k // 2] = 0.5
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(k):
    """k-node Gauss-Legendre quadrature on [0, 1] (exact up to degree 2k - 1)."""
    k = int(k)
    if k < 1:
        raise ParameterError(f"number of quadrature nodes must be >= 1, got {k}")
    nodes, weights = _gauss_legendre_cached(k)
    return Quadrature(nodes=nodes, weights=weights)


def xi(i):
    """Sub-diagonal coefficient of the Legendre integration matrix."""
    if i == 0:
        return 0.5
    return 1.0 / (2.0 * np.sqrt(abs(4.0 * i * i - 1.0)))


def xs_matrix(s, xi_values=None):
    """The s x s matrix X_s with (1,1) entry xi_0 and +-xi_i off the diagonal.

    ``xi_values`` overrides the coefficients (length s); used by the self-test
    negative control.
    """
    if xi_values is None:
        xi_values = [xi(i) for i in range(s)]
    X = np.zeros((s, s))
    X[0, 0] = xi_values[0]
    for i in range(1, s):
        X[i, i - 1] = xi_values[i]
        X[i - 1, i] = -xi_values[i]
    return X


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MethodTableau:
    """Quadrature and Legendre matrices of LIM(k1, k2, s).

    Hatted quantities live on the k1-node rule (used for S), the others on
    the k2-node rule (used for grad H).
    """

    s: int
    k1: int
    k2: int
    c_hat: np.ndarray
    b_hat: np.ndarray
    P_hat: np.ndarray
    I_hat: np.ndarray
    c: np.ndarray
    b: np.ndarray
    P: np.ndarray
    I: np.ndarray
    X_s: np.ndarray
    X_s_inv: np.ndarray
    rho_s: float
    # derived contraction matrices used by the residual
    PtOmega_hat: np.ndarray = field(repr=False)
    PtOmega: np.ndarray = field(repr=False)

    @property
    def Omega_hat(self):
        return np.diag(self.b_hat)

    @property
    def Omega(self):
        return np.diag(self.b)


def build_tableau(s, k1=None, k2=None):
    """Tableau for LIM(k1, k2, s); k1 and k2 default to s. Cached per triple."""
    s = int(s)
    k1 = s if k1 is None else int(k1)
    k2 = s if k2 is None else int(k2)
    return _build_tableau(s, k1, k2)


@lru_cache(maxsize=None)
def _build_tableau(s, k1, k2):
    problems = []
    if s < 1:
        problems.append(f"s={s} must be >= 1")
    if k1 < s:
        problems.append(f"k1={k1} must be >= s={s}")
    if k2 < s:
        problems.append(f"k2={k2} must be >= s={s}")
    if problems:
        raise ParameterError("; ".join(problems))

    q_hat = gauss_legendre(k1)
    q = gauss_legendre(k2)
    P_hat = legendre_table(s - 1, q_hat.nodes)
    I_hat = legendre_integral_table(s - 1, q_hat.nodes)
    P = legendre_table(s - 1, q.nodes)
    I = legendre_integral_table(s - 1, q.nodes)
    X = xs_matrix(s)
    rho = float(np.min(np.abs(np.linalg.eigvals(X))))
    return MethodTableau(
        s=s, k1=k1, k2=k2,
        c_hat=q_hat.nodes, b_hat=q_hat.weights,
        P_hat=_readonly(P_hat), I_hat=_readonly(I_hat),
        c=q.nodes, b=q.weights,
        P=_readonly(P), I=_readonly(I),
        X_s=_readonly(X), X_s_inv=_readonly(np.linalg.inv(X)),
        rho_s=rho,
        PtOmega_hat=_readonly(P_hat.T * q_hat.weights),
        PtOmega=_readonly(P.T * q.weights),
    )
