"""Nonlinear solvers for the LIM stage equations G(Gamma) = 0.

All three start from Gamma = 0 unless a guess is passed, and stop on the
relative test ||dGamma||_inf <= tol * (1 + ||Gamma||_inf). Tolerances at or
below one ulp mean "iterate to round-off": an increment within 64 ulps that
no longer decreases is then accepted as converged.
"""

import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import linalg

from .lim import fixed_point_map
from .poisson import eval_f, jacobian_f

SOLVER_KINDS = ("fixed_point", "simplified_newton", "blended")
_ALIASES = {"fp": "fixed_point", "fixed-point": "fixed_point", "newton": "simplified_newton",
            "simplified-newton": "simplified_newton", "blend": "blended"}


def solver_kind(name):
    kind = _ALIASES.get(name, name)
    if kind not in SOLVER_KINDS:
        raise ValueError(f"unknown solver {name!r}; expected one of {SOLVER_KINDS} or fp/newton")
    return kind


@dataclass(frozen=True)
class SolverConfig:
    kind: str = "fixed_point"
    tol: float = 1e-12
    max_iters: int = 100
    divergence_factor: float = 1e4
    # start from the previous step's coefficients instead of zero
    warm_start: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", solver_kind(self.kind))
        problems = []
        if not self.tol > 0:
            problems.append("tol must be positive")
        if int(self.max_iters) < 1:
            problems.append("max_iters must be >= 1")
        if not self.divergence_factor > 1:
            problems.append("divergence_factor must be > 1")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class SolveOutcome:
    gammas: np.ndarray
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)

    @property
    def final_update(self):
        return self.history[-1] if self.history else 0.0


class SolverError(RuntimeError):
    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class NonConvergence(SolverError):
    pass


class Divergence(SolverError):
    pass


class SingularMatrix(SolverError):
    pass


EPS = np.finfo(float).eps
# tolerances below one ulp can never be met by the increment test
TOL_FLOOR = EPS
# below this (relative) level an increment that stops decreasing is round-off noise
STALL_LEVEL = 64 * EPS


def effective_tol(tol):
    return max(tol, TOL_FLOOR)


def _factor(A, what):
    # singularity is reported through SingularMatrix, not a warning
    try:
        with warnings.catch_warnings(), np.errstate(all="raise"):
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu = linalg.lu_factor(A, check_finite=True)
    except (linalg.LinAlgError, ValueError, FloatingPointError) as exc:
        raise SingularMatrix(f"{what} matrix factorization failed: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) == 0):
        raise SingularMatrix(f"{what} matrix is singular")
    return lu


def _norm(a):
    return float(np.max(np.abs(a))) if a.size else 0.0


class _Monitor:
    """Shared convergence / divergence bookkeeping."""

    def __init__(self, cfg, name):
        self.cfg = cfg
        self.name = name
        self.tol = effective_tol(cfg.tol)
        self.history = []

    def check(self, update_norm, gammas):
        """Record an update norm; return True once converged."""
        self.history.append(update_norm)
        if not np.isfinite(update_norm) or not np.all(np.isfinite(gammas)):
            raise Divergence(f"{self.name}: non-finite iterate", self._outcome(gammas, False))
        scale = 1.0 + _norm(gammas)
        if update_norm <= self.tol * scale:
            return True
        h = self.history
        if update_norm <= STALL_LEVEL * scale and len(h) >= 3 and update_norm >= max(h[-3], h[-2]):
            return True
        if update_norm > self.cfg.divergence_factor * max(self.history[0], np.finfo(float).tiny):
            raise Divergence(
                f"{self.name}: update norm grew to {update_norm:.3e} "
                f"(initial {self.history[0]:.3e}); reduce the stepsize",
                self._outcome(gammas, False))
        return False

    def fail(self, gammas):
        raise NonConvergence(
            f"{self.name}: no convergence in {self.cfg.max_iters} iterations "
            f"(last update {self.history[-1]:.3e})",
            self._outcome(gammas, False))

    def _outcome(self, gammas, converged):
        return SolveOutcome(gammas=gammas, iterations=len(self.history),
                            converged=converged, history=list(self.history))


def _initial(tableau, sys, guess):
    if guess is None:
        return np.zeros((tableau.s, sys.dim))
    return np.array(guess, dtype=float).reshape(tableau.s, sys.dim)


def solve_fixed_point(tableau, sys, y0, h, cfg, guess=None):
    """Gamma <- rho_hat(Gamma) gamma_hat(Gamma)."""
    y0 = np.asarray(y0, dtype=float)
    gammas = _initial(tableau, sys, guess)
    mon = _Monitor(cfg, "fixed-point")
    for it in range(1, cfg.max_iters + 1):
        new = fixed_point_map(tableau, sys, y0, h, gammas)
        done = mon.check(_norm(new - gammas), new)
        gammas = new
        if done:
            return SolveOutcome(gammas, it, True, mon.history)
    mon.fail(gammas)


def _newton_like(tableau, sys, y0, h, cfg, guess, apply_correction, name):
    # Newton-type loop: the residual is evaluated once per iteration; a small
    # residual after an update is accepted without another linear solve.
    y0 = np.asarray(y0, dtype=float)
    gammas = _initial(tableau, sys, guess)
    mon = _Monitor(cfg, name)
    eta = fixed_point_map(tableau, sys, y0, h, gammas) - gammas
    for it in range(1, cfg.max_iters + 1):
        delta = apply_correction(eta)
        gammas = gammas + delta
        if mon.check(_norm(delta), gammas):
            return SolveOutcome(gammas, it, True, mon.history)
        eta = fixed_point_map(tableau, sys, y0, h, gammas) - gammas
        res = _norm(eta)
        if res <= mon.tol * (1.0 + _norm(gammas)):
            mon.history.append(res)
            return SolveOutcome(gammas, it, True, mon.history)
    mon.fail(gammas)


def solve_simplified_newton(tableau, sys, y0, h, cfg, guess=None):
    """[I - h X_s (x) f'(y0)] Delta = -G(Gamma), with one (s n)-sized LU per step."""
    n, s = sys.dim, tableau.s
    J = jacobian_f(sys, y0)
    lu = _factor(np.eye(s * n) - h * np.kron(tableau.X_s, J), "simplified Newton")

    def correction(eta):
        return linalg.lu_solve(lu, eta.reshape(-1)).reshape(s, n)

    return _newton_like(tableau, sys, y0, h, cfg, guess, correction, "simplified Newton")


def solve_blended(tableau, sys, y0, h, cfg, guess=None):
    """Blended iteration: only I - h rho_s f'(y0) (n x n) is factored.

    With eta = -G(Gamma) and eta1 = (rho_s X_s^{-1} (x) I) eta the update is

        Gamma <- Gamma + (I (x) Theta) [eta1 + (I (x) Theta)(eta - eta1)],

    Theta = (I - h rho_s f'(y0))^{-1}. At h = 0 this is the exact Newton step,
    and for s = 1 it coincides with simplified Newton.
    """
    n = sys.dim
    J = jacobian_f(sys, y0)
    rho = tableau.rho_s
    lu = _factor(np.eye(n) - h * rho * J, "blended iteration")
    R = rho * tableau.X_s_inv

    def theta(v):
        # Theta applied to every block row of v, shape (s, n)
        return linalg.lu_solve(lu, v.T).T

    def correction(eta):
        eta1 = R @ eta
        return theta(eta1 + theta(eta - eta1))

    return _newton_like(tableau, sys, y0, h, cfg, guess, correction, "blended")


_DISPATCH = {
    "fixed_point": solve_fixed_point,
    "simplified_newton": solve_simplified_newton,
    "blended": solve_blended,
}


def solve(tableau, sys, y0, h, cfg, guess=None):
    return _DISPATCH[cfg.kind](tableau, sys, y0, h, cfg, guess)


def first_iterate(sys, y0, s):
    """Gamma^1 = e_1 (x) f(y0), the first fixed-point iterate from zero."""
    out = np.zeros((s, len(y0)))
    out[0] = eval_f(sys, y0)
    return out
