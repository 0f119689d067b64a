"""Multistep driver and the experiment generators (energy, convergence,
spectral and solver-robustness tables).

Every generator returns a ``SweepReport`` whose cells carry a status string
instead of raising, so one failing configuration never aborts a sweep.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gyrocenter import (BANANA_Y0, DIPOLE_ELECTRIC_Y0, DIPOLE_Y0, TRANSIT_Y0,
                         dipole_electric_model, dipole_model, tokamak_model)
from .legendre import MethodTableau, build_tableau
from .poisson import ModelDomainError
from .solvers import Divergence, SingularMatrix, SolverConfig, SolverError, solve


@dataclass(frozen=True)
class Problem:
    """A Poisson system together with its initial state."""

    name: str
    system: object
    y0: tuple
    model: object = None


def _make(name, model, y0):
    return Problem(name, model.as_poisson_system(), tuple(float(v) for v in y0), model)


PROBLEMS = {
    "dipole": lambda: _make("dipole", dipole_model(), DIPOLE_Y0),
    "tokamak_transit": lambda: _make("tokamak_transit", tokamak_model(), TRANSIT_Y0),
    "tokamak_banana": lambda: _make("tokamak_banana", tokamak_model(), BANANA_Y0),
    "dipole_electric": lambda: _make("dipole_electric", dipole_electric_model(), DIPOLE_ELECTRIC_Y0),
}


def get_problem(problem):
    if isinstance(problem, Problem):
        return problem
    try:
        return PROBLEMS[problem]()
    except KeyError:
        raise ValueError(f"unknown problem {problem!r}; expected one of {sorted(PROBLEMS)}") from None


# Solver settings of the reference experiments. Energy and accuracy studies
# iterate to round-off; the robustness study keeps the default tolerance.
ENERGY_SOLVER = SolverConfig(tol=1e-16, max_iters=200)
SPECTRAL_SOLVER = SolverConfig(tol=1e-16, max_iters=500)
ROBUSTNESS_SOLVER = SolverConfig(tol=1e-12, max_iters=100)


class StepFailed(RuntimeError):
    """A step of ``integrate`` failed; ``record`` holds the samples up to it."""

    def __init__(self, step, cause, record=None):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause
        self.record = record


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    energy_drift: np.ndarray
    iterations: np.ndarray          # per step
    wall_time: float
    h: float
    max_abs_drift: float = 0.0      # over every step, not only samples

    @property
    def n_steps(self):
        return len(self.iterations)

    @property
    def total_iterations(self):
        return int(np.sum(self.iterations))

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def solver_stats(self):
        n = self.n_steps
        return {
            "total_iterations": self.total_iterations,
            "max_iterations": int(np.max(self.iterations)) if n else 0,
            "mean_iterations": float(np.mean(self.iterations)) if n else 0.0,
        }


def _as_tableau(method):
    if isinstance(method, MethodTableau):
        return method
    return build_tableau(*method)


def integrate(sys, y0, h, n_steps, tableau, solver_cfg=None, sample_every=1,
              compensated=True, t0=0.0):
    """Apply ``n_steps`` LIM steps of size h starting from y0.

    States are sampled at step 0, every ``sample_every`` steps, and at the
    last step. With ``compensated`` the update y + h*Gamma_0 is accumulated
    with Kahan summation. Raises StepFailed with the failing step index
    (1-based) on solver or model errors.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    tableau = _as_tableau(tableau)
    cfg = solver_cfg if solver_cfg is not None else SolverConfig()
    y = np.array(y0, dtype=float)
    H0 = sys.energy(y)
    comp = np.zeros_like(y)
    times, states, drifts = [t0], [y.copy()], [0.0]
    iters = np.zeros(n_steps, dtype=np.int64)
    max_drift = 0.0
    guess = None
    start = time.perf_counter()

    def record(done):
        return TrajectoryRecord(np.array(times), np.array(states), np.array(drifts),
                                iters[:done], time.perf_counter() - start, h, max_drift)

    for n in range(1, n_steps + 1):
        try:
            out = solve(tableau, sys, y, h, cfg, guess)
        except (SolverError, ModelDomainError) as exc:
            raise StepFailed(n, exc, record(n - 1)) from exc
        iters[n - 1] = out.iterations
        if cfg.warm_start:
            guess = out.gammas
        if compensated:
            inc = h * out.gammas[0] - comp
            t = y + inc
            comp = (t - y) - inc
            y = t
        else:
            y = y + h * out.gammas[0]
        drift = sys.energy(y) - H0
        max_drift = max(max_drift, abs(drift))
        if n % sample_every == 0 or n == n_steps:
            times.append(t0 + n * h)
            states.append(y.copy())
            drifts.append(drift)
    return record(n_steps)


def steps_for(length, h):
    """Smallest n with n*h covering ``length`` (exact multiples are not rounded up)."""
    if h == 0:
        return 0
    return int(math.ceil(length / abs(h) * (1.0 - 1e-12)))


def _status(exc):
    cause = exc.cause if isinstance(exc, StepFailed) else exc
    if isinstance(cause, Divergence):
        return "diverged"
    if isinstance(cause, SingularMatrix):
        return "singular"
    if isinstance(cause, SolverError):
        return "***"
    return "domain"


@dataclass
class SweepCell:
    params: dict
    status: str = "ok"
    max_energy_drift: Optional[float] = None
    final_error: Optional[float] = None
    empirical_rate: Optional[float] = None
    iterations: Optional[int] = None
    wall_time: float = 0.0
    h_max: Optional[float] = None
    detail: str = ""


@dataclass
class SweepReport:
    table: str
    axes: dict
    cells: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def cell(self, **params):
        for c in self.cells:
            if all(c.params.get(k) == v for k, v in params.items()):
                return c
        raise KeyError(params)

    def select(self, **params):
        return [c for c in self.cells if all(c.params.get(k) == v for k, v in params.items())]


def _interval_length(interval):
    a, b = interval
    if not b > a:
        raise ValueError("interval must satisfy t0 < t1")
    return b - a


def hamiltonian_error_table(problem, h, interval, s_list, k_list, solver_cfg=None):
    """Max |H(y_n) - H(y_0)| of LIM(s, k, s) for every (s, k) pair with k >= s."""
    prob = get_problem(problem)
    cfg = solver_cfg or ENERGY_SOLVER
    n_steps = steps_for(_interval_length(interval), h)
    report = SweepReport("energy", {"s": list(s_list), "k": list(k_list)},
                         meta={"problem": prob.name, "h": h, "interval": list(interval),
                               "n_steps": n_steps})
    for k in k_list:
        for s in s_list:
            cell = SweepCell({"s": s, "k": k})
            report.cells.append(cell)
            if k < s:
                cell.status = "n/a"
                continue
            try:
                rec = integrate(prob.system, prob.y0, h, n_steps, (s, s, k), cfg,
                                sample_every=max(n_steps, 1), t0=interval[0])
            except StepFailed as exc:
                cell.status, cell.detail = _status(exc), str(exc)
                cell.wall_time = exc.record.wall_time if exc.record else 0.0
                continue
            cell.max_energy_drift = rec.max_abs_drift
            cell.iterations = rec.total_iterations
            cell.wall_time = rec.wall_time
    return report


def convergence_table(problem, base_h, halvings, interval, methods, reference=None,
                      solver_cfg=None):
    """Global error of each method at h = base_h / 2^i, i = 0..halvings.

    The error is the max over times that are multiples of base_h of the
    infinity-norm difference to ``reference``, given as ((s, k1, k2), h_ref);
    by default (5, 5, 9) at base_h / 2^(halvings+2). ``empirical_rate`` of
    row i is log2(err(h_{i-1}) / err(h_i)).
    """
    prob = get_problem(problem)
    cfg = solver_cfg or ENERGY_SOLVER
    length = _interval_length(interval)
    n_base = int(round(length / base_h))
    if not math.isclose(n_base * base_h, length, rel_tol=1e-12):
        raise ValueError("interval length must be a multiple of base_h")
    if reference is None:
        reference = ((5, 5, 9), base_h / 2 ** (halvings + 2))
    ref_method, ref_h = reference
    ref_ratio = int(round(base_h / ref_h))
    if ref_ratio < 1 or not math.isclose(ref_ratio * ref_h, base_h, rel_tol=1e-12):
        raise ValueError("base_h must be an integer multiple of the reference step")

    ref = integrate(prob.system, prob.y0, ref_h, n_base * ref_ratio, ref_method, cfg,
                    sample_every=ref_ratio, t0=interval[0])
    hs = [base_h / 2 ** i for i in range(halvings + 1)]
    report = SweepReport("convergence", {"method": [tuple(m) for m in methods], "h": hs},
                         meta={"problem": prob.name, "interval": list(interval),
                               "reference": [list(ref_method), ref_h]})
    for m in methods:
        prev = None
        for i, h in enumerate(hs):
            cell = SweepCell({"s": m[0], "k1": m[1], "k2": m[2], "h": h})
            report.cells.append(cell)
            try:
                rec = integrate(prob.system, prob.y0, h, n_base * 2 ** i, m, cfg,
                                sample_every=2 ** i, t0=interval[0])
            except StepFailed as exc:
                cell.status, cell.detail = _status(exc), str(exc)
                prev = None
                continue
            err = float(np.max(np.abs(rec.states - ref.states)))
            cell.final_error = err
            cell.max_energy_drift = rec.max_abs_drift
            cell.iterations = rec.total_iterations
            cell.wall_time = rec.wall_time
            if prev is not None and prev > 0 and err > 0:
                cell.empirical_rate = math.log2(prev / err)
            prev = err
    return report


def spectral_run(problem, h, interval, s_list, k, solver_cfg=None, s_ref=None, y0=None):
    """LIM(s, k, s) at one large stepsize for each s, against LIM(s_ref, k, s_ref).

    Non-converging cells get status "***". The error is the max over all
    steps of the infinity-norm difference to the reference.
    """
    prob = get_problem(problem)
    start_state = prob.y0 if y0 is None else tuple(y0)
    cfg = solver_cfg or SPECTRAL_SOLVER
    n_steps = steps_for(_interval_length(interval), h)
    s_ref = s_ref if s_ref is not None else max(s_list) + 2
    if s_ref > k:
        raise ValueError(f"reference degree {s_ref} exceeds k={k}")
    ref = integrate(prob.system, start_state, h, n_steps, (s_ref, s_ref, k), cfg, t0=interval[0])
    report = SweepReport("spectral", {"s": list(s_list)},
                         meta={"problem": prob.name, "h": h, "k": k, "interval": list(interval),
                               "n_steps": n_steps, "s_ref": s_ref})
    for s in s_list:
        cell = SweepCell({"s": s, "k": k})
        report.cells.append(cell)
        try:
            rec = integrate(prob.system, start_state, h, n_steps, (s, s, k), cfg, t0=interval[0])
        except StepFailed as exc:
            cell.status, cell.detail = "***", str(exc)
            continue
        cell.final_error = float(np.max(np.abs(rec.states - ref.states)))
        cell.max_energy_drift = rec.max_abs_drift
        cell.iterations = rec.total_iterations
        cell.wall_time = rec.wall_time
    return report


DEFAULT_H_GRID = tuple(0.0025 * 2.0 ** j for j in range(17))


def _full_run_converges(prob, method, h, length, cfg):
    try:
        rec = integrate(prob.system, prob.y0, h, steps_for(length, h), method, cfg,
                        sample_every=max(steps_for(length, h), 1))
    except StepFailed:
        return None
    return rec


def solver_robustness_table(problem, interval, methods, solvers, grid=DEFAULT_H_GRID,
                            solver_cfg=None):
    """Largest h of ``grid`` at which each (method, solver) pair completes the run.

    The run covers the smallest interval containing ``interval`` that is a
    multiple of h. Convergence is assumed monotone in h, so the grid is
    bisected. A pair that fails at every grid point gets status
    "below grid minimum".
    """
    prob = get_problem(problem)
    base = solver_cfg or ROBUSTNESS_SOLVER
    length = _interval_length(interval)
    grid = sorted(grid)
    report = SweepReport("robustness", {"method": [tuple(m) for m in methods],
                                        "solver": list(solvers)},
                         meta={"problem": prob.name, "interval": list(interval), "grid": grid})
    for m in methods:
        for kind in solvers:
            cfg = SolverConfig(kind=kind, tol=base.tol, max_iters=base.max_iters,
                               divergence_factor=base.divergence_factor)
            cell = SweepCell({"s": m[0], "k1": m[1], "k2": m[2], "solver": cfg.kind})
            report.cells.append(cell)
            t = time.perf_counter()
            lo, hi, best = -1, len(grid), None
            while hi - lo > 1:
                mid = (lo + hi) // 2
                rec = _full_run_converges(prob, m, grid[mid], length, cfg)
                if rec is None:
                    hi = mid
                else:
                    lo, best = mid, rec
            cell.wall_time = time.perf_counter() - t
            if best is None:
                cell.status = "below grid minimum"
                continue
            cell.h_max = grid[lo]
            cell.iterations = best.total_iterations
            cell.max_energy_drift = best.max_abs_drift
    return report
