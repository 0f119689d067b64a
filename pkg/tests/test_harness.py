import math

import numpy as np
import pytest

from gyrolim.harness import (DEFAULT_H_GRID, PROBLEMS, StepFailed, convergence_table,
                             get_problem, hamiltonian_error_table, integrate,
                             solver_robustness_table, spectral_run, steps_for)
from gyrolim.legendre import build_tableau
from gyrolim.lim import advance
from gyrolim.poisson import ModelDomainError
from gyrolim.solvers import SolverConfig, solve
from systems import rigid_body


@pytest.fixture(scope="module")
def dipole():
    return get_problem("dipole")


def test_problem_registry():
    for name in PROBLEMS:
        p = get_problem(name)
        assert p.name == name and len(p.y0) == 4
        assert np.isfinite(p.system.energy(np.array(p.y0)))
    with pytest.raises(ValueError):
        get_problem("stellarator")


def test_steps_for():
    assert steps_for(100, 40) == 3
    assert steps_for(100, 0.1) == 1000
    assert steps_for(1e3, 0.4) == 2500
    assert steps_for(5, 0) == 0


def test_single_step_matches_advance(dipole):
    t = build_tableau(2, 4, 2)
    cfg = SolverConfig(tol=1e-14)
    rec = integrate(dipole.system, dipole.y0, 0.4, 1, t, cfg, compensated=False)
    out = solve(t, dipole.system, np.array(dipole.y0), 0.4, cfg)
    step = advance(t, dipole.system, dipole.y0, 0.4, out.gammas, out.iterations)
    assert np.array_equal(rec.final_state, step.y1)
    assert rec.iterations[0] == step.iterations


def test_sampling_and_record(dipole):
    rec = integrate(dipole.system, dipole.y0, 0.4, 10, (1, 3, 1), sample_every=4)
    assert np.allclose(rec.times, [0, 1.6, 3.2, 4.0])
    assert rec.states.shape == (4, 4) and rec.n_steps == 10
    assert rec.energy_drift[0] == 0.0
    assert rec.max_abs_drift >= np.max(np.abs(rec.energy_drift))
    assert rec.solver_stats["total_iterations"] == rec.total_iterations > 0


def test_zero_steps(dipole):
    rec = integrate(dipole.system, dipole.y0, 0.4, 0, (1, 1, 1))
    assert rec.states.shape == (1, 4) and rec.n_steps == 0 and rec.max_abs_drift == 0
    with pytest.raises(ValueError):
        integrate(dipole.system, dipole.y0, 0.4, -1, (1, 1, 1))


def test_compensated_close_to_plain(dipole):
    a = integrate(dipole.system, dipole.y0, 0.4, 50, (2, 2, 8), SolverConfig(tol=1e-15))
    b = integrate(dipole.system, dipole.y0, 0.4, 50, (2, 2, 8), SolverConfig(tol=1e-15),
                  compensated=False)
    assert np.max(np.abs(a.states - b.states)) < 1e-11


def test_step_failure_carries_partial_record(dipole):
    cfg = SolverConfig(max_iters=2)
    with pytest.raises(StepFailed) as err:
        integrate(dipole.system, dipole.y0, 0.4, 5, (1, 1, 7), cfg)
    assert err.value.step == 1 and err.value.record.states.shape == (1, 4)


def test_domain_error_becomes_step_failure():
    sys = rigid_body(np.array([1.0, 2.0, 3.0]))

    def bad_S(y):
        if y[2] < -0.5:
            raise ModelDomainError("z below -0.5", y)
        return sys.S(y)

    from gyrolim.poisson import PoissonSystem
    bad = PoissonSystem(3, bad_S, sys.grad_H, sys.H)
    with pytest.raises(StepFailed) as err:
        integrate(bad, (1.0, 1.0, 0.0), 0.2, 200, (1, 1, 1))
    assert isinstance(err.value.cause, ModelDomainError)
    assert err.value.step > 1
    assert err.value.record.n_steps == err.value.step - 1


def test_deterministic(dipole):
    a = integrate(dipole.system, dipole.y0, 0.4, 30, (2, 5, 2))
    b = integrate(dipole.system, dipole.y0, 0.4, 30, (2, 5, 2))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.energy_drift, b.energy_drift)


def test_energy_table_structure(dipole):
    rep = hamiltonian_error_table(dipole, 0.4, (0, 4), [1, 2, 3], [1, 2, 5])
    assert len(rep.cells) == 9
    assert rep.cell(s=3, k=1).status == "n/a" and rep.cell(s=2, k=1).status == "n/a"
    c = rep.cell(s=1, k=5)
    assert c.status == "ok" and 0 < c.max_energy_drift < rep.cell(s=1, k=1).max_energy_drift
    assert len(rep.select(k=5)) == 3


def test_energy_table_zero_step(dipole):
    rep = hamiltonian_error_table(dipole, 0.0, (0, 1), [1, 2], [2])
    assert all(c.max_energy_drift == 0.0 for c in rep.cells)


def test_energy_table_reports_failures(dipole):
    rep = hamiltonian_error_table(dipole, 0.4, (0, 4), [1], [7], SolverConfig(max_iters=2))
    assert rep.cell(s=1, k=7).status == "***"


def test_energy_table_rejects_bad_interval(dipole):
    with pytest.raises(ValueError):
        hamiltonian_error_table(dipole, 0.4, (4, 0), [1], [1])


def test_convergence_self_reference_is_zero(dipole):
    rep = convergence_table(dipole, 0.4, 1, (0, 2), [(2, 4, 2)], reference=((2, 4, 2), 0.4))
    assert rep.cell(h=0.4).final_error == 0.0


def test_convergence_rate_second_order(dipole):
    rep = convergence_table(dipole, 0.4, 3, (0, 4), [(1, 1, 7)],
                            reference=((3, 3, 9), 0.4 / 32))
    rates = [c.empirical_rate for c in rep.cells]
    assert rates[0] is None
    assert rates[-1] == pytest.approx(2.0, abs=0.15)


def test_convergence_validates_grid(dipole):
    with pytest.raises(ValueError):
        convergence_table(dipole, 0.3, 1, (0, 1), [(1, 1, 1)])
    with pytest.raises(ValueError):
        convergence_table(dipole, 0.4, 1, (0, 4), [(1, 1, 1)], reference=((1, 1, 1), 0.3))


def test_spectral_run_small():
    rep = spectral_run("tokamak_transit", 8e3, (0, 8e4), [11, 13], 20)
    e11, e13 = (rep.cell(s=s).final_error for s in (11, 13))
    assert rep.meta["s_ref"] == 15
    assert e13 < e11
    with pytest.raises(ValueError):
        spectral_run("tokamak_transit", 8e3, (0, 8e4), [14], 15)


def test_spectral_run_marks_failures():
    rep = spectral_run("tokamak_transit", 8e3, (0, 1.6e4), [3], 20, s_ref=12)
    assert rep.cell(s=3).status == "***"


def test_robustness_below_grid_minimum():
    rep = solver_robustness_table("dipole_electric", (0, 1), [(1, 1, 7)], ["fixed_point"],
                                  grid=[1.0, 2.0])
    c = rep.cells[0]
    assert c.status == "below grid minimum" and c.h_max is None


def test_robustness_bisection_finds_threshold():
    grid = [1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2, 3.2e-2, 6.4e-2]
    rep = solver_robustness_table("dipole_electric", (0, 0.5), [(1, 1, 7)], ["fp"], grid=grid)
    c = rep.cells[0]
    assert c.status == "ok" and c.params["solver"] == "fixed_point"
    h = c.h_max
    assert h in grid
    prob = get_problem("dipole_electric")
    cfg = SolverConfig()
    integrate(prob.system, prob.y0, h, steps_for(0.5, h), (1, 1, 7), cfg)
    if h != grid[-1]:
        nxt = grid[grid.index(h) + 1]
        with pytest.raises(StepFailed):
            integrate(prob.system, prob.y0, nxt, steps_for(0.5, nxt), (1, 1, 7), cfg)


def test_default_grid():
    assert DEFAULT_H_GRID[0] == 0.0025 and len(DEFAULT_H_GRID) == 17
    assert all(math.isclose(b / a, 2) for a, b in zip(DEFAULT_H_GRID, DEFAULT_H_GRID[1:]))
