import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gyrolim.gyrocenter import DIPOLE_Y0, dipole_model
from gyrolim.legendre import build_tableau, gauss_legendre
from gyrolim.lim import advance, dense_output, fixed_point_map, residual, stage_states
from gyrolim.poisson import ModelDomainError, PoissonSystem, eval_f
from gyrolim.solvers import SolverConfig, solve
from systems import naive_residual, random_skew_gradient, rigid_body

Y0 = np.array(DIPOLE_Y0)


@pytest.fixture(scope="module")
def dipole():
    return dipole_model().as_poisson_system()


def test_stage_states_trivial():
    t = build_tableau(2, 3, 4)
    g = np.arange(8.0).reshape(2, 4)
    uh, u = stage_states(t, Y0, 0.4, np.zeros((2, 4)))
    assert np.all(uh == Y0) and np.all(u == Y0) and uh.shape == (3, 4) and u.shape == (4, 4)
    uh, u = stage_states(t, Y0, 0.0, g)
    assert np.all(uh == Y0) and np.all(u == Y0)


def test_stage_states_s1_closed_form():
    t = build_tableau(1, 2, 5)
    g = np.array([[0.3, -0.1, 0.2, 1.0]])
    uh, u = stage_states(t, Y0, 0.4, g)
    c = gauss_legendre(5).nodes
    assert np.allclose(u, Y0 + 0.4 * c[:, None] * g, rtol=1e-15, atol=1e-16)


def test_residual_at_zero(dipole):
    t = build_tableau(3, 3, 5)
    G = residual(t, dipole, Y0, 0.4, np.zeros((3, 4)))
    assert np.allclose(G[0], -eval_f(dipole, Y0), rtol=1e-13, atol=1e-14)
    assert np.max(np.abs(G[1:])) <= 1e-13 * np.max(np.abs(G[0]))


def test_residual_without_gradient():
    sys = PoissonSystem(dim=2, S=lambda y: np.array([[0.0, 1.0], [-1.0, 0.0]]),
                        grad_H=lambda y: np.zeros(2), H=lambda y: 0.0)
    g = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(residual(build_tableau(2, 2, 3), sys, np.ones(2), 0.3, g), g)


def test_residual_matches_naive_oracle_on_dipole(dipole):
    g = np.array([[0.2, -0.4, 0.1, 0.7]])
    ours = residual(build_tableau(1, 1, 1), dipole, Y0, 0.4, g)
    ref = naive_residual(1, 1, 1, dipole_model().as_poisson_system(compiled=False), Y0, 0.4, g)
    assert np.allclose(ours, ref, rtol=1e-13, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(0, 2), st.integers(0, 2))
def test_residual_matches_naive_oracle(seed, s, dk1, dk2):
    rng = np.random.default_rng(seed)
    sys = random_skew_gradient(rng)
    k1, k2 = s + dk1, s + dk2
    y0, g = rng.normal(size=4), rng.normal(size=(s, 4))
    h = rng.uniform(-1, 1)
    ours = residual(build_tableau(s, k1, k2), sys, y0, h, g)
    ref = naive_residual(s, k1, k2, sys, y0, h, g)
    assert np.max(np.abs(ours - ref)) <= 1e-13 * max(1.0, np.max(np.abs(ref)))


def test_domain_error_carries_node_index():
    # x3 crosses 0 on the way to the origin: S is undefined at one node only
    sys = dipole_model().as_poisson_system()
    t = build_tableau(1, 1, 1)
    y0 = np.array([-1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ModelDomainError) as err:
        fixed_point_map(t, sys, y0, 2.0, np.array([[1.0, 0.0, 0.0, 0.0]]))
    assert err.value.index == 0


def test_advance_and_dense_output(dipole):
    t = build_tableau(2, 2, 4)
    out = solve(t, dipole, Y0, 0.4, SolverConfig(tol=1e-15))
    step = advance(t, dipole, Y0, 0.4, out.gammas, out.iterations)
    assert np.array_equal(step.y1, Y0 + 0.4 * out.gammas[0])
    assert np.array_equal(dense_output(t, Y0, 0.4, out.gammas, 1.0), step.y1)
    assert np.array_equal(dense_output(t, Y0, 0.4, out.gammas, 0.0), Y0)
    _, u = stage_states(t, Y0, 0.4, out.gammas)
    assert np.allclose(dense_output(t, Y0, 0.4, out.gammas, gauss_legendre(4).nodes), u,
                       rtol=1e-15, atol=1e-15)
    assert step.energy_drift == pytest.approx(dipole.energy(step.y1) - dipole.energy(Y0))


def test_advance_zero_step(dipole):
    t = build_tableau(3, 3, 3)
    step = advance(t, dipole, Y0, 0.0, np.ones((3, 4)))
    assert np.array_equal(step.y1, Y0) and step.energy_drift == 0.0


def test_one_step_energy_lim171(dipole):
    t = build_tableau(1, 1, 7)
    out = solve(t, dipole, Y0, 0.4, SolverConfig(tol=1e-16, max_iters=200))
    step = advance(t, dipole, Y0, 0.4, out.gammas)
    assert abs(step.energy_drift) <= 1e-14 * abs(dipole.energy(Y0))


def test_gamma_magnitudes_decay_with_h(dipole):
    # Gamma_i = O(h^i): the ratio |Gamma_2| / |Gamma_0| shrinks like h^2
    t = build_tableau(3, 3, 6)
    ratios = []
    for h in (0.1, 0.05, 0.025):
        g = solve(t, dipole, Y0, h, SolverConfig(tol=1e-15)).gammas
        n = np.max(np.abs(g), axis=1)
        assert n[0] > n[1] > n[2]
        ratios.append(n[2] / n[0])
    assert ratios[0] > ratios[1] > ratios[2]
    assert np.log2(ratios[1] / ratios[2]) == pytest.approx(2.0, abs=0.3)


@pytest.mark.parametrize("s,k", [(1, 1), (2, 2), (2, 5), (3, 6)])
def test_energy_conservation_on_polynomial_hamiltonian(s, k):
    # rigid body: S linear, H quadratic, so k2 >= s integrates the line integral exactly
    sys = rigid_body()
    t = build_tableau(s, s, max(k, s))
    y = np.array([1.0, 0.5, -0.3])
    H0 = sys.energy(y)
    for _ in range(20):
        g = solve(t, sys, y, 0.3, SolverConfig(tol=1e-15)).gammas
        y = y + 0.3 * g[0]
    assert abs(sys.energy(y) - H0) < 1e-13
