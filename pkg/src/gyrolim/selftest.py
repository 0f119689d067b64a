"""Fast invariant checks grouped for the ``selftest`` command.

Each group returns a list of failure messages; an empty list means pass.
"""

import numpy as np

from .gyrocenter import (DIPOLE_Y0, dipole_electric_model, dipole_model, tokamak_model,
                         TRANSIT_Y0)
from .legendre import build_tableau, gauss_legendre, xi, xs_matrix
from .solvers import SolverConfig, solve


def random_points(model_name, rng, n):
    """Random field points well inside each model's domain, plus u."""
    if model_name == "tokamak":
        R = rng.uniform(0.6, 1.4, n)
        th = rng.uniform(0, 2 * np.pi, n)
        x = np.stack([R * np.cos(th), R * np.sin(th), rng.uniform(-0.4, 0.4, n)], axis=1)
        u = rng.uniform(-1e-3, 1e-3, n)
    else:
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        x = d * rng.uniform(0.7, 2.0, n)[:, None]
        u = rng.uniform(-0.05, 0.05, n)
    return x, u


MODELS = {
    "dipole": dipole_model,
    "tokamak": tokamak_model,
    "dipole_electric": dipole_electric_model,
}


def _field_name(name):
    return "tokamak" if name == "tokamak" else "dipole"


def fd_jacobian(fun, x, delta):
    """Central-difference Jacobian of fun: R^3 -> R^m at x; rows index outputs."""
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = delta
        cols.append((np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * delta))
    return np.stack(cols, axis=-1)


def curl_from(J):
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def richardson_order(approx, exact, delta):
    """(error at delta, error at delta/2, observed order) for a central-difference family."""
    e1 = np.max(np.abs(approx(delta) - exact))
    e2 = np.max(np.abs(approx(delta / 2) - exact))
    order = np.log2(e1 / e2) if e1 > 0 and e2 > 0 else np.inf
    return e1, e2, order


def derivative_checks(model, x, rel_delta=1e-3, exact_floor=1e-11):
    """Observed FD orders for curl b, grad|B| and grad phi at one point.

    Returns {name: (error, order)}. A derivative reproduced by the difference
    quotient to within ``exact_floor`` (relative) has no measurable
    truncation error and is reported with order inf.
    """
    field, pot = model.field, model.potential
    delta = rel_delta * max(np.linalg.norm(x), 1.0)
    checks = {
        "curl_b": (lambda d: curl_from(fd_jacobian(field.b, x, d)), field.curl_b(x)),
        "grad_Bnorm": (lambda d: fd_jacobian(field.B_norm, x, d)[0], field.grad_Bnorm(x)),
        "grad_phi": (lambda d: fd_jacobian(pot.phi, x, d)[0], pot.grad_phi(x)),
    }
    out = {}
    for name, (approx, exact) in checks.items():
        scale = max(np.max(np.abs(exact)), 1e-300)
        e1, e2, order = richardson_order(approx, exact, delta)
        if e1 <= exact_floor * scale:
            order = np.inf
        out[name] = (e1 / scale, order)
    return out


def check_quadrature(k_max=20):
    fails = []
    for k in range(1, k_max + 1):
        q = gauss_legendre(k)
        if not np.all(np.diff(q.nodes) > 0) or q.nodes[0] <= 0 or q.nodes[-1] >= 1:
            fails.append(f"k={k}: nodes not increasing in (0,1)")
        if abs(q.weights.sum() - 1) > 1e-14:
            fails.append(f"k={k}: weights sum {q.weights.sum()!r}")
        if np.max(np.abs(q.nodes + q.nodes[::-1] - 1)) > 1e-14:
            fails.append(f"k={k}: nodes not symmetric")
        d = 2 * k - 1
        err = abs(q.integrate(lambda c: c ** d) * (d + 1) - 1)
        if err > 1e-13:
            fails.append(f"k={k}: degree {d} monomial relative error {err:.2e}")
    return fails


def check_tableau(s_max=8, k_values=(0, 1, 4), xi1=None):
    """Orthonormality and X_s identities; ``xi1`` replaces the expected xi_1."""
    fails = []
    for s in range(1, s_max + 1):
        xis = [xi(i) for i in range(s)]
        if xi1 is not None and s > 1:
            xis[1] = xi1
        target = xs_matrix(s, xis)
        for dk1 in k_values:
            for dk2 in k_values:
                t = build_tableau(s, s + dk1, s + dk2)
                checks = {
                    "P_hat^T W P_hat = I": t.PtOmega_hat @ t.P_hat - np.eye(s),
                    "P^T W 1 = e1": t.PtOmega.sum(axis=1) - np.eye(s)[0],
                    "P_hat^T W I_hat = X_s": t.PtOmega_hat @ t.I_hat - target,
                    "P^T W I = X_s": t.PtOmega @ t.I - target,
                }
                for name, diff in checks.items():
                    err = np.max(np.abs(diff))
                    if err > 1e-13:
                        fails.append(f"LIM({t.k1},{t.k2},{s}) {name}: {err:.2e}")
    return fails


def check_skew(n=50, seed=0):
    rng = np.random.default_rng(seed)
    fails = []
    for name, build in MODELS.items():
        model = build()
        sys = model.as_poisson_system()
        x, u = random_points(_field_name(name), rng, n)
        Y = np.column_stack([x, u])
        S = sys.S_batch(Y)
        g = sys.grad_H_batch(Y)
        skew = np.max(np.abs(S + np.swapaxes(S, 1, 2)))
        work = np.abs(np.einsum("mi,mij,mj->m", g, S, g))
        scale = np.einsum("mi,mij,mj->m", np.abs(g), np.abs(S), np.abs(g))
        if skew != 0:
            fails.append(f"{name}: S + S^T max {skew:.2e}")
        if np.any(work > 1e-13 * scale):
            fails.append(f"{name}: grad H^T S grad H not ~0")
    return fails


def check_derivatives(n=20, seed=1):
    rng = np.random.default_rng(seed)
    fails = []
    for name, build in MODELS.items():
        model = build()
        x, _ = random_points(_field_name(name), rng, n)
        for p in x:
            for what, (err, order) in derivative_checks(model, p).items():
                if not (order == np.inf or 1.5 <= order <= 2.5):
                    fails.append(f"{name} {what} at {p}: order {order:.2f} (rel err {err:.1e})")
    return fails


def check_symmetry():
    fails = []
    cfg = SolverConfig(tol=1e-14, max_iters=200)
    cases = [(dipole_model(), DIPOLE_Y0, 0.1), (tokamak_model(), TRANSIT_Y0, 100.0)]
    for model, y0, h in cases:
        sys = model.as_poisson_system()
        for s, k in ((1, 1), (1, 3), (2, 4)):
            t = build_tableau(s, s, k)
            y0 = np.asarray(y0, dtype=float)
            y1 = y0 + h * solve(t, sys, y0, h, cfg).gammas[0]
            back = y1 - h * solve(t, sys, y1, -h, cfg).gammas[0]
            err = np.max(np.abs(back - y0))
            if err > 10 * cfg.tol * max(1.0, np.max(np.abs(y0))):
                fails.append(f"{model.name} LIM({s},{k},{s}) h={h}: back-step error {err:.2e}")
    return fails


def check_minimal():
    """LIM(1,1,1) (implicit midpoint) on the dipole: one step, finite, converged."""
    sys = dipole_model().as_poisson_system()
    t = build_tableau(1, 1, 1)
    out = solve(t, sys, np.array(DIPOLE_Y0), 0.4, SolverConfig())
    y1 = np.array(DIPOLE_Y0) + 0.4 * out.gammas[0]
    if not (out.converged and np.all(np.isfinite(y1))):
        return ["LIM(1,1,1) step did not produce a finite converged state"]
    return []


def run_groups(xi1=None):
    """All groups in order as (name, failures)."""
    groups = [
        ("quadrature exactness", check_quadrature),
        ("tableau identities (X_s)", lambda: check_tableau(xi1=xi1)),
        ("skew-symmetry of S", check_skew),
        ("field derivatives vs finite differences", check_derivatives),
        ("one-step symmetry", check_symmetry),
        ("minimal config k=s=1", check_minimal),
    ]
    results = []
    for name, fn in groups:
        try:
            fails = fn()
        except Exception as exc:  # a crash is a failed group, not a crashed selftest
            fails = [f"raised {type(exc).__name__}: {exc}"]
        results.append((name, fails))
    return results
