"""Gyrocenter dynamics as a 4-dimensional Poisson system.

State y = (x1, x2, x3, u). The Hamiltonian is H = u^2/2 + mu |B(x)| + phi(x)
and S(y) = K(y)^{-1} is built from b = B/|B| and a = B + u curl(b).

Each field supplies B and its analytic Jacobian dB_i/dx_j; grad|B| and
curl(b) follow from

    grad|B|  = J^T b
    curl b   = curl(B)/|B| - (grad|B| x B)/|B|^2
"""

import numpy as np

from . import _kernels
from .poisson import ModelDomainError, PoissonSystem

SINGULAR_EPS = 1e-300


class SingularityError(ModelDomainError):
    """|b . a| vanished: the gyrocenter equations are degenerate."""


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"expected positions with trailing dimension 3, got {x.shape}")
    return x


def _curl_from_jacobian(J):
    return np.stack([
        J[..., 2, 1] - J[..., 1, 2],
        J[..., 0, 2] - J[..., 2, 0],
        J[..., 1, 0] - J[..., 0, 1],
    ], axis=-1)


class FieldModel:
    """Static magnetic field; subclasses implement A, B, B_norm and jacobian_B."""

    def check_domain(self, x):
        pass

    def A(self, x):
        raise NotImplementedError

    def B(self, x):
        raise NotImplementedError

    def B_norm(self, x):
        raise NotImplementedError

    def jacobian_B(self, x):
        """J[..., i, j] = dB_i/dx_j."""
        raise NotImplementedError

    def b(self, x):
        return self.B(x) / self.B_norm(x)[..., None]

    def grad_Bnorm(self, x):
        x = _as_points(x)
        J = self.jacobian_B(x)
        b = self.b(x)
        return np.einsum("...ij,...i->...j", J, b)

    def curl_b(self, x):
        x = _as_points(x)
        B = self.B(x)
        nB = self.B_norm(x)[..., None]
        J = self.jacobian_B(x)
        gnB = np.einsum("...ij,...i->...j", J, B / nB)
        return _curl_from_jacobian(J) / nB - np.cross(gnB, B) / (nB * nB)


class DipoleField(FieldModel):
    """Magnetic dipole with moment M along x3; singular at x = 0."""

    def __init__(self, M):
        if M == 0:
            raise ValueError("dipole moment M must be non-zero")
        self.M = float(M)

    def check_domain(self, x):
        rho2 = np.sum(x * x, axis=-1)
        bad = ~(rho2 > 0) | ~np.all(np.isfinite(x), axis=-1)
        if np.any(bad):
            idx = np.argwhere(np.atleast_1d(bad))[0]
            pts = np.atleast_2d(x)
            raise ModelDomainError("dipole field is singular at x = 0", state=pts[idx[0]])

    def A(self, x):
        x = _as_points(x)
        self.check_domain(x)
        rho3 = np.linalg.norm(x, axis=-1)[..., None] ** 3
        return self.M / rho3 * np.stack([x[..., 1], -x[..., 0], np.zeros_like(x[..., 0])], axis=-1)

    @staticmethod
    def _v(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([3 * x1 * x3, 3 * x2 * x3, 2 * x3 * x3 - x1 * x1 - x2 * x2], axis=-1)

    def B(self, x):
        x = _as_points(x)
        self.check_domain(x)
        rho2 = np.sum(x * x, axis=-1)
        return -self.M * self._v(x) / (rho2 * rho2 * np.sqrt(rho2))[..., None]

    def B_norm(self, x):
        x = _as_points(x)
        self.check_domain(x)
        rho2 = np.sum(x * x, axis=-1)
        return abs(self.M) * np.sqrt(rho2 + 3 * x[..., 2] ** 2) / (rho2 * rho2)

    def b(self, x):
        x = _as_points(x)
        self.check_domain(x)
        rho2 = np.sum(x * x, axis=-1)
        scale = -np.sign(self.M) / (np.sqrt(rho2) * np.sqrt(rho2 + 3 * x[..., 2] ** 2))
        return scale[..., None] * self._v(x)

    def jacobian_B(self, x):
        x = _as_points(x)
        self.check_domain(x)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        zero = np.zeros_like(x1)
        dv = np.stack([
            np.stack([3 * x3, zero, 3 * x1], axis=-1),
            np.stack([zero, 3 * x3, 3 * x2], axis=-1),
            np.stack([-2 * x1, -2 * x2, 4 * x3], axis=-1),
        ], axis=-2)
        rho2 = np.sum(x * x, axis=-1)
        rho5 = rho2 * rho2 * np.sqrt(rho2)
        v = self._v(x)
        outer = v[..., :, None] * x[..., None, :]
        return -self.M * (dv / rho5[..., None, None] - 5.0 * outer / (rho5 * rho2)[..., None, None])


class TokamakField(FieldModel):
    """Axisymmetric tokamak field with circular flux surfaces; singular at R = 0."""

    def __init__(self, B0, R0, q):
        problems = []
        if B0 == 0:
            problems.append("B0 must be non-zero")
        if not R0 > 0:
            problems.append("R0 must be positive")
        if q == 0:
            problems.append("q must be non-zero")
        if problems:
            raise ValueError("; ".join(problems))
        self.B0, self.R0, self.q = float(B0), float(R0), float(q)

    def check_domain(self, x):
        R2 = x[..., 0] ** 2 + x[..., 1] ** 2
        bad = ~(R2 > 0) | ~np.all(np.isfinite(x), axis=-1)
        if np.any(bad):
            idx = np.argwhere(np.atleast_1d(bad))[0]
            pts = np.atleast_2d(x)
            raise ModelDomainError("tokamak field is singular at R = 0", state=pts[idx[0]])

    def A(self, x):
        x = _as_points(x)
        self.check_domain(x)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        R2 = x1 * x1 + x2 * x2
        R = np.sqrt(R2)
        r2 = (R - self.R0) ** 2 + x3 * x3
        qR0 = self.q * self.R0
        comps = np.stack([
            qR0 * x1 * x3 - x2 * r2,
            qR0 * x2 * x3 + x1 * r2,
            -self.q * R2 * self.R0 * np.log(R / self.R0),
        ], axis=-1)
        return self.B0 / (2 * self.q * R2)[..., None] * comps

    def _w(self, x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        R = np.sqrt(x1 * x1 + x2 * x2)
        qR0 = self.q * self.R0
        return np.stack([-x1 * x3 - qR0 * x2, -x2 * x3 + qR0 * x1, R * (R - self.R0)], axis=-1)

    def B(self, x):
        x = _as_points(x)
        self.check_domain(x)
        R2 = x[..., 0] ** 2 + x[..., 1] ** 2
        return (self.B0 / self.q) * self._w(x) / R2[..., None]

    def B_norm(self, x):
        x = _as_points(x)
        self.check_domain(x)
        R = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
        r2 = (R - self.R0) ** 2 + x[..., 2] ** 2
        return abs(self.B0 / self.q) * np.sqrt(r2 + (self.q * self.R0) ** 2) / R

    def jacobian_B(self, x):
        x = _as_points(x)
        self.check_domain(x)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        R2 = x1 * x1 + x2 * x2
        R = np.sqrt(R2)
        qR0 = self.q * self.R0
        zero = np.zeros_like(x1)
        g = 2.0 - self.R0 / R
        dw = np.stack([
            np.stack([-x3, -qR0 * np.ones_like(x1), -x1], axis=-1),
            np.stack([qR0 * np.ones_like(x1), -x3, -x2], axis=-1),
            np.stack([g * x1, g * x2, zero], axis=-1),
        ], axis=-2)
        w = self._w(x)
        xr = np.stack([x1, x2, zero], axis=-1)
        c = self.B0 / self.q
        return c * (dw / R2[..., None, None] - 2.0 * w[..., :, None] * xr[..., None, :] / (R2 * R2)[..., None, None])


class ElectricPotential:
    """phi(x) with its gradient; the base class is phi = 0 (temporal gauge)."""

    def phi(self, x):
        x = _as_points(x)
        return np.zeros(x.shape[:-1])

    def grad_phi(self, x):
        x = _as_points(x)
        return np.zeros_like(x)


class QuadraticPotential(ElectricPotential):
    """phi(x) = x^T G x / 2 for diagonal G."""

    def __init__(self, G):
        G = np.asarray(G, dtype=float)
        if G.shape == (3, 3):
            if np.any(G - np.diag(np.diag(G))):
                raise ValueError("G must be diagonal")
            G = np.diag(G)
        if G.shape != (3,):
            raise ValueError("G must be a 3x3 diagonal matrix or its diagonal")
        self.G = G.copy()

    def phi(self, x):
        x = _as_points(x)
        return 0.5 * np.sum(self.G * x * x, axis=-1)

    def grad_phi(self, x):
        x = _as_points(x)
        return self.G * x


def quadratic_potential(G):
    return QuadraticPotential(G)


class GyrocenterModel:
    """Field + electric potential + magnetic moment mu."""

    def __init__(self, field, potential=None, mu=0.0, name="gyrocenter"):
        if mu < 0:
            raise ValueError("mu must be non-negative")
        self.field = field
        self.potential = potential if potential is not None else ElectricPotential()
        self.mu = float(mu)
        self.name = name

    def hamiltonian(self, y):
        y = np.asarray(y, dtype=float)
        x, u = y[..., :3], y[..., 3]
        return 0.5 * u * u + self.mu * self.field.B_norm(x) + self.potential.phi(x)

    def grad_hamiltonian(self, y):
        y = np.asarray(y, dtype=float)
        x, u = y[..., :3], y[..., 3]
        gx = self.mu * self.field.grad_Bnorm(x) + self.potential.grad_phi(x)
        return np.concatenate([gx, u[..., None]], axis=-1)

    def a(self, y):
        y = np.asarray(y, dtype=float)
        x, u = y[..., :3], y[..., 3]
        return self.field.B(x) + u[..., None] * self.field.curl_b(x)

    def poisson_matrix(self, y):
        """K^{-1}(y), skew-symmetric by construction."""
        y = np.asarray(y, dtype=float)
        x = y[..., :3]
        b = self.field.b(x)
        a = self.a(y)
        ba = np.abs(np.sum(b * a, axis=-1))
        if np.any(~(ba >= SINGULAR_EPS)):
            idx = np.argwhere(np.atleast_1d(~(ba >= SINGULAR_EPS)))[0][0]
            raise SingularityError("degenerate gyrocenter geometry, |b.a| ~ 0",
                                   state=np.atleast_2d(y)[idx])
        S = np.zeros(y.shape[:-1] + (4, 4))
        S[..., 0, 1] = -b[..., 2]
        S[..., 0, 2] = b[..., 1]
        S[..., 1, 2] = -b[..., 0]
        S[..., :3, 3] = a
        S = S - np.swapaxes(S, -1, -2)
        return S / ba[..., None, None]

    def _kernel_spec(self):
        if isinstance(self.field, DipoleField):
            kind, params = _kernels.DIPOLE, np.array([self.field.M])
        elif isinstance(self.field, TokamakField):
            kind, params = _kernels.TOKAMAK, np.array([self.field.B0, self.field.R0, self.field.q])
        else:
            return None
        if isinstance(self.potential, QuadraticPotential):
            G = self.potential.G.copy()
        elif type(self.potential) is ElectricPotential:
            G = np.zeros(3)
        else:
            return None
        return kind, params, G

    def as_poisson_system(self, compiled=True):
        """The model as a PoissonSystem.

        With ``compiled`` (the default) S and grad H are evaluated by the fused
        kernels when the field/potential pair supports it.
        """
        spec = self._kernel_spec() if compiled else None
        if spec is None:
            return PoissonSystem(dim=4, S=self.poisson_matrix, grad_H=self.grad_hamiltonian,
                                 H=self.hamiltonian, vectorized=True, name=self.name)
        kind, params, G = spec
        mu = self.mu

        def S(ys):
            ys = np.asarray(ys, dtype=float)
            Y = np.ascontiguousarray(ys.reshape(-1, 4))
            out = np.empty((Y.shape[0], 4, 4))
            idx, status = _kernels.gyro_S(kind, params, mu, Y, out)
            if idx >= 0:
                _raise_kernel_error(status, Y[idx], idx)
            return out.reshape(ys.shape[:-1] + (4, 4))

        def grad_H(ys):
            ys = np.asarray(ys, dtype=float)
            Y = np.ascontiguousarray(ys.reshape(-1, 4))
            out = np.empty_like(Y)
            idx, status = _kernels.gyro_grad_H(kind, params, mu, G, Y, out)
            if idx >= 0:
                _raise_kernel_error(status, Y[idx], idx)
            return out.reshape(ys.shape)

        return PoissonSystem(dim=4, S=S, grad_H=grad_H, H=self.hamiltonian,
                             vectorized=True, name=self.name)


def _raise_kernel_error(status, state, index):
    if status == _kernels.SINGULAR:
        raise SingularityError("degenerate gyrocenter geometry, |b.a| ~ 0", state=state, index=index)
    raise ModelDomainError("state outside the field's domain", state=state, index=index)


def dipole_model(M=1e3, mu=1e-2, potential=None):
    return GyrocenterModel(DipoleField(M), potential, mu, name="dipole")


def tokamak_model(B0=1.0, R0=1.0, q=2.0, mu=2.25e-6):
    return GyrocenterModel(TokamakField(B0, R0, q), None, mu, name="tokamak")


def dipole_electric_model(M=1e3, mu=1e-2, G=(1.0, 1.0, 1e4)):
    return GyrocenterModel(DipoleField(M), QuadraticPotential(G), mu, name="dipole_electric")


def cylindrical_coords(x):
    """(R, x3) with R = sqrt(x1^2 + x2^2)."""
    x = _as_points(x)
    return np.hypot(x[..., 0], x[..., 1]), x[..., 2].copy()


# Initial states of the reference experiments
DIPOLE_Y0 = (1.0, 1.0, 1.0, 0.01)
DIPOLE_ELECTRIC_Y0 = (1.0, 1.0, 0.01, 0.01)
TRANSIT_Y0 = (1.05, 0.0, 0.0, 0.0008117)
BANANA_Y0 = (1.05, 0.0, 0.0, 0.0004306)
