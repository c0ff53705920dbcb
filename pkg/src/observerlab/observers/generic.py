"""Generic observers: Luenberger-type (KKL), estimation-based (PEB), their
block combination, and the generalised immersion-and-invariance observer.

Every observer exposes the same small surface used by the simulator:
``n_chi``, ``initial_state()``, ``rhs(t, chi, y, u)`` and
``estimate(chi, y, u)`` (a full-state estimate). ``step`` advances the
internal state with ``y`` and ``u`` held over the step.
"""

from __future__ import annotations

import numpy as np

from ..numerics import ConfigurationError, ObserverLabError, fd_jacobian, rk4_step


class SingularManifoldError(ObserverLabError, ArithmeticError):
    """The Jacobian of the manifold map with respect to chi lost rank."""

    def __init__(self, chi, y, rank, n_z):
        self.chi = np.array(chi, dtype=float)
        self.y = np.array(y, dtype=float)
        super().__init__(f"rank d(beta)/d(chi) = {rank} < {n_z} at chi={self.chi}, y={self.y}")


class Observer:
    name = "observer"
    n_chi = 0

    def initial_state(self):
        return np.zeros(self.n_chi)

    def rhs(self, t, chi, y, u):
        raise NotImplementedError

    def estimate(self, chi, y, u):
        raise NotImplementedError

    def theta_hat(self, chi):
        return None

    def true_offset(self, x, chi):
        return None

    def manifold(self, chi, y):
        """Manifold coordinate ``beta(y, chi)``; ``None`` if not defined."""
        return None

    def target(self, x):
        """``phi(x)``, the value ``beta`` should take on the invariant manifold."""
        return None

    def step(self, chi, y, u, t, dt):
        return rk4_step(lambda s, c: self.rhs(s, c, y, u), chi, t, dt)


class CoordinateObserver(Observer):
    """Shared machinery for the KKL, PEB and combined designs.

    ``chi = (xi, zeta)`` where ``xi`` follows ``xi' = Lambda xi + P B(y, u)``
    and ``zeta`` carries the regressor filters and the parameter estimate.
    """

    def __init__(self, design, estimator=None, name=None):
        self.design = design
        self.estimator = estimator
        self.name = name or design.name or type(self).__name__
        self.n_xi = design.n_xi
        self.q = design.q
        self.n_zeta = estimator.dim if estimator is not None else 0
        self.n_chi = self.n_xi + self.n_zeta
        if self.q < self.n_xi and estimator is None:
            raise ConfigurationError("open-loop coordinates need a parameter estimator")
        if estimator is not None and estimator.n_theta != self.n_xi - self.q:
            raise ConfigurationError(
                f"estimator has {estimator.n_theta} parameters, expected n_xi - q = {self.n_xi - self.q}")

    def initial_state(self):
        chi = np.zeros(self.n_chi)
        if self.estimator is not None:
            chi[self.n_xi:] = self.estimator.initial_state()
        return chi

    def rhs(self, t, chi, y, u):
        d = self.design
        xi = chi[:self.n_xi]
        out = np.empty(self.n_chi)
        out[:self.n_xi] = d.to_xi(np.asarray(d.B(y, u), dtype=float))
        if self.q:
            out[:self.q] += d.lambdas(y, u) * xi[:self.q]
        if self.estimator is not None:
            out[self.n_xi:] = self.estimator.rhs(chi[self.n_xi:], xi, y, u)
        return out

    def theta_hat(self, chi):
        if self.estimator is None:
            return None
        return self.estimator.offset(chi[self.n_xi:])

    def manifold(self, chi, y):
        beta = np.array(chi[:self.n_xi], dtype=float)
        if self.estimator is not None:
            beta[self.q:] += self.estimator.offset(chi[self.n_xi:])
        return beta

    def target(self, x):
        return self.design.to_xi(np.asarray(self.design.phi(x), dtype=float))

    def estimate(self, chi, y, u):
        return np.asarray(self.design.phi_left(self.design.from_xi(self.manifold(chi, y)), y), dtype=float)

    def true_offset(self, x, chi):
        """``theta = (P phi(x) - xi)`` restricted to the open-loop block."""
        if self.estimator is None:
            return None
        return (self.target(x) - chi[:self.n_xi])[self.q:]


class KKLObserver(CoordinateObserver):
    """``xi' = Lambda xi + B(y, u)``, ``x_hat = phi_left(xi, y)``."""

    def __init__(self, design, name=None):
        if design.q != design.n_xi:
            raise ConfigurationError("a KKL observer needs q = n_xi")
        super().__init__(design, None, name)


class PEBObserver(CoordinateObserver):
    """Open-loop ``xi' = B(y, u)`` plus an estimate of the constant offset."""

    def __init__(self, design, estimator, name=None):
        if design.q != 0:
            raise ConfigurationError("a PEB observer needs q = 0")
        super().__init__(design, estimator, name)


class KKLPEBObserver(CoordinateObserver):
    """Luenberger block on the first ``q`` coordinates, estimation on the rest.

    Degenerate splits (``q = 0`` or ``q = n_xi``) are rejected unless
    ``allow_degenerate`` is set, in which case the observer reduces exactly
    to :class:`PEBObserver` or :class:`KKLObserver`.
    """

    def __init__(self, design, estimator, name=None, allow_degenerate=False):
        if not allow_degenerate and not 0 < design.q < design.n_xi:
            raise ConfigurationError(
                f"q={design.q} is degenerate; use KKLObserver (q = n_xi) or PEBObserver (q = 0)")
        super().__init__(design, estimator if design.q < design.n_xi else None, name)


def _pinv(J, rank_tol):
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return None, 0
    r = int(np.sum(s > rank_tol * s[0]))
    return (Vt[:r].T / s[:r]) @ U[:, :r].T, r


class IIObserver(Observer):
    """Generalised immersion-and-invariance observer.

    ``chi' = -J^+ (d beta/dy dh/dx - d phi/dx)(x_hat) f(x_hat, u) + (I - J^+ J) Q``
    with ``J = d beta/d chi`` and ``x_hat = phi_left(beta(y, chi), y)``.
    ``beta_jac_chi`` may be a constant array (the pseudoinverse is then
    computed once) and ``beta_jac_y`` may be ``None`` when ``beta`` does not
    depend on ``y``.
    """

    def __init__(self, beta, beta_jac_chi, phi, phi_left, f, h_jac, n_chi, n_z,
                 beta_jac_y=None, phi_jac=None, Q=None, chi0=None, rank_tol=1e-10, name="iio"):
        if n_chi < n_z:
            raise ConfigurationError("the I&I observer needs n_chi >= n_z")
        self.beta = beta
        self.phi = phi
        self.phi_left = phi_left
        self.f = f
        self.h_jac = h_jac
        self.n_chi = n_chi
        self.n_z = n_z
        self.beta_jac_y = beta_jac_y
        self.phi_jac = phi_jac
        self.Q = Q
        self.rank_tol = rank_tol
        self.name = name
        self._chi0 = np.zeros(n_chi) if chi0 is None else np.asarray(chi0, dtype=float)
        self._const_J = None
        self._beta_jac_chi = beta_jac_chi
        if not callable(beta_jac_chi):
            J = np.asarray(beta_jac_chi, dtype=float)
            if J.shape != (n_z, n_chi):
                raise ConfigurationError("beta_jac_chi must be n_z x n_chi")
            Jp, r = _pinv(J, rank_tol)
            if r < n_z:
                raise SingularManifoldError(self._chi0, [], r, n_z)
            self._const_J = (J, Jp)

    def initial_state(self):
        return self._chi0.copy()

    def _jac_chi(self, y, chi):
        if self._const_J is not None:
            return self._const_J
        if self._beta_jac_chi is None:
            J = fd_jacobian(lambda c: self.beta(y, c), chi)
        else:
            J = np.asarray(self._beta_jac_chi(y, chi), dtype=float)
        Jp, r = _pinv(J, self.rank_tol)
        if r < self.n_z:
            raise SingularManifoldError(chi, y, r, self.n_z)
        return J, Jp

    def _phi_jac(self, x):
        if self.phi_jac is not None:
            return np.asarray(self.phi_jac(x), dtype=float)
        return fd_jacobian(self.phi, x)

    def rhs(self, t, chi, y, u):
        z = np.asarray(self.beta(y, chi), dtype=float)
        xh = np.asarray(self.phi_left(z, y), dtype=float)
        fx = np.asarray(self.f(xh, u), dtype=float)
        v = -(self._phi_jac(xh) @ fx)
        if self.beta_jac_y is not None:
            by = self.beta_jac_y(y, chi) if callable(self.beta_jac_y) else self.beta_jac_y
            v = v + np.asarray(by, dtype=float) @ (np.asarray(self.h_jac(xh), dtype=float) @ fx)
        J, Jp = self._jac_chi(y, chi)
        dchi = -(Jp @ v)
        if self.Q is not None:
            dchi = dchi + (np.eye(self.n_chi) - Jp @ J) @ np.asarray(self.Q(y, chi, u), dtype=float)
        return dchi

    def manifold(self, chi, y):
        return np.asarray(self.beta(y, chi), dtype=float)

    def target(self, x):
        return np.asarray(self.phi(x), dtype=float)

    def estimate(self, chi, y, u):
        return np.asarray(self.phi_left(self.manifold(chi, y), y), dtype=float)


def iio_from_coordinate_observer(obs, plant, Q=None, name=None):
    """I&I instantiation of a KKL/PEB/combined observer.

    Uses ``beta = xi + col(0_q, theta_hat(zeta))`` on ``chi = (xi, zeta)``,
    ``beta`` independent of ``y`` and ``Q = 0`` unless given.
    """
    d = obs.design
    n_xi, q = obs.n_xi, obs.q
    est = obs.estimator

    if est is None:
        J = np.eye(n_xi)
    elif est.param_map is not None and _is_identity_map(est):
        J = np.zeros((n_xi, obs.n_chi))
        J[:, :n_xi] = np.eye(n_xi)
        J[q:, n_xi:] = est.offset_jacobian(est.initial_state())
    else:
        def J(y, chi):
            out = np.zeros((n_xi, obs.n_chi))
            out[:, :n_xi] = np.eye(n_xi)
            out[q:, n_xi:] = est.offset_jacobian(chi[n_xi:])
            return out

    def beta(y, chi):
        return obs.manifold(chi, y)

    def phi_xi(x):
        return d.to_xi(np.asarray(d.phi(x), dtype=float))

    def phi_xi_jac(x):
        jac = d.jacobian(x)
        return jac if d.P is None else d.P @ jac

    def phi_left(z, y):
        return d.phi_left(d.from_xi(z), y)

    return IIObserver(
        beta=beta,
        beta_jac_chi=J,
        phi=phi_xi,
        phi_left=phi_left,
        f=plant.field,
        h_jac=plant.output_jacobian,
        n_chi=obs.n_chi,
        n_z=n_xi,
        phi_jac=phi_xi_jac,
        Q=Q,
        chi0=obs.initial_state(),
        name=name or f"iio[{obs.name}]",
    )


def _is_identity_map(est):
    from .design import _identity
    return est.param_map is _identity
