"""Observers for the academic 3-state system and for the cascade class."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import ConfigurationError
from .design import DesignTriple, GradientEstimator, RegressorBuilder
from .generic import KKLPEBObserver, Observer

# Theta_hat is the exponential of the offset; keep the logarithm finite
_LOG_FLOOR = 1e-300


def acad3_design():
    """``phi = (x2, x3)``, ``Lambda = diag(-1, 0)``, ``B = (y^2 + sin y, u y + 1/(y^2 + 1))``."""
    jac = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    def phi(x):
        return np.array([x[1], x[2]])

    def B(y, u):
        y0 = y[0]
        return np.array([y0 * y0 + math.sin(y0), u * y0 + 1.0 / (y0 * y0 + 1.0)])

    def B_F(y):
        y0 = y[0]
        return np.array([y0 * y0 + math.sin(y0), 1.0 / (y0 * y0 + 1.0)])

    def B_g(y):
        return np.array([0.0, y[0]])

    def phi_left(z, y):
        return np.array([y[0], z[0], z[1]])

    return DesignTriple(phi=phi, B=B, phi_left=phi_left, n_xi=2, q=1, lambda_l=np.array([-1.0]),
                        phi_jac=lambda x: jac, name="acad3-kklpebo", B_F=B_F, B_g=B_g)


def _log_map(Theta):
    return np.log(np.maximum(Theta, _LOG_FLOOR))


def _log_map_jac(Theta):
    return np.diag(1.0 / np.maximum(Theta, _LOG_FLOOR))


def acad3_estimator(alpha=0.5, gamma=1.0, psi0=0.1, Theta0=1.0):
    """Gradient estimator for ``Theta = exp(theta)`` from ``Y = W[y] + F[y^3] = F[e^xi2] Theta``.

    ``psi`` is the output of the ``F[e^xi2]`` filter, started at ``psi0 > 0``;
    ``Theta_hat(0) = 1`` corresponds to a zero offset estimate.
    """
    if not psi0 > 0:
        raise ConfigurationError("psi(0) must be positive")
    if not Theta0 > 0:
        raise ConfigurationError("Theta_hat(0) must be positive (its logarithm is the offset)")

    def inputs(xi, y, u):
        y0 = y[0]
        return np.array([y0, y0 ** 3, math.exp(xi[1])])

    def assemble(z, v, xi, y, u):
        return alpha * (v[0] - z[0]) + z[1], z[2]

    reg = RegressorBuilder(alpha=alpha, n_filters=3, inputs=inputs, assemble=assemble,
                           z0=np.array([0.0, 0.0, psi0]))
    return GradientEstimator(regressor=reg, gain=np.array([gamma]), n_theta=1,
                             theta0=np.array([Theta0]), param_map=_log_map, param_map_jac=_log_map_jac)


def acad3_observer(alpha=0.5, gamma=1.0, psi0=0.1):
    return KKLPEBObserver(acad3_design(), acad3_estimator(alpha, gamma, psi0), name="kklpebo")


# ---------------------------------------------------------------------------
# Cascade class


class CascadeObserver(Observer):
    """Model copies for ``x2``/``x3``, open-loop ``xi`` for ``x4`` plus an offset estimate.

    ``chi = (x2_hat, x3_hat, xi, z_y, z_f, z_bxi, z_b, theta_hat)`` where the
    ``z`` entries are ``F``-filter states of ``y_k``, ``f1_k``, ``b^T xi`` and
    ``b`` respectively.
    """

    def __init__(self, spec, alpha=1.0, gain=1.0, name="kklpebo"):
        if not alpha > 0:
            raise ConfigurationError("filter alpha must be positive")
        self.spec = spec
        self.alpha = float(alpha)
        n1, n2, n3, n4 = spec.n
        self.dims = spec.n
        g = np.asarray(gain, dtype=float)
        self.gain = np.full(n4, float(g)) if g.ndim == 0 else g
        if self.gain.shape != (n4,) or np.any(self.gain <= 0):
            raise ConfigurationError("cascade estimator gain must be a positive diagonal of size n4")
        self.A2 = np.atleast_2d(np.asarray(spec.A2, dtype=float))
        self.A3 = np.atleast_2d(np.asarray(spec.A3, dtype=float))
        self._i = np.cumsum([0, n2, n3, n4, 1, 1, 1, n4, n4])
        self.n_chi = int(self._i[-1])
        self.name = name

    def _split(self, chi):
        i = self._i
        return tuple(chi[i[j]:i[j + 1]] for j in range(8))

    def rhs(self, t, chi, y, u):
        s, k, a = self.spec, self.spec.k, self.alpha
        x2, x3, xi, zy, zf, zbx, zb, th = self._split(chi)
        y = np.asarray(y, dtype=float)
        b = np.asarray(s.b(y, x2, x3, u), dtype=float)
        f1k = float(np.asarray(s.f1(y, x2, x3, u), dtype=float).reshape(-1)[k])
        Y = a * (y[k] - zy[0]) - zf[0] - zbx[0]
        psi = zb
        return np.concatenate((
            self.A2 @ x2 + np.asarray(s.f2(y, u), dtype=float).reshape(-1),
            self.A3 @ x3 + np.asarray(s.f3(y, x2, u), dtype=float).reshape(-1),
            np.asarray(s.f4(y, x2, x3, u), dtype=float).reshape(-1),
            [a * (y[k] - zy[0])],
            [a * (f1k - zf[0])],
            [a * (float(b @ xi) - zbx[0])],
            a * (b - zb),
            self.gain * psi * (Y - float(psi @ th)),
        ))

    def regressor(self, chi):
        return self._split(chi)[6]

    def theta_hat(self, chi):
        return self._split(chi)[7].copy()

    def true_offset(self, x, chi):
        return self.spec.split(np.asarray(x))[3] - self._split(chi)[2]

    def estimate(self, chi, y, u):
        x2, x3, xi, *_, th = self._split(chi)
        return np.concatenate((np.asarray(y, dtype=float), x2, x3, xi + th))


def cascade_demo_design():
    """Closed-form triple for the demo cascade: ``phi = (x2, x3 - x2, x4)``,
    ``Lambda = diag(-1, -2, 0)``, ``B = (x1, 0, sin u)``."""
    jac = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, -1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])

    def phi(x):
        return np.array([x[1], x[2] - x[1], x[3]])

    def B(y, u):
        return np.array([y[0], 0.0, math.sin(u)])

    def phi_left(z, y):
        return np.array([y[0], z[0], z[1] + z[0], z[2]])

    return DesignTriple(phi=phi, B=B, phi_left=phi_left, n_xi=3, q=2, lambda_l=np.array([-1.0, -2.0]),
                        phi_jac=lambda x: jac, name="cascade-demo")
