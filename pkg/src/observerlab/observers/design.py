"""Design data shared by the coordinate-change observers.

A :class:`DesignTriple` is a candidate solution ``(phi, A, B, phi_left)`` of

    d phi/dx f(x, u) = A phi(x) + B(h(x), u),   A = P^T diag(lambda_L, 0) P,

with the first ``q`` coordinates (after the orthogonal ``P``) handled as a
Luenberger-type block and the remaining ones integrated open loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..numerics import ConfigurationError, fd_jacobian, regressor_matrix


@dataclass(frozen=True)
class DesignTriple:
    phi: Callable
    B: Callable
    phi_left: Callable
    n_xi: int
    q: int
    lambda_l: Callable | np.ndarray | None = None
    P: np.ndarray | None = None
    phi_jac: Callable | None = None
    name: str = ""
    # input-affine split B(y, u) = B_F(y) + B_g(y) u, when available
    B_F: Callable | None = None
    B_g: Callable | None = None

    def __post_init__(self):
        if not 0 <= self.q <= self.n_xi:
            raise ConfigurationError(f"q must satisfy 0 <= q <= n_xi={self.n_xi}, got {self.q}")
        if self.q and self.lambda_l is None:
            raise ConfigurationError("a Luenberger block (q > 0) needs lambda_l")
        if self.lambda_l is not None and not callable(self.lambda_l):
            lam = np.atleast_1d(np.asarray(self.lambda_l, dtype=float))
            if lam.size != self.q:
                raise ConfigurationError(f"lambda_l has {lam.size} entries, expected q={self.q}")
            if np.any(lam >= 0):
                raise ConfigurationError("Luenberger eigenvalues must be strictly negative")
            object.__setattr__(self, "lambda_l", lam)
        if self.P is not None:
            P = np.asarray(self.P, dtype=float)
            if P.shape != (self.n_xi, self.n_xi):
                raise ConfigurationError("P must be n_xi x n_xi")
            if np.max(np.abs(P.T @ P - np.eye(self.n_xi))) > 1e-12:
                raise ConfigurationError("P must be orthogonal")
            object.__setattr__(self, "P", None if np.array_equal(P, np.eye(self.n_xi)) else P)

    def lambdas(self, y, u):
        """Diagonal of the Luenberger block at ``(y, u)``."""
        if self.q == 0:
            return np.zeros(0)
        if callable(self.lambda_l):
            return np.asarray(self.lambda_l(y, u), dtype=float)
        return self.lambda_l

    def Lambda(self, y, u):
        lam = np.zeros(self.n_xi)
        lam[:self.q] = self.lambdas(y, u)
        return np.diag(lam)

    def A(self, y, u):
        """``P^T Lambda P``, the matrix acting on ``phi`` in the design equation."""
        L = self.Lambda(y, u)
        if self.P is None:
            return L
        return self.P.T @ L @ self.P

    def jacobian(self, x):
        if self.phi_jac is not None:
            return np.asarray(self.phi_jac(x), dtype=float)
        return fd_jacobian(self.phi, x)

    # coordinates of the observer state xi (rotated by P)
    def to_xi(self, v):
        return v if self.P is None else self.P @ v

    def from_xi(self, v):
        return v if self.P is None else self.P.T @ v


@dataclass(frozen=True)
class RegressorBuilder:
    """Bank of ``F(p) = alpha/(p+alpha)`` filters feeding a linear regression.

    ``inputs(xi, y, u)`` returns the raw signals entering the filters. The
    filtered values ``z`` and the raw signals are handed to
    ``assemble(z, v, xi, y, u) -> (Y, M)`` for the model ``Y = M theta``; a
    ``W(p)`` output of filter ``j`` is ``alpha * (v[j] - z[j])``.
    """

    alpha: float
    n_filters: int
    inputs: Callable
    assemble: Callable
    z0: np.ndarray | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("filter alpha must be positive")
        z0 = np.zeros(self.n_filters) if self.z0 is None else np.asarray(self.z0, dtype=float)
        if z0.shape != (self.n_filters,):
            raise ConfigurationError("z0 does not match the number of filters")
        object.__setattr__(self, "z0", z0)


def _identity(v):
    return v


def _identity_jac(v):
    return np.eye(v.size)


@dataclass(frozen=True)
class GradientEstimator:
    """Gradient estimator ``Theta' = Gamma M^T (Y - M Theta)`` on filtered data.

    ``param_map`` sends the regression parameter ``Theta`` to the observer
    offset ``theta`` (identity unless the regression is in a transformed
    parameter, e.g. ``Theta = exp(theta)``).
    """

    regressor: RegressorBuilder
    gain: np.ndarray
    n_theta: int
    theta0: np.ndarray | None = None
    param_map: Callable = _identity
    param_map_jac: Callable = _identity_jac

    def __post_init__(self):
        gain = np.asarray(self.gain, dtype=float)
        if gain.ndim == 0:
            gain = np.full(self.n_theta, float(gain))
        if gain.shape != (self.n_theta,) or np.any(gain <= 0):
            raise ConfigurationError("gain must be a positive diagonal of length n_theta")
        th0 = np.zeros(self.n_theta) if self.theta0 is None else np.asarray(self.theta0, dtype=float)
        if th0.shape != (self.n_theta,):
            raise ConfigurationError("theta0 does not match n_theta")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "theta0", th0)

    @property
    def dim(self):
        return self.regressor.n_filters + self.n_theta

    def initial_state(self):
        return np.concatenate((self.regressor.z0, self.theta0))

    def regression(self, zeta, xi, y, u):
        reg = self.regressor
        z = zeta[:reg.n_filters]
        v = np.asarray(reg.inputs(xi, y, u), dtype=float)
        Y, M = reg.assemble(z, v, xi, y, u)
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        M = np.asarray(M, dtype=float)
        if M.shape != (Y.size, self.n_theta):
            M = regressor_matrix(M, self.n_theta, Y.size)
        return Y, M, v

    def rhs(self, zeta, xi, y, u):
        reg = self.regressor
        nf = reg.n_filters
        z = zeta[:nf]
        Theta = zeta[nf:]
        Y, M, v = self.regression(zeta, xi, y, u)
        out = np.empty(zeta.size)
        out[:nf] = reg.alpha * (v - z)
        out[nf:] = self.gain * (M.T @ (Y - M @ Theta))
        return out

    def estimate(self, zeta):
        """Regression parameter estimate ``Theta_hat``."""
        return zeta[self.regressor.n_filters:]

    def offset(self, zeta):
        """Observer offset ``theta_hat = param_map(Theta_hat)``."""
        return np.asarray(self.param_map(self.estimate(zeta)), dtype=float)

    def offset_jacobian(self, zeta):
        """``d theta_hat / d zeta`` (filters first, then ``Theta``)."""
        jac = np.zeros((self.n_theta, self.dim))
        jac[:, self.regressor.n_filters:] = self.param_map_jac(self.estimate(zeta))
        return jac
