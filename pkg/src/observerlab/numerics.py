"""Fixed-step integration, LTI regressor filters, finite differences and noise.

Everything here is a pure function over explicit state so that simulations
stay deterministic and can be run side by side.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np


class ObserverLabError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(ObserverLabError, ValueError):
    """Inconsistent dimensions, gains or settings."""


class IntegrationError(ObserverLabError, ArithmeticError):
    """A state became non-finite during integration."""

    def __init__(self, t, x, message=None, component=None):
        self.t = float(t)
        self.x = np.array(x, dtype=float, copy=True)
        self.component = component
        where = f" in {component}" if component else ""
        super().__init__(message or f"integration blow-up{where} at t={self.t:.9g}: x={self.x}")


def _check_finite(x, t, what="state"):
    if not np.all(np.isfinite(x)):
        raise IntegrationError(t, x, f"non-finite {what} at t={float(t):.9g}: {np.asarray(x)}")


def rk4_step(field, x, t, dt, input_provider=None):
    """One classical Runge-Kutta step of ``x' = field(t, x[, input])``.

    When ``input_provider`` is given it is evaluated at every stage time and
    passed as the third argument of ``field``.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    if input_provider is None:
        f = field
    else:
        def f(s, z):
            return field(s, z, input_provider(s))
    h2 = 0.5 * dt
    k1 = np.asarray(f(t, x), dtype=float)
    k2 = np.asarray(f(t + h2, x + h2 * k1), dtype=float)
    k3 = np.asarray(f(t + h2, x + h2 * k2), dtype=float)
    k4 = np.asarray(f(t + dt, x + dt * k3), dtype=float)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(x_new, t + dt)
    return x_new


# ---------------------------------------------------------------------------
# First-order LTI filters F(p) = a/(p+a) and W(p) = a p/(p+a)


@dataclass(frozen=True)
class FilterState:
    alpha: float
    z: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"filter alpha must be positive, got {self.alpha}")


def _filter_advance(fs, u_in, dt):
    a = fs.alpha
    z = rk4_step(lambda t, s: a * (u_in - s), np.array([fs.z]), 0.0, dt)[0]
    return replace(fs, z=float(z))


def filter_F_step(fs, u_in, dt):
    """Advance ``z' = alpha (u_in - z)`` one RK4 step; the output is ``z``."""
    fs = _filter_advance(fs, u_in, dt)
    return fs, fs.z


def filter_W_step(fs, u_in, dt):
    """Dirty derivative sharing the F state: returns ``alpha (u_in - z)``.

    Uses ``a p/(p+a) = a (1 - a/(p+a))`` so ``u_in`` is never differentiated.
    """
    fs = _filter_advance(fs, u_in, dt)
    return fs, fs.alpha * (u_in - fs.z)


# ---------------------------------------------------------------------------
# Gradient estimator


@dataclass(frozen=True)
class GradientEstimatorState:
    theta_hat: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.theta_hat, dtype=float))
        gain = np.asarray(self.gain, dtype=float)
        if gain.ndim == 0:
            gain = np.full(th.shape, float(gain))
        elif gain.ndim == 2:
            gain = np.diag(gain).copy()
        if gain.shape != th.shape:
            raise ConfigurationError(f"gain shape {gain.shape} does not match theta_hat {th.shape}")
        if np.any(gain <= 0):
            raise ConfigurationError("gradient gains must be strictly positive")
        if not np.all(np.isfinite(th)):
            raise ConfigurationError("theta_hat must be finite")
        object.__setattr__(self, "theta_hat", th)
        object.__setattr__(self, "gain", gain)


def regressor_matrix(psi, n_theta, n_y):
    """Normalise a regressor to the matrix ``M`` of the model ``Y = M theta``."""
    m = np.asarray(psi, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        # a vector regressor pairs with a scalar measurement: Y = psi^T theta
        m = m.reshape(1, -1) if n_y == 1 else np.diag(m)
    if m.shape != (n_y, n_theta):
        raise ConfigurationError(f"regressor shape {m.shape} incompatible with Y[{n_y}] and theta[{n_theta}]")
    return m


def gradient_rhs(theta_hat, gain, M, Y):
    """``theta_hat' = Gamma M^T (Y - M theta_hat)`` with diagonal ``Gamma``."""
    return gain * (M.T @ (Y - M @ theta_hat))


def gradient_step(ge, psi, Y, dt):
    """Advance the gradient estimator one RK4 step with ``psi`` and ``Y`` held."""
    Y = np.atleast_1d(np.asarray(Y, dtype=float))
    M = regressor_matrix(psi, ge.theta_hat.size, Y.size)
    gain = ge.gain
    th = rk4_step(lambda t, th: gradient_rhs(th, gain, M, Y), ge.theta_hat, 0.0, dt)
    return replace(ge, theta_hat=th)


# ---------------------------------------------------------------------------
# Finite differences


def fd_jacobian(g, x, h=1e-6):
    """Central-difference Jacobian, entry ``(i, j) = d g_i / d x_j``.

    The step for coordinate ``j`` is ``h * max(1, |x_j|)``.
    """
    if not h > 0:
        raise ConfigurationError(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    g0 = np.atleast_1d(np.asarray(g(x), dtype=float))
    if not np.all(np.isfinite(g0)):
        raise ObserverLabError(f"non-finite evaluation of g at sample {x}")
    jac = np.empty((g0.size, x.size))
    for j in range(x.size):
        hj = h * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        gp = np.atleast_1d(np.asarray(g(xp), dtype=float))
        gm = np.atleast_1d(np.asarray(g(xm), dtype=float))
        for sample, val in ((xp, gp), (xm, gm)):
            if not np.all(np.isfinite(val)):
                raise ObserverLabError(f"non-finite evaluation of g at sample {sample}")
        jac[:, j] = (gp - gm) / (2.0 * hj)
    return jac


# ---------------------------------------------------------------------------
# Measurement noise

_NOISE_BLOCK = 1024


@dataclass(frozen=True)
class NoiseSpec:
    amplitude: tuple
    sample_period: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        amp = tuple(float(a) for a in np.atleast_1d(self.amplitude))
        if any(a < 0 for a in amp):
            raise ConfigurationError("noise amplitudes must be non-negative")
        if not self.sample_period > 0:
            raise ConfigurationError("noise sample period must be positive")
        if int(self.seed) < 0:
            raise ConfigurationError("noise seed must be an unsigned integer")
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "seed", int(self.seed))


@lru_cache(maxsize=8)
def _noise_block(seed, block, n):
    rng = np.random.default_rng([seed, block])
    return rng.uniform(-1.0, 1.0, size=(_NOISE_BLOCK, n))


def noise_index(ns, t):
    """Index of the zero-order-hold interval containing ``t``."""
    # the small offset keeps k*Ts from landing in interval k-1 through roundoff
    return int(np.floor(t / ns.sample_period + 1e-9))


def noise_sample_at(ns, k):
    amp = np.asarray(ns.amplitude)
    if not np.any(amp):
        return np.zeros(amp.size)
    block = _noise_block(ns.seed, k // _NOISE_BLOCK, amp.size)
    return amp * block[k % _NOISE_BLOCK]


def noise_sample(ns, t):
    """Uniform noise in ``[-a_i, a_i]`` held constant over each sample period.

    The value is a pure function of ``(seed, floor(t / sample_period))``.
    """
    return noise_sample_at(ns, noise_index(ns, t))
