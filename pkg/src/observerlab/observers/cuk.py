"""The six Cuk-converter observers: KKLO, PEBO, [KKL+PEB]O, I&IO and two
high-gain observers.

The plant state is ordered ``s = (x1, x2, y1, y2) = (i1, v4, v2, i3)`` and
every observer returns a full-state estimate whose last two entries are the
measurements it was given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ConfigurationError
from ..plants import CukParams, DomainError
from .design import DesignTriple, GradientEstimator, RegressorBuilder
from .generic import KKLObserver, KKLPEBObserver, Observer, PEBObserver

OBSERVER_IDS = ("kklo", "pebo", "kklpebo", "iio", "hgo_tv", "hgo_lin")
VARIANTS = ("derived", "printed")


@dataclass(frozen=True)
class CukGains:
    alpha: float = 0.5
    gamma: float = 0.001
    Gamma: tuple = (0.001, 100.0)
    gamma1: float = 50.0
    gamma2: float = 1.0
    r1: float = 0.05
    r2: float = 0.005
    hgo_alpha: tuple = (2.0, 1.0, 2.0, 1.0)

    def __post_init__(self):
        for name in ("alpha", "gamma", "gamma1", "gamma2"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("r1", "r2"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in (0, 1]")
        Gamma = tuple(float(g) for g in self.Gamma)
        if len(Gamma) != 2 or min(Gamma) <= 0:
            raise ConfigurationError("Gamma must be two positive numbers")
        a = tuple(float(v) for v in self.hgo_alpha)
        if len(a) != 4 or min(a) <= 0:
            raise ConfigurationError("hgo_alpha must be four positive numbers")
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "hgo_alpha", a)


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


# ---------------------------------------------------------------------------
# Design triples


def kklo_design(p=None):
    """``phi = (x2, L1 x1 - C2 y1)`` with ``Lambda = diag(-G/C4, -(1-u)/L1)``."""
    p = p or CukParams()
    L1, C2, C4, E, G = p.L1, p.C2, p.C4, p.E, p.G
    k = 1.0 + C2 / L1
    jac = np.array([[0.0, 1.0, 0.0, 0.0], [L1, 0.0, -C2, 0.0]])

    def phi(s):
        return np.array([s[1], L1 * s[0] - C2 * s[2]])

    def lam(y, u):
        return np.array([-G / C4, -(1.0 - u) / L1])

    def B(y, u):
        y1, y2 = y[0], y[1]
        return np.array([y2 / C4, k * (u - 1.0) * y1 + E - u * y2])

    def phi_left(z, y):
        return np.array([(z[1] + C2 * y[0]) / L1, z[0], y[0], y[1]])

    return DesignTriple(phi=phi, B=B, phi_left=phi_left, n_xi=2, q=2, lambda_l=lam,
                        phi_jac=lambda s: jac, name="cuk-kklo")


def pebo_design(p=None):
    """``phi = (x1, x2 - G L3 y2 / C4)`` with ``Lambda = 0``."""
    p = p or CukParams()
    L1, L3, C4, E, G = p.L1, p.L3, p.C4, p.E, p.G
    c = G * L3 / C4
    jac = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, -c]])

    def phi(s):
        return np.array([s[0], s[1] - c * s[3]])

    def B(y, u):
        y1, y2 = y[0], y[1]
        return np.array([(E - (1.0 - u) * y1) / L1, (y2 + G * u * y1) / C4])

    def phi_left(z, y):
        return np.array([z[0], z[1] + c * y[1], y[0], y[1]])

    return DesignTriple(phi=phi, B=B, phi_left=phi_left, n_xi=2, q=0,
                        phi_jac=lambda s: jac, name="cuk-pebo")


_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def kklpebo_design(p=None):
    """``phi = (x1, x2)`` with ``A = diag(0, -G/C4)``.

    The zero (estimation) block comes first in this ordering, so the design
    uses the permutation ``P`` to bring ``A`` to the block form
    ``diag(-G/C4, 0)``; internally ``xi = (xi_L, xi_P)`` estimates
    ``(x2, x1 - theta)``.
    """
    p = p or CukParams()
    L1, C4, E, G = p.L1, p.C4, p.E, p.G
    jac = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])

    def phi(s):
        return np.array([s[0], s[1]])

    def B(y, u):
        return np.array([(E - (1.0 - u) * y[0]) / L1, y[1] / C4])

    def phi_left(z, y):
        return np.array([z[0], z[1], y[0], y[1]])

    return DesignTriple(phi=phi, B=B, phi_left=phi_left, n_xi=2, q=1,
                        lambda_l=np.array([-G / C4]), P=_SWAP,
                        phi_jac=lambda s: jac, name="cuk-kklpebo")


# ---------------------------------------------------------------------------
# Regressors and estimators


def pebo_estimator(p=None, alpha=0.5, Gamma=(0.001, 100.0)):
    """``Y = M theta`` with ``M = diag(F[1-u]/C2, -1/L3)``.

    Filter inputs: ``y1``, ``(1-u) xi1 + u y2``, ``1-u``, ``y2`` and
    ``(u y1 + xi2)/L3 + G y2/C4``.
    """
    p = p or CukParams()
    C2, L3, C4, G = p.C2, p.L3, p.C4, p.G
    m22 = -1.0 / L3

    def inputs(xi, y, u):
        y1, y2 = y[0], y[1]
        return np.array([y1, (1.0 - u) * xi[0] + u * y2, 1.0 - u, y2, (u * y1 + xi[1]) / L3 + G * y2 / C4])

    def assemble(z, v, xi, y, u):
        Y = np.array([alpha * (v[0] - z[0]) - z[1] / C2, alpha * (v[3] - z[3]) + z[4]])
        M = np.array([[z[2] / C2, 0.0], [0.0, m22]])
        return Y, M

    reg = RegressorBuilder(alpha=alpha, n_filters=5, inputs=inputs, assemble=assemble)
    return GradientEstimator(regressor=reg, gain=np.asarray(Gamma, dtype=float), n_theta=2)


def kklpebo_estimator(p=None, alpha=0.5, gamma=0.001, variant="derived"):
    """``Y = W[y1] - F[(1-u) xi_s + u y2]/C2``, ``M = F[1-u]/C2``.

    ``xi_s`` is the open-loop coordinate (estimating ``x1 - theta``) in the
    derived variant and the Luenberger coordinate in the printed one.
    """
    _check_variant(variant)
    p = p or CukParams()
    C2 = p.C2
    # internal ordering is (xi_L, xi_P)
    idx = 1 if variant == "derived" else 0

    def inputs(xi, y, u):
        return np.array([y[0], (1.0 - u) * xi[idx] + u * y[1], 1.0 - u])

    def assemble(z, v, xi, y, u):
        return alpha * (v[0] - z[0]) - z[1] / C2, z[2] / C2

    reg = RegressorBuilder(alpha=alpha, n_filters=3, inputs=inputs, assemble=assemble)
    return GradientEstimator(regressor=reg, gain=np.array([gamma]), n_theta=1)


# ---------------------------------------------------------------------------
# Closed-form observers


class CukIIO(Observer):
    """Immersion-and-invariance observer with ``beta = xi + (C2 g1 y1, -L3 g2 y2)``.

    The derived variant is the instantiation of the generic I&I observer for
    ``phi(x) = (x1, x2)``; the printed variant flips the sign of the
    ``g1 u y2`` term and of the ``L3 g2 y2`` offset in the estimate.
    """

    n_chi = 2

    def __init__(self, p=None, gamma1=50.0, gamma2=1.0, variant="derived", name="iio"):
        _check_variant(variant)
        if not (gamma1 > 0 and gamma2 > 0):
            raise ConfigurationError("gamma1 and gamma2 must be positive")
        self.p = p or CukParams()
        self.gamma1 = float(gamma1)
        self.gamma2 = float(gamma2)
        self.variant = variant
        self.name = name
        self._sign = 1.0 if variant == "derived" else -1.0

    def manifold(self, chi, y):
        p, g1, g2 = self.p, self.gamma1, self.gamma2
        return np.array([chi[0] + p.C2 * g1 * y[0], chi[1] - self._sign * p.L3 * g2 * y[1]])

    def target(self, x):
        return np.array([x[0], x[1]])

    def rhs(self, t, chi, y, u):
        p, g1, g2 = self.p, self.gamma1, self.gamma2
        y1, y2 = y[0], y[1]
        z1 = chi[0] + p.C2 * g1 * y1
        # the dynamics use xi2 - L3 g2 y2 in both variants
        z2 = chi[1] - p.L3 * g2 * y2
        d1 = -g1 * (1.0 - u) * z1 - self._sign * g1 * u * y2 + (p.E - (1.0 - u) * y1) / p.L1
        d2 = (y2 - p.G * z2) / p.C4 - g2 * (u * y1 + z2)
        return np.array([d1, d2])

    def estimate(self, chi, y, u):
        b = self.manifold(chi, y)
        return np.array([b[0], b[1], y[0], y[1]])


class HGOTimeVarying(Observer):
    """High-gain observer copying the averaged model, ``x_hat = (xi2, xi4)``."""

    n_chi = 4

    def __init__(self, p=None, r=0.05, alphas=(2.0, 1.0, 2.0, 1.0), name="hgo_tv"):
        if not 0 < r <= 1:
            raise ConfigurationError("r must lie in (0, 1]")
        if len(alphas) != 4 or min(alphas) <= 0:
            raise ConfigurationError("four positive alphas are required")
        self.p = p or CukParams()
        self.r = float(r)
        self.alphas = tuple(float(a) for a in alphas)
        self.name = name

    def rhs(self, t, chi, y, u):
        p, r = self.p, self.r
        a1, a2, a3, a4 = self.alphas
        y1, y2 = y[0], y[1]
        e1 = y1 - chi[0]
        e3 = y2 - chi[2]
        return np.array([
            ((1.0 - u) * chi[1] + u * y2) / p.C2 + a1 / r * e1,
            (p.E - (1.0 - u) * y1) / p.L1 + a2 / r ** 2 * e1,
            -(chi[3] + u * y1) / p.L3 + a3 / r * e3,
            (y2 - p.G * chi[3]) / p.C4 + a4 / r ** 2 * e3,
        ])

    def estimate(self, chi, y, u):
        return np.array([chi[1], chi[3], y[0], y[1]])


class HGOLinear(Observer):
    """High-gain differentiator of ``y1`` and ``y2`` followed by an algebraic
    inversion of the output equations. The estimate divides by ``1 - u``."""

    n_chi = 4
    guard = 1e-3

    def __init__(self, p=None, r=0.005, alphas=(2.0, 1.0, 2.0, 1.0), name="hgo_lin"):
        if not 0 < r <= 1:
            raise ConfigurationError("r must lie in (0, 1]")
        if len(alphas) != 4 or min(alphas) <= 0:
            raise ConfigurationError("four positive alphas are required")
        self.p = p or CukParams()
        self.r = float(r)
        self.alphas = tuple(float(a) for a in alphas)
        self.name = name

    def rhs(self, t, chi, y, u):
        p, r = self.p, self.r
        a1, a2, a3, a4 = self.alphas
        y1, y2 = y[0], y[1]
        e1 = y1 - chi[0]
        e3 = y2 - chi[2]
        return np.array([
            chi[1] + a1 / r * e1,
            (p.E - (1.0 - u) * y1) / p.L1 + a2 / r ** 2 * e1,
            chi[3] + a3 / r * e3,
            (y2 - p.G * chi[3]) / p.C4 + a4 / r ** 2 * e3,
        ])

    def estimate(self, chi, y, u):
        if abs(1.0 - u) < self.guard:
            raise DomainError(f"hgo_lin estimate undefined: |1-u| = {abs(1.0 - u):.3g} < {self.guard}")
        p = self.p
        y1, y2 = y[0], y[1]
        return np.array([(p.C2 * chi[1] - u * y2) / (1.0 - u), -p.L3 * chi[3] - u * y1, y1, y2])


# ---------------------------------------------------------------------------
# Factory


def build_observer(obs_id, p=None, gains=None, kklpebo_variant="derived", iio_variant="derived"):
    p = p or CukParams()
    g = gains or CukGains()
    if obs_id == "kklo":
        return KKLObserver(kklo_design(p), name="kklo")
    if obs_id == "pebo":
        return PEBObserver(pebo_design(p), pebo_estimator(p, g.alpha, g.Gamma), name="pebo")
    if obs_id == "kklpebo":
        return KKLPEBObserver(kklpebo_design(p), kklpebo_estimator(p, g.alpha, g.gamma, kklpebo_variant),
                              name="kklpebo")
    if obs_id == "iio":
        return CukIIO(p, g.gamma1, g.gamma2, iio_variant)
    if obs_id == "hgo_tv":
        return HGOTimeVarying(p, g.r1, g.hgo_alpha)
    if obs_id == "hgo_lin":
        return HGOLinear(p, g.r2, g.hgo_alpha)
    raise ConfigurationError(f"unknown Cuk observer {obs_id!r}; valid ids: {', '.join(OBSERVER_IDS)}")


def build_observers(ids=OBSERVER_IDS, p=None, gains=None, **variants):
    return [build_observer(i, p, gains, **variants) for i in ids]
