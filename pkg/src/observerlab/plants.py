"""Benchmark plants: the averaged Cuk converter, a 3-state academic system and
a configurable instance of the cascade class handled by the combined observer.

A plant bundles a vector field ``f(x, u)``, a partial-state output map and a
sampling box used by the verification routines. Controllers are plain
callables ``u = controller(t, x)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .numerics import ConfigurationError, IntegrationError, ObserverLabError


class DomainError(ObserverLabError, ValueError):
    """Input outside the admissible range of a model."""


@dataclass(frozen=True)
class PlantModel:
    name: str
    state_names: tuple
    output_index: tuple
    field: Callable
    params: dict = field(default_factory=dict)
    state_box: np.ndarray | None = None
    input_range: tuple = (0.0, 1.0)
    x0: np.ndarray | None = None
    # optional input-affine split f(x, u) = drift(x) + input_field(x) * u
    drift: Callable | None = None
    input_field: Callable | None = None

    @property
    def n(self):
        return len(self.state_names)

    @property
    def p(self):
        return len(self.output_index)

    @property
    def m(self):
        return 1

    @property
    def estimated_index(self):
        return tuple(i for i in range(self.n) if i not in self.output_index)

    def output(self, x):
        return np.asarray(x, dtype=float)[list(self.output_index)]

    def output_jacobian(self, x=None):
        c = np.zeros((self.p, self.n))
        for row, i in enumerate(self.output_index):
            c[row, i] = 1.0
        return c

    def initial_state(self):
        return np.zeros(self.n) if self.x0 is None else np.array(self.x0, dtype=float)


# ---------------------------------------------------------------------------
# Cuk converter


@dataclass(frozen=True)
class CukParams:
    L1: float = 10e-3
    C2: float = 22.0e-6
    L3: float = 30e-3
    C4: float = 22.9e-6
    E: float = 12.0
    G: float = 0.0447

    def __post_init__(self):
        for name in ("L1", "C2", "L3", "C4", "E", "G"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"Cuk parameter {name} must be strictly positive")


def cuk_field(x, y, u, p):
    """Averaged Cuk model. ``x = (i1, v4)`` is unmeasured, ``y = (v2, i3)``.

    Returns ``(xdot, ydot)``.
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"duty cycle must lie in (0, 1), got {u}")
    x1, x2 = x
    y1, y2 = y
    xdot = np.array([
        -(1.0 - u) * y1 / p.L1 + p.E / p.L1,
        y2 / p.C4 - p.G * x2 / p.C4,
    ])
    ydot = np.array([
        (1.0 - u) * x1 / p.C2 + u * y2 / p.C2,
        -u * y1 / p.L3 - x2 / p.L3,
    ])
    return xdot, ydot


def cuk_equilibrium(u, p):
    """Steady state ``(x1, x2, y1, y2)`` for a constant duty cycle."""
    y1 = p.E / (1.0 - u)
    x2 = -u * y1
    y2 = p.G * x2
    x1 = -u * y2 / (1.0 - u)
    return np.array([x1, x2, y1, y2])


@dataclass(frozen=True)
class ControlSchedule:
    vd_segments: tuple = ((0.0, -15.0), (0.2, -25.0), (0.4, -15.0), (0.6, -25.0), (0.8, -15.0), (1.0, -25.0))
    lambda_c: float = 0.1
    u_clamp: tuple = (0.05, 0.95)

    def __post_init__(self):
        segs = tuple((float(s), float(v)) for s, v in self.vd_segments)
        if not segs or segs[0][0] != 0.0:
            raise ConfigurationError("the first set-point segment must start at t=0")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigurationError("set-point segments must be strictly ordered in time")
        lo, hi = (float(v) for v in self.u_clamp)
        if not 0.0 < lo < hi < 1.0:
            raise ConfigurationError(f"u_clamp must satisfy 0 < lo < hi < 1, got {self.u_clamp}")
        if self.lambda_c < 0:
            raise ConfigurationError("lambda_c must be non-negative")
        object.__setattr__(self, "vd_segments", segs)
        object.__setattr__(self, "u_clamp", (lo, hi))

    def vd(self, t):
        value = self.vd_segments[0][1]
        for start, vd in self.vd_segments:
            if t >= start:
                value = vd
            else:
                break
        return value


def cuk_control(x, t, sched, p):
    """Ideal full-state feedback duty cycle, clamped to ``sched.u_clamp``."""
    x1, x2, v2 = x[0], x[1], x[2]
    vd = abs(sched.vd(t))
    s = p.G * vd * v2 + p.E * (x2 - x1)
    u = vd / (vd + p.E) + sched.lambda_c * s / (1.0 + s * s)
    lo, hi = sched.u_clamp
    return min(max(u, lo), hi)


class CukController:
    def __init__(self, sched, params):
        self.sched = sched
        self.params = params

    def __call__(self, t, x):
        return cuk_control(x, t, self.sched, self.params)

    def reference_state(self, t):
        vd = abs(self.sched.vd(t))
        return cuk_equilibrium(vd / (vd + self.params.E), self.params)


def cuk_plant(p=None, x0=None, box_scale=2.0, u_ref=None):
    """Cuk converter as a 4-state plant ``(x1, x2, y1, y2)`` with output ``(y1, y2)``."""
    p = p or CukParams()

    def f(s, u):
        x1, x2, y1, y2 = s[0], s[1], s[2], s[3]
        return np.array([
            -(1.0 - u) * y1 / p.L1 + p.E / p.L1,
            y2 / p.C4 - p.G * x2 / p.C4,
            (1.0 - u) * x1 / p.C2 + u * y2 / p.C2,
            -u * y1 / p.L3 - x2 / p.L3,
        ])

    def drift(s):
        x1, x2, y1, y2 = s
        return np.array([(p.E - y1) / p.L1, (y2 - p.G * x2) / p.C4, x1 / p.C2, -x2 / p.L3])

    def input_field(s):
        x1, x2, y1, y2 = s
        return np.array([y1 / p.L1, 0.0, (y2 - x1) / p.C2, -y1 / p.L3])

    if u_ref is None:
        u_ref = 15.0 / (15.0 + p.E)
    eq = np.abs(cuk_equilibrium(u_ref, p))
    box = np.column_stack((-box_scale * eq, box_scale * eq))
    return PlantModel(
        name="cuk",
        state_names=("x1", "x2", "y1", "y2"),
        output_index=(2, 3),
        field=f,
        params=asdict(p),
        state_box=box,
        input_range=(0.05, 0.95),
        x0=None if x0 is None else np.asarray(x0, dtype=float),
        drift=drift,
        input_field=input_field,
    )


# ---------------------------------------------------------------------------
# Academic 3-state example


def acad3_field(x, u):
    x1, x2, x3 = x[0], x[1], x[2]
    try:
        e3 = math.exp(x3)
    except OverflowError:
        raise IntegrationError(float("nan"), x, f"exp(x3) overflow at x3={x3}") from None
    return np.array([
        -x1 ** 3 + e3,
        -x2 + x1 ** 2 + math.sin(x1),
        1.0 / (x1 ** 2 + 1.0) + x1 * u,
    ])


def acad3_equilibrium(u=-1.0):
    """Equilibrium for a constant input ``u < 0``."""
    if not u < 0:
        raise DomainError("the academic system only has an equilibrium for u < 0")
    x1 = brentq(lambda s: 1.0 / (s * s + 1.0) + s * u, 0.0, 1.0 / abs(u) + 1.0, xtol=1e-15)
    x3 = math.log(x1 ** 3)
    x2 = x1 ** 2 + math.sin(x1)
    return np.array([x1, x2, x3])


def acad3_plant(x0=(0.8, 1.0, -1.0)):
    return PlantModel(
        name="acad3",
        state_names=("x1", "x2", "x3"),
        output_index=(0,),
        field=acad3_field,
        state_box=np.array([[-2.0, 2.0], [-3.0, 3.0], [-3.0, 1.0]]),
        input_range=(-2.0, 2.0),
        x0=np.asarray(x0, dtype=float),
        drift=lambda x: acad3_field(x, 0.0),
        input_field=lambda x: np.array([0.0, 0.0, x[0]]),
    )


class ConstantInput:
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, t, x):
        return self.value


class SineInput:
    def __init__(self, amplitude=1.0, omega=1.0):
        self.amplitude = amplitude
        self.omega = omega

    def __call__(self, t, x):
        return self.amplitude * math.sin(self.omega * t)


# ---------------------------------------------------------------------------
# Cascade class


@dataclass(frozen=True)
class CascadeSpec:
    """Blocks of the cascade ``x1 <- (x2, x3, x4)`` with ``y = x1``.

    ``f1(x1, x2, x3, u)``, ``f2(x1, u)``, ``f3(x1, x2, u)``, ``f4(x1, x2, x3, u)``
    and ``b(x1, x2, x3, u)`` take and return 1-D arrays. Entry ``k`` (0-based)
    of the ``x1`` equation receives the extra term ``b . x4``.
    """

    n: tuple
    A2: np.ndarray
    A3: np.ndarray
    f1: Callable
    f2: Callable
    f3: Callable
    f4: Callable
    b: Callable
    k: int = 0
    hurwitz_certified: bool = False

    def split(self, x):
        n1, n2, n3, n4 = self.n
        i2, i3, i4 = n1, n1 + n2, n1 + n2 + n3
        return x[:i2], x[i2:i3], x[i3:i4], x[i4:i4 + n4]


def _check_hurwitz(name, A):
    eig = np.linalg.eigvals(np.atleast_2d(A))
    bad = [e for e in eig if not e.real < 0]
    if bad:
        raise ConfigurationError(f"{name} is not Hurwitz: eigenvalue {bad[0]} has non-negative real part")


def cascade_build(spec, x0=None, input_range=(-1.0, 1.0), probe_seed=0):
    """Assemble the cascade plant; rejects non-Hurwitz ``A2``/``A3``."""
    n1, n2, n3, n4 = spec.n
    if min(spec.n) < 1:
        raise ConfigurationError("all cascade blocks need dimension >= 1")
    if not 0 <= spec.k < n1:
        raise ConfigurationError(f"k must index the x1 block (0..{n1 - 1}), got {spec.k}")
    A2 = np.atleast_2d(np.asarray(spec.A2, dtype=float))
    A3 = np.atleast_2d(np.asarray(spec.A3, dtype=float))
    if A2.shape != (n2, n2) or A3.shape != (n3, n3):
        raise ConfigurationError("A2/A3 shapes do not match the block dimensions")
    if not spec.hurwitz_certified:
        _check_hurwitz("A2", A2)
        _check_hurwitz("A3", A3)

    def f(x, u):
        x1, x2, x3, x4 = spec.split(x)
        dx1 = np.array(spec.f1(x1, x2, x3, u), dtype=float).reshape(n1)
        dx1[spec.k] += float(np.dot(spec.b(x1, x2, x3, u), x4))
        dx2 = A2 @ x2 + np.asarray(spec.f2(x1, u), dtype=float).reshape(n2)
        dx3 = A3 @ x3 + np.asarray(spec.f3(x1, x2, u), dtype=float).reshape(n3)
        dx4 = np.asarray(spec.f4(x1, x2, x3, u), dtype=float).reshape(n4)
        return np.concatenate((dx1, dx2, dx3, dx4))

    n = sum(spec.n)
    box = np.tile([-2.0, 2.0], (n, 1))

    # cheap screen for a regressor that vanishes identically
    rng = np.random.default_rng(probe_seed)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(64, n))
    us = rng.uniform(*input_range, size=64)
    if all(not np.any(spec.b(*spec.split(pt)[:3], uu)) for pt, uu in zip(pts, us)):
        warnings.warn("cascade regressor b vanishes on all probe points; the excitation condition cannot hold",
                      RuntimeWarning, stacklevel=2)

    names = tuple(f"x{i + 1}" for i in range(n))
    return PlantModel(
        name="cascade",
        state_names=names,
        output_index=tuple(range(n1)),
        field=f,
        params={"n": spec.n, "k": spec.k},
        state_box=box,
        input_range=input_range,
        x0=None if x0 is None else np.asarray(x0, dtype=float),
    )


def demo_cascade_spec(b_scale=1.0):
    """Scalar-block instance: ``x1' = -x1 + (1 + sin^2 u) x4``, ``u = sin t``."""
    return CascadeSpec(
        n=(1, 1, 1, 1),
        A2=np.array([[-1.0]]),
        A3=np.array([[-2.0]]),
        f1=lambda x1, x2, x3, u: -x1,
        f2=lambda x1, u: x1,
        f3=lambda x1, x2, u: x1 + x2,
        f4=lambda x1, x2, x3, u: np.array([math.sin(u)]),
        b=lambda x1, x2, x3, u: np.array([b_scale * (1.0 + math.sin(u) ** 2)]),
        k=0,
    )


def demo_cascade_plant(x0=(0.5, 0.0, 0.0, 1.0)):
    return cascade_build(demo_cascade_spec(), x0=x0)
