"""Numerical certification of the design identities.

* :func:`pde_residual` checks ``d phi/dx f = A phi + B`` on Halton samples.
* :func:`manifold_monitor` evaluates the off-the-manifold coordinate
  ``d_M = beta(y, chi) - phi(x)`` along a recorded run.
* :func:`equivalence_check` runs a coordinate-change observer and its
  immersion-and-invariance instantiation side by side.
* :func:`pe_check` tests the windowed excitation Gramian of a regressor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import qmc

from .numerics import ConfigurationError, fd_jacobian
from .observers.generic import CoordinateObserver, iio_from_coordinate_observer

PDE_MODES = ("general", "block", "affine")


@dataclass
class PdeCheckReport:
    max_residual: float
    worst_point: tuple
    samples: int
    mode: str
    finite: bool = True
    block_residuals: dict | None = None
    # residual divided by the largest term of the identity at the same sample
    max_relative: float = 0.0

    def __str__(self):
        x, u = self.worst_point
        return (f"mode={self.mode} samples={self.samples} max_residual={self.max_residual:.3e} "
                f"worst x={np.array2string(np.asarray(x), precision=6)} u={u:.6g}")


def halton_points(box, n_samples, seed=None):
    """``n_samples`` Halton points in the axis-aligned ``box`` (rows ``[lo, hi]``).

    Unscrambled by default so the sample set (and hence the reported worst
    point) is reproducible.
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    if np.any(box[:, 1] < box[:, 0]):
        raise ConfigurationError("box rows must be [lo, hi] with lo <= hi")
    sampler = qmc.Halton(d=box.shape[0], scramble=seed is not None, seed=seed)
    pts = sampler.random(n_samples)
    return box[:, 0] + pts * (box[:, 1] - box[:, 0])


def _check_box(box, plant):
    if plant.state_box is None:
        return
    sb = np.asarray(plant.state_box, dtype=float)
    if np.any(box[:, 0] < sb[:, 0] - 1e-12) or np.any(box[:, 1] > sb[:, 1] + 1e-12):
        raise ConfigurationError("sampling box must lie within the plant state box")


def pde_residual(plant, design, n_samples=1000, box=None, u_range=None, mode="general", use_fd=False):
    """Sup-norm of the design-PDE residual over quasi-random ``(x, u)`` samples.

    ``general``: ``r = d phi/dx f(x, u) - A(y, u) phi(x) - B(y, u)``.
    ``block``: the same identity split into the Luenberger rows
    ``d phi_L f - Lambda_L phi_L - B_L`` and the open-loop rows
    ``d phi_P f - B_P`` (coordinates after ``P``).
    ``affine``: for ``f = F(x) + g(x) u``, checks the drift and input parts
    separately: ``d phi F - A0 phi - B_F`` and ``d phi g - A1 phi - B_g``
    with ``A(u) = A0 + A1 u``.
    """
    if mode not in PDE_MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {PDE_MODES}")
    if n_samples < 1:
        raise ConfigurationError("n_samples must be positive")
    box = np.asarray(plant.state_box if box is None else box, dtype=float)
    _check_box(box, plant)
    lo, hi = plant.input_range if u_range is None else u_range
    if mode == "affine" and (plant.drift is None or plant.input_field is None):
        raise ConfigurationError(f"plant {plant.name} has no input-affine split")

    full_box = np.vstack((box, [[lo, hi]]))
    pts = halton_points(full_box, n_samples)
    n = plant.n

    def jac(x):
        return fd_jacobian(design.phi, x) if use_fd else design.jacobian(x)

    worst = -1.0
    worst_rel = 0.0
    worst_pt = (pts[0, :n], float(pts[0, n]))
    finite = True
    blocks = {"L": 0.0, "P": 0.0} if mode == "block" else None
    for row in pts:
        x, u = row[:n], float(row[n])
        y = plant.output(x)
        J = jac(x)
        ph = np.asarray(design.phi(x), dtype=float)
        if mode == "affine":
            if design.B_F is not None and design.B_g is not None:
                bF = np.asarray(design.B_F(y), dtype=float)
                bg = np.asarray(design.B_g(y), dtype=float)
            else:
                bF = np.asarray(design.B(y, 0.0), dtype=float)
                bg = np.asarray(design.B(y, 1.0), dtype=float) - bF
            A0 = design.A(y, 0.0)
            A1 = design.A(y, 1.0) - A0
            terms = (J @ plant.drift(x), A0 @ ph, bF, J @ plant.input_field(x), A1 @ ph, bg)
            r = np.concatenate((terms[0] - terms[1] - terms[2], terms[3] - terms[4] - terms[5]))
        else:
            terms = (J @ np.asarray(plant.field(x, u), dtype=float), design.A(y, u) @ ph,
                     np.asarray(design.B(y, u), dtype=float))
            r = terms[0] - terms[1] - terms[2]
            if mode == "block":
                rx = design.to_xi(r)
                blocks["L"] = max(blocks["L"], float(np.max(np.abs(rx[:design.q]), initial=0.0)))
                blocks["P"] = max(blocks["P"], float(np.max(np.abs(rx[design.q:]), initial=0.0)))
        if not np.all(np.isfinite(r)):
            finite = False
            worst_pt = (x.copy(), u)
            worst = np.inf
            break
        m = float(np.max(np.abs(r)))
        scale = max(float(np.max(np.abs(v), initial=0.0)) for v in terms)
        if scale > 0:
            worst_rel = max(worst_rel, m / scale)
        if m > worst:
            worst, worst_pt = m, (x.copy(), u)
    return PdeCheckReport(max_residual=worst, worst_point=worst_pt, samples=n_samples, mode=mode,
                          finite=finite, block_residuals=blocks, max_relative=worst_rel)


def left_inverse_error(plant, design, n_samples=200, box=None):
    """``max |phi_left(phi(x), h(x)) - x|`` over Halton samples of the box."""
    box = np.asarray(plant.state_box if box is None else box, dtype=float)
    err = 0.0
    for x in halton_points(box, n_samples):
        xr = design.phi_left(np.asarray(design.phi(x), dtype=float), plant.output(x))
        err = max(err, float(np.max(np.abs(np.asarray(xr) - x))))
    return err


# ---------------------------------------------------------------------------
# Off-the-manifold coordinate


@dataclass
class ManifoldTrace:
    t: np.ndarray
    d: np.ndarray
    norm: np.ndarray
    decaying: bool


def manifold_monitor(trace, beta, phi):
    """``d_M(t) = beta(y(t), chi(t)) - phi(x(t))`` along a recorded trace.

    ``decaying`` is true when the final norm is below the norm at 10% of the
    horizon.
    """
    d = np.array([np.asarray(beta(y, c), dtype=float) - np.asarray(phi(x), dtype=float)
                  for x, y, c in zip(trace.x, trace.y_meas, trace.chi)])
    if d.ndim == 1:
        d = d.reshape(-1, 1)
    norm = np.linalg.norm(d, axis=1)
    i10 = int(np.searchsorted(trace.t, trace.t[0] + 0.1 * (trace.t[-1] - trace.t[0])))
    decaying = bool(norm.size > 1 and norm[-1] < norm[min(i10, norm.size - 1)])
    return ManifoldTrace(t=trace.t.copy(), d=d, norm=norm, decaying=decaying)


def observer_manifold(obs):
    """``(beta(y, chi), phi(x))`` callables of an observer, for :func:`manifold_monitor`."""
    def beta(y, chi):
        return obs.manifold(chi, y)

    return beta, obs.target


# ---------------------------------------------------------------------------
# Observer equivalence


@dataclass
class EquivalenceReport:
    chi_deviation: float
    beta_deviation: float
    estimate_deviation: float
    horizon: float
    dt: float
    n_steps: int
    name: str = ""

    def passed(self, tol=1e-8):
        return self.chi_deviation <= tol

    def __str__(self):
        return (f"{self.name}: sup|chi_iio - chi|={self.chi_deviation:.3e} "
                f"sup|beta_iio - beta|={self.beta_deviation:.3e} "
                f"sup|xhat_iio - xhat|={self.estimate_deviation:.3e} "
                f"(horizon={self.horizon:g}s, dt={self.dt:g}s)")


def equivalence_check(plant, observer, controller, horizon=0.5, dt=1e-5, Q=None, x0=None):
    """Run ``observer`` and its I&I instantiation on the same noiseless run.

    The I&I observer uses ``beta = xi + col(0_q, theta_hat)`` on the same
    internal state ``chi``, ``beta`` independent of ``y``, and ``Q = 0``
    unless given; both start from ``observer.initial_state()``. Returns the
    sup-norm deviations of ``chi``, of ``beta`` and of the state estimate.
    """
    from .harness.simulation import raise_on_failure, simulate

    if not isinstance(observer, CoordinateObserver):
        raise ConfigurationError("equivalence_check needs a KKL/PEB/combined observer")
    iio = iio_from_coordinate_observer(observer, plant, Q=Q, name=f"iio[{observer.name}]")
    res = raise_on_failure(simulate(plant, [observer, iio], controller, dt, horizon, x0=x0))
    a, b = res.traces[observer.name], res.traces[iio.name]
    est = list(plant.estimated_index)

    def sup(v):
        return float(np.max(np.abs(v))) if v.size else 0.0

    return EquivalenceReport(
        chi_deviation=sup(b.chi - a.chi),
        beta_deviation=sup(b.dM - a.dM),
        estimate_deviation=sup(b.xhat[:, est] - a.xhat[:, est]),
        horizon=horizon, dt=dt, n_steps=res.n_steps, name=observer.name,
    )


def b2_identity_residual(observer, trace, plant):
    """Left side of the on-manifold identity ``d/dt N(zeta, phi_P(x), y) = 0``.

    Evaluated at the recorded rows with ``xi_P`` replaced by ``phi_P(x)``.
    For offsets ``N = param_map(Theta_hat)`` only the estimator term
    ``dN/dzeta * zeta'`` contributes. Returns the sup-norm over the rows.
    """
    est = observer.estimator
    if est is None:
        return 0.0
    nx, q = observer.n_xi, observer.q
    worst = 0.0
    for x, y, u, chi in zip(trace.x, trace.y_meas, trace.u, trace.chi):
        xi = chi[:nx].copy()
        xi[q:] = observer.target(x)[q:]
        zeta = chi[nx:]
        val = est.offset_jacobian(zeta) @ est.rhs(zeta, xi, y, u)
        worst = max(worst, float(np.max(np.abs(val))))
    return worst


# ---------------------------------------------------------------------------
# Persistency of excitation


@dataclass
class PECheckResult:
    ok: bool
    min_eigenvalue: float
    window_starts: np.ndarray
    window_min_eig: np.ndarray
    delta: float
    T: float


def pe_check(b_trace, t, T, delta, stride=1):
    """Check ``int_t^{t+T} b b^T ds >= delta I`` on every window start ``t``.

    ``b_trace`` has one regressor vector per row of ``t``. The windowed
    integrals come from a cumulative trapezoid, linearly interpolated at
    ``t + T``. Windows start at every ``stride``-th sample with ``t + T``
    inside the trace.
    """
    t = np.asarray(t, dtype=float)
    b = np.asarray(b_trace, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if b.shape[0] != t.size:
        raise ConfigurationError("b_trace and t must have the same number of rows")
    if not T > 0:
        raise ConfigurationError("window length T must be positive")
    if t.size < 2 or t[-1] - t[0] < T:
        raise ConfigurationError(f"trace spans {t[-1] - t[0] if t.size else 0:g}s, shorter than T={T:g}s")
    k = b.shape[1]
    outer = (b[:, :, None] * b[:, None, :]).reshape(t.size, k * k)
    C = cumulative_trapezoid(outer, t, axis=0, initial=0.0)
    starts = np.arange(0, t.size, int(stride))
    starts = starts[t[starts] + T <= t[-1] + 1e-12]
    ends = np.minimum(t[starts] + T, t[-1])
    Cend = np.column_stack([np.interp(ends, t, C[:, j]) for j in range(k * k)])
    G = (Cend - C[starts]).reshape(-1, k, k)
    eig = np.linalg.eigvalsh(G)[:, 0]
    m = float(eig.min())
    return PECheckResult(ok=bool(m >= delta), min_eigenvalue=m, window_starts=t[starts],
                         window_min_eig=eig, delta=float(delta), T=float(T))
