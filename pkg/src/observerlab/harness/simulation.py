"""Lockstep simulation of a plant and any number of observers.

The plant and all observer states are advanced as one augmented ODE with
classical RK4, so every observer sees the measurement of the RK stage it is
evaluated at. The control is recomputed from the true state at every stage
(ideal state feedback). Measurement noise is held constant over each step.

If an observer fails (non-finite state or an exception in its model) it is
frozen, its remaining rows are filled with NaN and the failure is recorded;
the plant and the other observers keep running. A plant failure stops the
run and the partial traces are returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..numerics import ConfigurationError, IntegrationError, NoiseSpec, noise_index, noise_sample_at


@dataclass
class Failure:
    component: str
    t: float
    message: str

    def __str__(self):
        return f"{self.component} failed at t={self.t:.9g}: {self.message}"


@dataclass
class SimTrace:
    """Decimated record of one observer running against the plant."""

    name: str
    state_names: tuple
    output_index: tuple
    t: np.ndarray
    x: np.ndarray
    y_meas: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    xhat: np.ndarray
    theta_hat: np.ndarray | None = None
    theta: np.ndarray | None = None
    dM: np.ndarray | None = None
    dt: float = 0.0
    decimation: int = 1
    failure: Failure | None = None

    @property
    def estimated_index(self):
        return tuple(i for i in range(len(self.state_names)) if i not in self.output_index)

    @property
    def xerr(self):
        return self.xhat - self.x

    @property
    def y_clean(self):
        return self.x[:, list(self.output_index)]

    @property
    def n_rows(self):
        return self.t.size


@dataclass
class SimResult:
    traces: dict
    failures: list = field(default_factory=list)
    plant_failure: Failure | None = None
    n_steps: int = 0

    @property
    def ok(self):
        return not self.failures and self.plant_failure is None


def n_steps_for(horizon, dt):
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if horizon < 0:
        raise ConfigurationError(f"horizon must be non-negative, got {horizon}")
    return int(math.floor(horizon / dt + 1e-9))


class _Block:
    __slots__ = ("obs", "a", "b", "active", "error")

    def __init__(self, obs, a, b):
        self.obs, self.a, self.b = obs, a, b
        self.active = True
        self.error = None


def simulate(plant, observers, controller, dt, horizon, noise=None, decimation=1, x0=None, chi0=None):
    """Run ``plant`` under ``controller(t, x)`` with ``observers`` fed by the noisy output.

    Returns a :class:`SimResult` with one :class:`SimTrace` per observer
    (keyed by ``observer.name``; a plant-only trace under ``"plant"`` when no
    observer is given).
    """
    n_steps = n_steps_for(horizon, dt)
    decimation = int(decimation)
    if decimation < 1:
        raise ConfigurationError("decimation must be a positive integer")
    if noise is not None:
        if not isinstance(noise, NoiseSpec):
            raise ConfigurationError("noise must be a NoiseSpec or None")
        if len(noise.amplitude) != plant.p:
            raise ConfigurationError(f"noise has {len(noise.amplitude)} channels, plant has {plant.p} outputs")
        if dt > noise.sample_period * (1 + 1e-12):
            raise ConfigurationError("dt must not exceed the noise sample period")
    names = [o.name for o in observers]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"observer names must be unique, got {names}")

    n = plant.n
    out_idx = list(plant.output_index)
    f = plant.field
    x_init = plant.initial_state() if x0 is None else np.asarray(x0, dtype=float)
    if x_init.shape != (n,):
        raise ConfigurationError(f"initial state must have {n} entries")

    parts = [x_init]
    blocks = []
    pos = n
    for j, obs in enumerate(observers):
        c0 = obs.initial_state() if chi0 is None or chi0[j] is None else np.asarray(chi0[j], dtype=float)
        if c0.shape != (obs.n_chi,):
            raise ConfigurationError(f"initial state of {obs.name} must have {obs.n_chi} entries")
        parts.append(c0)
        blocks.append(_Block(obs, pos, pos + obs.n_chi))
        pos += obs.n_chi
    S = np.concatenate(parts).astype(float)

    amp_on = noise is not None and any(noise.amplitude)
    zero_noise = np.zeros(plant.p)

    def noise_at(t):
        if not amp_on:
            return zero_noise
        return noise_sample_at(noise, noise_index(noise, t))

    def deriv(t, S, nz):
        x = S[:n]
        u = controller(t, x)
        y = x[out_idx] + nz
        d = np.empty_like(S)
        d[:n] = f(x, u)
        for blk in blocks:
            if blk.active and blk.error is None:
                try:
                    d[blk.a:blk.b] = blk.obs.rhs(t, S[blk.a:blk.b], y, u)
                    continue
                except (ArithmeticError, ValueError) as exc:
                    blk.error = exc
            d[blk.a:blk.b] = 0.0
        return d

    # recording buffers
    # every decimation-th step, plus the final step when it falls in between
    n_rows = n_steps // decimation + 1 + (1 if n_steps % decimation else 0)
    rec_t = np.full(n_rows, np.nan)
    rec_x = np.full((n_rows, n), np.nan)
    rec_y = np.full((n_rows, plant.p), np.nan)
    rec_u = np.full(n_rows, np.nan)
    recs = []
    for blk in blocks:
        recs.append({
            "chi": np.full((n_rows, blk.obs.n_chi), np.nan),
            "xhat": np.full((n_rows, n), np.nan),
            "theta_hat": None, "theta": None, "dM": None,
        })

    failures = []
    plant_failure = None

    def fail(blk, t, message):
        blk.active = False
        failures.append(Failure(blk.obs.name, t, message))

    def record(r, t, S):
        x = S[:n]
        u = controller(t, x)
        y = x[out_idx] + noise_at(t)
        rec_t[r] = t
        rec_x[r] = x
        rec_y[r] = y
        rec_u[r] = u
        for blk, rc in zip(blocks, recs):
            if not blk.active:
                continue
            chi = S[blk.a:blk.b]
            obs = blk.obs
            try:
                rc["chi"][r] = chi
                rc["xhat"][r] = obs.estimate(chi, y, u)
                th = obs.theta_hat(chi)
                if th is not None:
                    th = np.atleast_1d(th)
                    if rc["theta_hat"] is None:
                        rc["theta_hat"] = np.full((n_rows, th.size), np.nan)
                        rc["theta"] = np.full((n_rows, th.size), np.nan)
                    rc["theta_hat"][r] = th
                    rc["theta"][r] = obs.true_offset(x, chi)
                beta = obs.manifold(chi, y)
                if beta is not None:
                    dm = np.asarray(beta, dtype=float) - np.asarray(obs.target(x), dtype=float)
                    if rc["dM"] is None:
                        rc["dM"] = np.full((n_rows, dm.size), np.nan)
                    rc["dM"][r] = dm
            except (ArithmeticError, ValueError) as exc:
                rc["xhat"][r] = np.nan
                fail(blk, t, f"estimate failed: {exc}")

    last_row = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        record(0, 0.0, S)
        h = dt
        h2 = 0.5 * dt
        h6 = dt / 6.0
        for i in range(n_steps):
            t = i * dt
            nz = noise_at(t)
            try:
                k1 = deriv(t, S, nz)
                k2 = deriv(t + h2, S + h2 * k1, nz)
                k3 = deriv(t + h2, S + h2 * k2, nz)
                k4 = deriv(t + h, S + h * k3, nz)
            except (ArithmeticError, ValueError) as exc:
                plant_failure = Failure(plant.name, t, str(exc))
                break
            S_new = S + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t_new = (i + 1) * dt
            all_finite = bool(np.isfinite(S_new).all())
            if not all_finite and not np.all(np.isfinite(S_new[:n])):
                plant_failure = Failure(plant.name, t_new, f"non-finite plant state {S_new[:n]}")
                break
            for blk in blocks:
                if not blk.active:
                    S_new[blk.a:blk.b] = S[blk.a:blk.b]
                    continue
                if blk.error is not None:
                    fail(blk, t_new, str(blk.error))
                    S_new[blk.a:blk.b] = S[blk.a:blk.b]
                elif not all_finite and not np.all(np.isfinite(S_new[blk.a:blk.b])):
                    fail(blk, t_new, f"non-finite observer state {S_new[blk.a:blk.b]}")
                    S_new[blk.a:blk.b] = S[blk.a:blk.b]
            S = S_new
            if (i + 1) % decimation == 0 or i + 1 == n_steps:
                last_row += 1
                record(last_row, t_new, S)

    m = last_row + 1
    traces = {}
    for blk, rc in zip(blocks, recs):
        fl = next((fl for fl in failures if fl.component == blk.obs.name), None)
        traces[blk.obs.name] = SimTrace(
            name=blk.obs.name,
            state_names=plant.state_names,
            output_index=plant.output_index,
            t=rec_t[:m].copy(), x=rec_x[:m].copy(), y_meas=rec_y[:m].copy(), u=rec_u[:m].copy(),
            chi=rc["chi"][:m], xhat=rc["xhat"][:m],
            theta_hat=None if rc["theta_hat"] is None else rc["theta_hat"][:m],
            theta=None if rc["theta"] is None else rc["theta"][:m],
            dM=None if rc["dM"] is None else rc["dM"][:m],
            dt=dt, decimation=decimation, failure=fl or plant_failure,
        )
    if not blocks:
        traces["plant"] = SimTrace(
            name="plant", state_names=plant.state_names, output_index=plant.output_index,
            t=rec_t[:m].copy(), x=rec_x[:m].copy(), y_meas=rec_y[:m].copy(), u=rec_u[:m].copy(),
            chi=np.zeros((m, 0)), xhat=np.full((m, n), np.nan), dt=dt, decimation=decimation,
            failure=plant_failure,
        )
    return SimResult(traces=traces, failures=failures, plant_failure=plant_failure, n_steps=n_steps)


def raise_on_failure(result):
    """Turn the first recorded failure into an :class:`IntegrationError`."""
    fl = result.plant_failure or (result.failures[0] if result.failures else None)
    if fl is not None:
        raise IntegrationError(fl.t, [], str(fl), component=fl.component)
    return result
