"""Per-observer error metrics on a recorded trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOT_CONVERGED = "not_converged"


@dataclass
class StateMetrics:
    state: str
    rms_steady: float
    convergence_time: float | str
    peak_error: float


@dataclass
class ObserverMetrics:
    observer: str
    states: list
    final_theta_error: float | None = None
    failure: str | None = None


def convergence_time(t, err, band):
    """First time after which ``|err| <= band`` holds until the end of the trace.

    ``band`` may be a scalar or an array aligned with ``t``. Returns
    :data:`NOT_CONVERGED` if the final sample is outside the band.
    """
    inside = np.abs(err) <= band
    if inside.size == 0 or not inside[-1]:
        return NOT_CONVERGED
    outside = np.flatnonzero(~inside)
    return float(t[0] if outside.size == 0 else t[outside[-1] + 1])


def compute_metrics(trace, reference=None, band=0.05, tail=0.2):
    """RMS error over the last ``tail`` fraction, convergence time to the
    ``band`` fraction of the reference magnitude, peak error and final
    parameter error.

    ``reference`` holds per-row, per-state magnitudes (e.g. the active
    equilibrium); by default the peak ``|x_i|`` over the run is used.
    """
    t = trace.t
    err = trace.xerr
    ok = np.all(np.isfinite(err[:, list(trace.estimated_index)]), axis=1)
    t0 = t[0] + (1.0 - tail) * (t[-1] - t[0])
    sel = (t >= t0 - 1e-12) & ok
    states = []
    for i in trace.estimated_index:
        e = err[:, i]
        if reference is None:
            ref = np.full(t.size, np.max(np.abs(trace.x[:, i])))
        else:
            ref = np.asarray(reference)[:, i]
        if trace.failure is not None or not np.all(ok):
            ct = NOT_CONVERGED
        else:
            ct = convergence_time(t, e, band * ref)
        rms = float(np.sqrt(np.mean(e[sel] ** 2))) if np.any(sel) else float("nan")
        peak = float(np.max(np.abs(e[ok]))) if np.any(ok) else float("nan")
        states.append(StateMetrics(trace.state_names[i], rms, ct, peak))
    final_theta = None
    if trace.theta_hat is not None and trace.theta is not None and np.any(ok):
        last = np.flatnonzero(ok)[-1]
        final_theta = float(np.linalg.norm(trace.theta_hat[last] - trace.theta[last]))
    return ObserverMetrics(trace.name, states, final_theta, None if trace.failure is None else str(trace.failure))
