"""CSV export of traces and metrics."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..numerics import ObserverLabError

FMT = ".9g"


class ExportError(ObserverLabError, OSError):
    pass


def trace_columns(trace):
    """Column names and the matching 2-D data block of a trace."""
    names = ["t"] + list(trace.state_names)
    blocks = [trace.t[:, None], trace.x]
    names += [f"y{j + 1}_meas" for j in range(trace.y_meas.shape[1])]
    blocks.append(trace.y_meas)
    names.append("u")
    blocks.append(trace.u[:, None])
    est = list(trace.estimated_index)
    names += [f"xhat{i + 1}" for i in est]
    blocks.append(trace.xhat[:, est])
    names += [f"xerr{i + 1}" for i in est]
    blocks.append(trace.xerr[:, est])
    names += [f"chi{j + 1}" for j in range(trace.chi.shape[1])]
    blocks.append(trace.chi)
    if trace.theta_hat is not None:
        k = trace.theta_hat.shape[1]
        names += [f"theta_hat{j + 1}" for j in range(k)] + [f"theta{j + 1}" for j in range(k)]
        blocks += [trace.theta_hat, trace.theta]
    if trace.dM is not None:
        names += [f"dM{j + 1}" for j in range(trace.dM.shape[1])]
        blocks.append(trace.dM)
    return names, np.hstack(blocks)


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from None


def export_csv(trace, path):
    names, data = trace_columns(trace)
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in data:
            w.writerow([format(v, FMT) for v in row])
    return Path(path)


def read_csv(path):
    """Read an exported file back as ``(names, data)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(len(rows) - 1, len(names))
    return names, data


METRIC_COLUMNS = ["observer", "state", "rms_steady", "convergence_time", "peak_error", "final_theta_error",
                  "failure"]


def export_metrics(metrics, path):
    """One row per (observer, estimated state)."""
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for m in metrics.values():
            th = "" if m.final_theta_error is None else format(m.final_theta_error, FMT)
            for s in m.states:
                ct = s.convergence_time if isinstance(s.convergence_time, str) else format(s.convergence_time, FMT)
                w.writerow([m.observer, s.state, format(s.rms_steady, FMT), ct, format(s.peak_error, FMT), th,
                            m.failure or ""])
    return Path(path)
