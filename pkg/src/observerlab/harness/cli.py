"""Command-line interface.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure (a
blow-up, or a check that did not meet its tolerance).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from ..numerics import ConfigurationError, ObserverLabError
from ..observers.academic import acad3_design, cascade_demo_design
from ..observers.cuk import build_observer, kklo_design, kklpebo_design, pebo_design
from ..plants import CukController, acad3_plant, cuk_plant, demo_cascade_plant, demo_cascade_spec
from ..verify import PDE_MODES, equivalence_check, pde_residual, pe_check
from .config import PLANT_DEFAULTS, PLANT_OBSERVERS, PLANTS, ScenarioConfig, parse_config
from .export import export_csv, export_metrics
from .scenarios import run_scenario

PDE_TOL = 1e-9
EQUIV_TOL = 1e-8


def pde_cases(cuk_params=None):
    """Named (plant, design) pairs with closed-form solutions of the design PDE."""
    return {
        "cuk-kklo": lambda: (cuk_plant(cuk_params), kklo_design(cuk_params)),
        "cuk-pebo": lambda: (cuk_plant(cuk_params), pebo_design(cuk_params)),
        "cuk-kklpebo": lambda: (cuk_plant(cuk_params), kklpebo_design(cuk_params)),
        "acad3-kklpebo": lambda: (acad3_plant(), acad3_design()),
        "cascade-demo": lambda: (demo_cascade_plant(), cascade_demo_design()),
    }


EQUIV_CASES = {"cuk-kklpebo": "kklpebo", "cuk-kklo": "kklo"}


def cascade_pe_delta(T=2 * math.pi):
    """Gramian of ``b = 1 + sin^2(sin s)`` over one window of length ``T`` starting at 0."""
    return quad(lambda s: (1.0 + math.sin(math.sin(s)) ** 2) ** 2, 0.0, T, epsabs=1e-13, epsrel=1e-13)[0]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _common(p, noise_default):
    p.add_argument("--config", help="scenario configuration file (INI)")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--noise", choices=("on", "off"), help=f"measurement noise (default: {noise_default})")
    p.add_argument("--observer", help="observer id or 'all'")
    p.add_argument("--dt", type=float, help="integration step [s]")
    p.add_argument("--horizon", type=float, help="simulated time [s]")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def build_parser():
    ap = _Parser(prog="observerlab", description="Nonlinear observer simulation and verification toolkit.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("simulate", help="run one plant with one or more observers")
    sp.add_argument("--plant", choices=PLANTS, help="plant id (default: cuk)")
    _common(sp, "off")

    cp = sub.add_parser("compare", help="six-observer Cuk converter study")
    _common(cp, "on")

    pp = sub.add_parser("pde-check", help="design-PDE residual on Halton samples")
    pp.add_argument("--case", default="all", help=f"one of {', '.join(pde_cases())} or 'all'")
    pp.add_argument("--samples", type=int, default=1000)
    pp.add_argument("--mode", choices=PDE_MODES, default="general")
    pp.add_argument("--fd", action="store_true", help="finite-difference Jacobians")
    pp.add_argument("--tol", type=float, help=f"pass threshold (default {PDE_TOL:g}; relative 1e-6 with --fd)")

    ep = sub.add_parser("equiv-check", help="observer vs its I&I instantiation")
    ep.add_argument("--case", default="all", help=f"one of {', '.join(EQUIV_CASES)} or 'all'")
    ep.add_argument("--config", help="scenario configuration file (INI)")
    ep.add_argument("--dt", type=float, default=1e-5)
    ep.add_argument("--horizon", type=float, default=0.5)
    ep.add_argument("--tol", type=float, default=EQUIV_TOL)

    xp = sub.add_parser("pe-check", help="excitation check on the cascade demo regressor")
    xp.add_argument("--T", type=float, default=2 * math.pi, help="window length [s]")
    xp.add_argument("--delta", type=float, help="Gramian lower bound (default: 0.99 x the one-period integral)")
    xp.add_argument("--dt", type=float, default=1e-3)
    xp.add_argument("--horizon", type=float, default=30.0)
    return ap


# ---------------------------------------------------------------------------


def _scenario_config(args, plant=None, noise_default=False):
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read configuration {args.config}: {exc}") from None
    # the plant decides the default step, horizon and observer set
    probe = parse_config(text) if text else ScenarioConfig()
    chosen = plant or getattr(args, "plant", None) or probe.plant
    if chosen not in PLANTS:
        raise ConfigurationError(f"unknown plant {chosen!r}; valid plants: {', '.join(PLANTS)}")
    base = ScenarioConfig(plant=chosen, observers=PLANT_OBSERVERS[chosen], noise=noise_default,
                          **PLANT_DEFAULTS[chosen])
    cfg = parse_config(text, base) if text else base
    upd = {"plant": chosen}
    if args.observer:
        upd["observers"] = PLANT_OBSERVERS[chosen] if args.observer == "all" else (args.observer,)
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.noise is not None:
        upd["noise"] = args.noise == "on"
    if args.dt is not None:
        upd["dt"] = args.dt
    if args.horizon is not None:
        upd["horizon"] = args.horizon
    return replace(cfg, **upd).validate()


def _run_and_write(cfg, out, prefix, plots, title):
    res, metrics, _ = run_scenario(cfg)
    out = Path(out)
    for name, tr in res.traces.items():
        path = export_csv(tr, out / f"{prefix}_{name}.csv")
        print(f"wrote {path}")
    mpath = export_metrics(metrics, out / f"{prefix}_metrics.csv")
    print(f"wrote {mpath}")
    if plots:
        from .plots import plot_errors, plot_states
        print(f"wrote {plot_errors(res.traces.values(), out / f'{prefix}_errors.png', title)}")
        for name, tr in res.traces.items():
            plot_states(tr, out / f"{prefix}_{name}_states.png")
    for m in metrics.values():
        parts = [f"{s.state}: rms={s.rms_steady:.3g} peak={s.peak_error:.3g} t_conv={s.convergence_time}"
                 for s in m.states]
        th = "" if m.final_theta_error is None else f" |theta_err|={m.final_theta_error:.3g}"
        print(f"{m.observer:8s} " + "; ".join(parts) + th)
    for fl in ([res.plant_failure] if res.plant_failure else []) + res.failures:
        print(f"FAILURE: {fl}", file=sys.stderr)
    return 0 if res.ok else 2


def cmd_simulate(args):
    cfg = _scenario_config(args, noise_default=False)
    return _run_and_write(cfg, args.out, f"simulate_{cfg.plant}", not args.no_plots, f"{cfg.plant} simulation")


def cmd_compare(args):
    cfg = _scenario_config(args, plant="cuk", noise_default=True)
    return _run_and_write(cfg, args.out, "compare", not args.no_plots,
                          f"Cuk converter, noise {'on' if cfg.noise else 'off'}")


def cmd_pde_check(args):
    cases = pde_cases()
    names = list(cases) if args.case == "all" else [args.case]
    for n in names:
        if n not in cases:
            raise ConfigurationError(f"unknown case {n!r}; valid cases: {', '.join(cases)}")
    status = 0
    for n in names:
        plant, design = cases[n]()
        rep = pde_residual(plant, design, args.samples, mode=args.mode, use_fd=args.fd)
        if args.fd:
            tol = 1e-6 if args.tol is None else args.tol
            value, label = rep.max_relative, "relative"
        else:
            tol = PDE_TOL if args.tol is None else args.tol
            value, label = rep.max_residual, "absolute"
        ok = rep.finite and value <= tol
        status = status if ok else 2
        print(f"{n}: {rep} relative={rep.max_relative:.3e} [{label} tol {tol:g}] {'PASS' if ok else 'FAIL'}")
    return status


def cmd_equiv_check(args):
    names = list(EQUIV_CASES) if args.case == "all" else [args.case]
    for n in names:
        if n not in EQUIV_CASES:
            raise ConfigurationError(f"unknown case {n!r}; valid cases: {', '.join(EQUIV_CASES)}")
    cfg = _scenario_config(argparse.Namespace(config=args.config, observer=None, seed=None, noise="off",
                                              dt=args.dt, horizon=args.horizon), plant="cuk")
    plant = cuk_plant(cfg.cuk, x0=cfg.cuk_x0)
    ctrl = CukController(cfg.schedule, cfg.cuk)
    status = 0
    for n in names:
        obs = build_observer(EQUIV_CASES[n], cfg.cuk, cfg.gains, kklpebo_variant=cfg.kklpebo_variant)
        rep = equivalence_check(plant, obs, ctrl, cfg.horizon, cfg.dt)
        ok = rep.passed(args.tol)
        status = status if ok else 2
        print(f"{n}: {rep} [tol {args.tol:g} on chi] {'PASS' if ok else 'FAIL'}")
    return status


def cascade_regressor_trace(dt=1e-3, horizon=30.0):
    """Simulate the demo cascade and evaluate ``b`` along the true trajectory."""
    from ..plants import SineInput
    from .simulation import raise_on_failure, simulate

    spec = demo_cascade_spec()
    plant = demo_cascade_plant()
    res = raise_on_failure(simulate(plant, [], SineInput(), dt, horizon))
    tr = res.traces["plant"]
    b = np.array([spec.b(*spec.split(x)[:3], u) for x, u in zip(tr.x, tr.u)])
    return tr.t, b


def cmd_pe_check(args):
    t, b = cascade_regressor_trace(args.dt, args.horizon)
    delta = 0.99 * cascade_pe_delta(args.T) if args.delta is None else args.delta
    r = pe_check(b, t, args.T, delta)
    print(f"cascade-demo: windows={r.window_starts.size} T={r.T:.6g} min eigenvalue={r.min_eigenvalue:.9g} "
          f"delta={r.delta:.9g} {'PASS' if r.ok else 'FAIL'}")
    return 0 if r.ok else 2


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "pde-check": cmd_pde_check,
    "equiv-check": cmd_equiv_check,
    "pe-check": cmd_pe_check,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr, end="")
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ObserverLabError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
