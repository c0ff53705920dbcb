import csv
import math

import numpy as np
import pytest

from observerlab.harness.cli import main
from observerlab.harness.config import PLANT_DEFAULTS, ScenarioConfig, load_config, parse_config
from observerlab.harness.export import METRIC_COLUMNS, export_csv, export_metrics, read_csv, trace_columns
from observerlab.harness.metrics import NOT_CONVERGED, compute_metrics, convergence_time
from observerlab.harness.scenarios import run_scenario
from observerlab.harness.simulation import raise_on_failure, simulate
from observerlab.numerics import ConfigurationError, IntegrationError, NoiseSpec
from observerlab.observers import Observer
from observerlab.observers.cuk import OBSERVER_IDS, build_observer
from observerlab.plants import ConstantInput, ControlSchedule, CukController, CukParams, acad3_plant, cuk_plant

P = CukParams()


def _ctrl():
    return CukController(ControlSchedule(), P)


# -- simulation ---------------------------------------------------------------


def test_single_step_trace_has_two_rows(tmp_path):
    res = simulate(cuk_plant(P), [build_observer("kklo", P)], _ctrl(), 1e-5, 1e-5)
    tr = res.traces["kklo"]
    assert tr.n_rows == 2
    path = export_csv(tr, tmp_path / "one.csv")
    assert len(path.read_text().splitlines()) == 3


def test_decimation_only_selects_rows():
    obs = [build_observer(o, P) for o in ("kklo", "pebo", "hgo_tv")]
    noise = NoiseSpec((0.02, 2e-4), 1e-4, seed=4)
    full = simulate(cuk_plant(P), obs, _ctrl(), 1e-5, 0.005, noise=noise, decimation=1)
    dec = simulate(cuk_plant(P), obs, _ctrl(), 1e-5, 0.005, noise=noise, decimation=10)
    for name in full.traces:
        a, b = full.traces[name], dec.traces[name]
        for field in ("t", "x", "y_meas", "u", "chi", "xhat"):
            assert np.array_equal(getattr(a, field)[::10], getattr(b, field))


def test_noise_reaches_observers_only():
    noise = NoiseSpec((0.02, 2e-4), 1e-4, seed=4)
    clean = simulate(cuk_plant(P), [build_observer("kklo", P)], _ctrl(), 1e-5, 0.003, decimation=1)
    noisy = simulate(cuk_plant(P), [build_observer("kklo", P)], _ctrl(), 1e-5, 0.003, noise=noise, decimation=1)
    a, b = clean.traces["kklo"], noisy.traces["kklo"]
    # control uses the true state, so the plant trajectory is unaffected
    assert np.array_equal(a.x, b.x)
    meas_err = b.y_meas - b.y_clean
    assert np.all(np.abs(meas_err) <= np.array([0.02, 2e-4]))
    assert np.any(meas_err != 0)
    assert not np.array_equal(a.chi, b.chi)


class _Exploding(Observer):
    n_chi = 1

    def __init__(self, name, how):
        self.name = name
        self.how = how

    def rhs(self, t, chi, y, u):
        if t > 0.002:
            if self.how == "raise":
                raise ValueError("model undefined")
            return np.array([np.inf])
        return np.array([1.0])

    def estimate(self, chi, y, u):
        return np.full(4, chi[0])


def test_failed_observer_is_isolated():
    obs = [build_observer("kklo", P), _Exploding("bad_raise", "raise"), _Exploding("bad_inf", "inf")]
    res = simulate(cuk_plant(P), obs, _ctrl(), 1e-5, 0.005, decimation=10)
    assert res.plant_failure is None
    assert {f.component for f in res.failures} == {"bad_raise", "bad_inf"}
    for f in res.failures:
        assert 0.002 < f.t < 0.0022
    for name in ("bad_raise", "bad_inf"):
        tr = res.traces[name]
        assert tr.failure is not None
        assert np.all(np.isfinite(tr.xhat[tr.t < 0.002]))
        assert np.all(np.isnan(tr.xhat[tr.t > 0.0025]))
        m = compute_metrics(tr)
        assert m.failure and m.states[0].convergence_time == NOT_CONVERGED
    good = res.traces["kklo"]
    assert good.failure is None and np.all(np.isfinite(good.xhat))
    with pytest.raises(IntegrationError):
        raise_on_failure(res)


def test_plant_blowup_stops_the_run():
    res = simulate(acad3_plant((3.0, 0.0, 700.0)), [], ConstantInput(-1.0), 1e-3, 1.0)
    assert res.plant_failure is not None
    tr = res.traces["plant"]
    assert tr.n_rows < 1001
    assert np.all(np.isfinite(tr.x))


def test_simulate_validates_inputs():
    with pytest.raises(ConfigurationError):
        simulate(cuk_plant(P), [], _ctrl(), 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        simulate(cuk_plant(P), [], _ctrl(), 2e-4, 1e-3, noise=NoiseSpec((0.1, 0.1), 1e-4))
    with pytest.raises(ConfigurationError):
        simulate(cuk_plant(P), [build_observer("kklo", P), build_observer("kklo", P)], _ctrl(), 1e-5, 1e-4)


# -- metrics ----------------------------------------------------------------


def test_convergence_time():
    t = np.arange(6.0)
    assert convergence_time(t, np.array([5, 3, 0.1, 2, 0.1, 0.1]), 1.0) == 4.0
    assert convergence_time(t, np.zeros(6), 1.0) == 0.0
    assert convergence_time(t, np.array([0, 0, 0, 0, 0, 3.0]), 1.0) == NOT_CONVERGED


def test_metrics_rms_and_peak():
    from observerlab.harness.simulation import SimTrace
    t = np.linspace(0, 1, 11)
    x = np.ones((11, 2))
    xhat = x.copy()
    xhat[:, 1] += np.where(t >= 0.8 - 1e-12, 0.1, 2.0)
    tr = SimTrace("o", ("y", "x"), (0,), t, x, x[:, :1], np.zeros(11), np.zeros((11, 0)), xhat)
    m = compute_metrics(tr, reference=np.full((11, 2), 10.0), band=0.05)
    s = m.states[0]
    assert s.rms_steady == pytest.approx(0.1)
    assert s.peak_error == pytest.approx(2.0)
    assert s.convergence_time == pytest.approx(0.8)


# -- export -----------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    obs = build_observer("pebo", P)
    tr = simulate(cuk_plant(P), [obs], _ctrl(), 1e-5, 0.002, decimation=5).traces["pebo"]
    path = export_csv(tr, tmp_path / "sub" / "pebo.csv")
    names, data = read_csv(path)
    ref_names, ref = trace_columns(tr)
    assert names == ref_names
    assert names[:8] == ["t", "x1", "x2", "y1", "y2", "y1_meas", "y2_meas", "u"]
    assert "theta_hat1" in names and "dM2" in names
    assert np.allclose(data, ref, rtol=1e-8, atol=1e-300)


def test_export_to_unwritable_path_names_it(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    tr = simulate(cuk_plant(P), [build_observer("kklo", P)], _ctrl(), 1e-5, 1e-5).traces["kklo"]
    with pytest.raises(OSError, match="file"):
        export_csv(tr, blocker / "out.csv")


# -- configuration ----------------------------------------------------------

EXAMPLE = """
[scenario]
schema_version = 1
plant = cuk
observers = kklo, iio
dt = 1e-5
horizon = 0.3
seed = 9

[noise]
enabled = on
amplitude = 0.01, 1e-4

[plant.cuk]
L1 = 0.02
x0 = 0.1, 0, 0, 0

[control]
vd_segments = 0:-12, 0.1:-20
lambda_c = 0.2

[observer.cuk]
gamma1 = 25
Gamma = 0.01, 10
kklpebo_variant = printed
"""


def test_parse_config_example():
    cfg = parse_config(EXAMPLE).validate()
    assert cfg.observers == ("kklo", "iio")
    assert cfg.horizon == 0.3 and cfg.seed == 9 and cfg.noise
    assert cfg.noise_amplitude == (0.01, 1e-4)
    assert cfg.cuk.L1 == 0.02 and cfg.cuk.C2 == P.C2
    assert cfg.cuk_x0 == (0.1, 0.0, 0.0, 0.0)
    assert cfg.schedule.vd_segments == ((0.0, -12.0), (0.1, -20.0))
    assert cfg.schedule.lambda_c == 0.2
    assert cfg.gains.gamma1 == 25 and cfg.gains.Gamma == (0.01, 10.0)
    assert cfg.kklpebo_variant == "printed"


def test_empty_config_gives_defaults():
    assert parse_config("") == ScenarioConfig()


@pytest.mark.parametrize("text", [
    "[scenario]\nschema_version = 2\n",
    "[mystery]\na = 1\n",
    "[scenario]\nspeed = 3\n",
    "[plant.cuk]\nL9 = 1\n",
    "[plant.cuk]\nL1 = -1\n",
    "[noise]\nenabled = maybe\n",
    "[control]\nvd_segments = 0.1:-15\n",
    "[observer.cuk]\nGamma = 1\n",
    "not an ini file",
])
def test_bad_config_is_rejected(text):
    with pytest.raises(ConfigurationError):
        parse_config(text).validate()


def test_validate_rejects_unknown_observer():
    with pytest.raises(ConfigurationError, match="valid ids"):
        ScenarioConfig(observers=("ekf",)).validate()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.ini")


# -- scenarios --------------------------------------------------------------


def test_cascade_scenario_runs():
    cfg = ScenarioConfig(plant="cascade", observers=("kklpebo",), **{**PLANT_DEFAULTS["cascade"], "horizon": 5.0})
    res, metrics, sc = run_scenario(cfg)
    assert res.ok
    assert metrics["kklpebo"].final_theta_error is not None
    assert len(metrics["kklpebo"].states) == 3


def test_cuk_scenario_horizon_equal_dt():
    cfg = ScenarioConfig(horizon=1e-5)
    res, metrics, _ = run_scenario(cfg)
    assert set(res.traces) == set(OBSERVER_IDS)
    assert all(tr.n_rows == 2 for tr in res.traces.values())


# -- command line -----------------------------------------------------------


def test_cli_without_arguments_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_cli_help_exits_zero(capsys):
    assert main(["--help"]) == 0


def test_cli_unknown_observer_lists_valid_ids(capsys, tmp_path):
    assert main(["simulate", "--plant", "cuk", "--observer", "ekf", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert all(o in err for o in OBSERVER_IDS)


def test_cli_unknown_plant_and_option(capsys):
    assert main(["simulate", "--plant", "boost"]) == 1
    assert main(["simulate", "--frobnicate"]) == 1
    assert main(["dance"]) == 1


def test_cli_simulate_acad3_writes_files(tmp_path, capsys):
    assert main(["simulate", "--plant", "acad3", "--horizon", "2", "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["simulate_acad3_errors.png", "simulate_acad3_kklpebo.csv", "simulate_acad3_kklpebo_states.png",
                     "simulate_acad3_metrics.csv"]
    names, data = read_csv(tmp_path / "simulate_acad3_kklpebo.csv")
    assert data.shape[0] == 201
    assert (tmp_path / "simulate_acad3_errors.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[scenario]\nplant = cuk\nobservers = kklo, hgo_tv\nhorizon = 0.001\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == [
        "simulate_cuk_hgo_tv.csv", "simulate_cuk_kklo.csv", "simulate_cuk_metrics.csv"]
    cfg.write_text("[scenario]\nwhatever = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert main(["simulate", "--config", str(tmp_path / "absent.ini")]) == 1


def test_cli_numerical_failure_exits_two(tmp_path):
    cfg = tmp_path / "blow.ini"
    cfg.write_text("[plant.acad3]\nx0 = 3, 0, 700\n")
    assert main(["simulate", "--plant", "acad3", "--config", str(cfg), "--horizon", "1", "--no-plots",
                 "--out", str(tmp_path)]) == 2


def test_cli_pde_check(capsys):
    assert main(["pde-check", "--case", "cuk-kklpebo"]) == 0
    out = capsys.readouterr().out
    assert "max_residual" in out and "PASS" in out
    assert main(["pde-check", "--case", "nope"]) == 1
    assert main(["pde-check", "--fd", "--samples", "200"]) == 0


def test_cli_equiv_check_exit_codes(capsys):
    assert main(["equiv-check", "--case", "cuk-kklo", "--horizon", "0.005"]) == 0
    assert main(["equiv-check", "--case", "cuk-kklpebo", "--horizon", "0.005"]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_cli_pe_check(capsys):
    assert main(["pe-check", "--horizon", "15"]) == 0
    assert main(["pe-check", "--horizon", "15", "--delta", "100"]) == 2


# -- full comparison runs ---------------------------------------------------


def _metrics(path):
    with open(path, newline="") as fh:
        return {(r["observer"], r["state"]): r for r in csv.DictReader(fh)}


def test_compare_emits_one_file_per_observer(compare_noisy):
    assert compare_noisy.code == 0
    names = sorted(p.name for p in compare_noisy.out.iterdir())
    for o in OBSERVER_IDS:
        assert f"compare_{o}.csv" in names
        assert f"compare_{o}_states.png" in names
    assert "compare_metrics.csv" in names and "compare_errors.png" in names
    assert len([n for n in names if n.endswith(".csv")]) == len(OBSERVER_IDS) + 1
    with open(compare_noisy.out / "compare_metrics.csv", newline="") as fh:
        assert next(csv.reader(fh)) == METRIC_COLUMNS


def test_compare_row_count(compare_noisy):
    names, data = read_csv(compare_noisy.out / "compare_kklo.csv")
    assert data.shape[0] == 12001
    assert data[-1, 0] == pytest.approx(1.2)


def test_noise_only_adds_error(compare_noisy, compare_noiseless):
    noisy = _metrics(compare_noisy.out / "compare_metrics.csv")
    clean = _metrics(compare_noiseless.out / "compare_metrics.csv")
    assert set(noisy) == set(clean)
    for key in clean:
        assert float(clean[key]["rms_steady"]) <= float(noisy[key]["rms_steady"]), key
