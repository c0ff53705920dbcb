"""Scenario configuration: an INI file with dotted section names.

Every key is optional; missing keys take the defaults of
:class:`ScenarioConfig`. Example::

    [scenario]
    schema_version = 1
    plant = cuk
    observers = all
    dt = 1e-5
    horizon = 1.2
    decimation = 10
    seed = 0

    [noise]
    enabled = on
    amplitude = 0.02, 2e-4
    sample_period = 1e-4

    [plant.cuk]
    L1 = 0.01
    x0 = 0, 0, 0, 0

    [control]
    vd_segments = 0:-15, 0.2:-25, 0.4:-15, 0.6:-25, 0.8:-15, 1.0:-25
    lambda_c = 0.1
    u_clamp = 0.05, 0.95

    [observer.cuk]
    alpha = 0.5
    Gamma = 0.001, 100
    kklpebo_variant = derived
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from ..numerics import ConfigurationError
from ..observers.cuk import OBSERVER_IDS, VARIANTS, CukGains
from ..plants import ControlSchedule, CukParams

SCHEMA_VERSION = 1
PLANTS = ("cuk", "acad3", "cascade")
PLANT_OBSERVERS = {"cuk": OBSERVER_IDS, "acad3": ("kklpebo",), "cascade": ("kklpebo",)}
PLANT_DEFAULTS = {
    "cuk": {"dt": 1e-5, "horizon": 1.2, "decimation": 10},
    "acad3": {"dt": 1e-3, "horizon": 30.0, "decimation": 10},
    "cascade": {"dt": 1e-3, "horizon": 30.0, "decimation": 10},
}


@dataclass(frozen=True)
class Acad3Settings:
    u: float = -1.0
    x0: tuple = (0.8, 1.0, -1.0)
    alpha: float = 0.5
    gamma: float = 2.0
    psi0: float = 0.1


@dataclass(frozen=True)
class CascadeSettings:
    x0: tuple = (0.5, 0.0, 0.0, 1.0)
    amplitude: float = 1.0
    omega: float = 1.0
    alpha: float = 1.0
    gain: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    plant: str = "cuk"
    observers: tuple = OBSERVER_IDS
    dt: float = 1e-5
    horizon: float = 1.2
    decimation: int = 10
    seed: int = 0
    noise: bool = False
    noise_amplitude: tuple = (0.02, 2e-4)
    noise_sample_period: float = 1e-4
    cuk: CukParams = field(default_factory=CukParams)
    cuk_x0: tuple = (0.0, 0.0, 0.0, 0.0)
    schedule: ControlSchedule = field(default_factory=ControlSchedule)
    gains: CukGains = field(default_factory=CukGains)
    kklpebo_variant: str = "derived"
    iio_variant: str = "derived"
    acad3: Acad3Settings = field(default_factory=Acad3Settings)
    cascade: CascadeSettings = field(default_factory=CascadeSettings)

    def validate(self):
        if self.plant not in PLANTS:
            raise ConfigurationError(f"unknown plant {self.plant!r}; valid plants: {', '.join(PLANTS)}")
        valid = PLANT_OBSERVERS[self.plant]
        if not self.observers:
            raise ConfigurationError("at least one observer is required")
        for o in self.observers:
            if o not in valid:
                raise ConfigurationError(f"unknown observer {o!r} for plant {self.plant}; valid ids: {', '.join(valid)}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ConfigurationError("horizon must be at least dt")
        if self.decimation < 1:
            raise ConfigurationError("decimation must be a positive integer")
        if self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        if self.noise:
            if not self.noise_sample_period > 0:
                raise ConfigurationError("noise sample_period must be positive")
            if self.dt > self.noise_sample_period * (1 + 1e-12):
                raise ConfigurationError("dt must not exceed the noise sample period when noise is on")
            if any(a < 0 for a in self.noise_amplitude):
                raise ConfigurationError("noise amplitudes must be non-negative")
        for v in (self.kklpebo_variant, self.iio_variant):
            if v not in VARIANTS:
                raise ConfigurationError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        if len(self.cuk_x0) != 4:
            raise ConfigurationError("the Cuk initial state has 4 entries")
        if len(self.acad3.x0) != 3:
            raise ConfigurationError("the acad3 initial state has 3 entries")
        if len(self.cascade.x0) != 4:
            raise ConfigurationError("the cascade demo initial state has 4 entries")
        return self


def _floats(text, n=None, key=""):
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigurationError(f"{key}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigurationError(f"{key}: expected {n} numbers, got {len(vals)}")
    return vals


def _bool(text, key):
    t = text.strip().lower()
    if t in ("1", "on", "true", "yes"):
        return True
    if t in ("0", "off", "false", "no"):
        return False
    raise ConfigurationError(f"{key}: expected on/off, got {text!r}")


def _segments(text):
    segs = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            start, vd = item.split(":")
            segs.append((float(start), float(vd)))
        except ValueError:
            raise ConfigurationError(f"control.vd_segments: bad item {item!r}, expected start:Vd") from None
    return tuple(segs)


def _apply(obj, section, conv, known):
    """Replace dataclass fields of ``obj`` from an INI section."""
    updates = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigurationError(f"[{section.name}] unknown key {key!r}; known: {', '.join(sorted(known))}")
        updates[known[key]] = conv(known[key], raw, f"{section.name}.{key}")
    return replace(obj, **updates) if updates else obj


def _scalar_or_tuple(obj):
    def conv(name, raw, key):
        cur = getattr(obj, name)
        if isinstance(cur, tuple):
            return _floats(raw, len(cur), key)
        if isinstance(cur, str):
            return raw.strip()
        return _floats(raw, 1, key)[0]
    return conv


def _fieldmap(obj):
    # configparser lower-cases keys
    return {f.name.lower(): f.name for f in fields(obj)}


def parse_config(text, base=None):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    cfg = base or ScenarioConfig()
    sections = set(cp.sections())
    allowed = {"scenario", "noise", "plant.cuk", "control", "observer.cuk", "plant.acad3", "observer.acad3",
               "plant.cascade", "observer.cascade"}
    unknown = sections - allowed
    if unknown:
        raise ConfigurationError(f"unknown section(s) {sorted(unknown)}; known: {sorted(allowed)}")

    upd = {}
    if "scenario" in cp:
        s = cp["scenario"]
        version = s.get("schema_version", str(SCHEMA_VERSION))
        if version.strip() != str(SCHEMA_VERSION):
            raise ConfigurationError(f"unsupported schema_version {version}; this build reads {SCHEMA_VERSION}")
        for key, raw in s.items():
            if key == "schema_version":
                continue
            if key == "plant":
                upd["plant"] = raw.strip()
            elif key == "observers":
                upd["observers"] = tuple(o.strip() for o in raw.split(",") if o.strip())
            elif key in ("dt", "horizon"):
                upd[key] = _floats(raw, 1, f"scenario.{key}")[0]
            elif key in ("decimation", "seed"):
                try:
                    upd[key] = int(raw)
                except ValueError:
                    raise ConfigurationError(f"scenario.{key}: expected an integer, got {raw!r}") from None
            else:
                raise ConfigurationError(f"[scenario] unknown key {key!r}")
    if "noise" in cp:
        for key, raw in cp["noise"].items():
            if key == "enabled":
                upd["noise"] = _bool(raw, "noise.enabled")
            elif key == "amplitude":
                upd["noise_amplitude"] = _floats(raw, key="noise.amplitude")
            elif key == "sample_period":
                upd["noise_sample_period"] = _floats(raw, 1, "noise.sample_period")[0]
            else:
                raise ConfigurationError(f"[noise] unknown key {key!r}")
    if "plant.cuk" in cp:
        sec = cp["plant.cuk"]
        x0 = sec.pop("x0", None)
        upd["cuk"] = _apply(cfg.cuk, sec, _scalar_or_tuple(cfg.cuk), _fieldmap(cfg.cuk))
        if x0 is not None:
            upd["cuk_x0"] = _floats(x0, 4, "plant.cuk.x0")
    if "control" in cp:
        sec = cp["control"]
        kw = {}
        for key, raw in sec.items():
            if key == "vd_segments":
                kw["vd_segments"] = _segments(raw)
            elif key == "lambda_c":
                kw["lambda_c"] = _floats(raw, 1, "control.lambda_c")[0]
            elif key == "u_clamp":
                kw["u_clamp"] = _floats(raw, 2, "control.u_clamp")
            else:
                raise ConfigurationError(f"[control] unknown key {key!r}")
        upd["schedule"] = replace(cfg.schedule, **kw)
    if "observer.cuk" in cp:
        sec = cp["observer.cuk"]
        variants = {k: sec.pop(k) for k in ("kklpebo_variant", "iio_variant") if k in sec}
        upd["gains"] = _apply(cfg.gains, sec, _scalar_or_tuple(cfg.gains), _fieldmap(cfg.gains))
        for k, v in variants.items():
            upd[k] = v.strip()
    for name, attr in (("acad3", "acad3"), ("cascade", "cascade")):
        obj = upd.get(attr, getattr(cfg, attr))
        for sec_name in (f"plant.{name}", f"observer.{name}"):
            if sec_name in cp:
                obj = _apply(obj, cp[sec_name], _scalar_or_tuple(obj), _fieldmap(obj))
        upd[attr] = obj
    try:
        cfg = replace(cfg, **upd)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None
    return cfg


def load_config(path, base=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from None
    return parse_config(text, base)


def plant_defaults(plant):
    return PLANT_DEFAULTS[plant]
