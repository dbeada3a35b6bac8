"""
Run configuration: a small sectioned ``key = value`` format.

    # comment
    experiment = rabi_scan
    [calibration]
    a = 0.42
    [scan]
    energies = 0:60:20          # start:stop:count, or a comma list

Keys are unique across sections, so a key may also appear before any section
header.  A key placed under the wrong section, an unknown key, or an
out-of-range value is a ConfigError that names the key and line.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .atomic_model import AtomicConstants, IonModel
from .detection import DetectionModel
from .dynamics import RabiCalibration
from .motion import MotionalState

EXPERIMENT_NAMES = ("rabi_scan", "two_pulse_scan", "ramsey_fringe", "contrast_scan",
                    "phase_vs_delay", "detect_calibrate")


class ConfigError(ValueError):
    pass


def _default_energies():
    return tuple(float(x) for x in np.linspace(0.0, 60.0, 20))


def _default_delays():
    return tuple(float(x) for x in np.linspace(680.0, 705.0, 21))


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "rabi_scan"
    # atom
    ground_hf_splitting: float = 14.530
    excited_hf_splitting: float = 0.626
    excited_lifetime: float = 2.65
    scheme: str = "full_pi"
    # calibration
    a: float = 0.42
    # motion
    eta: float = 0.22
    nbar: float = 40.0
    sigma: float | None = None
    # detection
    lambda_bright: float = 10.0
    lambda_dark: float = 0.2
    # scan
    energies: tuple = dataclasses.field(default_factory=_default_energies)
    energy: float | None = None
    delay: float = 680.0
    delays: tuple = dataclasses.field(default_factory=_default_delays)
    attenuation: float = 0.0
    pulses: int = 1
    laser_pulses: int = 2
    mw_phases: int = 16
    p_bright: float = 1.0 / 3.0
    delay_sigma: float = 0.1
    phase_sigma: float = 0.01
    decay: bool = True
    pulse_width: float | None = None
    # run
    mode: str = "exact"
    shots: int = 60000
    seed: int = 0
    workers: int = 1
    out: str = "."

    def constants(self) -> AtomicConstants:
        return AtomicConstants(self.ground_hf_splitting, self.excited_hf_splitting,
                               self.excited_lifetime)

    def model(self) -> IonModel:
        return IonModel.build(self.scheme, self.constants())

    def calibration(self) -> RabiCalibration:
        return RabiCalibration(self.a)

    def motion(self) -> MotionalState:
        return MotionalState(self.eta, self.nbar, self.sigma)

    def detection(self) -> DetectionModel:
        return DetectionModel(self.lambda_bright, self.lambda_dark)

    @property
    def sampled(self) -> bool:
        return self.mode == "sampled"

    def flat_items(self):
        for f in dataclasses.fields(self):
            yield f.name, _format(getattr(self, f.name))


SECTIONS = {
    "experiment": ("experiment",),
    "atom": ("ground_hf_splitting", "excited_hf_splitting", "excited_lifetime", "scheme"),
    "calibration": ("a",),
    "motion": ("eta", "nbar", "sigma"),
    "detection": ("lambda_bright", "lambda_dark"),
    "scan": ("energies", "energy", "delay", "delays", "attenuation", "pulses", "laser_pulses",
             "mw_phases", "p_bright", "delay_sigma", "phase_sigma", "decay", "pulse_width"),
    "run": ("mode", "shots", "seed", "workers", "out"),
}
SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}
# the experiment name may also be spelled ``name`` inside [experiment]
ALIASES = {"name": "experiment"}
_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _parse_list(text: str) -> tuple:
    text = text.strip()
    if ":" in text and "," not in text:
        start, stop, count = text.split(":")
        n = int(count)
        if n < 1:
            raise ValueError("count must be at least 1")
        return tuple(float(x) for x in np.linspace(float(start), float(stop), n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _convert(key: str, raw: str):
    typ = _TYPES[key]
    raw = raw.strip()
    if "None" in typ and raw.lower() == "none":
        return None
    if typ == "tuple":
        return _parse_list(raw)
    if typ.startswith("float"):
        return float(raw)
    if typ == "int":
        return int(raw)
    if typ == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def _check_ranges(cfg: RunConfig):
    def need(ok, key, msg):
        if not ok:
            raise ConfigError(f"{key}: {msg} (got {getattr(cfg, key)!r})")

    need(cfg.experiment in EXPERIMENT_NAMES, "experiment", f"must be one of {EXPERIMENT_NAMES}")
    for key in ("ground_hf_splitting", "excited_hf_splitting", "excited_lifetime", "a"):
        need(math.isfinite(getattr(cfg, key)) and getattr(cfg, key) > 0, key, "must be positive")
    need(cfg.ground_hf_splitting > cfg.excited_hf_splitting, "ground_hf_splitting",
         "must exceed excited_hf_splitting")
    need(cfg.scheme in ("full_pi", "clock_only"), "scheme", "must be full_pi or clock_only")
    need(cfg.eta >= 0, "eta", "must be non-negative")
    need(cfg.nbar >= 0, "nbar", "must be non-negative")
    need(cfg.sigma is None or cfg.sigma >= 0, "sigma", "must be non-negative")
    need(cfg.lambda_dark >= 0, "lambda_dark", "must be non-negative")
    need(cfg.lambda_bright > cfg.lambda_dark, "lambda_bright", "must exceed lambda_dark")
    need(len(cfg.energies) > 0 and all(e >= 0 for e in cfg.energies), "energies",
         "must be a non-empty list of non-negative energies")
    need(cfg.energy is None or cfg.energy >= 0, "energy", "must be non-negative")
    need(cfg.delay >= 0, "delay", "must be non-negative")
    need(len(cfg.delays) >= 2 and all(d >= 0 for d in cfg.delays), "delays",
         "needs at least two non-negative delays")
    need(0 <= cfg.attenuation < 1, "attenuation", "must lie in [0, 1)")
    need(cfg.pulses in (1, 2), "pulses", "must be 1 or 2")
    need(cfg.laser_pulses in (0, 1, 2), "laser_pulses", "must be 0, 1 or 2")
    need(cfg.mw_phases >= 8, "mw_phases", "needs at least 8 phase samples")
    need(0 <= cfg.p_bright <= 1, "p_bright", "must lie in [0, 1]")
    need(cfg.delay_sigma >= 0, "delay_sigma", "must be non-negative")
    need(cfg.phase_sigma >= 0, "phase_sigma", "must be non-negative")
    need(cfg.delay_sigma > 0 or cfg.phase_sigma > 0, "phase_sigma",
         "phase_sigma and delay_sigma cannot both be zero")
    need(cfg.pulse_width is None or cfg.pulse_width > 0, "pulse_width", "must be positive")
    need(cfg.mode in ("exact", "sampled"), "mode", "must be exact or sampled")
    need(cfg.shots > 0, "shots", "must be positive")
    need(0 <= cfg.seed < 2 ** 64, "seed", "must be an unsigned 64-bit integer")
    need(cfg.workers >= 1, "workers", "must be at least 1")


def validate(cfg: RunConfig) -> RunConfig:
    _check_ranges(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    values = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {body!r}")
            section = body[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        key = ALIASES.get(key, key) if section in (None, "experiment") else key
        if key not in SECTION_OF:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if section is not None and SECTION_OF[key] != section:
            raise ConfigError(f"line {lineno}: key {key!r} belongs in [{SECTION_OF[key]}], "
                              f"not [{section}]")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return validate(RunConfig(**values))


def serialize(cfg: RunConfig) -> str:
    lines = []
    for sec, keys in SECTIONS.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {_format(getattr(cfg, k))}" for k in keys)
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
