"""Experiment configuration files: ``[section]`` headers, ``key = value`` lines.

Physical quantities carry their unit in the key name (``power_dbm``,
``slot_s``, ``ref_dist_m`` ...).  Unknown sections or keys are rejected so a
typo never silently falls back to a default.
"""

from __future__ import annotations

import configparser
import dataclasses
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from ..baselines import NaiveNetConfig
from ..hcl import HclConfig
from ..system import SystemParams, db_to_lin, dbm_to_w
from ..training import TrainHyper

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "AXES", "METHODS",
           "substream", "extend_positions"]

AXES = ("power_dbm", "n_antennas", "n_vehicles", "velocity", "tau", "lambda", "gamma")
METHODS = ("upper_bound", "hcl", "naive", "random")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> List[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _positions(text: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            xy = _floats(chunk)
            if len(xy) != 2:
                raise ConfigError(f"mean position {chunk.strip()!r} needs exactly x, y")
            out.append((xy[0], xy[1]))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


# section -> key -> parser
_SCHEMA = {
    "system": {
        "n_tx": int, "n_rx": int, "n_vehicles": int, "carrier_hz": float,
        "wave_speed_mps": float, "slot_s": float, "pathloss_exp": float,
        "pathloss_ref_db": float, "ref_dist_m": float, "rcs_coeff": complex,
        "noise_echo_dbm": float, "noise_rx_dbm": float, "mf_gain": float,
        "delay_const_s": float, "doppler_const_s": float, "echo_obs_var_w": float,
        "power_dbm": float, "crlb_angle_max_rad2": float, "crlb_dist_max_m2": float,
        "penalty_angle": float, "penalty_dist": float, "penalty_power": float,
        "history_len": int, "history_nmse": float, "crlb_cap": float,
        "echo_interference": _bool,
    },
    "scenario": {
        "mean_positions_m": _positions, "speed_min_mps": float, "speed_max_mps": float,
        "position_jitter_m": float,
    },
    "model": {
        "conv_filters": int, "lstm_hidden": int, "pool_size": int, "pool_stride": int,
        "naive_hidden": lambda s: tuple(int(v) for v in _floats(s)),
        "project_power": _bool,
    },
    "training": {
        "epochs": int, "batch_size": int, "learning_rate": float, "adam_beta1": float,
        "adam_beta2": float, "adam_eps": float,
    },
    "dataset": {"n_train": int, "n_test": int},
    "run": {"seed": int},
    "sweep": {"axis": str, "values": _floats},
    "methods": {"include": lambda s: tuple(t.strip() for t in s.split(",") if t.strip())},
    "output": {"directory": str, "plots": _bool, "timing": _bool},
}

# system keys whose config name differs from the SystemParams field, with a converter
_SYSTEM_MAP = {
    "pathloss_ref_db": ("pathloss_ref", db_to_lin),
    "noise_echo_dbm": ("noise_echo_w", dbm_to_w),
    "noise_rx_dbm": ("noise_rx_w", dbm_to_w),
    "delay_const_s": ("delay_const", float),
    "doppler_const_s": ("doppler_const", float),
    "power_dbm": ("power_budget_w", dbm_to_w),
    "crlb_angle_max_rad2": ("crlb_angle_max", float),
    "crlb_dist_max_m2": ("crlb_dist_max", float),
}

DEFAULT_POSITIONS = ((15.0, 20.0), (25.0, 20.0), (35.0, 20.0))


def extend_positions(positions, k: int) -> Tuple[Tuple[float, float], ...]:
    """First ``k`` mean positions; extra vehicles continue the lane 10 m apart."""
    pos = list(positions[:k])
    while len(pos) < k:
        x_last = pos[-1][0] if pos else 5.0
        pos.append((x_last + 10.0, pos[-1][1] if pos else 20.0))
    return tuple(pos)


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemParams
    mean_positions: tuple = DEFAULT_POSITIONS
    jitter_m: float = 1.0
    conv_filters: int = 4
    lstm_hidden: int = 64
    pool: tuple = (4, 4)
    naive_hidden: tuple = (256, 256)
    project_power: bool = True
    epochs: int = 6
    hyper: TrainHyper = TrainHyper()
    n_train: int = 500
    n_test: int = 500
    seed: int = 0
    axis: str = "power_dbm"
    values: tuple = (30.0,)
    methods: tuple = METHODS
    out_dir: str = "out"
    plots: bool = True
    timing: bool = False
    source: Dict[str, Dict[str, str]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; expected one of {', '.join(AXES)}")
        if not self.values:
            raise ConfigError("sweep values must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown method(s) {bad}; expected a subset of {', '.join(METHODS)}")
        if self.epochs < 1 or self.n_train < 1 or self.n_test < 1:
            raise ConfigError("epochs, n_train and n_test must be >= 1")
        if self.hyper.batch_size < 1 or not self.hyper.lr >= 0:
            raise ConfigError("batch_size must be >= 1 and learning_rate >= 0")
        if len(self.mean_positions) < self.system.n_vehicles:
            object.__setattr__(self, "mean_positions",
                               extend_positions(self.mean_positions, self.system.n_vehicles))

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def hcl_config(self, p: SystemParams = None) -> HclConfig:
        p = self.system if p is None else p
        return HclConfig(tau=p.history_len, k_vehicles=p.n_vehicles, n_tx=p.n_tx,
                         conv_filters=self.conv_filters, pool=tuple(self.pool),
                         lstm_hidden=self.lstm_hidden)

    def naive_config(self, p: SystemParams = None) -> NaiveNetConfig:
        p = self.system if p is None else p
        return NaiveNetConfig(k_vehicles=p.n_vehicles, n_tx=p.n_tx, hidden=tuple(self.naive_hidden))

    def point(self, value: float) -> Tuple[SystemParams, tuple]:
        """System parameters and mean positions for one sweep value."""
        p, pos = self.system, self.mean_positions
        a = self.axis
        if a == "power_dbm":
            p = p.replace(power_budget_w=dbm_to_w(value))
        elif a == "n_antennas":
            n = _as_int(value, a)
            p = p.replace(n_tx=n, n_rx=n)
        elif a == "n_vehicles":
            k = _as_int(value, a)
            p = p.replace(n_vehicles=k)
            pos = extend_positions(pos, k)
        elif a == "velocity":
            half = (self.system.speed_max_mps - self.system.speed_min_mps) / 2.0
            p = p.replace(speed_min_mps=value - half, speed_max_mps=value + half)
        elif a == "tau":
            p = p.replace(history_len=_as_int(value, a))
        elif a == "lambda":
            p = p.replace(penalty_angle=value, penalty_dist=value, penalty_power=value)
        elif a == "gamma":
            p = p.replace(crlb_angle_max=value, crlb_dist_max=value)
        return p, tuple(pos[:p.n_vehicles])


def _as_int(v: float, axis: str) -> int:
    if v != int(v) or v < 1:
        raise ConfigError(f"{axis} values must be positive integers, got {v}")
    return int(v)


def parse_config(text: str, source_name: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text, source=source_name)
    except configparser.Error as exc:
        raise ConfigError(f"{source_name}: {exc}") from None
    parsed: Dict[str, Dict[str, object]] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source_name}: unknown section [{section}]")
        parsed[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{source_name}: unknown key {key!r} in [{section}]")
            try:
                parsed[section][key] = _SCHEMA[section][key](raw.strip())
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"{source_name}: [{section}] {key} = {raw!r}: {exc}") from None

    sysd = {}
    scen = parsed.get("scenario", {})
    for key, val in parsed.get("system", {}).items():
        name, conv = _SYSTEM_MAP.get(key, (key, lambda x: x))
        sysd[name] = conv(val)
    for key in ("speed_min_mps", "speed_max_mps"):
        if key in scen:
            sysd[key] = scen[key]
    try:
        system = SystemParams(**sysd)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source_name}: invalid system parameters: {exc}") from None

    model = parsed.get("model", {})
    tr = parsed.get("training", {})
    hyper = TrainHyper(lr=tr.get("learning_rate", 1e-3), beta1=tr.get("adam_beta1", 0.9),
                       beta2=tr.get("adam_beta2", 0.999), eps=tr.get("adam_eps", 1e-8),
                       batch_size=tr.get("batch_size", 32))
    ds = parsed.get("dataset", {})
    sw = parsed.get("sweep", {})
    out = parsed.get("output", {})
    try:
        return ExperimentConfig(
            system=system,
            mean_positions=scen.get("mean_positions_m", DEFAULT_POSITIONS),
            jitter_m=scen.get("position_jitter_m", 1.0),
            conv_filters=model.get("conv_filters", 4),
            lstm_hidden=model.get("lstm_hidden", 64),
            pool=(model.get("pool_size", 4), model.get("pool_stride", 4)),
            naive_hidden=model.get("naive_hidden", (256, 256)),
            project_power=model.get("project_power", True),
            epochs=tr.get("epochs", 6), hyper=hyper,
            n_train=ds.get("n_train", 500), n_test=ds.get("n_test", 500),
            seed=parsed.get("run", {}).get("seed", 0),
            axis=sw.get("axis", "power_dbm"),
            values=tuple(sw.get("values", (10 * np.log10(system.power_budget_w) + 30.0,))),
            methods=parsed.get("methods", {}).get("include", METHODS),
            out_dir=out.get("directory", "out"), plots=out.get("plots", True),
            timing=out.get("timing", False),
            source={s: dict(cp.items(s)) for s in cp.sections()},
        )
    except ValueError as exc:
        raise ConfigError(f"{source_name}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def substream(seed: int, name: str, *extra: int) -> np.random.SeedSequence:
    """Named, reproducible random stream derived from the top-level seed."""
    return np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), *map(int, extra)])
