"""Experiment configuration: one JSON document, validated and unit-converted.

Schema (every section and key optional unless noted; defaults in brackets)::

    {
      "layout": {
        "bs_positions": [[x, y], ...],      # [(-60,0), (60,0), (0,60)]
        "cu_positions": [[x, y], ...],      # [(-10,0), (10,0), (0,10)]
        "n_antennas": 8,                    # N_t = N_r = N_a
        "spacing_ratio": 0.5,               # d_a / lambda
        "boresight_rad": null               # null: each array faces the origin
      },
      "sensing": {"noise_power_d_dbm": -102, "rcs": 1.0, "kappa_sq": 1e-10, "d_ref": 1.0},
      "comm": {"noise_power_c_dbm": -84, "rician_factor": 10.0,
               "pl_exponent": 3.0, "pl_ref_gain": 1e-3},
      "target_area": {"center": [0, 0], "side": 3.0, "grid_dim": 3},
      "experiment": {
        "p_max_dbm": 42, "gamma_db": 10,                 # fixed values
        "p_max_dbm_sweep": [...], "gamma_db_sweep": [...],
        "p_fa": [1e-3], "schemes": ["PROPOSED_I", ...],
        "channel_draws": 50, "seed": 0, "n_g": 200, "trials_mc": 200000
      }
    }

dBm and dB appear only here; :class:`ExperimentConfig` stores watts and
linear ratios.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..model import ArrayConfig, SensingParams, SystemLayout, db_to_linear, dbm_to_watts

SCHEMES = ("PROPOSED_I", "PROPOSED_II", "BENCHMARK_I", "BENCHMARK_II")

DEFAULTS = {
    "layout": {
        "bs_positions": [[-60.0, 0.0], [60.0, 0.0], [0.0, 60.0]],
        "cu_positions": [[-10.0, 0.0], [10.0, 0.0], [0.0, 10.0]],
        "n_antennas": 8,
        "spacing_ratio": 0.5,
        "boresight_rad": None,
    },
    "sensing": {"noise_power_d_dbm": -102.0, "rcs": 1.0, "kappa_sq": 1e-10, "d_ref": 1.0},
    "comm": {"noise_power_c_dbm": -84.0, "rician_factor": 10.0, "pl_exponent": 3.0, "pl_ref_gain": 1e-3},
    "target_area": {"center": [0.0, 0.0], "side": 3.0, "grid_dim": 3},
    "experiment": {
        "p_max_dbm": 42.0,
        "gamma_db": 10.0,
        "p_max_dbm_sweep": None,
        "gamma_db_sweep": None,
        "p_fa": [1e-3],
        "schemes": list(SCHEMES),
        "channel_draws": 50,
        "seed": 0,
        "n_g": 200,
        "trials_mc": 200_000,
    },
}


@dataclass(frozen=True)
class CommParams:
    noise_power_c: float
    rician_factor: float
    pl_exponent: float
    pl_ref_gain: float


@dataclass(frozen=True)
class TargetArea:
    center: tuple
    side: float
    grid_dim: int


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment description in SI units.

    ``p_max_sweep_dbm`` / ``gamma_sweep_db`` keep the config-unit values
    for labeling output; ``p_max`` and ``gamma`` are the fixed values in
    watts and linear scale.
    """

    layout: SystemLayout
    sensing: SensingParams
    comm: CommParams
    area: TargetArea
    p_max: float
    gamma: float
    p_max_sweep_dbm: tuple
    gamma_sweep_db: tuple
    p_fa: tuple
    schemes: tuple
    channel_draws: int
    seed: int
    n_g: int
    trials_mc: int
    raw: dict

    @property
    def n_antennas(self) -> int:
        return self.layout.array.n_tx

    def with_overrides(self, overrides):
        """New config with dotted-key overrides (``{"experiment.seed": 3}``) applied."""
        raw = copy.deepcopy(self.raw)
        for key, value in overrides.items():
            _set_dotted(raw, key, value)
        return config_from_dict(raw)


def _set_dotted(raw, key, value):
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in DEFAULTS or parts[1] not in DEFAULTS[parts[0]]:
        raise ConfigError(f"unknown config key {key!r}", field=key)
    raw.setdefault(parts[0], {})[parts[1]] = value


def _merge(data):
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    merged = copy.deepcopy(DEFAULTS)
    for section, body in data.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section {section!r}", field=section)
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object", field=section)
        for key, value in body.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown config key {section}.{key}", field=f"{section}.{key}")
            merged[section][key] = value
    return merged


def _number(raw, section, key, positive=False, integer=False, minimum=None):
    value = raw[section][key]
    name = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    if integer and float(value) != int(value):
        raise ConfigError(f"{name} must be an integer", field=name)
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite", field=name)
    if positive and not value > 0:
        raise ConfigError(f"{name} must be positive", field=name)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be at least {minimum}", field=name)
    return int(value) if integer else float(value)


def _number_list(raw, section, key, allow_none=False):
    value = raw[section][key]
    name = f"{section}.{key}"
    if value is None and allow_none:
        return ()
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a nonempty list of numbers", field=name)
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ConfigError(f"{name} entries must be finite numbers, got {v!r}", field=name)
        out.append(float(v))
    return tuple(out)


def _positions(raw, key):
    name = f"layout.{key}"
    try:
        arr = np.asarray(raw["layout"][key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of [x, y] pairs", field=name) from None
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ConfigError(f"{name} must be a nonempty list of [x, y] pairs", field=name)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite", field=name)
    return arr


def config_from_dict(data) -> ExperimentConfig:
    """Validate a parsed JSON document; raises :class:`ConfigError` naming the field."""
    raw = _merge(data)

    bs = _positions(raw, "bs_positions")
    cu = _positions(raw, "cu_positions")
    if bs.shape != cu.shape:
        raise ConfigError("layout.cu_positions must match layout.bs_positions in length", field="layout.cu_positions")
    n_a = _number(raw, "layout", "n_antennas", integer=True, minimum=1)
    spacing = _number(raw, "layout", "spacing_ratio", positive=True)
    boresight = raw["layout"]["boresight_rad"]
    if boresight is not None:
        boresight = _number(raw, "layout", "boresight_rad")
    layout = SystemLayout(bs, cu, ArrayConfig(n_a, n_a, spacing, boresight))

    sensing = SensingParams(
        rcs=_number(raw, "sensing", "rcs", positive=True),
        kappa_sq=_number(raw, "sensing", "kappa_sq", positive=True),
        d_ref=_number(raw, "sensing", "d_ref", positive=True),
        noise_power_d=float(dbm_to_watts(_number(raw, "sensing", "noise_power_d_dbm"))),
    )
    comm = CommParams(
        noise_power_c=float(dbm_to_watts(_number(raw, "comm", "noise_power_c_dbm"))),
        rician_factor=_number(raw, "comm", "rician_factor", minimum=0.0),
        pl_exponent=_number(raw, "comm", "pl_exponent", positive=True),
        pl_ref_gain=_number(raw, "comm", "pl_ref_gain", positive=True),
    )

    center = raw["target_area"]["center"]
    if not (isinstance(center, list) and len(center) == 2 and all(isinstance(c, (int, float)) for c in center)):
        raise ConfigError("target_area.center must be [x, y]", field="target_area.center")
    area = TargetArea(
        center=tuple(float(c) for c in center),
        side=_number(raw, "target_area", "side", positive=True),
        grid_dim=_number(raw, "target_area", "grid_dim", integer=True, minimum=1),
    )

    exp = raw["experiment"]
    p_fa = _number_list(raw, "experiment", "p_fa")
    if any(not 0 < p < 1 for p in p_fa):
        raise ConfigError("experiment.p_fa entries must lie in (0, 1)", field="experiment.p_fa")
    schemes = exp["schemes"]
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("experiment.schemes must be a nonempty list", field="experiment.schemes")
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown scheme(s) {bad}; choose from {list(SCHEMES)}", field="experiment.schemes")
    # canonical order keeps output independent of how the list was written
    schemes = tuple(s for s in SCHEMES if s in schemes)

    return ExperimentConfig(
        layout=layout,
        sensing=sensing,
        comm=comm,
        area=area,
        p_max=float(dbm_to_watts(_number(raw, "experiment", "p_max_dbm"))),
        gamma=float(db_to_linear(_number(raw, "experiment", "gamma_db"))),
        p_max_sweep_dbm=_number_list(raw, "experiment", "p_max_dbm_sweep", allow_none=True),
        gamma_sweep_db=_number_list(raw, "experiment", "gamma_db_sweep", allow_none=True),
        p_fa=p_fa,
        schemes=schemes,
        channel_draws=_number(raw, "experiment", "channel_draws", integer=True, minimum=1),
        seed=_number(raw, "experiment", "seed", integer=True, minimum=0),
        n_g=_number(raw, "experiment", "n_g", integer=True, minimum=1),
        trials_mc=_number(raw, "experiment", "trials_mc", integer=True, minimum=1),
        raw=raw,
    )


def parse_config(text) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", line=exc.lineno) from None
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    """Read, validate and unit-convert a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


PRESETS = ("default", "fig2", "fig3")


def load_preset(name) -> ExperimentConfig:
    """Built-in config shipped with the package (``default``, ``fig2``, ``fig3``)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(PRESETS)}")
    text = resources.files("netisac.presets").joinpath(f"{name}.json").read_text()
    return parse_config(text)


def with_seed(config: ExperimentConfig, seed) -> ExperimentConfig:
    return config.with_overrides({"experiment.seed": int(seed)})


__all__ = [
    "SCHEMES",
    "CommParams",
    "ExperimentConfig",
    "TargetArea",
    "config_from_dict",
    "load_config",
    "load_preset",
    "parse_config",
    "with_seed",
]
