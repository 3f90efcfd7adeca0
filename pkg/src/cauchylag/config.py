"""JSON run configuration."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

from .fields import Geometry, LabelGrid
from .presets import PRESETS, check_compatible
from .weights import EstimateConstants, WeightSequence, make_weights

__all__ = ["ConfigError", "SimulationConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    geometry: str
    dims: Tuple[int, int, int]
    lengths: Tuple[float, float, float]
    preset: str
    preset_params: Mapping[str, float]
    taylor_order: int = 8
    t_end: float = 0.0
    cfl_fraction: float = 0.25
    dt_max: Optional[float] = None
    weights_kind: str = "analytic"
    weights_r: Optional[float] = None
    constants: Optional[EstimateConstants] = None
    output_dir: str = "output"
    snapshot_every: int = 0
    diagnostics_file: str = "diagnostics.csv"
    holder_gamma: float = 0.5
    residual_tol: float = 1e-6
    workers: int = 1

    def grid(self) -> LabelGrid:
        return LabelGrid(self.geometry, self.dims, self.lengths)

    def weights(self) -> WeightSequence:
        kmax = max(self.taylor_order, 8)
        return make_weights(self.weights_kind, kmax, self.weights_r)


_TOP_KEYS = {"geometry", "preset", "taylor_order", "time", "weights", "estimator", "output", "workers", "holder", "residual_tol"}


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing required key {where}{key}")
    return obj[key]


def _mapping(value, where: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where} must be an object")
    return value


def _number(value, where: str, *, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where} must be a finite number")
    if positive and not value > 0:
        raise ConfigError(f"{where} must be positive")
    if nonneg and value < 0:
        raise ConfigError(f"{where} must be non-negative")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    return int(value)


def _unknown(obj: Mapping, allowed, where: str) -> None:
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key {where}{extra[0]}")


def parse_config(raw: Mapping[str, Any]) -> SimulationConfig:
    raw = _mapping(raw, "config")
    _unknown(raw, _TOP_KEYS, "")

    geo = _mapping(_require(raw, "geometry", ""), "geometry")
    _unknown(geo, {"type", "dims", "lengths"}, "geometry.")
    gtype = _require(geo, "type", "geometry.")
    if gtype not in ("periodic3d", "channel"):
        raise ConfigError(f"geometry.type must be 'periodic3d' or 'channel', got {gtype!r}")
    dims = _require(geo, "dims", "geometry.")
    if not isinstance(dims, list) or len(dims) != 3:
        raise ConfigError("geometry.dims must be a list of three integers")
    dims = tuple(_integer(d, f"geometry.dims[{i}]") for i, d in enumerate(dims))
    periodic_axes = (0, 1) if gtype == "channel" else (0, 1, 2)
    for i in periodic_axes:
        n = dims[i]
        if n < 1 or n & (n - 1):
            raise ConfigError(f"geometry.dims[{i}] must be a power of two in a periodic direction, got {n}")
    if gtype == "channel" and dims[2] < 5:
        raise ConfigError("geometry.dims[2] must be >= 5 for a channel")
    lengths = _require(geo, "lengths", "geometry.")
    if not isinstance(lengths, list) or len(lengths) != 3:
        raise ConfigError("geometry.lengths must be a list of three numbers")
    lengths = tuple(_number(v, f"geometry.lengths[{i}]", positive=True) for i, v in enumerate(lengths))

    pre = _mapping(_require(raw, "preset", ""), "preset")
    _unknown(pre, {"name", "params"}, "preset.")
    name = _require(pre, "name", "preset.")
    if name not in PRESETS:
        raise ConfigError(f"preset.name must be one of {', '.join(PRESETS)}, got {name!r}")
    try:
        check_compatible(name, Geometry(gtype))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    params = _mapping(pre.get("params", {}), "preset.params")
    params = {k: _number(v, f"preset.params.{k}") for k, v in params.items()}

    S = _integer(raw.get("taylor_order", 8), "taylor_order")
    if not 2 <= S <= 16:
        raise ConfigError(f"taylor_order out of range [2,16], got {S}")

    tm = _mapping(_require(raw, "time", ""), "time")
    _unknown(tm, {"t_end", "cfl_fraction", "dt_max"}, "time.")
    t_end = _number(_require(tm, "t_end", "time."), "time.t_end", nonneg=True)
    cfl = _number(tm.get("cfl_fraction", 0.25), "time.cfl_fraction", positive=True)
    if cfl > 0.5:
        raise ConfigError("time.cfl_fraction must lie in (0, 0.5]")
    dt_max = tm.get("dt_max")
    if dt_max is not None:
        dt_max = _number(dt_max, "time.dt_max", positive=True)

    wt = _mapping(raw.get("weights", {}), "weights")
    _unknown(wt, {"kind", "r"}, "weights.")
    kind = wt.get("kind", "analytic")
    if kind not in ("analytic", "gevrey"):
        raise ConfigError(f"weights.kind must be 'analytic' or 'gevrey', got {kind!r}")
    r = wt.get("r")
    if kind == "gevrey":
        r = _number(_require(wt, "r", "weights."), "weights.r", positive=True)
    elif r is not None:
        raise ConfigError("weights.r is only meaningful for gevrey weights")

    constants = None
    est = _mapping(raw.get("estimator", {}), "estimator")
    _unknown(est, {"constants"}, "estimator.")
    if est.get("constants") is not None:
        cst = _mapping(est["constants"], "estimator.constants")
        names = ("C_a", "M_0", "M_1", "C_DN", "C_daS", "C_Sad", "omega0_norm")
        _unknown(cst, names, "estimator.constants.")
        vals = {n: _number(_require(cst, n, "estimator.constants."), f"estimator.constants.{n}", positive=True) for n in names}
        constants = EstimateConstants(**vals)

    out = _mapping(raw.get("output", {}), "output")
    _unknown(out, {"dir", "snapshot_every", "diagnostics_file"}, "output.")
    out_dir = out.get("dir", "output")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir must be a non-empty string")
    snap = _integer(out.get("snapshot_every", 0), "output.snapshot_every")
    if snap < 0:
        raise ConfigError("output.snapshot_every must be >= 0")
    diag = out.get("diagnostics_file", "diagnostics.csv")
    if not isinstance(diag, str) or not diag:
        raise ConfigError("output.diagnostics_file must be a non-empty string")

    workers = _integer(raw.get("workers", 1), "workers")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    hold = _mapping(raw.get("holder", {}), "holder")
    _unknown(hold, {"gamma"}, "holder.")
    gamma = _number(hold.get("gamma", 0.5), "holder.gamma")
    if not 0 < gamma < 1:
        raise ConfigError("holder.gamma must lie in (0, 1)")
    rtol = _number(raw.get("residual_tol", 1e-6), "residual_tol", positive=True)

    return SimulationConfig(
        geometry=gtype,
        dims=dims,
        lengths=lengths,
        preset=name,
        preset_params=params,
        taylor_order=S,
        t_end=t_end,
        cfl_fraction=cfl,
        dt_max=dt_max,
        weights_kind=kind,
        weights_r=r,
        constants=constants,
        output_dir=out_dir,
        snapshot_every=snap,
        diagnostics_file=diag,
        holder_gamma=gamma,
        residual_tol=rtol,
        workers=workers,
    )


def load_config(path) -> SimulationConfig:
    """Read and validate a UTF-8 JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_config(raw)
