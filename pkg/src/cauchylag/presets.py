"""Initial conditions.  All presets are steady solutions of the Euler equations."""

from __future__ import annotations

import math
from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from .fields import POLAR, Geometry, LabelGrid, VectorField, curl, deriv

__all__ = ["PRESETS", "STEADY_PRESETS", "preset_velocity", "make_preset_fields", "check_compatible"]

PRESETS = ("abc", "shear", "channel-vortex", "zero")
STEADY_PRESETS = frozenset(PRESETS)

_GEOMETRY = {
    "abc": (Geometry.PERIODIC3D,),
    "shear": (Geometry.CHANNEL,),
    "channel-vortex": (Geometry.CHANNEL,),
    "zero": (Geometry.PERIODIC3D, Geometry.CHANNEL),
}

_DEFAULTS: Dict[str, Dict[str, float]] = {
    "abc": {"A": 1.0, "B": 1.0, "C": 1.0},
    "shear": {"U0": 1.0},
    "channel-vortex": {"scale": 1.0},
    "zero": {},
}


def check_compatible(name: str, geometry: Geometry) -> None:
    if name not in _GEOMETRY:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    geometry = Geometry(geometry)
    if geometry not in _GEOMETRY[name]:
        need = " or ".join(g.value for g in _GEOMETRY[name])
        raise ValueError(f"preset {name!r} is incompatible with geometry {geometry.value!r} (requires {need})")


def _params(name: str, params: Mapping[str, float]) -> Dict[str, float]:
    out = dict(_DEFAULTS[name])
    for key, value in (params or {}).items():
        if key not in out:
            raise ValueError(f"preset.params.{key} is not a parameter of preset {name!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ValueError(f"preset.params.{key} must be a finite number")
        out[key] = float(value)
    return out


def preset_velocity(
    name: str, lengths, params: Mapping[str, float] | None = None
) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form velocity ``v(x)`` for points of shape ``(..., 3)``."""
    if name not in _GEOMETRY:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    p = _params(name, params or {})
    lx, ly, lz = (float(v) for v in lengths)

    if name == "abc":
        A, B, C = p["A"], p["B"], p["C"]

        def v(x):
            x = np.asarray(x, dtype=float)
            X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
            return np.stack(
                [A * np.sin(Z) + C * np.cos(Y), B * np.sin(X) + A * np.cos(Z), C * np.sin(Y) + B * np.cos(X)],
                axis=-1,
            )

    elif name == "shear":
        U0 = p["U0"]

        def v(x):
            x = np.asarray(x, dtype=float)
            vx = U0 * np.sin(np.pi * x[..., 2] / lz)
            return np.stack([vx, np.zeros_like(vx), np.zeros_like(vx)], axis=-1)

    elif name == "channel-vortex":
        s = p["scale"]
        kx, kz = 2.0 * np.pi / lx, np.pi / lz

        def v(x):
            x = np.asarray(x, dtype=float)
            X, Z = x[..., 0], x[..., 2]
            vx = -(kz / kx) * np.sin(kx * X) * np.cos(kz * Z) * s
            vz = np.cos(kx * X) * np.sin(kz * Z) * s
            return np.stack([vx, np.zeros_like(vx), vz], axis=-1)

    else:

        def v(x):
            return np.zeros(np.shape(x), dtype=float)

    return v


def make_preset_fields(
    name: str, grid: LabelGrid, params: Mapping[str, float] | None = None
) -> Tuple[VectorField, VectorField]:
    """``(v0, omega0)`` sampled on ``grid``; ``omega0`` is the discrete curl."""
    check_compatible(name, grid.geometry)
    if name == "channel-vortex":
        # discrete curl of the streamfunction: divergence-free and
        # impermeable to rounding, O(h^4) away from the closed form
        s = _params(name, params or {})["scale"]
        lx, _, lz = grid.lengths
        kx = 2.0 * np.pi / lx
        X, _, Z = grid.mesh()
        psi = np.sin(kx * X) * np.sin(np.pi * Z / lz) * (s / kx)
        zero = np.zeros(grid.dims)
        data = np.stack([-deriv(grid, psi, 2, -1), zero, deriv(grid, psi, 0)])
    else:
        data = np.moveaxis(preset_velocity(name, grid.lengths, params)(np.moveaxis(grid.positions(), 0, -1)), -1, 0)
    parity = None
    if grid.is_channel and name in ("channel-vortex", "zero"):
        parity = POLAR
        data[2][:, :, [0, -1]] = 0.0
    v0 = VectorField(grid, data, parity)
    return v0, curl(v0)
