"""Reference particle trajectories for steady presets.

For a steady flow the Lagrangian map solves the autonomous system
``dX/dt = v0(X)``, which an adaptive Runge--Kutta integrator handles to near
machine precision independently of the Taylor recursion.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .presets import STEADY_PRESETS, preset_velocity

__all__ = ["integrate_trajectories", "preset_trajectories"]


def integrate_trajectories(
    velocity: Callable[[np.ndarray], np.ndarray],
    labels: np.ndarray,
    t: float,
    *,
    tol: float = 1e-12,
) -> np.ndarray:
    """Positions at time ``t`` of particles starting at ``labels`` (shape ``(P, 3)``)."""
    labels = np.asarray(labels, dtype=float).reshape(-1, 3)
    if t == 0.0:
        return labels.copy()

    def rhs(_t, y):
        return velocity(y.reshape(-1, 3)).ravel()

    sol = solve_ivp(rhs, (0.0, float(t)), labels.ravel(), method="DOP853", rtol=tol, atol=tol)
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed: {sol.message}")
    return sol.y[:, -1].reshape(-1, 3)


def preset_trajectories(
    name: str, lengths, labels: np.ndarray, t: float, params: Mapping[str, float] | None = None, *, tol: float = 1e-12
) -> np.ndarray:
    if name not in STEADY_PRESETS:
        raise ValueError(f"preset {name!r} is not a steady flow; the trajectory oracle does not apply")
    return integrate_trajectories(preset_velocity(name, lengths, params), labels, t, tol=tol)
