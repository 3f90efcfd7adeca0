"""Taylor-coefficient pipeline, practical radius estimate and restart stepping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .faadibruno import ChannelChart, WallField, boundary_normal_rhs, boundary_residual
from .fields import (
    POLAR,
    LabelGrid,
    ScalarField,
    VectorField,
    curl,
    divergence,
    gradient,
    holder_norm,
    resample,
    volume_integral,
)
from .hodge import HodgeProblem, hodge_solve, solve_neumann_defect
from .recursion import (
    RecursionWorkspace,
    TaylorSeries,
    cauchy_residual,
    displacement,
    jacobian_determinant,
    lagrangian_velocity,
)
from .weights import WeightSequence

__all__ = [
    "SimState",
    "StepReport",
    "OrderRecord",
    "RadiusError",
    "MapInversionError",
    "RunFailure",
    "compute_coefficients",
    "estimate_radius",
    "coefficient_norms",
    "advance",
    "project",
    "energy",
    "run_until",
]

log = logging.getLogger(__name__)


class RadiusError(RuntimeError):
    pass


class MapInversionError(RuntimeError):
    pass


class RunFailure(RuntimeError):
    """Raised by :func:`run_until`; carries the reports gathered so far."""

    def __init__(self, message: str, state: "SimState", reports: list):
        super().__init__(message)
        self.state = state
        self.reports = reports


@dataclass(frozen=True, eq=False)
class SimState:
    time: float
    grid: LabelGrid
    velocity: VectorField
    vorticity: VectorField
    step_index: int = 0

    @classmethod
    def initial(cls, velocity: VectorField, time: float = 0.0) -> "SimState":
        return cls(time, velocity.grid, velocity, curl(velocity), 0)


@dataclass(frozen=True)
class StepReport:
    step: int
    time: float
    radius_estimate: float
    dt_taken: float
    cauchy: float
    jacobian: float
    boundary: float
    volume_mean: float
    energy: float
    energy_drift: float
    coefficient_norms: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class OrderRecord:
    """Right-hand sides and the compatibility defect used to build one order."""

    s: int
    div_rhs: ScalarField
    curl_rhs: VectorField
    neumann: Optional[WallField]
    compat_defect: float


def _chart_for(grid: LabelGrid, chart):
    if not grid.is_channel:
        return None
    return chart if chart is not None else ChannelChart.for_grid(grid)


def _check_initial(v0: VectorField, tol: float) -> None:
    grid = v0.grid
    div = divergence(v0).data
    if grid.is_channel and v0.parity is None:
        div = div[:, :, 1:-1]
    scale = max(1.0, v0.sup() / min(grid.spacing))
    if float(np.max(np.abs(div))) > tol * scale:
        raise ValueError(f"initial velocity is not divergence-free (max |div| = {np.max(np.abs(div)):.3e})")
    if grid.is_channel:
        wall = np.abs(v0.data[2][:, :, [0, -1]])
        if float(np.max(wall)) > tol * max(1.0, v0.sup()):
            raise ValueError(f"initial velocity crosses the walls (max |v.nu| = {np.max(wall):.3e})")


def compute_coefficients(
    v0: VectorField,
    omega0: VectorField,
    S: int,
    chart=None,
    *,
    records: Optional[list] = None,
    workspace: Optional[list] = None,
    check_tol: float = 1e-8,
) -> TaylorSeries:
    """Taylor coefficients ``xi^(1) .. xi^(S)`` of the displacement.

    ``xi^(1) = v0``; each higher order is rebuilt from the divergence, curl
    and wall-normal data implied by the lower orders.  Optional ``records``
    receives an :class:`OrderRecord` per order ``s >= 2`` and ``workspace``
    the gradient arrays of every coefficient.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    v0.grid.check_same(omega0.grid)
    _check_initial(v0, check_tol)
    grid = v0.grid
    chart = _chart_for(grid, chart)
    ws = RecursionWorkspace(omega0, [v0])
    coeffs = [v0]
    for s in range(2, S + 1):
        try:
            crhs = ws.curl_rhs(s)
            drhs = ws.div_rhs(s)
            g = boundary_normal_rhs(s, coeffs, chart) if grid.is_channel else None
            if g is not None and not np.any(g.data):
                g = None
            sol = hodge_solve(HodgeProblem(drhs, crhs, g, np.zeros(3)))
        except Exception as exc:
            raise RuntimeError(f"Taylor coefficient of order {s} failed: {exc}") from exc
        xi = sol.xi
        if v0.parity != POLAR and xi.parity is not None:
            xi = VectorField(grid, xi.data)
        coeffs.append(xi)
        ws.append(xi)
        if records is not None:
            records.append(OrderRecord(s, drhs, crhs, g, sol.compat_defect))
    if workspace is not None:
        workspace.extend(ws.jac)
    return TaylorSeries(tuple(coeffs))


def coefficient_norms(series: TaylorSeries, gamma: float = 0.5) -> List[float]:
    return [holder_norm(c, 1, gamma) for c in series.coeffs]


def estimate_radius(
    series: TaylorSeries,
    W: WeightSequence,
    *,
    norms: Optional[Sequence[float]] = None,
    gamma: float = 0.5,
    floor: float = 1e-14,
    rel_floor: float = 1e-12,
) -> float:
    """Ratio-test radius from a least-squares fit of ``log(|xi^(s)| / M_s)``.

    The fit uses the upper half of the available orders.  Returns ``inf``
    when every coefficient beyond the first is negligible, i.e. below
    ``max(floor, rel_floor * |xi^(1)|)``.
    """
    S = series.order
    if S < 4:
        raise ValueError("radius estimation needs S >= 4")
    if S > W.kmax:
        raise ValueError(f"weights only reach order {W.kmax}")
    n = np.asarray(norms if norms is not None else coefficient_norms(series, gamma), dtype=float)
    if n.size != S:
        raise ValueError("one norm per coefficient expected")
    # roundoff in xi^(1) leaks into higher orders at a relative level
    floor = max(floor, rel_floor * n[0])
    if np.all(n[1:] <= floor):
        return math.inf
    s = np.arange(1, S + 1)
    M = W.array()[1 : S + 1]
    nonzero = n > floor
    if np.count_nonzero(nonzero) < 3:
        raise RadiusError("fewer than three non-negligible coefficient norms")
    sel = nonzero & (s >= (S + 1) // 2)
    if np.count_nonzero(sel) < 3:
        sel = nonzero
    slope = np.polyfit(s[sel], np.log(n[sel] / M[sel]), 1)[0]
    return float(math.exp(-slope))


def energy(v: VectorField) -> float:
    return 0.5 * volume_integral(v.grid, np.sum(v.data**2, axis=0))


def project(v: VectorField, mean: Optional[np.ndarray] = None) -> VectorField:
    """Remove the gradient part so that ``v`` is solenoidal and tangent to the walls."""
    grid = v.grid
    data = np.array(v.data)
    if grid.is_channel and v.parity == POLAR:
        data[2][:, :, [0, -1]] = 0.0
        v = VectorField(grid, data, POLAR)
        phi, _ = solve_neumann_defect(divergence(v), None, compat_rtol=np.inf)
    elif grid.is_channel:
        g = np.stack([data[2][:, :, 0], -data[2][:, :, -1]])
        phi, _ = solve_neumann_defect(ScalarField(grid, divergence(v).data), WallField(grid, g), compat_rtol=np.inf)
    else:
        phi, _ = solve_neumann_defect(divergence(v), None, compat_rtol=np.inf)
    out = data - gradient(phi).data
    if grid.is_channel and v.parity == POLAR:
        out[2][:, :, [0, -1]] = 0.0
    if mean is not None:
        w = grid.volume_weights / grid.volume
        comps = (0, 1) if grid.is_channel else (0, 1, 2)
        for c in comps:
            out[c] += mean[c] - float(np.sum(w * out[c]))
    return VectorField(grid, out, v.parity)


def _wrap(grid: LabelGrid, pts: np.ndarray) -> np.ndarray:
    pts = pts.copy()
    axes = (0, 1) if grid.is_channel else (0, 1, 2)
    for a in axes:
        pts[:, a] = np.mod(pts[:, a], grid.lengths[a])
    if grid.is_channel:
        pts[:, 2] = np.clip(pts[:, 2], 0.0, grid.lengths[2])
    return pts


def _periodic_delta(grid: LabelGrid, d: np.ndarray) -> np.ndarray:
    d = d.copy()
    axes = (0, 1) if grid.is_channel else (0, 1, 2)
    for a in axes:
        L = grid.lengths[a]
        d[:, a] -= L * np.round(d[:, a] / L)
    return d


def invert_map(
    series: TaylorSeries, dt: float, *, tol: float = 1e-10, max_iter: int = 50
) -> np.ndarray:
    """Labels ``a`` with ``a + xi(dt, a) = x`` for every grid node ``x``."""
    grid = series.grid
    disp = VectorField(grid, displacement(series, dt))
    x = np.moveaxis(grid.positions(), 0, -1).reshape(-1, 3)
    xi_nodes = np.moveaxis(disp.data, 0, -1).reshape(-1, 3)
    scale = max(grid.lengths)
    a = _wrap(grid, x - xi_nodes)
    for it in range(max_iter):
        a_new = _wrap(grid, x - resample(disp, a))
        change = float(np.max(np.abs(_periodic_delta(grid, a_new - a))))
        a = a_new
        if change <= tol * scale:
            return a
    raise MapInversionError(f"label map inversion did not converge in {max_iter} iterations (last change {change:.3e})")


def advance(state: SimState, series: TaylorSeries, dt: float) -> SimState:
    """Sum the series to ``dt``, return to grid nodes, and restart there."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    grid = state.grid
    if dt == 0.0:
        return replace(state, step_index=state.step_index + 1)
    a = invert_map(series, dt)
    u = VectorField(grid, lagrangian_velocity(series, dt))
    vals = resample(u, a)
    data = np.moveaxis(vals.reshape(grid.dims + (3,)), -1, 0)
    parity = state.velocity.parity
    v = project(VectorField(grid, data, parity), state.velocity.mean())
    return SimState(state.time + dt, grid, v, curl(v), state.step_index + 1)


def run_until(
    state: SimState,
    t_end: float,
    S: int,
    cfl_fraction: float,
    W: WeightSequence,
    *,
    dt_max: Optional[float] = None,
    gamma: float = 0.5,
    chart=None,
    residual_tol: float = 1e-6,
    on_step=None,
    on_state=None,
    max_halvings: int = 8,
) -> Tuple[SimState, List[StepReport]]:
    """Restart loop: coefficients, radius, truncated-series step, projection.

    The step is ``min(cfl_fraction * radius, dt_max, t_end - time)``.  When
    the label map cannot be inverted the step is halved.  ``on_step`` is
    called with each report as soon as it is available and
    ``on_state`` with each new state.
    """
    if not 0.0 < cfl_fraction <= 0.5:
        raise ValueError("cfl_fraction must lie in (0, 0.5]")
    reports: List[StepReport] = []
    E0 = energy(state.velocity)
    eps = 1e-12 * max(1.0, abs(t_end))
    chart = _chart_for(state.grid, chart)
    while state.time < t_end - eps:
        try:
            jac: list = []
            series = compute_coefficients(state.velocity, state.vorticity, S, chart, workspace=jac)
            norms = coefficient_norms(series, gamma)
            rho = estimate_radius(series, W, norms=norms, gamma=gamma)
            dt = t_end - state.time
            if math.isfinite(rho):
                dt = min(dt, cfl_fraction * rho)
            if dt_max is not None:
                dt = min(dt, dt_max)
            if not dt > 0:
                raise RuntimeError(f"non-positive step {dt!r}")
            for _ in range(max_halvings + 1):
                try:
                    new_state = advance(state, series, dt)
                    break
                except MapInversionError:
                    dt *= 0.5
            else:
                raise MapInversionError("label map inversion failed after repeated step halving")
            det = jacobian_determinant(series, dt, jac=jac)
            rep = StepReport(
                step=new_state.step_index,
                time=new_state.time,
                radius_estimate=rho,
                dt_taken=dt,
                cauchy=cauchy_residual(series, state.vorticity, dt, jac=jac),
                jacobian=float(np.max(np.abs(det - 1.0))),
                boundary=boundary_residual(series, chart, dt) if chart is not None else 0.0,
                volume_mean=float(abs(np.mean(det) - 1.0)),
                energy=energy(new_state.velocity),
                energy_drift=0.0,
                coefficient_norms=tuple(norms),
            )
            drift = (rep.energy - E0) / E0 if E0 > 0 else rep.energy
            rep = replace(rep, energy_drift=drift)
        except Exception as exc:
            raise RunFailure(str(exc), state, reports) from exc
        reports.append(rep)
        state = new_state
        try:
            if on_step is not None:
                on_step(rep)
            if on_state is not None:
                on_state(state)
        except OSError as exc:
            raise RunFailure(f"output failed: {exc}", state, reports) from exc
        if max(rep.cauchy, rep.jacobian, rep.boundary) > residual_tol:
            raise RunFailure(
                f"residual contract violated at step {rep.step}: "
                f"cauchy={rep.cauchy:.3e} jacobian={rep.jacobian:.3e} boundary={rep.boundary:.3e}",
                state,
                reports,
            )
    return state, reports
