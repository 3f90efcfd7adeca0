import math

import numpy as np
import pytest

from cauchylag.fields import LabelGrid, VectorField, divergence
from cauchylag.oracle import preset_trajectories
from cauchylag.presets import make_preset_fields
from cauchylag.recursion import TaylorSeries, displacement, jacobian_determinant
from cauchylag.stepper import (
    RadiusError,
    RunFailure,
    SimState,
    advance,
    compute_coefficients,
    energy,
    estimate_radius,
    invert_map,
    run_until,
)
from cauchylag.weights import make_weights

TWO_PI = 2.0 * np.pi
ANALYTIC = make_weights("analytic", 16)


def _dummy_series(S):
    g = LabelGrid("periodic3d", (4, 4, 4), (1.0,) * 3)
    return TaylorSeries(tuple(VectorField(g, np.zeros((3, 4, 4, 4))) for _ in range(S)))


# -- coefficients ------------------------------------------------------------


def test_shear_higher_coefficients_vanish(channel_grid):
    v0, w0 = make_preset_fields("shear", channel_grid)
    series = compute_coefficients(v0, w0, 8)
    assert np.array_equal(series[1].data, v0.data)
    for s in range(2, 9):
        assert series[s].sup() <= 1e-9


def test_zero_preset_all_zero(channel_grid):
    v0, w0 = make_preset_fields("zero", channel_grid)
    series = compute_coefficients(v0, w0, 5)
    assert all(c.sup() == 0.0 for c in series.coeffs)


def test_abc_series_matches_ode(abc_series8, abc_fields):
    series, _ = abc_series8
    g = abc_fields[0].grid
    labels = np.moveaxis(g.positions(), 0, -1).reshape(-1, 3)
    sub = labels[:: 97]
    X = preset_trajectories("abc", g.lengths, sub, 0.05)
    xi = np.moveaxis(displacement(series.truncate(6), 0.05), 0, -1).reshape(-1, 3)[:: 97]
    assert np.max(np.abs(sub + xi - X)) <= 1e-7


def test_rejects_divergent_initial_data():
    g = LabelGrid("periodic3d", (8, 8, 8), (TWO_PI,) * 3)
    X, _, _ = g.mesh()
    v = VectorField(g, np.stack([np.sin(X), 0 * X, 0 * X]))
    with pytest.raises(ValueError, match="divergence"):
        compute_coefficients(v, v, 3)


def test_rejects_wall_crossing_initial_data(channel_grid):
    g = channel_grid
    v = VectorField(g, np.stack([np.zeros(g.dims), np.zeros(g.dims), np.ones(g.dims)]))
    with pytest.raises(ValueError, match="walls"):
        compute_coefficients(v, v, 3)


def test_channel_vortex_hodge_consistency(vortex_series):
    v0, w0, series, records = vortex_series
    from cauchylag.fields import curl

    for rec in records:
        xi = series[rec.s]
        assert np.max(np.abs(divergence(xi).data - rec.div_rhs.data)) <= 1e-8
        assert np.max(np.abs(curl(xi).data - rec.curl_rhs.data)) <= 1e-8
        assert np.max(np.abs(xi.data[2][:, :, [0, -1]])) == 0.0


# -- radius ------------------------------------------------------------------


def test_radius_geometric():
    r, S = 0.5, 8
    norms = [r**s for s in range(1, S + 1)]
    rho = estimate_radius(_dummy_series(S), ANALYTIC, norms=norms)
    assert abs(rho - 1 / r) <= 0.01 / r


def test_radius_infinite_for_polynomial_solutions():
    assert estimate_radius(_dummy_series(8), ANALYTIC, norms=[1.0] + [1e-16] * 7) == math.inf


def test_radius_needs_three_norms():
    with pytest.raises(RadiusError):
        estimate_radius(_dummy_series(8), ANALYTIC, norms=[1.0, 0.5] + [0.0] * 6)


def test_radius_needs_order_four():
    with pytest.raises(ValueError):
        estimate_radius(_dummy_series(3), ANALYTIC, norms=[1.0, 0.5, 0.25])


def test_radius_gevrey_weights():
    W = make_weights("gevrey", 16, 1.0)
    norms = [math.factorial(s) * 0.5**s for s in range(1, 9)]
    assert estimate_radius(_dummy_series(8), W, norms=norms) == pytest.approx(2.0, rel=1e-10)


def test_radius_time_rescaling(abc_grid):
    rhos = []
    for lam in (1.0, 2.0):
        v0, w0 = make_preset_fields("abc", abc_grid, {"A": lam, "B": lam, "C": lam})
        rhos.append(estimate_radius(compute_coefficients(v0, w0, 8), ANALYTIC))
    assert abs(rhos[1] / rhos[0] - 0.5) <= 0.05 * 0.5


# -- advance -----------------------------------------------------------------


def test_advance_zero_dt(abc_series8, abc_fields):
    series, _ = abc_series8
    st = SimState.initial(abc_fields[0])
    out = advance(st, series, 0.0)
    assert out.step_index == 1 and out.time == 0.0
    assert out.velocity is st.velocity


def test_advance_shear_steady(channel_grid):
    v0, w0 = make_preset_fields("shear", channel_grid)
    series = compute_coefficients(v0, w0, 8)
    out = advance(SimState.initial(v0), series, 0.3)
    assert np.max(np.abs(out.velocity.data - v0.data)) <= 1e-8
    assert out.time == 0.3


def test_map_inversion_round_trip(abc_series8):
    series, _ = abc_series8
    g = series.grid
    a = invert_map(series, 0.05)
    disp = VectorField(g, displacement(series, 0.05))
    from cauchylag.fields import resample

    x = a + resample(disp, a)
    nodes = np.moveaxis(g.positions(), 0, -1).reshape(-1, 3)
    d = x - nodes
    d -= TWO_PI * np.round(d / TWO_PI)
    assert np.max(np.abs(d)) <= 1e-9


def test_volume_preserved_before_resampling(abc_series8):
    series, _ = abc_series8
    det = jacobian_determinant(series, 0.05)
    assert abs(float(np.mean(det)) - 1.0) <= 1e-8


def test_step_doubling_abc(abc_grid, abc_fields):
    v0, w0 = abc_fields
    st = SimState.initial(v0)
    one = advance(st, compute_coefficients(v0, w0, 8), 0.02)
    half = advance(st, compute_coefficients(v0, w0, 8), 0.01)
    two = advance(half, compute_coefficients(half.velocity, half.vorticity, 8), 0.01)
    assert np.max(np.abs(one.velocity.data - two.velocity.data)) <= 1e-8


# -- driver ------------------------------------------------------------------


def test_run_until_zero_time(abc_fields):
    st = SimState.initial(abc_fields[0])
    out, reps = run_until(st, 0.0, 8, 0.25, ANALYTIC)
    assert reps == [] and out is st


def test_run_until_shear(channel_grid):
    v0, _ = make_preset_fields("shear", channel_grid)
    seen = []
    out, reps = run_until(SimState.initial(v0), 1.0, 8, 0.25, ANALYTIC, dt_max=0.1, on_step=seen.append)
    assert len(reps) == 10 and seen == reps
    assert out.time == pytest.approx(1.0, abs=1e-12)
    assert all(abs(r.energy_drift) <= 1e-8 for r in reps)
    assert all(r.radius_estimate == math.inf for r in reps)
    assert all(r.dt_taken == pytest.approx(0.1) for r in reps)


def test_run_until_abc_conservation(abc_fields):
    st = SimState.initial(abc_fields[0])
    out, reps = run_until(st, 0.1, 8, 0.25, ANALYTIC)
    assert reps and out.time == pytest.approx(0.1)
    for r in reps:
        assert r.cauchy <= 1e-6
        assert abs(r.energy_drift) <= 1e-6
        assert r.volume_mean <= 1e-8
        assert r.dt_taken <= 0.25 * r.radius_estimate * (1 + 1e-12)


def test_run_until_partial_reports_on_failure(channel_grid):
    v0, _ = make_preset_fields("channel-vortex", channel_grid, {"scale": 3.0})
    with pytest.raises(RunFailure) as info:
        run_until(SimState.initial(v0), 1.0, 4, 0.5, ANALYTIC, dt_max=0.02, residual_tol=1e-30)
    assert len(info.value.reports) == 1
    assert info.value.state.step_index == 1


def test_run_until_validates_cfl(abc_fields):
    with pytest.raises(ValueError):
        run_until(SimState.initial(abc_fields[0]), 1.0, 8, 0.75, ANALYTIC)


def test_energy_of_zero():
    g = LabelGrid("channel", (4, 4, 5), (1.0,) * 3)
    assert energy(VectorField(g, np.zeros((3,) + g.dims))) == 0.0
