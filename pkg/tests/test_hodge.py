import math

import numpy as np
import pytest

from cauchylag.faadibruno import WallField
from cauchylag.fields import AXIAL, LabelGrid, ScalarField, VectorField, curl, divergence, gradient, volume_integral
from cauchylag.hodge import (
    HodgeError,
    HodgeProblem,
    discrete_laplacian,
    hodge_reconstruct,
    hodge_solve,
    solve_dirichlet,
    solve_neumann,
    solve_neumann_defect,
)
from cauchylag.presets import make_preset_fields, preset_velocity

TWO_PI = 2.0 * np.pi


def _neumann_error(nz, f, fz, fzz, lz=1.0):
    g = LabelGrid("channel", (8, 4, nz), (TWO_PI, 1.0, lz))
    X, _, Z = g.mesh()
    cx = np.cos(g.axes[0])[:, None] * np.ones(4)
    rhs = np.cos(X) * (fzz(Z) - f(Z))
    # wall normal points into the fluid: +z at the bottom, -z at the top
    wall = np.stack([cx * fz(0.0), -cx * fz(lz)])
    phi = solve_neumann(ScalarField(g, rhs), wall)
    return float(np.max(np.abs(phi.data - np.cos(X) * f(Z))))


def test_neumann_cubic_exact():
    err = _neumann_error(17, lambda z: z**3 - z**2, lambda z: 3 * z**2 - 2 * z, lambda z: 6 * z - 2)
    assert err <= 1e-12


def test_neumann_manufactured_order():
    f = lambda z: np.exp(z) * np.cos(2 * z)  # noqa: E731
    fz = lambda z: np.exp(z) * (np.cos(2 * z) - 2 * np.sin(2 * z))  # noqa: E731
    fzz = lambda z: np.exp(z) * (-3 * np.cos(2 * z) - 4 * np.sin(2 * z))  # noqa: E731
    e33, e65 = _neumann_error(33, f, fz, fzz), _neumann_error(65, f, fz, fzz)
    assert math.log2(e33 / e65) >= 3.5


def test_neumann_zero_mode_with_gauge():
    """kx = ky = 0 data: phi = cos(pi z) + z^2 / 2 up to a constant, zero-mean gauge."""
    g = LabelGrid("channel", (4, 4, 65), (1.0, 1.0, 1.0))
    _, _, Z = g.mesh()
    exact = np.cos(np.pi * Z) + 0.5 * Z**2
    rhs = -(np.pi**2) * np.cos(np.pi * Z) + 1.0
    wall = np.stack([np.zeros((4, 4)), -np.ones((4, 4))])
    phi = solve_neumann(ScalarField(g, rhs), wall)
    exact -= volume_integral(g, exact) / g.volume
    assert abs(volume_integral(g, phi.data)) <= 1e-12
    assert np.max(np.abs(phi.data - exact)) <= 1e-5


def test_neumann_zero_data():
    g = LabelGrid("channel", (4, 4, 9), (1.0, 1.0, 1.0))
    assert np.all(solve_neumann(ScalarField(g, np.zeros(g.dims))).data == 0.0)


def test_neumann_incompatible_raises():
    g = LabelGrid("channel", (4, 4, 17), (1.0, 1.0, 1.0))
    with pytest.raises(HodgeError):
        solve_neumann(ScalarField(g, np.ones(g.dims)), np.zeros((2, 4, 4)))


def test_neumann_defect_is_small_constant_for_compatible_data():
    g = LabelGrid("channel", (4, 4, 33), (1.0, 1.0, 1.0))
    _, _, Z = g.mesh()
    rhs = -(np.pi**2) * np.cos(np.pi * Z)
    _, defect = solve_neumann_defect(ScalarField(g, rhs), np.zeros((2, 4, 4)))
    assert abs(defect) <= 1e-3 * np.max(np.abs(rhs))


def test_periodic_poisson_sine():
    g = LabelGrid("periodic3d", (16, 8, 8), (TWO_PI, 1.0, 1.0))
    X, _, _ = g.mesh()
    phi = solve_neumann(ScalarField(g, np.sin(X)))
    assert np.max(np.abs(phi.data + np.sin(X))) <= 1e-10


def test_periodic_band_limited_exact():
    g = LabelGrid("periodic3d", (16, 16, 16), (TWO_PI, 2.0, 3.0))
    rng = np.random.default_rng(0)
    f = np.zeros(g.dims)
    X = g.mesh()
    for _ in range(5):
        k = rng.integers(-4, 5, 3)
        if not k.any():
            continue
        f += np.cos(sum(TWO_PI * k[i] * X[i] / g.lengths[i] for i in range(3)) + rng.uniform(0, 6))
    f -= f.mean()
    phi = solve_neumann(ScalarField(g, discrete_laplacian(ScalarField(g, f)).data))
    assert np.max(np.abs(phi.data - f)) <= 1e-10
    P = solve_dirichlet(VectorField(g, np.stack([discrete_laplacian(ScalarField(g, f)).data] * 3)))
    assert np.max(np.abs(P.data - f)) <= 1e-10


def test_dirichlet_quadratic_exact():
    g = LabelGrid("channel", (4, 4, 17), (1.0, 1.0, 1.0))
    _, _, Z = g.mesh()
    P = solve_dirichlet(VectorField(g, np.full((3,) + g.dims, -2.0)))
    for c in P.data:
        assert np.max(np.abs(c - Z * (1 - Z))) <= 1e-10


def test_dirichlet_zero():
    g = LabelGrid("channel", (4, 4, 9), (1.0, 1.0, 1.0))
    assert np.all(solve_dirichlet(VectorField(g, np.zeros((3,) + g.dims))).data == 0.0)


def _dirichlet_error(nz, parity):
    g = LabelGrid("channel", (8, 4, nz), (TWO_PI, 1.0, 1.0))
    X, _, Z = g.mesh()
    exact = np.sin(X) * np.sin(np.pi * Z)
    rhs = -(1 + np.pi**2) * exact
    P = solve_dirichlet(VectorField(g, np.stack([rhs] * 3), parity))
    return float(np.max(np.abs(P.data - exact)))


@pytest.mark.parametrize("parity", [None, (-1, -1, -1)])
def test_dirichlet_manufactured_order(parity):
    assert math.log2(_dirichlet_error(33, parity) / _dirichlet_error(65, parity)) >= 3.5


def test_laplacian_self_adjoint_odd_fields():
    g = LabelGrid("channel", (8, 8, 17), (TWO_PI, TWO_PI, 1.0))
    rng = np.random.default_rng(3)
    u, v = rng.normal(size=(2,) + g.dims)
    u[:, :, [0, -1]] = 0.0
    v[:, :, [0, -1]] = 0.0
    Lu = discrete_laplacian(ScalarField(g, u, -1)).data
    Lv = discrete_laplacian(ScalarField(g, v, -1)).data
    lhs, rhs = volume_integral(g, Lu * v), volume_integral(g, u * Lv)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_zero_problem():
    g = LabelGrid("channel", (4, 4, 9), (1.0, 1.0, 1.0))
    p = HodgeProblem(ScalarField(g, np.zeros(g.dims)), VectorField(g, np.zeros((3,) + g.dims)))
    assert np.all(hodge_reconstruct(p).data == 0.0)


def test_abc_reconstruction(abc_fields):
    v0, w0 = abc_fields
    g = v0.grid
    p = HodgeProblem(ScalarField(g, np.zeros(g.dims)), w0, mean=v0.mean())
    xi = hodge_reconstruct(p)
    assert np.max(np.abs(xi.data - v0.data)) <= 1e-10


def test_channel_vortex_s1_consistency(channel_grid):
    v0, w0 = make_preset_fields("channel-vortex", channel_grid)
    g = channel_grid
    p = HodgeProblem(ScalarField(g, np.zeros(g.dims), 1), w0, WallField(g, np.zeros((2,) + g.dims[:2])), v0.mean())
    sol = hodge_solve(p)
    assert np.max(np.abs(sol.xi.data - v0.data)) <= 1e-10
    assert sol.xi.parity == v0.parity
    # and O(h^4) close to the closed form
    closed = preset_velocity("channel-vortex", g.lengths)(np.moveaxis(g.positions(), 0, -1))
    assert np.max(np.abs(sol.xi.data - np.moveaxis(closed, -1, 0))) <= 1e-4


def _generic_channel_case(nz):
    g = LabelGrid("channel", (16, 16, nz), (TWO_PI, TWO_PI, 1.0))
    X, Y, Z = g.mesh()
    psi = np.stack([np.zeros(g.dims), np.zeros(g.dims), np.sin(X) * np.cos(Y) * Z**2 * (1 - Z) ** 2])
    phi = np.cos(X + Y) * np.exp(Z)
    target = gradient(ScalarField(g, phi)).data + curl(VectorField(g, psi)).data
    t = VectorField(g, target)
    wall = np.stack([target[2][:, :, 0], -target[2][:, :, -1]])
    sol = hodge_solve(HodgeProblem(divergence(t), curl(t), WallField(g, wall), t.mean()))
    return t, wall, sol


def test_gauge_and_postconditions_generic_channel():
    """Data without parity: div is matched to roundoff, wall data exactly,
    curl and the gauge up to the fourth-order closure error."""
    t, wall, sol = _generic_channel_case(33)
    inner = (Ellipsis, slice(2, -2))
    assert np.max(np.abs(divergence(sol.xi).data - divergence(t).data)[inner]) <= 1e-8
    assert np.max(np.abs(sol.xi.data[2][:, :, 0] - wall[0])) <= 1e-8
    assert np.max(np.abs(sol.xi.data[2][:, :, -1] + wall[1])) <= 1e-8
    assert np.max(np.abs(curl(sol.xi).data - curl(t).data)[inner]) <= 1e-5
    assert np.max(np.abs(divergence(sol.Phi).data[inner])) <= 1e-5
    e33 = np.max(np.abs(sol.xi.data - t.data))
    t65, _, sol65 = _generic_channel_case(65)
    e65 = np.max(np.abs(sol65.xi.data - t65.data))
    assert math.log2(e33 / e65) >= 3.5


def test_hodge_problem_validates_geometry():
    g = LabelGrid("periodic3d", (4, 4, 4), (1.0,) * 3)
    c = LabelGrid("channel", (4, 4, 5), (1.0,) * 3)
    with pytest.raises(ValueError):
        HodgeProblem(ScalarField(g, np.zeros(g.dims)), VectorField(g, np.zeros((3,) + g.dims)), WallField(c, np.zeros((2, 4, 4))))


def test_vector_potential_parity(vortex_series):
    _, w0, _, _ = vortex_series
    g = w0.grid
    sol = hodge_solve(HodgeProblem(ScalarField(g, np.zeros(g.dims), 1), w0))
    assert sol.Phi.parity == AXIAL
    assert np.max(np.abs(divergence(sol.Phi).data)) <= 1e-10
