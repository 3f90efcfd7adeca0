import itertools
import math
from dataclasses import dataclass

import numpy as np
import pytest
import sympy as sp

from cauchylag.faadibruno import (
    ChannelChart,
    WallField,
    boundary_normal_rhs,
    boundary_residual,
    composition_coefficient,
    multi_indices,
    normal_datum_at_points,
    partitions,
    surface_residual,
)
from cauchylag.fields import LabelGrid, VectorField
from cauchylag.recursion import TaylorSeries


def _weak_compositions(total, parts):
    for cuts in itertools.combinations_with_replacement(range(total + 1), parts - 1):
        edges = (0,) + cuts + (total,)
        yield tuple(edges[j + 1] - edges[j] for j in range(parts))


def brute_force_partitions(s, beta):
    """Every strictly increasing l-tuple with every split of beta into nonzero k-vectors."""
    found = set()
    for i in range(1, min(s, sum(beta)) + 1):
        splits = [list(_weak_compositions(b, i)) for b in beta]
        for ls in itertools.combinations(range(1, s + 1), i):
            for cx, cy, cz in itertools.product(*splits):
                ks = tuple(zip(cx, cy, cz))
                if not all(any(k) for k in ks):
                    continue
                if sum(sum(k) * l for k, l in zip(ks, ls)) == s:
                    found.add((ls, ks))
    return found


def test_partition_examples():
    assert [(t.lengths, t.ks) for t in partitions(1, (1, 0, 0))] == [((1,), ((1, 0, 0),))]
    assert [(t.lengths, t.ks) for t in partitions(2, (0, 0, 2))] == [((1,), ((0, 0, 2),))]
    assert [(t.lengths, t.ks) for t in partitions(3, (0, 0, 1))] == [((3,), ((0, 0, 1),))]


def test_partitions_empty_when_beta_too_large():
    assert partitions(2, (1, 1, 1)) == ()


@pytest.mark.parametrize("s", range(1, 7))
def test_partitions_match_brute_force(s):
    for order in range(1, s + 1):
        for beta in multi_indices(order):
            got = {(t.lengths, t.ks) for t in partitions(s, beta)}
            assert len(got) == len(partitions(s, beta))
            assert got == brute_force_partitions(s, beta), (s, beta)


def test_partitions_sorted():
    terms = partitions(5, (1, 1, 1))
    keys = [(t.i, t.lengths, t.ks) for t in terms]
    assert keys == sorted(keys)


# -- composition oracle ------------------------------------------------------


@dataclass(frozen=True)
class ExpZChart:
    max_deriv_order: int = 64

    def value(self, x):
        return np.exp(np.asarray(x)[..., 2])

    def derivative(self, x, beta):
        x = np.asarray(x)
        if beta[0] or beta[1]:
            return np.zeros(x.shape[:-1])
        return np.exp(x[..., 2])


@dataclass(frozen=True)
class SphereChart:
    """``S = R^2 - |x|^2``, positive inside the ball."""

    radius: float
    max_deriv_order: int = 2

    def value(self, x):
        return self.radius**2 - np.sum(np.asarray(x) ** 2, axis=-1)

    def derivative(self, x, beta):
        x = np.asarray(x)
        order = sum(beta)
        if order == 0:
            return self.value(x)
        if order == 1:
            return -2.0 * x[..., beta.index(1)]
        if order == 2 and 2 in beta:
            return np.full(x.shape[:-1], -2.0)
        return np.zeros(x.shape[:-1])


a = sp.symbols("a1:4")
t = sp.Symbol("t")


def _poly_coeffs(S, seed):
    rng = np.random.default_rng(seed)
    coeffs = []
    for _ in range(S):
        comps = []
        for _c in range(3):
            c = [sp.Rational(int(v), 7) for v in rng.integers(-5, 6, 4)]
            comps.append(c[0] + c[1] * a[0] + c[2] * a[1] * a[2] + c[3] * a[2] ** 2)
        coeffs.append(comps)
    return coeffs


@pytest.mark.parametrize("which", ["channel", "exp"])
def test_composition_matches_symbolic(which):
    S = 6
    coeffs = _poly_coeffs(S, 3 if which == "exp" else 4)
    if which == "channel":
        chart = ChannelChart(1.0)
        fn = lambda x: x[2] * (1 - x[2])  # noqa: E731
    else:
        chart = ExpZChart()
        fn = lambda x: sp.exp(x[2])  # noqa: E731
    X = [a[c] + sum(coeffs[l][c] * t ** (l + 1) for l in range(S)) for c in range(3)]
    expr = fn(X)
    pts = np.array([[0.3, -0.2, 0.4], [0.1, 0.5, 0.0], [-0.7, 0.25, 0.9]])
    num_vals = []
    for l in range(S):
        f = sp.lambdify(a, coeffs[l], "numpy")
        num_vals.append(np.array([f(*p) for p in pts], dtype=float))
    for s in range(1, S + 1):
        sym = sp.diff(expr, t, s).subs(t, 0) / sp.factorial(s)
        f = sp.lambdify(a, sym, "numpy")
        exact = np.array([float(f(*p)) for p in pts])
        got = composition_coefficient(s, num_vals, pts, chart)
        assert np.allclose(got, exact, rtol=1e-12, atol=1e-12), (s, got, exact)


def test_composition_exact_in_rationals():
    """Same oracle in exact arithmetic: compare the partition sum term by term."""
    S = 5
    coeffs = _poly_coeffs(S, 9)
    p = {a[0]: sp.Rational(1, 3), a[1]: sp.Rational(-2, 5), a[2]: sp.Rational(3, 7)}
    vals = [[sp.nsimplify(c.subs(p)) for c in comp] for comp in coeffs]
    X = [a[c] + sum(coeffs[l][c] * t ** (l + 1) for l in range(S)) for c in range(3)]
    expr = X[2] * (1 - X[2])
    for s in range(1, S + 1):
        exact = (sp.diff(expr, t, s).subs(t, 0) / sp.factorial(s)).subs(p)
        total = sp.Integer(0)
        point = [p[a[0]], p[a[1]], p[a[2]]]
        dS = {(0, 0, 1): 1 - 2 * point[2], (0, 0, 2): sp.Integer(-2)}
        for beta, d in dS.items():
            for term in partitions(s, beta):
                prod = sp.Integer(1)
                for l, k in zip(term.lengths, term.ks):
                    for c in range(3):
                        prod *= vals[l - 1][c] ** k[c] / sp.factorial(k[c])
                total += d * prod
        assert sp.simplify(total - exact) == 0


# -- wall datum ----------------------------------------------------------------


def _channel(nz=9, lz=1.0):
    return LabelGrid("channel", (4, 4, nz), (1.0, 1.0, lz))


def test_datum_order1_is_zero():
    g = _channel()
    v = VectorField(g, np.ones((3,) + g.dims))
    assert np.all(boundary_normal_rhs(1, [v], ChannelChart(1.0)).data == 0.0)


def test_datum_order2_zero_for_tangent_flow():
    g = _channel()
    data = np.random.default_rng(0).normal(size=(3,) + g.dims)
    data[2][:, :, [0, -1]] = 0.0
    g2 = boundary_normal_rhs(2, [VectorField(g, data)], ChannelChart(1.0))
    assert np.all(g2.data == 0.0)


def test_datum_order2_quadratic():
    g = _channel()
    c = 0.37
    data = np.zeros((3,) + g.dims)
    data[2][:, :, 0] = c
    g2 = boundary_normal_rhs(2, [VectorField(g, data)], ChannelChart(1.0))
    assert np.allclose(g2.data[0], c * c, rtol=1e-15)
    assert np.all(g2.data[1] == 0.0)


def test_datum_chart_invariance():
    g = _channel(lz=1.3)
    rng = np.random.default_rng(5)
    coeffs = [VectorField(g, rng.normal(size=(3,) + g.dims)) for _ in range(5)]
    for s in range(2, 6):
        d1 = boundary_normal_rhs(s, coeffs, ChannelChart(1.3)).data
        d2 = boundary_normal_rhs(s, coeffs, ChannelChart(1.3, scale=2.0)).data
        assert np.allclose(d1, d2, rtol=1e-12, atol=1e-12)


def test_datum_homogeneity_by_degree():
    """Scaling every coefficient by lam scales each partition term by lam^(sum |k_j|)."""
    pts = np.array([[0.2, 0.1, 0.0], [0.4, 0.3, 1.0]])
    chart = ChannelChart(1.0)
    rng = np.random.default_rng(2)
    vals = [rng.normal(size=(2, 3)) for _ in range(5)]
    s = 5
    by_degree = {}
    for order in (1, 2):
        for beta in multi_indices(order):
            dS = chart.derivative(pts, beta)
            for term in partitions(s, beta):
                deg = sum(sum(k) for k in term.ks)
                mono = term.weight() * np.prod(
                    [vals[l - 1][:, c] ** k[c] for l, k in zip(term.lengths, term.ks) for c in range(3)], axis=0
                )
                by_degree[deg] = by_degree.get(deg, 0.0) + dS * mono
    lam = 1.7
    scaled = composition_coefficient(s, [lam * v for v in vals], pts, chart)
    expected = sum(lam**d * v for d, v in by_degree.items())
    assert np.allclose(scaled, expected, rtol=1e-12)


def test_datum_needs_lower_orders():
    g = _channel()
    with pytest.raises(ValueError):
        boundary_normal_rhs(3, [VectorField(g, np.zeros((3,) + g.dims))], ChannelChart(1.0))


def test_sphere_surface_residual_order():
    """Tangential parts are arbitrary; the normal part from the datum makes
    the surface residual vanish to order S."""
    R, S = 1.0, 5
    chart = SphereChart(R)
    rng = np.random.default_rng(11)
    n = rng.normal(size=(64, 3))
    pts = R * n / np.linalg.norm(n, axis=1, keepdims=True)
    nu = -pts / R  # grad S / |grad S|
    vals = []
    for s in range(1, S + 1):
        raw = rng.normal(size=(64, 3)) * 8.0**s
        tang = raw - np.sum(raw * nu, axis=1, keepdims=True) * nu
        g = normal_datum_at_points(s, vals, pts, chart)
        vals.append(tang + g[:, None] * nu)
    ts = [0.02, 0.01, 0.005]
    r = [surface_residual(vals, pts, chart, tt) for tt in ts]
    orders = [math.log2(r[i] / r[i + 1]) for i in range(2)]
    assert r[2] > 1e-10
    assert min(orders) >= S + 0.5


def test_channel_boundary_residual_zero_at_t0_and_for_tangent_series():
    g = _channel()
    rng = np.random.default_rng(1)
    coeffs = []
    for _ in range(4):
        d = rng.normal(size=(3,) + g.dims)
        d[2][:, :, [0, -1]] = 0.0
        coeffs.append(VectorField(g, d))
    series = TaylorSeries(tuple(coeffs))
    chart = ChannelChart(1.0)
    assert boundary_residual(series, chart, 0.0) == 0.0
    assert boundary_residual(series, chart, 0.3) <= 1e-12


def test_wall_field_shape_checked():
    g = _channel()
    with pytest.raises(ValueError):
        WallField(g, np.zeros((2, 3, 3)))
