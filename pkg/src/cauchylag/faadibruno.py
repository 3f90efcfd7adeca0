"""Boundary invariance by Faa di Bruno expansion.

A particle starting on the wall ``{S = 0}`` stays there, so every Taylor
coefficient of ``t -> S(a + xi(t, a))`` vanishes.  Expanding the composition
with the multivariate Faa di Bruno formula isolates the top-order term
``xi^(s) . grad S`` and gives the wall-normal component of ``xi^(s)`` in terms
of lower-order coefficients.

A term of the expansion is indexed by distinct orders ``l_1 < ... < l_i`` and
non-zero multi-indices ``k_1, ..., k_i`` with ``sum k_j = beta`` and
``sum |k_j| l_j = s``; it contributes
``prod_j prod_c (xi_c^(l_j))^(k_jc) / k_jc!``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence, Tuple

import numpy as np

from .fields import LabelGrid, ScalarField, VectorField

__all__ = [
    "MAX_ORDER",
    "PartitionTerm",
    "partitions",
    "multi_indices",
    "BoundaryChart",
    "ChannelChart",
    "WallField",
    "composition_coefficient",
    "normal_datum_at_points",
    "boundary_normal_rhs",
    "surface_residual",
    "boundary_residual",
]

MAX_ORDER = 16

MultiIndex = Tuple[int, int, int]


@dataclass(frozen=True)
class PartitionTerm:
    lengths: Tuple[int, ...]
    ks: Tuple[MultiIndex, ...]

    @property
    def i(self) -> int:
        return len(self.lengths)

    def weight(self) -> float:
        """``1 / prod_j prod_c k_jc!``."""
        d = 1
        for k in self.ks:
            for kc in k:
                d *= math.factorial(kc)
        return 1.0 / d


@lru_cache(maxsize=None)
def _split(beta: MultiIndex) -> Tuple[MultiIndex, ...]:
    """All non-zero multi-indices ``k <= beta`` componentwise, lexicographic."""
    out = []
    for k in itertools.product(*(range(b + 1) for b in beta)):
        if any(k):
            out.append(tuple(k))
    return tuple(out)


@lru_cache(maxsize=None)
def _terms(s: int, beta: MultiIndex, min_len: int) -> Tuple[Tuple[Tuple[int, ...], Tuple[MultiIndex, ...]], ...]:
    """Terms with every order ``>= min_len`` (returned in increasing order)."""
    if not any(beta):
        return (((), ()),) if s == 0 else ()
    if s <= 0:
        return ()
    out = []
    for k in _split(beta):
        size = sum(k)
        rest_beta = tuple(b - kc for b, kc in zip(beta, k))
        for l in range(min_len, s // size + 1):
            rem = s - size * l
            for ls, ks in _terms(rem, rest_beta, l + 1):
                out.append(((l,) + ls, (k,) + ks))
    return tuple(out)


def _check_multi_index(beta) -> MultiIndex:
    beta = tuple(int(b) for b in beta)
    if len(beta) != 3 or any(b < 0 for b in beta):
        raise ValueError(f"beta must be a non-negative 3-index, got {beta}")
    return beta


@lru_cache(maxsize=None)
def partitions(s: int, beta) -> Tuple[PartitionTerm, ...]:
    """Enumerate the partition set for order ``s`` and multi-index ``beta``.

    Sorted by ``(i, lengths, ks)``.  Returns an empty tuple when ``|beta| > s``.
    """
    beta = _check_multi_index(beta)
    if s < 1:
        raise ValueError("s must be >= 1")
    if s > MAX_ORDER:
        raise ValueError(f"order {s} exceeds the supported maximum {MAX_ORDER}")
    if sum(beta) < 1:
        raise ValueError("|beta| must be >= 1")
    if sum(beta) > s:
        return ()
    raw = sorted(_terms(s, beta, 1), key=lambda t: (len(t[0]), t[0], t[1]))
    return tuple(PartitionTerm(ls, ks) for ls, ks in raw)


@lru_cache(maxsize=None)
def multi_indices(order: int) -> Tuple[MultiIndex, ...]:
    """All 3-indices with ``|beta| == order``."""
    return tuple(
        (a, b, order - a - b) for a in range(order, -1, -1) for b in range(order - a, -1, -1)
    )


class BoundaryChart(Protocol):
    """A boundary-defining function ``S`` (zero on the wall) and its derivatives."""

    max_deriv_order: int  # derivatives beyond this order vanish identically

    def value(self, x: np.ndarray) -> np.ndarray: ...

    def derivative(self, x: np.ndarray, beta: MultiIndex) -> np.ndarray: ...


@dataclass(frozen=True)
class ChannelChart:
    """``S(x, y, z) = scale * z (L_z - z)``, positive inside the channel."""

    length: float
    scale: float = 1.0
    max_deriv_order: int = 2

    def value(self, x: np.ndarray) -> np.ndarray:
        z = np.asarray(x)[..., 2]
        return self.scale * z * (self.length - z)

    def derivative(self, x: np.ndarray, beta) -> np.ndarray:
        x = np.asarray(x)
        z = x[..., 2]
        bx, by, bz = beta
        if bx or by or bz > 2:
            return np.zeros(z.shape)
        if bz == 0:
            return self.value(x)
        if bz == 1:
            return self.scale * (self.length - 2.0 * z)
        return np.full(z.shape, -2.0 * self.scale)

    def normal(self, x: np.ndarray) -> np.ndarray:
        grad = np.stack([self.derivative(x, e) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))], axis=-1)
        return grad / np.linalg.norm(grad, axis=-1, keepdims=True)

    @classmethod
    def for_grid(cls, grid: LabelGrid) -> "ChannelChart":
        if not grid.is_channel:
            raise ValueError("channel chart needs a channel grid")
        return cls(grid.lengths[2])


@dataclass(frozen=True, eq=False)
class WallField:
    """Values on both walls; ``data[0]`` at ``z = 0``, ``data[1]`` at ``z = L_z``."""

    grid: LabelGrid
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        nx, ny, _ = self.grid.dims
        if data.shape != (2, nx, ny):
            raise ValueError(f"wall data shape {data.shape} != {(2, nx, ny)}")
        if not np.all(np.isfinite(data)):
            raise ValueError("wall data contains non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: LabelGrid) -> "WallField":
        return cls(grid, np.zeros((2,) + grid.dims[:2]))

    def sup(self) -> float:
        return float(np.max(np.abs(self.data)))


def _monomial(term: PartitionTerm, values: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate one partition term; ``values[l-1]`` has shape ``(P, 3)``."""
    out = term.weight()
    for l, k in zip(term.lengths, term.ks):
        xi = values[l - 1]
        for c in range(3):
            if k[c]:
                out = out * xi[:, c] ** k[c]
    return out


def composition_coefficient(
    s: int,
    values: Sequence[np.ndarray],
    points: np.ndarray,
    chart: BoundaryChart,
    *,
    min_order: int = 1,
) -> np.ndarray:
    """Order-``s`` time-Taylor coefficient of ``S(a + sum_l xi^(l) t^l)``.

    ``values[l-1]`` holds ``xi^(l)`` at ``points`` (shape ``(P, 3)``); only
    orders up to ``s`` are read.  Terms with ``|beta| < min_order`` are skipped.
    """
    points = np.asarray(points, dtype=float)
    total = np.zeros(points.shape[0])
    top = min(s, getattr(chart, "max_deriv_order", s))
    for order in range(max(min_order, 1), top + 1):
        for beta in multi_indices(order):
            dS = chart.derivative(points, beta)
            if not np.any(dS):
                continue
            acc = np.zeros(points.shape[0])
            for term in partitions(s, beta):
                acc = acc + _monomial(term, values)
            total = total + dS * acc
    return total


def normal_datum_at_points(
    s: int, values: Sequence[np.ndarray], points: np.ndarray, chart: BoundaryChart
) -> np.ndarray:
    """``xi^(s) . nu`` implied by boundary invariance, with ``nu = grad S / |grad S|``."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if len(values) < s - 1:
        raise ValueError(f"order {s} needs {s - 1} lower coefficients")
    points = np.asarray(points, dtype=float)
    grad = np.stack([chart.derivative(points, e) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))], axis=-1)
    gnorm = np.linalg.norm(grad, axis=-1)
    if np.any(gnorm <= 0):
        raise ValueError("chart gradient vanishes on the wall")
    if s == 1:
        return np.zeros(points.shape[0])
    rhs = -composition_coefficient(s, list(values[: s - 1]) + [np.zeros((points.shape[0], 3))], points, chart, min_order=2)
    return rhs / gnorm


def _wall_points(grid: LabelGrid) -> np.ndarray:
    X, Y, Z = grid.mesh()
    sl = (slice(None), slice(None), [0, -1])
    pts = np.stack([X[sl], Y[sl], Z[sl]], axis=-1)  # (nx, ny, 2, 3)
    return np.moveaxis(pts, 2, 0).reshape(-1, 3)


def _wall_values(u: VectorField) -> np.ndarray:
    w = u.data[:, :, :, [0, -1]]  # (3, nx, ny, 2)
    return np.moveaxis(w, 3, 1).reshape(3, -1).T


def boundary_normal_rhs(s: int, coeffs: Sequence[VectorField], chart: BoundaryChart) -> WallField:
    """Wall datum ``xi^(s) . nu`` from the lower-order coefficients."""
    if not coeffs and s > 1:
        raise ValueError("no coefficients supplied")
    if len(coeffs) < s - 1:
        raise ValueError(f"order {s} needs {s - 1} lower coefficients, got {len(coeffs)}")
    if s > MAX_ORDER:
        raise ValueError(f"order {s} exceeds the supported maximum {MAX_ORDER}")
    grid = coeffs[0].grid if coeffs else None
    if grid is None:
        raise ValueError("cannot infer the grid without coefficients")
    for c in coeffs:
        grid.check_same(c.grid)
    if not grid.is_channel:
        raise ValueError("boundary data exist only for the channel geometry")
    nx, ny, _ = grid.dims
    pts = _wall_points(grid)
    vals = [_wall_values(c) for c in coeffs[: s - 1]]
    g = normal_datum_at_points(s, vals, pts, chart)
    return WallField(grid, g.reshape(2, nx, ny))


def surface_residual(
    values: Sequence[np.ndarray], points: np.ndarray, chart: BoundaryChart, t: float
) -> float:
    """``max |S(a + sum_s xi^(s) t^s)|`` over surface points."""
    points = np.asarray(points, dtype=float)
    x = points.copy()
    tp = 1.0
    for v in values:
        tp *= t
        x = x + tp * np.asarray(v)
    return float(np.max(np.abs(chart.value(x))))


def boundary_residual(series, chart: BoundaryChart, t: float) -> float:
    """Impermeability residual of a truncated series on the channel walls."""
    coeffs = list(series.coeffs)
    grid = coeffs[0].grid
    if not grid.is_channel:
        return 0.0
    pts = _wall_points(grid)
    return surface_residual([_wall_values(c) for c in coeffs], pts, chart, t)
