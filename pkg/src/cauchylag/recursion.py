"""Taylor-coefficient right-hand sides and Lagrangian constraint residuals.

With ``X = a + sum_s xi^(s) t^s`` the conservation of the Cauchy invariants
and of the Jacobian determinant give, order by order, the curl and the
divergence of ``xi^(s)`` as quadratic and cubic expressions of the
lower-order gradients.  Gradients are stored as ``J[i, j] = d_i xi_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .fields import AXIAL, POLAR, LabelGrid, ScalarField, VectorField, dealias, jacobian_arrays

__all__ = [
    "RecursionInput",
    "TaylorSeries",
    "RecursionWorkspace",
    "curl_rhs",
    "div_rhs",
    "cauchy_residual",
    "jacobian_residual",
    "displacement",
    "lagrangian_velocity",
]


@dataclass(frozen=True, eq=False)
class TaylorSeries:
    """Displacement coefficients ``xi^(1) .. xi^(S)`` about ``base_time``."""

    coeffs: tuple
    base_time: float = 0.0

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if not coeffs:
            raise ValueError("a Taylor series needs at least one coefficient")
        grid = coeffs[0].grid
        for c in coeffs:
            if not isinstance(c, VectorField):
                raise TypeError("coefficients must be VectorField instances")
            grid.check_same(c.grid)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def grid(self) -> LabelGrid:
        return self.coeffs[0].grid

    def __getitem__(self, s: int) -> VectorField:
        """1-based access: ``series[1]`` is the initial velocity."""
        if s < 1:
            raise IndexError("Taylor coefficients start at order 1")
        return self.coeffs[s - 1]

    def truncate(self, S: int) -> "TaylorSeries":
        return TaylorSeries(self.coeffs[:S], self.base_time)


@dataclass(frozen=True, eq=False)
class RecursionInput:
    s: int
    coeffs: tuple
    omega0: VectorField

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if self.s < 1:
            raise ValueError("order s must be >= 1")
        if len(coeffs) != self.s - 1:
            raise ValueError(f"order {self.s} needs {self.s - 1} coefficients, got {len(coeffs)}")
        for c in coeffs:
            self.omega0.grid.check_same(c.grid)
        object.__setattr__(self, "coeffs", coeffs)


def _all_polar(coeffs: Sequence[VectorField]) -> bool:
    return bool(coeffs) and all(c.parity == POLAR for c in coeffs)


def _cross_sum(pairs) -> np.ndarray:
    """``sum w * (A x B)`` over ``(w, A, B)`` with vectors on axis 0."""
    out = None
    for w, a, b in pairs:
        c = np.stack(
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        )
        out = w * c if out is None else out + w * c
    return out


def _kpair(b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``K[i, a] = eps_ijk eps_abc B[j, b] C[k, c]`` summed over ``j, k, b, c``."""
    out = np.empty_like(b)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        for a in range(3):
            p, q = (a + 1) % 3, (a + 2) % 3
            out[i, a] = b[j, p] * c[k, q] - b[j, q] * c[k, p] - b[k, p] * c[j, q] + b[k, q] * c[j, p]
    return out


class RecursionWorkspace:
    """Gradients of the coefficients computed so far, with cached pair products.

    Coefficients are appended in order; ``curl_rhs(s)`` and ``div_rhs(s)``
    need ``xi^(1) .. xi^(s-1)``.
    """

    def __init__(self, omega0: VectorField, coeffs: Sequence[VectorField] = ()):
        self.omega0 = omega0
        self.grid = omega0.grid
        self.coeffs: List[VectorField] = []
        self.jac: List[np.ndarray] = []
        self._kpair: Dict[int, np.ndarray] = {}
        for c in coeffs:
            self.append(c)

    def append(self, xi: VectorField) -> None:
        self.grid.check_same(xi.grid)
        self.coeffs.append(xi)
        self.jac.append(jacobian_arrays(self.grid, xi.data, xi.parity))

    def _J(self, m: int) -> np.ndarray:
        return self.jac[m - 1]

    def _need(self, s: int) -> None:
        if len(self.coeffs) < s - 1:
            raise ValueError(f"order {s} needs {s - 1} coefficients, have {len(self.coeffs)}")

    def _polar(self, s: int) -> bool:
        return _all_polar(self.coeffs[: s - 1])

    def curl_rhs(self, s: int) -> VectorField:
        if s < 1:
            raise ValueError("order s must be >= 1")
        if s == 1:
            return self.omega0
        self._need(s)
        terms = []
        for m in range(1, s):
            w = -0.5 * (2 * m - s) / s
            if w == 0.0:
                continue
            Jm, Jn = self._J(m), self._J(s - m)
            for k in range(3):
                terms.append((w, Jm[:, k], Jn[:, k]))
        parity = AXIAL if self._polar(s) else None
        if not terms:
            return VectorField(self.grid, np.zeros((3,) + self.grid.dims), parity)
        raw = _cross_sum(terms)
        data = np.stack([dealias(self.grid, c) for c in raw])
        return VectorField(self.grid, data, parity)

    def _pair(self, q: int) -> np.ndarray:
        """Dealiased ``sum_{m+n=q} K(J^m, J^n)`` over ordered pairs."""
        if q not in self._kpair:
            acc = np.zeros((3, 3) + self.grid.dims)
            for m in range(1, q):
                acc += _kpair(self._J(m), self._J(q - m))
            for i in range(3):
                for a in range(3):
                    acc[i, a] = dealias(self.grid, acc[i, a])
            self._kpair[q] = acc
        return self._kpair[q]

    def div_rhs(self, s: int) -> ScalarField:
        if s < 1:
            raise ValueError("order s must be >= 1")
        parity = 1 if (self.grid.is_channel and (s == 1 or self._polar(s))) else None
        out = np.zeros(self.grid.dims)
        if s == 1:
            return ScalarField(self.grid, out, parity)
        self._need(s)
        for m in range(1, s):
            Jm, Jn = self._J(m), self._J(s - m)
            for i in range(3):
                for j in range(i + 1, 3):
                    out += Jm[i, j] * Jn[j, i] - Jm[i, i] * Jn[j, j]
        for l in range(1, s - 1):
            kp = self._pair(s - l)
            out -= np.einsum("ia...,ia...->...", self._J(l), kp) / 6.0
        return ScalarField(self.grid, dealias(self.grid, out), parity)


def curl_rhs(inp: RecursionInput) -> VectorField:
    """Curl of ``xi^(s)`` implied by conservation of the Cauchy invariants."""
    return RecursionWorkspace(inp.omega0, inp.coeffs).curl_rhs(inp.s)


def div_rhs(inp: RecursionInput) -> ScalarField:
    """Divergence of ``xi^(s)`` implied by volume preservation."""
    return RecursionWorkspace(inp.omega0, inp.coeffs).div_rhs(inp.s)


# ---------------------------------------------------------------------------
# Residuals of the truncated series


def _series_jacobians(series: TaylorSeries, jac: Optional[Sequence[np.ndarray]] = None):
    if jac is None:
        jac = [jacobian_arrays(c.grid, c.data, c.parity) for c in series.coeffs]
    return jac


def _grad_maps(series: TaylorSeries, t: float, jac=None):
    jac = _series_jacobians(series, jac)
    grid = series.grid
    JX = np.zeros((3, 3) + grid.dims)
    for i in range(3):
        JX[i, i] = 1.0
    JV = np.zeros_like(JX)
    for s, J in enumerate(jac, start=1):
        JX += J * t**s
        JV += s * J * t ** (s - 1)
    return JX, JV


def cauchy_residual(series: TaylorSeries, omega0: VectorField, t: float, *, jac=None) -> float:
    """Sup over nodes of ``|sum_k grad(dX_k/dt) x grad(X_k) - omega0|``."""
    JX, JV = _grad_maps(series, t, jac)
    lhs = _cross_sum((1.0, JV[:, k], JX[:, k]) for k in range(3))
    diff = lhs - omega0.data
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=0))))


def _det3(A: np.ndarray) -> np.ndarray:
    return (
        A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
        + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])
    )


def jacobian_determinant(series: TaylorSeries, t: float, *, jac=None) -> np.ndarray:
    JX, _ = _grad_maps(series, t, jac)
    return _det3(JX)


def jacobian_residual(series: TaylorSeries, t: float, *, jac=None) -> float:
    """Sup over nodes of ``|det(grad X) - 1|``."""
    return float(np.max(np.abs(jacobian_determinant(series, t, jac=jac) - 1.0)))


def displacement(series: TaylorSeries, t: float) -> np.ndarray:
    """``xi(t, a) = sum_s xi^(s) t^s`` on the grid, Horner form."""
    out = np.zeros_like(series.coeffs[0].data)
    for c in reversed(series.coeffs):
        out = (out + c.data) * t
    return out


def lagrangian_velocity(series: TaylorSeries, t: float) -> np.ndarray:
    """``dX/dt = sum_s s xi^(s) t^(s-1)`` on the grid."""
    out = np.zeros_like(series.coeffs[0].data)
    for s in range(series.order, 0, -1):
        out = out * t + s * series.coeffs[s - 1].data
    return out
