"""Poisson solves and Helmholtz--Hodge reconstruction.

``xi = grad phi + curl Phi`` with

* ``Lap phi = div xi`` in the domain, ``d phi / d nu = xi . nu`` on the walls;
* ``Lap Phi = -curl xi`` componentwise.

The periodic box is inverted in Fourier space.  In the channel every
``(k_x, k_y)`` Fourier mode gives a two-point boundary value problem in z:

* mirror-symmetric data (known parity, homogeneous wall data) are expanded in
  cosines (even) or sines (odd) that diagonalize the centred fourth-order
  operator with reflected ghost nodes;
* other data use the composite matrix ``D @ D - kappa^2`` with one-sided
  closures, boundary rows replaced by Neumann or Dirichlet conditions, and a
  dense solve per distinct ``kappa^2``.  The singular Neumann mode
  (``kappa = 0``) is bordered with a zero-mean gauge row and a constant
  column whose multiplier is the compatibility defect.

All discrete Laplacians are compositions of the discrete first derivatives,
so ``div grad`` and ``curl curl`` are inverted exactly in the discrete sense.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.fft as sfft

from .faadibruno import WallField
from .fields import (
    AXIAL,
    POLAR,
    LabelGrid,
    ScalarField,
    VectorField,
    curl,
    fd_matrix,
    gradient,
)

__all__ = [
    "HodgeError",
    "HodgeProblem",
    "HodgeSolution",
    "solve_neumann",
    "solve_neumann_defect",
    "solve_dirichlet",
    "hodge_solve",
    "hodge_reconstruct",
    "discrete_laplacian",
]


class HodgeError(RuntimeError):
    pass


def _spectral_k2(grid: LabelGrid, axes) -> np.ndarray:
    """Composite ``-symbol`` of the second derivative over spectral axes.

    The last listed axis is the real-FFT (half-spectrum) axis.  Nyquist
    modes carry a zero first-derivative symbol, hence zero here too.
    """
    ks = []
    for pos, axis in enumerate(axes):
        n, length = grid.dims[axis], grid.lengths[axis]
        if pos == len(axes) - 1:
            k = 2 * np.pi * sfft.rfftfreq(n, d=length / n)
        else:
            k = 2 * np.pi * sfft.fftfreq(n, d=length / n)
        if n % 2 == 0:
            k[np.abs(np.abs(k) - np.pi * n / length) < 1e-9 * n / length] = 0.0
        ks.append(k)
    k2 = np.zeros(tuple(k.size for k in ks))
    for pos, k in enumerate(ks):
        shape = [1] * len(ks)
        shape[pos] = k.size
        k2 = k2 + (k**2).reshape(shape)
    return k2


# ---------------------------------------------------------------------------
# Periodic box


def _periodic_poisson(grid: LabelGrid, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
    k2 = _spectral_k2(grid, (0, 1, 2))
    coef = sfft.rfftn(rhs)
    mean = float(coef[0, 0, 0].real) / rhs.size
    zero = k2 == 0
    k2s = np.where(zero, 1.0, k2)
    coef = np.where(zero, 0.0, -coef / k2s)
    return sfft.irfftn(coef, s=grid.dims), mean


# ---------------------------------------------------------------------------
# Channel: mirror (cosine / sine) expansion


def _mirror_sigma2(n: int, h: float, parity: int) -> np.ndarray:
    p = np.arange(n) if parity > 0 else np.arange(1, n - 1)
    theta = np.pi * p / (n - 1)
    sigma = (8.0 * np.sin(theta) - np.sin(2.0 * theta)) / (6.0 * h)
    sigma[p == n - 1] = 0.0  # sawtooth: annihilated by the centred stencil
    return sigma**2


def _mirror_poisson(grid: LabelGrid, rhs: np.ndarray, parity: int) -> Tuple[np.ndarray, float]:
    nz, hz = grid.dims[2], grid.spacing[2]
    if parity > 0:
        zt = sfft.dct(rhs, type=1, axis=2)
    else:
        zt = sfft.dst(rhs[:, :, 1:-1], type=1, axis=2)
    coef = sfft.rfftn(zt, axes=(0, 1))
    sym = _spectral_k2(grid, (0, 1))[..., None] + _mirror_sigma2(nz, hz, parity)[None, None, :]
    defect = 0.0
    if parity > 0:
        # the (0, 0, 0) coefficient is proportional to the trapezoid mean
        defect = float(coef[0, 0, 0].real) / (grid.dims[0] * grid.dims[1] * 2 * (nz - 1))
    zero = sym == 0
    coef = np.where(zero, 0.0, -coef / np.where(zero, 1.0, sym))
    zt = sfft.irfftn(coef, s=grid.dims[:2], axes=(0, 1))
    if parity > 0:
        return sfft.idct(zt, type=1, axis=2), defect
    out = np.zeros(grid.dims)
    out[:, :, 1:-1] = sfft.idst(zt, type=1, axis=2)
    return out, defect


# ---------------------------------------------------------------------------
# Channel: general two-point problems


def _trapezoid(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _mode_matrix(n: int, h: float, kappa2: float, bc: str) -> np.ndarray:
    D = fd_matrix(n, h)
    A = D @ D - kappa2 * np.eye(n)
    if bc == "dirichlet":
        A[0] = 0.0
        A[-1] = 0.0
        A[0, 0] = 1.0
        A[-1, -1] = 1.0
    elif bc == "neumann":
        # inward normal: +z at the bottom wall, -z at the top wall
        A[0] = D[0]
        A[-1] = -D[-1]
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return A


@lru_cache(maxsize=32)
def _mode_inverses(n: int, h: float, kappa2: Tuple[float, ...], bc: str) -> np.ndarray:
    mats = np.stack([_mode_matrix(n, h, k2, bc) for k2 in kappa2])
    out = np.empty_like(mats)
    for i, k2 in enumerate(kappa2):
        if bc == "neumann" and k2 == 0.0:
            out[i] = 0.0  # handled by the bordered system
        else:
            out[i] = np.linalg.inv(mats[i])
    out.flags.writeable = False
    return out


@lru_cache(maxsize=8)
def _bordered_neumann(n: int, h: float) -> np.ndarray:
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = _mode_matrix(n, h, 0.0, "neumann")
    B[1 : n - 1, n] = 1.0
    B[n, :n] = _trapezoid(n, h)
    inv = np.linalg.inv(B)
    inv.flags.writeable = False
    return inv


def _general_poisson(
    grid: LabelGrid, rhs: np.ndarray, bc: str, wall: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, float]:
    nx, ny, nz = grid.dims
    hz = grid.spacing[2]
    coef = sfft.rfftn(rhs, axes=(0, 1))  # (nx, nyr, nz)
    if wall is not None:
        wspec = sfft.rfftn(wall, axes=(1, 2))  # (2, nx, nyr)
        coef[:, :, 0] = wspec[0]
        coef[:, :, -1] = wspec[1]
    else:
        coef[:, :, 0] = 0.0
        coef[:, :, -1] = 0.0
    k2 = _spectral_k2(grid, (0, 1))
    uniq, idx = np.unique(k2, return_inverse=True)
    inv = _mode_inverses(nz, hz, tuple(float(v) for v in uniq), bc)
    flat = coef.reshape(-1, nz)
    out = np.einsum("mij,mj->mi", inv[idx.ravel()], flat)
    defect = 0.0
    if bc == "neumann":
        zero_modes = np.flatnonzero(k2.ravel() == 0.0)
        binv = _bordered_neumann(nz, hz)
        for m in zero_modes:
            ext = np.concatenate([flat[m], [0.0]])
            sol = binv @ ext
            out[m] = sol[:nz]
            if m == 0:
                defect = float(sol[nz].real) / (nx * ny)
    return sfft.irfftn(out.reshape(coef.shape), s=(nx, ny), axes=(0, 1)), defect


# ---------------------------------------------------------------------------
# Public solvers


def _wall_array(grid: LabelGrid, g) -> Optional[np.ndarray]:
    if g is None:
        return None
    if isinstance(g, WallField):
        grid.check_same(g.grid)
        return np.asarray(g.data)
    arr = np.asarray(g, dtype=float)
    if arr.shape != (2,) + grid.dims[:2]:
        raise ValueError(f"wall data must have shape {(2,) + grid.dims[:2]}")
    return arr


def solve_neumann_defect(
    rhs: ScalarField, g=None, *, compat_rtol: float = 1e-3
) -> Tuple[ScalarField, float]:
    """Zero-mean ``phi`` with ``Lap phi = rhs - c`` and ``d phi/d nu = g``.

    ``c`` is the constant compatibility defect, returned alongside ``phi``.
    A defect larger than ``compat_rtol`` times the data scale means the data
    are not compatible and raises :class:`HodgeError`.
    """
    grid = rhs.grid
    wall = _wall_array(grid, g) if grid.is_channel else None
    if not grid.is_channel:
        if g is not None:
            raise ValueError("the periodic box has no walls")
        phi, defect = _periodic_poisson(grid, rhs.data)
        return ScalarField(grid, phi), defect
    homogeneous = wall is None or not np.any(wall)
    if rhs.parity == 1 and homogeneous:
        phi, defect = _mirror_poisson(grid, rhs.data, 1)
        out = ScalarField(grid, phi, 1)
    else:
        if wall is None:
            wall = np.zeros((2,) + grid.dims[:2])
        phi, defect = _general_poisson(grid, rhs.data, "neumann", wall)
        out = ScalarField(grid, phi)
    scale = float(np.max(np.abs(rhs.data)))
    if wall is not None:
        scale += float(np.max(np.abs(wall))) / grid.lengths[2]
    if abs(defect) > compat_rtol * scale + 1e-300 and abs(defect) > 1e-13:
        raise HodgeError(
            f"incompatible Neumann data: mean defect {defect:.3e} vs data scale {scale:.3e}"
        )
    return out, defect


def solve_neumann(rhs: ScalarField, g=None) -> ScalarField:
    """Solve ``Lap phi = rhs`` with ``d phi / d nu = g`` on the walls (zero-mean gauge)."""
    return solve_neumann_defect(rhs, g)[0]


def _component_parity(f: VectorField, i: int) -> Optional[int]:
    return None if f.parity is None else f.parity[i]


def _solve_component(grid: LabelGrid, data: np.ndarray, parity: Optional[int], bc: str) -> np.ndarray:
    if not grid.is_channel:
        return _periodic_poisson(grid, data)[0]
    if bc == "dirichlet" and parity == -1:
        return _mirror_poisson(grid, data, -1)[0]
    if bc == "neumann" and parity == 1:
        return _mirror_poisson(grid, data, 1)[0]
    return _general_poisson(grid, data, bc)[0]


def solve_dirichlet(rhs: VectorField) -> VectorField:
    """Componentwise ``Lap Phi = rhs`` with ``Phi = 0`` on the walls."""
    grid = rhs.grid
    out = np.stack([_solve_component(grid, rhs.data[i], _component_parity(rhs, i), "dirichlet") for i in range(3)])
    parity = rhs.parity if rhs.parity is not None and all(p == -1 for p in rhs.parity) else None
    return VectorField(grid, out, parity)


def _vector_potential(rhs: VectorField) -> VectorField:
    """``Lap Phi = rhs`` with tangential components zero on the walls and
    ``d Phi_z / dz = 0``, which keeps ``div Phi`` harmonic-free on flat walls."""
    grid = rhs.grid
    bcs = ("dirichlet", "dirichlet", "neumann")
    out = np.stack([_solve_component(grid, rhs.data[i], _component_parity(rhs, i), bcs[i]) for i in range(3)])
    parity = rhs.parity if rhs.parity == AXIAL else None
    return VectorField(grid, out, parity)


def discrete_laplacian(f: ScalarField) -> ScalarField:
    """``div grad f`` with the field-core operators (no boundary rows)."""
    from .fields import divergence

    return divergence(gradient(f))


@dataclass(frozen=True, eq=False)
class HodgeProblem:
    div_data: ScalarField
    curl_data: VectorField
    neumann_data: Optional[WallField] = None
    mean: Optional[np.ndarray] = None

    def __post_init__(self):
        self.div_data.grid.check_same(self.curl_data.grid)
        if self.neumann_data is not None:
            if not self.div_data.grid.is_channel:
                raise ValueError("Neumann data given on a periodic grid")
            self.div_data.grid.check_same(self.neumann_data.grid)

    @property
    def grid(self) -> LabelGrid:
        return self.div_data.grid

    @property
    def geometry(self):
        return self.grid.geometry


@dataclass(frozen=True, eq=False)
class HodgeSolution:
    xi: VectorField
    phi: ScalarField
    Phi: VectorField
    compat_defect: float


def _impose_mean(xi: np.ndarray, grid: LabelGrid, mean) -> np.ndarray:
    target = np.zeros(3) if mean is None else np.asarray(mean, dtype=float)
    comps = (0, 1) if grid.is_channel else (0, 1, 2)
    w = grid.volume_weights / grid.volume
    xi = xi.copy()
    for c in comps:
        xi[c] += target[c] - float(np.sum(w * xi[c]))
    return xi


def hodge_solve(p: HodgeProblem) -> HodgeSolution:
    grid = p.grid
    phi, defect = solve_neumann_defect(p.div_data, p.neumann_data)
    Phi = _vector_potential(VectorField(grid, -p.curl_data.data, p.curl_data.parity))
    xi = gradient(phi).data + curl(Phi).data
    xi = _impose_mean(xi, grid, p.mean)
    mirror = grid.is_channel and phi.parity == 1 and Phi.parity == AXIAL
    if mirror:
        xi[2][:, :, [0, -1]] = 0.0
    return HodgeSolution(VectorField(grid, xi, POLAR if mirror else None), phi, Phi, defect)


def hodge_reconstruct(p: HodgeProblem) -> VectorField:
    """``xi = grad phi + curl Phi`` from divergence, curl and wall-normal data.

    The free constant vector (the harmonic part) is set from ``p.mean``
    (zero when omitted): all three components on the periodic box, the
    wall-parallel components in the channel.
    """
    return hodge_solve(p).xi
