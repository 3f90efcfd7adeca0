"""Weight sequences of ultradifferentiable classes and the cubic radius bound.

A class is described by the normalized weights ``M_k`` (the full weights are
``k! * M_k`` and are never stored).  This module checks the structural
properties that make a class closed under products, composition and
differentiation, applies the Denjoy--Carleman test, evaluates the generating
function of a sequence of coefficient norms, and turns a set of a-priori
constants into an upper bound on the time-analyticity radius.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

__all__ = [
    "WeightKind",
    "WeightSequence",
    "ClassReport",
    "DCResult",
    "Verdict",
    "EstimateConstants",
    "RadiusReport",
    "RadiusError",
    "make_weights",
    "check_class_properties",
    "denjoy_carleman",
    "radius_from_cubic",
    "cubic_coefficients",
    "cubic_discriminant",
    "zeta2",
    "generating_function",
]


class WeightKind(enum.Enum):
    ANALYTIC = "analytic"
    GEVREY = "gevrey"
    CUSTOM = "custom"


@dataclass(frozen=True)
class WeightSequence:
    kind: WeightKind
    values: tuple
    r: Optional[float] = None

    def __post_init__(self):
        kind = WeightKind(self.kind)
        object.__setattr__(self, "kind", kind)
        values = tuple(float(v) for v in self.values)
        if len(values) < 3:
            raise ValueError("a weight sequence needs kmax >= 2")
        if not all(v > 0 and math.isfinite(v) for v in values):
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "values", values)
        if kind is WeightKind.GEVREY:
            if self.r is None or not self.r > 0:
                raise ValueError("Gevrey weights need r > 0")
            expected = _gevrey_values(float(self.r), len(values) - 1)
            if not np.allclose(values, expected, rtol=1e-12, atol=0.0):
                raise ValueError("values do not follow (k!)^r")
        elif kind is WeightKind.ANALYTIC:
            if any(v != 1.0 for v in values):
                raise ValueError("analytic weights are identically 1")

    @property
    def kmax(self) -> int:
        return len(self.values) - 1

    @classmethod
    def custom(cls, values: Iterable[float]) -> "WeightSequence":
        return cls(WeightKind.CUSTOM, tuple(values))

    def __getitem__(self, k: int) -> float:
        return self.values[k]

    def full(self, k: int) -> float:
        """Unnormalized weight ``k! * M_k``."""
        return math.factorial(k) * self.values[k]

    def array(self) -> np.ndarray:
        return np.asarray(self.values)


def _gevrey_values(r: float, kmax: int) -> np.ndarray:
    k = np.arange(kmax + 1)
    return np.exp(r * gammaln(k + 1.0))


def make_weights(kind, kmax: int, r: Optional[float] = None) -> WeightSequence:
    """Build analytic (``M_k = 1``) or Gevrey (``M_k = (k!)^r``) weights."""
    kind = WeightKind(kind)
    if int(kmax) != kmax or kmax < 2:
        raise ValueError(f"kmax must be an integer >= 2, got {kmax}")
    kmax = int(kmax)
    if kind is WeightKind.ANALYTIC:
        return WeightSequence(kind, (1.0,) * (kmax + 1))
    if kind is WeightKind.GEVREY:
        if r is None or not float(r) > 0:
            raise ValueError(f"Gevrey order r must be positive, got {r}")
        return WeightSequence(kind, tuple(_gevrey_values(float(r), kmax)), float(r))
    raise ValueError("custom weights are built with WeightSequence.custom(values)")


# ---------------------------------------------------------------------------
# Class properties


@dataclass(frozen=True)
class ClassReport:
    diff_stable: bool
    C_d: float
    log_superlinear: bool
    fdb_stable: bool
    C_FdB: float
    tested_up_to: int


@lru_cache(maxsize=None)
def _partitions_of(k: int, largest: Optional[int] = None) -> tuple:
    """Integer partitions of ``k`` as non-increasing tuples."""
    if largest is None:
        largest = k
    if k == 0:
        return ((),)
    out = []
    for first in range(min(k, largest), 0, -1):
        for rest in _partitions_of(k - first, first):
            out.append((first,) + rest)
    return tuple(out)


def check_class_properties(W: WeightSequence, *, rtol: float = 1e-12) -> ClassReport:
    """Exhaustively test differentiation stability, log-superlinearity and
    Faa di Bruno stability on the available prefix of ``W``.

    ``C_d`` is the largest ``(M_{k+1}/M_k)^{1/k}`` (the ``k = 0`` ratio is
    taken with exponent 1).  Since a finite prefix always admits some
    constant, the sequence is flagged unstable only when the ratios for
    ``k >= 1`` are still strictly increasing over the last three entries and
    the largest one sits at the end of the prefix.

    ``C_FdB`` is the largest ``(M_l * prod M_{alpha_i} / M_k)^{1/k}`` over all
    compositions ``alpha_1 + ... + alpha_l = k`` with positive parts; the
    product only depends on the multiset of parts, so integer partitions are
    enumerated.  Stability requires ``C_FdB <= 1``.
    """
    M = W.array()
    kmax = W.kmax
    logM = np.log(M)

    ratios = np.empty(kmax)
    for k in range(kmax):
        ratios[k] = (logM[k + 1] - logM[k]) / max(k, 1)
    log_cd = float(np.max(ratios))
    C_d = math.exp(log_cd)
    # growth is only visible from three or more k >= 1 ratios
    tail = ratios[1:]
    growing = tail.size >= 3 and bool(np.all(np.diff(tail[-3:]) > 0)) and tail[-1] >= log_cd
    diff_stable = not growing

    log_sl = True
    for k in range(kmax + 1):
        for l in range(kmax + 1 - k):
            lhs = M[k] * M[l]
            rhs = M[0] * M[k + l]
            if lhs > rhs * (1.0 + rtol):
                log_sl = False
                break
        if not log_sl:
            break

    log_cfdb = -math.inf
    for k in range(1, kmax + 1):
        for parts in _partitions_of(k):
            val = logM[len(parts)] + sum(logM[a] for a in parts) - logM[k]
            log_cfdb = max(log_cfdb, val / k)
    C_FdB = math.exp(log_cfdb)
    fdb_stable = C_FdB <= 1.0 + rtol

    return ClassReport(
        diff_stable=bool(diff_stable),
        C_d=C_d,
        log_superlinear=bool(log_sl),
        fdb_stable=bool(fdb_stable),
        C_FdB=C_FdB,
        tested_up_to=kmax,
    )


class Verdict(enum.Enum):
    QUASI_ANALYTIC = "QuasiAnalytic"
    NON_QUASI_ANALYTIC = "NonQuasiAnalytic"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class DCResult:
    partial_sum: float
    verdict: Verdict
    full_partial_sum: float


def denjoy_carleman(W: WeightSequence) -> DCResult:
    """Denjoy--Carleman quasi-analyticity test.

    ``partial_sum`` is ``sum_{k<kmax} M_k/M_{k+1}`` over the stored prefix.
    The verdict is decided in closed form from the unnormalized weights
    ``k! M_k``: their ratio is ``1/(k+1)`` for analytic weights (harmonic
    series, divergent) and ``(k+1)^{-(1+r)}`` for Gevrey weights (convergent
    for every ``r > 0``).  ``full_partial_sum`` reports the same prefix sum for
    the unnormalized weights.  A finite custom prefix cannot decide
    convergence.
    """
    M = W.array()
    if W.kmax < 8:
        raise ValueError("Denjoy-Carleman test needs kmax >= 8")
    k = np.arange(W.kmax)
    partial = float(np.sum(M[:-1] / M[1:]))
    full = float(np.sum(M[:-1] / (M[1:] * (k + 1))))
    if W.kind is WeightKind.ANALYTIC:
        verdict = Verdict.QUASI_ANALYTIC
    elif W.kind is WeightKind.GEVREY:
        verdict = Verdict.NON_QUASI_ANALYTIC
    else:
        verdict = Verdict.INCONCLUSIVE
    return DCResult(partial, verdict, full)


def generating_function(norms: Sequence[float], W: WeightSequence, t: float) -> float:
    """``sum_{s=1..S} norms[s-1] * t^s / M_s``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    norms = np.asarray(norms, dtype=float)
    S = norms.size
    if S > W.kmax:
        raise ValueError(f"need weights up to order {S}, have {W.kmax}")
    s = np.arange(1, S + 1)
    M = W.array()[1 : S + 1]
    return float(np.sum(norms / M * float(t) ** s))


# ---------------------------------------------------------------------------
# Cubic radius estimator


class RadiusError(RuntimeError):
    pass


@dataclass(frozen=True)
class EstimateConstants:
    C_a: float
    M_0: float
    M_1: float
    C_DN: float
    C_daS: float
    C_Sad: float
    omega0_norm: float

    def __post_init__(self):
        for name in ("C_a", "M_0", "M_1", "C_DN", "C_daS", "C_Sad", "omega0_norm"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"estimator constant {name} must be a positive real, got {v!r}")
            object.__setattr__(self, name, float(v))


@dataclass(frozen=True)
class RadiusReport:
    gamma_c: float
    zeta2_at_gamma_c: float
    t_c: float
    t_Sad: float
    T: float


def cubic_coefficients(c: EstimateConstants) -> tuple:
    """``(a, b, c1)`` of ``Q(zeta) = a zeta^3 + b zeta^2 + c1 zeta + Gamma``."""
    a = 6.0 * c.C_a**2 * c.M_0**2
    b = 7.5 * c.C_a * c.M_0
    return a, b, -1.0 / c.C_DN


def cubic_discriminant(c: EstimateConstants, gamma: float) -> float:
    a, b, c1 = cubic_coefficients(c)
    d = gamma
    return 18 * a * b * c1 * d - 4 * b**3 * d + b**2 * c1**2 - 4 * a * c1**3 - 27 * a**2 * d**2


def _q(c: EstimateConstants, zeta, gamma: float):
    a, b, c1 = cubic_coefficients(c)
    return ((a * zeta + b) * zeta + c1) * zeta + gamma


def _local_min(c: EstimateConstants) -> float:
    a, b, c1 = cubic_coefficients(c)
    return (-2.0 * b + math.sqrt(4.0 * b * b - 12.0 * a * c1)) / (6.0 * a)


def zeta2(c: EstimateConstants, gamma: float) -> float:
    """Smaller positive root of ``Q`` for ``0 <= gamma <= Gamma_c``."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma == 0.0:
        return 0.0
    zs = _local_min(c)
    qmin = _q(c, zs, gamma)
    if qmin > 0:
        if qmin <= 1e-12 * max(1.0, gamma):
            return zs
        raise RadiusError("Q has no positive root beyond the critical value")
    return brentq(lambda z: _q(c, z, gamma), 0.0, zs, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _critical_gamma(c: EstimateConstants) -> float:
    lo, hi = 0.0, 1e-6
    if cubic_discriminant(c, 0.0) <= 0:
        raise RadiusError("degenerate constants: discriminant is not positive at Gamma = 0")
    for _ in range(400):
        if cubic_discriminant(c, hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RadiusError("no sign change of the discriminant found")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-12 * max(1.0, hi) or mid in (lo, hi):
            break
        if cubic_discriminant(c, mid) > 0:
            lo = mid
        else:
            hi = mid
    gamma_c = lo
    if not gamma_c > 0:
        raise RadiusError("no positive critical Gamma")
    return gamma_c


def radius_from_cubic(c: EstimateConstants) -> RadiusReport:
    gamma_c = _critical_gamma(c)
    z2 = zeta2(c, gamma_c)
    t_c = gamma_c * c.M_1 / c.omega0_norm
    q_sad = float(_q(c, c.C_Sad, 0.0))
    if not q_sad > 0:
        raise RadiusError(f"Q(C_Sad) = {q_sad:.6g} is not positive; no admissible t_Sad")
    t_sad = q_sad * c.M_1 / c.omega0_norm
    return RadiusReport(gamma_c=gamma_c, zeta2_at_gamma_c=z2, t_c=t_c, t_Sad=t_sad, T=min(t_c, t_sad))
