"""Closed-form attractor dimension bounds and their lower-bound counterparts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import linregress

from .spectral import Domain, Spectrum, spectrum_below, unit_ball_volume


@dataclass(frozen=True)
class CLRConstants:
    """Constant in the bound on the number of negative Schrodinger eigenvalues."""

    d: int
    L0d: float | None = None

    def __post_init__(self):
        if self.d < 3:
            raise ValueError(f"the CLR constant is defined for d >= 3, got {self.d}")
        if self.L0d is None:
            if self.d != 3:
                raise ValueError(f"no default CLR constant for d={self.d}; supply L0d")
            object.__setattr__(self, "L0d", 0.116)
        if self.L0d < self.L0d_classical:
            raise ValueError(f"L0d={self.L0d} is below the classical value {self.L0d_classical:.4g}")

    @property
    def L0d_classical(self) -> float:
        return unit_ball_volume(self.d) / (2 * math.pi) ** self.d

    @property
    def c_d(self) -> float:
        d = self.d
        return 8.0**d * (d / (d - 2)) ** (d / 2) * self.L0d


@dataclass(frozen=True)
class BoundReport:
    upper_bound: float
    formula: str
    inputs: dict = field(default_factory=dict)
    root: float | None = None

    def to_dict(self) -> dict:
        out = {"upper_bound": self.upper_bound, "formula": self.formula, "inputs": dict(self.inputs)}
        if self.root is not None:
            out["root"] = self.root
        return out


def _check_positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def upper_bound_d3plus(gamma: float, N: int, d: int, Bd: float, clr: CLRConstants | None = None) -> BoundReport:
    """``N c_d gamma^-d B_d^d``."""
    if d < 3:
        raise ValueError(f"this bound needs d >= 3, got {d}")
    _check_positive(gamma=gamma)
    if Bd < 0:
        raise ValueError("B_d must be non-negative")
    clr = clr or CLRConstants(d)
    if clr.d != d:
        raise ValueError("CLR constants are for a different dimension")
    val = N * clr.c_d * gamma ** (-d) * Bd**d
    return BoundReport(val, "d3plus", {"gamma": gamma, "N": N, "d": d, "B_d": Bd, "L0d": clr.L0d})


def d1_root(A: float, rtol: float = 1e-10) -> float:
    """Largest root of ``n = A ln(e n)`` (``1`` when ``A <= 1``)."""
    _check_positive(A=A)
    if A <= 1:
        return 1.0
    phi = lambda n: n - A * (1 + math.log(n))
    lo = max(1.0, A)
    hi = max(math.e, 4 * A * math.log(A + math.e))
    if phi(lo) > 0 or phi(hi) < 0:
        raise ArithmeticError(f"root of n = A ln(en) not bracketed for A={A}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def d1_coefficient(gamma: float, N: int, length: float, B1: float) -> float:
    return N * (8 / math.pi) / gamma * length * B1


def upper_bound_d1(gamma: float, N: int, length: float, B1: float) -> tuple[float, float]:
    """Root ``n*`` of ``n = A ln(e n)`` with ``A = N (8/pi) gamma^-1 l B1``, and ``2 A ln A``.

    For ``A < e`` the majorant is reported as the root itself.
    """
    _check_positive(gamma=gamma, length=length)
    A = d1_coefficient(gamma, N, length, B1)
    if A <= 0:
        return 0.0, 0.0
    root = d1_root(A)
    return root, (2 * A * math.log(A) if A >= math.e else root)


def upper_bound_d2(gamma: float, N: int, measure: float, B2: float) -> float:
    """``N (128/pi) gamma^-2 |Omega| B2^2``."""
    _check_positive(gamma=gamma, measure=measure)
    return N * 128 / math.pi / gamma**2 * measure * B2**2


def upper_bound_d1_simple(gamma: float, N: int, length: float, B1: float) -> float:
    """``N 16 gamma^-2 l B1^2``."""
    _check_positive(gamma=gamma, length=length)
    return N * 16 / gamma**2 * length * B1**2


def d1_crossover(N: int, length: float, B1: float, gammas: Sequence[float]) -> float | None:
    """Largest ``gamma`` in the grid below which the log-corrected bound beats the simple one."""
    best = None
    for g in sorted(gammas):
        if upper_bound_d1(g, N, length, B1)[0] < upper_bound_d1_simple(g, N, length, B1):
            best = g
        else:
            break
    return best


class ModeCount(NamedTuple):
    count: int
    indices: np.ndarray
    re_mu: np.ndarray

    @property
    def index(self) -> int:
        return 2 * self.count


def growing_root(gamma: float, lam, a: float, b: float) -> np.ndarray:
    """``mu_+ = -gamma/2 + sqrt(gamma^2/4 - lam - a - i b)`` (principal branch)."""
    lam = np.asarray(lam, dtype=float)
    return -gamma / 2 + np.sqrt(gamma * gamma / 4 - (lam + a + 1j * b))


def unstable_mode_count(gamma: float, a: float, b: float, spectrum: Spectrum) -> ModeCount:
    """Scalar modes for which ``mu^2 + gamma mu + lambda + a + i b = 0`` has a root with ``Re > 0``."""
    if b == 0:
        raise ValueError("b must be non-zero")
    re = growing_root(gamma, spectrum.lambdas, a, abs(b)).real
    idx = np.nonzero(re > 0)[0]
    return ModeCount(int(idx.size), idx, re[idx])


def unstable_count_on(domain: Domain, gamma: float, a: float, b: float) -> ModeCount:
    """Count over every Dirichlet mode that could be unstable (``lambda < b/gamma`` squared, plus margin)."""
    cutoff = (abs(b) / gamma) ** 2 + abs(a) + 1.0
    return unstable_mode_count(gamma, a, b, spectrum_below(domain, cutoff))


class Fit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def loglog_fit(gammas: Sequence[float], values: Sequence[float]) -> Fit:
    """Least squares of ``log(value)`` against ``log(1/gamma)``."""
    g = np.asarray(gammas, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(g) != len(v) or len(g) < 2:
        raise ValueError("need at least two points for a scaling fit")
    if np.any(v <= 0) or np.any(g <= 0):
        raise ValueError("degenerate fit: non-positive quantity")
    if np.ptp(g) == 0:
        raise ValueError("degenerate fit: all gamma values equal")
    r = linregress(np.log(1 / g), np.log(v))
    return Fit(float(r.slope), float(r.intercept), float(r.rvalue**2))


def lower_bound_scaling(gammas: Sequence[float], a: float, b: float, domain: Domain):
    """Unstable counts over a gamma grid and the fitted exponent of count vs ``1/gamma``."""
    g = np.asarray(gammas, dtype=float)
    if len(g) < 4 or g.max() / g.min() < 8 * (1 - 1e-12):
        raise ValueError("need at least 4 gamma values spanning a factor of 8")
    counts = [unstable_count_on(domain, float(x), a, b).count for x in g]
    if min(counts) == 0:
        raise ValueError("degenerate fit: a gamma value has no unstable modes")
    return counts, loglog_fit(g, counts)


def equilibrium_spectrum(gamma: float, nus) -> tuple[np.ndarray, np.ndarray]:
    """Roots ``(-gamma -+ sqrt(gamma^2 - 4 nu)) / 2`` for each eigenvalue ``nu``.

    Returns the two complex sequences; take ``.real`` for growth rates.
    """
    nu = np.asarray(nus, dtype=float)
    disc = np.sqrt((gamma * gamma - 4 * nu).astype(complex))
    return (-gamma - disc) / 2, (-gamma + disc) / 2


def morse_index(nus) -> int:
    return int(np.sum(np.asarray(nus) < 0))


def harmonic(n: float) -> float:
    """Harmonic numbers linearly interpolated between integers (``H_0 = 0``)."""
    if n <= 0:
        return 0.0
    k = int(math.floor(n))
    Hk = math.fsum(1.0 / j for j in range(1, k + 1))
    return Hk + (n - k) / (k + 1)


def equilibrium_lyapunov_dim(gamma: float, b: float, length: float) -> float:
    """Largest ``n`` with ``(b l/pi) H(n) - gamma n >= 0``.

    ``H`` is concave, so the set where the expression is non-negative is an
    interval ``[0, n*]``.
    """
    _check_positive(gamma=gamma, b=b, length=length)
    c = b * length / math.pi
    phi = lambda n: c * harmonic(n) - gamma * n
    if phi(1.0) < 0:
        # H(n) = n on [0, 1]
        return 0.0
    lo, hi = 1.0, 2.0
    while phi(hi) >= 0:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return lo
