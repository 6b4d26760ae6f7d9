"""Dirichlet Laplacian spectra on axis-aligned boxes.

Eigenfunctions are products of sine modes, normalized per axis as
``sqrt(2/l) * sin(k*pi*x/l)``, so every eigenpair is available in closed
form.  ``N``-vector spectra repeat each scalar eigenvalue ``N`` times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Box ``(0, l_1) x ... x (0, l_d)``."""

    sides: tuple[float, ...]

    def __post_init__(self):
        sides = tuple(float(s) for s in self.sides)
        if not 1 <= len(sides) <= 3:
            raise ValueError(f"box dimension must be 1, 2 or 3, got {len(sides)}")
        if any(not math.isfinite(s) or s <= 0 for s in sides):
            raise ValueError(f"side lengths must be positive, got {sides}")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def interval(cls, length: float) -> "Domain":
        return cls((length,))

    @classmethod
    def rectangle(cls, lx: float, ly: float) -> "Domain":
        return cls((lx, ly))

    @classmethod
    def box(cls, *sides: float) -> "Domain":
        return cls(tuple(sides))

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def kind(self) -> str:
        return {1: "interval", 2: "rectangle", 3: "box"}[self.d]

    @property
    def measure(self) -> float:
        return float(np.prod(self.sides))

    @property
    def length(self) -> float:
        if self.d != 1:
            raise ValueError("length is only defined for an interval")
        return self.sides[0]


@dataclass(frozen=True)
class Spectrum:
    """First ``M`` Dirichlet eigenvalues with their sine index tuples.

    ``modes[j]`` holds the (1-based) per-axis wave numbers of the j-th
    eigenfunction.  Arrays are read-only so a spectrum can be shared.
    """

    domain: Domain
    lambdas: np.ndarray
    modes: np.ndarray
    N: int = 1
    bold_lambdas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        modes = np.asarray(self.modes, dtype=int).reshape(len(lam), self.domain.d)
        bold = np.repeat(lam, self.N)
        for arr in (lam, modes, bold):
            arr.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "bold_lambdas", bold)

    @property
    def M(self) -> int:
        return len(self.lambdas)

    @property
    def lambda1(self) -> float:
        return float(self.lambdas[0])


def _axis_lambdas(side: float, kmax: int) -> np.ndarray:
    k = np.arange(1, kmax + 1)
    return (np.pi * k / side) ** 2


def _modes_below(domain: Domain, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """All index tuples with eigenvalue <= cutoff, sorted (stable, lexicographic ties)."""
    kmax = [max(1, int(math.floor(s * math.sqrt(cutoff) / math.pi))) for s in domain.sides]
    axes = [np.arange(1, k + 1) for k in kmax]
    grids = np.meshgrid(*axes, indexing="ij")
    modes = np.stack([g.ravel() for g in grids], axis=1)
    lam = np.zeros(len(modes))
    for i, side in enumerate(domain.sides):
        lam += _axis_lambdas(side, kmax[i])[modes[:, i] - 1]
    keep = lam <= cutoff
    lam, modes = lam[keep], modes[keep]
    order = np.argsort(lam, kind="stable")
    return lam[order], modes[order]


def build_spectrum(domain: Domain, M: int, N: int = 1) -> Spectrum:
    """First ``M`` Dirichlet eigenvalues of ``domain`` for ``N``-vector fields."""
    if M < 1:
        raise ValueError(f"mode count must be >= 1, got {M}")
    if N < 1:
        raise ValueError(f"component count must be >= 1, got {N}")
    cutoff = 1.5 * weyl_estimate(domain, M) + sum((math.pi / s) ** 2 for s in domain.sides)
    while True:
        lam, modes = _modes_below(domain, cutoff)
        if len(lam) >= M:
            break
        cutoff *= 2.0
    return Spectrum(domain, lam[:M], modes[:M], N)


def spectrum_below(domain: Domain, cutoff: float, N: int = 1) -> Spectrum:
    """Every eigenvalue strictly below ``cutoff`` (at least one mode)."""
    lam, modes = _modes_below(domain, cutoff)
    keep = lam < cutoff
    if not keep.any():
        return build_spectrum(domain, 1, N)
    return Spectrum(domain, lam[keep], modes[keep], N)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def weyl_estimate(domain: Domain, n: float) -> float:
    """Weyl principal term ``((2pi)^d / (omega_d |Omega|))^(2/d) n^(2/d)``."""
    if n < 1:
        raise ValueError(f"index must be >= 1, got {n}")
    d = domain.d
    return ((2 * math.pi) ** d / (unit_ball_volume(d) * domain.measure)) ** (2 / d) * n ** (2 / d)


class LiYau(NamedTuple):
    cumulative: float
    per_index: float


def li_yau_lower(domain: Domain, n: int, N: int = 1) -> LiYau:
    """Li-Yau lower bounds for the first ``n`` vector eigenvalues in 2D.

    ``cumulative`` bounds the sum of the first ``n`` eigenvalues,
    ``per_index`` bounds the n-th one.
    """
    if domain.d != 2:
        raise ValueError(f"Li-Yau bound is implemented for d=2 only, got d={domain.d}")
    c = 2 * math.pi / (N * domain.measure)
    return LiYau(c * n * n, c * n)
