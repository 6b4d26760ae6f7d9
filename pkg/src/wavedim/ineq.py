"""Numerical checks of the trace and density inequalities for suborthonormal families.

A family ``phi_1..phi_n`` in ``H^1_0`` is suborthonormal when the Gram matrix
of gradients ``(grad phi_i, grad phi_j)`` has operator norm at most one.
Families are stored as sine coefficients ``(n, M, N)``; in the coordinates
``sqrt(lambda_k) c_k`` the gradient inner product is Euclidean.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bounds import CLRConstants, loglog_fit
from .dynamics import SineGrid
from .spectral import Domain, Spectrum, build_spectrum

log = logging.getLogger(__name__)

SUBORTH_TOL = 1e-10
PIVOT_TOL = 1e-12
D1_GRID, D2_GRID, D3_GRID = 1024, 256, 48
D1_TOL, D3_TOL = 0.02, 0.05
MODES = ("orthonormal", "contracted", "projected")
MODE_WEIGHTS = (0.7, 0.2, 0.1)


class RankDeficiencyError(ArithmeticError):
    pass


class ResolutionWarning(UserWarning):
    pass


def random_suborth_vectors(
    dim: int, n: int, rng: np.random.Generator, mode: str = "orthonormal", factor: float | None = None
) -> np.ndarray:
    """``n`` row vectors in ``R^dim`` whose Gram matrix has norm ``<= 1``."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if n > dim:
        raise ValueError(f"cannot fit {n} suborthonormal vectors in dimension {dim}")
    if n == 0:
        return np.zeros((0, dim))
    Q, R = np.linalg.qr(rng.standard_normal((dim, n)))
    if np.min(np.abs(np.diag(R))) < PIVOT_TOL:
        raise RankDeficiencyError("near-zero pivot while orthonormalizing")
    V = Q.T
    if mode == "contracted":
        V = V * (factor if factor is not None else 1.0 - rng.random())
    elif mode == "projected":
        keep = rng.random(dim) < 0.5
        keep[rng.integers(dim)] = True
        V = V * keep
        top = np.linalg.eigvalsh(V @ V.T)[-1]
        if top > PIVOT_TOL:
            V = V / math.sqrt(top)
    return V


@dataclass(frozen=True)
class SuborthFamily:
    spectrum: Spectrum
    coeffs: np.ndarray  # (n, M, N)

    @property
    def domain(self) -> Domain:
        return self.spectrum.domain

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def N(self) -> int:
        return self.spectrum.N

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def gram(self) -> np.ndarray:
        Y = self.coeffs * np.sqrt(self.spectrum.lambdas)[None, :, None]
        Y = Y.reshape(self.n, -1)
        return Y @ Y.T

    def max_gram_eig(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.gram)[-1])

    def is_suborthonormal(self) -> bool:
        return self.max_gram_eig() <= 1 + SUBORTH_TOL

    def component(self, r: int) -> "SuborthFamily":
        """The scalar family of ``r``-th components."""
        spec = Spectrum(self.domain, self.spectrum.lambdas, self.spectrum.modes, 1)
        return SuborthFamily(spec, self.coeffs[:, :, r : r + 1])

    def l2_mass(self) -> float:
        """``sum_j ||phi_j||^2``, which equals ``||rho||_{L1}`` by Parseval."""
        return float(np.sum(self.coeffs**2))


def gen_suborth(
    domain: Domain, N: int, n: int, M: int, seed: int = 0, mode: str = "orthonormal",
    factor: float | None = None,
) -> SuborthFamily:
    """Random suborthonormal family over the first ``M`` modes."""
    spectrum = build_spectrum(domain, M, N)
    if n > M * N:
        raise ValueError(f"family size {n} exceeds M*N = {M * N}")
    rng = np.random.default_rng(seed)
    V = random_suborth_vectors(M * N, n, rng, mode, factor).reshape(n, M, N)
    return SuborthFamily(spectrum, V / np.sqrt(spectrum.lambdas)[None, :, None])


def eigenfunction_family(domain: Domain, n: int, N: int = 1) -> SuborthFamily:
    """``phi_j = e_j / sqrt(lambda_j)`` over the first ``n`` vector modes."""
    M = -(-n // N)
    spectrum = build_spectrum(domain, M, N)
    c = np.zeros((n, M, N))
    for j in range(n):
        k, r = divmod(j, N)
        c[j, k, r] = 1 / math.sqrt(spectrum.lambdas[k])
    return SuborthFamily(spectrum, c)


def hat_family(length: float, M: int = D1_GRID) -> SuborthFamily:
    """Sine truncation of the tent ``min(x, l - x)``, scaled to unit gradient norm."""
    spectrum = build_spectrum(Domain.interval(length), M, 1)
    k = np.arange(1, M + 1)
    a = 4 * length * np.sin(k * np.pi / 2) / (k * np.pi) ** 2 * math.sqrt(length / 2)
    a /= math.sqrt(np.sum(spectrum.lambdas * a * a))
    return SuborthFamily(spectrum, a.reshape(1, M, 1))


class Check(NamedTuple):
    lhs: float
    rhs: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def verify_sub_lemma(mu, family: np.ndarray) -> Check:
    """``sum_i (K phi_i, phi_i) <= mu_1 + ... + mu_n`` for ``K = diag(mu)``.

    ``family`` holds the ``n`` vectors as rows in the eigenbasis of ``K``.
    """
    mu = np.asarray(mu, dtype=float)
    V = np.atleast_2d(np.asarray(family, dtype=float))
    if np.any(mu <= 0):
        raise ValueError("K must be positive")
    if np.any(np.diff(mu) > 0):
        raise ValueError("diagonal values must be sorted descending")
    n = V.shape[0]
    if n and np.linalg.eigvalsh(V @ V.T)[-1] > 1 + SUBORTH_TOL:
        raise ValueError("family is not suborthonormal")
    lhs = float(np.sum(mu[None, :] * V * V))
    rhs = float(np.sum(mu[:n]))
    return Check(lhs, rhs, lhs <= rhs + SUBORTH_TOL)


def _grid(family: SuborthFamily, size: int | tuple[int, ...]) -> SineGrid:
    shape = (size,) * family.d if isinstance(size, int) else tuple(size)
    return SineGrid(family.spectrum, shape=shape)


def rho_field(family: SuborthFamily, size: int | tuple[int, ...]) -> tuple[np.ndarray, SineGrid]:
    """``rho(x) = sum_j |phi_j(x)|^2`` on an interior grid with ``size`` points per axis."""
    grid = _grid(family, size)
    if family.n == 0:
        return np.zeros(grid.shape), grid
    vals = grid.to_grid(np.moveaxis(family.coeffs, 0, -1))  # (*shape, N, n)
    return np.sum(vals * vals, axis=(-2, -1)), grid


def rho_bound_d1(family: SuborthFamily, grid: int = D1_GRID, tol: float = D1_TOL) -> Check:
    """``||rho||_inf <= N l / 4``."""
    if family.d != 1:
        raise ValueError("needs an interval")
    rho, _ = rho_field(family, grid)
    lhs = float(rho.max()) if rho.size else 0.0
    rhs = family.N * family.domain.length / 4
    return Check(lhs, rhs, lhs <= rhs * (1 + tol))


def rho_bound_d2(family: SuborthFamily) -> Check:
    """``||rho||_{L1} <= N |Omega| ln(e n) / (2 pi)``, exact in coefficients."""
    if family.d != 2:
        raise ValueError("needs a rectangle")
    lhs = family.l2_mass()
    if family.n == 0:
        return Check(lhs, 0.0, lhs <= 0.0)
    rhs = family.N * family.domain.measure / (2 * math.pi) * math.log(math.e * family.n)
    return Check(lhs, rhs, lhs <= rhs * (1 + 1e-8))


def rho_l1_quadrature(family: SuborthFamily, grid: int = D2_GRID) -> float:
    rho, g = rho_field(family, grid)
    return g.integrate(rho)


def rho_bound_d3(
    family: SuborthFamily, clr: CLRConstants | None = None, grid: int = D3_GRID, tol: float = D3_TOL
) -> Check:
    """``||rho||_{L_p} <= (N L0)^{2/d} p n^{(d-2)/d}`` with ``p = d/(d-2)``."""
    d = family.d
    if d != 3:
        raise ValueError("the density bound in L_p is implemented for d = 3")
    if grid < 32:
        warnings.warn(f"grid {grid}^3 is below 32^3; quadrature may blur the bound",
                      ResolutionWarning, stacklevel=2)
    clr = clr or CLRConstants(d)
    p = d / (d - 2)
    rho, g = rho_field(family, grid)
    lhs = g.integrate(rho**p) ** (1 / p)
    rhs = (family.N * clr.L0d) ** (2 / d) * p * family.n ** ((d - 2) / d)
    return Check(lhs, rhs, lhs <= rhs * (1 + tol))


def rho_scaling_d3(domain: Domain, ns=(8, 16, 32, 64), N: int = 1, grid: int = D3_GRID):
    """Exponent of ``||rho||_{L3}`` against ``n`` on eigenfunction families."""
    norms = []
    for n in ns:
        fam = eigenfunction_family(domain, n, N)
        rho, g = rho_field(fam, grid)
        norms.append(g.integrate(rho**3) ** (1 / 3))
    fit = loglog_fit(1.0 / np.asarray(ns, dtype=float), norms)
    return fit.slope, norms


def sum_inv_sqrt(spectrum: Spectrum, n: int) -> Check:
    """``sum_{j<=n} lambda_j^{-1/2}`` over vector eigenvalues against its bound."""
    bold = spectrum.bold_lambdas
    if n > len(bold):
        raise ValueError(f"spectrum has {len(bold)} vector modes, need {n}")
    N, dom = spectrum.N, spectrum.domain
    lhs = float(np.sum(bold[:n] ** -0.5))
    if dom.d == 1:
        rhs = N * dom.length / math.pi * math.log(math.e * n) if n else 0.0
    elif dom.d == 2:
        rhs = math.sqrt(N * dom.measure / (2 * math.pi)) * 2 * math.sqrt(n)
    else:
        raise ValueError("bounds on inverse square-root sums exist for d = 1, 2 only")
    return Check(lhs, rhs, lhs <= rhs * (1 + 1e-12))


def embedding_ratio(values: np.ndarray, length: float) -> float:
    """``||u||_inf^2 / ||u'||^2`` for the piecewise-linear interpolant of nodal ``values``.

    ``values`` excludes the two boundary zeros.
    """
    u = np.concatenate([[0.0], np.asarray(values, dtype=float), [0.0]])
    h = length / (len(u) - 1)
    grad2 = float(np.sum(np.diff(u) ** 2) / h)
    if grad2 == 0:
        raise ValueError("zero function")
    return float(np.max(u * u)) / grad2


class EmbeddingCheck(NamedTuple):
    hat_ratio: float
    max_random_ratio: float
    bound: float
    passed: bool


def sharp_embedding_check(length: float, grid_size: int = D1_GRID, samples: int = 200,
                          seed: int = 0, tol: float = D1_TOL) -> EmbeddingCheck:
    """Tent attains ``l/4``; random ``H^1_0`` samples stay below it."""
    if length <= 0:
        raise ValueError("length must be positive")
    x = np.linspace(0, length, grid_size + 1)[1:-1]
    hat = embedding_ratio(np.minimum(x, length - x), length)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        kind = rng.integers(3)
        if kind == 0:
            vals = rng.standard_normal(len(x))
        elif kind == 1:
            vals = np.cumsum(rng.standard_normal(len(x)))
        else:
            k = np.arange(1, 17)
            vals = np.sin(np.outer(x, k) * np.pi / length) @ (rng.standard_normal(16) / k**2)
        worst = max(worst, embedding_ratio(vals, length))
    bound = length / 4
    return EmbeddingCheck(hat, worst, bound, hat <= bound * (1 + tol) and worst <= bound * (1 + tol))


class CampaignRow(NamedTuple):
    seed: int
    n: int
    mode: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


def _pick_mode(rng) -> str:
    return MODES[int(rng.choice(3, p=MODE_WEIGHTS))]


def run_campaign(kind: str, seeds, n_max: int = 16, grid: int | None = None, N: int = 1,
                 domain: Domain | None = None) -> list[CampaignRow]:
    """Randomized inequality campaign, one row per seed.

    ``kind`` is one of ``sub``, ``d1``, ``d2``, ``d3``, ``inv_sqrt``.  Each
    seed draws its family size in ``1..n_max`` and its generation mode
    with weights 70/20/10 (orthonormal, contracted, projected).
    """
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, n_max + 1))
        mode = _pick_mode(rng)
        if kind == "sub":
            dim = n + int(rng.integers(0, 3 * n_max + 1))
            mu = 1.0 / np.arange(1, dim + 1)
            chk = verify_sub_lemma(mu, random_suborth_vectors(dim, n, rng, mode))
        elif kind in ("d1", "d2", "d3"):
            d = int(kind[1])
            dom = domain or Domain((1.0,) if d == 1 else (math.pi,) * d)
            M = {1: 4 * n_max, 2: 4 * n_max, 3: 2 * n_max}[d]
            M = max(M, -(-n // N))
            fam = gen_suborth(dom, N, n, M, seed=int(rng.integers(2**31)), mode=mode)
            if d == 1:
                chk = rho_bound_d1(fam, grid or D1_GRID)
            elif d == 2:
                chk = rho_bound_d2(fam)
            else:
                chk = rho_bound_d3(fam, grid=grid or D3_GRID)
        elif kind == "inv_sqrt":
            dom = domain or Domain.interval(math.pi)
            spec = build_spectrum(dom, -(-n // N), N)
            chk = sum_inv_sqrt(spec, n)
        else:
            raise ValueError(f"unknown campaign {kind!r}")
        rows.append(CampaignRow(int(seed), n, mode, chk.lhs, chk.rhs, chk.margin, chk.passed))
    return rows
