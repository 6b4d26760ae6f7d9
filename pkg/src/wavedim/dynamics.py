"""Spectral Galerkin integrator for the damped wave system

    u_tt + gamma u_t - Laplace(u) + f(u) = g,   u = 0 on the boundary,

with ``f = grad F0 + f_rot``.  The state is held as eigen-coefficients of
``u`` and ``u_t`` in the normalized sine basis ``prod_i sqrt(2/l_i) sin(k_i pi x_i / l_i)``,
so Parseval holds with unit weights: ``||u||_{L2}^2 = sum |c|^2`` and
``||grad u||^2 = sum lambda_j |c_j|^2``.

The nonlinearity is applied pseudo-spectrally on an interior DST-I grid.
A polynomial ``f`` of degree ``p`` is evaluated on a grid padded by
``(p + 1) / 2`` per axis, which is the 3/2 rule for quadratic ``f`` and
removes aliasing from every retained mode.  The rotational term is
transcendental and uses a 3/2 grid.

Time stepping is a Lawson (integrating factor) RK4: each mode's linear
block is propagated by its exact 2x2 matrix exponential and the forcing
``g - f(u)`` is treated by RK4 in the interaction picture.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import fft

from .spectral import Domain, Spectrum, build_spectrum


class InstabilityError(FloatingPointError):
    """Raised when a single step inflates the energy norm by more than 1e3."""


GROWTH_LIMIT = 1e3
RESOLUTION = 0.5


@dataclass(frozen=True)
class NonlinearitySpec:
    """Nonlinearity ``f(u) = grad F0(u) + f_rot(u)`` and the damping.

    ``potential`` maps monomial exponent tuples (one entry per component)
    to coefficients of ``F0``.  ``rotational`` switches on
    ``f_rot(u) = gamma * b * (sin(u2/gamma), -sin(u1/gamma))`` (``N == 2``),
    whose Jacobian at zero has eigenvalues ``+-i b``.  ``forcing`` holds the
    eigen-coefficients of ``g`` as an ``(M, N)`` array.
    """

    N: int = 1
    potential: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    rotational: bool = False
    gamma: float = 0.1
    b: float = 1.0
    forcing: np.ndarray | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.gamma < 0:
            raise ValueError(f"damping must be non-negative, got {self.gamma}")
        pot = {}
        for exps, c in dict(self.potential).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.N or min(exps) < 0:
                raise ValueError(f"bad monomial exponents {exps} for N={self.N}")
            if c != 0:
                pot[exps] = pot.get(exps, 0.0) + float(c)
        object.__setattr__(self, "potential", pot)
        if self.rotational:
            if self.N != 2:
                raise ValueError("the rotational perturbation needs N == 2")
            if self.gamma <= 0:
                raise ValueError("the rotational perturbation needs gamma > 0")

    @classmethod
    def quartic(cls, gamma: float, kappa: float = 0.0, N: int = 1, **kw) -> "NonlinearitySpec":
        """``F0 = |u|^4 / 4 - kappa |u|^2 / 2``."""
        pot: dict[tuple[int, ...], float] = {}
        for i in range(N):
            e = [0] * N
            e[i] = 4
            pot[tuple(e)] = 0.25
            if kappa:
                e[i] = 2
                pot[tuple(e)] = -0.5 * kappa
            for j in range(i + 1, N):
                e = [0] * N
                e[i] = e[j] = 2
                pot[tuple(e)] = 0.5
        return cls(N=N, potential=pot, gamma=gamma, **kw)

    @classmethod
    def quadratic(cls, gamma: float, a0: float, N: int = 1, **kw) -> "NonlinearitySpec":
        """``F0 = a0 |u|^2 / 2`` so that ``f'(u) = a0 I``."""
        pot = {}
        for i in range(N):
            e = [0] * N
            e[i] = 2
            pot[tuple(e)] = 0.5 * a0
        return cls(N=N, potential=pot, gamma=gamma, **kw)

    @classmethod
    def rotational_example(cls, gamma: float, b: float = 1.0, **kw) -> "NonlinearitySpec":
        return cls(N=2, rotational=True, gamma=gamma, b=b, **kw)

    @property
    def degree(self) -> int:
        """Polynomial degree of ``grad F0`` (0 when ``F0`` is at most linear)."""
        if not self.potential:
            return 0
        return max(max(sum(e) for e in self.potential) - 1, 0)

    @property
    def is_zero(self) -> bool:
        return not self.rotational and all(sum(e) == 0 for e in self.potential)

    @property
    def is_linear(self) -> bool:
        return not self.rotational and self.degree <= 1

    def F0(self, U: np.ndarray) -> np.ndarray:
        out = np.zeros(U.shape[:-1])
        for exps, c in self.potential.items():
            out = out + c * _monomial(U, exps)
        return out

    def f(self, U: np.ndarray) -> np.ndarray:
        """Pointwise ``f(u)`` for values of shape ``(..., N)``."""
        out = np.zeros(U.shape)
        for exps, c in self.potential.items():
            for j, e in enumerate(exps):
                if e:
                    de = list(exps)
                    de[j] -= 1
                    out[..., j] += c * e * _monomial(U, de)
        if self.rotational:
            g, b = self.gamma, self.b
            out[..., 0] += g * b * np.sin(U[..., 1] / g)
            out[..., 1] -= g * b * np.sin(U[..., 0] / g)
        return out

    def jacobian(self, U: np.ndarray) -> np.ndarray:
        """Pointwise ``f'(u)[..., i, j] = d f_i / d u_j``."""
        out = np.zeros(U.shape + (self.N,))
        for exps, c in self.potential.items():
            for i, ei in enumerate(exps):
                if not ei:
                    continue
                for j in range(self.N):
                    de = list(exps)
                    de[i] -= 1
                    ej = de[j]
                    if not ej:
                        continue
                    de[j] -= 1
                    out[..., i, j] += c * ei * ej * _monomial(U, de)
        if self.rotational:
            g, b = self.gamma, self.b
            out[..., 0, 1] += b * np.cos(U[..., 1] / g)
            out[..., 1, 0] -= b * np.cos(U[..., 0] / g)
        return out


def _monomial(U: np.ndarray, exps) -> np.ndarray:
    out = np.ones(U.shape[:-1])
    for j, e in enumerate(exps):
        if e:
            out = out * U[..., j] ** e
    return out


def potential_bounded_below(spec: NonlinearitySpec, samples: int = 2048) -> bool:
    """Heuristic check that a polynomial ``F0`` is bounded below.

    The leading homogeneous part must be of even degree and positive on a
    deterministic sample of unit directions.  Potentials failing this void
    the dissipativity diagnostics.
    """
    if not spec.potential:
        return True
    top = max(sum(e) for e in spec.potential)
    if top <= 1:
        return top == 0
    if top % 2:
        return False
    lead = {e: c for e, c in spec.potential.items() if sum(e) == top}
    rng = np.random.default_rng(12345)
    dirs = rng.standard_normal((samples, spec.N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = sum(c * _monomial(dirs, e) for e, c in lead.items())
    return bool(np.min(vals) > 0)


class SineGrid:
    """Interior DST-I collocation grid for a set of sine modes."""

    def __init__(self, spectrum: Spectrum, pad: float = 1.0, shape: tuple[int, ...] | None = None):
        self.domain = spectrum.domain
        kmax = spectrum.modes.max(axis=0)
        if shape is None:
            shape = tuple(max(int(k), int(math.floor(pad * k))) for k in kmax)
        elif len(shape) != self.domain.d or any(K < k for K, k in zip(shape, kmax)):
            raise ValueError(f"grid {shape} cannot resolve modes up to {tuple(kmax)}")
        self.shape = tuple(int(K) for K in shape)
        self.h = tuple(s / (K + 1) for s, K in zip(self.domain.sides, self.shape))
        self.cell = float(np.prod(self.h))
        self.index = tuple(spectrum.modes.T - 1)
        self.axes = tuple(range(self.domain.d))

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        """``(M, N, ...)`` coefficients to ``(*shape, N, ...)`` grid values."""
        full = np.zeros(self.shape + coeffs.shape[1:])
        full[self.index] = coeffs
        return fft.dstn(full, type=1, axes=self.axes, norm="ortho") / math.sqrt(self.cell)

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        full = fft.dstn(values, type=1, axes=self.axes, norm="ortho") * math.sqrt(self.cell)
        return full[self.index]

    def integrate(self, values: np.ndarray, boundary: float = 0.0) -> float:
        """Trapezoid integral of a field whose boundary value is ``boundary``."""
        return float(self.cell * np.sum(values - boundary) + boundary * self.domain.measure)

    def points(self) -> list[np.ndarray]:
        return [h * np.arange(1, K + 1) for h, K in zip(self.h, self.shape)]


@dataclass(frozen=True)
class GalerkinState:
    """Coefficients of ``u`` and ``u_t``, each ``(M, N)``."""

    u: np.ndarray
    v: np.ndarray
    time: float = 0.0


class GalerkinModel:
    """Galerkin truncation on the first ``M`` Dirichlet modes of ``domain``."""

    def __init__(self, domain: Domain, M: int, nonlinearity: NonlinearitySpec):
        self.domain = domain
        self.spec = nonlinearity
        self.spectrum = build_spectrum(domain, M, nonlinearity.N)
        if nonlinearity.rotational:
            pad = 1.5
        else:
            pad = max(1.0, (nonlinearity.degree + 1) / 2)
        self.grid = SineGrid(self.spectrum, pad)
        self.lam = np.array(self.spectrum.lambdas)
        if nonlinearity.forcing is None:
            self.forcing = np.zeros((M, nonlinearity.N))
        else:
            g = np.asarray(nonlinearity.forcing, dtype=float)
            if g.shape != (M, nonlinearity.N):
                raise ValueError(f"forcing must have shape {(M, nonlinearity.N)}, got {g.shape}")
            self.forcing = g
        self._props: dict[float, tuple[np.ndarray, ...]] = {}

    @property
    def M(self) -> int:
        return self.spectrum.M

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def gamma(self) -> float:
        return self.spec.gamma

    @property
    def dim(self) -> int:
        """Real dimension of the Galerkin phase space."""
        return 2 * self.M * self.N

    @property
    def free(self) -> bool:
        return self.spec.is_zero and not np.any(self.forcing)

    def max_dt(self) -> float:
        return RESOLUTION / math.sqrt(self.lam[-1])

    def zero_state(self) -> GalerkinState:
        z = np.zeros((self.M, self.N))
        return GalerkinState(z, z.copy(), 0.0)

    def random_state(self, energy_norm: float = 1.0, seed: int = 0) -> GalerkinState:
        """Smooth random state with ``||xi||_E = energy_norm``."""
        rng = np.random.default_rng(seed)
        w = 1.0 / np.arange(1, self.M + 1)[:, None]
        u = rng.standard_normal((self.M, self.N)) * w / np.sqrt(self.lam)[:, None]
        v = rng.standard_normal((self.M, self.N)) * w
        s = energy_norm / math.sqrt(np.sum(self.lam[:, None] * u**2) + np.sum(v**2))
        return GalerkinState(u * s, v * s, 0.0)

    def propagator(self, dt: float) -> tuple[np.ndarray, ...]:
        """Exact per-mode flow of ``u' = v, v' = -gamma v - lambda u`` over ``dt``."""
        key = float(dt)
        if key not in self._props:
            g, lam = self.gamma, self.lam
            s = np.sqrt((g * g / 4 - lam).astype(complex))
            z = s * dt
            C = np.cosh(z)
            small = np.abs(z) < 1e-8
            S = np.where(small, dt * (1 + z * z / 6), np.sinh(z) / np.where(small, 1, s))
            decay = math.exp(-g * dt / 2)
            C, S = (C.real * decay), (S.real * decay)
            self._props[key] = (C + g / 2 * S, S, -lam * S, C - g / 2 * S)
        return self._props[key]

    def force(self, u: np.ndarray, with_jacobian: bool = False):
        """Return ``g - P f(u)`` in coefficients, plus ``f'(u)`` on the grid if asked."""
        U = self.grid.to_grid(u)
        n = self.forcing - self.grid.from_grid(self.spec.f(U))
        return n, (self.spec.jacobian(U) if with_jacobian else None)

    def apply_jacobian(self, J: np.ndarray, du: np.ndarray) -> np.ndarray:
        """Galerkin action of multiplication by ``f'(u(x))`` on ``(M, N, k)`` tangents."""
        D = self.grid.to_grid(du)
        return self.grid.from_grid(np.einsum("...ij,...jk->...ik", J, D))

    def jacobian_matrix(self, u: np.ndarray) -> np.ndarray:
        """Galerkin matrix of ``f'(u)`` acting on flattened ``(M, N)`` coefficients."""
        MN = self.M * self.N
        _, J = self.force(u, with_jacobian=True)
        eye = np.eye(MN).reshape(self.M, self.N, MN)
        return self.apply_jacobian(J, eye).reshape(MN, MN)

    def rhs(self, state: GalerkinState) -> tuple[np.ndarray, np.ndarray]:
        n, _ = self.force(state.u)
        return state.v, -self.gamma * state.v - self.lam[:, None] * state.u + n

    def energy_norm(self, u: np.ndarray, v: np.ndarray) -> float:
        return math.sqrt(float(np.sum(self.lam[:, None] * u**2) + np.sum(v**2)))


def _bc(e: np.ndarray, ndim: int) -> np.ndarray:
    return e.reshape((-1,) + (1,) * (ndim - 1))


def _flow(P, u, v):
    e11, e12, e21, e22 = (_bc(e, u.ndim) for e in P)
    return e11 * u + e12 * v, e21 * u + e22 * v


def _advance(model: GalerkinModel, u, v, dt, du=None, dv=None):
    """One Lawson-RK4 step; tangents, if given, follow the exact derivative of the step map."""
    P1 = model.propagator(dt)
    u0, v0 = _flow(P1, u, v)
    tangent = du is not None
    if tangent:
        du0, dv0 = _flow(P1, du, dv)
    if model.free:
        return (u0, v0, du0, dv0) if tangent else (u0, v0)
    P2 = model.propagator(dt / 2)
    h = dt
    uh, _ = _flow(P2, u, v)
    e12h, e22h = (_bc(P2[1], u.ndim), _bc(P2[3], u.ndim))
    e12, e22 = (_bc(P1[1], u.ndim), _bc(P1[3], u.ndim))

    n1, J1 = model.force(u, tangent)
    a2 = uh + (h / 2) * e12h * n1
    n2, J2 = model.force(a2, tangent)
    n3, J3 = model.force(uh, tangent)
    a4 = u0 + h * e12h * n3
    n4, J4 = model.force(a4, tangent)
    u1 = u0 + h / 6 * (e12 * n1 + 2 * e12h * (n2 + n3))
    v1 = v0 + h / 6 * (e22 * n1 + 2 * e22h * (n2 + n3) + n4)
    if not tangent:
        return u1, v1

    t12h, t22h = (_bc(P2[1], du.ndim), _bc(P2[3], du.ndim))
    t12, t22 = (_bc(P1[1], du.ndim), _bc(P1[3], du.ndim))
    duh, _ = _flow(P2, du, dv)
    m1 = -model.apply_jacobian(J1, du)
    da2 = duh + (h / 2) * t12h * m1
    m2 = -model.apply_jacobian(J2, da2)
    m3 = -model.apply_jacobian(J3, duh)
    da4 = du0 + h * t12h * m3
    m4 = -model.apply_jacobian(J4, da4)
    du1 = du0 + h / 6 * (t12 * m1 + 2 * t12h * (m2 + m3))
    dv1 = dv0 + h / 6 * (t22 * m1 + 2 * t22h * (m2 + m3) + m4)
    return u1, v1, du1, dv1


def check_dt(model: GalerkinModel, dt: float) -> None:
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    # the linear block is exact; the bound only matters when f couples modes
    if not model.spec.is_zero and dt > model.max_dt() * (1 + 1e-12):
        raise ValueError(
            f"dt={dt} violates dt*sqrt(lambda_M) <= {RESOLUTION} (max dt {model.max_dt():.3g})"
        )


def _check_growth(model, u_old, v_old, u, v):
    e_new = model.energy_norm(u, v)
    if not math.isfinite(e_new):
        raise InstabilityError("non-finite state")
    e_old = model.energy_norm(u_old, v_old)
    if e_old > 0 and e_new > GROWTH_LIMIT * e_old:
        raise InstabilityError(f"energy norm grew from {e_old:.3g} to {e_new:.3g} in one step")


def eval_nonlinearity(model: GalerkinModel, u: np.ndarray) -> np.ndarray:
    """Coefficients of the Galerkin projection of ``f(u)``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (model.M, model.N):
        raise ValueError(f"coefficients must have shape {(model.M, model.N)}, got {u.shape}")
    return model.grid.from_grid(model.spec.f(model.grid.to_grid(u)))


def step(state: GalerkinState, model: GalerkinModel, dt: float) -> GalerkinState:
    check_dt(model, dt)
    u, v = _advance(model, state.u, state.v, dt)
    _check_growth(model, state.u, state.v, u, v)
    return GalerkinState(u, v, state.time + dt)


def _integral_F0(model: GalerkinModel, u: np.ndarray) -> float:
    spec = model.spec
    if not spec.potential:
        return 0.0
    U = model.grid.to_grid(u)
    F0_zero = float(spec.F0(np.zeros((1, model.N)))[0])
    return model.grid.integrate(spec.F0(U), boundary=F0_zero)


def energy_psi(state: GalerkinState, model: GalerkinModel) -> float:
    """Dissipativity functional with ``eps = gamma / 2``:

    ``1/2 ||xi||_E^2 + eps (u, u_t) + (F0(u), 1) + 1/2 gamma eps ||u||^2 - (g, u)``.
    """
    u, v = state.u, state.v
    eps = model.gamma / 2
    return (
        0.5 * model.energy_norm(u, v) ** 2
        + eps * float(np.sum(u * v))
        + _integral_F0(model, u)
        + 0.5 * model.gamma * eps * float(np.sum(u * u))
        - float(np.sum(model.forcing * u))
    )


def lyapunov_functional(state: GalerkinState, model: GalerkinModel) -> float:
    """``1/2 ||u_t||^2 + 1/2 ||grad u||^2 + (F0(u), 1) + (g, u)``.

    The forcing enters with a plus sign as written in the source
    formula; the functional is non-increasing for ``g = 0``.
    """
    if model.spec.rotational:
        raise ValueError("the Lyapunov functional needs a purely gradient nonlinearity")
    u, v = state.u, state.v
    return (
        0.5 * float(np.sum(v * v))
        + 0.5 * float(np.sum(model.lam[:, None] * u * u))
        + _integral_F0(model, u)
        + float(np.sum(model.forcing * u))
    )


def u_linf(model: GalerkinModel, u: np.ndarray) -> float:
    U = model.grid.to_grid(u)
    return float(np.max(np.linalg.norm(U, axis=-1)))


@dataclass
class Trajectory:
    """Sampled solution with per-sample diagnostics."""

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    energy: np.ndarray
    psi: np.ndarray
    lyapunov: np.ndarray
    u_linf: np.ndarray

    COLUMNS = ("t", "energy", "psi", "lyapunov_functional", "u_linf")

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> GalerkinState:
        return GalerkinState(self.u[i], self.v[i], float(self.times[i]))

    @property
    def final(self) -> GalerkinState:
        return self.state(-1)

    def after(self, t_min: float) -> "Trajectory":
        keep = self.times >= t_min - 1e-12
        return Trajectory(*(getattr(self, f)[keep] for f in
                            ("times", "u", "v", "energy", "psi", "lyapunov", "u_linf")))

    def rows(self):
        for row in zip(self.times, self.energy, self.psi, self.lyapunov, self.u_linf):
            yield [repr(float(x)) for x in row]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            w.writerows(self.rows())


def simulate(
    xi0: GalerkinState,
    model: GalerkinModel,
    T: float,
    dt: float,
    stride: int = 1,
    t_burn: float = 0.0,
) -> Trajectory:
    """Integrate for ``t_burn`` unrecorded, then record every ``stride`` steps over ``T``."""
    check_dt(model, dt)
    if stride < 1:
        raise ValueError("sampling stride must be >= 1")
    u, v, t = np.array(xi0.u, dtype=float), np.array(xi0.v, dtype=float), float(xi0.time)
    for _ in range(int(round(t_burn / dt))):
        un, vn = _advance(model, u, v, dt)
        _check_growth(model, u, v, un, vn)
        u, v, t = un, vn, t + dt
    t0 = t
    nsteps = int(round(T / dt))
    samples = [(0, u, v)]
    for i in range(1, nsteps + 1):
        un, vn = _advance(model, u, v, dt)
        _check_growth(model, u, v, un, vn)
        u, v = un, vn
        if i % stride == 0:
            samples.append((i, u, v))
    times = np.array([t0 + i * dt for i, _, _ in samples])
    U = np.array([s[1] for s in samples])
    V = np.array([s[2] for s in samples])
    states = [GalerkinState(a, b, tt) for a, b, tt in zip(U, V, times)]
    energy = np.array([model.energy_norm(s.u, s.v) for s in states])
    psi = np.array([energy_psi(s, model) for s in states])
    if model.spec.rotational:
        lyap = np.full(len(states), np.nan)
    else:
        lyap = np.array([lyapunov_functional(s, model) for s in states])
    linf = np.array([u_linf(model, s.u) for s in states])
    return Trajectory(times, U, V, energy, psi, lyap, linf)


def entering_time(trajectory: Trajectory, radius: float) -> float:
    """First sampled time with ``||xi||_E <= radius`` (``inf`` if never)."""
    hit = np.nonzero(trajectory.energy <= radius)[0]
    return float(trajectory.times[hit[0]]) if len(hit) else math.inf


def jacobian_field_norm(model: GalerkinModel, u: np.ndarray, d: int) -> float:
    """``||f'(u)||_{L_d}`` with the Frobenius norm pointwise (``L_inf`` for ``d == 1``)."""
    spec = model.spec
    J = np.linalg.norm(spec.jacobian(model.grid.to_grid(u)), axis=(-2, -1))
    J0 = float(np.linalg.norm(spec.jacobian(np.zeros((1, model.N)))[0]))
    if d == 1:
        return max(float(J.max()), J0)
    if d == 2:
        return max(float(J.max()), J0)
    return model.grid.integrate(J**d, boundary=J0**d) ** (1.0 / d)


def estimate_Bd(
    model: GalerkinModel, trajectory: Trajectory, d: int | None = None, t_min: float = -math.inf
) -> float:
    """Trajectory estimate of ``B_d``.

    ``d == 1`` and ``d >= 3``: running max of ``||f'(u(t))||_{L_d}``
    (``L_inf`` for ``d == 1``).  ``d == 2``: time average of
    ``||f'(u(t))||_{L_inf}``.  Needs at least 10 samples at ``t >= t_min``.
    """
    d = model.domain.d if d is None else d
    traj = trajectory.after(t_min) if math.isfinite(t_min) else trajectory
    if len(traj) < 10:
        raise ValueError(f"need at least 10 post-burn-in samples, got {len(traj)}")
    norms = np.array([jacobian_field_norm(model, u, d) for u in traj.u])
    return float(norms.mean() if d == 2 else norms.max())
