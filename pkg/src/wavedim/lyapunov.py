"""Lyapunov exponents, Kaplan-Yorke dimension and n-trace sums.

Tangent vectors are carried as ``(phi, psi) = (du, dv + eps du)``.  In these
variables the linearized flow reads

    phi' = -eps phi + psi
    psi' = -(Lambda - eps (gamma - eps)) phi - (gamma - eps) psi - f'(u) phi,

and the energy inner product ``(grad phi1, grad phi2) + (psi1, psi2)``
becomes Euclidean in the coordinates ``y = (sqrt(Lambda) phi, psi)``.
All QR re-orthonormalizations and trace computations use those
coordinates.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dynamics import (
    GalerkinModel,
    GalerkinState,
    Trajectory,
    _advance,
    _check_growth,
    check_dt,
    simulate,
)

log = logging.getLogger(__name__)

CONVERGENCE_TOL = 0.05


class ConvergenceWarning(RuntimeWarning):
    pass


def eps0(gamma: float, lambda1: float) -> float:
    """Largest admissible shift ``min(gamma/4, lambda1/(2 gamma))``."""
    return min(gamma / 4, lambda1 / (2 * gamma))


def _resolve_eps(model: GalerkinModel, epsilon: float | None) -> float:
    top = eps0(model.gamma, model.spectrum.lambda1) if model.gamma > 0 else 0.0
    if epsilon is None:
        return top
    if epsilon < 0 or epsilon > top * (1 + 1e-12):
        raise ValueError(f"shift must lie in [0, {top:.6g}], got {epsilon}")
    return float(epsilon)


@dataclass
class VariationalBundle:
    """Tangent vectors ``phi, psi`` of shape ``(M, N, k)`` along a sampled base."""

    model: GalerkinModel
    base: Trajectory
    phi: np.ndarray
    psi: np.ndarray
    epsilon: float

    def base_u(self, time: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.base.times - time)))
        if abs(self.base.times[i] - time) > 1e-9 * max(1.0, abs(time)):
            raise ValueError(f"no base sample at t={time}")
        return self.base.u[i]


def variational_rhs(bundle: VariationalBundle, time: float) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of every tangent ``(phi, psi)`` in the bundle."""
    model, eps = bundle.model, bundle.epsilon
    g = model.gamma
    lam = model.lam[:, None, None]
    phi, psi = bundle.phi, bundle.psi
    if phi.shape[:2] != (model.M, model.N) or psi.shape != phi.shape:
        raise ValueError("tangent shape does not match the Galerkin model")
    _, J = model.force(bundle.base_u(time), with_jacobian=True)
    dphi = -eps * phi + psi
    dpsi = -(lam - eps * (g - eps)) * phi - (g - eps) * psi - model.apply_jacobian(J, phi)
    return dphi, dpsi


def generator_matrix(model: GalerkinModel, u: np.ndarray) -> np.ndarray:
    """Linearization of the Galerkin vector field at ``u`` in ``(du, dv)`` coordinates."""
    MN = model.M * model.N
    lam = np.repeat(model.lam, model.N)
    J = np.zeros((2 * MN, 2 * MN))
    J[:MN, MN:] = np.eye(MN)
    J[MN:, :MN] = -np.diag(lam) - model.jacobian_matrix(u)
    J[MN:, MN:] = -model.gamma * np.eye(MN)
    return J


def _metric(model: GalerkinModel, eps: float):
    """Coordinate maps between ``(du, dv)`` columns and Euclidean E-coordinates."""
    MN = model.M * model.N
    root = np.sqrt(np.repeat(model.lam, model.N))[:, None]

    def to_y(X):
        du, dv = X[:MN], X[MN:]
        return np.vstack([root * du, dv + eps * du])

    def from_y(Y):
        du = Y[:MN] / root
        return np.vstack([du, Y[MN:] - eps * du])

    return to_y, from_y


def symmetric_generator(model: GalerkinModel, u: np.ndarray, eps: float) -> np.ndarray:
    """Symmetric part of the shifted variational operator in E-coordinates."""
    MN = model.M * model.N
    lam = np.repeat(model.lam, model.N)
    g = model.gamma
    r = np.sqrt(lam)
    G = np.zeros((2 * MN, 2 * MN))
    G[:MN, :MN] = -eps * np.eye(MN)
    G[:MN, MN:] = np.diag(r)
    G[MN:, :MN] = (-np.diag(lam - eps * (g - eps)) - model.jacobian_matrix(u)) / r[None, :]
    G[MN:, MN:] = -(g - eps) * np.eye(MN)
    return 0.5 * (G + G.T)


def n_traces(model: GalerkinModel, u: np.ndarray, eps: float, n_max: int) -> np.ndarray:
    """``Tr_n`` for ``n = 1..n_max``: partial sums of the top symmetric eigenvalues."""
    w = linalg.eigvalsh(symmetric_generator(model, u, eps))[::-1]
    return np.cumsum(w[:n_max])


def ky_dimension(exponents) -> float:
    """Kaplan-Yorke dimension of exponents sorted in descending order."""
    mu = np.asarray(exponents, dtype=float)
    if mu.size == 0 or mu[0] < 0:
        return 0.0
    cum = np.cumsum(mu)
    nonneg = np.nonzero(cum >= 0)[0]
    n0 = int(nonneg[-1]) + 1
    if n0 == mu.size:
        return float(mu.size)
    return n0 + cum[n0 - 1] / abs(mu[n0])


@dataclass
class LyapunovReport:
    exponents: np.ndarray
    cumulative: np.ndarray
    ky_dimension: float
    q_samples: np.ndarray
    converged: bool
    epsilon: float
    method: str
    tangents: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "exponents": [float(x) for x in self.exponents],
            "cumulative": [float(x) for x in self.cumulative],
            "ky_dimension": float(self.ky_dimension),
            "q_samples": [float(x) for x in self.q_samples],
            "converged": bool(self.converged),
            "epsilon": float(self.epsilon),
            "method": self.method,
        }


def _is_equilibrium(model: GalerkinModel, state: GalerkinState, tol: float = 1e-8) -> bool:
    du, dv = model.rhs(state)
    scale = 1.0 + model.energy_norm(state.u, state.v)
    return model.energy_norm(du, dv) <= tol * scale


def max_growth_rate(model: GalerkinModel, u: np.ndarray) -> float:
    """``max |Re mu|`` over the spectrum of the linearization at ``u``."""
    return float(np.max(np.abs(linalg.eigvals(generator_matrix(model, u)).real)))


def _finish(logs: np.ndarray, total_time: float, eps: float, method: str, q, X, gamma):
    """Average the accumulated log stretches and run the split-half check."""
    exps = logs.sum(axis=0) / total_time
    order = np.argsort(-exps, kind="stable")
    exps = exps[order]
    half = len(logs) // 2
    converged = True
    if half >= 1:
        dt_int = total_time / len(logs)
        a = logs[:half].sum(axis=0)[order] / (half * dt_int)
        b = logs[half:].sum(axis=0)[order] / ((len(logs) - half) * dt_int)
        tol = CONVERGENCE_TOL * np.maximum(np.abs(a), np.abs(b)) + CONVERGENCE_TOL * gamma / 2
        converged = bool(np.all(np.abs(a - b) <= tol))
    if not converged:
        warnings.warn("Lyapunov exponents differ by more than 5% between window halves",
                      ConvergenceWarning, stacklevel=3)
    return LyapunovReport(exps, np.cumsum(exps), ky_dimension(exps), q, converged, eps,
                          method, X)


def compute_exponents(
    model: GalerkinModel,
    xi0: GalerkinState,
    k: int,
    T: float,
    qr_interval: float = 0.5,
    dt: float | None = None,
    epsilon: float | None = None,
    t_burn: float | None = None,
    method: str = "auto",
    seed: int = 0,
    t_align: float | None = None,
) -> LyapunovReport:
    """Top ``k`` Lyapunov exponents by the discrete QR method in the E metric.

    ``method="frozen"`` linearizes at ``xi0`` and propagates tangents by
    the exact matrix exponential; it needs ``xi0`` to be an equilibrium
    unless the nonlinearity is affine.  ``method="trajectory"`` burns in
    the base for ``t_burn`` (default ``20/gamma``) and then integrates base
    and tangents together with the tangent-linear step map.  ``"auto"``
    picks the frozen path for affine nonlinearities.  Stretches over the
    first ``t_align`` (default ``T/4``) time units are discarded while the
    tangents settle; the average is then taken over ``T``.
    """
    dim = model.dim
    if not 1 <= k <= dim:
        raise ValueError(f"need 1 <= k <= {dim}, got {k}")
    if T <= 0 or qr_interval <= 0:
        raise ValueError("T and qr_interval must be positive")
    eps = _resolve_eps(model, epsilon)
    if method == "auto":
        method = "frozen" if model.spec.is_linear else "trajectory"
    if method not in ("frozen", "trajectory"):
        raise ValueError(f"unknown method {method!r}")

    rng = np.random.default_rng(seed)
    to_y, from_y = _metric(model, eps)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    X = from_y(Q)
    n_int = int(math.ceil(T / qr_interval - 1e-9))
    t_align = T / 4 if t_align is None else t_align
    n_skip = int(math.ceil(t_align / qr_interval - 1e-9))
    logs = np.zeros((n_skip + n_int, k))
    MN = model.M * model.N

    if method == "frozen":
        if not model.spec.is_linear and not _is_equilibrium(model, xi0):
            raise ValueError("the frozen linearization needs an equilibrium base state")
        Jm = generator_matrix(model, xi0.u)
        _check_qr(qr_interval, float(np.max(np.abs(linalg.eigvals(Jm).real))))
        P = linalg.expm(Jm * qr_interval)
        for i in range(n_skip + n_int):
            Qy, R = np.linalg.qr(to_y(P @ X))
            logs[i] = np.log(np.abs(np.diag(R)))
            X = from_y(Qy)
        q = n_traces(model, xi0.u, eps, k)
        return _finish(logs[n_skip:], n_int * qr_interval, eps, method, q, X, model.gamma)

    if dt is None:
        dt = qr_interval / math.ceil(qr_interval / model.max_dt() - 1e-9)
    check_dt(model, dt)
    per = int(round(qr_interval / dt))
    if abs(per * dt - qr_interval) > 1e-9 * qr_interval:
        raise ValueError("qr_interval must be an integer multiple of dt")
    t_burn = 20.0 / model.gamma if t_burn is None else t_burn
    base = simulate(xi0, model, 0.0, dt, t_burn=t_burn).final
    _check_qr(qr_interval, max_growth_rate(model, base.u))
    u, v = base.u, base.v
    q_acc = np.zeros(k)
    for i in range(n_skip + n_int):
        du = X[:MN].reshape(model.M, model.N, k)
        dv = X[MN:].reshape(model.M, model.N, k)
        for _ in range(per):
            un, vn, du, dv = _advance(model, u, v, dt, du, dv)
            _check_growth(model, u, v, un, vn)
            u, v = un, vn
        Qy, R = np.linalg.qr(to_y(np.vstack([du.reshape(MN, k), dv.reshape(MN, k)])))
        logs[i] = np.log(np.abs(np.diag(R)))
        X = from_y(Qy)
        if i >= n_skip:
            q_acc += n_traces(model, u, eps, k)
    return _finish(logs[n_skip:], n_int * qr_interval, eps, method, q_acc / n_int, X, model.gamma)


def _check_qr(qr_interval: float, rate: float) -> None:
    if qr_interval * rate > 1.0:
        raise ValueError(
            f"qr_interval {qr_interval} too long for growth rate {rate:.3g} (product must be <= 1)"
        )


def q_curve(
    model: GalerkinModel,
    xi0: GalerkinState,
    n_max: int,
    T: float,
    dt: float | None = None,
    epsilon: float | None = None,
    t_burn: float | None = None,
    stride: int = 1,
    restarts: int = 0,
    seed: int = 0,
) -> np.ndarray:
    """Time-averaged ``Tr_n`` for ``n = 1..n_max``, maximized over restarts.

    Restarts begin from seeded random states with the energy norm of ``xi0``
    (at least 1).
    """
    if not 0 <= n_max <= model.dim:
        raise ValueError(f"need 0 <= n <= {model.dim}, got {n_max}")
    if n_max == 0:
        return np.zeros(0)
    eps = _resolve_eps(model, epsilon)
    dt = model.max_dt() if dt is None else dt
    t_burn = 20.0 / model.gamma if t_burn is None else t_burn
    starts = [xi0]
    radius = max(1.0, model.energy_norm(xi0.u, xi0.v))
    for r in range(restarts):
        starts.append(model.random_state(radius, seed=seed + 1 + r))
    best = np.full(n_max, -np.inf)
    for s in starts:
        traj = simulate(s, model, T, dt, stride=stride, t_burn=t_burn)
        acc = np.mean([n_traces(model, uu, eps, n_max) for uu in traj.u], axis=0)
        best = np.maximum(best, acc)
    return best


def q_of_n(model: GalerkinModel, xi0: GalerkinState, n: int, T: float, **kw) -> float:
    """``q(n)``; zero for ``n = 0``."""
    if n == 0:
        return 0.0
    return float(q_curve(model, xi0, n, T, **kw)[n - 1])
