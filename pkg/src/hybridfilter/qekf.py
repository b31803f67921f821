"""Quantum extended Kalman filter over ``x = (sigma_x, sigma_y, sigma_z, q2, p2)``.

A five-dimensional classical filter approximating the SME: explicit-Euler
propagation of the estimate and of a Riccati equation with the robust noise
covariance ``mu I + S S^T``.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _core
from .operators import DEFAULT_TOL, Tolerances
from .truth import MeasurementRecord

__all__ = [
    "QekfParams",
    "QekfState",
    "CovarianceTerms",
    "QekfResult",
    "drift_f",
    "jacobian_F",
    "measurement_h",
    "measurement_H",
    "covariance_terms",
    "qekf_step",
    "run_qekf",
    "initial_state",
    "write_qekf_csv",
]

S_MATRIX_CHOICES = ("derived", "paper")


@dataclass(frozen=True)
class QekfParams:
    """QEKF rates and tuning.

    ``s_matrix`` selects the first entry of the cross-correlation vector:
    ``"derived"`` uses ``sqrt(k1) sigma_z`` and ``"paper"`` the printed
    ``k1 sigma_z``.
    """

    k1: float
    k2: float
    alpha: float
    lam: float = 0.0
    mu: float = 0.01
    s_matrix: str = "derived"

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0 and self.alpha > 0):
            raise ValueError("k1, k2 and alpha must be positive")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        if self.s_matrix not in S_MATRIX_CHOICES:
            raise ValueError(f"s_matrix must be one of {S_MATRIX_CHOICES}, got {self.s_matrix!r}")


@dataclass(frozen=True)
class QekfState:
    x_hat: np.ndarray
    P: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=float).reshape(5)
        P = np.asarray(self.P, dtype=float).reshape(5, 5)
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "P", P)


def drift_f(x, params: QekfParams) -> np.ndarray:
    sx, sy, sz, q2, p2 = np.asarray(x, dtype=float)
    k1, k2, a = params.k1, params.k2, params.alpha
    return np.array([
        -(2 * q2 / a) * sy - 0.5 * k1 * sx,
        (2 * q2 / a) * sx - 0.5 * k1 * sy,
        -k1 * (1 + sz),
        -0.5 * k2 * q2,
        -sz / (2 * a) - 0.5 * k2 * p2,
    ])


def jacobian_F(x, params: QekfParams) -> np.ndarray:
    sx, sy, sz, q2, p2 = np.asarray(x, dtype=float)
    k1, k2, a = params.k1, params.k2, params.alpha
    return np.array([
        [-k1 / 2, -2 * q2 / a, 0, -2 * sy / a, 0],
        [2 * q2 / a, -k1 / 2, 0, 2 * sx / a, 0],
        [0, 0, -k1, 0, 0],
        [0, 0, 0, -k2 / 2, 0],
        [0, 0, -1 / (2 * a), 0, -k2 / 2],
    ])


def measurement_h(x, params: QekfParams) -> float:
    return math.sqrt(params.k1) * float(x[0])


def measurement_H(params: QekfParams) -> np.ndarray:
    return np.array([math.sqrt(params.k1), 0.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class CovarianceTerms:
    Q_raw: np.ndarray
    R: float
    S: np.ndarray
    S_printed: np.ndarray
    S_derived: np.ndarray
    Q_hat: np.ndarray
    psd_margin: float

    @property
    def constraint_satisfied(self) -> bool:
        """Whether ``Q_raw - S R^-1 S^T`` is positive semidefinite."""
        return self.psd_margin >= -DEFAULT_TOL.psd


def covariance_terms(x, params: QekfParams) -> CovarianceTerms:
    """Noise covariances evaluated at the estimate ``x``.

    ``Q_raw`` is the state-dependent covariance as printed (exposed only as a
    diagnostic; its signs are not PSD-consistent). ``S_derived`` follows from
    the symmetrized increment products of the state and measurement noise.
    ``psd_margin`` is the smallest eigenvalue of ``Q_raw - S S^T / R``.
    """
    sx, sy, sz, q2, p2 = np.asarray(x, dtype=float)
    k1, k2 = params.k1, params.k2
    sk1 = math.sqrt(k1)
    Q_raw = np.array([
        [k1 * sz**2, 0, k1 * sx, 0, 0],
        [0, k1 * sz**2, k1 * sy, 0, 0],
        [k1 * sx, k1 * sy, 0.5 * k1 * (sx**2 + sy**2 + 2 * sz), 0, 0],
        [0, 0, 0, -k2 / 4, 0],
        [0, 0, 0, 0, -k2 / 4],
    ])
    R = 1.0
    S_printed = np.array([k1 * sz, 0.0, -sk1 * sx, 0.0, 0.0])
    S_derived = np.array([sk1 * sz, 0.0, -sk1 * sx, 0.0, 0.0])
    S = S_printed if params.s_matrix == "paper" else S_derived
    Q_hat = params.mu * np.eye(5) + np.outer(S, S) / R
    margin = float(np.linalg.eigvalsh(Q_raw - np.outer(S, S) / R)[0])
    return CovarianceTerms(Q_raw, R, S, S_printed, S_derived, Q_hat, margin)


def qekf_step(state: QekfState, dY: float, dt: float, params: QekfParams,
              tol: Tolerances = DEFAULT_TOL, backend: str | None = None) -> QekfState:
    """One explicit-Euler step of the estimate and the Riccati equation.

    ``K = P H^T + S`` (``R = 1``),
    ``P' = P + (F P + P F^T + Q_hat + lam P^2 - K K^T) dt`` (symmetrized),
    ``x' = x + f(x) dt + K (dY - h(x) dt)``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    xs, Ps, _, _ = _core.get_backend(backend).integrate_qekf(
        state.x_hat, state.P, np.array([dY], float), dt, params.k1, params.k2, params.alpha,
        params.lam, params.mu, params.s_matrix == "paper", 1, tol.psd,
    )
    return replace(state, x_hat=xs[1], P=Ps[1], t=state.t + dt)


def initial_state(bloch, beta: complex) -> QekfState:
    """Estimate and covariance matching a product of a qubit state and a coherent state.

    ``P`` holds the symmetrized variances of the five observables: ``1 - <s_i>^2``
    for the Pauli components and ``1/4`` for both cavity quadratures. Cross terms
    are dropped.
    """
    bloch = np.asarray(bloch, dtype=float)
    beta = complex(beta)
    x0 = np.array([*bloch, beta.real, beta.imag])
    P0 = np.diag([*(1.0 - bloch**2), 0.25, 0.25])
    return QekfState(x0, P0)


@dataclass
class QekfResult:
    times: np.ndarray
    x_hat: np.ndarray
    P: np.ndarray
    K: np.ndarray
    innovations: np.ndarray
    alpha: float
    wall_time: float

    @property
    def q_hat(self) -> np.ndarray:
        """Disturbance estimate ``q2_hat / alpha``."""
        return self.x_hat[:, 3] / self.alpha

    @property
    def P_trace(self) -> np.ndarray:
        return np.trace(self.P, axis1=1, axis2=2)


def run_qekf(record: MeasurementRecord, params: QekfParams, state0: QekfState, *,
             stride: int = 1, tol: Tolerances = DEFAULT_TOL, backend: str | None = None) -> QekfResult:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    kernel = _core.get_backend(backend)
    t0 = time.perf_counter()
    xs, Ps, Ks, innov = kernel.integrate_qekf(
        state0.x_hat, state0.P, record.increments, record.dt, params.k1, params.k2,
        params.alpha, params.lam, params.mu, params.s_matrix == "paper", stride, tol.psd,
    )
    wall = time.perf_counter() - t0
    return QekfResult(
        times=np.arange(xs.shape[0]) * stride * record.dt,
        x_hat=xs, P=Ps, K=Ks, innovations=innov, alpha=params.alpha, wall_time=wall,
    )


def write_qekf_csv(result: QekfResult, path) -> Path:
    """Write ``t, sx_hat, sy_hat, sz_hat, q2_hat, p2_hat, P_trace, K_1..K_5``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sx_hat", "sy_hat", "sz_hat", "q2_hat", "p2_hat", "P_trace",
                    "K_1", "K_2", "K_3", "K_4", "K_5"])
        for k, t in enumerate(result.times):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in result.x_hat[k]),
                        repr(float(result.P_trace[k])), *(repr(float(v)) for v in result.K[k])])
    return path
