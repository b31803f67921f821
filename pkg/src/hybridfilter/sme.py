"""Stochastic master equation filter on the enlarged qubit-cavity system.

The filter state is the conditional density matrix of qubit (x) cavity. Only
the qubit channel (channel 0) is measured; the cavity channel contributes
dissipation alone.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from . import _core
from .model import CavityAnalog, SLHModel
from .operators import (
    DEFAULT_TOL,
    DimensionError,
    Tolerances,
    check_density_matrix,
    dag,
    identity,
    pauli,
    tensor,
)
from .truth import MeasurementRecord

__all__ = [
    "SmeFilterState",
    "SmeResult",
    "sme_step",
    "literal_sme_step",
    "expectation",
    "estimate_q",
    "qubit_observables",
    "run_sme",
    "unconditional_evolution",
    "partial_trace_cavity",
    "write_sme_csv",
]


@dataclass(frozen=True)
class SmeFilterState:
    rho_hat: np.ndarray
    model: SLHModel
    measured_channel: int = 0
    t: float = 0.0

    def __post_init__(self):
        if not 0 <= self.measured_channel < self.model.channels:
            raise ValueError(
                f"measured channel {self.measured_channel} not in a {self.model.channels}-channel model"
            )
        if np.shape(self.rho_hat) != (self.model.dim, self.model.dim):
            raise DimensionError(f"state shape {np.shape(self.rho_hat)} does not match model dim {self.model.dim}")


def _effective_generator(model: SLHModel) -> np.ndarray:
    """``-iH - sum_k L_k* L_k / 2``."""
    return -1j * model.H - 0.5 * sum((dag(L) @ L for L in model.L), np.zeros_like(model.H))


def _jumps(model: SLHModel) -> np.ndarray:
    if not model.L:
        return np.zeros((0, model.dim, model.dim), complex)
    return np.array(model.L)


def sme_step(
    state: SmeFilterState, dY: float, dt: float, tol: Tolerances = DEFAULT_TOL, backend: str | None = None
) -> SmeFilterState:
    """Advance the filter by one Euler-Maruyama step and project the result.

    The update is

        rho + (-i[H,rho] + sum_k D[L_k]rho) dt
            + (L rho + rho L* - <L + L*> rho) (dY - <L + L*> dt)

    with ``L`` the measured channel, followed by Hermitization, clipping of
    eigenvalues below ``-tol.psd`` and trace renormalization.

    Raises
    ------
    IntegrationError
        If the projection has to move the state by more than ``tol.proj``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not np.isfinite(dY):
        raise ValueError(f"non-finite measurement increment {dY!r}")
    model = state.model
    snaps, _, _, _ = _core.get_backend(backend).integrate_sme(
        state.rho_hat, _effective_generator(model), np.zeros_like(model.H), np.empty(0),
        _jumps(model), model.L[state.measured_channel], np.array([dY], float), dt, False, 1,
        tol.psd, tol.proj,
    )
    return replace(state, rho_hat=snaps[1], t=state.t + dt)


def literal_sme_step(rho, dY, dt, k1, k2, alpha, a):
    """One step of the filter exactly as printed in the source derivation.

    Kept for comparison only: it couples the qubit through ``sqrt(k1) sigma_z``
    and uses ``k2 a rho a`` in place of ``k2 a rho a*``. No projection.
    """
    n = a.shape[0]
    sz = tensor(pauli("z"), identity(n))
    A = tensor(identity(2), a)
    Ad = dag(A)
    Hc = tensor(pauli("z"), a + dag(a)) / (2 * alpha)
    L = np.sqrt(k1) * sz
    dW = dY - np.trace((L + dag(L)) @ rho).real * dt
    drift = (
        1j * (rho @ Hc - Hc @ rho)
        + k1 * sz @ rho @ sz
        - k1 * rho
        + k2 * A @ rho @ A
        - 0.5 * k2 * rho @ Ad @ A
        - 0.5 * k2 * Ad @ A @ rho
    )
    sk1 = np.sqrt(k1)
    noise = rho @ (sk1 * sz) + sk1 * sz @ rho - 2 * sk1 * np.trace(sz @ rho).real * rho
    return rho + drift * dt - noise * dW


def expectation(state, X: np.ndarray, tol: float = DEFAULT_TOL.herm):
    """``Tr[rho X]``; real for Hermitian ``X`` (imaginary residue checked and dropped)."""
    rho = state.rho_hat if isinstance(state, SmeFilterState) else np.asarray(state)
    if np.shape(X) != rho.shape:
        raise DimensionError(f"observable shape {np.shape(X)} does not match state {rho.shape}")
    val = np.trace(rho @ X)
    if np.allclose(X, dag(X), atol=tol, rtol=0):
        if abs(val.imag) > tol:
            raise ValueError(f"expectation of a Hermitian operator has imaginary part {val.imag:.3g}")
        return float(val.real)
    return complex(val)


def estimate_q(state, analog: CavityAnalog) -> float:
    """Disturbance estimate ``Tr[rho (I (x) (a + a*)/(2 alpha))]``."""
    return expectation(state, tensor(identity(2), analog.disturbance()))


def qubit_observables(analog: CavityAnalog) -> dict:
    """Observables reported by the filter, lifted to the enlarged space."""
    I2, In = identity(2), identity(analog.dim)
    return {
        "sx": tensor(pauli("x"), In),
        "sy": tensor(pauli("y"), In),
        "sz": tensor(pauli("z"), In),
        "q": tensor(I2, analog.disturbance()),
        "q2": tensor(I2, analog.quadrature()),
        "p2": tensor(I2, analog.momentum()),
    }


def partial_trace_cavity(rho: np.ndarray, n_cavity: int) -> np.ndarray:
    """Reduced qubit state(s); works on a single matrix or a stack."""
    rho = np.asarray(rho)
    lead = rho.shape[:-2]
    r = rho.reshape(*lead, 2, n_cavity, 2, n_cavity)
    return np.einsum("...iaja->...ij", r)


@dataclass
class SmeResult:
    """Filter output on the grid ``t_k = k * stride * dt``."""

    times: np.ndarray
    rho: np.ndarray
    estimates: dict
    trace_err: np.ndarray
    min_eig: np.ndarray
    max_projection: float
    n_clipped: int
    wall_time: float


def run_sme(
    record: MeasurementRecord,
    model: SLHModel,
    rho0: np.ndarray,
    analog: CavityAnalog | None = None,
    *,
    stride: int = 1,
    measured_channel: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    observables: dict | None = None,
    backend: str | None = None,
) -> SmeResult:
    """Fold the SME over ``record`` and report estimates every ``stride`` steps.

    Estimates default to :func:`qubit_observables` of ``analog``; ``rho0`` is
    validated before the run.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rho0 = check_density_matrix(rho0, tol)
    if rho0.shape != (model.dim, model.dim):
        raise DimensionError(f"initial state shape {rho0.shape} does not match model dim {model.dim}")
    if observables is None:
        observables = qubit_observables(analog) if analog is not None else {}
    kernel = _core.get_backend(backend)
    G = _effective_generator(model)
    jumps = _jumps(model)
    Lm = model.L[measured_channel]
    t0 = time.perf_counter()
    snaps, _, max_change, n_clipped = kernel.integrate_sme(
        rho0, G, np.zeros_like(G), np.empty(0), jumps, Lm, record.increments,
        record.dt, False, stride, tol.psd, tol.proj,
    )
    wall = time.perf_counter() - t0
    estimates = {
        name: np.einsum("ij,nji->n", X, snaps).real for name, X in observables.items()
    }
    return SmeResult(
        times=np.arange(snaps.shape[0]) * stride * record.dt,
        rho=snaps,
        estimates=estimates,
        trace_err=np.abs(np.trace(snaps, axis1=1, axis2=2).real - 1.0),
        min_eig=np.linalg.eigvalsh(snaps)[:, 0],
        max_projection=max_change,
        n_clipped=n_clipped,
        wall_time=wall,
    )


def unconditional_evolution(model: SLHModel, rho0: np.ndarray, times) -> np.ndarray:
    """Exact master-equation solution ``exp(t L) rho0`` at each of ``times``."""
    d = model.dim
    sup = model.liouvillian()
    return np.array([(expm(sup * t) @ np.ravel(rho0)).reshape(d, d) for t in times])


def write_sme_csv(result: SmeResult, path) -> Path:
    """Write ``t, sx_hat, sy_hat, sz_hat, q_hat, trace_err, min_eig``."""
    path = Path(path)
    est = result.estimates
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sx_hat", "sy_hat", "sz_hat", "q_hat", "trace_err", "min_eig"])
        for k, t in enumerate(result.times):
            w.writerow([repr(float(t)), *(repr(float(est[c][k])) for c in ("sx", "sy", "sz", "q")),
                        repr(float(result.trace_err[k])), repr(float(result.min_eig[k]))])
    return path
