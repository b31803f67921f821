"""Ground-truth simulation of the hybrid qubit under homodyne monitoring.

Each trajectory samples an Ornstein-Uhlenbeck path ``q`` and propagates the
conditional qubit state with Hamiltonian ``q(t) sigma_z`` and coupling
``sqrt(k1) sigma_-``, emitting the measurement increments ``dY``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _core
from .model import OUProcess, QubitParams
from .operators import DEFAULT_TOL, Tolerances, check_density_matrix, dag, pauli

__all__ = [
    "MeasurementRecord",
    "TruthTrajectory",
    "trajectory_rngs",
    "n_steps",
    "sample_ou",
    "simulate_truth",
    "write_truth_csv",
    "read_record_csv",
]

MEASUREMENT_STREAM = 0
DISTURBANCE_STREAM = 1


def trajectory_rngs(master_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (measurement, disturbance) generators for one trajectory.

    Both depend only on ``(master_seed, index, stream tag)``, so ensembles are
    reproducible regardless of how trajectories are scheduled.
    """
    return tuple(
        np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index, tag)))
        for tag in (MEASUREMENT_STREAM, DISTURBANCE_STREAM)
    )


def n_steps(dt: float, T: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if T < dt:
        raise ValueError(f"horizon T={T!r} is shorter than dt={dt!r}")
    return int(round(T / dt))


@dataclass(frozen=True)
class MeasurementRecord:
    """Homodyne increments ``dY_n`` over consecutive steps of length ``dt``."""

    dt: float
    increments: np.ndarray
    seed: object = None

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 1:
            raise ValueError("increments must be one-dimensional")
        if not np.all(np.isfinite(inc)):
            raise ValueError("measurement record contains non-finite increments")
        object.__setattr__(self, "increments", inc)

    def __len__(self):
        return self.increments.shape[0]

    @property
    def horizon(self) -> float:
        return len(self) * self.dt

    @property
    def times(self) -> np.ndarray:
        """Start time of each increment."""
        return np.arange(len(self)) * self.dt

    def save(self, path):
        np.savez(path, dt=self.dt, increments=self.increments, seed=str(self.seed))

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            seed = str(data["seed"])
            return cls(float(data["dt"]), data["increments"], None if seed == "None" else seed)


@dataclass(frozen=True)
class TruthTrajectory:
    """One simulated trajectory.

    ``q_path`` and ``rho_path`` hold the grid values at ``t_n = n dt`` for
    ``n = 0..N`` (one more than the number of increments).
    """

    q_path: np.ndarray
    rho_path: np.ndarray
    record: MeasurementRecord

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.q_path.shape[0]) * self.record.dt

    def bloch(self) -> np.ndarray:
        """``(N+1, 3)`` array of ``Tr[sigma_i rho]``."""
        return np.stack(
            [np.einsum("ij,nji->n", pauli(w), self.rho_path).real for w in "xyz"], axis=1
        )


def sample_ou(ou: OUProcess, dt: float, T: float, rng: np.random.Generator) -> np.ndarray:
    """Euler-Maruyama path ``q_{n+1} = q_n - u q_n dt - v sqrt(dt) xi_n`` on ``N+1`` grid points."""
    n = n_steps(dt, T)
    xi = rng.standard_normal(n)
    q = np.empty(n + 1)
    q[0] = ou.q0
    decay = 1.0 - ou.u * dt
    kick = ou.v * math.sqrt(dt)
    for i in range(n):
        q[i + 1] = decay * q[i] - kick * xi[i]
    return q


def simulate_truth(
    qubit: QubitParams,
    ou: OUProcess,
    rho0: np.ndarray,
    dt: float,
    T: float,
    rng=None,
    *,
    seed: int = 0,
    index: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    disturbance: np.ndarray | None = None,
) -> TruthTrajectory:
    """Simulate one conditional qubit trajectory and its measurement record.

    Parameters
    ----------
    qubit : QubitParams or float
        Coupling rate. A bare float may be 0 (decoupled qubit, unmonitored
        state, pure-noise record).
    rng : tuple of Generator, optional
        ``(measurement_rng, disturbance_rng)``. Derived from ``(seed, index)``
        via :func:`trajectory_rngs` when omitted.
    disturbance : ndarray, optional
        Pre-sampled ``q`` path of length ``N+1``; overrides OU sampling.
    """
    rho0 = check_density_matrix(rho0, tol)
    if rho0.shape != (2, 2):
        raise ValueError("the truth simulator evolves a single qubit")
    n = n_steps(dt, T)
    meas_rng, dist_rng = rng if rng is not None else trajectory_rngs(seed, index)
    q = sample_ou(ou, dt, T, dist_rng) if disturbance is None else np.asarray(disturbance, float)
    if q.shape != (n + 1,):
        raise ValueError(f"disturbance path must have {n + 1} samples, got {q.shape}")
    dW = meas_rng.normal(0.0, math.sqrt(dt), n)

    k1 = qubit.k1 if isinstance(qubit, QubitParams) else float(qubit)
    if not k1 >= 0:
        raise ValueError(f"coupling rate must be >= 0, got {k1!r}")
    L = math.sqrt(k1) * pauli("minus")
    G = -0.5 * dag(L) @ L
    rho_path, dY, _, _ = _core.integrate_sme(
        rho0, G.astype(complex), pauli("z"), q[:-1], np.array([L]), L, dW, dt, True, 1, tol.psd, tol.proj
    )
    seed_id = f"{seed}:{index}" if rng is None else None
    return TruthTrajectory(q_path=q, rho_path=rho_path, record=MeasurementRecord(dt, dY, seed_id))


def write_truth_csv(traj: TruthTrajectory, path) -> Path:
    """Write ``step, t, dY, q_true, sx_true, sy_true, sz_true``.

    Row ``n`` holds the state at ``t_n`` and the increment over ``[t_n, t_n + dt)``.
    """
    path = Path(path)
    bloch = traj.bloch()
    dt = traj.record.dt
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "dY", "q_true", "sx_true", "sy_true", "sz_true"])
        for n, dy in enumerate(traj.record.increments):
            w.writerow([n, repr(n * dt), repr(float(dy)), repr(float(traj.q_path[n])),
                        *(repr(float(b)) for b in bloch[n])])
    return path


def read_record_csv(path, dt: float | None = None) -> MeasurementRecord:
    """Rebuild a :class:`MeasurementRecord` from a truth CSV (``dY`` column)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "dY" not in rows[0]:
        raise ValueError(f"{path}: no dY column")
    if dt is None:
        if len(rows) < 2:
            raise ValueError("cannot infer dt from a single-row record; pass dt")
        # drop the rounding noise of the difference (1e-3 would come back as 0.0010000000000000002)
        dt = float(f"{float(rows[1]['t']) - float(rows[0]['t']):.12g}")
    return MeasurementRecord(dt, np.array([float(r["dY"]) for r in rows]), seed=str(path))
