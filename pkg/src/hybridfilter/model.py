"""Hybrid qubit / classical-disturbance model and its cavity analog.

The classical disturbance is an Ornstein-Uhlenbeck process

    dq = -u q dt - v dw,

which enters the qubit Hamiltonian as ``q sigma_z``. A damped cavity with
coupling ``k = 2u`` and scaling ``alpha = sqrt(2u) / (2v)`` reproduces the mean
of ``q`` through the quadrature ``(a + a*) / (2 alpha)``; concatenating it with
the qubit gives the enlarged system the filters run on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import (
    DEFAULT_TOL,
    DimensionError,
    FockTruncation,
    annihilation,
    dag,
    identity,
    is_hermitian,
    pauli,
    tensor,
)

__all__ = [
    "OUProcess",
    "QubitParams",
    "CavityAnalog",
    "SLHModel",
    "analog_cavity",
    "build_qubit",
    "build_cavity",
    "concatenate",
    "interaction_hamiltonian",
    "enlarged_system",
]


@dataclass(frozen=True)
class OUProcess:
    """Ornstein-Uhlenbeck disturbance ``dq = -u q dt - v dw`` started at ``q0``."""

    u: float
    v: float
    q0: float = 0.0

    def __post_init__(self):
        if not self.u > 0:
            raise ValueError(f"OU decay rate u must be positive, got {self.u!r}")
        if not math.isfinite(self.v):
            raise ValueError(f"OU noise gain v must be finite, got {self.v!r}")

    def mean(self, t):
        return self.q0 * np.exp(-self.u * np.asarray(t, dtype=float))

    def variance(self, t):
        t = np.asarray(t, dtype=float)
        return self.v**2 / (2 * self.u) * (1 - np.exp(-2 * self.u * t))


@dataclass(frozen=True)
class QubitParams:
    k1: float

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"qubit coupling k1 must be positive, got {self.k1!r}")


@dataclass(frozen=True)
class CavityAnalog:
    """Cavity standing in for an OU process.

    ``k`` is the cavity damping rate and ``alpha`` rescales the quadrature so
    that ``q = (a + a*) / (2 alpha)``.
    """

    k: float
    alpha: float
    trunc: FockTruncation

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"cavity coupling k must be positive, got {self.k!r}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha!r}")

    @property
    def u(self) -> float:
        return self.k / 2

    @property
    def v(self) -> float:
        return math.sqrt(2 * self.u) / (2 * self.alpha)

    @property
    def dim(self) -> int:
        return self.trunc.cutoff

    def annihilation(self) -> np.ndarray:
        return annihilation(self.trunc)

    def quadrature(self) -> np.ndarray:
        """``q2 = (a + a*)/2`` on the cavity space."""
        a = self.annihilation()
        return 0.5 * (a + dag(a))

    def momentum(self) -> np.ndarray:
        """``p2 = (a - a*)/(2i)`` on the cavity space."""
        a = self.annihilation()
        return (a - dag(a)) / 2j

    def disturbance(self) -> np.ndarray:
        """Analog of the classical disturbance, ``(a + a*)/(2 alpha)``."""
        return self.quadrature() / self.alpha


def analog_cavity(ou: OUProcess, trunc) -> CavityAnalog:
    """Cavity analog of ``ou``: ``k = 2u`` and ``alpha = sqrt(2u)/(2v)``.

    The sign of ``v`` is irrelevant to the analog (the driving noise is
    symmetric), so ``|v|`` is used.
    """
    if ou.v == 0:
        raise ValueError("v = 0 has no cavity analog: the disturbance is a deterministic decay")
    if not isinstance(trunc, FockTruncation):
        trunc = FockTruncation(int(trunc))
    # sqrt(u / (2 v^2)) == sqrt(2u) / (2|v|), with less rounding
    return CavityAnalog(k=2 * ou.u, alpha=math.sqrt(ou.u / (2 * ou.v * ou.v)), trunc=trunc)


@dataclass(frozen=True)
class SLHModel:
    """Open system ``(S, L, H)`` with identity scattering.

    ``drive`` is an optional Hermitian operator multiplied by an external
    classical signal ``q`` so that the full Hamiltonian is ``H + q * drive``.
    """

    L: tuple
    H: np.ndarray
    drive: np.ndarray | None = None
    S: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        dim = H.shape[0]
        L = tuple(np.asarray(op, dtype=complex) for op in self.L)
        for op in (H, *L) + (() if self.drive is None else (self.drive,)):
            if np.shape(op) != (dim, dim):
                raise DimensionError(f"operator of shape {np.shape(op)} on a {dim}-dim model")
        if not is_hermitian(H, DEFAULT_TOL.herm):
            raise ValueError("Hamiltonian is not Hermitian")
        if self.drive is not None and not is_hermitian(self.drive, DEFAULT_TOL.herm):
            raise ValueError("drive operator is not Hermitian")
        S = identity(len(L)) if self.S is None else np.asarray(self.S, dtype=complex)
        if not np.allclose(S, np.eye(len(L))):
            raise ValueError("only identity scattering is supported")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "S", S)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def channels(self) -> int:
        return len(self.L)

    def hamiltonian(self, q: float = 0.0) -> np.ndarray:
        if self.drive is None:
            return self.H
        return self.H + q * self.drive

    def generator(self, rho: np.ndarray, q: float = 0.0) -> np.ndarray:
        """Master-equation right-hand side summed over every channel."""
        H = self.hamiltonian(q)
        out = -1j * (H @ rho - rho @ H)
        for L in self.L:
            Ld = dag(L)
            out += L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L)
        return out

    def liouvillian(self, q: float = 0.0) -> np.ndarray:
        """Superoperator matrix acting on row-major ``rho.ravel()``."""
        d = self.dim
        eye = np.eye(d)
        H = self.hamiltonian(q)
        sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
        for L in self.L:
            LdL = dag(L) @ L
            sup += np.kron(L, L.conj()) - 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
        return sup


def build_qubit(k1: float, disturbance_op: np.ndarray | None = None) -> SLHModel:
    """Qubit ``(I, sqrt(k1) sigma_-, q * disturbance_op)``; ``disturbance_op`` defaults to sigma_z."""
    QubitParams(k1)
    drive = pauli("z") if disturbance_op is None else np.asarray(disturbance_op, dtype=complex)
    return SLHModel(L=(math.sqrt(k1) * pauli("minus"),), H=np.zeros((2, 2), complex), drive=drive)


def build_cavity(analog: CavityAnalog) -> SLHModel:
    """Resonant damped cavity ``(I, sqrt(k) a, 0)``."""
    a = analog.annihilation()
    return SLHModel(L=(math.sqrt(analog.k) * a,), H=np.zeros_like(a))


def interaction_hamiltonian(analog: CavityAnalog, qubit_op: np.ndarray | None = None) -> np.ndarray:
    """``qubit_op (x) (a + a*)/(2 alpha)``: the classical ``q`` replaced by its analog."""
    qubit_op = pauli("z") if qubit_op is None else qubit_op
    return tensor(qubit_op, analog.disturbance())


def concatenate(G1: SLHModel, G2: SLHModel, H_int: np.ndarray | None = None) -> SLHModel:
    """Concatenation product of two SLH models on ``G1 (x) G2``.

    Coupling operators are stacked (G1's first) and Hamiltonians summed. The
    parametric ``drive`` of ``G1`` is dropped; pass the coupling it stands
    for as ``H_int``.
    """
    I1, I2 = identity(G1.dim), identity(G2.dim)
    L = tuple(tensor(op, I2) for op in G1.L) + tuple(tensor(I1, op) for op in G2.L)
    H = tensor(G1.H, I2) + tensor(I1, G2.H)
    if H_int is not None:
        if np.shape(H_int) != H.shape:
            raise DimensionError(f"H_int has shape {np.shape(H_int)}, expected {H.shape}")
        H = H + H_int
    return SLHModel(L=L, H=H)


def enlarged_system(qubit: QubitParams, analog: CavityAnalog) -> SLHModel:
    """Qubit-cavity system standing in for the hybrid qubit + OU model."""
    G1 = build_qubit(qubit.k1)
    G2 = build_cavity(analog)
    return concatenate(G1, G2, interaction_hamiltonian(analog, G1.drive))
