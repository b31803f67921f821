"""Finite-dimensional operator algebra for the qubit and the truncated cavity.

Operators are plain ``numpy`` complex arrays. Tensor products always place the
qubit factor first and the cavity factor second.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

__all__ = [
    "Tolerances",
    "FockTruncation",
    "DimensionError",
    "DensityMatrixError",
    "TruncationError",
    "pauli",
    "identity",
    "annihilation",
    "tensor",
    "commutator",
    "lindblad",
    "lindblad_state",
    "dissipator",
    "coherent_state",
    "coherent_leakage",
    "minimal_cutoff",
    "is_hermitian",
    "check_density_matrix",
    "project_density_matrix",
    "trace_distance",
    "dag",
]


class DimensionError(ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class DensityMatrixError(ValueError):
    """A matrix violates the density-matrix invariants."""


class TruncationError(ValueError):
    """A Fock cutoff is too small for the requested state."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances for density-matrix checks.

    ``proj`` bounds how much a single projection step may change a state
    before the integrator is considered to have failed.
    """

    herm: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-8
    proj: float = 2e-2


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class FockTruncation:
    """Number of retained Fock levels ``n'`` of a cavity mode."""

    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"Fock cutoff must be an integer >= 2, got {self.cutoff!r}")


_PAULI = {
    "x": [[0, 1], [1, 0]],
    "y": [[0, -1j], [1j, 0]],
    "z": [[1, 0], [0, -1]],
    "plus": [[0, 1], [0, 0]],
    "minus": [[0, 0], [1, 0]],
}


def pauli(which: str) -> np.ndarray:
    """Return a 2x2 Pauli or ladder matrix.

    ``which`` is one of ``x``, ``y``, ``z``, ``plus`` (sigma_+) or ``minus``
    (sigma_-). sigma_- maps the sigma_z = +1 state onto the sigma_z = -1 state.
    """
    try:
        return np.array(_PAULI[which], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown Pauli operator {which!r}") from None


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def _cutoff(trunc) -> int:
    if isinstance(trunc, FockTruncation):
        return trunc.cutoff
    return FockTruncation(int(trunc)).cutoff


def annihilation(trunc) -> np.ndarray:
    """Annihilation operator on ``n'`` Fock levels, ``a[m, m+1] = sqrt(m+1)``.

    Only ``[a, a^dagger]`` restricted to the first ``n' - 1`` levels equals the
    identity; the last diagonal entry carries the truncation error.
    """
    n = _cutoff(trunc)
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def dag(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product, leftmost factor outermost (qubit before cavity)."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    return reduce(np.kron, (np.asarray(op, dtype=complex) for op in ops))


def _check_same_dim(*ops):
    shapes = {np.shape(op) for op in ops}
    if len(shapes) != 1:
        raise DimensionError(f"operator shapes differ: {sorted(shapes)}")
    (shape,) = shapes
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionError(f"operators must be square, got shape {shape}")


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    _check_same_dim(A, B)
    return A @ B - B @ A


def lindblad(L: np.ndarray, H: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Heisenberg-picture generator ``i[H,X] + L*XL - (L*LX + XL*L)/2``."""
    _check_same_dim(L, H, X)
    Ld = dag(L)
    LdL = Ld @ L
    return 1j * (H @ X - X @ H) + Ld @ X @ L - 0.5 * (LdL @ X + X @ LdL)


def dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``D[L]rho = L rho L* - {L*L, rho}/2``."""
    _check_same_dim(L, rho)
    Ld = dag(L)
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def lindblad_state(L: np.ndarray, H: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Schroedinger-picture generator ``-i[H,rho] + D[L]rho``, adjoint of :func:`lindblad`."""
    _check_same_dim(L, H, rho)
    return -1j * (H @ rho - rho @ H) + dissipator(L, rho)


def coherent_leakage(beta: complex, cutoff: int) -> float:
    """Probability mass of ``|beta>`` beyond the first ``cutoff`` Fock levels."""
    r2 = abs(beta) ** 2
    kept = math.exp(-r2) * sum(r2**n / math.factorial(n) for n in range(cutoff))
    return max(0.0, 1.0 - kept)


def minimal_cutoff(beta: complex, eps: float = 1e-6) -> int:
    n = 2
    while coherent_leakage(beta, n) > eps:
        n += 1
    return n


def coherent_state(beta: complex, trunc, eps: float = 1e-6) -> np.ndarray:
    """Density matrix of the coherent state ``|beta>`` on a truncated Fock space.

    The number-basis expansion is cut after ``n'`` terms and renormalized.

    Raises
    ------
    TruncationError
        If the discarded probability exceeds ``eps``.
    """
    n = _cutoff(trunc)
    leak = coherent_leakage(beta, n)
    if leak > eps:
        raise TruncationError(
            f"coherent state beta={beta} leaks {leak:.3g} > {eps:g} beyond n'={n}; "
            f"use n' >= {minimal_cutoff(beta, eps)}"
        )
    k = np.arange(n)
    log_fact = np.array([math.lgamma(m + 1) for m in k])
    amp = np.exp(-0.5 * abs(beta) ** 2 - 0.5 * log_fact) * np.power(complex(beta), k)
    amp = amp / np.linalg.norm(amp)
    return np.outer(amp, amp.conj())


def is_hermitian(A: np.ndarray, tol: float = DEFAULT_TOL.herm) -> bool:
    return bool(np.max(np.abs(A - dag(A)), initial=0.0) <= tol)


def check_density_matrix(rho: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Validate ``rho`` and return it unchanged.

    Raises
    ------
    DensityMatrixError
        On a non-square shape, Hermiticity or trace defect, or an eigenvalue
        below ``-tol.psd``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityMatrixError(f"density matrix must be square, got {rho.shape}")
    herm_err = np.max(np.abs(rho - dag(rho)))
    if herm_err > tol.herm:
        raise DensityMatrixError(f"not Hermitian: max|rho - rho*| = {herm_err:.3g}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol.trace:
        raise DensityMatrixError(f"trace {tr!r} differs from 1")
    min_eig = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0]
    if min_eig < -tol.psd:
        raise DensityMatrixError(f"minimum eigenvalue {min_eig:.3g} < -{tol.psd:g}")
    return rho


def project_density_matrix(rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Hermitize, clip negative eigenvalues and renormalize the trace.

    Returns the projected state and the size of the correction (sum of the
    clipped eigenvalue magnitudes plus the trace defect).
    """
    rho = 0.5 * (rho + dag(rho))
    w, v = np.linalg.eigh(rho)
    neg = -w[w < 0].sum()
    w = np.clip(w, 0.0, None)
    tr = w.sum()
    out = (v * (w / tr)) @ dag(v)
    return out, float(neg + abs(np.trace(rho).real - 1.0))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``||rho - sigma||_1 / 2``."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + dag(diff)))).sum())
