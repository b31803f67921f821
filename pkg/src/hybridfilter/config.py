"""Experiment configuration as flat ``key = value`` text.

Lines starting with ``#`` and trailing ``# ...`` comments are ignored, so the
written form can carry units next to each value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .model import OUProcess, QubitParams, analog_cavity, enlarged_system
from .operators import FockTruncation, coherent_state, tensor

__all__ = ["ExperimentConfig", "ConfigError", "reference_config"]


class ConfigError(ValueError):
    pass


_UNITS = {
    "k1": "qubit coupling rate [1/time]",
    "u": "OU decay rate [1/time]",
    "v": "OU noise gain [1/sqrt(time)]",
    "q0": "initial disturbance [dimensionless]",
    "rho1": "qubit initial Bloch vector x,y,z",
    "beta": "cavity coherent amplitude; 'auto' = q0*alpha",
    "n_prime": "Fock levels kept for the cavity",
    "dt": "integration step [time]",
    "T": "horizon [time]",
    "N": "number of trajectories",
    "lam": "QEKF Riccati inflation (>= 0)",
    "mu": "QEKF noise floor (> 0)",
    "s_matrix": "QEKF cross-correlation: derived | paper",
    "seed": "master seed",
    "stride": "output every stride steps",
    "workers": "parallel worker processes",
    "bench_n_primes": "cavity cutoffs for the timing sweep; empty disables",
    "bench_repeats": "timed passes per cutoff (after one warm-up)",
    "out": "output directory",
}


@dataclass(frozen=True)
class ExperimentConfig:
    k1: float = 0.55
    u: float = 0.25
    v: float = 1 / (2 * math.sqrt(2))
    q0: float = 0.25
    rho1: tuple = (1.0, 0.0, 0.0)
    beta: complex | None = None
    n_prime: int = 8
    dt: float = 1e-3
    T: float = 20.0
    N: int = 20
    lam: float = 0.0
    mu: float = 0.01
    s_matrix: str = "derived"
    seed: int = 1
    stride: int = 10
    workers: int = 1
    bench_n_primes: tuple = (2, 3, 4, 5, 6)
    bench_repeats: int = 5
    out: str = "runs/reference"

    def __post_init__(self):
        for name in ("k1", "u", "mu"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if not 0 < self.dt < self.T:
            raise ConfigError("need 0 < dt < T")
        if self.n_prime < 2 or any(n < 2 for n in self.bench_n_primes):
            raise ConfigError("Fock cutoffs must be >= 2")
        if self.stride < 1 or self.workers < 1 or self.bench_repeats < 1:
            raise ConfigError("stride, workers and bench_repeats must be >= 1")
        if self.s_matrix not in ("derived", "paper"):
            raise ConfigError("s_matrix must be 'derived' or 'paper'")
        if len(self.rho1) != 3 or np.linalg.norm(self.rho1) > 1 + 1e-12:
            raise ConfigError("rho1 must be a Bloch vector of length <= 1")

    # derived objects -------------------------------------------------------

    @property
    def ou(self) -> OUProcess:
        return OUProcess(self.u, self.v, self.q0)

    @property
    def qubit(self) -> QubitParams:
        return QubitParams(self.k1)

    def analog(self, n_prime: int | None = None):
        return analog_cavity(self.ou, FockTruncation(n_prime or self.n_prime))

    @property
    def coherent_amplitude(self) -> complex:
        if self.beta is not None:
            return complex(self.beta)
        return complex(self.q0 * self.analog().alpha)

    def qubit_state(self) -> np.ndarray:
        x, y, z = self.rho1
        return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])

    def enlarged_model(self, n_prime: int | None = None):
        return enlarged_system(self.qubit, self.analog(n_prime))

    def enlarged_state(self, n_prime: int | None = None, eps: float = 1e-6) -> np.ndarray:
        """Product initial state; ``eps`` bounds the coherent-state truncation leakage."""
        n = n_prime or self.n_prime
        return tensor(self.qubit_state(), coherent_state(self.coherent_amplitude, n, eps=eps))

    # serialization ---------------------------------------------------------

    def to_text(self, header: str = "") -> str:
        lines = [f"# {h}" for h in header.splitlines()]
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}  # {_UNITS[f.name]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        kinds = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = _parse(key, val, kinds[key].default)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def save(self, path, header: str = "") -> Path:
        path = Path(path)
        path.write_text(self.to_text(header))
        return path

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _format(val) -> str:
    if val is None:
        return "auto"
    if isinstance(val, tuple):
        return ",".join(_format(v) for v in val)
    if isinstance(val, complex):
        return repr(val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _parse(key, val, default):
    if key == "beta":
        return None if val == "auto" else complex(val.replace(" ", ""))
    if isinstance(default, tuple):
        items = [s for s in (p.strip() for p in val.split(",")) if s]
        cast = int if key == "bench_n_primes" else float
        return tuple(cast(s) for s in items)
    try:
        return type(default)(val)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {val!r}") from exc


def reference_config(**overrides) -> ExperimentConfig:
    """Defaults reproducing the published numerical experiment."""
    return ExperimentConfig().with_overrides(**overrides)
