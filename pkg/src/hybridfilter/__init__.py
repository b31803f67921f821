"""Filtering a qubit disturbed by an Ornstein-Uhlenbeck process.

The disturbance is replaced by a damped cavity analog; the joint qubit-cavity
system is filtered either with a stochastic master equation on a truncated
Fock space or with a five-dimensional quantum extended Kalman filter.
"""
__version__ = "0.1.0"

from ._core import BACKEND, IntegrationError  # noqa: E402
from .config import ExperimentConfig, reference_config  # noqa: E402
from .model import (  # noqa: E402
    CavityAnalog,
    OUProcess,
    QubitParams,
    SLHModel,
    analog_cavity,
    build_cavity,
    build_qubit,
    concatenate,
    enlarged_system,
)
from .operators import FockTruncation, Tolerances  # noqa: E402
from .qekf import QekfParams, QekfState, run_qekf  # noqa: E402
from .sme import SmeFilterState, run_sme  # noqa: E402
from .truth import MeasurementRecord, TruthTrajectory, simulate_truth  # noqa: E402
