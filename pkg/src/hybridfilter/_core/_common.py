import numpy as np


class IntegrationError(RuntimeError):
    """A filter or simulator step left its state invalid.

    ``step`` is the zero-based index of the offending step.
    """

    def __init__(self, message, step):
        super().__init__(f"step {step}: {message}")
        self.step = step


# kernel status codes
OK = 0
NONFINITE = 1
PROJECTION = 2
NOT_PSD = 3


def raise_for_status(status, step, detail):
    if status == OK:
        return
    if status == NONFINITE:
        raise IntegrationError("state became non-finite", step)
    if status == PROJECTION:
        raise IntegrationError(
            f"projection changed the state by {detail:.3g}, above the allowed bound", step
        )
    if status == NOT_PSD:
        raise IntegrationError(
            f"covariance lost positive semidefiniteness (Cholesky pivot {detail:.3g})", step
        )
    raise IntegrationError(f"kernel status {status}", step)


def n_outputs(n_steps, stride):
    return n_steps // stride + 1


def as_operator(A, dim):
    A = np.ascontiguousarray(A, dtype=complex)
    if A.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} operator, got {A.shape}")
    return A
