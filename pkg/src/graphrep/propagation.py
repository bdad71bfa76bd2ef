"""Damped label propagation F <- alpha*S*F + (1-alpha)*Y0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from graphrep.errors import CapacityError, DimensionError, InvalidConfigError

DENSE_SOLVE_CAP = 2000


@dataclass(frozen=True)
class PropagationConfig:
    alpha: float = 0.9
    T: int = 30

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise InvalidConfigError(f"alpha must lie in [0, 1), got {self.alpha}")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidConfigError(f"T must be a positive integer, got {self.T}")


def _check(S, Y0):
    Y0 = np.asarray(Y0, dtype=np.float64)
    if Y0.ndim != 2 or S.shape != (Y0.shape[0], Y0.shape[0]):
        raise DimensionError(f"operator shape {S.shape} incompatible with labels {Y0.shape}")
    return Y0


def propagate_iterative(S, Y0, alpha, T):
    """Run ``T`` damped steps from ``F⁰ = Y0``.

    Returns ``(F_T, trajectory)`` with ``trajectory`` of shape (T+1, n, c);
    the backward pass needs every intermediate state.
    """
    Y0 = _check(S, Y0)
    traj = np.empty((T + 1,) + Y0.shape)
    traj[0] = Y0
    injected = (1.0 - alpha) * Y0
    for t in range(1, T + 1):
        traj[t] = alpha * (S @ traj[t - 1]) + injected
    return traj[T], traj


def propagate_closed_form(S, Y0, alpha, cap=DENSE_SOLVE_CAP):
    """Fixed point of the iteration via a dense solve of (I - alpha*S) F = (1-alpha) Y0."""
    Y0 = _check(S, Y0)
    if not 0 <= alpha < 1:
        raise InvalidConfigError(f"alpha must lie in [0, 1), got {alpha}")
    n = Y0.shape[0]
    if n > cap:
        raise CapacityError(f"dense solve limited to n <= {cap}, got n={n}")
    dense = S.toarray() if sparse.issparse(S) else np.asarray(S, dtype=np.float64)
    return np.linalg.solve(np.eye(n) - alpha * dense, (1.0 - alpha) * Y0)


def predict(F):
    """Argmax labels (ties to the smaller class) and abstain flags for all-zero rows."""
    F = np.asarray(F, dtype=np.float64)
    labels = np.argmax(F, axis=1)
    abstain = ~np.any(F != 0.0, axis=1)
    labels[abstain] = 0
    return labels, abstain
