"""Queue recursion, arrival sampling, and stability diagnostics.

Queues are measured in rate*tau units (normalized bits): each slot
serves R_k * tau and enqueues A_k * tau, with A_k drawn per slot in the
same normalized rate units as R_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import RngStream


@dataclass(frozen=True)
class QueueState:
    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        object.__setattr__(self, "q", q)
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("queue lengths must be finite and nonnegative")

    @property
    def num_users(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class ArrivalProcess:
    """Per-slot arrival draws with mean rates lam (bits/s/Hz)."""

    lam: np.ndarray
    distribution: str = "poisson"
    stream: RngStream = RngStream(0)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64)
        object.__setattr__(self, "lam", lam)
        if np.any(lam < 0):
            raise ValueError("arrival rates must be nonnegative")
        if self.distribution not in ("poisson", "deterministic"):
            raise ValueError("distribution must be poisson or deterministic")


def sample_arrivals(process: ArrivalProcess, slot: int) -> np.ndarray:
    """Arrivals for one slot, in rate units (multiplied by tau at enqueue).

    Deterministic in (process.stream, slot), so different policies fed the
    same stream see identical arrival sequences.
    """
    if process.distribution == "deterministic":
        return process.lam.copy()
    gen = process.stream.child(int(slot)).generator()
    return gen.poisson(process.lam).astype(np.float64)


def step_queue(state: QueueState, rates, arrivals, tau: float) -> QueueState:
    """Q(t+1) = [Q(t) - R*tau]^+ + A*tau."""
    r = np.asarray(rates, dtype=np.float64)
    a = np.asarray(arrivals, dtype=np.float64)
    if np.any(r < 0) or np.any(a < 0):
        raise ValueError("rates and arrivals must be nonnegative")
    if r.shape != state.q.shape or a.shape != state.q.shape:
        raise ValueError("rates/arrivals length must match the queue vector")
    if tau <= 0:
        raise ValueError("slot length must be positive")
    q = np.maximum(state.q - r * tau, 0.0) + a * tau
    return QueueState(q=q, t=state.t + 1)


def lyapunov(state: QueueState) -> float:
    """Quadratic potential sum_k Q_k^2."""
    return float(state.q @ state.q)


def drift_weights(state: QueueState) -> np.ndarray:
    """Per-user weights of the drift-bound objective: exactly the queue vector."""
    return state.q.copy()


def stability_metrics(trajectory) -> dict:
    """Time-averaged lengths and late-phase growth slopes, per user.

    trajectory is (T, K) with T >= 10.  tail_slope fits a least-squares
    line to the last half of each user's sample path; a diverging queue
    shows a positive slope, a stable one hovers near zero.
    """
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.ndim == 1:
        traj = traj[:, None]
    if traj.shape[0] < 10:
        raise ValueError("need at least 10 slots to estimate stability metrics")
    T = traj.shape[0]
    time_avg = traj.mean(axis=0)
    half = traj[T // 2 :]
    t = np.arange(half.shape[0], dtype=np.float64)
    tc = t - t.mean()
    denom = float(tc @ tc)
    slope = (tc @ (half - half.mean(axis=0))) / denom
    return {"time_avg_len": time_avg, "tail_slope": slope}
