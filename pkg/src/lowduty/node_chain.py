"""Per-node slotted CSMA/CA Markov chain.

State order: idle, deferred, BO_1..BO_m, (CS_k1, CS_k2) for k = 1..m, TX_1..TX_L.
Transmission is expanded to one state per slot so stationary mass is per slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDLE = 0
DEFERRED = 1


class StationaryError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeChainParams:
    arrival_prob: float
    defer_prob: float
    chan_idle: float
    chan_idle_given_idle: float
    backoff_sense_probs: tuple[float, ...]
    frame_slots: int
    resume_prob: float

    def __post_init__(self):
        probs = {
            "arrival_prob": self.arrival_prob,
            "defer_prob": self.defer_prob,
            "chan_idle": self.chan_idle,
            "chan_idle_given_idle": self.chan_idle_given_idle,
            "resume_prob": self.resume_prob,
        }
        for i, q in enumerate(self.backoff_sense_probs):
            probs[f"backoff_sense_probs[{i}]"] = q
        for name, value in probs.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if not self.backoff_sense_probs:
            raise ValueError("need at least one backoff stage")
        if self.frame_slots < 1:
            raise ValueError("frame_slots must be >= 1")

    @property
    def stages(self) -> int:
        return len(self.backoff_sense_probs)


@dataclass(frozen=True)
class NodeLayout:
    stages: int
    frame_slots: int

    @property
    def size(self) -> int:
        return 2 + 3 * self.stages + self.frame_slots

    def bo(self, k: int) -> int:
        """Backoff stage k, 1-based."""
        return 1 + k

    def cs(self, k: int, j: int) -> int:
        """j-th CCA slot (1 or 2) after backoff stage k."""
        return 2 + self.stages + 2 * (k - 1) + (j - 1)

    def tx(self, j: int) -> int:
        return 2 + 3 * self.stages + (j - 1)

    def labels(self) -> list[str]:
        m, L = self.stages, self.frame_slots
        out = ["idle", "D_f"] + [f"BO_{k}" for k in range(1, m + 1)]
        for k in range(1, m + 1):
            out += [f"CS_{k}1", f"CS_{k}2"]
        return out + [f"TX_{j}" for j in range(1, L + 1)]


@dataclass(frozen=True)
class NodeChainSolution:
    pi: np.ndarray
    node_tx_prob: float
    layout: NodeLayout

    def mass(self, label: str) -> float:
        return float(self.pi[self.layout.labels().index(label)])

    @property
    def backoff(self) -> np.ndarray:
        return self.pi[2 : 2 + self.layout.stages]

    @property
    def cca(self) -> np.ndarray:
        """CCA mass, shape (stages, 2)."""
        m = self.layout.stages
        return self.pi[2 + m : 2 + 3 * m].reshape(m, 2)

    @property
    def tx(self) -> np.ndarray:
        return self.pi[2 + 3 * self.layout.stages :]


def geometric_backoff_params(min_be: int, max_be: int, stages: int) -> list[float]:
    """Per-slot exit probability of a geometric dwell matching each stage's mean wait.

    Stage k draws uniformly from {0..W_k-1}, W_k = 2**min(min_be+k-1, max_be);
    a geometric dwell with exit probability 2/(W_k+1) has the same mean.
    """
    if min_be > max_be or stages < 1:
        raise ValueError("need min_be <= max_be and stages >= 1")
    return [2.0 / (2 ** min(min_be + k, max_be) + 1) for k in range(stages)]


def resume_probability(inactive_slots: int, frame_slots: int) -> float:
    """Exit probability of the deferred state; mean dwell (T_I + L + 2)/2 slots."""
    return min(1.0, 2.0 / (inactive_slots + frame_slots + 4))


def build_node_chain(params: NodeChainParams) -> np.ndarray:
    m, L = params.stages, params.frame_slots
    lay = NodeLayout(m, L)
    M = np.zeros((lay.size, lay.size))
    p, pd = params.arrival_prob, params.defer_prob
    ci, cii = params.chan_idle, params.chan_idle_given_idle

    M[IDLE, IDLE] = 1.0 - p
    M[IDLE, DEFERRED] = p * pd
    M[IDLE, lay.bo(1)] += p * (1.0 - pd)

    M[DEFERRED, DEFERRED] = 1.0 - params.resume_prob
    M[DEFERRED, lay.bo(1)] += params.resume_prob

    for k, q in enumerate(params.backoff_sense_probs, start=1):
        M[lay.bo(k), lay.bo(k)] = 1.0 - q
        M[lay.bo(k), lay.cs(k, 1)] += q

        busy1, busy2 = 1.0 - ci, 1.0 - cii
        M[lay.cs(k, 1), lay.cs(k, 2)] = ci
        M[lay.cs(k, 2), lay.tx(1)] = cii
        for row, busy in ((lay.cs(k, 1), busy1), (lay.cs(k, 2), busy2)):
            if k < m:
                M[row, DEFERRED] += busy * pd
                M[row, lay.bo(k + 1)] += busy * (1.0 - pd)
            else:
                # channel access failure: frame dropped
                M[row, IDLE] += busy

    for j in range(1, L):
        M[lay.tx(j), lay.tx(j + 1)] = 1.0
    M[lay.tx(L), IDLE] = 1.0

    if np.max(np.abs(M.sum(axis=1) - 1.0)) > 1e-12:
        raise AssertionError("node chain rows are not stochastic")
    return M


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Solve pi M = pi, sum(pi) = 1 directly."""
    M = np.asarray(matrix, dtype=float)
    n = M.shape[0]
    A = M.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise StationaryError("stationary system is singular (chain reducible?)") from exc
    if not np.all(np.isfinite(pi)):
        raise StationaryError("stationary solve produced non-finite values")
    pi = np.where(pi < 0.0, 0.0, pi)  # round-off on transient states
    return pi / pi.sum()


def power_iteration_stationary(matrix: np.ndarray, tol: float = 1e-14, max_squarings: int = 64):
    """Independent check: iterate the lazy chain by repeated squaring."""
    M = np.asarray(matrix, dtype=float)
    n = M.shape[0]
    P = 0.5 * (M + np.eye(n))  # same stationary law, aperiodic
    pi = np.full(n, 1.0 / n)
    for _ in range(max_squarings):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol and np.max(np.abs(nxt @ P - nxt)) < tol:
            return nxt
        pi = nxt
        P = P @ P
        P /= P.sum(axis=1, keepdims=True)
    raise StationaryError("power iteration did not converge")


def node_tx_probability(pi_cs2_total: float, chan_idle_given_idle: float) -> float:
    """Probability of starting a transmission in a slot: p_{i|i} * sum_k pi(CS_k2)."""
    return chan_idle_given_idle * pi_cs2_total


def solve_node_chain(params: NodeChainParams) -> NodeChainSolution:
    lay = NodeLayout(params.stages, params.frame_slots)
    if params.arrival_prob == 0.0:
        pi = np.zeros(lay.size)
        pi[IDLE] = 1.0
    else:
        pi = stationary_distribution(build_node_chain(params))
    cs2 = sum(pi[lay.cs(k, 2)] for k in range(1, lay.stages + 1))
    return NodeChainSolution(pi, node_tx_probability(cs2, params.chan_idle_given_idle), lay)
