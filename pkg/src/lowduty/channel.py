"""Channel-state chain: idle-idle / success / failure with closed forms.

The explicit chain has ``2L + 3`` states: IDLE,IDLE, L SUCCESS slots, L FAILURE
slots, and one trailing IDLE slot after each kind of transmission.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """A closed form was evaluated outside the region where it is a probability."""


@dataclass(frozen=True)
class ChannelSolution:
    tx_given_idle_idle: float
    alpha: float
    beta: float
    delta: float
    idle_idle: float
    idle: float
    idle_given_idle: float


def clamp01(x: float) -> tuple[float, bool]:
    """Clip to [0, 1]; second item tells whether clipping happened."""
    if x < 0.0:
        return 0.0, True
    if x > 1.0:
        return 1.0, True
    return x, False


def cond_idle_given_idle(idle: float, frame_slots: int) -> float:
    """P(channel idle next slot | idle now) = (L*p_i - 1 + p_i) / (L*p_i)."""
    L = frame_slots
    if idle <= 0.0 or idle < 1.0 / (L + 1) - 1e-15:
        raise DomainError(f"idle probability {idle} below 1/(L+1)")
    return max(0.0, (L * idle - 1.0 + idle) / (L * idle))


def tx_given_idle_idle(node_tx: float, idle: float, frame_slots: int) -> float:
    """Per-node transmission probability in a slot that follows two idle slots.

    Raises DomainError when the denominator is not positive. Values above 1
    are returned unclamped; callers decide how to treat them.
    """
    L = frame_slots
    denom = L * idle - 1.0 + idle
    if denom <= 0.0:
        raise DomainError(f"idle probability {idle} leaves no idle-idle slots")
    return L * node_tx / denom


def channel_event_probs(tx_ii: float, n_nodes: int) -> tuple[float, float, float]:
    """(alpha, beta, delta): zero, exactly one, or several transmitters."""
    if not 0.0 <= tx_ii <= 1.0:
        raise DomainError(f"tx_ii={tx_ii} outside [0, 1]")
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    alpha = (1.0 - tx_ii) ** n_nodes
    if n_nodes == 1:
        # a lone node cannot collide
        return alpha, 1.0 - alpha, 0.0
    beta = n_nodes * tx_ii * (1.0 - tx_ii) ** (n_nodes - 1)
    # rounding can push the complement a few ulps negative
    delta = max(0.0, 1.0 - alpha - beta)
    return alpha, beta, delta


def idle_idle_prob(alpha: float, frame_slots: int) -> float:
    return 1.0 / (1.0 + (frame_slots + 1) * (1.0 - alpha))


def generic_idle_prob(alpha: float, frame_slots: int) -> float:
    return (2.0 - alpha) / (1.0 + (frame_slots + 1) * (1.0 - alpha))


def channel_states(frame_slots: int) -> list[str]:
    L = frame_slots
    return (
        ["II"]
        + [f"S{j}" for j in range(1, L + 1)]
        + [f"F{j}" for j in range(1, L + 1)]
        + ["IS", "IF"]
    )


def channel_transition_matrix(alpha, beta, delta, frame_slots: int) -> np.ndarray:
    L = frame_slots
    n = 2 * L + 3
    M = np.zeros((n, n))
    ii, s1, f1, i_s, i_f = 0, 1, L + 1, 2 * L + 1, 2 * L + 2
    M[ii, ii] = alpha
    M[ii, s1] += beta
    M[ii, f1] += delta
    for j in range(L - 1):
        M[s1 + j, s1 + j + 1] = 1.0
        M[f1 + j, f1 + j + 1] = 1.0
    M[s1 + L - 1, i_s] = 1.0
    M[f1 + L - 1, i_f] = 1.0
    M[i_s, ii] = 1.0
    M[i_f, ii] = 1.0
    return M


def brute_force_channel_stationary(alpha, beta, delta, frame_slots: int) -> dict[str, float]:
    """Stationary occupancy of the explicit channel chain by linear solve."""
    if abs(alpha + beta + delta - 1.0) > 1e-12:
        raise ValueError("alpha + beta + delta must equal 1")
    M = channel_transition_matrix(alpha, beta, delta, frame_slots)
    n = M.shape[0]
    A = M.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DomainError("channel chain is singular") from exc
    return dict(zip(channel_states(frame_slots), pi))


def success_entry_rate(occupancy: dict[str, float]) -> float:
    """Per-slot rate of entering the first SUCCESS slot."""
    return occupancy["S1"]


def solve_channel(node_tx: float, idle: float, n_nodes: int, frame_slots: int):
    """One pass of the channel closed forms from (p^n_t, p^c_i).

    Returns the solution and whether any quantity had to be clamped.
    """
    clamped = False
    try:
        tx_ii = tx_given_idle_idle(node_tx, idle, frame_slots)
    except DomainError:
        tx_ii, clamped = 1.0, True
    tx_ii, c = clamp01(tx_ii)
    clamped |= c
    alpha, beta, delta = channel_event_probs(tx_ii, n_nodes)
    c_ii = idle_idle_prob(alpha, frame_slots)
    c_i = generic_idle_prob(alpha, frame_slots)
    try:
        c_ii_given = cond_idle_given_idle(c_i, frame_slots)
    except DomainError:
        c_ii_given, clamped = 0.0, True
    sol = ChannelSolution(tx_ii, alpha, beta, delta, c_ii, c_i, c_ii_given)
    return sol, clamped
