"""Self-consistent coupling of the node and channel chains.

The unknown is the per-slot transmission probability of a node. Damped
Picard iteration is the production path; ``bisect_fixed_points`` solves the
same system as a 1-D root problem and is used to cross-check it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

from .channel import (
    ChannelSolution,
    channel_event_probs,
    cond_idle_given_idle,
    generic_idle_prob,
    idle_idle_prob,
    solve_channel,
)
from .config import MacScenario, TimingDerivation, derive_timing
from .node_chain import (
    NodeChainParams,
    NodeChainSolution,
    geometric_backoff_params,
    resume_probability,
    solve_node_chain,
)

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-9
    max_iterations: int = 10_000
    damping: float = 0.5
    initial_tx: float = 1e-3
    stall_window: int = 100
    max_damping_halvings: int = 4

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        if not 0 <= self.initial_tx <= 1:
            raise ValueError("initial_tx must be in [0, 1]")


@dataclass(frozen=True)
class FixedPointSolution:
    channel: ChannelSolution
    node: NodeChainSolution
    iterations: int
    residual: float
    clamped: bool
    timing: TimingDerivation
    scenario: MacScenario
    damping: float
    clamped_iterations: int = 0
    trace: list[float] = field(default_factory=list, repr=False)

    @property
    def node_tx(self) -> float:
        return self.node.node_tx_prob


def node_params(scenario: MacScenario, timing: TimingDerivation, chan_idle: float,
                chan_idle_given_idle: float) -> NodeChainParams:
    q = geometric_backoff_params(
        scenario.mac_min_be, scenario.mac_max_be, scenario.max_backoff_stages
    )
    return NodeChainParams(
        arrival_prob=timing.arrival_prob,
        defer_prob=timing.defer_prob,
        chan_idle=chan_idle,
        chan_idle_given_idle=chan_idle_given_idle,
        backoff_sense_probs=tuple(q),
        frame_slots=timing.frame_slots,
        resume_prob=resume_probability(timing.inactive_slots, timing.frame_slots),
    )


def solve(
    scenario: MacScenario,
    opts: SolverOptions | None = None,
    callback: Callable[[int, NodeChainParams], None] | None = None,
) -> FixedPointSolution:
    """Iterate p_t -> channel -> node chain -> p_t until the update stalls below tolerance.

    The channel idle probability used inside the transmission-given-idle-idle
    formula lags one iteration behind; transient values outside [0, 1] are
    clamped and counted, but the converged point must be clamp-free.
    """
    opts = opts or SolverOptions()
    timing = derive_timing(scenario)
    N, L = scenario.n_nodes, timing.frame_slots

    x = 0.0 if timing.arrival_prob == 0.0 else opts.initial_tx
    c_idle = 1.0
    theta = opts.damping
    halvings = 0
    trace: list[float] = []
    clamped_iters = 0
    last_change = 0

    for it in range(1, opts.max_iterations + 1):
        chan, clamped = solve_channel(x, c_idle, N, L)
        clamped_iters += clamped
        params = node_params(scenario, timing, chan.idle, chan.idle_given_idle)
        if callback is not None:
            callback(it, params)
        node = solve_node_chain(params)
        x_next = theta * node.node_tx_prob + (1.0 - theta) * x
        residual = max(abs(x_next - x), abs(chan.idle - c_idle))
        trace.append(residual)
        x, c_idle = x_next, chan.idle

        if residual <= opts.tolerance:
            final, clamped = solve_channel(x, c_idle, N, L)
            node = solve_node_chain(node_params(scenario, timing, final.idle, final.idle_given_idle))
            return FixedPointSolution(
                channel=final,
                node=node,
                iterations=it,
                residual=residual,
                clamped=clamped,
                timing=timing,
                scenario=scenario,
                damping=theta,
                clamped_iterations=clamped_iters,
                trace=trace,
            )

        w = opts.stall_window
        if it - last_change >= w and residual >= min(trace[-w - 1 : -1]):
            if halvings >= opts.max_damping_halvings:
                raise ConvergenceError(
                    f"fixed point stalled at residual {residual:.3e} after {it} iterations",
                    trace,
                )
            theta /= 2.0
            halvings += 1
            last_change = it
            log.debug("iteration %d: residual stalled, damping -> %g", it, theta)

    raise ConvergenceError(
        f"no convergence in {opts.max_iterations} iterations (residual {trace[-1]:.3e})", trace
    )


# --- bisection cross-check ---------------------------------------------------


def _bisect(f, lo: float, hi: float, xtol: float = 1e-15, max_steps: int = 200) -> float:
    flo = f(lo)
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def consistent_channel(node_tx: float, n_nodes: int, frame_slots: int) -> ChannelSolution:
    """Channel state consistent with node_tx without any lagged quantity.

    Solves t = node_tx * (1 + (L+1)(1 - (1-t)^N)) for the idle-idle
    transmission probability t; the right side is concave in t so the root
    is unique when it exists, otherwise t saturates at 1.
    """
    L = frame_slots

    def g(t):
        return node_tx * (1.0 + (L + 1) * (1.0 - (1.0 - t) ** n_nodes)) - t

    if node_tx == 0.0:
        t = 0.0
    elif g(1.0) >= 0.0:
        t = 1.0
    else:
        t = _bisect(g, 0.0, 1.0)
    alpha, beta, delta = channel_event_probs(t, n_nodes)
    c_i = generic_idle_prob(alpha, L)
    return ChannelSolution(
        tx_given_idle_idle=t,
        alpha=alpha,
        beta=beta,
        delta=delta,
        idle_idle=idle_idle_prob(alpha, L),
        idle=c_i,
        idle_given_idle=cond_idle_given_idle(c_i, L),
    )


def residual_function(scenario: MacScenario) -> Callable[[float], float]:
    """r(x) = F(x) - x where F maps a node transmit probability through both chains."""
    timing = derive_timing(scenario)
    N, L = scenario.n_nodes, timing.frame_slots

    def r(x: float) -> float:
        chan = consistent_channel(x, N, L)
        params = node_params(scenario, timing, chan.idle, chan.idle_given_idle)
        return solve_node_chain(params).node_tx_prob - x

    return r


def bracket_roots(scenario: MacScenario, points: int = 200) -> list[tuple[float, float]]:
    """Sign-change brackets of the residual on [0, 1/L]."""
    timing = derive_timing(scenario)
    r = residual_function(scenario)
    hi = 1.0 / timing.frame_slots
    if r(0.0) == 0.0:
        return [(0.0, 0.0)]
    # geometric spacing resolves the small-x region where light-load roots live
    xs = [0.0] + [hi * math.exp(math.log(1e-9) * (1 - i / points)) for i in range(points + 1)]
    vals = [r(x) for x in xs]
    brackets = []
    for (a, fa), (b, fb) in zip(zip(xs, vals), zip(xs[1:], vals[1:])):
        if fb == 0.0:
            brackets.append((b, b))
        elif (fa > 0) != (fb > 0) and fa != 0.0:
            brackets.append((a, b))
    return brackets


def bisect_fixed_points(scenario: MacScenario) -> list[float]:
    """All fixed points of the coupled system, each located by bisection."""
    r = residual_function(scenario)
    return [a if a == b else _bisect(r, a, b) for a, b in bracket_roots(scenario)]
