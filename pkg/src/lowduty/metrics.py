"""Throughput, radio-state time fractions, average power, energy per packet."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import EnergyProfile, TimingDerivation
from .fixed_point import FixedPointSolution
from .node_chain import NodeChainSolution


class RegimeError(ValueError):
    """Beacon and wake-up overheads exceed the time a node spends without traffic."""


@dataclass(frozen=True)
class RadioFractions:
    f_idle: float
    f_sleep: float
    f_backoff: float
    f_cca: float
    f_tx: float
    f_beacon: float
    f_sleep_to_idle: float
    f_idle_to_rx: float


@dataclass(frozen=True)
class PerformanceReport:
    throughput: float
    avg_power: float  # mW per node
    energy_per_packet: float  # mJ, inf when nothing is delivered
    packets_per_second_per_node: float
    fractions: RadioFractions

    @property
    def delivered(self) -> bool:
        return math.isfinite(self.energy_per_packet)


def throughput(alpha: float, beta: float, frame_slots: int) -> float:
    """Fraction of slots carrying successful payload."""
    return frame_slots * beta / (1.0 + (frame_slots + 1) * (1.0 - alpha))


def state_fractions(node: NodeChainSolution, timing: TimingDerivation,
                    energy: EnergyProfile) -> RadioFractions:
    T = timing.total_slots
    asleep = timing.inactive_slots / T
    quiet = node.pi[0] + node.pi[1]  # idle + deferred
    cca_entries = float(node.cca[:, 0].sum())
    if timing.inactive_slots > 0:
        f_si = energy.t_sleep_to_idle / timing.slot_seconds / T
    else:
        f_si = 0.0
    return RadioFractions(
        f_idle=quiet * (1.0 - asleep),
        f_sleep=quiet * asleep,
        f_backoff=float(node.backoff.sum()),
        f_cca=float(node.cca.sum()),
        f_tx=float(node.tx.sum()),
        f_beacon=energy.beacon_slots / T,
        f_sleep_to_idle=f_si,
        f_idle_to_rx=energy.t_idle_to_rx / timing.slot_seconds * cca_entries,
    )


def power_weights(fr: RadioFractions) -> tuple[float, float, float, float]:
    """Time weights applied to (sleep, idle, rx, tx) power."""
    w_sleep = fr.f_idle - fr.f_beacon - fr.f_sleep_to_idle + fr.f_sleep
    w_idle = fr.f_backoff - fr.f_idle_to_rx + fr.f_sleep_to_idle
    w_rx = fr.f_cca + fr.f_idle_to_rx + fr.f_beacon
    return w_sleep, w_idle, w_rx, fr.f_tx


def average_power(fr: RadioFractions, energy: EnergyProfile) -> float:
    w_sleep, w_idle, w_rx, w_tx = power_weights(fr)
    if w_sleep < -1e-12:
        raise RegimeError(
            f"sleep weight {w_sleep:.3g} < 0: beacon/wake-up time exceeds traffic-free time"
        )
    return w_sleep * energy.p_sleep + w_idle * energy.p_idle + w_rx * energy.p_rx + w_tx * energy.p_tx


def energy_per_packet(avg_power: float, S: float, timing: TimingDerivation, n_nodes: int) -> float:
    """Network energy (mJ) per delivered packet; ``inf`` when S == 0."""
    if S < 0:
        raise ValueError("throughput must be >= 0")
    if S == 0:
        return math.inf
    return n_nodes * avg_power * timing.frame_slots * timing.slot_seconds / S


def report(sol: FixedPointSolution, energy: EnergyProfile | None = None) -> PerformanceReport:
    energy = energy or sol.scenario.energy
    timing = sol.timing
    S = throughput(sol.channel.alpha, sol.channel.beta, timing.frame_slots)
    fr = state_fractions(sol.node, timing, energy)
    e_avg = average_power(fr, energy)
    rate = S / (timing.frame_slots * timing.slot_seconds) / sol.scenario.n_nodes
    return PerformanceReport(
        throughput=S,
        avg_power=e_avg,
        energy_per_packet=energy_per_packet(e_avg, S, timing, sol.scenario.n_nodes),
        packets_per_second_per_node=rate,
        fractions=fr,
    )
