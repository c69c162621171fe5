"""Slot-level Monte Carlo of beacon-enabled slotted CSMA/CA.

Each backoff slot is resolved in three phases: arrivals, channel sensing
against the set of transmitters active in that slot, then per-node state
advance. Backoff windows are drawn uniformly as 802.15.4 prescribes (the
analytical chain uses a geometric surrogate).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .config import CCA_SLOTS, MacScenario, derive_timing

RADIO_STATES = ("sleep", "idle", "backoff", "cca", "tx", "beacon")
TRANSITIONS = ("sleep_to_idle", "idle_to_rx")

# node states
_EMPTY, _HELD, _BACKOFF, _CCA1, _CCA2, _TX = range(6)
# radio-state columns
_R_SLEEP, _R_IDLE, _R_BACKOFF, _R_CCA, _R_TX, _R_BEACON = range(6)
# global counters
(_C_ARRIVALS, _C_DELIVERED, _C_COLLIDED, _C_DROP_CSMA, _C_DEFERRED,
 _C_DROP_BUFFER, _C_SUCCESS_SLOTS, _C_INACTIVE_TX) = range(8)


@dataclass(frozen=True)
class SimScenario:
    mac: MacScenario
    horizon_beacon_intervals: int = 200
    seed: int = 0
    arrival_model: str = "exact-poisson"  # or "bernoulli-per-slot"
    buffer_policy: str = "single-drop"  # or "queue"
    capacity: int = 1
    rx_on_when_idle: bool = False

    def __post_init__(self):
        if self.horizon_beacon_intervals < 1:
            raise ValueError("horizon must be >= 1 beacon interval")
        if self.arrival_model not in ("exact-poisson", "bernoulli-per-slot"):
            raise ValueError(f"unknown arrival model {self.arrival_model!r}")
        if self.buffer_policy not in ("single-drop", "queue"):
            raise ValueError(f"unknown buffer policy {self.buffer_policy!r}")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def frames_held(self) -> int:
        return 1 if self.buffer_policy == "single-drop" else self.capacity


@dataclass
class SimStats:
    slots_total: int
    slots_success_payload: int
    arrivals: int
    packets_delivered: int
    packets_collided: int
    packets_dropped_csma: int
    packets_deferred: int
    packets_dropped_buffer: int
    per_state_slots: dict[str, int]
    transitions: dict[str, int]
    throughput_S: float
    energy_total: float  # mJ, whole network
    energy_per_packet: float  # mJ per delivered packet, inf if none
    confidence: float  # standard error of S over beacon-interval batches
    inactive_tx_slots: int
    per_node_delivered: np.ndarray = field(repr=False)
    per_interval_S: np.ndarray = field(repr=False)
    per_interval_collisions: np.ndarray = field(repr=False)
    per_interval_energy: np.ndarray = field(repr=False)

    def fractions(self, n_nodes: int) -> dict[str, float]:
        denom = n_nodes * self.slots_total
        return {k: v / denom for k, v in self.per_state_slots.items()}

    def flat(self) -> dict:
        out = {
            k: getattr(self, k)
            for k in (
                "slots_total", "slots_success_payload", "arrivals", "packets_delivered",
                "packets_collided", "packets_dropped_csma", "packets_deferred",
                "packets_dropped_buffer", "throughput_S", "energy_total",
                "energy_per_packet", "confidence",
            )
        }
        out.update({f"slots_{k}": v for k, v in self.per_state_slots.items()})
        out.update({f"n_{k}": v for k, v in self.transitions.items()})
        return out

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["interval", "S", "collisions", "energy_mJ"])
            for h, (s, c, e) in enumerate(
                zip(self.per_interval_S, self.per_interval_collisions, self.per_interval_energy)
            ):
                w.writerow([h, repr(float(s)), int(c), repr(float(e))])


def seed32(seed: int) -> int:
    """Fold a 64-bit seed into the 32-bit seed numba's generator takes."""
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


@numba.njit(cache=True)
def _kernel(n, T, active, beacon, L, min_be, max_be, max_stages, horizon,
            poisson, p_slot, rate_slot, capacity, seed):
    np.random.seed(seed)
    counters = np.zeros(8, np.int64)
    radio = np.zeros((horizon, 6), np.int64)
    trans = np.zeros((horizon, 2), np.int64)
    succ = np.zeros(horizon, np.int64)
    coll = np.zeros(horizon, np.int64)
    node_deliv = np.zeros(n, np.int64)

    state = np.zeros(n, np.int64)
    count = np.zeros(n, np.int64)
    nb = np.zeros(n, np.int64)
    be = np.zeros(n, np.int64)
    qlen = np.zeros(n, np.int64)
    collided = np.zeros(n, np.bool_)
    next_arr = np.empty(n)
    for i in range(n):
        next_arr[i] = np.random.exponential(1.0 / rate_slot) if rate_slot > 0 else np.inf

    defer_from = active - L - CCA_SLOTS

    for s in range(horizon * T):
        h = s // T
        pos = s - h * T
        in_active = pos < active
        in_beacon = pos < beacon
        eligible = in_active and not in_beacon
        if pos == 0 and active < T:
            trans[h, 0] += n

        # arrivals
        for i in range(n):
            k = 0
            if poisson:
                while next_arr[i] < s + 1:
                    k += 1
                    next_arr[i] += np.random.exponential(1.0 / rate_slot)
            elif p_slot > 0 and np.random.random() < p_slot:
                k = 1
            for _ in range(k):
                counters[_C_ARRIVALS] += 1
                if qlen[i] < capacity:
                    qlen[i] += 1
                else:
                    counters[_C_DROP_BUFFER] += 1

        # channel occupancy and radio accounting
        ntx = 0
        for i in range(n):
            if state[i] == _TX:
                ntx += 1
        if ntx > 0 and not eligible:
            counters[_C_INACTIVE_TX] += ntx
        if not in_active:
            radio[h, _R_SLEEP] += n
        elif in_beacon:
            radio[h, _R_BEACON] += n
        else:
            for i in range(n):
                st = state[i]
                if st == _TX:
                    radio[h, _R_TX] += 1
                elif st == _CCA1 or st == _CCA2:
                    radio[h, _R_CCA] += 1
                elif st == _BACKOFF:
                    radio[h, _R_BACKOFF] += 1
                else:
                    radio[h, _R_IDLE] += 1
        busy = ntx > 0

        # state advance
        if eligible:
            for i in range(n):
                st = state[i]
                if st == _TX:
                    if ntx > 1:
                        collided[i] = True
                    count[i] -= 1
                    if count[i] == 0:
                        if collided[i]:
                            counters[_C_COLLIDED] += 1
                            coll[h] += 1
                        else:
                            counters[_C_DELIVERED] += 1
                            counters[_C_SUCCESS_SLOTS] += L
                            succ[h] += L
                            node_deliv[i] += 1
                        qlen[i] -= 1
                        state[i] = _EMPTY
                elif st == _BACKOFF:
                    count[i] -= 1
                    if count[i] == 0:
                        _to_cca(i, pos + 1, state, beacon, active, L, counters)
                elif st == _CCA1 or st == _CCA2:
                    if st == _CCA1:
                        trans[h, 1] += 1
                    if busy:
                        nb[i] += 1
                        if nb[i] >= max_stages:
                            counters[_C_DROP_CSMA] += 1
                            qlen[i] -= 1
                            state[i] = _EMPTY
                        else:
                            be[i] = min(be[i] + 1, max_be)
                            _backoff(i, pos + 1, be, count, state, beacon, active, L, counters)
                    elif st == _CCA1:
                        state[i] = _CCA2
                    else:
                        state[i] = _TX
                        count[i] = L
                        collided[i] = False

        # new frames for nodes that are free at the end of this slot
        for i in range(n):
            if state[i] == _EMPTY and qlen[i] > 0:
                nb[i] = 0
                be[i] = min_be
                if pos >= defer_from:
                    state[i] = _HELD
                    counters[_C_DEFERRED] += 1
                else:
                    _backoff(i, pos + 1, be, count, state, beacon, active, L, counters)

        # deferred frames restart when the next contention period opens
        if (s + 1) % T == beacon:
            for i in range(n):
                if state[i] == _HELD:
                    nb[i] = 0
                    be[i] = min_be
                    _backoff(i, beacon, be, count, state, beacon, active, L, counters)

    return counters, radio, trans, succ, coll, node_deliv


@numba.njit(cache=True)
def _backoff(i, nxt, be, count, state, beacon, active, L, counters):
    b = np.random.randint(0, 2 ** be[i])
    if b > 0:
        state[i] = _BACKOFF
        count[i] = b
    else:
        _to_cca(i, nxt, state, beacon, active, L, counters)


@numba.njit(cache=True)
def _to_cca(i, nxt, state, beacon, active, L, counters):
    # nxt is the unwrapped in-interval position of the first CCA slot
    start = max(nxt, beacon)
    if start + CCA_SLOTS + L <= active:
        state[i] = _CCA1
    else:
        state[i] = _HELD
        counters[_C_DEFERRED] += 1


def batch_confidence(per_interval_S) -> float:
    """Standard error of the mean over batches."""
    x = np.asarray(per_interval_S, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 batches")
    return float(x.std(ddof=1) / math.sqrt(x.size))


def simulate(scenario: SimScenario) -> SimStats:
    mac = scenario.mac
    timing = derive_timing(mac)
    en = mac.energy
    T = timing.total_slots
    H = scenario.horizon_beacon_intervals
    counters, radio, trans, succ, coll, node_deliv = _kernel(
        mac.n_nodes,
        T,
        timing.active_slots,
        en.beacon_slots,
        timing.frame_slots,
        mac.mac_min_be,
        mac.mac_max_be,
        mac.max_backoff_stages,
        H,
        scenario.arrival_model == "exact-poisson",
        timing.arrival_prob,
        mac.arrival_rate * timing.slot_seconds,
        scenario.frames_held,
        seed32(scenario.seed),
    )

    # traffic-free active slots: receiver off unless the node listens while idle
    quiet = en.p_idle if scenario.rx_on_when_idle else en.p_sleep
    powers = np.array([en.p_sleep, quiet, en.p_idle, en.p_rx, en.p_tx, en.p_rx])
    per_interval_energy = radio @ powers * timing.slot_seconds + trans @ np.array(
        [en.t_sleep_to_idle * en.p_idle, en.t_idle_to_rx * en.p_rx]
    )
    energy_total = float(per_interval_energy.sum())
    delivered = int(counters[_C_DELIVERED])
    slots_total = H * T
    per_interval_S = succ / T
    return SimStats(
        slots_total=slots_total,
        slots_success_payload=int(counters[_C_SUCCESS_SLOTS]),
        arrivals=int(counters[_C_ARRIVALS]),
        packets_delivered=delivered,
        packets_collided=int(counters[_C_COLLIDED]),
        packets_dropped_csma=int(counters[_C_DROP_CSMA]),
        packets_deferred=int(counters[_C_DEFERRED]),
        packets_dropped_buffer=int(counters[_C_DROP_BUFFER]),
        per_state_slots=dict(zip(RADIO_STATES, (int(v) for v in radio.sum(axis=0)))),
        transitions=dict(zip(TRANSITIONS, (int(v) for v in trans.sum(axis=0)))),
        throughput_S=counters[_C_SUCCESS_SLOTS] / slots_total,
        energy_total=energy_total,
        energy_per_packet=energy_total / delivered if delivered else math.inf,
        confidence=batch_confidence(per_interval_S) if H >= 2 else math.nan,
        inactive_tx_slots=int(counters[_C_INACTIVE_TX]),
        per_node_delivered=node_deliv,
        per_interval_S=per_interval_S,
        per_interval_collisions=coll,
        per_interval_energy=per_interval_energy,
    )
