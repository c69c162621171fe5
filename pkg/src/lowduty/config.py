"""Scenario parameters and superframe timing for beacon-enabled 802.15.4.

All slot counts are in backoff slots (aUnitBackoffPeriod = 20 symbols).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

BASE_SLOT_DURATION_SYMBOLS = 60  # aBaseSlotDuration
NUM_SUPERFRAME_SLOTS = 16  # aNumSuperframeSlots
UNIT_BACKOFF_SYMBOLS = 20  # aUnitBackoffPeriod
# aBaseSuperframeDuration = 960 symbols = 48 backoff slots
BASE_SUPERFRAME_SLOTS = BASE_SLOT_DURATION_SYMBOLS * NUM_SUPERFRAME_SLOTS // UNIT_BACKOFF_SYMBOLS

CCA_SLOTS = 2


class ScenarioError(ValueError):
    """Raised for parameter combinations the model cannot represent."""


@dataclass(frozen=True)
class EnergyProfile:
    """Radio power levels (mW) and transition durations (s)."""

    p_sleep: float = 1.0
    p_idle: float = 1.0
    p_rx: float = 1.0
    p_tx: float = 1.0
    t_sleep_to_idle: float = 0.0
    t_idle_to_rx: float = 0.0
    beacon_slots: int = 2

    def __post_init__(self):
        for name in ("p_sleep", "p_idle", "p_rx", "p_tx"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0")
        if not self.p_sleep <= self.p_idle <= self.p_rx:
            raise ScenarioError("expected p_sleep <= p_idle <= p_rx")
        if self.t_sleep_to_idle < 0 or self.t_idle_to_rx < 0:
            raise ScenarioError("transition durations must be >= 0")
        if self.beacon_slots < 0:
            raise ScenarioError("beacon_slots must be >= 0")

    @classmethod
    def identity(cls, beacon_slots: int = 2) -> "EnergyProfile":
        """Unit power in every state, instantaneous transitions."""
        return cls(beacon_slots=beacon_slots)

    @classmethod
    def cc2420(cls) -> "EnergyProfile":
        """Profile shipped in ``data/cc2420.cfg``."""
        text = resources.files("lowduty.data").joinpath("cc2420.cfg").read_text()
        return energy_from_mapping(parse_keyvalue(text))


@dataclass(frozen=True)
class MacScenario:
    n_nodes: int = 10
    arrival_rate: float = 1.0  # frames/s per node
    beacon_order: int = 5
    superframe_order: int = 5
    payload_bytes: int = 87
    header_bytes: int = 13
    phy_rate: float = 250_000.0
    symbol_rate: float = 62_500.0
    mac_min_be: int = 3
    mac_max_be: int = 5
    max_backoff_stages: int = 5
    energy: EnergyProfile = field(default_factory=EnergyProfile)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ScenarioError("n_nodes must be >= 1")
        if self.arrival_rate < 0 or not math.isfinite(self.arrival_rate):
            raise ScenarioError("arrival_rate must be finite and >= 0")
        if not 0 <= self.superframe_order <= self.beacon_order <= 14:
            raise ScenarioError("need 0 <= superframe_order <= beacon_order <= 14")
        if not 0 <= self.mac_min_be <= self.mac_max_be:
            raise ScenarioError("need 0 <= mac_min_be <= mac_max_be")
        if self.max_backoff_stages < 1:
            raise ScenarioError("max_backoff_stages must be >= 1")
        if self.payload_bytes < 0 or self.header_bytes < 0:
            raise ScenarioError("frame sizes must be >= 0")
        if self.phy_rate <= 0 or self.symbol_rate <= 0:
            raise ScenarioError("phy_rate and symbol_rate must be > 0")

    def with_(self, **changes) -> "MacScenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class TimingDerivation:
    slot_seconds: float
    total_slots: int
    active_slots: int
    inactive_slots: int
    frame_slots: int
    duty_cycle: float
    arrival_prob: float
    defer_prob: float


def derive_timing(scenario: MacScenario) -> TimingDerivation:
    slot_seconds = UNIT_BACKOFF_SYMBOLS / scenario.symbol_rate
    total = BASE_SUPERFRAME_SLOTS * 2**scenario.beacon_order
    active = BASE_SUPERFRAME_SLOTS * 2**scenario.superframe_order
    bits = 8 * (scenario.payload_bytes + scenario.header_bytes)
    # round() guards against 3.2e-3/3.2e-4 landing a hair above 10
    frame_slots = max(1, math.ceil(round(bits / scenario.phy_rate / slot_seconds, 9)))
    if frame_slots + CCA_SLOTS + scenario.energy.beacon_slots >= active:
        raise ScenarioError(
            f"frame of {frame_slots} slots does not fit an active period of {active} slots"
        )
    partial = TimingDerivation(
        slot_seconds=slot_seconds,
        total_slots=total,
        active_slots=active,
        inactive_slots=total - active,
        frame_slots=frame_slots,
        duty_cycle=2.0 ** (scenario.superframe_order - scenario.beacon_order),
        arrival_prob=0.0,
        defer_prob=0.0,
    )
    return replace(
        partial,
        arrival_prob=arrival_probability(scenario.arrival_rate, partial),
        defer_prob=deferral_probability(partial),
    )


def arrival_probability(rate: float, timing: TimingDerivation) -> float:
    """Per-slot arrival probability: expected arrivals per backoff slot, capped at 1."""
    if rate < 0:
        raise ScenarioError("arrival rate must be >= 0")
    return min(1.0, rate * timing.slot_seconds)


def deferral_probability(timing: TimingDerivation) -> float:
    """Share of the beacon interval in which a new frame cannot complete: (T_I + L + 2) / T."""
    blocked = timing.inactive_slots + timing.frame_slots + CCA_SLOTS
    if blocked > timing.total_slots:
        raise ScenarioError("frame can never fit in the active period")
    return blocked / timing.total_slots


# --- key/value files -------------------------------------------------------

_SCENARIO_KEYS = {f.name: f.type for f in fields(MacScenario) if f.name != "energy"}
_ENERGY_KEYS = {f.name for f in fields(EnergyProfile)}
_INT_KEYS = {
    "n_nodes",
    "beacon_order",
    "superframe_order",
    "payload_bytes",
    "header_bytes",
    "mac_min_be",
    "mac_max_be",
    "max_backoff_stages",
    "beacon_slots",
}


def parse_keyvalue(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def _coerce(key: str, value):
    if isinstance(value, str):
        try:
            return int(value) if key in _INT_KEYS else float(value)
        except ValueError:
            raise ScenarioError(f"bad value for {key}: {value!r}") from None
    return int(value) if key in _INT_KEYS else float(value)


def energy_from_mapping(values: dict, base: EnergyProfile | None = None) -> EnergyProfile:
    unknown = set(values) - _ENERGY_KEYS
    if unknown:
        raise ScenarioError(f"unknown energy keys: {sorted(unknown)}")
    base = base or EnergyProfile()
    return replace(base, **{k: _coerce(k, v) for k, v in values.items()})


def scenario_from_mapping(values: dict, base: MacScenario | None = None) -> MacScenario:
    """Build a scenario from flat keys; energy keys may be mixed in."""
    base = base or MacScenario()
    unknown = set(values) - set(_SCENARIO_KEYS) - _ENERGY_KEYS
    if unknown:
        raise ScenarioError(f"unknown keys: {sorted(unknown)}")
    energy_part = {k: v for k, v in values.items() if k in _ENERGY_KEYS}
    scen_part = {k: _coerce(k, v) for k, v in values.items() if k in _SCENARIO_KEYS}
    energy = energy_from_mapping(energy_part, base.energy) if energy_part else base.energy
    return replace(base, energy=energy, **scen_part)


def load_scenario(path: str | Path, base: MacScenario | None = None) -> MacScenario:
    return scenario_from_mapping(parse_keyvalue(Path(path).read_text()), base)


def load_energy(path: str | Path) -> EnergyProfile:
    return energy_from_mapping(parse_keyvalue(Path(path).read_text()))


def dump_scenario(scenario: MacScenario) -> str:
    lines = [f"{k} = {getattr(scenario, k)}" for k in _SCENARIO_KEYS]
    lines += [f"{f.name} = {getattr(scenario.energy, f.name)}" for f in fields(EnergyProfile)]
    return "\n".join(lines) + "\n"
