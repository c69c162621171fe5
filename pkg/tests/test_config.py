import math

import pytest
from hypothesis import given, strategies as st

from lowduty.config import (
    EnergyProfile,
    MacScenario,
    ScenarioError,
    TimingDerivation,
    arrival_probability,
    deferral_probability,
    derive_timing,
    dump_scenario,
    load_scenario,
    parse_keyvalue,
    scenario_from_mapping,
)


def test_superframe_slots_duty_one():
    t = derive_timing(MacScenario(beacon_order=5, superframe_order=5))
    assert t.total_slots == 48 * 2**5 == 1536
    assert t.inactive_slots == 0
    assert t.duty_cycle == 1.0
    assert t.slot_seconds == pytest.approx(0.32e-3, rel=1e-15)


def test_superframe_slots_quarter_duty():
    t = derive_timing(MacScenario(beacon_order=5, superframe_order=3))
    assert t.active_slots == 384
    assert t.inactive_slots == 1152
    assert t.duty_cycle == 0.25


def test_frame_slots_from_bytes():
    # 800 bits / 250 kb/s = 3.2 ms = 10 slots of 0.32 ms
    assert derive_timing(MacScenario()).frame_slots == 10
    assert derive_timing(MacScenario(payload_bytes=88)).frame_slots == 11


def _timing(T_I, L=10, T=1536, slot=0.32e-3):
    return TimingDerivation(slot, T, T - T_I, T_I, L, (T - T_I) / T, 0.0, 0.0)


@pytest.mark.parametrize(
    "T_I, expected",
    [(0, 12 / 1536), (1152, 0.7578125), (1440, 0.9453125)],
)
def test_deferral_probability(T_I, expected):
    assert deferral_probability(_timing(T_I)) == expected


def test_deferral_rejects_unfittable_frame():
    with pytest.raises(ScenarioError):
        deferral_probability(_timing(1530))


def test_arrival_probability():
    t = _timing(0)
    assert arrival_probability(0.0, t) == 0.0
    assert arrival_probability(20.0, t) == pytest.approx(0.0064, rel=1e-14)
    # arrivals per beacon interval over slots per interval gives the same number
    assert arrival_probability(20.0, t) == pytest.approx(20.0 * 1536 * 0.32e-3 / 1536)
    assert arrival_probability(3125.0, t) == 1.0
    assert arrival_probability(1e6, t) == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(superframe_order=6, beacon_order=5),
        dict(beacon_order=15, superframe_order=3),
        dict(n_nodes=0),
        dict(arrival_rate=-1.0),
        dict(mac_min_be=6, mac_max_be=5),
    ],
)
def test_invalid_scenarios(kwargs):
    with pytest.raises(ScenarioError):
        MacScenario(**kwargs)


def test_frame_longer_than_active_period_rejected():
    with pytest.raises(ScenarioError):
        derive_timing(MacScenario(beacon_order=0, superframe_order=0, payload_bytes=2000))


def test_energy_profile_invariants():
    with pytest.raises(ScenarioError):
        EnergyProfile(p_sleep=2.0, p_idle=1.0)
    with pytest.raises(ScenarioError):
        EnergyProfile(t_idle_to_rx=-1.0)
    cc = EnergyProfile.cc2420()
    assert cc.p_sleep <= cc.p_idle <= cc.p_rx


@given(bo=st.integers(0, 14), data=st.data())
def test_duty_cycle_times_total_is_active(bo, data):
    so = data.draw(st.integers(max(0, bo - 10), bo))
    sc = MacScenario(beacon_order=bo, superframe_order=so, payload_bytes=20, header_bytes=5,
                     energy=EnergyProfile(beacon_slots=0))
    t = derive_timing(sc)
    assert t.duty_cycle * t.total_slots == t.active_slots
    assert 0 <= t.defer_prob < 1
    assert derive_timing(sc) == t


def test_deferral_increasing_in_inactive_slots():
    vals = [deferral_probability(_timing(T_I)) for T_I in range(0, 1500, 48)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[0] == (10 + 2) / 1536


def test_keyvalue_roundtrip(tmp_path):
    sc = MacScenario(n_nodes=7, arrival_rate=3.5, superframe_order=2, energy=EnergyProfile.cc2420())
    path = tmp_path / "s.cfg"
    path.write_text(dump_scenario(sc))
    assert load_scenario(path) == sc


def test_keyvalue_parsing_and_errors():
    assert parse_keyvalue("a = 1  # note\n\n# only comment\nb=2") == {"a": "1", "b": "2"}
    with pytest.raises(ScenarioError):
        parse_keyvalue("no separator here")
    with pytest.raises(ScenarioError):
        scenario_from_mapping({"bogus": "1"})
    with pytest.raises(ScenarioError):
        scenario_from_mapping({"n_nodes": "ten"})


def test_shipped_validation_config():
    from importlib import resources

    text = resources.files("lowduty.data").joinpath("validation.cfg").read_text()
    sc = scenario_from_mapping(parse_keyvalue(text))
    assert (sc.n_nodes, sc.beacon_order, sc.payload_bytes, sc.header_bytes) == (10, 5, 87, 13)
    assert math.isclose(sc.phy_rate, 250e3)
