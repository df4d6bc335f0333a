import math

import pytest

from composedc.model import ConfigurationError
from composedc.workloads import (
    ShuffleIntensity,
    TrafficPattern,
    Workload,
    WorkloadClass,
    generate,
    shuffle_from_csv,
    shuffle_to_csv,
    split_to_microservices,
    workloads_from_csv,
    workloads_to_csv,
)


def test_generate_empty():
    wls, shuffle = generate(0, WorkloadClass.CPU_INTENSIVE, seed=1)
    assert wls == []
    assert not shuffle


def test_generate_ranges_and_groups():
    wls, shuffle = generate(20, WorkloadClass.CPU_INTENSIVE, group_size=5,
                            pattern=TrafficPattern.MANY_TO_MANY, seed=11)
    assert len(wls) == 20
    assert {w.group_id for w in wls} == {0, 1, 2, 3}
    for w in wls:
        assert 1.0 <= w.wc <= 3.0
        assert 4.0 <= w.wm <= 8.0
        assert (w.tcm_up, w.tcm_down) == (120.0, 100.0)
        assert (w.tci_up, w.tci_down) == (2.0, 1.0)
        assert (w.tri_up, w.tri_down) == (2.0, 1.0)
    # Many-to-many: every ordered intra-group pair carries a flow.
    for g in range(4):
        members = [w.id for w in wls if w.group_id == g]
        for a in members:
            for b in members:
                if a != b:
                    assert (a, b) in shuffle.flows


def test_generate_mem_intensive_ranges():
    wls, _ = generate(10, WorkloadClass.MEM_INTENSIVE, seed=5)
    for w in wls:
        assert 0.5 <= w.wc <= 2.0
        assert 6.0 <= w.wm <= 24.0


def test_generate_deterministic():
    a = generate(12, WorkloadClass.CPU_INTENSIVE, seed=99)
    b = generate(12, WorkloadClass.CPU_INTENSIVE, seed=99)
    assert a[0] == b[0]
    assert a[1].flows == b[1].flows
    c = generate(12, WorkloadClass.CPU_INTENSIVE, seed=100)
    assert a[0] != c[0]


def test_shuffle_intensity_ranges():
    _, non = generate(5, WorkloadClass.CPU_INTENSIVE,
                      shuffle_intensity=ShuffleIntensity.NON_INTENSIVE, seed=3)
    for gbps in non.flows.values():
        assert 0.0 <= gbps <= 10.0
    _, hot = generate(5, WorkloadClass.CPU_INTENSIVE,
                      shuffle_intensity=ShuffleIntensity.INTENSIVE, seed=3)
    for gbps in hot.flows.values():
        assert 10.0 <= gbps <= 70.0
    _, none = generate(5, WorkloadClass.CPU_INTENSIVE,
                       shuffle_intensity=None, seed=3)
    assert not none


def test_one_to_one_pattern_is_disjoint_pairing():
    wls, shuffle = generate(5, WorkloadClass.CPU_INTENSIVE, group_size=5,
                            pattern=TrafficPattern.ONE_TO_ONE, seed=2)
    touched = {}
    for (s, d) in shuffle.flows:
        touched.setdefault(s, set()).add(d)
    # Pairs (0,1) and (2,3) in both directions; the odd member is silent.
    assert set(shuffle.flows) == {(0, 1), (1, 0), (2, 3), (3, 2)}


def test_one_to_many_pattern():
    wls, shuffle = generate(5, WorkloadClass.CPU_INTENSIVE, group_size=5,
                            pattern=TrafficPattern.ONE_TO_MANY, seed=2)
    assert set(shuffle.flows) == {(0, d) for d in (1, 2, 3, 4)}


def test_mixed_pattern_is_subset_of_all_pairs():
    wls, shuffle = generate(10, WorkloadClass.CPU_INTENSIVE, group_size=5,
                            pattern=TrafficPattern.MIXED, seed=8)
    all_pairs = {(a.id, b.id) for a in wls for b in wls
                 if a.id != b.id and a.group_id == b.group_id}
    assert set(shuffle.flows) <= all_pairs
    assert shuffle.flows  # overwhelmingly likely non-empty at p=0.5


def test_split_identity():
    wls, _ = generate(4, WorkloadClass.CPU_INTENSIVE, seed=1)
    integrated, micro = split_to_microservices(wls, parts=1, cpu_shares=[1.0],
                                               mem_shares=[1.0])
    assert len(micro) == 4
    for parent, child in zip(wls, micro):
        assert child.wc == parent.wc
        assert child.wm == parent.wm
        assert child.tcm_up == parent.tcm_up
        assert child.parent_integrated == parent.id


def test_split_halves_demands_and_traffic():
    parent = Workload(0, WorkloadClass.CPU_INTENSIVE, 3.0, 8.0)
    integrated, micro = split_to_microservices([parent], parts=2)
    assert len(micro) == 2
    assert [m.wc for m in micro] == [1.5, 1.5]
    assert micro[0].tcm_up == 60.0
    assert micro[0].tcm_down == 50.0
    assert integrated[0].ci == 3.0
    assert integrated[0].members == (0, 1)


def test_split_conserves_every_component_exactly():
    wls, _ = generate(20, WorkloadClass.MEM_INTENSIVE, seed=17)
    integrated, micro = split_to_microservices(wls, parts=2)
    by_parent = {}
    for m in micro:
        by_parent.setdefault(m.parent_integrated, []).append(m)
    for parent in wls:
        children = by_parent[parent.id]
        assert math.fsum(c.wc for c in children) == pytest.approx(
            parent.wc, rel=1e-12)
        assert math.fsum(c.wm for c in children) == pytest.approx(
            parent.wm, rel=1e-12)
        for attr in ("tcm_up", "tcm_down", "tci_up", "tci_down",
                     "tri_up", "tri_down"):
            total = math.fsum(getattr(c, attr) for c in children)
            assert total == pytest.approx(getattr(parent, attr), rel=1e-12)
        assert {c.group_id for c in children} == {parent.group_id}


def test_split_share_validation():
    wls, _ = generate(1, WorkloadClass.CPU_INTENSIVE, seed=1)
    with pytest.raises(ConfigurationError):
        split_to_microservices(wls, parts=2, cpu_shares=[0.6, 0.6])
    with pytest.raises(ConfigurationError):
        split_to_microservices(wls, parts=3, cpu_shares=[0.5, 0.5])


def test_generated_demands_fit_largest_reference_classes():
    for wclass in WorkloadClass:
        wls, _ = generate(50, wclass, seed=23)
        assert all(w.wc < 3.6 for w in wls)
        assert all(w.wm < 32.0 for w in wls)


def test_workload_csv_round_trip():
    wls, shuffle = generate(8, WorkloadClass.MEM_INTENSIVE, seed=41)
    integrated, micro = split_to_microservices(wls, parts=2)
    text = workloads_to_csv(micro, meta={"seed": 41})
    assert text.startswith("#")
    assert "seed=41" in text
    assert "numpy-pcg64" in text
    back, meta = workloads_from_csv(text)
    assert back == micro
    assert meta["seed"] == "41"

    stext = shuffle_to_csv(shuffle, meta={"seed": 41})
    sback = shuffle_from_csv(stext)
    assert sback.flows == shuffle.flows
