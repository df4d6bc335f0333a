import pytest

from composedc.model import (
    ComponentClass,
    ConfigurationError,
    DcKind,
    ResourceKind,
    UnknownComponentError,
    build_reference_layout,
    default_server_classes,
    latency_class,
    max_latency_for,
    relation_of,
)


def test_component_class_power_factor():
    cls = ComponentClass("hp-cpu", ResourceKind.CPU, 3.6, 130.0)
    assert cls.idle_power == pytest.approx(91.0)
    assert cls.power_factor == pytest.approx((130.0 - 91.0) / 3.6)


def test_component_class_validation():
    with pytest.raises(ConfigurationError):
        ComponentClass("bad", ResourceKind.CPU, 0.0, 130.0)
    with pytest.raises(ConfigurationError):
        ComponentClass("bad", ResourceKind.CPU, 3.6, -1.0)
    with pytest.raises(ConfigurationError):
        ComponentClass("bad", ResourceKind.CPU, 3.6, 130.0, idle_fraction=1.5)


def test_default_idle_fraction_is_seventy_percent():
    for cls in default_server_classes():
        assert cls.idle_fraction == 0.70


def test_traditional_reference_layout_structure():
    layout = build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)
    assert len(layout.cpus) == 24
    assert len(layout.mems) == 24
    assert layout.n_racks == 4
    # 6 heterogeneous nodes per rack, 24 nodes total.
    assert layout.n_nodes == 24
    per_rack = [sum(1 for n in range(layout.n_nodes)
                    if layout.node_rack[n] == r) for r in range(4)]
    assert per_rack == [6, 6, 6, 6]
    # CPU and memory of one server share an index via the same node.
    for c, m in zip(layout.cpus, layout.mems):
        assert c.node == m.node


def test_rack_scale_minimal_structure():
    classes = [
        ComponentClass("c", ResourceKind.CPU, 2.0, 50.0),
        ComponentClass("m", ResourceKind.MEMORY, 8.0, 10.0),
    ]
    layout = build_reference_layout(DcKind.RACK_SCALE, 1, 1, 1, classes)
    assert layout.n_racks == 1
    assert layout.n_nodes == 2  # one CPU node plus one memory node
    kinds = [
        {c.kind for c in layout.node_components(n)} for n in range(2)
    ]
    assert {frozenset(k) for k in kinds} == {
        frozenset({ResourceKind.CPU}), frozenset({ResourceKind.MEMORY})
    }


def test_pod_scale_reference_layout():
    layout = build_reference_layout(DcKind.POD_SCALE, 2, 2, 2)
    # Each pod: one rack of 6 CPU nodes and one rack of 6 memory nodes.
    for pod in range(2):
        racks = [r for r in range(layout.n_racks) if layout.rack_pod[r] == pod]
        assert len(racks) == 2
        kinds = []
        for rack in racks:
            cpus = layout.rack_cpus(rack)
            mems = layout.rack_mems(rack)
            assert not (cpus and mems)
            nodes = {c.node for c in cpus} | {m.node for m in mems}
            assert len(nodes) == 6
            kinds.append(bool(cpus))
        assert sorted(kinds) == [False, True]


def test_per_class_component_counts_match_reference():
    for kind in DcKind:
        layout = build_reference_layout(kind, 2, 2, 2)
        for class_index in range(3):
            assert sum(1 for c in layout.cpus
                       if c.class_index == class_index) == 8
            assert sum(1 for m in layout.mems
                       if m.class_index == class_index) == 8


def test_pod_scale_needs_two_racks():
    with pytest.raises(ConfigurationError):
        build_reference_layout(DcKind.POD_SCALE, 2, 1, 2)


def test_counts_must_be_positive():
    with pytest.raises(ConfigurationError):
        build_reference_layout(DcKind.TRADITIONAL, 0, 2, 2)


def test_latency_classes():
    layout = build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)
    assert latency_class(layout, 0, 0) == 1  # same server
    assert latency_class(layout, 0, 1) == 2  # same rack, different node
    # Components in different pods.
    far_mem = next(m for m in layout.mems if m.pod != layout.cpus[0].pod)
    assert latency_class(layout, 0, far_mem.id) == 4

    rs = build_reference_layout(DcKind.RACK_SCALE, 2, 2, 2)
    same_rack_mem = next(m for m in rs.mems if m.rack == rs.cpus[0].rack)
    assert latency_class(rs, 0, same_rack_mem.id) == 2


def test_latency_unknown_component():
    layout = build_reference_layout(DcKind.TRADITIONAL, 1, 1, 1)
    with pytest.raises(UnknownComponentError):
        latency_class(layout, 99, 0)


def test_max_latency_for_each_kind():
    assert max_latency_for(DcKind.TRADITIONAL) == 1
    assert max_latency_for(DcKind.RACK_SCALE) == 2
    assert max_latency_for(DcKind.LOGICAL_RACK_SCALE) == 2
    assert max_latency_for(DcKind.POD_SCALE) == 3


def test_logical_rack_scale_shares_traditional_hardware():
    trad = build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)
    lrs = build_reference_layout(DcKind.LOGICAL_RACK_SCALE, 2, 2, 2)
    assert [(c.node, c.rack, c.pod) for c in trad.cpus] == \
           [(c.node, c.rack, c.pod) for c in lrs.cpus]
    assert [(m.node, m.rack, m.pod) for m in trad.mems] == \
           [(m.node, m.rack, m.pod) for m in lrs.mems]
    # Co-location stays reachable under the relaxed bound.
    assert relation_of(lrs.cpus[0], lrs.mems[0]) == 1 <= max_latency_for(
        DcKind.LOGICAL_RACK_SCALE)
