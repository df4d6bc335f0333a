import pytest

from composedc.fabric import FabricKind, default_fabric
from composedc.model import DcKind, build_reference_layout
from composedc.placement import (
    InfeasiblePlacementError,
    ObjectiveParams,
    Placement,
    check,
    derive,
    objective,
)
from composedc.power import report
from composedc.workloads import (
    ShuffleMatrix,
    Workload,
    WorkloadClass,
    generate,
    split_to_microservices,
)


def _wl(wid, wc, wm, **kw):
    return Workload(wid, WorkloadClass.CPU_INTENSIVE, wc, wm, **kw)


@pytest.fixture
def trad():
    return build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)


def test_derive_empty(trad):
    placement = derive({0: None}, {0: None}, trad)
    assert placement.nar == 0
    assert placement.nap == 0
    assert placement.served == {0: False}
    assert placement.blocked_count == 1


def test_derive_one_workload(trad):
    placement = derive({0: 0}, {0: 0}, trad)
    assert placement.served[0]
    assert placement.rack_active == frozenset({0})
    assert placement.nar == 1
    assert placement.cpu_rack[0] == 0
    assert placement.mem_rack[0] == 0


def test_derive_two_pods(trad):
    far_cpu = next(c.id for c in trad.cpus if c.pod == 1)
    far_mem = next(m.id for m in trad.mems if m.pod == 1)
    placement = derive({0: 0, 1: far_cpu}, {0: 0, 1: far_mem}, trad)
    assert placement.nap == 2


def test_check_capacity_violation(trad):
    wls = [_wl(0, 1.9, 4.0), _wl(1, 1.8, 4.0)]
    placement = derive({0: 0, 1: 0}, {0: 0, 1: 1}, trad)
    violations = check(placement, trad, wls)
    assert any(v.constraint == "cpu_capacity" and v.lhs == pytest.approx(3.7)
               and v.rhs == pytest.approx(3.6) for v in violations)


def test_check_co_serving(trad):
    wls = [_wl(0, 1.0, 4.0)]
    placement = derive({0: 0}, {0: None}, trad)
    violations = check(placement, trad, wls)
    assert [v.constraint for v in violations] == ["co_serving"]


def test_check_latency_bound_per_kind():
    pod_layout = build_reference_layout(DcKind.POD_SCALE, 2, 2, 2)
    wls = [_wl(0, 1.0, 4.0)]
    other_pod_mem = next(m.id for m in pod_layout.mems if m.pod == 1)
    placement = derive({0: 0}, {0: other_pod_mem}, pod_layout)
    violations = check(placement, pod_layout, wls)
    assert any(v.constraint == "latency_bound" and v.lhs == 4 and v.rhs == 3
               for v in violations)
    # Same pod passes.
    same_pod_mem = next(m.id for m in pod_layout.mems if m.pod == 0)
    placement = derive({0: 0}, {0: same_pod_mem}, pod_layout)
    assert check(placement, pod_layout, wls) == []


def test_check_per_workload_latency_override(trad):
    relaxed = [Workload(0, WorkloadClass.CPU_INTENSIVE, 1.0, 4.0, max_lat=2)]
    same_rack_mem = next(m.id for m in trad.mems
                         if m.rack == 0 and m.node != trad.cpus[0].node)
    placement = derive({0: 0}, {0: same_rack_mem}, trad)
    assert check(placement, trad, relaxed) == []
    # Without the override the kind bound (same node) applies.
    strict = [Workload(0, WorkloadClass.CPU_INTENSIVE, 1.0, 4.0)]
    violations = check(placement, trad, strict)
    assert [v.constraint for v in violations] == ["latency_bound"]


def test_check_integrated_all_or_nothing(trad):
    parents, _ = generate(2, WorkloadClass.CPU_INTENSIVE, seed=1)
    integrated, micro = split_to_microservices(parents, parts=2)
    wcl = {m.id: None for m in micro}
    wml = {m.id: None for m in micro}
    # Serve only one micro-service of integrated workload 0.
    wcl[0], wml[0] = 0, 0
    placement = derive(wcl, wml, trad)
    violations = check(placement, trad, micro, integrated=integrated)
    assert any(v.constraint == "integrated_all_or_nothing" for v in violations)
    # Serving both members clears it.
    wcl[1], wml[1] = 1, 1
    placement = derive(wcl, wml, trad)
    assert not [v for v in check(placement, trad, micro, integrated=integrated)
                if v.constraint == "integrated_all_or_nothing"]


def test_objective_blocking_penalty_only(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls = [_wl(i, 1.0, 4.0) for i in range(5)]
    placement = derive({w.id: None for w in wls}, {w.id: None for w in wls},
                       trad)
    value = objective(placement, trad, fab, wls, params=ObjectiveParams(2000.0))
    assert value == pytest.approx(10000.0)


def test_objective_decomposition(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls, shuffle = generate(6, WorkloadClass.CPU_INTENSIVE, seed=4)
    # One workload per high-performance server across both pods.
    hp = [c.id for c in trad.cpus if c.class_index == 0]
    wcl = {w.id: hp[i] for i, w in enumerate(wls)}
    wml = {w.id: hp[i] for i, w in enumerate(wls)}
    placement = derive(wcl, wml, trad)
    rep = report(trad, fab, placement, wls, shuffle)
    value = objective(placement, trad, fab, wls, shuffle)
    assert value == rep.tdpc + 2000.0 * placement.blocked_count


def test_objective_rejects_infeasible(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls = [_wl(0, 3.7, 4.0)]
    placement = derive({0: 0}, {0: 0}, trad)
    with pytest.raises(InfeasiblePlacementError):
        objective(placement, trad, fab, wls)


def test_gratuitous_second_rack_increases_objective(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls = [_wl(0, 1.0, 4.0), _wl(1, 1.0, 4.0)]
    consolidated = derive({0: 0, 1: 1}, {0: 0, 1: 1}, trad)
    other_rack_cpu = next(c.id for c in trad.cpus
                          if c.rack == 1 and c.class_index == 0)
    spread = derive({0: 0, 1: other_rack_cpu}, {0: 0, 1: other_rack_cpu}, trad)
    assert objective(spread, trad, fab, wls) > objective(
        consolidated, trad, fab, wls)


def test_placement_serialization_round_trip(trad):
    placement = derive({0: 3, 1: None}, {0: 5, 1: None}, trad)
    data = placement.to_dict()
    wcl, wml = Placement.assignment_from_dict(data)
    again = derive(wcl, wml, trad)
    assert again == placement
