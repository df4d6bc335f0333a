import pytest

from composedc.exact import (
    InfeasibleInstanceError,
    SolveBudget,
    branch_order,
    candidate_pairs,
    enumerate_exhaustive,
    solve_exact,
)
from composedc.fabric import FabricKind, default_fabric
from composedc.heep import place as heep_place
from composedc.model import DcKind, build_reference_layout
from composedc.placement import ObjectiveParams, check, derive, objective
from composedc.workloads import (
    Workload,
    WorkloadClass,
    generate,
    split_to_microservices,
)

OPT = default_fabric(FabricKind.OPTICAL)


def test_single_workload_single_server():
    from composedc.model import ComponentClass, ResourceKind

    classes = [ComponentClass("c", ResourceKind.CPU, 3.6, 130.0),
               ComponentClass("m", ResourceKind.MEMORY, 32.0, 40.0)]
    layout = build_reference_layout(DcKind.TRADITIONAL, 1, 1, 1, classes)
    assert len(layout.cpus) == 1
    wl = Workload(0, WorkloadClass.CPU_INTENSIVE, 2.0, 8.0)
    res = solve_exact(layout, OPT, [wl])
    assert res.proven_optimal
    # The unique placement: hand-compose its three power terms.
    placement = derive({0: 0}, {0: 0}, layout)
    assert res.objective == objective(placement, layout, OPT, [wl])
    assert res.placement.wcl[0] == 0


def test_zero_workloads():
    layout = build_reference_layout(DcKind.TRADITIONAL, 1, 1, 1)
    res = solve_exact(layout, OPT, [])
    assert res.objective == 0.0
    assert res.proven_optimal


def test_branch_order_hardest_first():
    layout = build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)
    wls = [
        Workload(0, WorkloadClass.CPU_INTENSIVE, 1.0, 4.0),
        Workload(1, WorkloadClass.CPU_INTENSIVE, 3.5, 4.0),
        Workload(2, WorkloadClass.CPU_INTENSIVE, 1.0, 30.0),
    ]
    order = branch_order(wls, layout)
    assert order[0] == 1  # 3.5/3.6 beats 30/32
    assert order[1] == 2


def test_traditional_candidate_pairs_collapse_to_servers():
    layout = build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)
    wl = Workload(0, WorkloadClass.CPU_INTENSIVE, 1.0, 4.0)
    pairs = candidate_pairs(layout, wl, DcKind.TRADITIONAL)
    assert len(pairs) == len(layout.cpus)  # one pair per server
    for c, m in pairs:
        assert layout.cpu(c).node == layout.mem(m).node


@pytest.mark.parametrize("dc_kind", [DcKind.TRADITIONAL, DcKind.RACK_SCALE,
                                     DcKind.POD_SCALE,
                                     DcKind.LOGICAL_RACK_SCALE])
def test_bb_matches_exhaustive_oracle(dc_kind):
    layout = build_reference_layout(dc_kind, 1, 2, 1)
    wls, shuffle = generate(3, WorkloadClass.CPU_INTENSIVE, seed=6)
    bb = solve_exact(layout, OPT, wls, shuffle)
    oracle = enumerate_exhaustive(layout, OPT, wls, shuffle)
    assert bb.proven_optimal
    assert bb.objective == oracle.objective


def test_bb_not_worse_than_heep_and_feasible():
    layout = build_reference_layout(DcKind.RACK_SCALE, 2, 2, 2)
    wls, shuffle = generate(10, WorkloadClass.CPU_INTENSIVE, seed=12)
    hr = heep_place(layout, OPT, wls, shuffle)
    res = solve_exact(layout, OPT, wls, shuffle, warm_starts=[hr.placement],
                      budget=SolveBudget(max_nodes=150_000))
    heep_value = objective(hr.placement, layout, OPT, wls, shuffle)
    assert res.objective <= heep_value + 1e-9
    assert check(res.placement, layout, wls) == []


def test_deterministic_node_counts():
    layout = build_reference_layout(DcKind.RACK_SCALE, 1, 2, 2)
    wls, shuffle = generate(5, WorkloadClass.CPU_INTENSIVE, seed=30)
    a = solve_exact(layout, OPT, wls, shuffle)
    b = solve_exact(layout, OPT, wls, shuffle)
    assert a.objective == b.objective
    assert a.nodes_explored == b.nodes_explored
    assert a.placement == b.placement


def test_budget_exhaustion_returns_incumbent_unproven():
    layout = build_reference_layout(DcKind.RACK_SCALE, 2, 2, 2)
    wls, shuffle = generate(20, WorkloadClass.CPU_INTENSIVE, seed=1)
    hr = heep_place(layout, OPT, wls, shuffle)
    res = solve_exact(layout, OPT, wls, shuffle, warm_starts=[hr.placement],
                      budget=SolveBudget(max_nodes=3000))
    assert not res.proven_optimal
    assert res.objective <= objective(hr.placement, layout, OPT, wls, shuffle)
    assert check(res.placement, layout, wls) == []


def test_monotone_restriction_of_dc_kind():
    # Tightening the latency bound on the same hardware never helps.
    layout = build_reference_layout(DcKind.TRADITIONAL, 1, 2, 1)
    wls, shuffle = generate(3, WorkloadClass.CPU_INTENSIVE, seed=44)
    values = {}
    for dc_kind in (DcKind.POD_SCALE, DcKind.LOGICAL_RACK_SCALE,
                    DcKind.TRADITIONAL):
        res = solve_exact(layout, OPT, wls, shuffle, dc_kind=dc_kind)
        assert res.proven_optimal
        values[dc_kind] = res.objective
    assert values[DcKind.POD_SCALE] <= values[DcKind.LOGICAL_RACK_SCALE] + 1e-9
    assert values[DcKind.LOGICAL_RACK_SCALE] <= values[DcKind.TRADITIONAL] + 1e-9


def test_infeasible_without_blocking():
    layout = build_reference_layout(DcKind.TRADITIONAL, 1, 1, 1)
    big = Workload(0, WorkloadClass.MEM_INTENSIVE, 1.0, 33.0)
    with pytest.raises(InfeasibleInstanceError):
        solve_exact(layout, OPT, [big], allow_blocking=False)
    res = solve_exact(layout, OPT, [big])
    assert res.placement.blocked_count == 1
    assert res.objective == pytest.approx(2000.0)


def test_alpha_penalty_counts_each_blocked_workload():
    layout = build_reference_layout(DcKind.TRADITIONAL, 1, 1, 1)
    wls = [Workload(i, WorkloadClass.MEM_INTENSIVE, 1.0, 33.0) for i in range(3)]
    res = solve_exact(layout, OPT, wls, params=ObjectiveParams(alpha=500.0))
    assert res.objective == pytest.approx(1500.0)


def test_integrated_all_or_nothing_in_solver():
    layout = build_reference_layout(DcKind.LOGICAL_RACK_SCALE, 1, 1, 1)
    parents = [Workload(0, WorkloadClass.MEM_INTENSIVE, 1.0, 20.0),
               Workload(1, WorkloadClass.MEM_INTENSIVE, 1.0, 30.0)]
    integrated, micro = split_to_microservices(parents, parts=2)
    res = solve_exact(layout, OPT, micro, dc_kind=DcKind.LOGICAL_RACK_SCALE,
                      integrated=integrated)
    assert res.proven_optimal
    assert check(res.placement, layout, micro, DcKind.LOGICAL_RACK_SCALE,
                 integrated) == []
    for iw in integrated:
        states = {res.placement.served[m] for m in iw.members}
        assert len(states) == 1


def test_partitioned_path_agrees_with_flat_engine(monkeypatch):
    # The same instance solved through both search paths must agree.
    import composedc.exact as exact_mod

    layout = build_reference_layout(DcKind.RACK_SCALE, 1, 2, 2)
    wls, shuffle = generate(8, WorkloadClass.CPU_INTENSIVE, seed=77)
    part = solve_exact(layout, OPT, wls, shuffle)
    assert part.proven_optimal
    monkeypatch.setattr(exact_mod, "PARTITION_THRESHOLD", 99)
    flat = solve_exact(layout, OPT, wls, shuffle,
                       budget=SolveBudget(max_nodes=4_000_000))
    assert flat.proven_optimal
    assert flat.objective == pytest.approx(part.objective, abs=1e-9)
