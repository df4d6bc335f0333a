import pytest

from composedc.exact import solve_exact
from composedc.fabric import FabricKind, default_fabric
from composedc.lpformat import (
    export_lp,
    parse_lp,
    placement_from_solution,
    read_solution,
    solve_lp_model,
)
from composedc.model import DcKind, build_reference_layout
from composedc.placement import check, objective
from composedc.workloads import WorkloadClass, generate, split_to_microservices

OPT = default_fabric(FabricKind.OPTICAL)


@pytest.fixture(scope="module")
def small_instance():
    layout = build_reference_layout(DcKind.RACK_SCALE, 1, 2, 2)
    wls, shuffle = generate(3, WorkloadClass.CPU_INTENSIVE, seed=5)
    return layout, wls, shuffle


def test_export_contains_sections_and_names(small_instance):
    layout, wls, shuffle = small_instance
    text = export_lp(layout, OPT, wls, shuffle)
    for token in ("Minimize", "Subject To", "Bounds", "Binaries",
                  "Generals", "End", "WCL_w0_c0", "WML_w0_m0", "CA_c0",
                  "RS_r0", "PS_p0", "NAR", "NAP", "Y_w0_c0_m0",
                  "latency_w0", "ONE = 1"):
        assert token in text


def test_round_trip_parse_then_export_is_stable(small_instance):
    layout, wls, shuffle = small_instance
    text = export_lp(layout, OPT, wls, shuffle)
    model = parse_lp(text)
    # Every written coefficient must be recovered exactly.
    assert model.sense == "minimize"
    idle = layout.cpu_class(0).idle_power
    assert model.objective["CA_c0"] == idle
    assert model.objective["BETA_w0"] == 2000.0
    cap_row = next(r for r in model.constraints if r[0] == "cpu_cap_c0")
    assert cap_row[2] == "<="
    assert cap_row[3] == layout.cpu_class(0).capacity
    assert cap_row[1]["WCL_w0_c0"] == wls[0].wc
    lat_row = next(r for r in model.constraints if r[0] == "latency_w0")
    assert lat_row[3] == 2.0  # rack-scale bound
    assert model.bounds["ONE"] == (1.0, 1.0)
    assert "NAR" in model.generals and "WCL_w0_c0" in model.binaries


def test_reparse_reproduces_coefficient_matrix_exactly(small_instance):
    layout, wls, shuffle = small_instance
    text = export_lp(layout, OPT, wls, shuffle)
    first = parse_lp(text)
    second = parse_lp(text)
    assert first.objective == second.objective
    assert first.constraints == second.constraints
    # Full-precision floats survive the text round trip: the WCL objective
    # coefficient is the power-factor term plus the north-south share.
    from composedc.fabric import north_south_energy

    expected = (layout.cpu_class(0).power_factor * wls[0].wc
                + (wls[0].tci_up + wls[0].tci_down) * 1e9
                * north_south_energy(OPT))
    assert first.objective["WCL_w0_c0"] - expected == 0.0


def test_external_solver_matches_native(small_instance):
    layout, wls, shuffle = small_instance
    text = export_lp(layout, OPT, wls, shuffle)
    value, solution = solve_lp_model(parse_lp(text))
    native = solve_exact(layout, OPT, wls, shuffle)
    assert native.proven_optimal
    assert value == pytest.approx(native.objective, rel=1e-4)
    rebuilt = placement_from_solution(solution, layout, wls)
    assert check(rebuilt, layout, wls) == []
    assert objective(rebuilt, layout, OPT, wls, shuffle) == pytest.approx(
        native.objective, rel=1e-6)


def test_external_solver_matches_native_with_integrated():
    layout = build_reference_layout(DcKind.LOGICAL_RACK_SCALE, 1, 1, 1)
    parents, _ = generate(2, WorkloadClass.CPU_INTENSIVE, seed=9)
    integrated, micro = split_to_microservices(parents, parts=2)
    text = export_lp(layout, OPT, micro, None, DcKind.LOGICAL_RACK_SCALE,
                     integrated=integrated)
    assert "integrated_cpu_i0" in text
    value, solution = solve_lp_model(parse_lp(text))
    native = solve_exact(layout, OPT, micro, None,
                         DcKind.LOGICAL_RACK_SCALE, integrated=integrated)
    assert value == pytest.approx(native.objective, rel=1e-4)


def test_empty_workload_set_export(small_instance):
    layout, _, _ = small_instance
    text = export_lp(layout, OPT, [])
    model = parse_lp(text)
    # Only static constants on the pinned ONE variable and activity rows.
    assert model.objective.get("ONE") == pytest.approx(75.0)
    value, _ = solve_lp_model(model)
    assert value == pytest.approx(75.0)  # B cross-connects stay priced


def test_solution_file_reader():
    text = """Model status
Optimal

# Columns 4
WCL_w0_c3 1
WML_w0_m2 1
NAR 1
BETA_w0 0
"""
    values = read_solution(text)
    assert values == {"WCL_w0_c3": 1.0, "WML_w0_m2": 1.0, "NAR": 1.0,
                      "BETA_w0": 0.0}
    layout = build_reference_layout(DcKind.RACK_SCALE, 1, 2, 2)
    wls, _ = generate(1, WorkloadClass.CPU_INTENSIVE, seed=1)
    placement = placement_from_solution(values, layout, wls)
    assert placement.wcl[0] == 3
    assert placement.wml[0] == 2
