import pytest

from composedc.fabric import (
    ES_ENERGY_PER_BIT_DATASHEET,
    ES_ENERGY_PER_BIT_DEFAULT,
    FabricKind,
    FabricParams,
    compute_pair_energy_table,
    default_fabric,
    north_south_energy,
    pair_energy,
)
from composedc.model import ConfigurationError, DcKind, build_reference_layout

PJ = 1e-12


def test_default_es_energy_is_dynamic_range_over_capacity():
    assert ES_ENERGY_PER_BIT_DEFAULT == pytest.approx(181.0 / 6.4e12)
    assert ES_ENERGY_PER_BIT_DEFAULT == pytest.approx(28.28e-12, rel=1e-3)
    # The datasheet figure stays available as an override.
    fab = default_fabric(FabricKind.ELECTRICAL).with_es_energy(
        ES_ENERGY_PER_BIT_DATASHEET)
    assert fab.es_energy_per_bit == 0.028e-12


def test_fabric_validation():
    with pytest.raises(ConfigurationError):
        FabricParams(FabricKind.OPTICAL, wss_power=-1.0)
    with pytest.raises(ConfigurationError):
        FabricParams(FabricKind.OPTICAL, aggregation_switches=0)


def test_optical_pair_energies_by_distance():
    fab = default_fabric(FabricKind.OPTICAL)
    assert pair_energy(fab, 1) == pytest.approx(0.5 * PJ)
    # Two node interfaces plus the rack backplane.
    assert pair_energy(fab, 2) == pytest.approx(2.0 * PJ)
    assert pair_energy(fab, 3) == pytest.approx(3.0 * PJ)
    assert pair_energy(fab, 4) == pytest.approx(3.0 * PJ)


def test_electrical_pair_energies_add_switch_hops():
    fab = default_fabric(FabricKind.ELECTRICAL)
    es = fab.es_energy_per_bit
    assert pair_energy(fab, 1) == pytest.approx(0.5 * PJ)  # on-board only
    assert pair_energy(fab, 2) == pytest.approx(2.0 * PJ + es)
    assert pair_energy(fab, 3) == pytest.approx(3.0 * PJ + 2 * es)
    assert pair_energy(fab, 4) == pytest.approx(3.0 * PJ + 3 * es)


def test_hybrid_pair_energies_charge_one_switch_per_rack_crossed():
    fab = default_fabric(FabricKind.HYBRID)
    es = fab.es_energy_per_bit
    assert pair_energy(fab, 1) == pytest.approx(0.5 * PJ)
    assert pair_energy(fab, 2) == pytest.approx(2.0 * PJ + es)
    assert pair_energy(fab, 3) == pytest.approx(3.0 * PJ + 2 * es)
    assert pair_energy(fab, 4) == pytest.approx(3.0 * PJ + 2 * es)


def test_north_south_energy_reaches_dc_edge():
    optical = default_fabric(FabricKind.OPTICAL)
    assert north_south_energy(optical) == pytest.approx(12.5 * PJ)
    electrical = default_fabric(FabricKind.ELECTRICAL)
    assert north_south_energy(electrical) == pytest.approx(
        12.5 * PJ + 2 * electrical.es_energy_per_bit)
    hybrid = default_fabric(FabricKind.HYBRID)
    assert north_south_energy(hybrid) == pytest.approx(
        12.5 * PJ + hybrid.es_energy_per_bit)


def _independent_path_walk(layout, fabric, cpu_id, mem_id):
    """Oracle: literal tier walk, written without the table machinery."""
    c = layout.cpu(cpu_id)
    m = layout.mem(mem_id)
    if c.node == m.node:
        tiers = fabric.on_board
        hops = 0
    else:
        tiers = 2 * fabric.on_board + fabric.rack_backplane
        same_rack = c.rack == m.rack
        same_pod = c.pod == m.pod
        if not same_rack:
            tiers += fabric.inter_rack
        if fabric.fabric_kind == FabricKind.OPTICAL:
            hops = 0
        elif fabric.fabric_kind == FabricKind.ELECTRICAL:
            hops = 1 if same_rack else (2 if same_pod else 3)
        else:
            hops = 1 if same_rack else 2
    return tiers + hops * fabric.es_energy_per_bit


@pytest.mark.parametrize("fabric_kind", list(FabricKind))
@pytest.mark.parametrize("dc_kind", list(DcKind))
def test_pair_table_matches_independent_path_walk(fabric_kind, dc_kind):
    layout = build_reference_layout(dc_kind, 2, 2, 2)
    fabric = default_fabric(fabric_kind)
    table = compute_pair_energy_table(layout, fabric)
    for c in layout.cpus[::5]:
        for m in layout.mems[::3]:
            expected = _independent_path_walk(layout, fabric, c.id, m.id)
            assert table.cpu_to_mem[c.id, m.id] == pytest.approx(expected)
            assert table.mem_to_cpu[m.id, c.id] == pytest.approx(expected)


def test_pair_table_same_node_is_on_board_only():
    layout = build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)
    for fabric_kind in FabricKind:
        table = compute_pair_energy_table(layout, default_fabric(fabric_kind))
        for c, m in zip(layout.cpus, layout.mems):
            assert table.cpu_to_mem[c.id, m.id] == pytest.approx(0.5 * PJ)


def test_mem_to_mem_diagonal_is_zero():
    layout = build_reference_layout(DcKind.RACK_SCALE, 2, 2, 2)
    table = compute_pair_energy_table(layout, default_fabric(FabricKind.OPTICAL))
    for m in layout.mems:
        assert table.mem_to_mem[m.id, m.id] == 0.0
