import math

import pytest

from composedc.fabric import FabricKind, default_fabric
from composedc.model import DcKind, UnknownComponentError, build_reference_layout
from composedc.placement import derive
from composedc.power import report, static_tnpc, tcpc, tmpc, tnpc
from composedc.workloads import ShuffleMatrix, Workload, WorkloadClass


def _wl(wid, wc, wm, **kw):
    defaults = dict(tcm_up=0.0, tcm_down=0.0, tci_up=0.0, tci_down=0.0,
                    tri_up=0.0, tri_down=0.0)
    defaults.update(kw)
    return Workload(wid, WorkloadClass.CPU_INTENSIVE, wc, wm, **defaults)


@pytest.fixture
def trad():
    return build_reference_layout(DcKind.TRADITIONAL, 2, 2, 2)


def test_tcpc_empty_placement_is_zero(trad):
    placement = derive({}, {}, trad)
    assert tcpc(trad, placement, []) == 0.0
    assert tmpc(trad, placement, []) == 0.0


def test_tcpc_single_workload_on_high_performance_class(trad):
    # 0.7*130 + ((130-91)/3.6)*2 on the 3.6 GHz class.
    wls = [_wl(0, 2.0, 8.0)]
    placement = derive({0: 0}, {0: 0}, trad)
    assert tcpc(trad, placement, wls) == pytest.approx(112.667, abs=1e-3)


def test_tcpc_idle_counted_once_for_shared_component(trad):
    wls = [_wl(0, 1.0, 4.0), _wl(1, 2.0, 4.0)]
    placement = derive({0: 0, 1: 0}, {0: 0, 1: 1}, trad)
    # 91 + 10.833 * 3
    assert tcpc(trad, placement, wls) == pytest.approx(123.5, abs=1e-3)


def test_tmpc_values(trad):
    wls = [_wl(0, 1.0, 8.0)]
    placement = derive({0: 0}, {0: 0}, trad)
    # 0.7*40 + ((40-28)/32)*8 on the 32 GB class.
    assert tmpc(trad, placement, wls) == pytest.approx(31.0)
    # Full load on the 8 GB / 10.24 W class consumes exactly peak power.
    legacy_mem = next(m.id for m in trad.mems
                      if trad.mem_class(m.id).capacity == 8.0)
    placement = derive({0: 0}, {0: legacy_mem}, trad)
    assert tmpc(trad, placement, wls) == pytest.approx(10.24)


def test_tcpc_unknown_component(trad):
    wls = [_wl(0, 1.0, 4.0)]
    with pytest.raises(UnknownComponentError):
        placement = derive({0: 999}, {0: 0}, trad)
        tcpc(trad, placement, wls)


def test_static_tnpc_terms():
    optical = default_fabric(FabricKind.OPTICAL)
    assert static_tnpc(optical, 2, 1) == pytest.approx(2 * 50 + 75 * (1 + 1))
    electrical = default_fabric(FabricKind.ELECTRICAL)
    assert static_tnpc(electrical, 1, 1) == pytest.approx(2 * 312)
    hybrid = default_fabric(FabricKind.HYBRID)
    assert static_tnpc(hybrid, 3, 2) == pytest.approx(3 * 312 + 75 * 3)
    for fab in (optical, electrical, hybrid):
        assert static_tnpc(fab, 0, 0) == 0.0


def test_tnpc_zero_when_nothing_served(trad):
    placement = derive({0: None}, {0: None}, trad)
    for kind in FabricKind:
        assert tnpc(trad, default_fabric(kind), placement,
                    [_wl(0, 1.0, 4.0)]) == 0.0


def test_tnpc_static_plus_dynamic(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    # One served workload on one server: NAR=1, NAP=1.
    wls = [_wl(0, 1.0, 4.0, tcm_up=120.0, tcm_down=100.0,
               tci_up=2.0, tci_down=1.0, tri_up=2.0, tri_down=1.0)]
    placement = derive({0: 0}, {0: 0}, trad)
    static = 1 * 50 + 75 * (1 + 1)
    dynamic = 220e9 * 0.5e-12 + 6e9 * 12.5e-12  # on-board pair + north-south
    assert tnpc(trad, fab, placement, wls) == pytest.approx(static + dynamic)


def test_tnpc_shuffle_between_distinct_components(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls = [_wl(0, 1.0, 4.0), _wl(1, 1.0, 4.0)]
    shuffle = ShuffleMatrix({(0, 1): 10.0})
    # Same rack, different servers: 2.0 pJ/b each way.
    placement = derive({0: 0, 1: 1}, {0: 0, 1: 1}, trad)
    base = tnpc(trad, fab, placement, wls)
    with_shuffle = tnpc(trad, fab, placement, wls, shuffle)
    assert with_shuffle - base == pytest.approx(10e9 * 2.0e-12)
    # Co-located memory demands keep the shuffle off the fabric.
    placement = derive({0: 0, 1: 1}, {0: 0, 1: 0}, trad)
    assert tnpc(trad, fab, placement, wls, shuffle) == pytest.approx(
        tnpc(trad, fab, placement, wls))


def test_report_aggregates_and_utilization(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls = [_wl(0, 1.0, 32.0)]
    placement = derive({0: 0}, {0: 0}, trad)
    rep = report(trad, fab, placement, wls)
    assert rep.tdpc == pytest.approx(rep.tcpc + rep.tmpc + rep.tnpc)
    assert rep.avg_active_mem_util == pytest.approx(1.0)
    assert rep.blocked == 0
    assert rep.active_cpu == rep.active_mem == 1
    assert (rep.nar, rep.nap) == (1, 1)


def test_report_empty_counts_blocked(trad):
    fab = default_fabric(FabricKind.OPTICAL)
    wls = [_wl(0, 1.0, 4.0), _wl(1, 1.0, 4.0)]
    placement = derive({0: None, 1: None}, {0: None, 1: None}, trad)
    rep = report(trad, fab, placement, wls)
    assert rep.tdpc == 0.0
    assert rep.blocked == 2
    assert rep.to_row()[:4] == [0.0, 0.0, 0.0, 0.0]


def test_report_row_field_order():
    assert list(pytest.importorskip("composedc.power").PowerReport.FIELDS) == [
        "tcpc", "tmpc", "tnpc", "tdpc", "blocked", "active_cpu", "active_mem",
        "nar", "nap", "avg_cpu_util", "avg_mem_util",
    ]
