"""Compute and network power of a placed DC.

Component power is linear in load: a component that serves at least one
workload pays its fixed idle power once, plus its power factor times each
hosted demand. Network power splits into a load-proportional part (pair
energies times traffic) and a static part (idle switch power scaled by
active rack and pod counts). A DC with nothing served draws nothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, TYPE_CHECKING

from .fabric import FabricKind, FabricParams, PairEnergyTable, compute_pair_energy_table
from .model import DcLayout, UnknownComponentError
from .workloads import ShuffleMatrix, Workload

if TYPE_CHECKING:  # pragma: no cover
    from .placement import Placement

GBPS = 1e9


@dataclass(frozen=True)
class PowerReport:
    """Power breakdown and activity counters for one placement."""

    tcpc: float
    tmpc: float
    tnpc: float
    tdpc: float
    blocked: int
    active_cpu: int
    active_mem: int
    nar: int
    nap: int
    avg_active_cpu_util: float
    avg_active_mem_util: float

    SCHEMA_VERSION = 1
    FIELDS = (
        "tcpc", "tmpc", "tnpc", "tdpc", "blocked", "active_cpu", "active_mem",
        "nar", "nap", "avg_cpu_util", "avg_mem_util",
    )

    def to_row(self) -> list:
        return [
            self.tcpc, self.tmpc, self.tnpc, self.tdpc, self.blocked,
            self.active_cpu, self.active_mem, self.nar, self.nap,
            self.avg_active_cpu_util, self.avg_active_mem_util,
        ]

    def to_dict(self) -> dict:
        return dict(zip(self.FIELDS, self.to_row()))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _loads(
    placement: "Placement", workloads: Sequence[Workload]
) -> tuple[dict[int, float], dict[int, float]]:
    by_id = {w.id: w for w in workloads}
    cpu_load: dict[int, float] = {}
    mem_load: dict[int, float] = {}
    for w_id, c in placement.wcl.items():
        if c is not None:
            cpu_load.setdefault(c, 0.0)
            cpu_load[c] += by_id[w_id].wc
    for w_id, m in placement.wml.items():
        if m is not None:
            mem_load.setdefault(m, 0.0)
            mem_load[m] += by_id[w_id].wm
    return cpu_load, mem_load


def tcpc(
    layout: DcLayout, placement: "Placement", workloads: Sequence[Workload]
) -> float:
    """Total CPU power: idle once per active component, plus load."""
    by_id = {w.id: w for w in workloads}
    terms = []
    for c in sorted(placement.cpu_active):
        if c >= len(layout.cpus):
            raise UnknownComponentError(f"assignment references unknown CPU {c}")
        terms.append(layout.cpu_class(c).idle_power)
    for w_id in sorted(placement.wcl):
        c = placement.wcl[w_id]
        if c is not None:
            terms.append(layout.cpu_class(c).power_factor * by_id[w_id].wc)
    return math.fsum(terms)


def tmpc(
    layout: DcLayout, placement: "Placement", workloads: Sequence[Workload]
) -> float:
    """Total memory power, mirroring :func:`tcpc`."""
    by_id = {w.id: w for w in workloads}
    terms = []
    for m in sorted(placement.mem_active):
        if m >= len(layout.mems):
            raise UnknownComponentError(f"assignment references unknown memory {m}")
        terms.append(layout.mem_class(m).idle_power)
    for w_id in sorted(placement.wml):
        m = placement.wml[w_id]
        if m is not None:
            terms.append(layout.mem_class(m).power_factor * by_id[w_id].wm)
    return math.fsum(terms)


def static_tnpc(fabric: FabricParams, nar: int, nap: int) -> float:
    """Idle switch power for the given activity counts; zero when the DC
    is entirely off."""
    if nar == 0:
        return 0.0
    kind = fabric.fabric_kind
    if kind == FabricKind.ELECTRICAL:
        return (nar + fabric.aggregation_switches) * fabric.es_idle_power
    if kind == FabricKind.OPTICAL:
        return nar * fabric.wss_power + fabric.oxc_power * (
            nap + fabric.interpod_crossconnects
        )
    return nar * fabric.es_idle_power + fabric.oxc_power * (
        nap + fabric.interpod_crossconnects
    )


def tnpc(
    layout: DcLayout,
    fabric: FabricParams,
    placement: "Placement",
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    table: Optional[PairEnergyTable] = None,
) -> float:
    """Total network power: per-pair dynamic traffic plus static switches."""
    if table is None:
        table = compute_pair_energy_table(layout, fabric)
    by_id = {w.id: w for w in workloads}
    terms = []
    for w_id in sorted(placement.wcl):
        c, m = placement.wcl[w_id], placement.wml[w_id]
        w = by_id[w_id]
        if c is not None and m is not None:
            terms.append(w.tcm_up * GBPS * float(table.cpu_to_mem[c, m]))
            terms.append(w.tcm_down * GBPS * float(table.mem_to_cpu[m, c]))
        if c is not None:
            terms.append((w.tci_up + w.tci_down) * GBPS * table.north_south)
        if m is not None:
            terms.append((w.tri_up + w.tri_down) * GBPS * table.north_south)
    if shuffle:
        for (s, d) in sorted(shuffle.flows):
            x = placement.wml.get(s)
            y = placement.wml.get(d)
            if x is None or y is None or x == y:
                continue
            terms.append(shuffle.flows[(s, d)] * GBPS * float(table.mem_to_mem[x, y]))
    terms.append(static_tnpc(fabric, placement.nar, placement.nap))
    return math.fsum(terms)


def report(
    layout: DcLayout,
    fabric: FabricParams,
    placement: "Placement",
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    table: Optional[PairEnergyTable] = None,
) -> PowerReport:
    cpu_power = tcpc(layout, placement, workloads)
    mem_power = tmpc(layout, placement, workloads)
    net_power = tnpc(layout, fabric, placement, workloads, shuffle, table)
    cpu_load, mem_load = _loads(placement, workloads)
    cpu_utils = [
        cpu_load[c] / layout.cpu_class(c).capacity for c in sorted(placement.cpu_active)
    ]
    mem_utils = [
        mem_load[m] / layout.mem_class(m).capacity for m in sorted(placement.mem_active)
    ]
    return PowerReport(
        tcpc=cpu_power,
        tmpc=mem_power,
        tnpc=net_power,
        tdpc=math.fsum([cpu_power, mem_power, net_power]),
        blocked=placement.blocked_count,
        active_cpu=len(placement.cpu_active),
        active_mem=len(placement.mem_active),
        nar=placement.nar,
        nap=placement.nap,
        avg_active_cpu_util=(math.fsum(cpu_utils) / len(cpu_utils)) if cpu_utils else 0.0,
        avg_active_mem_util=(math.fsum(mem_utils) / len(mem_utils)) if mem_utils else 0.0,
    )
