"""Network fabric parameters and per-pair energy-per-bit tables.

Three fabrics are modeled. They share the interface (transceiver) energy
tiers; they differ in which switches sit on a path and whether those
switches charge a per-bit toll:

- electrical: a multi-tier switched fabric. Every inter-node path crosses
  the top-of-rack switch, an inter-rack path adds the aggregation switch,
  and an inter-pod path adds a second aggregation hop. Each crossing adds
  the switch's load-proportional energy per bit.
- hybrid: an electrical first-tier switch inside each rack the path
  touches, with circuit-switched optical upper tiers that carry no
  per-bit cost.
- optical: circuit switches everywhere; only interface energies count.

The interface-energy composition of a path is a documented reconstruction:
both endpoints pay the on-board (node) interface, and each fabric tier the
path climbs through is paid once (rack backplane for inter-node, plus the
inter-rack fabric for anything leaving the rack). Same-node pairs pay the
on-board energy only. North-south (IO) traffic climbs every tier above the
source node and additionally pays the DC-edge interface.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    Component,
    ConfigurationError,
    DcLayout,
    LATENCY_SAME_NODE,
    LATENCY_SAME_RACK,
    LATENCY_SAME_POD,
    relation_of,
)
from enum import Enum


class FabricKind(str, Enum):
    ELECTRICAL = "electrical"
    HYBRID = "hybrid"
    OPTICAL = "optical"


#: Default load-proportional energy of an electrical switch: dynamic power
#: range 181 W over 6.4 Tb/s switching capacity. A vendor-datasheet
#: alternative of 0.028 pJ/b is kept available as a config override.
ES_ENERGY_PER_BIT_DEFAULT = 181.0 / 6.4e12
ES_ENERGY_PER_BIT_DATASHEET = 0.028e-12


@dataclass(frozen=True)
class FabricParams:
    """Power figures for one fabric flavor. Energies in J/b, powers in W."""

    fabric_kind: FabricKind
    es_idle_power: float = 312.0
    es_peak_power: float = 493.0
    es_energy_per_bit: float = ES_ENERGY_PER_BIT_DEFAULT
    wss_power: float = 50.0
    oxc_power: float = 75.0
    aggregation_switches: int = 1
    interpod_crossconnects: int = 1
    on_board: float = 0.5e-12
    rack_backplane: float = 1.0e-12
    inter_rack: float = 1.0e-12
    inter_dc: float = 10.0e-12
    #: Electrical switch hops charged to one north-south flow (rack tier +
    #: aggregation tier). The DC-edge hop count is not pinned down by the
    #: reference topologies, so it is configurable.
    ns_electrical_hops: int = 2

    def __post_init__(self) -> None:
        for name in (
            "es_idle_power",
            "es_peak_power",
            "es_energy_per_bit",
            "wss_power",
            "oxc_power",
            "on_board",
            "rack_backplane",
            "inter_rack",
            "inter_dc",
        ):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.aggregation_switches < 1 or self.interpod_crossconnects < 1:
            raise ConfigurationError("switch counts A and B must be >= 1")

    def with_es_energy(self, value: float) -> "FabricParams":
        return replace(self, es_energy_per_bit=value)


def default_fabric(kind: FabricKind | str) -> FabricParams:
    return FabricParams(fabric_kind=FabricKind(kind))


def _interface_energy(fabric: FabricParams, relation: int) -> float:
    if relation == LATENCY_SAME_NODE:
        return fabric.on_board
    energy = 2.0 * fabric.on_board + fabric.rack_backplane
    if relation > LATENCY_SAME_RACK:
        energy += fabric.inter_rack
    return energy


def _switch_hops(kind: FabricKind, relation: int) -> int:
    if relation == LATENCY_SAME_NODE:
        return 0
    if kind == FabricKind.OPTICAL:
        return 0
    if kind == FabricKind.ELECTRICAL:
        # ToR, then one aggregation hop per tier climbed above the rack.
        if relation == LATENCY_SAME_RACK:
            return 1
        if relation == LATENCY_SAME_POD:
            return 2
        return 3
    # Hybrid: one electrical first-tier switch per rack the path touches.
    return 1 if relation == LATENCY_SAME_RACK else 2


def pair_energy(fabric: FabricParams, relation: int) -> float:
    """Energy per bit (J/b) for traffic between two components at the
    given distance class."""
    return _interface_energy(fabric, relation) + _switch_hops(
        fabric.fabric_kind, relation
    ) * fabric.es_energy_per_bit


def north_south_energy(fabric: FabricParams) -> float:
    """Energy per bit for traffic between a component and the DC edge."""
    tiers = (
        fabric.on_board + fabric.rack_backplane + fabric.inter_rack + fabric.inter_dc
    )
    hops = {
        FabricKind.ELECTRICAL: fabric.ns_electrical_hops,
        FabricKind.HYBRID: 1,
        FabricKind.OPTICAL: 0,
    }[fabric.fabric_kind]
    return tiers + hops * fabric.es_energy_per_bit


@dataclass(frozen=True)
class PairEnergyTable:
    """Precomputed energy per bit for every ordered component pair.

    ``cpu_to_mem[c, m]`` covers workload uplink traffic, ``mem_to_cpu[m, c]``
    the downlink, ``mem_to_mem[x, y]`` shuffle traffic between distinct
    memory components (the diagonal is zero: co-located shuffle never
    enters the fabric), and ``north_south`` is the scalar for DC in/outbound
    traffic.
    """

    fabric_kind: FabricKind
    cpu_to_mem: np.ndarray
    mem_to_cpu: np.ndarray
    mem_to_mem: np.ndarray
    north_south: float


def compute_pair_energy_table(
    layout: DcLayout, fabric: FabricParams
) -> PairEnergyTable:
    by_relation = {
        rel: pair_energy(fabric, rel) for rel in (1, 2, 3, 4)
    }

    def table(rows: tuple[Component, ...], cols: tuple[Component, ...]) -> np.ndarray:
        out = np.empty((len(rows), len(cols)))
        for a in rows:
            for b in cols:
                out[a.id, b.id] = by_relation[relation_of(a, b)]
        return out

    cpu_to_mem = table(layout.cpus, layout.mems)
    mem_to_mem = table(layout.mems, layout.mems)
    np.fill_diagonal(mem_to_mem, 0.0)
    return PairEnergyTable(
        fabric_kind=fabric.fabric_kind,
        cpu_to_mem=cpu_to_mem,
        mem_to_cpu=cpu_to_mem.T.copy(),
        mem_to_mem=mem_to_mem,
        north_south=north_south_energy(fabric),
    )
