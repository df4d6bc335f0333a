"""Physical and logical layout of a composable data center.

A layout is a four-level hierarchy (pods > racks > nodes > components)
holding CPU and memory components. Four flavors are supported:

- ``TRADITIONAL``: heterogeneous nodes, one CPU + one memory per node,
  sharing a server index. Logical servers form inside a node.
- ``RACK_SCALE``: homogeneous nodes (all-CPU or all-memory) mixed inside
  each rack. Logical servers form inside a rack.
- ``POD_SCALE``: homogeneous racks (all-CPU or all-memory) mixed inside
  each pod. Logical servers form inside a pod.
- ``LOGICAL_RACK_SCALE``: the traditional hardware, but with the locality
  constraint relaxed to the rack. Only the permitted CPU-memory distance
  differs from ``TRADITIONAL``; the hardware is identical.

Component ids are dense integers per resource kind, assigned in
(pod, rack, node, slot) order, which is the canonical tie-breaking order
used everywhere else in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class ConfigurationError(ValueError):
    """A structurally impossible or invalid configuration was requested."""


class UnknownComponentError(KeyError):
    """A component id does not exist in the layout."""


class ResourceKind(str, Enum):
    CPU = "cpu"
    MEMORY = "memory"


class DcKind(str, Enum):
    TRADITIONAL = "traditional"
    RACK_SCALE = "rack-scale"
    POD_SCALE = "pod-scale"
    LOGICAL_RACK_SCALE = "logical-rack-scale"


#: Inter-component distance abstraction: 1 same node, 2 same rack,
#: 3 same pod, 4 anywhere in the DC.
LATENCY_SAME_NODE = 1
LATENCY_SAME_RACK = 2
LATENCY_SAME_POD = 3
LATENCY_SAME_DC = 4

#: Idle draw as a fraction of peak, shared default for CPU and memory classes.
DEFAULT_IDLE_FRACTION = 0.70


@dataclass(frozen=True)
class ComponentClass:
    """A CPU or memory component model: capacity, peak power, idle fraction.

    ``capacity`` is GHz for CPU classes and GB for memory classes.
    ``power_factor`` is the slope of the linear load-power profile,
    (peak - idle) / capacity, in W per GHz or W per GB.
    """

    name: str
    kind: ResourceKind
    capacity: float
    peak_power: float
    idle_fraction: float = DEFAULT_IDLE_FRACTION

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise ConfigurationError(f"class {self.name}: capacity must be > 0")
        if self.peak_power <= 0:
            raise ConfigurationError(f"class {self.name}: peak_power must be > 0")
        if not 0.0 <= self.idle_fraction <= 1.0:
            raise ConfigurationError(
                f"class {self.name}: idle_fraction must be in [0, 1]"
            )

    @property
    def idle_power(self) -> float:
        return self.idle_fraction * self.peak_power

    @property
    def power_factor(self) -> float:
        return (self.peak_power - self.idle_power) / self.capacity

    @property
    def efficiency_rank(self) -> float:
        """Power factor normalized by capacity; lower means more efficient."""
        return self.power_factor / self.capacity


@dataclass(frozen=True)
class Component:
    """One placeable CPU or memory unit at a fixed position in the layout."""

    id: int
    kind: ResourceKind
    class_index: int
    node: int
    rack: int
    pod: int


def default_server_classes() -> list[ComponentClass]:
    """The three heterogeneous server classes used by the reference DCs.

    Returned flat: three CPU classes followed by their paired memory
    classes, in descending capacity order (which is also descending
    energy-efficiency order for these values).
    """
    return [
        ComponentClass("hp-cpu", ResourceKind.CPU, 3.6, 130.0),
        ComponentClass("std-cpu", ResourceKind.CPU, 2.66, 95.0),
        ComponentClass("legacy-cpu", ResourceKind.CPU, 2.4, 80.0),
        ComponentClass("hp-mem", ResourceKind.MEMORY, 32.0, 40.0),
        ComponentClass("std-mem", ResourceKind.MEMORY, 24.0, 30.72),
        ComponentClass("legacy-mem", ResourceKind.MEMORY, 8.0, 10.24),
    ]


@dataclass(frozen=True)
class DcLayout:
    """Immutable component allocation of a data center.

    ``cpus`` and ``mems`` are ordered by component id. Node, rack and pod
    ids are dense integers; every component sits in exactly one node,
    every node in exactly one rack, every rack in exactly one pod.
    """

    dc_kind: DcKind
    cpu_classes: tuple[ComponentClass, ...]
    mem_classes: tuple[ComponentClass, ...]
    cpus: tuple[Component, ...]
    mems: tuple[Component, ...]
    node_rack: tuple[int, ...]
    rack_pod: tuple[int, ...]
    n_pods: int

    @property
    def n_racks(self) -> int:
        return len(self.rack_pod)

    @property
    def n_nodes(self) -> int:
        return len(self.node_rack)

    def cpu(self, cpu_id: int) -> Component:
        if not 0 <= cpu_id < len(self.cpus):
            raise UnknownComponentError(f"unknown CPU component {cpu_id}")
        return self.cpus[cpu_id]

    def mem(self, mem_id: int) -> Component:
        if not 0 <= mem_id < len(self.mems):
            raise UnknownComponentError(f"unknown memory component {mem_id}")
        return self.mems[mem_id]

    def component(self, kind: ResourceKind, comp_id: int) -> Component:
        return self.cpu(comp_id) if kind == ResourceKind.CPU else self.mem(comp_id)

    def cpu_class(self, cpu_id: int) -> ComponentClass:
        return self.cpu_classes[self.cpu(cpu_id).class_index]

    def mem_class(self, mem_id: int) -> ComponentClass:
        return self.mem_classes[self.mem(mem_id).class_index]

    def node_components(self, node: int) -> list[Component]:
        out = [c for c in self.cpus if c.node == node]
        out += [m for m in self.mems if m.node == node]
        return out

    def rack_cpus(self, rack: int) -> list[Component]:
        return [c for c in self.cpus if c.rack == rack]

    def rack_mems(self, rack: int) -> list[Component]:
        return [m for m in self.mems if m.rack == rack]

    def validate(self) -> None:
        """Re-check the structural invariants of the declared dc_kind."""
        for comps in (self.cpus, self.mems):
            for c in comps:
                if self.node_rack[c.node] != c.rack:
                    raise ConfigurationError(f"component {c} rack mismatch")
                if self.rack_pod[c.rack] != c.pod:
                    raise ConfigurationError(f"component {c} pod mismatch")
        by_node: dict[int, list[Component]] = {}
        for c in list(self.cpus) + list(self.mems):
            by_node.setdefault(c.node, []).append(c)
        if self.dc_kind in (DcKind.TRADITIONAL, DcKind.LOGICAL_RACK_SCALE):
            for node, comps in by_node.items():
                kinds = sorted(c.kind.value for c in comps)
                if kinds != [ResourceKind.CPU.value, ResourceKind.MEMORY.value]:
                    raise ConfigurationError(
                        f"node {node}: traditional nodes hold exactly one CPU "
                        f"and one memory component"
                    )
        elif self.dc_kind == DcKind.RACK_SCALE:
            for node, comps in by_node.items():
                if len({c.kind for c in comps}) != 1:
                    raise ConfigurationError(f"node {node} is not homogeneous")
            for rack in range(self.n_racks):
                kinds = {c.kind for c in self.rack_cpus(rack)}
                kinds |= {c.kind for c in self.rack_mems(rack)}
                if kinds != {ResourceKind.CPU, ResourceKind.MEMORY}:
                    raise ConfigurationError(
                        f"rack {rack}: rack-scale racks need nodes of both kinds"
                    )
        elif self.dc_kind == DcKind.POD_SCALE:
            for rack in range(self.n_racks):
                kinds = {c.kind for c in self.rack_cpus(rack)}
                kinds |= {c.kind for c in self.rack_mems(rack)}
                if len(kinds) != 1:
                    raise ConfigurationError(f"rack {rack} is not homogeneous")
            for pod in range(self.n_pods):
                kinds = set()
                for rack in range(self.n_racks):
                    if self.rack_pod[rack] != pod:
                        continue
                    kinds |= {c.kind for c in self.rack_cpus(rack)}
                    kinds |= {c.kind for c in self.rack_mems(rack)}
                if kinds != {ResourceKind.CPU, ResourceKind.MEMORY}:
                    raise ConfigurationError(
                        f"pod {pod}: pod-scale pods need racks of both kinds"
                    )


def _split_classes(
    classes: Sequence[ComponentClass],
) -> tuple[list[ComponentClass], list[ComponentClass]]:
    cpu = [c for c in classes if c.kind == ResourceKind.CPU]
    mem = [c for c in classes if c.kind == ResourceKind.MEMORY]
    if not cpu or not mem:
        raise ConfigurationError("classes must contain both CPU and memory kinds")
    if len(cpu) != len(mem):
        raise ConfigurationError(
            "CPU and memory classes must pair up one-to-one per server class"
        )
    return cpu, mem


class _Builder:
    def __init__(self) -> None:
        self.node_rack: list[int] = []
        self.rack_pod: list[int] = []
        self.cpus: list[Component] = []
        self.mems: list[Component] = []

    def add_rack(self, pod: int) -> int:
        self.rack_pod.append(pod)
        return len(self.rack_pod) - 1

    def add_node(self, rack: int) -> int:
        self.node_rack.append(rack)
        return len(self.node_rack) - 1

    def add(self, kind: ResourceKind, class_index: int, node: int) -> Component:
        rack = self.node_rack[node]
        pod = self.rack_pod[rack]
        target = self.cpus if kind == ResourceKind.CPU else self.mems
        comp = Component(len(target), kind, class_index, node, rack, pod)
        target.append(comp)
        return comp


def build_reference_layout(
    dc_kind: DcKind,
    pods: int,
    racks_per_pod: int,
    servers_per_class_per_rack: int,
    classes: Sequence[ComponentClass] | None = None,
) -> DcLayout:
    """Build a layout in the reference allocation scheme of the given kind.

    The layout always contains ``pods * racks_per_pod *
    servers_per_class_per_rack * n_server_classes`` servers' worth of
    components (one CPU + one memory each); only their grouping into
    nodes and racks changes with ``dc_kind``:

    - traditional / logical rack-scale: one heterogeneous node per server,
      ``servers_per_class_per_rack * n_classes`` nodes per rack;
    - rack-scale: per rack, one homogeneous node per (kind, class) holding
      ``servers_per_class_per_rack`` components;
    - pod-scale: racks alternate CPU / memory kind inside each pod and hold
      the pod's nodes of that kind (one node per class and original rack
      slot), so each pod keeps the same total component mix.

    With the default classes and (2 pods, 2 racks, 2 servers/class/rack)
    this reproduces the 24 CPU + 24 memory reference DC.
    """
    if classes is None:
        classes = default_server_classes()
    if pods < 1 or racks_per_pod < 1 or servers_per_class_per_rack < 1:
        raise ConfigurationError("pods, racks and servers per class must be >= 1")
    cpu_classes, mem_classes = _split_classes(classes)
    n_classes = len(cpu_classes)
    spc = servers_per_class_per_rack
    b = _Builder()

    if dc_kind in (DcKind.TRADITIONAL, DcKind.LOGICAL_RACK_SCALE):
        for p in range(pods):
            for _ in range(racks_per_pod):
                rack = b.add_rack(p)
                for k in range(n_classes):
                    for _ in range(spc):
                        node = b.add_node(rack)
                        b.add(ResourceKind.CPU, k, node)
                        b.add(ResourceKind.MEMORY, k, node)
    elif dc_kind == DcKind.RACK_SCALE:
        for p in range(pods):
            for _ in range(racks_per_pod):
                rack = b.add_rack(p)
                for k in range(n_classes):
                    node = b.add_node(rack)
                    for _ in range(spc):
                        b.add(ResourceKind.CPU, k, node)
                for k in range(n_classes):
                    node = b.add_node(rack)
                    for _ in range(spc):
                        b.add(ResourceKind.MEMORY, k, node)
    elif dc_kind == DcKind.POD_SCALE:
        if racks_per_pod < 2:
            raise ConfigurationError(
                "pod-scale pods need at least one CPU rack and one memory rack"
            )
        n_cpu_racks = (racks_per_pod + 1) // 2
        n_mem_racks = racks_per_pod - n_cpu_racks
        for p in range(pods):
            # Node groups carried over from the per-rack allocation: one node
            # per (original rack slot, class), spc components each.
            groups = [(v, k) for v in range(racks_per_pod) for k in range(n_classes)]
            racks = [b.add_rack(p) for _ in range(racks_per_pod)]
            cpu_racks = [r for i, r in enumerate(racks) if i % 2 == 0]
            mem_racks = [r for i, r in enumerate(racks) if i % 2 == 1]
            for kind, kind_racks, count in (
                (ResourceKind.CPU, cpu_racks, n_cpu_racks),
                (ResourceKind.MEMORY, mem_racks, n_mem_racks),
            ):
                per_rack = -(-len(groups) // count)  # ceil division
                for i, (_, k) in enumerate(groups):
                    rack = kind_racks[min(i // per_rack, count - 1)]
                    node = b.add_node(rack)
                    for _ in range(spc):
                        b.add(kind, k, node)
    else:  # pragma: no cover - enum is exhaustive
        raise ConfigurationError(f"unknown dc kind {dc_kind}")

    layout = DcLayout(
        dc_kind=dc_kind,
        cpu_classes=tuple(cpu_classes),
        mem_classes=tuple(mem_classes),
        cpus=tuple(b.cpus),
        mems=tuple(b.mems),
        node_rack=tuple(b.node_rack),
        rack_pod=tuple(b.rack_pod),
        n_pods=pods,
    )
    layout.validate()
    return layout


def relation_of(a: Component, b: Component) -> int:
    """Distance class between two components, symmetric in its arguments."""
    if a.node == b.node:
        return LATENCY_SAME_NODE
    if a.rack == b.rack:
        return LATENCY_SAME_RACK
    if a.pod == b.pod:
        return LATENCY_SAME_POD
    return LATENCY_SAME_DC


def latency_class(layout: DcLayout, cpu_id: int, mem_id: int) -> int:
    """Latency abstraction class between a CPU and a memory component."""
    return relation_of(layout.cpu(cpu_id), layout.mem(mem_id))


def max_latency_for(dc_kind: DcKind) -> int:
    """Largest latency class a CPU-memory pair may span in this DC kind.

    Logical rack-scale shares the rack bound of physical rack-scale but,
    because its hardware keeps heterogeneous nodes, co-location (class 1)
    remains reachable as well.
    """
    return {
        DcKind.TRADITIONAL: LATENCY_SAME_NODE,
        DcKind.RACK_SCALE: LATENCY_SAME_RACK,
        DcKind.LOGICAL_RACK_SCALE: LATENCY_SAME_RACK,
        DcKind.POD_SCALE: LATENCY_SAME_POD,
    }[dc_kind]


def iter_feasible_pairs(
    layout: DcLayout, max_lat: int
) -> Iterable[tuple[int, int]]:
    """All (cpu id, mem id) pairs within the given latency bound, in
    canonical (cpu, mem) id order."""
    for c in layout.cpus:
        for m in layout.mems:
            if relation_of(c, m) <= max_lat:
                yield c.id, m.id
