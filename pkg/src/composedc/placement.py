"""Workload-to-component assignments and their feasibility rules.

A :class:`Placement` maps each workload's CPU demand to at most one CPU
component and its memory demand to at most one memory component. All
activity quantities (served flags, active components, racks, pods) are
derived from those two maps and nothing else, so a placement can always
be re-derived and diffed against itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .model import DcKind, DcLayout, max_latency_for, relation_of
from .workloads import IntegratedWorkload, ShuffleMatrix, Workload

CAPACITY_EPS = 1e-9


class InfeasiblePlacementError(ValueError):
    """Objective evaluation was asked for a placement that violates a
    constraint."""


@dataclass(frozen=True)
class ObjectiveParams:
    """Objective weights: blocking cost plus the big-M constants kept for
    solver-file fidelity."""

    alpha: float = 2000.0
    big_q: float = 100000.0
    big_g: float = 1000.0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")


@dataclass(frozen=True)
class Violation:
    constraint: str
    entities: tuple
    lhs: float
    rhs: float

    def __str__(self) -> str:
        ent = ",".join(str(e) for e in self.entities)
        return f"{self.constraint}[{ent}]: {self.lhs} vs {self.rhs}"

    def to_dict(self) -> dict:
        return {
            "constraint": self.constraint,
            "entities": list(self.entities),
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


@dataclass(frozen=True)
class Placement:
    """An assignment plus every quantity derivable from it."""

    wcl: dict[int, Optional[int]]
    wml: dict[int, Optional[int]]
    served: dict[int, bool]
    cpu_active: frozenset[int]
    mem_active: frozenset[int]
    rack_active: frozenset[int]
    pod_active: frozenset[int]
    nar: int
    nap: int
    cpu_rack: dict[int, int]
    mem_rack: dict[int, int]
    cpu_pod: dict[int, int]
    mem_pod: dict[int, int]

    @property
    def blocked(self) -> dict[int, bool]:
        return {w: not s for w, s in self.served.items()}

    @property
    def blocked_count(self) -> int:
        return sum(1 for s in self.served.values() if not s)

    def pair_of(self, workload_id: int) -> tuple[Optional[int], Optional[int]]:
        return self.wcl.get(workload_id), self.wml.get(workload_id)

    def to_dict(self) -> dict:
        return {
            str(w): [self.wcl[w], self.wml[w]] for w in sorted(self.wcl)
        }

    @staticmethod
    def assignment_from_dict(data: Mapping) -> tuple[dict, dict]:
        wcl = {int(w): (None if pair[0] is None else int(pair[0]))
               for w, pair in data.items()}
        wml = {int(w): (None if pair[1] is None else int(pair[1]))
               for w, pair in data.items()}
        return wcl, wml


def derive(
    wcl: Mapping[int, Optional[int]],
    wml: Mapping[int, Optional[int]],
    layout: DcLayout,
) -> Placement:
    """Compute every derived activity quantity from the two assignment maps.

    Workload ids present in either map are carried through; a workload is
    served only when both of its demands are assigned.
    """
    ids = sorted(set(wcl) | set(wml))
    wcl_full = {w: wcl.get(w) for w in ids}
    wml_full = {w: wml.get(w) for w in ids}
    served = {w: wcl_full[w] is not None and wml_full[w] is not None for w in ids}
    cpu_active = frozenset(c for c in wcl_full.values() if c is not None)
    mem_active = frozenset(m for m in wml_full.values() if m is not None)
    cpu_rack, mem_rack, cpu_pod, mem_pod = {}, {}, {}, {}
    racks, pods = set(), set()
    for w in ids:
        c = wcl_full[w]
        if c is not None:
            comp = layout.cpu(c)
            cpu_rack[w], cpu_pod[w] = comp.rack, comp.pod
            racks.add(comp.rack)
            pods.add(comp.pod)
        m = wml_full[w]
        if m is not None:
            comp = layout.mem(m)
            mem_rack[w], mem_pod[w] = comp.rack, comp.pod
            racks.add(comp.rack)
            pods.add(comp.pod)
    return Placement(
        wcl=wcl_full,
        wml=wml_full,
        served=served,
        cpu_active=cpu_active,
        mem_active=mem_active,
        rack_active=frozenset(racks),
        pod_active=frozenset(pods),
        nar=len(racks),
        nap=len(pods),
        cpu_rack=cpu_rack,
        mem_rack=mem_rack,
        cpu_pod=cpu_pod,
        mem_pod=mem_pod,
    )


def effective_max_lat(workload: Workload, dc_kind: DcKind) -> int:
    """Per-workload latency bound, defaulting to the DC kind's bound."""
    return workload.max_lat if workload.max_lat is not None else max_latency_for(dc_kind)


def check(
    placement: Placement,
    layout: DcLayout,
    workloads: Sequence[Workload],
    dc_kind: Optional[DcKind] = None,
    integrated: Optional[Sequence[IntegratedWorkload]] = None,
) -> list[Violation]:
    """Every constraint violation in the placement; empty means feasible.

    Checks per-component capacity, single-host limits, joint CPU/memory
    serving, the latency bound of the DC kind, and, when integrated
    workloads are supplied, their all-or-nothing serving rule.
    """
    dc_kind = dc_kind or layout.dc_kind
    by_id = {w.id: w for w in workloads}
    out: list[Violation] = []

    cpu_load: dict[int, float] = {}
    mem_load: dict[int, float] = {}
    for w_id, c in placement.wcl.items():
        if c is not None:
            cpu_load[c] = cpu_load.get(c, 0.0) + by_id[w_id].wc
    for w_id, m in placement.wml.items():
        if m is not None:
            mem_load[m] = mem_load.get(m, 0.0) + by_id[w_id].wm
    for c, load in sorted(cpu_load.items()):
        cap = layout.cpu_class(c).capacity
        if load > cap + CAPACITY_EPS:
            out.append(Violation("cpu_capacity", (c,), load, cap))
    for m, load in sorted(mem_load.items()):
        cap = layout.mem_class(m).capacity
        if load > cap + CAPACITY_EPS:
            out.append(Violation("mem_capacity", (m,), load, cap))

    for w_id in sorted(placement.wcl):
        c, m = placement.wcl[w_id], placement.wml[w_id]
        # Maps hold at most one host per demand by construction; the
        # single-host rule therefore reduces to the joint-serving check.
        if (c is None) != (m is None):
            out.append(
                Violation("co_serving", (w_id,),
                          float(c is not None), float(m is not None))
            )
        if c is not None and m is not None:
            lat = relation_of(layout.cpu(c), layout.mem(m))
            bound = effective_max_lat(by_id[w_id], dc_kind)
            if lat > bound:
                out.append(Violation("latency_bound", (w_id, c, m), lat, bound))

    for iw in integrated or ():
        states = [placement.served.get(w, False) for w in iw.members]
        if any(states) and not all(states):
            out.append(
                Violation(
                    "integrated_all_or_nothing",
                    (iw.id,),
                    sum(states),
                    float(len(iw.members)),
                )
            )
    return out


def objective(
    placement: Placement,
    layout: DcLayout,
    fabric,
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    params: Optional[ObjectiveParams] = None,
    dc_kind: Optional[DcKind] = None,
    integrated: Optional[Sequence[IntegratedWorkload]] = None,
) -> float:
    """Total DC power plus the blocking penalty, for a feasible placement."""
    from . import power

    params = params or ObjectiveParams()
    violations = check(placement, layout, workloads, dc_kind, integrated)
    if violations:
        raise InfeasiblePlacementError(f"infeasible placement: {violations[0]}")
    rep = power.report(layout, fabric, placement, workloads, shuffle)
    return rep.tdpc + params.alpha * placement.blocked_count
