"""Greedy energy-efficient placement with class utilization thresholds.

The heuristic works through a job list sorted by the demand dimension
that matters for the workload class, hardest first. For each query
workload it asks every node for its best candidate component, reduces
those to a best candidate per rack and per pod using the class threshold
rule, and places the workload at the winner. After a successful placement
it tries to keep filling the same rack by scanning the job list for the
next workload that still fits there.

The threshold rule prefers the most energy-efficient class but skips a
candidate whose resulting utilization would strand capacity: a candidate
of class k is accepted only if its post-placement utilization is at most
the lower threshold (0.5), exceeds the upper threshold (the next class's
capacity divided by this class's), or no alternative remains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .fabric import FabricParams
from .model import (
    ComponentClass,
    ConfigurationError,
    DcKind,
    DcLayout,
    ResourceKind,
)
from .placement import ObjectiveParams, Placement, derive, effective_max_lat
from .power import PowerReport, report
from .workloads import IntegratedWorkload, ShuffleMatrix, Workload

LOWER_THRESHOLD = 0.5
FIT_EPS = 1e-9


@dataclass(frozen=True)
class ClassThreshold:
    name: str
    capacity: float
    lower: Optional[float]
    upper: Optional[float]


@dataclass(frozen=True)
class ThresholdTable:
    """Per-class utilization thresholds, most energy-efficient class first."""

    kind: ResourceKind
    entries: tuple[ClassThreshold, ...]

    def rank(self, name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.name == name:
                return i
        raise KeyError(name)

    def bounds(self, name: str) -> tuple[Optional[float], Optional[float]]:
        e = self.entries[self.rank(name)]
        return e.lower, e.upper

    def format(self) -> str:
        lines = [f"{self.kind.value} components",
                 f"{'k':>2}  {'capacity':>9}  {'lower':>7}  {'upper':>7}"]
        for i, e in enumerate(self.entries, start=1):
            lo = "N/A" if e.lower is None else f"{e.lower:.5g}"
            up = "N/A" if e.upper is None else f"{e.upper:.5g}"
            lines.append(f"{i:>2}  {e.capacity:>9.4g}  {lo:>7}  {up:>7}")
        return "\n".join(lines)


def efficiency_ordered(classes: Sequence[ComponentClass]) -> list[ComponentClass]:
    """Classes sorted most energy-efficient first (capacity-normalized
    power factor ascending, capacity descending to break ties)."""
    return sorted(classes, key=lambda c: (c.efficiency_rank, -c.capacity))


def thresholds(classes: Sequence[ComponentClass]) -> ThresholdTable:
    """Build the threshold table for classes already in efficiency order.

    The upper threshold of class k is capacity(k+1) / capacity(k); the
    last class carries no thresholds because there is nothing cheaper to
    defer to.
    """
    if not classes:
        raise ConfigurationError("at least one component class is required")
    kinds = {c.kind for c in classes}
    if len(kinds) != 1:
        raise ConfigurationError("threshold table mixes resource kinds")
    entries = []
    for i, cls in enumerate(classes):
        if i == len(classes) - 1:
            entries.append(ClassThreshold(cls.name, cls.capacity, None, None))
        else:
            entries.append(
                ClassThreshold(
                    cls.name,
                    cls.capacity,
                    LOWER_THRESHOLD,
                    classes[i + 1].capacity / cls.capacity,
                )
            )
    return ThresholdTable(kind=classes[0].kind, entries=tuple(entries))


@dataclass(frozen=True)
class Candidate:
    """A component able to host the query demand, with the utilization it
    would reach afterwards."""

    component: int
    class_name: str
    util: float
    rack: int
    pod: int
    node: int


def select_best_component(
    candidates: Sequence[Candidate], table: ThresholdTable
) -> tuple[Candidate, list[tuple[int, str]]]:
    """Pick the winning candidate per the threshold rule.

    Returns the winner and a trace of (component, decision) steps for the
    decision log. Candidates of the last class carry no thresholds and are
    accepted when they reach the head of the list.
    """
    if not candidates:
        raise ConfigurationError("select_best_component needs candidates")
    ordered = sorted(candidates, key=lambda c: (table.rank(c.class_name), c.component))
    trace: list[tuple[int, str]] = []
    idx = 0
    while idx < len(ordered) - 1:
        head = ordered[idx]
        lower, upper = table.bounds(head.class_name)
        if lower is None:
            trace.append((head.component, "last-class"))
            return head, trace
        if head.util <= lower:
            trace.append((head.component, "below-lower"))
            return head, trace
        if head.util > upper:
            trace.append((head.component, "above-upper"))
            return head, trace
        trace.append((head.component, "skipped"))
        idx += 1
    trace.append((ordered[-1].component, "last-remaining"))
    return ordered[-1], trace


@dataclass
class DecisionEntry:
    """One step of the placement loop, flat enough for a CSV row."""

    seq: int
    event: str  # place | block
    via: str  # query | scan | cascade
    workload: int
    cpu: Optional[int] = None
    mem: Optional[int] = None
    rack: Optional[int] = None
    pod: Optional[int] = None
    cpu_util: Optional[float] = None
    mem_util: Optional[float] = None
    trace: str = ""

    def to_row(self) -> list:
        return [self.seq, self.event, self.via, self.workload, self.cpu,
                self.mem, self.rack, self.pod, self.cpu_util, self.mem_util,
                self.trace]

    ROW_FIELDS = ("seq", "event", "via", "workload", "cpu", "mem", "rack",
                  "pod", "cpu_util", "mem_util", "trace")


@dataclass
class HeepResult:
    placement: Placement
    report: PowerReport
    log: list[DecisionEntry]
    cpu_thresholds: ThresholdTable
    mem_thresholds: ThresholdTable


class _State:
    """Mutable residual capacities during the placement loop."""

    def __init__(self, layout: DcLayout):
        self.layout = layout
        self.cpu_res = [layout.cpu_class(c.id).capacity for c in layout.cpus]
        self.mem_res = [layout.mem_class(m.id).capacity for m in layout.mems]
        self.wcl: dict[int, Optional[int]] = {}
        self.wml: dict[int, Optional[int]] = {}

    def place(self, w: Workload, cpu: int, mem: int) -> None:
        self.cpu_res[cpu] -= w.wc
        self.mem_res[mem] -= w.wm
        self.wcl[w.id] = cpu
        self.wml[w.id] = mem

    def unplace(self, w: Workload) -> None:
        cpu, mem = self.wcl[w.id], self.wml[w.id]
        self.cpu_res[cpu] += w.wc
        self.mem_res[mem] += w.wm
        self.wcl[w.id] = None
        self.wml[w.id] = None

    def block(self, w: Workload) -> None:
        self.wcl[w.id] = None
        self.wml[w.id] = None

    def cpu_fits(self, comp_id: int, w: Workload) -> bool:
        return w.wc <= self.cpu_res[comp_id] + FIT_EPS

    def mem_fits(self, comp_id: int, w: Workload) -> bool:
        return w.wm <= self.mem_res[comp_id] + FIT_EPS

    def cpu_util_after(self, comp_id: int, w: Workload) -> float:
        cap = self.layout.cpu_class(comp_id).capacity
        return (cap - self.cpu_res[comp_id] + w.wc) / cap

    def mem_util_after(self, comp_id: int, w: Workload) -> float:
        cap = self.layout.mem_class(comp_id).capacity
        return (cap - self.mem_res[comp_id] + w.wm) / cap


def _scope_racks(layout: DcLayout, dc_kind: DcKind) -> list[list[int]]:
    """Racks grouped by the locality scope the kind allows (node-level
    scopes are handled separately)."""
    if dc_kind == DcKind.POD_SCALE:
        pods: dict[int, list[int]] = {}
        for rack in range(layout.n_racks):
            pods.setdefault(layout.rack_pod[rack], []).append(rack)
        return [pods[p] for p in sorted(pods)]
    return [[r] for r in range(layout.n_racks)]


def _has_fit(state: _State, layout: DcLayout, w: Workload, dc_kind: DcKind) -> bool:
    """Blocking criterion at component granularity for the kind's scope."""
    if dc_kind == DcKind.TRADITIONAL:
        for node in range(layout.n_nodes):
            cpus = [c for c in layout.cpus if c.node == node]
            mems = [m for m in layout.mems if m.node == node]
            if any(state.cpu_fits(c.id, w) for c in cpus) and any(
                state.mem_fits(m.id, w) for m in mems
            ):
                return True
        return False
    for racks in _scope_racks(layout, dc_kind):
        cpu_ok = any(
            state.cpu_fits(c.id, w) for r in racks for c in layout.rack_cpus(r)
        )
        mem_ok = any(
            state.mem_fits(m.id, w) for r in racks for m in layout.rack_mems(r)
        )
        if cpu_ok and mem_ok:
            return True
    return False


def _node_candidates(
    state: _State, layout: DcLayout, w: Workload, kind: ResourceKind,
    racks: Sequence[int],
) -> list[Candidate]:
    """Best fitting component per node: highest post-placement utilization,
    lowest id on ties."""
    out = []
    comps = layout.cpus if kind == ResourceKind.CPU else layout.mems
    fits = state.cpu_fits if kind == ResourceKind.CPU else state.mem_fits
    util = state.cpu_util_after if kind == ResourceKind.CPU else state.mem_util_after
    classes = layout.cpu_classes if kind == ResourceKind.CPU else layout.mem_classes
    rack_set = set(racks)
    by_node: dict[int, Candidate] = {}
    for comp in comps:
        if comp.rack not in rack_set or not fits(comp.id, w):
            continue
        cand = Candidate(
            component=comp.id,
            class_name=classes[comp.class_index].name,
            util=util(comp.id, w),
            rack=comp.rack,
            pod=comp.pod,
            node=comp.node,
        )
        cur = by_node.get(comp.node)
        if cur is None or cand.util > cur.util + FIT_EPS:
            by_node[comp.node] = cand
    return [by_node[n] for n in sorted(by_node)]


def _joint_server_candidates(
    state: _State, layout: DcLayout, w: Workload
) -> list[Candidate]:
    """Traditional nodes where both demands fit; the CPU side carries the
    candidacy, the memory partner rides along implicitly."""
    out = []
    mems_by_node = {}
    for m in layout.mems:
        mems_by_node.setdefault(m.node, []).append(m)
    for c in layout.cpus:
        if not state.cpu_fits(c.id, w):
            continue
        partners = [m for m in mems_by_node.get(c.node, []) if state.mem_fits(m.id, w)]
        if not partners:
            continue
        out.append(
            Candidate(
                component=c.id,
                class_name=layout.cpu_classes[c.class_index].name,
                util=state.cpu_util_after(c.id, w),
                rack=c.rack,
                pod=c.pod,
                node=c.node,
            )
        )
    return out


def _mem_partner_in_node(
    state: _State, layout: DcLayout, w: Workload, node: int
) -> int:
    fitting = [m.id for m in layout.mems if m.node == node and state.mem_fits(m.id, w)]
    best = max(fitting, key=lambda m: (state.mem_util_after(m, w), -m))
    return best


@dataclass
class _Host:
    cpu: int
    mem: int
    rack: int
    trace: str


def _pick_host(
    state: _State,
    layout: DcLayout,
    w: Workload,
    dc_kind: DcKind,
    cpu_table: ThresholdTable,
    mem_table: ThresholdTable,
    racks: Optional[Sequence[int]] = None,
) -> Optional[_Host]:
    """Full candidate search over the given racks (default: whole DC):
    node candidates, rack winners, pod winner."""
    search_racks = list(racks) if racks is not None else list(range(layout.n_racks))

    if dc_kind in (DcKind.TRADITIONAL,):
        rack_winner: dict[int, tuple[Candidate, str]] = {}
        for r in search_racks:
            cands = [c for c in _joint_server_candidates(state, layout, w) if c.rack == r]
            if cands:
                winner, trace = select_best_component(cands, cpu_table)
                rack_winner[r] = (winner, _fmt_trace(trace))
        if not rack_winner:
            return None
        chosen, trace = _winner_across_racks(layout, rack_winner, cpu_table)
        mem = _mem_partner_in_node(state, layout, w, chosen.node)
        return _Host(cpu=chosen.component, mem=mem, rack=chosen.rack, trace=trace)

    if dc_kind in (DcKind.RACK_SCALE, DcKind.LOGICAL_RACK_SCALE):
        rack_hosts: dict[int, tuple[Candidate, Candidate, str]] = {}
        for r in search_racks:
            cpu_cands = _node_candidates(state, layout, w, ResourceKind.CPU, [r])
            mem_cands = _node_candidates(state, layout, w, ResourceKind.MEMORY, [r])
            if not cpu_cands or not mem_cands:
                continue
            cpu_best, cpu_trace = select_best_component(cpu_cands, cpu_table)
            mem_best, _ = select_best_component(mem_cands, mem_table)
            rack_hosts[r] = (cpu_best, mem_best, _fmt_trace(cpu_trace))
        if not rack_hosts:
            return None
        rack_winner = {r: (v[0], v[2]) for r, v in rack_hosts.items()}
        chosen, trace = _winner_across_racks(layout, rack_winner, cpu_table)
        mem_best = rack_hosts[chosen.rack][1]
        return _Host(cpu=chosen.component, mem=mem_best.component,
                     rack=chosen.rack, trace=trace)

    # Pod-scale: CPU and memory racks are disjoint, so the two demands are
    # resolved independently inside each pod.
    pods: dict[int, list[int]] = {}
    for r in search_racks:
        pods.setdefault(layout.rack_pod[r], []).append(r)
    pod_hosts: dict[int, tuple[Candidate, Candidate]] = {}
    for p in sorted(pods):
        cpu_cands = _node_candidates(state, layout, w, ResourceKind.CPU, pods[p])
        mem_cands = _node_candidates(state, layout, w, ResourceKind.MEMORY, pods[p])
        if not cpu_cands or not mem_cands:
            continue
        cpu_rack_winner: dict[int, tuple[Candidate, str]] = {}
        for r in pods[p]:
            in_rack = [c for c in cpu_cands if c.rack == r]
            if in_rack:
                winner, tr = select_best_component(in_rack, cpu_table)
                cpu_rack_winner[r] = (winner, _fmt_trace(tr))
        cpu_best, _ = _winner_across_racks(layout, cpu_rack_winner, cpu_table)
        mem_best, _ = select_best_component(mem_cands, mem_table)
        pod_hosts[p] = (cpu_best, mem_best)
    if not pod_hosts:
        return None
    pod_cands = [pod_hosts[p][0] for p in sorted(pod_hosts)]
    chosen, trace = select_best_component(pod_cands, cpu_table)
    mem_best = pod_hosts[chosen.pod][1]
    return _Host(cpu=chosen.component, mem=mem_best.component,
                 rack=chosen.rack, trace=_fmt_trace(trace))


def _winner_across_racks(
    layout: DcLayout,
    rack_winner: dict[int, tuple[Candidate, str]],
    cpu_table: ThresholdTable,
) -> tuple[Candidate, str]:
    """Best rack per pod, then best pod, both judged by the rack's best CPU
    candidate under the same threshold rule."""
    per_pod: dict[int, Candidate] = {}
    for p in sorted({layout.rack_pod[r] for r in rack_winner}):
        cands = [rack_winner[r][0] for r in sorted(rack_winner)
                 if layout.rack_pod[r] == p]
        winner, _ = select_best_component(cands, cpu_table)
        per_pod[p] = winner
    pod_cands = [per_pod[p] for p in sorted(per_pod)]
    chosen, trace = select_best_component(pod_cands, cpu_table)
    return chosen, rack_winner[chosen.rack][1] + "|" + _fmt_trace(trace)


def _fmt_trace(trace: list[tuple[int, str]]) -> str:
    return ";".join(f"{comp}:{why}" for comp, why in trace)


def _scan_scope(layout: DcLayout, dc_kind: DcKind, rack: int) -> list[int]:
    if dc_kind == DcKind.POD_SCALE:
        pod = layout.rack_pod[rack]
        return [r for r in range(layout.n_racks) if layout.rack_pod[r] == pod]
    return [rack]


def place(
    layout: DcLayout,
    fabric: FabricParams,
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    dc_kind: Optional[DcKind] = None,
    params: Optional[ObjectiveParams] = None,
    integrated: Optional[Sequence[IntegratedWorkload]] = None,
) -> HeepResult:
    """Run the full greedy loop and price the resulting placement.

    Blocking is an outcome, not an error: a workload is blocked when no
    locality scope offers a fitting CPU component and a fitting memory
    component at its query time. When integrated workloads are supplied,
    blocking one micro-service drops its siblings as well so the
    all-or-nothing rule holds by construction.
    """
    dc_kind = dc_kind or layout.dc_kind
    cpu_table = thresholds(efficiency_ordered(layout.cpu_classes))
    mem_table = thresholds(efficiency_ordered(layout.mem_classes))
    by_id = {w.id: w for w in workloads}
    siblings: dict[int, list[int]] = {}
    for iw in integrated or ():
        for m in iw.members:
            siblings[m] = [x for x in iw.members if x != m]

    sort_key = (lambda w: (-w.wc, w.id))
    if workloads and all(w.wclass == "mem-intensive" for w in workloads):
        sort_key = (lambda w: (-w.wm, w.id))
    job = [w.id for w in sorted(workloads, key=sort_key)]
    scan_order = [w.id for w in sorted(workloads, key=lambda w: (-w.wc, w.id))]

    state = _State(layout)
    log: list[DecisionEntry] = []
    seq = 0
    decided: set[int] = set()

    def record(entry: DecisionEntry) -> None:
        nonlocal seq
        entry.seq = seq
        seq += 1
        log.append(entry)

    def block(w_id: int, via: str) -> None:
        state.block(by_id[w_id])
        decided.add(w_id)
        record(DecisionEntry(0, "block", via, w_id))
        for sib in siblings.get(w_id, []):
            if sib in decided:
                if state.wcl.get(sib) is not None:
                    state.unplace(by_id[sib])
                    state.block(by_id[sib])
                    record(DecisionEntry(0, "block", "cascade", sib))
            else:
                state.block(by_id[sib])
                decided.add(sib)
                record(DecisionEntry(0, "block", "cascade", sib))

    def do_place(w: Workload, host: _Host, via: str) -> None:
        cpu_util = state.cpu_util_after(host.cpu, w)
        mem_util = state.mem_util_after(host.mem, w)
        state.place(w, host.cpu, host.mem)
        decided.add(w.id)
        record(
            DecisionEntry(
                0, "place", via, w.id, cpu=host.cpu, mem=host.mem,
                rack=host.rack, pod=layout.rack_pod[host.rack],
                cpu_util=cpu_util, mem_util=mem_util, trace=host.trace,
            )
        )

    best_rack: Optional[int] = None
    best_cpu: Optional[int] = None
    pending_query: Optional[int] = None

    while True:
        remaining = [w_id for w_id in job if w_id not in decided]
        if not remaining:
            break

        via = "query"
        query: Optional[int] = None
        if pending_query is not None:
            query, via = pending_query, "scan"
            pending_query = None
        else:
            query = remaining[0]
            best_rack = best_cpu = None

        w = by_id[query]
        if via == "scan" and best_rack is not None:
            scope = _scan_scope(layout, dc_kind, best_rack)
            host = None
            if best_cpu is not None and state.cpu_fits(best_cpu, w):
                # Prefer topping up the CPU component placed last.
                host = _fill_best_cpu(state, layout, w, dc_kind, best_cpu, mem_table)
            if host is None:
                host = _pick_host(state, layout, w, dc_kind, cpu_table, mem_table,
                                  racks=scope)
            if host is None:
                # The scan promised a fit; fragmentation at component level
                # can still defeat it, fall back to a full query.
                via = "query"
        if via == "query":
            if not _has_fit(state, layout, w, dc_kind):
                block(query, "query")
                best_rack = best_cpu = None
                continue
            host = _pick_host(state, layout, w, dc_kind, cpu_table, mem_table)
            if host is None:
                block(query, "query")
                best_rack = best_cpu = None
                continue

        do_place(w, host, via)
        best_rack, best_cpu = host.rack, host.cpu

        # Scan for a follow-up workload that keeps filling the best rack,
        # highest CPU demand first.
        scope = _scan_scope(layout, dc_kind, best_rack)
        for w_id in scan_order:
            if w_id in decided:
                continue
            cand = by_id[w_id]
            if dc_kind == DcKind.TRADITIONAL:
                ok = any(
                    state.cpu_fits(c.id, cand)
                    and any(state.mem_fits(m.id, cand)
                            for m in layout.mems if m.node == c.node)
                    for r in scope for c in layout.rack_cpus(r)
                )
            else:
                ok = any(
                    state.cpu_fits(c.id, cand)
                    for r in scope for c in layout.rack_cpus(r)
                ) and any(
                    state.mem_fits(m.id, cand)
                    for r in scope for m in layout.rack_mems(r)
                )
            if ok:
                pending_query = w_id
                break

    assignment = derive(state.wcl, state.wml, layout)
    rep = report(layout, fabric, assignment, workloads, shuffle)
    return HeepResult(
        placement=assignment,
        report=rep,
        log=log,
        cpu_thresholds=cpu_table,
        mem_thresholds=mem_table,
    )


def _fill_best_cpu(
    state: _State,
    layout: DcLayout,
    w: Workload,
    dc_kind: DcKind,
    best_cpu: int,
    mem_table: ThresholdTable,
) -> Optional[_Host]:
    comp = layout.cpu(best_cpu)
    if dc_kind == DcKind.TRADITIONAL:
        fitting = [m for m in layout.mems
                   if m.node == comp.node and state.mem_fits(m.id, w)]
        if not fitting:
            return None
        mem = _mem_partner_in_node(state, layout, w, comp.node)
        return _Host(cpu=best_cpu, mem=mem, rack=comp.rack, trace="fill-best-cpu")
    scope = _scan_scope(layout, dc_kind, comp.rack)
    mem_cands = _node_candidates(state, layout, w, ResourceKind.MEMORY, scope)
    if not mem_cands:
        return None
    mem_best, _ = select_best_component(mem_cands, mem_table)
    return _Host(cpu=best_cpu, mem=mem_best.component, rack=comp.rack,
                 trace="fill-best-cpu")
