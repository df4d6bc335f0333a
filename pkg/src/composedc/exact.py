"""Exact placement optimization at desk scale.

``solve_exact`` minimizes total DC power plus blocking penalties by
branch-and-bound over per-workload (CPU, memory) pair choices. Nodes are
explored depth-first with children ordered cheapest-increment first, so
memory stays bounded while the bound-driven pruning is unchanged.

Instances whose latency bound confines every candidate pair to one
locality unit (node, rack or pod) are solved in two coupled levels: an
outer search assigns workloads to units, and the exact cost of packing a
unit's workload subset is solved by the same engine on the restricted
component set and memoized by (unit profile, subset). Everything that
couples units - static switch power, cross-unit shuffle traffic - is
priced exactly in the outer level, so the two-level result equals the
flat search's optimum while collapsing the intra-unit permutation space.

Three value-preserving reductions tame class symmetry inside the engine:

- candidate pairs are deduplicated by a structural signature, so
  interchangeable fresh components of one class yield a single child;
- a fresh CPU is skipped while an active CPU of the same class in the
  same rack still fits the demand (swapping the two components' whole
  assignment sets maps any completion of one onto the other at equal
  cost, provided no node mixes CPUs with memories);
- a fresh memory is skipped under the same rule at node scope always,
  and at rack scope when the instance carries no shuffle traffic.

``enumerate_exhaustive`` is the independent ground-truth oracle: plain
recursion over every capacity-feasible assignment, no bounding, no
symmetry reduction, small instances only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .fabric import FabricKind, FabricParams, compute_pair_energy_table, pair_energy
from .model import (
    DcKind,
    DcLayout,
    LATENCY_SAME_NODE,
    LATENCY_SAME_POD,
    LATENCY_SAME_RACK,
    relation_of,
)
from .placement import (
    ObjectiveParams,
    Placement,
    check,
    derive,
    effective_max_lat,
    objective,
)
from .workloads import IntegratedWorkload, ShuffleMatrix, Workload

GBPS = 1e9
PRUNE_EPS = 1e-9
FIT_EPS = 1e-9
BLOCK = -1

#: Workload count above which locality-separable instances switch to the
#: two-level (unit partition + packing) search.
PARTITION_THRESHOLD = 7


@dataclass(frozen=True)
class SolveBudget:
    """Branch-and-bound limits. ``max_nodes`` counts expanded nodes across
    both search levels; prefer it over wall time for reproducibility."""

    max_nodes: int = 5_000_000
    max_seconds: Optional[float] = None


@dataclass
class SolveResult:
    placement: Placement
    objective: float
    proven_optimal: bool
    nodes_explored: int
    wall_time: float


class InfeasibleInstanceError(ValueError):
    """No feasible placement exists and blocking was disallowed."""


def branch_order(workloads: Sequence[Workload], layout: DcLayout) -> list[int]:
    """Workload ids hardest-first: largest demand relative to the largest
    component capacity of its kind, canonical id order on ties."""
    max_c = max(cls.capacity for cls in layout.cpu_classes)
    max_m = max(cls.capacity for cls in layout.mem_classes)
    key = lambda w: (-max(w.wc / max_c, w.wm / max_m), w.id)
    return [w.id for w in sorted(workloads, key=key)]


def candidate_pairs(
    layout: DcLayout, workload: Workload, dc_kind: DcKind
) -> list[tuple[int, int]]:
    """Latency-feasible (cpu, mem) pairs for one workload, canonical order."""
    bound = effective_max_lat(workload, dc_kind)
    return [
        (c.id, m.id)
        for c in layout.cpus
        for m in layout.mems
        if relation_of(c, m) <= bound
    ]


class _Instance:
    """Precomputed arrays for one (layout, fabric, workload set) problem.

    ``cpu_ids``/``mem_ids`` restrict the component universe (unit packing);
    ``statics`` toggles which static network tiers this instance prices.
    """

    def __init__(
        self,
        layout: DcLayout,
        fabric: FabricParams,
        workloads: Sequence[Workload],
        shuffle: Optional[ShuffleMatrix],
        dc_kind: DcKind,
        params: ObjectiveParams,
        cpu_ids: Optional[frozenset[int]] = None,
        mem_ids: Optional[frozenset[int]] = None,
        statics: tuple[bool, bool, bool] = (True, True, True),
    ):
        self.layout = layout
        self.fabric = fabric
        self.workloads = list(workloads)
        self.by_id = {w.id: w for w in workloads}
        self.shuffle = shuffle
        self.dc_kind = dc_kind
        self.params = params
        self.table = compute_pair_energy_table(layout, fabric)
        self.cpu_ids = cpu_ids if cpu_ids is not None else frozenset(
            c.id for c in layout.cpus
        )
        self.mem_ids = mem_ids if mem_ids is not None else frozenset(
            m.id for m in layout.mems
        )

        self.cpu_cap = [layout.cpu_class(c.id).capacity for c in layout.cpus]
        self.mem_cap = [layout.mem_class(m.id).capacity for m in layout.mems]
        self.cpu_idle = [layout.cpu_class(c.id).idle_power for c in layout.cpus]
        self.mem_idle = [layout.mem_class(m.id).idle_power for m in layout.mems]
        self.cpu_pf = [layout.cpu_class(c.id).power_factor for c in layout.cpus]
        self.mem_pf = [layout.mem_class(m.id).power_factor for m in layout.mems]
        self.cpu_rack = [c.rack for c in layout.cpus]
        self.cpu_pod = [c.pod for c in layout.cpus]
        self.cpu_node = [c.node for c in layout.cpus]
        self.mem_rack = [m.rack for m in layout.mems]
        self.mem_pod = [m.pod for m in layout.mems]
        self.mem_node = [m.node for m in layout.mems]
        self.cpu_class_idx = [c.class_index for c in layout.cpus]
        self.mem_class_idx = [m.class_index for m in layout.mems]

        with_rack, with_pod, with_base = statics
        kind = fabric.fabric_kind
        if kind == FabricKind.ELECTRICAL:
            rack_s, pod_s = fabric.es_idle_power, 0.0
            base_s = fabric.aggregation_switches * fabric.es_idle_power
        elif kind == FabricKind.OPTICAL:
            rack_s, pod_s = fabric.wss_power, fabric.oxc_power
            base_s = fabric.interpod_crossconnects * fabric.oxc_power
        else:
            rack_s, pod_s = fabric.es_idle_power, fabric.oxc_power
            base_s = fabric.interpod_crossconnects * fabric.oxc_power
        self.rack_static = rack_s if with_rack else 0.0
        self.pod_static = pod_s if with_pod else 0.0
        self.base_static = base_s if with_base else 0.0

        self.order = branch_order(workloads, layout)
        self.n = len(self.order)

        ns = self.table.north_south
        c2m = self.table.cpu_to_mem
        m2c = self.table.mem_to_cpu
        self.pairs: list[list[tuple[int, int, float, int]]] = []
        self.wc = []
        self.wm = []
        for w_id in self.order:
            w = self.by_id[w_id]
            self.wc.append(w.wc)
            self.wm.append(w.wm)
            ns_w = (w.tci_up + w.tci_down + w.tri_up + w.tri_down) * GBPS * ns
            plist = []
            for c, m in candidate_pairs(layout, w, dc_kind):
                if c not in self.cpu_ids or m not in self.mem_ids:
                    continue
                base = (
                    self.cpu_pf[c] * w.wc
                    + self.mem_pf[m] * w.wm
                    + w.tcm_up * GBPS * float(c2m[c, m])
                    + w.tcm_down * GBPS * float(m2c[m, c])
                    + ns_w
                )
                rel = relation_of(layout.cpus[c], layout.mems[m])
                plist.append((c, m, base, rel))
            self.pairs.append(plist)

        alpha = params.alpha
        self.min_inc = [
            min((p[2] for p in plist), default=alpha) for plist in self.pairs
        ]
        self.pairs_by_base = [
            sorted(plist, key=lambda p: (p[2], p[0], p[1])) for plist in self.pairs
        ]
        self.bound_inc = [min(v, alpha) for v in self.min_inc]
        self.suffix_bound = [0.0] * (self.n + 1)
        self.suffix_wc = [0.0] * (self.n + 1)
        self.suffix_wm = [0.0] * (self.n + 1)
        for d in range(self.n - 1, -1, -1):
            self.suffix_bound[d] = self.suffix_bound[d + 1] + self.bound_inc[d]
            self.suffix_wc[d] = self.suffix_wc[d + 1] + self.wc[d]
            self.suffix_wm[d] = self.suffix_wm[d + 1] + self.wm[d]

        # Idle tiers: inactive capacity is consumed cheapest idle rate first.
        n_ccls = len(layout.cpu_classes)
        n_mcls = len(layout.mem_classes)
        self.cpu_rates = [cls.idle_power / cls.capacity for cls in layout.cpu_classes]
        self.mem_rates = [cls.idle_power / cls.capacity for cls in layout.mem_classes]
        self.cpu_tier_order = sorted(range(n_ccls), key=lambda k: self.cpu_rates[k])
        self.mem_tier_order = sorted(range(n_mcls), key=lambda k: self.mem_rates[k])
        self.cpu_class_cap = [0.0] * n_ccls
        self.mem_class_cap = [0.0] * n_mcls
        for c in layout.cpus:
            if c.id in self.cpu_ids:
                self.cpu_class_cap[c.class_index] += self.cpu_cap[c.id]
        for m in layout.mems:
            if m.id in self.mem_ids:
                self.mem_class_cap[m.class_index] += self.mem_cap[m.id]

        self.rack_cpu_cap = [0.0] * layout.n_racks
        self.rack_mem_cap = [0.0] * layout.n_racks
        for c in layout.cpus:
            if c.id in self.cpu_ids:
                self.rack_cpu_cap[c.rack] += self.cpu_cap[c.id]
        for m in layout.mems:
            if m.id in self.mem_ids:
                self.rack_mem_cap[m.rack] += self.mem_cap[m.id]
        self.max_rack_cpu = max(self.rack_cpu_cap) or 1.0
        self.max_rack_mem = max(self.rack_mem_cap) or 1.0

        # Floor terms stay admissible only while blocking a workload covers
        # its own worst-case share of every floor plus the one-off pod tier.
        rate_c = max(self.cpu_rates) + self.rack_static / self.max_rack_cpu
        rate_m = max(self.mem_rates) + self.rack_static / self.max_rack_mem
        self.use_floors = all(
            alpha
            >= self.min_inc[d]
            + self.wc[d] * rate_c
            + self.wm[d] * rate_m
            + self.base_static
            + self.pod_static
            for d in range(self.n)
        )

        mm = self.table.mem_to_mem
        self.mm_w = (mm * GBPS).tolist()
        self.has_shuffle = bool(shuffle and shuffle.flows)
        self.adj: list[list[tuple[int, float, float]]] = [
            shuffle.partners(w_id) if self.has_shuffle else [] for w_id in self.order
        ]

        nodes_with_cpu = {c.node for c in layout.cpus if c.id in self.cpu_ids}
        nodes_with_mem = {m.node for m in layout.mems if m.id in self.mem_ids}
        self.mixed_nodes = bool(nodes_with_cpu & nodes_with_mem)
        self.cpu_rack_dominance = not self.mixed_nodes
        self.mem_rack_dominance = not self.mixed_nodes and not self.has_shuffle
        self.mem_node_dominance = not self.mixed_nodes

        by_node: dict[int, list[tuple[str, int, int]]] = {}
        for c in layout.cpus:
            if c.id in self.cpu_ids:
                by_node.setdefault(c.node, []).append(("c", c.class_index, c.id))
        for m in layout.mems:
            if m.id in self.mem_ids:
                by_node.setdefault(m.node, []).append(("m", m.class_index, m.id))
        self.cpu_mates = [
            tuple(x for x in by_node.get(c.node, ()) if x != ("c", c.class_index, c.id))
            for c in layout.cpus
        ]
        self.mem_mates = [
            tuple(x for x in by_node.get(m.node, ()) if x != ("m", m.class_index, m.id))
            for m in layout.mems
        ]

        self.siblings: dict[int, tuple[int, ...]] = {}
        self.integrated: Sequence[IntegratedWorkload] = ()

    def attach_integrated(self, integrated: Sequence[IntegratedWorkload]) -> None:
        self.integrated = tuple(integrated)
        for iw in integrated:
            for m in iw.members:
                self.siblings[m] = tuple(x for x in iw.members if x != m)


class _SearchState:
    __slots__ = (
        "cpu_res", "mem_res", "cpu_used", "mem_used", "racks", "pods",
        "served", "free_cpu", "free_mem", "rack_free_cpu", "rack_free_mem",
        "inact_cpu_cap", "inact_mem_cap", "wml_of", "blocked", "placed",
    )

    def __init__(self, inst: _Instance):
        self.cpu_res = list(inst.cpu_cap)
        self.mem_res = list(inst.mem_cap)
        self.cpu_used = set()
        self.mem_used = set()
        self.racks = set()
        self.pods = set()
        self.served = 0
        self.free_cpu = 0.0
        self.free_mem = 0.0
        self.rack_free_cpu = 0.0
        self.rack_free_mem = 0.0
        self.inact_cpu_cap = list(inst.cpu_class_cap)
        self.inact_mem_cap = list(inst.mem_class_cap)
        self.wml_of: dict[int, int] = {}
        self.blocked: set[int] = set()
        self.placed: set[int] = set()


def _increment(inst, st, d, c, m, base) -> float:
    inc = base
    if c not in st.cpu_used:
        inc += inst.cpu_idle[c]
    if m not in st.mem_used:
        inc += inst.mem_idle[m]
    rc, rm = inst.cpu_rack[c], inst.mem_rack[m]
    if rc not in st.racks:
        inc += inst.rack_static
    if rm not in st.racks and rm != rc:
        inc += inst.rack_static
    pc, pm = inst.cpu_pod[c], inst.mem_pod[m]
    if pc not in st.pods:
        inc += inst.pod_static
    if pm not in st.pods and pm != pc:
        inc += inst.pod_static
    if not st.served:
        inc += inst.base_static
    if inst.adj[d]:
        mm_w = inst.mm_w
        wml_of = st.wml_of
        for other, out_gbps, in_gbps in inst.adj[d]:
            y = wml_of.get(other)
            if y is None or y == m:
                continue
            inc += out_gbps * mm_w[m][y] + in_gbps * mm_w[y][m]
    return inc


def _apply(inst, st, d, c, m) -> tuple:
    """Mutate state for placing depth-d workload on (c, m); returns the
    token :func:`_undo` needs."""
    wc_w, wm_w = inst.wc[d], inst.wm[d]
    c_fresh = c not in st.cpu_used
    m_fresh = m not in st.mem_used
    if c_fresh:
        st.cpu_used.add(c)
        st.free_cpu += inst.cpu_cap[c]
        st.inact_cpu_cap[inst.cpu_class_idx[c]] -= inst.cpu_cap[c]
    if m_fresh:
        st.mem_used.add(m)
        st.free_mem += inst.mem_cap[m]
        st.inact_mem_cap[inst.mem_class_idx[m]] -= inst.mem_cap[m]
    st.free_cpu -= wc_w
    st.free_mem -= wm_w
    st.cpu_res[c] -= wc_w
    st.mem_res[m] -= wm_w
    new_racks = []
    for rack in (inst.cpu_rack[c], inst.mem_rack[m]):
        if rack not in st.racks:
            st.racks.add(rack)
            new_racks.append(rack)
            st.rack_free_cpu += inst.rack_cpu_cap[rack]
            st.rack_free_mem += inst.rack_mem_cap[rack]
    st.rack_free_cpu -= wc_w
    st.rack_free_mem -= wm_w
    new_pods = []
    for pod in (inst.cpu_pod[c], inst.mem_pod[m]):
        if pod not in st.pods:
            st.pods.add(pod)
            new_pods.append(pod)
    st.served += 1
    w_id = inst.order[d]
    st.wml_of[w_id] = m
    st.placed.add(w_id)
    return (d, c, m, c_fresh, m_fresh, new_racks, new_pods)


def _undo(inst, st, token) -> None:
    d, c, m, c_fresh, m_fresh, new_racks, new_pods = token
    wc_w, wm_w = inst.wc[d], inst.wm[d]
    w_id = inst.order[d]
    st.placed.discard(w_id)
    del st.wml_of[w_id]
    st.served -= 1
    for pod in new_pods:
        st.pods.discard(pod)
    st.rack_free_cpu += wc_w
    st.rack_free_mem += wm_w
    for rack in new_racks:
        st.racks.discard(rack)
        st.rack_free_cpu -= inst.rack_cpu_cap[rack]
        st.rack_free_mem -= inst.rack_mem_cap[rack]
    st.cpu_res[c] += wc_w
    st.mem_res[m] += wm_w
    st.free_cpu += wc_w
    st.free_mem += wm_w
    if c_fresh:
        st.cpu_used.discard(c)
        st.free_cpu -= inst.cpu_cap[c]
        st.inact_cpu_cap[inst.cpu_class_idx[c]] += inst.cpu_cap[c]
    if m_fresh:
        st.mem_used.discard(m)
        st.free_mem -= inst.mem_cap[m]
        st.inact_mem_cap[inst.mem_class_idx[m]] += inst.mem_cap[m]


def _tier_cost(demand, tier_order, rates, caps, adj_class, adj_amount) -> float:
    cost = 0.0
    for k in tier_order:
        if demand <= 0.0:
            break
        cap = caps[k]
        if k == adj_class:
            cap -= adj_amount
        if cap <= 0.0:
            continue
        take = demand if demand < cap else cap
        cost += take * rates[k]
        demand -= take
    return cost


def _floor_terms(
    inst, next_depth, free_cpu, free_mem, rack_free_cpu, rack_free_mem,
    inact_cpu_cap, inact_mem_cap, adj_kc, adj_cc, adj_km, adj_cm, served,
) -> float:
    """Admissible extras beyond the per-workload minima: idle power of
    components that must still activate, static power of racks that must
    still activate, and the pod-tier statics if the DC is still off."""
    extra = 0.0
    short_c = inst.suffix_wc[next_depth] - free_cpu
    if short_c > 0.0:
        extra += _tier_cost(short_c, inst.cpu_tier_order, inst.cpu_rates,
                            inact_cpu_cap, adj_kc, adj_cc)
    short_m = inst.suffix_wm[next_depth] - free_mem
    if short_m > 0.0:
        extra += _tier_cost(short_m, inst.mem_tier_order, inst.mem_rates,
                            inact_mem_cap, adj_km, adj_cm)
    if inst.rack_static > 0.0:
        rack_short = 0.0
        short_rc = inst.suffix_wc[next_depth] - rack_free_cpu
        if short_rc > 0.0:
            rack_short = short_rc / inst.max_rack_cpu
        short_rm = inst.suffix_wm[next_depth] - rack_free_mem
        if short_rm > 0.0:
            rack_short = max(rack_short, short_rm / inst.max_rack_mem)
        extra += rack_short * inst.rack_static
    if not served and next_depth < inst.n:
        extra += inst.base_static + inst.pod_static
    return extra


def _comp_sig(inst, st, comp, is_cpu):
    """Structural interchangeability key for an inactive component: class,
    node-mate state, rack and pod activity."""
    if is_cpu:
        rack, pod = inst.cpu_rack[comp], inst.cpu_pod[comp]
        cls, mates = inst.cpu_class_idx[comp], inst.cpu_mates[comp]
    else:
        rack, pod = inst.mem_rack[comp], inst.mem_pod[comp]
        cls, mates = inst.mem_class_idx[comp], inst.mem_mates[comp]
    cpu_used, mem_used = st.cpu_used, st.mem_used
    mate_sig = tuple(
        (k, ci, mid if (mid in (cpu_used if k == "c" else mem_used)) else -1)
        for k, ci, mid in mates
    )
    pod_key = pod if pod in st.pods else -1
    rack_key = rack if rack in st.racks else (-1, pod_key)
    return ("new", cls, mate_sig, rack_key, pod_key)


class _Budget:
    __slots__ = ("left", "deadline")

    def __init__(self, budget: SolveBudget, t0: float):
        self.left = budget.max_nodes
        self.deadline = (
            t0 + budget.max_seconds if budget.max_seconds is not None else None
        )

    def spend(self) -> bool:
        if self.left <= 0:
            return False
        if self.deadline is not None and time.perf_counter() > self.deadline:
            self.left = 0
            return False
        self.left -= 1
        return True


class _DfsSearch:
    """One depth-first run over an instance, cheapest child first."""

    def __init__(self, inst: _Instance, budget: _Budget, best_obj: float,
                 allow_blocking: bool,
                 warm_choices: Optional[tuple[int, ...]] = None):
        self.inst = inst
        self.budget = budget
        self.best_obj = best_obj
        self.best_choices: Optional[tuple[int, ...]] = None
        self.allow_blocking = allow_blocking
        self.nodes = 0
        self.complete = True
        self.st = _SearchState(inst)
        self.choices: list[int] = []
        if warm_choices is not None:
            val = self._value_of(warm_choices)
            if val < self.best_obj - PRUNE_EPS:
                self.best_obj = val
                self.best_choices = warm_choices

    def _value_of(self, choices: tuple[int, ...]) -> float:
        st = _SearchState(self.inst)
        g = 0.0
        for d, choice in enumerate(choices):
            if choice == BLOCK:
                g += self.inst.params.alpha
                st.blocked.add(self.inst.order[d])
                continue
            c, m, base, _rel = self.inst.pairs[d][choice]
            if (self.inst.wc[d] > st.cpu_res[c] + FIT_EPS
                    or self.inst.wm[d] > st.mem_res[m] + FIT_EPS):
                return math.inf
            g += _increment(self.inst, st, d, c, m, base)
            _apply(self.inst, st, d, c, m)
        return g

    def run(self) -> None:
        if self.inst.n:
            self._visit(0, 0.0)

    def _visit(self, d: int, g: float) -> None:
        inst, st = self.inst, self.st
        if not self.budget.spend():
            self.complete = False
            return
        self.nodes += 1
        n = inst.n
        alpha = inst.params.alpha
        w_id = inst.order[d]
        wc_w, wm_w = inst.wc[d], inst.wm[d]

        # Capacity-aware recheck: cheapest still-fitting pair per remaining
        # workload. Capacity only shrinks down the tree, so it stays
        # admissible and sharpens as components fill up.
        refined = g
        if inst.use_floors:
            refined += _floor_terms(
                inst, d, st.free_cpu, st.free_mem,
                st.rack_free_cpu, st.rack_free_mem,
                st.inact_cpu_cap, st.inact_mem_cap, -1, 0.0, -1, 0.0,
                st.served,
            )
        res_c, res_m = st.cpu_res, st.mem_res
        block_cost = alpha if self.allow_blocking else math.inf
        for dd in range(d, n):
            need_c, need_m = inst.wc[dd], inst.wm[dd]
            best_p = block_cost
            for c, m, base, _rel in inst.pairs_by_base[dd]:
                if base >= best_p:
                    break
                if need_c <= res_c[c] + FIT_EPS and need_m <= res_m[m] + FIT_EPS:
                    best_p = base
                    break
            refined += best_p
            if refined >= self.best_obj - PRUNE_EPS:
                return

        sibs = inst.siblings.get(w_id, ())
        forced_block = any(s in st.blocked for s in sibs)
        sibling_placed = any(s in st.placed for s in sibs)

        children = []
        if not forced_block:
            seen = set()
            csig_cache: dict = {}
            msig_cache: dict = {}
            cpu_used, mem_used = st.cpu_used, st.mem_used
            cpu_rack, mem_rack = inst.cpu_rack, inst.mem_rack
            mem_node, cpu_cls = inst.mem_node, inst.cpu_class_idx
            mem_cls = inst.mem_class_idx

            cpu_dom = set()
            if inst.cpu_rack_dominance:
                for ac in cpu_used:
                    if res_c[ac] >= wc_w - FIT_EPS:
                        cpu_dom.add((cpu_rack[ac], cpu_cls[ac]))
            mem_dom_node = set()
            mem_dom_rack = set()
            if inst.mem_node_dominance:
                for am in mem_used:
                    if res_m[am] >= wm_w - FIT_EPS:
                        mem_dom_node.add((mem_node[am], mem_cls[am]))
                        if inst.mem_rack_dominance:
                            mem_dom_rack.add((mem_rack[am], mem_cls[am]))

            for idx, (c, m, base, rel) in enumerate(inst.pairs[d]):
                if wc_w > res_c[c] + FIT_EPS or wm_w > res_m[m] + FIT_EPS:
                    continue
                c_fresh = c not in cpu_used
                m_fresh = m not in mem_used
                if c_fresh and (cpu_rack[c], cpu_cls[c]) in cpu_dom:
                    continue
                if m_fresh and (
                    (mem_node[m], mem_cls[m]) in mem_dom_node
                    or (mem_rack[m], mem_cls[m]) in mem_dom_rack
                ):
                    continue
                cs = csig_cache.get(c)
                if cs is None:
                    cs = csig_cache[c] = (
                        c if not c_fresh else _comp_sig(inst, st, c, True)
                    )
                ms = msig_cache.get(m)
                if ms is None:
                    ms = msig_cache[m] = (
                        m if not m_fresh else _comp_sig(inst, st, m, False)
                    )
                sig = (rel, cs, ms)
                if sig in seen:
                    continue
                seen.add(sig)
                children.append(
                    (_increment(inst, st, d, c, m, base), idx, c, m)
                )
        children.sort(key=lambda t: (t[0], t[1]))

        suffix_next = inst.suffix_bound[d + 1]
        use_floors = inst.use_floors
        for inc, idx, c, m in children:
            child_g = g + inc
            if d + 1 == n:
                if child_g < self.best_obj - PRUNE_EPS:
                    self.best_obj = child_g
                    self.best_choices = tuple(self.choices) + (idx,)
                continue
            child_lb = child_g + suffix_next
            if use_floors:
                c_fresh = c not in st.cpu_used
                m_fresh = m not in st.mem_used
                free_c = st.free_cpu + (
                    inst.cpu_cap[c] - wc_w if c_fresh else -wc_w
                )
                free_m = st.free_mem + (
                    inst.mem_cap[m] - wm_w if m_fresh else -wm_w
                )
                rfc, rfm = st.rack_free_cpu, st.rack_free_mem
                rc, rm = inst.cpu_rack[c], inst.mem_rack[m]
                if rc not in st.racks:
                    rfc += inst.rack_cpu_cap[rc]
                    rfm += inst.rack_mem_cap[rc]
                if rm not in st.racks and rm != rc:
                    rfc += inst.rack_cpu_cap[rm]
                    rfm += inst.rack_mem_cap[rm]
                child_lb += _floor_terms(
                    inst, d + 1, free_c, free_m, rfc - wc_w, rfm - wm_w,
                    st.inact_cpu_cap, st.inact_mem_cap,
                    inst.cpu_class_idx[c] if c_fresh else -1,
                    inst.cpu_cap[c] if c_fresh else 0.0,
                    inst.mem_class_idx[m] if m_fresh else -1,
                    inst.mem_cap[m] if m_fresh else 0.0,
                    True,
                )
            if child_lb >= self.best_obj - PRUNE_EPS:
                continue
            token = _apply(inst, st, d, c, m)
            self.choices.append(idx)
            self._visit(d + 1, child_g)
            self.choices.pop()
            _undo(inst, st, token)

        if self.allow_blocking and not sibling_placed:
            child_g = g + alpha
            if d + 1 == n:
                if child_g < self.best_obj - PRUNE_EPS:
                    self.best_obj = child_g
                    self.best_choices = tuple(self.choices) + (BLOCK,)
            elif child_g + suffix_next < self.best_obj - PRUNE_EPS:
                st.blocked.add(w_id)
                self.choices.append(BLOCK)
                self._visit(d + 1, child_g)
                self.choices.pop()
                st.blocked.discard(w_id)


def _choices_to_assignment(
    inst: _Instance, choices: tuple[int, ...]
) -> tuple[dict, dict]:
    wcl = {w.id: None for w in inst.workloads}
    wml = {w.id: None for w in inst.workloads}
    for d, choice in enumerate(choices):
        if choice != BLOCK:
            c, m, _, _ = inst.pairs[d][choice]
            wcl[inst.order[d]] = c
            wml[inst.order[d]] = m
    return wcl, wml


def _scope_for(inst: _Instance) -> Optional[int]:
    """The locality relation that confines every workload's candidate
    pairs, or None when pairs may span the whole DC."""
    if not inst.workloads:
        return None
    bound = max(
        effective_max_lat(w, inst.dc_kind) for w in inst.workloads
    )
    if bound >= 4:
        return None
    return bound


def solve_exact(
    layout: DcLayout,
    fabric: FabricParams,
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    dc_kind: Optional[DcKind] = None,
    params: Optional[ObjectiveParams] = None,
    budget: Optional[SolveBudget] = None,
    integrated: Optional[Sequence[IntegratedWorkload]] = None,
    warm_starts: Sequence[Placement] = (),
    allow_blocking: bool = True,
) -> SolveResult:
    """Globally optimal placement within budget.

    ``proven_optimal`` is set when the search space was exhausted (or the
    bound closed on the incumbent) within budget; the best incumbent is
    returned either way.
    """
    t0 = time.perf_counter()
    dc_kind = dc_kind or layout.dc_kind
    params = params or ObjectiveParams()
    budget = budget or SolveBudget()
    inst = _Instance(layout, fabric, workloads, shuffle, dc_kind, params)
    if integrated:
        inst.attach_integrated(integrated)

    best_obj = math.inf
    best_placement: Optional[Placement] = None
    if allow_blocking and workloads:
        empty = derive({w.id: None for w in workloads},
                       {w.id: None for w in workloads}, layout)
        best_obj = objective(empty, layout, fabric, workloads, shuffle, params,
                             dc_kind, inst.integrated)
        best_placement = empty
    for pl in warm_starts:
        if check(pl, layout, inst.workloads, dc_kind, inst.integrated):
            continue
        val = objective(pl, layout, fabric, inst.workloads, shuffle, params,
                        dc_kind, inst.integrated)
        if val < best_obj - PRUNE_EPS:
            best_obj = val
            best_placement = pl

    if not workloads:
        empty = derive({}, {}, layout)
        return SolveResult(empty, objective(empty, layout, fabric, workloads,
                                            shuffle, params, dc_kind),
                           True, 0, time.perf_counter() - t0)

    tracker = _Budget(budget, t0)
    scope = _scope_for(inst)
    if scope is not None and inst.n > PARTITION_THRESHOLD:
        assignment, value, _, proven = _solve_partitioned(
            inst, scope, tracker, best_obj, allow_blocking
        )
    else:
        search = _DfsSearch(inst, tracker, best_obj, allow_blocking)
        search.run()
        proven = search.complete
        value = search.best_obj
        assignment = (
            _choices_to_assignment(inst, search.best_choices)
            if search.best_choices is not None else None
        )
    nodes = budget.max_nodes - tracker.left

    if assignment is not None:
        best_placement = derive(assignment[0], assignment[1], layout)
    if best_placement is None:
        raise InfeasibleInstanceError(
            "no feasible placement found with blocking disallowed"
        )
    final = objective(best_placement, layout, fabric, inst.workloads, shuffle,
                      params, dc_kind, inst.integrated)
    return SolveResult(
        placement=best_placement,
        objective=final,
        proven_optimal=proven,
        nodes_explored=nodes,
        wall_time=time.perf_counter() - t0,
    )


class _Unit:
    """One locality unit of the partition search."""

    __slots__ = ("uid", "cpu_ids", "mem_ids", "racks", "pod", "profile",
                 "cpu_cap", "mem_cap", "max_cpu", "max_mem", "const_rel",
                 "canon_cpus", "canon_mems")

    def __init__(self, uid, cpu_ids, mem_ids, racks, pod, profile,
                 cpu_cap, mem_cap, max_cpu, max_mem, const_rel,
                 canon_cpus, canon_mems):
        self.uid = uid
        self.cpu_ids = cpu_ids
        self.mem_ids = mem_ids
        self.racks = racks
        self.pod = pod
        self.profile = profile
        self.cpu_cap = cpu_cap
        self.mem_cap = mem_cap
        self.max_cpu = max_cpu
        self.max_mem = max_mem
        #: The single CPU-memory distance class inside this unit, or None
        #: when it varies (mixed nodes); constant relation decouples the
        #: CPU side of a packing from the memory side.
        self.const_rel = const_rel
        #: Components in profile-canonical order; two units with equal
        #: profiles are isomorphic under the map aligning these sequences.
        self.canon_cpus = canon_cpus
        self.canon_mems = canon_mems


def _build_units(inst: _Instance, scope: int) -> list[_Unit]:
    layout = inst.layout
    groups: dict[int, tuple[list, list]] = {}
    for c in layout.cpus:
        key = {1: c.node, 2: c.rack, 3: c.pod}[scope]
        groups.setdefault(key, ([], []))[0].append(c)
    for m in layout.mems:
        key = {1: m.node, 2: m.rack, 3: m.pod}[scope]
        groups.setdefault(key, ([], []))[1].append(m)
    units = []
    for key in sorted(groups):
        cpus, mems = groups[key]
        if not cpus or not mems:
            continue  # single-kind unit cannot host any workload
        racks = tuple(sorted({x.rack for x in cpus} | {x.rack for x in mems}))
        pod = cpus[0].pod
        rack_rank = {r: i for i, r in enumerate(racks)}
        # Profile: rack- and node-grouped class structure; units with equal
        # profiles are isomorphic, so packing costs transfer between them.
        node_map: dict[int, list] = {}
        for x in cpus:
            node_map.setdefault(x.node, []).append(("c", x.class_index))
        for x in mems:
            node_map.setdefault(x.node, []).append(("m", x.class_index))
        node_sig = {
            node: tuple(sorted(v)) for node, v in node_map.items()
        }
        node_rack = {
            node: rack_rank[layout.node_rack[node]] for node in node_map
        }
        profile = tuple(sorted((node_rack[n], node_sig[n]) for n in node_map))
        # Canonical component order aligned with the profile ordering.
        node_order = sorted(node_map, key=lambda n: (node_rack[n], node_sig[n], n))
        node_pos = {n: i for i, n in enumerate(node_order)}
        canon_cpus = tuple(
            x.id for x in sorted(cpus, key=lambda x: (node_pos[x.node],
                                                      x.class_index, x.id))
        )
        canon_mems = tuple(
            x.id for x in sorted(mems, key=lambda x: (node_pos[x.node],
                                                      x.class_index, x.id))
        )
        rels = {relation_of(c, m) for c in cpus for m in mems}
        units.append(_Unit(
            uid=len(units),
            cpu_ids=frozenset(x.id for x in cpus),
            mem_ids=frozenset(x.id for x in mems),
            racks=racks,
            pod=pod,
            profile=profile,
            cpu_cap=sum(inst.cpu_cap[x.id] for x in cpus),
            mem_cap=sum(inst.mem_cap[x.id] for x in mems),
            max_cpu=max(inst.cpu_cap[x.id] for x in cpus),
            max_mem=max(inst.mem_cap[x.id] for x in mems),
            const_rel=rels.pop() if len(rels) == 1 else None,
            canon_cpus=canon_cpus,
            canon_mems=canon_mems,
        ))
    return units


class _OneSidedPack:
    """Exact packing of one resource dimension onto one unit's components.

    Minimizes idle-once-per-active-component plus load-proportional power,
    plus (memory side) shuffle traffic between the packed workloads, whose
    per-bit cost depends on component and node co-location.
    """

    def __init__(self, inst, comp_ids, caps, idles, pfs, class_idx, node_of,
                 demands, item_ids, adj, mm_w, tracker):
        self.inst = inst
        self.comps = sorted(comp_ids)
        self.caps = caps
        self.idles = idles
        self.pfs = pfs
        self.class_idx = class_idx
        self.node_of = node_of
        # Hardest-first item order, canonical id tie-break.
        self.items = sorted(range(len(demands)),
                            key=lambda i: (-demands[i], item_ids[i]))
        self.demands = demands
        self.item_ids = item_ids
        self.adj = adj
        self.mm_w = mm_w
        self.tracker = tracker
        self.n = len(demands)
        self.min_pf = min((pfs[c] for c in self.comps), default=0.0)
        self.suffix_load = [0.0] * (self.n + 1)
        for pos in range(self.n - 1, -1, -1):
            self.suffix_load[pos] = (
                self.suffix_load[pos + 1] + demands[self.items[pos]]
            )
        classes = sorted({class_idx[c] for c in self.comps})
        self.rate = {
            k: min(idles[c] / caps[c] for c in self.comps if class_idx[c] == k)
            for k in classes
        }
        self.tiers = sorted(classes, key=lambda k: self.rate[k])
        self.class_cap0 = {
            k: sum(caps[c] for c in self.comps if class_idx[c] == k)
            for k in classes
        }
        self.complete = True
        self.nodes = 0

    def solve(self) -> tuple[float, Optional[dict]]:
        self.best = math.inf
        self.best_assign: Optional[dict] = None
        self.res = {c: self.caps[c] for c in self.comps}
        self.active: set[int] = set()
        self.free = 0.0
        self.inact_cap = dict(self.class_cap0)
        self.host: dict[int, int] = {}
        if self.n == 0:
            return 0.0, {}
        self._visit(0, 0.0)
        return self.best, self.best_assign

    def _tier_floor(self, shortage: float) -> float:
        cost = 0.0
        for k in self.tiers:
            if shortage <= 0.0:
                break
            cap = self.inact_cap[k]
            if cap <= 0.0:
                continue
            take = shortage if shortage < cap else cap
            cost += take * self.rate[k]
            shortage -= take
        return cost

    def _shuffle_inc(self, item: int, comp: int) -> float:
        partners = self.adj.get(self.item_ids[item])
        if not partners:
            return 0.0
        inc = 0.0
        for other, out_gbps, in_gbps in partners:
            y = self.host.get(other)
            if y is None or y == comp:
                continue
            inc += out_gbps * self.mm_w[comp][y] + in_gbps * self.mm_w[y][comp]
        return inc

    def _visit(self, pos: int, g: float) -> None:
        if not self.tracker.spend():
            self.complete = False
            return
        self.nodes += 1
        item = self.items[pos]
        demand = self.demands[item]
        has_adj = bool(self.adj)
        children = []
        seen = set()
        dom = set()
        for c in self.active:
            if self.res[c] >= demand - FIT_EPS:
                if has_adj:
                    dom.add((self.node_of[c], self.class_idx[c]))
                else:
                    dom.add(self.class_idx[c])
        for c in self.comps:
            if demand > self.res[c] + FIT_EPS:
                continue
            fresh = c not in self.active
            if fresh:
                if has_adj:
                    if (self.node_of[c], self.class_idx[c]) in dom:
                        continue
                    mates = tuple(
                        (self.class_idx[x], x if x in self.active else -1)
                        for x in self.comps if self.node_of[x] == self.node_of[c]
                        and x != c
                    )
                    sig = (self.class_idx[c], mates)
                else:
                    if self.class_idx[c] in dom:
                        continue
                    sig = (self.class_idx[c],)
                if sig in seen:
                    continue
                seen.add(sig)
            inc = self.pfs[c] * demand + (self.idles[c] if fresh else 0.0)
            if has_adj:
                inc += self._shuffle_inc(item, c)
            children.append((inc, c, fresh))
        children.sort(key=lambda t: (t[0], t[1]))
        for inc, c, fresh in children:
            child_g = g + inc
            if pos + 1 == self.n:
                if child_g < self.best - PRUNE_EPS:
                    self.best = child_g
                    assign = dict(self.host)
                    assign[self.item_ids[item]] = c
                    self.best_assign = assign
                continue
            rest = self.suffix_load[pos + 1]
            free_after = self.free + (self.caps[c] if fresh else 0.0) - demand
            lb = child_g + rest * self.min_pf
            shortage = rest - free_after
            if shortage > 0.0:
                if fresh:
                    self.inact_cap[self.class_idx[c]] -= self.caps[c]
                lb += self._tier_floor(shortage)
                if fresh:
                    self.inact_cap[self.class_idx[c]] += self.caps[c]
            if lb >= self.best - PRUNE_EPS:
                continue
            self.res[c] -= demand
            if fresh:
                self.active.add(c)
                self.free += self.caps[c]
                self.inact_cap[self.class_idx[c]] -= self.caps[c]
            self.free -= demand
            self.host[self.item_ids[item]] = c
            self._visit(pos + 1, child_g)
            del self.host[self.item_ids[item]]
            self.free += demand
            if fresh:
                self.active.discard(c)
                self.free -= self.caps[c]
                self.inact_cap[self.class_idx[c]] += self.caps[c]
            self.res[c] += demand


def _unit_remap(src: _Unit, dst: _Unit) -> tuple[dict, dict]:
    """Component translation between two units of equal profile."""
    if src.uid == dst.uid:
        ident_c = {c: c for c in src.canon_cpus}
        ident_m = {m: m for m in src.canon_mems}
        return ident_c, ident_m
    return (
        dict(zip(src.canon_cpus, dst.canon_cpus)),
        dict(zip(src.canon_mems, dst.canon_mems)),
    )


def _solve_partitioned(
    inst: _Instance,
    scope: int,
    tracker: _Budget,
    incumbent: float,
    allow_blocking: bool,
) -> tuple[Optional[tuple[dict, dict]], float, int, bool]:
    """Two-level search: assign workloads to locality units, price each
    unit's subset by an exact (memoized) packing solve, and add the
    cross-unit shuffle and static terms this level owns."""
    layout = inst.layout
    params = inst.params
    alpha = params.alpha
    units = _build_units(inst, scope)
    K = len(units)
    order, n = inst.order, inst.n
    by_depth = {w: d for d, w in enumerate(order)}

    # Statics owned by this level. Pod-scope units price their internal
    # rack statics inside the packs instead (rack activity then depends on
    # the packing).
    pack_statics = (scope == 3, False, False)
    rack_static = inst.rack_static if scope < 3 else 0.0
    pod_static = inst.pod_static
    base_static = inst.base_static

    mm_unit = {}
    for a in units:
        for b in units:
            if a.uid == b.uid:
                continue
            if scope == 1 and a.racks == b.racks:
                rel = LATENCY_SAME_RACK
            elif a.pod == b.pod:
                rel = LATENCY_SAME_POD
            else:
                rel = 4
            mm_unit[(a.uid, b.uid)] = pair_energy(inst.fabric, rel) * GBPS

    # Per-workload amortized floor: cheapest eligible class's power-factor
    # share plus an idle share that every feasible co-residency respects.
    # The idle share mixes the two classic dual-feasible functions: half
    # proportional fill, half an exclusivity token for demands larger than
    # half the component (at most one such demand fits any component), so
    # their per-component sum never exceeds one idle power.
    cpu_opts = [(cls.idle_power, cls.capacity, cls.power_factor)
                for cls in layout.cpu_classes]
    mem_opts = [(cls.idle_power, cls.capacity, cls.power_factor)
                for cls in layout.mem_classes]

    def idle_share(demand: float, opts) -> Optional[float]:
        best = None
        for idle, cap, pf in opts:
            if cap < demand - FIT_EPS:
                continue
            share = pf * demand + idle * 0.5 * (
                demand / cap + (1.0 if demand > 0.5 * cap + FIT_EPS else 0.0)
            )
            if best is None or share < best:
                best = share
        return best

    dyn_min = [
        min(
            (base - inst.cpu_pf[c] * inst.wc[d] - inst.mem_pf[m] * inst.wm[d]
             for c, m, base, _rel in inst.pairs[d]),
            default=0.0,
        )
        for d in range(n)
    ]

    def amort(d: int) -> float:
        share_c = idle_share(inst.wc[d], cpu_opts)
        share_m = idle_share(inst.wm[d], mem_opts)
        if share_c is None or share_m is None:
            return min(inst.min_inc[d], alpha)
        return max(dyn_min[d], 0.0) + share_c + share_m

    amort_v = [min(amort(d), alpha) for d in range(n)]
    suffix_amort = [0.0] * (n + 1)
    for d in range(n - 1, -1, -1):
        suffix_amort[d] = suffix_amort[d + 1] + amort_v[d]

    pack_memo: dict = {}
    pack_proven_all = [True]
    adj_by_id = {order[d]: inst.adj[d] for d in range(n)}
    ns_table = inst.table.north_south

    def pack(unit: _Unit, member_depths: frozenset) -> tuple[float, Optional[tuple]]:
        key = (unit.profile, member_depths)
        hit = pack_memo.get(key)
        if hit is not None:
            return hit
        if unit.const_rel is not None and scope < 3:
            result = _pack_split(unit, member_depths)
        else:
            result = _pack_engine(unit, member_depths)
        pack_memo[key] = result
        return result

    def _pack_engine(unit: _Unit, member_depths: frozenset):
        sub_workloads = [inst.by_id[order[d]] for d in sorted(member_depths)]
        sub = _Instance(
            layout, inst.fabric, sub_workloads, inst.shuffle, inst.dc_kind,
            params, cpu_ids=unit.cpu_ids, mem_ids=unit.mem_ids,
            statics=pack_statics,
        )
        warm = _warm_from_parent(unit, member_depths, sub)
        search = _DfsSearch(sub, tracker, math.inf, allow_blocking=False,
                            warm_choices=warm)
        search.run()
        if not search.complete:
            pack_proven_all[0] = False
        if search.best_choices is None:
            return (math.inf, None)
        return (search.best_obj, ("engine", unit.uid, tuple(sub.order),
                                  search.best_choices, sub))

    def _pack_split(unit: _Unit, member_depths: frozenset):
        """Constant intra-unit distance decouples the two resource sides."""
        ids = [order[d] for d in sorted(member_depths)]
        pair_w = pair_energy(inst.fabric, unit.const_rel) * GBPS
        const = 0.0
        for w_id in ids:
            w = inst.by_id[w_id]
            const += (w.tcm_up + w.tcm_down) * pair_w
            const += (w.tci_up + w.tci_down + w.tri_up + w.tri_down) * GBPS * ns_table
        cpu_side = _OneSidedPack(
            inst, unit.cpu_ids, inst.cpu_cap, inst.cpu_idle, inst.cpu_pf,
            inst.cpu_class_idx, inst.cpu_node,
            [inst.by_id[w].wc for w in ids], ids, {}, None, tracker,
        )
        c_val, c_assign = cpu_side.solve()
        if not cpu_side.complete:
            pack_proven_all[0] = False
        if c_assign is None:
            return (math.inf, None)
        mem_side = _OneSidedPack(
            inst, unit.mem_ids, inst.mem_cap, inst.mem_idle, inst.mem_pf,
            inst.mem_class_idx, inst.mem_node,
            [inst.by_id[w].wm for w in ids], ids,
            adj_by_id if inst.has_shuffle else {}, inst.mm_w, tracker,
        )
        m_val, m_assign = mem_side.solve()
        if not mem_side.complete:
            pack_proven_all[0] = False
        if m_assign is None:
            return (math.inf, None)
        return (c_val + m_val + const, ("split", unit.uid, c_assign, m_assign))

    def _warm_from_parent(
        unit: _Unit, member_depths: frozenset, sub: _Instance
    ) -> Optional[tuple[int, ...]]:
        """Seed a pack solve with the parent subset's arrangement plus the
        newcomer on its cheapest residual-feasible pair."""
        if len(member_depths) < 2:
            return None
        parents = None
        newcomer = None
        for d in sorted(member_depths, reverse=True):
            hit = pack_memo.get((unit.profile, member_depths - {d}))
            if hit is not None and hit[1] is not None and hit[1][0] == "engine":
                parents = hit[1]
                newcomer = order[d]
                break
        if parents is None:
            return None
        _, p_uid, p_order, p_choices, p_inst = parents
        remap_c, remap_m = _unit_remap(units[p_uid], unit)
        host: dict[int, tuple[int, int]] = {}
        cpu_res = dict()
        mem_res = dict()
        for dd, choice in enumerate(p_choices):
            c, m, _, _ = p_inst.pairs[dd][choice]
            c, m = remap_c[c], remap_m[m]
            w = p_order[dd]
            host[w] = (c, m)
            cpu_res[c] = cpu_res.get(c, inst.cpu_cap[c]) - inst.by_id[w].wc
            mem_res[m] = mem_res.get(m, inst.mem_cap[m]) - inst.by_id[w].wm
        new_w = inst.by_id[newcomer]
        d_new = sub.order.index(newcomer)
        placed = False
        for c, m, _base, _rel in sub.pairs_by_base[d_new]:
            if (new_w.wc <= cpu_res.get(c, inst.cpu_cap[c]) + FIT_EPS
                    and new_w.wm <= mem_res.get(m, inst.mem_cap[m]) + FIT_EPS):
                host[newcomer] = (c, m)
                placed = True
                break
        if not placed:
            return None
        warm = []
        for dd in range(sub.n):
            pair = host[sub.order[dd]]
            idx = next(
                (i for i, p in enumerate(sub.pairs[dd]) if (p[0], p[1]) == pair),
                None,
            )
            if idx is None:
                return None
            warm.append(idx)
        return tuple(warm)

    members: list[set] = [set() for _ in range(K)]
    pack_val = [0.0] * K
    unit_wc = [0.0] * K
    unit_wm = [0.0] * K
    unit_of: dict[int, int] = {}
    blocked: set[int] = set()
    rack_count: dict[int, int] = {}
    pod_count: dict[int, int] = {}
    state = {
        "best": incumbent,
        "best_partition": None,
        "nodes": 0,
        "complete": True,
        "g": 0.0,
        "amort_g": 0.0,
    }
    max_unit_cpu = max((u.cpu_cap for u in units), default=1.0)
    max_unit_mem = max((u.mem_cap for u in units), default=1.0)
    use_amort = all(amort_v[d] <= alpha for d in range(n))

    def xshuffle(d: int, uid: int) -> float:
        tot = 0.0
        for other, out_gbps, in_gbps in inst.adj[d]:
            ou = unit_of.get(other)
            if ou is None or ou == uid:
                continue
            tot += out_gbps * mm_unit[(uid, ou)] + in_gbps * mm_unit[(ou, uid)]
        return tot

    def visit(d: int) -> None:
        if not tracker.spend():
            state["complete"] = False
            return
        state["nodes"] += 1
        if d == n:
            if state["g"] < state["best"] - PRUNE_EPS:
                state["best"] = state["g"]
                state["best_partition"] = (
                    {w: u for w, u in unit_of.items()}, set(blocked)
                )
            return
        w_id = order[d]
        wc_w, wm_w = inst.wc[d], inst.wm[d]
        sibs = inst.siblings.get(w_id, ())
        forced_block = any(s in blocked for s in sibs)
        sibling_placed = any(s in unit_of for s in sibs)
        active = [u for u in range(K) if members[u]]
        active_racks = len(rack_count)
        active_pods = len(pod_count)

        children = []
        if not forced_block:
            seen_fresh = set()
            for u in range(K):
                unit = units[u]
                if wc_w > unit.cpu_cap - unit_wc[u] + FIT_EPS:
                    continue
                if wm_w > unit.mem_cap - unit_wm[u] + FIT_EPS:
                    continue
                if wc_w > unit.max_cpu + FIT_EPS or wm_w > unit.max_mem + FIT_EPS:
                    continue
                if not members[u]:
                    sig = (
                        unit.profile,
                        tuple(r in rack_count for r in unit.racks),
                        unit.pod in pod_count,
                    )
                    if sig in seen_fresh:
                        continue
                    seen_fresh.add(sig)
                # Optimistic increment: a pack never grows by less than the
                # newcomer's cheapest pair; the exact pack is solved only if
                # this child is actually descended into.
                inc_lb = inst.min_inc[d] + xshuffle(d, u)
                hit = pack_memo.get((unit.profile, frozenset(
                    {by_depth[x] for x in members[u]} | {d}
                )))
                if hit is not None:
                    if hit[0] is math.inf:
                        continue
                    inc_lb = hit[0] - pack_val[u] + xshuffle(d, u)
                for r in unit.racks:
                    if r not in rack_count:
                        inc_lb += rack_static
                if unit.pod not in pod_count:
                    inc_lb += pod_static
                if not active:
                    inc_lb += base_static
                children.append((inc_lb, u))
        children.sort(key=lambda t: (t[0], t[1]))

        for inc_lb, u in children:
            unit = units[u]
            lb_fast = state["g"] + inc_lb + inst.suffix_bound[d + 1]
            if lb_fast >= state["best"] - PRUNE_EPS:
                continue
            new_depths = frozenset({by_depth[x] for x in members[u]} | {d})
            val, _ = pack(units[u], new_depths)
            if val is math.inf:
                continue
            inc = val - pack_val[u] + xshuffle(d, u)
            for r in unit.racks:
                if r not in rack_count:
                    inc += rack_static
            if unit.pod not in pod_count:
                inc += pod_static
            if not active:
                inc += base_static
            child_g = state["g"] + inc
            new_racks = [r for r in unit.racks if r not in rack_count]
            new_pod = unit.pod not in pod_count
            n_racks = active_racks + len(new_racks)
            n_pods = active_pods + (1 if new_pod else 0)
            # Bound A: exact committed cost + per-workload minima + a
            # fractional static floor for units still to open.
            free_c = sum(units[x].cpu_cap - unit_wc[x] for x in active)
            if u not in active:
                free_c += unit.cpu_cap
            free_c -= wc_w
            free_m = sum(units[x].mem_cap - unit_wm[x] for x in active)
            if u not in active:
                free_m += unit.mem_cap
            free_m -= wm_w
            floor = 0.0
            stat_unit = rack_static if scope < 3 else pod_static
            if stat_unit > 0.0:
                frac = 0.0
                sc = inst.suffix_wc[d + 1] - free_c
                if sc > 0.0:
                    frac = sc / max_unit_cpu
                sm = inst.suffix_wm[d + 1] - free_m
                if sm > 0.0:
                    frac = max(frac, sm / max_unit_mem)
                floor = frac * stat_unit
            lb = child_g + inst.suffix_bound[d + 1] + floor
            if use_amort:
                lb_b = (
                    state["amort_g"] + amort_v[d] + suffix_amort[d + 1]
                    + rack_static * n_racks + pod_static * n_pods
                    + base_static + floor
                )
                if lb_b > lb:
                    lb = lb_b
            if lb >= state["best"] - PRUNE_EPS:
                continue
            members[u].add(w_id)
            old_pack = pack_val[u]
            pack_val[u] = val
            unit_wc[u] += wc_w
            unit_wm[u] += wm_w
            unit_of[w_id] = u
            for r in new_racks:
                rack_count[r] = 0
            for r in unit.racks:
                rack_count[r] += 1
            pod_count[unit.pod] = pod_count.get(unit.pod, 0) + 1
            state["g"] += inc
            state["amort_g"] += amort_v[d]
            visit(d + 1)
            state["amort_g"] -= amort_v[d]
            state["g"] -= inc
            pod_count[unit.pod] -= 1
            if not pod_count[unit.pod]:
                del pod_count[unit.pod]
            for r in unit.racks:
                rack_count[r] -= 1
            for r in new_racks:
                del rack_count[r]
            del unit_of[w_id]
            unit_wc[u] -= wc_w
            unit_wm[u] -= wm_w
            pack_val[u] = old_pack
            members[u].discard(w_id)

        if allow_blocking and not sibling_placed:
            child_g = state["g"] + alpha
            if child_g + inst.suffix_bound[d + 1] < state["best"] - PRUNE_EPS:
                blocked.add(w_id)
                state["g"] += alpha
                state["amort_g"] += alpha
                visit(d + 1)
                state["amort_g"] -= alpha
                state["g"] -= alpha
                blocked.discard(w_id)

    visit(0)

    proven = state["complete"] and pack_proven_all[0]
    if state["best_partition"] is None:
        return None, state["best"], state["nodes"], proven

    unit_assign, blocked_final = state["best_partition"]
    wcl = {w.id: None for w in inst.workloads}
    wml = {w.id: None for w in inst.workloads}
    per_unit: dict[int, set] = {}
    for w, u in unit_assign.items():
        per_unit.setdefault(u, set()).add(w)
    for u, wset in sorted(per_unit.items()):
        depths = frozenset(by_depth[w] for w in wset)
        _, detail = pack(units[u], depths)
        if detail[0] == "engine":
            _, p_uid, sub_order, sub_choices, sub_inst = detail
            remap_c, remap_m = _unit_remap(units[p_uid], units[u])
            sub_wcl, sub_wml = _choices_to_assignment(sub_inst, sub_choices)
            for w in wset:
                wcl[w] = remap_c[sub_wcl[w]]
                wml[w] = remap_m[sub_wml[w]]
        else:
            _, p_uid, c_assign, m_assign = detail
            remap_c, remap_m = _unit_remap(units[p_uid], units[u])
            for w in wset:
                wcl[w] = remap_c[c_assign[w]]
                wml[w] = remap_m[m_assign[w]]
    return (wcl, wml), state["best"], state["nodes"], proven


MAX_ORACLE_WORKLOADS = 6


def enumerate_exhaustive(
    layout: DcLayout,
    fabric: FabricParams,
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    dc_kind: Optional[DcKind] = None,
    params: Optional[ObjectiveParams] = None,
    integrated: Optional[Sequence[IntegratedWorkload]] = None,
) -> SolveResult:
    """Ground-truth oracle: try every capacity-feasible assignment.

    Near-optimal ties are re-scored with the canonical objective so the
    reported optimum is exact.
    """
    if len(workloads) > MAX_ORACLE_WORKLOADS:
        raise InfeasibleInstanceError(
            f"exhaustive oracle limited to {MAX_ORACLE_WORKLOADS} workloads"
        )
    t0 = time.perf_counter()
    dc_kind = dc_kind or layout.dc_kind
    params = params or ObjectiveParams()
    inst = _Instance(layout, fabric, workloads, shuffle, dc_kind, params)
    if integrated:
        inst.attach_integrated(integrated)
    n = inst.n

    ties: list[tuple[int, ...]] = []
    best = [math.inf]
    leaves = [0]
    st = _SearchState(inst)
    choices: list[int] = []

    def recurse(d: int, g: float) -> None:
        if d == n:
            leaves[0] += 1
            if g < best[0] - 1e-6:
                best[0] = g
                ties[:] = [tuple(choices)]
            elif g <= best[0] + 1e-6:
                ties.append(tuple(choices))
                if g < best[0]:
                    best[0] = g
            return
        w_id = inst.order[d]
        sibs = inst.siblings.get(w_id, ())
        forced_block = any(s in st.blocked for s in sibs)
        sibling_placed = any(s in st.placed for s in sibs)
        if not forced_block:
            for idx, (c, m, base, _rel) in enumerate(inst.pairs[d]):
                if inst.wc[d] > st.cpu_res[c] + FIT_EPS:
                    continue
                if inst.wm[d] > st.mem_res[m] + FIT_EPS:
                    continue
                inc = _increment(inst, st, d, c, m, base)
                token = _apply(inst, st, d, c, m)
                choices.append(idx)
                recurse(d + 1, g + inc)
                choices.pop()
                _undo(inst, st, token)
        if not sibling_placed:
            st.blocked.add(w_id)
            choices.append(BLOCK)
            recurse(d + 1, g + params.alpha)
            choices.pop()
            st.blocked.discard(w_id)

    if n:
        recurse(0, 0.0)
    else:
        ties.append(())

    best_val = math.inf
    best_assign = None
    for tie in ties:
        wcl, wml = _choices_to_assignment(inst, tie)
        pl = derive(wcl, wml, layout)
        val = objective(pl, layout, fabric, workloads, shuffle, params,
                        dc_kind, inst.integrated)
        if val < best_val:
            best_val = val
            best_assign = pl
    return SolveResult(
        placement=best_assign,
        objective=best_val,
        proven_optimal=True,
        nodes_explored=leaves[0],
        wall_time=time.perf_counter() - t0,
    )
