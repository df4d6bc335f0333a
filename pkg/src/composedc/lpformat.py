"""Export of the placement program in CPLEX LP text format, plus a reader.

The exported document contains the complete formulation: binary placement
variables, component/rack/pod activity with their big-M linking rows, the
pair and shuffle product linearizations, the latency bound, and (when
micro-services are present) the all-or-nothing coupling of integrated
workloads. Objective coefficients come from the same power model used
natively, so an external MILP solver run on the file can be compared
against the native optimum one-to-one.

Variable naming scheme (documented in the file header):

    WCL_w{w}_c{j}   CPU demand of workload w hosted by CPU j
    WML_w{w}_m{j}   memory demand of workload w hosted by memory j
    CA_c{j} / MA_m{j}       component activity
    RS_r{r} / PS_p{p}       rack / pod activity
    S_w{w} / BETA_w{w}      served / blocked flags
    H_w{w}_r{r} F_w{w}_r{r} CPU / memory presence of w in rack r
    AP_w{w}_p{p} BP_w{w}_p{p}  the same at pod level
    Y_w{w}_c{c}_m{m}        pair indicator
    G_s{s}_d{d}_x{x}_y{y}   shuffle pair indicator (only traffic-bearing
                            source/destination pairs are materialized)
    NAR / NAP               active rack / pod counts
    ONE                     constant 1 carrying fixed objective terms
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fabric import FabricKind, FabricParams, compute_pair_energy_table
from .model import DcKind, DcLayout, relation_of
from .placement import ObjectiveParams, Placement, derive, effective_max_lat
from .workloads import IntegratedWorkload, ShuffleMatrix, Workload

GBPS = 1e9


@dataclass
class LpModel:
    """Parsed form of an LP document: names, coefficients, bounds."""

    sense: str
    objective: dict[str, float]
    constraints: list[tuple[str, dict[str, float], str, float]]
    bounds: dict[str, tuple[float, float]]
    binaries: set[str]
    generals: set[str]

    def variables(self) -> list[str]:
        names = set(self.objective)
        for _, coeffs, _, _ in self.constraints:
            names.update(coeffs)
        names.update(self.bounds)
        names.update(self.binaries)
        names.update(self.generals)
        return sorted(names)


def _f(x: float) -> str:
    return repr(float(x))


class _Writer:
    def __init__(self):
        self.obj: list[tuple[float, str]] = []
        self.rows: list[tuple[str, list[tuple[float, str]], str, float]] = []
        self.binaries: list[str] = []
        self.generals: list[str] = []
        self.bounds: list[str] = []

    def add_obj(self, coeff: float, var: str) -> None:
        if coeff:
            self.obj.append((coeff, var))

    def row(self, name: str, terms, op: str, rhs: float) -> None:
        self.rows.append((name, [(c, v) for c, v in terms if c], op, rhs))

    def render(self, header: str) -> str:
        out = [header, "Minimize"]
        out.append(" obj: " + _terms(self.obj))
        out.append("Subject To")
        for name, terms, op, rhs in self.rows:
            out.append(f" {name}: {_terms(terms)} {op} {_f(rhs)}")
        out.append("Bounds")
        out.append(" ONE = 1")
        for b in self.bounds:
            out.append(" " + b)
        if self.binaries:
            out.append("Binaries")
            out.append(" " + " ".join(self.binaries))
        if self.generals:
            out.append("Generals")
            out.append(" " + " ".join(self.generals))
        out.append("End")
        return "\n".join(out) + "\n"


def _terms(terms: list[tuple[float, str]]) -> str:
    if not terms:
        return "0 ONE"
    parts = []
    for i, (coeff, var) in enumerate(terms):
        if i == 0:
            parts.append(f"{_f(coeff)} {var}" if coeff >= 0
                         else f"- {_f(-coeff)} {var}")
        elif coeff >= 0:
            parts.append(f"+ {_f(coeff)} {var}")
        else:
            parts.append(f"- {_f(-coeff)} {var}")
    return " ".join(parts)


def export_lp(
    layout: DcLayout,
    fabric: FabricParams,
    workloads: Sequence[Workload],
    shuffle: Optional[ShuffleMatrix] = None,
    dc_kind: Optional[DcKind] = None,
    params: Optional[ObjectiveParams] = None,
    integrated: Optional[Sequence[IntegratedWorkload]] = None,
) -> str:
    """Emit the full mixed-integer program as CPLEX LP text.

    The fixed aggregation/cross-connect idle terms ride on the pinned ONE
    variable, so the exported objective always carries them; the native
    evaluator instead reports zero network power for an entirely idle DC.
    The two agree on every placement that serves at least one workload.
    """
    dc_kind = dc_kind or layout.dc_kind
    params = params or ObjectiveParams()
    table = compute_pair_energy_table(layout, fabric)
    w_ids = [w.id for w in workloads]
    by_id = {w.id: w for w in workloads}
    n_c, n_m = len(layout.cpus), len(layout.mems)
    Q, G = params.big_q, params.big_g
    wr = _Writer()

    wcl = lambda w, j: f"WCL_w{w}_c{j}"
    wml = lambda w, j: f"WML_w{w}_m{j}"
    yv = lambda w, c, m: f"Y_w{w}_c{c}_m{m}"
    gv = lambda s, d, x, y: f"G_s{s}_d{d}_x{x}_y{y}"

    # Objective: compute power.
    for j in range(n_c):
        wr.add_obj(layout.cpu_class(j).idle_power, f"CA_c{j}")
    for j in range(n_m):
        wr.add_obj(layout.mem_class(j).idle_power, f"MA_m{j}")
    for w in w_ids:
        for j in range(n_c):
            wr.add_obj(layout.cpu_class(j).power_factor * by_id[w].wc, wcl(w, j))
        for j in range(n_m):
            wr.add_obj(layout.mem_class(j).power_factor * by_id[w].wm, wml(w, j))

    # Objective: network power, dynamic part.
    for w in w_ids:
        tcm_up = by_id[w].tcm_up * GBPS
        tcm_down = by_id[w].tcm_down * GBPS
        for c in range(n_c):
            for m in range(n_m):
                coeff = tcm_up * float(table.cpu_to_mem[c, m]) + tcm_down * float(
                    table.mem_to_cpu[m, c]
                )
                wr.add_obj(coeff, yv(w, c, m))
        ns_c = (by_id[w].tci_up + by_id[w].tci_down) * GBPS * table.north_south
        ns_m = (by_id[w].tri_up + by_id[w].tri_down) * GBPS * table.north_south
        for c in range(n_c):
            wr.add_obj(ns_c, wcl(w, c))
        for m in range(n_m):
            wr.add_obj(ns_m, wml(w, m))
    shuffle_pairs = sorted(shuffle.flows.items()) if shuffle else []
    shuffle_pairs = [
        ((s, d), gbps) for (s, d), gbps in shuffle_pairs
        if gbps > 0 and s in by_id and d in by_id
    ]
    for (s, d), gbps in shuffle_pairs:
        for x in range(n_m):
            for y in range(n_m):
                if x == y:
                    continue
                wr.add_obj(gbps * GBPS * float(table.mem_to_mem[x, y]),
                           gv(s, d, x, y))

    # Objective: network power, static part.
    kind = fabric.fabric_kind
    if kind == FabricKind.ELECTRICAL:
        wr.add_obj(fabric.es_idle_power, "NAR")
        wr.add_obj(fabric.aggregation_switches * fabric.es_idle_power, "ONE")
    elif kind == FabricKind.OPTICAL:
        wr.add_obj(fabric.wss_power, "NAR")
        wr.add_obj(fabric.oxc_power, "NAP")
        wr.add_obj(fabric.interpod_crossconnects * fabric.oxc_power, "ONE")
    else:
        wr.add_obj(fabric.es_idle_power, "NAR")
        wr.add_obj(fabric.oxc_power, "NAP")
        wr.add_obj(fabric.interpod_crossconnects * fabric.oxc_power, "ONE")

    # Objective: blocking penalty.
    for w in w_ids:
        wr.add_obj(params.alpha, f"BETA_w{w}")

    # Serving definitions and single-host limits.
    for w in w_ids:
        wr.row(f"served_def_w{w}",
               [(1.0, f"S_w{w}")] + [(-1.0, wcl(w, j)) for j in range(n_c)],
               "=", 0.0)
        wr.row(f"blocked_def_w{w}",
               [(1.0, f"S_w{w}"), (1.0, f"BETA_w{w}")], "=", 1.0)
        wr.row(f"cpu_single_w{w}", [(1.0, wcl(w, j)) for j in range(n_c)],
               "<=", 1.0)
        wr.row(f"mem_single_w{w}", [(1.0, wml(w, j)) for j in range(n_m)],
               "<=", 1.0)
        wr.row(f"co_serve_w{w}",
               [(1.0, wcl(w, j)) for j in range(n_c)]
               + [(-1.0, wml(w, j)) for j in range(n_m)], "=", 0.0)

    # Capacity constraints.
    for j in range(n_c):
        wr.row(f"cpu_cap_c{j}", [(by_id[w].wc, wcl(w, j)) for w in w_ids],
               "<=", layout.cpu_class(j).capacity)
    for j in range(n_m):
        wr.row(f"mem_cap_m{j}", [(by_id[w].wm, wml(w, j)) for w in w_ids],
               "<=", layout.mem_class(j).capacity)

    # Component activity linking.
    for j in range(n_c):
        wr.row(f"cpu_act_lo_c{j}",
               [(G, wcl(w, j)) for w in w_ids] + [(-1.0, f"CA_c{j}")], ">=", 0.0)
        wr.row(f"cpu_act_hi_c{j}",
               [(1.0, wcl(w, j)) for w in w_ids] + [(-Q, f"CA_c{j}")], "<=", 0.0)
    for j in range(n_m):
        wr.row(f"mem_act_lo_m{j}",
               [(G, wml(w, j)) for w in w_ids] + [(-1.0, f"MA_m{j}")], ">=", 0.0)
        wr.row(f"mem_act_hi_m{j}",
               [(1.0, wml(w, j)) for w in w_ids] + [(-Q, f"MA_m{j}")], "<=", 0.0)

    # Rack / pod presence of each workload's demands.
    cpu_in_rack = {r: [c.id for c in layout.cpus if c.rack == r]
                   for r in range(layout.n_racks)}
    mem_in_rack = {r: [m.id for m in layout.mems if m.rack == r]
                   for r in range(layout.n_racks)}
    cpu_in_pod = {p: [c.id for c in layout.cpus if c.pod == p]
                  for p in range(layout.n_pods)}
    mem_in_pod = {p: [m.id for m in layout.mems if m.pod == p]
                  for p in range(layout.n_pods)}
    for w in w_ids:
        for r in range(layout.n_racks):
            wr.row(f"cpu_rack_def_w{w}_r{r}",
                   [(1.0, f"H_w{w}_r{r}")]
                   + [(-1.0, wcl(w, j)) for j in cpu_in_rack[r]], "=", 0.0)
            wr.row(f"mem_rack_def_w{w}_r{r}",
                   [(1.0, f"F_w{w}_r{r}")]
                   + [(-1.0, wml(w, j)) for j in mem_in_rack[r]], "=", 0.0)
        for p in range(layout.n_pods):
            wr.row(f"cpu_pod_def_w{w}_p{p}",
                   [(1.0, f"AP_w{w}_p{p}")]
                   + [(-1.0, wcl(w, j)) for j in cpu_in_pod[p]], "=", 0.0)
            wr.row(f"mem_pod_def_w{w}_p{p}",
                   [(1.0, f"BP_w{w}_p{p}")]
                   + [(-1.0, wml(w, j)) for j in mem_in_pod[p]], "=", 0.0)

    # Rack / pod activity linking and counts.
    for r in range(layout.n_racks):
        presence = [(1.0, f"H_w{w}_r{r}") for w in w_ids]
        presence += [(1.0, f"F_w{w}_r{r}") for w in w_ids]
        wr.row(f"rack_act_lo_r{r}", presence + [(-1.0, f"RS_r{r}")], ">=", 0.0)
        wr.row(f"rack_act_hi_r{r}", presence + [(-Q, f"RS_r{r}")], "<=", 0.0)
    for p in range(layout.n_pods):
        presence = [(G, f"AP_w{w}_p{p}") for w in w_ids]
        presence += [(G, f"BP_w{w}_p{p}") for w in w_ids]
        wr.row(f"pod_act_lo_p{p}", presence + [(-1.0, f"PS_p{p}")], ">=", 0.0)
        presence = [(1.0, f"AP_w{w}_p{p}") for w in w_ids]
        presence += [(1.0, f"BP_w{w}_p{p}") for w in w_ids]
        wr.row(f"pod_act_hi_p{p}", presence + [(-Q, f"PS_p{p}")], "<=", 0.0)
    wr.row("nar_def", [(1.0, "NAR")] + [(-1.0, f"RS_r{r}")
                                        for r in range(layout.n_racks)], "=", 0.0)
    wr.row("nap_def", [(1.0, "NAP")] + [(-1.0, f"PS_p{p}")
                                        for p in range(layout.n_pods)], "=", 0.0)

    # Pair indicator linearization and the latency bound.
    for w in w_ids:
        lat_terms = []
        for c in range(n_c):
            for m in range(n_m):
                wr.row(f"y_le_cpu_w{w}_c{c}_m{m}",
                       [(1.0, yv(w, c, m)), (-1.0, wcl(w, c))], "<=", 0.0)
                wr.row(f"y_le_mem_w{w}_c{c}_m{m}",
                       [(1.0, yv(w, c, m)), (-1.0, wml(w, m))], "<=", 0.0)
                wr.row(f"y_ge_w{w}_c{c}_m{m}",
                       [(1.0, yv(w, c, m)), (-1.0, wcl(w, c)),
                        (-1.0, wml(w, m))], ">=", -1.0)
                lat_terms.append(
                    (float(relation_of(layout.cpus[c], layout.mems[m])),
                     yv(w, c, m))
                )
        wr.row(f"latency_w{w}", lat_terms, "<=",
               float(effective_max_lat(by_id[w], dc_kind)))

    # Shuffle pair linearization, only for traffic-bearing workload pairs.
    for (s, d), _gbps in shuffle_pairs:
        for x in range(n_m):
            for y in range(n_m):
                if x == y:
                    continue
                wr.row(f"g_le_src_s{s}_d{d}_x{x}_y{y}",
                       [(1.0, gv(s, d, x, y)), (-1.0, wml(s, x))], "<=", 0.0)
                wr.row(f"g_le_dst_s{s}_d{d}_x{x}_y{y}",
                       [(1.0, gv(s, d, x, y)), (-1.0, wml(d, y))], "<=", 0.0)
                wr.row(f"g_ge_s{s}_d{d}_x{x}_y{y}",
                       [(1.0, gv(s, d, x, y)), (-1.0, wml(s, x)),
                        (-1.0, wml(d, y))], ">=", -1.0)

    # Integrated workloads: all-or-nothing serving.
    for iw in integrated or ():
        wr.row(f"integrated_cpu_i{iw.id}",
               [(by_id[w].wc, wcl(w, j)) for w in iw.members for j in range(n_c)]
               + [(-iw.ci, f"IS_i{iw.id}")], "=", 0.0)
        wr.row(f"integrated_mem_i{iw.id}",
               [(by_id[w].wm, wml(w, j)) for w in iw.members for j in range(n_m)]
               + [(-iw.mi, f"IS_i{iw.id}")], "=", 0.0)

    for w in w_ids:
        for j in range(n_c):
            wr.binaries.append(wcl(w, j))
        for j in range(n_m):
            wr.binaries.append(wml(w, j))
        wr.binaries.append(f"S_w{w}")
        wr.binaries.append(f"BETA_w{w}")
        for r in range(layout.n_racks):
            wr.binaries.append(f"H_w{w}_r{r}")
            wr.binaries.append(f"F_w{w}_r{r}")
        for p in range(layout.n_pods):
            wr.binaries.append(f"AP_w{w}_p{p}")
            wr.binaries.append(f"BP_w{w}_p{p}")
        for c in range(n_c):
            for m in range(n_m):
                wr.binaries.append(yv(w, c, m))
    for j in range(n_c):
        wr.binaries.append(f"CA_c{j}")
    for j in range(n_m):
        wr.binaries.append(f"MA_m{j}")
    for r in range(layout.n_racks):
        wr.binaries.append(f"RS_r{r}")
    for p in range(layout.n_pods):
        wr.binaries.append(f"PS_p{p}")
    for (s, d), _gbps in shuffle_pairs:
        for x in range(n_m):
            for y in range(n_m):
                if x != y:
                    wr.binaries.append(gv(s, d, x, y))
    for iw in integrated or ():
        wr.binaries.append(f"IS_i{iw.id}")
    wr.generals = ["NAR", "NAP"]
    wr.bounds.append(f"NAR <= {layout.n_racks}")
    wr.bounds.append(f"NAP <= {layout.n_pods}")

    header = (
        "\\ Composable DC placement program\n"
        f"\\ dc_kind={dc_kind.value} fabric={fabric.fabric_kind.value} "
        f"workloads={len(w_ids)} cpus={n_c} mems={n_m}\n"
        "\\ Variables: WCL_w{w}_c{j} / WML_w{w}_m{j} place workload w's CPU\n"
        "\\ or memory demand on component j; CA/MA/RS/PS are activity flags;\n"
        "\\ Y_w{w}_c{c}_m{m} marks the serving pair, G_s_d_x_y a shuffle\n"
        "\\ pair; NAR/NAP count active racks/pods; ONE is pinned to 1."
    )
    return wr.render(header)


_SECTION = re.compile(
    r"^(minimize|maximize|subject to|st|s\.t\.|bounds|binaries|binary|"
    r"generals|general|end)$",
    re.IGNORECASE,
)
_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z]\w*)")


def _parse_terms(expr: str) -> dict[str, float]:
    coeffs: dict[str, float] = {}
    for sign, num, var in _TERM.findall(expr):
        value = float(num) if num else 1.0
        if sign == "-":
            value = -value
        coeffs[var] = coeffs.get(var, 0.0) + value
    return coeffs


def parse_lp(text: str) -> LpModel:
    """Read back the dialect written by :func:`export_lp`."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if line:
            lines.append(line)
    sense = "minimize"
    objective: dict[str, float] = {}
    constraints = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    generals: set[str] = set()
    section = None
    pending = ""

    def flush_obj(expr: str) -> None:
        expr = expr.split(":", 1)[-1]
        objective.update(_parse_terms(expr))

    i = 0
    while i < len(lines):
        line = lines[i]
        low = line.lower()
        if _SECTION.match(low):
            if section == "objective" and pending:
                flush_obj(pending)
                pending = ""
            section = {
                "minimize": "objective", "maximize": "objective",
                "subject to": "constraints", "st": "constraints",
                "s.t.": "constraints", "bounds": "bounds",
                "binaries": "binaries", "binary": "binaries",
                "generals": "generals", "general": "generals",
                "end": "end",
            }[low]
            if low == "maximize":
                sense = "maximize"
            i += 1
            continue
        if section == "objective":
            pending += " " + line
        elif section == "constraints":
            name, _, rest = line.partition(":")
            rest = rest.strip()
            m = re.search(r"(<=|>=|=)\s*([+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)$",
                          rest)
            coeffs = _parse_terms(rest[: m.start()])
            constraints.append(
                (name.strip(), coeffs, m.group(1), float(m.group(2)))
            )
        elif section == "bounds":
            m = re.match(r"(\w+)\s*(<=|>=|=)\s*([+-]?\d+(?:\.\d+)?)$", line)
            if m:
                var, op, val = m.group(1), m.group(2), float(m.group(3))
                lo, hi = bounds.get(var, (0.0, float("inf")))
                if op == "=":
                    bounds[var] = (val, val)
                elif op == "<=":
                    bounds[var] = (lo, val)
                else:
                    bounds[var] = (val, hi)
        elif section == "binaries":
            binaries.update(line.split())
        elif section == "generals":
            generals.update(line.split())
        i += 1
    if section == "objective" and pending:
        flush_obj(pending)
    return LpModel(sense, objective, constraints, bounds, binaries, generals)


def solve_lp_model(model: LpModel) -> tuple[float, dict[str, float]]:
    """Solve a parsed model with scipy's MILP interface (HiGHS backend)."""
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    names = model.variables()
    index = {v: i for i, v in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for v, coeff in model.objective.items():
        c[index[v]] = coeff
    lb = np.zeros(n)
    ub = np.ones(n)
    integrality = np.zeros(n)
    for v in names:
        i = index[v]
        if v in model.binaries:
            integrality[i] = 1
            ub[i] = 1.0
        elif v in model.generals:
            integrality[i] = 1
            ub[i] = np.inf
        else:
            ub[i] = np.inf
        if v in model.bounds:
            lo, hi = model.bounds[v]
            lb[i], ub[i] = lo, hi
    a = lil_matrix((len(model.constraints), n))
    clo = np.empty(len(model.constraints))
    chi = np.empty(len(model.constraints))
    for k, (_name, coeffs, op, rhs) in enumerate(model.constraints):
        for v, coeff in coeffs.items():
            a[k, index[v]] = coeff
        if op == "<=":
            clo[k], chi[k] = -np.inf, rhs
        elif op == ">=":
            clo[k], chi[k] = rhs, np.inf
        else:
            clo[k], chi[k] = rhs, rhs
    res = milp(
        c=c,
        constraints=LinearConstraint(a.tocsr(), clo, chi),
        integrality=integrality,
        bounds=Bounds(lb, ub),
    )
    if not res.success:
        raise RuntimeError(f"external MILP solve failed: {res.message}")
    value = float(res.fun)
    if model.sense == "maximize":
        value = -value
    solution = {v: float(res.x[index[v]]) for v in names}
    return value, solution


_SOLUTION_LINE = re.compile(r"^\s*([A-Za-z]\w*)\s+([+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*$")


def read_solution(text: str) -> dict[str, float]:
    """Parse a solver solution file: any line of the form `name value`.

    Covers the plain formats written by HiGHS and Gurobi; everything else
    (status lines, comments, section markers) is skipped.
    """
    values: dict[str, float] = {}
    for line in text.splitlines():
        m = _SOLUTION_LINE.match(line)
        if m:
            values[m.group(1)] = float(m.group(2))
    return values


_WCL_NAME = re.compile(r"^WCL_w(\d+)_c(\d+)$")
_WML_NAME = re.compile(r"^WML_w(\d+)_m(\d+)$")


def placement_from_solution(
    values: dict[str, float],
    layout: DcLayout,
    workloads: Sequence[Workload],
    tol: float = 0.5,
) -> Placement:
    """Rebuild a placement from solver variable values for cross-checking."""
    wcl: dict[int, Optional[int]] = {w.id: None for w in workloads}
    wml: dict[int, Optional[int]] = {w.id: None for w in workloads}
    for name, value in values.items():
        if value <= tol:
            continue
        m = _WCL_NAME.match(name)
        if m and int(m.group(1)) in wcl:
            wcl[int(m.group(1))] = int(m.group(2))
            continue
        m = _WML_NAME.match(name)
        if m and int(m.group(1)) in wml:
            wml[int(m.group(1))] = int(m.group(2))
    return derive(wcl, wml, layout)
