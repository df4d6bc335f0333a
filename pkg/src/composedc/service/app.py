"""FastAPI surface wrapping the placement toolkit.

Every capability of the core package is reachable over HTTP: building
layouts, generating workload sets, greedy and exact placement, the LP
export, sweeps and comparisons. The CLI is a thin client of this app.
"""

from __future__ import annotations

import json
from typing import Optional

from fastapi import FastAPI, HTTPException

from .. import exact, heep, lpformat, scenario as scen
from ..fabric import FabricKind, default_fabric
from ..model import (
    ConfigurationError,
    DcKind,
    DcLayout,
    build_reference_layout,
    default_server_classes,
    max_latency_for,
)
from ..placement import ObjectiveParams, check, objective
from ..power import report as power_report
from ..workloads import (
    IntegratedWorkload,
    ShuffleIntensity,
    ShuffleMatrix,
    TrafficPattern,
    Workload,
    WorkloadClass,
    generate,
    split_to_microservices,
    PRNG_NAME,
)
from . import schemas as sc

app = FastAPI(
    title="composedc",
    description="Composable data center power modeling and "
                "energy-aware workload placement",
    version="0.1.0",
)


def _layout(req: sc.LayoutRequest) -> DcLayout:
    try:
        return build_reference_layout(
            DcKind(req.dc_kind), req.pods, req.racks_per_pod,
            req.servers_per_class_per_rack, default_server_classes(),
        )
    except (ConfigurationError, ValueError) as err:
        raise HTTPException(status_code=422, detail=str(err))


def _workloads(models: list[sc.WorkloadModel]) -> list[Workload]:
    return [
        Workload(
            id=m.id, wclass=WorkloadClass(m.wclass), wc=m.wc, wm=m.wm,
            tcm_up=m.tcm_up, tcm_down=m.tcm_down, tci_up=m.tci_up,
            tci_down=m.tci_down, tri_up=m.tri_up, tri_down=m.tri_down,
            group_id=m.group_id, parent_integrated=m.parent_integrated,
            max_lat=m.max_lat,
        )
        for m in models
    ]


def _shuffle(flows: list[sc.ShuffleFlow]) -> ShuffleMatrix:
    out = ShuffleMatrix()
    for f in flows:
        out.flows[(f.src, f.dst)] = f.gbps
    return out


def _integrated(models) -> Optional[list[IntegratedWorkload]]:
    if not models:
        return None
    return [IntegratedWorkload(m.id, m.ci, m.mi, tuple(m.members))
            for m in models]


def _workload_out(w: Workload) -> sc.WorkloadModel:
    return sc.WorkloadModel(
        id=w.id, wclass=w.wclass.value, wc=w.wc, wm=w.wm, tcm_up=w.tcm_up,
        tcm_down=w.tcm_down, tci_up=w.tci_up, tci_down=w.tci_down,
        tri_up=w.tri_up, tri_down=w.tri_down, group_id=w.group_id,
        parent_integrated=w.parent_integrated, max_lat=w.max_lat,
    )


def _placement_out(placement) -> sc.PlacementModel:
    return sc.PlacementModel(
        assignment={str(w): (placement.wcl[w], placement.wml[w])
                    for w in sorted(placement.wcl)},
        blocked=sorted(w for w, s in placement.served.items() if not s),
    )


def _report_out(rep) -> sc.PowerReportModel:
    return sc.PowerReportModel(**dict(zip(sc.PowerReportModel.model_fields,
                                          rep.to_row())))


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.get("/defaults")
def defaults() -> dict:
    classes = [
        {"name": c.name, "kind": c.kind.value, "capacity": c.capacity,
         "peak_power": c.peak_power, "idle_fraction": c.idle_fraction}
        for c in default_server_classes()
    ]
    fabrics = {
        kind.value: {
            k: v for k, v in vars(default_fabric(kind)).items()
            if not k.startswith("_") and k != "fabric_kind"
        }
        for kind in FabricKind
    }
    return {"server_classes": classes, "fabrics": fabrics}


@app.post("/layout", response_model=sc.LayoutResponse)
def layout_endpoint(req: sc.LayoutRequest) -> sc.LayoutResponse:
    layout = _layout(req)

    def comp_out(comp, cls):
        return sc.ComponentOut(
            id=comp.id, kind=comp.kind.value, class_name=cls.name,
            capacity=cls.capacity, peak_power=cls.peak_power,
            node=comp.node, rack=comp.rack, pod=comp.pod,
        )

    return sc.LayoutResponse(
        dc_kind=layout.dc_kind.value,
        n_pods=layout.n_pods,
        n_racks=layout.n_racks,
        n_nodes=layout.n_nodes,
        max_latency=max_latency_for(layout.dc_kind),
        cpus=[comp_out(c, layout.cpu_class(c.id)) for c in layout.cpus],
        mems=[comp_out(m, layout.mem_class(m.id)) for m in layout.mems],
    )


@app.post("/workloads/generate", response_model=sc.GenerateResponse)
def generate_endpoint(req: sc.GenerateRequest) -> sc.GenerateResponse:
    try:
        workloads, shuffle = generate(
            req.count, WorkloadClass(req.wclass), req.group_size,
            TrafficPattern(req.pattern),
            None if req.shuffle_intensity is None
            else ShuffleIntensity(req.shuffle_intensity),
            req.seed,
        )
    except (ConfigurationError, ValueError) as err:
        raise HTTPException(status_code=422, detail=str(err))
    return sc.GenerateResponse(
        prng=PRNG_NAME,
        seed=req.seed,
        workloads=[_workload_out(w) for w in workloads],
        shuffle=[sc.ShuffleFlow(src=s, dst=d, gbps=g)
                 for (s, d), g in sorted(shuffle.flows.items())],
    )


@app.post("/workloads/split", response_model=sc.SplitResponse)
def split_endpoint(req: sc.SplitRequest) -> sc.SplitResponse:
    try:
        integrated, micro = split_to_microservices(
            _workloads(req.workloads), req.parts, req.cpu_shares,
            req.mem_shares,
        )
    except (ConfigurationError, ValueError) as err:
        raise HTTPException(status_code=422, detail=str(err))
    return sc.SplitResponse(
        integrated=[sc.IntegratedModel(id=i.id, ci=i.ci, mi=i.mi,
                                       members=list(i.members))
                    for i in integrated],
        microservices=[_workload_out(w) for w in micro],
    )


@app.get("/thresholds", response_model=sc.ThresholdsResponse)
def thresholds_endpoint() -> sc.ThresholdsResponse:
    classes = default_server_classes()
    cpu = heep.thresholds(heep.efficiency_ordered(
        [c for c in classes if c.kind.value == "cpu"]))
    mem = heep.thresholds(heep.efficiency_ordered(
        [c for c in classes if c.kind.value == "memory"]))

    def rows(table):
        return [sc.ThresholdRow(name=e.name, capacity=e.capacity,
                                lower=e.lower, upper=e.upper)
                for e in table.entries]

    return sc.ThresholdsResponse(
        cpu=rows(cpu), memory=rows(mem),
        formatted=cpu.format() + "\n" + mem.format(),
    )


def _common(req: sc.PlaceRequest):
    layout = _layout(req.layout)
    fabric = default_fabric(FabricKind(req.fabric_kind))
    if req.es_energy_per_bit is not None:
        fabric = fabric.with_es_energy(req.es_energy_per_bit)
    dc_kind = DcKind(req.dc_kind) if req.dc_kind else layout.dc_kind
    workloads = _workloads(req.workloads)
    shuffle = _shuffle(req.shuffle)
    integrated = _integrated(req.integrated)
    params = ObjectiveParams(alpha=req.alpha)
    return layout, fabric, dc_kind, workloads, shuffle, integrated, params


@app.post("/place/heep", response_model=sc.PlaceResponse)
def heep_endpoint(req: sc.PlaceRequest) -> sc.PlaceResponse:
    layout, fabric, dc_kind, workloads, shuffle, integrated, params = _common(req)
    result = heep.place(layout, fabric, workloads, shuffle, dc_kind, params,
                        integrated)
    violations = check(result.placement, layout, workloads, dc_kind, integrated)
    return sc.PlaceResponse(
        placement=_placement_out(result.placement),
        report=_report_out(result.report),
        objective=objective(result.placement, layout, fabric, workloads,
                            shuffle, params, dc_kind, integrated),
        decision_log=[sc.DecisionEntryModel(**{
            "seq": e.seq, "event": e.event, "via": e.via,
            "workload": e.workload, "cpu": e.cpu, "mem": e.mem,
            "rack": e.rack, "pod": e.pod, "cpu_util": e.cpu_util,
            "mem_util": e.mem_util, "trace": e.trace,
        }) for e in result.log],
        violations=[v.to_dict() for v in violations],
    )


@app.post("/place/exact", response_model=sc.SolveResponse)
def solve_endpoint(req: sc.SolveRequest) -> sc.SolveResponse:
    layout, fabric, dc_kind, workloads, shuffle, integrated, params = _common(req)
    hr = heep.place(layout, fabric, workloads, shuffle, dc_kind, params,
                    integrated)
    res = exact.solve_exact(
        layout, fabric, workloads, shuffle, dc_kind, params,
        exact.SolveBudget(req.max_nodes, req.max_seconds), integrated,
        warm_starts=[hr.placement],
    )
    return sc.SolveResponse(
        placement=_placement_out(res.placement),
        report=_report_out(power_report(layout, fabric, res.placement,
                                        workloads, shuffle)),
        objective=res.objective,
        proven_optimal=res.proven_optimal,
        nodes_explored=res.nodes_explored,
        wall_time=res.wall_time,
    )


@app.post("/export/lp", response_model=sc.ExportLpResponse)
def export_lp_endpoint(req: sc.PlaceRequest) -> sc.ExportLpResponse:
    layout, fabric, dc_kind, workloads, shuffle, integrated, params = _common(req)
    text = lpformat.export_lp(layout, fabric, workloads, shuffle, dc_kind,
                              params, integrated)
    model = lpformat.parse_lp(text)
    return sc.ExportLpResponse(
        lp=text, variables=len(model.variables()),
        constraints=len(model.constraints),
    )


def _scenario_from_model(model: sc.ScenarioModel) -> scen.Scenario:
    data = model.model_dump()
    try:
        return scen.Scenario.from_dict(data)
    except (ConfigurationError, ValueError, TypeError) as err:
        raise HTTPException(status_code=422, detail=str(err))


@app.post("/sweep", response_model=sc.SweepResponse)
def sweep_endpoint(req: sc.SweepRequest) -> sc.SweepResponse:
    scenarios = [_scenario_from_model(m) for m in req.scenarios]
    rows = scen.sweep(scenarios)
    records = [sc.ResultRowModel(**r.to_record()) for r in rows]
    return sc.SweepResponse(
        rows=records,
        csv=scen.rows_to_csv(rows),
        any_error=any(r.error for r in rows),
    )


def _row_from_model(m: sc.ResultRowModel) -> scen.ResultRow:
    from ..power import PowerReport

    report = None
    if m.tdpc is not None:
        report = PowerReport(
            tcpc=m.tcpc, tmpc=m.tmpc, tnpc=m.tnpc, tdpc=m.tdpc,
            blocked=m.blocked, active_cpu=m.active_cpu,
            active_mem=m.active_mem, nar=m.nar, nap=m.nap,
            avg_active_cpu_util=m.avg_cpu_util,
            avg_active_mem_util=m.avg_mem_util,
        )
    return scen.ResultRow(
        scenario=m.scenario, setup=m.setup, dc_kind=m.dc_kind,
        fabric=m.fabric, wclass=m.wclass, count=m.count, seed=m.seed,
        method=m.method, report=report, objective=m.objective,
        proven_optimal=m.proven_optimal, nodes_explored=m.nodes_explored,
        wall_time=m.wall_time, gap_vs_exact_pct=m.gap_vs_exact_pct,
        error=m.error, config=json.loads(m.config or "{}"),
    )


@app.post("/compare", response_model=sc.CompareResponse)
def compare_endpoint(req: sc.CompareRequest) -> sc.CompareResponse:
    baseline = [_row_from_model(m) for m in req.baseline]
    other = [_row_from_model(m) for m in req.other]
    try:
        comparisons = scen.compare(baseline, other, req.metrics)
    except scen.PairingError as err:
        raise HTTPException(status_code=422, detail=str(err))
    return sc.CompareResponse(comparisons=[
        sc.CompareRow(
            metric=c.metric, baseline=c.baseline, other=c.other,
            mean_pct_reduction=c.mean_pct_reduction,
            per_cell=[sc.CompareCell(**cell) for cell in c.per_cell],
        )
        for c in comparisons
    ])
