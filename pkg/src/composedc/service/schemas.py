"""Pydantic request/response models of the placement service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class LayoutRequest(BaseModel):
    dc_kind: str = "traditional"
    pods: int = Field(2, ge=1)
    racks_per_pod: int = Field(2, ge=1)
    servers_per_class_per_rack: int = Field(2, ge=1)


class ComponentOut(BaseModel):
    id: int
    kind: str
    class_name: str
    capacity: float
    peak_power: float
    node: int
    rack: int
    pod: int


class LayoutResponse(BaseModel):
    dc_kind: str
    n_pods: int
    n_racks: int
    n_nodes: int
    max_latency: int
    cpus: list[ComponentOut]
    mems: list[ComponentOut]


class WorkloadModel(BaseModel):
    id: int
    wclass: str = "cpu-intensive"
    wc: float
    wm: float
    tcm_up: float = 120.0
    tcm_down: float = 100.0
    tci_up: float = 2.0
    tci_down: float = 1.0
    tri_up: float = 2.0
    tri_down: float = 1.0
    group_id: int = 0
    parent_integrated: Optional[int] = None
    max_lat: Optional[int] = None


class ShuffleFlow(BaseModel):
    src: int
    dst: int
    gbps: float


class GenerateRequest(BaseModel):
    count: int = Field(ge=0)
    wclass: str = "cpu-intensive"
    group_size: int = Field(5, ge=1)
    pattern: str = "many-to-many"
    shuffle_intensity: Optional[str] = "non-intensive"
    seed: int = 0


class GenerateResponse(BaseModel):
    prng: str
    seed: int
    workloads: list[WorkloadModel]
    shuffle: list[ShuffleFlow]


class SplitRequest(BaseModel):
    workloads: list[WorkloadModel]
    parts: int = Field(2, ge=1)
    cpu_shares: Optional[list[float]] = None
    mem_shares: Optional[list[float]] = None


class IntegratedModel(BaseModel):
    id: int
    ci: float
    mi: float
    members: list[int]


class SplitResponse(BaseModel):
    integrated: list[IntegratedModel]
    microservices: list[WorkloadModel]


class PlaceRequest(BaseModel):
    layout: LayoutRequest = LayoutRequest()
    fabric_kind: str = "optical"
    es_energy_per_bit: Optional[float] = None
    dc_kind: Optional[str] = None
    alpha: float = 2000.0
    workloads: list[WorkloadModel]
    shuffle: list[ShuffleFlow] = []
    integrated: Optional[list[IntegratedModel]] = None


class SolveRequest(PlaceRequest):
    max_nodes: int = Field(500_000, ge=1)
    max_seconds: Optional[float] = None


class PowerReportModel(BaseModel):
    tcpc: float
    tmpc: float
    tnpc: float
    tdpc: float
    blocked: int
    active_cpu: int
    active_mem: int
    nar: int
    nap: int
    avg_cpu_util: float
    avg_mem_util: float


class DecisionEntryModel(BaseModel):
    seq: int
    event: str
    via: str
    workload: int
    cpu: Optional[int] = None
    mem: Optional[int] = None
    rack: Optional[int] = None
    pod: Optional[int] = None
    cpu_util: Optional[float] = None
    mem_util: Optional[float] = None
    trace: str = ""


class PlacementModel(BaseModel):
    assignment: dict[str, tuple[Optional[int], Optional[int]]]
    blocked: list[int]


class PlaceResponse(BaseModel):
    placement: PlacementModel
    report: PowerReportModel
    objective: float
    decision_log: Optional[list[DecisionEntryModel]] = None
    violations: list[dict] = []


class SolveResponse(BaseModel):
    placement: PlacementModel
    report: PowerReportModel
    objective: float
    proven_optimal: bool
    nodes_explored: int
    wall_time: float


class ThresholdRow(BaseModel):
    name: str
    capacity: float
    lower: Optional[float]
    upper: Optional[float]


class ThresholdsResponse(BaseModel):
    cpu: list[ThresholdRow]
    memory: list[ThresholdRow]
    formatted: str


class ScenarioModel(BaseModel):
    name: str = "scenario"
    dc_kind: Optional[str] = None
    fabric_kind: str = "optical"
    wclass: str = "cpu-intensive"
    counts: list[int] = [5, 10, 15, 20]
    seeds: list[int] = [0]
    methods: list[str] = ["heep"]
    setup: Optional[str] = None
    pods: int = 2
    racks_per_pod: int = 2
    servers_per_class_per_rack: int = 2
    group_size: int = 5
    pattern: str = "many-to-many"
    shuffle_intensity: Optional[str] = "non-intensive"
    micro_parts: int = 2
    cpu_shares: Optional[list[float]] = None
    mem_shares: Optional[list[float]] = None
    alpha: float = 2000.0
    es_energy_per_bit: Optional[float] = None
    max_nodes: int = 500_000
    max_seconds: Optional[float] = None


class SweepRequest(BaseModel):
    scenarios: list[ScenarioModel]


class ResultRowModel(BaseModel):
    schema_version: int
    scenario: str
    setup: Optional[str]
    dc_kind: str
    fabric: str
    wclass: str
    count: int
    seed: int
    method: str
    tcpc: Optional[float] = None
    tmpc: Optional[float] = None
    tnpc: Optional[float] = None
    tdpc: Optional[float] = None
    blocked: Optional[int] = None
    active_cpu: Optional[int] = None
    active_mem: Optional[int] = None
    nar: Optional[int] = None
    nap: Optional[int] = None
    avg_cpu_util: Optional[float] = None
    avg_mem_util: Optional[float] = None
    objective: Optional[float] = None
    proven_optimal: Optional[bool] = None
    nodes_explored: Optional[int] = None
    wall_time: Optional[float] = None
    gap_vs_exact_pct: Optional[float] = None
    error: Optional[str] = None
    config: str = "{}"


class SweepResponse(BaseModel):
    rows: list[ResultRowModel]
    csv: str
    any_error: bool


class CompareRequest(BaseModel):
    baseline: list[ResultRowModel]
    other: list[ResultRowModel]
    metrics: list[str] = ["tdpc"]


class CompareCell(BaseModel):
    count: int
    seed: int
    method: str
    baseline: float
    other: float
    pct_reduction: float


class CompareRow(BaseModel):
    metric: str
    baseline: str
    other: str
    mean_pct_reduction: float
    per_cell: list[CompareCell]


class CompareResponse(BaseModel):
    comparisons: list[CompareRow]


class ExportLpResponse(BaseModel):
    lp: str
    variables: int
    constraints: int
