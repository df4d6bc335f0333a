"""Scenario runner: the evaluation matrix in one declarative object.

A scenario names a DC kind, a fabric, a workload class, the workload
counts and seeds to sweep, and which methods to run per cell. ``run``
produces one result row per (count, seed, method); rows embed the full
resolved configuration so any row can be reproduced bit-exactly from its
own fields.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence

import yaml

from .fabric import FabricKind, FabricParams, default_fabric
from .heep import HeepResult, place as heep_place
from .model import (
    ConfigurationError,
    DcKind,
    DcLayout,
    build_reference_layout,
    default_server_classes,
)
from .placement import ObjectiveParams, Placement, objective
from .power import PowerReport
from .workloads import (
    ShuffleIntensity,
    TrafficPattern,
    WorkloadClass,
    generate,
    split_to_microservices,
)
from . import exact
from . import lpformat

SCHEMA_VERSION = 1

ROW_COLUMNS = [
    "schema_version", "scenario", "setup", "dc_kind", "fabric", "wclass",
    "count", "seed", "method",
    "tcpc", "tmpc", "tnpc", "tdpc", "blocked", "active_cpu", "active_mem",
    "nar", "nap", "avg_cpu_util", "avg_mem_util",
    "objective", "proven_optimal", "nodes_explored", "wall_time",
    "gap_vs_exact_pct", "error", "config",
]


class SetupTag(str, Enum):
    """Evaluation setups pairing a resource-allocation mode with a
    workload architecture."""

    TS_MONO = "TS-Mono"
    RS_MONO = "RS-Mono"
    TS_MICRO = "TS-Micro"
    RS_MICRO = "RS-Micro"


SETUP_KIND = {
    SetupTag.TS_MONO: DcKind.TRADITIONAL,
    SetupTag.TS_MICRO: DcKind.TRADITIONAL,
    SetupTag.RS_MONO: DcKind.LOGICAL_RACK_SCALE,
    SetupTag.RS_MICRO: DcKind.LOGICAL_RACK_SCALE,
}
SETUP_MICRO = {
    SetupTag.TS_MONO: False,
    SetupTag.RS_MONO: False,
    SetupTag.TS_MICRO: True,
    SetupTag.RS_MICRO: True,
}


class PairingError(ValueError):
    """compare() was given row sets that do not line up."""


@dataclass
class Scenario:
    """Declarative description of one evaluation sweep."""

    name: str = "scenario"
    dc_kind: DcKind = DcKind.TRADITIONAL
    fabric_kind: FabricKind = FabricKind.OPTICAL
    wclass: WorkloadClass = WorkloadClass.CPU_INTENSIVE
    counts: list[int] = field(default_factory=lambda: [5, 10, 15, 20])
    seeds: list[int] = field(default_factory=lambda: [0])
    methods: list[str] = field(default_factory=lambda: ["heep"])
    setup: Optional[SetupTag] = None
    pods: int = 2
    racks_per_pod: int = 2
    servers_per_class_per_rack: int = 2
    group_size: int = 5
    pattern: TrafficPattern = TrafficPattern.MANY_TO_MANY
    shuffle_intensity: Optional[ShuffleIntensity] = ShuffleIntensity.NON_INTENSIVE
    micro_parts: int = 2
    cpu_shares: Optional[list[float]] = None
    mem_shares: Optional[list[float]] = None
    alpha: float = 2000.0
    es_energy_per_bit: Optional[float] = None
    max_nodes: int = 500_000
    max_seconds: Optional[float] = None

    def __post_init__(self) -> None:
        self.dc_kind = DcKind(self.dc_kind)
        self.fabric_kind = FabricKind(self.fabric_kind)
        self.wclass = WorkloadClass(self.wclass)
        self.pattern = TrafficPattern(self.pattern)
        if self.setup is not None:
            self.setup = SetupTag(self.setup)
            if self.dc_kind not in (DcKind.TRADITIONAL, DcKind.LOGICAL_RACK_SCALE):
                raise ConfigurationError(
                    "evaluation setups apply to traditional or logically "
                    "disaggregated DCs only"
                )
            if self.dc_kind != SETUP_KIND[self.setup]:
                raise ConfigurationError(
                    f"setup {self.setup.value} implies dc_kind "
                    f"{SETUP_KIND[self.setup].value}"
                )
        if self.shuffle_intensity is not None:
            self.shuffle_intensity = ShuffleIntensity(self.shuffle_intensity)
        bad = [m for m in self.methods if m not in ("heep", "exact", "lp-export")]
        if bad:
            raise ConfigurationError(f"unknown methods: {bad}")

    @classmethod
    def for_setup(cls, setup: SetupTag, **kwargs) -> "Scenario":
        setup = SetupTag(setup)
        kwargs.setdefault("name", setup.value)
        kwargs["dc_kind"] = SETUP_KIND[setup]
        if SETUP_MICRO[setup]:
            kwargs.setdefault("shuffle_intensity", None)
        return cls(setup=setup, **kwargs)

    @property
    def micro(self) -> bool:
        return self.setup is not None and SETUP_MICRO[self.setup]

    def fabric(self) -> FabricParams:
        fab = default_fabric(self.fabric_kind)
        if self.es_energy_per_bit is not None:
            fab = fab.with_es_energy(self.es_energy_per_bit)
        return fab

    def layout(self) -> DcLayout:
        return build_reference_layout(
            self.dc_kind, self.pods, self.racks_per_pod,
            self.servers_per_class_per_rack, default_server_classes(),
        )

    def params(self) -> ObjectiveParams:
        return ObjectiveParams(alpha=self.alpha)

    def to_dict(self) -> dict:
        data = asdict(self)
        for key, value in list(data.items()):
            if isinstance(value, Enum):
                data[key] = value.value
        data["schema_version"] = SCHEMA_VERSION
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        data.pop("schema_version", None)
        setup = data.pop("setup", None)
        if data.get("dc_kind") is None:
            data.pop("dc_kind", None)
            if setup is not None:
                data["dc_kind"] = SETUP_KIND[SetupTag(setup)]
        if setup is not None:
            setup = SetupTag(setup)
            if SETUP_MICRO[setup] and "shuffle_intensity" not in data:
                data["shuffle_intensity"] = None
            return cls(setup=setup, **data)
        return cls(**data)


@dataclass
class ResultRow:
    """One (count, seed, method) evaluation outcome."""

    scenario: str
    setup: Optional[str]
    dc_kind: str
    fabric: str
    wclass: str
    count: int
    seed: int
    method: str
    report: Optional[PowerReport] = None
    objective: Optional[float] = None
    proven_optimal: Optional[bool] = None
    nodes_explored: Optional[int] = None
    wall_time: Optional[float] = None
    gap_vs_exact_pct: Optional[float] = None
    error: Optional[str] = None
    config: dict = field(default_factory=dict)
    lp_text: Optional[str] = None
    decision_log: Optional[list] = None
    placement: Optional[dict] = None

    def to_record(self) -> dict:
        rep = self.report.to_row() if self.report else [None] * 11
        return dict(zip(ROW_COLUMNS, [
            SCHEMA_VERSION, self.scenario, self.setup, self.dc_kind,
            self.fabric, self.wclass, self.count, self.seed, self.method,
            *rep,
            self.objective, self.proven_optimal, self.nodes_explored,
            self.wall_time, self.gap_vs_exact_pct, self.error,
            json.dumps(self.config, sort_keys=True),
        ]))


def _build_cell(scenario: Scenario, count: int, seed: int):
    workloads, shuffle = generate(
        count, scenario.wclass, scenario.group_size, scenario.pattern,
        scenario.shuffle_intensity, seed,
    )
    integrated = None
    if scenario.micro:
        integrated, workloads = split_to_microservices(
            workloads, scenario.micro_parts, scenario.cpu_shares,
            scenario.mem_shares,
        )
        shuffle = type(shuffle)()  # micro-service studies drop shuffle flows
    return workloads, shuffle, integrated


def run(scenario: Scenario, warm_start_index: Optional[dict] = None) -> list[ResultRow]:
    """Evaluate every (count, seed, method) cell of the scenario.

    ``warm_start_index`` optionally maps (count, seed) to extra placements
    handed to the exact solver as incumbents.
    """
    layout = scenario.layout()
    fabric = scenario.fabric()
    params = scenario.params()
    rows: list[ResultRow] = []
    for count in scenario.counts:
        for seed in scenario.seeds:
            workloads, shuffle, integrated = _build_cell(scenario, count, seed)
            cell_cfg = scenario.to_dict()
            cell_cfg.update({"cell_count": count, "cell_seed": seed})
            exact_obj: Optional[float] = None
            heep_obj: Optional[float] = None
            cell_rows = []
            for method in scenario.methods:
                row = ResultRow(
                    scenario=scenario.name,
                    setup=scenario.setup.value if scenario.setup else None,
                    dc_kind=scenario.dc_kind.value,
                    fabric=scenario.fabric_kind.value,
                    wclass=scenario.wclass.value,
                    count=count, seed=seed, method=method, config=cell_cfg,
                )
                try:
                    if method == "heep":
                        result = heep_place(layout, fabric, workloads, shuffle,
                                            scenario.dc_kind, params, integrated)
                        row.report = result.report
                        row.objective = objective(
                            result.placement, layout, fabric, workloads,
                            shuffle, params, scenario.dc_kind, integrated,
                        )
                        row.decision_log = [e.to_row() for e in result.log]
                        row.placement = result.placement.to_dict()
                        heep_obj = row.objective
                    elif method == "exact":
                        warms = []
                        hr = heep_place(layout, fabric, workloads, shuffle,
                                        scenario.dc_kind, params, integrated)
                        warms.append(hr.placement)
                        if warm_start_index:
                            warms.extend(warm_start_index.get((count, seed), []))
                        res = exact.solve_exact(
                            layout, fabric, workloads, shuffle,
                            scenario.dc_kind, params,
                            exact.SolveBudget(scenario.max_nodes,
                                              scenario.max_seconds),
                            integrated, warm_starts=warms,
                        )
                        from .power import report as power_report
                        row.report = power_report(layout, fabric, res.placement,
                                                  workloads, shuffle)
                        row.objective = res.objective
                        row.proven_optimal = res.proven_optimal
                        row.nodes_explored = res.nodes_explored
                        row.wall_time = res.wall_time
                        row.placement = res.placement.to_dict()
                        exact_obj = res.objective
                    elif method == "lp-export":
                        row.lp_text = lpformat.export_lp(
                            layout, fabric, workloads, shuffle,
                            scenario.dc_kind, params, integrated,
                        )
                except Exception as err:  # noqa: BLE001 - cell isolation
                    row.error = f"{type(err).__name__}: {err}"
                cell_rows.append(row)
            if exact_obj is not None and heep_obj is not None and exact_obj > 0:
                gap = 100.0 * (heep_obj - exact_obj) / exact_obj
                for row in cell_rows:
                    row.gap_vs_exact_pct = gap
            rows.extend(cell_rows)
    return rows


def sweep(scenarios: Sequence[Scenario]) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for scenario in scenarios:
        rows.extend(run(scenario))
    return rows


@dataclass
class ComparisonRow:
    metric: str
    baseline: str
    other: str
    mean_pct_reduction: float
    per_cell: list[dict]


def compare(
    baseline_rows: Sequence[ResultRow],
    other_rows: Sequence[ResultRow],
    metrics: Sequence[str] = ("tdpc",),
) -> list[ComparisonRow]:
    """Mean percentage reduction of each metric from baseline to other,
    cell-matched on (count, seed, method)."""
    def keyed(rows):
        out = {}
        for row in rows:
            if row.error or row.report is None:
                continue
            out[(row.count, row.seed, row.method)] = row
        return out

    base = keyed(baseline_rows)
    other = keyed(other_rows)
    if set(base) != set(other):
        missing = set(base) ^ set(other)
        raise PairingError(f"row sets do not pair up; mismatched cells: "
                           f"{sorted(missing)[:4]}")
    if not base:
        raise PairingError("no comparable rows")
    results = []
    for metric in metrics:
        cells = []
        for key in sorted(base):
            b = getattr(base[key].report, metric) if metric != "objective" \
                else base[key].objective
            o = getattr(other[key].report, metric) if metric != "objective" \
                else other[key].objective
            pct = 100.0 * (b - o) / b if b else 0.0
            cells.append({"count": key[0], "seed": key[1], "method": key[2],
                          "baseline": b, "other": o, "pct_reduction": pct})
        mean = math.fsum(c["pct_reduction"] for c in cells) / len(cells)
        results.append(ComparisonRow(
            metric=metric,
            baseline=baseline_rows[0].scenario if baseline_rows else "",
            other=other_rows[0].scenario if other_rows else "",
            mean_pct_reduction=mean,
            per_cell=cells,
        ))
    return results


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=ROW_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_record())
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow], detail: bool = True) -> str:
    out = []
    for row in rows:
        record = row.to_record()
        if detail:
            record["decision_log"] = row.decision_log
            record["placement"] = row.placement
        out.append(record)
    return json.dumps(out, indent=2)


def scenario_to_yaml(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario.to_dict(), sort_keys=True)


def scenarios_from_yaml(text: str) -> list[Scenario]:
    """Load one scenario or a list under the `scenarios:` key."""
    data = yaml.safe_load(text)
    if data is None:
        return []
    if isinstance(data, dict) and "scenarios" in data:
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported scenario schema version {version}"
            )
        return [Scenario.from_dict(d) for d in data["scenarios"]]
    if isinstance(data, dict):
        return [Scenario.from_dict(data)]
    return [Scenario.from_dict(d) for d in data]
