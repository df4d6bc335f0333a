"""Seeded generation of monolithic and micro-service workload sets.

Demands are drawn uniformly from per-class ranges; inter-resource traffic
is fixed per workload so differently-shaped DCs stay comparable. Workloads
are clustered into groups, and in-memory shuffle traffic is drawn over a
group-internal pair pattern.

Generation uses numpy's PCG64 generator; the 64-bit seed is recorded in
every file written, so a run can be replayed exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import ConfigurationError

PRNG_NAME = "numpy-pcg64"


class WorkloadClass(str, Enum):
    CPU_INTENSIVE = "cpu-intensive"
    MEM_INTENSIVE = "mem-intensive"


class TrafficPattern(str, Enum):
    ONE_TO_ONE = "one-to-one"
    ONE_TO_MANY = "one-to-many"
    MANY_TO_MANY = "many-to-many"
    MIXED = "mixed"


class ShuffleIntensity(str, Enum):
    NON_INTENSIVE = "non-intensive"
    INTENSIVE = "intensive"


#: Uniform demand ranges per class: (cpu GHz range, memory GB range).
DEMAND_RANGES = {
    WorkloadClass.CPU_INTENSIVE: ((1.0, 3.0), (4.0, 8.0)),
    WorkloadClass.MEM_INTENSIVE: ((0.5, 2.0), (6.0, 24.0)),
}

#: Fixed per-workload traffic in Gb/s: CPU-memory up/down, CPU-IO up/down,
#: memory-IO up/down.
FIXED_TRAFFIC = (120.0, 100.0, 2.0, 1.0, 2.0, 1.0)

SHUFFLE_RANGES = {
    ShuffleIntensity.NON_INTENSIVE: (0.0, 10.0),
    ShuffleIntensity.INTENSIVE: (10.0, 70.0),
}


@dataclass(frozen=True)
class Workload:
    """One indivisible demand pair plus its fixed traffic vector."""

    id: int
    wclass: WorkloadClass
    wc: float
    wm: float
    tcm_up: float = FIXED_TRAFFIC[0]
    tcm_down: float = FIXED_TRAFFIC[1]
    tci_up: float = FIXED_TRAFFIC[2]
    tci_down: float = FIXED_TRAFFIC[3]
    tri_up: float = FIXED_TRAFFIC[4]
    tri_down: float = FIXED_TRAFFIC[5]
    group_id: int = 0
    parent_integrated: Optional[int] = None
    max_lat: Optional[int] = None

    def __post_init__(self) -> None:
        if self.wc <= 0 or self.wm <= 0:
            raise ConfigurationError(f"workload {self.id}: demands must be > 0")
        for name in ("tcm_up", "tcm_down", "tci_up", "tci_down", "tri_up", "tri_down"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"workload {self.id}: {name} must be >= 0")


@dataclass
class ShuffleMatrix:
    """Sparse directed memory-to-memory traffic between workloads (Gb/s)."""

    flows: dict[tuple[int, int], float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.flows)

    def get(self, src: int, dst: int) -> float:
        return self.flows.get((src, dst), 0.0)

    def items(self):
        return self.flows.items()

    def partners(self, workload_id: int) -> list[tuple[int, float, float]]:
        """(other id, outbound Gb/s, inbound Gb/s) for every counterpart."""
        others: dict[int, list[float]] = {}
        for (s, d), gbps in self.flows.items():
            if s == workload_id:
                others.setdefault(d, [0.0, 0.0])[0] += gbps
            elif d == workload_id:
                others.setdefault(s, [0.0, 0.0])[1] += gbps
        return sorted((o, v[0], v[1]) for o, v in others.items())


@dataclass(frozen=True)
class IntegratedWorkload:
    """A bundle of micro-service workloads that must be served together."""

    id: int
    ci: float
    mi: float
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ConfigurationError(f"integrated workload {self.id} has no members")


def _group_pairs(
    members: Sequence[int], pattern: TrafficPattern, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Ordered (src, dst) pairs inside one group for the given pattern."""
    if pattern == TrafficPattern.ONE_TO_ONE:
        # Disjoint partner pairs in id order, both directions; an odd
        # trailing member stays silent.
        pairs = []
        for i in range(0, len(members) - 1, 2):
            a, b = members[i], members[i + 1]
            pairs += [(a, b), (b, a)]
        return pairs
    if pattern == TrafficPattern.ONE_TO_MANY:
        head = members[0]
        return [(head, other) for other in members[1:]]
    if pattern == TrafficPattern.MANY_TO_MANY:
        return [(a, b) for a in members for b in members if a != b]
    if pattern == TrafficPattern.MIXED:
        all_pairs = [(a, b) for a in members for b in members if a != b]
        keep = rng.random(len(all_pairs)) < 0.5
        return [p for p, k in zip(all_pairs, keep) if k]
    raise ConfigurationError(f"unknown traffic pattern: {pattern}")


def generate(
    count: int,
    wclass: WorkloadClass,
    group_size: int = 5,
    pattern: TrafficPattern = TrafficPattern.MANY_TO_MANY,
    shuffle_intensity: Optional[ShuffleIntensity] = ShuffleIntensity.NON_INTENSIVE,
    seed: int = 0,
) -> tuple[list[Workload], ShuffleMatrix]:
    """Draw ``count`` workloads and their group shuffle matrix.

    ``shuffle_intensity=None`` produces an empty matrix, for studies that
    drop inter-workload traffic from the model.
    """
    if count < 0:
        raise ConfigurationError("count must be >= 0")
    if group_size < 1:
        raise ConfigurationError("group_size must be >= 1")
    pattern = TrafficPattern(pattern)
    rng = np.random.default_rng(seed)
    (wc_lo, wc_hi), (wm_lo, wm_hi) = DEMAND_RANGES[WorkloadClass(wclass)]
    workloads = []
    for i in range(count):
        wc = float(rng.uniform(wc_lo, wc_hi))
        wm = float(rng.uniform(wm_lo, wm_hi))
        workloads.append(
            Workload(id=i, wclass=WorkloadClass(wclass), wc=wc, wm=wm,
                     group_id=i // group_size)
        )

    shuffle = ShuffleMatrix()
    if shuffle_intensity is not None and count:
        lo, hi = SHUFFLE_RANGES[ShuffleIntensity(shuffle_intensity)]
        groups: dict[int, list[int]] = {}
        for w in workloads:
            groups.setdefault(w.group_id, []).append(w.id)
        for gid in sorted(groups):
            for src, dst in _group_pairs(groups[gid], pattern, rng):
                shuffle.flows[(src, dst)] = float(rng.uniform(lo, hi))
    return workloads, shuffle


def split_to_microservices(
    workloads: Sequence[Workload],
    parts: int = 2,
    cpu_shares: Optional[Sequence[float]] = None,
    mem_shares: Optional[Sequence[float]] = None,
) -> tuple[list[IntegratedWorkload], list[Workload]]:
    """Decouple each workload into ``parts`` micro-services.

    Demands split by the given shares (equal by default); every traffic
    direction is shared equally between the micro-services. The returned
    micro-service list uses fresh dense ids; each member points back to
    its integrated workload.
    """
    if cpu_shares is None:
        cpu_shares = [1.0 / parts] * parts
    if mem_shares is None:
        mem_shares = [1.0 / parts] * parts
    if len(cpu_shares) != parts or len(mem_shares) != parts:
        raise ConfigurationError("parts must equal the number of shares")
    for shares in (cpu_shares, mem_shares):
        if abs(sum(shares) - 1.0) > 1e-9:
            raise ConfigurationError("shares must sum to 1")
        if any(s <= 0 for s in shares):
            raise ConfigurationError("shares must be > 0")

    integrated: list[IntegratedWorkload] = []
    micro: list[Workload] = []
    for parent in workloads:
        member_ids = []
        for j in range(parts):
            member_ids.append(len(micro))
            micro.append(
                Workload(
                    id=len(micro),
                    wclass=parent.wclass,
                    wc=parent.wc * cpu_shares[j],
                    wm=parent.wm * mem_shares[j],
                    tcm_up=parent.tcm_up / parts,
                    tcm_down=parent.tcm_down / parts,
                    tci_up=parent.tci_up / parts,
                    tci_down=parent.tci_down / parts,
                    tri_up=parent.tri_up / parts,
                    tri_down=parent.tri_down / parts,
                    group_id=parent.group_id,
                    parent_integrated=parent.id,
                    max_lat=parent.max_lat,
                )
            )
        integrated.append(
            IntegratedWorkload(
                id=parent.id, ci=parent.wc, mi=parent.wm, members=tuple(member_ids)
            )
        )
    return integrated, micro


WORKLOAD_COLUMNS = [
    "id", "class", "wc", "wm", "tcm_up", "tcm_down", "tci_up", "tci_down",
    "tri_up", "tri_down", "group_id", "parent_integrated", "max_lat",
]


def workloads_to_csv(
    workloads: Iterable[Workload], meta: Optional[dict] = None
) -> str:
    """Flat one-row-per-workload table; metadata rides in comment lines."""
    buf = io.StringIO()
    meta = dict(meta or {})
    meta.setdefault("prng", PRNG_NAME)
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buf)
    writer.writerow(WORKLOAD_COLUMNS)
    for w in workloads:
        writer.writerow([
            w.id, w.wclass.value, repr(w.wc), repr(w.wm),
            repr(w.tcm_up), repr(w.tcm_down), repr(w.tci_up), repr(w.tci_down),
            repr(w.tri_up), repr(w.tri_down), w.group_id,
            "" if w.parent_integrated is None else w.parent_integrated,
            "" if w.max_lat is None else w.max_lat,
        ])
    return buf.getvalue()


def workloads_from_csv(text: str) -> tuple[list[Workload], dict]:
    meta: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    out = []
    for row in reader:
        out.append(
            Workload(
                id=int(row["id"]),
                wclass=WorkloadClass(row["class"]),
                wc=float(row["wc"]),
                wm=float(row["wm"]),
                tcm_up=float(row["tcm_up"]),
                tcm_down=float(row["tcm_down"]),
                tci_up=float(row["tci_up"]),
                tci_down=float(row["tci_down"]),
                tri_up=float(row["tri_up"]),
                tri_down=float(row["tri_down"]),
                group_id=int(row["group_id"]),
                parent_integrated=(
                    None if row["parent_integrated"] in ("", None)
                    else int(row["parent_integrated"])
                ),
                max_lat=None if row["max_lat"] in ("", None) else int(row["max_lat"]),
            )
        )
    return out, meta


def shuffle_to_csv(shuffle: ShuffleMatrix, meta: Optional[dict] = None) -> str:
    buf = io.StringIO()
    for key in sorted(meta or {}):
        buf.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buf)
    writer.writerow(["src", "dst", "gbps"])
    for (s, d) in sorted(shuffle.flows):
        writer.writerow([s, d, repr(shuffle.flows[(s, d)])])
    return buf.getvalue()


def shuffle_from_csv(text: str) -> ShuffleMatrix:
    rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    out = ShuffleMatrix()
    for row in reader:
        out.flows[(int(row["src"]), int(row["dst"]))] = float(row["gbps"])
    return out
