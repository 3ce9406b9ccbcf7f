"""Deterministic tick-synchronous simulation of deployment topologies under
faults: primary-copy replication, failover, partitions, authority delegation,
and elastic/inelastic traffic accounting.

There is exactly one primary copy holder per key at any instant; clients and
backups hold replicas only. Conflict resolution on heal is last-writer-wins
by (tick, node id).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional

from pervadia.errors import InvalidScenarioError

FAILOVER_DELAY_TICKS = 3

NODE_ROLES = ("server", "backup", "cluster-member", "client", "peer", "superpeer")

# Traffic classes: real-time game traffic is inelastic; bulk shipping is elastic.
INELASTIC_OPS = {"fix", "act", "say"}
ELASTIC_OPS = {"replication", "journal", "status", "read", "write"}


def classify_traffic(op_kind: str) -> str:
    if op_kind in INELASTIC_OPS:
        return "inelastic"
    if op_kind in ELASTIC_OPS:
        return "elastic"
    raise InvalidScenarioError(f"unknown op kind: {op_kind}")


@dataclass
class Node:
    id: str
    role: str
    region: str = ""
    up: bool = True


@dataclass
class Edge:
    a: str
    b: str
    latency_ms: int = 10
    up: bool = True

    def key(self) -> str:
        return f"{self.a}-{self.b}"


@dataclass
class Topology:
    nodes: dict[str, Node]
    edges: list[Edge]
    authority: str = "centralized"  # or "delegated"
    replication: str = "incremental"  # "none" | "incremental" | "bulk"
    bulk_period: int = 10
    primary: str = ""
    preset: str = ""
    # Delegated mode: region tag -> local authority node.
    region_authority: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ClientOp:
    tick: int
    client: str
    kind: str  # read | write | fix
    key: str
    value: Optional[int] = None
    op_class: str = ""  # community | skills | "" for preset-specific routing


@dataclass(frozen=True)
class Fault:
    tick: int
    kind: str  # crash | recover | partition | heal
    node: Optional[str] = None
    edges: tuple[str, ...] = ()  # edge keys for partition


@dataclass
class Scenario:
    topology: Topology
    ticks: int
    workload: list[ClientOp]
    faults: list[Fault] = field(default_factory=list)
    seed: int = 0


@dataclass
class SimMetrics:
    availability: float = 1.0
    staleness: int = 0
    messages: dict[str, int] = field(default_factory=dict)
    latency_p50: float = 0.0
    latency_p95: float = 0.0
    latency_by_class: dict[str, float] = field(default_factory=dict)
    consistency_violations: int = 0
    served: int = 0
    failed: int = 0


def build_topology(preset: str, n: int = 3, peers: int = 0,
                   clients: int = 4, authority: str = "centralized",
                   replication: str = "incremental", bulk_period: int = 10) -> Topology:
    nodes: dict[str, Node] = {}
    edges: list[Edge] = []

    def add(node: Node) -> None:
        nodes[node.id] = node

    if preset == "single":
        add(Node("S", "server"))
        prev_island = None
        for i in range(1, clients + 1):
            island = i > clients // 2
            add(Node(f"c{i}", "client", region="island" if island else "core"))
            edges.append(Edge(f"c{i}", "S", 20))
            if island:
                # Island clients can still talk to each other when cut off.
                if prev_island is not None:
                    edges.append(Edge(prev_island, f"c{i}", 5))
                prev_island = f"c{i}"
        primary = "S"
    elif preset == "single+backup":
        add(Node("S", "server"))
        add(Node("B", "backup"))
        edges.append(Edge("S", "B", 5))
        for i in range(1, clients + 1):
            add(Node(f"c{i}", "client"))
            edges.append(Edge(f"c{i}", "S", 20))
            edges.append(Edge(f"c{i}", "B", 25))
        primary = "S"
    elif preset in ("traveur-before", "traveur-after"):
        add(Node("streetside", "server"))
        add(Node("creator", "server"))
        for i in range(1, clients + 1):
            add(Node(f"c{i}", "client"))
            edges.append(Edge(f"c{i}", "streetside", 30))
            if preset == "traveur-before":
                edges.append(Edge(f"c{i}", "creator", 60))
        # The two services were never colocated; the inter-server link is slow.
        edges.append(Edge("streetside", "creator", 80))
        primary = "streetside"
    elif preset == "cluster":
        for i in range(1, n + 1):
            add(Node(f"m{i}", "cluster-member"))
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                edges.append(Edge(f"m{i}", f"m{j}", 2))
        for i in range(1, clients + 1):
            add(Node(f"c{i}", "client"))
            edges.append(Edge(f"c{i}", f"m{(i % n) + 1}", 20))
        primary = "m1"
    elif preset == "hybrid":
        for i in range(1, n + 1):
            add(Node(f"m{i}", "cluster-member"))
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                edges.append(Edge(f"m{i}", f"m{j}", 2))
        for i in range(1, peers + 1):
            role = "superpeer" if i == 1 else "peer"
            add(Node(f"p{i}", role, region="mesh"))
            edges.append(Edge(f"p{i}", "m1", 25))
            if i > 1:
                edges.append(Edge(f"p{i}", f"p{i - 1}", 5))
        primary = "m1"
    else:
        raise InvalidScenarioError(f"unknown preset: {preset}")

    topo = Topology(nodes=nodes, edges=edges, authority=authority,
                    replication=replication, bulk_period=bulk_period,
                    primary=primary, preset=preset)
    if authority == "delegated":
        # Each region gets a local authority; the primary covers untagged nodes.
        for node in nodes.values():
            if node.region and node.region not in topo.region_authority:
                candidates = [x for x in nodes.values() if x.region == node.region]
                topo.region_authority[node.region] = sorted(c.id for c in candidates)[0]
    return topo


class _Store:
    """Key-value replica with per-key (tick, node) versions."""

    def __init__(self) -> None:
        self.data: dict[str, tuple[int, tuple[int, str]]] = {}  # key -> (value, version)
        self.last_write_tick = 0

    def write(self, key: str, value: int, version: tuple[int, str]) -> None:
        self.data[key] = (value, version)
        self.last_write_tick = max(self.last_write_tick, version[0])

    def merge_lww(self, other: "_Store") -> None:
        for key, (value, version) in other.data.items():
            if key not in self.data or version > self.data[key][1]:
                self.write(key, value, version)

    def copy_from(self, other: "_Store") -> None:
        self.data = dict(other.data)
        self.last_write_tick = other.last_write_tick


class Simulation:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.topo = scenario.topology
        self.trace: list[dict] = []
        self.metrics = SimMetrics()
        self.stores: dict[str, _Store] = {n: _Store() for n in self.topo.nodes}
        self.primary = self.topo.primary
        self.primary_versions: set[tuple[int, str]] = set()
        self._latencies: list[float] = []
        self._latencies_by_class: dict[str, list[float]] = {}
        self._primary_down_since: Optional[int] = None
        self._max_lag = 0

    # -- graph helpers -----------------------------------------------------

    def _neighbors(self, node: str) -> list[tuple[str, int]]:
        out = []
        for edge in self.topo.edges:
            if not edge.up:
                continue
            if edge.a == node and self.topo.nodes[edge.b].up:
                out.append((edge.b, edge.latency_ms))
            elif edge.b == node and self.topo.nodes[edge.a].up:
                out.append((edge.a, edge.latency_ms))
        return out

    def path_latency(self, src: str, dst: str) -> Optional[int]:
        """Dijkstra over up nodes/edges; None when unreachable."""
        if not self.topo.nodes[src].up or not self.topo.nodes[dst].up:
            return None
        best = {src: 0}
        frontier = [(0, src)]
        while frontier:
            frontier.sort()
            dist, node = frontier.pop(0)
            if node == dst:
                return dist
            if dist > best.get(node, 1 << 30):
                continue
            for nxt, lat in self._neighbors(node):
                nd = dist + lat
                if nd < best.get(nxt, 1 << 30):
                    best[nxt] = nd
                    frontier.append((nd, nxt))
        return None

    def reachable(self, src: str, dst: str) -> bool:
        return self.path_latency(src, dst) is not None

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimMetrics:
        ops_by_tick: dict[int, list[ClientOp]] = {}
        for op in self.scenario.workload:
            ops_by_tick.setdefault(op.tick, []).append(op)
        faults_by_tick: dict[int, list[Fault]] = {}
        for fault in self.scenario.faults:
            faults_by_tick.setdefault(fault.tick, []).append(fault)

        for tick in range(self.scenario.ticks + 1):
            for fault in faults_by_tick.get(tick, []):
                self._apply_fault(tick, fault)
            self._maybe_failover(tick)
            for op in sorted(ops_by_tick.get(tick, []), key=lambda o: (o.client, o.key, o.kind)):
                self._run_op(tick, op)
            self._replicate(tick)
            self._record_lag(tick)

        total = self.metrics.served + self.metrics.failed
        self.metrics.availability = self.metrics.served / total if total else 1.0
        self.metrics.staleness = self._max_lag
        if self._latencies:
            self.metrics.latency_p50 = _percentile(self._latencies, 50)
            self.metrics.latency_p95 = _percentile(self._latencies, 95)
        for cls, values in sorted(self._latencies_by_class.items()):
            self.metrics.latency_by_class[cls] = _percentile(values, 95)
        return self.metrics

    # -- faults ------------------------------------------------------------

    def _apply_fault(self, tick: int, fault: Fault) -> None:
        if fault.kind == "crash":
            self.topo.nodes[fault.node].up = False
            if fault.node == self.primary and self._primary_down_since is None:
                self._primary_down_since = tick
        elif fault.kind == "recover":
            # State survives the crash: every committed write was journaled.
            self.topo.nodes[fault.node].up = True
            if fault.node == self.topo.primary:
                self._primary_down_since = None
        elif fault.kind == "partition":
            for edge in self.topo.edges:
                if edge.key() in fault.edges:
                    edge.up = False
        elif fault.kind == "heal":
            for edge in self.topo.edges:
                edge.up = True
            self._heal_merge(tick)
        else:
            raise InvalidScenarioError(f"unknown fault kind: {fault.kind}")
        self.trace.append({"t": tick, "type": "fault", "kind": fault.kind,
                           "node": fault.node, "edges": list(fault.edges)})

    def _maybe_failover(self, tick: int) -> None:
        if self.topo.preset != "single+backup" or self.primary != "S":
            return
        if self._primary_down_since is None:
            return
        if tick - self._primary_down_since >= FAILOVER_DELAY_TICKS and self.topo.nodes["B"].up:
            # Promote the backup: its last replicated state becomes primary.
            self.primary = "B"
            self.primary_versions |= {v for _, v in self.stores["B"].data.values()}
            self.trace.append({"t": tick, "type": "failover", "new_primary": "B"})

    def _heal_merge(self, tick: int) -> None:
        if self.topo.authority != "delegated":
            return
        primary_store = self.stores[self.primary]
        for region, authority in sorted(self.topo.region_authority.items()):
            if authority == self.primary:
                continue
            primary_store.merge_lww(self.stores[authority])
        self.primary_versions |= {v for _, v in primary_store.data.values()}
        # Converge every replica back onto the primary copy.
        for node_id, node in sorted(self.topo.nodes.items()):
            if node_id != self.primary:
                self.stores[node_id].copy_from(primary_store)
        self.trace.append({"t": tick, "type": "heal-merge", "primary": self.primary})

    # -- operations --------------------------------------------------------

    def _authority_for(self, op: ClientOp) -> str:
        if self.topo.authority == "delegated":
            region = self.topo.nodes[op.client].region
            if region and region in self.topo.region_authority:
                local = self.topo.region_authority[region]
                # Local authority applies when the global primary is unreachable.
                if not self.reachable(op.client, self.primary):
                    return local
        return self.primary

    def _run_op(self, tick: int, op: ClientOp) -> None:
        record = {"t": tick, "type": "op", "client": op.client, "kind": op.kind,
                  "key": op.key, "class": op.op_class,
                  "traffic": classify_traffic(op.kind)}
        ok, latency, detail = self._serve(tick, op)
        record["ok"] = ok
        record.update(detail)
        if ok:
            self.metrics.served += 1
            if latency is not None:
                record["latency"] = latency
                self._latencies.append(latency)
                self._latencies_by_class.setdefault(record["traffic"], []).append(latency)
        else:
            self.metrics.failed += 1
        self.trace.append(record)

    def _serve(self, tick: int, op: ClientOp) -> tuple[bool, Optional[float], dict]:
        preset = self.topo.preset
        if preset == "traveur-before":
            # Every client op needs a live session with both services.
            lat_a = self.path_latency(op.client, "streetside")
            lat_b = self.path_latency(op.client, "creator")
            if lat_a is None or lat_b is None:
                return False, None, {"reason": "server-unreachable"}
            target = "creator" if op.op_class == "skills" else "streetside"
            return self._apply_at(tick, op, target, 2 * self.path_latency(op.client, target))
        if preset == "traveur-after":
            lat_a = self.path_latency(op.client, "streetside")
            if lat_a is None:
                return False, None, {"reason": "server-unreachable"}
            if op.op_class == "skills":
                # Streetside proxies the client's dependency through to Creator.
                lat_b = self.path_latency("streetside", "creator")
                if lat_b is None:
                    return False, None, {"reason": "proxied-dependency-down"}
                return self._apply_at(tick, op, "creator", 2 * (lat_a + lat_b))
            return self._apply_at(tick, op, "streetside", 2 * lat_a)

        authority = self._authority_for(op)
        latency = self.path_latency(op.client, authority)
        if latency is None:
            if op.kind in ("write", "fix"):
                return False, None, {"reason": "authority-denied", "authority": authority}
            # Reads may fall back to any reachable replica.
            for node_id in sorted(self.topo.nodes):
                if self.topo.nodes[node_id].role == "client" or node_id == op.client:
                    continue
                lat = self.path_latency(op.client, node_id)
                if lat is not None:
                    return self._read_from(op, node_id, 2 * lat)
            return False, None, {"reason": "unreachable"}
        return self._apply_at(tick, op, authority, 2 * latency)

    def _apply_at(self, tick: int, op: ClientOp, node: str, latency: float) -> tuple[bool, Optional[float], dict]:
        self._count_messages(op.client, node, 2)
        if op.kind in ("write", "fix"):
            version = (tick, node)
            self.stores[node].write(op.key, op.value if op.value is not None else tick, version)
            if node == self.primary:
                self.primary_versions.add(version)
            return True, latency, {"node": node, "version": list(version)}
        return self._read_from(op, node, latency)

    def _read_from(self, op: ClientOp, node: str, latency: float) -> tuple[bool, Optional[float], dict]:
        entry = self.stores[node].data.get(op.key)
        detail: dict = {"node": node}
        if entry is not None:
            value, version = entry
            detail["value"] = value
            detail["version"] = list(version)
            if version not in self.primary_versions:
                self.metrics.consistency_violations += 1
                detail["violation"] = True
        return True, latency, detail

    def _count_messages(self, a: str, b: str, n: int) -> None:
        key = f"{a}-{b}"
        self.metrics.messages[key] = self.metrics.messages.get(key, 0) + n

    # -- replication -------------------------------------------------------

    def _replica_nodes(self) -> list[str]:
        return sorted(
            n for n, node in self.topo.nodes.items()
            if node.role in ("backup", "cluster-member") and n != self.primary
        )

    def _replicate(self, tick: int) -> None:
        if self.topo.replication == "none":
            return
        if self.topo.replication == "bulk" and (tick == 0 or tick % self.topo.bulk_period != 0):
            return
        primary_store = self.stores[self.primary]
        for replica in self._replica_nodes():
            if not self.reachable(self.primary, replica):
                continue
            self.stores[replica].copy_from(primary_store)
            self._count_messages(self.primary, replica, 1)
            self.trace.append({"t": tick, "type": "sync", "node": replica,
                               "upto_tick": primary_store.last_write_tick,
                               "traffic": "elastic"})

    def _record_lag(self, tick: int) -> None:
        primary_store = self.stores[self.primary]
        for replica in self._replica_nodes():
            lag = primary_store.last_write_tick - self.stores[replica].last_write_tick
            if lag > self._max_lag:
                self._max_lag = lag


def run(scenario: Scenario) -> tuple[SimMetrics, list[dict]]:
    """Run a scenario; rerun with the same scenario is byte-identical."""
    sim = Simulation(scenario)
    metrics = sim.run()
    return metrics, sim.trace


def trace_digest(trace: list[dict]) -> str:
    blob = "\n".join(json.dumps(r, sort_keys=True) for r in trace)
    return hashlib.sha256(blob.encode()).hexdigest()


def trace_jsonl(trace: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in trace)


def _percentile(values: list[float], pct: float) -> float:
    ordered = sorted(values)
    if not ordered:
        return 0.0
    idx = max(0, min(len(ordered) - 1, round(pct / 100.0 * (len(ordered) - 1))))
    return float(ordered[int(idx)])
