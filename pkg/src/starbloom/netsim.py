"""Deterministic single-process simulation of an unstructured P2P network:
replicated fragments, horizon-limited index dissemination, delegated plan
execution with bind joins, and message/byte accounting."""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field, asdict
from math import ceil
from pathlib import Path
from typing import Iterable, Optional

from .bloom import BloomParams, build_spbf
from .fragments import (DEFAULT_MIN_SUBJECTS, Fragment, fragment_by_cs,
                        merge_infrequent, merge_to_count)
from .index import SPBFIndex, SPBFSlice, combine
from .model import (Binding, KnowledgeGraph, Query, match_star,
                    project_bindings)
from .planner import (OptimizeResult, baseline_plan, compatibility_graph,
                      node_sort_key, optimize)
from .plans import (Cartesian, EmptyPlan, Join, Plan, Selection, Union_,
                    render_plan, right_selections)

MESSAGE_HEADER_BYTES = 64


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    node_count: int
    neighbor_count: int
    replication_factor: int
    horizon: int = 5
    rng_seed: int = 0
    bloom: BloomParams = field(default_factory=BloomParams)
    omega: int = 30       # max bindings attached to one request
    page_size: int = 100  # max results returned with one message

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if not 0 <= self.neighbor_count < self.node_count:
            raise ValueError("neighbor_count must be in [0, node_count)")
        if not 1 <= self.replication_factor <= self.node_count:
            raise ValueError("replication_factor must be in [1, node_count]")
        if self.omega < 1 or self.page_size < 1 or self.horizon < 0:
            raise ValueError("omega/page_size/horizon out of range")


@dataclass
class Metrics:
    requests: int = 0
    transferred_bytes: int = 0
    relevant_fragments: int = 0
    relevant_nodes: int = 0
    optimization_ns: int = 0
    execution_ns: int = 0

    def to_dict(self) -> dict:
        return dict(sorted(asdict(self).items()))


@dataclass
class NodeSim:
    id: str
    neighbors: tuple[str, ...]
    store: dict[str, Fragment] = field(default_factory=dict)
    index: SPBFIndex = field(default_factory=SPBFIndex)


class Network:
    def __init__(self, config: NetworkConfig, nodes: dict[str, NodeSim]):
        self.config = config
        self.nodes = nodes
        self.fragments: dict[str, Fragment] = {}
        self.allocation: dict[str, tuple[str, ...]] = {}

    def node_ids(self) -> list[str]:
        return sorted(self.nodes, key=node_sort_key)

    def node(self, node_id: str) -> NodeSim:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise SimulationError(f"unknown node {node_id}") from None

    def reachable(self, origin: str, horizon: Optional[int] = None) -> set[str]:
        """Nodes within ``horizon`` hops of ``origin`` along neighbor links."""
        if horizon is None:
            horizon = self.config.horizon
        seen = {origin}
        frontier = [origin]
        for _ in range(horizon):
            nxt: list[str] = []
            for nid in frontier:
                for nb in self.nodes[nid].neighbors:
                    if nb not in seen:
                        seen.add(nb)
                        nxt.append(nb)
            if not nxt:
                break
            frontier = nxt
        return seen

    def rebuild_indexes(self) -> None:
        """Each node combines the slices of fragments stored within its horizon."""
        spbfs = {fid: build_spbf(frag, self.config.bloom)
                 for fid, frag in sorted(self.fragments.items())}
        for node in self.nodes.values():
            view = self.reachable(node.id)
            slices = []
            for fid, holders in sorted(self.allocation.items()):
                visible = tuple(h for h in holders if h in view)
                if visible:
                    slices.append(SPBFSlice(fid, spbfs[fid], visible))
            node.index = combine(slices)


def create_network(config: NetworkConfig) -> Network:
    """Seeded construction: every node gets ``neighbor_count`` distinct random
    neighbors other than itself."""
    rng = random.Random(config.rng_seed)
    ids = [f"n{i}" for i in range(1, config.node_count + 1)]
    nodes = {}
    for nid in ids:
        pool = [x for x in ids if x != nid]
        neighbors = tuple(sorted(rng.sample(pool, config.neighbor_count), key=node_sort_key))
        nodes[nid] = NodeSim(id=nid, neighbors=neighbors)
    return Network(config, nodes)


def network_from_layout(config: NetworkConfig, topology: dict[str, Iterable[str]]) -> Network:
    """Explicit topology (for fixtures and loaded state files)."""
    nodes = {nid: NodeSim(id=nid, neighbors=tuple(sorted(nbrs, key=node_sort_key)))
             for nid, nbrs in topology.items()}
    if len(nodes) != config.node_count:
        raise ValueError("topology size does not match config.node_count")
    return Network(config, nodes)


@dataclass
class UploadReport:
    fragment_count: int
    allocation: dict[str, tuple[str, ...]]


def place_fragments(net: Network, fragments: Iterable[Fragment], origin: str,
                    allocation: Optional[dict[str, Iterable[str]]] = None) -> UploadReport:
    """Register fragments and replicate each at ``replication_factor`` nodes,
    chosen from the breadth-first expansion around the origin (seeded),
    unless an explicit allocation is given."""
    frags = sorted(fragments, key=Fragment.sort_key)
    factor = net.config.replication_factor
    if allocation is None:
        candidates = _bfs_order(net, origin)
        if len(candidates) < factor:
            raise SimulationError(
                f"cannot replicate {factor}x across {len(candidates)} reachable nodes")
        rng = random.Random((net.config.rng_seed, origin, len(frags)).__repr__())
        allocation = {f.id: tuple(sorted(rng.sample(candidates, factor), key=node_sort_key))
                      for f in frags}
    for f in frags:
        holders = tuple(sorted(allocation[f.id], key=node_sort_key))
        if len(holders) != factor:
            raise SimulationError(f"fragment {f.id} needs exactly {factor} holders")
        net.fragments[f.id] = f
        net.allocation[f.id] = holders
        for h in holders:
            net.node(h).store[f.id] = f
    net.rebuild_indexes()
    return UploadReport(len(frags), dict(net.allocation))


def _bfs_order(net: Network, origin: str) -> list[str]:
    seen = [origin]
    frontier = [origin]
    while frontier:
        nxt = []
        for nid in frontier:
            for nb in sorted(net.node(nid).neighbors, key=node_sort_key):
                if nb not in seen:
                    seen.append(nb)
                    nxt.append(nb)
        frontier = nxt
    return seen


def upload(net: Network, graph: KnowledgeGraph, origin: str,
           min_subjects: int = DEFAULT_MIN_SUBJECTS,
           target_count: Optional[int] = None,
           graph_id: str = "g") -> UploadReport:
    """Fragment a graph (characteristic sets, then infrequent-set merging) and
    place the fragments on the network."""
    frags = fragment_by_cs(graph, graph_id)
    if target_count is not None:
        frags, _ = merge_to_count(frags, target_count, graph_id)
    elif min_subjects > 1:
        frags, _ = merge_infrequent(frags, min_subjects, graph_id)
    return place_fragments(net, frags, origin)


# -- execution -----------------------------------------------------------------


def _payload_bytes(rows: list[Binding]) -> int:
    total = 0
    for row in rows:
        for var in sorted(row):
            total += len(f"?{var}\t{row[var].nt()}\n".encode("utf-8"))
    return total


class _Executor:
    """Runs a plan over the network, counting every inter-node message."""

    def __init__(self, net: Network, metrics: Metrics,
                 trace: Optional[list[str]] = None):
        self.net = net
        self.metrics = metrics
        self.trace = trace
        self.page_size = net.config.page_size
        self.omega = net.config.omega

    def _message(self, kind: str, src: str, dst: str, payload_bytes: int,
                 rows: int = 0) -> None:
        self.metrics.requests += 1
        self.metrics.transferred_bytes += MESSAGE_HEADER_BYTES + payload_bytes
        if self.trace is not None:
            self.trace.append(
                f"{kind} {src}->{dst} bytes={MESSAGE_HEADER_BYTES + payload_bytes} rows={rows}")

    def _ship_results(self, rows: list[Binding], src: str, dst: str) -> None:
        """Result pages from a remote producer; an empty result still answers."""
        pages = max(1, ceil(len(rows) / self.page_size))
        for page in range(pages):
            chunk = rows[page * self.page_size:(page + 1) * self.page_size]
            self._message("page", src, dst, _payload_bytes(chunk), len(chunk))

    def _delegate_request(self, plan: Plan, src: str, dst: str) -> None:
        self._message("request", src, dst, len(render_plan(plan).encode("utf-8")))

    def _local_star(self, sel: Selection, node_id: str) -> KnowledgeGraph:
        frag = self.net.node(node_id).store.get(sel.fragment)
        if frag is None:
            raise SimulationError(f"node {node_id} does not hold fragment {sel.fragment}")
        return frag.graph()

    def run(self, plan: Plan, consumer: str) -> list[Binding]:
        if isinstance(plan, EmptyPlan):
            return []
        if isinstance(plan, Selection):
            rows = match_star(plan.star, self._local_star(plan, plan.node))
            rows = [dict(sorted(r.items())) for r in rows]
            if plan.node != consumer:
                self._delegate_request(plan, consumer, plan.node)
                self._ship_results(rows, plan.node, consumer)
            return rows
        if isinstance(plan, Union_):
            out: list[Binding] = []
            for b in plan.branches:  # fixed schedule: branch order
                out.extend(self.run(b, consumer))
            return out
        if isinstance(plan, Join):
            rows = self._run_join(plan)
        elif isinstance(plan, Cartesian):
            rows = self._run_cartesian(plan)
        else:
            raise SimulationError(f"cannot execute {type(plan).__name__}")
        if plan.node != consumer:
            self._delegate_request(plan, consumer, plan.node)
            self._ship_results(rows, plan.node, consumer)
        return rows

    def _run_join(self, plan: Join) -> list[Binding]:
        delegate = plan.node
        left_rows = self.run(plan.left, delegate)
        out: list[Binding] = []
        for sel in right_selections(plan.right):
            if not left_rows:
                break
            if sel.node == delegate:
                graph = self._local_star(sel, delegate)
                for row in left_rows:
                    out.extend(match_star(sel.star, graph, seed=row))
            else:
                out.extend(self._bind_join(left_rows, sel, delegate))
        return out

    def _bind_join(self, left_rows: list[Binding], sel: Selection,
                   delegate: str) -> list[Binding]:
        """Ship bindings in batches of <= omega to the selection's holder; the
        joined results come back paged."""
        graph = self._local_star(sel, sel.node)
        results: list[Binding] = []
        batches = ceil(len(left_rows) / self.omega)
        for i in range(batches):
            batch = left_rows[i * self.omega:(i + 1) * self.omega]
            self._message("bindings", delegate, sel.node, _payload_bytes(batch), len(batch))
            for row in batch:
                results.extend(match_star(sel.star, graph, seed=row))
        self._ship_results(results, sel.node, delegate)
        return results

    def _run_cartesian(self, plan: Cartesian) -> list[Binding]:
        delegate = plan.node
        left_rows = self.run(plan.left, delegate)
        right_rows = self.run(plan.right, delegate)
        out = []
        for lrow in left_rows:
            for rrow in right_rows:
                merged = dict(lrow)
                merged.update(rrow)
                out.append(merged)
        return out


def execute_plan(net: Network, plan: Plan, origin: str,
                 query: Optional[Query] = None,
                 trace: Optional[list[str]] = None) -> tuple[list[Binding], Metrics]:
    """Execute a delegated plan; returns result rows (projected per query, when
    given) and the message/byte metrics. Pass a list as ``trace`` to collect
    one line per inter-node message."""
    metrics = Metrics()
    start = time.perf_counter_ns()
    rows = _Executor(net, metrics, trace).run(plan, origin)
    if query is not None:
        rows = project_bindings(rows, distinct=query.distinct, projection=query.projection)
    metrics.execution_ns = time.perf_counter_ns() - start
    return rows, metrics


def measure_relevance(net: Network, query: Query, origin: str) -> tuple[int, int]:
    """(relevant fragments, relevant nodes) after compatibility pruning at the origin."""
    index = net.node(origin).index
    compat = compatibility_graph(query, index, query.distinct)
    fragments = compat.fragments()
    holders: set[str] = set()
    for fid in fragments:
        holders.update(index.holders(fid))
    return len(fragments), len(holders)


def run_query(net: Network, query: Query, origin: str) -> tuple[list[Binding], Metrics, OptimizeResult]:
    """Optimize at the origin's index, execute, and fill in all metrics."""
    start = time.perf_counter_ns()
    result = optimize(query, net.node(origin).index, origin)
    opt_ns = time.perf_counter_ns() - start
    rows, metrics = execute_plan(net, result.plan, origin, query)
    metrics.optimization_ns = opt_ns
    nrf, nrn = measure_relevance(net, query, origin)
    metrics.relevant_fragments = nrf
    metrics.relevant_nodes = nrn
    return rows, metrics, result


def run_baseline(net: Network, query: Query, origin: str) -> tuple[list[Binding], Metrics]:
    """Execute the no-pruning reference plan (used to quantify pruning value)."""
    plan, _ = baseline_plan(query, net.node(origin).index, origin)
    return execute_plan(net, plan, origin, query)


# -- state files ---------------------------------------------------------------


def dump_network(net: Network, path: Path, fragments_dir: Optional[Path] = None) -> None:
    cfg = net.config
    state = {
        "config": {
            "node_count": cfg.node_count,
            "neighbor_count": cfg.neighbor_count,
            "replication_factor": cfg.replication_factor,
            "horizon": cfg.horizon,
            "rng_seed": cfg.rng_seed,
            "bloom": {"m": cfg.bloom.m, "k": cfg.bloom.k, "seed": cfg.bloom.seed},
            "omega": cfg.omega,
            "page_size": cfg.page_size,
        },
        "topology": {nid: list(net.nodes[nid].neighbors) for nid in net.node_ids()},
        "allocation": {fid: list(holders) for fid, holders in sorted(net.allocation.items())},
        "fragments_dir": str(fragments_dir) if fragments_dir else None,
    }
    Path(path).write_text(json.dumps(state, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_network(path: Path, fragments: Optional[Iterable[Fragment]] = None) -> Network:
    state = json.loads(Path(path).read_text(encoding="utf-8"))
    c = state["config"]
    config = NetworkConfig(
        node_count=c["node_count"],
        neighbor_count=c["neighbor_count"],
        replication_factor=c["replication_factor"],
        horizon=c["horizon"],
        rng_seed=c["rng_seed"],
        bloom=BloomParams(**c["bloom"]),
        omega=c["omega"],
        page_size=c["page_size"],
    )
    net = network_from_layout(config, state["topology"])
    if fragments is None and state.get("fragments_dir"):
        from .fragments import load_fragments
        fragments = load_fragments(Path(state["fragments_dir"]))
    if fragments is not None:
        allocation = {fid: tuple(h) for fid, h in state["allocation"].items()}
        frags = list(fragments)
        missing = set(allocation) - {f.id for f in frags}
        if missing:
            raise SimulationError(f"state references unknown fragments: {sorted(missing)}")
        place_fragments(net, [f for f in frags if f.id in allocation],
                        origin=net.node_ids()[0], allocation=allocation)
    return net
