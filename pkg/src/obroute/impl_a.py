"""Flow-table routing scheme: per-cluster integral flows walked link by link.

For a cluster S with children S_1..S_r (index 0 denotes S itself), one
single-commodity flow per target index i moves mass from the cluster
distribution of S to the border distribution of S_i. The augmented network on
the induced subgraph G[S] has

  super-source -> v   capacity cluster_weight(v) * border_total(S_i)
  v -> super-sink     capacity border_weight_{S_i}(v) * cluster_total(S)
  graph edges         capacity cap(e) * cluster_total(S) * C  (both directions)

Source and sink capacities balance by construction, and with C at least the
certified cluster congestion the integral max flow saturates the terminals.
Flows are cycle-cancelled before storage so the forwarding walk terminates.

Routing forwards a message along random outgoing links with probability
proportional to stored flow until the super-sink is chosen (the walk owner is
the endpoint); the reverse walk follows incoming links to the super-source.
Started from the matching terminal law, the endpoint law of either walk equals
the opposite terminal's proportions exactly.

Per-vertex table layout (bit-exact, used by the accounting and the blob
serializer): for every (cluster, target index) pair with stored amounts at v,
  [cluster id: ceil(log2 #clusters)] [index: ceil(log2 (degT+1)), >=1]
  [entry count: ceil(log2 (2 deg(v)+3))]
  then per entry [slot: ceil(log2 (2 deg(v)+2))] [amount: B bits]
where slots enumerate in/out per incident edge plus source and sink, and B is
the bit length of the largest capacity in that flow's augmented network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from obroute.decomposition import DecompositionTree
from obroute.flows import SNK, SRC, FlowAssignment, cancel_cycles, max_flow_integral, sample_path
from obroute.graph import CapacitatedGraph

__all__ = ["FlowTables", "build_flow_tables", "route_to_border", "route_from_border",
           "endpoint_distribution", "assign_labels", "label_bit_length",
           "header_bit_length", "measure_table_bits_a", "serialize_vertex_table"]

_MAX_DOUBLINGS = 12


@dataclass
class FlowTables:
    graph: CapacitatedGraph
    tree: DecompositionTree
    base_c: int
    flows: dict[tuple[int, int], FlowAssignment]   # (cluster id, target index)
    cluster_c: dict[int, int]                      # effective C after any doubling
    events: list[str] = field(default_factory=list)

    def flow(self, cluster_id: int, index: int) -> FlowAssignment:
        return self.flows[(cluster_id, index)]


def _cluster_flows(g: CapacitatedGraph, cluster, out_maps: list[dict[int, int]],
                   c: int) -> tuple[dict[int, FlowAssignment], int, list[str]]:
    """All target flows of one cluster, doubling C on certificate violations."""
    total_w = cluster.total_weight
    members = set(cluster.vertices)
    edge_list = [g.edges[idx] for idx in g.edges_inside(members)]
    events: list[str] = []
    flows: dict[int, FlowAssignment] = {}
    c_eff = c
    for index, out_map in enumerate(out_maps):
        out_total = sum(out_map.values())
        if out_total == 0:
            continue
        target = total_w * out_total
        while True:
            arcs: list[tuple[int, int, int]] = []
            for u, v, cap in edge_list:
                scaled = cap * total_w * c_eff
                arcs.append((u, v, scaled))
                arcs.append((v, u, scaled))
            for v in cluster.vertices:
                w = cluster.cluster_weight[v]
                if w:
                    arcs.append((SRC, v, w * out_total))
                out_v = out_map.get(v, 0)
                if out_v:
                    arcs.append((v, SNK, out_v * total_w))
            fa = max_flow_integral(arcs, SRC, SNK)
            if fa.value == target:
                break
            if c_eff >= c * 2 ** _MAX_DOUBLINGS:
                raise RuntimeError(
                    f"cluster {cluster.id} target {index}: flow value {fa.value} "
                    f"< {target} even at scale {c_eff}")
            c_eff *= 2
            events.append(
                f"cluster {cluster.id} target {index}: certificate violation at "
                f"scale {c_eff // 2}, retrying with {c_eff}")
        flows[index] = cancel_cycles(fa)
    return flows, c_eff, events


def build_flow_tables(g: CapacitatedGraph, tree: DecompositionTree, c: int) -> FlowTables:
    """One integral flow per (cluster, target index); singletons store nothing."""
    if c < 1 or int(c) != c:
        raise ValueError(f"scale constant must be a positive integer, got {c}")
    tables = FlowTables(graph=g, tree=tree, base_c=int(c), flows={}, cluster_c={})
    for cluster in tree.clusters:
        if cluster.size == 1:
            continue
        out_maps = [cluster.border_weight]
        out_maps += [tree.cluster(cid).border_weight for cid in cluster.children]
        flows, c_eff, events = _cluster_flows(g, cluster, out_maps, int(c))
        for index, fa in flows.items():
            tables.flows[(cluster.id, index)] = fa
        tables.cluster_c[cluster.id] = c_eff
        tables.events.extend(events)
    return tables


def route_to_border(tables: FlowTables, cluster_id: int, index: int, v: int,
                    rng: np.random.Generator) -> tuple[list[int], int]:
    """Walk random outgoing links of the (cluster, index) flow until absorbed.

    Started from the cluster distribution, the endpoint law equals the border
    distribution of the target exactly.
    """
    fa = tables.flows[(cluster_id, index)]
    if fa.arcs.get((SRC, v), 0) <= 0:
        raise ValueError(
            f"vertex {v} carries no source flow in cluster {cluster_id} "
            f"target {index}; walk cannot start")
    path = sample_path(fa, v, "forward", rng)
    return path, path[-1]


def route_from_border(tables: FlowTables, cluster_id: int, index: int, v: int,
                      rng: np.random.Generator) -> tuple[list[int], int]:
    """Mirror walk along incoming links back to the super-source."""
    fa = tables.flows[(cluster_id, index)]
    if fa.arcs.get((v, SNK), 0) <= 0:
        raise ValueError(
            f"vertex {v} carries no sink flow in cluster {cluster_id} "
            f"target {index}; walk cannot start")
    path = sample_path(fa, v, "backward", rng)
    return path, path[-1]


def endpoint_distribution(tables: FlowTables, cluster_id: int, index: int,
                          start: int, direction: str = "forward") -> dict[int, float]:
    """Exact absorption law of the forwarding walk from a single start vertex.

    Propagates unit mass through the acyclic flow in topological order; no
    sampling involved.
    """
    fa = tables.flows[(cluster_id, index)]
    if not fa.is_acyclic():
        raise ValueError("absorption law requires an acyclic flow")
    if direction == "forward":
        links, terminal = fa.outgoing, SNK
    elif direction == "backward":
        links, terminal = fa.incoming, SRC
    else:
        raise ValueError(f"direction must be forward or backward, got {direction!r}")

    order = _topological(fa, direction)
    position = {v: k for k, v in enumerate(order)}
    if start not in position:
        raise ValueError(f"vertex {start} carries no {direction} flow")
    mass = {start: 1.0}
    absorbed: dict[int, float] = {}
    for v in order[position[start]:]:
        mv = mass.pop(v, 0.0)
        if mv == 0.0:
            continue
        options = links(v)
        total = sum(f for _, f in options)
        for u, f in options:
            share = mv * f / total
            if u == terminal:
                absorbed[v] = absorbed.get(v, 0.0) + share
            else:
                mass[u] = mass.get(u, 0.0) + share
    return absorbed


def _topological(fa: FlowAssignment, direction: str) -> list[int]:
    arcs = [(a, b) for (a, b), f in fa.arcs.items()
            if f > 0 and a not in (SRC, SNK) and b not in (SRC, SNK)]
    if direction == "backward":
        arcs = [(b, a) for a, b in arcs]
    verts = {v for v in fa.vertices() if v not in (SRC, SNK)}
    indeg = {v: 0 for v in verts}
    succ: dict[int, list[int]] = {v: [] for v in verts}
    for a, b in arcs:
        indeg[b] += 1
        succ[a].append(b)
    queue = sorted(v for v, d in indeg.items() if d == 0)
    order: list[int] = []
    while queue:
        v = queue.pop()
        order.append(v)
        for u in succ[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                queue.append(u)
    assert len(order) == len(verts), "flow has a residual cycle"
    return order


# ---------------------------------------------------------------------------
# labels and headers
# ---------------------------------------------------------------------------

def assign_labels(tree: DecompositionTree) -> dict[int, tuple[int, ...]]:
    """Leaf labels: the child-index sequence along the root-to-leaf path."""
    labels: dict[int, tuple[int, ...]] = {}
    for v in sorted(tree.leaf_of):
        path = tree.leaf_path(v)
        labels[v] = tuple(tree.child_index(p, c) for p, c in zip(path, path[1:]))
    assert len(set(labels.values())) == len(labels), "labels must be unique"
    return labels


def _index_bits(tree: DecompositionTree) -> int:
    return max(1, math.ceil(math.log2(max(2, tree.degree))))


def label_bit_length(tree: DecompositionTree) -> int:
    return tree.height * _index_bits(tree)


def header_bit_length(tree: DecompositionTree) -> int:
    """Source label + target label + marker (level, phase bit, child position)."""
    marker = math.ceil(math.log2(tree.height + 2)) + 1 + _index_bits(tree)
    return 2 * label_bit_length(tree) + marker


# ---------------------------------------------------------------------------
# bit-exact table accounting
# ---------------------------------------------------------------------------

def _amount_width(tables: FlowTables, cluster_id: int, index: int) -> int:
    """Bit length of the largest augmented-network capacity for this flow."""
    cluster = tables.tree.cluster(cluster_id)
    total_w = cluster.total_weight
    members = set(cluster.vertices)
    cap_max = max((tables.graph.edges[i][2] for i in tables.graph.edges_inside(members)),
                  default=0)
    if index == 0:
        out_map = cluster.border_weight
    else:
        out_map = tables.tree.cluster(cluster.children[index - 1]).border_weight
    out_total = sum(out_map.values())
    biggest = max(cap_max * total_w * tables.cluster_c[cluster_id],
                  max((cluster.cluster_weight[v] for v in cluster.vertices), default=0) * out_total,
                  max(out_map.values(), default=0) * total_w)
    return max(1, biggest.bit_length())


def _vertex_entries(tables: FlowTables, cluster_id: int, index: int,
                    v: int) -> list[tuple[int, int]]:
    """(slot, amount) pairs stored at v: in/out per incident edge, then source, sink."""
    fa = tables.flows[(cluster_id, index)]
    g = tables.graph
    entries: list[tuple[int, int]] = []
    for slot, (u, _) in enumerate(g.adj[v]):
        fin = fa.arcs.get((u, v), 0)
        fout = fa.arcs.get((v, u), 0)
        if fin:
            entries.append((2 * slot, int(fin)))
        if fout:
            entries.append((2 * slot + 1, int(fout)))
    deg = g.degree(v)
    fsrc = fa.arcs.get((SRC, v), 0)
    fsnk = fa.arcs.get((v, SNK), 0)
    if fsrc:
        entries.append((2 * deg, int(fsrc)))
    if fsnk:
        entries.append((2 * deg + 1, int(fsnk)))
    return entries


@dataclass
class TableBits:
    per_vertex: dict[int, int]
    max_bits: int
    total_bits: int


def measure_table_bits_a(tables: FlowTables) -> TableBits:
    """Count the documented layout bit for bit; empty tables count zero."""
    tree = tables.tree
    g = tables.graph
    id_bits = max(1, math.ceil(math.log2(max(2, len(tree.clusters)))))
    index_bits = max(1, math.ceil(math.log2(max(2, tree.degree + 1))))
    per_vertex: dict[int, int] = {v: 0 for v in range(g.n)}
    for (cid, index), _ in tables.flows.items():
        width = _amount_width(tables, cid, index)
        for v in tree.cluster(cid).vertices:
            entries = _vertex_entries(tables, cid, index, v)
            if not entries:
                continue
            deg = g.degree(v)
            count_bits = max(1, math.ceil(math.log2(2 * deg + 3)))
            slot_bits = max(1, math.ceil(math.log2(max(2, 2 * deg + 2))))
            per_vertex[v] += (id_bits + index_bits + count_bits
                              + len(entries) * (slot_bits + width))
    total = sum(per_vertex.values())
    return TableBits(per_vertex=per_vertex,
                     max_bits=max(per_vertex.values(), default=0),
                     total_bits=total)


def serialize_vertex_table(tables: FlowTables, v: int) -> bytes:
    """Pack v's tables into the documented layout, padded to whole bytes."""
    bits: list[tuple[int, int]] = []   # (value, width)
    tree = tables.tree
    g = tables.graph
    id_bits = max(1, math.ceil(math.log2(max(2, len(tree.clusters)))))
    index_bits = max(1, math.ceil(math.log2(max(2, tree.degree + 1))))
    for (cid, index) in sorted(tables.flows):
        if v not in tree.cluster(cid).cluster_weight:
            continue
        entries = _vertex_entries(tables, cid, index, v)
        if not entries:
            continue
        deg = g.degree(v)
        count_bits = max(1, math.ceil(math.log2(2 * deg + 3)))
        slot_bits = max(1, math.ceil(math.log2(max(2, 2 * deg + 2))))
        width = _amount_width(tables, cid, index)
        bits.append((cid, id_bits))
        bits.append((index, index_bits))
        bits.append((len(entries), count_bits))
        for slot, amount in entries:
            bits.append((slot, slot_bits))
            bits.append((amount, width))
    acc = 0
    nbits = 0
    for value, width in bits:
        assert 0 <= value < (1 << width), f"value {value} overflows {width} bits"
        acc = (acc << width) | value
        nbits += width
    pad = (-nbits) % 8
    acc <<= pad
    return (acc).to_bytes((nbits + pad) // 8, "big") if nbits else b""
