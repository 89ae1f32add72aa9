"""Hypercube routing scheme for unit-capacity graphs.

Every non-singleton cluster S carries two hypercubes embedded into G[S]:

  main cube     dimension d = ceil(log2 of the summed rounded border totals).
                Node ranges stand for the cluster's own border (index 0) and
                each child border, children laid out in ascending rounded
                order. Hopping to a uniform node of a range realizes (up to a
                factor-2 skew) the matching border distribution.
  shuffle cube  dimension ceil(log2 w_S(S)). The first w_S(S) nodes give each
                vertex exactly its cluster weight, so routing to a uniform
                node among them restores the exact cluster distribution after
                every hop, stopping the skew from compounding level by level.

Cube edges are realized as graph paths: every cube edge whose endpoints map to
distinct vertices contributes a unit demand in both directions, fake traffic
tops every vertex up to send/receive exactly 8d*w_S(v), the min-congestion LP
routes the instance inside G[S], and each cube edge keeps one path sampled
from its fractional flow (fake commodities are dropped). Cube routing picks a
uniform intermediate node, fixes differing coordinates in ascending order to
reach it, and repeats toward the target.

Per-vertex table layout (bit-exact accounting):

  sizes block, one per containing non-singleton cluster S with r children:
      (r+1) exponent fields   ceil(log2(1+E)) bits each, E = max exponent
                              representable, (2*m*W).bit_length()
      r layout fields         ceil(log2 r) bits each, child position by
                              ascending rounded size
      1 weight field          (2*m*W).bit_length() bits, holds w_S(S)
  path groups, one per (cluster, cube) whose stored paths traverse v:
      header                  cluster id + 1 cube flag bit + entry count
      one entry per path      outgoing edge index (ceil(log2 deg(v)) bits)
                              + path id on that edge (ceil(log2 d*C) bits);
                              hop-by-hop continuation, so mid-path vertices
                              need no cube-edge key

The count field width is the build-wide constant ceil(log2(1+max entries in
any group)).
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from obroute.cmcf import RoundedPaths, round_paths, solve_cmcf_min_congestion
from obroute.decomposition import Cluster, DecompositionTree
from obroute.graph import CapacitatedGraph

__all__ = ["RoundedSizes", "CubeMaps", "CubeScheme", "round_and_order",
           "build_embedding", "build_rerand_cube", "build_cube_scheme",
           "hypercube_route", "route_to_border_b", "rerandomize",
           "audit_cube_scheme", "measure_table_bits_b"]


def _round_pow2(x: int) -> int:
    """Smallest power of two >= x; zero stays zero (4 -> 4, 5 -> 8)."""
    return 0 if x == 0 else 1 << (x - 1).bit_length()


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


@dataclass
class RoundedSizes:
    cluster_id: int
    own: int                      # rounded own-border total, layout index 0
    children: list[int]           # rounded child totals in layout order
    layout_to_child: list[int]    # layout position (1-based) -> tree child position
    total_weight: int

    @property
    def dimension(self) -> int:
        return _ceil_log2(self.own + sum(self.children))

    @property
    def child_to_layout(self) -> dict[int, int]:
        return {tree_pos: k + 1 for k, tree_pos in enumerate(self.layout_to_child)}

    def range_of(self, layout_index: int) -> tuple[int, int]:
        sizes = [self.own] + self.children
        start = sum(sizes[:layout_index])
        return start, start + sizes[layout_index]


def round_and_order(cluster: Cluster, child_border_totals: list[int]) -> RoundedSizes:
    """Round every border total up to a power of two and sort children ascending.

    Ties keep tree order, so the layout is deterministic.
    """
    own = _round_pow2(cluster.total_border)
    rounded = [(_round_pow2(total), pos + 1)
               for pos, total in enumerate(child_border_totals)]
    rounded.sort()
    return RoundedSizes(cluster_id=cluster.id, own=own,
                        children=[r for r, _ in rounded],
                        layout_to_child=[pos for _, pos in rounded],
                        total_weight=cluster.total_weight)


@dataclass
class CubeMaps:
    dimension: int
    node_owner: list[int]
    vertex_nodes: dict[int, list[int]]
    edge_paths: dict[tuple[int, int], list[int]]   # cube edge (x<y) -> graph path
    fractional_congestion: float
    rounding: RoundedPaths | None = field(default=None, repr=False)


@dataclass
class CubeScheme:
    graph: CapacitatedGraph
    tree: DecompositionTree
    c: int
    rounded: dict[int, RoundedSizes]
    mains: dict[int, CubeMaps]
    shuffles: dict[int, CubeMaps]


# ---------------------------------------------------------------------------
# node assignment
# ---------------------------------------------------------------------------

def _fill_range(out_map: dict[int, int], size: int) -> dict[int, int]:
    """Node counts per vertex: each v gets out(v) first, extras round-robin
    without exceeding 2*out(v)."""
    support = sorted(v for v, o in out_map.items() if o > 0)
    counts = {v: out_map[v] for v in support}
    extras = size - sum(counts.values())
    assert 0 <= extras <= sum(counts.values()), "rounded range size out of bounds"
    taken = {v: 0 for v in support}
    while extras > 0:
        progressed = False
        for v in support:
            if extras == 0:
                break
            if taken[v] < out_map[v]:
                taken[v] += 1
                counts[v] += 1
                extras -= 1
                progressed = True
        assert progressed, "range extras exceed the factor-2 headroom"
    return counts


def _spread_leftovers(weights: dict[int, int], amount: int) -> dict[int, int]:
    """Leftover nodes round-robin by descending remaining quota of 4*w(v)."""
    heap = [(-4 * w, v) for v, w in sorted(weights.items()) if w > 0]
    heapq.heapify(heap)
    given: dict[int, int] = {}
    for _ in range(amount):
        assert heap, "leftover nodes exceed the total 4*w quota"
        neg_quota, v = heapq.heappop(heap)
        given[v] = given.get(v, 0) + 1
        if neg_quota + 1 < 0:
            heapq.heappush(heap, (neg_quota + 1, v))
    return given


def _layout_owners(sizes: RoundedSizes, out_maps: list[dict[int, int]],
                   weights: dict[int, int]) -> list[int]:
    owners: list[int] = []
    for layout_index, size in enumerate([sizes.own] + sizes.children):
        if size == 0:
            continue
        counts = _fill_range(out_maps[layout_index], size)
        for v in sorted(counts):
            owners.extend([v] * counts[v])
    total_nodes = 1 << sizes.dimension
    leftover = total_nodes - len(owners)
    for v, k in sorted(_spread_leftovers(weights, leftover).items()):
        owners.extend([v] * k)
    assert len(owners) == total_nodes
    return owners


# ---------------------------------------------------------------------------
# embedding a cube as graph paths
# ---------------------------------------------------------------------------

def _cube_demands(node_owner: list[int], d: int) -> dict[tuple[int, int], float]:
    demands: dict[tuple[int, int], float] = {}
    for x in range(1 << d):
        for k in range(d):
            y = x ^ (1 << k)
            if y < x:
                continue
            a, b = node_owner[x], node_owner[y]
            if a == b:
                continue
            demands[(a, b)] = demands.get((a, b), 0.0) + 1.0
            demands[(b, a)] = demands.get((b, a), 0.0) + 1.0
    return demands


def _add_fake_traffic(demands: dict[tuple[int, int], float], d: int,
                      weights: dict[int, int]) -> None:
    """Top every vertex up to send (and receive) exactly 8*d*w(v).

    The base instance is symmetric, so symmetric fake pairs preserve the
    send/receive balance. Vertices are paired greedily largest deficit first;
    a lone odd remainder would be a zero-cost self commodity and is dropped.
    """
    sent: dict[int, float] = {}
    for (a, _), amount in demands.items():
        sent[a] = sent.get(a, 0.0) + amount
    heap = []
    for v, w in sorted(weights.items()):
        deficit = 8 * d * w - int(sent.get(v, 0))
        assert deficit >= 0, f"vertex {v} already sends more than its budget"
        if deficit > 0:
            heap.append((-deficit, v))
    heapq.heapify(heap)
    while len(heap) >= 2:
        d1, u = heapq.heappop(heap)
        d2, v = heapq.heappop(heap)
        amount = float(min(-d1, -d2))
        demands[(u, v)] = demands.get((u, v), 0.0) + amount
        demands[(v, u)] = demands.get((v, u), 0.0) + amount
        if -d1 - amount > 0:
            heapq.heappush(heap, (d1 + amount, u))
        if -d2 - amount > 0:
            heapq.heappush(heap, (d2 + amount, v))


def _embed_cube(g: CapacitatedGraph, members: set[int], node_owner: list[int],
                d: int, weights: dict[int, int], rng: np.random.Generator,
                solve_paths: bool) -> CubeMaps:
    vertex_nodes: dict[int, list[int]] = {}
    for node, v in enumerate(node_owner):
        vertex_nodes.setdefault(v, []).append(node)
    maps = CubeMaps(dimension=d, node_owner=list(node_owner),
                    vertex_nodes=vertex_nodes, edge_paths={},
                    fractional_congestion=0.0)
    if not solve_paths:
        return maps
    demands = _cube_demands(node_owner, d)
    if not demands:
        return maps
    _add_fake_traffic(demands, d, weights)
    sol = solve_cmcf_min_congestion(g, demands, restrict=members)
    maps.fractional_congestion = sol.congestion
    rounded = round_paths(sol, rng)
    maps.rounding = rounded
    consumed: dict[tuple[int, int], int] = {}
    for x in range(1 << d):
        for k in range(d):
            y = x ^ (1 << k)
            if y < x:
                continue
            a, b = node_owner[x], node_owner[y]
            if a == b:
                continue
            pos = consumed.get((a, b), 0)
            consumed[(a, b)] = pos + 1
            maps.edge_paths[(x, y)] = rounded.paths[(a, b)][pos]
    return maps


def build_embedding(g: CapacitatedGraph, tree: DecompositionTree, cluster: Cluster,
                    c: int, rng: np.random.Generator,
                    solve_paths: bool = True) -> tuple[RoundedSizes, CubeMaps]:
    """Main cube of one cluster: rounded ranges, node map, one path per cube edge.

    c is the certified congestion scale; it sizes the path id fields and is
    recorded for accounting, the embedding itself is solved by the LP.
    """
    child_totals = [tree.cluster(cid).total_border for cid in cluster.children]
    sizes = round_and_order(cluster, child_totals)
    d = sizes.dimension
    if (1 << d) > 8 * cluster.total_weight:
        raise RuntimeError(
            f"cluster {cluster.id}: 2^{d} nodes exceed 8*w(S)={8 * cluster.total_weight}; "
            "weight tables are inconsistent")
    out_maps = [dict(cluster.border_weight)]
    out_maps += [dict(tree.cluster(cluster.children[pos - 1]).border_weight)
                 for pos in sizes.layout_to_child]
    owners = _layout_owners(sizes, out_maps, cluster.cluster_weight)
    maps = _embed_cube(g, set(cluster.vertices), owners, d,
                       cluster.cluster_weight, rng, solve_paths)
    return sizes, maps


def build_rerand_cube(g: CapacitatedGraph, tree: DecompositionTree, cluster: Cluster,
                      c: int, rng: np.random.Generator,
                      solve_paths: bool = True) -> CubeMaps:
    """Shuffle cube: first w_S(S) nodes hold exactly w_S(v) per vertex."""
    total = cluster.total_weight
    d = _ceil_log2(total)
    owners: list[int] = []
    support = [v for v in cluster.vertices if cluster.cluster_weight[v] > 0]
    for v in support:
        owners.extend([v] * cluster.cluster_weight[v])
    rest = (1 << d) - total
    k = 0
    while len(owners) < (1 << d):
        owners.append(support[k % len(support)])
        k += 1
    assert rest == k
    return _embed_cube(g, set(cluster.vertices), owners, d,
                       cluster.cluster_weight, rng, solve_paths)


def build_cube_scheme(g: CapacitatedGraph, tree: DecompositionTree, c: int,
                      rng: np.random.Generator, solve_paths: bool = True) -> CubeScheme:
    if not g.uniform_capacities():
        raise ValueError("hypercube scheme requires uniform unit edge capacities")
    scheme = CubeScheme(graph=g, tree=tree, c=int(c), rounded={}, mains={}, shuffles={})
    for cluster in tree.clusters:
        if cluster.size == 1:
            continue
        sizes, main = build_embedding(g, tree, cluster, c, rng, solve_paths)
        scheme.rounded[cluster.id] = sizes
        scheme.mains[cluster.id] = main
        scheme.shuffles[cluster.id] = build_rerand_cube(g, tree, cluster, c, rng, solve_paths)
    return scheme


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------

def _bit_fix(a: int, b: int, d: int) -> list[int]:
    """Node sequence from a to b flipping differing coordinates in ascending order."""
    seq = [a]
    cur = a
    for k in range(d):
        if (cur ^ b) & (1 << k):
            cur ^= 1 << k
            seq.append(cur)
    return seq


def hypercube_route(maps: CubeMaps, h_from: int, h_to: int,
                    rng: np.random.Generator) -> list[int]:
    """Two-phase cube route through a uniform intermediate node, realized as a
    graph walk by splicing the stored path of every traversed cube edge."""
    d = maps.dimension
    z = int(rng.integers(1 << d))
    hops = _bit_fix(h_from, z, d)
    hops += _bit_fix(z, h_to, d)[1:]
    path = [maps.node_owner[h_from]]
    for x, y in zip(hops, hops[1:]):
        a, b = maps.node_owner[x], maps.node_owner[y]
        if a == b:
            continue
        stored = maps.edge_paths[(x, y) if x < y else (y, x)]
        segment = stored if x < y else stored[::-1]
        assert segment[0] == path[-1], "cube edge path does not continue the walk"
        path.extend(segment[1:])
    return path


def route_to_border_b(scheme: CubeScheme, cluster_id: int, tree_index: int,
                      v_start: int, rng: np.random.Generator) -> tuple[list[int], int]:
    """Cube hop to a uniform node of the target range; the owner is the endpoint.

    tree_index 0 targets the cluster's own border, k >= 1 the k-th tree child.
    """
    sizes = scheme.rounded[cluster_id]
    maps = scheme.mains[cluster_id]
    layout = 0 if tree_index == 0 else sizes.child_to_layout[tree_index]
    lo, hi = sizes.range_of(layout)
    if hi == lo:
        raise ValueError(f"cluster {cluster_id} target {tree_index} has no border nodes")
    nodes = maps.vertex_nodes.get(v_start)
    if not nodes:
        raise ValueError(f"vertex {v_start} owns no cube nodes in cluster {cluster_id}")
    start = nodes[int(rng.integers(len(nodes)))]
    target = int(rng.integers(lo, hi))
    path = hypercube_route(maps, start, target, rng)
    return path, maps.node_owner[target]


def rerandomize(scheme: CubeScheme, cluster_id: int, v: int,
                rng: np.random.Generator) -> tuple[list[int], int]:
    """Walk the shuffle cube to a uniform node among the first w_S(S); the
    endpoint law is exactly the cluster distribution, whatever v's law was."""
    cluster = scheme.tree.cluster(cluster_id)
    if cluster.size == 1:
        return [v], v
    maps = scheme.shuffles[cluster_id]
    nodes = maps.vertex_nodes.get(v)
    if not nodes:
        raise ValueError(f"vertex {v} owns no shuffle nodes in cluster {cluster_id}")
    start = nodes[int(rng.integers(len(nodes)))]
    target = int(rng.integers(scheme.rounded[cluster_id].total_weight))
    path = hypercube_route(maps, start, target, rng)
    return path, maps.node_owner[target]


# ---------------------------------------------------------------------------
# audits and accounting
# ---------------------------------------------------------------------------

def audit_cube_scheme(scheme: CubeScheme) -> list[str]:
    """Check every mapping inequality exactly; empty list means clean."""
    bad: list[str] = []
    tree = scheme.tree
    for cid, sizes in scheme.rounded.items():
        cluster = tree.cluster(cid)
        maps = scheme.mains[cid]
        if (1 << sizes.dimension) > 8 * cluster.total_weight:
            bad.append(f"cluster {cid}: cube larger than 8*w(S)")
        out_maps = [cluster.border_weight]
        out_maps += [tree.cluster(cluster.children[pos - 1]).border_weight
                     for pos in sizes.layout_to_child]
        ranged_nodes = 0
        ranged_count: dict[int, int] = {}
        for layout_index, out_map in enumerate(out_maps):
            lo, hi = sizes.range_of(layout_index)
            ranged_nodes = max(ranged_nodes, hi)
            counts: dict[int, int] = {}
            for node in range(lo, hi):
                v = maps.node_owner[node]
                counts[v] = counts.get(v, 0) + 1
                ranged_count[v] = ranged_count.get(v, 0) + 1
            for v, k in counts.items():
                out_v = out_map.get(v, 0)
                if not out_v <= k <= 2 * out_v:
                    bad.append(f"cluster {cid} range {layout_index}: vertex {v} "
                               f"holds {k} nodes outside [{out_v}, {2 * out_v}]")
            for v, out_v in out_map.items():
                if out_v > 0 and counts.get(v, 0) < out_v:
                    bad.append(f"cluster {cid} range {layout_index}: vertex {v} "
                               f"holds fewer than {out_v} nodes")
        leftover: dict[int, int] = {}
        for node in range(ranged_nodes, 1 << sizes.dimension):
            v = maps.node_owner[node]
            leftover[v] = leftover.get(v, 0) + 1
        for v, k in leftover.items():
            if k > 4 * cluster.cluster_weight[v]:
                bad.append(f"cluster {cid}: vertex {v} holds {k} leftover nodes "
                           f"> 4*w = {4 * cluster.cluster_weight[v]}")
        for v in cluster.vertices:
            total = ranged_count.get(v, 0) + leftover.get(v, 0)
            if total > 8 * cluster.cluster_weight[v]:
                bad.append(f"cluster {cid}: vertex {v} holds {total} nodes "
                           f"> 8*w = {8 * cluster.cluster_weight[v]}")

        shuffle = scheme.shuffles[cid]
        first: dict[int, int] = {}
        for node in range(cluster.total_weight):
            v = shuffle.node_owner[node]
            first[v] = first.get(v, 0) + 1
        for v in cluster.vertices:
            if first.get(v, 0) != cluster.cluster_weight[v]:
                bad.append(f"cluster {cid}: shuffle cube gives vertex {v} "
                           f"{first.get(v, 0)} of the first nodes, "
                           f"expected {cluster.cluster_weight[v]}")

        for maps_ in (maps, shuffle):
            for (x, y), path in maps_.edge_paths.items():
                if path[0] != maps_.node_owner[x] or path[-1] != maps_.node_owner[y]:
                    bad.append(f"cluster {cid}: stored path endpoints disagree "
                               f"with cube edge ({x},{y})")
                for a, b in zip(path, path[1:]):
                    if not scheme.graph.has_edge(a, b):
                        bad.append(f"cluster {cid}: stored path uses missing edge "
                                   f"({a},{b})")
    return bad


def measure_table_bits_b(scheme: CubeScheme):
    """Bit count of the documented layout per vertex (see module docstring)."""
    from obroute.impl_a import TableBits

    g = scheme.graph
    tree = scheme.tree
    weight_cap = 2 * g.m * max(1, g.max_capacity)   # no border total can exceed this
    exp_bits = max(1, _ceil_log2(1 + weight_cap.bit_length()))
    weight_bits = max(1, weight_cap.bit_length())
    id_bits = max(1, _ceil_log2(max(2, len(tree.clusters))))

    # continuation entries: one per stored path per vertex with an outgoing edge
    hits: dict[tuple[int, int, int], int] = {}      # (v, cluster, cube flag) -> paths
    for cid in scheme.rounded:
        for flag, maps in enumerate((scheme.mains[cid], scheme.shuffles[cid])):
            for path in maps.edge_paths.values():
                for v in path[:-1]:
                    hits[(v, cid, flag)] = hits.get((v, cid, flag), 0) + 1
    count_bits = max(1, max(hits.values(), default=1).bit_length())

    per_vertex: dict[int, int] = {v: 0 for v in range(g.n)}
    for cid, sizes in scheme.rounded.items():
        cluster = tree.cluster(cid)
        r = len(sizes.children)
        block = (r + 1) * exp_bits + r * max(1, _ceil_log2(max(2, r))) + weight_bits
        for v in cluster.vertices:
            per_vertex[v] += block
    for (v, cid, flag), paths in hits.items():
        maps = scheme.mains[cid] if flag == 0 else scheme.shuffles[cid]
        edge_bits = max(1, _ceil_log2(max(2, g.degree(v))))
        path_id_bits = max(1, _ceil_log2(max(2, maps.dimension * scheme.c)))
        header = id_bits + 1 + count_bits
        per_vertex[v] += header + paths * (edge_bits + path_id_bits)
    return TableBits(per_vertex=per_vertex,
                     max_bits=max(per_vertex.values(), default=0),
                     total_bits=sum(per_vertex.values()))
