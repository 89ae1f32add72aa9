"""Laminar hierarchical decomposition of a capacitated graph.

The tree partitions the vertex set recursively down to singletons, with dummy
unary clusters padding every branch to a uniform leaf depth. Each cluster
carries two weight tables:

  border_weight[v]  capacity of edges from v leaving the cluster
  cluster_weight[v] capacity of edges from v leaving the child cluster holding v

For leaves the two coincide (a leaf is treated as partitioned into itself).
The routing quality parameter is certified per instance by solving each
cluster's product-demand concurrent-flow problem, never assumed.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from obroute.cmcf import CMCFSolution, solve_cmcf_min_congestion
from obroute.graph import CapacitatedGraph, DemandMatrix

__all__ = ["Cluster", "DecompositionTree", "CongestionCertificate",
           "build_tree", "tree_from_spec", "compute_weights", "cmcf_instance",
           "certify_congestion", "audit_tree"]

# escalation acceptance: largest part may hold at most this fraction of the cluster
_BALANCE_FRACTION = 0.75
_SIZE_SLACK = 1.25


@dataclass
class Cluster:
    id: int
    level: int
    vertices: tuple[int, ...]
    parent: int | None
    children: list[int] = field(default_factory=list)
    cluster_weight: dict[int, int] = field(default_factory=dict)
    border_weight: dict[int, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def total_weight(self) -> int:
        return sum(self.cluster_weight.values())

    @property
    def total_border(self) -> int:
        return sum(self.border_weight.values())


class DecompositionTree:
    def __init__(self, clusters: list[Cluster], seed: int, target_arity: int):
        self.clusters = clusters
        self.seed = seed
        self.target_arity = target_arity
        self.root = 0
        self.height = max(c.level for c in clusters)
        self.leaf_of = {c.vertices[0]: c.id for c in clusters
                        if c.level == self.height and c.size == 1}
        self._paths: dict[int, list[int]] = {}

    def cluster(self, cid: int) -> Cluster:
        return self.clusters[cid]

    @property
    def degree(self) -> int:
        """Maximum child count over all clusters."""
        return max((len(c.children) for c in self.clusters), default=0) or 1

    def leaf_path(self, v: int) -> list[int]:
        """Cluster ids from the root down to v's leaf."""
        if v not in self._paths:
            cid = self.leaf_of[v]
            path = [cid]
            while self.clusters[cid].parent is not None:
                cid = self.clusters[cid].parent
                path.append(cid)
            self._paths[v] = path[::-1]
        return self._paths[v]

    def child_index(self, parent_id: int, child_id: int) -> int:
        return self.clusters[parent_id].children.index(child_id)

    def ancestor_at(self, v: int, level: int) -> int:
        return self.leaf_path(v)[level]

    def to_json(self, certificate: "CongestionCertificate | None" = None) -> str:
        payload = {
            "seed": self.seed,
            "target_arity": self.target_arity,
            "height": self.height,
            "clusters": [
                {
                    "id": c.id,
                    "level": c.level,
                    "vertices": list(c.vertices),
                    "parent": c.parent,
                    "children": c.children,
                    "cluster_weight": {str(v): w for v, w in sorted(c.cluster_weight.items())},
                    "border_weight": {str(v): w for v, w in sorted(c.border_weight.items())},
                }
                for c in self.clusters
            ],
        }
        if certificate is not None:
            payload["certificate"] = {
                "value": certificate.value,
                "int_value": certificate.int_value,
                "per_cluster": {str(k): v for k, v in sorted(certificate.per_cluster.items())},
            }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> tuple["DecompositionTree", "CongestionCertificate | None"]:
        data = json.loads(text)
        clusters = [
            Cluster(
                id=c["id"], level=c["level"], vertices=tuple(c["vertices"]),
                parent=c["parent"], children=list(c["children"]),
                cluster_weight={int(v): w for v, w in c["cluster_weight"].items()},
                border_weight={int(v): w for v, w in c["border_weight"].items()},
            )
            for c in sorted(data["clusters"], key=lambda c: c["id"])
        ]
        tree = cls(clusters, seed=data["seed"], target_arity=data["target_arity"])
        cert = None
        if "certificate" in data:
            raw = data["certificate"]
            cert = CongestionCertificate(
                value=raw["value"], int_value=raw["int_value"],
                per_cluster={int(k): v for k, v in raw["per_cluster"].items()},
                solutions=None)
        return tree, cert


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def build_tree(g: CapacitatedGraph, target_arity: int = 2, seed: int = 0) -> DecompositionTree:
    """Recursive balanced partitioning into connected parts, padded to uniform depth.

    Parts are grown by seeded multi-source BFS (smallest part first) and refined
    by boundary moves that reduce cut capacity while keeping parts connected.
    When no balanced split at the target arity exists (hub topologies) the
    splitter doubles the part count for that cluster instead of unbalancing.
    """
    if target_arity < 2:
        raise ValueError(f"target arity must be >= 2, got {target_arity}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD15EC7)))
    clusters: list[Cluster] = []

    def create(vertices: tuple[int, ...], level: int, parent: int | None) -> int:
        cid = len(clusters)
        clusters.append(Cluster(id=cid, level=level, vertices=vertices, parent=parent))
        if parent is not None:
            clusters[parent].children.append(cid)
        return cid

    def recurse(vertices: tuple[int, ...], level: int, parent: int | None):
        cid = create(vertices, level, parent)
        if len(vertices) == 1:
            return
        for part in _split_cluster(g, list(vertices), target_arity, rng):
            recurse(tuple(sorted(part)), level + 1, cid)

    recurse(tuple(range(g.n)), 0, None)

    height = max(c.level for c in clusters)
    for cid in [c.id for c in clusters if c.size == 1 and not c.children]:
        cur = cid
        while clusters[cur].level < height:
            cur = create(clusters[cur].vertices, clusters[cur].level + 1, cur)

    tree = DecompositionTree(clusters, seed=seed, target_arity=target_arity)
    cap = math.ceil(2.5 * math.log2(max(g.n, 2))) + 2
    assert tree.height <= cap, f"tree height {tree.height} exceeds {cap} for n={g.n}"
    return compute_weights(g, tree)


def tree_from_spec(g: CapacitatedGraph, spec) -> DecompositionTree:
    """Build a tree from an explicit nesting, for fixtures and worked examples.

    A spec node is either a vertex id or a list of spec nodes; a list of ints
    is a cluster whose children are those singletons. Branches are padded with
    unary clusters to uniform leaf depth, then weights are computed.
    """
    clusters: list[Cluster] = []

    def collect(node) -> list[int]:
        return [node] if isinstance(node, int) else [v for sub in node for v in collect(sub)]

    def create(vertices: tuple[int, ...], level: int, parent: int | None) -> int:
        cid = len(clusters)
        clusters.append(Cluster(id=cid, level=level, vertices=vertices, parent=parent))
        if parent is not None:
            clusters[parent].children.append(cid)
        return cid

    def recurse(node, level: int, parent: int | None):
        vertices = tuple(sorted(collect(node)))
        cid = create(vertices, level, parent)
        if isinstance(node, int):
            return
        if len(vertices) == 1:
            recurse(vertices[0], level + 1, cid)
            return
        for sub in node:
            recurse(sub, level + 1, cid)

    top = collect(spec)
    if sorted(top) != list(range(g.n)):
        raise ValueError("spec must cover every vertex exactly once")
    recurse(spec if not isinstance(spec, int) else [spec], 0, None)

    height = max(c.level for c in clusters)
    for cid in [c.id for c in clusters if c.size == 1 and not c.children]:
        cur = cid
        while clusters[cur].level < height:
            cur = create(clusters[cur].vertices, clusters[cur].level + 1, cur)
    tree = DecompositionTree(clusters, seed=-1, target_arity=0)
    return compute_weights(g, tree)


def _split_cluster(g: CapacitatedGraph, vertices: list[int], arity: int,
                   rng: np.random.Generator) -> list[set[int]]:
    k = min(arity, len(vertices))
    while True:
        parts = _grow_parts(g, vertices, k, rng)
        limit = math.ceil(math.ceil(len(vertices) / k) * _SIZE_SLACK)
        parts = _refine_parts(g, vertices, parts, limit)
        biggest = max(len(p) for p in parts)
        if biggest <= max(_BALANCE_FRACTION * len(vertices), 1.0) or k >= len(vertices):
            return [p for p in parts if p]
        k = min(2 * k, len(vertices))


def _grow_parts(g: CapacitatedGraph, vertices: list[int], k: int,
                rng: np.random.Generator) -> list[set[int]]:
    inside = set(vertices)
    seeds = [int(rng.choice(vertices))]
    while len(seeds) < k:
        dist = _multi_bfs(g, inside, seeds)
        far = max(((d, -v) for v, d in dist.items() if v not in seeds), default=None)
        if far is None:
            break
        seeds.append(-far[1])

    owner: dict[int, int] = {s: i for i, s in enumerate(seeds)}
    parts: list[set[int]] = [{s} for s in seeds]
    queues: list[deque[int]] = [deque(u for u in g.neighbors(s) if u in inside)
                                for s in seeds]
    unassigned = len(inside) - len(seeds)
    while unassigned > 0:
        order = sorted(range(len(parts)), key=lambda i: (len(parts[i]), i))
        progressed = False
        for i in order:
            while queues[i]:
                v = queues[i].popleft()
                if v in owner:
                    continue
                owner[v] = i
                parts[i].add(v)
                queues[i].extend(u for u in g.neighbors(v) if u in inside and u not in owner)
                unassigned -= 1
                progressed = True
                break
            if progressed:
                break
        if not progressed:
            # refresh frontiers; the induced subgraph is connected so this succeeds
            for i, part in enumerate(parts):
                for v in part:
                    queues[i].extend(u for u in g.neighbors(v)
                                     if u in inside and u not in owner)
            if not any(queues):
                leftover = [v for v in vertices if v not in owner]
                assert not leftover, f"grow stalled with {leftover} unassigned"
                break
    return parts


def _multi_bfs(g: CapacitatedGraph, inside: set[int], sources: list[int]) -> dict[int, int]:
    dist = {s: 0 for s in sources}
    queue = deque(sources)
    while queue:
        v = queue.popleft()
        for u in g.neighbors(v):
            if u in inside and u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def _refine_parts(g: CapacitatedGraph, vertices: list[int], parts: list[set[int]],
                  size_limit: int) -> list[set[int]]:
    inside = set(vertices)
    owner = {v: i for i, part in enumerate(parts) for v in part}
    for _ in range(4 * len(vertices)):
        moved = False
        for v in sorted(vertices):
            p = owner[v]
            if len(parts[p]) <= 1:
                continue
            stay = 0
            pull: dict[int, int] = {}
            for u, eidx in g.adj[v]:
                if u not in inside:
                    continue
                cap = g.edges[eidx][2]
                if owner[u] == p:
                    stay += cap
                else:
                    pull[owner[u]] = pull.get(owner[u], 0) + cap
            best = max(sorted(pull), key=lambda q: pull[q], default=None)
            if best is None or pull[best] <= stay:
                continue
            if len(parts[best]) + 1 > size_limit:
                continue
            if not _connected_without(g, parts[p], v):
                continue
            parts[p].discard(v)
            parts[best].add(v)
            owner[v] = best
            moved = True
        if not moved:
            break
    return parts


def _connected_without(g: CapacitatedGraph, part: set[int], v: int) -> bool:
    rest = part - {v}
    if len(rest) <= 1:
        return True
    start = next(iter(rest))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for u in g.neighbors(x):
            if u in rest and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(rest)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def compute_weights(g: CapacitatedGraph, tree: DecompositionTree) -> DecompositionTree:
    """Fill border and cluster weight tables on every cluster."""
    for c in tree.clusters:
        members = set(c.vertices)
        c.border_weight = {
            v: sum(g.edges[eidx][2] for u, eidx in g.adj[v] if u not in members)
            for v in c.vertices
        }
    for c in tree.clusters:
        if not c.children:
            c.cluster_weight = dict(c.border_weight)
        else:
            table: dict[int, int] = {}
            for cid in c.children:
                table.update(tree.clusters[cid].border_weight)
            c.cluster_weight = {v: table[v] for v in c.vertices}
    return tree


def cmcf_instance(cluster: Cluster) -> DemandMatrix:
    """Product demands w(u)*w(v)/w(S) over ordered pairs of the cluster."""
    if not cluster.cluster_weight:
        raise ValueError(f"cluster {cluster.id} has no weight tables; run compute_weights")
    total = cluster.total_weight
    entries: dict[tuple[int, int], float] = {}
    if total == 0:
        return DemandMatrix(entries)
    for u in cluster.vertices:
        wu = cluster.cluster_weight[u]
        if wu == 0:
            continue
        for v in cluster.vertices:
            if v == u:
                continue
            wv = cluster.cluster_weight[v]
            if wv:
                entries[(u, v)] = wu * wv / total
    return DemandMatrix(entries)


# ---------------------------------------------------------------------------
# congestion certificate
# ---------------------------------------------------------------------------

@dataclass
class CongestionCertificate:
    value: float                       # max cluster congestion
    int_value: int                     # ceil, >= 1; capacity scaling uses this
    per_cluster: dict[int, float]
    solutions: dict[int, CMCFSolution] | None = None


def certify_congestion(g: CapacitatedGraph, tree: DecompositionTree,
                       store_solutions: bool = False,
                       method: str | None = None) -> CongestionCertificate:
    """Solve every cluster's product-demand instance and record the worst congestion.

    Symmetric pairs are solved once (u < v at doubled demand); reversing those
    flows restores the other direction with identical undirected loads, so the
    congestion value is exact for the full instance.
    """
    per_cluster: dict[int, float] = {}
    solutions: dict[int, CMCFSolution] = {}
    for c in tree.clusters:
        if c.size == 1 or c.total_weight == 0:
            per_cluster[c.id] = 0.0
            continue
        total = c.total_weight
        half: dict[tuple[int, int], float] = {}
        for i, u in enumerate(c.vertices):
            wu = c.cluster_weight[u]
            if wu == 0:
                continue
            for v in c.vertices[i + 1:]:
                wv = c.cluster_weight[v]
                if wv:
                    half[(u, v)] = 2.0 * wu * wv / total
        sol = solve_cmcf_min_congestion(g, half, restrict=set(c.vertices), method=method)
        per_cluster[c.id] = sol.congestion
        if store_solutions:
            solutions[c.id] = sol
    value = max(per_cluster.values(), default=0.0)
    int_value = max(1, math.ceil(value - 1e-9))
    return CongestionCertificate(value=value, int_value=int_value,
                                 per_cluster=per_cluster,
                                 solutions=solutions if store_solutions else None)


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

def audit_tree(g: CapacitatedGraph, tree: DecompositionTree) -> list[str]:
    """Structural and weight-identity violations; empty list means clean."""
    bad: list[str] = []
    root = tree.cluster(tree.root)
    if tuple(sorted(root.vertices)) != tuple(range(g.n)):
        bad.append("root cluster is not the full vertex set")
    for c in tree.clusters:
        if c.children:
            merged: list[int] = []
            for cid in c.children:
                child = tree.cluster(cid)
                if child.parent != c.id or child.level != c.level + 1:
                    bad.append(f"cluster {cid} has inconsistent parent/level links")
                merged.extend(child.vertices)
            if sorted(merged) != sorted(c.vertices):
                bad.append(f"children of cluster {c.id} do not partition it")
        else:
            if c.size != 1:
                bad.append(f"leaf cluster {c.id} is not a singleton")
            if c.level != tree.height:
                bad.append(f"leaf cluster {c.id} at depth {c.level} != height {tree.height}")

    for c in tree.clusters:
        members = set(c.vertices)
        for v in c.vertices:
            direct = sum(g.edges[eidx][2] for u, eidx in g.adj[v] if u not in members)
            if c.border_weight.get(v) != direct:
                bad.append(f"border weight of {v} in cluster {c.id} mismatches edge scan")
        if c.parent is None and any(c.border_weight.values()):
            bad.append("root border weight is not identically zero")
        if c.children:
            child_total = sum(tree.cluster(cid).total_border for cid in c.children)
            if child_total != c.total_weight:
                bad.append(f"cluster {c.id}: child border totals != cluster weight")
            for cid in c.children:
                child = tree.cluster(cid)
                for v in child.vertices:
                    if c.cluster_weight.get(v) != child.border_weight.get(v):
                        bad.append(f"cluster {c.id}: weight of {v} != child border weight")
        for v in c.vertices:
            if c.border_weight.get(v, 0) > c.cluster_weight.get(v, 0):
                bad.append(f"cluster {c.id}: border weight of {v} exceeds cluster weight")

    # each edge's endpoints may share clusters along one root-leaf path only
    for u, v, _ in g.edges:
        pu, pv = tree.leaf_path(u), tree.leaf_path(v)
        shared = 0
        while shared < len(pu) and shared < len(pv) and pu[shared] == pv[shared]:
            shared += 1
        if shared > tree.height + 1:
            bad.append(f"edge ({u},{v}) contained in {shared} > h+1 clusters")
    return bad
