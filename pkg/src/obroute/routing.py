"""Demand-oblivious path selection over a cluster tree, for any hop backend.

A route for (s, t) walks the tree path between the two leaves. Every tree edge
is crossed by one hop made of two sub-paths meeting at an intermediate border
vertex: the lower one inside the child cluster, the upper one inside the
parent. Backends supply the hops:

  reference  samples the intermediate vertex and the far endpoint from the
             exact cluster laws, then draws connecting paths from the stored
             per-cluster flow solutions
  tables     random-link walks over the precomputed augmented flows; endpoint
             laws are exact by the absorption argument
  cubes      a hypercube walk to the target border range (endpoint within a
             factor-2 envelope) followed by a shuffle-cube walk that restores
             the exact cluster law

Expected edge loads are Monte-Carlo estimates: independent path draws per
ordered pair, each pair on its own rng stream derived from the master seed, so
results are reproducible and pair order is irrelevant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from obroute.cmcf import CMCFSolution
from obroute.decomposition import DecompositionTree
from obroute.graph import CapacitatedGraph, DemandMatrix
from obroute.impl_a import FlowTables, route_from_border, route_to_border
from obroute.impl_b import CubeScheme, rerandomize, route_to_border_b

__all__ = ["SchemeBackend", "ReferenceBackend", "FlowTableBackend",
           "HypercubeBackend", "LoadReport", "select_path", "route_demands",
           "congestion"]


class SchemeBackend(Protocol):
    """One hop across a tree edge; endpoint reported with the path."""

    def route_up(self, child_id: int, v: int,
                 rng: np.random.Generator) -> tuple[list[int], int]: ...

    def route_down(self, parent_id: int, child_index: int, v: int,
                   rng: np.random.Generator) -> tuple[list[int], int]: ...


def _join(first: list[int], *rest: list[int]) -> list[int]:
    path = list(first)
    for seg in rest:
        assert seg[0] == path[-1], "hop segments do not share their junction"
        path.extend(seg[1:])
    return path


class _LawSampler:
    """Cumulative-probability sampling of a fixed integer-weighted law."""

    def __init__(self, law: dict[int, int]):
        items = sorted((v, w) for v, w in law.items() if w > 0)
        assert items, "cannot sample from an all-zero law"
        self.values = np.array([v for v, _ in items])
        w = np.array([w for _, w in items], dtype=float)
        self.cum = np.cumsum(w / w.sum())

    def draw(self, rng: np.random.Generator) -> int:
        i = int(np.searchsorted(self.cum, rng.random(), side="right"))
        return int(self.values[min(i, len(self.values) - 1)])


class ReferenceBackend:
    """Hops sampled directly from the certification flow solutions."""

    def __init__(self, g: CapacitatedGraph, tree: DecompositionTree,
                 solutions: dict[int, CMCFSolution]):
        self.graph = g
        self.tree = tree
        self.solutions = solutions
        self._weight_laws: dict[int, _LawSampler] = {}
        self._border_laws: dict[int, _LawSampler] = {}

    def sample_cluster_vertex(self, cluster_id: int, rng: np.random.Generator) -> int:
        if cluster_id not in self._weight_laws:
            self._weight_laws[cluster_id] = _LawSampler(
                self.tree.cluster(cluster_id).cluster_weight)
        return self._weight_laws[cluster_id].draw(rng)

    def _sample_border(self, cluster_id: int, rng: np.random.Generator) -> int:
        if cluster_id not in self._border_laws:
            self._border_laws[cluster_id] = _LawSampler(
                self.tree.cluster(cluster_id).border_weight)
        return self._border_laws[cluster_id].draw(rng)

    def _path_between(self, cluster_id: int, u: int, v: int,
                      rng: np.random.Generator) -> list[int]:
        # solutions store each unordered pair once, sources below sinks
        if u == v:
            return [u]
        sol = self.solutions[cluster_id]
        paths, probs = sol.path_groups(min(u, v))[max(u, v)]
        i = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
        path = paths[min(i, len(paths) - 1)]
        return path if u < v else path[::-1]

    def route_up(self, child_id: int, v: int,
                 rng: np.random.Generator) -> tuple[list[int], int]:
        child = self.tree.cluster(child_id)
        parent = self.tree.cluster(child.parent)
        if parent.size == 1:
            return [v], v
        alpha = self._sample_border(child_id, rng)
        lower = self._path_between(child_id, v, alpha, rng)
        top = self.sample_cluster_vertex(parent.id, rng)
        upper = self._path_between(parent.id, alpha, top, rng)
        return _join(lower, upper), top

    def route_down(self, parent_id: int, child_index: int, v: int,
                   rng: np.random.Generator) -> tuple[list[int], int]:
        parent = self.tree.cluster(parent_id)
        if parent.size == 1:
            return [v], v
        child = self.tree.cluster(parent.children[child_index - 1])
        alpha = self._sample_border(child.id, rng)
        upper = self._path_between(parent_id, v, alpha, rng)
        if child.size == 1:
            return upper, alpha
        bottom = self.sample_cluster_vertex(child.id, rng)
        lower = self._path_between(child.id, alpha, bottom, rng)
        return _join(upper, lower), bottom


class FlowTableBackend:
    """Hops walk the stored augmented flows: forward to leave a cluster,
    backward to spread over the far one."""

    def __init__(self, tables: FlowTables):
        self.tables = tables
        self.tree = tables.tree

    def route_up(self, child_id: int, v: int,
                 rng: np.random.Generator) -> tuple[list[int], int]:
        child = self.tree.cluster(child_id)
        parent = self.tree.cluster(child.parent)
        if parent.size == 1:
            return [v], v
        if child.size == 1:
            lower, alpha = [v], v
        else:
            lower, alpha = route_to_border(self.tables, child_id, 0, v, rng)
        i = self.tree.child_index(parent.id, child_id) + 1
        upper, top = route_from_border(self.tables, parent.id, i, alpha, rng)
        return _join(lower, upper), top

    def route_down(self, parent_id: int, child_index: int, v: int,
                   rng: np.random.Generator) -> tuple[list[int], int]:
        parent = self.tree.cluster(parent_id)
        if parent.size == 1:
            return [v], v
        upper, alpha = route_to_border(self.tables, parent_id, child_index, v, rng)
        child = self.tree.cluster(parent.children[child_index - 1])
        if child.size == 1:
            return upper, alpha
        lower, bottom = route_from_border(self.tables, child.id, 0, alpha, rng)
        return _join(upper, lower), bottom


class HypercubeBackend:
    """Hops cross via a border-range cube walk, then a shuffle-cube walk in the
    destination cluster makes the endpoint law exact again."""

    def __init__(self, scheme: CubeScheme):
        self.scheme = scheme
        self.tree = scheme.tree

    def route_up(self, child_id: int, v: int,
                 rng: np.random.Generator) -> tuple[list[int], int]:
        child = self.tree.cluster(child_id)
        parent = self.tree.cluster(child.parent)
        if parent.size == 1:
            return [v], v
        if child.size == 1:
            lower, border = [v], v
        else:
            lower, border = route_to_border_b(self.scheme, child_id, 0, v, rng)
        shuffle, top = rerandomize(self.scheme, parent.id, border, rng)
        return _join(lower, shuffle), top

    def route_down(self, parent_id: int, child_index: int, v: int,
                   rng: np.random.Generator) -> tuple[list[int], int]:
        parent = self.tree.cluster(parent_id)
        if parent.size == 1:
            return [v], v
        upper, border = route_to_border_b(self.scheme, parent_id, child_index, v, rng)
        child_id = parent.children[child_index - 1]
        shuffle, bottom = rerandomize(self.scheme, child_id, border, rng)
        return _join(upper, shuffle), bottom


def select_path(s: int, t: int, tree: DecompositionTree, backend: SchemeBackend,
                rng: np.random.Generator) -> list[int]:
    """One sampled route: up from s's leaf to the lowest common cluster, then
    down to t's leaf. s == t yields the empty path."""
    if s == t:
        return []
    up = tree.leaf_path(s)
    down = tree.leaf_path(t)
    shared = 0
    while shared < len(up) and up[shared] == down[shared]:
        shared += 1
    path = [s]
    cur = s
    for i in range(len(up) - 1, shared - 1, -1):
        seg, cur = backend.route_up(up[i], cur, rng)
        path = _join(path, seg)
    for i in range(shared, len(down)):
        k = tree.child_index(down[i - 1], down[i]) + 1
        seg, cur = backend.route_down(down[i - 1], k, cur, rng)
        path = _join(path, seg)
    assert cur == t, f"route for ({s},{t}) ended at {cur}"
    return path


@dataclass
class LoadReport:
    """Expected per-edge loads from Monte-Carlo routing, plus scheme metadata."""

    edge_loads: dict[tuple[int, int], float]
    edge_stderr: dict[tuple[int, int], float]
    edge_caps: dict[tuple[int, int], int]
    congestion: float
    samples: int
    seed: int
    c_opt: float | None = None
    ratio: float | None = None
    table_bits: dict[int, int] | None = None    # per vertex
    label_bits: int | None = None
    header_bits: int | None = None
    scheme: str = ""

    def to_json(self) -> str:
        payload = {
            "scheme": self.scheme,
            "samples": self.samples,
            "seed": self.seed,
            "congestion": self.congestion,
            "c_opt": self.c_opt,
            "ratio": self.ratio,
            "label_bits": self.label_bits,
            "header_bits": self.header_bits,
            "max_table_bits": max(self.table_bits.values())
            if self.table_bits else None,
            "total_table_bits": sum(self.table_bits.values())
            if self.table_bits else None,
            "edges": [
                {"u": u, "v": v, "cap": self.edge_caps[(u, v)],
                 "load": self.edge_loads.get((u, v), 0.0),
                 "stderr": self.edge_stderr.get((u, v), 0.0)}
                for (u, v) in sorted(self.edge_caps)
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def route_demands(g: CapacitatedGraph, tree: DecompositionTree,
                  backend: SchemeBackend, demands: DemandMatrix | dict,
                  samples: int = 1000, seed: int = 0) -> LoadReport:
    """Estimate expected edge loads by sampling `samples` routes per pair.

    The estimator is linear in the demands: each sampled traversal contributes
    d/samples. Every sampled path is validated edge by edge.
    """
    entries = demands.entries if isinstance(demands, DemandMatrix) else dict(demands)
    if samples < 1:
        raise ValueError(f"need at least one sample per pair, got {samples}")
    for (s, t) in entries:
        if not (0 <= s < g.n and 0 <= t < g.n):
            raise ValueError(f"demand pair ({s},{t}) out of vertex range")

    loads: dict[tuple[int, int], float] = {}
    sq_err: dict[tuple[int, int], float] = {}
    for (s, t), d in sorted(entries.items()):
        if d <= 0 or s == t:
            continue
        rng = np.random.default_rng(np.random.SeedSequence((seed, s, t)))
        tot: dict[tuple[int, int], int] = {}
        tot_sq: dict[tuple[int, int], int] = {}
        for _ in range(samples):
            path = select_path(s, t, tree, backend, rng)
            assert path[0] == s and path[-1] == t
            cnt: dict[tuple[int, int], int] = {}
            for a, b in zip(path, path[1:]):
                assert g.has_edge(a, b), f"sampled path uses missing edge ({a},{b})"
                key = (a, b) if a < b else (b, a)
                cnt[key] = cnt.get(key, 0) + 1
            for key, c in cnt.items():
                tot[key] = tot.get(key, 0) + c
                tot_sq[key] = tot_sq.get(key, 0) + c * c
        for key, total in tot.items():
            mean = total / samples
            loads[key] = loads.get(key, 0.0) + d * mean
            spread = max(tot_sq[key] / samples - mean * mean, 0.0)
            sq_err[key] = sq_err.get(key, 0.0) + d * d * spread / samples

    caps = {(u, v) if u < v else (v, u): c for u, v, c in g.edges}
    worst = max((load / caps[key] for key, load in loads.items()), default=0.0)
    return LoadReport(edge_loads=loads,
                      edge_stderr={k: v ** 0.5 for k, v in sq_err.items()},
                      edge_caps=caps,
                      congestion=worst,
                      samples=samples,
                      seed=seed)


def congestion(report: LoadReport) -> float:
    """Max load over capacity, recomputed from the per-edge values."""
    return max((load / report.edge_caps[key]
                for key, load in report.edge_loads.items()), default=0.0)
