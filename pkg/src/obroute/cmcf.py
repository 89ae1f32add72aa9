"""Minimum-congestion concurrent multicommodity flow, solved as one LP with
commodities aggregated by source vertex, plus randomized rounding of unit
flows to single paths."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from obroute.flows import SNK, SRC, FlowAssignment, cancel_cycles, decompose_by_sink
from obroute.graph import CapacitatedGraph, DemandMatrix

# above this variable count the dual simplex stalls; interior point stays fast
_IPM_THRESHOLD = 60_000

__all__ = ["CMCFSolution", "RoundedPaths", "solve_cmcf_min_congestion", "round_paths"]


@dataclass
class CMCFSolution:
    """Feasible fractional routing of a demand set inside a vertex restriction.

    source_flows holds one cycle-free FlowAssignment per demand source with the
    super-terminals attached; congestion is recomputed from those flows, so it
    matches the stored loads exactly.
    """

    vertices: list[int]
    demands: dict[tuple[int, int], float]
    source_flows: dict[int, FlowAssignment]
    edge_loads: dict[tuple[int, int], float]   # canonical (u < v), both directions summed
    congestion: float
    lp_objective: float

    _groups: dict[int, dict[int, tuple[list[list[int]], np.ndarray]]] = field(
        default_factory=dict, repr=False)

    def path_groups(self, source: int) -> dict[int, tuple[list[list[int]], np.ndarray]]:
        """Per sink: decomposed paths and their normalized sampling probabilities."""
        if source not in self._groups:
            grouped = decompose_by_sink(self.source_flows[source])
            out = {}
            for sink, entries in grouped.items():
                paths = [p for p, _ in entries]
                w = np.array([x for _, x in entries], dtype=float)
                out[sink] = (paths, w / w.sum())
            self._groups[source] = out
        return self._groups[source]

    def demand_residuals(self) -> dict[tuple[int, int], float]:
        """|net inflow at sink - demand| per commodity pair."""
        res = {}
        for (s, t), d in self.demands.items():
            fa = self.source_flows[s]
            got = fa.arcs.get((t, SNK), 0.0)
            res[(s, t)] = abs(got - d)
        return res


def solve_cmcf_min_congestion(g: CapacitatedGraph, demands: DemandMatrix | dict,
                              restrict: set[int] | None = None,
                              method: str | None = None) -> CMCFSolution:
    """Solve min-congestion routing of `demands` inside G[restrict].

    Returns per-source cycle-free flows. Infeasibility is impossible on a
    connected restriction; a disconnected restriction is rejected up front.
    """
    entries = demands.entries if isinstance(demands, DemandMatrix) else dict(demands)
    verts = sorted(restrict) if restrict is not None else list(range(g.n))
    vset = set(verts)
    for (s, t) in entries:
        if s not in vset or t not in vset:
            raise ValueError(f"demand pair ({s},{t}) lies outside the vertex restriction")
    entries = {p: float(d) for p, d in entries.items() if d > 0}
    if not entries:
        return CMCFSolution(vertices=verts, demands={}, source_flows={},
                            edge_loads={}, congestion=0.0, lp_objective=0.0)

    edge_ids = g.edges_inside(vset)
    edges = [(g.edges[i][0], g.edges[i][1], g.edges[i][2]) for i in edge_ids]
    if not _restriction_connected(verts, edges):
        raise ValueError("vertex restriction induces a disconnected subgraph")
    msub = len(edges)
    arcs = [(u, v) for u, v, _ in edges] + [(v, u) for u, v, _ in edges]
    n_arcs = len(arcs)
    vidx = {v: i for i, v in enumerate(verts)}
    nv = len(verts)
    caps = np.array([c for _, _, c in edges], dtype=float)

    sources = sorted({s for (s, _) in entries})
    n_src = len(sources)
    nvar = n_src * n_arcs + 1
    lam = nvar - 1

    tail = np.array([vidx[a[0]] for a in arcs])
    head = np.array([vidx[a[1]] for a in arcs])
    arange = np.arange(n_arcs)

    rows, cols, vals, b_parts = [], [], [], []
    for si, s in enumerate(sources):
        base = si * n_arcs
        row0 = si * nv
        rows.append(row0 + tail)
        cols.append(base + arange)
        vals.append(np.ones(n_arcs))
        rows.append(row0 + head)
        cols.append(base + arange)
        vals.append(-np.ones(n_arcs))
        b = np.zeros(nv)
        for (a, t), d in entries.items():
            if a == s:
                b[vidx[t]] -= d
                b[vidx[s]] += d
        b_parts.append(b)
    A_eq = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_src * nv, nvar)).tocsr()
    b_eq = np.concatenate(b_parts)

    rows, cols, vals = [], [], []
    erange = np.arange(msub)
    for si in range(n_src):
        base = si * n_arcs
        rows.append(erange)
        cols.append(base + erange)
        vals.append(np.ones(msub))
        rows.append(erange)
        cols.append(base + msub + erange)
        vals.append(np.ones(msub))
    rows.append(erange)
    cols.append(np.full(msub, lam))
    vals.append(-caps)
    A_ub = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(msub, nvar)).tocsr()

    cost = np.zeros(nvar)
    cost[lam] = 1.0
    if method is None:
        method = "highs" if nvar <= _IPM_THRESHOLD else "highs-ipm"
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(msub), A_eq=A_eq, b_eq=b_eq,
                  bounds=(0, None), method=method)
    if res.status != 0:
        raise RuntimeError(f"LP solver failed (status {res.status}): {res.message}")

    x = res.x
    source_flows: dict[int, FlowAssignment] = {}
    for si, s in enumerate(sources):
        base = si * n_arcs
        fa_arcs: dict[tuple[int, int], float] = {}
        for k, (a, b) in enumerate(arcs):
            f = x[base + k]
            if f > 1e-11:
                fa_arcs[(a, b)] = f
        total = 0.0
        for (a, t), d in entries.items():
            if a == s:
                fa_arcs[(t, SNK)] = fa_arcs.get((t, SNK), 0.0) + d
                total += d
        fa_arcs[(SRC, s)] = total
        fa = FlowAssignment(arcs=fa_arcs, source=SRC, sink=SNK, value=total)
        source_flows[s] = cancel_cycles(fa, eps=1e-12)

    loads: dict[tuple[int, int], float] = {}
    for fa in source_flows.values():
        for (a, b), f in fa.arcs.items():
            if a < 0 or b < 0:
                continue
            key = (a, b) if a < b else (b, a)
            loads[key] = loads.get(key, 0.0) + f
    congestion = 0.0
    for (u, v, c) in edges:
        congestion = max(congestion, loads.get((u, v), 0.0) / c)

    sol = CMCFSolution(vertices=verts, demands=entries, source_flows=source_flows,
                       edge_loads=loads, congestion=congestion, lp_objective=float(res.fun))
    bad = {p: r for p, r in sol.demand_residuals().items() if r > 1e-6 * max(1.0, entries[p])}
    if bad:
        raise RuntimeError(f"solver returned flows violating demands: {bad}")
    return sol


def _restriction_connected(verts: list[int], edges: list[tuple[int, int, int]]) -> bool:
    if len(verts) <= 1:
        return True
    adj: dict[int, list[int]] = {v: [] for v in verts}
    for u, v, _ in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {verts[0]}
    stack = [verts[0]]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(verts)


# ---------------------------------------------------------------------------
# randomized rounding
# ---------------------------------------------------------------------------

@dataclass
class RoundedPaths:
    """One sampled path per unit commodity, with load bookkeeping."""

    paths: dict[tuple[int, int], list[list[int]]]
    edge_loads: dict[tuple[int, int], int]
    frac_loads: dict[tuple[int, int], float]
    mu: float                                   # max fractional edge load
    max_load: int
    load_variance: dict[tuple[int, int], float]  # sum of Bernoulli variances per edge


def round_paths(sol: CMCFSolution, rng: np.random.Generator) -> RoundedPaths:
    """Sample one path per unit commodity, proportional to its flow decomposition.

    Each demand must be a positive integer: a demand of k is k parallel unit
    commodities sharing the scaled pair flow. Expected rounded load per edge
    equals the fractional load exactly.
    """
    frac: dict[tuple[int, int], float] = {}
    variance: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    chosen: dict[tuple[int, int], list[list[int]]] = {}

    for (s, t), d in sorted(sol.demands.items()):
        k = round(d)
        if abs(d - k) > 1e-6 or k < 1:
            raise ValueError(f"commodity ({s},{t}) must ship an integral number of "
                             f"unit flows, got demand {d}")
        paths, probs = sol.path_groups(s)[t]
        edge_prob: dict[tuple[int, int], float] = {}
        for path, p in zip(paths, probs):
            for a, b in zip(path, path[1:]):
                key = (a, b) if a < b else (b, a)
                edge_prob[key] = edge_prob.get(key, 0.0) + p
        for key, p in edge_prob.items():
            frac[key] = frac.get(key, 0.0) + k * p
            variance[key] = variance.get(key, 0.0) + k * p * (1.0 - p)
        cum = np.cumsum(probs)
        draws = np.searchsorted(cum, rng.random(k), side="right")
        draws = np.minimum(draws, len(paths) - 1)
        picked = [paths[i] for i in draws]
        chosen[(s, t)] = picked
        for path in picked:
            for a, b in zip(path, path[1:]):
                key = (a, b) if a < b else (b, a)
                counts[key] = counts.get(key, 0) + 1

    return RoundedPaths(paths=chosen,
                        edge_loads=counts,
                        frac_loads=frac,
                        mu=max(frac.values(), default=0.0),
                        max_load=max(counts.values(), default=0),
                        load_variance=variance)
