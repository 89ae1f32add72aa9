"""Path selection and load estimation across all three hop backends."""
import numpy as np
import pytest

from helpers import cycle_graph, single_edge
from obroute.decomposition import build_tree, certify_congestion, tree_from_spec
from obroute.graph import DemandMatrix
from obroute.impl_a import build_flow_tables
from obroute.impl_b import build_cube_scheme
from obroute.optimum import competitive_ratio, optimal_congestion
from obroute.routing import (FlowTableBackend, HypercubeBackend, LoadReport,
                             ReferenceBackend, congestion, route_demands,
                             select_path)


def _backends(g, tree, cert):
    ref = ReferenceBackend(g, tree, cert.solutions)
    tab = FlowTableBackend(build_flow_tables(g, tree, cert.int_value))
    out = {"reference": ref, "tables": tab}
    if g.uniform_capacities():
        scheme = build_cube_scheme(g, tree, cert.int_value, np.random.default_rng(13))
        out["cubes"] = HypercubeBackend(scheme)
    return out


@pytest.fixture(scope="module")
def k2():
    g = single_edge()
    tree = tree_from_spec(g, [0, 1])
    cert = certify_congestion(g, tree, store_solutions=True)
    return g, tree, cert, _backends(g, tree, cert)


@pytest.fixture(scope="module")
def four_cycle():
    g = cycle_graph(4)
    tree = tree_from_spec(g, [[0, 1], [2, 3]])
    cert = certify_congestion(g, tree, store_solutions=True)
    return g, tree, cert, _backends(g, tree, cert)


def test_select_path_same_endpoints(four_cycle):
    g, tree, cert, backends = four_cycle
    for backend in backends.values():
        assert select_path(2, 2, tree, backend, np.random.default_rng(0)) == []


def test_single_edge_route_is_the_edge(k2):
    g, tree, cert, backends = k2
    for name, backend in backends.items():
        rng = np.random.default_rng(3)
        for _ in range(20):
            path = select_path(0, 1, tree, backend, rng)
            # every intermediate law is supported on {0,1}; the only way to end
            # at 1 is to finish crossing the lone edge
            assert path[0] == 0 and path[-1] == 1
            assert all(g.has_edge(a, b) for a, b in zip(path, path[1:])), name


class _CountingBackend:
    def __init__(self, inner):
        self.inner = inner
        self.ups = 0
        self.downs = 0

    def route_up(self, child_id, v, rng):
        self.ups += 1
        return self.inner.route_up(child_id, v, rng)

    def route_down(self, parent_id, child_index, v, rng):
        self.downs += 1
        return self.inner.route_down(parent_id, child_index, v, rng)


def test_tree_hop_counts(four_cycle):
    # hops per direction = tree height + 1 - shared prefix of the leaf paths:
    # same level-1 cluster shares depth 2, opposite clusters only the root
    g, tree, cert, backends = four_cycle
    for s, t, expect in [(0, 1, 1), (0, 2, 2), (3, 0, 2)]:
        counter = _CountingBackend(backends["reference"])
        select_path(s, t, tree, counter, np.random.default_rng(1))
        assert (counter.ups, counter.downs) == (expect, expect)


def test_single_edge_exact_loads(k2):
    g, tree, cert, backends = k2
    for name in ("reference", "tables"):
        report = route_demands(g, tree, backends[name], {(0, 1): 3.0},
                               samples=5, seed=11)
        # the only path crosses the edge exactly once: load is exact at any
        # sample count and the estimator spread collapses to zero
        assert report.edge_loads[(0, 1)] == pytest.approx(3.0, abs=1e-12)
        assert report.edge_stderr[(0, 1)] == pytest.approx(0.0, abs=1e-12)
        assert report.congestion == pytest.approx(3.0)
        assert competitive_ratio(report.congestion,
                                 optimal_congestion(g, {(0, 1): 3.0})) == pytest.approx(1.0)


def test_single_edge_cube_backend_expectation(k2):
    # cube hops may bounce: rerandomizing in the root costs Ham(0,z)+Ham(z,T)
    # crossings with z,T uniform bits (mean 1), the descent to t's range node
    # costs another mean 1, so the expected load for demand 3 is 3*2 = 6
    g, tree, cert, backends = k2
    report = route_demands(g, tree, backends["cubes"], {(0, 1): 3.0},
                           samples=40_000, seed=2)
    assert report.edge_loads[(0, 1)] == pytest.approx(6.0, abs=0.15)


def test_zero_demands(four_cycle):
    g, tree, cert, backends = four_cycle
    report = route_demands(g, tree, backends["reference"], {}, samples=3, seed=0)
    assert report.edge_loads == {} and report.congestion == 0.0
    report = route_demands(g, tree, backends["reference"], {(0, 2): 0.0},
                           samples=3, seed=0)
    assert report.edge_loads == {}


def test_scaling_linearity(four_cycle):
    g, tree, cert, backends = four_cycle
    base = {(0, 2): 1.0, (1, 3): 2.0}
    doubled = {p: 2 * d for p, d in base.items()}
    for backend in backends.values():
        r1 = route_demands(g, tree, backend, base, samples=50, seed=9)
        r2 = route_demands(g, tree, backend, doubled, samples=50, seed=9)
        assert set(r1.edge_loads) == set(r2.edge_loads)
        for key, load in r1.edge_loads.items():
            assert r2.edge_loads[key] == pytest.approx(2 * load, rel=1e-12)


def test_route_demands_validates_pairs(four_cycle):
    g, tree, cert, backends = four_cycle
    with pytest.raises(ValueError, match="out of vertex range"):
        route_demands(g, tree, backends["reference"], {(0, 9): 1.0})
    with pytest.raises(ValueError, match="at least one sample"):
        route_demands(g, tree, backends["reference"], {(0, 1): 1.0}, samples=0)


def test_route_demands_accepts_demand_matrix(four_cycle):
    g, tree, cert, backends = four_cycle
    dm = DemandMatrix({(0, 2): 1.0})
    r1 = route_demands(g, tree, backends["reference"], dm, samples=20, seed=4)
    r2 = route_demands(g, tree, backends["reference"], {(0, 2): 1.0},
                       samples=20, seed=4)
    assert r1.edge_loads == r2.edge_loads


def test_reproducible_per_seed(four_cycle):
    g, tree, cert, backends = four_cycle
    d = {(0, 2): 1.0, (2, 0): 1.0, (1, 3): 1.0}
    for backend in backends.values():
        r1 = route_demands(g, tree, backend, d, samples=30, seed=7)
        r2 = route_demands(g, tree, backend, d, samples=30, seed=7)
        r3 = route_demands(g, tree, backend, d, samples=30, seed=8)
        assert r1.edge_loads == r2.edge_loads
        assert r1.edge_loads != r3.edge_loads


def test_congestion_helper():
    report = LoadReport(edge_loads={(0, 1): 2.0, (1, 2): 1.0},
                        edge_stderr={}, edge_caps={(0, 1): 1, (1, 2): 2},
                        congestion=2.0, samples=1, seed=0)
    assert congestion(report) == 2.0
    empty = LoadReport(edge_loads={}, edge_stderr={}, edge_caps={(0, 1): 1},
                       congestion=0.0, samples=1, seed=0)
    assert congestion(empty) == 0.0


def test_congestion_uses_capacities():
    g = single_edge(cap=5)
    tree = tree_from_spec(g, [0, 1])
    cert = certify_congestion(g, tree, store_solutions=True)
    backend = ReferenceBackend(g, tree, cert.solutions)
    report = route_demands(g, tree, backend, {(0, 1): 3.0}, samples=4, seed=0)
    assert report.congestion == pytest.approx(0.6)
    assert congestion(report) == pytest.approx(report.congestion)


def test_expected_load_bound_four_cycle(four_cycle):
    # derangement demand; each backend carries its own guarantee factor:
    # 2hC for the reference hops, times tree degree for the table walks,
    # 16*h*d^2*C for the cube walks (d = largest main-cube dimension, 3 here)
    g, tree, cert, backends = four_cycle
    demand = {(0, 2): 1.0, (1, 3): 1.0, (2, 0): 1.0, (3, 1): 1.0}
    c_opt = optimal_congestion(g, demand)
    h, c = tree.height, cert.int_value
    bounds = {"reference": 2 * h * c * c_opt,
              "tables": 2 * h * tree.degree * c * c_opt,
              "cubes": 16 * h * 3 ** 2 * c * c_opt}
    for name, backend in backends.items():
        report = route_demands(g, tree, backend, demand, samples=3000, seed=5)
        slack = 3 * max(report.edge_stderr.values(), default=0.0)
        assert report.congestion <= bounds[name] + slack, name


def test_report_json_stable(four_cycle):
    g, tree, cert, backends = four_cycle
    report = route_demands(g, tree, backends["reference"], {(0, 2): 1.0},
                           samples=10, seed=1)
    blob = report.to_json()
    assert blob == report.to_json()
    import json
    parsed = json.loads(blob)
    assert parsed["congestion"] == pytest.approx(report.congestion)
    assert len(parsed["edges"]) == g.m
