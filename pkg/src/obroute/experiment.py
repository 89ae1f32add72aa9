"""Experiment harness: flat-file configs, demand batteries, end-to-end runs.

A run builds the cluster tree and its congestion certificate once, then for
every requested scheme builds the backend, routes the demand battery, and
writes three artifacts per scheme directory:

  report.json  congestion, optimum, ratio, tree and table statistics
  loads.csv    per-edge expected load and standard error
  tables.csv   per-vertex table bits (zero for the non-compact reference)

All randomness derives from the single master seed: the tree build uses it
directly, the demand battery and cube builds use fixed substreams, and every
(s, t) pair samples on its own (seed, s, t) stream. Identical configs thus
reproduce identical reports except for the timestamp line.
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from obroute.decomposition import (DecompositionTree, audit_tree, build_tree,
                                   certify_congestion)
from obroute.graph import (CapacitatedGraph, DemandMatrix, graph_stats,
                           grid_graph, hypercube_graph, parse_graph,
                           random_regular_graph, torus_graph)
from obroute.impl_a import (build_flow_tables, header_bit_length,
                            label_bit_length, measure_table_bits_a)
from obroute.impl_b import audit_cube_scheme, build_cube_scheme, measure_table_bits_b
from obroute.optimum import competitive_ratio, optimal_congestion
from obroute.routing import (FlowTableBackend, HypercubeBackend,
                             ReferenceBackend, route_demands)

__all__ = ["parse_config", "load_config", "graph_from_config", "demand_battery",
           "run_experiment", "SCHEMES"]

SCHEMES = ("reference", "impl-a", "impl-b")

_CONFIG_KEYS = {"graph", "generate", "schemes", "demands", "samples", "seed",
                "arity", "out_dir", "assert_audit", "assert_bounds"}
_DEFAULTS = {"schemes": "reference", "demands": "permutation", "samples": "1000",
             "seed": "0", "arity": "2", "assert_audit": "on", "assert_bounds": "on"}

# substream tags so the battery and the cube builds never share a stream
_BATTERY_STREAM = 1
_CUBE_STREAM = 2


def parse_config(text: str) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment."""
    cfg = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        cfg[key] = value
    return cfg


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def _generated_graph(spec: str) -> CapacitatedGraph:
    kind, _, arg = spec.partition(":")
    try:
        if kind == "grid":
            dims, _, caps = arg.partition(":")
            rows, cols = (int(x) for x in dims.split("x"))
            if caps:
                lo, hi = (int(x) for x in caps.split("-"))
                return grid_graph(rows, cols, cap_range=(lo, hi), seed=0)
            return grid_graph(rows, cols)
        if kind == "torus":
            rows, cols = (int(x) for x in arg.split("x"))
            return torus_graph(rows, cols)
        if kind == "hypercube":
            return hypercube_graph(int(arg))
        if kind == "random_regular":
            fields = [int(x) for x in arg.split(",")]
            n, deg = fields[0], fields[1]
            seed = fields[2] if len(fields) > 2 else 0
            return random_regular_graph(n, deg, seed)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"bad generator spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown generator kind {kind!r} "
                     "(grid, torus, hypercube, random_regular)")


def graph_from_config(cfg: dict[str, str]) -> CapacitatedGraph:
    if ("graph" in cfg) == ("generate" in cfg):
        raise ValueError("config needs exactly one of 'graph' (file) or 'generate'")
    if "graph" in cfg:
        return parse_graph(Path(cfg["graph"]).read_text())
    return _generated_graph(cfg["generate"])


def demand_battery(kind: str, g: CapacitatedGraph, seed: int) -> DemandMatrix:
    """Deterministic demand sets; approximates a worst case by variety, not search."""
    name, _, arg = kind.partition(":")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _BATTERY_STREAM)))
    if name == "permutation":
        if g.n < 2:
            return DemandMatrix({})
        perm = rng.permutation(g.n)
        while any(perm[i] == i for i in range(g.n)):
            perm = rng.permutation(g.n)
        return DemandMatrix({(i, int(perm[i])): 1.0 for i in range(g.n)})
    if name == "uniform_pairs":
        k = int(arg) if arg else 0
        total = g.n * (g.n - 1)
        if k > total:
            raise ValueError(f"asked for {k} distinct pairs, only {total} exist")
        picks = rng.choice(total, size=k, replace=False)
        entries = {}
        for idx in sorted(int(i) for i in picks):
            s, r = divmod(idx, g.n - 1)
            entries[(s, r if r < s else r + 1)] = 1.0
        return DemandMatrix(entries)
    if name == "gravity":
        return DemandMatrix({(u, v): float(g.degree(u) * g.degree(v))
                             for u in range(g.n) for v in range(u + 1, g.n)
                             if g.degree(u) and g.degree(v)})
    if name == "file":
        entries = {}
        for lineno, raw in enumerate(Path(arg).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ValueError(f"demand file line {lineno}: expected 's t d'")
            entries[(int(fields[0]), int(fields[1]))] = float(fields[2])
        return DemandMatrix(entries)
    raise ValueError(f"unknown demand battery {name!r} "
                     "(permutation, uniform_pairs:k, gravity, file:path)")


def _build_backend(scheme: str, g: CapacitatedGraph, tree: DecompositionTree,
                   cert, seed: int):
    """Returns (backend, per-vertex bits, label bits, header bits, events, audits)."""
    if scheme == "reference":
        return ReferenceBackend(g, tree, cert.solutions), None, None, None, [], []
    if scheme == "impl-a":
        tables = build_flow_tables(g, tree, cert.int_value)
        bits = measure_table_bits_a(tables)
        return (FlowTableBackend(tables), bits.per_vertex, label_bit_length(tree),
                header_bit_length(tree), list(tables.events), [])
    if scheme == "impl-b":
        rng = np.random.default_rng(np.random.SeedSequence((seed, _CUBE_STREAM)))
        cubes = build_cube_scheme(g, tree, cert.int_value, rng)
        bits = measure_table_bits_b(cubes)
        return (HypercubeBackend(cubes), bits.per_vertex, label_bit_length(tree),
                header_bit_length(tree), [], audit_cube_scheme(cubes))
    raise ValueError(f"unknown scheme {scheme!r}, expected one of {', '.join(SCHEMES)}")


def _guarantee_factor(scheme: str, tree: DecompositionTree, backend) -> float:
    """Per-scheme expected-load guarantee, as a multiple of C_cert * C_opt."""
    h = tree.height
    if scheme == "reference":
        return 2.0 * h
    if scheme == "impl-a":
        return 2.0 * h * tree.degree
    d = max((m.dimension for m in backend.scheme.mains.values()), default=1)
    return 16.0 * h * d * d


def _write_csvs(out: Path, report, table_bits, n: int) -> None:
    rows = ["u,v,cap,load,stderr"]
    for (u, v) in sorted(report.edge_caps):
        rows.append(f"{u},{v},{report.edge_caps[(u, v)]},"
                    f"{report.edge_loads.get((u, v), 0.0):.9g},"
                    f"{report.edge_stderr.get((u, v), 0.0):.9g}")
    (out / "loads.csv").write_text("\n".join(rows) + "\n")
    rows = ["vertex,bits"]
    for v in range(n):
        rows.append(f"{v},{table_bits.get(v, 0) if table_bits else 0}")
    (out / "tables.csv").write_text("\n".join(rows) + "\n")


def run_experiment(cfg: dict[str, str],
                   out_dir: str | Path | None = None) -> tuple[int, list[str]]:
    """Full run per the config; returns (exit code, assertion failures)."""
    g = graph_from_config(cfg)
    seed = int(cfg["seed"])
    samples = int(cfg["samples"])
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    schemes = [s.strip() for s in cfg["schemes"].split(",") if s.strip()]
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}, expected one of "
                             f"{', '.join(SCHEMES)}")
    out = Path(out_dir if out_dir is not None else cfg.get("out_dir", "runs"))

    tree = build_tree(g, target_arity=int(cfg["arity"]), seed=seed)
    cert = certify_congestion(g, tree, store_solutions=True)
    demands = demand_battery(cfg["demands"], g, seed)
    c_opt = optimal_congestion(g, demands) if demands.entries else 0.0

    failures: list[str] = []
    if cfg["assert_audit"] == "on":
        failures += [f"tree audit: {msg}" for msg in audit_tree(g, tree)]

    for scheme in schemes:
        backend, bits, label_bits, header_bits, events, audits = _build_backend(
            scheme, g, tree, cert, seed)
        if cfg["assert_audit"] == "on":
            failures += [f"{scheme} audit: {msg}" for msg in audits]
        report = route_demands(g, tree, backend, demands, samples=samples, seed=seed)
        report.scheme = scheme
        report.c_opt = c_opt
        report.ratio = competitive_ratio(report.congestion, c_opt)
        report.table_bits = bits
        report.label_bits = label_bits
        report.header_bits = header_bits

        if cfg["assert_bounds"] == "on" and demands.entries:
            bound = _guarantee_factor(scheme, tree, backend) * cert.int_value * c_opt
            slack = 3.0 * max(report.edge_stderr.values(), default=0.0)
            if report.congestion > bound + slack:
                failures.append(f"{scheme}: congestion {report.congestion:.6g} "
                                f"exceeds guarantee {bound:.6g}")

        payload = {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "scheme": scheme,
            "graph": graph_stats(g),
            "tree": {"height": tree.height, "degree": tree.degree,
                     "arity": int(cfg["arity"]), "seed": seed},
            "certificate": {"value": cert.value, "int_value": cert.int_value},
            "demands": cfg["demands"],
            "pairs": len(demands.entries),
            "samples": samples,
            "seed": seed,
            "congestion": report.congestion,
            "c_opt": c_opt,
            "ratio": report.ratio,
            "ratio_note": "measured against this demand battery only; the "
                          "worst case over all demand matrices can be larger",
            "label_bits": label_bits,
            "header_bits": header_bits,
            "max_table_bits": max(bits.values()) if bits else None,
            "total_table_bits": sum(bits.values()) if bits else None,
            "scale_events": events,
        }
        scheme_dir = out / scheme
        scheme_dir.mkdir(parents=True, exist_ok=True)
        (scheme_dir / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _write_csvs(scheme_dir, report, bits, g.n)

    return (0 if not failures else 1), failures
