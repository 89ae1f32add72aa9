"""The hypercube scheme: cluster weights rounded into embedded cube ranges.

Scheme B (unit capacities only) gives every cluster two virtual hypercubes
embedded into the real graph: a main cube whose node ranges stand in for the
cluster's own border and each child's border, and a shuffle cube used to
re-randomize a packet's position after every hop. Routing between cube nodes
is two-phase bit fixing through a random intermediate, so each vertex only
stores its node ids and one real path per incident cube edge.
"""
import numpy as np

from obroute import build_cube_scheme, build_tree, certify_congestion, generate_graph
from obroute.impl_b import audit_cube_scheme, measure_table_bits_b, route_to_border_b

g = generate_graph("grid", rows=4, cols=4)
tree = build_tree(g, target_arity=2, seed=0)
cert = certify_congestion(g, tree)
scheme = build_cube_scheme(g, tree, cert.int_value, np.random.default_rng(7))
print(f"built cubes for {len(scheme.mains)} clusters at scale C = {cert.int_value}")

root = tree.cluster(tree.root)
sizes = scheme.rounded[root.id]
maps = scheme.mains[root.id]
print(f"\nroot main cube: dimension {maps.dimension}, {1 << maps.dimension} nodes")
print(f"  own border rounded to {sizes.own} node(s)")
for layout, rounded in enumerate(sizes.children, start=1):
    child = tree.cluster(root.children[sizes.layout_to_child[layout - 1] - 1])
    lo, hi = sizes.range_of(layout)
    print(f"  child {child.id} (out {child.total_border}) -> "
          f"{rounded} nodes, range [{lo}, {hi})")

print(f"  fractional embedding congestion {maps.fractional_congestion:.3f}")

issues = audit_cube_scheme(scheme)
print(f"\naudit: {len(issues)} issue(s)" + ("" if issues else
      " (ranges in [out, 2out], totals within 8w, shuffle counts exact)"))

rng = np.random.default_rng(3)
start = next(v for v in sorted(root.vertices) if root.cluster_weight[v] > 0)
path, end = route_to_border_b(scheme, root.id, 1, start, rng)
print(f"\ncube walk from vertex {start} toward the first child: "
      f"{len(path) - 1} edge(s), ends at {end}")

bits = measure_table_bits_b(scheme)
print(f"table sizes: max {max(bits.per_vertex.values())} bits per vertex, "
      f"total {sum(bits.per_vertex.values())} bits")
