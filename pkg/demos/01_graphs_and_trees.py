"""Build a capacitated graph, decompose it, and inspect the weight system.

Every scheme in this package starts from the same two objects: a graph with
integer edge capacities and a laminar cluster tree over its vertices. The
tree assigns each cluster a per-vertex weight w(v) (how much capacity the
child around v shows to the rest of the cluster) and a border weight out(v)
(how much capacity leaves the cluster at v). The identities printed below
are what the routing guarantees later lean on.
"""
from obroute import audit_tree, build_tree, generate_graph, graph_stats

g = generate_graph("grid", rows=4, cols=4)
stats = graph_stats(g)
print(f"graph: {stats['n']} vertices, {stats['m']} edges, max capacity {stats['W']}")

tree = build_tree(g, target_arity=2, seed=0)
print(f"tree: height {tree.height}, degree {tree.degree}, "
      f"{len(tree.clusters)} clusters\n")

root = tree.cluster(tree.root)
print(f"root cluster {root.id}: w(S) = {root.total_weight}, out(S) = "
      f"{root.total_border} (the root has no outside, so out is zero)")
for child_id in root.children:
    child = tree.cluster(child_id)
    print(f"  child {child.id}: {len(child.vertices)} vertices, "
          f"out(child) = {child.total_border}")

print("\nper-vertex weights at the root (w comes from the child borders):")
for v in sorted(root.vertices)[:8]:
    print(f"  vertex {v}: w = {root.cluster_weight[v]}, out = {root.border_weight[v]}")
print("  ...")

issues = audit_tree(g, tree)
print(f"\naudit: {len(issues)} issue(s)" + ("" if issues else " (all identities hold)"))
