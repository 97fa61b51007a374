"""
Which tree in a forest matters
==============================

Independent trees share a horizon. The chance that some tree has all of its
branches above u is carried, for large u, by the trees that are largest in the
order on (mu_0/P, x - cT, -P).
"""

from bdtree import ForestSpec, MCConfig, compare, forest_asym, maximal_set, simulate_forest_event
from bdtree.forest import OrderKey

forest = ForestSpec.from_dict(
    {
        "T": 3,
        "trees": [
            {"tau": [], "N": []},
            {"tau": [1, 2], "N": [2, 2]},
            {"tau": [1.5], "N": [3]},
        ],
    }
)

for i, t in enumerate(forest.trees):
    k = OrderKey.of(t)
    print(f"tree {i}: P={t.n_branches}  mu0/P={k.ratio}  x-cT={k.level}")
print("tree 0 vs tree 1:", compare(forest.trees[0], forest.trees[1]).value)

A = maximal_set(forest)
print("maximal set:", A)

# the maximal tree never branches, so its constant is 2
for u in (2.0, 3.0, 4.0):
    mc = simulate_forest_event(forest, u, MCConfig(n=100_000, seed=4))
    a = forest_asym(u, forest, {i: 2.0 for i in A}).value
    print(f"u={u:g}: MC {mc.p:.4e} +- {mc.stderr:.1e}   asym {a:.4e}   ratio {mc.p / a:.3f}")
