"""Why the endgame factorizations stay sparse.

The normal-equations Schur complement has the sparsity pattern of
V V^T: two sources are coupled whenever they ship to a common sink. For
an optimal basic plan the support is a forest, every long cycle in it
has a chord, and the coupled graph is chordal, so a maximum cardinality
search ordering factors it with zero fill-in. This script builds the
chain on a random instance and verifies each link, then shows the
counter-example: a chordless 8-cycle support whose coupled graph is a
4-cycle, which no ordering can factor without fill.

Run:  python demos/chordality_tour.py
"""

import numpy as np

from otkit import graphcheck as gc
from otkit import instance as im, oracle


def main():
    rng = np.random.default_rng(3)
    m, n = 7, 7
    a = rng.random(m) + 0.1
    b = rng.random(n) + 0.1
    b *= a.sum() / b.sum()
    inst = im.OTInstance(a=a, b=b, cost=im.Explicit(rng.random((m, n))))

    ref = oracle.reference_solve(inst)
    g = gc.BipartiteGraph.from_biadjacency((ref.plan > 0).astype(int))
    print(f"optimal plan support: {len(g.edges)} edges on {m}+{n} nodes "
          f"(a spanning forest has at most {m + n - 1})")

    long_cycle, _ = gc.has_chordless_cycle_ge8(g)
    print(f"chordless cycle of length >= 8 in the support: {long_cycle}")

    sg = gc.secondary_graph(g)
    chordal, peo = gc.is_chordal(sg)
    print(f"source-coupling graph: {len(sg.edges)} edges, chordal: {chordal}")
    print(f"elimination order (MCS): {peo}")
    print(f"zero fill-in under that order: {gc.zero_fill_verify(sg, peo)}")

    print("\n-- counter-example --")
    eight = gc.BipartiteGraph(4, 4, (
        (0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (0, 3)))
    long_cycle, witness = gc.has_chordless_cycle_ge8(eight)
    print(f"8-cycle support, chordless cycle found: {long_cycle} ({witness})")
    chordal, hole = gc.is_chordal(gc.secondary_graph(eight))
    print(f"its coupling graph is chordal: {chordal} "
          f"(chordless cycle witness: {hole})")


if __name__ == "__main__":
    main()
