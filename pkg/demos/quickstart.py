"""Minimal tour: build a small instance, solve it, check against the
exact transportation simplex.

Run:  python demos/quickstart.py
"""

import numpy as np

from otkit import instance as im, ipm, oracle


def main():
    rng = np.random.default_rng(7)
    m, n = 6, 8
    a = rng.random(m) + 0.1
    b = rng.random(n) + 0.1
    a /= a.sum()
    b /= b.sum()
    inst = im.OTInstance(a=a, b=b, cost=im.Explicit(rng.random((m, n))))

    plan, y, rep = ipm.solve(inst, ipm.SolverConfig(tol=1e-8))
    print(f"status      : {rep.status}")
    print(f"objective   : {rep.objective:.10f}")
    print(f"iterations  : {rep.ipm_iters} "
          f"({rep.iterative_phase_iters} iterative + {rep.direct_phase_iters} direct)")
    print(f"support     : peak {rep.peak_support_size}, final {rep.final_support_size} "
          f"(full problem has {m * n} variables)")

    ref = oracle.reference_solve(inst)
    err, _ = oracle.rwe(rep.objective, ref.objective)
    print(f"simplex ref : {ref.objective:.10f}  (relative error {err:.2e})")

    P = plan.toarray()
    print("\ntransport plan (entries above 1e-8):")
    for i, k in zip(*np.nonzero(P > 1e-8)):
        print(f"  source {i} -> sink {k}: {P[i, k]:.6f}")


if __name__ == "__main__":
    main()
