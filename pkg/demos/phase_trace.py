"""Watch the solver move through its two linear-algebra phases.

Solves an image-style grid instance and prints, per iteration, the
barrier parameter, the live support size, which solver handled the
Newton system, and how much factor fill it produced. The switch from
PCG + incomplete Cholesky to the exact LDL^T factorization fires once
the column-generation support starts collapsing toward a basis.

Run:  python demos/phase_trace.py [res]
"""

import sys

from otkit import instance as im, ipm


def main():
    res = int(sys.argv[1]) if len(sys.argv) > 1 else 16
    inst = im.make_synthetic_instance(res, "gaussian-blob", seed=0, metric="L2")
    print(f"grid {res}x{res}: {inst.m} sources, {inst.n} sinks, "
          f"{inst.m * inst.n} variables\n")

    _, _, rep = ipm.solve(inst)

    print(f"{'it':>4} {'phase':<10} {'support':>8} {'mu':>10} "
          f"{'cg':>4} {'fill%':>6}")
    for row in rep.phase_log:
        print(f"{row['iter']:>4} {row['phase']:<10} {row['support']:>8} "
              f"{row['mu']:>10.2e} {row['cg_iters']:>4} {row['fill_pct']:>6.2f}")

    print(f"\nstatus {rep.status}, W2 = {rep.wasserstein:.8f}, "
          f"{rep.switch_count} phase switch(es), "
          f"direct phase {rep.direct_phase_iters}/{rep.ipm_iters} iterations")


if __name__ == "__main__":
    main()
