"""Grid study of the Heisenberg Dirichlet eigenvalue on the unit CC ball.

Usage: python3 scripts/eigen3d_convergence.py [--cells 24 32 48 64 96] [--pad 1.1]

Prints one line per grid (cells, unknowns, eigenvalue, seconds) and the
Richardson extrapolation from the two finest grids assuming second order.
"""

import argparse
import time

from radialcomp.pde1d import bessel_reference
from radialcomp.spectral3d import assemble_sub_laplacian, build_grid3d, smallest_dirichlet_eigenvalue


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, nargs="+", default=[24, 32, 48, 64, 96])
    ap.add_argument("--pad", type=float, default=1.1)
    ap.add_argument("--preconditioner", default="jacobi")
    args = ap.parse_args()
    values = []
    print("cells,unknowns,eigenvalue,seconds")
    for c in args.cells:
        t0 = time.perf_counter()
        op = assemble_sub_laplacian(build_grid3d(1.0, c, args.pad))
        est = smallest_dirichlet_eigenvalue(op, preconditioner=args.preconditioner)
        values.append(est.value)
        print(f"{c},{op.dimension},{est.value!r},{time.perf_counter() - t0:.1f}", flush=True)
    if len(values) >= 2:
        r = args.cells[-1] / args.cells[-2]
        extrap = values[-1] + (values[-1] - values[-2]) / (r * r - 1)
        print(f"# richardson estimate {extrap:.5f}; model bound {bessel_reference(5, 1.0).value:.5f}")


if __name__ == "__main__":
    main()
