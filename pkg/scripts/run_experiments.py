"""Run every CLI experiment at acceptance scale and tabulate the exit codes.

Usage: python3 scripts/run_experiments.py [--out-dir results] [--quick] [--workers W]

``--quick`` shrinks the sample sizes about tenfold for a smoke run.
"""

import argparse
import os
import subprocess
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))
CFG = os.path.join(HERE, "configs")

EXPERIMENTS = [
    ("drift-table", ["--k1", "-1", "--k2", "-0.5", "--n", "3"], []),
    ("dominance-test", ["--config", os.path.join(CFG, "dominance.cfg")], ["--n_paths", "10000"]),
    ("exit-times", ["--n_paths", "100000"], ["--n_paths", "10000"]),
    ("eigen-1d", [], []),
    ("eigen-1d", ["--config", os.path.join(CFG, "eigen_hyperbolic.cfg"), "--name", "eigen-1d-hyp"], []),
    ("eigen-3d", [], ["--cells", "48", "--coarse_cells", "24"]),
    ("mc-lambda1", ["--horizon", "0.8", "--n_paths", "100000"], ["--n_paths", "10000"]),
    ("mc-lambda1", ["--config", os.path.join(CFG, "quaternionic_lambda1.cfg"),
                    "--name", "mc-lambda1-quaternionic"], ["--n_paths", "10000"]),
    ("heat-compare", ["--config", os.path.join(CFG, "heat_compare.cfg")], ["--n_paths", "10000"]),
    ("volume-scaling", [], ["--n_samples", "200000"]),
    ("qv-check", [], ["--n_paths", "1000"]),
    ("lil-check", [], ["--n_paths", "1000"]),
    ("completeness-check", [], []),
    ("completeness-check", ["--instance", "constant", "--K0", "3", "--name", "completeness-constant"], []),
    ("barrier-probe", [], []),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    rows = []
    for sub, extra, quick in EXPERIMENTS:
        cmd = [sys.executable, "-m", "radialcomp.cli", sub, *extra, "--out-dir", args.out_dir]
        if args.quick:
            cmd += quick
        if args.workers:
            cmd += ["--workers", str(args.workers)]
        t0 = time.perf_counter()
        code = subprocess.run(cmd).returncode
        rows.append((sub, " ".join(extra + (quick if args.quick else [])), code,
                     time.perf_counter() - t0))
        print(f"{sub:20s} exit={code} ({rows[-1][3]:.1f}s)", flush=True)
    print("\nsubcommand            exit  seconds  arguments")
    for sub, extra, code, sec in rows:
        print(f"{sub:20s}  {code:4d}  {sec:7.1f}  {extra}")
    return 0 if all(r[2] in (0, 1) for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
