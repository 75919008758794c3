"""Compare the compiled and pure-Python kernels on both hot paths.

    python benchmarks/bench_backends.py --n 1000 --n 100000 --repeat 3

Prints best-of-``repeat`` seconds per backend and the speedup of the
compiled kernels.
"""

import argparse
import sys

from adhesion1d import _kernels
from adhesion1d.bench import time_evolve, time_proj_k


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, action="append", help="problem size (repeatable)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    ns = args.n or [10 ** 3, 10 ** 4, 10 ** 5]
    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`",
              file=sys.stderr)
    print("op,n," + ",".join(backends) + ",speedup")
    for op in ("proj_k", "evolve"):
        for n in ns:
            best = {}
            for b in backends:
                runs = []
                for _ in range(args.repeat):
                    if op == "proj_k":
                        runs.append(time_proj_k(n, args.seed, b))
                    else:
                        runs.append(time_evolve(n, args.seed, b)[0])
                best[b] = min(runs)
            speed = (f"{best['python'] / best['cython']:.1f}"
                     if {"python", "cython"} <= best.keys() else "")
            print(f"{op},{n}," + ",".join(f"{best[b]:.6f}" for b in backends) + f",{speed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
