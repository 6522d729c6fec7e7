"""Compare the numba kernels against the pure-numpy fallback.

Runs ``daxlab bench`` once per hidden size; each run spawns two fresh
interpreters (one with DAXLAB_DISABLE_NUMBA=1) so both backends start
cold.

    python3 benchmarks/compare_backends.py --sizes 25 50 100 --presentations 200
"""

import argparse
import subprocess
import sys


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100])
    parser.add_argument("--presentations", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    for hidden in args.sizes:
        print(f"== hidden={hidden} presentations={args.presentations} ==", flush=True)
        rc = subprocess.call(
            [
                sys.executable, "-m", "daxlab", "bench",
                "--hidden", str(hidden),
                "--presentations", str(args.presentations),
                "--seed", str(args.seed),
            ]
        )
        if rc != 0:
            return rc
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
