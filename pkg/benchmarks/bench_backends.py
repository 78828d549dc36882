"""Compare the compiled and pure-Python LSTM kernels.

    python3 benchmarks/bench_backends.py [--n 4032] [--repeats 200] [--json out.json]
"""

import argparse
import json

from rere import bench


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4032, help="points in the engine run")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=200, help="single-window trainings to time")
    p.add_argument("--json", help="also write the raw numbers here")
    args = p.parse_args()
    result = bench.run(args.n, args.seed, repeats=args.repeats)
    print(bench.render(result))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2, default=vars)


if __name__ == "__main__":
    main()
