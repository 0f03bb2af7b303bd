"""Run the acceptance suite and write the results table as JSON.

    python scripts/run_acceptance.py --only 1 2 3 --out results.json
"""
import argparse
from pathlib import Path

from corona_tst.acceptance import CRITERIA, run_suite


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--suite", choices=["trivial", "acceptance", "all"], default="acceptance")
    ap.add_argument("--only", type=int, nargs="*", choices=sorted(CRITERIA))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    results = run_suite(args.suite, args.seed, args.threads, args.only, args.out)
    for r in results:
        print(r.line())


if __name__ == "__main__":
    main()
