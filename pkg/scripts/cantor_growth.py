"""Linear deviation and log-integral of the four-corner Cantor iterates K_j.

Prints one row per j; the deviation should grow linearly in j.
"""
import argparse

from corona_tst.acceptance import cantor_lattice, cantor_log_integral
from corona_tst.beta import BetaParams, linear_deviation


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--jmax", type=int, default=4)
    ap.add_argument("--walkers", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    print("j,cubes,linear_deviation,log_integral,flagged_mass")
    for j in range(1, args.jmax + 1):
        S, _, lat = cantor_lattice(j)
        dev = linear_deviation(lat, S, (0, 0), params=BetaParams(bilateral=False, threads=args.threads))
        li = cantor_log_integral(j, args.walkers, args.seed, args.threads)
        print(f"{j},{len(lat)},{dev.total:.6f},{li.value:.6f},{li.flagged_mass:.4f}", flush=True)


if __name__ == "__main__":
    main()
