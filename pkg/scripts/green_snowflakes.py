"""Green-deviation integral against linear deviation on Koch snowflake
iterates, repeated over several seeds to show the Monte Carlo spread."""
import argparse

from corona_tst.beta import BetaParams
from corona_tst.cubes import build_lattice
from corona_tst.domains import koch_snowflake
from corona_tst.green import GreenParams, compare_green_beta
from corona_tst.harmonic import WosConfig


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--walkers", type=int, default=1000)
    ap.add_argument("--resolution", type=float, default=1 / 256)
    ap.add_argument("--N", type=float, default=2.0)
    args = ap.parse_args()
    gp = GreenParams(N=args.N, resolution=args.resolution, beta=BetaParams(bilateral=False))
    lattices = {}
    for j in (1, 2, 3):
        dom = koch_snowflake(j)
        lattices[j] = (dom, build_lattice(dom.boundary_samples(2e-3), 0.5, 5, measure_constants=False))
    print("seed,iterate,lhs,rhs,ratio,integral,clamped_mass,cells")
    for seed in args.seeds:
        cfg = WosConfig(walkers=args.walkers, shell=1e-5, base_seed=seed)
        for j, (dom, lat) in lattices.items():
            rep = compare_green_beta(dom, lat, [0.0, 0.0], gp, cfg)
            I = rep.integral
            print(f"{seed},{j},{rep.lhs:.4f},{rep.rhs:.4f},{rep.ratio:.4f},{I.value:.4f},"
                  f"{I.clamped_mass:.3f},{I.cells}", flush=True)


if __name__ == "__main__":
    main()
