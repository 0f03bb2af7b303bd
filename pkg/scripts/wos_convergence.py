"""Walk-on-Spheres error against the Poisson kernel on the unit disk as the
walker count doubles."""
import argparse
import math

from scipy.integrate import quad

from corona_tst.domains import ball_domain
from corona_tst.geometry import Ball
from corona_tst.harmonic import WosConfig, wos_measure


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--pole", type=float, nargs=2, default=[0.3, 0.2])
    ap.add_argument("--half-angle", type=float, default=0.5)
    ap.add_argument("--start", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=7)
    args = ap.parse_args()
    z = complex(*args.pole)
    phi = args.half_angle
    truth = quad(lambda t: (1 - abs(z) ** 2) / abs(complex(math.cos(t), math.sin(t)) - z) ** 2 / (2 * math.pi),
                 -phi, phi)[0]
    arc = Ball([1.0, 0.0], 2 * math.sin(phi / 2))
    print(f"# exact {truth:.6f}")
    print("walkers,estimate,stderr,error_in_stderrs")
    w = args.start
    for _ in range(args.steps):
        est = wos_measure(ball_domain(), args.pole, [("arc", arc)], WosConfig(walkers=w, shell=1e-6))
        m, se = est.mass("arc"), est.stderr("arc")
        print(f"{w},{m:.6f},{se:.6f},{(m - truth) / se:+.2f}", flush=True)
        w *= 2


if __name__ == "__main__":
    main()
