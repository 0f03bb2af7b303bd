"""Brute-force line-grid minima used as frozen values in tests/test_oracles.py.

Every line through the ball is scanned on an angle x offset grid; the content
objective is evaluated on each and the smallest value is printed.
"""
import argparse
import time

import numpy as np

from corona_tst.beta import _BilateralObjective, _ContentObjective
from corona_tst.domains import ball_domain, corner_set, four_corner_cantor, polyline_set
from corona_tst.geometry import DEFAULT_CONTENT_DEPTH, DEFAULT_T_NODES, Ball, Plane


def fixtures():
    circle = ball_domain().boundary_samples(2e-3)
    corner = corner_set(2e-3)
    half = polyline_set([(0.0, 0.0), (1.0, 0.0)], 2e-3)
    k1, _ = four_corner_cantor(1)
    r1 = k1.diameter / 2
    c1 = k1.points.min(axis=0) + (k1.points.max(axis=0) - k1.points.min(axis=0)) / 2
    return {
        "circle": (circle, Ball(np.zeros(2), 1.1), "content"),
        "corner": (corner, Ball(np.zeros(2), 1.0), "content"),
        "halfline": (half, Ball(np.zeros(2), 1.0), "bilateral"),
        "cantor1": (k1, Ball(c1, r1), "bilateral"),
    }


def grid_min(S, B, kind, angles, offsets):
    obj = _ContentObjective(S, B, 1, 2.0, DEFAULT_CONTENT_DEPTH, DEFAULT_T_NODES) if kind == "content" else _BilateralObjective(S, B)
    best = np.inf
    for th in np.linspace(0, np.pi, angles, endpoint=False):
        u = np.array([np.cos(th), np.sin(th)])
        nrm = np.array([-u[1], u[0]])
        for s in np.linspace(-B.radius, B.radius, offsets):
            best = min(best, obj(Plane(B.center + s * nrm, u[None, :])))
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--angles", type=int, default=360)
    ap.add_argument("--offsets", type=int, default=200)
    ap.add_argument("--only", nargs="*")
    a = ap.parse_args()
    for name, (S, B, kind) in fixtures().items():
        if a.only and name not in a.only:
            continue
        t = time.time()
        print(f"{name}: {grid_min(S, B, kind, a.angles, a.offsets):.6f} ({time.time() - t:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
