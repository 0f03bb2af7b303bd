"""Command-line entry point: ``corona-tst <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 failed acceptance check,
3 numerical failure (no corkscrew, indeterminate classification, ...).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .acceptance import CRITERIA, _jsonable, run_suite
from .batakis import IndeterminateClassification, batakis_domain
from .beta import BetaParams, beta_table, linear_deviation
from .corona import CorkscrewFailure, CoronaParams, corona_decompose, verify_tree_densities
from .cubes import build_lattice
from .domains import (CANTOR_LATTICE_SCALE, DomainError, cantor_depth, domain_from_spec, four_corner_cantor)
from .geometry import Ball
from .green import GreenParams, compare_green_beta
from .harmonic import NoInteriorPoint, WosConfig, log_integral, wos_measure

EXIT_OK, EXIT_INVALID, EXIT_ACCEPTANCE, EXIT_NUMERICAL = 0, 1, 2, 3


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_domain(tokens: list) -> dict:
    """``cantor j=3`` or a path to a JSON spec file."""
    if not tokens:
        raise ValueError("--domain needs a kind or a spec file")
    head = tokens[0]
    if head.endswith(".json"):
        path = Path(head)
        if not path.exists():
            raise ValueError(f"domain spec {head} does not exist")
        spec = json.loads(path.read_text())
    else:
        spec = {"kind": head}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValueError(f"domain parameter {tok!r} is not of the form key=value")
        k, v = tok.split("=", 1)
        spec[k] = _value(v)
    return spec


@dataclass
class Fixture:
    spec: dict
    domain: object
    boundary: object
    lattice_scale: Optional[float]
    default_depth: int


def load_fixture(spec: dict, resolution: Optional[float]) -> Fixture:
    kind = spec["kind"]
    if kind == "cantor":
        j = int(spec["j"])
        S, dom = four_corner_cantor(j, resolution)
        return Fixture(spec, dom, S, CANTOR_LATTICE_SCALE, cantor_depth(j))
    dom = domain_from_spec(spec)
    h = resolution if resolution is not None else 1e-3 * (4.0 if kind == "halfplane" else 1.0)
    S = dom.boundary_samples(h)
    deepest = int(np.floor(np.log2(S.diameter / (10 * S.resolution))))
    return Fixture(spec, dom, S, None, max(0, min(deepest, 7)))


def _seed(args) -> int:
    env = os.environ.get("CORONA_TST_SEED")
    return int(env) if env else args.seed


def _wos(args, **over) -> WosConfig:
    cfg = WosConfig(shell=args.shell, walkers=args.walkers, base_seed=_seed(args),
                    far_field_radius=args.far_field_radius, threads=args.threads, max_steps=args.max_steps)
    return replace(cfg, **over) if over else cfg


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["seed"] = _seed(args)
    cfg["version"] = __version__
    return cfg


def _emit(args, payload: dict) -> None:
    payload = _jsonable({"config": _config(args), **payload})
    text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)


def _lattice(args, fx: Fixture):
    k = fx.default_depth if args.k_max is None else args.k_max
    return build_lattice(fx.boundary, args.rho, k, scale=fx.lattice_scale, measure_constants=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_domain(args) -> int:
    spec = {"kind": args.kind, **{k: _value(v) for k, v in (p.split("=", 1) for p in args.params)}}
    if args.kind == "batakis":
        _, bspec = batakis_domain(int(spec.get("N", 2)), float(spec.get("tau", 0.01)), float(spec.get("eta", 1.05)),
                                  int(spec.get("max_n", 2)), _wos(args), policy=spec.get("policy", "error"))
        spec = bspec.to_json()
    else:
        domain_from_spec(spec)  # validates
    spec["config"] = _jsonable(_config(args))
    text = json.dumps(spec, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_cubes(args) -> int:
    fx = load_fixture(parse_domain(args.domain), args.resolution)
    lat = _lattice(args, fx)
    if args.out:
        lat.save(args.out)
        Path(args.out).with_suffix(".config.json").write_text(json.dumps(_jsonable(_config(args)), indent=1))
    else:
        print(json.dumps(_jsonable({"config": _config(args), "lattice": lat.to_json()})))
    return EXIT_OK


def cmd_beta(args) -> int:
    fx = load_fixture(parse_domain(args.domain), args.resolution)
    lat = _lattice(args, fx)
    params = BetaParams(M=args.M, p=args.p, budget=args.budget, C0=args.C0, bilateral=True, threads=args.threads)
    rec = beta_table(lat, fx.boundary, (0, 0), params)
    rep = linear_deviation(lat, fx.boundary, (0, 0), params=params, records=rec)
    if args.out:
        csv_path, json_path = rep.save(args.out)
        data = json.loads(json_path.read_text())
        data["config"] = _jsonable(_config(args))
        data["cubes_per_level"] = [len(lev) for lev in lat.levels]
        json_path.write_text(json.dumps(data, indent=2))
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["cube_id", "level", "side", "beta", "bbeta", "contribution"])
        for cid, contrib in rep.per_cube:
            r = rec[cid]
            w.writerow([f"{cid[0]}:{cid[1]}", cid[0], repr(r.side), repr(r.beta), repr(r.bbeta), repr(contrib)])
    return EXIT_OK


def _point(text: str):
    if text in ("inf", "infinity"):
        return None
    return [float(v) for v in text.split(",")]


def cmd_wos(args) -> int:
    fx = load_fixture(parse_domain(args.domain), args.resolution)
    targets = []
    for i, t in enumerate(args.target):
        *c, r = (float(v) for v in t.split(","))
        targets.append((f"B{i}", Ball(np.array(c), r)))
    est = wos_measure(fx.domain, _point(args.pole), targets, _wos(args))
    _emit(args, {"estimate": est.to_json()})
    return EXIT_OK


def cmd_corona(args) -> int:
    fx = load_fixture(parse_domain(args.domain), args.resolution)
    lat = _lattice(args, fx)
    params = CoronaParams(lam=args.lam, A=args.A, tau=args.tau, epsilon=args.epsilon, M=args.M)
    cfg = _wos(args)
    res = corona_decompose(fx.domain, lat, (0, 0), params, cfg)
    rep = verify_tree_densities(res, fx.domain, lat, cfg, mode=args.verify_mode)
    _emit(args, {"corona": res.to_json(), "verification": rep.to_json()})
    return EXIT_OK


def cmd_loginteg(args) -> int:
    spec = parse_domain(args.domain)
    rows = []
    if spec["kind"] == "cantor" and args.j:
        js = args.j
    else:
        js = [None]
    for j in js:
        sp = dict(spec, j=j) if j is not None else spec
        fx = load_fixture(sp, args.resolution)
        lat = _lattice(args, fx)
        depth = args.depth if args.depth is not None else lat.max_level
        shell = args.shell if j is None else min(args.shell, 1e-4 * 4.0 ** -j)
        li = log_integral(fx.domain, lat, (0, 0), _point(args.pole), depth, _wos(args, shell=shell))
        rows.append({"j": j, "value": li.value, "flagged_mass": li.flagged_mass, "escaped": li.escaped})
    _emit(args, {"rows": rows})
    return EXIT_OK


def cmd_green_dev(args) -> int:
    fx = load_fixture(parse_domain(args.domain), args.resolution)
    lat = _lattice(args, fx)
    gp = GreenParams(N=args.N, resolution=args.whitney_resolution, excl_factor=args.excl_factor,
                     beta=BetaParams(bilateral=False, threads=args.threads))
    rep = compare_green_beta(fx.domain, lat, np.array(_point(args.pole)), gp, _wos(args), args.threads)
    if args.cells:
        rep.integral.save(args.cells)
    _emit(args, {"report": rep.to_json()})
    return EXIT_OK


def cmd_verify(args) -> int:
    only = args.only or None
    results = run_suite(args.suite, _seed(args), args.threads, only, Path(args.out) if args.out else None)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corona-tst", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--walkers", type=int, default=10_000)
    common.add_argument("--seed", type=int, default=12345, help="base seed (CORONA_TST_SEED overrides)")
    common.add_argument("--shell", type=float, default=1e-5)
    common.add_argument("--max-steps", type=int, default=5000)
    common.add_argument("--far-field-radius", type=float, default=None)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default=None)
    geo = argparse.ArgumentParser(add_help=False)
    geo.add_argument("--domain", nargs="+", required=True, help="kind key=value ... or spec.json")
    geo.add_argument("--resolution", type=float, default=None, help="boundary sample spacing")
    geo.add_argument("--rho", type=float, default=0.5)
    geo.add_argument("--k-max", type=int, default=None)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-domain", parents=[common], help="write a domain spec")
    s.add_argument("--kind", required=True, choices=["cantor", "batakis", "polygon", "graph", "snowflake",
                                                     "disk", "square", "halfplane"])
    s.add_argument("--params", nargs="*", default=[], help="key=value pairs (values parsed as JSON)")
    s.set_defaults(func=cmd_gen_domain)

    s = sub.add_parser("cubes", parents=[common, geo], help="build Christ-David cubes")
    s.set_defaults(func=cmd_cubes)

    s = sub.add_parser("beta", parents=[common, geo], help="beta table and linear deviation")
    s.add_argument("--M", type=float, default=3.0)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--C0", type=float, default=2.0)
    s.add_argument("--budget", type=int, default=40)
    s.set_defaults(func=cmd_beta)

    s = sub.add_parser("wos", parents=[common, geo], help="harmonic measure of balls")
    s.add_argument("--pole", required=True, help="x,y or inf")
    s.add_argument("--target", nargs="+", required=True, help="balls cx,cy,r")
    s.set_defaults(func=cmd_wos)

    s = sub.add_parser("corona", parents=[common, geo], help="corona decomposition with verification")
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--A", type=float, default=20.0)
    s.add_argument("--tau", type=float, default=0.05)
    s.add_argument("--epsilon", type=float, default=0.05)
    s.add_argument("--M", type=float, default=3.0)
    s.add_argument("--verify-mode", choices=["per-tree-pole", "fixed-pole"], default="per-tree-pole")
    s.set_defaults(func=cmd_corona)

    s = sub.add_parser("loginteg", parents=[common, geo], help="log-integral functional")
    s.add_argument("--pole", default="inf")
    s.add_argument("--j", type=int, nargs="*", help="Cantor levels to tabulate")
    s.add_argument("--depth", type=int, default=None)
    s.set_defaults(func=cmd_loginteg)

    s = sub.add_parser("green-dev", parents=[common, geo], help="Green deviation integral vs linear deviation")
    s.add_argument("--pole", default="0,0")
    s.add_argument("--N", type=float, default=4.0)
    s.add_argument("--whitney-resolution", type=float, default=1 / 64)
    s.add_argument("--excl-factor", type=float, default=0.25)
    s.add_argument("--cells", default=None, help="stem for the per-cell CSV/JSON")
    s.set_defaults(func=cmd_green_dev)

    s = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    s.add_argument("--suite", choices=["trivial", "acceptance", "all"], default="acceptance")
    s.add_argument("--only", type=int, nargs="*", choices=sorted(CRITERIA))
    s.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorkscrewFailure, IndeterminateClassification, NoInteriorPoint, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyError as e:
        print(f"invalid input: missing parameter {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, DomainError, FileNotFoundError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
