"""Stopping-time corona decomposition driven by harmonic-measure densities,
its density verification, and the Frostman cube cascade."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from ._kernels import mix_seed, uniforms
from .beta import BetaParams, beta_table
from .cubes import CubeId, CubeLattice, StoppingRegion, stopping_region
from .domains import Domain
from .geometry import Ball, Plane
from .harmonic import ExitSample, WosConfig, decision_stderr, harmonic_walk

REASONS = ("BTM", "Bad", "HD", "LD", "Bbeta")


class CorkscrewFailure(RuntimeError):
    def __init__(self, cube: CubeId):
        super().__init__(f"no interior corkscrew pole for top cube {cube}")
        self.cube = cube


@dataclass(frozen=True)
class CoronaParams:
    lam: float = 1.0
    A: float = 20.0
    tau: float = 0.05
    epsilon: float = 0.05
    M: float = 3.0
    k0: Optional[int] = None
    c: float = 0.05
    sigmas: float = 3.0

    def __post_init__(self):
        if not self.lam >= 1:
            raise ValueError("lambda must be >= 1")
        if not self.A > 1 > self.tau > 0:
            raise ValueError("need A > 1 > tau > 0")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.M < 3:
            raise ValueError("M must be >= 3")


# ---------------------------------------------------------------------------
# corkscrews


def find_corkscrew(domain: Domain, B: Ball, c: float, points: int = 4096) -> Optional[np.ndarray]:
    """First point of a Halton sequence in ``B`` with dist to ∂Ω ≥ 2c r_B and
    |x - x_B| ≤ (1 - 2c) r_B, or None."""
    n = len(B.center)
    u = qmc.Halton(d=n, scramble=False).random(points + 1)[1:]
    cand = B.center + B.radius * (2 * u - 1)
    ok = np.linalg.norm(cand - B.center, axis=1) <= (1 - 2 * c) * B.radius
    cand = cand[ok]
    if len(cand) == 0:
        return None
    good = domain.inside(cand) & (domain.dist_boundary(cand) >= 2 * c * B.radius)
    hits = np.nonzero(good)[0]
    return cand[hits[0]] if len(hits) else None


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class PoleDensities:
    """Ball densities Θ = ω(λB_Q) / diam(λB_Q)^d from one walker batch."""

    pole: np.ndarray
    sample: ExitSample
    lam: float
    d: int

    def theta(self, q) -> tuple[float, float]:
        """(density, decision stderr) of λB_Q."""
        ball = q.ball(self.lam)
        k = self.sample.count(ball)
        n = self.sample.walkers
        scale = ball.diam ** self.d
        return k / n / scale, decision_stderr(k, n) / scale


@dataclass
class TreeRecord:
    top: CubeId
    region: StoppingRegion
    pole_plus: Optional[np.ndarray]
    pole_minus: Optional[np.ndarray]
    stop_reasons: dict  # cube -> reason
    seed: int
    top_theta: dict = field(default_factory=dict)  # "+"/"-" -> (theta, stderr)

    def to_json(self) -> dict:
        return {
            "R": list(self.top),
            "pole_plus": None if self.pole_plus is None else self.pole_plus.tolist(),
            "pole_minus": None if self.pole_minus is None else self.pole_minus.tolist(),
            "stops": [{"cube": list(c), "reason": r} for c, r in sorted(self.stop_reasons.items())],
            "tree_size": len(self.region.cubes),
            "seed": self.seed,
        }


@dataclass
class CoronaResult:
    trees: list
    packing: float
    btm_packing: float
    params: CoronaParams
    Q0: CubeId
    truncation_level: int
    base_seed: int
    walkers: int
    verification: Optional[dict] = None

    @property
    def tops(self) -> list:
        return [t.top for t in self.trees]

    def tree_of(self) -> dict:
        """cube -> top of the tree containing it."""
        return {c: t.top for t in self.trees for c in t.region.cubes}

    def btm_cubes(self) -> list:
        return sorted(c for t in self.trees for c, r in t.stop_reasons.items() if r == "BTM")

    def to_json(self) -> dict:
        return {
            "params": asdict(self.params),
            "Q0": list(self.Q0),
            "truncation_level": self.truncation_level,
            "base_seed": self.base_seed,
            "walkers": self.walkers,
            "tops": [t.to_json() for t in self.trees],
            "packing": self.packing,
            "btm_packing": self.btm_packing,
            "verification": self.verification,
        }


def _poles(domain: Domain, lattice: CubeLattice, R: CubeId, plane: Plane) -> tuple:
    q = lattice.cube(R)
    nu = plane.normals()[0]
    out = []
    for sgn in (1.0, -1.0):
        x = q.center + sgn * 0.5 * q.side * nu
        ok = bool(domain.inside(x[None])[0]) and float(domain.dist_boundary(x[None])[0]) > q.side / 8
        out.append(x if ok else None)
    return tuple(out)


def corona_decompose(domain: Domain, lattice: CubeLattice, Q0: CubeId, params: CoronaParams = CoronaParams(),
                     cfg: WosConfig = WosConfig(), betas: Optional[dict] = None) -> CoronaResult:
    """Partition the cubes under ``Q0`` into stopping-time trees.

    A top R with bβ(M B_R) ≥ ε is a one-cube tree. Otherwise the poles
    x_R^± = ζ_R ± (ℓ(R)/2) ν_R that lie inside Ω (at depth > ℓ(R)/8) each get
    one walker batch, and a tree cube stops when one of its children is Bad,
    HD, LD or Bβ (first hit in that order); bottom-level cubes stop as BTM.
    Density comparisons fire only with a ``params.sigmas`` stderr margin.
    Children of stop cubes become the next tops.

    ``betas`` must hold BetaRecords with β at M B_Q and bβ at M B_Q.
    """
    S = lattice.source
    d = S.target_dim
    k0 = lattice.max_level if params.k0 is None else min(params.k0, lattice.max_level)
    if betas is None:
        betas = beta_table(lattice, S, Q0, BetaParams(M=params.M, C0=params.M, threads=cfg.threads))
    for c in lattice.descendants(Q0):
        if c[0] <= k0 and betas[c].C0 != params.M:
            raise ValueError("bilateral betas must be computed on M B_Q")
    eps2 = params.epsilon ** 2
    k = params.sigmas
    trees = []
    queue = [Q0]
    while queue:
        queue.sort()
        R = queue.pop(0)
        qR = lattice.cube(R)
        seed = mix_seed(cfg.base_seed, R[0], R[1])
        is_bottom = R[0] >= k0 or not qR.children
        if is_bottom or betas[R].bbeta >= params.epsilon:
            reason = "BTM" if is_bottom else "Bad"
            region = StoppingRegion(R, {R}, [R], [] if is_bottom else [R])
            trees.append(TreeRecord(R, region, None, None, {R: reason}, seed))
            if not is_bottom:
                queue.extend(qR.children)
            continue
        plane = Plane(qR.center, betas[R].plane.basis)
        xp, xm = _poles(domain, lattice, R, plane)
        if xp is None and xm is None:
            raise CorkscrewFailure(R)
        dens = {}
        for tag, x in (("+", xp), ("-", xm)):
            if x is not None:
                res = harmonic_walk(domain, x, cfg.with_seed(R[0], R[1], 1 if tag == "+" else 2))
                dens[tag] = PoleDensities(x, ExitSample(res, cfg.walkers), params.lam, d)
        top_theta = {t: pdn.theta(qR) for t, pdn in dens.items()}
        partial = {R: betas[R].beta ** 2}

        def reason_of(c: CubeId) -> Optional[str]:
            par = lattice.cube(c).parent
            partial[c] = partial[par] + betas[c].beta ** 2
            if betas[c].bbeta >= params.epsilon:
                return "Bad"
            qc = lattice.cube(c)
            hd = ld = False
            for t, pdn in dens.items():
                th, se = pdn.theta(qc)
                th0, se0 = top_theta[t]
                if th - params.A * th0 > k * math.hypot(se, params.A * se0):
                    hd = True
                if params.tau * th0 - th > k * math.hypot(se, params.tau * se0):
                    ld = True
            if hd:
                return "HD"
            if ld:
                return "LD"
            if partial[c] >= 2 * eps2:
                return "Bbeta"
            return None

        child_reason: dict = {}

        def stop(c: CubeId) -> bool:
            if c not in child_reason:
                child_reason[c] = reason_of(c)
            return child_reason[c] is not None

        def kids_of(c):
            kids = lattice.cube(c).children
            return kids if c[0] < k0 else []

        region = _region(lattice, R, stop, kids_of)
        reasons = {}
        for s in region.stop:
            found = [child_reason[c] for c in lattice.cube(s).children if child_reason.get(c)]
            reasons[s] = min(found, key=REASONS.index)
            queue.extend(lattice.cube(s).children)
        for b in region.minimal[len(region.stop):]:
            reasons[b] = "BTM"
        trees.append(TreeRecord(R, region, xp, xm, reasons, seed, top_theta))
    packing = math.fsum(lattice.cube(t.top).side ** d for t in trees)
    btm = math.fsum(lattice.cube(c).side ** d for t in trees for c, r in t.stop_reasons.items() if r == "BTM")
    return CoronaResult(trees, packing, btm, params, Q0, k0, cfg.base_seed, cfg.walkers)


def _region(lattice: CubeLattice, root: CubeId, stop, kids_of) -> StoppingRegion:
    """:func:`stopping_region` with the lattice truncated by ``kids_of``."""
    from collections import deque

    cubes = {root}
    stops, bottoms = [], []
    queue = deque([root])
    while queue:
        q = queue.popleft()
        kids = kids_of(q)
        if not kids:
            bottoms.append(q)
            continue
        # evaluate every child so that stop reasons are recorded consistently
        flags = [stop(c) for c in kids]
        if any(flags):
            stops.append(q)
            continue
        cubes.update(kids)
        queue.extend(kids)
    return StoppingRegion(root, cubes, stops + bottoms, stops)


def cdhm_upper(result: CoronaResult) -> tuple[float, bool]:
    """Top packing of a decomposition, an upper bound for CDHM once its
    densities are verified; the flag says whether they were."""
    ok = bool(result.verification and result.verification.get("passed"))
    if not ok:
        warnings.warn("corona decomposition has not passed density verification")
    return result.packing, ok


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    mode: str
    pairs: int
    passed_pairs: int
    fraction: float
    threshold: float
    failures: list

    @property
    def passed(self) -> bool:
        return self.fraction >= self.threshold

    def to_json(self) -> dict:
        return {"mode": self.mode, "pairs": self.pairs, "passed_pairs": self.passed_pairs,
                "fraction": self.fraction, "threshold": self.threshold, "passed": self.passed,
                "failures": [[list(r), list(q)] for r, q in self.failures[:50]]}


def verify_tree_densities(result: CoronaResult, domain: Domain, lattice: CubeLattice, cfg: WosConfig,
                          mode: str = "per-tree-pole", samples: int = 200, threshold: float = 0.9,
                          A: Optional[float] = None, tau: Optional[float] = None,
                          fixed_pole=None, attach: bool = True) -> VerificationReport:
    """Re-estimate densities with fresh seeds and count the sampled (R, Q)
    pairs with τ Θ(λB_R) ≤ Θ(λB_Q) ≤ A Θ(λB_R) up to ``sigmas`` stderr.

    ``mode='fixed-pole'`` uses one pole for every tree (``fixed_pole``; None
    means the pole at infinity for exterior domains, else the first tree's
    pole carrying tree).
    """
    if mode not in ("per-tree-pole", "fixed-pole"):
        raise ValueError(f"unknown mode {mode!r}")
    p = result.params
    A = p.A if A is None else A
    tau = p.tau if tau is None else tau
    d = lattice.source.target_dim
    pairs = [(t.top, c) for t in result.trees if t.pole_plus is not None or t.pole_minus is not None
             for c in sorted(t.region.cubes) if c != t.top]
    if len(pairs) > samples:
        u = uniforms(mix_seed(cfg.base_seed, 404), np.arange(samples), 0, 1)[:, 0]
        pick = np.unique((u * len(pairs)).astype(int))
        pairs = [pairs[i] for i in pick]
    trees = {t.top: t for t in result.trees}
    fresh = cfg.with_seed(0xF2E5)
    cache: dict = {}

    def sample_for(key, x):
        if key not in cache:
            res = harmonic_walk(domain, x, fresh.with_seed(*key[1:]) if key[0] != "fixed" else fresh)
            cache[key] = PoleDensities(x, ExitSample(res, cfg.walkers), p.lam, d)
        return cache[key]

    if mode == "fixed-pole" and fixed_pole is None and domain.kind != "complement":
        for t0 in result.trees:
            fixed_pole = t0.pole_plus if t0.pole_plus is not None else t0.pole_minus
            if fixed_pole is not None:
                break
    ok_count, failures = 0, []
    for R, Q in pairs:
        t = trees[R]
        if mode == "fixed-pole":
            dens = [sample_for(("fixed",), fixed_pole)]
        else:
            dens = [sample_for(("tree", R[0], R[1], tag), x)
                    for tag, x in ((1, t.pole_plus), (2, t.pole_minus)) if x is not None]
        good = True
        for pdn in dens:
            th, se = pdn.theta(lattice.cube(Q))
            th0, se0 = pdn.theta(lattice.cube(R))
            if th - A * th0 > p.sigmas * math.hypot(se, A * se0):
                good = False
            if tau * th0 - th > p.sigmas * math.hypot(se, tau * se0):
                good = False
        ok_count += good
        if not good:
            failures.append((R, Q))
    n = len(pairs)
    rep = VerificationReport(mode, n, ok_count, ok_count / n if n else 1.0, threshold, failures)
    if attach:
        result.verification = rep.to_json()
    return rep


# ---------------------------------------------------------------------------
# Frostman cascade


@dataclass
class FrostmanMeasure:
    atoms: list  # (cube id, center, weight)
    fc: list
    weights: dict = field(repr=False, default_factory=dict)

    def mass(self, lattice: CubeLattice, cid: CubeId) -> float:
        """ν(Q): total weight of atoms whose cube lies in Q."""
        return float(sum(w for c, w in self.weights.items() if lattice.contains(cid, c)))


def frostman_regularize(lattice: CubeLattice, btm_weights: dict, Q0: CubeId) -> FrostmanMeasure:
    """Bottom-up sweep: whenever μ(Q) > 2ℓ(Q)^d, rescale μ on Q by ℓ(Q)^d/μ(Q)
    and record Q as a Frostman cube."""
    d = lattice.source.target_dim
    below = set(lattice.descendants(Q0))
    for c, w in btm_weights.items():
        if c not in below:
            raise ValueError(f"weight on {c} outside Q0")
        if w < 0:
            raise ValueError("weights must be nonnegative")
    w = {c: np.longdouble(v) for c, v in btm_weights.items()}
    # atoms of each cube, by walking ancestors once
    owners: dict = {}
    for c in w:
        for a in [c] + lattice.ancestors(c):
            owners.setdefault(a, []).append(c)
            if a == Q0:
                break
    fc = []
    for k in range(lattice.max_level, Q0[0] - 1, -1):
        for q in sorted(x for x in owners if x[0] == k):
            mu = sum((w[c] for c in owners[q]), np.longdouble(0))
            cap = np.longdouble(lattice.cube(q).side) ** d
            if mu > 2 * cap:
                f = cap / mu
                for c in owners[q]:
                    w[c] *= f
                fc.append(q)
    atoms = [(c, lattice.cube(c).center, float(w[c])) for c in sorted(w)]
    return FrostmanMeasure(atoms, fc, {c: float(v) for c, v in w.items()})


def frostman_check(lattice: CubeLattice, nu: FrostmanMeasure, Q0: CubeId) -> tuple[int, int]:
    """(cubes checked, cubes with ν(Q) ≤ 2ℓ(Q)^d)."""
    d = lattice.source.target_dim
    tot: dict = {}
    for c, wv in nu.weights.items():
        for a in [c] + lattice.ancestors(c):
            tot[a] = tot.get(a, 0.0) + wv
            if a == Q0:
                break
    ids = lattice.descendants(Q0)
    ok = sum(1 for q in ids if tot.get(q, 0.0) <= 2 * lattice.cube(q).side ** d * (1 + 1e-12))
    return len(ids), ok
