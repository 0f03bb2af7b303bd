"""Content β-numbers, bilateral β-numbers, best-plane search, the linear
deviation sum over a cube lattice, BLWG sums and the union-of-planes test."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .cubes import CubeId, CubeLattice
from .geometry import (DEFAULT_CONTENT_DEPTH, DEFAULT_T_NODES, Ball, ContentTree, Plane,
                       SampledSet, effective_depth, t_grid)
from .parallel import ordered_map


@dataclass(frozen=True)
class BetaParams:
    M: float = 3.0
    p: float = 2.0
    budget: int = 40
    C0: float = 2.0
    depth: int = DEFAULT_CONTENT_DEPTH
    nodes: int = DEFAULT_T_NODES
    bilateral: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("p must be positive")
        if self.budget < 1:
            raise ValueError("search budget must be at least 1")


def integrate_profile(t: np.ndarray, profile: np.ndarray, p: float, radius: float, d: int) -> float:
    """(r^-d ∫_0^1 profile(t) t^(p-1) dt)^(1/p), trapezoid on the grid and the
    profile held at its first value below the grid."""
    head = profile[0] * t[0] ** p / p
    body = float(np.trapezoid(profile * t ** (p - 1), t)) if len(t) > 1 else 0.0
    return float(max(head + body, 0.0) / radius ** d) ** (1.0 / p)


class _ContentObjective:
    """β^{d,p}(B, ·) over planes for one fixed (set, ball)."""

    def __init__(self, S: SampledSet, B: Ball, d: int, p: float, depth: int, nodes: int):
        self.S, self.B, self.d, self.p = S, B, d, p
        self.idx = S.indices_in(B)
        self.pts = S.points[self.idx]
        self.t = t_grid(S.resolution, B.radius, nodes)
        self.tree = (ContentTree(self.pts, B, effective_depth(B, S.resolution, depth))
                     if len(self.idx) else None)
        self.calls = 0

    def __call__(self, L: Plane) -> float:
        self.calls += 1
        if self.tree is None:
            return 0.0
        dist = L.distance(self.pts)
        prof = self.tree.profile(dist, self.t * self.B.radius, self.d, self.S.resolution)
        return integrate_profile(self.t, prof, self.p, self.B.radius, self.d)


def beta_content(S: SampledSet, B: Ball, L: Plane, d: Optional[int] = None, p: float = 2.0,
                 depth: int = DEFAULT_CONTENT_DEPTH, nodes: int = DEFAULT_T_NODES) -> float:
    """β_E^{d,p}(B, L) from the dyadic content profile of the samples."""
    if p <= 0:
        raise ValueError("p must be positive")
    d = L.d if d is None else d
    if d < 1:
        raise ValueError("d must be >= 1")
    return _ContentObjective(S, B, d, p, depth, nodes)(L)


# ---------------------------------------------------------------------------
# plane search


def _frame(L: Plane) -> np.ndarray:
    return np.vstack([L.basis, L.normals()])


def pca_plane(pts: np.ndarray, d: int) -> Plane:
    """Least-squares d-plane through the centroid."""
    c = pts.mean(axis=0)
    if len(pts) < 2:
        return Plane(c, np.eye(pts.shape[1])[:d])
    X = pts - c
    w, v = np.linalg.eigh(X.T @ X)
    return Plane(c, v[:, ::-1][:, :d].T)


def _affine_rank(pts: np.ndarray) -> int:
    if len(pts) < 2:
        return 0
    s = np.linalg.svd(pts - pts[0], compute_uv=False, full_matrices=False)
    return int(np.sum(s > 1e-12 * max(s[0], 1e-300)))


def _start_planes(pts: np.ndarray, d: int, through: Optional[np.ndarray]) -> list[Plane]:
    """PCA plane plus a few rotated copies of it (coarse multi-start)."""
    base = pca_plane(pts, d)
    if through is not None:
        base = Plane(through, base.basis)
    F = _frame(base)
    n = F.shape[1]
    out = [base]
    if n == 2 and d == 1:
        for a in (np.pi / 4, np.pi / 2, 3 * np.pi / 4):
            ca, sa = np.cos(a), np.sin(a)
            v = ca * F[0] + sa * F[1]
            out.append(Plane(base.base, v[None]))
    else:
        for j in range(d, n):
            G = F.copy()
            G[[0, j]] = G[[j, 0]]
            out.append(Plane(base.base, np.linalg.qr(G[:d].T)[0].T))
    return out


@dataclass
class PlaneFit:
    value: float
    plane: Plane
    evaluations: int


def search_plane(objective: Callable[[Plane], float], starts: Sequence[Plane], scale: float,
                 budget: int, fixed_base: bool = False, rel_tol: float = 1e-6) -> PlaneFit:
    """Derivative-free pattern search over planes: Givens rotations between
    tangent and normal directions, and shifts of the base along normals.

    Step sizes halve when no move improves; the search stops when the budget
    is spent or an improvement round gains less than ``rel_tol``.
    """
    evals = 0
    best_val, best = math.inf, starts[0]
    for L in starts:
        if evals >= budget:
            break
        v = objective(L)
        evals += 1
        if v < best_val:
            best_val, best = v, L
    d, n = best.d, best.n
    ang, off = np.pi / 8, scale / 4
    while evals < budget and best_val > 0 and ang > 1e-4:
        F = _frame(best)
        moves = []
        for i in range(d):
            for j in range(d, n):
                for sgn in (1.0, -1.0):
                    c, s = np.cos(sgn * ang), np.sin(sgn * ang)
                    G = F.copy()
                    G[i], G[j] = c * F[i] + s * F[j], -s * F[i] + c * F[j]
                    moves.append(Plane(best.base, G[:d]))
        if not fixed_base:
            for j in range(d, n):
                for sgn in (1.0, -1.0):
                    moves.append(Plane(best.base + sgn * off * F[j], best.basis))
            # diagonal moves: max-type objectives stall at kinks where a lone
            # rotation or shift makes things worse
            for k in range(len(moves) - 2 * (n - d)):
                for j in range(d, n):
                    for sgn in (1.0, -1.0):
                        moves.append(Plane(best.base + sgn * off * F[j], moves[k].basis))
        improved = False
        for L in moves:
            if evals >= budget:
                break
            v = objective(L)
            evals += 1
            if v < best_val:
                gain = (best_val - v) / best_val if best_val > 0 else 0.0
                best_val, best = v, L
                improved = gain >= rel_tol
                break
        if not improved:
            ang /= 2
            off /= 2
    return PlaneFit(float(best_val), best, evals)


def beta_inf(S: SampledSet, B: Ball, d: Optional[int] = None, p: float = 2.0, search_budget: int = 40,
             *, candidates: Sequence[Plane] = (), depth: int = DEFAULT_CONTENT_DEPTH,
             nodes: int = DEFAULT_T_NODES) -> PlaneFit:
    """Smallest β_E^{d,p}(B, L) found over d-planes L (an upper bound on the
    infimum). Explicit ``candidates`` join the starting set, so the result
    never exceeds their values."""
    if search_budget < 1:
        raise ValueError("search_budget must be >= 1")
    d = S.target_dim if d is None else d
    obj = _ContentObjective(S, B, d, p, depth, nodes)
    pts = obj.pts
    if len(pts) == 0:
        return PlaneFit(0.0, Plane(B.center, np.eye(len(B.center))[:d]), 0)
    if _affine_rank(pts) < d or d >= S.ambient_dim:
        return PlaneFit(0.0, pca_plane(pts, d), 0)
    starts = list(candidates) + _start_planes(pts, d, None)
    budget = max(search_budget, len(starts))
    return search_plane(obj, starts, B.radius, budget)


# ---------------------------------------------------------------------------
# bilateral β


class _BilateralObjective:
    """d_B(E, L) over planes L for one fixed (set, ball)."""

    def __init__(self, S: SampledSet, B: Ball, max_grid: int = 1025):
        self.S, self.B = S, B
        self.pts = S.points[S.indices_in(B)]
        spacing = max(S.resolution, B.radius / 256)
        self.per_axis = int(min(max(65, math.ceil(2 * B.radius / spacing) + 1), max_grid))
        self.calls = 0

    def __call__(self, L: Plane) -> float:
        self.calls += 1
        grid = L.grid_in_ball(self.B, self.per_axis)
        if L.d > 1:
            grid = grid[:: max(1, len(grid) // 20000)]
        e2p = float(L.distance(self.pts).max()) if len(self.pts) else 0.0
        p2e = float(self.S.dist(grid).max()) if len(grid) else 0.0
        return 2.0 / self.B.diam * max(e2p, p2e)


def bilateral_beta(S: SampledSet, B: Ball, search_budget: int = 40, d: Optional[int] = None,
                   *, candidates: Sequence[Plane] = ()) -> PlaneFit:
    """Smallest normalized two-sided distance d_B(E, L) found over d-planes."""
    if search_budget < 1:
        raise ValueError("search_budget must be >= 1")
    d = S.target_dim if d is None else d
    obj = _BilateralObjective(S, B)
    pts = obj.pts
    if len(pts) == 0:
        # one-sided: plane through the center, only P -> E distances count
        starts = list(candidates) + [Plane(B.center, np.eye(len(B.center))[:d])]
        starts += _start_planes(np.vstack([B.center, B.center + np.eye(len(B.center))[:d]]), d, B.center)
        return search_plane(obj, starts, B.radius, max(search_budget, len(starts)), fixed_base=True)
    if _affine_rank(pts) < d:
        L = pca_plane(pts, d)
        return PlaneFit(obj(L), L, 1)
    starts = list(candidates) + _start_planes(pts, d, None)
    return search_plane(obj, starts, B.radius, max(search_budget, len(starts)))


# ---------------------------------------------------------------------------
# tables over a lattice


@dataclass
class BetaRecord:
    cube: CubeId
    level: int
    side: float
    beta: float
    bbeta: float
    plane: Plane
    M: float
    C0: float
    p: float
    d_exp: int = 1

    @property
    def contribution(self) -> float:
        return self.beta ** 2 * self.side ** self.d_exp


def _record(lattice: CubeLattice, S: SampledSet, cid: CubeId, params: BetaParams) -> BetaRecord:
    q = lattice.cube(cid)
    d = S.target_dim
    fit = beta_inf(S, q.ball(params.M), d, params.p, params.budget, depth=params.depth,
                   nodes=params.nodes)
    bb = math.nan
    if params.bilateral:
        bb = bilateral_beta(S, q.ball(params.C0), params.budget, d).value
    return BetaRecord(cid, cid[0], q.side, fit.value, bb, fit.plane, params.M, params.C0, params.p,
                      d_exp=d)


def beta_table(lattice: CubeLattice, S: SampledSet, root: CubeId, params: BetaParams = BetaParams()
               ) -> dict:
    """BetaRecord for every cube under ``root`` (inclusive), keyed by cube id."""
    ids = sorted(lattice.descendants(root))
    recs = ordered_map(lambda c: _record(lattice, S, c, params), ids, params.threads)
    return dict(zip(ids, recs))


@dataclass
class DeviationReport:
    root: CubeId
    top_term: float
    total: float
    per_cube: list  # (cube id, contribution)
    truncation_level: int
    params: dict
    records: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {"root": list(self.root), "total": self.total, "top_term": self.top_term,
                "truncation_level": self.truncation_level, "params": self.params}

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        """CSV ``cube_id,level,side,beta,bbeta,contribution`` plus JSON summary."""
        stem = Path(stem)
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cube_id", "level", "side", "beta", "bbeta", "contribution"])
            for cid, contrib in self.per_cube:
                r = self.records.get(cid)
                w.writerow([f"{cid[0]}:{cid[1]}", cid[0], repr(r.side) if r else "",
                            repr(r.beta) if r else "", repr(r.bbeta) if r else "", repr(contrib)])
        json_path.write_text(json.dumps(self.to_json(), indent=2))
        return csv_path, json_path


def linear_deviation(lattice: CubeLattice, S: SampledSet, root: CubeId, M: float = 3.0, p: float = 2.0,
                     search_budget: int = 40, *, params: Optional[BetaParams] = None,
                     records: Optional[dict] = None) -> DeviationReport:
    """ℓ(root)^d + Σ_{Q ⊆ root} β(M B_Q)^2 ℓ(Q)^d down to the lattice bottom."""
    if M < 3:
        raise ValueError("M must be >= 3")
    if params is None:
        params = BetaParams(M=M, p=p, budget=search_budget, bilateral=False)
    if records is None:
        records = beta_table(lattice, S, root, params)
    d = S.target_dim
    ids = sorted(lattice.descendants(root))
    per = [(c, records[c].beta ** 2 * records[c].side ** d) for c in ids]
    top = lattice.cube(root).side ** d
    total = top + math.fsum(v for _, v in per)
    pj = asdict(params)
    return DeviationReport(root, top, total, per, lattice.max_level, pj, records)


def blwg_sum(lattice: CubeLattice, records: dict, root: CubeId, epsilon: float, C0: float = 2.0) -> float:
    """Σ ℓ(Q)^d over Q ⊆ root whose stored bβ(C0 B_Q) is at least ``epsilon``."""
    if not 0 < epsilon <= 2:
        raise ValueError("epsilon must lie in (0, 2]")
    if C0 < 1:
        raise ValueError("C0 must be >= 1")
    d = lattice.source.target_dim
    tot = []
    for c in lattice.descendants(root):
        r = records[c]
        if r.C0 != C0:
            raise ValueError(f"records were computed with C0={r.C0}, not {C0}")
        if r.bbeta >= epsilon:
            tot.append(r.side ** d)
    return math.fsum(tot)


def surface_proxy(S: SampledSet, members: np.ndarray) -> float:
    """ℋ^d of the part of E carried by ``members``: count times spacing^d."""
    return len(members) * S.resolution ** S.target_dim


# ---------------------------------------------------------------------------
# bilateral approximation by a union of planes


@dataclass
class BaupResult:
    passes: bool
    achieved: float
    planes: list


def _union_distance(pts: np.ndarray, planes: list[Plane]) -> np.ndarray:
    return np.min(np.stack([L.distance(pts) for L in planes]), axis=0)


def baup_test(S: SampledSet, B: Ball, epsilon: float, max_planes: int = 2, budget: int = 50,
              d: Optional[int] = None, restarts: int = 8, seed: int = 0) -> BaupResult:
    """Fit ≤ ``max_planes`` d-planes by k-planes clustering (assign to nearest
    plane, refit by PCA, repeat) and report d_B(E, ∪ planes)."""
    if max_planes < 1:
        raise ValueError("max_planes must be >= 1")
    d = S.target_dim if d is None else d
    pts = S.points[S.indices_in(B)]
    if len(pts) == 0:
        return BaupResult(True, 0.0, [])
    from ._kernels import uniforms

    def score(planes: list[Plane]) -> float:
        e2u = float(_union_distance(pts, planes).max())
        grid = np.vstack([L.grid_in_ball(B, 257) for L in planes])
        u2e = float(S.dist(grid).max()) if len(grid) else 0.0
        return 2.0 / B.diam * max(e2u, u2e)

    best_val, best_planes = math.inf, []
    for k in range(1, max_planes + 1):
        for r in range(restarts if k > 1 else 1):
            u = uniforms(seed, np.arange(k), r, 1)[:, 0]
            seeds = pts[np.minimum((u * len(pts)).astype(int), len(pts) - 1)]
            # initial planes: PCA of the points nearest to each seed
            lab = np.argmin(np.linalg.norm(pts[:, None, :] - seeds[None], axis=2), axis=1)
            planes = []
            for it in range(budget):
                planes = [pca_plane(pts[lab == i], d) for i in range(k) if np.any(lab == i)]
                new = np.argmin(np.stack([L.distance(pts) for L in planes]), axis=0)
                if len(planes) == k and np.array_equal(new, lab):
                    break
                lab = new
            v = score(planes)
            if v < best_val:
                best_val, best_planes = v, planes
    return BaupResult(best_val < epsilon, float(best_val), best_planes)
