"""Christ-David cubes on a sampled set and stopping-time regions."""
from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Ball, SampledSet

CubeId = tuple  # (level, index)


class ResolutionExceeded(ValueError):
    def __init__(self, deepest: int):
        super().__init__(f"net levels beyond {deepest} are finer than the sampling resolution")
        self.deepest = deepest


def lex_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting points lexicographically by coordinates."""
    return np.lexsort(points.T[::-1])


def _greedy_extend(points: np.ndarray, order: np.ndarray, seed_net: list, sep: float) -> list:
    """Extend ``seed_net`` to a maximal net (pairwise distances > sep),
    scanning candidates in ``order``."""
    net = list(seed_net)
    if net:
        d, _ = cKDTree(points[net]).query(points[order], distance_upper_bound=sep * (1 + 1e-12))
        cand = order[~(d <= sep)]
    else:
        cand = order
    taken = set(net)
    grid: dict = {}
    cells = np.floor(points[cand] / sep).astype(np.int64)
    n = points.shape[1]
    offsets = np.stack(np.meshgrid(*([[-1, 0, 1]] * n), indexing="ij"), -1).reshape(-1, n)
    for i, c in zip(cand, map(tuple, cells)):
        if i in taken:
            continue
        p = points[i]
        ok = True
        for off in offsets:
            for j in grid.get(tuple(np.add(c, off)), ()):
                if np.sum((points[j] - p) ** 2) <= sep * sep * (1 + 1e-12):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            net.append(int(i))
            grid.setdefault(c, []).append(i)
    return net


def build_nets(S: SampledSet, rho: float = 0.5, k_max: int = 6, strict: bool = True,
               scale: Optional[float] = None) -> list:
    """Nested maximal nets X_0 ⊆ X_1 ⊆ ... ⊆ X_kmax as index lists.

    X_k is a maximal set with pairwise distances > rho^k * scale, where scale
    defaults to diam(S); candidates are scanned in lexicographic coordinate
    order after the points of X_{k-1}.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    diam = S.diameter if scale is None else float(scale)
    if scale is not None and scale < S.diameter * (1 - 1e-12):
        raise ValueError("lattice scale below diam(S) would give several root cubes")
    if len(S) > 1:
        deepest = int(np.floor(np.log(10 * S.resolution / diam) / np.log(rho))) if diam > 0 else 0
        if k_max > deepest:
            if strict:
                raise ResolutionExceeded(deepest)
            warnings.warn(f"levels beyond {deepest} are below 10x the sampling resolution")
    order = lex_order(S.points)
    nets = []
    prev: list = []
    for k in range(k_max + 1):
        if len(S) == 1:
            prev = [0]
        else:
            prev = _greedy_extend(S.points, order, prev, rho ** k * diam)
        nets.append(list(prev))
    return nets


@dataclass
class Cube:
    id: CubeId
    center: np.ndarray
    center_index: int
    side: float
    parent: Optional[CubeId]
    children: list = field(default_factory=list)
    members: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def level(self) -> int:
        return self.id[0]

    def ball(self, factor: float = 1.0) -> Ball:
        return Ball(self.center, factor * self.side)


@dataclass
class CubeLattice:
    levels: list  # level -> list[Cube]
    rho: float
    source: SampledSet
    diam: float
    c0_eff: float = float("nan")
    outer_eff: float = float("nan")

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    def cube(self, cid: CubeId) -> Cube:
        return self.levels[cid[0]][cid[1]]

    def ids(self) -> Iterable[CubeId]:
        for lev in self.levels:
            for q in lev:
                yield q.id

    def __len__(self) -> int:
        return sum(len(lev) for lev in self.levels)

    def descendants(self, cid: CubeId, include_self: bool = True) -> list:
        out = [cid] if include_self else []
        frontier = [cid]
        while frontier:
            nxt = []
            for q in frontier:
                nxt.extend(self.cube(q).children)
            out.extend(nxt)
            frontier = nxt
        return out

    def descendants_at(self, cid: CubeId, level: int) -> list:
        if level > self.max_level:
            raise ValueError(f"level {level} is below the lattice bottom {self.max_level}")
        frontier = [cid]
        for _ in range(cid[0], level):
            frontier = [c for q in frontier for c in self.cube(q).children]
        return frontier

    def ancestors(self, cid: CubeId) -> list:
        out = []
        q = self.cube(cid).parent
        while q is not None:
            out.append(q)
            q = self.cube(q).parent
        return out

    def contains(self, outer: CubeId, inner: CubeId) -> bool:
        return outer == inner or outer in self.ancestors(inner)

    def to_json(self) -> dict:
        return {
            "rho": self.rho,
            "diam": self.diam,
            "side_convention": "side = rho^k * scale, scale = diam(S) unless given (no factor 5)",
            "c0_eff": self.c0_eff,
            "outer_eff": self.outer_eff,
            "levels": [
                {"k": k, "cubes": [{"id": list(q.id), "center": q.center.tolist(), "side": q.side,
                                    "parent": None if q.parent is None else list(q.parent),
                                    "member_count": int(len(q.members))} for q in lev]}
                for k, lev in enumerate(self.levels)
            ],
        }

    def save(self, json_path: str | Path) -> None:
        """JSON forest plus ``.members.npz`` holding the member index arrays."""
        json_path = Path(json_path)
        json_path.write_text(json.dumps(self.to_json()))
        arrays = {f"{q.id[0]}_{q.id[1]}": q.members for lev in self.levels for q in lev}
        np.savez_compressed(json_path.with_suffix(".members.npz"), **arrays)


def _nearest_smallest_index(centers: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Nearest center per query; exact ties resolved to the smaller index."""
    tree = cKDTree(centers)
    k = min(2, len(centers))
    dd, nn = tree.query(queries, k=k)
    if k == 1:
        return np.atleast_1d(nn).astype(np.int64)
    best = nn[:, 0].copy()
    tied = np.nonzero(dd[:, 1] <= dd[:, 0] * (1 + 1e-12))[0]
    for i in tied:
        cands = tree.query_ball_point(queries[i], dd[i, 0] * (1 + 1e-12))
        best[i] = min(cands)
    return best


def build_cubes(nets: list, S: SampledSet, rho: float = 0.5, measure_constants: bool = True,
                scale: Optional[float] = None) -> CubeLattice:
    """Cubes from nested nets: each level-(k+1) center hangs under its nearest
    level-k center (ties to the smaller index); every sample joins the cube
    of its nearest bottom-level center and propagates up."""
    diam = S.diameter if scale is None else float(scale)
    pts = S.points
    levels = []
    for k, net in enumerate(nets):
        side = rho ** k * diam if diam > 0 else S.resolution
        levels.append([Cube((k, i), pts[c].copy(), int(c), side, None) for i, c in enumerate(net)])
    for k in range(1, len(nets)):
        parents = _nearest_smallest_index(pts[np.asarray(nets[k - 1])], pts[np.asarray(nets[k])])
        for i, j in enumerate(parents):
            levels[k][i].parent = (k - 1, int(j))
            levels[k - 1][j].children.append((k, i))
    bottom = np.asarray(nets[-1])
    owner = _nearest_smallest_index(pts[bottom], pts)
    K = len(nets) - 1
    groups = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[groups], np.arange(len(bottom) + 1))
    for i, q in enumerate(levels[K]):
        q.members = np.sort(groups[bounds[i]:bounds[i + 1]])
    for k in range(K - 1, -1, -1):
        for q in levels[k]:
            q.members = np.sort(np.concatenate([levels[k + 1][c[1]].members for c in q.children]))
    lat = CubeLattice(levels, rho, S, diam)
    if measure_constants:
        lat.c0_eff, lat.outer_eff = _containment_constants(lat)
    return lat


def _containment_constants(lat: CubeLattice) -> tuple[float, float]:
    """(min inner ratio, max outer ratio) over cubes: the largest r with
    B(ζ, r ℓ) ∩ samples ⊆ Q, and the smallest R with Q ⊆ B(ζ, R ℓ)."""
    pts = lat.source.points
    tree = lat.source.tree
    inner, outer = np.inf, 0.0
    for lev in lat.levels:
        if len(lev) == 1:
            q = lev[0]
            outer = max(outer, float(np.max(np.linalg.norm(pts[q.members] - q.center, axis=1))) / q.side)
            continue
        for q in lev:
            mem = q.members
            rmax = float(np.max(np.linalg.norm(pts[mem] - q.center, axis=1)))
            outer = max(outer, rmax / q.side)
            near = np.asarray(tree.query_ball_point(q.center, min(q.side, rmax + q.side)), dtype=np.int64)
            foreign = near[~np.isin(near, mem, assume_unique=False)]
            if len(foreign):
                r = float(np.min(np.linalg.norm(pts[foreign] - q.center, axis=1))) / q.side
            else:
                r = 1.0
            inner = min(inner, r)
    return (inner if np.isfinite(inner) else 1.0), outer


def build_lattice(S: SampledSet, rho: float = 0.5, k_max: int = 6, strict: bool = True,
                  measure_constants: bool = True, scale: Optional[float] = None) -> CubeLattice:
    """Nets and cubes in one call; ``scale`` (default diam S) is the root side."""
    return build_cubes(build_nets(S, rho, k_max, strict, scale), S, rho, measure_constants, scale)


# ---------------------------------------------------------------------------
# stopping-time regions


@dataclass
class StoppingRegion:
    top: CubeId
    cubes: set
    minimal: list
    stop: list

    def __contains__(self, cid) -> bool:
        return cid in self.cubes


def stopping_region(lattice: CubeLattice, root: CubeId, stop: Callable[[CubeId], bool]) -> StoppingRegion:
    """Stop cubes are the maximal cubes under ``root`` having a child that
    satisfies ``stop``; the region keeps every cube not strictly below one.

    ``minimal`` lists the stop cubes followed by the region's bottom-level
    cubes (both in breadth-first order).
    """
    cubes = {root}
    stops, bottoms = [], []
    queue = deque([root])
    while queue:
        q = queue.popleft()
        kids = lattice.cube(q).children
        if not kids:
            bottoms.append(q)
            continue
        if any(stop(c) for c in kids):
            stops.append(q)
            continue
        cubes.update(kids)
        queue.extend(kids)
    return StoppingRegion(root, cubes, stops + bottoms, stops)


def check_region(lattice: CubeLattice, region: StoppingRegion) -> None:
    """Assert the stopping-region invariants."""
    for q in region.cubes:
        if q != region.top:
            par = lattice.cube(q).parent
            assert par in region.cubes, f"{q} in region without its parent"
        kids = lattice.cube(q).children
        present = [c in region.cubes for c in kids]
        assert all(present) or not any(present), f"sibling coherence broken below {q}"
    mins = region.minimal
    for a in mins:
        for b in mins:
            if a != b:
                assert not lattice.contains(a, b), f"minimal cubes {a} ⊇ {b}"
    top_members = lattice.cube(region.top).members
    cover = np.sort(np.concatenate([lattice.cube(q).members for q in mins]))
    assert np.array_equal(cover, top_members), "minimal cubes do not partition the top cube"
