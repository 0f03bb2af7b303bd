"""Ambient geometric primitives: balls, affine planes, sampled sets, dyadic
Hausdorff-content estimates and the normalized two-sided distance."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from ._kernels import dyadic_cover_profile

DEFAULT_CONTENT_DEPTH = 8
DEFAULT_T_NODES = 64


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def diam(self) -> float:
        return 2.0 * self.radius

    def scaled(self, factor: float) -> "Ball":
        """Concentric ball with radius multiplied by ``factor``."""
        return Ball(self.center, self.radius * factor)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius


@dataclass(frozen=True)
class Plane:
    """Affine d-plane through ``base`` spanned by the rows of ``basis``."""

    base: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[1] != base.shape[0]:
            raise ValueError("basis vectors must live in the ambient space of base")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(len(basis)), atol=1e-12):
            raise ValueError("plane basis must be orthonormal")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_directions(cls, base, directions) -> "Plane":
        """Orthonormalize ``directions`` (QR) and build the plane."""
        q, _ = np.linalg.qr(np.atleast_2d(np.asarray(directions, dtype=float)).T)
        return cls(base, q.T)

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def n(self) -> int:
        return self.base.shape[0]

    def normals(self) -> np.ndarray:
        """Orthonormal basis of the orthogonal complement, one row each."""
        if self.d == self.n:
            return np.zeros((0, self.n))
        u, _, _ = np.linalg.svd(self.basis.T, full_matrices=True)
        return u[:, self.d:].T

    def project(self, pts: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.base
        return self.base + (rel @ self.basis.T) @ self.basis

    def distance(self, pts: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.base
        perp = rel - (rel @ self.basis.T) @ self.basis
        return np.linalg.norm(perp, axis=1)

    def grid_in_ball(self, ball: Ball, per_axis: int = 65) -> np.ndarray:
        """Grid of points of the plane inside ``ball``."""
        foot = self.project(ball.center)[0]
        h2 = ball.radius ** 2 - float(np.sum((foot - ball.center) ** 2))
        if h2 <= 0:
            return np.zeros((0, self.n))
        half = np.sqrt(h2)
        ticks = np.linspace(-half, half, per_axis)
        mesh = np.stack(np.meshgrid(*([ticks] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)
        mesh = mesh[np.linalg.norm(mesh, axis=1) <= half * (1 + 1e-12)]
        return foot + mesh @ self.basis


@dataclass
class SampledSet:
    """Finite ``resolution``-net of a set E, optionally with an exact
    ``x -> dist(x, E)`` oracle (vectorized over rows)."""

    points: np.ndarray
    resolution: float
    target_dim: int
    distance_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    oracle_spec: Optional[dict] = None
    labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(self.points)):
            raise ValueError("sample coordinates must be finite")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    @cached_property
    def diameter(self) -> float:
        pts = self.points
        if len(pts) < 2:
            return 0.0
        if self.ambient_dim in (2, 3) and len(pts) > self.ambient_dim + 1:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except Exception:  # degenerate (collinear / coplanar) clouds
                pass
        if len(pts) > 4000:
            # farthest-point refinement is exact enough only as a fallback
            c = pts[np.argmax(np.linalg.norm(pts - pts[0], axis=1))]
            return float(np.max(np.linalg.norm(pts - c, axis=1)))
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))

    def indices_in(self, ball: Ball) -> np.ndarray:
        idx = self.tree.query_ball_point(ball.center, ball.radius)
        return np.sort(np.asarray(idx, dtype=np.int64))

    def dist(self, x: np.ndarray) -> np.ndarray:
        """Distance to E: exact oracle when present, else nearest sample."""
        x = np.atleast_2d(x)
        if self.distance_oracle is not None:
            return np.asarray(self.distance_oracle(x), dtype=float)
        d, _ = self.tree.query(x)
        return d

    def validate(self) -> None:
        """Check the net invariants; raise ``ValueError`` on violation."""
        if len(self) > 1:
            d, _ = self.tree.query(self.points, k=2)
            if np.any(d[:, 1] == 0):
                raise ValueError("sample points must be pairwise distinct")
            if np.any(d[:, 1] > self.resolution * (1 + 1e-9)):
                raise ValueError("sample spacing exceeds the declared resolution")
        if self.distance_oracle is not None:
            off = self.distance_oracle(self.points)
            if np.any(off > self.resolution / 100):
                raise ValueError("sample points are not on the oracle's set")

    def subset(self, idx: np.ndarray) -> "SampledSet":
        return SampledSet(self.points[idx], self.resolution, self.target_dim,
                          self.distance_oracle, self.oracle_spec,
                          None if self.labels is None else self.labels[idx])

    def transformed(self, rotation: np.ndarray, shift: np.ndarray, scale: float = 1.0) -> "SampledSet":
        """Image under x -> scale * R x + shift (oracle dropped)."""
        pts = scale * self.points @ np.asarray(rotation).T + shift
        return SampledSet(pts, self.resolution * scale, self.target_dim)

    # -- serialization -----------------------------------------------------
    def save(self, csv_path: str | Path) -> Path:
        """Write ``points`` as CSV plus a JSON sidecar next to it."""
        csv_path = Path(csv_path)
        header = ",".join(f"x{i}" for i in range(self.ambient_dim))
        np.savetxt(csv_path, self.points, delimiter=",", header=header, comments="", fmt="%.17g")
        meta = {
            "resolution": self.resolution,
            "ambient_dim": self.ambient_dim,
            "target_dim": self.target_dim,
            "oracle": self.oracle_spec,
        }
        side = csv_path.with_suffix(".json")
        side.write_text(json.dumps(meta, indent=2))
        return side

    @classmethod
    def load(cls, csv_path: str | Path) -> "SampledSet":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        pts = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        oracle = None
        if meta.get("oracle"):
            from .domains import oracle_from_spec

            oracle = oracle_from_spec(meta["oracle"])
        if pts.shape[1] != meta["ambient_dim"]:
            raise ValueError("CSV column count disagrees with ambient_dim")
        return cls(pts, meta["resolution"], meta["target_dim"], oracle, meta.get("oracle"))


# ---------------------------------------------------------------------------
# Hausdorff content


class ContentTree:
    """Dyadic cell structure of the sample points inside one ball.

    Built once per (set, ball); the cover program is then re-run for any
    sub-family of these points selected by a threshold on per-point values.
    """

    def __init__(self, pts: np.ndarray, ball: Ball, depth: int):
        self.ball = ball
        n = ball.center.shape[0]
        lo = ball.center - ball.radius
        side = 2.0 * ball.radius
        scale = 2 ** depth
        # atoms: samples snapped to a sub-cell grid, each kept as the bounding
        # box of its points so that costs stay monotone under taking subsets
        fine = np.floor((pts - lo) / side * (4 * scale)).astype(np.int64)
        np.clip(fine, 0, 4 * scale - 1, out=fine)
        _, first, inv = np.unique(fine, axis=0, return_index=True, return_inverse=True)
        inv = inv.reshape(-1)
        m = len(first)
        alo = np.full((m, n), np.inf)
        ahi = np.full((m, n), -np.inf)
        np.minimum.at(alo, inv, pts)
        np.maximum.at(ahi, inv, pts)
        self.atom_of = inv
        self.alo, self.ahi = alo, ahi
        q = fine[first] >> 2
        cell_ids = np.zeros((depth + 1, m), dtype=np.int64)
        ncells = np.zeros(depth + 1, dtype=np.int64)
        ncells[0] = 1 if m else 0
        parent_of = [np.zeros(0, dtype=np.int64)]
        prev = np.zeros(m, dtype=np.int64)
        for k in range(1, depth + 1):
            codes = q >> (depth - k)
            _, cinv = np.unique(codes, axis=0, return_inverse=True)
            cinv = cinv.reshape(-1)
            cell_ids[k] = cinv
            ncells[k] = cinv.max() + 1 if m else 0
            par = np.zeros(ncells[k], dtype=np.int64)
            par[cinv] = prev
            parent_of.append(par)
            prev = cinv
        maxc = int(max(ncells.max(), 1))
        child_ptr = np.zeros((depth + 1, maxc + 1), dtype=np.int64)
        child_idx = np.zeros((depth + 1, maxc), dtype=np.int64)
        for k in range(depth):
            par = parent_of[k + 1]
            order = np.argsort(par, kind="stable")
            child_idx[k, :len(order)] = order
            child_ptr[k, :ncells[k] + 1] = np.searchsorted(par[order], np.arange(ncells[k] + 1))
        self.cell_ids = cell_ids
        self.child_ptr = child_ptr
        self.child_idx = child_idx
        self.ncells = ncells
        self.n = n

    def profile(self, vals: np.ndarray, thresholds: np.ndarray, d: int, pad: float = 0.0) -> np.ndarray:
        """Content of {points with value > t} for each threshold t."""
        if len(self.alo) == 0:
            return np.zeros(len(thresholds))
        atom_vals = np.full(len(self.alo), -np.inf)
        np.maximum.at(atom_vals, self.atom_of, vals)
        return dyadic_cover_profile(
            self.alo, self.ahi, self.cell_ids, self.child_ptr, self.child_idx, self.ncells, atom_vals,
            np.ascontiguousarray(thresholds, dtype=float), float(d), self.ball.diam ** d, float(pad),
        )


def effective_depth(ball: Ball, resolution: float, depth: int) -> int:
    """Cap the dyadic depth so the finest cells stay above the sampling scale."""
    cap = int(np.floor(np.log2(max(ball.radius / resolution, 2.0))))
    return max(1, min(depth, cap))


def hausdorff_content(S: SampledSet, B: Ball, d: int, depth: int = DEFAULT_CONTENT_DEPTH) -> float:
    """Upper estimate of H^d_inf(E ∩ B) by the best dyadic cover of the samples.

    Each dyadic cell of the bounding cube of ``B`` is either kept whole or
    split. A kept cell costs (bounding-box diagonal of its samples + h)^d, the
    +h accounting for the gaps of the h-net; single points cost nothing. The
    ball itself is admissible at the top.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    idx = S.indices_in(B)
    if len(idx) == 0:
        return 0.0
    tree = ContentTree(S.points[idx], B, effective_depth(B, S.resolution, depth))
    return float(tree.profile(np.ones(len(idx)), np.array([0.0]), d, S.resolution)[0])


@dataclass(frozen=True)
class NormalizedDistance:
    value: float
    empty_side: bool


def normalized_distance(E: SampledSet, F: SampledSet, B: Ball) -> NormalizedDistance:
    """(2 / diam B) * max of the two one-sided sups inside B."""
    e_in = E.points[E.indices_in(B)]
    f_in = F.points[F.indices_in(B)]
    sup_ef = float(np.max(F.dist(e_in))) if len(e_in) else 0.0
    sup_fe = float(np.max(E.dist(f_in))) if len(f_in) else 0.0
    return NormalizedDistance(
        2.0 / B.diam * max(sup_ef, sup_fe), empty_side=(len(e_in) == 0 or len(f_in) == 0)
    )


def t_grid(resolution: float, radius: float, nodes: int = DEFAULT_T_NODES) -> np.ndarray:
    """Geometric grid on [h / r, 1]."""
    t0 = min(resolution / radius, 0.5)
    return np.geomspace(t0, 1.0, nodes)


@dataclass(frozen=True)
class PlaneStats:
    max_dist: float
    t: np.ndarray
    profile: np.ndarray


def plane_distance_stats(S: SampledSet, B: Ball, L: Plane, *, d: Optional[int] = None,
                         depth: int = DEFAULT_CONTENT_DEPTH, nodes: int = DEFAULT_T_NODES,
                         tree: Optional[ContentTree] = None) -> PlaneStats:
    """sup of dist(x, L) over samples in B, and the content profile
    t -> H^d_inf({x in B ∩ E : dist(x, L) > t r_B}) on a geometric t-grid."""
    d = L.d if d is None else d
    t = t_grid(S.resolution, B.radius, nodes)
    idx = S.indices_in(B)
    if len(idx) == 0:
        return PlaneStats(0.0, t, np.zeros_like(t))
    if tree is None:
        tree = ContentTree(S.points[idx], B, effective_depth(B, S.resolution, depth))
    dist = L.distance(S.points[idx])
    prof = tree.profile(dist, t * B.radius, d, S.resolution)
    return PlaneStats(float(dist.max()), t, prof)
