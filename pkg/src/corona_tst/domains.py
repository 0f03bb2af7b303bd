"""Test domains with exact distance oracles.

Every generator returns a :class:`Domain`; the 4-corner Cantor generator also
returns the boundary cloud with per-point square labels. Domains are fully
described by a JSON-able ``spec`` so that runs can be replayed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._kernels import build_bvh, bvh_nearest, points_in_polygon
from .geometry import SampledSet

SEGMENTS, FILLED_BOXES, HOLLOW_BOXES = 0, 1, 2


class DomainError(ValueError):
    pass


@dataclass
class Domain:
    """Open set Ω with a distance-to-boundary oracle.

    ``dist_boundary`` is exact when ``certified`` is true, otherwise a lower
    bound. ``closest`` maps points to a nearest boundary point and is used to
    attribute absorbed walkers.
    """

    name: str
    ambient_dim: int
    dist_boundary: Callable[[np.ndarray], np.ndarray]
    inside: Callable[[np.ndarray], np.ndarray]
    closest: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[float], SampledSet]
    bbox: tuple[np.ndarray, np.ndarray]
    kind: str = "bounded"  # bounded | complement | unbounded
    spec: dict = field(default_factory=dict)
    certified: bool = True
    scale: float = 1.0
    far_field_radius: Optional[float] = None

    def boundary_samples(self, resolution: float) -> SampledSet:
        return self.sampler(resolution)

    @property
    def boundary_diameter(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))


class _PrimitiveSet:
    """BVH-backed nearest queries over 2-D segments or boxes."""

    def __init__(self, prims: np.ndarray, kind: int):
        self.prims = np.asarray(prims, dtype=float)
        self.kind = kind
        self._bvh = build_bvh(self.prims, kind)

    def nearest(self, pts: np.ndarray):
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
        lo, hi, left, right, start, count, prims, _ = self._bvh
        return bvh_nearest(pts, lo, hi, left, right, start, count, prims, self.kind)

    def dist(self, pts: np.ndarray) -> np.ndarray:
        return self.nearest(pts)[0]

    def closest(self, pts: np.ndarray) -> np.ndarray:
        return self.nearest(pts)[1]


def _sample_segments(segs: np.ndarray, h: float) -> np.ndarray:
    """Points on each segment at spacing <= h, endpoints included, deduplicated."""
    out = []
    for x0, y0, x1, y1 in segs:
        length = np.hypot(x1 - x0, y1 - y0)
        k = max(1, int(np.ceil(length / h)))
        t = np.linspace(0.0, 1.0, k + 1)
        out.append(np.column_stack([x0 + t * (x1 - x0), y0 + t * (y1 - y0)]))
    pts = np.vstack(out)
    key = np.round(pts / (h * 1e-6)).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(first)]


def polyline_set(vertices, h: float, closed: bool = False, spec: Optional[dict] = None) -> SampledSet:
    """Sampled polyline (open by default) with an exact distance oracle."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 2:
        raise DomainError("a polyline needs two vertices")
    ends = np.vstack([v[1:], v[:1]]) if closed else v[1:]
    segs = np.hstack([v[:len(ends)], ends])
    prim = _PrimitiveSet(segs, SEGMENTS)
    spec = {"kind": "polyline", "vertices": v.tolist(), "closed": closed} if spec is None else spec
    return SampledSet(_sample_segments(segs, h), h * 1.0000001, 1, prim.dist, spec)


def segment_set(h: float = 1e-3, length: float = 1.0) -> SampledSet:
    """[0, length] x {0}."""
    return polyline_set([[0.0, 0.0], [length, 0.0]], h)


def corner_set(h: float = 1e-3, arm: float = 1.0) -> SampledSet:
    """Right-angle corner: arms of length ``arm`` along both axes."""
    return polyline_set([[arm, 0.0], [0.0, 0.0], [0.0, arm]], h)


# ---------------------------------------------------------------------------
# analytic domains


def ball_domain(center=(0.0, 0.0), radius: float = 1.0) -> Domain:
    c = np.asarray(center, dtype=float)
    n = len(c)

    def dist(x):
        return np.abs(radius - np.linalg.norm(np.atleast_2d(x) - c, axis=1))

    def inside(x):
        return np.linalg.norm(np.atleast_2d(x) - c, axis=1) < radius

    def closest(x):
        rel = np.atleast_2d(x) - c
        nr = np.linalg.norm(rel, axis=1, keepdims=True)
        nr[nr == 0] = 1.0
        return c + radius * rel / nr

    def sampler(h):
        if n != 2:
            raise DomainError("boundary sampling implemented for the disk only")
        k = int(np.ceil(2 * np.pi * radius / h))
        th = 2 * np.pi * np.arange(k) / k
        pts = c + radius * np.column_stack([np.cos(th), np.sin(th)])
        return SampledSet(pts, 2 * np.pi * radius / k * 1.0000001, 1, dist,
                          {"kind": "disk", "center": c.tolist(), "radius": radius})

    return Domain("disk", n, dist, inside, closest, sampler, (c - radius, c + radius),
                  "bounded", {"kind": "disk", "center": c.tolist(), "radius": radius},
                  scale=2 * radius)


def half_space(n: int = 2, window: float = 4.0) -> Domain:
    """{x : x_n > 0}; boundary samples cover [-window, window]^(n-1)."""

    def dist(x):
        return np.abs(np.atleast_2d(x)[:, -1])

    def inside(x):
        return np.atleast_2d(x)[:, -1] > 0

    def closest(x):
        y = np.array(np.atleast_2d(x), dtype=float)
        y[:, -1] = 0.0
        return y

    def sampler(h):
        k = int(np.ceil(2 * window / h))
        ticks = np.linspace(-window, window, k + 1)
        grids = np.meshgrid(*([ticks] * (n - 1)), indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids] + [np.zeros(grids[0].size)])
        return SampledSet(pts, 2 * window / k * 1.0000001, n - 1, dist, {"kind": "halfplane", "n": n})

    lo = np.full(n, -window)
    lo[-1] = 0.0
    hi = np.full(n, window)
    hi[-1] = 0.0
    return Domain("halfplane", n, dist, inside, closest, sampler, (lo, hi), "unbounded",
                  {"kind": "halfplane", "n": n, "window": window}, scale=2 * window)


# ---------------------------------------------------------------------------
# polygons, graphs, snowflakes


def _segments_intersect(p, q, r, s) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2, o3, o4 = orient(p, q, r), orient(p, q, s), orient(r, s, p), orient(r, s, q)
    return o1 * o2 < 0 and o3 * o4 < 0


def _check_simple(verts: np.ndarray) -> None:
    nv = len(verts)
    edges = [(verts[i], verts[(i + 1) % nv]) for i in range(nv)]
    lo = np.minimum(verts, np.roll(verts, -1, axis=0))
    hi = np.maximum(verts, np.roll(verts, -1, axis=0))
    for i in range(nv):
        cand = np.nonzero(np.all(lo <= hi[i], axis=1) & np.all(hi >= lo[i], axis=1))[0]
        for j in cand:
            if j <= i + 1 or (i == 0 and j == nv - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                raise DomainError(f"polygon edges {i} and {j} cross")


def polygon_domain(vertices, name: str = "polygon", spec: Optional[dict] = None) -> Domain:
    """Interior of a simple polygon given as an open ring of vertices."""
    verts = np.asarray(vertices, dtype=float)
    if len(verts) < 3:
        raise DomainError("a polygon needs at least 3 vertices")
    _check_simple(verts)
    segs = np.hstack([verts, np.roll(verts, -1, axis=0)])
    prim = _PrimitiveSet(segs, SEGMENTS)
    ring = np.ascontiguousarray(verts)

    def inside(x):
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
        return points_in_polygon(x, ring) & (prim.dist(x) > 0)

    spec = spec or {"kind": "polygon", "vertices": verts.tolist()}

    def sampler(h):
        return SampledSet(_sample_segments(segs, h), h * 1.0000001, 1, prim.dist, spec)

    lo, hi = verts.min(axis=0), verts.max(axis=0)
    return Domain(name, 2, prim.dist, inside, prim.closest, sampler, (lo, hi), "bounded", spec,
                  scale=float(np.linalg.norm(hi - lo)))


def square_domain(side: float = 1.0, corner=(0.0, 0.0)) -> Domain:
    x0, y0 = corner
    v = [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]
    return polygon_domain(v, "square", {"kind": "square", "side": side, "corner": list(corner)})


def koch_vertices(iterations: int) -> np.ndarray:
    """Vertices of the Koch snowflake iterate (unit side triangle, centroid 0)."""
    if not 0 <= iterations <= 6:
        raise DomainError("snowflake iterations must be in 0..6")
    tri = np.array([[0.0, 0.0], [0.5, np.sqrt(3) / 2], [1.0, 0.0]])
    tri -= tri.mean(axis=0)
    pts = tri
    rot = np.array([[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]])
    for _ in range(iterations):
        nxt = []
        for i in range(len(pts)):
            a, b = pts[i], pts[(i + 1) % len(pts)]
            u = (b - a) / 3
            p1, p3 = a + u, a + 2 * u
            # clockwise ring: bump points to the outside
            p2 = p1 + rot @ u
            nxt.extend([a, p1, p2, p3])
        pts = np.array(nxt)
    return pts


def koch_snowflake(iterations: int) -> Domain:
    verts = koch_vertices(iterations)
    return polygon_domain(verts, f"snowflake{iterations}", {"kind": "snowflake", "iter": iterations})


def lipschitz_graph_domain(slope_profile, box=(-1.0, 1.0), extent: float = 1e3) -> Domain:
    """Region above the graph of a piecewise-linear function.

    ``slope_profile`` is a sequence of graph vertices (x, y) with increasing x;
    outside them the graph continues with its end slopes out to ``extent``.
    Boundary samples cover ``box`` in x.
    """
    knots = np.asarray(slope_profile, dtype=float)
    if np.any(np.diff(knots[:, 0]) <= 0):
        raise DomainError("graph knots must have increasing x")
    s0 = (knots[1, 1] - knots[0, 1]) / (knots[1, 0] - knots[0, 0])
    s1 = (knots[-1, 1] - knots[-2, 1]) / (knots[-1, 0] - knots[-2, 0])
    left = knots[0] - extent * np.array([1.0, s0])
    right = knots[-1] + extent * np.array([1.0, s1])
    full = np.vstack([left, knots, right])
    segs = np.hstack([full[:-1], full[1:]])
    prim = _PrimitiveSet(segs, SEGMENTS)

    def graph(x):
        return np.interp(x, full[:, 0], full[:, 1])

    def inside(x):
        x = np.atleast_2d(x)
        return x[:, 1] > graph(x[:, 0])

    spec = {"kind": "graph", "knots": knots.tolist(), "box": list(box)}

    def sampler(h):
        pts = _sample_segments(segs, h)
        keep = (pts[:, 0] >= box[0]) & (pts[:, 0] <= box[1])
        return SampledSet(pts[keep], h * 1.0000001, 1, prim.dist, spec)

    lo = np.array([box[0], graph(np.array([box[0], box[1]])).min()])
    hi = np.array([box[1], full[:, 1].max()])
    return Domain("graph", 2, prim.dist, inside, prim.closest, sampler, (lo, hi), "unbounded",
                  spec, scale=box[1] - box[0])


# ---------------------------------------------------------------------------
# complements of finite unions of squares (Cantor iterates, Batakis domain)


def squares_complement(centers: np.ndarray, sides: np.ndarray, name: str, spec: dict,
                       labels: Optional[np.ndarray] = None, far_factor: float = 50.0) -> Domain:
    """Complement of a finite union of disjoint closed axis-aligned squares."""
    centers = np.asarray(centers, dtype=float)
    sides = np.asarray(sides, dtype=float)
    half = 0.5 * sides[:, None]
    boxes = np.hstack([centers - half, centers + half])
    filled = _PrimitiveSet(boxes, FILLED_BOXES)
    hollow = _PrimitiveSet(boxes, HOLLOW_BOXES)
    lo, hi = boxes[:, :2].min(axis=0), boxes[:, 2:].max(axis=0)
    diam = float(np.linalg.norm(hi - lo))

    def inside(x):
        return filled.dist(x) > 0

    def sampler(h):
        pts, lab = [], []
        for i, (x0, y0, x1, y1) in enumerate(boxes):
            ring = np.array([[x0, y0, x1, y0], [x1, y0, x1, y1], [x1, y1, x0, y1], [x0, y1, x0, y0]])
            p = _sample_segments(ring, h)
            pts.append(p)
            lab.append(np.full(len(p), i if labels is None else labels[i]))
        return SampledSet(np.vstack(pts), h * 1.0000001, 1, hollow.dist, spec, np.concatenate(lab))

    dom = Domain(name, 2, hollow.dist, inside, hollow.closest, sampler, (lo, hi), "complement", spec,
                 scale=diam, far_field_radius=far_factor * diam)
    dom.boxes = boxes
    return dom


def cantor_squares(j: int) -> tuple[np.ndarray, float, np.ndarray]:
    """Centers, side and words (rows of digits) of the 4^j squares of K_j."""
    if not 0 <= j <= 8:
        raise DomainError("Cantor level must be in 0..8")
    rots = [np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]).round(15)
            for a in (0, np.pi / 2, np.pi, 3 * np.pi / 2)]
    offset = np.array([0.25, 0.25])
    centers = np.zeros((1, 2))
    words = np.zeros((1, 0), dtype=np.int64)
    for _ in range(j):
        # K_j = union_k f_k(K_{j-1}) with f_k(x) = R_k (x / 4 + offset)
        centers = np.vstack([(centers / 4 + offset) @ rots[k].T for k in range(4)])
        words = np.vstack([np.hstack([np.full((len(words), 1), k), words]) for k in range(4)])
    return centers, 4.0 ** (-j), words


# Common root side for lattices on every K_j (above diam K_1 = 3√2/4), so that
# level 2m cubes sit at the scale of generation-m squares for all j.
CANTOR_LATTICE_SCALE = 1.1


def cantor_depth(j: int) -> int:
    """Lattice depth resolving one level below the generation-j squares."""
    return 2 * j + 1


def four_corner_cantor(j: int, resolution: Optional[float] = None) -> tuple[SampledSet, Domain]:
    """Boundary cloud of K_j (default spacing side/24, fine enough for a
    lattice of depth :func:`cantor_depth`) and the domain K_j^c."""
    centers, side, words = cantor_squares(j)
    spec = {"kind": "cantor", "j": j}
    dom = squares_complement(centers, np.full(len(centers), side), f"cantor{j}", spec)
    dom.words = words
    h = side / 24 if resolution is None else resolution
    return dom.boundary_samples(h), dom


def domain_from_spec(spec: dict) -> Domain:
    """Rebuild a domain from its JSON spec."""
    kind = spec["kind"]
    if kind == "disk":
        return ball_domain(spec.get("center", (0.0, 0.0)), spec.get("radius", 1.0))
    if kind == "halfplane":
        return half_space(spec.get("n", 2), spec.get("window", 4.0))
    if kind == "square":
        return square_domain(spec.get("side", 1.0), spec.get("corner", (0.0, 0.0)))
    if kind == "polygon":
        return polygon_domain(spec["vertices"])
    if kind == "snowflake":
        return koch_snowflake(int(spec["iter"]))
    if kind == "graph":
        return lipschitz_graph_domain(spec["knots"], tuple(spec.get("box", (-1.0, 1.0))))
    if kind == "cantor":
        return four_corner_cantor(int(spec["j"]))[1]
    if kind == "batakis":
        return squares_complement(np.asarray(spec["centers"]), np.asarray(spec["sides"]), "batakis",
                                  spec)
    raise DomainError(f"unknown domain kind {kind!r}")


def oracle_from_spec(spec: dict) -> Callable[[np.ndarray], np.ndarray]:
    """Distance-to-set oracle recorded in a sample sidecar."""
    if spec["kind"] == "polyline":
        return polyline_set(spec["vertices"], 1.0, bool(spec.get("closed", False))).distance_oracle
    return domain_from_spec(spec).dist_boundary
