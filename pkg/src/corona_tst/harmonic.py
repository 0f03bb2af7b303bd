"""Walk-on-Spheres estimation of harmonic measure and Green's functions, and
the density / doubling / Bourgain / log-integral functionals built on them."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import mix_seed, unit_directions, uniforms
from .domains import Domain
from .geometry import Ball

BLOCK = 4096  # walkers per block; fixed so results never depend on thread count


class PoleOutsideDomain(ValueError):
    pass


class NoInteriorPoint(RuntimeError):
    pass


class PoleTooClose(ValueError):
    pass


def env_seed(default: int) -> int:
    """Seed override for CI runs (``CORONA_TST_SEED``)."""
    val = os.environ.get("CORONA_TST_SEED")
    return int(val) if val else default


@dataclass(frozen=True)
class WosConfig:
    shell: float = 1e-4
    max_steps: int = 2000
    walkers: int = 10_000
    base_seed: int = 12345
    far_field_radius: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if not self.shell > 0:
            raise ValueError("shell must be positive")
        if self.walkers < 1:
            raise ValueError("need at least one walker")

    def with_seed(self, *parts: int) -> "WosConfig":
        return replace(self, base_seed=mix_seed(self.base_seed, *parts))


@dataclass
class WalkResult:
    exit_points: np.ndarray  # nearest boundary point at absorption (nan if escaped)
    absorbed: np.ndarray
    steps: np.ndarray
    first_points: Optional[np.ndarray] = None
    first_radius: Optional[np.ndarray] = None

    @property
    def escaped_fraction(self) -> float:
        return float(1.0 - self.absorbed.mean())


def _exterior_poisson_sample(x: np.ndarray, radius: float, u: np.ndarray) -> np.ndarray:
    """Hitting point on the circle |y| = radius of planar Brownian motion
    started at |x| > radius (exterior Poisson kernel, sampled by inversion and
    a disk automorphism)."""
    z = x[:, 0] + 1j * x[:, 1]
    a = radius / np.conj(z)  # inverted start point, rescaled to the unit disk
    w = np.exp(2j * np.pi * u)
    y = radius * (w + a) / (1 + np.conj(a) * w)
    return np.column_stack([y.real, y.imag])


def _walk_block(domain: Domain, starts: np.ndarray, ids: np.ndarray, cfg: WosConfig,
                record_first: bool) -> WalkResult:
    x = np.array(starts, dtype=float)
    m, n = x.shape
    absorbed = np.zeros(m, dtype=bool)
    done = np.zeros(m, dtype=bool)
    steps = np.zeros(m, dtype=np.int64)
    first = np.full((m, n), np.nan) if record_first else None
    first_r = np.full(m, np.nan) if record_first else None
    far = cfg.far_field_radius
    active = np.arange(m)
    for step in range(cfg.max_steps):
        if len(active) == 0:
            break
        xa = x[active]
        d = domain.dist_boundary(xa)
        hit = d < cfg.shell
        if hit.any():
            absorbed[active[hit]] = True
            done[active[hit]] = True
        move = active[~hit]
        dm = d[~hit]
        dirs = unit_directions(cfg.base_seed, ids[move], step, n)
        if record_first and step == 0:
            first[move] = x[move] + dm[:, None] * dirs
            first_r[move] = dm
        x[move] = x[move] + dm[:, None] * dirs
        steps[move] += 1
        if far is not None:
            out = move[np.linalg.norm(x[move], axis=1) > 2 * far]
            if len(out):
                if n != 2:
                    done[out] = True  # transient: escaped to infinity
                else:
                    u = uniforms(cfg.base_seed ^ 0x5DEECE66D, ids[out], step, 1)[:, 0]
                    x[out] = _exterior_poisson_sample(x[out], far, u)
        active = active[~done[active]]
    exit_pts = np.full((m, n), np.nan)
    if absorbed.any():
        exit_pts[absorbed] = domain.closest(x[absorbed])
    return WalkResult(exit_pts, absorbed, steps, first, first_r)


def walk(domain: Domain, starts: np.ndarray, cfg: WosConfig, *, record_first: bool = False,
         id_offset: int = 0, ids: Optional[np.ndarray] = None) -> WalkResult:
    """Run one walker per row of ``starts``; walker i uses the random stream of
    id ``id_offset + i`` (or ``ids[i]``) under ``cfg.base_seed``. A walker's
    path depends only on its own stream, never on how walkers are batched."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    m = len(starts)
    if ids is None:
        ids = np.arange(id_offset, id_offset + m, dtype=np.uint64)
    else:
        ids = np.asarray(ids, dtype=np.uint64)
        if ids.shape != (m,):
            raise ValueError("need one id per start point")
    chunks = [(s, min(s + BLOCK, m)) for s in range(0, m, BLOCK)]

    def job(se):
        s, e = se
        return _walk_block(domain, starts[s:e], ids[s:e], cfg, record_first)

    if cfg.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    cat = lambda name: (None if getattr(parts[0], name) is None
                        else np.concatenate([getattr(p, name) for p in parts]))
    return WalkResult(cat("exit_points"), cat("absorbed"), cat("steps"), cat("first_points"),
                      cat("first_radius"))


def _pole_starts(domain: Domain, x, cfg: WosConfig) -> np.ndarray:
    """Start points for ``cfg.walkers`` walkers. ``x=None`` means the pole at
    infinity of a planar exterior domain: uniform on the far-field circle,
    which is the exact hitting law of that circle from infinity."""
    if x is None:
        if cfg.far_field_radius is None or domain.ambient_dim != 2:
            raise PoleOutsideDomain("pole at infinity needs a planar domain and far_field_radius")
        th = 2 * np.pi * uniforms(mix_seed(cfg.base_seed, 7), np.arange(cfg.walkers), 0, 1)[:, 0]
        return cfg.far_field_radius * np.column_stack([np.cos(th), np.sin(th)])
    x = np.asarray(x, dtype=float)
    if not bool(domain.inside(x[None])[0]):
        raise PoleOutsideDomain(f"pole {x.tolist()} is not inside {domain.name}")
    return np.repeat(x[None], cfg.walkers, axis=0)


def harmonic_walk(domain: Domain, x, cfg: WosConfig) -> WalkResult:
    """Walkers from pole ``x`` (``None`` = infinity); the far-field radius of
    the domain is used when the config leaves it unset."""
    if cfg.far_field_radius is None and domain.far_field_radius is not None:
        cfg = replace(cfg, far_field_radius=domain.far_field_radius)
    return walk(domain, _pole_starts(domain, x, cfg), cfg)


# ---------------------------------------------------------------------------
# harmonic measure


@dataclass
class HarmonicEstimate:
    masses: dict  # id -> (mass, stderr)
    escaped: float
    walkers: int
    base_seed: int
    shell: float
    pole: Optional[list]
    other: float = 0.0

    def mass(self, key) -> float:
        return self.masses[key][0]

    def stderr(self, key) -> float:
        return self.masses[key][1]

    def to_json(self) -> dict:
        return {
            "pole": self.pole,
            "walkers": self.walkers,
            "base_seed": self.base_seed,
            "shell": self.shell,
            "targets": [{"id": k, "mass": v[0], "stderr": v[1]} for k, v in self.masses.items()],
            "other": self.other,
            "escaped": self.escaped,
        }


@dataclass
class CloudTarget:
    """Boundary region given by sample points (e.g. a cube's members)."""

    points: np.ndarray


Target = Union[Ball, CloudTarget]


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def decision_stderr(count: int, n: int) -> float:
    """Stderr with an Agresti-Coull adjusted proportion; never zero, so that
    empty counts cannot certify an inequality."""
    pt = (count + 2.0) / (n + 4.0)
    return math.sqrt(pt * (1 - pt) / (n + 4.0))


def attribute(exit_points: np.ndarray, absorbed: np.ndarray, targets: Sequence[tuple],
              tol: float) -> np.ndarray:
    """Index of the target each walker is credited to; -1 for other/escaped.

    Balls are tested directly; cloud targets compete for the absorption point
    by nearest sample (within ``tol`` + that cloud's spacing). Overlaps go to
    the lowest position in ``targets``.
    """
    m = len(exit_points)
    owner = np.full(m, -1, dtype=np.int64)
    idx = np.nonzero(absorbed)[0]
    if len(idx) == 0:
        return owner
    pts = exit_points[idx]
    cloud_pos = [i for i, (_, t) in enumerate(targets) if isinstance(t, CloudTarget)]
    cloud_owner = np.full(len(idx), -1, dtype=np.int64)
    if cloud_pos:
        allp = np.vstack([targets[i][1].points for i in cloud_pos])
        lab = np.concatenate([np.full(len(targets[i][1].points), i) for i in cloud_pos])
        tree = cKDTree(allp)
        spacing = np.median(tree.query(allp, k=2)[0][:, 1]) if len(allp) > 1 else 0.0
        dd, nn = tree.query(pts)
        ok = dd <= tol + spacing
        cloud_owner[ok] = lab[nn[ok]]
    res = np.full(len(idx), -1, dtype=np.int64)
    for i in range(len(targets) - 1, -1, -1):
        t = targets[i][1]
        if isinstance(t, CloudTarget):
            hit = cloud_owner == i
        else:
            hit = np.linalg.norm(pts - t.center, axis=1) <= t.radius + tol
        res[hit] = i
    owner[idx] = res
    return owner


def wos_measure(domain: Domain, x, targets: Sequence[tuple], cfg: WosConfig) -> HarmonicEstimate:
    """Harmonic measure of each ``(id, Ball | CloudTarget)`` seen from ``x``.

    ``x=None`` places the pole at infinity (planar exterior domains).
    """
    res = harmonic_walk(domain, x, cfg)
    owner = attribute(res.exit_points, res.absorbed, targets, 0.0)
    n = cfg.walkers
    masses = {}
    for i, (key, _) in enumerate(targets):
        p = float(np.count_nonzero(owner == i)) / n
        masses[key] = (p, binomial_stderr(p, n))
    escaped = res.escaped_fraction
    other = float(np.count_nonzero(res.absorbed & (owner < 0))) / n
    return HarmonicEstimate(masses, escaped, n, cfg.base_seed, cfg.shell,
                            None if x is None else np.asarray(x, float).tolist(), other)


class ExitSample:
    """Absorption points of one walker batch, answering ball-mass queries."""

    def __init__(self, res: WalkResult, walkers: int):
        self.walkers = walkers
        self.points = res.exit_points[res.absorbed]
        self.escaped = res.escaped_fraction
        self._tree = cKDTree(self.points) if len(self.points) else None

    def count(self, ball: Ball) -> int:
        if self._tree is None:
            return 0
        return int(self._tree.query_ball_point(ball.center, ball.radius, return_length=True))

    def mass(self, ball: Ball) -> tuple[float, float]:
        p = self.count(ball) / self.walkers
        return p, binomial_stderr(p, self.walkers)


# ---------------------------------------------------------------------------
# Green's function


def fundamental_solution(r: np.ndarray, n: int) -> np.ndarray:
    """Newtonian kernel with -Δ Φ = δ in R^n."""
    r = np.asarray(r, dtype=float)
    if n == 2:
        return -np.log(r) / (2 * np.pi)
    c = math.gamma(n / 2) / (2 * math.pi ** (n / 2) * (n - 2))
    return c * r ** (2 - n)


def wos_green(domain: Domain, pole, query, cfg: WosConfig) -> tuple[float, float]:
    """G(pole, query) = Φ(query - pole) - E[Φ(X_τ - pole)], walkers from query."""
    pole = np.asarray(pole, dtype=float)
    query = np.asarray(query, dtype=float)
    for p in (pole, query):
        if not bool(domain.inside(p[None])[0]):
            raise PoleOutsideDomain(f"{p.tolist()} is not inside {domain.name}")
    if np.allclose(pole, query):
        raise ValueError("pole and query must differ")
    n = len(pole)
    res = walk(domain, np.repeat(query[None], cfg.walkers, axis=0), cfg)
    ok = res.absorbed
    vals = fundamental_solution(np.linalg.norm(res.exit_points[ok] - pole, axis=1), n)
    # escaped walkers (unbounded domains in n >= 3) carry Φ(∞) = 0
    vals = np.concatenate([vals, np.zeros(int((~ok).sum()))]) if n > 2 else vals
    if len(vals) == 0:
        return float("nan"), float("nan")
    direct = float(fundamental_solution(np.linalg.norm(query - pole), n))
    return direct - float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0


# ---------------------------------------------------------------------------
# density and the structural lemmas


def density(mass: float, diam: float, d: int = 1, stderr: float = 0.0) -> tuple[float, float]:
    """Θ^d = mass / diam^d with the stderr scaled alike."""
    if not diam > 0:
        raise ValueError("diameter must be positive")
    return mass / diam ** d, stderr / diam ** d


def sample_points_in_ball(domain: Domain, ball: Ball, count: int, seed: int,
                          max_tries: int = 100_000, predicate=None) -> np.ndarray:
    """Rejection-sample ``count`` interior points of ``ball``."""
    n = len(ball.center)
    found = []
    tried = 0
    batch = 0
    while len(found) < count and tried < max_tries:
        k = min(4096, max_tries - tried)
        u = uniforms(seed, np.arange(tried, tried + k), batch, n + 1)
        g = 2 * u[:, :n] - 1
        cand = ball.center + ball.radius * g
        ok = (np.linalg.norm(g, axis=1) < 1) & domain.inside(cand)
        if predicate is not None:
            ok &= predicate(cand)
        found.extend(cand[ok][: count - len(found)])
        tried += k
        batch += 1
    if len(found) < count:
        raise NoInteriorPoint(f"found {len(found)} of {count} interior points in {ball}")
    return np.array(found)


@dataclass
class BourgainReport:
    minimum: float
    stderr: float
    pole: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    poles: np.ndarray


def check_bourgain(domain: Domain, B: Ball, n_poles: int, cfg: WosConfig) -> BourgainReport:
    """min over sampled poles x in B ∩ Ω of ω^x(2B)."""
    poles = sample_points_in_ball(domain, B, n_poles, mix_seed(cfg.base_seed, 11))
    target = [("2B", B.scaled(2.0))]
    vals, errs = [], []
    for i, x in enumerate(poles):
        est = wos_measure(domain, x, target, cfg.with_seed(i))
        vals.append(est.mass("2B"))
        errs.append(est.stderr("2B"))
    vals, errs = np.array(vals), np.array(errs)
    k = int(np.argmin(vals))
    return BourgainReport(float(vals[k]), float(errs[k]), poles[k], vals, errs, poles)


@dataclass
class DoublingReport:
    ratios: np.ndarray
    poles: np.ndarray
    masses_B: np.ndarray
    masses_2B: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))


def check_doubling(domain: Domain, balls: Sequence[Ball], alpha: float, cfg: WosConfig,
                   poles_per_ball: int = 1) -> DoublingReport:
    """ω^x(2B) / ω^x(B) with poles x satisfying dist(x, AB ∩ ∂Ω) >= alpha |x - x_B|.

    Poles are drawn from the annulus 4 r_B < |x - x_B| < 8 r_B and, so that
    ω^x(B) is resolvable by a walker batch, from its non-tangential part
    dist(x, ∂Ω) >= alpha |x - x_B| (which implies the condition above).
    """
    ratios, poles, mb, m2 = [], [], [], []
    for bi, B in enumerate(balls):
        big = B.scaled(8.0)

        def ok(c, B=B):
            rel = np.linalg.norm(c - B.center, axis=1)
            return (rel > 4 * B.radius) & (domain.dist_boundary(c) >= alpha * rel)

        xs = sample_points_in_ball(domain, big, poles_per_ball, mix_seed(cfg.base_seed, 13, bi),
                                   predicate=ok)
        for pi, x in enumerate(xs):
            res = harmonic_walk(domain, x, cfg.with_seed(bi, pi))
            ex = ExitSample(res, cfg.walkers)
            cb, c2 = ex.count(B), ex.count(B.scaled(2.0))
            ratios.append(c2 / cb if cb else np.inf)
            poles.append(x)
            mb.append(cb / cfg.walkers)
            m2.append(c2 / cfg.walkers)
    return DoublingReport(np.array(ratios), np.array(poles), np.array(mb), np.array(m2))


# ---------------------------------------------------------------------------
# Jensen-type log integral and the local lower bound


@dataclass
class LogIntegral:
    value: float
    per_cube: list  # (cube id, sigma, omega, flagged)
    flagged_mass: float
    walkers: int
    escaped: float


def log_integral(domain: Domain, lattice, Q0, pole, depth: int, cfg: WosConfig,
                 M: float = 4.0) -> LogIntegral:
    """Discrete 1 + avg log(1/k) + log(avg k) over the cubes ``depth`` levels
    below ``Q0``, with surface mass σ(Q) = (member count) · h^d and k = ω/σ.

    ``pole=None`` uses the pole at infinity (planar exterior domains).
    Zero-mass cubes are floored at 1 / (10 walkers) and flagged.
    """
    Q0c = lattice.cube(Q0)
    if pole is not None:
        if np.linalg.norm(np.asarray(pole, float) - Q0c.center) < M * Q0c.side:
            raise PoleTooClose(f"pole within {M} B_Q0")
    bottom = lattice.descendants_at(Q0, Q0[0] + depth)
    S = lattice.source
    d = S.target_dim
    targets = [(q, CloudTarget(S.points[lattice.cube(q).members])) for q in bottom]
    res = harmonic_walk(domain, pole, cfg)
    owner = attribute(res.exit_points, res.absorbed, targets, cfg.shell)
    counts = np.bincount(owner[owner >= 0], minlength=len(targets))
    n = cfg.walkers
    sig = np.array([len(lattice.cube(q).members) for q in bottom], dtype=float) * S.resolution ** d
    om = counts / n
    floor = 1.0 / (10 * n)
    flagged = om == 0
    om_f = np.where(flagged, floor, om)
    sig0 = sig.sum()
    om0 = om_f.sum()
    value = 1.0 + float(np.sum(sig / sig0 * np.log(sig / om_f))) + math.log(om0 / sig0)
    per = [(q, float(s), float(o), bool(f)) for q, s, o, f in zip(bottom, sig, om, flagged)]
    return LogIntegral(value, per, float(sig[flagged].sum() / sig0), n, res.escaped_fraction)


def hruscev_bound(ell_Q0_d: float, content_E: float, beta_sum_E: float, C: float) -> float:
    """exp(-C ℓ(Q0)^d / H^d_∞(E) · exp(C Σβ ℓ^d / H^d_∞(E)))."""
    if not content_E > 0:
        raise ValueError("content of E must be positive")
    inner = C * beta_sum_E / content_E
    outer = C * ell_Q0_d / content_E
    with np.errstate(over="ignore"):
        return float(np.exp(-outer * np.exp(inner)))
