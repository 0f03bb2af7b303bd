"""Whitney cubes, the Hessian-to-Green ratio integral ∫ |∇²g/g|² δ³ and the
per-cube γ coefficients."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ._kernels import mix_seed
from .beta import BetaParams, linear_deviation
from .cubes import CubeId, CubeLattice
from .domains import Domain
from .geometry import Ball
from .harmonic import PoleOutsideDomain, WosConfig, fundamental_solution, walk
from .parallel import ordered_map


class EmptyWhitneyRegion(ValueError):
    pass


@dataclass(frozen=True)
class WhitneyCube:
    corner: np.ndarray
    side: float
    key: tuple  # (log2-level, integer grid coordinates) for seeding

    @property
    def center(self) -> np.ndarray:
        return self.corner + 0.5 * self.side

    @property
    def volume(self) -> float:
        return self.side ** len(self.corner)

    def dist_to_ball(self, ball: Ball) -> float:
        gap = np.maximum(np.abs(ball.center - self.center) - 0.5 * self.side, 0.0)
        return float(np.linalg.norm(gap))


def _square_box(domain: Domain) -> tuple[np.ndarray, float]:
    lo, hi = (np.asarray(v, dtype=float) for v in domain.bbox)
    side = float(np.max(hi - lo))
    return lo, side


def whitney_cubes(domain: Domain, box: Optional[tuple] = None, N: float = 4.0,
                  min_side: float = 1e-2) -> list[WhitneyCube]:
    """Maximal dyadic subcubes I of ``box`` = (corner, side) with N·I ⊆ Ω.

    Inclusion is certified by dist_boundary(x_I) ≥ N (√n / 2) ℓ(I) at an
    interior center; cubes failing it are split until their side drops below
    ``min_side``. Cubes lying entirely outside Ω are dropped.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if not min_side > 0:
        raise ValueError("min_side must be positive")
    corner, side = _square_box(domain) if box is None else (np.asarray(box[0], float), float(box[1]))
    n = len(corner)
    offs = np.stack(np.meshgrid(*([[0, 1]] * n), indexing="ij"), -1).reshape(-1, n)
    out = []
    level = 0
    idx = np.zeros((1, n), dtype=np.int64)
    half_diag = math.sqrt(n) / 2
    while len(idx) and side * 2.0 ** -level >= min_side:
        s = side * 2.0 ** -level
        corners = corner + idx * s
        centers = corners + 0.5 * s
        dist = domain.dist_boundary(centers)
        ins = domain.inside(centers)
        keep = ins & (dist >= N * half_diag * s)
        for c, i in zip(corners[keep], idx[keep]):
            out.append(WhitneyCube(c, s, (level, *map(int, i))))
        outside = ~ins & (dist >= half_diag * s)
        split = ~keep & ~outside
        idx = (2 * idx[split][:, None, :] + offs[None]).reshape(-1, n)
        level += 1
    return out


# ---------------------------------------------------------------------------
# fields: g and its Hessian at points


@dataclass
class FieldValues:
    g: np.ndarray  # (m,)
    hess: np.ndarray  # (m, n, n)
    g_se: np.ndarray  # stderr of g
    hess_var: np.ndarray  # (m, n, n) variance of each Hessian entry


class OracleField:
    """Exact g with Hessians from a 5^n finite-difference stencil of step ℓ/4."""

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], step_factor: float = 0.25):
        self.g = g
        self.step_factor = step_factor

    def evaluate(self, cubes: Sequence[WhitneyCube]) -> FieldValues:
        x = np.array([c.center for c in cubes])
        h = np.array([c.side for c in cubes]) * self.step_factor
        m, n = x.shape
        ticks = np.array([-2, -1, 0, 1, 2])
        grid = np.stack(np.meshgrid(*([ticks] * n), indexing="ij"), -1).reshape(-1, n)
        pts = x[:, None, :] + h[:, None, None] * grid[None]
        vals = np.asarray(self.g(pts.reshape(-1, n)), dtype=float).reshape((m,) + (5,) * n)
        g0 = vals[(slice(None),) + (2,) * n]
        H = np.zeros((m, n, n))
        w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # d²/dx², 5-point
        w1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0  # d/dx, 5-point
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    sl = [2] * n
                    sl[i] = slice(None)
                    line = vals[(slice(None),) + tuple(sl)]
                    H[:, i, i] = line @ w2 / h ** 2
                else:
                    sl = [2] * n
                    sl[i] = slice(None)
                    sl[j] = slice(None)
                    plane = vals[(slice(None),) + tuple(sl)]
                    if i > j:
                        plane = np.swapaxes(plane, 1, 2)
                    H[:, i, j] = H[:, j, i] = np.einsum("mab,a,b->m", plane, w1, w1) / h ** 2
        # rounding floor of the stencil, used as its standard error so that the
        # clamp removes pure round-off (an affine g then gives exactly 0)
        scale = np.max(np.abs(vals.reshape(m, -1)), axis=1)
        sd = 8 * np.finfo(float).eps * scale / h ** 2
        var = np.broadcast_to((sd ** 2)[:, None, None], (m, n, n)).copy()
        return FieldValues(g0, H, np.zeros(m), var)


def fundamental_hessian(x: np.ndarray, n: int) -> np.ndarray:
    """∇²Φ at the rows of ``x`` (Φ the Newtonian kernel with -ΔΦ = δ)."""
    r2 = np.sum(x * x, axis=1)
    outer = x[:, :, None] * x[:, None, :]
    eye = np.eye(n)[None]
    if n == 2:
        return -(eye / r2[:, None, None] - 2 * outer / r2[:, None, None] ** 2) / (2 * np.pi)
    c = math.gamma(n / 2) / (2 * math.pi ** (n / 2) * (n - 2))
    r = np.sqrt(r2)
    return c * (2 - n) * r[:, None, None] ** (-n) * (eye - n * outer / r2[:, None, None])


class WosField:
    """g = G(pole, ·) and ∇²g by Walk-on-Spheres.

    With u(y) = E_y[Φ(X_τ - pole)] (harmonic in all of Ω), g = Φ(· - pole) - u.
    The Hessian of u at x comes from the first jump Z = x + Rω, R = δ(x):
    for harmonic u, ∇²u(x) = E[(n + 2)/R² (n ωωᵀ - I) u(Z)], and u(Z) is
    replaced by the walker's boundary value. The batch mean is subtracted from
    the boundary values as a control variate (the kernel integrates to 0).
    """

    def __init__(self, domain: Domain, pole, cfg: WosConfig):
        self.domain = domain
        self.pole = np.asarray(pole, dtype=float)
        if not bool(domain.inside(self.pole[None])[0]):
            raise PoleOutsideDomain(f"pole {self.pole.tolist()} is not inside {domain.name}")
        self.cfg = cfg

    batch_walkers: int = 1 << 17

    def _ids(self, cube: WhitneyCube) -> np.ndarray:
        # 44-bit cell hash in the high bits, walker index in the low 20
        h = np.uint64(mix_seed(*cube.key) & ((1 << 44) - 1)) << np.uint64(20)
        return h + np.arange(self.cfg.walkers, dtype=np.uint64)

    def _batch(self, cubes: Sequence[WhitneyCube]):
        W = self.cfg.walkers
        m = len(cubes)
        x = np.array([c.center for c in cubes])
        n = x.shape[1]
        starts = np.repeat(x, W, axis=0)
        ids = np.concatenate([self._ids(c) for c in cubes])
        res = walk(self.domain, starts, self.cfg, record_first=True, ids=ids)
        ok = (res.absorbed & np.isfinite(res.first_radius)).reshape(m, W)
        u = np.zeros(m * W)
        okf = ok.ravel()
        u[okf] = fundamental_solution(np.linalg.norm(res.exit_points[okf] - np.repeat(self.pole[None], okf.sum(), 0), axis=1), n)
        u = u.reshape(m, W)
        k = ok.sum(axis=1)
        kk = np.maximum(k, 1)
        ubar = (u * ok).sum(axis=1) / kk
        R = np.where(okf, res.first_radius, 1.0).reshape(m, W)
        w = ((res.first_points - starts) / np.where(okf, res.first_radius, 1.0)[:, None]).reshape(m, W, n)
        w = np.where(ok[:, :, None], w, 0.0)
        kern = (n + 2) / R[:, :, None, None] ** 2 * (n * w[..., :, None] * w[..., None, :] - np.eye(n))
        samples = kern * ((u - ubar[:, None]) * ok)[:, :, None, None]
        Hu = samples.sum(axis=1) / kk[:, None, None]
        dev = (samples - Hu[:, None]) * ok[:, :, None, None]
        Hvar = (dev ** 2).sum(axis=1) / np.maximum(k - 1, 1)[:, None, None] / kk[:, None, None]
        uvar = (((u - ubar[:, None]) * ok) ** 2).sum(axis=1) / np.maximum(k - 1, 1)
        rel = x - self.pole
        phi = fundamental_solution(np.linalg.norm(rel, axis=1), n)
        g = phi - ubar
        g_se = np.sqrt(uvar / kk)
        H = fundamental_hessian(rel, n) - Hu
        bad = k < 2
        g[bad] = np.nan
        H[bad] = np.nan
        g_se[bad] = np.inf
        Hvar[bad] = np.inf
        return g, H, g_se, Hvar

    def evaluate(self, cubes: Sequence[WhitneyCube], threads: int = 1) -> FieldValues:
        per = max(1, self.batch_walkers // self.cfg.walkers)
        groups = [cubes[i:i + per] for i in range(0, len(cubes), per)]
        parts = ordered_map(self._batch, groups, threads)
        return FieldValues(*(np.concatenate([p[i] for p in parts]) for i in range(4)))


# ---------------------------------------------------------------------------
# the integral


@dataclass
class DeviationIntegral:
    value: float
    per_cell: list  # (WhitneyCube, contribution)
    resolution: float
    pole: Optional[list]
    excluded_ball: Optional[tuple]
    clamped_mass: float
    skipped_mass: float
    cells: int

    def to_json(self) -> dict:
        return {"value": self.value, "clamped_mass": self.clamped_mass, "skipped_mass": self.skipped_mass,
                "resolution": self.resolution, "pole": self.pole, "excluded_ball": self.excluded_ball,
                "cells": self.cells}

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        stem = Path(stem)
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            n = len(self.per_cell[0][0].corner) if self.per_cell else 2
            w.writerow([f"c{i}" for i in range(n)] + ["side", "contribution"])
            for cube, v in self.per_cell:
                w.writerow([repr(float(c)) for c in cube.center] + [repr(cube.side), repr(v)])
        json_path.write_text(json.dumps(self.to_json(), indent=2))
        return csv_path, json_path


def _dist_fn(domain: Domain, delta: Optional[Callable]) -> Callable:
    return domain.dist_boundary if delta is None else delta


def cell_delta_cubed(dist: Callable, cubes: Sequence[WhitneyCube], nodes: int = 3) -> np.ndarray:
    """Cell average of δ³ by a tensor Gauss-Legendre rule (nodes=1 is the
    midpoint value δ(x_I)³)."""
    x = np.array([q.center for q in cubes])
    s = np.array([q.side for q in cubes])
    m, n = x.shape
    t, w = np.polynomial.legendre.leggauss(nodes)
    T = np.stack(np.meshgrid(*([t / 2] * n), indexing="ij"), -1).reshape(-1, n)
    W = np.prod(np.stack(np.meshgrid(*([w / 2] * n), indexing="ij"), -1).reshape(-1, n), axis=1)
    pts = x[:, None, :] + s[:, None, None] * T[None]
    d = np.asarray(dist(pts.reshape(-1, n)), dtype=float).reshape(m, -1)
    return (d ** 3) @ W


def affine_deviation_integral(domain: Domain, pole, B_excl: Optional[Ball], resolution: float,
                              cfg: Optional[WosConfig] = None, *, field=None, N: float = 4.0,
                              box: Optional[tuple] = None, delta: Optional[Callable] = None,
                              cubes: Optional[list] = None, threads: int = 1,
                              clamp_sigmas: float = 2.0, delta_nodes: int = 3) -> DeviationIntegral:
    """Σ over Whitney cubes I missing ``B_excl`` of |∇²g/g|²(x_I) δ(x_I)³ |I|.

    ``field`` (e.g. :class:`OracleField`) replaces the Monte Carlo Green
    function. Contributions below ``clamp_sigmas`` standard errors are set to
    zero (clamped); cells with ĝ ≤ 0 are skipped. δ³ is averaged over each
    cell with ``delta_nodes`` Gauss points per axis. Both are reported as
    fractions: clamped of the unclamped total, skipped of the cell volume.
    """
    if B_excl is not None:
        c = B_excl.center
        if not (bool(domain.inside(c[None])[0]) and float(domain.dist_boundary(c[None])[0]) >= 2 * B_excl.radius):
            raise ValueError("2 B_excl must lie inside the domain")
    if field is None:
        if cfg is None:
            raise ValueError("need a WosConfig or an injected field")
        field = WosField(domain, pole, cfg)
    if cubes is None:
        cubes = whitney_cubes(domain, box, N, resolution)
    if B_excl is not None:
        cubes = [q for q in cubes if q.dist_to_ball(B_excl) >= B_excl.radius]
    if not cubes:
        return DeviationIntegral(0.0, [], resolution, None, None, 0.0, 0.0, 0)
    if isinstance(field, WosField):
        fv = field.evaluate(cubes, threads)
    else:
        fv = field.evaluate(cubes)
    vol = np.array([q.volume for q in cubes])
    H2 = np.sum(fv.hess ** 2, axis=(1, 2))
    var_sum = np.sum(fv.hess_var, axis=(1, 2))
    H2_est = H2 - var_sum  # unbiased for |∇²g|²
    H2_se = np.sqrt(4 * np.sum(fv.hess ** 2 * fv.hess_var, axis=(1, 2)) + 2 * np.sum(fv.hess_var ** 2, axis=(1, 2)))
    weight = cell_delta_cubed(_dist_fn(domain, delta), cubes, delta_nodes) * vol
    skipped = ~(fv.g > 0) | ~np.isfinite(H2)
    g = np.where(skipped, 1.0, fv.g)
    raw = np.where(skipped, 0.0, np.maximum(H2_est, 0.0) / g ** 2 * weight)
    rel_g = np.where(skipped, 0.0, fv.g_se / g)
    se = np.where(skipped, 0.0, np.sqrt((H2_se / g ** 2) ** 2 + (2 * np.maximum(H2_est, 0) / g ** 2 * rel_g) ** 2) * weight)
    clamp = ~skipped & (raw < clamp_sigmas * se)
    contrib = np.where(clamp | skipped, 0.0, raw)
    total_raw = raw.sum()
    per = list(zip(cubes, contrib.tolist()))
    value = math.fsum(contrib.tolist())
    return DeviationIntegral(
        value, per, resolution,
        None if pole is None else np.asarray(pole, float).tolist(),
        None if B_excl is None else (B_excl.center.tolist(), B_excl.radius),
        float(raw[clamp].sum() / total_raw) if total_raw > 0 else 0.0,
        float(vol[skipped].sum() / vol.sum()),
        len(cubes),
    )


def gamma_coefficient(field, lattice: CubeLattice, Q: CubeId, K: float, cubes: Sequence[WhitneyCube]) -> float:
    """(average over U_Q of |∇²f/f|² · ℓ(Q)⁴)^(1/2), where U_Q holds the
    Whitney cubes meeting K'B_Q with side ≥ ℓ(Q)/K', K' = 2K/ρ; the average
    is volume-weighted."""
    q = lattice.cube(Q)
    Kp = 2.0 * K / lattice.rho
    ball = q.ball(Kp)
    U = [c for c in cubes if c.side >= q.side / Kp and c.dist_to_ball(ball) <= ball.radius]
    if not U:
        raise EmptyWhitneyRegion(f"no Whitney cubes for {Q} at K={K}")
    fv = field.evaluate(U)
    vol = np.array([c.volume for c in U])
    ratio = np.sum(fv.hess ** 2, axis=(1, 2)) / fv.g ** 2
    avg = float(np.sum(ratio * vol) / vol.sum())
    return math.sqrt(avg * q.side ** 4)


@dataclass(frozen=True)
class GreenParams:
    N: float = 4.0
    resolution: float = 1e-2
    excl_factor: float = 0.25  # B_Ω radius as a fraction of diam ∂Ω
    beta: BetaParams = BetaParams(bilateral=False)


@dataclass
class GreenBetaReport:
    lhs: float
    rhs: float
    ratio: float
    integral: DeviationIntegral
    deviation_total: float
    diam: float

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "diam": self.diam,
                "integral": self.integral.to_json(), "linear_deviation": self.deviation_total}


def compare_green_beta(domain: Domain, lattice: CubeLattice, pole, params: GreenParams = GreenParams(),
                       cfg: WosConfig = WosConfig(), threads: int = 1) -> GreenBetaReport:
    """lhs = (diam ∂Ω)^d + ∫_{Ω \\ B_Ω} |∇²g/g|² δ³ against the linear deviation
    of the boundary lattice root."""
    pole = np.asarray(pole, dtype=float)
    S = lattice.source
    d = S.target_dim
    diam = S.diameter
    r = min(params.excl_factor * diam, 0.5 * float(domain.dist_boundary(pole[None])[0]))
    B = Ball(pole, r)
    integral = affine_deviation_integral(domain, pole, B, params.resolution, cfg, N=params.N, threads=threads)
    root = (0, 0)
    dev = linear_deviation(lattice, S, root, params.beta.M, params.beta.p, params.beta.budget,
                           params=params.beta)
    lhs = diam ** d + integral.value
    return GreenBetaReport(lhs, dev.total, lhs / dev.total, integral, dev.total, diam)
