"""Batakis-type modification of the 4-corner Cantor set.

Starting from the unit square, every surviving square I is split into the
squares Child_n(I) that sit nN generations deeper. A child J stops when its
harmonic measure (pole at infinity, estimated by Walk-on-Spheres) is small
relative to I,

    ω(J) / ω(I) < (|J| / |I|)^(1 - τ),        |J| = 4^-(generation of J),

and survives (Top) otherwise. The compact set is F = G ∪ ⋃ ηJ over the stop
squares, where G is approximated by the last surviving generation.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .domains import Domain, cantor_squares, squares_complement
from .harmonic import WosConfig, decision_stderr, harmonic_walk

Word = tuple  # digits in 0..3, outermost map first


class IndeterminateClassification(RuntimeError):
    def __init__(self, word: Word):
        super().__init__(f"Monte Carlo interval straddles the stop threshold at word {''.join(map(str, word))}")
        self.word = word


def stage_depth(N: int, n: int) -> int:
    """Generation of the Top(n) squares: N (1 + 2 + ... + n)."""
    return N * n * (n + 1) // 2


def word_center(word: Word) -> np.ndarray:
    """Center of the Cantor square with address ``word``."""
    rots = [np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.0, -1.0], [1.0, 0.0]]),
            np.array([[-1.0, 0.0], [0.0, -1.0]]), np.array([[0.0, 1.0], [-1.0, 0.0]])]
    x = np.zeros(2)
    for k in reversed(word):
        x = rots[k] @ (x / 4 + 0.25)
    return x


@dataclass
class StageRecord:
    n: int
    parent: Word
    parent_count: int
    children: list  # words
    counts: list
    threshold: float
    stop: list
    top: list
    indeterminate: list

    def to_json(self) -> dict:
        w = lambda ws: ["".join(map(str, x)) for x in ws]
        return {"n": self.n, "parent": "".join(map(str, self.parent)), "parent_count": self.parent_count,
                "threshold": self.threshold, "children": w(self.children), "counts": self.counts,
                "stop": w(self.stop), "top": w(self.top), "indeterminate": w(self.indeterminate)}


@dataclass
class BatakisSpec:
    N: int
    tau: float
    eta: float
    max_n: int
    walkers: int
    base_seed: int
    shell: float
    sigmas: float
    policy: str
    attempts: int
    stages: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return stage_depth(self.N, self.max_n)

    def top_words(self, n: int) -> list:
        if n == 0:
            return [()]
        return [w for s in self.stages if s.n == n for w in s.top]

    def stop_words(self) -> list:
        return [w for s in self.stages for w in s.stop]

    def top_mass(self, n: int) -> float:
        """T(n) = Σ_{J ∈ Top(n)} |J|."""
        return len(self.top_words(n)) * 4.0 ** -stage_depth(self.N, n)

    def decay_table(self) -> list:
        """(parent, n, Σ_Top |J|, |I| 4^(-nNτ), holds) for every processed stage."""
        out = []
        for s in self.stages:
            I = 4.0 ** -len(s.parent)
            lhs = len(s.top) * 4.0 ** -(len(s.parent) + s.n * self.N)
            rhs = I * 4.0 ** (-s.n * self.N * self.tau)
            out.append((s.parent, s.n, lhs, rhs, lhs <= rhs))
        return out

    def beta_partial_sums(self) -> tuple[float, float, float]:
        """(Σ_n n T(n-1), 1 + Σ_{n≥2} n 4^(-(n-1)Nτ) T(n-2), 1 + Σ_{n≥1} n 4^(-nNτ)).

        The first is bounded by the second stage by stage via the decay
        estimate; the third is the closed-form series bound.
        """
        S = math.fsum(n * self.top_mass(n - 1) for n in range(1, self.max_n + 1))
        B = 1.0 + math.fsum(n * 4.0 ** (-(n - 1) * self.N * self.tau) * self.top_mass(n - 2)
                            for n in range(2, self.max_n + 1))
        q = 4.0 ** (-self.N * self.tau)
        series = 1.0 + q / (1.0 - q) ** 2
        return S, B, series

    def squares(self) -> tuple[np.ndarray, np.ndarray, list]:
        """Centers, sides and labels of the squares making up F."""
        cen, side, lab = [], [], []
        for w in self.stop_words():
            cen.append(word_center(w))
            side.append(self.eta * 4.0 ** -len(w))
            lab.append("stop:" + "".join(map(str, w)))
        for w in self.top_words(self.max_n):
            cen.append(word_center(w))
            side.append(4.0 ** -len(w))
            lab.append("top:" + "".join(map(str, w)))
        return np.array(cen).reshape(-1, 2), np.array(side), lab

    def params(self) -> dict:
        return {"N": self.N, "tau": self.tau, "eta": self.eta, "max_n": self.max_n, "walkers": self.walkers,
                "base_seed": self.base_seed, "shell": self.shell, "sigmas": self.sigmas, "policy": self.policy}

    def to_json(self) -> dict:
        cen, side, lab = self.squares()
        return {"kind": "batakis", **self.params(), "attempts": self.attempts,
                "stages": [s.to_json() for s in self.stages],
                "centers": cen.tolist(), "sides": side.tolist(), "labels": lab}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))


def _leaf_counts(dom: Domain, centers: np.ndarray, cfg: WosConfig) -> np.ndarray:
    res = harmonic_walk(dom, None, cfg)
    _, idx = cKDTree(centers).query(res.exit_points[res.absorbed])
    return np.bincount(idx, minlength=len(centers))


def _classify(spec: BatakisSpec, leaf: np.ndarray, codes: np.ndarray, D: int) -> tuple[list, Optional[Word]]:
    stages = []
    first_bad = None
    tops = [()]
    for n in range(1, spec.max_n + 1):
        a = stage_depth(spec.N, n)
        t = 4.0 ** (-n * spec.N * (1 - spec.tau))
        new_tops = []
        pref = _prefix_counts(leaf, codes, D, a)
        parent_pref = _prefix_counts(leaf, codes, D, stage_depth(spec.N, n - 1))
        for I in tops:
            Ic = int(parent_pref.get(_code(I), 0))
            kids = _extensions(I, n * spec.N)
            counts = [int(pref.get(_code(J), 0)) for J in kids]
            stop, top, ind = [], [], []
            for J, c in zip(kids, counts):
                ratio = c / Ic if Ic else 0.0
                se = decision_stderr(c, Ic) if Ic else math.inf
                if abs(ratio - t) < spec.sigmas * se:
                    ind.append(J)
                    if first_bad is None:
                        first_bad = J
                    stop.append(J)  # provisional; only kept under the "stop" policy
                elif ratio < t:
                    stop.append(J)
                else:
                    top.append(J)
            stages.append(StageRecord(n, I, Ic, kids, counts, t, stop, top, ind))
            new_tops.extend(top)
        tops = new_tops
    return stages, first_bad


def _code(word: Word) -> int:
    c = 0
    for k in word:
        c = 4 * c + k
    return c


def _extensions(word: Word, extra: int) -> list:
    out = [tuple(word)]
    for _ in range(extra):
        out = [w + (k,) for w in out for k in range(4)]
    return out


def _prefix_counts(leaf: np.ndarray, codes: np.ndarray, D: int, m: int) -> dict:
    pc = codes // 4 ** (D - m)
    uniq, inv = np.unique(pc, return_inverse=True)
    sums = np.bincount(inv, weights=leaf)
    return {int(u): int(s) for u, s in zip(uniq, sums)}


def batakis_domain(N: int = 2, tau: float = 0.01, eta: float = 1.05, max_n: int = 2,
                   cfg: WosConfig = WosConfig(walkers=100_000), *, sigmas: float = 3.0,
                   max_doublings: int = 2, policy: str = "error") -> tuple[Domain, BatakisSpec]:
    """Build the modified Cantor domain.

    Densities are walker counts of the depth-D Cantor iterate K_D (pole at
    infinity), D the generation of Top(max_n); ancestor counts are sums of
    leaf counts, so Σ_J ω̂(J) ≤ ω̂(I) holds exactly. A child whose ratio lies
    within ``sigmas`` decision stderrs of the threshold is indeterminate: the
    walker count is doubled (fresh seed) up to ``max_doublings`` times, after
    which ``policy="error"`` raises and ``policy="stop"`` files it under Stop.
    """
    if not 1.0 < eta <= 1.2:
        raise ValueError("eta must lie in (1, 1.2]")
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if N < 1 or max_n < 1:
        raise ValueError("N and max_n must be positive")
    if policy not in ("error", "stop"):
        raise ValueError("policy must be 'error' or 'stop'")
    D = stage_depth(N, max_n)
    if D > 8:
        raise ValueError(f"construction needs Cantor generation {D} > 8")
    centers, side, words = cantor_squares(D)
    codes = np.array([_code(tuple(w)) for w in words], dtype=np.int64)
    dom = squares_complement(centers, np.full(len(centers), side), f"cantor{D}", {"kind": "cantor", "j": D})
    shell = min(cfg.shell, 1e-3 * side)
    for attempt in range(max_doublings + 1):
        run = replace(cfg, walkers=cfg.walkers * 2 ** attempt, shell=shell).with_seed(attempt)
        leaf = _leaf_counts(dom, centers, run)
        spec = BatakisSpec(N, tau, eta, max_n, run.walkers, cfg.base_seed, shell, sigmas, policy, attempt + 1)
        stages, bad = _classify(spec, leaf, codes, D)
        spec.stages = stages
        if bad is None:
            break
    else:
        if policy == "error":
            raise IndeterminateClassification(bad)
    cen, sides, lab = spec.squares()
    out = squares_complement(cen, sides, "batakis", spec.to_json(), labels=np.arange(len(sides)))
    return out, spec


def replay(spec: BatakisSpec, threads: int = 1) -> BatakisSpec:
    """Re-run the construction from the recorded parameters and seeds."""
    cfg = WosConfig(walkers=spec.walkers // 2 ** (spec.attempts - 1), base_seed=spec.base_seed,
                    shell=spec.shell, threads=threads)
    _, again = batakis_domain(spec.N, spec.tau, spec.eta, spec.max_n, cfg, sigmas=spec.sigmas,
                              max_doublings=spec.attempts - 1, policy=spec.policy)
    return again
