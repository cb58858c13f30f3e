"""Bee-colony optimizer over mixed integer/continuous candidate vectors.

Colony-size bees split into food sources (cs_n // 2), each refined by one
employed and one onlooker wave per cycle; sources that fail to improve
`lim` times in a row are scout-replaced by fresh uniform samples.  Moves
blend a random neighbour difference with an attraction toward the global
best, weighted by w_g.  All stochastic draws flow from one seeded
generator in a fixed order, so runs are bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MabcParams:
    cs_n: int = 20  # colony size; food sources = cs_n // 2
    e_h: int = 2  # neighbour pool size per move
    lim: int = 6  # scout trial limit
    iters: int = 30  # cycles per run
    w_g: float = 1.5  # global-attraction weight

    def __post_init__(self):
        if self.cs_n < 2 or self.e_h < 1 or self.lim < 1 or self.w_g < 0:
            raise ValueError("invalid MABC parameters")


@dataclass
class Bounds:
    lo: np.ndarray
    hi: np.ndarray
    is_int: np.ndarray

    @classmethod
    def from_lists(cls, lo, hi, is_int) -> "Bounds":
        return cls(
            lo=np.asarray(lo, dtype=float),
            hi=np.asarray(hi, dtype=float),
            is_int=np.asarray(is_int, dtype=bool),
        )

    @property
    def dim(self) -> int:
        return self.lo.size


@dataclass
class Candidate:
    genes: np.ndarray
    trial: int = 0
    m: float = float("inf")

    def copy(self) -> "Candidate":
        return Candidate(genes=self.genes.copy(), trial=self.trial, m=self.m)


@dataclass
class RunStats:
    ff_n: int = 0  # objective evaluations performed by the optimizer
    tp: float = 0.0  # wall-clock seconds
    history: list = field(default_factory=list)  # per-cycle best m
    scouts: int = 0
    final_pool_m: list = field(default_factory=list)


def repair(genes: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Round integer genes half away from zero, then clip everything."""
    out = genes.astype(float, copy=True)
    ints = bounds.is_int
    out[ints] = np.where(out[ints] >= 0, np.floor(out[ints] + 0.5), np.ceil(out[ints] - 0.5))
    np.clip(out, bounds.lo, bounds.hi, out=out)
    return out


def uniform_candidate(rng: np.random.Generator, bounds: Bounds) -> Candidate:
    genes = rng.uniform(bounds.lo, bounds.hi)
    return Candidate(genes=repair(genes, bounds))


def fitness_of(m: float) -> float:
    return 1.0 / max(m, 1e-300)


def selection_probabilities(ms) -> np.ndarray:
    f = np.array([fitness_of(m) for m in ms])
    return f / f.sum()


def neighbour_move(
    current: Candidate,
    food_sources: list,
    self_index: int,
    gbest: Candidate,
    rng: np.random.Generator,
    params: MabcParams,
    bounds: Bounds,
) -> Candidate:
    """Perturb a random gene subset toward a neighbour and the global best."""
    dim = bounds.dim
    n_genes = int(rng.integers(1, dim + 1))
    idx = rng.choice(dim, size=n_genes, replace=False)
    others = [i for i in range(len(food_sources)) if i != self_index]
    if others:
        pool = rng.choice(others, size=params.e_h, replace=True)
        k = min(pool, key=lambda i: food_sources[i].m)
        xk = food_sources[k].genes
    else:
        xk = current.genes
    phi = rng.uniform(-1.0, 1.0, size=n_genes)
    psi = rng.uniform(0.0, 1.0, size=n_genes)
    genes = current.genes.copy()
    genes[idx] = (
        genes[idx]
        + phi * (genes[idx] - xk[idx])
        + params.w_g * psi * (gbest.genes[idx] - genes[idx])
    )
    return Candidate(genes=repair(genes, bounds), trial=current.trial)


def scout_replace(candidate: Candidate, rng: np.random.Generator, bounds: Bounds) -> Candidate:
    return uniform_candidate(rng, bounds)


def run(
    objective,
    bounds: Bounds,
    params: MabcParams,
    seed,
    seeds_in=(),
    on_cycle=None,
) -> tuple[Candidate, RunStats]:
    """Employed -> onlooker -> scout cycles; returns global best and stats."""
    rng = np.random.default_rng(seed)
    stats = RunStats()
    t0 = time.perf_counter()
    food_n = max(2, params.cs_n // 2)

    def evaluate(cand: Candidate) -> None:
        cand.m = float(objective(cand.genes))
        stats.ff_n += 1

    pool = []
    for seeded in list(seeds_in)[:food_n]:
        cand = Candidate(genes=repair(np.asarray(seeded.genes, dtype=float), bounds))
        evaluate(cand)
        pool.append(cand)
    while len(pool) < food_n:
        cand = uniform_candidate(rng, bounds)
        evaluate(cand)
        pool.append(cand)

    gbest = min(pool, key=lambda c: c.m).copy()

    def greedy(i: int, trial_candidate: Candidate) -> None:
        nonlocal gbest
        evaluate(trial_candidate)
        if trial_candidate.m < pool[i].m:
            trial_candidate.trial = 0
            pool[i] = trial_candidate
            if trial_candidate.m < gbest.m:
                gbest = trial_candidate.copy()
        else:
            pool[i].trial += 1

    for cycle in range(params.iters):
        for i in range(food_n):
            greedy(i, neighbour_move(pool[i], pool, i, gbest, rng, params, bounds))
        probs = selection_probabilities([c.m for c in pool])
        cum = np.cumsum(probs)
        for _ in range(food_n):
            i = int(np.searchsorted(cum, rng.random(), side="right"))
            i = min(i, food_n - 1)
            greedy(i, neighbour_move(pool[i], pool, i, gbest, rng, params, bounds))
        for i in range(food_n):
            if pool[i].trial >= params.lim:
                fresh = scout_replace(pool[i], rng, bounds)
                evaluate(fresh)
                pool[i] = fresh
                stats.scouts += 1
                if fresh.m < gbest.m:
                    gbest = fresh.copy()
        stats.history.append(gbest.m)
        if on_cycle is not None:
            on_cycle(cycle, gbest.m)

    stats.tp = time.perf_counter() - t0
    stats.final_pool_m = [c.m for c in pool]
    return gbest, stats


def tune_sweep(
    objective_factory,
    param_name: str,
    values,
    trials: int,
    short_iter: int,
    base_params: MabcParams,
    bounds: Bounds,
    seed: int = 0,
) -> dict:
    """Population-variance table over one tuning parameter.

    For each setting: the end-of-run variance of the food-source pool per
    trial, plus min/max/mean/standard deviation of the best objective over
    trials (the layout of the tuning tables).
    """
    if not values:
        raise ValueError("empty parameter grid")
    table = {
        "param": param_name,
        "values": list(values),
        "variance": [],
        "min_cost": [],
        "max_cost": [],
        "mean_cost": [],
        "std_cost": [],
    }
    for value in values:
        kwargs = {
            "cs_n": base_params.cs_n,
            "e_h": base_params.e_h,
            "lim": base_params.lim,
            "iters": short_iter,
            "w_g": base_params.w_g,
        }
        kwargs[param_name] = value
        params = MabcParams(**kwargs)
        variances = []
        bests = []
        for t in range(trials):
            best, stats = run(objective_factory(), bounds, params, seed=seed + t)
            variances.append(float(np.var(stats.final_pool_m)))
            bests.append(best.m)
        table["variance"].append(variances)
        table["min_cost"].append(float(np.min(bests)))
        table["max_cost"].append(float(np.max(bests)))
        table["mean_cost"].append(float(np.mean(bests)))
        table["std_cost"].append(float(np.std(bests)))
    return table
