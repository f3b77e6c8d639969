"""Seeded sampling of probabilistic reductions.

``sample_reduce`` performs one run step by step.  Batch sampling first
compiles the reachable reduction graph of an expression into flat arrays
(deterministic stretches collapsed, so only branching points remain) and
then walks it once per sample with the compiled kernel.

Seeding: samples are split into chunks of ``CHUNK`` rows.  Chunk ``k`` draws
its uniforms from ``numpy.random.default_rng(SeedSequence(seed,
spawn_key=(k,)))``, one row per sample and one column per branching level.
Counts are summed over chunks, so results do not depend on how many workers
process the chunks.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernel import DEFAULT_FUEL, FuelExhausted
from .prob import StuckTerm, WeightedStep, step_rho
from .syntax import EMPTY, Context, Expr, alpha_key, pretty

__all__ = [
    "CHUNK", "Reducer", "CompiledGraph", "GraphTooLarge", "sample_reduce",
    "compile_graph", "sample_counts", "run_chunks",
]

CHUNK = 8192


class GraphTooLarge(RuntimeError):
    pass


class Reducer:
    """Memoizes ``step_rho`` for one context."""

    def __init__(self, ctx: Context = EMPTY):
        self.ctx = ctx
        self.memo: dict[Expr, list[WeightedStep]] = {}

    def steps(self, e: Expr) -> list[WeightedStep]:
        out = self.memo.get(e)
        if out is None:
            out = self.memo[e] = step_rho(e, self.ctx)
        return out


def sample_reduce(e: Expr, seed: int = 0, fuel: int = DEFAULT_FUEL,
                  ctx: Context = EMPTY, reducer: Reducer | None = None) -> tuple[Expr, float]:
    """Reduce ``e`` to a normal form, drawing branches from a seeded generator.

    Returns the normal form and the log-probability of the path taken.
    """
    rng = random.Random(seed)
    red = reducer if reducer is not None else Reducer(ctx)
    logp = 0.0
    for _ in range(fuel):
        steps = red.steps(e)
        if not steps:
            if not e.pure:
                raise StuckTerm(f"no permitted step for {pretty(e)}")
            return e, logp
        if len(steps) == 1:
            chosen = steps[0]
        else:
            u, acc = rng.random(), 0.0
            chosen = steps[-1]
            for s in steps:
                acc += s.probability
                if u < acc:
                    chosen = s
                    break
        logp += math.log(chosen.probability)
        e = chosen.result
    if not red.steps(e) and e.pure:
        return e, logp
    raise FuelExhausted(f"no normal form within {fuel} steps")


@dataclass
class CompiledGraph:
    offsets: np.ndarray
    cum: np.ndarray
    targets: np.ndarray
    leaf_of: np.ndarray
    root: int
    depth: int
    leaves: list

    @property
    def n_nodes(self) -> int:
        return len(self.leaf_of)


def compile_graph(e: Expr, ctx: Context = EMPTY, fuel: int = DEFAULT_FUEL,
                  max_nodes: int = 2_000_000, reducer: Reducer | None = None) -> CompiledGraph:
    """Flatten the reachable reduction graph of ``e`` into arrays."""
    red = reducer if reducer is not None else Reducer(ctx)
    settled: dict[Expr, Expr] = {}

    def resolve(x: Expr) -> Expr:
        trail = []
        for _ in range(fuel):
            hit = settled.get(x)
            if hit is not None:
                x = hit
                break
            steps = red.steps(x)
            if len(steps) != 1:
                break
            trail.append(x)
            x = steps[0].result
        else:
            raise FuelExhausted(f"deterministic stretch longer than {fuel} steps")
        for t in trail:
            settled[t] = x
        return x

    ids: dict[Expr, int] = {}
    order: list[Expr] = []
    alts: list[list] = []
    root = resolve(e)
    ids[root] = 0
    order.append(root)
    i = 0
    while i < len(order):
        x = order[i]
        steps = red.steps(x)
        if not steps and not x.pure:
            raise StuckTerm(f"no permitted step for {pretty(x)}")
        row = []
        for s in steps:
            y = resolve(s.result)
            j = ids.get(y)
            if j is None:
                j = ids[y] = len(order)
                order.append(y)
                if len(order) > max_nodes:
                    raise GraphTooLarge(f"more than {max_nodes} branching points")
            row.append((s.probability, j))
        alts.append(row)
        i += 1

    n = len(order)
    offsets = np.zeros(n + 1, dtype=np.int64)
    cum, targets, leaves = [], [], []
    leaf_of = np.full(n, -1, dtype=np.int64)
    for v, row in enumerate(alts):
        if not row:
            leaf_of[v] = len(leaves)
            leaves.append(order[v])
        acc = 0.0
        for k, (p, j) in enumerate(row):
            acc += p
            cum.append(1.0 if k == len(row) - 1 else acc)
            targets.append(j)
        offsets[v + 1] = len(cum)

    depth = np.zeros(n, dtype=np.int64)
    # longest branching path, by post-order over the DAG
    state = np.zeros(n, dtype=np.int8)
    stack = [0]
    while stack:
        v = stack[-1]
        if state[v] == 0:
            state[v] = 1
            for _, j in alts[v]:
                if state[j] == 0:
                    stack.append(j)
                elif state[j] == 1:
                    raise RuntimeError("reduction graph has a cycle")
        else:
            stack.pop()
            if state[v] == 1:
                state[v] = 2
                depth[v] = 1 + max(depth[j] for _, j in alts[v]) if alts[v] else 0
    return CompiledGraph(offsets, np.array(cum, dtype=np.float64),
                         np.array(targets, dtype=np.int64), leaf_of, 0,
                         int(depth[0]), leaves)


def _chunk_counts(args) -> np.ndarray:
    offsets, cum, targets, leaf_of, root, depth, seed, k, m = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
    u = rng.random((m, max(depth, 1)))
    return kernels.walk(offsets, cum, targets, leaf_of, root, u)


def run_chunks(g: CompiledGraph, n_samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Leaf hit counts for ``n_samples`` walks of ``g``."""
    jobs = []
    for k, start in enumerate(range(0, n_samples, CHUNK)):
        m = min(CHUNK, n_samples - start)
        jobs.append((g.offsets, g.cum, g.targets, g.leaf_of, g.root, g.depth, seed, k, m))
    total = np.zeros(len(g.leaves), dtype=np.int64)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(_chunk_counts, jobs):
                total += c
    else:
        for job in jobs:
            total += _chunk_counts(job)
    return total


def sample_counts(e: Expr, n_samples: int, seed: int = 0, ctx: Context = EMPTY,
                  fuel: int = DEFAULT_FUEL, workers: int = 1,
                  graph: CompiledGraph | None = None) -> dict:
    """Sampled normal forms: {alpha_key: (normal form, count)}."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    g = graph if graph is not None else compile_graph(e, ctx, fuel)
    counts = run_chunks(g, n_samples, seed, workers)
    out: dict = {}
    for leaf, c in zip(g.leaves, counts):
        k = alpha_key(leaf)
        prev = out.get(k)
        out[k] = (leaf, int(c) + (prev[1] if prev else 0))
    return out
