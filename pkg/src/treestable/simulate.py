"""Monte Carlo simulation of the stable jump process and its ball exits."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .stable import sphere_jump_rates, total_jump_rate
from .subordinator import StableParams, sample_increment
from .tree import ROOT, TreeParams, Vertex, uniform_sphere_vertex

__all__ = [
    "JumpLaw",
    "build_jump_law",
    "sample_jump_distance",
    "evolve",
    "estimate_annulus",
    "ExitSample",
    "sample_exits",
    "FAR_CLASS",
    "ESCAPE_CLASS",
    "subordinated_marginal_counts",
]

# exit-class keys for overshoots beyond the cap and for jumps beyond the table
FAR_CLASS = ("far",)
ESCAPE_CLASS = ("escape",)


@dataclass(frozen=True)
class JumpLaw:
    """Jump-distance law of the process, truncated at ``max_distance``.

    ``tail_fraction`` is the probability that a jump goes beyond the table;
    sampling returns None for those. The tail decays only like a power of
    the cutoff, so it is kept as an explicit escape outcome and never
    renormalized away.
    """

    tree: TreeParams
    stable: StableParams
    total_rate: float
    max_distance: int
    distance_cdf: np.ndarray = field(repr=False)
    tail_fraction: float = 0.0


def build_jump_law(tree: TreeParams, s: StableParams,
                   max_distance: int = 2000) -> JumpLaw:
    if max_distance < 2:
        raise ValueError("max_distance must be >= 2")
    rates = sphere_jump_rates(tree, s, max_distance)
    total = total_jump_rate(tree, s)
    cdf = np.cumsum(rates[1:]) / total
    tail = 1.0 - float(cdf[-1])
    if tail < -1e-9:
        raise RuntimeError(f"jump rates exceed the total rate by {-tail:.2e}")
    return JumpLaw(tree, s, total, max_distance, cdf, max(tail, 0.0))


def sample_jump_distance(law: JumpLaw, rng: np.random.Generator) -> int | None:
    u = rng.random()
    if u >= law.distance_cdf[-1]:
        return None
    return int(np.searchsorted(law.distance_cdf, u, side="right")) + 1


def evolve(tree: TreeParams, law: JumpLaw, t_end: float,
           rng: np.random.Generator, start: Vertex = ROOT):
    """Run the jump process to time t_end; returns (vertex or None, jumps).

    None marks a jump beyond the table: the path has escaped to a distance
    at least max_distance - depth and stays there for our purposes.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be > 0")
    vertex = start
    jumps = 0
    clock = rng.exponential(1.0 / law.total_rate)
    while clock <= t_end:
        n = sample_jump_distance(law, rng)
        jumps += 1
        if n is None:
            return None, jumps
        vertex = uniform_sphere_vertex(tree, vertex, n, rng)
        clock += rng.exponential(1.0 / law.total_rate)
    return vertex, jumps


def estimate_annulus(tree: TreeParams, law: JumpLaw, t: float,
                     radius_lo: int, radius_hi: int, n_paths: int,
                     seed: int) -> tuple[float, float]:
    """Monte Carlo annulus mass with its standard error.

    Escaped paths count as outside the annulus, which is exact as long as
    radius_hi stays well below the jump table cutoff.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_paths):
        vertex, _ = evolve(tree, law, t, rng)
        if vertex is not None and radius_lo <= len(vertex) <= radius_hi:
            hits += 1
    p = hits / n_paths
    return p, sqrt(max(p * (1.0 - p), 1e-12) / n_paths)


@dataclass
class ExitSample:
    """Monte Carlo exit statistics from a centered ball."""

    radius: int
    n_paths: int
    overshoot_cap: int
    times: np.ndarray = field(repr=False)
    class_counts: Counter = field(repr=False)

    @property
    def mean_time(self) -> float:
        return float(self.times.mean())

    @property
    def time_se(self) -> float:
        return float(self.times.std(ddof=1) / sqrt(self.times.size))

    def class_frequencies(self) -> dict:
        return {k: v / self.n_paths for k, v in self.class_counts.items()}


def sample_exits(tree: TreeParams, law: JumpLaw, radius: int, n_paths: int,
                 seed: int, start: Vertex = ROOT,
                 overshoot_cap: int = 30) -> ExitSample:
    """Simulate first exits from the ball of the given radius.

    Exit classes are keyed by (gateway, overshoot): the gateway is the
    sphere vertex the exit position sits behind, the overshoot its extra
    depth. Overshoots beyond the cap land in FAR_CLASS, jumps beyond the
    table in ESCAPE_CLASS; both still yield valid exit times.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if len(start) > radius:
        raise ValueError("start must lie inside the ball")
    rng = np.random.default_rng(seed)
    times = np.empty(n_paths)
    counts: Counter = Counter()
    for i in range(n_paths):
        vertex = start
        clock = rng.exponential(1.0 / law.total_rate)
        while True:
            n = sample_jump_distance(law, rng)
            if n is None:
                counts[ESCAPE_CLASS] += 1
                break
            vertex = uniform_sphere_vertex(tree, vertex, n, rng)
            if len(vertex) > radius:
                over = len(vertex) - radius
                if over > overshoot_cap:
                    counts[FAR_CLASS] += 1
                else:
                    counts[(vertex[:radius], over)] += 1
                break
            clock += rng.exponential(1.0 / law.total_rate)
        times[i] = clock
    return ExitSample(radius, n_paths, overshoot_cap, times, counts)


def subordinated_marginal_counts(tree: TreeParams, s: StableParams, t: float,
                                 n_paths: int, seed: int, far_at: int,
                                 step_cap: int = 3000) -> np.ndarray:
    """Distance histogram of the process at time t by direct subordination.

    Draws the subordinator, then a Poisson number of walk steps, then runs
    the distance chain for all paths synchronously. Paths over ``step_cap``
    steps are binned as far: at that many steps the walk is far outside any
    distance of interest with overwhelming probability. Returns counts for
    distances 0..far_at plus a final far bucket.

    This route shares nothing with the kernel quadratures except the
    subordinator sampler, so it cross-checks the whole pipeline.
    """
    if far_at < 1 or n_paths < 1:
        raise ValueError("need far_at >= 1 and n_paths >= 1")
    q = tree.branching
    rng = np.random.default_rng(seed)
    s_draw = sample_increment(s, t, rng, size=n_paths)
    lam = np.minimum(s_draw, 4.0 * step_cap)
    steps = rng.poisson(lam)
    steps = np.where(s_draw > 4.0 * step_cap, step_cap + 1, steps)
    steps = np.minimum(steps, step_cap + 1).astype(np.int64)

    order = np.argsort(-steps)
    steps = steps[order]
    dist = np.zeros(n_paths, dtype=np.int64)
    p_down = 1.0 / (q + 1.0)
    m = 1
    while m <= step_cap and steps[0] >= m:
        active = int(np.searchsorted(-steps, -m, side="right"))
        moves = np.where(rng.random(active) < p_down, -1, 1)
        d = dist[:active]
        dist[:active] = np.where(d == 0, 1, d + moves)
        m += 1

    counts = np.zeros(far_at + 2, dtype=np.int64)
    far = (steps > step_cap) | (dist > far_at)
    np.add.at(counts, np.where(far, far_at + 1, dist), 1)
    return counts
