"""Geometry of the homogeneous tree in which every vertex has q + 1 neighbours.

Vertices are encoded as label words along the geodesic from a fixed root:
the root is the empty tuple, its q + 1 neighbours are ``(0,)`` .. ``(q,)``,
and each further step away from the root appends a label in ``0 .. q - 1``.
Labels are relative (a word never walks back towards the root), so words
are exactly the root geodesics and the graph distance between two words is
computed from their longest common prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

__all__ = [
    "TreeParams",
    "Vertex",
    "ROOT",
    "parent",
    "children",
    "neighbors",
    "depth",
    "meet_depth",
    "distance",
    "validate_vertex",
    "sphere_size",
    "ball_volume",
    "Ball",
    "enumerate_ball",
    "distance_matrix",
    "meet_depth_count",
    "VolumeReport",
    "check_volume_conditions",
    "uniform_sphere_vertex",
]

Vertex = tuple[int, ...]

ROOT: Vertex = ()


@dataclass(frozen=True)
class TreeParams:
    """Branching parameters of the tree.

    ``branching`` is the number q of children every non-root vertex has; the
    root has q + 1 neighbours and every vertex has degree q + 1.
    """

    branching: int

    def __post_init__(self) -> None:
        if not isinstance(self.branching, int) or isinstance(self.branching, bool):
            raise ValueError("branching factor must be an int")
        if self.branching < 2:
            raise ValueError(f"branching factor must be >= 2, got {self.branching}")

    @property
    def degree(self) -> int:
        return self.branching + 1

    @property
    def walk_spectral_radius(self) -> float:
        """L2 spectral radius of the nearest-neighbour transition operator."""
        q = self.branching
        return 2.0 * sqrt(q) / (q + 1)

    @property
    def spectral_gap(self) -> float:
        """Bottom of the spectrum of the walk Laplacian, 1 minus the radius."""
        return 1.0 - self.walk_spectral_radius

    @property
    def escape_speed(self) -> float:
        """Almost-sure linear speed of the random walk, (q - 1) / (q + 1)."""
        q = self.branching
        return (q - 1.0) / (q + 1.0)


def depth(vertex: Vertex) -> int:
    return len(vertex)


def parent(vertex: Vertex) -> Vertex:
    if not vertex:
        raise ValueError("the root has no parent")
    return vertex[:-1]


def children(params: TreeParams, vertex: Vertex) -> list[Vertex]:
    q = params.branching
    labels = range(q + 1) if not vertex else range(q)
    return [vertex + (a,) for a in labels]


def neighbors(params: TreeParams, vertex: Vertex) -> list[Vertex]:
    if not vertex:
        return children(params, vertex)
    return [parent(vertex)] + children(params, vertex)


def validate_vertex(params: TreeParams, vertex: Vertex) -> None:
    """Raise ValueError unless ``vertex`` is a valid label word."""
    q = params.branching
    for pos, label in enumerate(vertex):
        limit = q + 1 if pos == 0 else q
        if not isinstance(label, int) or not 0 <= label < limit:
            raise ValueError(f"label {label!r} at position {pos} out of range")


def meet_depth(u: Vertex, v: Vertex) -> int:
    """Depth at which the root geodesics of u and v branch apart."""
    i = 0
    for a, b in zip(u, v):
        if a != b:
            break
        i += 1
    return i


def distance(u: Vertex, v: Vertex) -> int:
    return len(u) + len(v) - 2 * meet_depth(u, v)


def sphere_size(params: TreeParams, n: int) -> int:
    """Number of vertices at distance exactly n from any fixed vertex.

    Exact integer: 1 for n = 0 and (q + 1) q**(n - 1) for n >= 1.
    """
    if n < 0:
        raise ValueError("distance must be >= 0")
    if n == 0:
        return 1
    q = params.branching
    return (q + 1) * q ** (n - 1)


def ball_volume(params: TreeParams, radius: int) -> int:
    """Number of vertices within distance ``radius`` of a vertex, exact."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    q = params.branching
    # 1 + (q + 1)(q^r - 1)/(q - 1), summed exactly in integers.
    return 1 + (q + 1) * (q**radius - 1) // (q - 1)


def meet_depth_count(params: TreeParams, k: int, l: int, i: int) -> int:
    """Number of depth-l vertices whose meet with a fixed depth-k vertex has depth i.

    All such vertices are at distance k + l - 2 i from the fixed vertex. The
    counts partition the depth-l sphere around the root:
    sum over i of meet_depth_count(k, l, i) == sphere_size(l).
    """
    q = params.branching
    if k < 0 or l < 0:
        raise ValueError("depths must be >= 0")
    if not 0 <= i <= min(k, l):
        raise ValueError("meet depth must lie in [0, min(k, l)]")
    if i == k == l:
        return 1
    if i == l < k:
        # the unique depth-l ancestor of the fixed vertex
        return 1
    if i == k < l:
        # descendants of the fixed vertex, or the whole sphere if it is the root
        if k == 0:
            return (q + 1) * q ** (l - 1)
        return q ** (l - k)
    # branch off strictly below both: pick the first differing label, then free
    first = q if i == 0 else q - 1
    return first * q ** (l - i - 1)


@dataclass
class Ball:
    """All vertices within a given radius of the root, in breadth-first order."""

    params: TreeParams
    radius: int
    vertices: list[Vertex]
    index: dict[Vertex, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.vertices)

    def depth_slice(self, n: int) -> list[Vertex]:
        return [v for v in self.vertices if len(v) == n]


def enumerate_ball(params: TreeParams, radius: int, budget: int = 50_000) -> Ball:
    """Materialize the ball of the given radius around the root.

    Refuses with ValueError if the exact vertex count exceeds ``budget``,
    since the count grows like q**radius.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    count = ball_volume(params, radius)
    if count > budget:
        raise ValueError(
            f"ball of radius {radius} has {count} vertices, over the budget {budget}"
        )
    vertices: list[Vertex] = [ROOT]
    frontier: list[Vertex] = [ROOT]
    for _ in range(radius):
        frontier = [c for v in frontier for c in children(params, v)]
        vertices.extend(frontier)
    index = {v: i for i, v in enumerate(vertices)}
    return Ball(params, radius, vertices, index)


def distance_matrix(ball: Ball) -> np.ndarray:
    """Pairwise graph distances between the ball's vertices (int32, symmetric)."""
    verts = ball.vertices
    n = len(verts)
    depths = np.array([len(v) for v in verts], dtype=np.int32)
    out = np.zeros((n, n), dtype=np.int32)
    for a in range(n):
        va = verts[a]
        row = out[a]
        for b in range(a + 1, n):
            row[b] = depths[a] + depths[b] - 2 * meet_depth(va, verts[b])
    out += out.T
    return out


@dataclass(frozen=True)
class VolumeReport:
    """Growth diagnostics for ball volumes up to a maximum radius.

    ``reverse_doubling`` is the smallest constant c with V(r) <= c V(r + shift)
    over the scanned range; the volume condition asks for c < 1. The growth
    ratios V(r + shift) / V(r) stay within [growth_min, growth_max].
    """

    shift: int
    max_radius: int
    reverse_doubling: float
    growth_min: float
    growth_max: float

    @property
    def passed(self) -> bool:
        return self.reverse_doubling < 1.0


def check_volume_conditions(
    params: TreeParams, max_radius: int, shift: int = 1
) -> VolumeReport:
    if max_radius < shift or shift < 1:
        raise ValueError("need max_radius >= shift >= 1")
    volumes = [ball_volume(params, r) for r in range(max_radius + 1)]
    ratios = [volumes[r + shift] / volumes[r] for r in range(max_radius - shift + 1)]
    return VolumeReport(
        shift=shift,
        max_radius=max_radius,
        reverse_doubling=1.0 / min(ratios),
        growth_min=min(ratios),
        growth_max=max(ratios),
    )


def uniform_sphere_vertex(
    params: TreeParams, center: Vertex, n: int, rng: np.random.Generator
) -> Vertex:
    """Draw a uniform vertex at distance exactly n from ``center``.

    Walks n non-backtracking steps; every vertex of the sphere corresponds to
    exactly one such path, so the draw is uniform.
    """
    if n < 0:
        raise ValueError("distance must be >= 0")
    current = center
    previous: Vertex | None = None
    for _ in range(n):
        options = [v for v in neighbors(params, current) if v != previous]
        current, previous = options[rng.integers(len(options))], current
    return current
