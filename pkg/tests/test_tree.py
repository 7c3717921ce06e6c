"""Tree geometry against brute-force enumeration of small balls."""

from collections import deque

import numpy as np
import pytest

from treestable.tree import (
    ROOT,
    Ball,
    TreeParams,
    ball_volume,
    check_volume_conditions,
    children,
    distance,
    distance_matrix,
    enumerate_ball,
    meet_depth,
    meet_depth_count,
    neighbors,
    parent,
    sphere_size,
    uniform_sphere_vertex,
    validate_vertex,
)


def bfs_distances(params: TreeParams, ball: Ball, source) -> dict:
    """Graph distances within the ball by breadth-first search."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in neighbors(params, v):
            if w in ball.index and w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def test_params_validation():
    with pytest.raises(ValueError):
        TreeParams(1)
    with pytest.raises(ValueError):
        TreeParams(2.0)
    params = TreeParams(2)
    assert params.degree == 3
    np.testing.assert_allclose(params.walk_spectral_radius, 2.0 * np.sqrt(2.0) / 3.0)
    np.testing.assert_allclose(params.spectral_gap, 1.0 - 2.0 * np.sqrt(2.0) / 3.0)
    np.testing.assert_allclose(params.escape_speed, 1.0 / 3.0)


def test_sphere_and_ball_counts_exact():
    for q in (2, 3, 5):
        params = TreeParams(q)
        assert sphere_size(params, 0) == 1
        assert sphere_size(params, 1) == q + 1
        for n in range(2, 12):
            assert sphere_size(params, n) == (q + 1) * q ** (n - 1)
        for r in range(12):
            assert ball_volume(params, r) == sum(
                sphere_size(params, n) for n in range(r + 1)
            )


def test_enumerate_ball_matches_counts():
    params = TreeParams(2)
    ball = enumerate_ball(params, 4)
    assert len(ball) == ball_volume(params, 4)
    for n in range(5):
        assert len(ball.depth_slice(n)) == sphere_size(params, n)
    # label words must all be valid
    for v in ball.vertices:
        validate_vertex(params, v)
    with pytest.raises(ValueError):
        enumerate_ball(params, 30)


def test_vertex_encoding():
    params = TreeParams(2)
    assert len(children(params, ROOT)) == 3
    assert len(children(params, (0,))) == 2
    assert parent((0, 1)) == (0,)
    with pytest.raises(ValueError):
        parent(ROOT)
    with pytest.raises(ValueError):
        validate_vertex(params, (3,))
    with pytest.raises(ValueError):
        validate_vertex(params, (0, 2))


def test_distance_against_bfs():
    for q in (2, 3):
        params = TreeParams(q)
        radius = 4 if q == 2 else 3
        ball = enumerate_ball(params, radius)
        for u in ball.vertices:
            # geodesics between ball vertices pass through their meet, which
            # lies in the ball too, so BFS in the induced graph is exact
            bfs = bfs_distances(params, ball, u)
            assert len(bfs) == len(ball)
            for v in ball.vertices:
                assert distance(u, v) == bfs[v]


def test_distance_matrix_symmetric():
    params = TreeParams(2)
    ball = enumerate_ball(params, 3)
    mat = distance_matrix(ball)
    assert mat.shape == (len(ball), len(ball))
    assert np.array_equal(mat, mat.T)
    assert np.all(np.diag(mat) == 0)
    i = ball.index[(0,)]
    j = ball.index[(1, 0)]
    assert mat[i, j] == 3


def test_meet_depth_count_brute_force():
    for q in (2, 3):
        params = TreeParams(q)
        radius = 5 if q == 2 else 4
        ball = enumerate_ball(params, radius)
        for k in range(radius + 1):
            fixed = (0,) * k
            for l in range(radius + 1):
                sphere = ball.depth_slice(l)
                for i in range(min(k, l) + 1):
                    observed = sum(1 for v in sphere if meet_depth(fixed, v) == i)
                    assert meet_depth_count(params, k, l, i) == observed


def test_meet_depth_count_partitions_sphere():
    params = TreeParams(3)
    for k in range(7):
        for l in range(7):
            total = sum(meet_depth_count(params, k, l, i) for i in range(min(k, l) + 1))
            assert total == sphere_size(params, l)
    with pytest.raises(ValueError):
        meet_depth_count(params, 2, 3, 3)


def test_volume_conditions():
    report = check_volume_conditions(TreeParams(2), 20)
    assert report.passed
    assert report.reverse_doubling < 1.0
    # growth ratio V(r+1)/V(r) tends to q from above for large r
    assert report.growth_min > 2.0
    assert report.growth_max <= 4.0
    with pytest.raises(ValueError):
        check_volume_conditions(TreeParams(2), 0)


def test_uniform_sphere_vertex_is_uniform():
    params = TreeParams(2)
    rng = np.random.default_rng(7)
    n = 3
    size = sphere_size(params, n)
    draws = 600 * size
    counts = {}
    for _ in range(draws):
        v = uniform_sphere_vertex(params, ROOT, n, rng)
        assert distance(ROOT, v) == n
        counts[v] = counts.get(v, 0) + 1
    assert len(counts) == size
    expected = draws / size
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    # 99.9% quantile of chi-square with 11 degrees of freedom is 31.3
    assert chi2 < 31.3


def test_uniform_sphere_vertex_off_center():
    params = TreeParams(2)
    rng = np.random.default_rng(11)
    center = (0, 1)
    for _ in range(200):
        v = uniform_sphere_vertex(params, center, 2, rng)
        assert distance(center, v) == 2
    assert uniform_sphere_vertex(params, center, 0, rng) == center
