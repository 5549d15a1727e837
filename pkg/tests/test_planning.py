import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robomarl import _layout as L
from robomarl.arena import Rect
from robomarl.planning import (
    A_MAX, BEST_DISTANCE, PlanningError, aim_rate, candidate_points, candidates_around,
    circle_samples, follow_path, grid_search, kmeans, make_path, plan_path, route, speed_profile,
)
from robomarl.world import WorldState
from conftest import open_arena
from oracles import best_two_partition, dijkstra_cost, path_cost


# ------------------------------------------------------------------ kmeans

def test_kmeans_single_cluster_is_mean(rng):
    pts = rng.normal(size=(30, 2))
    assert np.allclose(kmeans(pts, 1), pts.mean(axis=0))


def test_kmeans_k_equals_n_returns_points(rng):
    pts = rng.normal(size=(7, 2))
    out = kmeans(pts, 7, seed=3)
    assert sorted(map(tuple, out)) == sorted(map(tuple, pts))


def test_kmeans_two_blobs_match_exhaustive(rng):
    for trial in range(20):
        n = int(rng.integers(4, 13))
        a = rng.normal(size=(n // 2, 2)) * 0.3
        b = rng.normal(size=(n - n // 2, 2)) * 0.3 + rng.uniform(4, 6, 2)
        pts = np.vstack([a, b])
        got = sorted(map(tuple, kmeans(pts, 2, seed=trial)))
        want = sorted(map(tuple, best_two_partition(pts)))
        assert np.allclose(got, want)


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((0, 2)), 1)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)


def test_kmeans_deterministic(rng):
    pts = rng.normal(size=(100, 2))
    assert np.array_equal(kmeans(pts, 4, seed=9), kmeans(pts, 4, seed=9))


# -------------------------------------------------------------- candidates

def test_open_centre_gives_four_quadrant_points(empty_arena):
    c = candidates_around(empty_arena, (4.05, 2.55), 4)
    assert not c.degenerate and len(c.points) == 4
    ang = np.sort(np.degrees(np.arctan2(c.points[:, 1] - 2.55, c.points[:, 0] - 4.05)) % 360)
    gaps = np.diff(np.append(ang, ang[0] + 360))
    assert np.allclose(gaps, 90, atol=2.1)


def test_candidates_are_circle_samples(arena, rng):
    for _ in range(30):
        centre = (rng.uniform(0.3, 7.8), rng.uniform(0.3, 4.8))
        c = candidates_around(arena, centre, 4, seed=int(rng.integers(100)))
        samples = circle_samples(centre)
        assert len(c.points) == 4
        if c.sample_index[0] >= 0:
            assert np.array_equal(c.points, samples[c.sample_index])
            assert np.all(np.diff(c.sample_index) >= 0)
        for p in c.points:
            assert arena.is_free(p, 0.3) or c.degenerate


def test_wall_adjacent_opponent_points_in_field(empty_arena):
    c = candidates_around(empty_arena, (0.35, 2.55), 4)
    for x, y in c.points:
        assert 0.3 <= x <= 7.8 and 0.3 <= y <= 4.8


def test_few_survivors_padded_and_flagged():
    # a box with a single narrow opening leaves only a few free samples
    walls = [Rect(4.05, 4.3, 2.0, 0.1), Rect(4.05, 0.8, 2.0, 0.1), Rect(2.3, 2.55, 0.1, 1.65),
             Rect(5.8, 2.55, 0.1, 1.65)]
    arena = open_arena(walls)
    c = candidates_around(arena, (4.05, 2.55), 4, radius=2.0)
    assert c.degenerate and len(c.points) == 4


def test_enclosed_opponent_falls_back_to_free_cells():
    arena = open_arena([Rect(4.05, 2.55, 2.5, 2.0)])
    c = candidates_around(arena, (4.05, 2.55), 4)
    assert c.degenerate and np.all(c.sample_index == -1)
    for p in c.points:
        assert arena.grid[arena.to_cell(p)] == 0


def test_candidate_points_dead_opponent_raises(arena):
    w = WorldState.empty(500, 50)
    w.bodies[:, L.X] = [1, 1, 7, 7]
    w.bodies[:, L.Y] = [1, 4, 4, 1]
    w.hp[2] = 0
    with pytest.raises(PlanningError):
        candidate_points(w, 2, arena=arena)
    a = candidate_points(w, 3, arena=arena, seed=4)
    b = candidate_points(w, 3, arena=arena, seed=4)
    assert np.array_equal(a.points, b.points)
    with pytest.raises(ValueError):
        candidates_around(arena, (1, 1), 0)


def test_candidate_points_read_only(arena):
    c = candidates_around(arena, (2.0, 2.0))
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


# ------------------------------------------------------------------ search

def test_start_equals_goal(arena):
    p = plan_path((1.05, 1.05), (1.05, 1.05), arena)
    assert len(p) == 1 and p.speeds[-1] == 0.0


def test_empty_grid_diagonal_cost():
    cells, cost = grid_search(np.zeros((10, 10), dtype=bool), (0, 0), (9, 9))
    assert cost == pytest.approx(9 * math.sqrt(2)) and len(cells) == 10


def test_unreachable_and_errors():
    g = np.zeros((5, 5), dtype=bool)
    g[:, 2] = True
    cells, cost = grid_search(g, (0, 0), (0, 4))
    assert cells == [] and cost == math.inf
    with pytest.raises(PlanningError):
        grid_search(g, (0, 2), (0, 0))
    with pytest.raises(PlanningError):
        grid_search(g, (0, 0), (9, 9))


def test_no_corner_cutting():
    g = np.zeros((3, 3), dtype=bool)
    g[0, 1] = g[1, 0] = True
    g[1, 2] = True
    cells, _ = grid_search(g, (0, 0), (1, 1))
    assert cells == []


def test_astar_matches_dijkstra(rng):
    for _ in range(60):
        g = rng.random((12, 12)) < 0.3
        g[0, 0] = g[11, 11] = False
        cells, cost = grid_search(g, (0, 0), (11, 11))
        want = dijkstra_cost(g, (0, 0), (11, 11))
        assert cost == pytest.approx(want, abs=1e-9) if math.isfinite(want) else cost == want
        if cells:
            assert path_cost(cells) == pytest.approx(cost)


def test_plan_path_invariants(arena, rng):
    for _ in range(20):
        while True:
            s = (rng.uniform(0.3, 7.8), rng.uniform(0.3, 4.8))
            if not arena.grid[arena.to_cell(s)]:
                break
        g = (rng.uniform(0, 8.1), rng.uniform(0, 5.1))
        path = plan_path(s, g, arena)
        assert path is not None
        cells = [arena.to_cell(p) for p in path.waypoints]
        for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
            assert max(abs(r1 - r0), abs(c1 - c0)) == 1
        assert all(arena.grid[c] == 0 for c in cells)
        assert path.speeds[-1] == 0.0 and np.all(path.speeds <= 2.0)
        # decelerating at a_max never has to exceed the profile
        seg = np.hypot(*np.diff(path.waypoints, axis=0).T)
        assert np.all(path.speeds[:-1] ** 2 <= path.speeds[1:] ** 2 + 2 * A_MAX * seg + 1e-9)


def test_plan_path_blocked_start(arena):
    o = arena.obstacles[4]
    with pytest.raises(PlanningError):
        plan_path((o.cx, o.cy), (1.0, 1.0), arena)


def test_route_ends_exactly_at_goal(arena):
    p = route((0.5, 0.5, 0.0), (3.123, 3.321), arena)
    assert p.goal == (3.123, 3.321)


# --------------------------------------------------------------- following

def test_speed_profile_example():
    speeds, rem = speed_profile(np.array([[0.0, 0.0], [0.25, 0.0]]))
    assert speeds[0] == pytest.approx(1.0) and rem[0] == pytest.approx(0.25)


def test_at_goal_zero_twist():
    path = make_path([[0, 0], [1, 0]])
    assert follow_path((1.0, 0.05, 0.0), path) == (0.0, 0.0, 0.0)


def test_long_straight_path_full_speed():
    path = make_path([[x, 0.0] for x in np.linspace(0, 5, 51)])
    vx, vy, w = follow_path((0.0, 0.0, 0.0), path)
    assert vx == pytest.approx(2.0) and abs(vy) < 1e-9 and abs(w) < 0.1


def test_near_end_speed_follows_braking_curve():
    path = make_path([[0.0, 0.0], [0.25, 0.0]])
    vx, vy, _ = follow_path((0.0, 0.0, 0.0), path)
    assert math.hypot(vx, vy) == pytest.approx(1.0, rel=1e-9)


def test_command_in_body_frame():
    path = make_path([[x, 0.0] for x in np.linspace(0, 5, 51)])
    vx, vy, _ = follow_path((0.0, 0.0, math.pi / 2), path)
    assert vx == pytest.approx(0.0, abs=1e-9) and vy == pytest.approx(-2.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3.14, 3.14))
def test_follow_speed_bounded(x, y, th):
    path = make_path([[0, 0], [1, 1], [2, 1], [3, 0]])
    vx, vy, w = follow_path((x, y, th), path)
    assert math.hypot(vx, vy) <= 2.0 + 1e-12 and w == 0.0


def test_aim_rate():
    assert aim_rate((0, 0, 0), None) == 0.0
    assert aim_rate((0, 0, 0), (1, 0.1)) == pytest.approx(3 * math.atan2(0.1, 1))
    assert aim_rate((0, 0, 0), (-1, 0.01)) == 1.75
