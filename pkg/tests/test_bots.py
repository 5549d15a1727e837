import math

import numpy as np
import pytest

from robomarl import _layout as L
from robomarl.bots import (
    BotDecision, bot_actions, normalize_level, point_score, siege_assignment,
)
from robomarl.planning import candidate_points
from robomarl.world import WorldState


def world_at(positions, hp=(500, 500, 500, 500)):
    w = WorldState.empty(500, 50)
    for i, (x, y) in enumerate(positions):
        w.bodies[i, L.X], w.bodies[i, L.Y] = x, y
    w.hp[:] = hp
    return w


BLUE_VIEW = [(5.0, 2.0), (5.5, 4.5), (6.0, 2.0), (6.0, 4.2)]


def test_levels():
    assert [normalize_level(v) for v in (1, "2", "hard", np.int64(1))] == \
        ["easy", "middle", "hard", "easy"]
    for bad in (0, 4, "expert", True, 2.0):
        with pytest.raises(ValueError):
            normalize_level(bad)


def test_easy_targets_nearest_enemy(arena):
    w = world_at(BLUE_VIEW)
    got = {d.robot: d.target for d in bot_actions("easy", w, arena=arena)}
    assert got == {2: 0, 3: 1}


def test_middle_targets_least_hp(arena):
    w = world_at(BLUE_VIEW, hp=(500, 150, 500, 500))
    assert {d.target for d in bot_actions("middle", w, arena=arena)} == {1}
    tie = world_at(BLUE_VIEW, hp=(200, 200, 500, 500))
    assert {d.target for d in bot_actions(2, tie, arena=arena)} == {0}


def test_goal_is_nearest_candidate(arena):
    w = world_at(BLUE_VIEW)
    for d in bot_actions("easy", w, arena=arena):
        pts = candidate_points(w, d.target, arena=arena).points
        dist = np.hypot(*(pts - w.position(d.robot)).T)
        assert d.goal_index == int(np.argmin(dist))
        assert d.goal == tuple(pts[d.goal_index])


def test_hard_sieges_least_hp_at_best_points(arena):
    w = world_at(BLUE_VIEW, hp=(300, 500, 500, 500))
    out = bot_actions("hard", w, arena=arena)
    pts = candidate_points(w, 0, arena=arena).points
    assert {d.target for d in out} == {0}
    scores = [point_score(p, w.position(0), arena) for p in pts]
    best = sorted(range(4), key=lambda i: (-scores[i], i))[:2]
    assert sorted(d.goal_index for d in out) == sorted(best)
    # brute-force: the chosen pairing minimises total travel
    chosen = sum(math.dist(w.position(d.robot), d.goal) for d in out)
    a, b = (w.position(2), w.position(3))
    p, q = pts[best[0]], pts[best[1]]
    assert chosen <= min(math.dist(a, p) + math.dist(b, q), math.dist(a, q) + math.dist(b, p)) + 1e-12


def test_siege_assignment():
    assert siege_assignment([(0, 0), (10, 0)], [(1, 0), (9, 0)]) == (0, 1)
    assert siege_assignment([(0, 0), (10, 0)], [(9, 0), (1, 0)]) == (1, 0)


def test_point_score_los_penalty(arena):
    o = arena.obstacles[4]
    blocked = point_score((o.cx - 1.5, o.cy), (o.cx + 0.5, o.cy), arena)
    assert blocked == pytest.approx(-0.5 - 0.5)
    assert point_score((3.0, 3.3), (4.5, 3.3), arena) == pytest.approx(0.0)


def test_all_goals_free_and_deterministic(arena, rng):
    for _ in range(30):
        pos = [(rng.uniform(0.4, 7.7), rng.uniform(0.4, 4.7)) for _ in range(4)]
        w = world_at(pos, hp=tuple(int(v) for v in rng.choice([0, 100, 500], 4)))
        for level in ("easy", "middle", "hard"):
            a = bot_actions(level, w, seed=3, arena=arena)
            assert a == bot_actions(level, w, seed=3, arena=arena)
            for d in a:
                assert isinstance(d, BotDecision)
                assert w.hp[d.target] > 0 and w.hp[d.robot] > 0
                assert 0 <= d.action < 8
                assert arena.grid[arena.to_cell(d.goal)] == 0 or arena.is_free(d.goal, 0.0)


def test_no_decisions_without_enemies(arena):
    w = world_at(BLUE_VIEW, hp=(0, 0, 500, 500))
    assert bot_actions("easy", w, arena=arena) == []


def test_red_team_bots(arena):
    w = world_at(BLUE_VIEW)
    out = bot_actions("easy", w, arena=arena, team=0)
    assert {d.robot for d in out} == {0, 1} and all(d.target in (2, 3) for d in out)
