"""Planner checks against an independently coded pose-graph oracle."""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from conftest import grid_from, open_grid
from unitcraft.pathing import (
    CANON_ORDER,
    PathError,
    PathPlanner,
    derive_gt_action,
    optimal_path,
    path_arrows,
    planner_for,
)
from unitcraft.world import Grid, Pose, navigate

_VEC = {0: (0, 1), 90: (1, 0), 180: (0, -1), 270: (-1, 0)}


def oracle_successors(grid: Grid, node):
    """All pose-graph neighbors, restated from the movement conventions
    without going through world.navigate."""
    x, y, hor, ver = node
    out = []
    for delta in (0, 180, 270, 90):  # forward, backward, pan left, pan right
        dx, dy = _VEC[(hor + delta) % 360]
        nx, ny = x + dx, y + dy
        if 0 <= nx < grid.width and 0 <= ny < grid.height and grid.rows[ny][nx] == ".":
            out.append((nx, ny, hor, ver))
    out.append((x, y, (hor + 270) % 360, ver))
    out.append((x, y, (hor + 90) % 360, ver))
    if ver - 30 >= -30:
        out.append((x, y, hor, ver - 30))
    if ver + 30 <= 60:
        out.append((x, y, hor, ver + 30))
    return out


def oracle_distances(grid: Grid, source) -> dict:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nxt in oracle_successors(grid, node):
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    return dist


def all_nodes(grid: Grid):
    return [
        (x, y, hor, ver)
        for y in range(grid.height)
        for x in range(grid.width)
        if grid.rows[y][x] == "."
        for hor in (0, 90, 180, 270)
        for ver in (-30, 0, 30, 60)
    ]


def replay(grid: Grid, path) -> Pose:
    pose = path.poses[0]
    for kind, want in zip(path.actions, path.poses[1:]):
        pose, reason = navigate(grid, pose, kind)
        assert reason is None
        assert pose == want
    return pose


# --- frozen short cases --------------------------------------------------------


def test_two_forwards():
    grid = open_grid(3, 3)
    path = optimal_path(grid, Pose(0, 0, 0, 0), Pose(0, 2, 0, 0))
    assert path.actions == ("Forward", "Forward")
    assert path.cost == 2
    assert replay(grid, path) == Pose(0, 2, 0, 0)


def test_brute_force_agrees_on_short_paths():
    # exhaustive enumeration of action sequences up to length 3
    grid = open_grid(3, 3)

    def brute_cost(source: Pose, target: Pose, cap: int = 3):
        frontier = [source]
        if source == target:
            return 0
        for length in range(1, cap + 1):
            nxt = []
            for pose in frontier:
                for kind in CANON_ORDER:
                    moved, _ = navigate(grid, pose, kind)
                    if moved is not None:
                        if moved == target:
                            return length
                        nxt.append(moved)
            frontier = nxt
        return None

    cases = [
        (Pose(0, 0, 0, 0), Pose(0, 2, 0, 0)),
        (Pose(0, 0, 0, 0), Pose(0, 0, 0, 30)),
        (Pose(0, 0, 90, 0), Pose(0, 2, 0, 0)),
        (Pose(1, 1, 0, 0), Pose(1, 1, 180, 0)),
        (Pose(2, 2, 270, 30), Pose(1, 2, 270, 30)),
    ]
    for source, target in cases:
        want = brute_cost(source, target)
        assert want is not None
        assert optimal_path(grid, source, target).cost == want


def test_identity_path():
    grid = open_grid(3, 3)
    path = optimal_path(grid, Pose(1, 1, 90, 30), Pose(1, 1, 90, 30))
    assert path.actions == ()
    assert path.cost == 0
    assert path.poses == (Pose(1, 1, 90, 30),)


def test_single_pitch_step():
    grid = open_grid(3, 3)
    path = optimal_path(grid, Pose(0, 0, 0, 0), Pose(0, 0, 0, 30))
    assert path.actions == ("LookDown",)
    assert path.cost == 1


def test_replanning_after_wrong_turn():
    grid = open_grid(3, 3)
    path = optimal_path(grid, Pose(0, 0, 90, 0), Pose(0, 2, 0, 0))
    assert path.cost == 3
    assert derive_gt_action(Pose(0, 0, 90, 0), path) == "TurnLeft"


def test_pan_beats_detour():
    grid = open_grid(3, 3)
    path = optimal_path(grid, Pose(0, 0, 90, 0), Pose(0, 1, 90, 0))
    assert path.actions == ("PanLeft",)


# --- oracle sweep --------------------------------------------------------------


def test_costs_match_oracle_on_random_grids():
    rng = np.random.default_rng(414)
    for trial in range(3):
        w, h = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        rows = [
            "".join("#" if rng.random() < 0.3 else "." for _ in range(w))
            for _ in range(h)
        ]
        grid = Grid(tuple(rows))
        nodes = all_nodes(grid)
        if not nodes:
            continue
        planner = PathPlanner(grid)
        for source in nodes:
            dist = oracle_distances(grid, source)
            for target in nodes:
                if target in dist:
                    got = planner.path(Pose(*source), Pose(*target))
                    assert got.cost == dist[target], (rows, source, target)
                    assert replay(grid, got) == Pose(*target)
                else:
                    with pytest.raises(PathError):
                        planner.cost(Pose(*source), Pose(*target))


def test_greedy_descent_consistency():
    # taking the planned first action always shrinks the remaining cost by 1
    grid = grid_from(["....", ".#..", "....", "...."])
    planner = PathPlanner(grid)
    source, target = Pose(0, 0, 0, 0), Pose(3, 3, 180, 60)
    pose = source
    remaining = planner.cost(source, target)
    while pose != target:
        path = planner.path(pose, target)
        pose, reason = navigate(grid, pose, path.actions[0])
        assert reason is None
        assert planner.cost(pose, target) == remaining - 1
        remaining -= 1
    assert remaining == 0


def test_determinism_across_planner_instances():
    grid = grid_from(["....", "..#.", "....", "...."])
    a = PathPlanner(grid).path(Pose(0, 0, 0, 0), Pose(3, 0, 90, 30))
    b = PathPlanner(grid).path(Pose(0, 0, 0, 0), Pose(3, 0, 90, 30))
    assert a == b


def test_planner_cache_returns_same_instance():
    grid = grid_from(["..", ".."])
    assert planner_for(grid) is planner_for(Grid(("..", "..")))


def test_unreachable_targets_raise():
    split = grid_from([".#.", ".#.", ".#."])
    with pytest.raises(PathError):
        optimal_path(split, Pose(0, 0, 0, 0), Pose(2, 0, 0, 0))
    with pytest.raises(PathError):
        optimal_path(split, Pose(0, 0, 0, 0), Pose(1, 0, 0, 0))  # wall cell


def test_derive_gt_action_contract():
    grid = open_grid(3, 3)
    path = optimal_path(grid, Pose(0, 0, 0, 0), Pose(0, 2, 0, 0))
    assert derive_gt_action(Pose(0, 0, 0, 0), path) == "Forward"
    assert derive_gt_action(Pose(0, 2, 0, 0), path, terminal="PickUp") == "PickUp"
    with pytest.raises(PathError):
        derive_gt_action(Pose(0, 2, 0, 0), path)  # at target, no terminal
    with pytest.raises(PathError):
        derive_gt_action(Pose(1, 1, 0, 0), path)  # not on the path


def test_path_arrows():
    grid = open_grid(3, 3)
    assert path_arrows(optimal_path(grid, Pose(0, 0, 0, 0), Pose(0, 2, 0, 0))) == "vv"
    assert path_arrows(optimal_path(grid, Pose(0, 0, 0, 0), Pose(0, 0, 0, 30))) == "d"
    assert path_arrows(optimal_path(grid, Pose(0, 0, 90, 0), Pose(0, 2, 0, 0))) == "Lvv"
    assert path_arrows(optimal_path(grid, Pose(0, 0, 90, 0), Pose(0, 1, 90, 0))) == "v"
    assert path_arrows(optimal_path(grid, Pose(1, 1, 0, 0), Pose(1, 1, 0, 0))) == ""
