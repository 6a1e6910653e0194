"""Shortest navigation paths over the pose graph.

Nodes are (x, y, hor, ver) tuples; edges are the 8 navigation actions with
the same kinematics the world applies, so planned paths always replay. All
edges cost 1. Ties are broken by a fixed action ordering, which makes every
query deterministic: at each pose we take the first action in CANON_ORDER
that stays on some optimal path.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .world import Grid, Pose, navigate, HEADINGS, PITCHES

CANON_ORDER = (
    "Forward",
    "TurnLeft",
    "TurnRight",
    "Backward",
    "PanLeft",
    "PanRight",
    "LookUp",
    "LookDown",
)

NodeKey = tuple[int, int, int, int]


class PathError(ValueError):
    """Raised when a target pose is unreachable or off the mask."""


@dataclass(frozen=True)
class PosePath:
    poses: tuple[Pose, ...]  # poses[0] is the source, poses[-1] the target
    actions: tuple[str, ...]  # len(actions) == len(poses) - 1

    @property
    def cost(self) -> int:
        return len(self.actions)


class PathPlanner:
    """BFS planner over one traversability mask.

    Distance fields are computed once per target pose and memoized, so
    per-step replanning during training touches each (mask, target) pair
    only once.
    """

    def __init__(self, mask: Grid):
        self.mask = mask
        self._succ: dict[NodeKey, tuple[tuple[str, NodeKey], ...]] = {}
        self._pred: dict[NodeKey, list[NodeKey]] = {}
        self._fields: dict[NodeKey, dict[NodeKey, int]] = {}
        for y in range(mask.height):
            for x in range(mask.width):
                if not mask.traversable(x, y):
                    continue
                for hor in HEADINGS:
                    for ver in PITCHES:
                        node = (x, y, hor, ver)
                        edges = []
                        for kind in CANON_ORDER:
                            nxt, _ = navigate(mask, Pose(*node), kind)
                            if nxt is not None:
                                edges.append((kind, nxt.key()))
                        self._succ[node] = tuple(edges)
        for node, edges in self._succ.items():
            for _, nxt in edges:
                self._pred.setdefault(nxt, []).append(node)

    def _field(self, target: NodeKey) -> dict[NodeKey, int]:
        if target in self._fields:
            return self._fields[target]
        if target not in self._succ:
            raise PathError(f"target pose off the traversable mask: {target}")
        dist = {target: 0}
        queue = deque([target])
        while queue:
            node = queue.popleft()
            for prev in self._pred.get(node, ()):
                if prev not in dist:
                    dist[prev] = dist[node] + 1
                    queue.append(prev)
        self._fields[target] = dist
        return dist

    def cost(self, source: Pose, target: Pose) -> int:
        dist = self._field(target.key())
        if source.key() not in dist:
            raise PathError(f"no path from {source} to {target}")
        return dist[source.key()]

    def path(self, source: Pose, target: Pose) -> PosePath:
        dist = self._field(target.key())
        node = source.key()
        if node not in dist:
            raise PathError(f"no path from {source} to {target}")
        poses = [Pose(*node)]
        actions: list[str] = []
        while dist[node] > 0:
            for kind, nxt in self._succ[node]:
                if dist.get(nxt, -1) == dist[node] - 1:
                    actions.append(kind)
                    node = nxt
                    poses.append(Pose(*node))
                    break
        return PosePath(tuple(poses), tuple(actions))


_planners: dict[str, PathPlanner] = {}


def planner_for(mask: Grid) -> PathPlanner:
    key = mask.key()
    if key not in _planners:
        _planners[key] = PathPlanner(mask)
    return _planners[key]


def optimal_path(mask: Grid, source: Pose, target: Pose) -> PosePath:
    return planner_for(mask).path(source, target)


def derive_gt_action(current: Pose, path: PosePath, terminal: str | None = None) -> str:
    """Supervision target for the current pose.

    Returns the first step of the remaining path, or the unit's terminal
    interaction once the agent stands at the target pose.
    """
    if path.cost == 0 or current == path.poses[-1]:
        if terminal is None:
            raise PathError("at target pose but no terminal action given")
        return terminal
    if current != path.poses[0]:
        raise PathError("path does not start at the current pose")
    return path.actions[0]


_VEC_ARROWS = {(0, 1): "v", (1, 0): ">", (0, -1): "^", (-1, 0): "<"}


def path_arrows(path: PosePath) -> str:
    """Compact text rendering of a path: absolute-direction arrows for
    moves, L/R for turns, u/d for pitch."""
    glyphs = []
    for pose, nxt, kind in zip(path.poses, path.poses[1:], path.actions):
        if kind == "TurnLeft":
            glyphs.append("L")
        elif kind == "TurnRight":
            glyphs.append("R")
        elif kind == "LookUp":
            glyphs.append("u")
        elif kind == "LookDown":
            glyphs.append("d")
        else:
            glyphs.append(_VEC_ARROWS[(nxt.x - pose.x, nxt.y - pose.y)])
    return "".join(glyphs)
