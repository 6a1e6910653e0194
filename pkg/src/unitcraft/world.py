"""Discrete household world: grid scenes, object semantics, the action
transition function, symbolic detections, and goal checking.

Conventions used throughout the package:

* ``x`` is the column index, ``y`` the row index of the grid.
* Heading ``hor`` is degrees in {0, 90, 180, 270}; 0 faces +y, 90 faces +x,
  so positive rotation is clockwise.
* Pitch ``ver`` is degrees in {-30, 0, 30, 60}; positive looks down.
* All state types are values. ``step`` and ``observe`` never mutate their
  arguments; failed steps return the input state object unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

NAV_ACTIONS = (
    "Forward",
    "Backward",
    "PanLeft",
    "PanRight",
    "TurnLeft",
    "TurnRight",
    "LookUp",
    "LookDown",
)
INTERACTION_ACTIONS = (
    "PickUp",
    "Place",
    "Pour",
    "Slice",
    "Open",
    "Close",
    "ToggleOn",
    "ToggleOff",
)
STOP = "Stop"
ACTION_KINDS = NAV_ACTIONS + INTERACTION_ACTIONS + (STOP,)
ACTION_INDEX = {kind: i for i, kind in enumerate(ACTION_KINDS)}

# Failure reasons reported by step(); failures are in-band no-ops.
REASONS = (
    "blocked",
    "out_of_bounds",
    "pitch_limit",
    "not_visible",
    "not_reachable",
    "hands_full",
    "hands_empty",
    "wrong_flags",
    "closed_receptacle",
    "no_knife",
)

HEADINGS = (0, 90, 180, 270)
PITCHES = (-30, 0, 30, 60)
PITCH_MIN, PITCH_MAX = -30, 60
PITCH_STEP = 30

# hor -> unit (dx, dy) of the facing direction.
HOR_VECS = {0: (0, 1), 90: (1, 0), 180: (0, -1), 270: (-1, 0)}

VIEW_RANGE = 3
MAX_DETECTIONS = 16
REGION_FEATURE_DIM = 32
LIQUID = "water"
_DETECTOR_SEED = 902213


@dataclass(frozen=True)
class ObjectClass:
    name: str
    portable: bool = False
    openable: bool = False
    toggleable: bool = False
    sliceable: bool = False
    receptacle: bool = False
    knife: bool = False
    fillable: bool = False


# Fixed class registry; class_id is the index into this tuple.
CLASSES = (
    ObjectClass("cabinet", openable=True, receptacle=True),
    ObjectClass("fridge", openable=True, receptacle=True),
    ObjectClass("counter", receptacle=True),
    ObjectClass("table", receptacle=True),
    ObjectClass("lamp", toggleable=True),
    ObjectClass("toaster", toggleable=True),
    ObjectClass("bread", portable=True, sliceable=True),
    ObjectClass("apple", portable=True, sliceable=True),
    ObjectClass("potato", portable=True, sliceable=True),
    ObjectClass("mug", portable=True, fillable=True),
    ObjectClass("cup", portable=True, fillable=True),
    ObjectClass("pitcher", portable=True, fillable=True),
    ObjectClass("knife", portable=True, knife=True),
    ObjectClass("plate", portable=True),
)
CLASS_BY_NAME = {c.name: i for i, c in enumerate(CLASSES)}


@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    hor: int
    ver: int

    @property
    def cell(self) -> tuple[int, int]:
        return (self.x, self.y)

    def key(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.hor, self.ver)


@dataclass(frozen=True)
class Action:
    kind: str
    target: str | None = None  # object id; required iff kind is an interaction


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    class_id: int
    cell: tuple[int, int] | None  # None while held by the agent
    parent: str | None = None  # containing receptacle id, if any
    is_open: bool = False
    is_on: bool = False
    is_sliced: bool = False
    fill: str | None = None

    @property
    def cls(self) -> ObjectClass:
        return CLASSES[self.class_id]


@dataclass(frozen=True)
class Grid:
    """Row-major traversability mask: '.' floor, '#' wall."""

    rows: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.rows[0])

    @property
    def height(self) -> int:
        return len(self.rows)

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_wall(self, x: int, y: int) -> bool:
        return self.rows[y][x] == "#"

    def traversable(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.rows[y][x] == "."

    def key(self) -> str:
        return "\n".join(self.rows)


@dataclass(frozen=True)
class WorldState:
    scene_id: str
    grid: Grid
    objects: dict[str, ObjectInstance]
    agent: Pose
    inventory: str | None = None


@dataclass(frozen=True)
class StepResult:
    ok: bool
    reason: str | None = None


@dataclass(frozen=True)
class Detection:
    instance_id: str
    label_id: int
    box: tuple[float, float, float, float]  # x1, y1, x2, y2 in [0, 1]
    region_feature: tuple[float, ...]  # length REGION_FEATURE_DIM


@dataclass(frozen=True)
class Observation:
    pose: Pose
    detections: tuple[Detection, ...]


@dataclass(frozen=True)
class GoalCondition:
    """One checkable predicate over a WorldState.

    predicate in {"in", "sliced", "filled", "is_open", "is_on"}. Class
    predicates (in/sliced/filled) name classes and take a quantifier in
    {"all", "any", "count"}; count uses ``count`` as "at least n". The id
    predicates (is_open/is_on) name one object id and a wanted bool.
    """

    predicate: str
    args: tuple[str, ...]
    quantifier: str = "all"
    count: int = 0
    want: bool = True


class WorldError(ValueError):
    """Raised for malformed scenes, actions, or goal conditions."""


def rotate(hor: int, deg: int) -> int:
    return (hor + deg) % 360


def nav_mask(state: WorldState) -> Grid:
    """Traversability mask for navigation: walls plus receptacle cells.

    Receptacles never move, so this mask is constant for a scene.
    """
    blocked = {
        obj.cell
        for obj in state.objects.values()
        if obj.cls.receptacle and obj.cell is not None
    }
    rows = []
    for y, row in enumerate(state.grid.rows):
        rows.append(
            "".join(
                "#" if (x, y) in blocked else ch for x, ch in enumerate(row)
            )
        )
    return Grid(tuple(rows))


def navigate(mask: Grid, pose: Pose, kind: str) -> tuple[Pose | None, str | None]:
    """Apply one navigation action to a pose over a traversability mask.

    Returns (new_pose, None) on success or (None, reason) on failure.
    """
    if kind == "TurnLeft":
        return replace(pose, hor=rotate(pose.hor, -90)), None
    if kind == "TurnRight":
        return replace(pose, hor=rotate(pose.hor, 90)), None
    if kind == "LookUp":
        if pose.ver - PITCH_STEP < PITCH_MIN:
            return None, "pitch_limit"
        return replace(pose, ver=pose.ver - PITCH_STEP), None
    if kind == "LookDown":
        if pose.ver + PITCH_STEP > PITCH_MAX:
            return None, "pitch_limit"
        return replace(pose, ver=pose.ver + PITCH_STEP), None
    if kind == "Forward":
        dx, dy = HOR_VECS[pose.hor]
    elif kind == "Backward":
        dx, dy = HOR_VECS[rotate(pose.hor, 180)]
    elif kind == "PanLeft":
        dx, dy = HOR_VECS[rotate(pose.hor, -90)]
    elif kind == "PanRight":
        dx, dy = HOR_VECS[rotate(pose.hor, 90)]
    else:
        raise WorldError(f"not a navigation action: {kind}")
    nx, ny = pose.x + dx, pose.y + dy
    if not mask.in_bounds(nx, ny):
        return None, "out_of_bounds"
    if not mask.traversable(nx, ny):
        return None, "blocked"
    return replace(pose, x=nx, y=ny), None


def _line_cells(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """Bresenham cells strictly between a and b."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    cells = []
    x, y = x0, y0
    while True:
        if (x, y) != a and (x, y) != b:
            cells.append((x, y))
        if (x, y) == b:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return cells


def _occluded(grid: Grid, a: tuple[int, int], b: tuple[int, int]) -> bool:
    return any(grid.is_wall(x, y) for x, y in _line_cells(a, b))


def _hidden_in_closed(state: WorldState, obj: ObjectInstance) -> bool:
    if obj.parent is None:
        return False
    parent = state.objects[obj.parent]
    return parent.cls.openable and not parent.is_open


def _flag_bits(obj: ObjectInstance) -> int:
    return (
        int(obj.is_open)
        | int(obj.is_on) << 1
        | int(obj.is_sliced) << 2
        | int(obj.fill == LIQUID) << 3
    )


def _detection_box(depth: int, lateral: int, ver: int) -> tuple[float, float, float, float]:
    """Deterministic screen box for an object at a relative grid offset."""
    size = 0.5 / (depth + 1)
    cx = 0.5 + lateral / (2.0 * (depth + 1))
    cy = 0.5 + 0.3 * (ver / PITCH_MAX) - 0.08 * depth
    cx = min(max(cx, size / 2), 1 - size / 2)
    cy = min(max(cy, size / 2), 1 - size / 2)
    return (cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2)


def _region_feature(class_id: int, flags: int, box: tuple[float, float, float, float]) -> tuple[float, ...]:
    rng = np.random.default_rng(
        np.random.SeedSequence([_DETECTOR_SEED, class_id, flags])
    )
    head = rng.standard_normal(REGION_FEATURE_DIM - 6)
    x1, y1, x2, y2 = box
    return tuple(head) + (x1, y1, x2, y2, x2 - x1, y2 - y1)


def observe(state: WorldState, pose: Pose | None = None) -> Observation:
    """Render the symbolic detections visible from a pose.

    An object is visible when it sits in the forward view cone (depth at
    most VIEW_RANGE, |lateral| <= depth), is not cut off by a wall on the
    straight line to the agent, and is not inside a closed receptacle.
    Pitch moves the boxes but never gates visibility. The held object has
    no cell and is never rendered.
    """
    pose = pose if pose is not None else state.agent
    fwd = HOR_VECS[pose.hor]
    right = HOR_VECS[rotate(pose.hor, 90)]
    found = []
    for obj in state.objects.values():
        if obj.cell is None:
            continue
        rx, ry = obj.cell[0] - pose.x, obj.cell[1] - pose.y
        depth = rx * fwd[0] + ry * fwd[1]
        lateral = rx * right[0] + ry * right[1]
        if not (0 <= depth <= VIEW_RANGE and abs(lateral) <= depth):
            continue
        if _occluded(state.grid, pose.cell, obj.cell):
            continue
        if _hidden_in_closed(state, obj):
            continue
        box = _detection_box(depth, lateral, pose.ver)
        flags = _flag_bits(obj)
        found.append(
            Detection(
                instance_id=obj.id,
                label_id=obj.class_id,
                box=box,
                region_feature=_region_feature(obj.class_id, flags, box),
            )
        )
    found.sort(
        key=lambda d: (
            -(d.box[2] - d.box[0]) * (d.box[3] - d.box[1]),
            d.label_id,
            d.instance_id,
        )
    )
    return Observation(pose=pose, detections=tuple(found[:MAX_DETECTIONS]))


def _reachable(state: WorldState, obj: ObjectInstance) -> bool:
    if obj.cell is None:
        return False
    dx, dy = HOR_VECS[state.agent.hor]
    facing = (state.agent.x + dx, state.agent.y + dy)
    return obj.cell == state.agent.cell or obj.cell == facing


def _visible(state: WorldState, obj_id: str) -> bool:
    return any(d.instance_id == obj_id for d in observe(state).detections)


def _with_object(state: WorldState, obj: ObjectInstance) -> dict[str, ObjectInstance]:
    objects = dict(state.objects)
    objects[obj.id] = obj
    return objects


def _fail(state: WorldState, reason: str) -> tuple[WorldState, StepResult]:
    return state, StepResult(False, reason)


def step(state: WorldState, action: Action) -> tuple[WorldState, StepResult]:
    """Apply one action. Failures leave the state untouched and report a
    reason code; Stop always succeeds and never changes state."""
    kind = action.kind
    if kind not in ACTION_INDEX:
        raise WorldError(f"unknown action kind: {kind}")
    if kind == STOP:
        return state, StepResult(True)
    if kind in NAV_ACTIONS:
        pose, reason = navigate(nav_mask(state), state.agent, kind)
        if pose is None:
            return _fail(state, reason)
        return replace(state, agent=pose), StepResult(True)

    if action.target is None or action.target not in state.objects:
        return _fail(state, "wrong_flags")
    obj = state.objects[action.target]
    cls = obj.cls

    if kind == "PickUp":
        if state.inventory is not None:
            return _fail(state, "hands_full")
        if not cls.portable:
            return _fail(state, "wrong_flags")
        if not _reachable(state, obj):
            return _fail(state, "not_reachable")
        if _hidden_in_closed(state, obj):
            return _fail(state, "closed_receptacle")
        if not _visible(state, obj.id):
            return _fail(state, "not_visible")
        lifted = replace(obj, cell=None, parent=None)
        return (
            replace(state, objects=_with_object(state, lifted), inventory=obj.id),
            StepResult(True),
        )

    if kind == "Place":
        if state.inventory is None:
            return _fail(state, "hands_empty")
        if not cls.receptacle:
            return _fail(state, "wrong_flags")
        if not _reachable(state, obj):
            return _fail(state, "not_reachable")
        if cls.openable and not obj.is_open:
            return _fail(state, "closed_receptacle")
        held = replace(
            state.objects[state.inventory], cell=obj.cell, parent=obj.id
        )
        return (
            replace(state, objects=_with_object(state, held), inventory=None),
            StepResult(True),
        )

    if kind == "Pour":
        if state.inventory is None:
            return _fail(state, "hands_empty")
        held = state.objects[state.inventory]
        if not held.cls.fillable or held.fill is None:
            return _fail(state, "wrong_flags")
        if not cls.fillable:
            return _fail(state, "wrong_flags")
        if not _reachable(state, obj):
            return _fail(state, "not_reachable")
        objects = dict(state.objects)
        objects[held.id] = replace(held, fill=None)
        objects[obj.id] = replace(obj, fill=held.fill)
        return replace(state, objects=objects), StepResult(True)

    if kind == "Slice":
        if not cls.sliceable:
            return _fail(state, "wrong_flags")
        if not _reachable(state, obj):
            return _fail(state, "not_reachable")
        held = state.objects.get(state.inventory) if state.inventory else None
        if held is None or not held.cls.knife:
            return _fail(state, "no_knife")
        sliced = replace(obj, is_sliced=True)
        return (
            replace(state, objects=_with_object(state, sliced)),
            StepResult(True),
        )

    if kind in ("Open", "Close"):
        if not cls.openable:
            return _fail(state, "wrong_flags")
        if not _reachable(state, obj):
            return _fail(state, "not_reachable")
        toggled = replace(obj, is_open=(kind == "Open"))
        return (
            replace(state, objects=_with_object(state, toggled)),
            StepResult(True),
        )

    if kind in ("ToggleOn", "ToggleOff"):
        if not cls.toggleable:
            return _fail(state, "wrong_flags")
        if not _reachable(state, obj):
            return _fail(state, "not_reachable")
        toggled = replace(obj, is_on=(kind == "ToggleOn"))
        return (
            replace(state, objects=_with_object(state, toggled)),
            StepResult(True),
        )

    raise WorldError(f"unhandled action kind: {kind}")


def _class_instances(state: WorldState, name: str) -> list[ObjectInstance]:
    if name not in CLASS_BY_NAME:
        raise WorldError(f"unknown object class in goal: {name}")
    cid = CLASS_BY_NAME[name]
    found = [o for o in state.objects.values() if o.class_id == cid]
    if not found:
        raise WorldError(f"goal names class with no instances: {name}")
    return found


def _quantify(cond: GoalCondition, hits: int, total: int) -> bool:
    if cond.quantifier == "all":
        return hits == total
    if cond.quantifier == "any":
        return hits >= 1
    if cond.quantifier == "count":
        return hits >= cond.count
    raise WorldError(f"unknown quantifier: {cond.quantifier}")


def check_goal(state: WorldState, cond: GoalCondition) -> bool:
    if cond.predicate == "in":
        obj_name, recep_name = cond.args
        if recep_name not in CLASS_BY_NAME:
            raise WorldError(f"unknown object class in goal: {recep_name}")
        rid = CLASS_BY_NAME[recep_name]
        objs = _class_instances(state, obj_name)
        hits = sum(
            1
            for o in objs
            if o.parent is not None and state.objects[o.parent].class_id == rid
        )
        return _quantify(cond, hits, len(objs))
    if cond.predicate == "sliced":
        objs = _class_instances(state, cond.args[0])
        return _quantify(cond, sum(1 for o in objs if o.is_sliced), len(objs))
    if cond.predicate == "filled":
        objs = _class_instances(state, cond.args[0])
        return _quantify(
            cond, sum(1 for o in objs if o.fill == LIQUID), len(objs)
        )
    if cond.predicate in ("is_open", "is_on"):
        (obj_id,) = cond.args
        if obj_id not in state.objects:
            raise WorldError(f"goal names unknown object id: {obj_id}")
        obj = state.objects[obj_id]
        value = obj.is_open if cond.predicate == "is_open" else obj.is_on
        return value == cond.want
    raise WorldError(f"unknown goal predicate: {cond.predicate}")


def check_goals(state: WorldState, goals: list[GoalCondition] | tuple[GoalCondition, ...]) -> tuple[bool, ...]:
    return tuple(check_goal(state, g) for g in goals)


# --- serialization ---------------------------------------------------------


def object_to_dict(obj: ObjectInstance) -> dict:
    return {
        "id": obj.id,
        "class": CLASSES[obj.class_id].name,
        "cell": list(obj.cell) if obj.cell is not None else None,
        "parent": obj.parent,
        "is_open": obj.is_open,
        "is_on": obj.is_on,
        "is_sliced": obj.is_sliced,
        "fill": obj.fill,
    }


def object_from_dict(d: dict) -> ObjectInstance:
    if d["class"] not in CLASS_BY_NAME:
        raise WorldError(f"unknown object class: {d['class']}")
    return ObjectInstance(
        id=d["id"],
        class_id=CLASS_BY_NAME[d["class"]],
        cell=tuple(d["cell"]) if d["cell"] is not None else None,
        parent=d["parent"],
        is_open=d["is_open"],
        is_on=d["is_on"],
        is_sliced=d["is_sliced"],
        fill=d["fill"],
    )


def pose_to_list(pose: Pose) -> list[int]:
    return [pose.x, pose.y, pose.hor, pose.ver]


def pose_from_list(vals) -> Pose:
    x, y, hor, ver = vals
    return Pose(int(x), int(y), int(hor), int(ver))


def goal_to_dict(g: GoalCondition) -> dict:
    return {
        "predicate": g.predicate,
        "args": list(g.args),
        "quantifier": g.quantifier,
        "count": g.count,
        "want": g.want,
    }


def goal_from_dict(d: dict) -> GoalCondition:
    return GoalCondition(
        predicate=d["predicate"],
        args=tuple(d["args"]),
        quantifier=d["quantifier"],
        count=d["count"],
        want=d["want"],
    )


def action_to_dict(a: Action) -> dict:
    return {"kind": a.kind, "target": a.target}


def action_from_dict(d: dict) -> Action:
    return Action(kind=d["kind"], target=d["target"])


def state_to_dict(state: WorldState) -> dict:
    return {
        "scene_id": state.scene_id,
        "grid": list(state.grid.rows),
        "objects": [
            object_to_dict(state.objects[k]) for k in sorted(state.objects)
        ],
        "agent": pose_to_list(state.agent),
        "inventory": state.inventory,
    }


def state_from_dict(d: dict) -> WorldState:
    objects = {rec["id"]: object_from_dict(rec) for rec in d["objects"]}
    return WorldState(
        scene_id=d["scene_id"],
        grid=Grid(tuple(d["grid"])),
        objects=objects,
        agent=pose_from_list(d["agent"]),
        inventory=d["inventory"],
    )


def state_to_json(state: WorldState) -> str:
    return json.dumps(state_to_dict(state), separators=(",", ":"))


def state_from_json(text: str) -> WorldState:
    return state_from_dict(json.loads(text))
