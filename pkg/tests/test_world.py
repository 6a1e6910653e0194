"""World semantics: kinematics, interactions, observation, goals.

Expected values in this file are hand-derived from the declared
conventions (hor 0=+y, 90=+x, clockwise; ver positive looks down) or
computed by independent in-test oracles, never by running the module
under test first.
"""

from __future__ import annotations

import pytest

from conftest import grid_from, obj, open_grid, scene
from unitcraft import world
from unitcraft.world import (
    Action,
    GoalCondition,
    Grid,
    HEADINGS,
    INTERACTION_ACTIONS,
    MAX_DETECTIONS,
    NAV_ACTIONS,
    PITCHES,
    Pose,
    REGION_FEATURE_DIM,
    STOP,
    WorldError,
    check_goals,
    nav_mask,
    navigate,
    observe,
    step,
)

# --- navigation kinematics ---------------------------------------------------

# Hand-derived moves from (3, 3) for every heading. PanLeft strafes along
# the heading rotated -90, PanRight along +90; no rotation happens.
MOVE_TABLE = {
    (0, "Forward"): (3, 4),
    (0, "Backward"): (3, 2),
    (0, "PanLeft"): (2, 3),
    (0, "PanRight"): (4, 3),
    (90, "Forward"): (4, 3),
    (90, "Backward"): (2, 3),
    (90, "PanLeft"): (3, 4),
    (90, "PanRight"): (3, 2),
    (180, "Forward"): (3, 2),
    (180, "Backward"): (3, 4),
    (180, "PanLeft"): (4, 3),
    (180, "PanRight"): (2, 3),
    (270, "Forward"): (2, 3),
    (270, "Backward"): (4, 3),
    (270, "PanLeft"): (3, 2),
    (270, "PanRight"): (3, 4),
}


def test_move_table():
    mask = open_grid(7, 7)
    for (hor, kind), want in MOVE_TABLE.items():
        pose, reason = navigate(mask, Pose(3, 3, hor, 0), kind)
        assert reason is None
        assert (pose.x, pose.y) == want
        assert pose.hor == hor and pose.ver == 0


def test_forward_east_example():
    pose, _ = navigate(open_grid(5, 5), Pose(1, 1, 90, 0), "Forward")
    assert pose == Pose(2, 1, 90, 0)


def test_turns_rotate_in_place():
    mask = open_grid(3, 3)
    for hor in HEADINGS:
        left, _ = navigate(mask, Pose(1, 1, hor, 0), "TurnLeft")
        right, _ = navigate(mask, Pose(1, 1, hor, 0), "TurnRight")
        assert (left.x, left.y) == (1, 1) and left.hor == (hor - 90) % 360
        assert (right.x, right.y) == (1, 1) and right.hor == (hor + 90) % 360


def test_turn_reversibility():
    mask = open_grid(3, 3)
    for hor in HEADINGS:
        start = Pose(1, 1, hor, 30)
        mid, _ = navigate(mask, start, "TurnLeft")
        back, _ = navigate(mask, mid, "TurnRight")
        assert back == start
    pose = Pose(1, 1, 0, 0)
    for _ in range(4):
        pose, _ = navigate(mask, pose, "TurnRight")
    assert pose == Pose(1, 1, 0, 0)


def test_pitch_steps_and_clamp():
    mask = open_grid(3, 3)
    down, _ = navigate(mask, Pose(1, 1, 0, 0), "LookDown")
    assert down.ver == 30
    up, _ = navigate(mask, Pose(1, 1, 0, 0), "LookUp")
    assert up.ver == -30

    pose, reason = navigate(mask, Pose(1, 1, 0, 60), "LookDown")
    assert pose is None and reason == "pitch_limit"
    pose, reason = navigate(mask, Pose(1, 1, 0, -30), "LookUp")
    assert pose is None and reason == "pitch_limit"


def test_pitch_reversibility_when_unclamped():
    mask = open_grid(3, 3)
    for ver in (0, 30):
        up, _ = navigate(mask, Pose(1, 1, 90, ver), "LookUp")
        back, _ = navigate(mask, up, "LookDown")
        assert back == Pose(1, 1, 90, ver)


def test_out_of_bounds_and_blocked():
    pose, reason = navigate(open_grid(1, 1), Pose(0, 0, 0, 0), "Forward")
    assert pose is None and reason == "out_of_bounds"

    walled = grid_from(["...", ".#.", "..."])
    pose, reason = navigate(walled, Pose(1, 0, 0, 0), "Forward")
    assert pose is None and reason == "blocked"


def test_nav_mask_blocks_receptacles_only():
    st = scene(
        open_grid(5, 5),
        Pose(0, 0, 0, 0),
        [obj("cabinet", "cab_0", (2, 2)), obj("bread", "bread_0", (3, 3))],
    )
    mask = nav_mask(st)
    assert not mask.traversable(2, 2)
    assert mask.traversable(3, 3)
    assert mask.traversable(0, 0)


def test_failed_navigation_is_noop():
    st = scene(grid_from(["...", ".#.", "..."]), Pose(1, 0, 0, 0))
    out, result = step(st, Action("Forward"))
    assert not result.ok and result.reason == "blocked"
    assert out == st


def test_navigation_touches_pose_only():
    st = scene(
        open_grid(5, 5),
        Pose(2, 2, 90, 0),
        [obj("bread", "bread_0", (1, 1))],
        inventory=None,
    )
    out, result = step(st, Action("Forward"))
    assert result.ok
    assert out.agent == Pose(3, 2, 90, 0)
    assert out.objects == st.objects
    assert out.inventory == st.inventory


def test_stop_is_a_successful_noop():
    st = scene(open_grid(3, 3), Pose(1, 1, 0, 0), [obj("lamp", "lamp_0", (0, 0))])
    out, result = step(st, Action(STOP))
    assert result.ok and result.reason is None
    assert out == st


def test_unknown_action_kind_raises():
    st = scene(open_grid(3, 3), Pose(1, 1, 0, 0))
    with pytest.raises(WorldError):
        step(st, Action("Teleport"))


# --- interactions ------------------------------------------------------------


def facing_scene(target_obj, extra=(), inventory=None, ver=0):
    """Agent at (3, 3) facing -y, so cell (3, 2) is the reachable one."""
    return scene(
        open_grid(7, 7),
        Pose(3, 3, 180, ver),
        [target_obj, *extra],
        inventory=inventory,
    )


def test_pickup_from_closed_cabinet_fails():
    st = facing_scene(
        obj("cabinet", "cab_0", (3, 2)),
        extra=[obj("bread", "bread_0", (3, 2), parent="cab_0")],
    )
    out, result = step(st, Action("PickUp", "bread_0"))
    assert not result.ok and result.reason == "closed_receptacle"
    assert out == st


def test_pickup_after_open_succeeds():
    st = facing_scene(
        obj("cabinet", "cab_0", (3, 2)),
        extra=[obj("bread", "bread_0", (3, 2), parent="cab_0")],
    )
    st, result = step(st, Action("Open", "cab_0"))
    assert result.ok and st.objects["cab_0"].is_open
    st, result = step(st, Action("PickUp", "bread_0"))
    assert result.ok
    assert st.inventory == "bread_0"
    assert st.objects["bread_0"].cell is None
    assert st.objects["bread_0"].parent is None


def test_pickup_failure_reasons():
    bread = obj("bread", "bread_0", (3, 2))
    knife = obj("knife", "knife_0", None)

    st = facing_scene(bread, extra=[knife], inventory="knife_0")
    _, result = step(st, Action("PickUp", "bread_0"))
    assert result.reason == "hands_full"

    st = facing_scene(obj("cabinet", "cab_0", (3, 2)))
    _, result = step(st, Action("PickUp", "cab_0"))
    assert result.reason == "wrong_flags"

    st = facing_scene(obj("bread", "bread_0", (3, 1)))  # one cell too far
    _, result = step(st, Action("PickUp", "bread_0"))
    assert result.reason == "not_reachable"

    st = facing_scene(bread)
    _, result = step(st, Action("PickUp", "missing"))
    assert result.reason == "wrong_flags"
    _, result = step(st, Action("PickUp"))
    assert result.reason == "wrong_flags"


def test_pickup_not_visible_when_detector_is_saturated():
    # 16 nearer objects fill the detector, pushing the reachable target
    # out of the truncated list.
    clutter = [obj("plate", f"plate_{i:02d}", (3, 3)) for i in range(16)]
    st = facing_scene(obj("bread", "bread_0", (3, 2)), extra=clutter)
    assert len(observe(st).detections) == MAX_DETECTIONS
    _, result = step(st, Action("PickUp", "bread_0"))
    assert result.reason == "not_visible"


def test_place_on_counter_and_in_cabinet():
    counter = obj("counter", "counter_0", (3, 2))
    bread = obj("bread", "bread_0", None)
    st = facing_scene(counter, extra=[bread], inventory="bread_0")
    st, result = step(st, Action("Place", "counter_0"))
    assert result.ok
    assert st.inventory is None
    assert st.objects["bread_0"].cell == (3, 2)
    assert st.objects["bread_0"].parent == "counter_0"

    cab = obj("cabinet", "cab_0", (3, 2))
    st = facing_scene(cab, extra=[bread], inventory="bread_0")
    _, result = step(st, Action("Place", "cab_0"))
    assert result.reason == "closed_receptacle"
    st, result = step(st, Action("Open", "cab_0"))
    st, result = step(st, Action("Place", "cab_0"))
    assert result.ok and st.objects["bread_0"].parent == "cab_0"


def test_place_failure_reasons():
    counter = obj("counter", "counter_0", (3, 2))
    st = facing_scene(counter)
    _, result = step(st, Action("Place", "counter_0"))
    assert result.reason == "hands_empty"

    bread = obj("bread", "bread_0", None)
    lamp = obj("lamp", "lamp_0", (3, 2))
    st = facing_scene(lamp, extra=[bread], inventory="bread_0")
    _, result = step(st, Action("Place", "lamp_0"))
    assert result.reason == "wrong_flags"

    far = obj("counter", "counter_0", (3, 0))
    st = facing_scene(far, extra=[bread], inventory="bread_0")
    _, result = step(st, Action("Place", "counter_0"))
    assert result.reason == "not_reachable"


def test_pour_transfers_liquid():
    pitcher = obj("pitcher", "pitcher_0", None, fill="water")
    mug = obj("mug", "mug_0", (3, 2))
    st = facing_scene(mug, extra=[pitcher], inventory="pitcher_0")
    st, result = step(st, Action("Pour", "mug_0"))
    assert result.ok
    assert st.objects["pitcher_0"].fill is None
    assert st.objects["mug_0"].fill == "water"


def test_pour_failure_reasons():
    mug = obj("mug", "mug_0", (3, 2))
    st = facing_scene(mug)
    _, result = step(st, Action("Pour", "mug_0"))
    assert result.reason == "hands_empty"

    empty = obj("cup", "cup_0", None)  # fillable but dry
    st = facing_scene(mug, extra=[empty], inventory="cup_0")
    _, result = step(st, Action("Pour", "mug_0"))
    assert result.reason == "wrong_flags"

    pitcher = obj("pitcher", "pitcher_0", None, fill="water")
    knife = obj("knife", "knife_0", (3, 2))
    st = facing_scene(knife, extra=[pitcher], inventory="pitcher_0")
    _, result = step(st, Action("Pour", "knife_0"))
    assert result.reason == "wrong_flags"


def test_slice_needs_a_held_knife():
    bread = obj("bread", "bread_0", (3, 2))
    st = facing_scene(bread)
    _, result = step(st, Action("Slice", "bread_0"))
    assert result.reason == "no_knife"

    plate = obj("plate", "plate_0", None)
    st = facing_scene(bread, extra=[plate], inventory="plate_0")
    _, result = step(st, Action("Slice", "bread_0"))
    assert result.reason == "no_knife"

    knife = obj("knife", "knife_0", None)
    st = facing_scene(bread, extra=[knife], inventory="knife_0")
    st, result = step(st, Action("Slice", "bread_0"))
    assert result.ok and st.objects["bread_0"].is_sliced

    mug = obj("mug", "mug_0", (3, 2))
    st = facing_scene(mug, extra=[knife], inventory="knife_0")
    _, result = step(st, Action("Slice", "mug_0"))
    assert result.reason == "wrong_flags"


def test_open_close_are_idempotent_setters():
    cab = obj("cabinet", "cab_0", (3, 2))
    st = facing_scene(cab)
    st, result = step(st, Action("Open", "cab_0"))
    assert result.ok and st.objects["cab_0"].is_open
    st, result = step(st, Action("Open", "cab_0"))
    assert result.ok and st.objects["cab_0"].is_open
    st, result = step(st, Action("Close", "cab_0"))
    assert result.ok and not st.objects["cab_0"].is_open

    st = facing_scene(obj("counter", "counter_0", (3, 2)))
    _, result = step(st, Action("Open", "counter_0"))
    assert result.reason == "wrong_flags"

    far = facing_scene(obj("cabinet", "cab_1", (3, 0)))
    _, result = step(far, Action("Open", "cab_1"))
    assert result.reason == "not_reachable"


def test_toggle_on_off():
    lamp = obj("lamp", "lamp_0", (3, 2))
    st = facing_scene(lamp)
    st, result = step(st, Action("ToggleOn", "lamp_0"))
    assert result.ok and st.objects["lamp_0"].is_on
    st, result = step(st, Action("ToggleOff", "lamp_0"))
    assert result.ok and not st.objects["lamp_0"].is_on

    st = facing_scene(obj("bread", "bread_0", (3, 2)))
    _, result = step(st, Action("ToggleOn", "bread_0"))
    assert result.reason == "wrong_flags"


def test_every_failed_interaction_is_a_noop():
    cab = obj("cabinet", "cab_0", (3, 2))
    bread = obj("bread", "bread_0", (3, 2), parent="cab_0")
    st = facing_scene(cab, extra=[bread])
    for kind in INTERACTION_ACTIONS:
        for target in ("bread_0", "cab_0", "missing", None):
            out, result = step(st, Action(kind, target))
            if not result.ok:
                assert out == st, (kind, target)
                assert result.reason in world.REASONS


def test_interaction_touches_target_and_inventory_only():
    cab = obj("cabinet", "cab_0", (3, 2))
    lamp = obj("lamp", "lamp_0", (1, 1))
    bread = obj("bread", "bread_0", (3, 3))
    st = facing_scene(cab, extra=[lamp, bread])
    out, result = step(st, Action("Open", "cab_0"))
    assert result.ok
    changed = {k for k in st.objects if st.objects[k] != out.objects[k]}
    assert changed == {"cab_0"}
    assert out.agent == st.agent


# --- observation -------------------------------------------------------------


def test_observe_is_deterministic():
    st = facing_scene(
        obj("cabinet", "cab_0", (3, 2), is_open=True),
        extra=[obj("mug", "mug_0", (3, 2), parent="cab_0")],
    )
    assert observe(st) == observe(st)


def test_open_cabinet_exposes_contents():
    cab = obj("cabinet", "cab_0", (3, 2), is_open=True)
    mug = obj("mug", "mug_0", (3, 2), parent="cab_0")
    st = facing_scene(cab, extra=[mug])
    seen = {d.instance_id for d in observe(st).detections}
    assert seen == {"cab_0", "mug_0"}

    closed = facing_scene(obj("cabinet", "cab_0", (3, 2)), extra=[mug])
    seen = {d.instance_id for d in observe(closed).detections}
    assert seen == {"cab_0"}


def _cone_oracle(hor: int, dx: int, dy: int) -> bool:
    """Independent restatement of the view cone, one branch per heading."""
    if hor == 0:
        depth, lat = dy, dx
    elif hor == 90:
        depth, lat = dx, dy
    elif hor == 180:
        depth, lat = -dy, dx
    else:
        depth, lat = -dx, dy
    return 0 <= depth <= 3 and abs(lat) <= depth


def test_view_cone_matches_oracle_everywhere():
    grid = open_grid(9, 9)
    agent_cell = (4, 4)
    for hor in HEADINGS:
        for x in range(9):
            for y in range(9):
                st = scene(grid, Pose(4, 4, hor, 0), [obj("apple", "apple_0", (x, y))])
                seen = any(
                    d.instance_id == "apple_0" for d in observe(st).detections
                )
                want = _cone_oracle(hor, x - agent_cell[0], y - agent_cell[1])
                assert seen == want, (hor, x, y)


def test_wall_occlusion_cases():
    rows = ["." * 9 for _ in range(9)]
    rows[2] = "....#...."  # wall at (4, 2)
    grid = grid_from(rows)

    def visible(obj_cell, hor=180):
        st = scene(grid, Pose(4, 4, hor, 0), [obj("apple", "apple_0", obj_cell)])
        return any(d.instance_id == "apple_0" for d in observe(st).detections)

    assert not visible((4, 1))  # straight line passes through the wall
    assert visible((4, 3))  # in front of the wall
    assert visible((3, 1))  # line skirts the wall cell


def test_diagonal_occlusion():
    rows = ["." * 9 for _ in range(9)]
    rows[3] = "...#....."  # wall at (3, 3)
    grid = grid_from(rows)
    st = scene(grid, Pose(4, 4, 270, 0), [obj("apple", "apple_0", (2, 2))])
    assert observe(st).detections == ()


def test_adjacent_cell_never_occluded():
    # No strictly-between cells exist at distance one.
    grid = grid_from(["###", "#.#", "#.#", "###"])
    st = scene(grid, Pose(1, 2, 180, 0), [obj("apple", "apple_0", (1, 1))])
    assert len(observe(st).detections) == 1


def test_box_geometry_literals():
    def box_of(cell, ver=0):
        st = facing_scene(obj("apple", "apple_0", cell), ver=ver)
        (det,) = observe(st).detections
        return det.box

    approx = pytest.approx
    assert box_of((3, 3)) == approx((0.25, 0.25, 0.75, 0.75), abs=1e-12)  # depth 0
    assert box_of((3, 2)) == approx((0.375, 0.295, 0.625, 0.545), abs=1e-12)
    assert box_of((3, 2), ver=60) == approx((0.375, 0.595, 0.625, 0.845), abs=1e-12)
    assert box_of((3, 2), ver=-30) == approx((0.375, 0.145, 0.625, 0.395), abs=1e-12)


def test_boxes_stay_normalized():
    grid = open_grid(9, 9)
    for ver in PITCHES:
        for x in range(9):
            for y in range(9):
                st = scene(grid, Pose(4, 4, 0, ver), [obj("apple", "apple_0", (x, y))])
                for det in observe(st).detections:
                    x1, y1, x2, y2 = det.box
                    assert 0.0 <= x1 < x2 <= 1.0
                    assert 0.0 <= y1 < y2 <= 1.0


def test_pitch_moves_boxes_but_never_gates():
    st0 = facing_scene(obj("apple", "apple_0", (3, 2)), ver=0)
    st60 = facing_scene(obj("apple", "apple_0", (3, 2)), ver=60)
    ids0 = [d.instance_id for d in observe(st0).detections]
    ids60 = [d.instance_id for d in observe(st60).detections]
    assert ids0 == ids60 == ["apple_0"]


def test_detections_sorted_by_area_then_ids():
    near = obj("plate", "plate_0", (3, 2))  # depth 1, bigger box
    far = obj("plate", "plate_1", (3, 0))  # depth 3, smaller box
    st = facing_scene(near, extra=[far])
    ids = [d.instance_id for d in observe(st).detections]
    assert ids == ["plate_0", "plate_1"]

    # equal areas: label id breaks the tie, then instance id
    bread = obj("bread", "z_bread", (3, 2))
    apple = obj("apple", "a_apple", (2, 2))
    st = scene(open_grid(7, 7), Pose(3, 3, 180, 0), [apple, bread])
    ids = [d.instance_id for d in observe(st).detections]
    assert ids == ["z_bread", "a_apple"]  # bread class precedes apple

    a = obj("apple", "apple_b", (3, 2))
    b = obj("apple", "apple_a", (2, 2))
    st = scene(open_grid(7, 7), Pose(3, 3, 180, 0), [a, b])
    ids = [d.instance_id for d in observe(st).detections]
    assert ids == ["apple_a", "apple_b"]


def test_held_object_is_not_rendered():
    knife = obj("knife", "knife_0", None)
    st = facing_scene(obj("bread", "bread_0", (3, 2)), extra=[knife], inventory="knife_0")
    assert {d.instance_id for d in observe(st).detections} == {"bread_0"}


def test_region_features_encode_class_flags_and_geometry():
    closed = facing_scene(obj("cabinet", "cab_0", (3, 2)))
    opened = facing_scene(obj("cabinet", "cab_0", (3, 2), is_open=True))
    (d_closed,) = observe(closed).detections
    (d_open,) = observe(opened).detections
    assert len(d_closed.region_feature) == REGION_FEATURE_DIM
    assert d_closed.region_feature != d_open.region_feature
    assert d_closed.box == d_open.box

    # the geometry tail is the box plus its width and height
    x1, y1, x2, y2 = d_closed.box
    assert d_closed.region_feature[-6:] == (x1, y1, x2, y2, x2 - x1, y2 - y1)

    # same class and flags at different offsets share the seeded head
    near = facing_scene(obj("apple", "apple_0", (3, 2)))
    far = facing_scene(obj("apple", "apple_1", (3, 1)))
    (dn,) = observe(near).detections
    (df,) = observe(far).detections
    assert dn.region_feature[:-6] == df.region_feature[:-6]
    assert dn.region_feature[-6:] != df.region_feature[-6:]


# --- goals -------------------------------------------------------------------


def goal_scene(n_in_cabinet: int):
    cab = obj("cabinet", "cab_0", (1, 1), is_open=True)
    breads = [
        obj("bread", f"bread_{i}", (1, 1) if i < n_in_cabinet else (3, 3),
            parent="cab_0" if i < n_in_cabinet else None)
        for i in range(2)
    ]
    return scene(open_grid(5, 5), Pose(0, 0, 0, 0), [cab, *breads])


def test_in_goal_with_quantifiers():
    both = goal_scene(2)
    one = goal_scene(1)
    none = goal_scene(0)

    all_in = GoalCondition("in", ("bread", "cabinet"), "all")
    assert check_goals(both, [all_in]) == (True,)
    assert check_goals(one, [all_in]) == (False,)

    any_in = GoalCondition("in", ("bread", "cabinet"), "any")
    assert check_goals(one, [any_in]) == (True,)
    assert check_goals(none, [any_in]) == (False,)

    at_least_2 = GoalCondition("in", ("bread", "cabinet"), "count", count=2)
    assert check_goals(both, [at_least_2]) == (True,)
    assert check_goals(one, [at_least_2]) == (False,)
    at_least_1 = GoalCondition("in", ("bread", "cabinet"), "count", count=1)
    assert check_goals(both, [at_least_1]) == (True,)


def test_goal_mask_counts_partial_progress():
    st = scene(
        open_grid(5, 5),
        Pose(0, 0, 0, 0),
        [
            obj("cabinet", "cab_0", (1, 1), is_open=True),
            obj("lamp", "lamp_0", (2, 2), is_on=True),
            obj("bread", "bread_0", (3, 3), is_sliced=True),
            obj("mug", "mug_0", (4, 4)),
        ],
    )
    goals = [
        GoalCondition("is_open", ("cab_0",), want=True),
        GoalCondition("is_on", ("lamp_0",), want=False),
        GoalCondition("sliced", ("bread",), "any"),
        GoalCondition("filled", ("mug",), "any"),
    ]
    mask = check_goals(st, goals)
    assert mask == (True, False, True, False)
    assert sum(mask) == 2


def test_empty_goal_list():
    st = goal_scene(0)
    assert check_goals(st, []) == ()


def test_goal_errors():
    st = goal_scene(0)
    with pytest.raises(WorldError):
        check_goals(st, [GoalCondition("in", ("dragon", "cabinet"))])
    with pytest.raises(WorldError):
        check_goals(st, [GoalCondition("sliced", ("potato",), "any")])  # no potatoes
    with pytest.raises(WorldError):
        check_goals(st, [GoalCondition("is_open", ("missing_id",))])
    with pytest.raises(WorldError):
        check_goals(st, [GoalCondition("sliced", ("bread",), "most")])


# --- serialization -----------------------------------------------------------


def test_state_json_round_trip():
    cab = obj("cabinet", "cab_0", (3, 2), is_open=True)
    mug = obj("mug", "mug_0", (3, 2), parent="cab_0", fill="water")
    knife = obj("knife", "knife_0", None)
    st = scene(
        grid_from(["....", ".#..", "....", "...."]),
        Pose(3, 3, 270, 30),
        [cab, mug, knife],
        inventory="knife_0",
    )
    text = world.state_to_json(st)
    assert world.state_from_json(text) == st
    assert world.state_to_json(world.state_from_json(text)) == text


def test_action_and_goal_round_trip():
    for action in (Action("Forward"), Action("PickUp", "mug_0"), Action(STOP)):
        assert world.action_from_dict(world.action_to_dict(action)) == action
    goal = GoalCondition("in", ("bread", "cabinet"), "count", count=2)
    assert world.goal_from_dict(world.goal_to_dict(goal)) == goal
    flag = GoalCondition("is_open", ("cab_0",), want=False)
    assert world.goal_from_dict(world.goal_to_dict(flag)) == flag


def test_action_catalog_shape():
    assert len(NAV_ACTIONS) == 8
    assert len(INTERACTION_ACTIONS) == 8
    assert len(world.ACTION_KINDS) == 17
    assert world.ACTION_KINDS[-1] == STOP
