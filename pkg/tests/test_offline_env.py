"""Offline panorama stores: coverage, live equivalence, binary format."""

from __future__ import annotations

import pytest

from conftest import grid_from, obj, open_grid, scene
from unitcraft.offline_env import (
    PanoramaStore,
    StoreError,
    StoreMissError,
    StoreProvider,
    build_store,
    env_lookup,
    frozen_state_hash,
    load_store,
    reachable_points,
    save_store,
    snapshot_units,
    store_filename,
)
from unitcraft.scenegen import GenConfig, generate_session
from unitcraft.segmentation import UnitInstance, segment_units
from unitcraft.world import HEADINGS, PITCHES, Pose, observe


def make_unit(state, target_pose=None, unit_id=("hand", 0)) -> UnitInstance:
    return UnitInstance(
        unit_id=unit_id,
        prev_id=None,
        next_id=None,
        initial_state=state,
        dialogue=(),
        actions=(),
        target_pose=target_pose or state.agent,
        target_kind="Stop",
        target_class_id=None,
    )


def generated_units(seed=33, limit=4):
    session = generate_session(GenConfig(rng_seed=seed))
    return segment_units(session)[:limit]


def test_open_room_has_nine_points_and_144_views():
    st = scene(open_grid(3, 3), Pose(1, 1, 0, 0))
    store = build_store(make_unit(st))
    assert len(store.points) == 9
    assert len(store.views) == 144  # 9 points x 4 headings x 4 pitches


def test_sealed_pocket_is_unreachable():
    grid = grid_from(
        [
            ".....",
            ".###.",
            ".#.#.",
            ".###.",
            ".....",
        ]
    )
    st = scene(grid, Pose(0, 0, 0, 0))
    points = reachable_points(st)
    assert (2, 2) not in points
    assert (0, 0) in points


def test_receptacles_block_reachability():
    st = scene(
        open_grid(3, 3),
        Pose(0, 0, 0, 0),
        [obj("fridge", "fridge_0", (1, 1))],
    )
    assert (1, 1) not in reachable_points(st)


def test_agent_on_wall_raises():
    st = scene(grid_from(["#.", ".."]), Pose(0, 0, 0, 0))
    with pytest.raises(StoreError):
        reachable_points(st)


def test_unreachable_target_pose_raises():
    grid = grid_from([".#.", ".#.", ".#."])
    st = scene(grid, Pose(0, 0, 0, 0))
    with pytest.raises(StoreError):
        build_store(make_unit(st, target_pose=Pose(2, 0, 0, 0)))


def test_store_matches_live_observe_exhaustively():
    st = scene(
        grid_from(["....", ".#..", "....", "...."]),
        Pose(0, 0, 90, 0),
        [
            obj("cabinet", "cab_0", (100 % 4 - 1, 3)),  # (3, 3)
            obj("bread", "bread_0", (2, 0)),
            obj("mug", "mug_0", (3, 3), parent="cab_0"),
        ],
    )
    store = build_store(make_unit(st))
    for key in store.views:
        pose = Pose(*key)
        assert env_lookup(store, pose) == observe(st, pose)


def test_store_matches_live_on_generated_units():
    for unit in generated_units():
        store = build_store(unit)
        for key in list(store.views)[::7]:
            pose = Pose(*key)
            assert env_lookup(store, pose) == observe(unit.initial_state, pose)


def test_every_point_carries_all_16_views():
    unit = generated_units(limit=1)[0]
    store = build_store(unit)
    for x, y in store.points:
        for hor in HEADINGS:
            for ver in PITCHES:
                assert (x, y, hor, ver) in store.views


def test_lookup_is_stable_and_total_over_the_store():
    st = scene(open_grid(2, 2), Pose(0, 0, 0, 0))
    store = build_store(make_unit(st))
    pose = Pose(1, 1, 270, 30)
    assert env_lookup(store, pose) == env_lookup(store, pose)
    with pytest.raises(StoreMissError):
        env_lookup(store, Pose(5, 5, 0, 0))


def test_build_is_reproducible():
    unit = generated_units(limit=1)[0]
    a = build_store(unit)
    b = build_store(unit)
    assert a.frozen_state_hash == b.frozen_state_hash
    assert a.views == b.views


def test_hash_ignores_agent_but_sees_objects():
    base = scene(open_grid(3, 3), Pose(0, 0, 0, 0), [obj("bread", "bread_0", (1, 1))])
    moved_agent = scene(
        open_grid(3, 3), Pose(2, 2, 90, 30), [obj("bread", "bread_0", (1, 1))]
    )
    assert frozen_state_hash(base) == frozen_state_hash(moved_agent)

    moved_obj = scene(
        open_grid(3, 3), Pose(0, 0, 0, 0), [obj("bread", "bread_0", (2, 1))]
    )
    assert frozen_state_hash(base) != frozen_state_hash(moved_obj)


def test_binary_round_trip_and_determinism(tmp_path):
    unit = generated_units(limit=1)[0]
    store = build_store(unit)
    path_a = tmp_path / "a.pano"
    path_b = tmp_path / "b.pano"
    save_store(store, str(path_a))
    save_store(store, str(path_b))
    assert path_a.read_bytes() == path_b.read_bytes()

    loaded = load_store(str(path_a))
    assert loaded.unit_id == store.unit_id
    assert loaded.frozen_state_hash == store.frozen_state_hash
    assert loaded.views == store.views


def test_truncated_file_raises(tmp_path):
    unit = generated_units(limit=1)[0]
    path = tmp_path / "t.pano"
    save_store(build_store(unit), str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 9])
    with pytest.raises(StoreError):
        load_store(str(path))


def test_provider_builds_once_then_serves_from_disk(tmp_path):
    unit = generated_units(limit=1)[0]
    provider = StoreProvider(str(tmp_path))
    first = provider.get(unit)
    assert (tmp_path / store_filename(unit.unit_id)).exists()
    assert provider.get(unit) is first  # memory cache

    fresh = StoreProvider(str(tmp_path))
    assert fresh.get(unit).views == first.views  # disk load


def test_provider_rejects_stale_store(tmp_path):
    unit = generated_units(limit=1)[0]
    StoreProvider(str(tmp_path)).get(unit)

    changed_state = scene(
        unit.initial_state.grid,
        unit.initial_state.agent,
        list(unit.initial_state.objects.values()) + [obj("apple", "late_0", (1, 1))],
    )
    changed = make_unit(changed_state, unit.target_pose, unit_id=unit.unit_id)
    with pytest.raises(StoreError):
        StoreProvider(str(tmp_path)).get(changed)


def test_snapshot_jobs_agree(tmp_path):
    units = generated_units(limit=3)
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    paths_1 = snapshot_units(units, str(serial), jobs=1)
    paths_2 = snapshot_units(units, str(parallel), jobs=3)
    assert [p.split("/")[-1] for p in paths_1] == [p.split("/")[-1] for p in paths_2]
    for a, b in zip(paths_1, paths_2):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()
