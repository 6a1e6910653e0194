"""Per-unit frozen-state panorama stores.

A store materializes every observation the agent could request while
solving one unit: for each grid point reachable from the unit's start, all
16 views (4 headings x 4 pitches) rendered against the unit's initial
object configuration. Training then never touches the live world for
observations; lookups are exact-match dictionary reads.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import world
from .segmentation import UnitInstance
from .world import (
    Detection,
    Observation,
    Pose,
    WorldState,
    HEADINGS,
    PITCHES,
    REGION_FEATURE_DIM,
)

MAGIC = b"UPAN"
VERSION = 1


class StoreError(ValueError):
    """Raised for malformed store files or unreachable target poses."""


class StoreMissError(LookupError):
    """Raised when a pose outside the store is looked up."""


@dataclass(frozen=True)
class PanoramaStore:
    unit_id: tuple[str, int]
    frozen_state_hash: str
    views: dict[tuple[int, int, int, int], Observation]

    @property
    def points(self) -> set[tuple[int, int]]:
        return {(x, y) for (x, y, _, _) in self.views}


def frozen_state_hash(state: WorldState) -> str:
    """Digest of everything the detector can see: grid and objects. The
    agent pose and inventory id do not affect rendered views."""
    payload = {
        "grid": list(state.grid.rows),
        "objects": [
            world.object_to_dict(state.objects[k]) for k in sorted(state.objects)
        ],
    }
    blob = json.dumps(payload, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def reachable_points(state: WorldState) -> list[tuple[int, int]]:
    """BFS closure of the agent's cell over the navigation mask."""
    mask = world.nav_mask(state)
    start = state.agent.cell
    if not mask.traversable(*start):
        raise StoreError(f"agent cell {start} is not traversable")
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            nxt = (x + dx, y + dy)
            if nxt not in seen and mask.traversable(*nxt):
                seen.add(nxt)
                queue.append(nxt)
    return sorted(seen)


def build_store(unit: UnitInstance) -> PanoramaStore:
    state = unit.initial_state
    points = reachable_points(state)
    if unit.target_pose.cell not in set(points):
        raise StoreError(
            f"unit {unit.unit_id} target pose {unit.target_pose} unreachable"
        )
    views: dict[tuple[int, int, int, int], Observation] = {}
    for x, y in points:
        for hor in HEADINGS:
            for ver in PITCHES:
                pose = Pose(x, y, hor, ver)
                views[pose.key()] = world.observe(state, pose)
    return PanoramaStore(
        unit_id=unit.unit_id,
        frozen_state_hash=frozen_state_hash(state),
        views=views,
    )


def env_lookup(store: PanoramaStore, pose: Pose) -> Observation:
    try:
        return store.views[pose.key()]
    except KeyError:
        raise StoreMissError(
            f"pose {pose} not in store for unit {store.unit_id}"
        ) from None


# --- binary format ---------------------------------------------------------


def _pack_observation(key: tuple[int, int, int, int], obs: Observation) -> bytes:
    parts = [struct.pack("<4hH", *key, len(obs.detections))]
    for d in obs.detections:
        iid = d.instance_id.encode()
        parts.append(struct.pack("<HH", d.label_id, len(iid)))
        parts.append(iid)
        parts.append(struct.pack("<4d", *d.box))
        parts.append(struct.pack(f"<{REGION_FEATURE_DIM}d", *d.region_feature))
    record = b"".join(parts)
    return struct.pack("<I", len(record)) + record


def save_store(store: PanoramaStore, path: str) -> None:
    sid, idx = store.unit_id
    sid_b = sid.encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<H", len(sid_b)))
        fh.write(sid_b)
        fh.write(struct.pack("<I", idx))
        fh.write(bytes.fromhex(store.frozen_state_hash))
        keys = sorted(store.views)
        fh.write(struct.pack("<I", len(keys)))
        for key in keys:
            fh.write(_pack_observation(key, store.views[key]))


def load_store(path: str) -> PanoramaStore:
    with open(path, "rb") as fh:
        data = fh.read()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise StoreError(f"truncated store file: {path}")
        out = data[off : off + n]
        off += n
        return out

    if take(4) != MAGIC:
        raise StoreError(f"bad magic in {path}")
    (version,) = struct.unpack("<H", take(2))
    if version != VERSION:
        raise StoreError(f"unsupported store version {version} in {path}")
    (sid_len,) = struct.unpack("<H", take(2))
    sid = take(sid_len).decode()
    (idx,) = struct.unpack("<I", take(4))
    digest = take(32).hex()
    (n_records,) = struct.unpack("<I", take(4))
    views: dict[tuple[int, int, int, int], Observation] = {}
    for _ in range(n_records):
        (rec_len,) = struct.unpack("<I", take(4))
        rec = take(rec_len)
        pos = 0
        x, y, hor, ver, n_det = struct.unpack_from("<4hH", rec, pos)
        pos += struct.calcsize("<4hH")
        dets = []
        for _ in range(n_det):
            label_id, iid_len = struct.unpack_from("<HH", rec, pos)
            pos += 4
            iid = rec[pos : pos + iid_len].decode()
            pos += iid_len
            box = struct.unpack_from("<4d", rec, pos)
            pos += 32
            feat = struct.unpack_from(f"<{REGION_FEATURE_DIM}d", rec, pos)
            pos += 8 * REGION_FEATURE_DIM
            dets.append(
                Detection(
                    instance_id=iid,
                    label_id=label_id,
                    box=tuple(box),
                    region_feature=tuple(feat),
                )
            )
        views[(x, y, hor, ver)] = Observation(
            pose=Pose(x, y, hor, ver), detections=tuple(dets)
        )
    return PanoramaStore(unit_id=(sid, idx), frozen_state_hash=digest, views=views)


def store_filename(unit_id: tuple[str, int]) -> str:
    return f"{unit_id[0]}__{unit_id[1]:03d}.pano"


class StoreProvider:
    """Directory-backed store cache: loads a unit's store if present,
    otherwise builds and saves it on first touch."""

    def __init__(self, store_dir: str):
        self.store_dir = store_dir
        os.makedirs(store_dir, exist_ok=True)
        self._cache: dict[tuple[str, int], PanoramaStore] = {}

    def get(self, unit: UnitInstance) -> PanoramaStore:
        if unit.unit_id in self._cache:
            return self._cache[unit.unit_id]
        path = os.path.join(self.store_dir, store_filename(unit.unit_id))
        if os.path.exists(path):
            store = load_store(path)
            want = frozen_state_hash(unit.initial_state)
            if store.frozen_state_hash != want:
                raise StoreError(
                    f"stale store for unit {unit.unit_id}: state hash mismatch"
                )
        else:
            store = build_store(unit)
            save_store(store, path)
        self._cache[unit.unit_id] = store
        return store


def snapshot_units(
    units: list[UnitInstance], out_dir: str, jobs: int = 1
) -> list[str]:
    """Prebuild and save stores for every unit; returns written paths in
    unit order."""
    os.makedirs(out_dir, exist_ok=True)

    def work(unit: UnitInstance) -> str:
        path = os.path.join(out_dir, store_filename(unit.unit_id))
        save_store(build_store(unit), path)
        return path

    if jobs <= 1:
        return [work(u) for u in units]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, units))
