"""Shared scene builders for the test suite."""

from __future__ import annotations

from unitcraft.world import (
    CLASS_BY_NAME,
    Grid,
    ObjectInstance,
    Pose,
    WorldState,
)


def open_grid(w: int, h: int) -> Grid:
    return Grid(tuple("." * w for _ in range(h)))


def grid_from(rows) -> Grid:
    return Grid(tuple(rows))


def obj(name: str, oid: str, cell, **kw) -> ObjectInstance:
    return ObjectInstance(id=oid, class_id=CLASS_BY_NAME[name], cell=cell, **kw)


def scene(grid: Grid, agent: Pose, objects=(), inventory=None) -> WorldState:
    return WorldState(
        scene_id="test",
        grid=grid,
        objects={o.id: o for o in objects},
        agent=agent,
        inventory=inventory,
    )
