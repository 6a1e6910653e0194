"""Procedural sessions: scene layouts, household tasks, templated dialogue,
and a scripted demonstrator that navigates with the planner and interacts.

Generation is deterministic: every random draw flows through numpy
Generators seeded from explicit SeedSequence keys, so the same config
produces byte-identical corpora.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import world
from .world import (
    Action,
    GoalCondition,
    Grid,
    ObjectInstance,
    Pose,
    WorldState,
    CLASS_BY_NAME,
    CLASSES,
    HOR_VECS,
    LIQUID,
)
from .pathing import PathError, PathPlanner

TASK_TEMPLATES = ("put_all", "slice", "make_drink", "open_close")

# Words the dialogue templates can emit, beyond object class names. The
# model vocabulary is built from this closed list.
TEMPLATE_WORDS = (
    "a",
    "all",
    "and",
    "are",
    "close",
    "done",
    "fill",
    "from",
    "in",
    "into",
    "is",
    "it",
    "now",
    "off",
    "ok",
    "on",
    "open",
    "pick",
    "please",
    "pour",
    "put",
    "slice",
    "the",
    "turn",
    "up",
    "water",
    "with",
    "you",
)

_PUT_TARGETS = ("bread", "apple", "potato", "plate", "mug", "cup")
_SLICE_TARGETS = ("bread", "apple", "potato")
_DRINK_TARGETS = ("mug", "cup")


class GenerationError(ValueError):
    """Raised when a feasible scene or task cannot be produced."""


@dataclass(frozen=True)
class GenConfig:
    rng_seed: int = 19980417
    grid_min: int = 7
    grid_max: int = 10
    templates: tuple[str, ...] = TASK_TEMPLATES
    verbosity: int = 1  # 0 task only, 1 +hints, 2 +per-unit instructions
    trailing_nav_steps: int = 1
    max_attempts: int = 20


@dataclass(frozen=True)
class Utterance:
    speaker: str  # "commander" | "follower"
    text: str
    before_step: int  # emitted before this demo step index


@dataclass(frozen=True)
class DemoStep:
    action: Action
    pose_after: Pose


@dataclass(frozen=True)
class Session:
    session_id: str
    scene: WorldState  # initial state
    goals: tuple[GoalCondition, ...]
    dialogue: tuple[Utterance, ...]
    demo: tuple[DemoStep, ...]
    final_state: WorldState


@dataclass
class Corpus:
    splits: dict[str, list[Session]]
    manifest: dict


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(0, len(items)))]


# --- layout ----------------------------------------------------------------


def _floor_connected(rows: list[list[str]], blocked: set[tuple[int, int]]) -> bool:
    h, w = len(rows), len(rows[0])
    cells = {
        (x, y)
        for y in range(h)
        for x in range(w)
        if rows[y][x] == "." and (x, y) not in blocked
    }
    if not cells:
        return False
    start = min(cells)
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            nxt = (x + dx, y + dy)
            if nxt in seen or nxt not in cells:
                continue
            seen.add(nxt)
            stack.append(nxt)
    return len(seen) == len(cells)


def _generate_layout(rng: np.random.Generator, scene_id: str, lo: int, hi: int) -> WorldState:
    """Walled room with a few interior walls and wall-hugging furniture."""
    for _ in range(50):
        w = int(rng.integers(lo, hi + 1))
        h = int(rng.integers(lo, hi + 1))
        rows = [["#" if x in (0, w - 1) or y in (0, h - 1) else "." for x in range(w)] for y in range(h)]
        for y in range(2, h - 2):
            for x in range(2, w - 2):
                if rng.random() < 0.08:
                    rows[y][x] = "#"
        if not _floor_connected(rows, set()):
            continue

        edge_cells = [
            (x, y)
            for y in range(1, h - 1)
            for x in range(1, w - 1)
            if rows[y][x] == "."
            and any(
                rows[y + dy][x + dx] == "#"
                for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0))
            )
        ]
        wanted = ("fridge", "cabinet", "cabinet", "counter", "table")
        if len(edge_cells) < len(wanted) + 2:
            continue
        order = rng.permutation(len(edge_cells))
        spots = [edge_cells[int(i)] for i in order[: len(wanted)]]
        if not _floor_connected(rows, set(spots)):
            continue

        objects: dict[str, ObjectInstance] = {}
        counts: dict[str, int] = {}
        for name, cell in zip(wanted, spots):
            idx = counts.get(name, 0)
            counts[name] = idx + 1
            oid = f"{name}_{idx}"
            objects[oid] = ObjectInstance(
                id=oid, class_id=CLASS_BY_NAME[name], cell=cell
            )
        # A toggleable on the table keeps ToggleOn/Off exercised in scenes.
        objects["lamp_0"] = ObjectInstance(
            id="lamp_0",
            class_id=CLASS_BY_NAME["lamp"],
            cell=objects["table_0"].cell,
            parent="table_0",
        )
        grid = Grid(tuple("".join(r) for r in rows))
        state = WorldState(
            scene_id=scene_id,
            grid=grid,
            objects=objects,
            agent=Pose(0, 0, 0, 0),  # placeholder; the task places the agent
        )
        mask = world.nav_mask(state)
        if all(
            any(
                mask.traversable(c[0] + dx, c[1] + dy)
                for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0))
            )
            for c in spots
        ):
            return state
    raise GenerationError("no feasible layout after 50 attempts")


# --- task placement --------------------------------------------------------


def _nav_cells(state: WorldState) -> list[tuple[int, int]]:
    mask = world.nav_mask(state)
    return [
        (x, y)
        for y in range(mask.height)
        for x in range(mask.width)
        if mask.traversable(x, y)
    ]


def _receptacles(state: WorldState, *, openable=None) -> list[ObjectInstance]:
    found = [
        o
        for o in sorted(state.objects.values(), key=lambda o: o.id)
        if o.cls.receptacle and (openable is None or o.cls.openable == openable)
    ]
    return found


def _place_portable(
    rng: np.random.Generator,
    objects: dict[str, ObjectInstance],
    state: WorldState,
    name: str,
    idx: int,
    *,
    inside: ObjectInstance | None = None,
    avoid: tuple[int, int] | None = None,
    fill: str | None = None,
    exclude: str | None = None,
) -> ObjectInstance:
    oid = f"{name}_{idx}"
    if inside is not None:
        obj = ObjectInstance(
            id=oid,
            class_id=CLASS_BY_NAME[name],
            cell=inside.cell,
            parent=inside.id,
            fill=fill,
        )
    else:
        surfaces = [
            o
            for o in _receptacles(state)
            if not o.cls.openable and o.id != exclude
        ]
        cells = [c for c in _nav_cells(state) if c != avoid]
        if surfaces and rng.random() < 0.7:
            parent = _pick(rng, surfaces)
            obj = ObjectInstance(
                id=oid,
                class_id=CLASS_BY_NAME[name],
                cell=parent.cell,
                parent=parent.id,
                fill=fill,
            )
        else:
            obj = ObjectInstance(
                id=oid,
                class_id=CLASS_BY_NAME[name],
                cell=_pick(rng, cells),
                fill=fill,
            )
    objects[obj.id] = obj
    return obj


@dataclass
class _TaskScript:
    statement: str
    goals: list[GoalCondition]
    interactions: list[tuple[str, str]]  # (kind, object id)
    hints: list[tuple[str, str]]  # (hidden object id, container id)


def _script_task(
    rng: np.random.Generator, state: WorldState, template: str
) -> tuple[WorldState, _TaskScript]:
    objects = dict(state.objects)
    agent_cell = _pick(rng, _nav_cells(state))
    agent = Pose(agent_cell[0], agent_cell[1], int(_pick(rng, world.HEADINGS)), 0)
    hints: list[tuple[str, str]] = []

    if template == "put_all":
        target = _pick(rng, _PUT_TARGETS)
        dest = _pick(rng, _receptacles(state))
        if dest.cls.openable:
            dest = replace(dest, is_open=True)
            objects[dest.id] = dest
        containers = [
            o
            for o in _receptacles(state, openable=True)
            if o.class_id != dest.class_id and o.id != dest.id
        ]
        hidden = containers and rng.random() < 0.5
        interactions: list[tuple[str, str]] = []
        if hidden:
            box = _pick(rng, containers)
            first = _place_portable(rng, objects, state, target, 0, inside=box)
            hints.append((first.id, box.id))
            interactions += [("Open", box.id), ("PickUp", first.id), ("Place", dest.id)]
        else:
            first = _place_portable(
                rng, objects, state, target, 0, avoid=agent_cell, exclude=dest.id
            )
            interactions += [("PickUp", first.id), ("Place", dest.id)]
        second = _place_portable(
            rng, objects, state, target, 1, avoid=agent_cell, exclude=dest.id
        )
        interactions += [("PickUp", second.id), ("Place", dest.id)]
        dest_name = CLASSES[dest.class_id].name
        script = _TaskScript(
            statement=f"please put all the {target} into the {dest_name}",
            goals=[
                GoalCondition("in", (target, dest_name), "count", count=1),
                GoalCondition("in", (target, dest_name), "count", count=2),
            ],
            interactions=interactions,
            hints=hints,
        )

    elif template == "slice":
        target = _pick(rng, _SLICE_TARGETS)
        knife = _place_portable(rng, objects, state, "knife", 0, avoid=agent_cell)
        containers = _receptacles(state, openable=True)
        hidden = containers and rng.random() < 0.4
        interactions = [("PickUp", knife.id)]
        if hidden:
            box = _pick(rng, containers)
            victim = _place_portable(rng, objects, state, target, 0, inside=box)
            hints.append((victim.id, box.id))
            interactions += [("Open", box.id), ("Slice", victim.id)]
        else:
            victim = _place_portable(rng, objects, state, target, 0, avoid=agent_cell)
            interactions += [("Slice", victim.id)]
        script = _TaskScript(
            statement=f"please slice a {target}",
            goals=[GoalCondition("sliced", (target,), "any")],
            interactions=interactions,
            hints=hints,
        )

    elif template == "make_drink":
        target = _pick(rng, _DRINK_TARGETS)
        pitcher = _place_portable(
            rng, objects, state, "pitcher", 0, avoid=agent_cell, fill=LIQUID
        )
        containers = _receptacles(state, openable=True)
        hidden = containers and rng.random() < 0.4
        interactions = [("PickUp", pitcher.id)]
        if hidden:
            box = _pick(rng, containers)
            vessel = _place_portable(rng, objects, state, target, 0, inside=box)
            hints.append((vessel.id, box.id))
            interactions += [("Open", box.id), ("Pour", vessel.id)]
        else:
            vessel = _place_portable(rng, objects, state, target, 0, avoid=agent_cell)
            interactions += [("Pour", vessel.id)]
        script = _TaskScript(
            statement=f"please fill the {target} with water from the pitcher",
            goals=[GoalCondition("filled", (target,), "any")],
            interactions=interactions,
            hints=hints,
        )

    elif template == "open_close":
        openables = _receptacles(state, openable=True)
        if len(openables) < 2:
            raise GenerationError("open_close needs two openable receptacles")
        order = rng.permutation(len(openables))
        to_open = openables[int(order[0])]
        to_close = replace(openables[int(order[1])], is_open=True)
        objects[to_close.id] = to_close
        a = CLASSES[to_open.class_id].name
        b = CLASSES[to_close.class_id].name
        script = _TaskScript(
            statement=f"please open the {a} and close the {b}",
            goals=[
                GoalCondition("is_open", (to_open.id,), want=True),
                GoalCondition("is_open", (to_close.id,), want=False),
            ],
            interactions=[("Open", to_open.id), ("Close", to_close.id)],
            hints=[],
        )

    else:
        raise GenerationError(f"unknown task template: {template}")

    return replace(state, objects=objects, agent=agent), script


# --- demonstrator ----------------------------------------------------------

_LOW_VER = 30  # pitch used when handling objects
_INTERACTION_VER = {
    "PickUp": _LOW_VER,
    "Place": _LOW_VER,
    "Slice": _LOW_VER,
    "Pour": _LOW_VER,
    "Open": 0,
    "Close": 0,
    "ToggleOn": 0,
    "ToggleOff": 0,
}


def interaction_poses(mask: Grid, cell: tuple[int, int], ver: int) -> list[Pose]:
    """Candidate poses from which a cell can be interacted with, in a fixed
    deterministic order: the four adjacent approaches, then in-cell poses."""
    poses = []
    for hor in world.HEADINGS:
        dx, dy = HOR_VECS[hor]
        nx, ny = cell[0] - dx, cell[1] - dy
        if mask.traversable(nx, ny):
            poses.append(Pose(nx, ny, hor, ver))
    if mask.traversable(*cell):
        for hor in world.HEADINGS:
            poses.append(Pose(cell[0], cell[1], hor, ver))
    return poses


def _demonstrate(
    rng: np.random.Generator,
    state: WorldState,
    script: _TaskScript,
    trailing: int,
) -> tuple[tuple[DemoStep, ...], WorldState, list[int]]:
    """Navigate-then-interact for each scripted interaction. Returns the
    demo, the final state, and each interaction's demo step index."""
    mask = world.nav_mask(state)
    planner = PathPlanner(mask)
    demo: list[DemoStep] = []
    boundaries: list[int] = []
    for kind, target_id in script.interactions:
        obj = state.objects[target_id]
        if obj.cell is None:
            raise GenerationError(f"interaction target {target_id} is held")
        candidates = interaction_poses(mask, obj.cell, _INTERACTION_VER[kind])
        best = None
        for pose in candidates:
            try:
                cost = planner.cost(state.agent, pose)
            except PathError:
                continue
            if best is None or cost < best[0]:
                best = (cost, pose)
        if best is None:
            raise GenerationError(f"no reachable pose for {kind} {target_id}")
        path = planner.path(state.agent, best[1])
        for pose, kind_nav in zip(path.poses[1:], path.actions):
            state, result = world.step(state, Action(kind_nav))
            assert result.ok and state.agent == pose
            demo.append(DemoStep(Action(kind_nav), state.agent))
        state, result = world.step(state, Action(kind, target_id))
        if not result.ok:
            raise GenerationError(
                f"scripted {kind} on {target_id} failed: {result.reason}"
            )
        demo.append(DemoStep(Action(kind, target_id), state.agent))
        boundaries.append(len(demo) - 1)
    for _ in range(trailing):
        turn = "TurnLeft" if rng.random() < 0.5 else "TurnRight"
        state, result = world.step(state, Action(turn))
        assert result.ok
        demo.append(DemoStep(Action(turn), state.agent))
    return tuple(demo), state, boundaries


_INSTRUCTIONS = {
    "Open": "now open the {}",
    "Close": "now close the {}",
    "PickUp": "now pick up the {}",
    "Place": "now put it in the {}",
    "Slice": "now slice the {}",
    "Pour": "now pour into the {}",
    "ToggleOn": "now turn on the {}",
    "ToggleOff": "now turn off the {}",
}


def _compose_dialogue(
    cfg: GenConfig,
    state: WorldState,
    script: _TaskScript,
    boundaries: list[int],
    trailing: int,
) -> tuple[Utterance, ...]:
    out = [Utterance("commander", script.statement, 0)]
    unit_starts = [0] + [b + 1 for b in boundaries[:-1]]
    if cfg.verbosity >= 1:
        for obj_id, box_id in script.hints:
            open_unit = next(
                i
                for i, (kind, tid) in enumerate(script.interactions)
                if kind == "Open" and tid == box_id
            )
            name = CLASSES[state.objects[obj_id].class_id].name
            box = CLASSES[state.objects[box_id].class_id].name
            out.append(
                Utterance(
                    "commander",
                    f"the {name} is in the {box}",
                    unit_starts[open_unit],
                )
            )
    if cfg.verbosity >= 2:
        for i, (kind, tid) in enumerate(script.interactions):
            name = CLASSES[state.objects[tid].class_id].name
            out.append(
                Utterance("commander", _INSTRUCTIONS[kind].format(name), unit_starts[i])
            )
            out.append(Utterance("follower", "ok", unit_starts[i]))
        if trailing:
            out.append(Utterance("commander", "you are done", boundaries[-1] + 1))
    out.sort(key=lambda u: u.before_step)
    return tuple(out)


def generate_session(
    cfg: GenConfig,
    *,
    session_id: str = "session-00000",
    scene_id: str = "scene-0000",
    layout_key: tuple[int, ...] | None = None,
    task_key: tuple[int, ...] | None = None,
) -> Session:
    layout_key = layout_key or (cfg.rng_seed, 7, 0)
    task_key = task_key or (cfg.rng_seed, 11, 0)
    layout = _generate_layout(_rng(*layout_key), scene_id, cfg.grid_min, cfg.grid_max)
    last_err: Exception | None = None
    for attempt in range(cfg.max_attempts):
        rng = _rng(*task_key, attempt)
        template = _pick(rng, cfg.templates)
        try:
            state, script = _script_task(rng, layout, template)
            demo, final, boundaries = _demonstrate(
                rng, state, script, cfg.trailing_nav_steps
            )
        except GenerationError as err:
            last_err = err
            continue
        dialogue = _compose_dialogue(cfg, state, script, boundaries, cfg.trailing_nav_steps)
        if not all(world.check_goals(final, script.goals)):
            raise GenerationError(f"demo does not satisfy goals for {session_id}")
        return Session(
            session_id=session_id,
            scene=state,
            goals=tuple(script.goals),
            dialogue=dialogue,
            demo=demo,
            final_state=final,
        )
    raise GenerationError(f"no feasible task for {session_id}: {last_err}")


def split_counts(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    if n < sum(1 for r in ratios if r > 0):
        raise GenerationError(f"{n} sessions cannot honor ratios {ratios}")
    raw = [n * r for r in ratios]
    counts = [int(c) for c in raw]
    while sum(counts) < n:
        fracs = [r - c for r, c in zip(raw, counts)]
        counts[fracs.index(max(fracs))] += 1
    counts = [max(c, 1) if r > 0 else c for c, r in zip(counts, ratios)]
    while sum(counts) > n:
        counts[counts.index(max(counts))] -= 1
    return tuple(counts)


def generate_corpus(
    cfg: GenConfig, n: int, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> Corpus:
    """Sessions in train / val_seen / val_unseen splits. val_seen reuses
    train layouts under new tasks; val_unseen layouts are held out."""
    n_tr, n_vs, n_vu = split_counts(n, ratios)
    seed = cfg.rng_seed
    splits: dict[str, list[Session]] = {"train": [], "val_seen": [], "val_unseen": []}
    for i in range(n_tr):
        splits["train"].append(
            generate_session(
                cfg,
                session_id=f"train-{i:05d}",
                scene_id=f"scene-{i:04d}",
                layout_key=(seed, 7, i),
                task_key=(seed, 11, i),
            )
        )
    for j in range(n_vs):
        src = j % n_tr
        splits["val_seen"].append(
            generate_session(
                cfg,
                session_id=f"val_seen-{j:05d}",
                scene_id=f"scene-{src:04d}",
                layout_key=(seed, 7, src),
                task_key=(seed, 13, j),
            )
        )
    for k in range(n_vu):
        splits["val_unseen"].append(
            generate_session(
                cfg,
                session_id=f"val_unseen-{k:05d}",
                scene_id=f"scene-{n_tr + k:04d}",
                layout_key=(seed, 7, n_tr + k),
                task_key=(seed, 17, k),
            )
        )
    manifest = {
        "rng_seed": seed,
        "n": n,
        "ratios": list(ratios),
        "templates": list(cfg.templates),
        "verbosity": cfg.verbosity,
        "splits": {
            name: {
                "sessions": [s.session_id for s in sessions],
                "scene_ids": sorted({s.scene.scene_id for s in sessions}),
            }
            for name, sessions in splits.items()
        },
    }
    return Corpus(splits=splits, manifest=manifest)


# --- serialization ---------------------------------------------------------


def session_to_dict(s: Session) -> dict:
    return {
        "session_id": s.session_id,
        "scene": world.state_to_dict(s.scene),
        "goals": [world.goal_to_dict(g) for g in s.goals],
        "dialogue": [
            {"speaker": u.speaker, "text": u.text, "before_step": u.before_step}
            for u in s.dialogue
        ],
        "demo": [
            {
                "action": world.action_to_dict(d.action),
                "pose_after": world.pose_to_list(d.pose_after),
            }
            for d in s.demo
        ],
        "final_state": world.state_to_dict(s.final_state),
    }


def session_from_dict(d: dict) -> Session:
    return Session(
        session_id=d["session_id"],
        scene=world.state_from_dict(d["scene"]),
        goals=tuple(world.goal_from_dict(g) for g in d["goals"]),
        dialogue=tuple(
            Utterance(u["speaker"], u["text"], u["before_step"])
            for u in d["dialogue"]
        ),
        demo=tuple(
            DemoStep(
                world.action_from_dict(r["action"]),
                world.pose_from_list(r["pose_after"]),
            )
            for r in d["demo"]
        ),
        final_state=world.state_from_dict(d["final_state"]),
    )


def save_corpus(corpus: Corpus, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, sessions in corpus.splits.items():
        with open(os.path.join(out_dir, f"{name}.jsonl"), "w") as fh:
            for s in sessions:
                fh.write(json.dumps(session_to_dict(s), separators=(",", ":")))
                fh.write("\n")
    with open(os.path.join(out_dir, "MANIFEST.json"), "w") as fh:
        json.dump(corpus.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_corpus(corpus_dir: str) -> Corpus:
    path = os.path.join(corpus_dir, "MANIFEST.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"not a corpus directory: {corpus_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    splits: dict[str, list[Session]] = {}
    for name in manifest["splits"]:
        sessions = []
        with open(os.path.join(corpus_dir, f"{name}.jsonl")) as fh:
            for line in fh:
                sessions.append(session_from_dict(json.loads(line)))
        splits[name] = sessions
    return Corpus(splits=splits, manifest=manifest)
