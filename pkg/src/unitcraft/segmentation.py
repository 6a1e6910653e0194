"""Slicing demonstration sessions into training granularities.

A unit is a navigation prefix plus exactly one terminal interaction; a
trailing navigation-only suffix becomes one final unit terminated by the
synthetic Stop action. Dialogue-turn instances span the demo actions
between consecutive commander utterances and carry goal conditions derived
from the state changes their span effects.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from . import world
from .scenegen import Session, Utterance
from .world import (
    Action,
    GoalCondition,
    Pose,
    WorldState,
    CLASSES,
    INTERACTION_ACTIONS,
    LIQUID,
    STOP,
)

UnitId = tuple[str, int]


class SegmentationError(ValueError):
    """Raised when a session fails to replay or segment cleanly."""


@dataclass(frozen=True)
class UnitInstance:
    unit_id: UnitId
    prev_id: UnitId | None
    next_id: UnitId | None
    initial_state: WorldState
    dialogue: tuple[Utterance, ...]  # everything uttered before this unit
    actions: tuple[Action, ...]  # nav prefix + terminal interaction (or Stop)
    target_pose: Pose
    target_kind: str
    target_class_id: int | None  # None for Stop units

    @property
    def nav_len(self) -> int:
        return len(self.actions) - 1


@dataclass(frozen=True)
class EdhInstance:
    instance_id: str
    dialogue: tuple[Utterance, ...]
    history_actions: tuple[Action, ...]
    future_actions: tuple[Action, ...]
    initial_state: WorldState  # state once the history has been replayed
    final_state: WorldState
    goals: tuple[GoalCondition, ...]


def _replay_states(session: Session) -> list[WorldState]:
    """states[i] is the world before demo step i; the last entry is the
    final state. Raises if any demonstrated action fails."""
    states = [session.scene]
    state = session.scene
    for i, step in enumerate(session.demo):
        state, result = world.step(state, step.action)
        if not result.ok:
            raise SegmentationError(
                f"{session.session_id} step {i} ({step.action.kind}) failed: {result.reason}"
            )
        if state.agent != step.pose_after:
            raise SegmentationError(
                f"{session.session_id} step {i} pose mismatch"
            )
        states.append(state)
    return states


def validate_session(session: Session) -> None:
    """Replay the demo and check it lands exactly on the recorded final
    state with every goal satisfied."""
    states = _replay_states(session)
    if states[-1] != session.final_state:
        raise SegmentationError(f"{session.session_id} final state mismatch")
    if not all(world.check_goals(states[-1], session.goals)):
        raise SegmentationError(f"{session.session_id} goals unsatisfied after demo")


def _dialogue_before(session: Session, step_index: int) -> tuple[Utterance, ...]:
    return tuple(u for u in session.dialogue if u.before_step <= step_index)


def segment_units(session: Session) -> list[UnitInstance]:
    states = _replay_states(session)
    sid = session.session_id
    boundaries = [
        i
        for i, step in enumerate(session.demo)
        if step.action.kind in INTERACTION_ACTIONS
    ]
    spans: list[tuple[int, int, Action]] = []  # start, end (incl), terminal
    start = 0
    for b in boundaries:
        spans.append((start, b, session.demo[b].action))
        start = b + 1
    if start < len(session.demo) or not session.demo:
        spans.append((start, len(session.demo) - 1, Action(STOP)))

    units: list[UnitInstance] = []
    for m, (lo, hi, terminal) in enumerate(spans):
        if terminal.kind == STOP:
            actions = tuple(s.action for s in session.demo[lo:]) + (Action(STOP),)
            target_pose = session.demo[-1].pose_after if session.demo else session.scene.agent
            target_class = None
        else:
            actions = tuple(s.action for s in session.demo[lo : hi + 1])
            target_pose = session.demo[hi].pose_after
            target_class = states[lo].objects[terminal.target].class_id
        units.append(
            UnitInstance(
                unit_id=(sid, m),
                prev_id=(sid, m - 1) if m > 0 else None,
                next_id=(sid, m + 1) if m < len(spans) - 1 else None,
                initial_state=states[lo],
                dialogue=_dialogue_before(session, lo),
                actions=actions,
                target_pose=target_pose,
                target_kind=terminal.kind,
                target_class_id=target_class,
            )
        )
    return units


def _containment_counts(state: WorldState) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for obj in state.objects.values():
        if obj.parent is None:
            continue
        key = (obj.class_id, state.objects[obj.parent].class_id)
        counts[key] = counts.get(key, 0) + 1
    return counts


def derive_goals(initial: WorldState, final: WorldState) -> tuple[GoalCondition, ...]:
    """Goal conditions capturing the state changes between two snapshots,
    expressed over the fixed predicate vocabulary. Changes with no
    predicate (for example picking something up) yield nothing."""
    goals: list[GoalCondition] = []
    for oid in sorted(initial.objects):
        before, after = initial.objects[oid], final.objects[oid]
        if before.is_open != after.is_open:
            goals.append(GoalCondition("is_open", (oid,), want=after.is_open))
        if before.is_on != after.is_on:
            goals.append(GoalCondition("is_on", (oid,), want=after.is_on))

    for pred, test in (
        ("sliced", lambda o: o.is_sliced),
        ("filled", lambda o: o.fill == LIQUID),
    ):
        for cid in sorted({o.class_id for o in initial.objects.values()}):
            n0 = sum(1 for o in initial.objects.values() if o.class_id == cid and test(o))
            n1 = sum(1 for o in final.objects.values() if o.class_id == cid and test(o))
            if n1 > n0:
                goals.append(
                    GoalCondition(pred, (CLASSES[cid].name,), "count", count=n1)
                )

    c0 = _containment_counts(initial)
    c1 = _containment_counts(final)
    for key in sorted(c1):
        if c1[key] > c0.get(key, 0):
            obj_name = CLASSES[key[0]].name
            rec_name = CLASSES[key[1]].name
            goals.append(
                GoalCondition("in", (obj_name, rec_name), "count", count=c1[key])
            )
    return tuple(goals)


def segment_edh(session: Session) -> list[EdhInstance]:
    """Instances split at commander-utterance boundaries."""
    states = _replay_states(session)
    marks = sorted(
        {u.before_step for u in session.dialogue if u.speaker == "commander"}
    )
    if not marks or marks[0] != 0:
        marks = [0] + marks
    marks.append(len(session.demo))
    instances: list[EdhInstance] = []
    for i in range(len(marks) - 1):
        lo, hi = marks[i], marks[i + 1]
        if lo == hi:
            continue
        actions = tuple(s.action for s in session.demo)
        instances.append(
            EdhInstance(
                instance_id=f"{session.session_id}/edh-{len(instances):02d}",
                dialogue=_dialogue_before(session, lo),
                history_actions=actions[:lo],
                future_actions=actions[lo:hi],
                initial_state=states[lo],
                final_state=states[hi],
                goals=derive_goals(states[lo], states[hi]),
            )
        )
    return instances


def session_instance(session: Session) -> EdhInstance:
    """The whole session as one instance carrying the session's own goals."""
    states = _replay_states(session)
    return EdhInstance(
        instance_id=f"{session.session_id}/edh-full",
        dialogue=session.dialogue,
        history_actions=(),
        future_actions=tuple(s.action for s in session.demo),
        initial_state=states[0],
        final_state=states[-1],
        goals=session.goals,
    )


# --- statistics ------------------------------------------------------------


@dataclass(frozen=True)
class StatsReport:
    count: int
    mean_action_len: float
    mean_dialogue_turns: float
    mean_dialogue_len: float


def _dialogue_tokens(dialogue: tuple[Utterance, ...]) -> int:
    return sum(len(u.text.split()) for u in dialogue)


def corpus_stats(instances) -> StatsReport:
    """Means over unit or dialogue-turn instances: action-sequence length,
    dialogue-history turns, and dialogue-history token count."""
    if not instances:
        raise SegmentationError("no instances to summarize")
    n = len(instances)
    lens = []
    turns = []
    words = []
    for inst in instances:
        if isinstance(inst, UnitInstance):
            lens.append(len(inst.actions))
        else:
            lens.append(len(inst.future_actions))
        turns.append(len(inst.dialogue))
        words.append(_dialogue_tokens(inst.dialogue))
    return StatsReport(
        count=n,
        mean_action_len=sum(lens) / n,
        mean_dialogue_turns=sum(turns) / n,
        mean_dialogue_len=sum(words) / n,
    )


def stats_table(reports: dict[str, StatsReport]) -> str:
    """Aligned text table, one column per split."""
    names = list(reports)
    rows = [
        ("Count", [f"{reports[n].count}" for n in names]),
        ("Action Length", [f"{reports[n].mean_action_len:.2f}" for n in names]),
        ("Dialogue Turns", [f"{reports[n].mean_dialogue_turns:.2f}" for n in names]),
        ("Dialogue Lengths", [f"{reports[n].mean_dialogue_len:.2f}" for n in names]),
    ]
    width = max(len(r[0]) for r in rows)
    col = max(max(len(v) for v in vals) for _, vals in rows)
    col = max(col, max(len(n) for n in names))
    lines = [" " * width + "  " + "  ".join(n.rjust(col) for n in names)]
    for label, vals in rows:
        lines.append(label.ljust(width) + "  " + "  ".join(v.rjust(col) for v in vals))
    return "\n".join(lines)


def stats_csv(reports: dict[str, StatsReport]) -> str:
    lines = ["split,count,mean_action_len,mean_dialogue_turns,mean_dialogue_len"]
    for name, r in reports.items():
        lines.append(
            f"{name},{r.count},{r.mean_action_len:.6f},"
            f"{r.mean_dialogue_turns:.6f},{r.mean_dialogue_len:.6f}"
        )
    return "\n".join(lines) + "\n"


# --- serialization ---------------------------------------------------------


def _utt_to_dict(u: Utterance) -> dict:
    return {"speaker": u.speaker, "text": u.text, "before_step": u.before_step}


def _utt_from_dict(d: dict) -> Utterance:
    return Utterance(d["speaker"], d["text"], d["before_step"])


def unit_to_dict(u: UnitInstance) -> dict:
    return {
        "unit_id": list(u.unit_id),
        "prev_id": list(u.prev_id) if u.prev_id else None,
        "next_id": list(u.next_id) if u.next_id else None,
        "initial_state": world.state_to_dict(u.initial_state),
        "dialogue": [_utt_to_dict(x) for x in u.dialogue],
        "actions": [world.action_to_dict(a) for a in u.actions],
        "target_pose": world.pose_to_list(u.target_pose),
        "target_kind": u.target_kind,
        "target_class_id": u.target_class_id,
    }


def unit_from_dict(d: dict) -> UnitInstance:
    return UnitInstance(
        unit_id=tuple(d["unit_id"]),
        prev_id=tuple(d["prev_id"]) if d["prev_id"] else None,
        next_id=tuple(d["next_id"]) if d["next_id"] else None,
        initial_state=world.state_from_dict(d["initial_state"]),
        dialogue=tuple(_utt_from_dict(x) for x in d["dialogue"]),
        actions=tuple(world.action_from_dict(a) for a in d["actions"]),
        target_pose=world.pose_from_list(d["target_pose"]),
        target_kind=d["target_kind"],
        target_class_id=d["target_class_id"],
    )


def edh_to_dict(e: EdhInstance) -> dict:
    return {
        "instance_id": e.instance_id,
        "dialogue": [_utt_to_dict(x) for x in e.dialogue],
        "history_actions": [world.action_to_dict(a) for a in e.history_actions],
        "future_actions": [world.action_to_dict(a) for a in e.future_actions],
        "initial_state": world.state_to_dict(e.initial_state),
        "final_state": world.state_to_dict(e.final_state),
        "goals": [world.goal_to_dict(g) for g in e.goals],
    }


def edh_from_dict(d: dict) -> EdhInstance:
    return EdhInstance(
        instance_id=d["instance_id"],
        dialogue=tuple(_utt_from_dict(x) for x in d["dialogue"]),
        history_actions=tuple(world.action_from_dict(a) for a in d["history_actions"]),
        future_actions=tuple(world.action_from_dict(a) for a in d["future_actions"]),
        initial_state=world.state_from_dict(d["initial_state"]),
        final_state=world.state_from_dict(d["final_state"]),
        goals=tuple(world.goal_from_dict(g) for g in d["goals"]),
    )


def save_units(units: list[UnitInstance], out_dir: str, params: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "units.jsonl"), "w") as fh:
        for u in units:
            fh.write(json.dumps(unit_to_dict(u), separators=(",", ":")))
            fh.write("\n")
    chains: dict[str, list[int]] = {}
    for u in units:
        chains.setdefault(u.unit_id[0], []).append(u.unit_id[1])
    manifest = {"level": "unit", "params": params or {}, "chains": chains}
    with open(os.path.join(out_dir, "MANIFEST.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_units(units_dir: str) -> list[UnitInstance]:
    path = os.path.join(units_dir, "units.jsonl")
    units = []
    with open(path) as fh:
        for line in fh:
            units.append(unit_from_dict(json.loads(line)))
    return units


def save_edh(instances: list[EdhInstance], out_dir: str, params: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "edh.jsonl"), "w") as fh:
        for e in instances:
            fh.write(json.dumps(edh_to_dict(e), separators=(",", ":")))
            fh.write("\n")
    manifest = {"level": "edh", "params": params or {}}
    with open(os.path.join(out_dir, "MANIFEST.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_edh(edh_dir: str) -> list[EdhInstance]:
    path = os.path.join(edh_dir, "edh.jsonl")
    out = []
    with open(path) as fh:
        for line in fh:
            out.append(edh_from_dict(json.loads(line)))
    return out
