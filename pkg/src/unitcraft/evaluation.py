"""Closed-loop evaluation on the live world with path-weighted metrics.

Rollouts run unmasked argmax over all 17 actions, resolve predicted object
classes to the nearest visible instance, treat failed interactions as
in-band no-ops, and end on Stop or after max(2 * L*, 100) steps. Success
weighting follows w = L* / max(L*, executed steps); Stop itself is not an
executed step, so a perfect replay scores w = 1.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import world
from .model import ModelInput, UnitTransformer, Vocab
from .segmentation import EdhInstance
from .world import (
    ACTION_KINDS,
    Action,
    INTERACTION_ACTIONS,
    Observation,
    STOP,
    WorldState,
)

MIN_STEP_CAP = 100


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class RolloutStep:
    action: Action
    ok: bool
    reason: str | None
    pose: tuple[int, int, int, int]


@dataclass
class RolloutRecord:
    instance_id: str
    steps: list[RolloutStep]
    executed: int  # failed no-ops included, Stop excluded
    ref_len: int
    stopped: bool
    truncated: bool
    goal_mask: tuple[bool, ...]
    final_state: WorldState


def _resolve_target(state: WorldState, obs: Observation, class_id: int) -> str | None:
    """Nearest visible instance of a class; grid distance, id tie-break."""
    best: tuple[int, str] | None = None
    ax, ay = state.agent.cell
    for det in obs.detections:
        if det.label_id != class_id:
            continue
        cell = state.objects[det.instance_id].cell
        dist = abs(cell[0] - ax) + abs(cell[1] - ay)
        key = (dist, det.instance_id)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def rollout(model: UnitTransformer, instance: EdhInstance) -> RolloutRecord:
    if not instance.future_actions:
        raise EvalError(f"{instance.instance_id} has no future actions")
    if not instance.goals:
        raise EvalError(f"{instance.instance_id} has no goal conditions")
    vocab = model.vocab
    dialogue_tokens = vocab.encode_dialogue(instance.dialogue)
    state = instance.initial_state
    memory = model.cls_embedding()
    prev_token = Vocab.START
    ref_len = len(instance.future_actions)
    cap = max(2 * ref_len, MIN_STEP_CAP)

    steps: list[RolloutStep] = []
    executed = 0
    stopped = False
    for _ in range(cap):
        obs = world.observe(state)
        out = model.forward(
            ModelInput(
                dialogue_tokens=dialogue_tokens,
                prev_action_token=prev_token,
                detections=obs.detections,
                memory_state=memory,
            )
        )
        kind = ACTION_KINDS[int(np.argmax(out.action_logits.data))]
        memory = out.new_state.data.copy()
        prev_token = vocab.token_for_action(kind)
        if kind == STOP:
            stopped = True
            break
        if kind in INTERACTION_ACTIONS:
            class_id = int(np.argmax(out.object_logits.data))
            target = _resolve_target(state, obs, class_id)
            if target is None:
                steps.append(
                    RolloutStep(Action(kind), False, "not_visible", state.agent.key())
                )
                executed += 1
                continue
            action = Action(kind, target)
        else:
            action = Action(kind)
        state, result = world.step(state, action)
        steps.append(RolloutStep(action, result.ok, result.reason, state.agent.key()))
        executed += 1
    return RolloutRecord(
        instance_id=instance.instance_id,
        steps=steps,
        executed=executed,
        ref_len=ref_len,
        stopped=stopped,
        truncated=not stopped,
        goal_mask=world.check_goals(state, instance.goals),
        final_state=state,
    )


def metrics(record: RolloutRecord) -> dict[str, float]:
    if not record.goal_mask:
        raise EvalError(f"{record.instance_id} evaluated with zero goal conditions")
    sr = 1.0 if all(record.goal_mask) else 0.0
    gc = sum(record.goal_mask) / len(record.goal_mask)
    w = record.ref_len / max(record.ref_len, record.executed)
    return {"SR": sr, "GC": gc, "PSR": sr * w, "PGC": gc * w, "W": w}


@dataclass
class EvalResult:
    records: list[RolloutRecord]
    per_instance: list[dict[str, float]]
    aggregate: dict[str, float]


def evaluate_split(model: UnitTransformer, instances: list[EdhInstance], jobs: int = 1) -> EvalResult:
    """Mean metrics over a split; instance order fixes aggregation order
    regardless of worker count. Empty splits are an error."""
    if not instances:
        raise EvalError("cannot evaluate an empty split")
    if jobs <= 1:
        records = [rollout(model, inst) for inst in instances]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda i: rollout(model, i), instances))
    per_instance = [metrics(r) for r in records]
    keys = ("SR", "GC", "PSR", "PGC")
    aggregate = {
        k: sum(m[k] for m in per_instance) / len(per_instance) for k in keys
    }
    return EvalResult(records=records, per_instance=per_instance, aggregate=aggregate)


def format_cell(rate: float, weighted: float) -> str:
    """Benchmark cell style: rate ( path-weighted rate ), both x100."""
    return f"{100 * rate:.1f}({100 * weighted:.1f})"


def metrics_table(results: dict[str, EvalResult]) -> str:
    name_w = max(len(n) for n in results) if results else 0
    lines = [f"{'split'.ljust(name_w)}  {'SR(PSR)':>12}  {'GC(PGC)':>12}"]
    for name, res in results.items():
        agg = res.aggregate
        lines.append(
            f"{name.ljust(name_w)}  "
            f"{format_cell(agg['SR'], agg['PSR']):>12}  "
            f"{format_cell(agg['GC'], agg['PGC']):>12}"
        )
    return "\n".join(lines)


def metrics_csv(results: dict[str, EvalResult]) -> str:
    lines = ["split,instance_id,sr,gc,psr,pgc,ref_len,executed,stopped"]
    for name, res in results.items():
        for rec, m in zip(res.records, res.per_instance):
            lines.append(
                f"{name},{rec.instance_id},{m['SR']:.6f},{m['GC']:.6f},"
                f"{m['PSR']:.6f},{m['PGC']:.6f},{rec.ref_len},{rec.executed},"
                f"{int(rec.stopped)}"
            )
        agg = res.aggregate
        lines.append(
            f"{name},aggregate,{agg['SR']:.6f},{agg['GC']:.6f},"
            f"{agg['PSR']:.6f},{agg['PGC']:.6f},,,"
        )
    return "\n".join(lines) + "\n"


def export_trajectories(records: list[RolloutRecord], path: str) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "instance_id": rec.instance_id,
                        "stopped": rec.stopped,
                        "executed": rec.executed,
                        "goal_mask": list(rec.goal_mask),
                        "steps": [
                            {
                                "action": world.action_to_dict(s.action),
                                "ok": s.ok,
                                "reason": s.reason,
                                "pose": list(s.pose),
                            }
                            for s in rec.steps
                        ],
                    },
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
