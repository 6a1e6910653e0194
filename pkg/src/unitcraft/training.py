"""Hybrid-forcing training over unit instances.

Each unit visit runs a student stage (the model navigates the offline
panoramas on its own predictions, supervised by per-step replanning) and a
teacher stage (ground-truth actions and observations along a freshly
planned optimal path, ending in the supervised terminal interaction). One
summed loss, one backward, one SGD step per visit. Memory states cross
unit boundaries only through the global state matrix, which stores
detached vectors, never graph nodes.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn, world
from .model import ModelInput, UnitTransformer, Vocab
from .offline_env import PanoramaStore, StoreProvider, env_lookup
from .pathing import PathPlanner, planner_for
from .segmentation import UnitInstance
from .world import (
    ACTION_INDEX,
    ACTION_KINDS,
    NAV_ACTIONS,
    Observation,
    Pose,
    STOP,
)

_NAV_INDICES = tuple(ACTION_INDEX[k] for k in NAV_ACTIONS)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 1
    seed: int = 19980417
    student_extra_steps: int = 5
    student_loss_weight: float = 1.0
    nav_mask_student: bool = True
    forcing: str = "hybrid"  # "hybrid" | "teacher"
    checkpoint_every: int = 0


@dataclass
class StepCarry:
    prev_action_token: int
    memory: nn.Tensor | np.ndarray
    pos: Pose


@dataclass
class TeacherPlan:
    """Materialized ground truth for one teacher stage: poses along the
    planned path, the demonstration observation at each pose, the forced
    input-action tokens, and the per-step supervision targets."""

    poses: list[Pose]
    observations: list[Observation]
    input_tokens: list[int]
    target_kinds: list[str]
    object_target: int | None


@dataclass
class UnitTrace:
    unit_id: tuple[str, int]
    student_steps: int
    teacher_steps: int
    reached_target: bool
    loss_sum: float
    n_steps: int
    env_lookups_student: int
    env_lookups_teacher: int


@dataclass
class TrainingReport:
    epoch_losses: list[float]
    probe_sr: float | None = None
    traces: list[UnitTrace] = field(default_factory=list)


class GlobalStateMatrix:
    """unit_id -> (memory vector, last action token), written as units
    finish training and read when their successors start. Entries are
    detached numpy copies; reads and writes are individually atomic."""

    def __init__(self) -> None:
        self._entries: dict[tuple[str, int], tuple[np.ndarray, int]] = {}
        self._lock = threading.Lock()

    def get(self, unit_id: tuple[str, int]) -> tuple[np.ndarray, int] | None:
        with self._lock:
            entry = self._entries.get(unit_id)
            return (entry[0].copy(), entry[1]) if entry else None

    def put(self, unit_id: tuple[str, int], memory, action_token: int) -> None:
        data = memory.data if isinstance(memory, nn.Tensor) else memory
        with self._lock:
            self._entries[unit_id] = (np.array(data, dtype=np.float64), int(action_token))

    def __len__(self) -> int:
        return len(self._entries)


def _masked_nav_argmax(logits: np.ndarray, masked: bool) -> str:
    if masked:
        best = max(_NAV_INDICES, key=lambda i: logits[i])
    else:
        best = int(np.argmax(logits))
    return ACTION_KINDS[best]


def single_step(
    model: UnitTransformer,
    unit: UnitInstance,
    store: PanoramaStore,
    mode: str,
    t: int,
    carry: StepCarry,
    *,
    dialogue_tokens: list[int],
    cfg: TrainConfig,
    planner: PathPlanner | None = None,
    plan: TeacherPlan | None = None,
    nav_grid=None,
):
    """One forward step of the hybrid objective.

    Student mode consumes the model's previous prediction and the offline
    observation at its own pose; teacher mode consumes the forced action
    and the stored demonstration observation from the plan and never
    touches the environment. Returns (output, next_carry, loss, info).
    """
    vocab = model.vocab
    if mode == "student":
        obs = env_lookup(store, carry.pos)
        prev_token = carry.prev_action_token
    elif mode == "teacher":
        if plan is None:
            raise TrainingError("teacher mode needs a TeacherPlan")
        obs = plan.observations[t]
        prev_token = plan.input_tokens[t]
    else:
        raise TrainingError(f"unknown forcing mode: {mode}")

    out = model.forward(
        ModelInput(
            dialogue_tokens=dialogue_tokens,
            prev_action_token=prev_token,
            detections=obs.detections,
            memory_state=carry.memory,
        )
    )

    info = {"env_lookups": 1 if mode == "student" else 0}
    if mode == "student":
        path = planner.path(carry.pos, unit.target_pose)
        gt_kind = path.actions[0]
        loss = nn.cross_entropy(out.action_logits, ACTION_INDEX[gt_kind])
        if cfg.student_loss_weight != 1.0:
            loss = nn.scale(loss, cfg.student_loss_weight)
        chosen = _masked_nav_argmax(out.action_logits.data, cfg.nav_mask_student)
        next_pos = carry.pos
        if chosen in NAV_ACTIONS:
            moved, _ = world.navigate(nav_grid, carry.pos, chosen)
            if moved is not None:
                next_pos = moved
        info.update(gt_kind=gt_kind, chosen=chosen)
        next_carry = StepCarry(vocab.token_for_action(chosen), out.new_state, next_pos)
    else:
        gt_kind = plan.target_kinds[t]
        loss = nn.cross_entropy(out.action_logits, ACTION_INDEX[gt_kind])
        last = t == len(plan.target_kinds) - 1
        if last and plan.object_target is not None:
            loss = nn.add(loss, nn.cross_entropy(out.object_logits, plan.object_target))
        next_pos = plan.poses[t + 1] if t + 1 < len(plan.poses) else plan.poses[-1]
        info.update(gt_kind=gt_kind, chosen=gt_kind)
        next_carry = StepCarry(vocab.token_for_action(gt_kind), out.new_state, next_pos)
    return out, next_carry, loss, info


def _build_teacher_plan(
    model: UnitTransformer,
    unit: UnitInstance,
    store: PanoramaStore,
    planner: PathPlanner,
    start: Pose,
    first_input_token: int,
) -> TeacherPlan:
    path = planner.path(start, unit.target_pose)
    poses = list(path.poses)
    observations = [env_lookup(store, p) for p in poses]
    target_kinds = list(path.actions) + [unit.target_kind]
    input_tokens = [first_input_token] + [
        model.vocab.token_for_action(k) for k in path.actions
    ]
    return TeacherPlan(
        poses=poses,
        observations=observations,
        input_tokens=input_tokens,
        target_kinds=target_kinds,
        object_target=unit.target_class_id,
    )


def train_unit(
    model: UnitTransformer,
    unit: UnitInstance,
    store: PanoramaStore,
    matrix: GlobalStateMatrix,
    cfg: TrainConfig,
) -> UnitTrace:
    vocab = model.vocab
    nav_grid = world.nav_mask(unit.initial_state)
    planner = planner_for(nav_grid)
    dialogue_tokens = vocab.encode_dialogue(unit.dialogue)

    entry = matrix.get(unit.unit_id)
    if entry is None:
        memory, prev_token = model.cls_embedding(), Vocab.START
    else:
        memory, prev_token = entry
    carry = StepCarry(prev_token, memory, unit.initial_state.agent)

    losses: list[nn.Tensor] = []
    lookups_student = 0
    student_steps = 0
    reached = carry.pos == unit.target_pose
    if cfg.forcing == "hybrid":
        budget = unit.nav_len + cfg.student_extra_steps
        while student_steps < budget:
            if carry.pos == unit.target_pose:
                reached = True
                break
            _, carry, loss, info = single_step(
                model,
                unit,
                store,
                "student",
                student_steps,
                carry,
                dialogue_tokens=dialogue_tokens,
                cfg=cfg,
                planner=planner,
                nav_grid=nav_grid,
            )
            losses.append(loss)
            lookups_student += info["env_lookups"]
            student_steps += 1
        reached = reached or carry.pos == unit.target_pose
    elif cfg.forcing == "teacher":
        carry = StepCarry(prev_token, memory, unit.initial_state.agent)
    else:
        raise TrainingError(f"unknown forcing setting: {cfg.forcing}")

    plan = _build_teacher_plan(
        model, unit, store, planner, carry.pos, carry.prev_action_token
    )
    out = None
    for t in range(len(plan.target_kinds)):
        out, carry, loss, _ = single_step(
            model,
            unit,
            store,
            "teacher",
            t,
            carry,
            dialogue_tokens=dialogue_tokens,
            cfg=cfg,
            plan=plan,
        )
        losses.append(loss)

    total = losses[0]
    for extra in losses[1:]:
        total = nn.add(total, extra)
    nn.backward(total, ensure=model.params.values())
    nn.sgd_step(model.params, cfg.lr)

    if unit.next_id is not None:
        final_kind = ACTION_KINDS[int(np.argmax(out.action_logits.data))]
        matrix.put(unit.next_id, out.new_state, vocab.token_for_action(final_kind))

    return UnitTrace(
        unit_id=unit.unit_id,
        student_steps=student_steps,
        teacher_steps=len(plan.target_kinds),
        reached_target=reached,
        loss_sum=float(total.data),
        n_steps=len(losses),
        env_lookups_student=lookups_student,
        env_lookups_teacher=0,
    )


def train_corpus(
    model: UnitTransformer,
    units: list[UnitInstance],
    provider: StoreProvider,
    cfg: TrainConfig,
    *,
    probe_instances=None,
    log_path: str | None = None,
    checkpoint_dir: str | None = None,
    keep_traces: bool = False,
) -> TrainingReport:
    """Seeded-shuffle epochs of per-unit updates; optionally logs a CSV of
    per-epoch mean loss and checkpoints every N epochs."""
    matrix = GlobalStateMatrix()
    rng = np.random.default_rng(cfg.seed)
    report = TrainingReport(epoch_losses=[])
    rows = ["epoch,mean_loss"]
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(units))
        loss_sum = 0.0
        n_steps = 0
        for i in order:
            unit = units[int(i)]
            trace = train_unit(model, unit, provider.get(unit), matrix, cfg)
            loss_sum += trace.loss_sum
            n_steps += trace.n_steps
            if keep_traces:
                report.traces.append(trace)
        mean_loss = loss_sum / max(n_steps, 1)
        report.epoch_losses.append(mean_loss)
        rows.append(f"{epoch + 1},{mean_loss:.10f}")
        if checkpoint_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            os.makedirs(checkpoint_dir, exist_ok=True)
            model.save(os.path.join(checkpoint_dir, f"epoch-{epoch + 1:03d}.ckpt"))
    if log_path:
        with open(log_path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
    if checkpoint_dir:
        os.makedirs(checkpoint_dir, exist_ok=True)
        model.save(os.path.join(checkpoint_dir, "final.ckpt"))
    if probe_instances:
        from .evaluation import evaluate_split

        result = evaluate_split(model, probe_instances)
        report.probe_sr = result.aggregate["SR"]
    return report


# --- config files -----------------------------------------------------------


def parse_config_text(text: str) -> dict[str, object]:
    """key=value lines; '#' starts a comment. Values are coerced to int,
    float, or bool when they parse as one."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TrainingError(f"config line {lineno} is not key=value: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if value.lower() in ("true", "false"):
            out[key] = value.lower() == "true"
            continue
        try:
            out[key] = int(value)
            continue
        except ValueError:
            pass
        try:
            out[key] = float(value)
            continue
        except ValueError:
            pass
        out[key] = value
    return out


def apply_config(cfg: TrainConfig, overrides: dict[str, object]) -> TrainConfig:
    known = {f for f in cfg.__dataclass_fields__}
    unknown = set(overrides) - known
    if unknown:
        raise TrainingError(f"unknown training config keys: {sorted(unknown)}")
    return replace(cfg, **overrides)
