"""Unit-grained episodes for embodied instruction following.

Synthetic household sessions are segmented into dialogue-turn instances and
single-interaction units, snapshotted into offline panorama stores, and used
to train a recurrent transformer policy with hybrid student/teacher forcing.
Evaluation replays checkpoints closed-loop against the live simulator.
"""

from .evaluation import evaluate_split, metrics, rollout
from .model import ModelConfig, UnitTransformer, Vocab
from .offline_env import PanoramaStore, StoreProvider, build_store, env_lookup
from .pathing import PathPlanner, optimal_path, planner_for
from .scenegen import GenConfig, Session, generate_corpus, generate_session
from .segmentation import (
    EdhInstance,
    UnitInstance,
    segment_edh,
    segment_units,
    session_instance,
)
from .training import GlobalStateMatrix, TrainConfig, train_corpus, train_unit
from .world import Action, Observation, Pose, WorldState, observe, step

__version__ = "0.1.0"

__all__ = [
    "Action",
    "EdhInstance",
    "GenConfig",
    "GlobalStateMatrix",
    "ModelConfig",
    "Observation",
    "PanoramaStore",
    "PathPlanner",
    "Pose",
    "Session",
    "StoreProvider",
    "TrainConfig",
    "UnitInstance",
    "UnitTransformer",
    "Vocab",
    "WorldState",
    "build_store",
    "env_lookup",
    "evaluate_split",
    "generate_corpus",
    "generate_session",
    "metrics",
    "observe",
    "optimal_path",
    "planner_for",
    "rollout",
    "segment_edh",
    "segment_units",
    "session_instance",
    "step",
    "train_corpus",
    "train_unit",
    "__version__",
]
