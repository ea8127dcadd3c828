"""GUI-agent orchestration kernel and simulated device harness."""

from guiagent._core import (
    ExperiencePool,
    FailureMemory,
    FunctionRegistry,
    MemoryStore,
    Plan,
    Screen,
    World,
    classify_cross_task,
    clipped_term,
    correct_point,
    decide,
    denormalize_point,
    distance_to_box,
    efficiency_gain,
    group_advantages,
    grpo_train,
    ingest_widgets,
    normalize_point,
    parse_action,
    prob_ratio,
    serialize_action,
)

__all__ = [
    "ExperiencePool",
    "FailureMemory",
    "FunctionRegistry",
    "MemoryStore",
    "Plan",
    "Screen",
    "World",
    "classify_cross_task",
    "clipped_term",
    "correct_point",
    "decide",
    "denormalize_point",
    "distance_to_box",
    "efficiency_gain",
    "group_advantages",
    "grpo_train",
    "ingest_widgets",
    "normalize_point",
    "parse_action",
    "prob_ratio",
    "serialize_action",
]
