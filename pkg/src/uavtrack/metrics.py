"""Accuracy metrics and the machine-readable results schema."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import AlignmentError
from .io import StepRecord, atomic_write_text
from .simulate import GroundTruth


@dataclass(frozen=True)
class RunMetrics:
    """Accuracy, acceptance, and timing summary of one (scenario, filter) run."""

    rmse_x: float
    rmse_y: float
    rmse_z: float
    rmse_3d: float
    peak_error: float
    valid_measurement_rate: float
    mean_step_time_ms: float
    p99_step_time_ms: float
    steps: int
    filter_name: str
    scenario_name: str
    seed: int


def compute_rmse(
    frame_ids: np.ndarray,
    positions: np.ndarray,
    truth: GroundTruth,
    *,
    valid_measurement_rate: float = 0.0,
    mean_step_time_ms: float = 0.0,
    p99_step_time_ms: float = 0.0,
    filter_name: str = "",
    scenario_name: str = "",
    seed: int = 0,
) -> RunMetrics:
    """Per-axis and 3-D RMSE over the steps where the filter reports a state.

    ``rmse_3d`` is sqrt(mean ||error||^2), i.e. the root of the summed
    per-axis mean square errors over the same step set. ``peak_error`` is
    the largest per-step 3-D error.

    Raises:
        AlignmentError: an estimate frame id has no ground-truth row.
    """
    frame_ids = np.asarray(frame_ids, dtype=np.int64)
    positions = np.asarray(positions, dtype=float).reshape(len(frame_ids), 3)
    truth_index = {int(fid): i for i, fid in enumerate(truth.frame_ids)}
    missing = [int(fid) for fid in frame_ids if int(fid) not in truth_index]
    if missing:
        raise AlignmentError(f"no ground truth for frames {missing}")
    if len(frame_ids) == 0:
        err = np.empty((0, 3))
    else:
        rows = np.array([truth_index[int(fid)] for fid in frame_ids])
        err = positions - truth.states[rows, :3]
    if len(err):
        mse_axis = np.mean(err**2, axis=0)
        norms = np.linalg.norm(err, axis=1)
        rmse_axis = np.sqrt(mse_axis)
        rmse_3d = float(np.sqrt(mse_axis.sum()))
        peak = float(norms.max())
    else:
        rmse_axis = np.full(3, np.nan)
        rmse_3d = float("nan")
        peak = float("nan")
    return RunMetrics(
        rmse_x=float(rmse_axis[0]),
        rmse_y=float(rmse_axis[1]),
        rmse_z=float(rmse_axis[2]),
        rmse_3d=rmse_3d,
        peak_error=peak,
        valid_measurement_rate=float(valid_measurement_rate),
        mean_step_time_ms=float(mean_step_time_ms),
        p99_step_time_ms=float(p99_step_time_ms),
        steps=int(len(frame_ids)),
        filter_name=filter_name,
        scenario_name=scenario_name,
        seed=int(seed),
    )


def metrics_from_records(
    records: list[StepRecord],
    truth: GroundTruth,
    *,
    scenario_name: str = "",
    seed: int = 0,
    mean_step_time_ms: float = 0.0,
    p99_step_time_ms: float = 0.0,
) -> RunMetrics:
    """Recompute run metrics from diagnostic records (as read from CSV)."""
    with_state = [r for r in records if r.state is not None]
    frame_ids = np.array([r.k for r in with_state], dtype=np.int64)
    positions = (
        np.array([r.state[:3] for r in with_state]) if with_state else np.empty((0, 3))
    )
    accepted = sum(1 for r in records if r.accepted)
    total = len(records)
    return compute_rmse(
        frame_ids,
        positions,
        truth,
        valid_measurement_rate=accepted / total if total else 0.0,
        mean_step_time_ms=mean_step_time_ms,
        p99_step_time_ms=p99_step_time_ms,
        filter_name=records[0].filter_name if records else "",
        scenario_name=scenario_name,
        seed=seed,
    )


def metrics_json_text(metrics: list[RunMetrics]) -> str:
    """Canonical JSON for a list of runs (stable ordering and key order)."""
    payload = [asdict(m) for m in metrics]
    payload.sort(key=lambda m: (m["scenario_name"], m["filter_name"], m["seed"]))
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_metrics_json(path, metrics: list[RunMetrics]) -> None:
    atomic_write_text(path, metrics_json_text(metrics))
