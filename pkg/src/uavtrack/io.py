"""File formats: frame/truth/diagnostic CSVs and flat key=value configs.

All writers are atomic (write to a temp file, then rename) and format
floats with Python's shortest round-trip repr, so identical data produces
byte-identical files.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputValidationError
from .filtering import FilterConfig
from .pointcloud import PipelineConfig, PointCloud
from .simulate import (
    GroundTruth,
    Hover,
    Linear,
    ScenarioConfig,
    Spiral,
    Sweep,
    Trajectory,
)

FRAME_HEADER = ["frame_id", "t", "x", "y", "z"]
TRUTH_HEADER = ["frame_id", "t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az"]
CLUSTER_DEBUG_HEADER = [
    "frame_id", "cluster_id", "size", "cx", "cy", "cz", "max_eig", "accepted",
]
DIAG_HEADER = [
    "k", "t", "status",
    "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az",
    "trace_P", "trace_Q", "trace_R", "d_norm", "D_M2", "accepted", "filter",
]


def _fmt(value) -> str:
    """Shortest round-trip decimal form; empty cell for missing values."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ===== frame clouds =====


def write_frames_csv(path, frames: list[PointCloud]) -> None:
    """One row per point, frames emitted in increasing frame_id order."""
    frames = sorted(frames, key=lambda f: f.frame_id)
    rows = []
    for frame in frames:
        fid, t = str(frame.frame_id), _fmt(frame.timestamp)
        for x, y, z in frame.xyz:
            rows.append([fid, t, _fmt(x), _fmt(y), _fmt(z)])
    atomic_write_text(path, _csv_text(FRAME_HEADER, rows))


def read_frames_csv(path) -> list[PointCloud]:
    """Parse a frame CSV back into per-frame clouds (present frames only)."""
    by_frame: dict[int, tuple[float, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRAME_HEADER:
            raise InputValidationError(
                f"{path}: expected header {','.join(FRAME_HEADER)}, got {header}"
            )
        for row in reader:
            if not row:
                continue
            fid = int(row[0])
            t = float(row[1])
            entry = by_frame.setdefault(fid, (t, []))
            entry[1].append([float(row[2]), float(row[3]), float(row[4])])
    frames = [
        PointCloud(np.asarray(pts, dtype=float), timestamp=t, frame_id=fid)
        for fid, (t, pts) in sorted(by_frame.items())
    ]
    times = [f.timestamp for f in frames]
    if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
        raise InputValidationError(f"{path}: frame timestamps are not strictly increasing")
    return frames


def fill_frame_grid(frames: list[PointCloud]) -> list[PointCloud]:
    """Insert empty frames for missing ids on the (regular) frame grid.

    A frame with zero points has no rows in the CSV, so it disappears on a
    round trip; this reconstructs it with a timestamp interpolated from the
    median per-frame spacing of the surviving frames.
    """
    if not frames:
        return []
    frames = sorted(frames, key=lambda f: f.frame_id)
    ids = np.array([f.frame_id for f in frames])
    times = np.array([f.timestamp for f in frames])
    if len(frames) > 1:
        dt = float(np.median(np.diff(times) / np.diff(ids)))
    else:
        dt = 0.0
    t0 = times[0] - dt * ids[0]
    by_id = {f.frame_id: f for f in frames}
    out = []
    for fid in range(0, int(ids[-1]) + 1):
        if fid in by_id:
            out.append(by_id[fid])
        else:
            out.append(PointCloud(np.empty((0, 3)), timestamp=t0 + dt * fid, frame_id=fid))
    return out


# ===== ground truth =====


def write_truth_csv(path, truth: GroundTruth) -> None:
    rows = []
    for fid, t, s in zip(truth.frame_ids, truth.times, truth.states):
        rows.append([str(int(fid)), _fmt(t)] + [_fmt(v) for v in s])
    atomic_write_text(path, _csv_text(TRUTH_HEADER, rows))


def read_truth_csv(path) -> GroundTruth:
    ids, times, states = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRUTH_HEADER:
            raise InputValidationError(
                f"{path}: expected header {','.join(TRUTH_HEADER)}, got {header}"
            )
        for row in reader:
            if not row:
                continue
            ids.append(int(row[0]))
            times.append(float(row[1]))
            states.append([float(v) for v in row[2:11]])
    return GroundTruth(
        frame_ids=np.asarray(ids, dtype=np.int64),
        times=np.asarray(times, dtype=float),
        states=np.asarray(states, dtype=float).reshape(len(ids), 9),
    )


# ===== per-step diagnostics =====


@dataclass(frozen=True)
class StepRecord:
    """One tracker step as written to the diagnostics CSV."""

    k: int
    t: float
    status: str
    state: np.ndarray | None
    trace_p: float | None
    trace_q: float | None
    trace_r: float | None
    d_norm: float | None
    d_m2: float | None
    accepted: bool
    filter_name: str


def write_diagnostics_csv(path, records: list[StepRecord]) -> None:
    rows = []
    for rec in records:
        state = [""] * 9 if rec.state is None else [_fmt(v) for v in rec.state]
        rows.append(
            [str(rec.k), _fmt(rec.t), rec.status]
            + state
            + [
                _fmt(rec.trace_p),
                _fmt(rec.trace_q),
                _fmt(rec.trace_r),
                _fmt(rec.d_norm),
                _fmt(rec.d_m2),
                str(int(rec.accepted)),
                rec.filter_name,
            ]
        )
    atomic_write_text(path, _csv_text(DIAG_HEADER, rows))


def read_diagnostics_csv(path) -> list[StepRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DIAG_HEADER:
            raise InputValidationError(
                f"{path}: expected header {','.join(DIAG_HEADER)}, got {header}"
            )
        for row in reader:
            if not row:
                continue
            state = None
            if row[3] != "":
                state = np.array([float(v) for v in row[3:12]])
            records.append(
                StepRecord(
                    k=int(row[0]),
                    t=float(row[1]),
                    status=row[2],
                    state=state,
                    trace_p=float(row[12]) if row[12] else None,
                    trace_q=float(row[13]) if row[13] else None,
                    trace_r=float(row[14]) if row[14] else None,
                    d_norm=float(row[15]) if row[15] else None,
                    d_m2=float(row[16]) if row[16] else None,
                    accepted=bool(int(row[17])),
                    filter_name=row[18],
                )
            )
    return records


def write_cluster_debug_csv(path, rows: list[dict]) -> None:
    out = []
    for r in rows:
        out.append(
            [
                str(r["frame_id"]), str(r["cluster_id"]), str(r["size"]),
                _fmt(r["cx"]), _fmt(r["cy"]), _fmt(r["cz"]),
                _fmt(r["max_eig"]), str(r["accepted"]),
            ]
        )
    atomic_write_text(path, _csv_text(CLUSTER_DEBUG_HEADER, out))


# ===== flat key=value configuration =====


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def write_config_file(path, values: dict[str, str]) -> None:
    lines = [f"{k} = {values[k]}" for k in values]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _coerce(dataclass_type, values: dict[str, str], skip=()):
    kwargs = {}
    for f in fields(dataclass_type):
        if not f.init or f.name in skip or f.name not in values:
            continue
        raw = values[f.name]
        if f.type in ("int", int):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    return kwargs


def build_pipeline_config(values: dict[str, str]) -> PipelineConfig:
    return PipelineConfig(**_coerce(PipelineConfig, values))


def build_filter_config(values: dict[str, str]) -> FilterConfig:
    return FilterConfig(**_coerce(FilterConfig, values))


_SEGMENT_TYPES = {"hover": Hover, "linear": Linear, "sweep": Sweep, "spiral": Spiral}


def parse_trajectory(dsl: str, start: str) -> Trajectory:
    """Build a trajectory from its compact text form.

    ``start`` is "x,y,z"; ``dsl`` is semicolon-separated segments, each
    "type:duration[:key=val,key=val]", e.g.
    ``linear:14:vx=0.9,vy=1.1,vz=0.05;sweep:24:radius=6,period=6``.
    """
    try:
        p0 = tuple(float(v) for v in start.split(","))
        if len(p0) != 3:
            raise ValueError
    except ValueError:
        raise ConfigError(f"start must be 'x,y,z', got {start!r}") from None
    segments = []
    for spec in dsl.split(";"):
        spec = spec.strip()
        if not spec:
            continue
        parts = spec.split(":", 2)
        if len(parts) < 2:
            raise ConfigError(f"segment {spec!r} needs at least 'type:duration'")
        name = parts[0].strip()
        if name not in _SEGMENT_TYPES:
            raise ConfigError(
                f"unknown segment type {name!r}; choose from {sorted(_SEGMENT_TYPES)}"
            )
        duration = float(parts[1])
        params: dict[str, float] = {}
        if len(parts) == 3 and parts[2].strip():
            for item in parts[2].split(","):
                key, _, val = item.partition("=")
                if not _:
                    raise ConfigError(f"segment parameter {item!r} is not key=val")
                params[key.strip()] = float(val)
        if name == "hover":
            segments.append(Hover(duration=duration))
        elif name == "linear":
            segments.append(
                Linear(
                    duration=duration,
                    velocity=(
                        params.pop("vx", 0.0),
                        params.pop("vy", 0.0),
                        params.pop("vz", 0.0),
                    ),
                )
            )
            params.clear()
        elif name == "sweep":
            segments.append(
                Sweep(
                    duration=duration,
                    radius=params.pop("radius"),
                    period=params.pop("period"),
                )
            )
        else:
            segments.append(
                Spiral(
                    duration=duration,
                    radius=params.pop("radius"),
                    period=params.pop("period"),
                    climb=params.pop("climb", 0.0),
                )
            )
        if params:
            raise ConfigError(f"segment {name!r}: unknown parameters {sorted(params)}")
    return Trajectory(start=p0, segments=segments)


def format_trajectory(traj: Trajectory) -> tuple[str, str]:
    """Inverse of :func:`parse_trajectory`: (dsl, start) strings."""
    if not traj.segments:
        raise ConfigError("waypoint trajectories have no flat text form")
    start = ",".join(_fmt(v) for v in traj.start)
    parts = []
    for seg in traj.segments:
        if isinstance(seg, Hover):
            parts.append(f"hover:{_fmt(seg.duration)}")
        elif isinstance(seg, Linear):
            vx, vy, vz = seg.velocity
            parts.append(
                f"linear:{_fmt(seg.duration)}:vx={_fmt(vx)},vy={_fmt(vy)},vz={_fmt(vz)}"
            )
        elif isinstance(seg, Sweep):
            parts.append(
                f"sweep:{_fmt(seg.duration)}:radius={_fmt(seg.radius)},"
                f"period={_fmt(seg.period)}"
            )
        else:
            parts.append(
                f"spiral:{_fmt(seg.duration)}:radius={_fmt(seg.radius)},"
                f"period={_fmt(seg.period)},climb={_fmt(seg.climb)}"
            )
    return ";".join(parts), start


def build_scenario_config(values: dict[str, str]) -> ScenarioConfig:
    """Assemble a ScenarioConfig from flat text values.

    Required keys: duration, trajectory, start. Optional: frame_rate,
    returns_min, returns_max, point_jitter_sigma, clutter_rate,
    clutter_bounds ("x0:x1,y0:y1,z0:z1"), gaps ("start:dur,start:dur"),
    seed, name.
    """
    for key in ("duration", "trajectory", "start"):
        if key not in values:
            raise ConfigError(f"scenario config needs a {key!r} entry")
    kwargs = _coerce(
        ScenarioConfig,
        values,
        skip=("trajectory", "clutter_bounds", "gaps", "name", "seed"),
    )
    if "seed" in values:
        kwargs["seed"] = int(values["seed"])
    if "name" in values:
        kwargs["name"] = values["name"]
    if "gaps" in values:
        gaps = []
        text = values["gaps"].strip()
        if text:
            for item in text.split(","):
                start, _, dur = item.partition(":")
                if not _:
                    raise ConfigError(f"gap {item!r} is not start:duration")
                gaps.append((float(start), float(dur)))
        kwargs["gaps"] = tuple(gaps)
    if "clutter_bounds" in values:
        bounds = []
        for item in values["clutter_bounds"].split(","):
            lo, _, hi = item.partition(":")
            if not _:
                raise ConfigError(f"clutter bound {item!r} is not lo:hi")
            bounds.append((float(lo), float(hi)))
        if len(bounds) != 3:
            raise ConfigError("clutter_bounds needs exactly three lo:hi entries")
        kwargs["clutter_bounds"] = tuple(bounds)
    kwargs["trajectory"] = parse_trajectory(values["trajectory"], values["start"])
    return ScenarioConfig(**kwargs)


def scenario_to_mapping(cfg: ScenarioConfig) -> dict[str, str]:
    """Flatten a scenario (with a parametric trajectory) to text values."""
    dsl, start = format_trajectory(cfg.trajectory)
    return {
        "name": cfg.name,
        "duration": _fmt(cfg.duration),
        "frame_rate": _fmt(cfg.frame_rate),
        "returns_min": str(cfg.returns_min),
        "returns_max": str(cfg.returns_max),
        "point_jitter_sigma": _fmt(cfg.point_jitter_sigma),
        "clutter_rate": _fmt(cfg.clutter_rate),
        "clutter_bounds": ",".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in cfg.clutter_bounds),
        "gaps": ",".join(f"{_fmt(s)}:{_fmt(d)}" for s, d in cfg.gaps),
        "seed": str(cfg.seed),
        "trajectory": dsl,
        "start": start,
    }
