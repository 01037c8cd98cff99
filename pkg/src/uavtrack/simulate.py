"""Deterministic scenario generator for desk-scale evaluation.

Emulates a sparse non-repetitive-scanning LiDAR watching a maneuvering
target: each frame carries a small random number of jittered returns on
the true position plus uniform Poisson clutter, with scripted dropout
windows during which the target produces no returns at all. Everything is
a pure function of (config, seed), frame by frame, so runs are exactly
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError
from .pointcloud import PointCloud

Bounds3 = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]

DEFAULT_CLUTTER_BOUNDS: Bounds3 = ((-15.0, 30.0), (-25.0, 20.0), (0.0, 14.0))


# ===== trajectory primitives =====


@dataclass(frozen=True)
class Hover:
    """Stationary segment."""

    duration: float

    def state_at(self, tau: float, p0: np.ndarray):
        return p0.copy(), np.zeros(3), np.zeros(3)


@dataclass(frozen=True)
class Linear:
    """Constant-velocity segment."""

    duration: float
    velocity: tuple[float, float, float]

    def state_at(self, tau: float, p0: np.ndarray):
        v = np.asarray(self.velocity, dtype=float)
        return p0 + v * tau, v, np.zeros(3)


@dataclass(frozen=True)
class Sweep:
    """Fast horizontal orbit: circular xy motion at constant altitude.

    Acceleration magnitude is constant at radius * (2*pi/period)^2, which
    makes it easy to script dropouts during uniformly hard maneuvering.
    """

    duration: float
    radius: float
    period: float

    def state_at(self, tau: float, p0: np.ndarray):
        w = 2.0 * math.pi / self.period
        center = p0 - np.array([self.radius, 0.0, 0.0])
        c, s = math.cos(w * tau), math.sin(w * tau)
        p = center + np.array([self.radius * c, self.radius * s, 0.0])
        v = np.array([-self.radius * w * s, self.radius * w * c, 0.0])
        a = np.array([-self.radius * w * w * c, -self.radius * w * w * s, 0.0])
        return p, v, a


@dataclass(frozen=True)
class Spiral:
    """Helix: circular xy motion plus a constant climb rate."""

    duration: float
    radius: float
    period: float
    climb: float

    def state_at(self, tau: float, p0: np.ndarray):
        w = 2.0 * math.pi / self.period
        center = p0 - np.array([self.radius, 0.0, 0.0])
        c, s = math.cos(w * tau), math.sin(w * tau)
        p = center + np.array([self.radius * c, self.radius * s, self.climb * tau])
        v = np.array([-self.radius * w * s, self.radius * w * c, self.climb])
        a = np.array([-self.radius * w * w * c, -self.radius * w * w * s, 0.0])
        return p, v, a


Segment = Hover | Linear | Sweep | Spiral


class Trajectory:
    """Piecewise-analytic target path with exact velocity and acceleration.

    Built either from a start point plus parametric maneuver segments
    (position is stitched continuously across segments) or from waypoints
    interpolated with a natural cubic spline.
    """

    def __init__(self, start: tuple[float, float, float], segments: list[Segment]):
        if not segments:
            raise ConfigError("trajectory needs at least one segment")
        for seg in segments:
            if not seg.duration > 0:
                raise ConfigError(f"segment duration must be > 0, got {seg.duration}")
        self.start = np.asarray(start, dtype=float)
        self.segments = list(segments)
        self._entry_points = [self.start]
        self._t_edges = [0.0]
        for seg in segments:
            p_end, _, _ = seg.state_at(seg.duration, self._entry_points[-1])
            self._entry_points.append(p_end)
            self._t_edges.append(self._t_edges[-1] + seg.duration)
        self._spline = None

    @classmethod
    def from_waypoints(cls, times, points) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        points = np.asarray(points, dtype=float).reshape(len(times), 3)
        if len(times) < 2 or np.any(np.diff(times) <= 0):
            raise ConfigError("waypoints need at least two strictly increasing times")
        traj = cls.__new__(cls)
        traj.start = points[0].copy()
        traj.segments = []
        traj._entry_points = [traj.start]
        traj._t_edges = [float(times[0]), float(times[-1])]
        traj._spline = CubicSpline(times, points, bc_type="natural")
        return traj

    @property
    def duration(self) -> float:
        return self._t_edges[-1] - self._t_edges[0]

    def state(self, t: float) -> np.ndarray:
        """Nine-dim true state [p, v, a] at time t (clamped to the path)."""
        if self._spline is not None:
            tc = min(max(t, self._t_edges[0]), self._t_edges[-1])
            p = self._spline(tc)
            v = self._spline(tc, 1)
            a = self._spline(tc, 2)
            return np.concatenate([p, v, a])
        tc = min(max(t, 0.0), self._t_edges[-1])
        i = int(np.searchsorted(self._t_edges, tc, side="right") - 1)
        i = min(i, len(self.segments) - 1)
        tau = tc - self._t_edges[i]
        p, v, a = self.segments[i].state_at(tau, self._entry_points[i])
        return np.concatenate([p, v, a])


# ===== scenario configuration =====


@dataclass(frozen=True)
class ScenarioConfig:
    """Recipe for one deterministic synthetic run.

    ``returns_min``/``returns_max`` bound the per-frame target return
    count; ``gaps`` are (start, duration) dropout windows inside which the
    target yields no returns. Identical (config, seed) pairs produce
    bit-identical datasets.
    """

    duration: float
    trajectory: Trajectory
    frame_rate: float = 9.3
    returns_min: int = 1
    returns_max: int = 4
    point_jitter_sigma: float = 0.05
    clutter_rate: float = 0.0
    clutter_bounds: Bounds3 = DEFAULT_CLUTTER_BOUNDS
    gaps: tuple[tuple[float, float], ...] = ()
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.duration) and self.duration > 0):
            problems.append(f"duration must be > 0, got {self.duration}")
        if not (np.isfinite(self.frame_rate) and self.frame_rate > 0):
            problems.append(f"frame_rate must be > 0, got {self.frame_rate}")
        if not 1 <= int(self.returns_min) <= int(self.returns_max):
            problems.append(
                f"need 1 <= returns_min <= returns_max, got "
                f"[{self.returns_min}, {self.returns_max}]"
            )
        if self.point_jitter_sigma < 0:
            problems.append(
                f"point_jitter_sigma must be >= 0, got {self.point_jitter_sigma}"
            )
        if self.clutter_rate < 0:
            problems.append(f"clutter_rate must be >= 0, got {self.clutter_rate}")
        for axis, (lo, hi) in zip("xyz", self.clutter_bounds):
            if not lo < hi:
                problems.append(f"clutter bounds on {axis} must satisfy lo < hi")
        for start, dur in self.gaps:
            if dur <= 0:
                problems.append(f"gap at t={start} has non-positive duration {dur}")
            if start < 0 or start + dur > self.duration:
                problems.append(f"gap ({start}, {dur}) falls outside the run")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))

    def frame_time(self, frame_id: int) -> float:
        return frame_id / self.frame_rate

    def in_gap(self, t: float) -> bool:
        return any(start <= t < start + dur for start, dur in self.gaps)


@dataclass(frozen=True)
class GroundTruth:
    """True per-frame target states for a generated scenario."""

    frame_ids: np.ndarray
    times: np.ndarray
    states: np.ndarray  # (n, 9): position, velocity, acceleration

    def positions(self) -> np.ndarray:
        return self.states[:, :3]


def generate_frame(cfg: ScenarioConfig, frame_id: int) -> PointCloud:
    """Synthesize one frame; a pure function of (config, frame_id).

    Each frame draws from its own substream seeded by (seed, frame_id),
    so frames can be generated in any order or in parallel without
    changing the output.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, frame_id)))
    t = cfg.frame_time(frame_id)
    parts = []
    if not cfg.in_gap(t):
        truth_pos = cfg.trajectory.state(t)[:3]
        k = int(rng.integers(cfg.returns_min, cfg.returns_max + 1))
        returns = np.tile(truth_pos, (k, 1))
        if cfg.point_jitter_sigma > 0:
            returns = returns + cfg.point_jitter_sigma * rng.standard_normal((k, 3))
        parts.append(returns)
    m = int(rng.poisson(cfg.clutter_rate))
    if m > 0:
        lows = np.array([b[0] for b in cfg.clutter_bounds])
        highs = np.array([b[1] for b in cfg.clutter_bounds])
        parts.append(rng.uniform(lows, highs, size=(m, 3)))
    xyz = np.vstack(parts) if parts else np.empty((0, 3))
    return PointCloud(xyz, timestamp=t, frame_id=frame_id)


def generate_scenario(cfg: ScenarioConfig) -> tuple[GroundTruth, list[PointCloud]]:
    """Ground truth plus the full frame sequence for one scenario."""
    n = cfg.n_frames
    frame_ids = np.arange(n, dtype=np.int64)
    times = frame_ids / cfg.frame_rate
    states = np.stack([cfg.trajectory.state(t) for t in times])
    truth = GroundTruth(frame_ids=frame_ids, times=times, states=states)
    frames = [generate_frame(cfg, int(i)) for i in frame_ids]
    return truth, frames


# ===== named presets =====


def aggressive_maneuver_preset(seed: int = 0) -> ScenarioConfig:
    """60 s run with three dropouts scripted inside a hard horizontal sweep.

    Layout: a quiet cruise, then a 24 s tight sweep at ~11 m/s^2 holding
    the three 2-3 s detection gaps, then a milder climbing spiral whose
    entry speed matches the sweep's (no velocity jolt at the handoff). The
    gap windows all sit where |a| is far above the run's median, which is
    what makes prediction-only extrapolation expensive.
    """
    trajectory = Trajectory(
        start=(6.0, -8.0, 6.0),
        segments=[
            Linear(duration=14.0, velocity=(0.9, 1.1, 0.05)),
            Sweep(duration=24.0, radius=2.5, period=3.0),
            Spiral(duration=22.0, radius=4.0, period=4.8, climb=0.35),
        ],
    )
    return ScenarioConfig(
        duration=60.0,
        trajectory=trajectory,
        frame_rate=9.3,
        returns_min=3,
        returns_max=4,
        point_jitter_sigma=0.05,
        clutter_rate=2.0,
        clutter_bounds=DEFAULT_CLUTTER_BOUNDS,
        gaps=((17.0, 2.5), (24.0, 3.0), (33.0, 3.0)),
        seed=seed,
        name="aggressive",
    )


def cruise_preset(seed: int = 0) -> ScenarioConfig:
    """Benign gap-free run: hover, gentle line, wide slow sweep."""
    trajectory = Trajectory(
        start=(10.0, -4.0, 5.0),
        segments=[
            Hover(duration=8.0),
            Linear(duration=22.0, velocity=(0.6, 0.8, 0.05)),
            Sweep(duration=30.0, radius=8.0, period=20.0),
        ],
    )
    return ScenarioConfig(
        duration=60.0,
        trajectory=trajectory,
        frame_rate=9.3,
        returns_min=3,
        returns_max=4,
        point_jitter_sigma=0.05,
        clutter_rate=1.0,
        seed=seed,
        name="cruise",
    )


def hover_preset(seed: int = 0) -> ScenarioConfig:
    """Stationary target, no clutter: the smallest useful smoke scenario."""
    trajectory = Trajectory(start=(12.0, 3.0, 6.0), segments=[Hover(duration=30.0)])
    return ScenarioConfig(
        duration=30.0,
        trajectory=trajectory,
        frame_rate=9.3,
        returns_min=3,
        returns_max=4,
        point_jitter_sigma=0.05,
        clutter_rate=0.0,
        seed=seed,
        name="hover",
    )


PRESETS = {
    "aggressive": aggressive_maneuver_preset,
    "cruise": cruise_preset,
    "hover": hover_preset,
}


def preset(name: str, seed: int | None = None) -> ScenarioConfig:
    """Look up a named scenario preset, optionally overriding its seed."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None
    cfg = factory()
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return cfg
