"""Sparse-LiDAR UAV tracking toolkit.

Pipeline: voxel downsample -> ROI cut -> DBSCAN -> candidate validation,
feeding a constant-acceleration Kalman filter with innovation/residual
noise adaptation, Mahalanobis gating, and bounded-coast recovery. Ships a
fixed-noise KF and a particle filter as baselines plus a deterministic
scenario simulator and batch evaluation tools.
"""

from .baselines import (
    ParticleSet,
    ParticleStepResult,
    fixed_ca_kf_step,
    init_particles,
    particle_filter_step,
    systematic_resample,
)
from .clustering import (
    CandidateMeasurement,
    Cluster,
    cluster_stats,
    dbscan,
    detect_target,
    detect_target_report,
    sym3_eigvals,
    validate_candidates,
)
from .filtering import (
    FilterConfig,
    InnovationRecord,
    NoiseState,
    adapt_measurement_noise,
    adapt_process_noise,
    gate_threshold,
    make_transition_matrix,
    measurement_matrix,
    predict,
    update,
)
from .metrics import RunMetrics, compute_rmse, metrics_from_records
from .pointcloud import PipelineConfig, PointCloud, roi_filter, voxel_downsample
from .runner import FILTER_NAMES, drive_filter, run_experiment
from .simulate import (
    GroundTruth,
    Hover,
    Linear,
    PRESETS,
    ScenarioConfig,
    Spiral,
    Sweep,
    Trajectory,
    aggressive_maneuver_preset,
    generate_frame,
    generate_scenario,
    preset,
)
from .tracker import (
    GateResult,
    TrackState,
    TrackStatus,
    birth,
    coast,
    gate,
    new_track,
    step,
)

__version__ = "0.1.0"
