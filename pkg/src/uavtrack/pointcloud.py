"""Point-cloud containers and the per-frame preprocessing stages.

A raw frame is reduced in two steps before clustering: voxel-grid
downsampling (one centroid per occupied voxel) and a cylindrical
region-of-interest cut that removes returns outside the flight envelope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputValidationError


@dataclass(frozen=True)
class PointCloud:
    """One sensor frame: an (N, 3) array of points plus frame metadata.

    Args:
        xyz: (N, 3) point coordinates in meters, sensor-relative. May be empty.
        timestamp: Frame time in seconds (strictly increasing within a run).
        frame_id: Non-negative frame index.
    """

    xyz: np.ndarray
    timestamp: float = 0.0
    frame_id: int = 0

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=float).reshape(-1, 3)
        if xyz.size and not np.isfinite(xyz).all():
            raise InputValidationError(
                f"frame {self.frame_id}: non-finite point coordinates"
            )
        if self.frame_id < 0:
            raise InputValidationError(f"frame_id must be >= 0, got {self.frame_id}")
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self) -> int:
        return self.xyz.shape[0]


@dataclass(frozen=True)
class PipelineConfig:
    """Detection-stage parameters.

    Defaults: 5 cm voxels, 35 m planar range, permissive altitude band,
    DBSCAN tuned for the handful of returns a small UAV produces per scan,
    and a size/extent gate sized to a sub-meter airframe.
    """

    voxel_size: float = 0.05
    d_max: float = 35.0
    z_min: float = -5.0
    z_max: float = 50.0
    dbscan_eps: float = 0.5
    dbscan_min_pts: int = 3
    cluster_max_pts: int = 50
    sigma_max: float = 0.5

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.voxel_size) and self.voxel_size > 0):
            problems.append(f"voxel_size must be > 0, got {self.voxel_size}")
        if not (np.isfinite(self.d_max) and self.d_max > 0):
            problems.append(f"d_max must be > 0, got {self.d_max}")
        if not self.z_min < self.z_max:
            problems.append(f"need z_min < z_max, got [{self.z_min}, {self.z_max}]")
        if not (np.isfinite(self.dbscan_eps) and self.dbscan_eps > 0):
            problems.append(f"dbscan_eps must be > 0, got {self.dbscan_eps}")
        if int(self.dbscan_min_pts) < 1:
            problems.append(f"dbscan_min_pts must be >= 1, got {self.dbscan_min_pts}")
        if int(self.cluster_max_pts) < 1:
            problems.append(f"cluster_max_pts must be >= 1, got {self.cluster_max_pts}")
        if not (np.isfinite(self.sigma_max) and self.sigma_max > 0):
            problems.append(f"sigma_max must be > 0, got {self.sigma_max}")
        if problems:
            raise ConfigError("; ".join(problems))


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Replace every occupied voxel by the centroid of its member points.

    The grid is cubic with side ``voxel_size``, anchored at the origin
    (voxel index = floor(coordinate / voxel_size) per axis). Output points
    are ordered by voxel index tuple, which makes the result deterministic.
    """
    if not (np.isfinite(voxel_size) and voxel_size > 0):
        raise ConfigError(f"voxel_size must be > 0, got {voxel_size}")
    if len(cloud) == 0:
        return cloud
    idx = np.floor(cloud.xyz / voxel_size).astype(np.int64)
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
    keys = idx[order]
    starts = np.flatnonzero(np.r_[True, np.any(keys[1:] != keys[:-1], axis=1)])
    counts = np.diff(np.r_[starts, len(keys)])
    sums = np.add.reduceat(cloud.xyz[order], starts, axis=0)
    centroids = sums / counts[:, None]
    return PointCloud(centroids, cloud.timestamp, cloud.frame_id)


def roi_filter(cloud: PointCloud, cfg: PipelineConfig) -> PointCloud:
    """Keep points strictly inside the cylindrical flight envelope.

    Retains exactly the points with sqrt(x^2+y^2) < d_max and
    z_min < z < z_max (all strict); input order is preserved.
    """
    if len(cloud) == 0:
        return cloud
    x = cloud.xyz[:, 0]
    y = cloud.xyz[:, 1]
    z = cloud.xyz[:, 2]
    keep = (np.hypot(x, y) < cfg.d_max) & (cfg.z_min < z) & (z < cfg.z_max)
    return PointCloud(cloud.xyz[keep], cloud.timestamp, cloud.frame_id)
