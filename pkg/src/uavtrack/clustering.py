"""DBSCAN target extraction and geometric candidate validation.

Clusters the ROI-filtered cloud with a density scan tuned for sparse
returns, characterizes each cluster by centroid and sample covariance,
and keeps only clusters whose size and spatial extent are plausible for
a small airframe. Surviving centroids become position measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, SingletonClusterError
from .pointcloud import PipelineConfig, PointCloud, roi_filter, voxel_downsample

# Below this size a vectorized distance matrix beats building a KD-tree.
_BRUTE_FORCE_LIMIT = 400


@dataclass(frozen=True)
class Cluster:
    """A density-connected point subset with its first two moments."""

    member_indices: np.ndarray
    centroid: np.ndarray
    covariance: np.ndarray | None
    size: int


@dataclass(frozen=True)
class CandidateMeasurement:
    """A validated cluster centroid proposed as the target position."""

    position: np.ndarray
    source_cluster: Cluster
    timestamp: float


def sym3_eigvals(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric 3x3 matrix, ascending, via the closed form.

    Uses the trigonometric solution of the characteristic cubic, so gate
    decisions do not depend on an iterative solver's stopping behavior.
    """
    a = np.asarray(a, dtype=float)
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = (a[0, 0] + a[1, 1] + a[2, 2]) / 3.0
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2.0 * p1
    if p2 <= 0.0:
        return np.array([q, q, q])
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    det_b = (
        b[0, 0] * (b[1, 1] * b[2, 2] - b[1, 2] * b[2, 1])
        - b[0, 1] * (b[1, 0] * b[2, 2] - b[1, 2] * b[2, 0])
        + b[0, 2] * (b[1, 0] * b[2, 1] - b[1, 1] * b[2, 0])
    )
    r = min(1.0, max(-1.0, det_b / 2.0))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.array([lo, mid, hi])


def _neighbor_lists(xyz: np.ndarray, eps: float) -> list[np.ndarray]:
    """Closed eps-neighborhood (including self) per point, ascending indices."""
    n = len(xyz)
    if n > _BRUTE_FORCE_LIMIT:
        tree = cKDTree(xyz)
        hits = tree.query_ball_point(xyz, eps)
        return [np.sort(np.asarray(ix, dtype=np.int64)) for ix in hits]
    diff = xyz[:, None, :] - xyz[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    eps2 = eps * eps
    return [np.flatnonzero(row <= eps2) for row in d2]


def dbscan(
    cloud: PointCloud | np.ndarray, eps: float, min_pts: int
) -> tuple[list[np.ndarray], np.ndarray]:
    """Density-based clustering with deterministic border assignment.

    A point is core iff its closed eps-neighborhood (itself included) has
    at least ``min_pts`` members. Clusters are the connected components of
    core points linked within eps; a non-core point joins the cluster of
    the lowest-index core point within eps, or is noise if there is none.

    Returns:
        (clusters, noise): member-index arrays per cluster, ordered by each
        cluster's lowest core index, plus the noise index array.
    """
    if not (np.isfinite(eps) and eps > 0):
        raise ConfigError(f"eps must be > 0, got {eps}")
    if int(min_pts) < 1:
        raise ConfigError(f"min_pts must be >= 1, got {min_pts}")
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    n = len(xyz)
    if n == 0:
        return [], np.empty(0, dtype=np.int64)

    neigh = _neighbor_lists(xyz, eps)
    core = np.array([len(ix) >= min_pts for ix in neigh])
    labels = np.full(n, -1, dtype=np.int64)

    cluster_id = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cluster_id
        stack = [i]
        while stack:
            j = stack.pop()
            for k in neigh[j]:
                if core[k] and labels[k] == -1:
                    labels[k] = cluster_id
                    stack.append(k)
        cluster_id += 1

    for i in range(n):
        if core[i]:
            continue
        for k in neigh[i]:
            if core[k]:  # neighbors are ascending, so first hit is lowest index
                labels[i] = labels[k]
                break

    clusters = [np.flatnonzero(labels == c) for c in range(cluster_id)]
    noise = np.flatnonzero(labels == -1)
    return clusters, noise


def cluster_stats(
    xyz: np.ndarray, members: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Centroid and unbiased sample covariance of the member points.

    Raises:
        SingletonClusterError: covariance is undefined for fewer than two
            members (the n-1 denominator); callers must treat the cluster
            as an invalid candidate.
    """
    members = np.asarray(members, dtype=np.int64)
    pts = np.asarray(xyz, dtype=float)[members]
    if len(pts) == 0:
        raise ValueError("cluster_stats needs at least one member")
    centroid = pts.mean(axis=0)
    if len(pts) < 2:
        raise SingletonClusterError("sample covariance undefined for a singleton")
    centered = pts - centroid
    cov = centered.T @ centered / (len(pts) - 1)
    cov = 0.5 * (cov + cov.T)
    return centroid, cov


def validate_candidates(
    clusters: list[Cluster], cfg: PipelineConfig, timestamp: float = 0.0
) -> list[CandidateMeasurement]:
    """Keep clusters plausible for a small UAV and emit their centroids.

    A cluster passes iff 2 <= size <= cluster_max_pts and the largest
    eigenvalue of its covariance is <= sigma_max^2 (both bounds inclusive).
    Output is sorted by ascending size, then centroid lexicographically.
    """
    accepted = []
    for cl in clusters:
        if not _cluster_passes(cl, cfg):
            continue
        accepted.append(cl)
    accepted.sort(key=lambda c: (c.size, c.centroid[0], c.centroid[1], c.centroid[2]))
    return [
        CandidateMeasurement(position=c.centroid.copy(), source_cluster=c, timestamp=timestamp)
        for c in accepted
    ]


def _cluster_passes(cl: Cluster, cfg: PipelineConfig) -> bool:
    if not (2 <= cl.size <= cfg.cluster_max_pts):
        return False
    if cl.covariance is None:
        return False
    return sym3_eigvals(cl.covariance)[2] <= cfg.sigma_max**2


def detect_target(raw: PointCloud, cfg: PipelineConfig) -> list[CandidateMeasurement]:
    """Full detection stage: downsample, ROI cut, cluster, validate.

    Returns every validated candidate (the association stage picks the
    best match against the predicted state).
    """
    candidates, _ = detect_target_report(raw, cfg)
    return candidates


def detect_target_report(
    raw: PointCloud, cfg: PipelineConfig
) -> tuple[list[CandidateMeasurement], list[dict]]:
    """Like :func:`detect_target` but also returns per-cluster debug rows.

    Each row has the fields of the cluster debug CSV:
    frame_id, cluster_id, size, cx, cy, cz, max_eig, accepted.
    """
    cloud = roi_filter(voxel_downsample(raw, cfg.voxel_size), cfg)
    groups, _ = dbscan(cloud, cfg.dbscan_eps, cfg.dbscan_min_pts)

    clusters: list[Cluster] = []
    rows: list[dict] = []
    for cid, members in enumerate(groups):
        if len(members) >= 2:
            centroid, cov = cluster_stats(cloud.xyz, members)
            max_eig = float(sym3_eigvals(cov)[2])
        else:
            centroid = cloud.xyz[members].mean(axis=0)
            cov = None
            max_eig = float("nan")
        cl = Cluster(
            member_indices=members,
            centroid=centroid,
            covariance=cov,
            size=int(len(members)),
        )
        clusters.append(cl)
        rows.append(
            {
                "frame_id": raw.frame_id,
                "cluster_id": cid,
                "size": cl.size,
                "cx": float(centroid[0]),
                "cy": float(centroid[1]),
                "cz": float(centroid[2]),
                "max_eig": max_eig,
                "accepted": int(_cluster_passes(cl, cfg)),
            }
        )
    return validate_candidates(clusters, cfg, timestamp=raw.timestamp), rows
