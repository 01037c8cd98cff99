"""Validation gating, occlusion coasting, and track reinitialization.

A single track cycles through predict -> gate -> (update + adapt) or
coast. Coasting is bounded: after ``t_occ`` consecutive prediction-only
steps the track is declared Lost and its estimate frozen; the next frame
with detections rebirths the track from scratch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .clustering import CandidateMeasurement
from .errors import DegenerateInnovationError, StateMachineError
from .filtering import (
    FilterConfig,
    InnovationRecord,
    NoiseState,
    adapt_measurement_noise,
    adapt_process_noise,
    make_transition_matrix,
    measurement_matrix,
    predict,
    update,
)

log = logging.getLogger(__name__)

_H = measurement_matrix()


class TrackStatus(Enum):
    UNINITIALIZED = "uninitialized"
    TRACKING = "tracking"
    COASTING = "coasting"
    LOST = "lost"


@dataclass(frozen=True)
class TrackState:
    """Immutable snapshot of a single target track.

    ``missed_count`` is the number of consecutive prediction-only steps
    (1..t_occ while coasting, 0 while tracking). ``estimate`` and friends
    are None until the first detection births the track.
    """

    estimate: np.ndarray | None = None
    covariance: np.ndarray | None = None
    noise: NoiseState | None = None
    status: TrackStatus = TrackStatus.UNINITIALIZED
    missed_count: int = 0
    last_record: InnovationRecord | None = None


@dataclass(frozen=True)
class GateResult:
    """Outcome of gating a candidate list against a predicted state."""

    selected: CandidateMeasurement | None
    mahalanobis_sq: float | None
    min_mahalanobis_sq: float | None
    degenerate: bool = False


def new_track() -> TrackState:
    return TrackState()


def birth(candidate: CandidateMeasurement, cfg: FilterConfig) -> TrackState:
    """Start a fresh track at the detection with zero velocity/acceleration."""
    return TrackState(
        estimate=cfg.initial_state(candidate.position),
        covariance=cfg.initial_p(),
        noise=NoiseState(q=cfg.initial_q(), r=cfg.initial_r()),
        status=TrackStatus.TRACKING,
        missed_count=0,
        last_record=None,
    )


def gate(
    candidates: list[CandidateMeasurement],
    x_minus: np.ndarray,
    p_minus: np.ndarray,
    r: np.ndarray,
    tau: float,
) -> GateResult:
    """Pick the candidate with minimal Mahalanobis distance below tau.

    Ties keep the earlier candidate (the validated ordering). A singular
    innovation covariance gates nothing and flags the result degenerate.
    """
    if not candidates:
        return GateResult(None, None, None)
    s = 0.5 * ((_H @ p_minus @ _H.T + r) + (_H @ p_minus @ _H.T + r).T)
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > 1e12:
        log.warning("gate: innovation covariance degenerate (cond=%.3e)", cond)
        return GateResult(None, None, None, degenerate=True)
    z_pred = _H @ x_minus
    best_idx = None
    best_d2 = None
    min_d2 = None
    for i, cand in enumerate(candidates):
        d = cand.position - z_pred
        d2 = float(d @ np.linalg.solve(s, d))
        if min_d2 is None or d2 < min_d2:
            min_d2 = d2
        if d2 < tau and (best_d2 is None or d2 < best_d2):
            best_idx = i
            best_d2 = d2
    if best_idx is None:
        return GateResult(None, None, min_d2)
    return GateResult(candidates[best_idx], best_d2, min_d2)


def coast(track: TrackState, cfg: FilterConfig, dt: float | None = None) -> TrackState:
    """Prediction-only step: the prior becomes the posterior, Q stays frozen.

    The covariance keeps inflating while coasting; once the track has
    already coasted ``t_occ`` consecutive steps, a further miss freezes the
    estimate and marks the track Lost instead of extrapolating again.
    """
    if track.status not in (TrackStatus.TRACKING, TrackStatus.COASTING):
        raise StateMachineError(f"cannot coast a track in status {track.status.name}")
    if track.status is TrackStatus.COASTING and track.missed_count >= cfg.t_occ:
        return replace(track, status=TrackStatus.LOST, last_record=None)
    f = make_transition_matrix(dt if dt is not None else cfg.dt)
    x_minus, p_minus = predict(track.estimate, track.covariance, f, track.noise.q)
    return TrackState(
        estimate=x_minus,
        covariance=p_minus,
        noise=track.noise,
        status=TrackStatus.COASTING,
        missed_count=track.missed_count + 1,
        last_record=None,
    )


def step(
    track: TrackState,
    candidates: list[CandidateMeasurement],
    cfg: FilterConfig,
    dt: float | None = None,
) -> TrackState:
    """One full association cycle over the current frame's candidates.

    Uninitialized or Lost tracks (re)birth from the first candidate when
    one exists. Otherwise: predict, gate, and either update followed by
    the R then Q adaptations, or coast.
    """
    if track.status in (TrackStatus.UNINITIALIZED, TrackStatus.LOST):
        if candidates:
            return birth(candidates[0], cfg)
        return track

    f = make_transition_matrix(dt if dt is not None else cfg.dt)
    x_minus, p_minus = predict(track.estimate, track.covariance, f, track.noise.q)
    result = gate(candidates, x_minus, p_minus, track.noise.r, cfg.tau)
    if result.selected is None:
        return coast(track, cfg, dt)

    try:
        x_plus, p_plus, record = update(
            x_minus, p_minus, result.selected.position, _H, track.noise.r
        )
    except DegenerateInnovationError as exc:
        log.warning("update degenerate, treating frame as missed: %s", exc)
        return coast(track, cfg, dt)

    r_next = adapt_measurement_noise(
        track.noise.r, record.residual, _H, p_minus, cfg.beta
    )
    q_next = adapt_process_noise(track.noise.q, record.gain, record.innovation, cfg.alpha)
    return TrackState(
        estimate=x_plus,
        covariance=p_plus,
        noise=NoiseState(q=q_next, r=r_next),
        status=TrackStatus.TRACKING,
        missed_count=0,
        last_record=record,
    )
