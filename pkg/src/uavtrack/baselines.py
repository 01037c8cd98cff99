"""Comparison filters sharing the detection front-end.

Two baselines bracket the adaptive tracker: a constant-acceleration
Kalman filter with frozen noise matrices and no recovery logic (it coasts
indefinitely through detection gaps), and a bootstrap particle filter
with systematic resampling. Both use the adaptive tracker's initial noise
values, so adaptation and recovery are the only experimental differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import CandidateMeasurement
from .errors import DegenerateInnovationError
from .filtering import (
    FilterConfig,
    NoiseState,
    make_transition_matrix,
    measurement_matrix,
    predict,
    update,
)
from .tracker import GateResult, TrackState, TrackStatus, birth, gate

_H = measurement_matrix()


def fixed_ca_kf_step(
    track: TrackState,
    candidates: list[CandidateMeasurement],
    cfg: FilterConfig,
    dt: float | None = None,
) -> TrackState:
    """Non-adaptive CA Kalman step: no noise adaptation, no track loss.

    Misses put the track in a coasting state that never expires, so after
    long gaps the filter keeps extrapolating with its last velocity and
    acceleration.
    """
    if track.status is TrackStatus.UNINITIALIZED:
        if candidates:
            return birth(candidates[0], cfg)
        return track

    f = make_transition_matrix(dt if dt is not None else cfg.dt)
    x_minus, p_minus = predict(track.estimate, track.covariance, f, track.noise.q)
    result = gate(candidates, x_minus, p_minus, track.noise.r, cfg.tau)
    if result.selected is not None:
        try:
            x_plus, p_plus, record = update(
                x_minus, p_minus, result.selected.position, _H, track.noise.r
            )
            return TrackState(
                estimate=x_plus,
                covariance=p_plus,
                noise=track.noise,
                status=TrackStatus.TRACKING,
                missed_count=0,
                last_record=record,
            )
        except DegenerateInnovationError:
            pass
    return TrackState(
        estimate=x_minus,
        covariance=p_minus,
        noise=track.noise,
        status=TrackStatus.COASTING,
        missed_count=track.missed_count + 1,
        last_record=None,
    )


@dataclass
class ParticleSet:
    """A fixed-size weighted particle cloud over the nine-dim state."""

    states: np.ndarray  # (n, 9)
    weights: np.ndarray  # (n,), non-negative, sums to 1

    @property
    def n(self) -> int:
        return len(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.states

    def covariance(self) -> np.ndarray:
        diff = self.states - self.mean()
        cov = (self.weights[:, None] * diff).T @ diff
        return 0.5 * (cov + cov.T)

    def effective_sample_size(self) -> float:
        return 1.0 / float(self.weights @ self.weights)


@dataclass(frozen=True)
class ParticleStepResult:
    """Particle step outcome: new cloud, point estimate, gate diagnostics."""

    particles: ParticleSet
    estimate: np.ndarray
    gate_result: GateResult
    resampled: bool
    reinitialized: bool
    innovation_norm: float | None = None


# Spread of the velocity prior around a two-point-differenced estimate:
# differencing noise plus one frame of hard-maneuver velocity change.
_HINT_VEL_SIGMA = 1.5
# A velocity differenced across a longer baseline than this is stale
# (detection gaps make it an average over the whole outage).
_HINT_MAX_AGE = 0.35
# Post-resample roughening gain (Gordon-style jitter scaled by the sample
# range and n^(-1/d)); without it repeated cloning collapses the cloud onto
# a handful of lineages and the mean random-walks away between resets.
_ROUGHENING_GAIN = 0.2


def init_particles(
    candidate: CandidateMeasurement,
    cfg: FilterConfig,
    rng: np.random.Generator,
    velocity_hint: np.ndarray | None = None,
) -> ParticleSet:
    """Sample the birth distribution around a detection.

    Position spreads with the P0 position variance around the candidate;
    acceleration is zero-mean with the P0 prior. Velocity is zero-mean
    with the wide P0 prior unless a two-point-differenced estimate is
    available, in which case the cloud concentrates around it (a diffuse
    velocity prior cannot be represented by a position-weighted cloud of
    this size, so without the hint the filter churns through resets).
    """
    mean = cfg.initial_state(candidate.position)
    std = np.sqrt(np.diag(cfg.initial_p()))
    # Position spread matches the measurement model, not the (deliberately
    # inflated) birth covariance: particles seeded outside the likelihood's
    # support would be discarded by the first reweight.
    std[:3] = math.sqrt(cfg.r0)
    if velocity_hint is not None:
        mean[3:6] = velocity_hint
        std[3:6] = _HINT_VEL_SIGMA
    states = mean + rng.standard_normal((cfg.pf_particles, 9)) * std
    weights = np.full(cfg.pf_particles, 1.0 / cfg.pf_particles)
    return ParticleSet(states=states, weights=weights)


def systematic_resample(weights: np.ndarray, u0: float) -> np.ndarray:
    """Systematic resampling: one uniform draw, n evenly spaced pointers.

    Unbiased: the expected replication count of particle i is n * w_i.
    """
    n = len(weights)
    positions = (u0 + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions).clip(max=n - 1)


def particle_filter_step(
    particles: ParticleSet,
    candidates: list[CandidateMeasurement],
    cfg: FilterConfig,
    rng_seed,
    dt: float | None = None,
    prev_accepted: CandidateMeasurement | None = None,
) -> ParticleStepResult:
    """Bootstrap particle step: propagate, select, weight, resample.

    Propagation draws per-particle CA process noise from the seeded stream.
    Candidate selection reuses the adaptive tracker's minimum-Mahalanobis
    rule (cloud covariance as the prior) but without the hard chi-square
    cutoff: a bootstrap filter must keep weighting, since its only recovery
    paths are the likelihood itself and the degenerate reset. If every
    particle's likelihood underflows to zero the cloud has collapsed and is
    reinitialized around the candidate, with the velocity prior centered on
    the two-point difference against ``prev_accepted`` when that baseline
    is still fresh.
    """
    rng = np.random.default_rng(rng_seed)
    f = make_transition_matrix(dt if dt is not None else cfg.dt)
    q_std = np.sqrt(np.diag(cfg.initial_q()))
    states = particles.states @ f.T + rng.standard_normal(particles.states.shape) * q_std
    cloud = ParticleSet(states=states, weights=particles.weights.copy())

    r = cfg.initial_r()
    prior_mean = cloud.mean()
    result = gate(candidates, prior_mean, cloud.covariance(), r, math.inf)
    if result.selected is None:
        return ParticleStepResult(cloud, prior_mean, result, False, False)

    z = result.selected.position
    innovation_norm = float(np.linalg.norm(z - prior_mean[:3]))
    diff = z - states[:, :3]
    r_inv_diag = 1.0 / np.diag(r)
    log_lik = -0.5 * np.einsum("ij,j,ij->i", diff, r_inv_diag, diff)
    weights = cloud.weights * np.exp(log_lik)
    total = weights.sum()
    if total == 0.0:
        hint = None
        if prev_accepted is not None:
            baseline = result.selected.timestamp - prev_accepted.timestamp
            if 0.0 < baseline <= _HINT_MAX_AGE:
                hint = (z - prev_accepted.position) / baseline
        fresh = init_particles(result.selected, cfg, rng, velocity_hint=hint)
        return ParticleStepResult(fresh, fresh.mean(), result, False, True, innovation_norm)
    weights /= total
    cloud = ParticleSet(states=states, weights=weights)
    estimate = cloud.mean()

    resampled = False
    if cloud.effective_sample_size() < cloud.n / 2.0:
        idx = systematic_resample(cloud.weights, rng.uniform())
        picked = cloud.states[idx]
        spread = picked.max(axis=0) - picked.min(axis=0)
        jitter = _ROUGHENING_GAIN * spread * cloud.n ** (-1.0 / picked.shape[1])
        picked = picked + rng.standard_normal(picked.shape) * jitter
        cloud = ParticleSet(
            states=picked,
            weights=np.full(cloud.n, 1.0 / cloud.n),
        )
        resampled = True
    return ParticleStepResult(cloud, estimate, result, resampled, False, innovation_norm)
