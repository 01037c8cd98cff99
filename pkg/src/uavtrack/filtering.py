"""Constant-acceleration Kalman core with online noise adaptation.

Nine-state filter (position, velocity, acceleration per axis) observing
position only. Process noise is steered by the innovation through the
Kalman gain; measurement noise is steered by the post-update residual
debiased with the prior position uncertainty. Both adapted matrices stay
symmetric positive semi-definite by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import ConfigError, DegenerateInnovationError, NumericalError

STATE_DIM = 9
MEAS_DIM = 3

# Coverage of the standard three-sigma ellipsoid, erf(3/sqrt(2)). Usually
# quoted as "99.7%"; kept exact so the 3-dof gate threshold is ~14.156.
THREE_SIGMA_COVERAGE = 0.9973002039367398

_COND_LIMIT = 1e12


def gate_threshold(gamma: float, dof: int = MEAS_DIM) -> float:
    """Chi-square quantile of order gamma: the Mahalanobis gate tau."""
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gate coverage must be in (0, 1), got {gamma}")
    return float(chi2.ppf(gamma, dof))


def measurement_matrix() -> np.ndarray:
    """3x9 matrix selecting the position components of the state."""
    h = np.zeros((MEAS_DIM, STATE_DIM))
    h[0, 0] = h[1, 1] = h[2, 2] = 1.0
    return h


@dataclass(frozen=True)
class NoiseState:
    """Current process (9x9) and measurement (3x3) noise covariances."""

    q: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class InnovationRecord:
    """Per-update diagnostics: what the filter saw and how it reacted."""

    innovation: np.ndarray
    innovation_cov: np.ndarray
    gain: np.ndarray
    residual: np.ndarray
    mahalanobis_sq: float


@dataclass(frozen=True)
class FilterConfig:
    """Filter timing, adaptation, gating, and initialization parameters.

    ``gate_gamma`` defaults to the exact three-sigma coverage so the
    derived 3-dof threshold ``tau`` is ~14.156. ``q0``/``r0`` are isotropic
    initial noise scales; ``p0_*`` are the per-axis initial variances of
    position, velocity, and acceleration at track birth.
    """

    dt: float = 0.1
    alpha: float = 0.3
    beta: float = 0.3
    gate_gamma: float = THREE_SIGMA_COVERAGE
    t_occ: int = 10
    q0: float = 0.01
    r0: float = 0.25
    p0_pos: float = 1.0
    p0_vel: float = 25.0
    p0_acc: float = 100.0
    pf_particles: int = 2000
    tau: float = field(init=False)

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.dt) and self.dt > 0):
            problems.append(f"dt must be > 0, got {self.dt}")
        if not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            problems.append(f"beta must be in (0, 1), got {self.beta}")
        if not 0.0 < self.gate_gamma < 1.0:
            problems.append(f"gate_gamma must be in (0, 1), got {self.gate_gamma}")
        if int(self.t_occ) < 1:
            problems.append(f"t_occ must be >= 1, got {self.t_occ}")
        for name in ("q0", "r0", "p0_pos", "p0_vel", "p0_acc"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                problems.append(f"{name} must be > 0, got {v}")
        if int(self.pf_particles) < 1:
            problems.append(f"pf_particles must be >= 1, got {self.pf_particles}")
        if problems:
            raise ConfigError("; ".join(problems))
        object.__setattr__(self, "tau", gate_threshold(self.gate_gamma))

    def initial_q(self) -> np.ndarray:
        return self.q0 * np.eye(STATE_DIM)

    def initial_r(self) -> np.ndarray:
        return self.r0 * np.eye(MEAS_DIM)

    def initial_p(self) -> np.ndarray:
        return np.diag(
            [self.p0_pos] * 3 + [self.p0_vel] * 3 + [self.p0_acc] * 3
        ).astype(float)

    def initial_state(self, z: np.ndarray) -> np.ndarray:
        x = np.zeros(STATE_DIM)
        x[:3] = np.asarray(z, dtype=float)
        return x


def make_transition_matrix(dt: float) -> np.ndarray:
    """9x9 constant-acceleration transition: [[I, dt I, dt^2/2 I], ...]."""
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigError(f"dt must be > 0, got {dt}")
    f = np.eye(STATE_DIM)
    for i in range(3):
        f[i, i + 3] = dt
        f[i + 3, i + 6] = dt
        f[i, i + 6] = 0.5 * dt * dt
    return f


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def predict(
    x: np.ndarray, p: np.ndarray, f: np.ndarray, q: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Time update: propagate the state and inflate the covariance."""
    x_minus = f @ x
    p_minus = _symmetrize(f @ p @ f.T + q)
    if not (np.isfinite(x_minus).all() and np.isfinite(p_minus).all()):
        raise NumericalError("prediction produced non-finite values")
    return x_minus, p_minus


def update(
    x_minus: np.ndarray,
    p_minus: np.ndarray,
    z: np.ndarray,
    h: np.ndarray,
    r: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, InnovationRecord]:
    """Measurement update; returns the posterior and full diagnostics.

    Raises:
        DegenerateInnovationError: the innovation covariance is singular or
            numerically close to it; callers should treat the frame as missed.
    """
    s = _symmetrize(h @ p_minus @ h.T + r)
    if not np.isfinite(s).all():
        raise DegenerateInnovationError("innovation covariance is not finite")
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise DegenerateInnovationError(
            f"innovation covariance condition number {cond:.3e} exceeds {_COND_LIMIT:.0e}"
        )
    z = np.asarray(z, dtype=float)
    innovation = z - h @ x_minus
    s_inv_d = np.linalg.solve(s, innovation)
    d_m2 = float(innovation @ s_inv_d)
    gain = np.linalg.solve(s, (p_minus @ h.T).T).T
    x_plus = x_minus + gain @ innovation
    p_plus = _symmetrize((np.eye(STATE_DIM) - gain @ h) @ p_minus)
    if not (np.isfinite(x_plus).all() and np.isfinite(p_plus).all()):
        raise NumericalError("update produced non-finite values")
    residual = z - h @ x_plus
    record = InnovationRecord(
        innovation=innovation,
        innovation_cov=s,
        gain=gain,
        residual=residual,
        mahalanobis_sq=d_m2,
    )
    return x_plus, p_plus, record


def adapt_process_noise(
    q_prev: np.ndarray, gain: np.ndarray, innovation: np.ndarray, alpha: float
) -> np.ndarray:
    """Exponentially forget Q toward the gain-mapped innovation outer product.

    Large innovations (the target out-running the motion model) inflate Q,
    which widens the next prediction and speeds the gain back up; small
    innovations let Q decay, suppressing noise during smooth flight.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    kd = gain @ np.asarray(innovation, dtype=float)
    return alpha * q_prev + (1.0 - alpha) * np.outer(kd, kd)


def adapt_measurement_noise(
    r_prev: np.ndarray,
    residual: np.ndarray,
    h: np.ndarray,
    p_minus: np.ndarray,
    beta: float,
) -> np.ndarray:
    """Exponentially forget R toward the debiased residual outer product.

    The H P- H^T term removes the prediction-uncertainty contribution from
    the residual statistic, so R tracks actual measurement quality.
    """
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must be in (0, 1), got {beta}")
    eps = np.asarray(residual, dtype=float)
    return beta * r_prev + (1.0 - beta) * (
        np.outer(eps, eps) + _symmetrize(h @ p_minus @ h.T)
    )
