"""Constant-velocity Kalman filter over ``(cx, cy, w, h)`` and their rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox

_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.hstack([np.eye(4), np.zeros((4, 4))])
_MIN_SIZE = 1e-6


class KalmanError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KalmanConfig:
    init_pos_std: float = 0.05
    init_vel_std: float = 0.1
    q_pos: float = 1e-4
    q_vel: float = 1e-4
    r: float = 1e-4

    @property
    def Q(self) -> np.ndarray:
        return np.diag([self.q_pos] * 4 + [self.q_vel] * 4)

    @property
    def R(self) -> np.ndarray:
        return np.eye(4) * self.r


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def box(self) -> BBox:
        m = self.mean
        return BBox(float(m[0]), float(m[1]), max(float(m[2]), _MIN_SIZE), max(float(m[3]), _MIN_SIZE))


def kf_init(b: BBox, cfg: KalmanConfig = KalmanConfig()) -> KalmanState:
    mean = np.concatenate([b.as_array(), np.zeros(4)])
    cov = np.diag([cfg.init_pos_std**2] * 4 + [cfg.init_vel_std**2] * 4)
    return KalmanState(mean, cov)


def kf_predict(s: KalmanState, cfg: KalmanConfig = KalmanConfig()) -> tuple[KalmanState, BBox]:
    mean = _F @ s.mean
    cov = _F @ s.covariance @ _F.T + cfg.Q
    cov = (cov + cov.T) / 2.0
    out = KalmanState(mean, cov)
    return out, out.box()


def kf_update(s: KalmanState, z: BBox, cfg: KalmanConfig = KalmanConfig()) -> KalmanState:
    P = s.covariance
    S = _H @ P @ _H.T + cfg.R
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise KalmanError("innovation covariance is not positive definite") from exc
    PHt = P @ _H.T
    # K = P H^T S^-1 via two triangular solves
    K = np.linalg.solve(chol.T, np.linalg.solve(chol, PHt.T)).T
    innovation = z.as_array() - _H @ s.mean
    mean = s.mean + K @ innovation
    A = np.eye(8) - K @ _H
    cov = A @ P @ A.T + K @ cfg.R @ K.T  # Joseph form keeps P symmetric PSD
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean, cov)
