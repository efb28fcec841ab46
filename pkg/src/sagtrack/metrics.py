"""Tracking-error statistics: per-frame landmark error and the error-frequency table."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .kinematics import SkeletonModel, gaussian_centers, landmark_positions

THRESHOLDS = (15.0, 20.0, 25.0, 30.0, 45.0)


@dataclass(frozen=True)
class MetricsReport:
    per_frame: np.ndarray       # mean landmark error per frame
    mean_error: float
    std_error: float            # population standard deviation over frames
    thresholds: tuple
    percent_below: tuple        # % of frames with error strictly below each threshold


def percent_below(errors, thresholds=THRESHOLDS):
    errors = np.asarray(errors, float)
    if errors.size == 0:
        return tuple(0.0 for _ in thresholds)
    return tuple(100.0 * np.count_nonzero(errors < x) / errors.size for x in thresholds)


def report_from_errors(errors, thresholds=THRESHOLDS) -> MetricsReport:
    errors = np.asarray(errors, float).reshape(-1)
    if errors.size == 0:
        raise InvalidInputError("no frames to evaluate")
    thresholds = tuple(sorted(float(x) for x in thresholds))
    return MetricsReport(errors, float(errors.mean()), float(errors.std()), thresholds,
                         percent_below(errors, thresholds))


def frame_errors(tracked, truth, model: SkeletonModel, sites="landmarks"):
    """Mean Euclidean landmark distance per frame.

    ``sites="landmarks"`` uses the model's declared landmarks (Gaussian centres
    when none are declared); ``sites="centers"`` always uses Gaussian centres.
    """
    tracked, truth = list(tracked), list(truth)
    if len(tracked) != len(truth):
        raise InvalidInputError(f"{len(tracked)} tracked poses for {len(truth)} ground-truth poses")
    if sites not in ("landmarks", "centers"):
        raise InvalidInputError("sites must be 'landmarks' or 'centers'")
    where = landmark_positions if sites == "landmarks" else gaussian_centers
    return np.array([np.linalg.norm(where(model, a) - where(model, b), axis=1).mean()
                     for a, b in zip(tracked, truth)])


def compute_metrics(tracked, truth, model: SkeletonModel, thresholds=THRESHOLDS, sites="landmarks") -> MetricsReport:
    """Mean over landmarks per frame, then mean and spread over frames."""
    return report_from_errors(frame_errors(tracked, truth, model, sites), thresholds)
