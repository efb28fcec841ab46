import numpy as np
import pytest

from sagtrack.errors import InvalidInputError
from sagtrack.io import format_metrics
from sagtrack.metrics import THRESHOLDS, compute_metrics, frame_errors, percent_below, report_from_errors
from sagtrack.synth import random_pose


def test_identity_is_zero(hand):
    poses = [random_pose(hand, np.random.default_rng(i)) for i in range(4)]
    rep = compute_metrics(poses, poses, hand)
    assert rep.mean_error == 0.0 and rep.percent_below == (100.0,) * 5
    assert rep.thresholds == THRESHOLDS


def test_counting_example():
    rep = report_from_errors([10.0, 20.0, 30.0])
    assert rep.percent_below[0] == pytest.approx(100 / 3)
    assert rep.mean_error == 20.0 and rep.std_error == pytest.approx(np.sqrt(200 / 3))


def test_monotone_in_threshold():
    errs = np.random.default_rng(0).exponential(20, 200)
    pct = percent_below(errs)
    assert all(a <= b for a, b in zip(pct, pct[1:]))
    assert all(0 <= p <= 100 for p in pct)


def test_translation_error_is_exact(hand):
    a = hand.rest_pose()
    b = a.copy()
    b[:3] += [3.0, 4.0, 0.0]
    assert frame_errors([a], [b], hand)[0] == pytest.approx(5.0)
    assert frame_errors([a], [b], hand, sites="centers")[0] == pytest.approx(5.0)


def test_errors(hand):
    with pytest.raises(InvalidInputError):
        compute_metrics([hand.rest_pose()], [], hand)
    with pytest.raises(InvalidInputError):
        frame_errors([hand.rest_pose()], [hand.rest_pose()], hand, sites="joints")


def test_format():
    text = format_metrics(report_from_errors([10.0, 20.0, 30.0]))
    assert "pct_below_15=33.3333" in text and "mean_error_mm=20" in text
