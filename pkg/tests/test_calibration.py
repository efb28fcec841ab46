import numpy as np
import pytest

from sagtrack.calibration import (CalibrationConfig, ShapeParams, apply_shape, calibrate_model,
                                  calibration_objective, fit_shape, load_shape, save_shape, scale_axes)
from sagtrack.energy import EnergyConfig
from sagtrack.errors import InvalidInputError, ParseError
from sagtrack.kinematics import forward_kinematics
from sagtrack.synth import SyntheticScene, random_pose, synth_render


def target_frames(model, target, rig, n=2, seed=0):
    rng = np.random.default_rng(seed)
    poses = [random_pose(model, rng) for _ in range(n)]
    scene = SyntheticScene(target, poses, rig, isotropic=False)
    return [(p, synth_render(scene, t)) for t, p in enumerate(poses)]


def test_zero_passes_returns_base(hand, rig):
    frames = target_frames(hand, hand, rig, n=1)
    assert calibrate_model(hand, frames, EnergyConfig(rig), CalibrationConfig(passes=0)) is hand


def test_identity_shape_is_identity(hand):
    m = apply_shape(hand, ShapeParams())
    for a, b in zip(m.gaussians, hand.gaussians):
        assert np.allclose(a.mean, b.mean) and np.allclose(a.covariance, b.covariance)
    for a, b in zip(m.bones, hand.bones):
        assert np.allclose(a.offset, b.offset)


def test_scale_axes():
    cov = np.diag([1.0, 4.0, 9.0])
    out = scale_axes(cov, [1.0, 1.0, 2.0])
    assert np.allclose(out, np.diag([1.0, 4.0, 36.0]))


def test_global_scale_scales_everything(hand):
    m = apply_shape(hand, ShapeParams(scale=1.2))
    theta = random_pose(hand, np.random.default_rng(1))
    theta[:3] = 0
    _, t0 = forward_kinematics(hand, theta)
    _, t1 = forward_kinematics(m, theta)
    assert np.allclose(t1, 1.2 * t0)


def test_invalid_shape_rejected(hand):
    with pytest.raises(InvalidInputError):
        apply_shape(hand, ShapeParams(scale=0.0))
    with pytest.raises(InvalidInputError):
        CalibrationConfig(passes=-1)
    with pytest.raises(InvalidInputError):
        fit_shape(hand, [], None)


def test_recovers_scaled_axis(hand, rig):
    g, axis = 5, 2
    factors = np.ones((len(hand.gaussians), 3))
    factors[g, axis] = 1.3
    target = apply_shape(hand, ShapeParams(axes=factors))
    frames = target_frames(hand, target, rig)
    ecfg = EnergyConfig(rig)
    seen = []
    params = fit_shape(hand, frames, ecfg, CalibrationConfig(), callback=lambda n, v, o: seen.append(o))
    assert params.axes[g, axis] == pytest.approx(1.3, rel=0.10)
    assert np.all(np.diff(seen) > 0)
    base = calibration_objective(hand, frames, ecfg)
    assert calibration_objective(apply_shape(hand, params), frames, ecfg) >= base


def test_cyclic_rule_monotone(hand, rig):
    frames = target_frames(hand, apply_shape(hand, ShapeParams(scale=1.05)), rig, n=1)
    seen = []
    cfg = CalibrationConfig(passes=2, rule="cyclic", calibrate_axes=False)
    model = calibrate_model(hand, frames, EnergyConfig(rig), cfg, callback=lambda n, v, o: seen.append(o))
    assert len(model.gaussians) == 17
    assert np.all(np.diff(seen) > 0)


def test_shape_file_round_trip(tmp_path):
    p = ShapeParams(1.1, 0.9, 1.05, np.full((17, 3), 1.2))
    save_shape(p, tmp_path / "s.json")
    q = load_shape(tmp_path / "s.json")
    assert (q.scale, q.palm_width, q.finger_length) == (1.1, 0.9, 1.05)
    assert np.array_equal(q.axes, p.axes)
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ParseError):
        load_shape(tmp_path / "bad.json")
    (tmp_path / "broken.json").write_text('{\n"format": \n')
    with pytest.raises(ParseError) as err:
        load_shape(tmp_path / "broken.json")
    assert err.value.line is not None
