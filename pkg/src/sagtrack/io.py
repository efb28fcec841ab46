"""Text file formats: model (JSON), cameras, image SoG, pose CSV, scene spec, metrics."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError, SagError
from .kinematics import Bone, Dof, Landmark, ModelGaussian, SkeletonModel
from .projection import CameraModel

MODEL_FORMAT = "sagtrack-model/1"
SCENE_FORMAT = "sagtrack-scene/1"


# ---------------------------------------------------------------------------
# model


def model_to_dict(model: SkeletonModel):
    names = [b.name for b in model.bones]
    return {
        "format": MODEL_FORMAT,
        "name": model.name,
        "bones": [
            {
                "name": b.name,
                "parent": None if b.parent < 0 else names[b.parent],
                "offset": b.offset.tolist(),
                "rest_rotation": b.rest_rotation.tolist(),
            }
            for b in model.bones
        ],
        "dofs": [
            {"name": d.name, "bone": names[d.bone], "type": d.type, "axis": d.axis.tolist(),
             "limits": [d.lower, d.upper]}
            for d in model.dofs
        ],
        "gaussians": [
            {"bone": names[g.bone], "mean": g.mean.tolist(), "covariance": g.covariance.tolist(),
             "color": g.color.tolist(), "weight": g.weight}
            for g in model.gaussians
        ],
        "landmarks": [
            {"name": l.name, "bone": names[l.bone], "position": l.position.tolist()} for l in model.landmarks
        ],
    }


def model_from_dict(data, path=None):
    if data.get("format") != MODEL_FORMAT:
        raise ParseError(f"unsupported model format tag {data.get('format')!r}", path)
    try:
        index = {}
        bones = []
        for i, b in enumerate(data["bones"]):
            index[b["name"]] = i
            parent = -1 if b.get("parent") is None else index[b["parent"]]
            bones.append(Bone(b["name"], parent, b.get("offset", [0, 0, 0]), b.get("rest_rotation", np.eye(3))))
        dofs = [Dof(d["name"], index[d["bone"]], d["axis"], d["type"], *d["limits"]) for d in data["dofs"]]
        gaussians = [
            ModelGaussian(index[g["bone"]], g["mean"], g["covariance"], g["color"], g.get("weight", 1.0))
            for g in data["gaussians"]
        ]
        landmarks = [Landmark(l["name"], index[l["bone"]], l["position"]) for l in data.get("landmarks", [])]
        return SkeletonModel(bones, dofs, gaussians, landmarks, data.get("name", "model"))
    except KeyError as exc:
        raise ParseError(f"missing or unknown key {exc}", path) from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), path) from exc


def save_model(model, path):
    data = model_to_dict(model)
    lines = ["{"]
    keys = list(data)
    for i, key in enumerate(keys):
        sep = "," if i < len(keys) - 1 else ""
        value = data[key]
        if isinstance(value, list):
            items = [json.dumps(item) for item in value]
            body = ",\n".join("  " + it for it in items)
            lines.append(f" {json.dumps(key)}: [\n{body}\n ]{sep}" if items else f" {json.dumps(key)}: []{sep}")
        else:
            lines.append(f" {json.dumps(key)}: {json.dumps(value)}{sep}")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    return model_from_dict(data, path)


# ---------------------------------------------------------------------------
# line-oriented numeric files


def _numeric_lines(path):
    """Yield (line_number, [floats]) for non-blank, non-comment lines."""
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            yield n, [float(tok) for tok in line.replace(",", " ").split()]
        except ValueError as exc:
            raise ParseError(f"non-numeric value ({exc})", path, n) from exc


def _fmt(x):
    return repr(float(x))


def save_cameras(cameras, path):
    lines = ["# K (row-major, 9)  R (row-major, 9)  t (3)  width height"]
    for cam in cameras:
        vals = list(cam.K.ravel()) + list(cam.R.ravel()) + list(cam.t)
        lines.append(" ".join(_fmt(v) for v in vals) + f" {cam.image_size[0]} {cam.image_size[1]}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_cameras(path):
    cams = []
    for n, vals in _numeric_lines(path):
        if len(vals) != 23:
            raise ParseError(f"expected 23 numbers per camera, got {len(vals)}", path, n)
        try:
            cams.append(CameraModel(np.reshape(vals[:9], (3, 3)), np.reshape(vals[9:18], (3, 3)),
                                    np.array(vals[18:21]), (int(vals[21]), int(vals[22]))))
        except SagError as exc:
            raise ParseError(str(exc), path, n) from exc
    if not cams:
        raise ParseError("no cameras found", path)
    return cams


def save_image_sog(sog, path):
    """One Gaussian per line: ``cx cy sigma h s v``; anisotropic sets use ``cx cy cxx cxy cyy h s v``."""
    w, h = sog.source_size
    iso = sog.isotropic
    lines = [f"# size {w} {h}", "# cx cy sigma h s v" if iso else "# cx cy cxx cxy cyy h s v"]
    for mean, cov, sigma, color in zip(sog.means, sog.covariances, sog.sigmas, sog.colors):
        shape = (sigma,) if iso else (cov[0, 0], cov[0, 1], cov[1, 1])
        lines.append(" ".join(_fmt(v) for v in (*mean, *shape, *color)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_image_sog(path):
    from .image_model import ImageSoG, precompute_self_overlap

    size = (0, 0)
    means, covs, colors = [], [], []
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if line.startswith("# size"):
            try:
                size = tuple(int(v) for v in line.split()[2:4])
            except ValueError as exc:
                raise ParseError("bad size header", path, n) from exc
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals = [float(t) for t in line.split()]
        except ValueError as exc:
            raise ParseError(f"non-numeric value ({exc})", path, n) from exc
        if len(vals) == 6:
            if not vals[2] > 0:
                raise ParseError("sigma must be positive", path, n)
            cov = vals[2] ** 2 * np.eye(2)
        elif len(vals) == 8:
            cov = np.array([[vals[2], vals[3]], [vals[3], vals[4]]])
            if not (vals[2] > 0 and vals[2] * vals[4] - vals[3] ** 2 > 0):
                raise ParseError("covariance must be positive definite", path, n)
        else:
            raise ParseError(f"expected 6 (cx cy sigma h s v) or 8 (cx cy cxx cxy cyy h s v) numbers, got {len(vals)}",
                             path, n)
        means.append(vals[:2])
        covs.append(cov)
        colors.append(vals[-3:])
    sog = ImageSoG(np.array(means).reshape(-1, 2), np.array(covs).reshape(-1, 2, 2),
                   np.array(colors).reshape(-1, 3), size)
    return precompute_self_overlap(sog)


def save_poses(poses, path, dof_names):
    lines = ["frame," + ",".join(dof_names)]
    for i, theta in enumerate(poses):
        lines.append(f"{i}," + ",".join(_fmt(v) for v in theta))
    Path(path).write_text("\n".join(lines) + "\n")


def load_poses(path, n_dofs=None):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("frame"):
        raise ParseError("missing header row 'frame,...'", path, 1)
    width = len(lines[0].split(",")) - 1
    poses = []
    for n, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) - 1 != width:
            raise ParseError(f"expected {width} DOF values, got {len(parts) - 1}", path, n)
        try:
            poses.append(np.array([float(v) for v in parts[1:]]))
        except ValueError as exc:
            raise ParseError(f"non-numeric value ({exc})", path, n) from exc
    if n_dofs is not None and width != n_dofs:
        raise ParseError(f"pose file has {width} DOFs, model has {n_dofs}", path, 1)
    return poses


def format_metrics(report):
    """Aligned text table followed by key=value lines."""
    out = [f"{'error < x mm':>14} {'% frames':>9}"]
    for x, pct in zip(report.thresholds, report.percent_below):
        out.append(f"{x:>14g} {pct:>9.1f}")
    out.append("")
    out.append(f"mean_error_mm={report.mean_error:.6g}")
    out.append(f"std_error_mm={report.std_error:.6g}")
    out.append(f"frames={len(report.per_frame)}")
    for x, pct in zip(report.thresholds, report.percent_below):
        out.append(f"pct_below_{x:g}={pct:.6g}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# scene spec


def default_scene_spec():
    """Noiseless 5-camera, 10-frame scene: the hand curls its fingers while turning slightly."""
    curl = {f"{f}_flex{k}": 0.3 for f in ("index", "middle", "ring", "pinky") for k in (1, 2, 3)}
    curl.update({"thumb_flex2": 0.2, "rx": 0.1, "ry": -0.1, "tz": 5.0})
    return {
        "format": SCENE_FORMAT,
        "model": "default",
        "cameras": {"rig": "default", "count": 5},
        "trajectory": {"type": "linear", "start": {}, "end": curl, "frames": 10},
        "noise": {"mean_jitter_px": 0.0, "color_jitter": 0.0, "dropout": 0.0},
        "image_model": "exact",
        "seed": 0,
    }


def _pose_from_spec(value, model, path):
    if isinstance(value, dict):
        theta = np.zeros(model.n_dofs)
        names = model.dof_names
        for k, v in value.items():
            if k not in names:
                raise ParseError(f"unknown DOF {k!r} in scene trajectory", path)
            theta[names.index(k)] = float(v)
        return theta
    theta = np.asarray(value, float)
    if theta.shape != (model.n_dofs,):
        raise ParseError(f"pose needs {model.n_dofs} values, got {theta.size}", path)
    return theta


def scene_from_dict(data, path=None, base_dir=None):
    """Build a SyntheticScene from a parsed scene spec. Relative file names resolve against ``base_dir``."""
    from .hand import default_hand_model
    from .synth import NoiseConfig, SyntheticScene, default_rig, linear_trajectory

    base = Path(base_dir) if base_dir is not None else Path(".")
    try:
        if data.get("format") != SCENE_FORMAT:
            raise ParseError(f"expected format {SCENE_FORMAT!r}", path)
        m = data.get("model", "default")
        model = default_hand_model() if m == "default" else load_model(base / m)
        c = data.get("cameras", {"rig": "default"})
        if isinstance(c, str):
            cameras = load_cameras(base / c)
        else:
            rig = {k: c[k] for k in ("distance", "focal") if k in c}
            if "image_size" in c:
                rig["image_size"] = tuple(c["image_size"])
            cameras = default_rig(int(c.get("count", 5)), **rig)
        t = data.get("trajectory", {"type": "static", "frames": 1})
        kind = t.get("type", "static")
        if kind == "static":
            pose = _pose_from_spec(t.get("pose", {}), model, path)
            traj = [pose] * int(t.get("frames", 1))
        elif kind == "linear":
            traj = linear_trajectory(model, _pose_from_spec(t.get("start", {}), model, path),
                                     _pose_from_spec(t.get("end", {}), model, path), int(t.get("frames", 10)))
        elif kind == "file":
            traj = load_poses(base / t["path"], model.n_dofs)
        else:
            raise ParseError(f"unknown trajectory type {kind!r}", path)
        if not traj:
            raise ParseError("scene has no frames", path)
        noise = NoiseConfig(**data.get("noise", {}))
        image_model = data.get("image_model", "exact")
        if image_model not in ("exact", "isotropic"):
            raise ParseError("image_model must be 'exact' or 'isotropic'", path)
        return SyntheticScene(model, traj, cameras, noise, image_model == "isotropic", int(data.get("seed", 0)))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scene spec ({exc})", path) from exc


def load_scene(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    return scene_from_dict(data, path, Path(path).parent)


def save_scene_spec(data, path):
    Path(path).write_text(json.dumps(data, indent=1) + "\n")
