"""Multi-camera articulated pose tracking with sums of anisotropic 3D Gaussians.

Submodules:
  gaussian      Gaussian types, color similarity, overlap integral
  projection    cameras and exact perspective projection of 3D Gaussians
  kinematics    skeleton, forward kinematics, pose Jacobians
  image_model   quad-tree clustering of frames into image Gaussians
  energy        clamped similarity energy and its analytic gradient
  tracker       per-frame optimizer and the tracking loop
  calibration   greedy shape calibration
  synth, metrics, overlay, bench, io, cli   harness
"""

__version__ = "0.1.0"
