"""Closed-loop tactile servoing in the simulator.

Each control step senses, encodes, asks the inverse-dynamics controller for
an end-effector twist, clips it, converts it to the base frame and moves the
finger for dt. Success is judged on ground-truth geodesic distance between
the contact point and the target contact point.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from . import dynamics, kernels
from .datapipe import ee_to_base_twist
from .skin_sim import SensorConfig, pose_for_contact, sense, step_pose_base


@dataclass
class ServoRunConfig:
    start_sigma: float = 0.03
    start_phi: float = 0.0
    target_sigma: float = 0.03
    target_phi: float = 0.5
    depth: float = 0.001
    controller: str = "nj"
    # None uses the value stored with the dynamics model
    beta: float | None = None
    alpha: float | None = None
    max_steps: int = 200
    dt: float = 0.31
    tolerance: float = 0.003
    lin_max: float = 0.05
    ang_max: float = 0.3
    # causal first-order smoothing of the raw samples; 0 disables it
    smoothing: float = 0.5
    noise_std: float = 4e-4
    max_lost_steps: int = 5
    mount_seed: int = 0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must be in [0, 1)")
        if self.controller not in ("ll", "ng", "nj"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass
class ServoLog:
    z_target: np.ndarray
    s: list = field(default_factory=list)
    z: list = field(default_factory=list)
    latent_dist: list = field(default_factory=list)
    geo_dist: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    contact: list = field(default_factory=list)
    success_step: int | None = None
    aborted: bool = False
    reason: str = ""

    @property
    def success(self):
        return self.success_step is not None and not self.aborted

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "latent_dist", "geo_dist", "v_x", "v_y", "v_z", "w_x", "w_y", "w_z"])
            for k, (ld, gd, a) in enumerate(zip(self.latent_dist, self.geo_dist, self.actions)):
                w.writerow([k, repr(float(ld)), repr(float(gd))] + [repr(float(v)) for v in a])


def clip_action(a, lin_max, ang_max):
    """Per-part norm clip of a twist (v, w)."""
    a = np.array(a, dtype=float)
    for sl, m in ((slice(0, 3), lin_max), (slice(3, 6), ang_max)):
        n = np.linalg.norm(a[sl])
        if n > m:
            a[sl] *= m / n
    return a


def _controller(model, cfg, z_T, z, z_prev, a_prev):
    zt, zT = z[None], z_T[None]
    if cfg.controller == "ll":
        return dynamics.id_ll(model, zT, zt, cfg.dt, cfg.beta)[0]
    if cfg.controller == "ng":
        return dynamics.id_ng(model, zT, zt, cfg.dt, cfg.alpha, max(cfg.lin_max, cfg.ang_max))[0]
    zp = None if z_prev is None else z_prev[None]
    ap = None if a_prev is None else a_prev[None]
    return dynamics.id_nj(model, zT, zt, zp, ap, cfg.dt, cfg.beta)[0]


def servo_run(encoder, model, surface, cfg: ServoRunConfig, rng=None, sensor=None) -> ServoLog:
    """Run ``cfg.max_steps`` control steps (or until contact is lost for too long)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    sensor = sensor or SensorConfig(noise_std=cfg.noise_std)
    anchor = np.zeros(3)
    R0 = kernels.so3_exp(np.random.default_rng(cfg.mount_seed).normal(0, 0.6, 3))
    tgt_pose = pose_for_contact(surface, anchor, cfg.target_sigma, cfg.target_phi, cfg.depth, R0)
    target = sense(surface, tgt_pose, anchor, SensorConfig(sensor.kernel_width, sensor.pressure_gain, 0.0))
    z_T = encoder.encode(target.s)[0]
    target_field = surface.distance_field(target.contact.contact_point)

    pose = pose_for_contact(surface, anchor, cfg.start_sigma, cfg.start_phi, cfg.depth, R0)
    log = ServoLog(z_target=z_T)
    s_filt = None
    z_prev = a_prev = None
    lost = 0
    for step in range(cfg.max_steps + 1):
        smp = sense(surface, pose, anchor, sensor, rng)
        s_filt = smp.s if s_filt is None or cfg.smoothing == 0 else (
            cfg.smoothing * s_filt + (1.0 - cfg.smoothing) * smp.s)
        z = encoder.encode(s_filt)[0]
        geo = float(surface.field_at(target_field, smp.contact.contact_point[None])[0])
        log.s.append(s_filt.copy())
        log.z.append(z)
        log.latent_dist.append(float(np.linalg.norm(z - z_T)))
        log.geo_dist.append(geo)
        log.contact.append(smp.contact.contact_point.copy())
        if log.success_step is None and smp.contact.in_contact and geo <= cfg.tolerance:
            log.success_step = step
        lost = 0 if smp.contact.in_contact else lost + 1
        if lost > cfg.max_lost_steps:
            log.aborted = True
            log.reason = f"contact lost for {lost} steps at step {step}"
            log.actions.append(np.zeros(6))
            break
        if step == cfg.max_steps:
            log.actions.append(np.zeros(6))
            break
        a = _controller(model, cfg, z_T, z, z_prev, a_prev)
        if not np.all(np.isfinite(a)):
            a = np.zeros(6)
        a = clip_action(a, cfg.lin_max, cfg.ang_max)
        log.actions.append(a)
        pose = step_pose_base(pose, ee_to_base_twist(a, pose.rotation), cfg.dt)
        z_prev, a_prev = z, a
    return log


def monotone_windows(geo, window=20, tolerance=0.0):
    """True if g[k + window] <= g[k] for every window start, ignoring ends inside tolerance."""
    g = np.asarray(geo)
    if len(g) <= window:
        return bool(g[-1] <= g[0] or g[-1] <= tolerance)
    later, earlier = g[window:], g[:-window]
    return bool(np.all((later <= earlier) | (later <= tolerance)))


def reachable_targets(surface, kind, seed, n=None):
    """Random (start, target) surface coordinates reachable by rotation or translation.

    Rotation-reachable pairs share the finger-x latitude (rolling about the
    finger axis changes phi); translation-reachable pairs share phi (sliding
    along the finger axis changes sigma).
    """
    rng = np.random.default_rng(seed)
    cap = surface.cap_arclength
    if kind == "rotation":
        sigma = cap + rng.uniform(0.004, 0.016)
        d = rng.uniform(math.radians(25), math.radians(50)) * rng.choice([-1, 1])
        phi0 = rng.uniform(-math.radians(60), math.radians(60) - d) if d > 0 else \
            rng.uniform(-math.radians(60) - d, math.radians(60))
        return sigma, phi0, sigma, phi0 + d
    if kind == "translation":
        phi = rng.uniform(-math.radians(40), math.radians(40))
        d = rng.uniform(0.005, 0.010) * rng.choice([-1, 1])
        s0 = rng.uniform(cap + 0.003, cap + 0.019 - d) if d > 0 else rng.uniform(cap + 0.003 - d, cap + 0.019)
        return s0, phi, s0 + d, phi
    raise ValueError(f"unknown target kind {kind!r}")


def config_dict(cfg: ServoRunConfig):
    return asdict(cfg)
