"""Synthetic tactile fingertip.

The skin is a surface of revolution about the finger x-axis: a superellipsoid
cap (``x >= 0``) on a cylinder of radius ``radius`` reaching back to
``x = -cyl_length``. Points in the finger frame use cylindrical coordinates
``(x, rho, phi)`` with ``y = rho sin(phi)`` and ``z = -rho cos(phi)``, so
``phi = 0`` is the pad centre line. On the surface we also use the profile
arclength ``sigma`` measured from the tip.

Contact is a point anchor fixed in the world. The contact point is the
surface point nearest to the anchor; pressure is proportional to the
penetration depth; electrodes respond with a Gaussian kernel of surface
geodesic distance.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .config import read_kv, write_kv

TACTILE_HZ = 100
TWIST_HZ = 300


# ---------------------------------------------------------------------------
# surface


@dataclass(frozen=True)
class SurfaceParams:
    radius: float = 0.008
    cap_length: float = 0.008
    cyl_length: float = 0.024
    exponent: float = 2.0
    n_electrodes: int = 19
    electrode_phi_max: float = math.radians(100.0)
    electrode_base_margin: float = 0.003
    mesh_spacing: float = 0.0004

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for name, f in cls.__dataclass_fields__.items():
            if name in d:
                kw[name] = int(d[name]) if f.type == "int" else float(d[name])
        return cls(**kw)


class SkinSurface:
    """Fingertip geometry, electrode layout and the dense geodesic mesh."""

    STENCIL = 3

    def __init__(self, params: SurfaceParams | None = None):
        p = params or SurfaceParams()
        if p.n_electrodes < 3:
            raise ValueError("need at least 3 electrodes")
        if min(p.radius, p.cap_length, p.cyl_length, p.mesh_spacing) <= 0:
            raise ValueError("surface dimensions must be positive")
        if p.exponent < 2.0:
            raise ValueError("cap exponent must be >= 2 (convex, smooth cap)")
        self.params = p
        self.radius = p.radius
        self.cap_length = p.cap_length
        self.cyl_length = p.cyl_length
        self.exponent = p.exponent

        # profile table: cap parameter t -> (x, rho, sigma)
        t = np.linspace(0.0, 0.5 * math.pi, 20001)
        x, rho = self._cap_xr(t)
        seg = np.hypot(np.diff(x), np.diff(rho))
        self._t_tab = t
        self._sigma_tab = np.concatenate([[0.0], np.cumsum(seg)])
        self.cap_arclength = float(self._sigma_tab[-1])
        self.profile_length = self.cap_arclength + self.cyl_length

        self._build_mesh()
        self.electrodes = self._fibonacci_electrodes()
        self.electrode_fields = np.stack(
            [self.distance_field(e) for e in self.electrodes]
        )

    # -- profile ------------------------------------------------------------

    def _cap_xr(self, t):
        ct = np.clip(np.cos(t), 0.0, None)
        st = np.clip(np.sin(t), 0.0, None)
        e = 2.0 / self.exponent
        return self.cap_length * ct**e, self.radius * st**e

    def profile_at(self, sigma):
        """(x, rho) of the profile curve at arclength ``sigma`` from the tip."""
        sigma = np.asarray(sigma, dtype=float)
        on_cap = sigma <= self.cap_arclength
        t = np.interp(sigma, self._sigma_tab, self._t_tab)
        xc, rc = self._cap_xr(t)
        x = np.where(on_cap, xc, self.cap_arclength - sigma)
        rho = np.where(on_cap, rc, self.radius)
        return x, rho

    def point(self, sigma, phi):
        """Finger-frame surface point(s) for surface coordinates."""
        x, rho = self.profile_at(sigma)
        phi = np.asarray(phi, dtype=float)
        return np.stack([x * np.ones_like(phi), rho * np.sin(phi), -rho * np.cos(phi)], axis=-1)

    def normal(self, sigma, phi):
        """Outward unit normal at surface coordinates."""
        h = 1e-7
        s = np.clip(np.asarray(sigma, dtype=float), h, self.profile_length - h)
        x0, r0 = self.profile_at(s - h)
        x1, r1 = self.profile_at(s + h)
        dx, dr = x1 - x0, r1 - r0
        # tangent (dx, dr) rotated so that it points away from the axis
        nx, nr = -dr, dx
        nx, nr = -nx, -nr
        norm = np.hypot(nx, nr)
        nx, nr = nx / norm, nr / norm
        phi = np.asarray(phi, dtype=float)
        return np.stack([nx * np.ones_like(phi), nr * np.sin(phi), -nr * np.cos(phi)], axis=-1)

    def implicit(self, p):
        """Implicit surface function; zero on the skin.

        Points behind the finger base (``x < -cyl_length``) get ``inf``.
        """
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x = p[:, 0]
        rho = np.hypot(p[:, 1], p[:, 2])
        with np.errstate(invalid="ignore"):
            cap = (np.abs(x) / self.cap_length) ** self.exponent + (rho / self.radius) ** self.exponent - 1.0
        cyl = rho / self.radius - 1.0
        out = np.where(x > 0, cap, cyl)
        return np.where(x < -self.cyl_length - 1e-12, np.inf, out)

    def inside(self, p):
        return self.implicit(p) < 0.0

    def to_surface_coords(self, p):
        """(sigma, phi) of points assumed to lie on the surface."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x = p[:, 0]
        rho = np.hypot(p[:, 1], p[:, 2])
        phi = np.arctan2(p[:, 1], -p[:, 2])
        t = kernels.nearest_cap_param(
            np.ascontiguousarray(x), np.ascontiguousarray(rho),
            self.cap_length, self.radius, self.exponent,
        )
        sig_cap = np.interp(t, self._t_tab, self._sigma_tab)
        sigma = np.where(x > 0, sig_cap, self.cap_arclength - x)
        return sigma, phi

    def nearest(self, q):
        """Nearest surface points to finger-frame queries.

        Returns ``(points, sigma, phi, distance)``.
        """
        q = np.atleast_2d(np.asarray(q, dtype=float))
        xq = np.ascontiguousarray(q[:, 0])
        rq = np.ascontiguousarray(np.hypot(q[:, 1], q[:, 2]))
        phi = np.arctan2(q[:, 1], -q[:, 2])

        xc = np.clip(xq, -self.cyl_length, 0.0)
        d2_cyl = (xc - xq) ** 2 + (self.radius - rq) ** 2
        t = kernels.nearest_cap_param(xq, rq, self.cap_length, self.radius, self.exponent)
        xt, rt = self._cap_xr(t)
        d2_cap = (xt - xq) ** 2 + (rt - rq) ** 2
        use_cap = d2_cap < d2_cyl
        sigma = np.where(
            use_cap,
            np.interp(t, self._t_tab, self._sigma_tab),
            self.cap_arclength - xc,
        )
        x = np.where(use_cap, xt, xc)
        rho = np.where(use_cap, rt, self.radius)
        pts = np.stack([x, rho * np.sin(phi), -rho * np.cos(phi)], axis=-1)
        dist = np.sqrt(np.minimum(d2_cap, d2_cyl))
        return pts, sigma, phi, dist

    # -- mesh and geodesics ---------------------------------------------------

    def _build_mesh(self):
        h = self.params.mesh_spacing
        nr = int(math.ceil(self.profile_length / h)) + 1
        nc = int(math.ceil(2 * math.pi * self.radius / h))
        self.mesh_shape = (nr, nc)
        self._hs = self.profile_length / (nr - 1)
        self._hp = 2 * math.pi / nc
        sig = np.arange(nr) * self._hs
        phi = -math.pi + np.arange(nc) * self._hp
        S, P = np.meshgrid(sig, phi, indexing="ij")
        self.mesh_vertices = self.point(S.ravel(), P.ravel())

        # Support radius of a surface point: every vertex within it seeds or
        # reads a distance field.
        self._support_r = 1.4 * max(self._hs, self.radius * self._hp)
        # Stencil: row offsets up to STENCIL; column offsets widen near the pole
        # where rings shrink. Any two vertices closer than twice the support
        # radius must share an edge (arc <= pi/2 chord on a ring).
        k = self.STENCIL
        _, ring_rho = self.profile_at(sig)
        with np.errstate(divide="ignore"):
            kcol = np.ceil(max(k * self._hs, 2 * self._support_r) * 0.5 * math.pi
                           / (ring_rho * self._hp))
        kcol = np.clip(np.nan_to_num(kcol, posinf=nc), k, nc // 2).astype(int)
        jj = np.arange(nc)
        src, dst = [], []
        for i in range(nr):
            for di in range(-k, k + 1):
                ti = i + di
                if ti < 0 or ti >= nr:
                    continue
                kk = max(kcol[i], kcol[ti])
                dj = np.arange(-kk, kk + 1)
                if di == 0:
                    dj = dj[dj != 0]
                tj = (jj[:, None] + dj[None, :]) % nc
                s_ = np.broadcast_to((i * nc + jj)[:, None], tj.shape).ravel()
                d_ = (ti * nc + tj).ravel()
                src.append(s_)
                dst.append(d_)
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        # wide stencils on small rings can wrap onto the same vertex twice
        pair = np.unique(np.stack([src, dst], axis=1), axis=0)
        src, dst = pair[:, 0], pair[:, 1]
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        w = np.linalg.norm(self.mesh_vertices[src] - self.mesh_vertices[dst], axis=1)
        self.mesh_indptr = np.searchsorted(src, np.arange(nr * nc + 1)).astype(np.int64)
        self.mesh_indices = dst.astype(np.int64)
        self.mesh_weights = w
        # pole copies in row 0 are one point; index only the first
        keep = np.arange(nr * nc)
        if ring_rho[0] < 1e-12:
            keep = keep[nc - 1:]
            keep[0] = 0
        self._tree_ids = keep
        self._tree = cKDTree(self.mesh_vertices[keep])

    def mesh_adjacency(self):
        return self.mesh_indptr, self.mesh_indices, self.mesh_weights

    def _support(self, pts):
        """Mesh vertices within the support radius of each point.

        Returns ids (n, K) and chord lengths (n, K); unused slots hold the id
        ``n_vertices`` and length ``inf``.
        """
        pts = np.atleast_2d(pts)
        nv = self.mesh_vertices.shape[0]
        ntree = len(self._tree_ids)
        k = 16
        dist, idx = self._tree.query(pts, k=k, distance_upper_bound=self._support_r)
        full = np.isfinite(dist[:, -1])
        while np.any(full) and k < ntree:
            k = min(4 * k, ntree)
            d2, i2 = self._tree.query(pts[full], k=k, distance_upper_bound=self._support_r)
            pad = k - dist.shape[1]
            dist = np.pad(dist, ((0, 0), (0, pad)), constant_values=np.inf)
            idx = np.pad(idx, ((0, 0), (0, pad)), constant_values=ntree)
            dist[full], idx[full] = d2, i2
            full = np.zeros(len(pts), bool)
            full[np.flatnonzero(np.isfinite(dist[:, -1]))] = True
            if k == ntree:
                break
        empty = ~np.isfinite(dist[:, 0])
        if np.any(empty):
            d1, i1 = self._tree.query(pts[empty], k=1)
            dist[empty, 0], idx[empty, 0] = d1, i1
        ids = np.append(self._tree_ids, nv)[idx]
        return ids, dist

    def check_on_surface(self, p, tol=1e-6):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        _, _, _, dist = self.nearest(p)
        bad = (dist > tol) | ~np.isfinite(self.implicit(p))
        if np.any(bad):
            raise ValueError(f"{int(bad.sum())} point(s) are off the skin surface (tol {tol} m)")

    def distance_field(self, p):
        """Mesh geodesic distance from surface point ``p`` to every mesh vertex."""
        p = np.asarray(p, dtype=float).reshape(1, 3)
        ids, hop = self._support(p)
        ok = np.isfinite(hop[0])
        return kernels.dijkstra_csr(
            self.mesh_indptr, self.mesh_indices, self.mesh_weights,
            ids[0, ok].astype(np.int64), hop[0, ok],
        )

    def field_at(self, field_, pts, sigma=None, phi=None):
        """Evaluate a distance field at surface points (min over support vertices)."""
        ids, hop = self._support(pts)
        f = np.asarray(field_)
        f = np.concatenate([f, np.full(f.shape[:-1] + (1,), np.inf)], axis=-1)
        if f.ndim == 1:
            return np.min(f[ids] + hop, axis=1)
        return np.min(f[:, ids] + hop[None], axis=2)

    def _fibonacci_electrodes(self):
        """Area-uniform Fibonacci lattice over the pad side of the skin."""
        p = self.params
        n = p.n_electrodes
        s_max = self.profile_length - p.electrode_base_margin
        s = np.linspace(0.0, s_max, 4001)
        _, rho = self.profile_at(s)
        area = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(s))])
        area /= area[-1]
        golden = 0.5 * (math.sqrt(5.0) - 1.0)
        k = np.arange(n)
        u = (k + 0.5) / n
        v = (k * golden) % 1.0
        sig = np.interp(u, area, s)
        phi = -p.electrode_phi_max + 2.0 * p.electrode_phi_max * v
        return self.point(sig, phi)

    # -- io -----------------------------------------------------------------

    def save_config(self, path):
        write_kv(path, self.params.to_dict(), header="skin surface")

    @classmethod
    def from_config(cls, path):
        return cls(SurfaceParams.from_dict(read_kv(path)))


def surface_geodesic_oracle(surface: SkinSurface, p1, p2) -> float:
    """Mesh geodesic distance between two surface points (meters)."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    surface.check_on_surface(np.stack([p1, p2]))
    if np.array_equal(p1, p2):
        return 0.0
    f = surface.distance_field(p1)
    return float(surface.field_at(f, p2[None])[0])


# ---------------------------------------------------------------------------
# poses and sensing


@dataclass
class FingerPose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def to_world(self, q):
        return q @ self.rotation.T + self.translation

    def to_finger(self, w):
        return (np.asarray(w) - self.translation) @ self.rotation

    def flat(self):
        return np.concatenate([self.rotation.ravel(), self.translation])


def step_pose(pose: FingerPose, a, dt: float) -> FingerPose:
    """Integrate an end-effector-frame twist ``a = (v, w)`` for ``dt`` seconds."""
    a = np.asarray(a, dtype=float)
    R = pose.rotation
    return FingerPose(
        R @ kernels.so3_exp(a[3:] * dt),
        pose.translation + R @ a[:3] * dt,
    )


def step_pose_base(pose: FingerPose, twist_base, dt: float) -> FingerPose:
    """Integrate a base-frame twist held constant for ``dt``."""
    tw = np.asarray(twist_base, dtype=float)
    return FingerPose(
        kernels.so3_exp(tw[3:] * dt) @ pose.rotation,
        pose.translation + tw[:3] * dt,
    )


@dataclass(frozen=True)
class SensorConfig:
    kernel_width: float = 0.006
    pressure_gain: float = 20.0
    noise_std: float = 0.0

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__ if k in d})


@dataclass
class ContactState:
    in_contact: bool
    contact_point: np.ndarray
    pressure: float


@dataclass
class TactileSample:
    timestamp: float
    s: np.ndarray
    p: float
    contact: ContactState
    pose: FingerPose


@dataclass
class SenseBatch:
    s: np.ndarray
    p: np.ndarray
    contact: np.ndarray
    in_contact: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray


def sense_batch(surface, rots, trans, anchor, sensor=None, rng=None) -> SenseBatch:
    """Vectorised sensing for many poses against one world anchor."""
    sensor = sensor or SensorConfig()
    rots = np.asarray(rots, dtype=float).reshape(-1, 3, 3)
    trans = np.asarray(trans, dtype=float).reshape(-1, 3)
    q = np.einsum("nji,nj->ni", rots, np.asarray(anchor, dtype=float)[None] - trans)
    pts, sigma, phi, dist = surface.nearest(q)
    inside = surface.inside(q)
    depth = np.where(inside, dist, 0.0)
    p = sensor.pressure_gain * depth

    g = surface.field_at(surface.electrode_fields, pts, sigma, phi).T  # (n, E)
    k = np.exp(-(g**2) / (2.0 * sensor.kernel_width**2))
    s = -p[:, None] * (k + 1.0 - k.mean(axis=1, keepdims=True))
    if sensor.noise_std > 0:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.normal(0.0, sensor.noise_std, size=s.shape)
        s = s + noise - noise.mean(axis=1, keepdims=True)
    return SenseBatch(s=s, p=p, contact=pts, in_contact=inside, sigma=sigma, phi=phi)


def sense(surface, pose: FingerPose, anchor, sensor=None, rng=None, timestamp=0.0) -> TactileSample:
    b = sense_batch(surface, pose.rotation, pose.translation, anchor, sensor, rng)
    contact = ContactState(bool(b.in_contact[0]), b.contact[0], float(b.p[0]))
    return TactileSample(timestamp, b.s[0], float(b.p[0]), contact, pose)


def pose_for_contact(surface, anchor, sigma, phi, depth, rotation=None):
    """Finger pose placing ``anchor`` ``depth`` below the surface point (sigma, phi)."""
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    q = surface.point(sigma, phi) - depth * surface.normal(sigma, phi)
    return FingerPose(R, np.asarray(anchor, dtype=float) - R @ q)


# ---------------------------------------------------------------------------
# scripted demonstrations


@dataclass(frozen=True)
class DemoParams:
    region: int = 0
    n_regions: int = 7
    depth: float = 0.001
    clearance: float = 0.0015
    approach_speed: float = 0.003
    rot_speed: float = 0.3
    rot_extent: float = math.radians(100.0)
    trans_speed: float = 0.005
    trans_extent: float = 0.016
    rot_x_range: tuple = (-0.018, 0.0055)
    trans_phi_range: tuple = (math.radians(-45.0), math.radians(45.0))
    trans_x_start: float = -0.001
    hold: float = 1.0
    gap: float = 0.6
    jitter_lin: float = 0.0015
    jitter_ang: float = 0.08
    # slow sideways wander across the sweep direction: finger-x offset (m) for
    # rotational demos, roll angle (rad) for translational ones
    wander_x: float = 0.0015
    wander_phi: float = 0.2
    wander_hz: tuple = (0.08, 0.25)
    region_spread: float = 0.5


@dataclass
class RawDemo:
    kind: str
    region: int
    seed: int
    t: np.ndarray  # 300 Hz
    rotations: np.ndarray  # (m, 3, 3)
    translations: np.ndarray  # (m, 3)
    twist_base: np.ndarray  # (m, 6)
    tactile_idx: np.ndarray  # rows of the 300 Hz stream with a tactile sample
    s: np.ndarray
    p: np.ndarray
    contact: np.ndarray
    in_contact: np.ndarray

    @property
    def t_tactile(self):
        return self.t[self.tactile_idx]


def _jitter(rng, n, dt, amp, n_tones=3):
    """Smooth zero-mean random signal (sum of low-frequency tones), shape (n, 6)."""
    t = np.arange(n) * dt
    out = np.zeros((n, 6))
    for d in range(6):
        a = amp[d]
        for _ in range(n_tones):
            f = rng.uniform(0.2, 0.8)
            ph = rng.uniform(0, 2 * math.pi)
            out[:, d] += a / n_tones * np.sin(2 * math.pi * f * t + ph)
    return out


def scripted_demo(surface: SkinSurface, kind: str, params: DemoParams | None = None,
                  seed: int = 0, sensor: SensorConfig | None = None) -> RawDemo:
    """Scripted make/sweep/break contact demonstration on one skin region."""
    prm = params or DemoParams()
    sensor = sensor or SensorConfig()
    if kind not in ("rotational", "translational"):
        raise ValueError(f"unknown demo kind {kind!r}")
    if not 0 <= prm.region < prm.n_regions:
        raise ValueError(f"region {prm.region} outside 0..{prm.n_regions - 1}")
    rng = np.random.default_rng(seed)
    frac = prm.region / max(prm.n_regions - 1, 1)
    spread = prm.region_spread

    if kind == "rotational":
        lo, hi = prm.rot_x_range
        x0 = lo + frac * (hi - lo)
        x_lo = -surface.cyl_length + 0.002 + prm.wander_x
        x_hi = 0.9 * surface.cap_length - prm.wander_x
        if x_lo <= x0 <= x_hi:
            # region jitter may not push the sweep off the skin
            x0 += spread * rng.uniform(-1, 1) * (hi - lo) / (2 * prm.n_regions)
            x0 = min(max(x0, x_lo + 1e-9), x_hi - 1e-9)
        phi_c = rng.uniform(-1, 1) * math.radians(5.0)
        phi0 = phi_c + 0.5 * prm.rot_extent
        if x0 - prm.wander_x < -surface.cyl_length + 0.002 or x0 + prm.wander_x > 0.9 * surface.cap_length:
            raise ValueError(f"rotational region x={x0:.4f} m is off the skin")
        if abs(phi_c) + 0.5 * prm.rot_extent > surface.params.electrode_phi_max:
            raise ValueError("rotation extent leaves the sensorised skin")
        if x0 > 0:
            # profile arclength of the latitude circle through x0
            s_grid = np.linspace(0, surface.cap_arclength, 4001)
            xg, _ = surface.profile_at(s_grid)
            start_sigma = float(np.interp(-x0, -xg, s_grid))
        else:
            start_sigma = surface.cap_arclength - x0
        start_phi = phi0
        sweep = np.array([0, 0, 0, -prm.rot_speed, 0, 0])  # clockwise about +x first
        sweep_time = prm.rot_extent / prm.rot_speed
        n_rep = 1
    else:
        lo, hi = prm.trans_phi_range
        phi0 = lo + frac * (hi - lo)
        lim = surface.params.electrode_phi_max - prm.wander_phi
        if abs(phi0) <= lim:
            phi0 += spread * rng.uniform(-1, 1) * (hi - lo) / (2 * prm.n_regions)
            phi0 = min(max(phi0, -lim + 1e-9), lim - 1e-9)
        x_start = prm.trans_x_start + rng.uniform(-1, 0) * 0.001
        x_end = x_start - prm.trans_extent
        if x_end < -surface.cyl_length + 0.001 or x_start > 0:
            raise ValueError("translational sweep leaves the skin")
        if abs(phi0) + prm.wander_phi > surface.params.electrode_phi_max:
            raise ValueError("translational region leaves the sensorised skin")
        start_sigma = surface.cap_arclength - x_start
        start_phi = phi0
        sweep = np.array([prm.trans_speed, 0, 0, 0, 0, 0])  # swipe +x first
        sweep_time = prm.trans_extent / prm.trans_speed
        n_rep = 2

    # fixed but non-trivial mounting of the finger in the base frame
    R0 = kernels.so3_exp(rng.normal(0, 0.6, 3))
    anchor = np.zeros(3)
    pose = pose_for_contact(surface, anchor, start_sigma, start_phi, -prm.clearance, R0)

    dt = 1.0 / TWIST_HZ
    approach_time = (prm.clearance + prm.depth) / prm.approach_speed

    # phase list of (duration, ee-twist or 'approach'/'retract')
    phases = [(prm.gap, None)]
    for _ in range(n_rep):
        for direction in (1.0, -1.0):
            phases += [
                (approach_time, "approach"),
                (prm.hold, None),
                (sweep_time, direction * sweep),
                (prm.hold, None),
                (approach_time, "retract"),
                (prm.gap, None),
            ]

    n_total = sum(int(round(d / dt)) for d, _ in phases)
    n_total += (-n_total) % (TWIST_HZ // TACTILE_HZ)
    jit = _jitter(rng, n_total, dt, [prm.jitter_lin] * 3 + [prm.jitter_ang] * 3)
    # wander is the derivative of a smooth offset signal so its excursion stays bounded
    tt = np.arange(n_total) * dt
    wdot = np.zeros(n_total)
    amp = prm.wander_x if kind == "rotational" else prm.wander_phi
    for _ in range(2):
        f = rng.uniform(*prm.wander_hz)
        ph = rng.uniform(0, 2 * math.pi)
        wdot += 0.5 * amp * 2 * math.pi * f * np.cos(2 * math.pi * f * tt + ph)
    jit[:, 0 if kind == "rotational" else 3] += wdot

    rots = np.empty((n_total, 3, 3))
    trans = np.empty((n_total, 3))
    twb = np.zeros((n_total, 6))
    R, tr = pose.rotation.copy(), pose.translation.copy()
    k = 0
    for dur, what in phases:
        steps = int(round(dur / dt))
        if isinstance(what, str):
            q = (anchor - tr) @ R
            _, sg, ph, _ = surface.nearest(q[None])
            n_out = surface.normal(sg[0], ph[0])
            sign = 1.0 if what == "approach" else -1.0
            ee = np.concatenate([sign * prm.approach_speed * n_out, np.zeros(3)])
        elif what is None:
            ee = np.zeros(6)
        else:
            ee = what
        for _ in range(steps):
            if k >= n_total:
                break
            a = ee + jit[k]
            rots[k], trans[k] = R, tr
            twb[k, :3] = R @ a[:3]
            twb[k, 3:] = R @ a[3:]
            tr = tr + twb[k, :3] * dt
            R = kernels.so3_exp(twb[k, 3:] * dt) @ R
            k += 1
    while k < n_total:
        rots[k], trans[k] = R, tr
        k += 1

    tidx = np.arange(0, n_total, TWIST_HZ // TACTILE_HZ)
    b = sense_batch(surface, rots[tidx], trans[tidx], anchor, sensor, rng)
    return RawDemo(
        kind=kind, region=prm.region, seed=seed,
        t=np.arange(n_total) * dt, rotations=rots, translations=trans, twist_base=twb,
        tactile_idx=tidx, s=b.s, p=b.p, contact=b.contact, in_contact=b.in_contact,
    )


# ---------------------------------------------------------------------------
# csv io


def demo_columns(n_electrodes):
    return (
        ["t"]
        + [f"s_{i + 1}" for i in range(n_electrodes)]
        + ["p", "contact_x", "contact_y", "contact_z"]
        + [f"R_{i}{j}" for i in range(3) for j in range(3)]
        + ["pos_x", "pos_y", "pos_z"]
        + ["vx_b", "vy_b", "vz_b", "wx_b", "wy_b", "wz_b"]
    )


def write_demo_csv(path, demo: RawDemo):
    E = demo.s.shape[1]
    tactile_row = {int(r): i for i, r in enumerate(demo.tactile_idx)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(demo_columns(E))
        for r in range(len(demo.t)):
            i = tactile_row.get(r)
            if i is None:
                tact = [""] * (E + 4)
            else:
                tact = [repr(float(v)) for v in demo.s[i]] + [repr(float(demo.p[i]))]
                tact += [repr(float(v)) for v in demo.contact[i]]
            pose = [repr(float(v)) for v in demo.rotations[r].ravel()]
            pose += [repr(float(v)) for v in demo.translations[r]]
            tw = [repr(float(v)) for v in demo.twist_base[r]]
            w.writerow([repr(float(demo.t[r]))] + tact + pose + tw)


def read_demo_csv(path, kind="", region=-1, seed=-1) -> RawDemo:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = list(rd)
    E = sum(1 for h in header if h.startswith("s_"))
    t = np.array([float(r[0]) for r in rows])
    has = np.array([r[1] != "" for r in rows])
    tidx = np.flatnonzero(has)
    tact = np.array([[float(v) for v in rows[i][1:E + 5]] for i in tidx]).reshape(-1, E + 4)
    rest = np.array([[float(v) for v in r[E + 5:]] for r in rows])
    rots = rest[:, :9].reshape(-1, 3, 3)
    trans = rest[:, 9:12]
    twb = rest[:, 12:18]
    p = tact[:, E]
    return RawDemo(
        kind=kind, region=region, seed=seed, t=t, rotations=rots, translations=trans,
        twist_base=twb, tactile_idx=tidx, s=tact[:, :E], p=p, contact=tact[:, E + 1:E + 4],
        in_contact=p > 0,
    )


def demo_plan(n_regions=7, rot_reps=3, trans_reps=4):
    """(kind, region, rep) triples for a demonstration campaign."""
    plan = []
    for region in range(n_regions):
        plan += [("rotational", region, r) for r in range(rot_reps)]
        plan += [("translational", region, r) for r in range(trans_reps)]
    return plan


def generate_demos(surface, out_dir=None, n_regions=7, rot_reps=3, trans_reps=4,
                   seed=0, sensor=None, params=None):
    """Generate a demo campaign; optionally writes CSVs plus a manifest."""
    params = params or DemoParams()
    demos = []
    for n, (kind, region, rep) in enumerate(demo_plan(n_regions, rot_reps, trans_reps)):
        prm = DemoParams(**{**params.__dict__, "region": region, "n_regions": n_regions})
        demo_seed = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
        demos.append(scripted_demo(surface, kind, prm, demo_seed, sensor))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        surface.save_config(out / "surface.cfg")
        entries = {}
        for n, d in enumerate(demos):
            name = f"demo_{n:03d}.csv"
            write_demo_csv(out / name, d)
            entries[name] = f"{d.kind} {d.region} {d.seed}"
        entries["sensor"] = " ".join(f"{k}={v!r}" for k, v in (sensor or SensorConfig()).to_dict().items())
        write_kv(out / "demos.manifest", entries, header="demo campaign")
    return demos


def load_demos(directory):
    d = Path(directory)
    man = read_kv(d / "demos.manifest")
    demos = []
    for name in sorted(k for k in man if k.endswith(".csv")):
        kind, region, seed = man[name].split()
        demos.append(read_demo_csv(d / name, kind, int(region), int(seed)))
    return demos
