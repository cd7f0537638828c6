"""Latent forward dynamics and the inverse-dynamics controllers.

Two forward models map (z, a) to a latent velocity:
  LL: zdot = A(z) z + B(z) a + c(z), with (A, B, c) predicted by a network from z,
  NL: zdot = h([z; a]).
Both are integrated with one explicit Euler step. The controllers solve a
one-step regularised control problem (LL, NJ) or follow the negative gradient
of the one-step distance (NG). Gradients of the direction-matching ID loss
are taken analytically through the closed-form solutions, including the
network Jacobians for NJ.

Networks work on standardised quantities; the model applies fixed
per-dimension scales so every public function takes and returns physical
units (latent units, m/s, rad/s, seconds).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import nn_core
from .embedding import TrainingDivergence
from .nn_core import Mlp, MlpSpec, RmsProp

LL_WIDTHS = (3, 8, 15, 23, 30)
NL_WIDTHS = (9, 15, 3)
VARIANTS = ("ll", "nl")
ID_VARIANTS = {"ll": ("ll",), "nl": ("nj", "ng")}
_ID_CODES = ("ll", "nj", "ng")
MIN_ACTION_NORM = 1e-8


# ---------------------------------------------------------------------------
# (A, B, c) packing: vec is row-major


def pack_abc(A, B, c):
    A, B, c = np.asarray(A), np.asarray(B), np.asarray(c)
    lead = c.shape[:-1]
    return np.concatenate([A.reshape(*lead, 9), B.reshape(*lead, 18), c], axis=-1)


def unpack_abc(v):
    v = np.asarray(v)
    lead = v.shape[:-1]
    if v.shape[-1] != 30:
        raise ValueError(f"expected 30 values, got {v.shape[-1]}")
    return v[..., :9].reshape(*lead, 3, 3), v[..., 9:27].reshape(*lead, 3, 6), v[..., 27:30]


# ---------------------------------------------------------------------------
# model


class DynamicsModel:
    """Forward model plus the controller settings that go with it."""

    def __init__(self, variant="nl", rng=None, z_mean=None, z_std=None, a_std=None, zd_std=None,
                 id_variant=None, beta=0.1, alpha=5.0, a_max=0.05, widths=None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown dynamics variant {variant!r}")
        id_variant = id_variant or ID_VARIANTS[variant][0]
        if id_variant not in ID_VARIANTS[variant]:
            raise ValueError(f"controller {id_variant!r} needs the other forward model")
        rng = rng if rng is not None else np.random.default_rng(0)
        widths = widths or (LL_WIDTHS if variant == "ll" else NL_WIDTHS)
        self.variant = variant
        self.id_variant = id_variant
        self.net = Mlp(MlpSpec.tanh_net(widths), rng).eval()
        self.z_mean = np.zeros(3) if z_mean is None else np.asarray(z_mean, float).reshape(3)
        self.z_std = np.ones(3) if z_std is None else np.asarray(z_std, float).reshape(3)
        self.a_std = np.ones(6) if a_std is None else np.asarray(a_std, float).reshape(6)
        self.zd_std = np.ones(3) if zd_std is None else np.asarray(zd_std, float).reshape(3)
        self.beta = float(beta)
        self.alpha = float(alpha)
        self.a_max = float(a_max)

    # output scale of vec(A), vec(B), c so the network predicts O(1) numbers
    @property
    def _abc_scale(self):
        sA = self.zd_std[:, None] / self.z_std[None, :]
        sB = self.zd_std[:, None] / self.a_std[None, :]
        return pack_abc(sA, sB, self.zd_std)

    def _zin(self, z):
        return (np.atleast_2d(z) - self.z_mean) / self.z_std

    def _nl_in(self, z, a):
        return np.concatenate([self._zin(z), np.atleast_2d(a) / self.a_std], axis=1)

    def abc(self, z):
        """LL only: (A (n,3,3), B (n,3,6), c (n,3), cache)."""
        if self.variant != "ll":
            raise ValueError("abc() is defined for the LL model only")
        o, cache = self.net.forward(self._zin(z), training=False)
        A, B, c = unpack_abc(o * self._abc_scale)
        return A, B, c, cache

    def lfd(self, z, a):
        """Latent velocity, batched over rows of z (n,3) and a (n,6)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if self.variant == "ll":
            A, B, c, _ = self.abc(z)
            return np.einsum("nij,nj->ni", A, z) + np.einsum("nij,nj->ni", B, a) + c
        return self.net.forward(self._nl_in(z, a), training=False)[0] * self.zd_std

    def jacobians(self, z, a):
        """NL only: (J_z (n,3,3), J_a (n,3,6), zdot (n,3), cache) in physical units."""
        if self.variant != "nl":
            raise ValueError("jacobians() is defined for the NL model only")
        Jn, o, cache = self.net.jacobian(self._nl_in(z, a))
        J = Jn * self.zd_std[None, :, None] / np.concatenate([self.z_std, self.a_std])[None, None, :]
        return J[:, :, :3], J[:, :, 3:], o * self.zd_std, cache

    def integrate(self, z, a, dt):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return z + self.lfd(z, a) * _col(dt)

    def chain_predict(self, z1, actions, dt):
        """Predictions z_2..z_{C+1}, shape (n, C, 3), for actions (n, C, 6)."""
        actions = np.asarray(actions, dtype=float)
        if actions.ndim == 2:
            actions = actions[None]
        z = np.atleast_2d(np.asarray(z1, dtype=float))
        out = []
        for k in range(actions.shape[1]):
            z = self.integrate(z, actions[:, k], dt)
            out.append(z)
        return np.stack(out, axis=1)

    # -- persistence ---------------------------------------------------------

    def save(self, path):
        extra = [VARIANTS.index(self.variant), _ID_CODES.index(self.id_variant), self.beta,
                 self.alpha, self.a_max, *self.z_mean, *self.z_std, *self.a_std, *self.zd_std]
        nn_core.save_checkpoint(path, [self.net], extra=extra)

    @classmethod
    def load(cls, path):
        (net,), e = nn_core.load_checkpoint(path)
        if len(e) != 20:
            raise ValueError(f"{path}: not a dynamics checkpoint")
        m = cls.__new__(cls)
        m.variant = VARIANTS[int(e[0])]
        m.id_variant = _ID_CODES[int(e[1])]
        m.beta, m.alpha, m.a_max = float(e[2]), float(e[3]), float(e[4])
        m.z_mean, m.z_std, m.a_std, m.zd_std = e[5:8].copy(), e[8:11].copy(), e[11:17].copy(), e[17:20].copy()
        m.net = net.eval()
        return m


def _col(dt):
    """dt as a column that broadcasts against (n, k) arrays."""
    dt = np.asarray(dt, dtype=float)
    return dt.reshape(-1, 1) if dt.ndim else dt


# ---------------------------------------------------------------------------
# one-step regularised control:  min 1/2 |z_T - z_{t+1}|^2 + beta/2 |a|^2
# subject to z_{t+1} = z_t + (A z_t + B a + c) dt


def _chol_solve(M, r):
    """Solve M x = r for batched SPD 3x3 M via Cholesky and two triangular sweeps."""
    L = np.linalg.cholesky(M)
    n = L.shape[-1]
    y = np.zeros_like(r)
    for i in range(n):
        y[:, i] = (r[:, i] - np.einsum("nj,nj->n", L[:, i, :i], y[:, :i])) / L[:, i, i]
    x = np.zeros_like(r)
    for i in range(n - 1, -1, -1):
        x[:, i] = (y[:, i] - np.einsum("nj,nj->n", L[:, i + 1:, i], x[:, i + 1:])) / L[:, i, i]
    return x


def solve_control(A, B, c, z_t, z_T, dt, beta):
    """Closed-form action a = B^T (B B^T + beta/dt^2 I)^-1 ((z_T - z_t)/dt - A z_t - c).

    Returns (a (n,6), y, r) with y = (B B^T + beta/dt^2 I)^-1 r, kept for gradients.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    A, B, c = np.asarray(A, float), np.asarray(B, float), np.atleast_2d(np.asarray(c, float))
    if A.ndim == 2:
        A, B = A[None], B[None]
    z_t, z_T = np.atleast_2d(z_t), np.atleast_2d(z_T)
    dtc = _col(dt)
    r = (z_T - z_t) / dtc - np.einsum("nij,nj->ni", A, z_t) - c
    M = B @ np.swapaxes(B, 1, 2) + (beta / dtc**2)[..., None] * np.eye(3)
    y = _chol_solve(M, r)
    return np.einsum("nji,nj->ni", B, y), y, r


def _control_backward(B, y, ga, dt, beta):
    """Given dL/da, return (dL/dB, dL/dr) for a = B^T M^-1 r, M = B B^T + beta/dt^2 I."""
    dtc = _col(dt)
    M = B @ np.swapaxes(B, 1, 2) + (beta / dtc**2)[..., None] * np.eye(3)
    w = _chol_solve(M, np.einsum("nij,nj->ni", B, ga))
    gB = y[:, :, None] * ga[:, None, :]
    sym = w[:, :, None] * y[:, None, :] + y[:, :, None] * w[:, None, :]
    gB = gB - sym @ B
    return gB, w


def control_objective(A, B, c, z_t, z_T, dt, beta, a):
    """1/2 |z_T - z_{t+1}|^2 + beta/2 |a|^2 with z_{t+1} from the linear dynamics."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    if A.ndim == 2:
        A, B = A[None], B[None]
    z_t, z_T, a = np.atleast_2d(z_t), np.atleast_2d(z_T), np.atleast_2d(a)
    z1 = z_t + (np.einsum("nij,nj->ni", A, z_t) + np.einsum("nij,nj->ni", B, a) + c) * _col(dt)
    return 0.5 * np.sum((z_T - z1) ** 2, axis=1) + 0.5 * beta * np.sum(a * a, axis=1)


def kkt_residuals(A, B, c, z_t, z_T, dt, beta, a):
    """Residuals of the optimality conditions at action ``a``.

    z_{t+1} comes from the dynamics constraint, lambda = z_T - z_{t+1}, and
    returns per-instance max-abs of (a - dt/beta B^T lambda) and of
    lambda minus its closed form beta/dt (B B^T + beta/dt^2 I)^-1 r.
    """
    A, B = np.asarray(A, float), np.asarray(B, float)
    if A.ndim == 2:
        A, B = A[None], B[None]
    z_t, z_T, a = np.atleast_2d(z_t), np.atleast_2d(z_T), np.atleast_2d(a)
    dtc = _col(dt)
    z1 = z_t + (np.einsum("nij,nj->ni", A, z_t) + np.einsum("nij,nj->ni", B, a) + c) * dtc
    lam = z_T - z1
    stat = a - (dtc / beta) * np.einsum("nji,nj->ni", B, lam)
    _, y, _ = solve_control(A, B, c, z_t, z_T, dt, beta)
    mult = lam - (beta / dtc) * y
    return np.max(np.abs(stat), axis=1), np.max(np.abs(mult), axis=1)


def nj_linearisation(model, z_prev, a_prev, dt):
    """(A_bar, B_bar, c_bar, cache) of the NL model linearised at (z_{t-1}, a_{t-1})."""
    z_prev, a_prev = np.atleast_2d(z_prev), np.atleast_2d(a_prev)
    Jz, Ja, _, cache = model.jacobians(z_prev, a_prev)
    Abar = Jz + np.eye(3) / _col(dt)[..., None]
    cbar = -np.einsum("nij,nj->ni", Abar, z_prev) - np.einsum("nij,nj->ni", Ja, a_prev)
    return Abar, Ja, cbar, cache


# ---------------------------------------------------------------------------
# controllers (batched over rows)


def id_ll(model, z_T, z_t, dt, beta=None):
    beta = model.beta if beta is None else beta
    A, B, c, _ = model.abc(z_t)
    return solve_control(A, B, c, z_t, z_T, dt, beta)[0]


def ng_gradient(model, z_T, z_t, dt):
    """dd/da at a = 0 for d = |z_t + dt f(z_t, a) - z_T|^2, via the input Jacobian."""
    z_t, z_T = np.atleast_2d(z_t), np.atleast_2d(z_T)
    _, Ja, zd0, _ = model.jacobians(z_t, np.zeros((len(z_t), 6)))
    dtc = _col(dt)
    e = z_t + dtc * zd0 - z_T
    return 2.0 * dtc * np.einsum("nji,nj->ni", Ja, e)


def id_ng(model, z_T, z_t, dt, alpha=None, a_max=None):
    """a = -alpha dd/da; alpha shrinks per row so that |a| <= a_max."""
    alpha = model.alpha if alpha is None else alpha
    a_max = model.a_max if a_max is None else a_max
    g = ng_gradient(model, z_T, z_t, dt)
    a = -alpha * g
    n = np.linalg.norm(a, axis=1, keepdims=True)
    scale = np.where(n > a_max, a_max / np.maximum(n, 1e-300), 1.0)
    return a * scale


def id_nj(model, z_T, z_t, z_prev=None, a_prev=None, dt=0.31, beta=None):
    """Jacobian-linearised controller; without history the point (z_t, 0) is used."""
    beta = model.beta if beta is None else beta
    z_t = np.atleast_2d(z_t)
    if z_prev is None:
        z_prev, a_prev = z_t, np.zeros((len(z_t), 6))
    Abar, Bbar, cbar, _ = nj_linearisation(model, z_prev, a_prev, dt)
    return solve_control(Abar, Bbar, cbar, z_t, z_T, dt, beta)[0]


def f_id(model, z_T, z_t, z_prev=None, a_prev=None, dt=0.31, controller=None):
    """Dispatch to the model's controller (or ``controller`` if given)."""
    controller = controller or model.id_variant
    if controller == "ll":
        return id_ll(model, z_T, z_t, dt)
    if controller == "ng":
        return id_ng(model, z_T, z_t, dt)
    if controller == "nj":
        return id_nj(model, z_T, z_t, z_prev, a_prev, dt)
    raise ValueError(f"unknown controller {controller!r}")


# ---------------------------------------------------------------------------
# losses with parameter gradients


def loss_lfd(model, z1, actions, targets, dt):
    """Chained forward loss: mean over chains of sum_k |z_hat_{k+1} - z_{k+1}|^2.

    ``actions`` (n, C, 6), ``targets`` (n, C, 3). Returns (loss, grads).
    """
    actions = np.asarray(actions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n, C = actions.shape[:2]
    dtc = _col(dt)
    net = model.net
    z = np.atleast_2d(np.asarray(z1, dtype=float))
    steps = []
    for k in range(C):
        a = actions[:, k]
        if model.variant == "ll":
            o, cache = net.forward(model._zin(z), training=False)
            A, B, c = unpack_abc(o * model._abc_scale)
            zd = np.einsum("nij,nj->ni", A, z) + np.einsum("nij,nj->ni", B, a) + c
            steps.append((z, a, cache, A, B))
        else:
            o, cache = net.forward(model._nl_in(z, a), training=False)
            zd = o * model.zd_std
            steps.append((z, a, cache, None, None))
        z = z + zd * dtc
        steps[-1] = steps[-1] + (z,)
    res = np.stack([s[-1] for s in steps], axis=1) - targets
    loss = float(np.sum(res * res) / n)
    grads = [np.zeros_like(p) for p in net.params]
    gz = np.zeros_like(res[:, 0])
    for k in range(C - 1, -1, -1):
        zk, a, cache, A, B, _ = steps[k]
        gz = gz + (2.0 / n) * res[:, k]
        gzd = gz * dtc
        if model.variant == "ll":
            go = pack_abc(gzd[:, :, None] * zk[:, None, :], gzd[:, :, None] * a[:, None, :], gzd)
            g, gx = net.backward(cache, go * model._abc_scale)
            gz = gz + np.einsum("nji,nj->ni", A, gzd) + gx / model.z_std
        else:
            g, gx = net.backward(cache, gzd * model.zd_std)
            gz = gz + gx[:, :3] / model.z_std
        grads = [u + v for u, v in zip(grads, g)]
    return loss, grads


def _direction_loss(a_hat, a_true, scale=None):
    """Per-row |u - v|^2 for unit directions, and its gradient w.r.t. a_hat.

    With ``scale`` both actions are divided by it first, so that components in
    different units (m/s, rad/s) weigh alike.
    """
    if scale is not None:
        terms, g = _direction_loss(a_hat / scale, a_true / scale)
        return terms, g / scale
    na = np.linalg.norm(a_hat, axis=1, keepdims=True)
    v = a_true / np.linalg.norm(a_true, axis=1, keepdims=True)
    ok = na[:, 0] > 0
    u = np.where(ok[:, None], a_hat / np.where(ok, na[:, 0], 1.0)[:, None], 0.0)
    terms = np.sum((u - v) ** 2, axis=1)
    uv = np.sum(u * v, axis=1, keepdims=True)
    g = np.where(ok[:, None], 2.0 * (u * uv - v) / np.where(ok, na[:, 0], 1.0)[:, None], 0.0)
    return terms, g


def loss_id(model, z_T, z_t, z_prev, a_prev, a_true, dt, controller=None, lin_scale=None):
    """Mean over rows of |a_hat/|a_hat| - a/|a||^2; rows with |a| < 1e-8 are skipped.

    ``lin_scale`` (m/s) divides the linear velocities before normalising, so
    that v and w count alike; None compares raw twists.

    Returns (loss, grads w.r.t. the network parameters).
    """
    controller = controller or model.id_variant
    net = model.net
    a_true = np.atleast_2d(np.asarray(a_true, dtype=float))
    keep = np.linalg.norm(a_true, axis=1) >= MIN_ACTION_NORM
    if not np.any(keep):
        return 0.0, [np.zeros_like(p) for p in net.params]
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (len(a_true),))[keep]
    z_T, z_t = np.atleast_2d(z_T)[keep], np.atleast_2d(z_t)[keep]
    z_prev, a_prev, a_true = np.atleast_2d(z_prev)[keep], np.atleast_2d(a_prev)[keep], a_true[keep]
    m = len(a_true)
    dtc = _col(dt)
    scale = None if lin_scale is None else np.repeat([lin_scale, 1.0], 3)
    if controller == "ll":
        A, B, c, cache = model.abc(z_t)
        a_hat, y, _ = solve_control(A, B, c, z_t, z_T, dt, model.beta)
        terms, ga = _direction_loss(a_hat, a_true, scale)
        gB, w = _control_backward(B, y, ga / m, dt, model.beta)
        go = pack_abc(-w[:, :, None] * z_t[:, None, :], gB, -w)
        grads, _ = net.backward(cache, go * model._abc_scale)
    elif controller == "nj":
        Abar, Bbar, cbar, cache = nj_linearisation(model, z_prev, a_prev, dt)
        a_hat, y, _ = solve_control(Abar, Bbar, cbar, z_t, z_T, dt, model.beta)
        terms, ga = _direction_loss(a_hat, a_true, scale)
        gB, w = _control_backward(Bbar, y, ga / m, dt, model.beta)
        # r = (z_T - z_t)/dt - (I/dt + J_z)(z_t - z_prev) + J_a a_prev
        gJz = -w[:, :, None] * (z_t - z_prev)[:, None, :]
        gJa = gB + w[:, :, None] * a_prev[:, None, :]
        grads, _ = net.jacobian_backward(cache, _to_net_jacobian(model, gJz, gJa))
    elif controller == "ng":
        # direction of -dd/da is that of -J_a^T e; positive scale factors drop out
        _, Ja, zd0, cache = model.jacobians(z_t, np.zeros((m, 6)))
        e = z_t + dtc * zd0 - z_T
        a_hat = -np.einsum("nji,nj->ni", Ja, e)
        terms, ga = _direction_loss(a_hat, a_true, scale)
        ga = ga / m
        gJa = -e[:, :, None] * ga[:, None, :]
        gzd = -np.einsum("nij,nj->ni", Ja, ga) * dtc
        grads, _ = net.jacobian_backward(cache, _to_net_jacobian(model, np.zeros((m, 3, 3)), gJa),
                                         gzd * model.zd_std)
    else:
        raise ValueError(f"unknown controller {controller!r}")
    return float(np.mean(terms)), grads


def _to_net_jacobian(model, gJz, gJa):
    """Chain dL/dJ in physical units to dL/dJ of the standardised network."""
    gJ = np.concatenate([gJz, gJa], axis=2)
    return gJ * model.zd_std[None, :, None] / np.concatenate([model.z_std, model.a_std])[None, None, :]


# ---------------------------------------------------------------------------
# training


@dataclass
class DynConfig:
    variant: str = "nl"
    id_variant: str = "nj"
    iterations: int = 20000
    batch_size: int = 128
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    w_lfd: float = 1e8
    w_id: float = 1e7
    beta: float = 0.1
    alpha: float = 5.0
    a_max: float = 0.05
    chain_train: int = 2
    id_loss: bool = True
    # linear speed (m/s) that weighs like 1 rad/s in the ID loss; 0 compares raw twists
    id_lin_scale: float = 0.0
    trace_every: int = 100

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown dynamics variant {self.variant!r}")
        if self.id_variant not in ID_VARIANTS[self.variant]:
            raise ValueError(f"controller {self.id_variant!r} does not fit the {self.variant} model")
        if self.chain_train < 1:
            raise ValueError("chain_train must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class DynTrace:
    iteration: list
    lfd: list
    id: list
    total: list

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "L_LFD", "L_ID", "total"])
            for row in zip(self.iteration, self.lfd, self.id, self.total):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


@dataclass
class TupleLatents:
    """Encoded tuple states; rows follow the dataset's tuple table."""

    z_prev: np.ndarray
    z_t: np.ndarray
    z_next: np.ndarray

    @classmethod
    def encode(cls, ds, encoder):
        return cls(encoder.encode(ds.s_prev), encoder.encode(ds.s_t), encoder.encode(ds.s_next))


def fit_scales(lat: TupleLatents, ds, rows):
    """Standardisation of z, a and zdot from training tuples."""
    z = lat.z_t[rows]
    zd = (lat.z_next[rows] - z) / ds.dt[rows, None]
    a = ds.a_t[rows]
    rms = lambda x: np.sqrt(np.mean(x * x, axis=0)) + 1e-12  # noqa: E731
    return dict(z_mean=z.mean(axis=0), z_std=z.std(axis=0) + 1e-12, a_std=rms(a), zd_std=rms(zd))


def train_dynamics(ds, encoder, cfg: DynConfig | None = None, seed: int = 0, log=None, latents=None):
    """Fit the dynamics on training tuples with the encoder frozen.

    Batches are chains of ``chain_train`` consecutive tuples of one resampled
    sequence, so each chain has a single dt. The ID loss uses each chain's
    first tuple. Returns (model, trace).
    """
    cfg = cfg or DynConfig()
    rng = np.random.default_rng(seed)
    lat = latents or TupleLatents.encode(ds, encoder)
    rows = ds.tuple_rows("train")
    chains = ds.chains(rows, cfg.chain_train)
    if len(chains) == 0:
        raise ValueError(f"no training chains of length {cfg.chain_train}")
    model = DynamicsModel(cfg.variant, rng, id_variant=cfg.id_variant, beta=cfg.beta, alpha=cfg.alpha,
                          a_max=cfg.a_max, **fit_scales(lat, ds, rows))
    opt = RmsProp(cfg.lr, cfg.rho, cfg.eps)
    trace = DynTrace([], [], [], [])
    acc = np.zeros(3)
    n_acc = 0
    for it in range(1, cfg.iterations + 1):
        ch = chains[rng.integers(0, len(chains), cfg.batch_size)]
        first = ch[:, 0]
        dt = ds.dt[first]
        l_fd, g_fd = loss_lfd(model, lat.z_t[first], ds.a_t[ch], lat.z_next[ch], dt)
        grads = [cfg.w_lfd * g for g in g_fd]
        l_id = 0.0
        if cfg.id_loss:
            l_id, g_id = loss_id(model, lat.z_next[first], lat.z_t[first], lat.z_prev[first],
                                 ds.a_prev[first], ds.a_t[first], dt,
                                 lin_scale=cfg.id_lin_scale or None)
            grads = [g + cfg.w_id * h for g, h in zip(grads, g_id)]
        total = cfg.w_lfd * l_fd + cfg.w_id * l_id
        if not math.isfinite(total) or not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDivergence(
                f"dynamics loss became non-finite at iteration {it} (L_LFD={l_fd}, L_ID={l_id})"
            )
        opt.step(model.net.params, grads)
        model.net.touch()
        acc += (l_fd, l_id, total)
        n_acc += 1
        if it % cfg.trace_every == 0 or it == cfg.iterations:
            m = acc / n_acc
            trace.iteration.append(it)
            trace.lfd.append(m[0])
            trace.id.append(m[1])
            trace.total.append(m[2])
            acc[:] = 0
            n_acc = 0
            if log is not None:
                log(f"dyn iter {it}: L_LFD={m[0]:.3e} L_ID={m[1]:.3e} total={m[2]:.3e}")
    return model, trace


def config_dict(cfg: DynConfig):
    return asdict(cfg)
