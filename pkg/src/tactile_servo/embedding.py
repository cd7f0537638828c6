"""Siamese autoencoder: tactile vector s -> latent z = (x, y, z_c).

The x, y coordinates are trained to reproduce pairwise geodesic distances
(MDS loss), z_c to reproduce the contact pressure, and a mirrored decoder to
reconstruct s. All losses are batch means.

Latents stay in physical units (meters for x, y; activation units for z_c).
The encoder's linear output is multiplied by a fixed per-dimension scale
fitted to the data, so the network itself works with O(1) outputs; the
decoder divides by the same scale.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import geodesy, nn_core
from .nn_core import Mlp, MlpSpec, RmsProp


class TrainingDivergence(RuntimeError):
    pass


@dataclass
class AeConfig:
    iterations: int = 20000
    batch_size: int = 128
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    w_aer: float = 100.0
    w_mds: float = 2e7
    w_cdp: float = 2e7
    lat_struct: bool = True
    batch_norm: bool = True
    hidden: tuple = (19, 12, 6)
    trace_every: int = 100

    @classmethod
    def from_dict(cls, d):
        kw = dict(d)
        if "hidden" in kw and not isinstance(kw["hidden"], tuple):
            h = kw["hidden"]
            kw["hidden"] = tuple(int(v) for v in (h if isinstance(h, list) else [h]))
        return cls(**kw)


class AutoencoderModel:
    def __init__(self, n_electrodes=19, hidden=(19, 12, 6), batch_norm=True, rng=None,
                 s_scale=1.0, z_scale=(1.0, 1.0, 1.0)):
        rng = rng if rng is not None else np.random.default_rng(0)
        enc_w = [n_electrodes, *hidden, 3]
        self.encoder = Mlp(MlpSpec.tanh_net(enc_w, bn_hidden=batch_norm), rng)
        self.decoder = Mlp(MlpSpec.tanh_net(enc_w[::-1], bn_hidden=batch_norm), rng)
        self.s_scale = float(s_scale)
        self.z_scale = np.asarray(z_scale, dtype=float).reshape(3)

    @property
    def n_electrodes(self):
        return self.encoder.spec.widths[0]

    def eval(self):
        self.encoder.eval()
        self.decoder.eval()
        return self

    def encode(self, s):
        """Latent states (n, 3) in inference mode."""
        s = np.atleast_2d(np.asarray(s, dtype=float))
        if s.shape[1] != self.n_electrodes:
            raise ValueError(f"expected {self.n_electrodes} electrodes, got {s.shape[1]}")
        return self.encoder.forward(s / self.s_scale, training=False)[0] * self.z_scale

    def decode(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.decoder.forward(z / self.z_scale, training=False)[0] * self.s_scale

    def save(self, path, extra=()):
        nn_core.save_checkpoint(path, [self.encoder, self.decoder],
                                extra=[self.s_scale, *self.z_scale, *extra])

    @classmethod
    def load(cls, path):
        (enc, dec), extra = nn_core.load_checkpoint(path)
        m = cls.__new__(cls)
        m.encoder, m.decoder = enc, dec
        m.s_scale = float(extra[0])
        m.z_scale = np.asarray(extra[1:4], dtype=float)
        return m


# ---------------------------------------------------------------------------
# losses (value and gradient w.r.t. the latent / output arrays)


def loss_mds(z_a, z_b, g):
    """Mean over pairs of (|z_a,xy - z_b,xy| - g)^2; returns (loss, dz_a, dz_b)."""
    z_a = np.atleast_2d(z_a)
    z_b = np.atleast_2d(z_b)
    diff = z_a[:, :2] - z_b[:, :2]
    d = np.sqrt(np.sum(diff * diff, axis=1))
    r = d - np.asarray(g, dtype=float)
    k = len(r)
    loss = float(np.sum(r * r) / k)
    unit = np.divide(diff, d[:, None], out=np.zeros_like(diff), where=d[:, None] > 0)
    gxy = (2.0 / k) * r[:, None] * unit
    dz_a = np.zeros_like(z_a)
    dz_a[:, :2] = gxy
    return loss, dz_a, -dz_a


def loss_cdp(z, p):
    """Mean of (p - z_c)^2; returns (loss, dz)."""
    z = np.atleast_2d(z)
    r = z[:, 2] - np.asarray(p, dtype=float)
    dz = np.zeros_like(z)
    dz[:, 2] = 2.0 * r / len(r)
    return float(np.mean(r * r)), dz


def loss_aer(s_hat, s):
    """Mean over samples of |s_hat - s|^2; returns (loss, ds_hat)."""
    r = np.atleast_2d(s_hat) - np.atleast_2d(s)
    n = r.shape[0]
    return float(np.sum(r * r) / n), 2.0 * r / n


# ---------------------------------------------------------------------------
# training


@dataclass
class AeTrace:
    iteration: list
    aer: list
    mds: list
    cdp: list
    total: list

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "L_AER", "L_MDS", "L_CDP", "total"])
            for row in zip(self.iteration, self.aer, self.mds, self.cdp, self.total):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def train_autoencoder(S, P, bins, cfg: AeConfig | None = None, seed: int = 0, log=None):
    """Train on samples ``S`` (N, E) with pressures ``P``; ``bins`` index rows of S.

    Returns (model, trace). Raises TrainingDivergence on a non-finite loss.
    """
    cfg = cfg or AeConfig()
    S = np.asarray(S, dtype=float)
    P = np.asarray(P, dtype=float)
    rng = np.random.default_rng(seed)
    scale = float(np.max(np.abs(S))) or 1.0
    # typical geodesic target for x, y; peak pressure for z_c
    g_typ = float(np.mean([np.mean(b.matrix) for b in bins])) if bins else 1.0
    zs = np.array([g_typ, g_typ, float(np.max(np.abs(P))) or 1.0])
    model = AutoencoderModel(S.shape[1], cfg.hidden, cfg.batch_norm, rng, s_scale=scale, z_scale=zs)
    model.encoder.train()
    model.decoder.train()
    opt_enc = RmsProp(cfg.lr, cfg.rho, cfg.eps)
    opt_dec = RmsProp(cfg.lr, cfg.rho, cfg.eps)
    trace = AeTrace([], [], [], [], [])
    acc = np.zeros(4)
    n_acc = 0
    for it in range(1, cfg.iterations + 1):
        pairs = geodesy.sample_siamese_pairs(bins, cfg.batch_size, rng)
        k = len(pairs.a)
        idx = np.concatenate([pairs.a, pairs.b])
        s = S[idx]
        zn, ce = model.encoder.forward(s / scale, training=True)
        z = zn * zs
        sh, cd = model.decoder.forward(zn, training=True)
        l_aer, g_sh = loss_aer(sh * scale, s)
        grads_dec, gzn = model.decoder.backward(cd, cfg.w_aer * g_sh * scale)
        gz = gzn / zs
        l_mds = l_cdp = 0.0
        if cfg.lat_struct:
            l_mds, ga, gb = loss_mds(z[:k], z[k:], pairs.target)
            l_cdp, gc = loss_cdp(z, P[idx])
            gz = gz + cfg.w_mds * np.concatenate([ga, gb]) + cfg.w_cdp * gc
        grads_enc, _ = model.encoder.backward(ce, gz * zs)
        total = cfg.w_aer * l_aer + cfg.w_mds * l_mds + cfg.w_cdp * l_cdp
        if not math.isfinite(total):
            raise TrainingDivergence(
                f"autoencoder loss became non-finite at iteration {it} "
                f"(L_AER={l_aer}, L_MDS={l_mds}, L_CDP={l_cdp})"
            )
        opt_enc.step(model.encoder.params, grads_enc)
        opt_dec.step(model.decoder.params, grads_dec)
        model.encoder.touch()
        model.decoder.touch()
        acc += (l_aer, l_mds, l_cdp, total)
        n_acc += 1
        if it % cfg.trace_every == 0 or it == cfg.iterations:
            m = acc / n_acc
            trace.iteration.append(it)
            trace.aer.append(m[0])
            trace.mds.append(m[1])
            trace.cdp.append(m[2])
            trace.total.append(m[3])
            acc[:] = 0
            n_acc = 0
            if log is not None:
                log(f"ae iter {it}: L_AER={m[0]:.3e} L_MDS={m[1]:.3e} L_CDP={m[2]:.3e} total={m[3]:.3e}")
    # population statistics for inference, as running averages lag the weights
    rows = np.unique(np.concatenate([b.indices for b in bins]))
    model.encoder.recalibrate_bn(S[rows] / scale)
    model.decoder.recalibrate_bn(model.encoder.forward(S[rows] / scale, training=False)[0])
    model.eval()
    return model, trace


# ---------------------------------------------------------------------------
# evaluation helpers


def pair_distance_check(model, S, bins, n_pairs=10000, rng=None):
    """Latent xy distances vs geodesic targets on random intra-bin pairs."""
    rng = rng if rng is not None else np.random.default_rng(0)
    pairs = geodesy.sample_siamese_pairs(bins, n_pairs, rng)
    z = model.encode(S)
    d = np.linalg.norm(z[pairs.a, :2] - z[pairs.b, :2], axis=1)
    return d, pairs.target


def write_embedding_csv(path, z, S):
    """xy embedding with the dominant (largest |s_i|) electrode as label."""
    label = np.argmax(np.abs(S), axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z_c", "label"])
        for (x, y, zc), lab in zip(z, label):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(zc)), int(lab)])


def cluster_separation(z, S):
    """(mean intra-cluster, mean inter-cluster) xy distance for argmax-electrode clusters."""
    label = np.argmax(np.abs(S), axis=1)
    xy = z[:, :2]
    d = np.linalg.norm(xy[:, None] - xy[None], axis=2)
    same = label[:, None] == label[None]
    off = ~np.eye(len(xy), dtype=bool)
    return float(d[same & off].mean()), float(d[~same].mean())


def config_dict(cfg: AeConfig):
    return asdict(cfg)
