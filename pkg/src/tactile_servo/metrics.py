"""Evaluation metrics and the ablation tables (autoencoder, chained FD, inverse dynamics)."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .datapipe import SPLITS
from .embedding import pair_distance_check

PARTS = {"linear": slice(0, 3), "angular": slice(3, 6)}
ID_CONDITIONS = ("fwddynpred", "AEpred", "fwddynpred_vs_AEpred")
MIN_PART_NORM = 1e-8


def nmse(pred, truth):
    """Mean squared error over ground-truth variance, per dimension, then averaged."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if truth.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    var = np.var(truth, axis=0)
    if np.any(var <= 0):
        raise ValueError("ground truth has zero variance")
    return float(np.mean(np.mean((pred - truth) ** 2, axis=0) / var))


def weighted_cosine_distance(pred, truth, part="linear"):
    """sum_t w_t (1 - cos(pred_t, truth_t)) / sum_t w_t with w_t = |truth_t| on one twist part.

    Rows whose ground-truth part is shorter than 1e-8 are excluded; a zero
    prediction counts as cos = 0.
    """
    sl = PARTS[part]
    p = np.atleast_2d(np.asarray(pred, dtype=float))[:, sl]
    t = np.atleast_2d(np.asarray(truth, dtype=float))[:, sl]
    w = np.linalg.norm(t, axis=1)
    keep = w >= MIN_PART_NORM
    if not np.any(keep):
        raise ValueError(f"no ground-truth actions with a non-zero {part} part")
    p, t, w = p[keep], t[keep], w[keep]
    pn = np.linalg.norm(p, axis=1)
    cos = np.divide(np.sum(p * t, axis=1), pn * w, out=np.zeros_like(w), where=pn > 0)
    return float(np.sum(w * (1.0 - np.clip(cos, -1.0, 1.0))) / np.sum(w))


@dataclass
class Row:
    """One scalar of an evaluation report."""

    metric: str
    split: str
    tags: str
    value: float


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------------------
# autoencoder


def eval_ae(model, ds, bins=None, n_pairs=10000, seed=0, tags=""):
    """Reconstruction and pressure NMSE per split, plus the MDS pair check on ``bins``."""
    out = []
    for split in SPLITS:
        rows = ds.ae_rows(split)
        if len(rows) < 2:
            continue
        S = ds.S[rows]
        z = model.encode(S)
        out.append(Row("recon_nmse", split, tags, nmse(model.decode(z), S)))
        out.append(Row("pressure_nmse", split, tags, nmse(z[:, 2], ds.P[rows])))
    if bins:
        d, g = pair_distance_check(model, ds.S, bins, n_pairs, np.random.default_rng(seed))
        out.append(Row("mds_nmse", "train", tags, nmse(d, g)))
    return out


# ---------------------------------------------------------------------------
# forward dynamics


def held_out_chains(ds, c_test=3, split="test", dt=None):
    """Chains of ``c_test`` consecutive held-out tuples (optionally of one dt)."""
    return ds.chains(ds.tuple_rows(split, dt), c_test)


def eval_chained_fd(model, latents, ds, c_test=3, split="test", dt=None):
    """NMSE of chain step k = 1..c_test against the encoded next states."""
    ch = held_out_chains(ds, c_test, split, dt)
    if len(ch) == 0:
        raise ValueError(f"no {split} chains of length {c_test}")
    pred = model.chain_predict(latents.z_t[ch[:, 0]], ds.a_t[ch], ds.dt[ch[:, 0]])
    truth = latents.z_next[ch]
    return [nmse(pred[:, k], truth[:, k]) for k in range(c_test)]


# ---------------------------------------------------------------------------
# inverse dynamics


def id_predictions(model, latents, ds, rows, controller=None):
    """Controller actions for the fwddynpred and AEpred targets on tuple ``rows``."""
    z_t, z_prev = latents.z_t[rows], latents.z_prev[rows]
    a_t, a_prev, dt = ds.a_t[rows], ds.a_prev[rows], ds.dt[rows]
    z_fd = model.integrate(z_t, a_t, dt)
    a_fd = dynamics.f_id(model, z_fd, z_t, z_prev, a_prev, dt, controller)
    a_ae = dynamics.f_id(model, latents.z_next[rows], z_t, z_prev, a_prev, dt, controller)
    return a_fd, a_ae


def eval_id(entries, ds, split="test", dt=None):
    """Weighted cosine distances for each controller, target condition and twist part.

    ``entries`` maps a controller label to (model, latents, controller code).
    The third condition compares the fwddynpred action against the AEpred
    action, weighting by the AEpred action's norm.
    Returns rows (controller, condition, part, wcd).
    """
    rows = ds.tuple_rows(split, dt)
    if len(rows) == 0:
        raise ValueError(f"no {split} tuples")
    a_true = ds.a_t[rows]
    out = []
    for label, (model, latents, code) in entries.items():
        a_fd, a_ae = id_predictions(model, latents, ds, rows, code)
        pairs = {"fwddynpred": (a_fd, a_true), "AEpred": (a_ae, a_true), "fwddynpred_vs_AEpred": (a_fd, a_ae)}
        for cond in ID_CONDITIONS:
            p, t = pairs[cond]
            for part in PARTS:
                out.append((label, cond, part, weighted_cosine_distance(p, t, part)))
    return out
