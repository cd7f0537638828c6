"""Demonstrations -> autoencoder samples and transition tuples.

Steps: zero-phase low-pass of the tactile stream, pressure, contact
segmentation, resampling at several strides with action averaging, and
assembly of (s_{t-1}, a_{t-1}, s_t, a_t, s_{t+1}) tuples.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.signal import butter, filtfilt

from .config import read_kv, write_kv
from .skin_sim import TACTILE_HZ, TWIST_HZ

SPLITS = ("train", "val", "test")


class EmptyDatasetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# signal helpers


def lowpass(x, cutoff_hz=1.0, fs=TACTILE_HZ, order=2):
    """Zero-phase Butterworth low-pass along axis 0 (forward-backward biquad)."""
    x = np.asarray(x, dtype=float)
    b, a = butter(order, cutoff_hz, btype="low", fs=fs)
    padlen = 3 * max(len(a), len(b))
    if x.shape[0] <= padlen:
        raise ValueError(f"stream of {x.shape[0]} samples is shorter than the filter warm-up ({padlen + 1})")
    return filtfilt(b, a, x, axis=0)


def pressure(s):
    """p = -mean(s) over electrodes (last axis)."""
    return -np.mean(np.asarray(s, dtype=float), axis=-1)


def segment_contacts(p, threshold, min_len=10):
    """[start, end) ranges where p > threshold, dropping runs shorter than ``min_len``."""
    above = np.asarray(p) > threshold
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [(int(a), int(b)) for a, b in zip(starts, ends) if b - a >= min_len]


def base_to_ee_twist(xb, R):
    """blockdiag(R^T, R^T) applied to (linear, angular); batches broadcast over (..., 6)."""
    xb = np.asarray(xb, dtype=float)
    R = np.asarray(R, dtype=float)
    RT = np.swapaxes(R, -1, -2)
    lin = np.einsum("...ij,...j->...i", RT, xb[..., :3])
    ang = np.einsum("...ij,...j->...i", RT, xb[..., 3:])
    return np.concatenate([lin, ang], axis=-1)


def ee_to_base_twist(xe, R):
    xe = np.asarray(xe, dtype=float)
    R = np.asarray(R, dtype=float)
    lin = np.einsum("...ij,...j->...i", R, xe[..., :3])
    ang = np.einsum("...ij,...j->...i", R, xe[..., 3:])
    return np.concatenate([lin, ang], axis=-1)


def resample_with_action_average(s, twist_base, rotations, tactile_idx, stride, start=0,
                                 stop=None, frame="start"):
    """Subsample tactile rows ``start, start+stride, ...`` below ``stop``.

    Returns (states (m, E), actions (m-1, 6), dt). Action i averages every
    300 Hz base twist between tactile samples i and i+1, then is expressed in
    the end-effector frame at the window start (or midpoint).
    """
    if frame not in ("start", "midpoint"):
        raise ValueError(f"unknown action frame {frame!r}")
    stop = len(tactile_idx) if stop is None else stop
    rows = np.arange(start, stop, stride)
    states = np.asarray(s)[rows]
    tw = np.asarray(twist_base, dtype=float)
    csum = np.concatenate([np.zeros((1, 6)), np.cumsum(tw, axis=0)])
    lo = np.asarray(tactile_idx)[rows[:-1]]
    hi = np.asarray(tactile_idx)[rows[1:]]
    mean_b = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    ref = lo if frame == "start" else (lo + hi - 1) // 2
    acts = base_to_ee_twist(mean_b, np.asarray(rotations)[ref]).reshape(-1, 6)
    return states, acts, stride / TACTILE_HZ


# ---------------------------------------------------------------------------
# dataset


@dataclass
class DataConfig:
    cutoff_hz: float = 1.0
    threshold_frac: float = 0.05
    min_segment: int = 10
    train_strides: tuple = (29, 30, 31, 32, 33)
    test_stride: int = 31
    split_fracs: tuple = (0.85, 0.075, 0.075)
    n_ae: int = 5500
    n_tuples: int = 15000
    action_frame: str = "start"
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        kw = dict(d)
        for k in ("train_strides", "split_fracs"):
            if k in kw and not isinstance(kw[k], tuple):
                v = kw[k] if isinstance(kw[k], list) else [kw[k]]
                kw[k] = tuple(v)
        return cls(**kw)


@dataclass
class Dataset:
    # autoencoder samples
    S: np.ndarray
    P: np.ndarray
    contact: np.ndarray
    ae_split: np.ndarray
    # transition tuples; seq/pos locate a tuple inside its resampled sequence
    s_prev: np.ndarray
    a_prev: np.ndarray
    s_t: np.ndarray
    a_t: np.ndarray
    s_next: np.ndarray
    dt: np.ndarray
    seq: np.ndarray
    pos: np.ndarray
    tup_split: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_electrodes(self):
        return self.S.shape[1]

    def ae_rows(self, split):
        return np.flatnonzero(self.ae_split == split)

    def tuple_rows(self, split, dt=None):
        m = self.tup_split == split
        if dt is not None:
            m &= np.isclose(self.dt, dt)
        return np.flatnonzero(m)

    def chains(self, rows, length):
        """Start rows r such that rows r..r+length-1 are consecutive tuples of one sequence.

        Returns an (n, length) array of tuple row ids.
        """
        rows = np.asarray(rows)
        key = {(int(self.seq[r]), int(self.pos[r])): int(r) for r in rows}
        out = []
        for r in rows:
            q, p = int(self.seq[r]), int(self.pos[r])
            ids = [key.get((q, p + c)) for c in range(length)]
            if all(i is not None for i in ids):
                out.append(ids)
        return np.array(out, dtype=np.int64).reshape(-1, length)


def _segment_split(n_items, sizes, fracs, rng):
    """Assign whole segments to splits so that sample counts follow ``fracs``."""
    order = rng.permutation(n_items)
    cum = np.cumsum(np.asarray(sizes)[order]) / max(np.sum(sizes), 1)
    bounds = np.cumsum(fracs)
    lab = np.empty(n_items, dtype=object)
    prev = 0.0
    for o, c in zip(order, cum):
        mid = 0.5 * (prev + c)
        lab[o] = SPLITS[int(np.searchsorted(bounds, mid))] if mid < bounds[-1] else SPLITS[-1]
        prev = c
    return lab


def build_dataset(demos, cfg: DataConfig | None = None) -> Dataset:
    cfg = cfg or DataConfig()
    rng = np.random.default_rng(cfg.seed)
    filt, press = [], []
    for d in demos:
        s_f = lowpass(d.s, cfg.cutoff_hz, TACTILE_HZ)
        filt.append(s_f)
        press.append(pressure(s_f))
    peak = max((float(p.max()) for p in press), default=0.0)
    if peak <= 0:
        raise EmptyDatasetError("no demonstration makes contact")
    thr = cfg.threshold_frac * peak

    segs = []  # (demo, start, end)
    for k, p in enumerate(press):
        segs += [(k, a, b) for a, b in segment_contacts(p, thr, cfg.min_segment)]
    if not segs:
        raise EmptyDatasetError("thresholding removed every contact segment")
    seg_split = _segment_split(len(segs), [b - a for _, a, b in segs], cfg.split_fracs, rng)

    # autoencoder samples: every in-contact 100 Hz sample, then subsampled
    ae_src = [(k, i, seg_split[j]) for j, (k, a, b) in enumerate(segs) for i in range(a, b)]
    pick = np.sort(rng.choice(len(ae_src), min(cfg.n_ae, len(ae_src)), replace=False))
    S = np.array([filt[ae_src[i][0]][ae_src[i][1]] for i in pick])
    P = pressure(S)
    contact = np.array([demos[ae_src[i][0]].contact[ae_src[i][1]] for i in pick])
    ae_split = np.array([ae_src[i][2] for i in pick]).astype(str)

    # candidate resampled sequences per (segment, stride, offset); whole
    # sequences are kept so that chains stay intact
    cands = []
    strides = sorted(set(cfg.train_strides) | {cfg.test_stride})
    for j, (k, a, b) in enumerate(segs):
        for stride in strides:
            for off in range(stride):
                n_states = len(range(a + off, b, stride))
                if n_states < 3:
                    break
                cands.append((j, stride, off, n_states - 2))
    if not cands:
        raise EmptyDatasetError("no contact segment is long enough for a transition tuple")
    chosen, total = [], 0
    for q in rng.permutation(len(cands)):
        if total >= cfg.n_tuples:
            break
        chosen.append(cands[q])
        total += cands[q][3]
    chosen.sort()

    cols = {k: [] for k in ("s_prev", "a_prev", "s_t", "a_t", "s_next", "dt", "seq", "pos", "split")}
    for new_id, (j, stride, off, _) in enumerate(chosen):
        k, a, b = segs[j]
        d = demos[k]
        st, ac, dt = resample_with_action_average(
            filt[k], d.twist_base, d.rotations, d.tactile_idx, stride, a + off, b, cfg.action_frame,
        )
        m = len(st) - 2
        cols["s_prev"].append(st[:-2])
        cols["a_prev"].append(ac[:-1])
        cols["s_t"].append(st[1:-1])
        cols["a_t"].append(ac[1:])
        cols["s_next"].append(st[2:])
        cols["dt"].append(np.full(m, dt))
        cols["seq"].append(np.full(m, new_id))
        cols["pos"].append(np.arange(m))
        cols["split"].append(np.full(m, seg_split[j], dtype=object))
    cols = {k: np.concatenate(v) for k, v in cols.items()}
    meta = {
        "threshold": thr,
        "peak_pressure": peak,
        "n_segments": len(segs),
        "n_sequences": len(chosen),
        **{f"cfg_{k}": v for k, v in asdict(cfg).items()},
    }
    return Dataset(
        S=S, P=P, contact=contact, ae_split=ae_split,
        s_prev=cols["s_prev"], a_prev=cols["a_prev"], s_t=cols["s_t"], a_t=cols["a_t"],
        s_next=cols["s_next"], dt=cols["dt"], seq=cols["seq"], pos=cols["pos"],
        tup_split=cols["split"].astype(str), meta=meta,
    )


# ---------------------------------------------------------------------------
# csv io


def _f(v):
    return repr(float(v))


def save_dataset(ds: Dataset, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    E = ds.n_electrodes
    with open(d / "ae_samples.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"s_{i + 1}" for i in range(E)] + ["p", "contact_x", "contact_y", "contact_z"])
        for s, p, c in zip(ds.S, ds.P, ds.contact):
            w.writerow([_f(v) for v in s] + [_f(p)] + [_f(v) for v in c])
    with open(d / "tuples.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["seq", "pos", "dt"]
        for name in ("s_prev", "a_prev", "s_t", "a_t", "s_next"):
            n = E if name.startswith("s") else 6
            head += [f"{name}_{i + 1}" for i in range(n)]
        fh.write("# one transition (s_{t-1}, a_{t-1}, s_t, a_t, s_{t+1}); actions are end-effector twists (v, w)\n")
        w.writerow(head)
        for r in range(len(ds.dt)):
            row = [int(ds.seq[r]), int(ds.pos[r]), _f(ds.dt[r])]
            for arr in (ds.s_prev, ds.a_prev, ds.s_t, ds.a_t, ds.s_next):
                row += [_f(v) for v in arr[r]]
            w.writerow(row)
    with open(d / "split.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["table", "row", "split"])
        for i, sp in enumerate(ds.ae_split):
            w.writerow(["ae", i, sp])
        for i, sp in enumerate(ds.tup_split):
            w.writerow(["tuple", i, sp])
    write_kv(d / "dataset.manifest", {
        "n_ae": len(ds.S), "n_tuples": len(ds.dt), "n_electrodes": E,
        **{k: (",".join(map(str, v)) if isinstance(v, (tuple, list)) else v) for k, v in ds.meta.items()},
    }, header="dataset")


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    man = read_kv(d / "dataset.manifest")
    E = int(man["n_electrodes"])
    ae = np.loadtxt(d / "ae_samples.csv", delimiter=",", skiprows=1, ndmin=2)
    tup = np.loadtxt(d / "tuples.csv", delimiter=",", skiprows=2, ndmin=2)
    split = {"ae": {}, "tuple": {}}
    with open(d / "split.csv", newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for table, row, sp in rd:
            split[table][int(row)] = sp
    c = 3
    blocks = []
    for n in (E, 6, E, 6, E):
        blocks.append(tup[:, c:c + n])
        c += n
    meta = {k: v for k, v in man.items() if k not in ("n_ae", "n_tuples", "n_electrodes")}
    return Dataset(
        S=ae[:, :E], P=ae[:, E], contact=ae[:, E + 1:E + 4],
        ae_split=np.array([split["ae"][i] for i in range(len(ae))]),
        s_prev=blocks[0], a_prev=blocks[1], s_t=blocks[2], a_t=blocks[3], s_next=blocks[4],
        dt=tup[:, 2], seq=tup[:, 0].astype(np.int64), pos=tup[:, 1].astype(np.int64),
        tup_split=np.array([split["tuple"][i] for i in range(len(tup))]), meta=meta,
    )
