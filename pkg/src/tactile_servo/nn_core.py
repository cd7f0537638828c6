"""Small dense networks with exact gradients, input Jacobians and RMSProp.

Layer l computes ``u = h W + b`` (optionally batch-normalised) and
``h' = act(u)``. Weights are stored ``(fan_in, fan_out)`` so batches are rows.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACT_CODES = {"linear": 0, "tanh": 1}
BN_MOMENTUM = 0.99
BN_EPS = 1e-5


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple
    activations: tuple
    batch_norm: tuple

    def __post_init__(self):
        n = len(self.widths) - 1
        if n < 1:
            raise ValueError("an MLP needs at least one layer")
        if any(int(w) < 1 for w in self.widths):
            raise ValueError(f"bad widths {self.widths}")
        if len(self.activations) != n or len(self.batch_norm) != n:
            raise ValueError("need one activation and one batch-norm flag per layer")
        for a in self.activations:
            if a not in ACT_CODES:
                raise ValueError(f"unknown activation {a!r}")

    @property
    def n_layers(self):
        return len(self.widths) - 1

    @classmethod
    def tanh_net(cls, widths, bn_hidden=False, linear_out=True):
        """tanh hidden layers, optional linear output, BN on hidden layers only."""
        n = len(widths) - 1
        acts = ["tanh"] * n
        if linear_out:
            acts[-1] = "linear"
        bn = [bn_hidden and i < n - 1 for i in range(n)]
        return cls(tuple(int(w) for w in widths), tuple(acts), tuple(bn))


def _act(name, u):
    return np.tanh(u) if name == "tanh" else u


def _dact(name, u, h):
    """First and second derivative of the activation at ``u`` (``h = act(u)``)."""
    if name == "tanh":
        d1 = 1.0 - h * h
        return d1, -2.0 * h * d1
    return np.ones_like(u), np.zeros_like(u)


@dataclass
class Cache:
    version: int
    training: bool
    x: np.ndarray
    a: list = field(default_factory=list)  # affine output before BN
    xhat: list = field(default_factory=list)
    inv_std: list = field(default_factory=list)
    u: list = field(default_factory=list)  # pre-activation
    h: list = field(default_factory=list)  # layer outputs, h[-1] is the net output


class Mlp:
    """Parameters plus forward / backward passes for one MlpSpec."""

    def __init__(self, spec: MlpSpec, rng=None):
        self.spec = spec
        rng = rng if rng is not None else np.random.default_rng(0)
        self.W, self.b, self.gamma, self.beta = [], [], [], []
        self.run_mean, self.run_var = [], []
        for l in range(spec.n_layers):
            fi, fo = spec.widths[l], spec.widths[l + 1]
            lim = np.sqrt(6.0 / (fi + fo))
            self.W.append(rng.uniform(-lim, lim, (fi, fo)))
            self.b.append(np.zeros(fo))
            if spec.batch_norm[l]:
                self.gamma.append(np.ones(fo))
                self.beta.append(np.zeros(fo))
                self.run_mean.append(np.zeros(fo))
                self.run_var.append(np.ones(fo))
            else:
                self.gamma.append(None)
                self.beta.append(None)
                self.run_mean.append(None)
                self.run_var.append(None)
        self.training = True
        self.version = 0

    # -- parameter bookkeeping ----------------------------------------------

    @property
    def params(self):
        """Trainable tensors in declaration order: per layer W, b, then gamma, beta."""
        out = []
        for l in range(self.spec.n_layers):
            out += [self.W[l], self.b[l]]
            if self.spec.batch_norm[l]:
                out += [self.gamma[l], self.beta[l]]
        return out

    def zero_grads(self):
        return [np.zeros_like(p) for p in self.params]

    def touch(self):
        """Mark parameters as changed, invalidating earlier caches."""
        self.version += 1

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def copy(self):
        new = Mlp.__new__(Mlp)
        new.spec = self.spec
        cp = lambda xs: [None if x is None else x.copy() for x in xs]  # noqa: E731
        new.W, new.b, new.gamma, new.beta = cp(self.W), cp(self.b), cp(self.gamma), cp(self.beta)
        new.run_mean, new.run_var = cp(self.run_mean), cp(self.run_var)
        new.training = self.training
        new.version = 0
        return new

    # -- forward / backward -------------------------------------------------

    def forward(self, x, training=None, update_stats=True):
        """Run the net; returns (output, cache).

        In training mode BN layers use batch statistics (and update running
        statistics unless ``update_stats`` is False); in inference mode they
        use running statistics.
        """
        training = self.training if training is None else training
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.spec.widths[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.spec.widths[0]}")
        c = Cache(self.version, training, x)
        h = x
        for l in range(self.spec.n_layers):
            a = h @ self.W[l] + self.b[l]
            c.a.append(a)
            if self.spec.batch_norm[l]:
                if training:
                    mu = a.mean(axis=0)
                    var = a.var(axis=0)
                    if update_stats:
                        n = a.shape[0]
                        unbiased = var * n / max(n - 1, 1)
                        self.run_mean[l] = BN_MOMENTUM * self.run_mean[l] + (1 - BN_MOMENTUM) * mu
                        self.run_var[l] = BN_MOMENTUM * self.run_var[l] + (1 - BN_MOMENTUM) * unbiased
                else:
                    mu, var = self.run_mean[l], self.run_var[l]
                inv = 1.0 / np.sqrt(var + BN_EPS)
                xhat = (a - mu) * inv
                u = self.gamma[l] * xhat + self.beta[l]
                c.xhat.append(xhat)
                c.inv_std.append(inv)
            else:
                u = a
                c.xhat.append(None)
                c.inv_std.append(None)
            c.u.append(u)
            h = _act(self.spec.activations[l], u)
            c.h.append(h)
        return h, c

    def recalibrate_bn(self, x):
        """Set BN running statistics to population statistics of ``x``.

        Layers are processed in order so each sees inputs produced with the
        already-recalibrated layers before it. Variance is unbiased.
        """
        h = np.atleast_2d(np.asarray(x, dtype=float))
        n = h.shape[0]
        for l in range(self.spec.n_layers):
            a = h @ self.W[l] + self.b[l]
            if self.spec.batch_norm[l]:
                self.run_mean[l] = a.mean(axis=0)
                self.run_var[l] = a.var(axis=0) * n / max(n - 1, 1)
                u = self.gamma[l] * (a - self.run_mean[l]) / np.sqrt(self.run_var[l] + BN_EPS) + self.beta[l]
            else:
                u = a
            h = _act(self.spec.activations[l], u)
        self.touch()

    def __call__(self, x):
        return self.forward(x, update_stats=False)[0]

    def predict(self, x):
        """Inference-mode output (pure function of ``x``)."""
        return self.forward(x, training=False)[0]

    def backward(self, cache: Cache, gout, gpre=None):
        """Reverse pass. Returns (parameter grads in ``params`` order, input grad).

        ``gpre`` optionally injects extra loss gradients on each layer's
        pre-activation ``u`` (list with None entries allowed).
        """
        if cache.version != self.version:
            raise RuntimeError("stale cache: parameters changed since forward")
        spec = self.spec
        L = spec.n_layers
        grads_W, grads_b, grads_g, grads_be = [None] * L, [None] * L, [None] * L, [None] * L
        g = np.asarray(gout, dtype=float)
        if g.shape != cache.h[-1].shape:
            g = g.reshape(cache.h[-1].shape)
        for l in range(L - 1, -1, -1):
            d1, _ = _dact(spec.activations[l], cache.u[l], cache.h[l])
            gu = g * d1
            if gpre is not None and gpre[l] is not None:
                gu = gu + gpre[l]
            if spec.batch_norm[l]:
                xhat = cache.xhat[l]
                grads_g[l] = np.sum(gu * xhat, axis=0)
                grads_be[l] = np.sum(gu, axis=0)
                gx = gu * self.gamma[l]
                if cache.training:
                    n = gx.shape[0]
                    ga = cache.inv_std[l] / n * (
                        n * gx - gx.sum(axis=0) - xhat * np.sum(gx * xhat, axis=0)
                    )
                else:
                    ga = gx * cache.inv_std[l]
            else:
                ga = gu
            hin = cache.x if l == 0 else cache.h[l - 1]
            grads_W[l] = hin.T @ ga
            grads_b[l] = ga.sum(axis=0)
            g = ga @ self.W[l].T
        grads = []
        for l in range(L):
            grads += [grads_W[l], grads_b[l]]
            if spec.batch_norm[l]:
                grads += [grads_g[l], grads_be[l]]
        return grads, g

    # -- input Jacobians ----------------------------------------------------

    def _layer_scale(self, l):
        """Per-feature d u / d a of an inference-mode layer."""
        if self.spec.batch_norm[l]:
            return self.gamma[l] / np.sqrt(self.run_var[l] + BN_EPS)
        return None

    def jacobian(self, x):
        """Batched input Jacobians, shape (n, out, in), plus a cache for ``jacobian_backward``.

        Inference mode only: a Jacobian must depend on the point, not the batch.
        """
        if self.training:
            raise RuntimeError("input Jacobians need inference mode (call .eval())")
        out, c = self.forward(x, training=False)
        n, din = c.x.shape
        T = np.broadcast_to(np.eye(din), (n, din, din))
        Ts, As = [T], []
        for l in range(self.spec.n_layers):
            A = T @ self.W[l]  # (n, in, w)
            s = self._layer_scale(l)
            if s is not None:
                A = A * s
            d1, _ = _dact(self.spec.activations[l], c.u[l], c.h[l])
            T = A * d1[:, None, :]
            As.append(A)
            Ts.append(T)
        c.T = Ts
        c.A = As
        return np.transpose(T, (0, 2, 1)), out, c

    def input_jacobian(self, x):
        """Jacobian d output / d input at a single point (out x in)."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return self.jacobian(x)[0][0]

    def jacobian_backward(self, cache, gJ, gout=None):
        """Gradients of a loss L(J, out) given dL/dJ (n, out, in) and dL/dout.

        Backpropagates through J = T_L^T with T_l = (T_{l-1} W_l s_l) * f'(u_l);
        the f'' terms enter as injected pre-activation gradients.
        """
        if cache.version != self.version:
            raise RuntimeError("stale cache: parameters changed since forward")
        spec = self.spec
        L = spec.n_layers
        G = np.transpose(np.asarray(gJ, dtype=float), (0, 2, 1))  # dL/dT_L
        gW_extra = [None] * L
        gscale = [None] * L
        gpre = [None] * L
        for l in range(L - 1, -1, -1):
            d1, d2 = _dact(spec.activations[l], cache.u[l], cache.h[l])
            A = cache.A[l]
            gA = G * d1[:, None, :]
            gD = np.sum(G * A, axis=1)  # (n, w)
            if spec.activations[l] != "linear":
                gpre[l] = gD * d2
            s = self._layer_scale(l)
            if s is not None:
                B = A / s  # T_{l-1} W_l
                gscale[l] = np.sum(gA * B, axis=(0, 1))
                gA = gA * s
            Tprev = cache.T[l]
            gW_extra[l] = np.einsum("nij,nik->jk", Tprev, gA)
            G = gA @ self.W[l].T
        if gout is None:
            gout = np.zeros_like(cache.h[-1])
        grads, gin = self.backward(cache, gout, gpre)
        # add the direct dependence of J on W (and on BN scale via s = gamma / std)
        k = 0
        for l in range(L):
            grads[k] = grads[k] + gW_extra[l]
            k += 2
            if spec.batch_norm[l]:
                grads[k] = grads[k] + gscale[l] / np.sqrt(self.run_var[l] + BN_EPS)
                k += 2
        return grads, gin


# ---------------------------------------------------------------------------
# optimiser


@dataclass
class RmsProp:
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    acc: list | None = None

    def step(self, params, grads):
        """In-place update: acc <- rho acc + (1 - rho) g^2; p <- p - lr g / sqrt(acc + eps)."""
        if self.acc is None:
            self.acc = [np.zeros_like(p) for p in params]
        for p, g, a in zip(params, grads, self.acc):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            a *= self.rho
            a += (1.0 - self.rho) * g * g
            p -= self.lr * g / np.sqrt(a + self.eps)


def rmsprop_step(params, grads, state: RmsProp):
    state.step(params, grads)
    return params, state


# ---------------------------------------------------------------------------
# checkpoints: magic, version, n_layers, widths, act codes, bn flags,
# parameters in declaration order, then running stats; little-endian float64

CKPT_MAGIC = b"MLPC"
CKPT_VERSION = 1


def _write_net(fh, net: Mlp):
    spec = net.spec
    L = spec.n_layers
    fh.write(struct.pack("<I", L))
    fh.write(struct.pack(f"<{L + 1}I", *spec.widths))
    fh.write(struct.pack(f"<{L}B", *[ACT_CODES[a] for a in spec.activations]))
    fh.write(struct.pack(f"<{L}B", *[int(b) for b in spec.batch_norm]))
    for p in net.params:
        fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    for l in range(L):
        if spec.batch_norm[l]:
            fh.write(net.run_mean[l].astype("<f8").tobytes())
            fh.write(net.run_var[l].astype("<f8").tobytes())


def _read_net(buf, off):
    (L,) = struct.unpack_from("<I", buf, off)
    off += 4
    widths = struct.unpack_from(f"<{L + 1}I", buf, off)
    off += 4 * (L + 1)
    codes = struct.unpack_from(f"<{L}B", buf, off)
    off += L
    bn = struct.unpack_from(f"<{L}B", buf, off)
    off += L
    names = {v: k for k, v in ACT_CODES.items()}
    spec = MlpSpec(tuple(widths), tuple(names[c] for c in codes), tuple(bool(b) for b in bn))
    net = Mlp(spec)

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(buf, "<f8", n, off).astype(float).reshape(shape)
        off += 8 * n
        return arr

    for l in range(L):
        net.W[l] = take(net.W[l].shape)
        net.b[l] = take(net.b[l].shape)
        if spec.batch_norm[l]:
            net.gamma[l] = take(net.gamma[l].shape)
            net.beta[l] = take(net.beta[l].shape)
    for l in range(L):
        if spec.batch_norm[l]:
            net.run_mean[l] = take(net.run_mean[l].shape)
            net.run_var[l] = take(net.run_var[l].shape)
    net.training = False
    return net, off


def save_checkpoint(path, nets, extra=None):
    """Write one or more networks (and an optional float vector) to one file."""
    nets = list(nets)
    extra = np.zeros(0) if extra is None else np.asarray(extra, dtype=float).ravel()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<II", CKPT_VERSION, len(nets)))
        for net in nets:
            _write_net(fh, net)
        fh.write(struct.pack("<I", len(extra)))
        fh.write(extra.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns (list of Mlp in inference mode, extra float vector)."""
    buf = Path(path).read_bytes()
    if buf[:4] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    version, n = struct.unpack_from("<II", buf, 4)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    nets = []
    for _ in range(n):
        net, off = _read_net(buf, off)
        nets.append(net)
    (ne,) = struct.unpack_from("<I", buf, off)
    off += 4
    extra = np.frombuffer(buf, "<f8", ne, off).astype(float)
    if off + 8 * ne != len(buf):
        raise ValueError(f"{path}: trailing or missing bytes")
    return nets, extra
