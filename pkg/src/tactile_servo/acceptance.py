"""Self-contained checks behind the acceptance criteria that need no trained models.

Controller optimality (KKT residuals and perturbations), gradient integrity
against central finite differences, and geodesic accuracy on a spherical cap.
The data-dependent criteria are evaluated by the experiment pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import dynamics as dy
from . import geodesy
from .nn_core import Mlp, MlpSpec

KKT_TOL = 1e-8
GRAD_TOL = 1e-4
CAP_TOL = 0.05


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"criterion {self.number} ({self.name}): {'PASS' if self.passed else 'FAIL'} - {self.detail}"


# ---------------------------------------------------------------------------
# criterion 5


def _unit_model(variant, rng):
    m = dy.DynamicsModel(variant, rng, id_variant="ll" if variant == "ll" else "nj")
    for p in m.net.params:
        p += rng.normal(0, 0.3, p.shape)
    m.net.touch()
    return m


def controller_optimality(n=1000, n_perturb=100, seed=0):
    """Max KKT residuals of id_ll and id_nj and the count of perturbations that beat them."""
    rng = np.random.default_rng(seed)
    out = {}
    for name, variant in (("id_ll", "ll"), ("id_nj", "nl")):
        m = _unit_model(variant, rng)
        z_t, z_T = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        dt = rng.uniform(0.05, 1.0, n)
        beta = float(rng.uniform(0.01, 1.0))
        if variant == "ll":
            A, B, c, _ = m.abc(z_t)
            a = dy.id_ll(m, z_T, z_t, dt, beta)
        else:
            z_prev, a_prev = rng.normal(size=(n, 3)), rng.normal(size=(n, 6))
            A, B, c, _ = dy.nj_linearisation(m, z_prev, a_prev, dt)
            a = dy.id_nj(m, z_T, z_t, z_prev, a_prev, dt, beta)
        stat, mult = dy.kkt_residuals(A, B, c, z_t, z_T, dt, beta, a)
        best = dy.control_objective(A, B, c, z_t, z_T, dt, beta, a)
        beaten = 0
        for _ in range(n_perturb):
            d = rng.normal(size=a.shape)
            d *= 1e-3 / np.linalg.norm(d, axis=1, keepdims=True)
            beaten += int(np.sum(dy.control_objective(A, B, c, z_t, z_T, dt, beta, a + d) < best))
        out[name] = (float(max(stat.max(), mult.max())), beaten)
    return out


def check_controller_optimality(seed=0):
    res = controller_optimality(seed=seed)
    ok = all(r <= KKT_TOL and b == 0 for r, b in res.values())
    detail = "; ".join(f"{k}: max KKT residual {r:.2e}, perturbations better {b}" for k, (r, b) in res.items())
    return CriterionResult(5, "controller optimality", ok, detail)


# ---------------------------------------------------------------------------
# criterion 6


def _tensor_err(num, ana, floor):
    return float(np.max(np.abs(num - ana)) / max(float(np.max(np.abs(num))), floor))


def _fd_params(params, touch, loss, h):
    out = []
    for p in params:
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            touch()
            fp = loss()
            p[idx] = old - h
            touch()
            fm = loss()
            p[idx] = old
            touch()
            num[idx] = (fp - fm) / (2 * h)
        out.append(num)
    return out


def _worst(nums, anas):
    floor = 1e-3 * max(float(np.max(np.abs(n))) for n in nums)
    floor = max(floor, 1e-300)
    return max(_tensor_err(n, a, floor) for n, a in zip(nums, anas))


def _mlp_instance(rng, h=1e-5):
    """Encoder-shaped net with BN in training mode: parameter and input gradients."""
    net = Mlp(MlpSpec.tanh_net([19, 19, 12, 6, 3], bn_hidden=True), rng)
    for l in range(net.spec.n_layers):
        if net.spec.batch_norm[l]:
            net.gamma[l][:] = rng.uniform(0.5, 1.5, net.gamma[l].shape)
            net.beta[l][:] = rng.normal(0, 0.3, net.beta[l].shape)
    x = rng.normal(size=(6, 19))
    R = rng.normal(size=(6, 3))

    def loss():
        y, _ = net.forward(x, training=True, update_stats=False)
        return float(np.sum(R * y) + 0.5 * np.sum(y * y))

    y, cache = net.forward(x, training=True, update_stats=False)
    grads, gin = net.backward(cache, R + y)
    nums = _fd_params(net.params, net.touch, loss, h)
    num_in = _fd_params([x], lambda: None, loss, h)[0]
    return max(_worst(nums, grads), _worst([num_in], [gin]))


def _dyn_instance(rng, variant, controller, lin_scale, h=1e-6):
    m = _unit_model(variant, rng)
    m.id_variant = controller
    n = 4
    z_t, a_prev = rng.normal(size=(n, 3)), rng.normal(size=(n, 6))
    z_prev = z_t + 0.1 * rng.normal(size=(n, 3))
    a_true = rng.normal(size=(n, 6))
    z_T = z_t + 0.3 * rng.normal(size=(n, 3))
    acts = rng.normal(size=(n, 2, 6))
    tgt = z_t[:, None] + 0.3 * rng.normal(size=(n, 2, 3))
    dt = rng.uniform(0.1, 0.5, n)
    errs = []
    fd_loss = lambda: dy.loss_lfd(m, z_t, acts, tgt, dt)[0]  # noqa: E731
    errs.append(_worst(_fd_params(m.net.params, m.net.touch, fd_loss, h), dy.loss_lfd(m, z_t, acts, tgt, dt)[1]))
    id_loss = lambda: dy.loss_id(m, z_T, z_t, z_prev, a_prev, a_true, dt, controller, lin_scale)  # noqa: E731
    errs.append(_worst(_fd_params(m.net.params, m.net.touch, lambda: id_loss()[0], h), id_loss()[1]))
    if variant == "nl":
        # input Jacobian of the network
        Jz, Ja, _, _ = m.jacobians(z_t, a_prev)
        J = np.concatenate([Jz, Ja], axis=2)
        x = np.concatenate([z_t, a_prev], axis=1)
        num = np.zeros_like(J)
        for j in range(9):
            e = np.zeros(9)
            e[j] = 1e-5
            num[:, :, j] = (m.lfd((x + e)[:, :3], (x + e)[:, 3:]) - m.lfd((x - e)[:, :3], (x - e)[:, 3:])) / 2e-5
        errs.append(_worst([num], [J]))
        # NG action gradient
        g = dy.ng_gradient(m, z_T, z_t, dt)
        d = lambda a: np.sum((m.integrate(z_t, a, dt) - z_T) ** 2, axis=1)  # noqa: E731
        num = np.zeros_like(g)
        for j in range(6):
            e = np.zeros((n, 6))
            e[:, j] = 1e-5
            num[:, j] = (d(e) - d(-e)) / 2e-5
        errs.append(_worst([num], [g]))
    return max(errs)


def gradient_integrity(n=100, seed=0):
    """Worst relative error per check family over ``n`` random instances."""
    rng = np.random.default_rng(seed)
    fams = {"mlp": [], "ll": [], "nj": [], "ng": []}
    for i in range(n):
        lin_scale = None if i % 2 == 0 else 0.5
        fams["mlp"].append(_mlp_instance(rng))
        fams["ll"].append(_dyn_instance(rng, "ll", "ll", lin_scale))
        fams["nj"].append(_dyn_instance(rng, "nl", "nj", lin_scale))
        fams["ng"].append(_dyn_instance(rng, "nl", "ng", lin_scale))
    return {k: float(max(v)) for k, v in fams.items()}


def check_gradient_integrity(n=100, seed=0):
    res = gradient_integrity(n, seed)
    ok = all(v <= GRAD_TOL for v in res.values())
    detail = ", ".join(f"{k} max rel err {v:.1e}" for k, v in res.items())
    return CriterionResult(6, "gradient integrity", ok, f"{n} instances; {detail}")


# ---------------------------------------------------------------------------
# criterion 7


def cap_points(n, r=0.008, seed=0, jitter=0.3):
    """Quasi-uniform (jittered Fibonacci) points on a hemispherical cap about +x; returns (points, unit)."""
    rng = np.random.default_rng(seed)
    k = np.arange(n)
    u = np.clip((k + 0.5 + jitter * rng.uniform(-0.5, 0.5, n)) / n, 0, 1)
    phi = 2 * math.pi * ((k * 0.5 * (math.sqrt(5) - 1)) % 1.0)
    x = 1 - u
    rho = np.sqrt(1 - x**2)
    v = np.stack([x, rho * np.sin(phi), -rho * np.cos(phi)], 1)
    return r * v, v


def iid_cap_points(n, r=0.008, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v[:, 0] = np.abs(v[:, 0])
    return r * v, v


def cap_geodesic_error(points, unit, r=0.008, M=18, min_hops=5):
    """Max relative error of graph geodesics vs great-circle distance for pairs >= min_hops apart."""
    g = geodesy.knn_graph(points, M)
    D = geodesy.geodesic_matrix(g)
    n = len(points)
    hops = shortest_path(csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(n, n)), unweighted=True)
    true = r * np.arccos(np.clip(unit @ unit.T, -1, 1))
    far = hops >= min_hops
    return float(np.max(np.abs(D[far] / true[far] - 1)))


def check_geodesy_cap(n=500, M=18, seed=0):
    err = cap_geodesic_error(*cap_points(n, seed=seed), M=M)
    err_iid = cap_geodesic_error(*iid_cap_points(n, seed=seed), M=M)
    return CriterionResult(7, "geodesic oracle agreement", err <= CAP_TOL,
                           f"max rel err {err:.3f} on a quasi-uniform cap (N'={n}, M={M}, >= 5 hops); "
                           f"iid sample for reference {err_iid:.3f}")
