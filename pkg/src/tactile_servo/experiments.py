"""Desk-scale reproduction pipeline: data, training, evaluation, servoing, acceptance.

Every stage reads and writes a run directory with a fixed layout:

  demos/                 raw demonstration CSVs
  data/, data/bins/      processed dataset and geodesic bins
  models/                ae_<tag>.bin and dyn_<tag>_s<seed>.bin checkpoints
  reports/               CSV reports and their SVG plots
  manifests/<stage>.txt  config, outputs with checksums, elapsed time
"""
from __future__ import annotations

import csv
import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, acceptance, datapipe, dynamics, embedding, geodesy, metrics, servo, skin_sim, svg
from .config import ConfigError, read_kv, typed, write_kv

log = logging.getLogger("tactile_servo")

DEFAULTS = {
    "run_dir": "runs/default",
    "seed": 0,
    "workers": 1,
    # demonstrations and dataset
    "n_regions": 7,
    "rot_reps": 3,
    "trans_reps": 4,
    "noise_std": 4e-4,
    "kernel_width": 0.006,
    "n_ae": 5500,
    "n_tuples": 15000,
    "bin_size": 2310,
    "knn": 18,
    # autoencoder
    "ae_iterations": 20000,
    "ae_batch": 128,
    "ae_lr": 1e-3,
    "w_aer": 100.0,
    "w_mds": 2e7,
    "w_cdp": 2e7,
    # dynamics
    "dyn_iterations": 20000,
    "dyn_batch": 128,
    "dyn_lr": 1e-3,
    "w_lfd": 1e8,
    "w_id": 3000.0,
    "id_lin_scale": 0.5,
    "beta": 1.0,
    "alpha": 5.0,
    "a_max": 0.05,
    "chain_train": 2,
    "dyn_seeds": 3,
    # evaluation and servoing
    "c_test": 3,
    "mds_pairs": 10000,
    "servo_runs": 20,
    "servo_steps": 200,
    "servo_tolerance": 0.003,
    "servo_smoothing": 0.5,
    "servo_noise": 4e-4,
    "lin_max": 0.05,
    "ang_max": 0.3,
    # acceptance
    "grad_instances": 100,
    "ae_time_budget": 900.0,
}

AE_TAGS = ("LatStruct", "noLatStruct")
# dynamics models: tag -> (variant, controller, ID loss on, encoder tag)
DYN_MODELS = {
    "LatStruct_IDloss": ("nl", "nj", True, "LatStruct"),
    "LatStruct_noIDloss": ("nl", "nj", False, "LatStruct"),
    "noLatStruct_IDloss": ("nl", "nj", True, "noLatStruct"),
    "noLatStruct_noIDloss": ("nl", "nj", False, "noLatStruct"),
    "LL_IDloss": ("ll", "ll", True, "LatStruct"),
    "NG_IDloss": ("nl", "ng", True, "LatStruct"),
}
FD_VARIANTS = ("LatStruct_IDloss", "LatStruct_noIDloss", "noLatStruct_IDloss", "noLatStruct_noIDloss")
ID_CONTROLLERS = {"LL": "LL_IDloss", "NG": "NG_IDloss", "NJ": "LatStruct_IDloss", "NJ_noID": "LatStruct_noIDloss"}
SERVO_MODEL = "LatStruct_IDloss"
SERVO_KINDS = ("rotation", "translation")
SERVO_PASS_FRAC = 0.7


def load_config(path=None, overrides=None) -> dict:
    """Typed config from an optional key = value file plus ``key=value`` overrides."""
    values = read_kv(path) if path is not None else {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    cfg = typed(values, DEFAULTS)
    for k in ("dyn_seeds", "servo_runs", "servo_steps", "ae_iterations", "dyn_iterations", "c_test", "workers"):
        if cfg[k] < 1:
            raise ConfigError(f"{k} must be >= 1")
    if cfg["servo_tolerance"] <= 0 or cfg["beta"] <= 0:
        raise ConfigError("servo_tolerance and beta must be positive")
    return cfg


class Run:
    """Paths of one run directory."""

    def __init__(self, cfg, data=None, models=None):
        self.cfg = cfg
        self.root = Path(cfg["run_dir"])
        self.demos = self.root / "demos"
        self.data = Path(data) if data else self.root / "data"
        self.bins = self.data / "bins"
        self.models = Path(models) if models else self.root / "models"
        self.reports = self.root / "reports"
        self.manifests = self.root / "manifests"

    def ae_path(self, tag):
        return self.models / f"ae_{tag}.bin"

    def dyn_path(self, tag, seed):
        return self.models / f"dyn_{tag}_s{seed}.bin"

    @property
    def dyn_seeds(self):
        return [self.cfg["seed"] + k for k in range(self.cfg["dyn_seeds"])]

    def require(self, *paths):
        for p in paths:
            if not Path(p).exists():
                raise FileNotFoundError(f"missing input {p}; run the earlier stage first")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(run: Run, stage, outputs, elapsed, extra=None):
    run.manifests.mkdir(parents=True, exist_ok=True)
    entries = {"stage": stage, "version": __version__, "elapsed_s": round(elapsed, 3)}
    entries.update(extra or {})
    entries.update({f"config.{k}": v for k, v in run.cfg.items()})
    for p in sorted(set(Path(o) for o in outputs)):
        if p.is_file():
            name = p.relative_to(run.root) if p.is_relative_to(run.root) else p
            entries[f"output.{name}"] = _sha256(p)
    write_kv(run.manifests / f"{stage}.txt", entries, header=f"tactile-servo {stage}")


def read_manifest(run: Run, stage):
    return read_kv(run.manifests / f"{stage}.txt")


def _sensor(cfg, noise):
    return skin_sim.SensorConfig(kernel_width=cfg["kernel_width"], noise_std=noise)


# ---------------------------------------------------------------------------
# data


def gen_data(run: Run):
    cfg = run.cfg
    t0 = time.perf_counter()
    surface = skin_sim.SkinSurface()
    demos = skin_sim.generate_demos(surface, run.demos, cfg["n_regions"], cfg["rot_reps"], cfg["trans_reps"],
                                    seed=cfg["seed"], sensor=_sensor(cfg, cfg["noise_std"]))
    log.info("generated %d demonstrations", len(demos))
    write_manifest(run, "gen-data", run.demos.glob("*"), time.perf_counter() - t0, {"n_demos": len(demos)})


def train_bins(ds, cfg):
    """Geodesic bins over the training AE rows; indices refer to dataset rows."""
    tr = ds.ae_rows("train")
    size = min(cfg["bin_size"], len(tr))
    bins = geodesy.bin_split(ds.contact[tr], size, cfg["knn"], seed=cfg["seed"])
    return [geodesy.GeodesicBin(tr[b.indices], b.matrix.copy(), b.M, b.seed) for b in bins]


def prep_data(run: Run):
    cfg = run.cfg
    t0 = time.perf_counter()
    run.require(run.demos / "demos.manifest")
    demos = skin_sim.load_demos(run.demos)
    ds = datapipe.build_dataset(demos, datapipe.DataConfig(n_ae=cfg["n_ae"], n_tuples=cfg["n_tuples"],
                                                           seed=cfg["seed"]))
    datapipe.save_dataset(ds, run.data)
    bins = train_bins(ds, cfg)
    geodesy.save_bins(run.bins, bins)
    log.info("dataset: %d AE samples, %d tuples, %d bins", len(ds.S), len(ds.dt), len(bins))
    write_manifest(run, "prep-data", list(run.data.glob("*")) + list(run.bins.glob("*")),
                   time.perf_counter() - t0, {"n_ae": len(ds.S), "n_tuples": len(ds.dt), "n_bins": len(bins)})


def _load_data(run: Run):
    run.require(run.data / "dataset.manifest")
    return datapipe.load_dataset(run.data), geodesy.load_bins(run.bins)


# ---------------------------------------------------------------------------
# training


def ae_config(cfg, lat_struct):
    return embedding.AeConfig(iterations=cfg["ae_iterations"], batch_size=cfg["ae_batch"], lr=cfg["ae_lr"],
                              w_aer=cfg["w_aer"], w_mds=cfg["w_mds"], w_cdp=cfg["w_cdp"], lat_struct=lat_struct)


def train_ae(run: Run):
    cfg = run.cfg
    ds, bins = _load_data(run)
    run.models.mkdir(parents=True, exist_ok=True)
    run.reports.mkdir(parents=True, exist_ok=True)
    outputs, timing = [], {}
    t_all = time.perf_counter()
    for tag in AE_TAGS:
        t0 = time.perf_counter()
        model, trace = embedding.train_autoencoder(ds.S, ds.P, bins, ae_config(cfg, tag == "LatStruct"),
                                                   seed=cfg["seed"], log=log.info)
        timing[f"train_s.{tag}"] = round(time.perf_counter() - t0, 3)
        model.save(run.ae_path(tag))
        csv_path = run.reports / f"ae_trace_{tag}.csv"
        trace.write_csv(csv_path)
        series = {"L_AER": (trace.iteration, trace.aer)}
        if tag == "LatStruct":
            series.update({"L_MDS": (trace.iteration, trace.mds), "L_CDP": (trace.iteration, trace.cdp)})
        svg.line_plot(csv_path.with_suffix(".svg"), series, f"autoencoder losses ({tag})", "iteration",
                      "batch loss", logy=True)
        outputs += [run.ae_path(tag), csv_path]
    write_manifest(run, "train-ae", outputs, time.perf_counter() - t_all, timing)


def dyn_config(cfg, tag):
    variant, controller, id_loss, _ = DYN_MODELS[tag]
    return dynamics.DynConfig(variant=variant, id_variant=controller, iterations=cfg["dyn_iterations"],
                              batch_size=cfg["dyn_batch"], lr=cfg["dyn_lr"], w_lfd=cfg["w_lfd"], w_id=cfg["w_id"],
                              beta=cfg["beta"], alpha=cfg["alpha"], a_max=cfg["a_max"],
                              chain_train=cfg["chain_train"], id_loss=id_loss, id_lin_scale=cfg["id_lin_scale"])


def _train_one(args):
    run, tag, seed = args
    cfg = run.cfg
    ds = datapipe.load_dataset(run.data)
    enc = embedding.AutoencoderModel.load(run.ae_path(DYN_MODELS[tag][3]))
    model, trace = dynamics.train_dynamics(ds, enc, dyn_config(cfg, tag), seed=seed)
    model.save(run.dyn_path(tag, seed))
    csv_path = run.reports / f"dyn_trace_{tag}_s{seed}.csv"
    trace.write_csv(csv_path)
    series = {"L_LFD": (trace.iteration, trace.lfd)}
    if DYN_MODELS[tag][2]:
        series["L_ID"] = (trace.iteration, trace.id)
    svg.line_plot(csv_path.with_suffix(".svg"), series, f"dynamics losses ({tag}, seed {seed})", "iteration",
                  "batch loss", logy=True)
    return [str(run.dyn_path(tag, seed)), str(csv_path)]


def _pool_map(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def train_dyn(run: Run, tags=None):
    cfg = run.cfg
    run.require(run.data / "dataset.manifest", *(run.ae_path(t) for t in AE_TAGS))
    run.models.mkdir(parents=True, exist_ok=True)
    run.reports.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    jobs = [(run, tag, s) for tag in (tags or DYN_MODELS) for s in run.dyn_seeds]
    for j in jobs:
        log.info("training dynamics %s seed %d", j[1], j[2])
    outs = _pool_map(_train_one, jobs, cfg["workers"])
    write_manifest(run, "train-dyn", [p for o in outs for p in o], time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# evaluation


def _encoders(run: Run):
    run.require(*(run.ae_path(t) for t in AE_TAGS))
    return {t: embedding.AutoencoderModel.load(run.ae_path(t)) for t in AE_TAGS}


def eval_ae(run: Run):
    cfg = run.cfg
    t0 = time.perf_counter()
    ds, bins = _load_data(run)
    encs = _encoders(run)
    rows = []
    for tag, enc in encs.items():
        rows += metrics.eval_ae(enc, ds, bins if tag == "LatStruct" else None, cfg["mds_pairs"], cfg["seed"], tag)
    run.reports.mkdir(parents=True, exist_ok=True)
    path = run.reports / "eval_ae.csv"
    metrics.write_rows(path, ["metric", "split", "encoder", "value"],
                       [(r.metric, r.split, r.tags, r.value) for r in rows])
    groups = list(datapipe.SPLITS)
    series = {}
    for tag in AE_TAGS:
        vals = {r.split: r.value for r in rows if r.tags == tag and r.metric == "recon_nmse"}
        series[f"{tag} recon"] = [vals.get(g, float("nan")) for g in groups]
    svg.bar_plot(path.with_suffix(".svg"), groups, series, "autoencoder reconstruction NMSE", "NMSE")
    # latent embedding of all AE samples
    z = encs["LatStruct"].encode(ds.S)
    emb_path = run.reports / "fig3_embedding.csv"
    embedding.write_embedding_csv(emb_path, z, ds.S)
    svg.scatter_plot(emb_path.with_suffix(".svg"), z[:, 0], z[:, 1], np.argmax(np.abs(ds.S), axis=1),
                     "latent xy embedding (colour: dominant electrode)", "x", "y")
    write_manifest(run, "eval-ae", [path, emb_path], time.perf_counter() - t0)
    return rows


def _latents(run: Run, ds):
    return {t: dynamics.TupleLatents.encode(ds, e) for t, e in _encoders(run).items()}


def _dyn(run: Run, tag, seed):
    run.require(run.dyn_path(tag, seed))
    return dynamics.DynamicsModel.load(run.dyn_path(tag, seed))


def eval_fd(run: Run):
    cfg = run.cfg
    t0 = time.perf_counter()
    ds, _ = _load_data(run)
    lats = _latents(run, ds)
    rows, means = [], {}
    for tag in FD_VARIANTS:
        per_seed = []
        for s in run.dyn_seeds:
            v = metrics.eval_chained_fd(_dyn(run, tag, s), lats[DYN_MODELS[tag][3]], ds, cfg["c_test"])
            per_seed.append(v)
            rows += [(f"{tag}@s{s}", k + 1, x) for k, x in enumerate(v)]
        means[tag] = np.mean(per_seed, axis=0)
        rows += [(tag, k + 1, float(x)) for k, x in enumerate(means[tag])]
    path = run.reports / "eval_fd.csv"
    metrics.write_rows(path, ["variant", "chain_step", "nmse"], rows)
    steps = np.arange(1, cfg["c_test"] + 1)
    svg.line_plot(path.with_suffix(".svg"), {t: (steps, m) for t, m in means.items()},
                  "chained forward-dynamics NMSE (test, mean over seeds)", "chain step", "NMSE")
    write_manifest(run, "eval-fd", [path], time.perf_counter() - t0)
    return rows


def eval_id(run: Run):
    t0 = time.perf_counter()
    ds, _ = _load_data(run)
    lats = _latents(run, ds)
    per_seed = []
    rows = []
    for s in run.dyn_seeds:
        entries = {}
        for label, tag in ID_CONTROLLERS.items():
            model = _dyn(run, tag, s)
            entries[label] = (model, lats[DYN_MODELS[tag][3]], DYN_MODELS[tag][1])
        res = metrics.eval_id(entries, ds)
        per_seed.append(res)
        rows += [(f"{c}@s{s}", cond, part, v) for c, cond, part, v in res]
    mean_rows = []
    for k, (c, cond, part, _) in enumerate(per_seed[0]):
        mean_rows.append((c, cond, part, float(np.mean([r[k][3] for r in per_seed]))))
    rows += mean_rows
    path = run.reports / "eval_id.csv"
    metrics.write_rows(path, ["controller", "condition", "part", "wcd"], rows)
    groups = [f"{cond} {part[:3]}" for cond in metrics.ID_CONDITIONS for part in metrics.PARTS]
    series = {c: [next(r[3] for r in mean_rows if r[0] == c and f"{r[1]} {r[2][:3]}" == g) for g in groups]
              for c in ID_CONTROLLERS}
    svg.bar_plot(path.with_suffix(".svg"), groups, series, "inverse dynamics weighted cosine distance", "wcd")
    write_manifest(run, "eval-id", [path], time.perf_counter() - t0)
    return rows


# ---------------------------------------------------------------------------
# servoing


def _servo_one(args):
    run, kind, seed = args
    cfg = run.cfg
    enc = embedding.AutoencoderModel.load(run.ae_path("LatStruct"))
    model = dynamics.DynamicsModel.load(run.dyn_path(SERVO_MODEL, cfg["seed"]))
    surface = skin_sim.SkinSurface.from_config(run.demos / "surface.cfg")
    s0, p0, s1, p1 = servo.reachable_targets(surface, kind, seed)
    scfg = servo.ServoRunConfig(start_sigma=s0, start_phi=p0, target_sigma=s1, target_phi=p1,
                                max_steps=cfg["servo_steps"], tolerance=cfg["servo_tolerance"],
                                lin_max=cfg["lin_max"], ang_max=cfg["ang_max"], smoothing=cfg["servo_smoothing"],
                                noise_std=cfg["servo_noise"], mount_seed=seed)
    res = servo.servo_run(enc, model, surface, scfg, np.random.default_rng(seed),
                          _sensor(cfg, cfg["servo_noise"]))
    out = run.reports / f"servo_{kind}"
    res.write_csv(out / f"servo_{seed}.csv")
    steps = np.arange(len(res.geo_dist))
    svg.line_plot(out / f"servo_{seed}.svg", {"geodesic (m)": (steps, res.geo_dist),
                                              "latent": (steps, res.latent_dist)},
                  f"servo {kind} seed {seed}", "step", "distance to target", hline=cfg["servo_tolerance"])
    mono = servo.monotone_windows(res.geo_dist, 20, cfg["servo_tolerance"])
    return (kind, seed, -1 if res.success_step is None else res.success_step, int(res.success), int(mono),
            int(res.aborted), float(res.geo_dist[-1])), res.geo_dist


def servo_all(run: Run):
    cfg = run.cfg
    t0 = time.perf_counter()
    run.require(run.demos / "surface.cfg", run.ae_path("LatStruct"), run.dyn_path(SERVO_MODEL, cfg["seed"]))
    for kind in SERVO_KINDS:
        (run.reports / f"servo_{kind}").mkdir(parents=True, exist_ok=True)
    jobs = [(run, kind, cfg["seed"] + r) for kind in SERVO_KINDS for r in range(cfg["servo_runs"])]
    results = _pool_map(_servo_one, jobs, cfg["workers"])
    rows = [r for r, _ in results]
    path = run.reports / "servo_summary.csv"
    metrics.write_rows(path, ["kind", "seed", "success_step", "success", "monotone", "aborted", "final_geo_dist"],
                       rows)
    for kind in SERVO_KINDS:
        series = {f"seed {r[1]}": (np.arange(len(g)), g) for r, g in results if r[0] == kind}
        svg.line_plot(run.reports / f"servo_{kind}.svg", series, f"servo {kind}: geodesic error", "step",
                      "geodesic distance (m)", hline=cfg["servo_tolerance"])
    outputs = [path] + [run.reports / f"servo_{k}" / f"servo_{r[1]}.csv" for k in SERVO_KINDS for r in rows
                        if r[0] == k]
    write_manifest(run, "servo", outputs, time.perf_counter() - t0)
    return rows


# ---------------------------------------------------------------------------
# acceptance


def _criterion_1(run, ae_rows):
    cfg = run.cfg
    rec = {r.split: r.value for r in ae_rows if r.tags == "LatStruct" and r.metric == "recon_nmse"}
    t = float(read_manifest(run, "train-ae").get("train_s.LatStruct", "nan"))
    ok = len(rec) == 3 and all(v < 0.25 for v in rec.values()) and t < cfg["ae_time_budget"]
    detail = ", ".join(f"{k} {v:.4f}" for k, v in rec.items())
    return acceptance.CriterionResult(1, "autoencoder NMSE", ok, f"recon NMSE {detail} (< 0.25); "
                                      f"training {t:.0f} s (< {cfg['ae_time_budget']:.0f} s)")


def _criterion_2(ae_rows):
    v = next((r.value for r in ae_rows if r.metric == "mds_nmse"), float("nan"))
    return acceptance.CriterionResult(2, "MDS fidelity", v < 0.05, f"pair NMSE {v:.4f} (< 0.05)")


def _criterion_3(run, fd_rows):
    c = run.cfg["c_test"]
    m = {v: x for v, k, x in fd_rows if k == c and "@" not in v}
    ok = (m["LatStruct_IDloss"] < m["noLatStruct_IDloss"]) and (m["LatStruct_noIDloss"] < m["noLatStruct_noIDloss"])
    detail = ", ".join(f"{k} {v:.4f}" for k, v in m.items())
    return acceptance.CriterionResult(3, "FD ablation ordering", ok, f"mean NMSE at C_test={c}: {detail}")


def _criterion_4(id_rows):
    m = {(c, part): v for c, cond, part, v in id_rows if cond == "AEpred" and "@" not in c}
    ok = all(m[("NJ", p)] < m[("NJ_noID", p)] for p in metrics.PARTS)
    detail = ", ".join(f"{p}: NJ {m[('NJ', p)]:.4f} vs NJ_noID {m[('NJ_noID', p)]:.4f}" for p in metrics.PARTS)
    return acceptance.CriterionResult(4, "ID ablation", ok, f"AEpred wcd {detail}")


def _criterion_8(run, servo_rows):
    n = run.cfg["servo_runs"]
    need = SERVO_PASS_FRAC * n
    parts, ok = [], True
    for kind in SERVO_KINDS:
        rows = [r for r in servo_rows if r[0] == kind]
        succ = sum(r[3] for r in rows)
        mono = sum(r[4] for r in rows)
        ok &= succ >= need and mono >= need
        parts.append(f"{kind}: reached {succ}/{n}, monotone {mono}/{n}")
    return acceptance.CriterionResult(8, "closed-loop servoing", bool(ok), "; ".join(parts) + f" (need >= {need:g})")


def run_acceptance(run: Run, ae_rows, fd_rows, id_rows, servo_rows):
    cfg = run.cfg
    results = [
        _criterion_1(run, ae_rows),
        _criterion_2(ae_rows),
        _criterion_3(run, fd_rows),
        _criterion_4(id_rows),
        acceptance.check_controller_optimality(cfg["seed"]),
        acceptance.check_gradient_integrity(cfg["grad_instances"], cfg["seed"]),
        acceptance.check_geodesy_cap(seed=cfg["seed"]),
        _criterion_8(run, servo_rows),
    ]
    metrics.write_rows(run.reports / "acceptance.csv", ["criterion", "name", "passed"],
                       [(r.number, r.name, int(r.passed)) for r in results])
    (run.reports / "acceptance.txt").write_text("\n".join(r.line() for r in results) + "\n")
    return results


def repro_all(run: Run):
    t0 = time.perf_counter()
    gen_data(run)
    prep_data(run)
    train_ae(run)
    train_dyn(run)
    ae_rows = eval_ae(run)
    fd_rows = eval_fd(run)
    id_rows = eval_id(run)
    servo_rows = servo_all(run)
    results = run_acceptance(run, ae_rows, fd_rows, id_rows, servo_rows)
    write_manifest(run, "repro-all", [run.reports / "acceptance.csv"], time.perf_counter() - t0,
                   {"passed": sum(r.passed for r in results)})
    return results


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]


def acceptance_from_reports(run: Run):
    """Acceptance on the reports of an earlier ``repro-all`` run (criteria 5-7 are recomputed)."""
    r = run.reports
    ae_rows = [metrics.Row(m, sp, tag, float(v)) for m, sp, tag, v in _read_csv(r / "eval_ae.csv")]
    fd_rows = [(v, int(k), float(x)) for v, k, x in _read_csv(r / "eval_fd.csv")]
    id_rows = [(c, cond, part, float(v)) for c, cond, part, v in _read_csv(r / "eval_id.csv")]
    servo_rows = [(k, int(s), int(st), int(ok), int(mono), int(ab), float(g))
                  for k, s, st, ok, mono, ab, g in _read_csv(r / "servo_summary.csv")]
    return run_acceptance(run, ae_rows, fd_rows, id_rows, servo_rows)
