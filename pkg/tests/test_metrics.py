import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tactile_servo import datapipe, dynamics as dy, metrics, svg
from tactile_servo.embedding import AutoencoderModel


def test_nmse_examples():
    truth = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    assert metrics.nmse(truth, truth) == 0.0
    # predicting the mean gives exactly 1
    assert metrics.nmse(np.tile(truth.mean(0), (3, 1)), truth) == pytest.approx(1.0)
    # per-dimension normalisation: dimension 2 has 100x the variance
    t = np.c_[np.arange(4.0), 10 * np.arange(4.0)]
    p = t + np.array([1.0, 0.0])
    assert metrics.nmse(p, t) == pytest.approx(0.5 * 1.0 / np.var(np.arange(4.0)))


def test_nmse_errors():
    with pytest.raises(ValueError):
        metrics.nmse(np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        metrics.nmse(np.ones((3, 2)), np.ones((2, 3)))


def test_wcd_examples():
    a = np.array([[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], [0.0, 2.0, 0.0, 0.0, 0.0, 3.0]])
    assert metrics.weighted_cosine_distance(a, a, "linear") == pytest.approx(0.0)
    assert metrics.weighted_cosine_distance(-a, a, "angular") == pytest.approx(2.0)
    # zero prediction counts as orthogonal
    assert metrics.weighted_cosine_distance(np.zeros_like(a), a, "linear") == pytest.approx(1.0)
    # weights are the ground-truth norms: rows 1 and 2 weigh 1 and 2
    p = np.array([[1.0, 0, 0, 0, 0, 0], [0, -2.0, 0, 0, 0, 0]])
    assert metrics.weighted_cosine_distance(p, a, "linear") == pytest.approx(2 * 2 / 3)


def test_wcd_skips_zero_truth_rows():
    t = np.array([[0.0] * 6, [1.0, 0, 0, 0, 0, 0]])
    p = np.array([[5.0, 5, 5, 0, 0, 0], [1.0, 0, 0, 0, 0, 0]])
    assert metrics.weighted_cosine_distance(p, t, "linear") == 0.0
    with pytest.raises(ValueError):
        metrics.weighted_cosine_distance(p, t, "angular")


def test_wcd_random_prediction_near_one():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(20000, 6))
    p = rng.normal(size=(20000, 6))
    for part in metrics.PARTS:
        assert metrics.weighted_cosine_distance(p, t, part) == pytest.approx(1.0, abs=0.02)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_wcd_scale_invariant_in_prediction(seed, k_pred, k_truth):
    rng = np.random.default_rng(seed)
    p, t = rng.normal(size=(30, 6)), rng.normal(size=(30, 6))
    for part in metrics.PARTS:
        base = metrics.weighted_cosine_distance(p, t, part)
        assert metrics.weighted_cosine_distance(k_pred * p, k_truth * t, part) == pytest.approx(base, rel=1e-9)
        assert 0.0 <= base <= 2.0


@pytest.fixture(scope="module")
def encoder():
    return AutoencoderModel(rng=np.random.default_rng(0), z_scale=(0.01, 0.01, 0.02)).eval()


@pytest.fixture(scope="module")
def latents(small_dataset, encoder):
    return dy.TupleLatents.encode(small_dataset, encoder)


def _model(variant, controller, seed):
    return dy.DynamicsModel(variant, np.random.default_rng(seed), id_variant=controller,
                            z_std=np.full(3, 0.01), a_std=np.r_[np.full(3, 0.003), np.full(3, 0.1)],
                            zd_std=np.full(3, 0.005))


def test_eval_id_row_layout(small_dataset, latents):
    entries = {"LL": (_model("ll", "ll", 0), latents, "ll"), "NG": (_model("nl", "ng", 1), latents, "ng"),
               "NJ": (_model("nl", "nj", 2), latents, "nj"), "NJ_noID": (_model("nl", "nj", 3), latents, "nj")}
    rows = metrics.eval_id(entries, small_dataset)
    assert len(rows) == 4 * 3 * 2
    assert {r[0] for r in rows} == set(entries)
    assert {r[1] for r in rows} == set(metrics.ID_CONDITIONS)
    assert all(0.0 <= r[3] <= 2.0 for r in rows)


class _ExactModel:
    """Forward model that replays the encoded next states of the dataset."""

    def __init__(self, ds, lat, rows):
        self.lookup = {tuple(np.round(lat.z_t[r], 12)) + tuple(np.round(ds.a_t[r], 12)): lat.z_next[r] for r in rows}

    def chain_predict(self, z1, actions, dt):
        out = np.zeros(actions.shape[:2] + (3,))
        z = z1
        for k in range(actions.shape[1]):
            z = np.array([self.lookup[tuple(np.round(zi, 12)) + tuple(np.round(ai, 12))]
                          for zi, ai in zip(z, actions[:, k])])
            out[:, k] = z
        return out


def test_chained_fd_exact_model_is_zero(small_dataset, latents):
    rows = small_dataset.tuple_rows("test")
    model = _ExactModel(small_dataset, latents, rows)
    errs = metrics.eval_chained_fd(model, latents, small_dataset, c_test=3)
    assert len(errs) == 3
    np.testing.assert_allclose(errs, 0.0, atol=1e-20)


def test_chains_are_consecutive(small_dataset):
    ch = metrics.held_out_chains(small_dataset, 3)
    assert len(ch) > 0
    ds = small_dataset
    for c in ch[:50]:
        assert len(set(ds.seq[c])) == 1
        np.testing.assert_array_equal(np.diff(ds.pos[c]), 1)
        assert set(ds.tup_split[c]) == {"test"}


def test_eval_ae_rows(small_dataset, encoder):
    rows = metrics.eval_ae(encoder, small_dataset, None, tags="x")
    assert {r.split for r in rows} == set(datapipe.SPLITS)
    assert {r.metric for r in rows} == {"recon_nmse", "pressure_nmse"}


def test_write_rows_roundtrip(tmp_path):
    metrics.write_rows(tmp_path / "r.csv", ["a", "b"], [("x", 0.1), ("y", np.float64(1 / 3))])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "a,b"
    assert float(lines[2].split(",")[1]) == 1 / 3


def test_svg_outputs_parse(tmp_path):
    x = np.arange(10)
    svg.line_plot(tmp_path / "l.svg", {"a": (x, np.exp(-x)), "b": (x, np.exp(-x / 2))}, "t", "x", "y", logy=True,
                  hline=0.01)
    svg.bar_plot(tmp_path / "b.svg", ["g1", "g2"], {"s1": [0.2, 0.3], "s2": [0.5, float("nan")]}, "t", "y")
    svg.scatter_plot(tmp_path / "s.svg", np.r_[0.0, 1.0, 2.0], np.r_[1.0, 0.0, 1.0], [0, 1, 2])
    counts = {}
    for name in ("l", "b", "s"):
        root = ET.parse(tmp_path / f"{name}.svg").getroot()
        assert root.tag.endswith("svg")
        counts[name] = [el.tag.split("}")[1] for el in root.iter()]
    assert counts["l"].count("polyline") == 2
    assert counts["b"].count("rect") >= 2 + 3 + 1
    assert counts["s"].count("circle") == 3
