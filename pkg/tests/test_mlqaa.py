"""Geometry featurization, the graph regressor, and the labelled corpus."""

import json
import math

import numpy as np
import pytest

from rydock.errors import InputError
from rydock.mlqaa import (
    DatasetRecord,
    TARGETS,
    GcnModel,
    corpus_entry,
    featurize,
    forward,
    generate_corpus,
    gradient_check,
    label_dataset,
    load_dataset,
    load_models,
    mape,
    predict_params,
    propagation_matrix,
    save_dataset,
    save_models,
    shape_positions,
    train,
    train_holdout_split,
)
from rydock.mlqaa.dataset import _canonical_trial
from rydock.mlqaa.gcn import (
    MODEL_VERSION,
    TARGET_SCALES,
    _forward_batch,
    _from_scale,
    _pack,
    _to_scale,
    init_weights,
)
from rydock.optimize import Trial, search_space
from rydock.register import DeviceParams, embedding_from_positions, omega_bounds
from rydock.rng import substream

DEV = DeviceParams()


def _line(n, s):
    return np.array([[i * s, 0.0] for i in range(n)])


def _model(target, seed, t_lo=0.0, t_hi=1.0):
    return GcnModel(weights=init_weights(seed), target=target, t_lo=t_lo,
                    t_hi=t_hi, seed=seed, scale=TARGET_SCALES[target])


def _record(spacing, n=2, omega=None):
    pos = tuple((i * spacing, 0.0) for i in range(n))
    emb = embedding_from_positions(list(pos), DEV, spacing=spacing)
    lo, hi = omega_bounds(emb, DEV)
    params = {
        "t_rise": 300.0,
        "t_fall": 700.0,
        "omega": 0.5 * (lo + hi) if omega is None else omega,
        "delta0": 2.0,
        "deltaf": 4.0,
    }
    return DatasetRecord(
        family="line", size_index=n - 2, spacing=float(spacing),
        ids=tuple(f"a{i}" for i in range(n)), positions=pos,
        params=params, score=0.5, rounds=4, seed=0,
    )


def test_featurize_two_atoms():
    f = featurize(np.array([[0.0, 0.0], [5.0, 0.0]]))
    assert f.n == 2
    assert f.node_feature.shape == (2, 1)
    assert np.all(f.node_feature == 1.0)
    assert f.edge_index.shape == (2, 2)
    pairs = set(zip(f.edge_index[0].tolist(), f.edge_index[1].tolist()))
    assert pairs == {(0, 1), (1, 0)}
    assert np.allclose(f.edge_weight, 1.0 / 25.0)


def test_featurize_complete_digraph():
    for n in (3, 5, 8):
        rng = substream(7, "feat", n)
        pos = rng.uniform(0.0, 60.0, size=(n, 2))
        f = featurize(pos)
        assert f.edge_weight.shape == (n * (n - 1),)
        assert f.edge_index.dtype == np.int64


def test_featurize_accepts_register_embedding_positions():
    pos = _line(3, 9.0)
    emb = embedding_from_positions([tuple(p) for p in pos], DEV, spacing=9.0)
    fa = featurize(pos)
    fb = featurize(emb.register)
    fc = featurize(emb)
    for other in (fb, fc):
        assert np.array_equal(fa.edge_index, other.edge_index)
        assert np.allclose(fa.edge_weight, other.edge_weight)


def test_featurize_rigid_motion_invariance():
    rng = substream(3, "rigid")
    pos = rng.uniform(0.0, 40.0, size=(6, 2))
    theta = 1.234
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    moved = pos @ rot.T + np.array([17.0, -4.0])
    fa, fb = featurize(pos), featurize(moved)
    assert np.array_equal(fa.edge_index, fb.edge_index)
    assert np.allclose(fa.edge_weight, fb.edge_weight)


def test_featurize_errors():
    with pytest.raises(InputError):
        featurize(np.array([[0.0, 0.0]]))
    with pytest.raises(InputError):
        featurize(np.array([[1.0, 2.0], [1.0, 2.0], [9.0, 0.0]]))


def test_propagation_matrix_hand_values():
    f = featurize(np.array([[0.0, 0.0], [5.0, 0.0]]))
    assert np.allclose(propagation_matrix(f), [[1.0, 0.04], [0.04, 1.0]])
    # 3-4-5 right triangle keeps each inverse squared side, unnormalised
    g = featurize(np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]))
    p = propagation_matrix(g)
    assert np.allclose(np.diag(p), 1.0)
    assert np.isclose(p[0, 1], 1.0 / 9.0)
    assert np.isclose(p[0, 2], 1.0 / 16.0)
    assert np.isclose(p[1, 2], 1.0 / 25.0)
    assert np.allclose(p, p.T)


def test_forward_sees_length_scale():
    model = _model("t_rise", seed=5)
    pos = _line(4, 8.0)
    a = forward(model, featurize(pos))
    b = forward(model, featurize(2.0 * pos))
    assert abs(a - b) > 1e-6


def test_label_scale_transforms():
    assert TARGET_SCALES == {
        "t_rise": "identity", "t_fall": "identity",
        "omega": "band", "delta0": "bandtop", "deltaf": "bandtop",
    }
    band = (2.0, 10.0)
    assert _to_scale(6.0, "band", band) == pytest.approx(0.5)
    assert _from_scale(0.25, "band", band) == pytest.approx(4.0)
    assert _to_scale(4.0, "bandtop", (0.0, 8.0)) == pytest.approx(0.5)
    assert _from_scale(0.5, "bandtop", (0.0, 8.0)) == pytest.approx(4.0)
    assert _to_scale(3.3, "identity", None) == 3.3
    for scale in ("identity", "band", "bandtop"):
        for v in (0.31, 4.7):
            z = _to_scale(v, scale, band)
            assert _from_scale(z, scale, band) == pytest.approx(v)


def test_gradients_match_finite_differences():
    rng = substream(11, "gc")
    pos = rng.uniform(0.0, 50.0, size=(4, 2))
    model = _model("omega", seed=3)
    worst = gradient_check(model, featurize(pos), target_value=0.7, seed=2)
    assert worst < 1e-4


def test_forward_permutation_invariance():
    rng = substream(9, "perm")
    pos = rng.uniform(0.0, 45.0, size=(6, 2))
    model = _model("deltaf", seed=1)
    base = forward(model, featurize(pos))
    for k in range(4):
        perm = substream(9, "perm", k).permutation(6)
        assert forward(model, featurize(pos[perm])) == pytest.approx(base, abs=1e-8)


def test_batch_padding_matches_single_forward():
    model = _model("delta0", seed=2)
    fa = featurize(_line(2, 7.0))
    fb = featurize(_line(5, 9.0))
    adj, x, mask = _pack([fa, fb])
    assert adj.shape == (2, 5, 5)
    y, _, _ = _forward_batch(model.weights, adj, x, mask)
    assert y[0] == pytest.approx(forward(model, fa), abs=1e-10)
    assert y[1] == pytest.approx(forward(model, fb), abs=1e-10)


def test_train_overfits_single_record():
    rec = _record(9.0, n=3)
    model = train([rec], "t_rise", epochs=250, seed=0, dropout=False)
    assert model.scale == "identity"
    assert min(tl for tl, _ in model.history) < 1e-3
    pred = model.predict(featurize(np.asarray(rec.positions)))
    assert pred == pytest.approx(300.0, abs=0.5)


def test_train_determinism():
    recs = [_record(s) for s in (6.0, 7.5, 9.0, 11.0)]
    a = train(recs, "t_fall", epochs=3, seed=1)
    b = train(recs, "t_fall", epochs=3, seed=1)
    assert a.weights.keys() == b.weights.keys()
    for k in a.weights:
        assert np.array_equal(a.weights[k], b.weights[k])
    c = train(recs, "t_fall", epochs=3, seed=2)
    assert any(not np.array_equal(a.weights[k], c.weights[k]) for k in a.weights)


def test_train_band_scale_inverts_per_register():
    # Both labels sit at the exact middle of their own usable band, so a
    # model fit in band fraction must come back at mid-band in rad/us for
    # each register separately even though the two bands barely overlap.
    recs = [_record(6.0, omega=None), _record(11.0, omega=None)]
    model = train(recs, "omega", epochs=300, seed=0, dropout=False, dev=DEV)
    assert model.scale == "band"
    for rec in recs:
        lo, hi = omega_bounds(rec.embedding(DEV), DEV)
        z = model.predict(featurize(np.asarray(rec.positions)))
        got = _from_scale(z, "band", (lo, hi))
        assert abs(got - 0.5 * (lo + hi)) <= 0.05 * (hi - lo)


def test_train_errors():
    with pytest.raises(InputError):
        train([_record(9.0)], "phase")
    with pytest.raises(InputError):
        train([], "omega")


def test_mape_contract():
    assert mape([1.0, 2.0], [2.0, 2.0]) == pytest.approx(25.0)
    with pytest.raises(InputError):
        mape([1.0], [1.0, 2.0])
    with pytest.warns(UserWarning, match="excluded"):
        assert mape([1.0, 1.0], [0.0, 2.0]) == pytest.approx(50.0)
    with pytest.raises(InputError), pytest.warns(UserWarning):
        mape([1.0, 1.0], [0.0, 0.0])


def test_predict_params_stays_in_space():
    models = {t: _model(t, seed=k, t_lo=-3.0, t_hi=9.0)
              for k, t in enumerate(TARGETS)}
    emb = embedding_from_positions([(0.0, 0.0), (9.0, 0.0), (18.0, 0.0)],
                                   DEV, spacing=9.0)
    out = predict_params(models, emb, DEV)
    space = search_space(emb, DEV, "complex")
    assert set(out) == set(space.intervals)
    assert space.feasible(out)
    short = dict(models)
    del short["omega"]
    with pytest.raises(InputError):
        predict_params(short, emb, DEV)


def test_save_load_roundtrip(tmp_path, monkeypatch):
    recs = [_record(s) for s in (6.0, 8.0, 10.0)]
    models = {
        "t_rise": train(recs, "t_rise", epochs=2, seed=0),
        "omega": train(recs, "omega", epochs=2, seed=0, dev=DEV),
    }
    path = tmp_path / "models.npz"
    save_models(models, path, meta={"note": "roundtrip"})
    loaded = load_models(path)
    assert set(loaded) == {"t_rise", "omega"}
    feats = featurize(_line(3, 8.5))
    for name, model in models.items():
        other = loaded[name]
        assert other.version == MODEL_VERSION
        assert other.scale == model.scale
        assert other.t_lo == pytest.approx(model.t_lo)
        assert other.t_hi == pytest.approx(model.t_hi)
        assert other.seed == model.seed
        assert other.predict(feats) == pytest.approx(model.predict(feats))
    monkeypatch.setattr("rydock.mlqaa.gcn.MODEL_VERSION", "999")
    with pytest.raises(InputError):
        load_models(path)


def test_canonical_trial_prefers_center_of_plateau():
    emb = embedding_from_positions([(0.0, 0.0), (9.0, 0.0)], DEV, spacing=9.0)
    space = search_space(emb, DEV, "complex")
    center = {k: 0.5 * (lo + hi) for k, (lo, hi) in space.intervals.items()}
    edge = {k: lo + 0.9 * (hi - lo) for k, (lo, hi) in space.intervals.items()}
    t_edge = Trial(round=0, params=edge, score=1.0, gini=0.5, mean_f=0.5, top=())
    t_mid = Trial(round=1, params=center, score=0.96, gini=0.5, mean_f=0.5, top=())
    t_low = Trial(round=2, params=center, score=0.2, gini=0.1, mean_f=0.2, top=())
    assert _canonical_trial([t_edge, t_mid, t_low], space) is t_mid
    # below the plateau cut the centre candidate loses to the lone best
    assert _canonical_trial([t_edge, t_low], space) is t_edge
    # equal distance falls back to the earlier round
    t_mid2 = Trial(round=0, params=dict(center), score=0.98, gini=0.5,
                   mean_f=0.5, top=())
    assert _canonical_trial([t_mid, t_mid2], space) is t_mid2


def test_train_holdout_split():
    recs = [_record(6.0 + 0.5 * k) for k in range(10)]
    tr_a, ho_a = train_holdout_split(recs, seed=0)
    tr_b, ho_b = train_holdout_split(recs, seed=0)
    assert [r.name for r in tr_a] == [r.name for r in tr_b]
    assert [r.name for r in ho_a] == [r.name for r in ho_b]
    assert len(ho_a) == 2
    assert len(tr_a) + len(ho_a) == len(recs)
    names = {r.name for r in tr_a} | {r.name for r in ho_a}
    assert len(names) == len(recs)
    with pytest.raises(InputError):
        train_holdout_split(recs, holdout_frac=0.0)
    with pytest.raises(InputError):
        train_holdout_split(recs, holdout_frac=1.0)


def test_shape_positions_hand_cases():
    assert np.allclose(shape_positions("line", 0, 7.25), [[0.0, 0.0], [7.25, 0.0]])
    hexagon = shape_positions("hexagon", 0, 8.0)
    assert hexagon.shape == (6, 2)
    assert np.allclose(np.linalg.norm(hexagon, axis=1), 8.0)
    expected_counts = {
        "line": [2, 3, 4, 5, 6],
        "rectangle": [4, 6, 8, 9, 10],
        "triangle": [3, 6, 10, 9, 12],
        "tri_lattice": [4, 6, 8, 9, 10],
        "hexagon": [6, 7, 10, 11, 12],
    }
    for family, counts in expected_counts.items():
        for k, want in enumerate(counts):
            assert shape_positions(family, k, 8.5).shape == (want, 2)
    with pytest.raises(InputError):
        shape_positions("line", 5, 8.0)
    with pytest.raises(InputError):
        shape_positions("line", 0, 0.0)
    with pytest.raises(InputError):
        shape_positions("blob", 0, 8.0)


def test_generate_corpus():
    entries = generate_corpus(DEV)
    assert len(entries) == 125
    names = [e.name for e in entries]
    assert len(set(names)) == 125
    assert "hexagon-4-s9.75" in names
    for e in entries[::17]:
        assert e.name == f"{e.family}-{e.size_index}-s{e.spacing:g}"
        pos = shape_positions(e.family, e.size_index, e.spacing)
        assert e.embedding.register.n == len(pos)


def test_dataset_jsonl_roundtrip(tmp_path):
    recs = [_record(6.0), _record(9.0, n=3)]
    path = tmp_path / "labels.jsonl"
    save_dataset(recs, path)
    loaded = load_dataset(path)
    assert loaded == recs
    emb = loaded[0].embedding(DEV)
    assert np.allclose(emb.register.positions(), np.asarray(recs[0].positions))
    path.write_text(json.dumps({"family": "line"}) + "\n")
    with pytest.raises(InputError):
        load_dataset(path)


def test_label_dataset_small_register():
    entries = [corpus_entry("line", 0, 9.75, DEV)]
    recs = label_dataset(entries, DEV, rounds=4, shots=100, seed=0, dt=8.0)
    assert len(recs) <= 1
    if recs:
        rec = recs[0]
        assert rec.name == "line-0-s9.75"
        assert rec.rounds == 4
        assert rec.score > 0.0
        space = search_space(entries[0].embedding, DEV, "complex")
        assert set(rec.params) == set(space.intervals)
        assert space.feasible(rec.params)
    again = label_dataset(entries, DEV, rounds=4, shots=100, seed=0, dt=8.0)
    assert again == recs
