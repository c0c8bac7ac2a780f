"""Graph-convolutional regression from register geometry to pulse params.

A register becomes a complete directed graph weighted by inverse squared
pairwise distance, with all-ones node features. Five convolution layers
(hidden width 128, ReLU, dropout 0.1 while training) pass messages through
the raw weighted adjacency with unit self-loops, an
additive pool collapses node states to one vector, and an affine head
emits a single scalar. One model is trained per pulse parameter against
min-max normalised targets; backpropagation and the adaptive-moment
updates are implemented here directly so they can be checked against
finite differences.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, NumericalError
from ..register import DeviceParams, Embedding, Register, omega_bounds
from ..rng import substream
from ..optimize import search_space

HIDDEN = 128
LAYERS = 5
DROPOUT = 0.1
BATCH_SIZE = 64
TARGETS = ("t_rise", "t_fall", "omega", "delta0", "deltaf")
MODEL_VERSION = "2"

# Label scale per target. The Rabi drive is regressed as its fraction of
# the register's usable band, not in rad/us: the score surface is flat in
# omega across the band, so labels land at a consistent band fraction while
# the band itself moves with the geometry. The detunings are regressed as
# ratios to the band top, the blockade energy that sets how much detuning
# a register can use. Ramp times are regressed raw.
TARGET_SCALES = {
    "t_rise": "identity",
    "t_fall": "identity",
    "omega": "band",
    "delta0": "bandtop",
    "deltaf": "bandtop",
}


def _to_scale(value: float, scale: str, band) -> float:
    if scale == "band":
        lo, hi = band
        return (value - lo) / (hi - lo)
    if scale == "bandtop":
        return value / band[1]
    return value


def _from_scale(value: float, scale: str, band) -> float:
    if scale == "band":
        lo, hi = band
        return lo + value * (hi - lo)
    if scale == "bandtop":
        return value * band[1]
    return value


@dataclass(frozen=True)
class GraphFeatures:
    """Complete directed graph over the atoms, weights 1/R^2, node ones."""

    edge_index: np.ndarray
    edge_weight: np.ndarray
    node_feature: np.ndarray
    n: int


def featurize(reg) -> GraphFeatures:
    """Features from a Register, an Embedding, or an (N, 2) position array."""
    if isinstance(reg, Embedding):
        reg = reg.register
    pos = reg.positions() if isinstance(reg, Register) else np.asarray(reg, dtype=float)
    n = len(pos)
    if n < 2:
        raise InputError("featurization needs at least 2 atoms")
    rows, cols, weights = [], [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d2 = float(np.sum((pos[i] - pos[j]) ** 2))
            if d2 == 0.0:
                raise InputError(f"coincident atoms {i} and {j}")
            rows.append(i)
            cols.append(j)
            weights.append(1.0 / d2)
    return GraphFeatures(
        edge_index=np.array([rows, cols], dtype=np.int64),
        edge_weight=np.array(weights, dtype=float),
        node_feature=np.ones((n, 1), dtype=float),
        n=n,
    )


def propagation_matrix(f: GraphFeatures) -> np.ndarray:
    """A + I over the weighted adjacency, unnormalised.

    Degree normalisation would divide out the overall 1/R^2 magnitude and
    with it the register's length scale, which several pulse parameters
    depend on directly. Raw propagation keeps that scale visible; the
    magnitudes stay tame because interatomic distances are bounded below
    by the device's minimum spacing.
    """
    a = np.zeros((f.n, f.n))
    a[f.edge_index[0], f.edge_index[1]] = f.edge_weight
    return a + np.eye(f.n)


@dataclass
class GcnModel:
    weights: dict
    target: str
    t_lo: float
    t_hi: float
    seed: int
    scale: str = "identity"
    version: str = MODEL_VERSION
    history: tuple = field(default=(), repr=False)

    def predict(self, feats: GraphFeatures) -> float:
        """Prediction for one register, in the model's label scale.

        Callers that need device units go through predict_params, which
        undoes the band scales against the register at hand.
        """
        return self.t_lo + forward(self, feats) * (self.t_hi - self.t_lo)


def _weight_names():
    names = []
    for layer in range(LAYERS):
        names += [f"W{layer}", f"b{layer}"]
    return names + ["hw", "hb"]


def init_weights(seed: int) -> dict:
    w = {}
    for layer in range(LAYERS):
        fan_in = 1 if layer == 0 else HIDDEN
        bound = math.sqrt(6.0 / (fan_in + HIDDEN))
        rng = substream(seed, "init", layer)
        w[f"W{layer}"] = rng.uniform(-bound, bound, size=(fan_in, HIDDEN))
        w[f"b{layer}"] = np.zeros(HIDDEN)
    rng = substream(seed, "init", "head")
    bound = math.sqrt(6.0 / (HIDDEN + 1))
    w["hw"] = rng.uniform(-bound, bound, size=HIDDEN)
    w["hb"] = np.zeros(1)
    return w


def _pack(feats_list) -> tuple:
    nmax = max(f.n for f in feats_list)
    b = len(feats_list)
    adj = np.zeros((b, nmax, nmax))
    x = np.zeros((b, nmax, 1))
    mask = np.zeros((b, nmax, 1))
    for k, f in enumerate(feats_list):
        adj[k, : f.n, : f.n] = propagation_matrix(f)
        x[k, : f.n] = f.node_feature
        mask[k, : f.n] = 1.0
    return adj, x, mask


def _forward_batch(weights, adj, x, mask, drop_masks=None):
    h = x
    caches = []
    for layer in range(LAYERS):
        ah = adj @ h
        z = ah @ weights[f"W{layer}"] + weights[f"b{layer}"]
        r = np.maximum(z, 0.0) * mask
        d = None if drop_masks is None else drop_masks[layer]
        caches.append((ah, z, d))
        h = r if d is None else r * d
    pooled = h.sum(axis=1)
    y = pooled @ weights["hw"] + weights["hb"][0]
    return y, pooled, caches


def loss_and_gradients(weights, adj, x, mask, targets, drop_masks=None):
    """Mean-squared-error loss and its gradient for every weight array."""
    y, pooled, caches = _forward_batch(weights, adj, x, mask, drop_masks)
    b = len(targets)
    diff = y - targets
    loss = float(np.mean(diff * diff))
    dy = 2.0 * diff / b
    grads = {
        "hb": np.array([float(dy.sum())]),
        "hw": pooled.T @ dy,
    }
    dh = np.broadcast_to(
        (dy[:, None] * weights["hw"][None, :])[:, None, :],
        (b, adj.shape[1], HIDDEN),
    )
    for layer in reversed(range(LAYERS)):
        ah, z, d = caches[layer]
        dr = dh if d is None else dh * d
        dz = dr * (z > 0.0) * mask
        grads[f"W{layer}"] = np.einsum("bni,bnj->ij", ah, dz)
        grads[f"b{layer}"] = dz.sum(axis=(0, 1))
        if layer:
            dh = adj @ (dz @ weights[f"W{layer}"].T)
    return loss, grads, y


def forward(model: GcnModel, feats: GraphFeatures) -> float:
    """Dropout-free scalar output for one graph (normalised target space)."""
    adj, x, mask = _pack([feats])
    y, _, _ = _forward_batch(model.weights, adj, x, mask)
    return float(y[0])


def _adam_init(weights):
    zeros = {k: np.zeros_like(v) for k, v in weights.items()}
    return zeros, {k: np.zeros_like(v) for k, v in weights.items()}


def _adam_step(weights, grads, m, v, step, lr,
               beta1=0.9, beta2=0.999, eps=1e-8):
    for k in weights:
        m[k] = beta1 * m[k] + (1 - beta1) * grads[k]
        v[k] = beta2 * v[k] + (1 - beta2) * grads[k] * grads[k]
        mhat = m[k] / (1 - beta1 ** step)
        vhat = v[k] / (1 - beta2 ** step)
        weights[k] -= lr * mhat / (np.sqrt(vhat) + eps)


def _drop_masks(rng, shape_b, shape_n):
    masks = []
    for _ in range(LAYERS):
        keep = (rng.random((shape_b, shape_n, HIDDEN)) >= DROPOUT).astype(float)
        masks.append(keep / (1.0 - DROPOUT))
    return masks


def train(records, target: str, lr=(1e-2, 1e-4), epochs: int = 300,
          seed: int = 0, batch_size: int = BATCH_SIZE,
          val_frac: float = 0.2, dropout: bool = True,
          dev: DeviceParams | None = None) -> GcnModel:
    """Fit one regression model for `target` over labelled records.

    Labels are moved into the target's scale (see TARGET_SCALES), then
    min-max normalised to [0, 1], with the constants stored on the model
    for inference. A scalar `lr` is held constant; a (hi, lo) pair decays
    geometrically across epochs. The returned weights are the epoch-best
    by validation loss (the records are split val_frac off
    deterministically; with too few records for a split the training loss
    stands in).
    """
    if target not in TARGETS:
        raise InputError(f"unknown target {target!r}")
    if not records:
        raise InputError("empty dataset")
    scale = TARGET_SCALES[target]
    if scale != "identity" and dev is None:
        dev = DeviceParams()
    feats = [featurize(np.asarray(r.positions)) for r in records]
    raw = np.array([
        _to_scale(
            float(r.params[target]), scale,
            None if scale == "identity" else omega_bounds(r.embedding(dev), dev),
        )
        for r in records
    ])
    t_lo, t_hi = float(raw.min()), float(raw.max())
    if t_hi <= t_lo:
        t_hi = t_lo + 1.0
    targets = (raw - t_lo) / (t_hi - t_lo)

    n = len(records)
    order = substream(seed, "val").permutation(n)
    n_val = int(round(val_frac * n))
    val_idx = order[:n_val]
    tr_idx = order[n_val:]
    if len(tr_idx) == 0:
        tr_idx, val_idx = order, np.array([], dtype=int)

    adj, x, mask = _pack(feats)
    weights = init_weights(seed)
    m_state, v_state = _adam_init(weights)
    if np.isscalar(lr):
        lr_of = lambda e: float(lr)
    else:
        hi, lo = float(lr[0]), float(lr[1])
        decay = (lo / hi) ** (1.0 / max(epochs - 1, 1))
        lr_of = lambda e: hi * decay ** e

    def eval_loss(idx):
        if len(idx) == 0:
            return math.inf
        y, _, _ = _forward_batch(weights, adj[idx], x[idx], mask[idx])
        return float(np.mean((y - targets[idx]) ** 2))

    best_val = math.inf
    best_weights = {k: v.copy() for k, v in weights.items()}
    history = []
    step = 0
    for epoch in range(epochs):
        perm = substream(seed, "shuffle", epoch).permutation(len(tr_idx))
        epoch_lr = lr_of(epoch)
        for bstart in range(0, len(tr_idx), batch_size):
            batch = tr_idx[perm[bstart : bstart + batch_size]]
            drop = None
            if dropout:
                rng = substream(seed, "drop", epoch, bstart)
                drop = _drop_masks(rng, len(batch), adj.shape[1])
            loss, grads, _ = loss_and_gradients(
                weights, adj[batch], x[batch], mask[batch], targets[batch], drop,
            )
            if not math.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} (target {target}, lr {epoch_lr:.2e})"
                )
            step += 1
            _adam_step(weights, grads, m_state, v_state, step, epoch_lr)
        train_loss = eval_loss(tr_idx)
        val_loss = eval_loss(val_idx) if len(val_idx) else train_loss
        history.append((train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_weights = {k: v.copy() for k, v in weights.items()}

    return GcnModel(
        weights=best_weights, target=target, t_lo=t_lo, t_hi=t_hi,
        seed=seed, scale=scale, history=tuple(history),
    )


def mape(predictions, targets) -> float:
    """100 * mean(|p - t| / |t|), zero targets excluded with a warning."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise InputError("prediction/target length mismatch")
    keep = t != 0.0
    dropped = int(np.sum(~keep))
    if dropped:
        warnings.warn(f"mape: excluded {dropped} zero targets")
    if not np.any(keep):
        raise InputError("all targets zero")
    return float(100.0 * np.mean(np.abs(p[keep] - t[keep]) / np.abs(t[keep])))


def predict_params(models: dict, emb: Embedding, dev: DeviceParams) -> dict:
    """One pulse-parameter set from the five trained models, kept in-space."""
    missing = [t for t in TARGETS if t not in models]
    if missing:
        raise InputError(f"missing models for {missing}")
    feats = featurize(emb.register)
    space = search_space(emb, dev, "complex")
    band = space.intervals["omega"]
    raw = {
        name: _from_scale(models[name].predict(feats), models[name].scale, band)
        for name in TARGETS
    }
    return space.clamp(raw)


def gradient_check(model: GcnModel, feats: GraphFeatures, target_value: float,
                   n_sample: int = 100, step: float = 1e-5,
                   seed: int = 0) -> float:
    """Max relative error of analytic vs central-difference gradients."""
    adj, x, mask = _pack([feats])
    targets = np.array([target_value], dtype=float)
    weights = {k: v.copy() for k, v in model.weights.items()}
    _, grads, _ = loss_and_gradients(weights, adj, x, mask, targets)
    rng = substream(seed, "gradcheck")
    names = _weight_names()
    sizes = np.array([weights[k].size for k in names])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_sample, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in picks:
        arr_k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[arr_k]
        local = int(flat - offsets[arr_k])
        idx = np.unravel_index(local, weights[name].shape)
        keep = weights[name][idx]
        weights[name][idx] = keep + step
        lp, _, _ = loss_and_gradients(weights, adj, x, mask, targets)
        weights[name][idx] = keep - step
        lm, _, _ = loss_and_gradients(weights, adj, x, mask, targets)
        weights[name][idx] = keep
        numeric = (lp - lm) / (2 * step)
        analytic = grads[name][idx]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, err)
    return float(worst)


def save_models(models: dict, path, meta: dict | None = None):
    arrays = {}
    info = {"version": MODEL_VERSION, "targets": {}}
    if meta:
        info["meta"] = meta
    for name, model in models.items():
        for wname, arr in model.weights.items():
            arrays[f"{name}:{wname}"] = arr
        info["targets"][name] = {
            "t_lo": model.t_lo, "t_hi": model.t_hi, "seed": model.seed,
            "scale": model.scale, "version": model.version,
        }
    arrays["__meta__"] = np.frombuffer(
        json.dumps(info, sort_keys=True).encode(), dtype=np.uint8,
    )
    np.savez_compressed(path, **arrays)


def load_models(path) -> dict:
    with np.load(path) as data:
        info = json.loads(bytes(data["__meta__"].tobytes()).decode())
        if info.get("version") != MODEL_VERSION:
            raise InputError(f"unsupported model file version {info.get('version')!r}")
        models = {}
        for name, tmeta in info["targets"].items():
            weights = {
                wname: np.array(data[f"{name}:{wname}"])
                for wname in _weight_names()
            }
            models[name] = GcnModel(
                weights=weights, target=name,
                t_lo=float(tmeta["t_lo"]), t_hi=float(tmeta["t_hi"]),
                seed=int(tmeta["seed"]), scale=str(tmeta.get("scale", "identity")),
                version=str(tmeta["version"]),
            )
    return models
