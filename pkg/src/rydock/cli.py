"""Command line interface for the docking-to-pulse pipeline.

Every command reads one optional JSON config plus flag overrides, derives
all randomness from a single root seed, and stamps each output file with
the sha256 digest of the effective configuration so that runs can be told
apart (and reproduced) byte for byte. No timestamps are written anywhere.

Exit codes: 0 success, 2 bad input, 3 infeasible embedding or band,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from .docking import (
    DEFAULT_TAU,
    build_binding_graph,
    default_table,
    load_molecule,
    load_table,
)
from .errors import InfeasibilityError, InputError, NumericalError
from .graphs import (
    brute_force_mwis,
    complement,
    load_graph,
    max_weight_clique,
    save_graph,
)
from .histogram import save_histogram
from .mlqaa.dataset import (
    generate_corpus,
    label_dataset,
    load_dataset,
    save_dataset,
    train_holdout_split,
)
from .mlqaa.gcn import (
    TARGETS,
    featurize,
    load_models,
    mape,
    predict_params,
    save_models,
    train,
)
from .optimize import (
    Trial,
    normalized_score,
    prefix_result,
    qaa_sweep,
    score,
    sequence_for,
    success_probability,
    vqaa,
)
from .register import DeviceParams, layout, load_register, omega_bounds, save_register, strip_ancillas
from .rng import substream
from .simulator import evolve, measure

DEVICE_KEYS = {"c6", "omega_max", "delta_abs_max", "coherence_time", "min_spacing"}
CONFIG_KEYS = {
    "device", "seed", "shots", "dt", "rounds", "optimizer", "family",
    "tau", "spacing", "epochs", "holdout_frac", "out",
}
# Spacing 9 um puts edge interactions near 10 rad/us and 1.7x non-edge
# clearances near 0.5 rad/us, both comfortably bracketed by the hardware
# omega and delta ranges; tighter registers leave the soft interaction
# tails competing with the detuning.
DEFAULTS = {
    "seed": 0, "shots": 1000, "dt": 4.0, "rounds": 50, "optimizer": "tpe",
    "family": "complex", "tau": DEFAULT_TAU, "spacing": 9.0, "epochs": 300,
    "holdout_frac": 0.2, "out": ".",
}


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such config: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"bad JSON in {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    device = doc.get("device", {})
    if not isinstance(device, dict):
        raise InputError("config key 'device' must be an object")
    bad = set(device) - DEVICE_KEYS
    if bad:
        raise InputError(f"unknown device keys: {sorted(bad)}")
    return doc


def effective_config(args) -> dict:
    """Config file values, overridden by explicit CLI flags, over defaults."""
    cfg = dict(DEFAULTS)
    if getattr(args, "dt_default", None) is not None:
        cfg["dt"] = args.dt_default
    cfg["device"] = {}
    if getattr(args, "config", None):
        loaded = _load_config(args.config)
        cfg["device"].update(loaded.get("device", {}))
        for k, v in loaded.items():
            if k != "device":
                cfg[k] = v
    for k in DEFAULTS:
        flag = getattr(args, k, None)
        if flag is not None:
            cfg[k] = flag
    try:
        for k in ("seed", "shots", "rounds", "epochs"):
            cfg[k] = int(cfg[k])
        for k in ("dt", "tau", "spacing", "holdout_frac"):
            cfg[k] = float(cfg[k])
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad config value: {exc}") from None
    if cfg["shots"] < 1:
        raise InputError("shots must be >= 1")
    if cfg["dt"] <= 0:
        raise InputError("dt must be positive")
    if cfg["optimizer"] not in ("tpe", "nm"):
        raise InputError(f"unknown optimizer {cfg['optimizer']!r}")
    if cfg["family"] not in ("simple", "complex"):
        raise InputError(f"unknown family {cfg['family']!r}")
    return cfg


def config_digest(cfg: dict, command: str) -> str:
    doc = dict(cfg)
    doc.pop("out", None)  # runs differing only in output directory are the same run
    doc["command"] = command
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _device(cfg) -> DeviceParams:
    return DeviceParams(**cfg["device"])


def _meta(cfg, command) -> dict:
    return {"config_digest": config_digest(cfg, command), "seed": cfg["seed"]}


def _outdir(cfg) -> str:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header_comment, columns, rows):
    with open(path, "w") as fh:
        fh.write(f"# {header_comment}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in columns) + "\n")


def _float_list(text) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_dock(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "dock")
    out = _outdir(cfg)
    ligand = load_molecule(args.ligand)
    receptor = load_molecule(args.receptor)
    table = load_table(args.table) if args.table else default_table()
    g = build_binding_graph(ligand, receptor, table, tau=cfg["tau"])
    gc = complement(g)
    save_graph(g, os.path.join(out, "binding_graph.json"), meta=meta)
    save_graph(gc, os.path.join(out, "complement_graph.json"), meta=meta)
    print(f"contacts: {g.n}  binding edges: {len(g.edges)}  "
          f"complement edges: {len(gc.edges)}")
    if g.n == 0:
        print("warning: no attracting contacts, graphs are empty", file=sys.stderr)
    return 0


def cmd_embed(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "embed")
    out = _outdir(cfg)
    dev = _device(cfg)
    g = load_graph(args.graph)
    emb = layout(g, dev, spacing=cfg["spacing"], seed=cfg["seed"])
    lo, hi = omega_bounds(emb, dev)
    ancillas = emb.ancilla_ids()
    meta["spacing"] = emb.spacing
    save_register(emb, os.path.join(out, "register.json"), meta=meta)
    print(f"atoms: {emb.register.n}  ancillas: {len(ancillas)}  "
          f"links: {len(emb.link_map)}  omega band: [{lo:.4g}, {hi:.4g}] rad/us")
    return 0


def _load_trials(path) -> list:
    trials = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            trials.append(Trial(
                round=int(d["round"]), params=dict(d["params"]),
                score=float(d["score"]), gini=float(d["gini"]),
                mean_f=float(d["mean_f"]),
                top=tuple((str(b), int(c)) for b, c in d["top"]),
            ))
    return trials


def cmd_vqaa(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "vqaa")
    out = _outdir(cfg)
    dev = _device(cfg)
    emb = load_register(args.register, dev)
    log_path = os.path.join(out, "trials.jsonl")

    res = None
    if args.resume and os.path.exists(log_path):
        if cfg["optimizer"] != "tpe":
            raise InputError("resume is only meaningful for the tpe optimizer")
        done = _load_trials(log_path)
        if len(done) >= cfg["rounds"]:
            res = prefix_result(
                emb, dev, done, cfg["rounds"], family=cfg["family"],
                shots=cfg["shots"], seed=cfg["seed"], dt=cfg["dt"],
            )
    if res is None:
        res = vqaa(
            emb, dev, family=cfg["family"], rounds=cfg["rounds"],
            shots=cfg["shots"], optimizer=cfg["optimizer"], seed=cfg["seed"],
            dt=cfg["dt"], log_path=log_path,
        )

    g = emb.graph
    norm = normalized_score(res.refined_histogram, g, res.refined)
    succ = success_probability(res.refined_histogram, g)
    _write_json(os.path.join(out, "result.json"), {
        **meta,
        "family": res.family,
        "optimizer": cfg["optimizer"],
        "rounds_run": len(res.trials),
        "best_round": res.best.round,
        "best_params": res.best.params,
        "best_trial_score": res.best.score,
        "refined": {
            "score": res.refined.score, "mean_f": res.refined.mean_f,
            "gini": res.refined.gini, "nullified": res.refined.nullified,
        },
        "normalized_score": norm,
        "success_probability": succ,
        "low_confidence": res.low_confidence,
        "second_pass": res.second_pass,
        "top": [list(t) for t in res.refined_histogram.top(10)],
    })
    save_histogram(res.refined_histogram, os.path.join(out, "histogram.json"), meta=meta)
    print(f"best round {res.best.round}: score {res.refined.score:.4f} "
          f"(normalized {norm:.4f}, success {succ:.3f})"
          + ("  [low confidence]" if res.low_confidence else ""))
    return 0


def cmd_sweep(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "sweep")
    out = _outdir(cfg)
    dev = _device(cfg)
    emb = load_register(args.register, dev)
    rows = qaa_sweep(
        emb, dev, _float_list(args.omegas), _float_list(args.deltas),
        _float_list(args.times), shots=cfg["shots"], seed=cfg["seed"],
        dt=cfg["dt"],
    )
    _write_csv(
        os.path.join(out, "sweep.csv"),
        f"config_digest={meta['config_digest']} seed={meta['seed']}",
        ["omega", "delta", "time", "success_prob"], rows,
    )
    feasible = [r for r in rows if not math.isnan(r["success_prob"])]
    if feasible:
        best = max(feasible, key=lambda r: r["success_prob"])
        print(f"cells: {len(rows)} ({len(rows) - len(feasible)} infeasible)  "
              f"best: omega={best['omega']:g} delta={best['delta']:g} "
              f"time={best['time']:g} success={best['success_prob']:.3f}")
    else:
        print(f"cells: {len(rows)} (all infeasible)")
    return 0


def _benchmark_entries(subset: str):
    entries = generate_corpus()
    if subset == "lines":
        return [e for e in entries if e.family == "line"]
    if subset == "all":
        return entries
    raise InputError(f"unknown subset {subset!r}")


def cmd_benchmark(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "benchmark")
    out = _outdir(cfg)
    dev = _device(cfg)
    rounds_list = sorted(int(r) for r in _float_list(args.rounds_list))
    if not rounds_list or rounds_list[0] < 1:
        raise InputError("rounds list must contain positive integers")
    entries = _benchmark_entries(args.subset)
    rows = []
    for entry in entries:
        entry_seed = int(substream(cfg["seed"], "bench", entry.name).integers(1 << 62))
        full = vqaa(
            entry.embedding, dev, family=cfg["family"], rounds=rounds_list[-1],
            shots=cfg["shots"], optimizer="tpe", seed=entry_seed, dt=cfg["dt"],
        )
        for k in rounds_list:
            res = (full if k == rounds_list[-1] and not full.second_pass
                   else prefix_result(
                       entry.embedding, dev, full.trials, k, family=cfg["family"],
                       shots=cfg["shots"], seed=entry_seed, dt=cfg["dt"]))
            norm = normalized_score(res.refined_histogram, entry.embedding.graph,
                                    res.refined)
            rows.append({
                "family": entry.family, "size_index": entry.size_index,
                "spacing": entry.spacing, "n_atoms": entry.embedding.register.n,
                "rounds": k, "score": res.refined.score,
                "normalized_score": norm,
                "low_confidence": res.low_confidence,
            })
    _write_csv(
        os.path.join(out, "benchmark.csv"),
        f"config_digest={meta['config_digest']} seed={meta['seed']}",
        ["family", "size_index", "spacing", "n_atoms", "rounds", "score",
         "normalized_score", "low_confidence"], rows,
    )
    for k in rounds_list:
        vals = [r["normalized_score"] for r in rows if r["rounds"] == k]
        print(f"rounds {k}: mean normalized score {np.mean(vals):.4f} "
              f"over {len(vals)} registers")
    return 0


def cmd_dataset(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "dataset")
    out = _outdir(cfg)
    dev = _device(cfg)
    entries = generate_corpus(dev)

    def progress(k, total, name, res):
        if args.verbose:
            print(f"[{k + 1}/{total}] {name}: score {res.refined.score:.4f}",
                  flush=True)

    records = label_dataset(
        entries, dev, rounds=cfg["rounds"], shots=cfg["shots"],
        seed=cfg["seed"], dt=cfg["dt"], progress=progress,
    )
    save_dataset(records, os.path.join(out, "dataset.jsonl"))
    report = {
        **meta,
        "registers": len(entries),
        "labelled": len(records),
        "dropped": len(entries) - len(records),
        "rounds": cfg["rounds"],
        "mean_score": float(np.mean([r.score for r in records])) if records else 0.0,
    }
    _write_json(os.path.join(out, "dataset_report.json"), report)
    print(f"labelled {report['labelled']}/{report['registers']} registers "
          f"(mean score {report['mean_score']:.4f})")
    return 0


def cmd_train(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "train")
    out = _outdir(cfg)
    records = load_dataset(args.dataset)
    if not records:
        raise InputError("dataset is empty")
    train_recs, hold_recs = train_holdout_split(
        records, seed=cfg["seed"], holdout_frac=cfg["holdout_frac"],
    )
    report = {**meta, "train_size": len(train_recs), "holdout_size": len(hold_recs),
              "epochs": cfg["epochs"], "mape": {}}
    for target in TARGETS:
        model = train(train_recs, target, epochs=cfg["epochs"], seed=cfg["seed"])
        save_models({target: model}, os.path.join(out, f"mlqaa_{target}.npz"),
                    meta=_meta(cfg, "train"))
        preds = [model.predict(featurize(np.asarray(r.positions))) for r in hold_recs]
        truth = [r.params[target] for r in hold_recs]
        value = mape(preds, truth) if hold_recs else float("nan")
        report["mape"][target] = value
        print(f"{target}: holdout MAPE {value:.1f}%  "
              f"(best val loss {min(v for _, v in model.history):.5f})")
    _write_json(os.path.join(out, "mape_report.json"), report)
    return 0


def _load_model_dir(path) -> dict:
    models = {}
    for target in TARGETS:
        f = os.path.join(path, f"mlqaa_{target}.npz")
        if not os.path.exists(f):
            raise InputError(f"missing model file {f}")
        models.update(load_models(f))
    return models


def cmd_predict(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "predict")
    out = _outdir(cfg)
    dev = _device(cfg)
    emb = load_register(args.register, dev)
    models = _load_model_dir(args.models)
    params = predict_params(models, emb, dev)
    _write_json(os.path.join(out, "params.json"), {**meta, "family": "complex",
                                                   "params": params})
    print("  ".join(f"{k}={v:.4g}" for k, v in sorted(params.items())))
    return 0


def cmd_mlqaa_eval(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "mlqaa-eval")
    out = _outdir(cfg)
    dev = _device(cfg)
    records = load_dataset(args.dataset)
    _, hold_recs = train_holdout_split(records, seed=cfg["seed"],
                                       holdout_frac=cfg["holdout_frac"])
    models = _load_model_dir(args.models)
    rows = []
    for rec in hold_recs:
        emb = rec.embedding(dev)
        g = emb.graph
        params = predict_params(models, emb, dev)
        seq = sequence_for(params, "complex", dev)
        state = evolve(emb.register, seq, dev, dt=cfg["dt"])
        hist = strip_ancillas(
            measure(state, cfg["shots"], substream(cfg["seed"], "eval", rec.name)),
            emb,
        )
        sb = score(hist, g)
        rows.append({
            "name": rec.name, "n_atoms": emb.register.n,
            "spacing": rec.spacing,
            "mlqaa_norm": normalized_score(hist, g, sb),
            "vqaa_norm": normalized_score_from_value(rec.score, g),
        })
    mlqaa_mean = float(np.mean([r["mlqaa_norm"] for r in rows]))
    vqaa_mean = float(np.mean([r["vqaa_norm"] for r in rows]))
    _write_csv(
        os.path.join(out, "mlqaa_eval.csv"),
        f"config_digest={meta['config_digest']} seed={meta['seed']}",
        ["name", "n_atoms", "spacing", "mlqaa_norm", "vqaa_norm"], rows,
    )
    _write_json(os.path.join(out, "mlqaa_eval_summary.json"), {
        **meta, "holdout_size": len(rows),
        "mlqaa_mean_normalized": mlqaa_mean,
        "vqaa_mean_normalized": vqaa_mean,
        "gap": vqaa_mean - mlqaa_mean,
    })
    print(f"holdout {len(rows)}: MLQAA {mlqaa_mean:.4f} vs VQAA {vqaa_mean:.4f} "
          f"(gap {vqaa_mean - mlqaa_mean:+.4f})")
    return 0


def normalized_score_from_value(score_value: float, g) -> float:
    best_card = max(s.bitstring.count("1") for s in brute_force_mwis(g))
    return float(score_value / (best_card / g.n))


def cmd_oracle(args) -> int:
    cfg = effective_config(args)
    meta = _meta(cfg, "oracle")
    g = load_graph(args.graph)
    mwis = brute_force_mwis(g)
    gc = complement(g)
    cliques_dual = max_weight_clique(gc)
    agree = {s.bitstring for s in mwis} == {s.bitstring for s in cliques_dual}
    print(f"graph: {g.n} vertices, {len(g.edges)} edges")
    for s in mwis:
        print(f"  mwis {s.bitstring}  weight {s.weight(g):g}  members {sorted(s.members)}")
    print(f"cross-check vs clique solver on complement: "
          f"{'agree' if agree else 'DISAGREE'}")
    if args.clique:
        cliques = max_weight_clique(g)
        for s in cliques:
            print(f"  clique {s.bitstring}  weight {s.weight(g):g}  "
                  f"members {sorted(s.members)}")
    if args.out_file:
        _write_json(args.out_file, {
            **meta,
            "mwis": [{"bitstring": s.bitstring, "weight": s.weight(g),
                      "members": sorted(s.members)} for s in mwis],
            "cross_check_agrees": agree,
        })
    if not agree:
        raise NumericalError("solver cross-check failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="root random seed")
    common.add_argument("--shots", type=int, help="measurement shots")
    common.add_argument("--dt", type=float, help="integrator step, ns")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(
        prog="rydock",
        description="pharmacophore docking via Rydberg-register independent sets",
    )
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dock", parents=[common],
                       help="binding graph from two pharmacophore files")
    d.add_argument("--ligand", required=True)
    d.add_argument("--receptor", required=True)
    d.add_argument("--table", help="interaction table JSON (default built-in)")
    d.add_argument("--tau", type=float, help="distance tolerance, angstrom")
    d.set_defaults(func=cmd_dock)

    e = sub.add_parser("embed", parents=[common],
                       help="lay a graph out as an atom register")
    e.add_argument("--graph", required=True)
    e.add_argument("--spacing", type=float, help="target edge length, um")
    e.set_defaults(func=cmd_embed)

    v = sub.add_parser("vqaa", parents=[common],
                       help="variational pulse search on a register")
    v.add_argument("--register", required=True)
    v.add_argument("--family", choices=["simple", "complex"])
    v.add_argument("--optimizer", choices=["tpe", "nm"])
    v.add_argument("--rounds", type=int)
    v.add_argument("--resume", action="store_true",
                   help="reuse trials.jsonl if it already has enough rounds")
    v.set_defaults(func=cmd_vqaa)

    w = sub.add_parser("sweep", parents=[common],
                       help="success-probability grid over the simple family")
    w.add_argument("--register", required=True)
    w.add_argument("--omegas", required=True, help="comma list, rad/us")
    w.add_argument("--deltas", required=True, help="comma list, rad/us")
    w.add_argument("--times", required=True, help="comma list, ns")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("benchmark", parents=[common],
                       help="normalized score vs optimization rounds on the corpus")
    b.add_argument("--subset", default="lines", choices=["lines", "all"])
    b.add_argument("--rounds", dest="rounds_list", default="10,50,200",
                   help="comma list")
    b.add_argument("--family", choices=["simple", "complex"])
    b.set_defaults(func=cmd_benchmark)

    ds = sub.add_parser("dataset", parents=[common],
                        help="generate and label the 125-register corpus")
    ds.add_argument("--rounds", type=int, help="search rounds per register")
    ds.add_argument("--verbose", action="store_true")
    ds.set_defaults(func=cmd_dataset, dt_default=8.0)

    t = sub.add_parser("train", parents=[common],
                       help="fit the five pulse-parameter regressors")
    t.add_argument("--dataset", required=True)
    t.add_argument("--epochs", type=int)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common],
                        help="pulse parameters for a register from trained models")
    pr.add_argument("--register", required=True)
    pr.add_argument("--models", required=True, help="directory with mlqaa_*.npz")
    pr.set_defaults(func=cmd_predict)

    me = sub.add_parser("mlqaa-eval", parents=[common],
                        help="head-to-head: predicted pulses vs the search labels")
    me.add_argument("--dataset", required=True)
    me.add_argument("--models", required=True)
    me.set_defaults(func=cmd_mlqaa_eval)

    o = sub.add_parser("oracle", parents=[common],
                       help="exact solver listing for a graph file")
    o.add_argument("--graph", required=True)
    o.add_argument("--clique", action="store_true",
                   help="also list maximum-weight cliques of the graph itself")
    o.add_argument("--out-file", dest="out_file")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InfeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
