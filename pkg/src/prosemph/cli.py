"""prosody-emph: one executable over the whole pipeline.

Subcommands: validate, label, train, predict, filter, evaluate, condition.
Every run writes a manifest.json recording the effective config hash, the
seed, input counts, output paths and wall time. Usage errors exit 2, data
errors exit 1 with a per-item report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import conditioning, corpus, metrics, model as model_mod, prominence
from .embeddings import (
    EMPHASIS_DIM_DEFAULT,
    SEMANTIC_DIM_DEFAULT,
    hash_provider,
    init_table,
    load_semantic,
)
from .errors import ProsemphError
from .tagset import default_tagset, load_tagset


def _config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    input_count: int, outputs: list[str], t0: float) -> None:
    manifest = {
        "command": command,
        "config_hash": _config_hash(config),
        "seed": seed,
        "input_count": input_count,
        "output_paths": sorted(outputs),
        "wall_time_sec": time.monotonic() - t0,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _tagset(args):
    return load_tagset(args.tagset) if args.tagset else default_tagset()


def _provider(semantic_cfg: dict):
    mode = semantic_cfg.get("mode", "hash")
    if mode == "file_backed":
        return load_semantic(semantic_cfg["path"])
    return hash_provider(
        dim=int(semantic_cfg.get("dim", SEMANTIC_DIM_DEFAULT)),
        seed=int(semantic_cfg.get("seed", 0)),
    )


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    tagset = _tagset(args)
    report = corpus.validate_corpus(args.corpus, tagset)
    for e in report.entries:
        line = f"{e.utterance_id}\t{'pass' if e.ok else 'fail'}"
        if e.failure:
            line += f"\t{e.failure}"
        print(line)
    print(f"{report.num_pass} pass, {report.num_fail} fail")
    if args.out:
        t0 = time.monotonic()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "validation.json", "w", encoding="utf-8") as f:
            json.dump(
                [vars(e) for e in report.entries], f, ensure_ascii=False, indent=2
            )
        _write_manifest(out, "validate", {"corpus": str(args.corpus)}, 0,
                        len(report.entries), ["validation.json"], t0)
    return 0 if report.ok else 1


def _label_one(task):
    uid, utt_path, wav_path, cfg, write_scores, out_dir = task
    try:
        utt = corpus.load_utterance(utt_path)
        result = prominence.label_utterance(wav_path, utt, cfg)
    except ProsemphError as exc:
        return uid, f"{type(exc).__name__}: {exc}", []
    outputs = []
    lab_path = Path(out_dir) / f"{uid}.lab.tsv"
    corpus.save_labels(result.labels, lab_path)
    outputs.append(lab_path.name)
    if write_scores:
        z = prominence.quantize(result.scores, cfg.threshold_sigma, uid)
        s = np.asarray(result.scores)
        std = s.std()
        zs = (s - s.mean()) / std if std > 1e-12 else np.zeros_like(s)
        score_path = Path(out_dir) / f"{uid}.scores.tsv"
        with open(score_path, "w", encoding="utf-8") as f:
            for i, (raw, zi) in enumerate(zip(s, zs)):
                f.write(f"{i}\t{raw:.6f}\t{zi:.6f}\n")
        outputs.append(score_path.name)
        del z
    return uid, None, outputs


def cmd_label(args) -> int:
    t0 = time.monotonic()
    cfg = (
        prominence.ProminenceConfig.from_json(args.config)
        if args.config
        else prominence.ProminenceConfig()
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = corpus.corpus_ids(args.corpus)
    tasks = [
        (
            uid,
            Path(args.corpus) / f"{uid}.utt.json",
            Path(args.wav) / f"{uid}.wav",
            cfg,
            args.scores,
            str(out_dir),
        )
        for uid in ids
    ]
    failures = []
    outputs = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_label_one, tasks))
    else:
        results = [_label_one(t) for t in tasks]
    for uid, failure, outs in sorted(results):
        if failure:
            failures.append({"utterance_id": uid, "error": failure})
            print(f"{uid}\tfail\t{failure}", file=sys.stderr)
        else:
            outputs.extend(outs)
    if failures:
        with open(out_dir / "failures.json", "w", encoding="utf-8") as f:
            json.dump(failures, f, indent=2)
    _write_manifest(out_dir, "label", cfg.to_dict(), 0, len(ids), outputs, t0)
    return 1 if failures else 0


def _load_examples(corpus_dir, tagset, require_labels=True):
    examples = []
    for uid in corpus.corpus_ids(corpus_dir):
        d = Path(corpus_dir)
        utt = corpus.load_utterance(d / f"{uid}.utt.json")
        ann = corpus.load_annotation(d / f"{uid}.ann.json", utt, tagset)
        lab_path = d / f"{uid}.lab.tsv"
        if lab_path.exists():
            lab = corpus.load_labels(lab_path, uid)
            lab.validate(utt.num_chars)
        elif require_labels:
            continue
        else:
            lab = None
        examples.append(model_mod.Example(utt=utt, ann=ann, labels=lab))
    return examples


def cmd_train(args) -> int:
    t0 = time.monotonic()
    cfg_obj = _load_json(args.config) if args.config else {}
    tagset = _tagset(args)
    provider = _provider(cfg_obj.get("semantic", {}))
    model_cfg = model_mod.ModelConfig(
        semantic_dim=provider.dim,
        seed=args.seed if args.seed is not None else cfg_obj.get("seed", 0),
        **cfg_obj.get("model", {}),
    )
    train_kwargs = dict(cfg_obj.get("train", {}))
    if args.seed is not None:
        train_kwargs["seed"] = args.seed
    train_cfg = model_mod.TrainConfig(**train_kwargs)
    dataset = _load_examples(args.corpus, tagset)
    if not dataset:
        print("no labeled utterances found", file=sys.stderr)
        return 1
    val_fraction = float(cfg_obj.get("val_fraction", 0.0))
    if val_fraction > 0:
        rng = np.random.default_rng(train_cfg.seed)
        order = rng.permutation(len(dataset))
        n_val = max(1, int(len(dataset) * val_fraction))
        val = [dataset[i] for i in order[:n_val]]
        trn = [dataset[i] for i in order[n_val:]]
    else:
        val, trn = None, dataset
    model = model_mod.PredictorModel(tagset, provider, model_cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "model.pemo"
    model_mod.train(
        model, trn, train_cfg, val_dataset=val,
        log_path=out_dir / "train_log.ldjson", checkpoint_path=ckpt,
    )
    _write_manifest(
        out_dir, "train",
        {"config": cfg_obj, "model": vars(model_cfg), "train": vars(train_cfg)},
        train_cfg.seed, len(dataset), ["model.pemo", "train_log.ldjson"], t0,
    )
    return 0


def cmd_predict(args) -> int:
    t0 = time.monotonic()
    cfg_obj = _load_json(args.config) if args.config else {}
    tagset = _tagset(args)
    provider = _provider(cfg_obj.get("semantic", {}))
    model = model_mod.PredictorModel.load(args.checkpoint, tagset, provider)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    examples = _load_examples(args.corpus, tagset, require_labels=False)
    outputs = []
    failures = []
    for ex in examples:
        try:
            lab = model.predict(ex.utt, ex.ann)
        except ProsemphError as exc:
            failures.append({"utterance_id": ex.utt.id, "error": str(exc)})
            continue
        path = out_dir / f"{ex.utt.id}.lab.tsv"
        corpus.save_labels(lab, path)
        outputs.append(path.name)
    if failures:
        with open(out_dir / "failures.json", "w", encoding="utf-8") as f:
            json.dump(failures, f, indent=2)
    _write_manifest(out_dir, "predict", cfg_obj, model.config.seed,
                    len(examples), outputs, t0)
    return 1 if failures else 0


def cmd_filter(args) -> int:
    t0 = time.monotonic()
    pseudo_dir, pred_dir = Path(args.corpus), Path(args.predicted)
    kept = []
    count = 0
    for lab_path in sorted(pseudo_dir.glob("*.lab.tsv")):
        uid = lab_path.name[: -len(".lab.tsv")]
        pred_path = pred_dir / lab_path.name
        if not pred_path.exists():
            continue
        count += 1
        pseudo = corpus.load_labels(lab_path, uid)
        pred = corpus.load_labels(pred_path, uid)
        if metrics.filter_by_confidence(pseudo, pred, args.tau):
            kept.append(uid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "kept.json", "w", encoding="utf-8") as f:
        json.dump(kept, f, indent=2)
    print(f"kept {len(kept)} of {count}")
    _write_manifest(out_dir, "filter", {"tau": args.tau}, 0, count,
                    ["kept.json"], t0)
    return 0


def cmd_evaluate(args) -> int:
    t0 = time.monotonic()
    pred_dir, gold_dir = Path(args.predicted), Path(args.gold)
    predicted = {}
    gold = {}
    for lab_path in sorted(gold_dir.glob("*.lab.tsv")):
        uid = lab_path.name[: -len(".lab.tsv")]
        gold[uid] = corpus.load_labels(lab_path, uid)
        pp = pred_dir / lab_path.name
        if pp.exists():
            predicted[uid] = corpus.load_labels(pp, uid)
    try:
        m = metrics.evaluate(predicted, gold)
    except ProsemphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(m.to_dict(), f, indent=2)
        f.write("\n")
    print(json.dumps(m.to_dict()))
    _write_manifest(out_dir, "evaluate", {}, 0, len(gold), ["metrics.json"], t0)
    return 0


def cmd_condition(args) -> int:
    t0 = time.monotonic()
    cfg_obj = _load_json(args.config) if args.config else {}
    tagset = _tagset(args)
    provider = _provider(cfg_obj.get("semantic", {}))
    cond_dim = int(cfg_obj.get("cond_dim", conditioning.COND_DIM_DEFAULT))
    emph_dim = int(cfg_obj.get("emph_dim", EMPHASIS_DIM_DEFAULT))
    seed = args.seed if args.seed is not None else int(cfg_obj.get("seed", 0))
    rel_table = init_table(tagset.num_relations, cond_dim, "rel", seed)
    pos_table = init_table(tagset.num_pos, cond_dim, "pos", seed + 1)
    emph_table = init_table(2, emph_dim, "emph", seed + 2)
    rng = np.random.default_rng(seed + 3)
    projection = rng.uniform(-0.1, 0.1, size=(provider.dim, cond_dim)).astype(
        np.float32
    )
    labels_dir = Path(args.labels) if args.labels else Path(args.corpus)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    failures = []
    examples = _load_examples(args.corpus, tagset, require_labels=False)
    for ex in examples:
        try:
            lab_path = labels_dir / f"{ex.utt.id}.lab.tsv"
            if not lab_path.exists():
                raise ProsemphError("MissingLabels")
            lab = corpus.load_labels(lab_path, ex.utt.id)
            lab.validate(ex.utt.num_chars)
            ling = conditioning.build_linguistic(
                ex.utt, ex.ann, provider, rel_table, pos_table, projection, tagset
            )
            emph = conditioning.build_emphasis(lab, emph_table, ex.utt)
            bundle = conditioning.ConditioningBundle(
                utterance_id=ex.utt.id,
                linguistic=ling.astype(np.float32),
                emphasis=emph.astype(np.float32),
            )
            path = out_dir / f"{ex.utt.id}.cond.bin"
            conditioning.export_bundle(bundle, path)
            outputs.append(path.name)
        except ProsemphError as exc:
            failures.append({"utterance_id": ex.utt.id, "error": str(exc)})
    if failures:
        with open(out_dir / "failures.json", "w", encoding="utf-8") as f:
            json.dump(failures, f, indent=2)
    _write_manifest(
        out_dir, "condition",
        {"cond_dim": cond_dim, "emph_dim": emph_dim, "config": cfg_obj},
        seed, len(examples), outputs, t0,
    )
    return 1 if failures else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prosody-emph", description="prosodic emphasis toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, corpus_required=True):
        p.add_argument("--corpus", required=corpus_required, help="corpus directory")
        p.add_argument("--tagset", default=None, help="tagset.json (default inventory otherwise)")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("validate", help="validate a corpus directory")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("label", help="unsupervised CWT emphasis labeling")
    common(p)
    p.add_argument("--wav", required=True, help="directory of <id>.wav files")
    p.add_argument("--scores", action="store_true", help="also write <id>.scores.tsv")
    p.set_defaults(func=cmd_label, out_required=True)

    p = sub.add_parser("train", help="train the emphasis predictor")
    common(p)
    p.set_defaults(func=cmd_train, out_required=True)

    p = sub.add_parser("predict", help="predict emphasis labels")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_predict, out_required=True)

    p = sub.add_parser("filter", help="confidence-filter pseudo labels")
    common(p)
    p.add_argument("--predicted", required=True, help="directory of predicted labels")
    p.add_argument("--tau", type=float, default=0.9)
    p.set_defaults(func=cmd_filter, out_required=True)

    p = sub.add_parser("evaluate", help="precision/recall/F against gold labels")
    common(p, corpus_required=False)
    p.add_argument("--predicted", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_evaluate, out_required=True)

    p = sub.add_parser("condition", help="export phone-level conditioning bundles")
    common(p)
    p.add_argument("--labels", default=None, help="labels directory (default: corpus)")
    p.set_defaults(func=cmd_condition, out_required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        return args.func(args)
    except ProsemphError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
