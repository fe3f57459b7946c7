"""Graph-neural emphasis predictor.

Character nodes are initialized from POS and semantic embeddings, encoded
by a gated graph network (GRU-style updates, per-relation per-direction
message weights, fixed iteration count) over the BOS/EOS-augmented
character graph, and classified per character by a two-layer head.

All gradients are analytic and hand-derived; finite-difference tests in
the suite pin them down. Everything is plain numpy so training is
deterministic and checkpoints are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import DepAnnotation, EmphasisLabels, Utterance
from .embeddings import (
    POS_DIM_DEFAULT,
    SEMANTIC_DIM_DEFAULT,
    SemanticProvider,
)
from .errors import (
    DimMismatchError,
    EmptyDatasetError,
    LengthMismatchError,
    MalformedFileError,
)
from .graph import CharGraph, build_char_graph, expand_word_to_char
from .tagset import Tagset

PEMO_MAGIC = b"PEMO"
PEMO_VERSION = 1

HIDDEN_DEFAULT = 512
ITERATIONS_DEFAULT = 3
HEAD_HIDDEN_DEFAULT = 128
NUM_CLASSES = 2


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = HIDDEN_DEFAULT
    num_iterations: int = ITERATIONS_DEFAULT
    head_hidden: int = HEAD_HIDDEN_DEFAULT
    pos_dim: int = POS_DIM_DEFAULT
    semantic_dim: int = SEMANTIC_DIM_DEFAULT
    seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 5e-5
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"
    class_weight_positive: float = 3.0

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate < 0 or self.batch_size < 1:
            raise ValueError("train config values must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _glorot(rng, shape, dtype):
    limit = np.sqrt(6.0 / (shape[-1] + shape[-2])) if len(shape) >= 2 else 0.1
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class PredictorModel:
    """Full predictor: parameters, tagset binding and a semantic provider."""

    def __init__(
        self,
        tagset: Tagset,
        provider: SemanticProvider,
        config: ModelConfig = ModelConfig(),
        dtype=np.float32,
    ):
        if provider.dim != config.semantic_dim:
            raise DimMismatchError(
                f"provider dim {provider.dim} != configured semantic dim "
                f"{config.semantic_dim}"
            )
        self.tagset = tagset
        self.provider = provider
        self.config = config
        self.dtype = dtype
        self.params = self._init_params()

    def _init_params(self) -> dict[str, np.ndarray]:
        cfg = self.config
        H, R = cfg.hidden_dim, self.tagset.num_relations
        P = self.tagset.num_pos
        in_dim = cfg.semantic_dim + cfg.pos_dim
        rng = np.random.default_rng(cfg.seed)
        dt = self.dtype
        p = {
            "proj_W": _glorot(rng, (H, in_dim), dt),
            "proj_b": np.zeros(H, dtype=dt),
            "bos": rng.uniform(-0.1, 0.1, size=H).astype(dt),
            "eos": rng.uniform(-0.1, 0.1, size=H).astype(dt),
            "pos_table": rng.uniform(-0.1, 0.1, size=(P, cfg.pos_dim)).astype(dt),
            "msg_W": _glorot(rng, (R, 2, H, H), dt),
            "msg_b": np.zeros((R, 2, H), dtype=dt),
            "head_W1": _glorot(rng, (cfg.head_hidden, H), dt),
            "head_b1": np.zeros(cfg.head_hidden, dtype=dt),
            "head_W2": _glorot(rng, (NUM_CLASSES, cfg.head_hidden), dt),
            "head_b2": np.zeros(NUM_CLASSES, dtype=dt),
        }
        for gate in ("z", "r", "c"):
            p[f"gru_W{gate}"] = _glorot(rng, (H, H), dt)
            p[f"gru_U{gate}"] = _glorot(rng, (H, H), dt)
            p[f"gru_b{gate}"] = np.zeros(H, dtype=dt)
        # update gate starts open toward state retention
        p["gru_bz"] = np.ones(cfg.hidden_dim, dtype=dt)
        return p

    # -- feature assembly ---------------------------------------------------

    def node_init(self, utt: Utterance, ann: DepAnnotation, _cache=None):
        """Initial node matrix [num_nodes x hidden] plus backward cache."""
        p = self.params
        sem = np.asarray(
            self.provider.rows(utt.id, utt.chars), dtype=self.dtype
        )
        if sem.shape[1] != self.config.semantic_dim:
            raise DimMismatchError(
                f"{utt.id}: semantic rows of dim {sem.shape[1]}, expected "
                f"{self.config.semantic_dim}"
            )
        pos_char_ids = expand_word_to_char(np.asarray(ann.pos_tags), utt)
        pos_vec = p["pos_table"][pos_char_ids]
        x = np.concatenate([sem, pos_vec], axis=1)
        h_chars = x @ p["proj_W"].T + p["proj_b"]
        h0 = np.vstack([p["bos"][None, :], h_chars, p["eos"][None, :]])
        cache = {"x": x, "pos_char_ids": pos_char_ids}
        return h0, cache

    # -- GGN ---------------------------------------------------------------

    def ggn_forward(self, graph: CharGraph, h0: np.ndarray):
        """Propagate for num_iterations; returns final states and caches."""
        if h0.shape[0] != graph.num_nodes:
            raise LengthMismatchError("h0 rows must equal graph node count")
        p = self.params
        edges = np.asarray(graph.edges, dtype=np.int64)
        if edges.size == 0:
            src = dst = rel = dr = np.zeros(0, dtype=np.int64)
        else:
            src, dst, rel, dr = edges.T
        W_e = p["msg_W"][rel, dr]  # [E x H x H]
        b_e = p["msg_b"][rel, dr]
        h = h0
        steps = []
        for _ in range(self.config.num_iterations):
            m = np.zeros_like(h)
            if len(src):
                msg = np.einsum("eij,ej->ei", W_e, h[src]) + b_e
                np.add.at(m, dst, msg)
            az = m @ p["gru_Wz"].T + h @ p["gru_Uz"].T + p["gru_bz"]
            ar = m @ p["gru_Wr"].T + h @ p["gru_Ur"].T + p["gru_br"]
            z = _sigmoid(az)
            r = _sigmoid(ar)
            ac = m @ p["gru_Wc"].T + (r * h) @ p["gru_Uc"].T + p["gru_bc"]
            c = np.tanh(ac)
            h_new = z * h + (1.0 - z) * c
            steps.append({"h_prev": h, "m": m, "z": z, "r": r, "c": c})
            h = h_new
        cache = {"steps": steps, "src": src, "dst": dst, "rel": rel, "dir": dr,
                 "W_e": W_e}
        return h, cache

    # -- full forward -------------------------------------------------------

    def forward(self, utt: Utterance, ann: DepAnnotation, graph: CharGraph | None = None):
        """Per-character class probabilities [num_chars x 2] plus caches."""
        p = self.params
        if graph is None:
            graph = build_char_graph(utt, ann, self.tagset)
        h0, init_cache = self.node_init(utt, ann)
        hT, ggn_cache = self.ggn_forward(graph, h0)
        h_chars = hT[1:-1]
        a1 = h_chars @ p["head_W1"].T + p["head_b1"]
        hid = np.maximum(a1, 0.0)
        logits = hid @ p["head_W2"].T + p["head_b2"]
        shifted = logits - logits.max(axis=1, keepdims=True)
        expl = np.exp(shifted)
        probs = expl / expl.sum(axis=1, keepdims=True)
        cache = {
            "init": init_cache,
            "ggn": ggn_cache,
            "h_chars": h_chars,
            "hid": hid,
            "probs": probs,
        }
        return probs, cache

    def probabilities(self, utt: Utterance, ann: DepAnnotation) -> np.ndarray:
        probs, _ = self.forward(utt, ann)
        return probs

    def predict(self, utt: Utterance, ann: DepAnnotation) -> EmphasisLabels:
        """Argmax labels with confidences; ties break toward non-emphasis."""
        probs, _ = self.forward(utt, ann)
        labels = (probs[:, 1] > probs[:, 0]).astype(int)
        conf = probs.max(axis=1)
        return EmphasisLabels(
            utterance_id=utt.id,
            labels=tuple(int(l) for l in labels),
            confidences=tuple(float(c) for c in conf),
            source="predicted",
        )

    # -- loss / gradients ---------------------------------------------------

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def loss_and_grads(self, batch, class_weight_positive: float = 3.0):
        """Class-weighted cross-entropy over all characters in the batch.

        batch: iterable of (utt, ann, labels[, graph]) tuples. Returns
        (scalar loss, grads dict matching self.params).
        """
        grads = self.zero_grads()
        total_chars = sum(item[0].num_chars for item in batch)
        if total_chars == 0:
            raise EmptyDatasetError("batch contains no characters")
        loss = 0.0
        for item in batch:
            utt, ann, labels = item[0], item[1], item[2]
            graph = item[3] if len(item) > 3 else None
            if len(labels.labels) != utt.num_chars:
                raise LengthMismatchError(
                    f"{utt.id}: {len(labels.labels)} labels for {utt.num_chars} chars"
                )
            probs, cache = self.forward(utt, ann, graph)
            y = np.asarray(labels.labels, dtype=np.int64)
            w = np.where(y == 1, class_weight_positive, 1.0)
            picked = np.clip(probs[np.arange(len(y)), y], 1e-300, None)
            loss += float(np.sum(w * -np.log(picked))) / total_chars
            dlogits = probs.copy()
            dlogits[np.arange(len(y)), y] -= 1.0
            dlogits *= (w / total_chars)[:, None]
            self._backward(dlogits.astype(self.dtype), cache, grads)
        return loss, grads

    def _backward(self, dlogits, cache, grads):
        p = self.params
        hid, h_chars = cache["hid"], cache["h_chars"]
        grads["head_W2"] += dlogits.T @ hid
        grads["head_b2"] += dlogits.sum(axis=0)
        dhid = dlogits @ p["head_W2"]
        da1 = dhid * (hid > 0)
        grads["head_W1"] += da1.T @ h_chars
        grads["head_b1"] += da1.sum(axis=0)
        dh = np.zeros((h_chars.shape[0] + 2, h_chars.shape[1]), dtype=self.dtype)
        dh[1:-1] = da1 @ p["head_W1"]
        self._ggn_backward(dh, cache["ggn"], grads)
        self._init_backward(dh, cache["init"], grads)

    def _ggn_backward(self, dh, ggn_cache, grads):
        """BPTT through the propagation steps; dh is mutated into d(h0)."""
        p = self.params
        src, dst = ggn_cache["src"], ggn_cache["dst"]
        rel, dr, W_e = ggn_cache["rel"], ggn_cache["dir"], ggn_cache["W_e"]
        for step in reversed(ggn_cache["steps"]):
            h_prev, m = step["h_prev"], step["m"]
            z, r, c = step["z"], step["r"], step["c"]
            dh_new = dh
            dz = dh_new * (h_prev - c)
            dc = dh_new * (1.0 - z)
            dh_prev = dh_new * z
            dm = np.zeros_like(m)

            dac = dc * (1.0 - c * c)
            grads["gru_Wc"] += dac.T @ m
            grads["gru_Uc"] += dac.T @ (r * h_prev)
            grads["gru_bc"] += dac.sum(axis=0)
            dm += dac @ p["gru_Wc"]
            drh = dac @ p["gru_Uc"]
            dr_ = drh * h_prev
            dh_prev += drh * r

            dar = dr_ * r * (1.0 - r)
            grads["gru_Wr"] += dar.T @ m
            grads["gru_Ur"] += dar.T @ h_prev
            grads["gru_br"] += dar.sum(axis=0)
            dm += dar @ p["gru_Wr"]
            dh_prev += dar @ p["gru_Ur"]

            daz = dz * z * (1.0 - z)
            grads["gru_Wz"] += daz.T @ m
            grads["gru_Uz"] += daz.T @ h_prev
            grads["gru_bz"] += daz.sum(axis=0)
            dm += daz @ p["gru_Wz"]
            dh_prev += daz @ p["gru_Uz"]

            if len(src):
                dmsg = dm[dst]  # [E x H]
                np.add.at(grads["msg_W"], (rel, dr),
                          np.einsum("ei,ej->eij", dmsg, h_prev[src]))
                np.add.at(grads["msg_b"], (rel, dr), dmsg)
                back = np.einsum("eij,ei->ej", W_e, dmsg)
                np.add.at(dh_prev, src, back)
            dh[...] = dh_prev

    def _init_backward(self, dh0, init_cache, grads):
        p = self.params
        grads["bos"] += dh0[0]
        grads["eos"] += dh0[-1]
        dh_chars = dh0[1:-1]
        x = init_cache["x"]
        grads["proj_W"] += dh_chars.T @ x
        grads["proj_b"] += dh_chars.sum(axis=0)
        dx = dh_chars @ p["proj_W"]
        dpos = dx[:, self.config.semantic_dim:]
        np.add.at(grads["pos_table"], init_cache["pos_char_ids"], dpos)

    # -- checkpoint io ------------------------------------------------------

    def save(self, path) -> None:
        cfg = self.config
        meta = {
            "hidden_dim": cfg.hidden_dim,
            "num_iterations": cfg.num_iterations,
            "head_hidden": cfg.head_hidden,
            "pos_dim": cfg.pos_dim,
            "semantic_dim": cfg.semantic_dim,
            "seed": cfg.seed,
        }
        meta_blob = json.dumps(meta, sort_keys=True).encode("utf-8")
        tagset_hash = self.tagset.version_hash().encode("ascii")
        with open(path, "wb") as f:
            f.write(PEMO_MAGIC)
            f.write(struct.pack("<IIII", PEMO_VERSION, cfg.hidden_dim,
                                self.tagset.num_relations, cfg.semantic_dim))
            f.write(struct.pack("<H", len(tagset_hash)))
            f.write(tagset_hash)
            f.write(struct.pack("<q", cfg.seed))
            f.write(struct.pack("<I", len(meta_blob)))
            f.write(meta_blob)
            f.write(struct.pack("<I", len(self.params)))
            for name in sorted(self.params):
                arr = np.ascontiguousarray(self.params[name], dtype="<f4")
                nb = name.encode("utf-8")
                f.write(struct.pack("<I", len(nb)))
                f.write(nb)
                f.write(struct.pack("<I", arr.ndim))
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                f.write(arr.tobytes())

    @classmethod
    def load(cls, path, tagset: Tagset, provider: SemanticProvider) -> "PredictorModel":
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as exc:
            raise MalformedFileError(f"cannot read {path}: {exc}") from exc
        if len(data) < 20 or data[:4] != PEMO_MAGIC:
            raise MalformedFileError(f"{path}: not a PEMO checkpoint")
        version, hidden, num_rel, sem_dim = struct.unpack_from("<IIII", data, 4)
        if version != PEMO_VERSION:
            raise MalformedFileError(f"{path}: unsupported version {version}")
        off = 20
        (hash_len,) = struct.unpack_from("<H", data, off)
        off += 2
        stored_hash = data[off : off + hash_len].decode("ascii")
        off += hash_len
        (seed,) = struct.unpack_from("<q", data, off)
        off += 8
        (meta_len,) = struct.unpack_from("<I", data, off)
        off += 4
        meta = json.loads(data[off : off + meta_len].decode("utf-8"))
        off += meta_len
        if num_rel != tagset.num_relations:
            raise MalformedFileError(
                f"{path}: checkpoint has {num_rel} relations, tagset has "
                f"{tagset.num_relations}"
            )
        if stored_hash != tagset.version_hash():
            raise MalformedFileError(
                f"{path}: tagset hash mismatch (checkpoint {stored_hash})"
            )
        config = ModelConfig(
            hidden_dim=hidden,
            num_iterations=int(meta["num_iterations"]),
            head_hidden=int(meta["head_hidden"]),
            pos_dim=int(meta["pos_dim"]),
            semantic_dim=sem_dim,
            seed=int(seed),
        )
        model = cls(tagset, provider, config)
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        try:
            for _ in range(count):
                (name_len,) = struct.unpack_from("<I", data, off)
                off += 4
                name = data[off : off + name_len].decode("utf-8")
                off += name_len
                (ndim,) = struct.unpack_from("<I", data, off)
                off += 4
                shape = struct.unpack_from(f"<{ndim}I", data, off)
                off += 4 * ndim
                size = int(np.prod(shape)) if ndim else 1
                arr = np.frombuffer(
                    data[off : off + 4 * size], dtype="<f4"
                ).reshape(shape)
                off += 4 * size
                if name not in model.params or model.params[name].shape != arr.shape:
                    raise MalformedFileError(f"{path}: unexpected tensor {name}{shape}")
                model.params[name] = arr.astype(np.float32)
        except struct.error as exc:
            raise MalformedFileError(f"{path}: truncated checkpoint") from exc
        return model


# ---------------------------------------------------------------------------
# optimizers


class SgdOptimizer:
    def __init__(self, params: dict[str, np.ndarray], learning_rate: float):
        self.lr = learning_rate

    def step(self, params, grads):
        for k in params:
            params[k] -= (self.lr * grads[k]).astype(params[k].dtype)


class AdamOptimizer:
    """Adam with bias correction; beta = (0.9, 0.999), eps = 1e-8."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in params:
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            params[k] -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(
                params[k].dtype
            )


def make_optimizer(name: str, params, learning_rate: float):
    if name == "adam":
        return AdamOptimizer(params, learning_rate)
    return SgdOptimizer(params, learning_rate)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class Example:
    utt: Utterance
    ann: DepAnnotation
    labels: EmphasisLabels
    graph: CharGraph | None = None


def train(
    model: PredictorModel,
    dataset: list[Example],
    cfg: TrainConfig,
    val_dataset: list[Example] | None = None,
    log_path=None,
    checkpoint_path=None,
) -> list[dict]:
    """Deterministic mini-batch training over whole utterances.

    Returns the per-epoch log records; optionally appends them to an
    LDJSON file and writes a final checkpoint.
    """
    from .metrics import evaluate  # local import, avoids a cycle

    if not dataset:
        raise EmptyDatasetError("training dataset is empty")
    for ex in dataset:
        if ex.graph is None:
            ex.graph = build_char_graph(ex.utt, ex.ann, model.tagset)
    optimizer = make_optimizer(cfg.optimizer, model.params, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    records = []
    log_f = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(dataset))
            epoch_loss = 0.0
            num_batches = 0
            for start in range(0, len(dataset), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                batch = [
                    (dataset[i].utt, dataset[i].ann, dataset[i].labels,
                     dataset[i].graph)
                    for i in idx
                ]
                loss, grads = model.loss_and_grads(
                    batch, class_weight_positive=cfg.class_weight_positive
                )
                optimizer.step(model.params, grads)
                epoch_loss += loss
                num_batches += 1
            rec = {"epoch": epoch, "loss": epoch_loss / max(num_batches, 1)}
            if val_dataset:
                preds = {
                    ex.utt.id: model.predict(ex.utt, ex.ann) for ex in val_dataset
                }
                gold = {ex.utt.id: ex.labels for ex in val_dataset}
                m = evaluate(preds, gold)
                rec.update(
                    val_precision=m.precision, val_recall=m.recall, val_f=m.f_score
                )
            records.append(rec)
            if log_f:
                log_f.write(json.dumps(rec) + "\n")
                log_f.flush()
    finally:
        if log_f:
            log_f.close()
    if checkpoint_path:
        model.save(checkpoint_path)
    return records
