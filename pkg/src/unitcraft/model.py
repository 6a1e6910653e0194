"""The unit transformer: one fused sequence per step.

Each step encodes [dialogue ; previous action ; [CLS]+detection labels ;
region features ; memory state] with segment-type embeddings, runs two
pre-norm transformer layers, and decodes 17 action logits and object-class
logits from the concatenated fused action, [CLS], and memory-state
vectors. The fused memory-state output is the recurrent state handed to
the next step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import ParamStore, Tensor
from .scenegen import TEMPLATE_WORDS
from .world import (
    ACTION_KINDS,
    CLASSES,
    Detection,
    REGION_FEATURE_DIM,
)

_SPECIALS = ("[PAD]", "[CLS]", "[Start]", "[SEP]")
_SEG_DIALOGUE, _SEG_ACTION, _SEG_LABEL, _SEG_REGION, _SEG_STATE = range(5)
_GEOMETRY_EXTRAS = 6  # cx, cy, w, h, area, aspect appended to region features


class VocabError(ValueError):
    pass


class Vocab:
    """Closed token inventory: specials, the action names, the object class
    names, and the dialogue template words. Construction is deterministic,
    so checkpoints never need to carry it."""

    PAD, CLS, START, SEP = 0, 1, 2, 3

    def __init__(self) -> None:
        tokens = list(_SPECIALS) + list(ACTION_KINDS) + [c.name for c in CLASSES]
        for w in sorted(set(TEMPLATE_WORDS)):
            if w not in tokens:
                tokens.append(w)
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(tokens)}
        self._action_base = len(_SPECIALS)
        self._class_base = self._action_base + len(ACTION_KINDS)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def token_for_action(self, kind: str) -> int:
        if kind not in ACTION_KINDS:
            raise VocabError(f"unknown action kind: {kind}")
        return self._action_base + ACTION_KINDS.index(kind)

    def token_for_class(self, class_id: int) -> int:
        if not 0 <= class_id < len(CLASSES):
            raise VocabError(f"unknown class id: {class_id}")
        return self._class_base + class_id

    def encode_text(self, text: str) -> list[int]:
        ids = []
        for word in text.split():
            if word not in self.index:
                raise VocabError(f"word outside the closed vocabulary: {word!r}")
            ids.append(self.index[word])
        return ids

    def encode_dialogue(self, utterances) -> list[int]:
        """Utterance texts joined with [SEP] after each turn."""
        ids: list[int] = []
        for u in utterances:
            ids.extend(self.encode_text(u.text))
            ids.append(self.SEP)
        return ids


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    num_heads: int = 4
    num_layers: int = 2
    max_dialogue: int = 64
    max_detections: int = 16
    seed: int = 19980417


@dataclass
class ModelInput:
    dialogue_tokens: list[int]
    prev_action_token: int
    detections: tuple[Detection, ...]
    memory_state: Tensor | np.ndarray


@dataclass
class ModelOutput:
    action_logits: Tensor  # (17,)
    object_logits: Tensor  # (num classes,)
    new_state: Tensor  # (d,)


class UnitTransformer:
    def __init__(self, cfg: ModelConfig, vocab: Vocab):
        if cfg.d_model % cfg.num_heads:
            raise VocabError("d_model must divide evenly into heads")
        self.cfg = cfg
        self.vocab = vocab
        p = ParamStore(cfg.seed)
        d = cfg.d_model
        p.xavier("embed.table", (vocab.size, d))
        p.xavier("embed.pos", (cfg.max_dialogue, d))
        p.xavier("embed.segment", (5, d))
        p.xavier("region.w", (REGION_FEATURE_DIM + _GEOMETRY_EXTRAS, d))
        p.zeros("region.b", (d,))
        for i in range(cfg.num_layers):
            for proj in ("wq", "wk", "wv", "wo"):
                p.xavier(f"layer{i}.attn.{proj}", (d, d))
            for proj in ("bq", "bk", "bv", "bo"):
                p.zeros(f"layer{i}.attn.{proj}", (d,))
            p.ones(f"layer{i}.ln1.g", (d,))
            p.zeros(f"layer{i}.ln1.b", (d,))
            p.ones(f"layer{i}.ln2.g", (d,))
            p.zeros(f"layer{i}.ln2.b", (d,))
            p.xavier(f"layer{i}.ffn.w1", (d, 4 * d))
            p.zeros(f"layer{i}.ffn.b1", (4 * d,))
            p.xavier(f"layer{i}.ffn.w2", (4 * d, d))
            p.zeros(f"layer{i}.ffn.b2", (d,))
        p.ones("final_ln.g", (d,))
        p.zeros("final_ln.b", (d,))
        p.xavier("head.action.w", (3 * d, len(ACTION_KINDS)))
        p.zeros("head.action.b", (len(ACTION_KINDS),))
        p.xavier("head.object.w", (3 * d, len(CLASSES)))
        p.zeros("head.object.b", (len(CLASSES),))
        self.params = p

    # -- encoders --

    def _dialogue_ids(self, tokens: list[int]) -> tuple[np.ndarray, np.ndarray]:
        L = self.cfg.max_dialogue
        kept = tokens[-L:]  # keep the most recent turns
        ids = np.full(L, Vocab.PAD, dtype=np.int64)
        mask = np.zeros(L)
        ids[: len(kept)] = kept
        mask[: len(kept)] = 1.0
        return ids, mask

    def _region_matrix(self, detections: tuple[Detection, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        M = self.cfg.max_detections
        dets = detections[:M]
        label_ids = np.full(M, Vocab.PAD, dtype=np.int64)
        feats = np.zeros((M, REGION_FEATURE_DIM + _GEOMETRY_EXTRAS))
        mask = np.zeros(M)
        for i, det in enumerate(dets):
            label_ids[i] = self.vocab.token_for_class(det.label_id)
            x1, y1, x2, y2 = det.box
            w, h = x2 - x1, y2 - y1
            geom = ((x1 + x2) / 2, (y1 + y2) / 2, w, h, w * h, h / (w + 1e-8))
            feats[i] = np.asarray(det.region_feature + geom)
            mask[i] = 1.0
        return label_ids, feats, mask

    def _segment(self, seg: int) -> Tensor:
        return nn.embedding_lookup(self.params["embed.segment"], [seg])

    def encode_text(self, token_ids) -> Tensor:
        return nn.embedding_lookup(self.params["embed.table"], token_ids)

    def encode_action(self, token_id: int) -> Tensor:
        return nn.embedding_lookup(self.params["embed.table"], [token_id])

    # -- transformer --

    def _layer(self, x: Tensor, i: int, mask: np.ndarray) -> Tensor:
        p = self.params
        h = nn.layernorm(x, p[f"layer{i}.ln1.g"], p[f"layer{i}.ln1.b"])
        q = nn.add(nn.matmul(h, p[f"layer{i}.attn.wq"]), p[f"layer{i}.attn.bq"])
        k = nn.add(nn.matmul(h, p[f"layer{i}.attn.wk"]), p[f"layer{i}.attn.bk"])
        v = nn.add(nn.matmul(h, p[f"layer{i}.attn.wv"]), p[f"layer{i}.attn.bv"])
        att = nn.multi_head_attention(q, k, v, mask, self.cfg.num_heads)
        att = nn.add(nn.matmul(att, p[f"layer{i}.attn.wo"]), p[f"layer{i}.attn.bo"])
        x = nn.add(x, att)
        h = nn.layernorm(x, p[f"layer{i}.ln2.g"], p[f"layer{i}.ln2.b"])
        h = nn.gelu(nn.add(nn.matmul(h, p[f"layer{i}.ffn.w1"]), p[f"layer{i}.ffn.b1"]))
        h = nn.add(nn.matmul(h, p[f"layer{i}.ffn.w2"]), p[f"layer{i}.ffn.b2"])
        return nn.add(x, h)

    def forward(self, inp: ModelInput, zero_slots: frozenset[str] = frozenset()) -> ModelOutput:
        p = self.params
        L, M = self.cfg.max_dialogue, self.cfg.max_detections

        ids, dlg_mask = self._dialogue_ids(inp.dialogue_tokens)
        dlg = nn.add(self.encode_text(ids), p["embed.pos"])
        dlg = nn.add(dlg, self._segment(_SEG_DIALOGUE))

        act = nn.add(self.encode_action(inp.prev_action_token), self._segment(_SEG_ACTION))

        label_ids, feats, det_mask = self._region_matrix(inp.detections)
        label_ids = np.concatenate(([Vocab.CLS], label_ids))
        labels = nn.add(self.encode_text(label_ids), self._segment(_SEG_LABEL))

        regions = nn.add(nn.matmul(Tensor(feats), p["region.w"]), p["region.b"])
        regions = nn.add(regions, self._segment(_SEG_REGION))

        memory = inp.memory_state
        if not isinstance(memory, Tensor):
            memory = Tensor(np.asarray(memory, dtype=np.float64))
        state = nn.add(nn.reshape(memory, (1, self.cfg.d_model)), self._segment(_SEG_STATE))

        x = nn.concat([dlg, act, labels, regions, state], axis=0)
        mask = np.concatenate((dlg_mask, [1.0, 1.0], det_mask, det_mask, [1.0]))

        for i in range(self.cfg.num_layers):
            x = self._layer(x, i, mask)
        x = nn.layernorm(x, p["final_ln.g"], p["final_ln.b"])

        idx_action = L
        idx_cls = L + 1
        idx_state = L + 3 + 2 * M - 1
        a_vec = nn.gather_rows(x, [idx_action])
        c_vec = nn.gather_rows(x, [idx_cls])
        s_vec = nn.gather_rows(x, [idx_state])
        new_state = nn.reshape(s_vec, (self.cfg.d_model,))
        if "action" in zero_slots:
            a_vec = nn.scale(a_vec, 0.0)
        if "cls" in zero_slots:
            c_vec = nn.scale(c_vec, 0.0)
        if "state" in zero_slots:
            s_vec = nn.scale(s_vec, 0.0)
        trio = nn.concat([a_vec, c_vec, s_vec], axis=1)
        action_logits = nn.reshape(
            nn.add(nn.matmul(trio, p["head.action.w"]), p["head.action.b"]),
            (len(ACTION_KINDS),),
        )
        object_logits = nn.reshape(
            nn.add(nn.matmul(trio, p["head.object.w"]), p["head.object.b"]),
            (len(CLASSES),),
        )
        return ModelOutput(action_logits, object_logits, new_state)

    # -- bookkeeping --

    def cls_embedding(self) -> np.ndarray:
        """Detached copy of the [CLS] row, the default initial memory."""
        return self.params["embed.table"].data[Vocab.CLS].copy()

    def parameter_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for name, t in self.params.items():
            block = name.split(".")[0]
            counts[block] = counts.get(block, 0) + t.data.size
        counts["total"] = sum(v for k, v in counts.items() if k != "total")
        return counts

    def save(self, path: str) -> None:
        nn.save_checkpoint(path, self.params)

    def load(self, path: str) -> None:
        self.params.load_arrays(nn.load_checkpoint(path))
